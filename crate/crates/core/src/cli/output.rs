use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::display;
use crate::crossval::CvReport;
use crate::dataset::Table;
use crate::error::{Error, Result};

/// The single writer of a run's report files.
pub(super) struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: display(&dir),
            source,
        })?;
        Ok(OutputDir { dir })
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| Error::Io {
            path: display(&path),
            source,
        })?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn table(&self, name: &str, table: &Table) -> Result<()> {
        self.text(name, &table.to_csv())
    }
}

/// One row per held-out point, in data order.
pub(super) fn cv_points(report: &CvReport) -> Table {
    let mut t = Table::new(
        [
            "index",
            "fold",
            "observed",
            "mean",
            "sd",
            "obs_sd",
            "covered",
            "calibrated_model",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut rows: Vec<(usize, Vec<f64>)> = report
        .per_fold
        .iter()
        .flat_map(|f| {
            f.held_out.iter().map(move |h| {
                (
                    h.index,
                    vec![
                        h.index as f64,
                        f.fold as f64,
                        h.observed,
                        h.mean,
                        h.sd,
                        h.obs_sd,
                        f64::from(u8::from(h.covered)),
                        h.calibrated_model,
                    ],
                )
            })
        })
        .collect();
    rows.sort_by_key(|(i, _)| *i);
    for (_, r) in rows {
        t.push(r);
    }
    t
}
