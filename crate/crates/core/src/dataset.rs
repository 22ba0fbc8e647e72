//! Header-rowed, delimiter-separated numeric tables.
//!
//! The delimiter (tab, semicolon or comma) is sniffed from the header line. Every data cell
//! must parse as a finite number. Values are written with Rust's shortest round-trip float
//! formatting, so a written table re-loads bit-identically.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gpmodel::{Bounds, Design, LinearModel, NominalShift, Observations};

/// A rectangular numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Comma-separated text, one header line then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn sniff_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else if header.contains(';') {
        b';'
    } else {
        b','
    }
}

/// Parses a table from text. `source` names the input in error messages.
pub fn parse_table(text: &str, source: &str) -> Result<Table> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    let Some(first) = first else {
        return Err(Error::Data(format!("{source}: empty file (no header row)")));
    };
    let delimiter = sniff_delimiter(first);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{source}: unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(dup) = header
        .iter()
        .enumerate()
        .find(|(i, h)| header[..*i].contains(h))
        .map(|(_, h)| h)
    {
        return Err(Error::Data(format!("{source}: duplicate column \"{dup}\"")));
    }
    if let Some(j) = header.iter().position(|h| h.is_empty()) {
        return Err(Error::Data(format!(
            "{source}: header cell {} is empty",
            j + 1
        )));
    }

    let mut table = Table::new(header);
    for (k, record) in reader.records().enumerate() {
        let row_no = k + 1;
        let record = record.map_err(|e| Error::Data(format!("{source}: row {row_no}: {e}")))?;
        if record.len() != table.header.len() {
            return Err(Error::Data(format!(
                "{source}: row {row_no} has {} cells, header has {}",
                record.len(),
                table.header.len()
            )));
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            let name = &table.header[j];
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "{source}: row {row_no}, column \"{name}\": non-numeric value {cell:?}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{source}: row {row_no}, column \"{name}\": non-finite value {cell:?}"
                )));
            }
            row.push(v);
        }
        table.rows.push(row);
    }
    if table.rows.is_empty() {
        return Err(Error::Data(format!(
            "{source}: empty dataset (header only)"
        )));
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text, &path.display().to_string())
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    fs::write(path, table.to_csv()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Which columns of a table play which role.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schema {
    /// Condition columns; empty means every column not claimed by another role.
    pub conditions: Vec<String>,
    pub output: String,
    /// Precomputed columns of `H`.
    pub h_columns: Vec<String>,
    /// Model output at the nominal parameters, paired with `h_columns`.
    pub nominal: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub condition_names: Vec<String>,
    pub output_name: String,
    /// `n x d` experimental conditions.
    pub conditions: DMatrix<f64>,
    pub output: DVector<f64>,
    pub h_names: Vec<String>,
    /// `n x m` precomputed derivatives, when the schema names them.
    pub h: Option<DMatrix<f64>>,
    pub nominal: Option<DVector<f64>>,
    /// Data range of each condition column.
    pub bounds: Vec<Bounds>,
}

impl Dataset {
    pub fn from_table(table: &Table, schema: &Schema, source: &str) -> Result<Dataset> {
        let index = |name: &str| -> Result<usize> {
            table.column_index(name).ok_or_else(|| {
                Error::Data(format!(
                    "{source}: missing column \"{name}\" (have: {})",
                    table.header.join(", ")
                ))
            })
        };
        let out_j = index(&schema.output)?;
        let h_js: Vec<usize> = schema
            .h_columns
            .iter()
            .map(|c| index(c))
            .collect::<Result<_>>()?;
        let nom_j = schema.nominal.as_deref().map(index).transpose()?;
        let cond_js: Vec<usize> = if schema.conditions.is_empty() {
            (0..table.header.len())
                .filter(|j| *j != out_j && !h_js.contains(j) && Some(*j) != nom_j)
                .collect()
        } else {
            schema
                .conditions
                .iter()
                .map(|c| index(c))
                .collect::<Result<_>>()?
        };
        if cond_js.is_empty() {
            return Err(Error::Data(format!("{source}: no condition columns")));
        }
        if cond_js.contains(&out_j) {
            return Err(Error::Data(format!(
                "{source}: column \"{}\" is both a condition and the output",
                schema.output
            )));
        }

        let n = table.rows.len();
        let pick = |js: &[usize]| DMatrix::from_fn(n, js.len(), |i, k| table.rows[i][js[k]]);
        let conditions = pick(&cond_js);
        let bounds = (0..conditions.ncols())
            .map(|k| {
                let c = conditions.column(k);
                Bounds {
                    min: c.min(),
                    max: c.max(),
                }
            })
            .collect();
        Ok(Dataset {
            condition_names: cond_js.iter().map(|&j| table.header[j].clone()).collect(),
            output_name: schema.output.clone(),
            conditions,
            output: DVector::from_fn(n, |i, _| table.rows[i][out_j]),
            h_names: schema.h_columns.clone(),
            h: (!h_js.is_empty()).then(|| pick(&h_js)),
            nominal: nom_j.map(|j| DVector::from_fn(n, |i, _| table.rows[i][j])),
            bounds,
        })
    }

    pub fn n(&self) -> usize {
        self.output.len()
    }

    pub fn dim(&self) -> usize {
        self.conditions.ncols()
    }

    pub fn design(&self) -> Result<Design> {
        Design::with_bounds(self.conditions.clone(), self.bounds.clone())?
            .with_labels(self.condition_names.clone())
    }

    pub fn observations(&self) -> Result<Observations> {
        Observations::new(self.output.iter().copied().collect())
    }

    /// Tabulated linear model from the `H` columns, shifted by the nominal column and
    /// `beta_nom` when both are given; the affine basis `(1, x)` otherwise.
    pub fn linear_model(&self, beta_nom: Option<&[f64]>) -> Result<LinearModel> {
        match &self.h {
            Some(h) => {
                let lm = LinearModel::tabulated(h.clone())?;
                match (&self.nominal, beta_nom) {
                    (Some(f_nom), Some(b)) => lm.with_shift(NominalShift {
                        beta_nom: DVector::from_column_slice(b),
                        f_nom: f_nom.clone(),
                    }),
                    (Some(f_nom), None) => lm.with_shift(NominalShift {
                        beta_nom: DVector::zeros(h.ncols()),
                        f_nom: f_nom.clone(),
                    }),
                    (None, _) => Ok(lm),
                }
            }
            None => LinearModel::affine(&self.design()?),
        }
    }
}

/// New points for prediction: condition columns plus, for tabulated models, `H` and nominal
/// columns. An output column, when present, is kept for comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub conditions: DMatrix<f64>,
    pub h: Option<DMatrix<f64>>,
    pub nominal: Option<DVector<f64>>,
    pub observed: Option<DVector<f64>>,
}

impl PointSet {
    /// Selects the columns named by `schema`; only the output column may be missing.
    pub fn from_table(table: &Table, schema: &Schema, source: &str) -> Result<PointSet> {
        let has_output = table.column_index(&schema.output).is_some();
        let mut patched;
        let table = if has_output {
            table
        } else {
            patched = table.clone();
            patched.header.push(schema.output.clone());
            for row in &mut patched.rows {
                row.push(0.0);
            }
            &patched
        };
        let d = Dataset::from_table(table, schema, source)?;
        Ok(PointSet {
            conditions: d.conditions,
            h: d.h,
            nominal: d.nominal,
            observed: has_output.then_some(d.output),
        })
    }

    pub fn n(&self) -> usize {
        self.conditions.nrows()
    }
}

pub fn load_points(path: &Path, schema: &Schema) -> Result<PointSet> {
    let table = read_table(path)?;
    PointSet::from_table(&table, schema, &path.display().to_string())
}

pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let table = read_table(path)?;
    Dataset::from_table(&table, schema, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(output: &str) -> Schema {
        Schema {
            output: output.into(),
            ..Schema::default()
        }
    }

    #[test]
    fn parabola_file() {
        let t = parse_table("x,y\n0.2,0.04\n0.5,0.25\n0.8,0.64\n", "p").unwrap();
        let d = Dataset::from_table(&t, &schema("y"), "p").unwrap();
        assert_eq!((d.n(), d.dim()), (3, 1));
        assert_eq!(d.bounds[0], Bounds { min: 0.2, max: 0.8 });
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let err = parse_table("x,y\n0.2,0.04\n0.5,NaN\n", "f").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("row 2") && msg.contains("column \"y\""),
            "{msg}"
        );
        let err = parse_table("x,y\n0.2,abc\n", "f").unwrap_err().to_string();
        assert!(
            err.contains("row 1") && err.contains("non-numeric"),
            "{err}"
        );
    }

    #[test]
    fn header_only() {
        let err = parse_table("x,y\n", "f").unwrap_err();
        assert!(err.to_string().contains("empty dataset"));
        assert_eq!(err.kind(), crate::ErrorKind::Data);
    }

    #[test]
    fn ragged_rows() {
        let err = parse_table("x,y\n1,2\n3\n", "f").unwrap_err().to_string();
        assert!(err.contains("row 2 has 1 cells"), "{err}");
    }

    #[test]
    fn missing_column() {
        let t = parse_table("x,y\n1,2\n", "f").unwrap();
        let err = Dataset::from_table(&t, &schema("z"), "f").unwrap_err();
        assert!(err.to_string().contains("missing column \"z\""));
    }

    #[test]
    fn delimiters_are_sniffed() {
        for text in ["a\tb\n1\t2\n", "a;b\n1;2\n", "a, b\n1, 2\n"] {
            let t = parse_table(text, "f").unwrap();
            assert_eq!(t.header, vec!["a", "b"]);
            assert_eq!(t.rows, vec![vec![1.0, 2.0]]);
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![0.1 + 0.2, 1.0 / 3.0]);
        t.push(vec![-1.2345678901234567e-300, 6.02214076e23]);
        let back = parse_table(&t.to_csv(), "mem").unwrap();
        for (r, s) in t.rows.iter().zip(&back.rows) {
            for (a, b) in r.iter().zip(s) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn h_columns_and_nominal() {
        let t = parse_table("x,h0,h1,nom,y\n0,1,0,5,5\n1,1,1,6,7\n2,1,2,7,9\n", "f").unwrap();
        let s = Schema {
            output: "y".into(),
            h_columns: vec!["h0".into(), "h1".into()],
            nominal: Some("nom".into()),
            ..Schema::default()
        };
        let d = Dataset::from_table(&t, &s, "f").unwrap();
        assert_eq!(d.condition_names, vec!["x"]);
        let lm = d.linear_model(Some(&[1.0, 2.0])).unwrap();
        assert_eq!(lm.m(), 2);
        assert_eq!(lm.f_nom()[2], 7.0);
    }
}
