//! Loading a delimiter-separated table, calibrating the affine trend and predicting at new
//! points.

use nalgebra::DMatrix;
use ukcal::dataset::{parse_table, Dataset, Schema};
use ukcal::infer::{calibrate, confidence_interval, predict};
use ukcal::{CovarianceSpec, KernelFamily, Level, NoiseSpec};

const TABLE: &str = "x;y\n0.0;1.02\n0.2;1.31\n0.4;1.38\n0.6;1.52\n0.8;1.87\n1.0;2.01\n";

fn main() -> ukcal::Result<()> {
    let table = parse_table(TABLE, "inline")?;
    let schema = Schema {
        output: "y".into(),
        ..Schema::default()
    };
    let data = Dataset::from_table(&table, &schema, "inline")?;
    let inputs = ukcal::crossval::CvInputs {
        design: data.design()?,
        obs: data.observations()?,
        linmodel: data.linear_model(None)?,
        noise: NoiseSpec::homoscedastic(0.02)?,
        prior: None,
    };
    let model = inputs.assemble(CovarianceSpec::new(
        KernelFamily::Gaussian,
        0.01,
        vec![0.3],
    )?)?;
    let c = calibrate(&model)?;
    println!("trend (1, x): beta = {:.4?}", c.beta.as_slice());
    let new = DMatrix::from_column_slice(3, 1, &[0.1, 0.5, 1.2]);
    for x in new.row_iter() {
        let p = predict(&model, &c, &[x[0]])?;
        let (lo, hi) = confidence_interval(&p, Level::P90);
        println!(
            "x = {:.2}: {:.4} (90% [{:.4}, {:.4}])",
            x[0], p.mean, lo, hi
        );
    }
    Ok(())
}
