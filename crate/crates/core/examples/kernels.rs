//! Correlation of the four kernel families along one normalized axis.

use nalgebra::DMatrix;
use ukcal::kernels::{correlation, covariance_matrix};
use ukcal::{CovarianceSpec, Design, KernelFamily};

fn main() -> ukcal::Result<()> {
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "h", "exponential", "matern32", "matern52", "gaussian"
    );
    for i in 0..=10 {
        let h = i as f64 * 0.1;
        let row: Vec<f64> = KernelFamily::ALL
            .iter()
            .map(|&f| {
                let spec = CovarianceSpec::new(f, 1.0, vec![0.5]).unwrap();
                correlation(&spec, &[0.0], &[h]).unwrap()
            })
            .collect();
        println!(
            "{h:>6.2} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            row[0], row[1], row[2], row[3]
        );
    }

    // Anisotropic lengths on a small 2-d design.
    let design = Design::new(DMatrix::from_row_slice(
        3,
        2,
        &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
    ))?;
    let spec = CovarianceSpec::new(KernelFamily::Matern52, 2.0, vec![0.3, 3.0])?;
    println!(
        "\nsigma2 C_l on a 2-d design, l = (0.3, 3.0):\n{}",
        covariance_matrix(&spec, &design)?
    );
    Ok(())
}
