//! The parabola-versus-line example: calibrate the line `beta_0 + beta_1 x` against noiseless
//! observations of `x^2` and predict with the inferred model error.

use ukcal::cli::{demo_parabola, ParabolaRegime};

fn main() -> ukcal::Result<()> {
    for regime in [ParabolaRegime::NoPrior, ParabolaRegime::Prior] {
        let r = demo_parabola(regime, 11)?;
        let c = &r.calibration;
        println!(
            "{regime:?}: beta = ({:.4}, {:.4}), corr(beta_0, beta_1) = {:.3}",
            c.beta[0], c.beta[1], c.correlation[0][1]
        );
        println!(
            "{:>5} {:>8} {:>8} {:>8} {:>17}",
            "x", "x^2", "line", "mean", "95% interval"
        );
        for g in &r.grid {
            println!(
                "{:>5.2} {:>8.4} {:>8.4} {:>8.4} [{:>7.4}, {:>7.4}]",
                g.x, g.truth, g.calibrated_line, g.mean, g.lo95, g.hi95
            );
        }
        println!();
    }
    Ok(())
}
