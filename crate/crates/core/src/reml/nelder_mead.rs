//! Derivative-free simplex minimization.
//!
//! Standard reflection / expansion / contraction / shrink moves with coefficients
//! 1, 2, 1/2, 1/2. Non-finite objective values are treated as `+inf`, which lets the caller
//! mark infeasible points without aborting the search.

#[derive(Clone, Debug)]
pub struct Options {
    pub max_iters: usize,
    /// Convergence threshold on the spread of objective values over the simplex, relative to
    /// `1 + |f_best|`.
    pub ftol: f64,
    /// Initial edge length of the simplex along each coordinate.
    pub initial_step: f64,
    /// Number of fresh-simplex restarts from the converged point.
    pub restarts: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iters: 400,
            ftol: 1e-10,
            initial_step: 1.0,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize<F>(f: F, start: &[f64], opts: &Options) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = run(&eval, start, opts, opts.max_iters);
    let mut used = best.iterations;
    for _ in 0..opts.restarts {
        if used >= opts.max_iters || !best.f.is_finite() {
            break;
        }
        let again = run(&eval, &best.x, opts, opts.max_iters - used);
        used += again.iterations;
        let improved = again.f < best.f - opts.ftol * (1.0 + best.f.abs());
        if again.f <= best.f {
            best = Minimum {
                iterations: used,
                ..again
            };
        } else {
            best.iterations = used;
        }
        if !improved {
            break;
        }
    }
    best.iterations = used;
    best
}

fn run<F>(f: &F, start: &[f64], opts: &Options, budget: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    if dim == 0 {
        return Minimum {
            x: vec![],
            f: f(start),
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for j in 0..dim {
        let mut v = start.to_vec();
        v[j] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        order(&mut simplex, &mut values);
        let (lo, hi) = (values[0], values[dim]);
        if lo.is_finite() && hi - lo <= opts.ftol * (1.0 + lo.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=dim {
            for k in 0..dim {
                simplex[i][k] = best[k] + 0.5 * (simplex[i][k] - best[k]);
            }
            values[i] = f(&simplex[i]);
        }
    }
    order(&mut simplex, &mut values);
    Minimum {
        x: simplex.swap_remove(0),
        f: values[0],
        iterations,
        converged,
    }
}

/// Sorts vertices by objective value; ties keep their current order.
fn order(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
    let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    *simplex = s;
    *values = v;
}
