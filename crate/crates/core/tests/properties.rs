mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ukcal::crossval::{partition, run_cv, run_cv_with_spec, CvInputs, CvMode, FoldPartition};
use ukcal::gpmodel::total_covariance;
use ukcal::infer::{calibrate, predict, predict_many};
use ukcal::kernels::{correlation, covariance_vector};
use ukcal::linalg::cholesky_strict;
use ukcal::reml::{
    estimate_hyperparameters, orthogonal_contrasts, reml_objective_contrast, reml_objective_svd,
};
use ukcal::{
    CovarianceSpec, GpModel, KernelFamily, LinearModel, NoiseSpec, Observations, OptimizerConfig,
    Prior,
};

use common::{basis, random_instance, rel_close, unit_design, uniform_points};

fn family() -> impl Strategy<Value = KernelFamily> {
    prop::sample::select(KernelFamily::ALL.to_vec())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close_scaled(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

fn small_cv_inputs(seed: u64, n: usize) -> CvInputs {
    let mut r = rng(seed);
    let design = unit_design(uniform_points(&mut r, n, 1));
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let x = design.points()[(i, 0)];
            0.5 + x + 0.3 * (6.0 * x).sin() + 0.05 * r.random::<f64>()
        })
        .collect();
    CvInputs {
        linmodel: LinearModel::affine(&design).unwrap(),
        obs: Observations::new(y).unwrap(),
        noise: NoiseSpec::homoscedastic(0.05).unwrap(),
        prior: None,
        design,
    }
}

fn quick_optimizer(seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        n_starts: 3,
        max_iters: 150,
        seed,
        ..OptimizerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn correlation_in_unit_interval_and_symmetric(
        fam in family(),
        l in prop::collection::vec(0.1f64..1.0, 2),
        xa in prop::collection::vec(0.0f64..1.0, 2),
        xb in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let spec = CovarianceSpec::new(fam, 1.0, l).unwrap();
        let c = correlation(&spec, &xa, &xb).unwrap();
        prop_assert!(c > 0.0 && c <= 1.0, "{c}");
        prop_assert_eq!(c, correlation(&spec, &xb, &xa).unwrap());
        prop_assert_eq!(correlation(&spec, &xa, &xa).unwrap(), 1.0);
    }

    #[test]
    fn correlation_decreases_along_a_ray(
        fam in family(),
        l in 0.05f64..2.0,
        h in 1e-3f64..1.0,
        step in 1e-3f64..1.0,
    ) {
        let spec = CovarianceSpec::new(fam, 1.0, vec![l]).unwrap();
        let near = correlation(&spec, &[0.0], &[h]).unwrap();
        let far = correlation(&spec, &[0.0], &[-(h + step)]).unwrap();
        prop_assert!(far < near || (far == 0.0 && near == 0.0), "{near} then {far}");
    }

    #[test]
    fn doubling_lengths_equals_halving_differences(
        fam in family(),
        l in prop::collection::vec(0.01f64..10.0, 3),
        h in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let doubled: Vec<f64> = l.iter().map(|v| 2.0 * v).collect();
        let halved: Vec<f64> = h.iter().map(|v| v / 2.0).collect();
        let a = correlation(&CovarianceSpec::new(fam, 1.0, doubled).unwrap(), &[0.0; 3], &h).unwrap();
        let b = correlation(&CovarianceSpec::new(fam, 1.0, l).unwrap(), &[0.0; 3], &halved).unwrap();
        prop_assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_with_noise_is_positive_definite(
        seed in any::<u64>(),
        fam in family(),
        n in 3usize..25,
        dups in 0usize..5,
        sigma_mes in 0.01f64..1.0,
        sigma2 in 0.01f64..100.0,
        l in 1e-3f64..100.0,
    ) {
        let mut r = rng(seed);
        let mut pts = uniform_points(&mut r, n, 2);
        for k in 0..dups.min(n - 2) {
            let src = pts.row(k).clone_owned();
            pts.row_mut(k + 1).copy_from(&src);
        }
        let design = unit_design(pts);
        let spec = CovarianceSpec::new(fam, sigma2, vec![l, l]).unwrap();
        let noise = NoiseSpec::homoscedastic(sigma_mes).unwrap();
        let total = total_covariance(&spec, &design, &noise).unwrap();
        prop_assert_eq!(&total, &total.transpose());
        prop_assert!(cholesky_strict(&total).is_some());
    }

    #[test]
    fn cached_h_matches_basis(seed in any::<u64>(), n in 3usize..12, m in 1usize..4) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, n.max(m + 1), 2, m, KernelFamily::Matern52, false);
        let f = basis(m);
        for i in 0..model.n() {
            let row = f(&model.design().point(i));
            for (j, want) in row.iter().enumerate() {
                prop_assert!(rel_close(model.h()[(i, j)], *want, 1e-12));
            }
        }
    }

    #[test]
    fn factor_reproduces_r(seed in any::<u64>(), fam in family(), n in 2usize..30) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, n, 2, 1, fam, false);
        let rm = model.r();
        prop_assert_eq!(rm, &rm.transpose());
        let l = model.factor().l();
        let gap = (&l * l.transpose() - rm).amax();
        prop_assert!(gap <= 1e-10 * rm.amax(), "gap {gap}");
    }

    #[test]
    fn shift_convention_matches_unshifted_problem(
        seed in any::<u64>(),
        with_prior in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let base = random_instance(&mut r, 8, 2, 2, KernelFamily::Matern32, with_prior);
        let beta_nom = DVector::from_fn(2, |_, _| r.random_range(-3.0..3.0));
        let f_nom = DVector::from_fn(8, |_, _| r.random_range(-5.0..5.0));
        let shifted_lm = LinearModel::tabulated(base.h().clone())
            .unwrap()
            .with_shift(ukcal::gpmodel::NominalShift { beta_nom: beta_nom.clone(), f_nom: f_nom.clone() })
            .unwrap();
        // An exactly linear model: f(x, beta) = f_nom + H (beta - beta_nom).
        let y_abs = base.observations().values() + &f_nom - base.h() * &beta_nom;
        let shifted = GpModel::assemble(
            base.design().clone(),
            Observations::new(y_abs.iter().copied().collect()).unwrap(),
            shifted_lm,
            base.covariance().clone(),
            base.noise().clone(),
            base.prior().cloned(),
        )
        .unwrap();
        let plain = calibrate(&base).unwrap();
        let shift = calibrate(&shifted).unwrap();
        for j in 0..2 {
            let want = plain.beta_unshifted[j];
            prop_assert!(close_scaled(shift.beta_unshifted[j], want, 1e-9, 1.0));
            for k in 0..2 {
                prop_assert!(close_scaled(shift.covariance[(j, k)], plain.covariance[(j, k)], 1e-9, 1e-6));
            }
        }
    }

    #[test]
    fn reml_forms_differ_by_a_constant(seed in any::<u64>(), fam in family(), n in 5usize..12) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, n, 2, 2, fam, false);
        let w = orthogonal_contrasts(model.h());
        let mut diffs = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let spec = CovarianceSpec::new(fam, 0.2 * 3f64.powi(i), vec![0.1 + 0.15 * j as f64; 2]).unwrap();
                let a = reml_objective_svd(&model, &spec).unwrap();
                let b = reml_objective_contrast(&model, &spec, &w).unwrap();
                if a.valid && b.valid {
                    diffs.push(a.q - b.q);
                }
            }
        }
        prop_assume!(diffs.len() > 1);
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        for d in &diffs {
            prop_assert!((d - mean).abs() <= 1e-8, "{d} vs {mean}");
        }
    }

    #[test]
    fn reml_ignores_trend_shifts(seed in any::<u64>(), b in prop::collection::vec(-100.0f64..100.0, 2)) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 9, 2, 2, KernelFamily::Gaussian, false);
        let spec = model.covariance().clone();
        let y = model.observations().values() + model.h() * DVector::from_vec(b);
        let moved = model.with_observations(Observations::new(y.iter().copied().collect()).unwrap()).unwrap();
        let q0 = reml_objective_svd(&model, &spec).unwrap().q;
        let q1 = reml_objective_svd(&moved, &spec).unwrap().q;
        prop_assert!((q0 - q1).abs() <= 1e-8, "{q0} vs {q1}");
    }

    #[test]
    fn prediction_is_affine_in_observations(
        seed in any::<u64>(),
        fam in family(),
        with_prior in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 7, 2, 2, fam, with_prior);
        let y1 = model.observations().values().clone();
        let y2 = DVector::from_fn(7, |_, _| r.random_range(-2.0..2.0));
        let x: Vec<f64> = vec![r.random(), r.random()];
        let pred = |y: DVector<f64>| {
            let m = model.with_observations(Observations::new(y.iter().copied().collect()).unwrap()).unwrap();
            let c = calibrate(&m).unwrap();
            predict(&m, &c, &x).unwrap().mean
        };
        let lhs = pred(&y1 + &y2) + pred(DVector::zeros(7));
        let rhs = pred(y1) + pred(y2);
        prop_assert!(close_scaled(lhs, rhs, 1e-9, 1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn noiseless_model_interpolates(
        seed in any::<u64>(),
        fam in family(),
        n in 3usize..8,
        with_prior in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let design = unit_design(uniform_points(&mut r, n, 2));
        let lm = LinearModel::from_basis(&design, 2, basis(2)).unwrap();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let spec = CovarianceSpec::new(fam, r.random_range(0.5..2.0), vec![r.random_range(0.1..0.4); 2]).unwrap();
        let prior = with_prior.then(|| Prior::diagonal(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap());
        let model = GpModel::assemble(design, Observations::new(y.clone()).unwrap(), lm, spec.clone(), NoiseSpec::Homoscedastic(0.0), prior).unwrap();
        // Interpolation is only exact when no jitter was needed.
        prop_assume!(model.factor().jitter == 0.0);
        let calib = calibrate(&model).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let p = predict(&model, &calib, &model.design().point(i)).unwrap();
            prop_assert!((p.mean - yi).abs() <= 1e-8 * (1.0 + yi.abs()), "{} vs {yi}", p.mean);
            prop_assert!(p.variance <= 1e-10 * spec.sigma2, "{}", p.variance);
        }
    }

    #[test]
    fn vague_prior_matches_no_prior(seed in any::<u64>(), fam in family()) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 8, 2, 2, fam, false);
        let mean = vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let vague = model.with_prior(Some(Prior::diagonal(mean, vec![1e8, 1e8]).unwrap())).unwrap();
        let (c0, c1) = (calibrate(&model).unwrap(), calibrate(&vague).unwrap());
        for _ in 0..5 {
            let x = vec![r.random(), r.random()];
            let (p0, p1) = (predict(&model, &c0, &x).unwrap(), predict(&vague, &c1, &x).unwrap());
            prop_assert!(close_scaled(p1.mean, p0.mean, 1e-4, 1e-3), "{} vs {}", p1.mean, p0.mean);
            prop_assert!(rel_close(p1.variance, p0.variance, 1e-4), "{} vs {}", p1.variance, p0.variance);
        }
    }

    #[test]
    fn calibration_term_only_adds_variance(
        seed in any::<u64>(),
        fam in family(),
        with_prior in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 8, 2, 2, fam, with_prior);
        let calib = calibrate(&model).unwrap();
        let r_inv = model.r().clone().try_inverse().unwrap();
        let spec = model.covariance();
        for _ in 0..5 {
            let x = vec![r.random(), r.random()];
            let rv = covariance_vector(spec, model.design(), &x).unwrap();
            let without = spec.sigma2 - (rv.transpose() * &r_inv * &rv)[0];
            let p = predict(&model, &calib, &x).unwrap();
            prop_assert!(p.variance >= without - 1e-12 * spec.sigma2, "{} < {without}", p.variance);
            prop_assert!(close_scaled(p.mean, p.calibrated_model_term + p.inferred_model_error_term, 1e-10, 1e-12));
        }
    }

    #[test]
    fn batch_prediction_matches_sequential(seed in any::<u64>(), fam in family()) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 10, 2, 3, fam, true);
        let calib = calibrate(&model).unwrap();
        let points: Vec<Vec<f64>> = (0..40).map(|_| vec![r.random(), r.random()]).collect();
        let batch = predict_many(&model, &calib, &points).unwrap();
        for (x, p) in points.iter().zip(&batch) {
            prop_assert_eq!(&predict(&model, &calib, x).unwrap(), p);
        }
    }

    #[test]
    fn cv_scalars_follow_from_the_residuals(seed in any::<u64>(), n in 8usize..30, k in 2usize..6) {
        let inputs = small_cv_inputs(seed, n);
        let part = partition(&inputs.design, k, seed).unwrap();
        let spec = CovarianceSpec::new(KernelFamily::Matern52, 0.1, vec![0.3]).unwrap();
        let rep = run_cv_with_spec(&inputs, &spec, &part).unwrap();
        let sizes = part.sizes();
        prop_assert!(sizes.iter().all(|&s| s > 0));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        let all: Vec<_> = rep.per_fold.iter().flat_map(|f| &f.held_out).collect();
        prop_assert_eq!(all.len(), n);
        let sq: f64 = all.iter().map(|h| (h.mean - h.observed).powi(2)).sum();
        prop_assert_eq!(rep.rmse, (sq / n as f64).sqrt());
        let covered = all.iter().filter(|h| h.covered).count();
        prop_assert_eq!(rep.ic, covered as f64 / n as f64);
        // Count-weighted mean of per-fold mean squares.
        let weighted: f64 = rep.per_fold.iter().map(|f| f.rmse.powi(2) * f.held_out.len() as f64).sum::<f64>() / n as f64;
        prop_assert!(rel_close(rep.rmse.powi(2), weighted, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimizer_is_deterministic(seed in any::<u64>(), fam in family()) {
        let mut r = rng(seed);
        let model = random_instance(&mut r, 12, 2, 2, fam, false);
        let cfg = quick_optimizer(seed);
        let a = estimate_hyperparameters(&model, &cfg).unwrap();
        let b = estimate_hyperparameters(&model, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        for t in &a.trace {
            prop_assert!(a.q_min <= t.q + 1e-9);
        }
    }

    #[test]
    fn held_out_values_do_not_leak(seed in any::<u64>(), bump in -10.0f64..10.0) {
        let inputs = small_cv_inputs(seed, 15);
        let part = partition(&inputs.design, 3, seed).unwrap();
        let cfg = quick_optimizer(seed);
        let base = run_cv(&inputs, KernelFamily::Matern32, &part, CvMode::RefitPerFold, &cfg).unwrap();
        let target = part.test_rows(1)[0];
        let mut y: Vec<f64> = inputs.obs.values().iter().copied().collect();
        y[target] += bump;
        let moved = CvInputs { obs: Observations::new(y).unwrap(), ..inputs.clone() };
        let rep = run_cv(&moved, KernelFamily::Matern32, &part, CvMode::RefitPerFold, &cfg).unwrap();
        let (a, b) = (&base.per_fold[1], &rep.per_fold[1]);
        prop_assert_eq!(&a.spec, &b.spec);
        prop_assert_eq!(&a.calibration, &b.calibration);
        for (ha, hb) in a.held_out.iter().zip(&b.held_out) {
            prop_assert_eq!(ha.mean, hb.mean);
            if ha.index != target {
                prop_assert_eq!(ha, hb);
            }
        }
    }

    #[test]
    fn identical_folds_make_refit_equal_fixed(seed in any::<u64>(), copies in 2usize..4) {
        let block = small_cv_inputs(seed, 6);
        let rows: Vec<usize> = (0..copies).flat_map(|_| 0..6).collect();
        let pts = DMatrix::from_fn(rows.len(), 1, |i, _| block.design.points()[(rows[i], 0)]);
        let design = unit_design(pts);
        let inputs = CvInputs {
            linmodel: LinearModel::affine(&design).unwrap(),
            obs: block.obs.subset(&rows),
            noise: NoiseSpec::homoscedastic(0.05).unwrap(),
            prior: None,
            design,
        };
        // Fold j holds out copy j, so every training set is the same data.
        let part = FoldPartition::new((0..copies).flat_map(|c| vec![c; 6]).collect(), copies).unwrap();
        let cfg = quick_optimizer(seed);
        let refit = run_cv(&inputs, KernelFamily::Matern52, &part, CvMode::RefitPerFold, &cfg).unwrap();
        let spec = refit.per_fold[0].spec.clone();
        prop_assert!(refit.per_fold.iter().all(|f| f.spec == spec));
        let fixed = run_cv_with_spec(&inputs, &spec, &part).unwrap();
        prop_assert_eq!(refit.rmse, fixed.rmse);
        prop_assert_eq!(refit.ic, fixed.ic);
        for (a, b) in refit.per_fold.iter().zip(&fixed.per_fold) {
            prop_assert_eq!(a, b);
        }
    }
}
