//! Gradient and invariant checks run by `zerodiffusion check`.

use crate::classifier::{cross_entropy_loss, predict_top1, warp_loss, ClassifierLoss, CompatibilityModel};
use crate::diffusion::{corrupt, evaluate_loss, median_bandwidth, mmd_rbf, Bandwidth, DiffusionModel, LossWeights};
use crate::error::Result;
use crate::numerics::{finite_diff_check, GradientTape, ParamStore, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
        }
    }
}

/// Worst relative error between the analytic gradient of the full diffusion
/// loss and central differences, on a small denoiser with dropout off and the
/// MMD bandwidth frozen.
pub fn diffusion_gradient_error(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut model = DiffusionModel::new(6, 8, 6, &mut rng);
    model.dropout_rate = 0.0;
    let real = rng.uniform_matrix(4, 6, -0.8, 0.8);
    let noisy = rng.gaussian(4, 6, 0.0, 0.3);
    let class = rng.gaussian(4, 8, 0.0, 1.0);
    let weights = LossWeights::default();

    let eval_at = |params: &ParamStore, bandwidth: Bandwidth| -> Result<(f64, f64, GradientTape)> {
        let mut m = model.clone();
        *m.params_mut() = params.clone();
        let (out, cache) = m.forward(&noisy, &class, &mut Rng::new(0), true)?;
        let eval = evaluate_loss(&out, &real, &weights, bandwidth)?;
        let mut tape = GradientTape::zeros_like(params);
        m.backward(&cache, &eval.grad, &mut tape)?;
        Ok((eval.total, eval.bandwidth, tape))
    };
    let h = eval_at(model.params(), Bandwidth::MedianHeuristic)?.1;
    finite_diff_check(
        |p| {
            let (total, _, tape) = eval_at(p, Bandwidth::Fixed(h))?;
            Ok((total, tape))
        },
        model.params(),
        1e-6,
    )
}

/// Worst relative error of the classifier loss gradient through the
/// non-linear scorer's `A` and `B`. WARP re-seeds its sampler on every call
/// so each evaluation picks the same rivals.
pub fn classifier_gradient_error(loss: ClassifierLoss, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let model = CompatibilityModel::nonlinear(5, 4, 3, &mut rng);
    let features = rng.gaussian(6, 5, 0.0, 1.0);
    let classes = rng.gaussian(4, 3, 0.0, 1.0);
    let targets: Vec<usize> = (0..6).map(|_| rng.below(4)).collect();

    finite_diff_check(
        |p| {
            let mut m = model.clone();
            *m.params_mut() = p.clone();
            let (scores, cache) = m.scores_with_cache(&features, &classes)?;
            let (value, grad) = match loss {
                ClassifierLoss::CrossEntropy => cross_entropy_loss(&scores, &targets)?,
                ClassifierLoss::Warp => warp_loss(&scores, &targets, &mut Rng::new(seed))?,
            };
            let mut tape = GradientTape::zeros_like(p);
            m.backward(&cache, &grad, &mut tape)?;
            Ok((value, tape))
        },
        model.params(),
        1e-6,
    )
}

/// Number of vectors for which `corrupt(x, 0)` is not bit-identical to `x`.
pub fn corrupt_identity_violations(count: usize, seed: u64) -> Result<usize> {
    let mut rng = Rng::new(seed);
    let mut bad = 0;
    for _ in 0..count {
        let x: Vec<f64> = (0..128).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y = corrupt(&x, 0.0, 0.316, &mut rng)?;
        if x.iter().zip(&y).any(|(a, b)| a.to_bits() != b.to_bits()) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Largest `MMD²(X, X)` over `batches` random batches.
pub fn mmd_self_distance(batches: usize, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..batches {
        let x = rng.gaussian(16, 8, 0.0, 1.0);
        let h = median_bandwidth(&x, &x);
        worst = worst.max(mmd_rbf(&x, &x, h).0.abs());
    }
    Ok(worst)
}

/// Number of (model, feature) pairs whose top-1 changes when every candidate
/// vector is scaled by `factor`.
pub fn argmax_scaling_violations(pairs: usize, factor: f64, seed: u64) -> Result<usize> {
    let mut rng = Rng::new(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let model = CompatibilityModel::nonlinear(8, 6, 5, &mut rng);
        let feature: Vec<f64> = (0..8).map(|_| rng.normal(0.0, 1.0)).collect();
        let candidates = rng.gaussian(4, 5, 0.0, 1.0);
        if predict_top1(&model, &feature, &candidates)? != predict_top1(&model, &feature, &candidates.scale(factor))? {
            bad += 1;
        }
    }
    Ok(bad)
}

pub fn run_self_checks() -> Result<Vec<CheckResult>> {
    let diffusion = (0..3)
        .map(diffusion_gradient_error)
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))?;
    let ce = (0..3)
        .map(|s| classifier_gradient_error(ClassifierLoss::CrossEntropy, s))
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))?;
    let warp = (0..3)
        .map(|s| classifier_gradient_error(ClassifierLoss::Warp, s))
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))?;
    Ok(vec![
        CheckResult::below("diffusion loss gradient (max rel. error)", diffusion, 1e-4),
        CheckResult::below("cross-entropy gradient (max rel. error)", ce, 1e-6),
        CheckResult::below("warp gradient (max rel. error)", warp, 1e-6),
        CheckResult::below(
            "corrupt(x, 0) != x (count of 100)",
            corrupt_identity_violations(100, 0)? as f64,
            0.5,
        ),
        CheckResult::below("max MMD²(X, X) over 20 batches", mmd_self_distance(20, 0)?, 1e-10),
        CheckResult::below(
            "top-1 changes under ×7.3 candidate scaling (count of 1000)",
            argmax_scaling_violations(1000, 7.3, 0)? as f64,
            0.5,
        ),
    ])
}
