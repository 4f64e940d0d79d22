//! The five-term reconstruction loss and its gradient with respect to the
//! generated batch.
//!
//! With `G` generated and `R` real (`B × D`):
//!
//! * reconstruction: `mean_{b,d} (G − R)²`
//! * mmd: biased RBF-kernel MMD², bandwidth from the median pairwise distance
//!   over the joint batch (held constant for differentiation)
//! * variance: `mean_d max(0, Var_b R − Var_b G)`, population variances
//! * centroid: `mean_d (mean_b G − mean_b R)²`
//! * cosine: `mean_b (1 − cos(G_b, R_b))`, a zero-norm row contributes 0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, norm, squared_distance};
use crate::numerics::Matrix;

const BANDWIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub mmd: f64,
    pub variance: f64,
    pub centroid: f64,
    pub cosine: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            reconstruction: 1.0,
            mmd: 1.0,
            variance: 0.1,
            centroid: 0.2,
            cosine: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.reconstruction, self.mmd, self.variance, self.centroid, self.cosine];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub reconstruction: f64,
    pub mmd: f64,
    pub variance: f64,
    pub centroid: f64,
    pub cosine: f64,
}

impl LossComponents {
    pub fn is_finite(&self) -> bool {
        [self.reconstruction, self.mmd, self.variance, self.centroid, self.cosine]
            .iter()
            .all(|v| v.is_finite())
    }

    pub(crate) fn add_scaled(&mut self, other: &LossComponents, s: f64) {
        self.reconstruction += s * other.reconstruction;
        self.mmd += s * other.mmd;
        self.variance += s * other.variance;
        self.centroid += s * other.centroid;
        self.cosine += s * other.cosine;
    }
}

pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.reconstruction * c.reconstruction
        + w.mmd * c.mmd
        + w.variance * c.variance
        + w.centroid * c.centroid
        + w.cosine * c.cosine
}

/// How the RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

/// Median pairwise Euclidean distance over the rows of `a` and `b` together,
/// floored at `1e-6`.
pub fn median_bandwidth(a: &Matrix, b: &Matrix) -> f64 {
    let rows: Vec<&[f64]> = (0..a.rows())
        .map(|i| a.row(i))
        .chain((0..b.rows()).map(|i| b.row(i)))
        .collect();
    let mut dists = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            dists.push(squared_distance(rows[i], rows[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return BANDWIDTH_FLOOR;
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    median.max(BANDWIDTH_FLOOR)
}

/// Biased MMD² with an RBF kernel of bandwidth `h`. Returns the value
/// (clamped at 0 against rounding) and the gradient with respect to `x`.
pub fn mmd_rbf(x: &Matrix, y: &Matrix, h: f64) -> (f64, Matrix) {
    let (n, m) = (x.rows() as f64, y.rows() as f64);
    let inv_2h2 = 1.0 / (2.0 * h * h);
    let mut grad = Matrix::zeros(x.rows(), x.cols());

    let mut kxx = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.rows() {
            let k = (-squared_distance(x.row(i), x.row(j)) * inv_2h2).exp();
            kxx += k;
            if i != j {
                // d/dx_i of k(x_i, x_j) and k(x_j, x_i) together
                let coeff = -2.0 * k / (h * h) / (n * n);
                let (xi, xj) = (x.row(i).to_vec(), x.row(j));
                for (g, (a, b)) in grad.row_mut(i).iter_mut().zip(xi.iter().zip(xj)) {
                    *g += coeff * (a - b);
                }
            }
        }
    }
    let mut kyy = 0.0;
    for i in 0..y.rows() {
        for j in 0..y.rows() {
            kyy += (-squared_distance(y.row(i), y.row(j)) * inv_2h2).exp();
        }
    }
    let mut kxy = 0.0;
    for i in 0..x.rows() {
        for j in 0..y.rows() {
            let k = (-squared_distance(x.row(i), y.row(j)) * inv_2h2).exp();
            kxy += k;
            let coeff = 2.0 * k / (h * h) / (n * m);
            let (xi, yj) = (x.row(i).to_vec(), y.row(j));
            for (g, (a, b)) in grad.row_mut(i).iter_mut().zip(xi.iter().zip(yj)) {
                *g += coeff * (a - b);
            }
        }
    }
    let value = kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m);
    (value.max(0.0), grad)
}

/// Components plus weighted total and `∂total/∂generated`.
#[derive(Debug, Clone)]
pub struct LossEvaluation {
    pub components: LossComponents,
    pub total: f64,
    pub bandwidth: f64,
    pub grad: Matrix,
}

pub fn loss_components(generated: &Matrix, real: &Matrix) -> Result<LossComponents> {
    Ok(evaluate_loss(generated, real, &LossWeights::default(), Bandwidth::MedianHeuristic)?.components)
}

pub fn evaluate_loss(
    generated: &Matrix,
    real: &Matrix,
    weights: &LossWeights,
    bandwidth: Bandwidth,
) -> Result<LossEvaluation> {
    if generated.shape() != real.shape() {
        return Err(Error::dim(
            "loss batch shape",
            format!("{}x{}", real.rows(), real.cols()),
            format!("{}x{}", generated.rows(), generated.cols()),
        ));
    }
    let (rows, cols) = generated.shape();
    if rows < 2 {
        return Err(Error::BatchSize {
            actual: rows,
            required: 2,
        });
    }
    let b = rows as f64;
    let d = cols as f64;
    let mut grad = Matrix::zeros(rows, cols);

    // reconstruction
    let diff = generated.sub(real)?;
    let reconstruction = diff.frobenius_sq() / (b * d);
    {
        let s = weights.reconstruction * 2.0 / (b * d);
        for (g, e) in grad.as_mut_slice().iter_mut().zip(diff.as_slice()) {
            *g += s * e;
        }
    }

    // centroid and variance share the column means
    let gen_mean = generated.column_means();
    let real_mean = real.column_means();
    let mut centroid = 0.0;
    let mut variance = 0.0;
    for c in 0..cols {
        let delta = gen_mean[c] - real_mean[c];
        centroid += delta * delta;
        let var_gen = (0..rows)
            .map(|r| (generated.get(r, c) - gen_mean[c]).powi(2))
            .sum::<f64>()
            / b;
        let var_real = (0..rows).map(|r| (real.get(r, c) - real_mean[c]).powi(2)).sum::<f64>() / b;
        let deficit = var_real - var_gen;
        let active = deficit > 0.0;
        if active {
            variance += deficit;
        }
        for r in 0..rows {
            let mut g = weights.centroid * 2.0 * delta / (d * b);
            if active {
                g -= weights.variance * 2.0 * (generated.get(r, c) - gen_mean[c]) / (b * d);
            }
            grad.as_mut_slice()[r * cols + c] += g;
        }
    }
    centroid /= d;
    variance /= d;

    // cosine
    let mut cosine = 0.0;
    for r in 0..rows {
        let (g, t) = (generated.row(r), real.row(r));
        let (ng, nt) = (norm(g), norm(t));
        if ng == 0.0 || nt == 0.0 {
            continue;
        }
        let cos = (dot(g, t) / (ng * nt)).clamp(-1.0, 1.0);
        cosine += 1.0 - cos;
        let scale = -weights.cosine / b;
        let dst = grad.row_mut(r);
        for k in 0..cols {
            dst[k] += scale * (t[k] / (ng * nt) - cos * g[k] / (ng * ng));
        }
    }
    cosine /= b;

    let h = match bandwidth {
        Bandwidth::MedianHeuristic => median_bandwidth(generated, real),
        Bandwidth::Fixed(h) => h.max(BANDWIDTH_FLOOR),
    };
    let (mmd, mmd_grad) = mmd_rbf(generated, real, h);
    for (g, m) in grad.as_mut_slice().iter_mut().zip(mmd_grad.as_slice()) {
        *g += weights.mmd * m;
    }

    let components = LossComponents {
        reconstruction,
        mmd,
        variance,
        centroid,
        cosine,
    };
    Ok(LossEvaluation {
        total: total_loss(&components, weights),
        components,
        bandwidth: h,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference, relative_error, Rng};

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identical_batches_have_zero_loss() {
        let x = Rng::new(3).gaussian(6, 5, 0.0, 1.0);
        let c = loss_components(&x, &x).unwrap();
        assert_eq!(c.reconstruction, 0.0);
        assert_eq!(c.mmd, 0.0);
        assert_eq!(c.variance, 0.0);
        assert_eq!(c.centroid, 0.0);
        assert!((0.0..1e-12).contains(&c.cosine), "{}", c.cosine);
    }

    #[test]
    fn zero_rows_in_identical_batches_still_zero_cosine() {
        let x = m(&[&[0.0, 0.0], &[1.0, 2.0]]);
        let c = loss_components(&x, &x).unwrap();
        assert!((0.0..1e-12).contains(&c.cosine), "{}", c.cosine);
    }

    #[test]
    fn antipodal_rows_give_cosine_two() {
        let real = m(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]]);
        let c = loss_components(&real.scale(-1.0), &real).unwrap();
        assert!((c.cosine - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_one_dimensional_case() {
        let c = loss_components(&m(&[&[0.0], &[0.0]]), &m(&[&[-1.0], &[1.0]])).unwrap();
        assert_eq!(c.reconstruction, 1.0);
        assert_eq!(c.centroid, 0.0);
        assert_eq!(c.variance, 1.0);
    }

    #[test]
    fn single_row_batch_is_rejected() {
        let x = Matrix::zeros(1, 3);
        assert!(matches!(
            loss_components(&x, &x),
            Err(Error::BatchSize { actual: 1, .. })
        ));
    }

    #[test]
    fn total_is_weighted_sum() {
        let ones = LossComponents {
            reconstruction: 1.0,
            mmd: 1.0,
            variance: 1.0,
            centroid: 1.0,
            cosine: 1.0,
        };
        assert!((total_loss(&ones, &LossWeights::default()) - 4.3).abs() < 1e-12);
        assert_eq!(total_loss(&LossComponents::default(), &LossWeights::default()), 0.0);
    }

    #[test]
    fn median_bandwidth_of_collinear_points() {
        // pairwise distances of {0,1,3} ∪ {6}: 1,3,6,2,5,3 → sorted 1,2,3,3,5,6 → median 3
        let a = m(&[&[0.0], &[1.0]]);
        let b = m(&[&[3.0], &[6.0]]);
        assert_eq!(median_bandwidth(&a, &b), 3.0);
        let z = Matrix::zeros(2, 2);
        assert_eq!(median_bandwidth(&z, &z), 1e-6);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = Rng::new(17);
        let real = rng.gaussian(5, 4, 0.0, 1.0);
        let gen = rng.gaussian(5, 4, 0.2, 0.5);
        let weights = LossWeights::default();
        let eval = evaluate_loss(&gen, &real, &weights, Bandwidth::MedianHeuristic).unwrap();
        let fixed = Bandwidth::Fixed(eval.bandwidth);
        let mut worst = 0.0f64;
        for i in 0..gen.as_slice().len() {
            let n = central_difference(
                |v| {
                    let mut g = gen.clone();
                    g.as_mut_slice()[i] = v;
                    evaluate_loss(&g, &real, &weights, fixed).unwrap().total
                },
                gen.as_slice()[i],
                1e-6,
            );
            worst = worst.max(relative_error(eval.grad.as_slice()[i], n));
        }
        assert!(worst < 1e-6, "{worst}");
    }
}
