//! Forward and backward kernels for the four layer types the models use.

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.01;

/// `input · weight + bias` for a batch of row vectors.
pub fn affine_forward(input: &Matrix, weight: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if bias.len() != weight.cols() {
        return Err(Error::dim("affine bias length", weight.cols(), bias.len()));
    }
    let mut out = input.matmul(weight)?;
    for r in 0..out.rows() {
        for (v, b) in out.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub input: Matrix,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

pub fn affine_backward(input: &Matrix, weight: &Matrix, upstream: &Matrix) -> Result<AffineGrads> {
    if input.cols() != weight.rows() {
        return Err(Error::dim("affine_backward input width", weight.rows(), input.cols()));
    }
    if upstream.shape() != (input.rows(), weight.cols()) {
        return Err(Error::dim(
            "affine_backward upstream shape",
            format!("{}x{}", input.rows(), weight.cols()),
            format!("{}x{}", upstream.rows(), upstream.cols()),
        ));
    }
    Ok(AffineGrads {
        input: upstream.matmul_t(weight)?,
        weight: input.t_matmul(upstream)?,
        bias: upstream.column_sums(),
    })
}

/// Returns the activation and its element-wise derivative. The derivative at
/// exactly zero takes the negative-branch slope.
pub fn leaky_relu(x: &Matrix, slope: f64) -> (Matrix, Matrix) {
    let out = x.map(|v| if v > 0.0 { v } else { slope * v });
    let deriv = x.map(|v| if v > 0.0 { 1.0 } else { slope });
    (out, deriv)
}

pub fn tanh_act(x: &Matrix) -> (Matrix, Matrix) {
    let out = x.map(f64::tanh);
    let deriv = out.map(|t| 1.0 - t * t);
    (out, deriv)
}

/// Inverted dropout. The returned mask already carries the `1/(1-rate)`
/// survivor scale, so `output = x ⊙ mask` and the backward pass is the same
/// product.
pub fn dropout(x: &Matrix, rate: f64, rng: &mut Rng, training: bool) -> Result<(Matrix, Matrix)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Range(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), Matrix::filled(x.rows(), x.cols(), 1.0)));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    for m in mask.as_mut_slice() {
        *m = if rng.unit() < rate { 0.0 } else { keep_scale };
    }
    let out = x.hadamard(&mask)?;
    Ok((out, mask))
}
