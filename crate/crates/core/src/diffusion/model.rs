use crate::error::{Error, Result};
use crate::numerics::{
    affine_backward, affine_forward, dropout, init_uniform, leaky_relu, tanh_act, GradientTape, Matrix, ParamStore,
    Rng, LEAKY_SLOPE,
};

pub const DEFAULT_DROPOUT: f64 = 0.3;

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;

/// Class-conditioned denoiser:
/// `[noisy feature | class] → affine → leaky-ReLU → dropout → affine → tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    feature_dim: usize,
    class_dim: usize,
    hidden_dim: usize,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    params: ParamStore,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    leaky_deriv: Matrix,
    dropout_mask: Matrix,
    hidden: Matrix,
    tanh_deriv: Matrix,
}

impl DiffusionModel {
    pub fn new(feature_dim: usize, class_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let input_dim = feature_dim + class_dim;
        let mut params = ParamStore::new();
        params.push("layer1.weight", init_uniform(rng, input_dim, hidden_dim));
        let b1 = 1.0 / (input_dim as f64).sqrt();
        params.push("layer1.bias", rng.uniform_matrix(1, hidden_dim, -b1, b1));
        params.push("layer2.weight", init_uniform(rng, hidden_dim, feature_dim));
        let b2 = 1.0 / (hidden_dim as f64).sqrt();
        params.push("layer2.bias", rng.uniform_matrix(1, feature_dim, -b2, b2));
        Self {
            feature_dim,
            class_dim,
            hidden_dim,
            dropout_rate: DEFAULT_DROPOUT,
            leaky_slope: LEAKY_SLOPE,
            params,
        }
    }

    /// All-zero weights and biases.
    pub fn zeros(feature_dim: usize, class_dim: usize, hidden_dim: usize) -> Self {
        let mut params = ParamStore::new();
        params.push("layer1.weight", Matrix::zeros(feature_dim + class_dim, hidden_dim));
        params.push("layer1.bias", Matrix::zeros(1, hidden_dim));
        params.push("layer2.weight", Matrix::zeros(hidden_dim, feature_dim));
        params.push("layer2.bias", Matrix::zeros(1, feature_dim));
        Self {
            feature_dim,
            class_dim,
            hidden_dim,
            dropout_rate: DEFAULT_DROPOUT,
            leaky_slope: LEAKY_SLOPE,
            params,
        }
    }

    pub(crate) fn from_params(
        feature_dim: usize,
        class_dim: usize,
        hidden_dim: usize,
        params: ParamStore,
    ) -> Result<Self> {
        let expected = vec![
            (feature_dim + class_dim, hidden_dim),
            (1, hidden_dim),
            (hidden_dim, feature_dim),
            (1, feature_dim),
        ];
        if params.shapes() != expected {
            return Err(Error::dim(
                "diffusion parameters",
                format!("{expected:?}"),
                format!("{:?}", params.shapes()),
            ));
        }
        Ok(Self {
            feature_dim,
            class_dim,
            hidden_dim,
            dropout_rate: DEFAULT_DROPOUT,
            leaky_slope: LEAKY_SLOPE,
            params,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_dim(&self) -> usize {
        self.class_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.class_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn forward(
        &self,
        noisy: &Matrix,
        class: &Matrix,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, ForwardCache)> {
        if noisy.cols() != self.feature_dim {
            return Err(Error::dim("denoiser feature input", self.feature_dim, noisy.cols()));
        }
        if class.cols() != self.class_dim {
            return Err(Error::dim("denoiser class input", self.class_dim, class.cols()));
        }
        if noisy.rows() != class.rows() {
            return Err(Error::dim("denoiser batch", noisy.rows(), class.rows()));
        }
        let input = noisy.hconcat(class)?;
        let pre1 = affine_forward(&input, self.params.get(W1), self.params.get(B1).as_slice())?;
        let (act, leaky_deriv) = leaky_relu(&pre1, self.leaky_slope);
        let (hidden, dropout_mask) = dropout(&act, self.dropout_rate, rng, training)?;
        let pre2 = affine_forward(&hidden, self.params.get(W2), self.params.get(B2).as_slice())?;
        let (out, tanh_deriv) = tanh_act(&pre2);
        Ok((
            out,
            ForwardCache {
                input,
                leaky_deriv,
                dropout_mask,
                hidden,
                tanh_deriv,
            },
        ))
    }

    /// Accumulates parameter gradients of a scalar loss with respect to which
    /// the output gradient is `grad_out`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix, tape: &mut GradientTape) -> Result<()> {
        let d_pre2 = grad_out.hadamard(&cache.tanh_deriv)?;
        let g2 = affine_backward(&cache.hidden, self.params.get(W2), &d_pre2)?;
        tape.accumulate(W2, &g2.weight)?;
        tape.accumulate_bias(B2, &g2.bias)?;
        let d_act = g2.input.hadamard(&cache.dropout_mask)?;
        let d_pre1 = d_act.hadamard(&cache.leaky_deriv)?;
        let g1 = affine_backward(&cache.input, self.params.get(W1), &d_pre1)?;
        tape.accumulate(W1, &g1.weight)?;
        tape.accumulate_bias(B1, &g1.bias)?;
        Ok(())
    }
}

/// Inference-mode forward pass.
pub fn denoise_forward(
    model: &DiffusionModel,
    noisy: &Matrix,
    class: &Matrix,
    rng: &mut Rng,
    training: bool,
) -> Result<Matrix> {
    Ok(model.forward(noisy, class, rng, training)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_outputs_zero() {
        let m = DiffusionModel::zeros(4, 3, 5);
        let mut rng = Rng::new(0);
        let x = rng.gaussian(6, 4, 0.0, 5.0);
        let z = rng.gaussian(6, 3, 0.0, 5.0);
        let out = denoise_forward(&m, &x, &z, &mut rng, true).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_are_tanh_bounded() {
        let mut rng = Rng::new(1);
        let mut m = DiffusionModel::new(8, 6, 8, &mut rng);
        for v in m.params_mut().get_mut(2).as_mut_slice() {
            *v *= 100.0;
        }
        let x = rng.gaussian(20, 8, 0.0, 10.0);
        let z = rng.gaussian(20, 6, 0.0, 10.0);
        let out = denoise_forward(&m, &x, &z, &mut rng, true).unwrap();
        assert!(out.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn inference_is_deterministic() {
        let mut rng = Rng::new(2);
        let m = DiffusionModel::new(8, 6, 8, &mut rng);
        let x = rng.gaussian(4, 8, 0.0, 1.0);
        let z = rng.gaussian(4, 6, 0.0, 1.0);
        let a = denoise_forward(&m, &x, &z, &mut Rng::new(10), false).unwrap();
        let b = denoise_forward(&m, &x, &z, &mut Rng::new(11), false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_architecture_shapes() {
        let m = DiffusionModel::new(128, 300, 128, &mut Rng::new(0));
        assert_eq!(m.input_dim(), 428);
        assert_eq!(m.params().shapes(), vec![(428, 128), (1, 128), (128, 128), (1, 128)]);
    }

    #[test]
    fn mismatched_batches_are_rejected() {
        let m = DiffusionModel::zeros(4, 3, 5);
        let mut rng = Rng::new(0);
        assert!(denoise_forward(&m, &Matrix::zeros(2, 4), &Matrix::zeros(3, 3), &mut rng, false).is_err());
        assert!(denoise_forward(&m, &Matrix::zeros(2, 5), &Matrix::zeros(2, 3), &mut rng, false).is_err());
    }
}
