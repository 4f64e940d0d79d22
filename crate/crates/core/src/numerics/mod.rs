//! Dense linear algebra, layer kernels, optimisation and gradient checking.

pub mod adam;
pub mod clip;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod params;
pub mod rng;

pub use adam::{AdamConfig, AdamState};
pub use clip::{clip_global_norm, global_norm};
pub use gradcheck::{central_difference, finite_diff_check, relative_error};
pub use layers::{affine_backward, affine_forward, dropout, leaky_relu, tanh_act, AffineGrads, LEAKY_SLOPE};
pub use matrix::{dot, norm, squared_distance, Matrix};
pub use params::{GradientTape, ParamStore};
pub use rng::{gaussian_sample, Rng};

/// Uniform `[-1/√fan_in, 1/√fan_in]` initialisation.
pub fn init_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    rng.uniform_matrix(fan_in, fan_out, -bound, bound)
}
