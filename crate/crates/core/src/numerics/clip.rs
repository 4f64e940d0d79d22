use super::params::GradientTape;

/// Global L2 norm over every block in the tape.
pub fn global_norm(grads: &GradientTape) -> f64 {
    grads.iter().map(|(_, g)| g.frobenius_sq()).sum::<f64>().sqrt()
}

/// Rescales all gradients together so their joint norm is at most `max_norm`.
/// Returns the norm measured before clipping.
pub fn clip_global_norm(grads: &mut GradientTape, max_norm: f64) -> f64 {
    debug_assert!(max_norm > 0.0);
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.as_mut_slice() {
                *v *= scale;
            }
        }
    }
    norm
}
