use crate::model::ModelParams;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

/// Adadelta accumulators, shaped like the model.
///
/// ```text
/// E[g²] ← ρ E[g²] + (1−ρ) g²
/// Δ     = −√(E[Δ²] + ε) / √(E[g²] + ε) · g
/// E[Δ²] ← ρ E[Δ²] + (1−ρ) Δ²
/// θ     ← θ + Δ
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    pub sq_grad: ModelParams,
    pub sq_delta: ModelParams,
}

impl AdadeltaState {
    pub fn new(like: &ModelParams, rho: f64, eps: f64) -> Self {
        AdadeltaState {
            rho,
            eps,
            sq_grad: ModelParams::zeros(like.config),
            sq_delta: ModelParams::zeros(like.config),
        }
    }

    pub fn with_defaults(like: &ModelParams) -> Self {
        Self::new(like, DEFAULT_RHO, DEFAULT_EPS)
    }
}

pub fn adadelta_step(params: &mut ModelParams, grads: &ModelParams, state: &mut AdadeltaState) {
    let (rho, eps) = (state.rho, state.eps);
    for (((p, g), eg), ed) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.sq_grad.tensors_mut())
        .zip(state.sq_delta.tensors_mut())
    {
        for i in 0..p.len() {
            let gi = g[i];
            eg[i] = rho * eg[i] + (1.0 - rho) * gi * gi;
            let delta = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * gi;
            ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
            p[i] += delta;
        }
    }
}
