//! Adam with decoupled weight decay, and the per-image training loop.

use serde::{Deserialize, Serialize};

use crate::arma::{ArmaModel, ClusterAssignment};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::{ModularityMatrix, PatchGraph};
use crate::objective::{self, LossReport};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    /// Decoupled weight decay coefficient (`θ ← θ − lr·wd·θ` before each step).
    pub weight_decay: f64,
    pub epochs: usize,
    pub betas: (f64, f64),
    pub eps: f64,
    /// Seed for parameter initialization.
    pub seed: u64,
    /// Optional multiplicative learning-rate factor applied after each epoch.
    pub lr_decay: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-2,
            epochs: 60,
            betas: (0.9, 0.999),
            eps: 1e-8,
            seed: 0,
            lr_decay: None,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("lr_decay must lie in (0, 1], got {d}")));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates for a list of parameters.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update with decoupled weight decay.
///
/// The moments are lazily sized on the first call; later calls must pass
/// parameters of the same shapes in the same order.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    cfg: &OptimConfig,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape {
            op: "adam_step",
            left: (params.len(), 1),
            right: (grads.len(), 1),
        });
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len() {
        return Err(Error::Shape {
            op: "adam_step state",
            left: (state.m.len(), 1),
            right: (params.len(), 1),
        });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
    }

    state.step += 1;
    let (b1, b2) = cfg.betas;
    let t = state.step as i32;
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let decay = lr * cfg.weight_decay;

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((theta, &grad), (mi, vi)) in iter {
            *theta -= decay * *theta;
            *mi = b1 * *mi + (1.0 - b1) * grad;
            *vi = b2 * *vi + (1.0 - b2) * grad * grad;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Result of optimizing one model on one graph.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ArmaModel,
    /// Soft assignment from the trained parameters.
    pub assignment: ClusterAssignment,
    /// Loss before each epoch's update.
    pub history: Vec<LossReport>,
}

/// Full-graph training: one Adam step per epoch on the modularity loss.
pub fn train(
    mut model: ArmaModel,
    g: &PatchGraph,
    b: &ModularityMatrix,
    x: &Tensor,
    cfg: &OptimConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if g.degree_sum() == 0 {
        return Err(Error::DegenerateGraph {
            tau: g.tau().unwrap_or(f64::NAN),
        });
    }
    if b.n() != g.n() {
        return Err(Error::Shape {
            op: "train",
            left: (g.n(), g.n()),
            right: (b.n(), b.n()),
        });
    }

    let mut state = AdamState::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.lr;

    for epoch in 0..cfg.epochs {
        let (report, grads) = {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape)?;
            let diverged = |e: Error| match e {
                Error::NonFinite(_) => Error::Divergence { epoch },
                other => other,
            };
            let xv = tape.constant(x)?;
            let h = model.forward_graph(&mut tape, &bound, g.norm_adj(), xv).map_err(diverged)?;
            let c = model.forward_head(&mut tape, &bound, h).map_err(diverged)?;
            let vars = objective::loss(&mut tape, g, b, c).map_err(diverged)?;
            let report = vars.report(&tape, epoch);
            if !report.total.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            tape.backward(vars.total).map_err(diverged)?;
            let grads: Vec<Tensor> = bound
                .vars()
                .into_iter()
                .map(|v| tape.grad(v).cloned().expect("parameters always carry gradients"))
                .collect();
            (report, grads)
        };
        history.push(report);
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        let mut params = model.params_mut();
        adam_step(&mut params, &grad_refs, &mut state, cfg, lr)?;
        if let Some(decay) = cfg.lr_decay {
            lr *= decay;
        }
    }

    let assignment = model.assign(g, x).map_err(|e| match e {
        Error::NonFinite(_) => Error::Divergence { epoch: cfg.epochs },
        other => other,
    })?;
    Ok(TrainOutcome {
        model,
        assignment,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = OptimConfig {
            weight_decay: 0.0,
            ..OptimConfig::default()
        };
        let mut p = Tensor::from_rows(&[[1.0, -2.0, 0.5]]);
        let g = Tensor::from_rows(&[[0.3, -7.0, 1e-3]]);
        let before = p.clone();
        let mut state = AdamState::new();
        adam_step(&mut [&mut p], &[&g], &mut state, &cfg, cfg.lr).unwrap();
        for i in 0..3 {
            let delta = p.get(0, i) - before.get(0, i);
            let expect = -cfg.lr * g.get(0, i).signum();
            assert!((delta - expect).abs() < 1e-8, "{delta} vs {expect}");
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let cfg = OptimConfig {
            weight_decay: 0.0,
            ..OptimConfig::default()
        };
        let mut p = Tensor::from_rows(&[[1.0, 2.0]]);
        let g = Tensor::zeros(1, 2);
        let mut state = AdamState::new();
        for _ in 0..3 {
            adam_step(&mut [&mut p], &[&g], &mut state, &cfg, cfg.lr).unwrap();
        }
        assert_eq!(p, Tensor::from_rows(&[[1.0, 2.0]]));
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let cfg = OptimConfig::default();
        let mut p = Tensor::from_rows(&[[2.0]]);
        let g = Tensor::zeros(1, 1);
        let mut state = AdamState::new();
        adam_step(&mut [&mut p], &[&g], &mut state, &cfg, cfg.lr).unwrap();
        assert!((p.get(0, 0) - 2.0 * (1.0 - 1e-3 * 1e-2)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let cfg = OptimConfig::default();
        let mut p = Tensor::zeros(2, 2);
        let g = Tensor::zeros(2, 3);
        let mut state = AdamState::new();
        assert!(matches!(
            adam_step(&mut [&mut p], &[&g], &mut state, &cfg, 1e-3),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        for bad in [
            OptimConfig { lr: 0.0, ..OptimConfig::default() },
            OptimConfig { epochs: 0, ..OptimConfig::default() },
            OptimConfig { lr_decay: Some(1.5), ..OptimConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
