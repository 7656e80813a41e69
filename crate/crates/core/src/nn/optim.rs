use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Heavy-ball SGD. Weight decay is added to the gradient of weight
    /// matrices only; biases and slopes are not decayed.
    SgdMomentum {
        momentum: f64,
        weight_decay: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd_momentum() -> Self {
        OptimizerKind::SgdMomentum {
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::SgdMomentum { .. } => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && (0.0..1.0).contains(&v);
        match *self {
            OptimizerKind::SgdMomentum { momentum, weight_decay } => {
                if !ok(momentum) {
                    return Err(format!("momentum must be in [0, 1), got {momentum}"));
                }
                if !(weight_decay.is_finite() && weight_decay >= 0.0) {
                    return Err(format!("weight decay must be >= 0, got {weight_decay}"));
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if !ok(beta1) || !ok(beta2) {
                    return Err(format!("Adam betas must be in [0, 1), got {beta1}, {beta2}"));
                }
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(format!("Adam eps must be > 0, got {eps}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// `lr0 * (1 + cos(pi * epoch / total_epochs)) / 2`, epochs counted from 0.
    CosineAnnealing {
        total_epochs: usize,
    },
}

impl LrSchedule {
    pub fn rate(&self, lr0: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => lr0,
            LrSchedule::CosineAnnealing { total_epochs } => {
                if total_epochs == 0 {
                    return lr0;
                }
                lr0 * (1.0 + (PI * epoch as f64 / total_epochs as f64).cos()) / 2.0
            }
        }
    }
}

pub(crate) struct OptimizerState {
    kind: OptimizerKind,
    decay_mask: Vec<bool>,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub(crate) fn new(kind: OptimizerKind, decay_mask: Vec<bool>) -> Self {
        let n = decay_mask.len();
        let v = match kind {
            OptimizerKind::Adam { .. } => vec![0.0; n],
            OptimizerKind::SgdMomentum { .. } => vec![],
        };
        OptimizerState {
            kind,
            decay_mask,
            step: 0,
            m: vec![0.0; n],
            v,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.step = self.step.saturating_add(1);
        match self.kind {
            OptimizerKind::SgdMomentum { momentum, weight_decay } => {
                for i in 0..params.len() {
                    let mut g = grads[i];
                    if self.decay_mask[i] {
                        g += weight_decay * params[i];
                    }
                    self.m[i] = momentum * self.m[i] + g;
                    params[i] -= lr * self.m[i];
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::CosineAnnealing { total_epochs: 10 };
        assert_eq!(s.rate(0.1, 0), 0.1);
        assert!((s.rate(0.1, 5) - 0.05).abs() < 1e-17);
        assert!(s.rate(0.1, 10).abs() < 1e-17);
        assert_eq!(LrSchedule::Constant.rate(0.3, 7), 0.3);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut st = OptimizerState::new(OptimizerKind::adam(), vec![true, false]);
        let mut p = [1.0, -2.0];
        st.step(&mut p, &[0.5, -3.0], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn weight_decay_skips_unmasked_entries() {
        let kind = OptimizerKind::SgdMomentum {
            momentum: 0.5,
            weight_decay: 0.1,
        };
        let mut st = OptimizerState::new(kind, vec![true, false]);
        let mut p = [1.0, 1.0];
        st.step(&mut p, &[0.0, 0.0], 1.0);
        assert!((p[0] - 0.9).abs() < 1e-15);
        assert_eq!(p[1], 1.0);
        st.step(&mut p, &[0.0, 0.0], 1.0);
        // velocity 0.5 * 0.1 + 0.1 * 0.9
        assert!((p[0] - (0.9 - 0.14)).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(OptimizerKind::adam().validate().is_ok());
        assert!(OptimizerKind::Adam {
            beta1: 1.0,
            beta2: 0.999,
            eps: 1e-8
        }
        .validate()
        .is_err());
        assert!(OptimizerKind::SgdMomentum {
            momentum: 0.9,
            weight_decay: -1.0
        }
        .validate()
        .is_err());
    }
}
