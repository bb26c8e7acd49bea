//! First-order adaptive-moment (Adam) minimizer, implemented in-repo so the
//! numerical core carries no framework dependency. Two modes: the plain
//! update, and a step-halving guard that enforces a non-increasing loss
//! trace for solvers that report cost monotonicity.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

/// Learning-rate schedule over the fixed iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate to zero across the run; anneals the
    /// sign-step jitter Adam exhibits on L1-sum objectives.
    Cosine,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub adam: AdamParams,
    pub iterations: usize,
    /// Reject/halve steps that would increase the objective.
    pub monotone_guard: bool,
    /// Maximum halvings per iteration before keeping the current iterate.
    pub max_halvings: u32,
    pub schedule: LrSchedule,
}

impl OptimOptions {
    pub fn plain(adam: AdamParams, iterations: usize) -> Self {
        OptimOptions {
            adam,
            iterations,
            monotone_guard: false,
            max_halvings: 0,
            schedule: LrSchedule::Constant,
        }
    }

    pub fn guarded(adam: AdamParams, iterations: usize) -> Self {
        OptimOptions {
            adam,
            iterations,
            monotone_guard: true,
            max_halvings: 30,
            schedule: LrSchedule::Constant,
        }
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.schedule = schedule;
        self
    }
}

/// Objective with an analytic gradient. `value_grad` writes the gradient into
/// `grad` (same length as `x`) and returns the loss; `value` is the loss
/// alone, used by the guard's candidate probes.
pub trait Objective {
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
    fn value(&mut self, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    /// Iterate with the lowest observed loss.
    pub x: Vec<f64>,
    pub loss: f64,
    /// Loss at each iterate, starting with the initial point
    /// (`iterations + 1` entries).
    pub trace: Vec<f64>,
}

/// Runs Adam for a fixed iteration count and returns the best-seen iterate,
/// so the final loss never exceeds the initial one.
pub fn minimize<O: Objective>(obj: &mut O, x0: &[f64], opts: &OptimOptions) -> Result<OptimResult> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let p = opts.adam;

    let mut loss = obj.value_grad(&x, &mut grad)?;
    check_finite(loss, 0)?;
    let mut trace = Vec::with_capacity(opts.iterations + 1);
    trace.push(loss);
    let mut best_x = x.clone();
    let mut best_loss = loss;

    for it in 1..=opts.iterations {
        let lr = match opts.schedule {
            LrSchedule::Constant => p.learning_rate,
            LrSchedule::Cosine => {
                let frac = (it - 1) as f64 / opts.iterations as f64;
                p.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        };
        let bc1 = 1.0 - p.beta1.powi(it as i32);
        let bc2 = 1.0 - p.beta2.powi(it as i32);
        for i in 0..dim {
            m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * grad[i];
            v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * grad[i] * grad[i];
        }
        let step: Vec<f64> = (0..dim)
            .map(|i| -lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + p.epsilon))
            .collect();

        if opts.monotone_guard {
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let candidate: Vec<f64> =
                    x.iter().zip(&step).map(|(xi, si)| xi + scale * si).collect();
                let cand_loss = obj.value(&candidate)?;
                check_finite(cand_loss, it)?;
                if cand_loss <= loss {
                    x = candidate;
                    loss = cand_loss;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                // No descent along the Adam direction at the smallest scale;
                // hold the iterate (trace stays flat).
                trace.push(loss);
                obj.value_grad(&x, &mut grad)?;
                continue;
            }
            obj.value_grad(&x, &mut grad)?;
        } else {
            for i in 0..dim {
                x[i] += step[i];
            }
            loss = obj.value_grad(&x, &mut grad)?;
            check_finite(loss, it)?;
        }
        trace.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_x.copy_from_slice(&x);
        }
    }

    if opts.monotone_guard {
        // The guard already guarantees the last iterate is the best.
        Ok(OptimResult { x, loss, trace })
    } else {
        Ok(OptimResult { x: best_x, loss: best_loss, trace })
    }
}

fn check_finite(loss: f64, iteration: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { iteration, context: "non-finite loss".into() })
    }
}
