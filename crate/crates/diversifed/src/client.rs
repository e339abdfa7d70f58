//! One client's local update: several epochs of mini-batch Adam on the
//! empirical loss, optionally with a proximal pull toward a server anchor.
//!
//! The proximal term `(lambda / (2 alpha_t)) * ||w - z||^2` contributes
//! `(lambda / alpha_t) * (w - z)` to every mini-batch gradient, evaluated at
//! the current parameters. When `lambda` is zero or no anchor is present the
//! term is skipped outright, so those trajectories are bit-identical to
//! plain local training.

use crate::error::{Error, Result};
use crate::neural::{adam_step, cross_entropy_loss_and_grad, Batch, MlpSpec};
use crate::param::{compensated_sum, ClientId, ParamVector};
use crate::rng::{stream, tags};
use crate::neural::AdamState;
use rand::seq::SliceRandom;

/// Client-side hyperparameters for a local round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientHyper {
    /// Weight of the proximal pull toward the anchor.
    pub lambda: f64,
    /// Server learning rate; the proximal coefficient is `lambda / alpha_t`.
    pub alpha_t: f64,
    /// Local epochs per round.
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for ClientHyper {
    fn default() -> Self {
        ClientHyper {
            lambda: 2.0,
            alpha_t: 1.0,
            epochs: 10,
            batch_size: 100,
        }
    }
}

impl ClientHyper {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.alpha_t > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_t must be > 0, got {}",
                self.alpha_t
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("local_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One client's model, optimizer state, and data shards.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: ClientId,
    pub params: ParamVector,
    pub adam: AdamState,
    pub train: Batch,
    pub test: Batch,
}

/// The quadratic anchor penalty `(lambda / (2 alpha_t)) * ||params - anchor||^2`.
pub fn proximal_penalty(
    params: &ParamVector,
    anchor: &ParamVector,
    lambda: f64,
    alpha_t: f64,
) -> Result<f64> {
    let sq = crate::param::squared_distance(params, anchor)?;
    Ok(lambda / (2.0 * alpha_t) * sq)
}

/// Run the local epochs for one round. `extra_grad`, when present, adds a
/// regularizer gradient (evaluated at the current parameters) to every
/// mini-batch gradient. Returns the sample-weighted mean empirical loss over
/// the final epoch's batches.
pub fn local_update_with_extra_grad(
    state: &mut ClientState,
    hyper: &ClientHyper,
    spec: &MlpSpec,
    master_seed: u64,
    round: u64,
    extra_grad: Option<&(dyn Fn(&ParamVector, &mut [f64]) + Sync)>,
) -> Result<f64> {
    hyper.validate()?;
    let rows = state.train.rows();
    if rows == 0 {
        return Err(Error::InvalidConfig("client has no training data".into()));
    }
    // Fresh optimizer state each round; moments from before the anchor jump
    // would be stale.
    state.adam.reset();

    let mut final_loss = 0.0;
    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..rows).collect();
        let mut rng = stream(
            master_seed,
            &[tags::SHUFFLE, state.id as u64, round, epoch as u64],
        );
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let batch = state.train.select(chunk);
            let (loss, mut grad) = cross_entropy_loss_and_grad(&state.params, spec, &batch)?;
            if let Some(extra) = extra_grad {
                extra(&state.params, grad.values_mut());
            }
            adam_step(&mut state.adam, &mut state.params, &grad)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        if epoch + 1 == hyper.epochs {
            final_loss = epoch_loss / rows as f64;
        }
    }
    if !state.params.is_finite() {
        return Err(Error::NonFinite("local_update"));
    }
    Ok(final_loss)
}

/// The protocol's local step: plain training at round zero (no anchor) or
/// when `lambda` is zero, proximal training toward the anchor otherwise.
pub fn local_update(
    state: &mut ClientState,
    anchor: Option<&ParamVector>,
    hyper: &ClientHyper,
    spec: &MlpSpec,
    master_seed: u64,
    round: u64,
) -> Result<f64> {
    if let Some(z) = anchor {
        if z.dim() != state.params.dim() {
            return Err(Error::DimMismatch {
                expected: state.params.dim(),
                actual: z.dim(),
                context: "anchor vs client params",
            });
        }
        if hyper.lambda != 0.0 {
            let coeff = hyper.lambda / hyper.alpha_t;
            let pull = move |w: &ParamVector, grad: &mut [f64]| {
                for ((g, wv), zv) in grad.iter_mut().zip(w.values()).zip(z.values()) {
                    *g += coeff * (wv - zv);
                }
            };
            return local_update_with_extra_grad(state, hyper, spec, master_seed, round, Some(&pull));
        }
    }
    local_update_with_extra_grad(state, hyper, spec, master_seed, round, None)
}

/// Mean empirical loss of the current model over the full training shard;
/// used to seed the per-client loss metric before a client first trains.
pub fn initial_train_loss(state: &ClientState, spec: &MlpSpec) -> Result<f64> {
    crate::neural::cross_entropy_loss(&state.params, spec, &state.train)
}

#[allow(dead_code)]
fn sum_checked(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_params;
    use crate::rng::stream;
    use rand::Rng;

    fn toy_client(id: ClientId, seed: u64, lr: f64) -> (ClientState, MlpSpec) {
        let spec = MlpSpec::new(vec![2, 6, 2]).unwrap();
        let mut rng = stream(seed, &[100, id as u64]);
        let n = 40;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let cx = if c == 0 { -1.0 } else { 1.0 };
            inputs.push(cx + 0.5 * rng.random_range(-1.0..1.0));
            inputs.push(-cx + 0.5 * rng.random_range(-1.0..1.0));
            labels.push(c);
        }
        let train = Batch::new(inputs.clone(), 2, labels.clone()).unwrap();
        let test = Batch::new(inputs, 2, labels).unwrap();
        let params = init_params(&spec, seed);
        let adam = AdamState::new(spec.param_dim(), lr);
        (
            ClientState {
                id,
                params,
                adam,
                train,
                test,
            },
            spec,
        )
    }

    #[test]
    fn proximal_penalty_values() {
        let a = ParamVector::new(vec![1.0, 2.0]);
        assert_eq!(proximal_penalty(&a, &a, 2.0, 1.0).unwrap(), 0.0);
        let b = ParamVector::new(vec![1.0, 4.0]); // ||a - b|| = 2
        assert_eq!(proximal_penalty(&a, &b, 2.0, 1.0).unwrap(), 4.0);
        assert!(proximal_penalty(&a, &ParamVector::zeros(3), 2.0, 1.0).is_err());
    }

    #[test]
    fn proximal_penalty_gradient_matches_finite_differences() {
        let mut rng = stream(9, &[1]);
        let w = ParamVector::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
        let z = ParamVector::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (lambda, alpha) = (2.0, 0.5);
        let step = 1e-6;
        for k in 0..6 {
            let analytic = lambda / alpha * (w.values()[k] - z.values()[k]);
            let mut plus = w.clone();
            plus.values_mut()[k] += step;
            let mut minus = w.clone();
            minus.values_mut()[k] -= step;
            let fd = (proximal_penalty(&plus, &z, lambda, alpha).unwrap()
                - proximal_penalty(&minus, &z, lambda, alpha).unwrap())
                / (2.0 * step);
            assert!(
                (analytic - fd).abs() / analytic.abs().max(1e-12) < 1e-8,
                "coord {k}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn lambda_zero_is_bitwise_plain_training() {
        let (mut with_anchor, spec) = toy_client(0, 7, 0.01);
        let (mut plain, _) = toy_client(0, 7, 0.01);
        let anchor = ParamVector::new(vec![5.0; spec.param_dim()]);
        let hyper = ClientHyper {
            lambda: 0.0,
            epochs: 3,
            batch_size: 16,
            ..ClientHyper::default()
        };
        let la = local_update(&mut with_anchor, Some(&anchor), &hyper, &spec, 3, 1).unwrap();
        let lb = local_update(&mut plain, None, &hyper, &spec, 3, 1).unwrap();
        assert_eq!(with_anchor.params, plain.params);
        assert_eq!(la.to_bits(), lb.to_bits());
    }

    #[test]
    fn round_zero_no_anchor_equals_lambda_zero_path() {
        let (mut a, spec) = toy_client(1, 8, 0.01);
        let (mut b, _) = toy_client(1, 8, 0.01);
        let hyper = ClientHyper {
            epochs: 2,
            batch_size: 10,
            ..ClientHyper::default()
        };
        let zero = ClientHyper {
            lambda: 0.0,
            ..hyper
        };
        local_update(&mut a, None, &hyper, &spec, 5, 0).unwrap();
        local_update(&mut b, None, &zero, &spec, 5, 0).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn pure_quadratic_converges_to_anchor() {
        // A single-class network has identically zero cross-entropy loss
        // (softmax of one logit is 1), so the objective reduces to the
        // proximal quadratic with its minimum at the anchor.
        let spec = MlpSpec::new(vec![2, 3, 1]).unwrap();
        let n = 4;
        let train = Batch::new(vec![0.3; n * 2], 2, vec![0; n]).unwrap();
        let mut state = ClientState {
            id: 0,
            params: init_params(&spec, 3),
            adam: AdamState::new(spec.param_dim(), 0.01),
            train: train.clone(),
            test: train,
        };
        let anchor = ParamVector::new(vec![0.25; spec.param_dim()]);
        let hyper = ClientHyper {
            lambda: 2.0,
            alpha_t: 1.0,
            epochs: 2000,
            batch_size: 8,
        };
        let final_loss = local_update(&mut state, Some(&anchor), &hyper, &spec, 11, 1).unwrap();
        assert_eq!(final_loss, 0.0);
        let gap = crate::param::euclidean_distance(&state.params, &anchor).unwrap();
        assert!(gap < 1e-2, "distance to anchor {gap}");
    }

    #[test]
    fn proximal_training_lands_closer_to_anchor_than_plain() {
        let (mut prox, spec) = toy_client(2, 13, 0.01);
        let (mut plain, _) = toy_client(2, 13, 0.01);
        let anchor = ParamVector::zeros(spec.param_dim());
        let hyper = ClientHyper {
            lambda: 2.0,
            epochs: 5,
            batch_size: 10,
            ..ClientHyper::default()
        };
        let zero = ClientHyper {
            lambda: 0.0,
            ..hyper
        };
        local_update(&mut prox, Some(&anchor), &hyper, &spec, 17, 1).unwrap();
        local_update(&mut plain, Some(&anchor), &zero, &spec, 17, 1).unwrap();
        let d_prox = crate::param::euclidean_distance(&prox.params, &anchor).unwrap();
        let d_plain = crate::param::euclidean_distance(&plain.params, &anchor).unwrap();
        assert!(d_prox < d_plain, "{d_prox} !< {d_plain}");
    }

    #[test]
    fn trajectory_is_deterministic_in_seed_round_client() {
        let (mut a, spec) = toy_client(3, 21, 0.005);
        let (mut b, _) = toy_client(3, 21, 0.005);
        let hyper = ClientHyper {
            epochs: 3,
            batch_size: 7,
            ..ClientHyper::default()
        };
        let anchor = ParamVector::zeros(spec.param_dim());
        let la = local_update(&mut a, Some(&anchor), &hyper, &spec, 99, 4).unwrap();
        let lb = local_update(&mut b, Some(&anchor), &hyper, &spec, 99, 4).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(la.to_bits(), lb.to_bits());
        // A different round shuffles differently.
        let (mut c, _) = toy_client(3, 21, 0.005);
        local_update(&mut c, Some(&anchor), &hyper, &spec, 99, 5).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn anchor_dim_mismatch_is_an_error() {
        let (mut state, spec) = toy_client(4, 2, 0.01);
        let anchor = ParamVector::zeros(spec.param_dim() + 1);
        let err = local_update(
            &mut state,
            Some(&anchor),
            &ClientHyper::default(),
            &spec,
            1,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }
}
