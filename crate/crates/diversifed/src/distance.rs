//! Model distance loss, its closed-form gradient, the server's one-step
//! anchor update, and the equivalent linear-combination-weight view.
//!
//! For a pool of models and a center `i`, let `d_j = ||w_i - w_j|| / tau`
//! over all other members `j`. The distance loss is the mean log-softmax of
//! the `d_j`; minimizing it pulls `w_i` toward nearby models and pushes it
//! away from far ones. One gradient step produces the anchor
//! `z_i = w_i - alpha_t * grad`, which is always a linear combination of the
//! pool with weights summing to one: positive weight means attraction,
//! negative means repulsion.

use crate::error::{Error, Result};
use crate::param::{distance_row, ClientId, DistanceRow, ModelPool, ParamVector};
use serde::{Deserialize, Serialize};

/// Server-side hyperparameters for the distance loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerHyper {
    /// Temperature dividing parameter distances inside the softmax.
    pub tau: f64,
    /// Server learning rate for the one-step anchor update.
    pub alpha_t: f64,
    /// Pairs closer than this contribute nothing (the formulas divide by
    /// the pair distance and are 0/0 at coincident models).
    pub epsilon_dist: f64,
    /// Divide distances by sqrt(dim) before scaling by tau. Off by default;
    /// raw distances with a tuned tau are the normal operating mode.
    pub normalize_by_sqrt_dim: bool,
}

impl Default for ServerHyper {
    fn default() -> Self {
        ServerHyper {
            tau: 1.0,
            alpha_t: 1.0,
            epsilon_dist: 1e-8,
            normalize_by_sqrt_dim: false,
        }
    }
}

impl ServerHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        if !(self.alpha_t > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_t must be > 0, got {}",
                self.alpha_t
            )));
        }
        if !(self.epsilon_dist > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_dist must be > 0, got {}",
                self.epsilon_dist
            )));
        }
        Ok(())
    }

    /// Temperature actually applied to distances of `dim`-dimensional models.
    pub fn effective_tau(&self, dim: usize) -> f64 {
        if self.normalize_by_sqrt_dim {
            self.tau * (dim as f64).sqrt()
        } else {
            self.tau
        }
    }
}

/// The anchor expressed as weights over pool members: `z = beta_self * w_i +
/// sum_j betas[j] * w_j`, with all weights summing to one.
#[derive(Debug, Clone)]
pub struct CombinationWeights {
    pub center: ClientId,
    pub beta_self: f64,
    pub betas: Vec<(ClientId, f64)>,
}

impl CombinationWeights {
    /// Sum of all weights; equals 1 up to rounding by construction.
    pub fn sum(&self) -> f64 {
        crate::param::compensated_sum(
            std::iter::once(self.beta_self).chain(self.betas.iter().map(|&(_, b)| b)),
        )
    }

    /// True when every off-center weight is exactly zero, i.e. the anchor
    /// carries no information from other clients.
    pub fn no_interaction(&self) -> bool {
        self.betas.iter().all(|&(_, b)| b == 0.0)
    }

    /// Materialize the weighted combination over the pool.
    pub fn apply(&self, pool: &ModelPool) -> Result<ParamVector> {
        let center = pool
            .get(self.center)
            .ok_or(Error::UnknownClient(self.center))?;
        let mut out: Vec<f64> = center.values().iter().map(|v| v * self.beta_self).collect();
        for &(id, beta) in &self.betas {
            let w = pool.get(id).ok_or(Error::UnknownClient(id))?;
            for (o, v) in out.iter_mut().zip(w.values()) {
                *o += beta * v;
            }
        }
        Ok(ParamVector::new(out))
    }
}

/// How the center model relates to one other pool member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    Attract,
    Repel,
    Neutral,
}

/// Softmax over a distance row, max-subtracted so huge distances saturate
/// instead of overflowing. Probabilities are positive and sum to 1.
pub fn softmax_over_distances(row: &DistanceRow) -> Vec<(ClientId, f64)> {
    let probs = softmax(&collect_ds(row));
    row.entries
        .iter()
        .map(|&(id, _)| id)
        .zip(probs)
        .collect()
}

fn collect_ds(row: &DistanceRow) -> Vec<f64> {
    row.entries.iter().map(|&(_, d)| d).collect()
}

fn max_of(ds: &[f64]) -> f64 {
    ds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn softmax(ds: &[f64]) -> Vec<f64> {
    if ds.is_empty() {
        return Vec::new();
    }
    let m = max_of(ds);
    let exps: Vec<f64> = ds.iter().map(|d| (d - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Log-softmax computed directly (not softmax-then-log) so tiny
/// probabilities keep full precision.
fn log_softmax(ds: &[f64]) -> Vec<f64> {
    let m = max_of(ds);
    let lse = m + ds.iter().map(|d| (d - m).exp()).sum::<f64>().ln();
    ds.iter().map(|d| d - lse).collect()
}

fn scaled_row(pool: &ModelPool, center: ClientId, hyper: &ServerHyper) -> Result<DistanceRow> {
    distance_row(pool, center, hyper.effective_tau(pool.dim()))
}

/// Mean log-softmax of the center's scaled distances. Always <= 0; exactly 0
/// for a two-member pool (single term, softmax 1).
pub fn model_distance_loss(pool: &ModelPool, center: ClientId, hyper: &ServerHyper) -> Result<f64> {
    let row = scaled_row(pool, center, hyper)?;
    let logs = log_softmax(&collect_ds(&row));
    Ok(crate::param::compensated_sum(logs.iter().copied()) / logs.len() as f64)
}

/// Per-pair coefficients `xi_j / (tau^2 d_j)` shared by the gradient and the
/// combination weights; guarded pairs get a coefficient of exactly zero.
fn pair_coefficients(row: &DistanceRow, hyper: &ServerHyper, tau_eff: f64) -> Vec<f64> {
    let ds = collect_ds(row);
    let probs = softmax(&ds);
    let m = ds.len() as f64;
    ds.iter()
        .zip(probs)
        .map(|(&d, p)| {
            if d < hyper.epsilon_dist {
                0.0
            } else {
                (1.0 / m - p) / (tau_eff * tau_eff * d)
            }
        })
        .collect()
}

/// Gradient of the distance loss with respect to the center model:
/// `sum_j xi_j * (w_i - w_j) / (tau^2 d_j)` with `xi_j = 1/m - softmax(d_j)`.
pub fn model_distance_grad(
    pool: &ModelPool,
    center: ClientId,
    hyper: &ServerHyper,
) -> Result<ParamVector> {
    let tau_eff = hyper.effective_tau(pool.dim());
    let row = scaled_row(pool, center, hyper)?;
    let coeffs = pair_coefficients(&row, hyper, tau_eff);
    let w_center = pool.get(center).expect("center checked by distance_row");
    let mut grad = vec![0.0; pool.dim()];
    for (&(other, _), &c) in row.entries.iter().zip(&coeffs) {
        if c == 0.0 {
            continue;
        }
        let w_other = pool.get(other).expect("row ids come from the pool");
        for ((g, wc), wo) in grad.iter_mut().zip(w_center.values()).zip(w_other.values()) {
            *g += c * (wc - wo);
        }
    }
    Ok(ParamVector::new(grad))
}

/// One server gradient step on the distance loss: the anchor
/// `z = w_center - alpha_t * grad`.
pub fn server_step(pool: &ModelPool, center: ClientId, hyper: &ServerHyper) -> Result<ParamVector> {
    let grad = model_distance_grad(pool, center, hyper)?;
    let w = pool.get(center).expect("center checked by grad");
    let z = ParamVector::new(
        w.values()
            .iter()
            .zip(grad.values())
            .map(|(wv, gv)| wv - hyper.alpha_t * gv)
            .collect(),
    );
    if !z.is_finite() {
        return Err(Error::NonFinite("server_step"));
    }
    Ok(z)
}

/// The anchor's linear-combination weights: `beta_j = alpha_t * xi_j /
/// (tau^2 d_j)` (zero for guarded pairs) and `beta_self = 1 - sum beta_j`.
pub fn combination_weights(
    pool: &ModelPool,
    center: ClientId,
    hyper: &ServerHyper,
) -> Result<CombinationWeights> {
    let tau_eff = hyper.effective_tau(pool.dim());
    let row = scaled_row(pool, center, hyper)?;
    let coeffs = pair_coefficients(&row, hyper, tau_eff);
    let betas: Vec<(ClientId, f64)> = row
        .entries
        .iter()
        .zip(&coeffs)
        .map(|(&(id, _), &c)| (id, hyper.alpha_t * c))
        .collect();
    let beta_self =
        1.0 - crate::param::compensated_sum(betas.iter().map(|&(_, b)| b));
    Ok(CombinationWeights {
        center,
        beta_self,
        betas,
    })
}

/// Classify each other member as attracting, repelling, or neutral for the
/// center. Signs follow the combination weights; guarded or vanishing
/// weights are neutral.
pub fn sign_rule_check(
    pool: &ModelPool,
    center: ClientId,
    hyper: &ServerHyper,
) -> Result<Vec<(ClientId, Interaction)>> {
    let weights = combination_weights(pool, center, hyper)?;
    Ok(weights
        .betas
        .iter()
        .map(|&(id, beta)| {
            let kind = if beta.abs() < 1e-12 {
                Interaction::Neutral
            } else if beta > 0.0 {
                Interaction::Attract
            } else {
                Interaction::Repel
            };
            (id, kind)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::euclidean_distance;
    use crate::rng::stream;
    use rand::Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    /// The worked three-model pool: (0,0), (1,0), (0,2), center first.
    fn toy_pool() -> ModelPool {
        ModelPool::new(vec![
            (0, pv(&[0.0, 0.0])),
            (1, pv(&[1.0, 0.0])),
            (2, pv(&[0.0, 2.0])),
        ])
        .unwrap()
    }

    fn hyper() -> ServerHyper {
        ServerHyper::default()
    }

    #[test]
    fn softmax_uniform_when_distances_equal() {
        let row = DistanceRow {
            center: 0,
            entries: vec![(1, 3.0), (2, 3.0), (3, 3.0)],
        };
        for (_, p) in softmax_over_distances(&row) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_two_entry_hand_value() {
        let row = DistanceRow {
            center: 0,
            entries: vec![(1, 1.0), (2, 2.0)],
        };
        let probs = softmax_over_distances(&row);
        assert!((probs[0].1 - 0.26894).abs() < 1e-5);
        assert!((probs[1].1 - 0.73106).abs() < 1e-5);
        let total: f64 = probs.iter().map(|&(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_huge_distance() {
        let row = DistanceRow {
            center: 0,
            entries: vec![(1, 1e6), (2, 0.0), (3, 0.0)],
        };
        let probs = softmax_over_distances(&row);
        assert!(probs.iter().all(|&(_, p)| p.is_finite()));
        assert!(probs[0].1 > 1.0 - 1e-12);
    }

    #[test]
    fn loss_zero_for_two_member_pool() {
        let pool = ModelPool::new(vec![(0, pv(&[0.0, 0.0])), (1, pv(&[3.0, 4.0]))]).unwrap();
        assert_eq!(model_distance_loss(&pool, 0, &hyper()).unwrap(), 0.0);
    }

    #[test]
    fn loss_equidistant_is_log_half() {
        let pool = ModelPool::new(vec![
            (0, pv(&[0.0, 0.0])),
            (1, pv(&[1.0, 0.0])),
            (2, pv(&[-1.0, 0.0])),
        ])
        .unwrap();
        let loss = model_distance_loss(&pool, 0, &hyper()).unwrap();
        assert!((loss - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_worked_example() {
        let loss = model_distance_loss(&toy_pool(), 0, &hyper()).unwrap();
        assert!((loss - (-0.81326)).abs() < 1e-5);
    }

    #[test]
    fn grad_zero_when_models_identical() {
        let pool = ModelPool::new(vec![
            (0, pv(&[1.0, 1.0])),
            (1, pv(&[1.0, 1.0])),
            (2, pv(&[1.0, 1.0])),
        ])
        .unwrap();
        let grad = model_distance_grad(&pool, 0, &hyper()).unwrap();
        assert_eq!(grad.values(), &[0.0, 0.0]);
    }

    #[test]
    fn grad_worked_example() {
        let grad = model_distance_grad(&toy_pool(), 0, &hyper()).unwrap();
        assert!((grad.values()[0] - (-0.23106)).abs() < 1e-5);
        assert!((grad.values()[1] - 0.23106).abs() < 1e-5);
    }

    fn random_pool(rng: &mut impl Rng, n: usize, dim: usize) -> ModelPool {
        ModelPool::new(
            (0..n)
                .map(|id| {
                    (
                        id,
                        ParamVector::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = stream(17, &[4]);
        let h = ServerHyper {
            tau: 0.8,
            ..ServerHyper::default()
        };
        let pool = random_pool(&mut rng, 5, 20);
        let grad = model_distance_grad(&pool, 2, &h).unwrap();
        let step = 1e-4;
        let base: Vec<(ClientId, ParamVector)> = pool.iter().map(|(i, w)| (i, w.clone())).collect();
        let mut fd = Vec::with_capacity(20);
        for k in 0..20 {
            let eval = |delta: f64| {
                let mut entries = base.clone();
                entries[2].1.values_mut()[k] += delta;
                model_distance_loss(&ModelPool::new(entries).unwrap(), 2, &h).unwrap()
            };
            fd.push((eval(step) - eval(-step)) / (2.0 * step));
        }
        let num: f64 = grad
            .values()
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "rel err {}", num / den);
    }

    #[test]
    fn server_step_identity_when_grad_zero() {
        let pool = ModelPool::new(vec![
            (0, pv(&[1.0, 1.0])),
            (1, pv(&[1.0, 1.0])),
            (2, pv(&[1.0, 1.0])),
        ])
        .unwrap();
        let z = server_step(&pool, 0, &hyper()).unwrap();
        assert_eq!(z.values(), &[1.0, 1.0]);
    }

    #[test]
    fn server_step_worked_example() {
        let z = server_step(&toy_pool(), 0, &hyper()).unwrap();
        assert!((z.values()[0] - 0.23106).abs() < 1e-5);
        assert!((z.values()[1] - (-0.23106)).abs() < 1e-5);
    }

    #[test]
    fn server_step_equals_weight_combination() {
        let mut rng = stream(23, &[9]);
        for _ in 0..20 {
            let n = rng.random_range(3..=8);
            let dim = rng.random_range(5..=40);
            let pool = random_pool(&mut rng, n, dim);
            let h = ServerHyper {
                tau: rng.random_range(0.5..1.1),
                alpha_t: if rng.random::<bool>() { 1.0 } else { 0.5 },
                ..ServerHyper::default()
            };
            for center in 0..n {
                let z = server_step(&pool, center, &h).unwrap();
                let via_weights = combination_weights(&pool, center, &h)
                    .unwrap()
                    .apply(&pool)
                    .unwrap();
                for (a, b) in z.values().iter().zip(via_weights.values()) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn weights_worked_example() {
        let w = combination_weights(&toy_pool(), 0, &hyper()).unwrap();
        assert!((w.beta_self - 0.88447).abs() < 1e-5);
        assert!((w.betas[0].1 - 0.23106).abs() < 1e-5);
        assert!((w.betas[1].1 - (-0.11553)).abs() < 1e-5);
        assert!((w.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weights_guard_identical_models() {
        let pool = ModelPool::new(vec![
            (0, pv(&[1.0, 1.0])),
            (1, pv(&[1.0, 1.0])),
            (2, pv(&[1.0, 1.0])),
        ])
        .unwrap();
        let w = combination_weights(&pool, 0, &hyper()).unwrap();
        assert_eq!(w.beta_self, 1.0);
        assert!(w.no_interaction());
    }

    #[test]
    fn two_client_pool_has_no_interaction() {
        let pool = ModelPool::new(vec![(0, pv(&[0.0, 0.0])), (1, pv(&[3.0, 4.0]))]).unwrap();
        let w = combination_weights(&pool, 0, &hyper()).unwrap();
        assert_eq!(w.betas, vec![(1, 0.0)]);
        assert!(w.no_interaction());
        let z = server_step(&pool, 0, &hyper()).unwrap();
        assert_eq!(z.values(), pool.get(0).unwrap().values());
    }

    #[test]
    fn sign_rule_worked_example() {
        let signs = sign_rule_check(&toy_pool(), 0, &hyper()).unwrap();
        assert_eq!(signs[0], (1, Interaction::Attract));
        assert_eq!(signs[1], (2, Interaction::Repel));
    }

    #[test]
    fn sign_rule_neutral_for_equidistant_models() {
        let pool = ModelPool::new(vec![
            (0, pv(&[0.0, 0.0])),
            (1, pv(&[1.0, 0.0])),
            (2, pv(&[-1.0, 0.0])),
        ])
        .unwrap();
        for (_, kind) in sign_rule_check(&pool, 0, &hyper()).unwrap() {
            assert_eq!(kind, Interaction::Neutral);
        }
    }

    #[test]
    fn sign_rule_outlier_repelled_cluster_attracted() {
        // Tight cluster of 39 models plus one far outlier, viewed from a
        // cluster member.
        let mut rng = stream(31, &[6]);
        let mut entries: Vec<(ClientId, ParamVector)> = (0..39)
            .map(|id| {
                (
                    id,
                    ParamVector::new(
                        (0..10).map(|_| rng.random_range(-0.01..0.01)).collect(),
                    ),
                )
            })
            .collect();
        entries.push((39, ParamVector::new(vec![50.0; 10])));
        let pool = ModelPool::new(entries).unwrap();
        let signs = sign_rule_check(&pool, 0, &hyper()).unwrap();
        for (id, kind) in signs {
            if id == 39 {
                assert_eq!(kind, Interaction::Repel);
            } else {
                assert_eq!(kind, Interaction::Attract);
            }
        }
    }

    #[test]
    fn normalize_by_sqrt_dim_rescales_distances() {
        let pool = toy_pool();
        let h = ServerHyper {
            normalize_by_sqrt_dim: true,
            ..ServerHyper::default()
        };
        // dim 2: distances divided by sqrt(2); identity must still hold.
        let z = server_step(&pool, 0, &h).unwrap();
        let via = combination_weights(&pool, 0, &h).unwrap().apply(&pool).unwrap();
        for (a, b) in z.values().iter().zip(via.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = euclidean_distance(pool.get(0).unwrap(), pool.get(1).unwrap()).unwrap();
        assert_eq!(d, 1.0);
    }
}
