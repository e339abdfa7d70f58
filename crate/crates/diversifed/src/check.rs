//! Numerical self-checks: the anchor/combination-weight identity suite and
//! central finite-difference verification of both analytic gradients.
//!
//! The finite-difference harness only ever calls loss functions, never the
//! analytic gradients it checks.

use crate::distance::{
    combination_weights, model_distance_grad, model_distance_loss, server_step,
    sign_rule_check, softmax_over_distances, Interaction, ServerHyper,
};
use crate::neural::{cross_entropy_loss, cross_entropy_loss_and_grad, init_params, Batch, MlpSpec};
use crate::param::{distance_row, ClientId, ModelPool, ParamVector};
use crate::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Outcome of one check suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    pub fn line(&self) -> String {
        format!(
            "{}: {} over {} cases (worst {:.3e}, tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

fn random_pool(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> ModelPool {
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
    .expect("generated ids are unique")
}

/// Verify, over random pools (3..=10 members, 5..=100 dims, tau in
/// [0.5, 1.1], alpha_t in {0.5, 1}): weights sum to one, the server step
/// equals the weighted combination per coordinate, and the sign rule agrees
/// with the direct softmax comparison on unguarded pairs.
pub fn check_combination_identity(pools: usize, seed: u64) -> SuiteResult {
    let mut rng = stream(seed, &[0xC1]);
    let tolerance = 1e-9;
    let mut worst = 0.0f64;
    let mut passed = true;
    for _ in 0..pools {
        let n = rng.random_range(3..=10);
        let dim = rng.random_range(5..=100);
        let pool = random_pool(&mut rng, n, dim);
        let hyper = ServerHyper {
            tau: rng.random_range(0.5..=1.1),
            alpha_t: if rng.random::<bool>() { 1.0 } else { 0.5 },
            ..ServerHyper::default()
        };
        let center = rng.random_range(0..n) as ClientId;

        let weights = combination_weights(&pool, center, &hyper).expect("valid pool");
        let sum_err = (weights.sum() - 1.0).abs();
        worst = worst.max(sum_err);

        let z = server_step(&pool, center, &hyper).expect("valid pool");
        let combined = weights.apply(&pool).expect("ids from pool");
        for (a, b) in z.values().iter().zip(combined.values()) {
            worst = worst.max((a - b).abs());
        }

        // Sign rule vs the softmax comparison, recomputed directly here.
        let row = distance_row(&pool, center, hyper.effective_tau(dim)).expect("valid pool");
        let probs = softmax_over_distances(&row);
        let m = row.entries.len() as f64;
        let signs = sign_rule_check(&pool, center, &hyper).expect("valid pool");
        for (((_, d), (_, p)), (_, kind)) in row.entries.iter().zip(&probs).zip(&signs) {
            if *d < hyper.epsilon_dist {
                continue; // guarded pair, sign rule reports neutral
            }
            let expected = if 1.0 / m > *p {
                Interaction::Attract
            } else if 1.0 / m < *p {
                Interaction::Repel
            } else {
                Interaction::Neutral
            };
            // A vanishing weight is classified neutral; that only happens
            // when the softmax comparison is itself a near-tie.
            if *kind != expected && *kind != Interaction::Neutral {
                passed = false;
            }
        }
    }
    SuiteResult {
        name: "combination-weight identity",
        cases: pools,
        worst,
        tolerance,
        passed: passed && worst < tolerance,
    }
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let num: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

/// Central finite differences of the distance loss against the analytic
/// gradient on random pools.
pub fn check_distance_grad(instances: usize, seed: u64) -> SuiteResult {
    let mut rng = stream(seed, &[0xC2]);
    let tolerance = 1e-5;
    let step = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(3..=8);
        let dim = rng.random_range(5..=30);
        let pool = random_pool(&mut rng, n, dim);
        let hyper = ServerHyper {
            tau: rng.random_range(0.5..=1.1),
            ..ServerHyper::default()
        };
        let center = rng.random_range(0..n) as ClientId;
        let grad = model_distance_grad(&pool, center, &hyper).expect("valid pool");
        let base: Vec<(ClientId, ParamVector)> = pool.iter().map(|(i, w)| (i, w.clone())).collect();
        let center_pos = pool.position(center).unwrap();
        let mut fd = Vec::with_capacity(dim);
        for k in 0..dim {
            let eval = |delta: f64| {
                let mut entries = base.clone();
                entries[center_pos].1.values_mut()[k] += delta;
                model_distance_loss(&ModelPool::new(entries).unwrap(), center, &hyper).unwrap()
            };
            fd.push((eval(step) - eval(-step)) / (2.0 * step));
        }
        worst = worst.max(rel_error(grad.values(), &fd));
    }
    SuiteResult {
        name: "distance-loss gradient vs finite differences",
        cases: instances,
        worst,
        tolerance,
        passed: worst < tolerance,
    }
}

/// Central finite differences of the cross-entropy loss against backprop on
/// random small networks.
pub fn check_cross_entropy_grad(instances: usize, seed: u64) -> SuiteResult {
    let mut rng = stream(seed, &[0xC3]);
    let tolerance = 1e-5;
    let step = 1e-4;
    let mut worst = 0.0f64;
    for case in 0..instances {
        let input_dim = rng.random_range(3..=6);
        let hidden = rng.random_range(3..=6);
        let classes = rng.random_range(2..=4);
        let spec = MlpSpec::new(vec![input_dim, hidden, classes]).expect("sizes valid");
        let params = init_params(&spec, seed.wrapping_add(case as u64));
        let rows = rng.random_range(2..=5);
        let inputs: Vec<f64> = (0..rows * input_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        let batch = Batch::new(inputs, input_dim, labels).expect("shape valid");
        let (_, grad) = cross_entropy_loss_and_grad(&params, &spec, &batch).expect("valid batch");
        let mut fd = Vec::with_capacity(params.dim());
        for k in 0..params.dim() {
            let mut plus = params.clone();
            plus.values_mut()[k] += step;
            let mut minus = params.clone();
            minus.values_mut()[k] -= step;
            fd.push(
                (cross_entropy_loss(&plus, &spec, &batch).unwrap()
                    - cross_entropy_loss(&minus, &spec, &batch).unwrap())
                    / (2.0 * step),
            );
        }
        worst = worst.max(rel_error(grad.values(), &fd));
    }
    SuiteResult {
        name: "cross-entropy gradient vs finite differences",
        cases: instances,
        worst,
        tolerance,
        passed: worst < tolerance,
    }
}
