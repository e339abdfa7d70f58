//! Flattened parameter vectors and the distance geometry built on them.
//!
//! Every model in the system is handled as one flat `f64` vector with a
//! canonical layout: layer by layer, weights before biases, row-major within
//! a weight matrix. Distances between models are plain Euclidean norms of
//! the difference, accumulated with Neumaier compensation so they stay
//! stable at 50k+ dimensions.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Client identifier, unique within one run.
pub type ClientId = usize;

/// A model's parameters as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// One dense layer in structured form: `weights` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// A model as a list of dense layers, the inverse view of [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructuredModel {
    pub layers: Vec<DenseLayer>,
}

/// Flatten a structured model into the canonical layout: for each layer in
/// order, the weight matrix row by row, then the bias vector.
pub fn flatten(model: &StructuredModel) -> ParamVector {
    let total: usize = model
        .layers
        .iter()
        .map(|l| l.weights.len() + l.bias.len())
        .sum();
    let mut values = Vec::with_capacity(total);
    for layer in &model.layers {
        debug_assert_eq!(layer.weights.len(), layer.out_dim * layer.in_dim);
        debug_assert_eq!(layer.bias.len(), layer.out_dim);
        values.extend_from_slice(&layer.weights);
        values.extend_from_slice(&layer.bias);
    }
    ParamVector::new(values)
}

/// Rebuild a structured model from a flat vector given `(out_dim, in_dim)`
/// per layer. Exact inverse of [`flatten`] for matching shapes.
pub fn unflatten(params: &ParamVector, shapes: &[(usize, usize)]) -> Result<StructuredModel> {
    let expected: usize = shapes.iter().map(|&(o, i)| o * i + o).sum();
    if expected != params.dim() {
        return Err(Error::DimMismatch {
            expected,
            actual: params.dim(),
            context: "unflatten",
        });
    }
    let mut layers = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for &(out_dim, in_dim) in shapes {
        let w_len = out_dim * in_dim;
        let weights = params.values()[offset..offset + w_len].to_vec();
        offset += w_len;
        let bias = params.values()[offset..offset + out_dim].to_vec();
        offset += out_dim;
        layers.push(DenseLayer {
            out_dim,
            in_dim,
            weights,
            bias,
        });
    }
    Ok(StructuredModel { layers })
}

/// Neumaier-compensated sum. Keeps long accumulations accurate to a few ulp.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Squared Euclidean distance with compensated accumulation.
pub fn squared_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
            context: "euclidean_distance",
        });
    }
    Ok(compensated_sum(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y)),
    ))
}

/// Euclidean distance between two parameter vectors.
pub fn euclidean_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    Ok(squared_distance(a, b)?.sqrt())
}

/// The models the server holds in one round, with a lazy pairwise-distance
/// cache. Ids are unique and all vectors share one dimension.
#[derive(Debug)]
pub struct ModelPool {
    ids: Vec<ClientId>,
    models: Vec<ParamVector>,
    dists: OnceLock<Vec<f64>>,
}

impl ModelPool {
    pub fn new(entries: Vec<(ClientId, ParamVector)>) -> Result<Self> {
        let mut ids = Vec::with_capacity(entries.len());
        let mut models = Vec::with_capacity(entries.len());
        for (id, m) in entries {
            if ids.contains(&id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate client id {id} in model pool"
                )));
            }
            if let Some(first) = models.first() {
                let first: &ParamVector = first;
                if first.dim() != m.dim() {
                    return Err(Error::DimMismatch {
                        expected: first.dim(),
                        actual: m.dim(),
                        context: "model pool",
                    });
                }
            }
            ids.push(id);
            models.push(m);
        }
        Ok(ModelPool {
            ids,
            models,
            dists: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, |m| m.dim())
    }

    pub fn ids(&self) -> &[ClientId] {
        &self.ids
    }

    pub fn position(&self, id: ClientId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn get(&self, id: ClientId) -> Option<&ParamVector> {
        self.position(id).map(|i| &self.models[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClientId, &ParamVector)> {
        self.ids.iter().copied().zip(self.models.iter())
    }

    /// Unscaled pairwise distance between two members, from the cache.
    pub fn distance(&self, a: ClientId, b: ClientId) -> Option<f64> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        let n = self.len();
        Some(self.distance_table()[i * n + j])
    }

    fn distance_table(&self) -> &[f64] {
        self.dists.get_or_init(|| {
            let n = self.len();
            let mut table = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = euclidean_distance(&self.models[i], &self.models[j])
                        .expect("pool members share one dim");
                    table[i * n + j] = d;
                    table[j * n + i] = d;
                }
            }
            table
        })
    }
}

/// Scaled distances from one `center` model to every other pool member.
#[derive(Debug, Clone)]
pub struct DistanceRow {
    pub center: ClientId,
    /// `(other id, ||w_center - w_other|| / tau)` for every other member.
    pub entries: Vec<(ClientId, f64)>,
}

/// Distances from `center` to all other pool members, divided by `tau`.
pub fn distance_row(pool: &ModelPool, center: ClientId, tau: f64) -> Result<DistanceRow> {
    if pool.len() < 2 {
        return Err(Error::PoolTooSmall(pool.len()));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    let c = pool
        .position(center)
        .ok_or(Error::UnknownClient(center))?;
    let n = pool.len();
    let table = pool.distance_table();
    let entries = pool
        .ids
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != c)
        .map(|(j, &id)| (id, table[c * n + j] / tau))
        .collect();
    Ok(DistanceRow { center, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    #[test]
    fn flatten_single_layer_ordering() {
        let model = StructuredModel {
            layers: vec![DenseLayer {
                out_dim: 2,
                in_dim: 2,
                weights: vec![1.0, 2.0, 3.0, 4.0],
                bias: vec![5.0, 6.0],
            }],
        };
        assert_eq!(flatten(&model).values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn flatten_empty_model() {
        let flat = flatten(&StructuredModel::default());
        assert_eq!(flat.dim(), 0);
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let mut rng = stream(11, &[99]);
        let shapes = [(64usize, 784usize), (10usize, 64usize)];
        let model = StructuredModel {
            layers: shapes
                .iter()
                .map(|&(o, i)| DenseLayer {
                    out_dim: o,
                    in_dim: i,
                    weights: (0..o * i).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    bias: (0..o).map(|_| rng.random_range(-1.0..1.0)).collect(),
                })
                .collect(),
        };
        let flat = flatten(&model);
        assert_eq!(flat.dim(), 784 * 64 + 64 + 64 * 10 + 10); // 50890
        let back = unflatten(&flat, &shapes).unwrap();
        assert_eq!(back, model);
        assert_eq!(flatten(&back), flat);
    }

    #[test]
    fn unflatten_rejects_bad_dim() {
        let err = unflatten(&ParamVector::zeros(7), &[(2, 2)]).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn distance_basics() {
        let a = pv(&[0.0, 0.0]);
        let b = pv(&[3.0, 4.0]);
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&a, &b).unwrap(), 5.0);
        assert_eq!(
            euclidean_distance(&b, &a).unwrap(),
            euclidean_distance(&a, &b).unwrap()
        );
        assert!(euclidean_distance(&a, &pv(&[1.0])).is_err());
    }

    /// Pairwise (tree) summation; independent of the Neumaier path under test.
    fn pairwise_sum(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
        }
    }

    #[test]
    fn distance_matches_high_precision_oracle_at_50890_dims() {
        let mut rng = stream(3, &[1]);
        let dim = 50890;
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sq: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).collect();
        let oracle = pairwise_sum(&sq).sqrt();
        let got = euclidean_distance(&pv(&a), &pv(&b)).unwrap();
        assert!(
            (got - oracle).abs() / oracle < 1e-12,
            "got {got}, oracle {oracle}"
        );
    }

    fn toy_pool() -> ModelPool {
        ModelPool::new(vec![
            (0, pv(&[0.0, 0.0])),
            (1, pv(&[1.0, 0.0])),
            (2, pv(&[0.0, 2.0])),
        ])
        .unwrap()
    }

    #[test]
    fn distance_row_direct_norms() {
        let row = distance_row(&toy_pool(), 0, 1.0).unwrap();
        assert_eq!(row.entries, vec![(1, 1.0), (2, 2.0)]);
    }

    #[test]
    fn distance_row_tau_scaling() {
        let row = distance_row(&toy_pool(), 0, 2.0).unwrap();
        assert_eq!(row.entries, vec![(1, 0.5), (2, 1.0)]);
    }

    #[test]
    fn distance_row_matches_brute_force() {
        let mut rng = stream(5, &[2]);
        let entries: Vec<(ClientId, ParamVector)> = (0..5)
            .map(|id| {
                (
                    id,
                    ParamVector::new((0..10).map(|_| rng.random_range(-2.0..2.0)).collect()),
                )
            })
            .collect();
        let naive: Vec<Vec<f64>> = entries
            .iter()
            .map(|(_, a)| {
                entries
                    .iter()
                    .map(|(_, b)| {
                        a.values()
                            .iter()
                            .zip(b.values())
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let pool = ModelPool::new(entries).unwrap();
        for c in 0..5 {
            let row = distance_row(&pool, c, 1.0).unwrap();
            assert_eq!(row.entries.len(), 4);
            for (other, d) in row.entries {
                assert!((d - naive[c][other]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distance_row_requires_two_models() {
        let pool = ModelPool::new(vec![(0, pv(&[1.0]))]).unwrap();
        let err = distance_row(&pool, 0, 1.0).unwrap_err();
        assert!(err.to_string().contains("fewer than two clients"));
    }

    #[test]
    fn pool_rejects_duplicate_ids_and_mixed_dims() {
        assert!(ModelPool::new(vec![(0, pv(&[1.0])), (0, pv(&[2.0]))]).is_err());
        assert!(ModelPool::new(vec![(0, pv(&[1.0])), (1, pv(&[2.0, 3.0]))]).is_err());
    }
}
