//! The ground-truth one-hidden-layer sigmoid network: forward probability,
//! Bernoulli label generation, and spectral statistics of the weight matrix.

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Numerically stable sigmoid. Branches on the sign so `exp` never overflows.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First derivative of the sigmoid, `phi(z)(1 - phi(z))`.
#[inline]
pub fn sigmoid_deriv(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// Second derivative of the sigmoid, `phi'(z)(1 - 2 phi(z))`.
#[inline]
pub fn sigmoid_second_deriv(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// Network output `H(W, x) = (1/K) Σ_j phi(w_jᵀ x)`.
///
/// Per-neuron terms are summed in value order so the result is exactly
/// invariant under column permutations of `W`.
pub fn forward(weights: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    if weights.nrows() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.nrows(),
            got: x.len(),
        });
    }
    let k = weights.ncols();
    let mut acts: Vec<f64> = (0..k)
        .map(|j| sigmoid(weights.column(j).dot(x)))
        .collect();
    Ok(crate::util::sorted_sum(&mut acts) / k as f64)
}

/// Singular-value summary of a weight matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralStats {
    /// Singular values in descending order.
    pub deltas: Vec<f64>,
    /// Condition number `delta_1 / delta_K`.
    pub kappa: f64,
    /// Product of `delta_i / delta_K` over all i.
    pub eta: f64,
}

/// Computes descending singular values and the derived kappa and eta.
/// Rank-deficient matrices are rejected; the moment-based initializer needs
/// full column rank.
pub fn spectral_stats(weights: &DMatrix<f64>) -> Result<SpectralStats> {
    let k = weights.ncols();
    if k == 0 || weights.nrows() < k {
        return Err(Error::InvalidModel(format!(
            "weights must be d x K with d >= K >= 1, got {}x{}",
            weights.nrows(),
            k
        )));
    }
    let svd = weights.clone().svd(false, false);
    let mut deltas: Vec<f64> = svd.singular_values.iter().cloned().collect();
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let delta_k = deltas[k - 1];
    if !(delta_k > 1e-12 * deltas[0].max(1.0)) {
        return Err(Error::InvalidModel(format!(
            "rank-deficient weights: smallest singular value {delta_k:.3e}"
        )));
    }
    let kappa = deltas[0] / delta_k;
    let eta = deltas.iter().map(|d| d / delta_k).product();
    Ok(SpectralStats { deltas, kappa, eta })
}

/// Ground-truth network weights with cached spectral statistics.
#[derive(Debug, Clone)]
pub struct TeacherModel {
    weights: DMatrix<f64>,
    stats: SpectralStats,
}

impl TeacherModel {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let stats = spectral_stats(&weights)?;
        Ok(TeacherModel { weights, stats })
    }

    /// Teacher with i.i.d. standard normal entries.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Self> {
        TeacherModel::random_scaled(d, k, 1.0, rng)
    }

    /// Teacher with i.i.d. `N(0, scale^2)` entries.
    pub fn random_scaled<R: Rng + ?Sized>(
        d: usize,
        k: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        TeacherModel::new(weights)
    }

    /// Teacher with entries uniform on `[-scale, scale]`.
    pub fn random_uniform<R: Rng + ?Sized>(
        d: usize,
        k: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = DMatrix::from_fn(d, k, |_, _| rng.random_range(-scale..=scale));
        TeacherModel::new(weights)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn neuron_count(&self) -> usize {
        self.weights.ncols()
    }

    pub fn stats(&self) -> &SpectralStats {
        &self.stats
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<f64> {
        forward(&self.weights, x)
    }

    /// Draws a Bernoulli label with success probability `forward(x)`.
    pub fn draw_label<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> Result<u8> {
        let p = self.forward(x)?;
        Ok(u8::from(rng.random::<f64>() < p))
    }

    pub fn to_json(&self) -> TeacherJson {
        let d = self.input_dim();
        let k = self.neuron_count();
        TeacherJson {
            d,
            k,
            weights: (0..d)
                .map(|i| (0..k).map(|j| self.weights[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn from_json(doc: &TeacherJson) -> Result<Self> {
        if doc.weights.len() != doc.d || doc.weights.iter().any(|r| r.len() != doc.k) {
            return Err(Error::InvalidModel(
                "weights shape does not match declared d, k".into(),
            ));
        }
        let w = DMatrix::from_fn(doc.d, doc.k, |i, j| doc.weights[i][j]);
        TeacherModel::new(w)
    }
}

/// JSON document form of the teacher weights, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeacherJson {
    pub d: usize,
    pub k: usize,
    pub weights: Vec<Vec<f64>>,
}

/// A labeled training point: features, binary label, and the true group.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub x: DVector<f64>,
    pub label: u8,
    pub group: usize,
}

/// A training set drawn from the mixture and labeled by the teacher.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn generate<R: Rng + ?Sized>(
        psi: &MixtureParams,
        teacher: &TeacherModel,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let g = psi.sample_one(rng);
            let label = teacher.draw_label(&g.x, rng)?;
            samples.push(LabeledSample {
                x: g.x,
                label,
                group: g.group,
            });
        }
        Ok(Dataset { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
