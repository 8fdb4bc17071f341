//! Gaussian mixture data model: validated parameters, seeded sampling with
//! group labels, log-space density evaluation, and the score functions
//! S1, S2, S3 used by moment-based initialization.

use crate::error::{Error, Result};
use crate::tensor3::{sym_outer, Tensor3};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
/// Dense third-order tensors are only materialized for small dimensions.
pub const MAX_DENSE_DIM: usize = 16;
/// Default tolerance for symmetry detection; synthetic mixtures are exact.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

/// One Gaussian component with factorizations cached at construction.
#[derive(Debug, Clone)]
pub struct Component {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
    /// Spectral norm of the covariance square root, `‖Σ^{1/2}‖`.
    sigma_top: f64,
    /// `‖Σ^{-1}‖^{-1/2}`, i.e. the square root of the smallest eigenvalue.
    sigma_bottom: f64,
}

impl Component {
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn sigma_top(&self) -> f64 {
        self.sigma_top
    }

    pub fn sigma_bottom(&self) -> f64 {
        self.sigma_bottom
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        let q = (&self.precision * &d).dot(&d);
        self.log_norm - 0.5 * q
    }
}

/// A feature vector together with the index of the component it came from.
#[derive(Debug, Clone)]
pub struct GroupedSample {
    pub x: DVector<f64>,
    pub group: usize,
}

/// Outcome of symmetry detection: component indices paired as (mu, -mu),
/// plus at most one unpaired zero-mean component when the count is odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symmetry {
    pub symmetric: bool,
    pub pairing: Option<Vec<(usize, usize)>>,
    pub unpaired_zero_mean: Option<usize>,
}

/// Parameters of the generating Gaussian mixture. Immutable after
/// construction and safe to share across threads; all samplers take a
/// caller-supplied generator.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    dimension: usize,
    components: Vec<Component>,
    sigma_max: f64,
    sigma_min: f64,
    tau: f64,
}

impl MixtureParams {
    pub fn new(components: Vec<(f64, DVector<f64>, DMatrix<f64>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        let dimension = components[0].1.len();
        if dimension == 0 {
            return Err(Error::InvalidMixture("zero-dimensional mean".into()));
        }
        let weight_sum: f64 = components.iter().map(|c| c.0).sum();
        if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {weight_sum}, expected 1"
            )));
        }

        let mut built = Vec::with_capacity(components.len());
        for (idx, (weight, mean, covariance)) in components.into_iter().enumerate() {
            if !(weight > 0.0 && weight < 1.0 + WEIGHT_SUM_TOL) {
                return Err(Error::InvalidMixture(format!(
                    "component {idx}: weight {weight} not in (0,1)"
                )));
            }
            if mean.len() != dimension {
                return Err(Error::InvalidMixture(format!(
                    "component {idx}: mean length {} != dimension {dimension}",
                    mean.len()
                )));
            }
            if covariance.nrows() != dimension || covariance.ncols() != dimension {
                return Err(Error::InvalidMixture(format!(
                    "component {idx}: covariance is {}x{}, expected {dimension}x{dimension}",
                    covariance.nrows(),
                    covariance.ncols()
                )));
            }
            let asym = (&covariance - covariance.transpose()).abs().max();
            if asym > SYMMETRY_TOL {
                return Err(Error::InvalidMixture(format!(
                    "component {idx}: covariance asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}"
                )));
            }
            // Symmetrize before factorizing so tiny asymmetries cannot leak in.
            let cov = (&covariance + covariance.transpose()) * 0.5;
            let eig = SymmetricEigen::new(cov.clone());
            let min_eig = eig.eigenvalues.min();
            let max_eig = eig.eigenvalues.max();
            if !(min_eig > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component {idx}: covariance not positive definite (min eigenvalue {min_eig:.3e})"
                )));
            }
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
                Error::InvalidMixture(format!("component {idx}: Cholesky factorization failed"))
            })?;
            let precision = chol.inverse();
            let log_det: f64 = eig.eigenvalues.iter().map(|e| e.ln()).sum();
            let log_norm =
                -0.5 * (dimension as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
            built.push(Component {
                weight,
                mean,
                covariance: cov,
                precision,
                chol_l: chol.l(),
                log_norm,
                sigma_top: max_eig.sqrt(),
                sigma_bottom: min_eig.sqrt(),
            });
        }

        let sigma_max = built.iter().map(|c| c.sigma_top).fold(f64::MIN, f64::max);
        let sigma_min = built
            .iter()
            .map(|c| c.sigma_bottom)
            .fold(f64::MAX, f64::min);
        let tau = sigma_max / sigma_min;
        if !tau.is_finite() || tau < 1.0 - 1e-12 {
            return Err(Error::InvalidMixture(format!("invalid tau {tau}")));
        }
        Ok(MixtureParams {
            dimension,
            components: built,
            sigma_max,
            sigma_min,
            tau,
        })
    }

    /// Mixture with components `(weight, c*ones, s^2*I)`; the workhorse of the
    /// synthetic experiments.
    pub fn isotropic(d: usize, groups: &[(f64, f64, f64)]) -> Result<Self> {
        let comps = groups
            .iter()
            .map(|&(w, mean_coeff, sigma)| {
                (
                    w,
                    DVector::from_element(d, mean_coeff),
                    DMatrix::identity(d, d) * sigma * sigma,
                )
            })
            .collect();
        MixtureParams::new(comps)
    }

    /// Single standard Gaussian in dimension `d`.
    pub fn standard(d: usize) -> Self {
        MixtureParams::new(vec![(1.0, DVector::zeros(d), DMatrix::identity(d, d))])
            .expect("standard Gaussian is valid")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn group_count(&self) -> usize {
        self.components.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Sum over groups of `lambda_l (‖mu_l‖ + ‖Sigma_l^{1/2}‖)^2`; the scale
    /// that the step-size rule and several bounds normalize by.
    pub fn second_moment_scale(&self) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let b = c.mean.norm() + c.sigma_top;
                c.weight * b * b
            })
            .sum()
    }

    /// Draws one sample, returning the group index alongside the features.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupedSample {
        let group = self.pick_component(rng);
        let x = self.sample_component(group, rng);
        GroupedSample { x, group }
    }

    /// Draws `n` samples with a caller-supplied generator.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<GroupedSample> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    fn pick_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // Single-component mixtures consume no randomness here, so a
        // one-group mixture and direct component sampling share streams.
        if self.components.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return l;
            }
        }
        self.components.len() - 1
    }

    /// Samples from component `l` via its cached Cholesky factor.
    pub fn sample_component<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> DVector<f64> {
        let c = &self.components[l];
        let z = DVector::from_fn(self.dimension, |_, _| rng.sample(StandardNormal));
        &c.mean + &c.chol_l * z
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.log_weighted_densities(x).1)
    }

    /// Mixture density, strictly positive.
    pub fn pdf(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    /// Per-component responsibilities `w_l(x) = lambda_l N_l(x) / p(x)`,
    /// computed with log-sum-exp.
    pub fn responsibilities(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let (logs, log_p) = self.log_weighted_densities(x);
        Ok(logs.iter().map(|lw| (lw - log_p).exp()).collect())
    }

    fn log_weighted_densities(&self, x: &DVector<f64>) -> (Vec<f64>, f64) {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_p = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        (logs, log_p)
    }

    /// First-order score `S1(x) = -∇p/p = Σ_l w_l(x) Σ_l^{-1}(x - μ_l)`.
    pub fn score1(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let w = self.responsibilities(x)?;
        let mut s = DVector::zeros(self.dimension);
        for (l, c) in self.components.iter().enumerate() {
            s += (&c.precision * (x - &c.mean)) * w[l];
        }
        Ok(s)
    }

    /// Second-order score `S2(x) = ∇²p/p = Σ_l w_l (r_l r_lᵀ - Σ_l^{-1})`.
    pub fn score2(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let w = self.responsibilities(x)?;
        let mut s = DMatrix::zeros(self.dimension, self.dimension);
        for (l, c) in self.components.iter().enumerate() {
            let r = &c.precision * (x - &c.mean);
            s += (&r * r.transpose() - &c.precision) * w[l];
        }
        Ok(s)
    }

    /// Third-order score in structured form: `S3 = Σ_l w_l (r_l^{⊗3} - r_l ⊗̃ Σ_l^{-1})`.
    ///
    /// The structured form supports contractions without d³ storage; a dense
    /// materialization is available for d ≤ 16.
    pub fn score3(&self, x: &DVector<f64>) -> Result<Score3<'_>> {
        let w = self.responsibilities(x)?;
        let rs = self
            .components
            .iter()
            .map(|c| &c.precision * (x - &c.mean))
            .collect();
        Ok(Score3 {
            mixture: self,
            weights: w,
            residuals: rs,
        })
    }

    /// Checks whether the mixture has the paired `(μ,Σ)/(-μ,Σ)` form, with at
    /// most one unpaired zero-mean component when the count is odd.
    pub fn detect_symmetry(&self, tol: f64) -> Symmetry {
        let n = self.components.len();
        let mut used = vec![false; n];
        let mut pairing = Vec::new();
        let mut zero_mean_leftover = None;

        let close_vec = |a: &DVector<f64>, b: &DVector<f64>| (a + b).abs().max() <= tol;
        let close_mat = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).abs().max() <= tol;

        for i in 0..n {
            if used[i] {
                continue;
            }
            let ci = &self.components[i];
            let mut matched = false;
            for j in (i + 1)..n {
                if used[j] {
                    continue;
                }
                let cj = &self.components[j];
                if (ci.weight - cj.weight).abs() <= tol
                    && close_vec(&ci.mean, &cj.mean)
                    && close_mat(&ci.covariance, &cj.covariance)
                {
                    used[i] = true;
                    used[j] = true;
                    pairing.push((i, j));
                    matched = true;
                    break;
                }
            }
            if !matched {
                let zero_mean = ci.mean.abs().max() <= tol;
                if zero_mean && zero_mean_leftover.is_none() && n % 2 == 1 {
                    used[i] = true;
                    zero_mean_leftover = Some(i);
                } else {
                    return Symmetry {
                        symmetric: false,
                        pairing: None,
                        unpaired_zero_mean: None,
                    };
                }
            }
        }
        Symmetry {
            symmetric: true,
            pairing: Some(pairing),
            unpaired_zero_mean: zero_mean_leftover,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.detect_symmetry(DEFAULT_SYMMETRY_TOL).symmetric
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> MixtureJson {
        MixtureJson {
            dimension: self.dimension,
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    weight: c.weight,
                    mean: c.mean.iter().cloned().collect(),
                    covariance: (0..self.dimension)
                        .map(|i| (0..self.dimension).map(|j| c.covariance[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &MixtureJson) -> Result<Self> {
        let comps = doc
            .components
            .iter()
            .map(|c| {
                let mean = DVector::from_vec(c.mean.clone());
                let d = c.covariance.len();
                let cov = DMatrix::from_fn(d, d, |i, j| c.covariance[i][j]);
                (c.weight, mean, cov)
            })
            .collect();
        let psi = MixtureParams::new(comps)?;
        if psi.dimension != doc.dimension {
            return Err(Error::InvalidMixture(format!(
                "declared dimension {} does not match component dimension {}",
                doc.dimension, psi.dimension
            )));
        }
        Ok(psi)
    }
}

/// JSON document form of a mixture: covariance stored row-major, full matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureJson {
    pub dimension: usize,
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentJson {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Structured third-order score at one point: responsibilities, residual
/// directions `r_l = Σ_l^{-1}(x-μ_l)`, and the mixture's cached precisions.
pub struct Score3<'a> {
    mixture: &'a MixtureParams,
    weights: Vec<f64>,
    residuals: Vec<DVector<f64>>,
}

impl Score3<'_> {
    pub fn terms(&self) -> impl Iterator<Item = (f64, &DVector<f64>, &DMatrix<f64>)> {
        self.weights
            .iter()
            .zip(&self.residuals)
            .zip(&self.mixture.components)
            .map(|((&w, r), c)| (w, r, &c.precision))
    }

    /// Dense materialization, gated to small dimension.
    pub fn dense(&self) -> Result<Tensor3> {
        let d = self.mixture.dimension;
        if d > MAX_DENSE_DIM {
            return Err(Error::InvalidInput(format!(
                "dense third-order score requires d <= {MAX_DENSE_DIM}, got {d}"
            )));
        }
        let mut t = Tensor3::zeros(d, d, d);
        for (w, r, p) in self.terms() {
            let cube = Tensor3::rank_one(r, r, r);
            let sym = sym_outer(r, p);
            t.add_scaled(&cube, w);
            t.add_scaled(&sym, -w);
        }
        Ok(t)
    }

    /// Contraction `S3(a, b, c)` with vectors, in O(L d) after the dot
    /// products.
    pub fn contract_vec(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (w, r, p) in self.terms() {
            let ra = r.dot(a);
            let rb = r.dot(b);
            let rc = r.dot(c);
            let pab = (p * b).dot(a);
            let pac = (p * c).dot(a);
            let pbc = (p * c).dot(b);
            acc += w * (ra * rb * rc - (ra * pbc + rb * pac + rc * pab));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{mean_std_err, pairwise_sum_by};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_component(d: usize) -> MixtureParams {
        MixtureParams::isotropic(d, &[(0.5, 1.0, 1.0), (0.5, -1.0, 1.0)]).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        let d = 2;
        let err = MixtureParams::new(vec![
            (0.7, DVector::zeros(d), DMatrix::identity(d, d)),
            (0.7, DVector::zeros(d), DMatrix::identity(d, d)),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let d = 2;
        let cov = DMatrix::from_row_slice(d, d, &[1.0, 2.0, 2.0, 1.0]);
        assert!(MixtureParams::new(vec![(1.0, DVector::zeros(d), cov)]).is_err());
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let d = 2;
        let cov = DMatrix::from_row_slice(d, d, &[1.0, 0.5, 0.1, 1.0]);
        assert!(MixtureParams::new(vec![(1.0, DVector::zeros(d), cov)]).is_err());
    }

    #[test]
    fn tau_at_least_one() {
        let psi = MixtureParams::isotropic(3, &[(0.5, 0.0, 0.5), (0.5, 0.0, 2.0)]).unwrap();
        assert!((psi.sigma_max() - 2.0).abs() < 1e-12);
        assert!((psi.sigma_min() - 0.5).abs() < 1e-12);
        assert!((psi.tau() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_standard_gaussian() {
        let psi = MixtureParams::standard(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = psi.sample(100_000, &mut rng);
        for coord in 0..5 {
            let m = pairwise_sum_by(samples.len(), &|i| samples[i].x[coord])
                / samples.len() as f64;
            assert!(m.abs() < 0.02, "coord {coord} mean {m}");
        }
    }

    #[test]
    fn sample_mean_symmetric_mixture() {
        let psi = two_component(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples = psi.sample(100_000, &mut rng);
        for coord in 0..4 {
            let m = pairwise_sum_by(samples.len(), &|i| samples[i].x[coord])
                / samples.len() as f64;
            assert!(m.abs() < 0.02, "coord {coord} mean {m}");
        }
    }

    #[test]
    fn sample_covariance_matches_generator() {
        // Random PD covariance built from a known square root.
        let d = 3;
        let a = DMatrix::from_row_slice(
            d,
            d,
            &[0.9, 0.2, -0.1, 0.0, 0.7, 0.3, 0.1, -0.2, 0.8],
        );
        let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.05;
        let mean = DVector::from_vec(vec![0.3, -0.6, 1.1]);
        let psi = MixtureParams::new(vec![(1.0, mean.clone(), cov.clone())]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let samples = psi.sample(n, &mut rng);
        let mut emp = DMatrix::zeros(d, d);
        let mut m = DVector::zeros(d);
        for s in &samples {
            m += &s.x;
        }
        m /= n as f64;
        for s in &samples {
            let c = &s.x - &m;
            emp += &c * c.transpose();
        }
        emp /= n as f64 - 1.0;
        assert!((emp - cov).abs().max() < 0.01);
    }

    #[test]
    fn pdf_standard_normal_peak() {
        let psi = MixtureParams::standard(1);
        let p = psi.pdf(&DVector::from_vec(vec![0.0])).unwrap();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pdf_symmetric_mixture_even() {
        let psi = two_component(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.0);
            let px = psi.pdf(&x).unwrap();
            let pneg = psi.pdf(&(-&x)).unwrap();
            assert!((px - pneg).abs() <= 1e-12 * px.max(1.0));
        }
    }

    #[test]
    fn pdf_dimension_mismatch_rejected() {
        let psi = two_component(3);
        assert!(psi.pdf(&DVector::zeros(2)).is_err());
    }

    /// Adaptive Simpson quadrature, used only as an independent oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let simpson = |a: f64, b: f64| {
            let c = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
        };
        let whole = simpson(a, b);
        let left = simpson(a, c);
        let right = simpson(c, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            adaptive_simpson(f, a, c, tol / 2.0, depth - 1)
                + adaptive_simpson(f, c, b, tol / 2.0, depth - 1)
        }
    }

    #[test]
    fn pdf_integrates_to_one_1d() {
        let psi = MixtureParams::new(vec![
            (
                0.3,
                DVector::from_vec(vec![-1.5]),
                DMatrix::from_vec(1, 1, vec![0.49]),
            ),
            (
                0.7,
                DVector::from_vec(vec![2.0]),
                DMatrix::from_vec(1, 1, vec![2.25]),
            ),
        ])
        .unwrap();
        let f = |t: f64| psi.pdf(&DVector::from_vec(vec![t])).unwrap();
        let integral = adaptive_simpson(&f, -20.0, 20.0, 1e-12, 40);
        assert!((integral - 1.0).abs() < 1e-8, "integral {integral}");
    }

    #[test]
    fn score1_standard_gaussian_is_x() {
        let psi = MixtureParams::standard(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = psi.score1(&x).unwrap();
            assert!((s - &x).abs().max() < 1e-12);
        }
    }

    #[test]
    fn score2_standard_gaussian_at_origin() {
        let psi = MixtureParams::standard(3);
        let s = psi.score2(&DVector::zeros(3)).unwrap();
        assert!((s + DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn score1_matches_pdf_finite_differences() {
        let psi = MixtureParams::new(vec![
            (
                0.4,
                DVector::from_vec(vec![1.0, -0.5]),
                DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.8]),
            ),
            (
                0.6,
                DVector::from_vec(vec![-0.7, 0.9]),
                DMatrix::from_row_slice(2, 2, &[0.6, -0.1, -0.1, 1.5]),
            ),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-5;
        for _ in 0..10 {
            let x = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = psi.score1(&x).unwrap();
            let p = psi.pdf(&x).unwrap();
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = -(psi.pdf(&xp).unwrap() - psi.pdf(&xm).unwrap()) / (2.0 * h) / p;
                let rel = (s[i] - fd).abs() / s[i].abs().max(1e-8);
                assert!(rel <= 1e-5, "coord {i}: score {} fd {fd}", s[i]);
            }
        }
    }

    #[test]
    fn score3_matches_third_derivative_finite_differences() {
        let psi = MixtureParams::new(vec![
            (
                0.5,
                DVector::from_vec(vec![0.4, -0.2]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]),
            ),
            (
                0.5,
                DVector::from_vec(vec![-0.4, 0.2]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]),
            ),
        ])
        .unwrap();
        let x = DVector::from_vec(vec![0.35, -0.15]);
        let s3 = psi.score3(&x).unwrap().dense().unwrap();
        let p0 = psi.pdf(&x).unwrap();
        let h = 2e-3;
        let pdf_at = |dx: f64, i: usize, dy: f64, j: usize, dz: f64, k: usize| {
            let mut xx = x.clone();
            xx[i] += dx;
            xx[j] += dy;
            xx[k] += dz;
            psi.pdf(&xx).unwrap()
        };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    // Central difference for the third mixed partial.
                    let mut fd = 0.0;
                    for (si, wi) in [(-1.0, -0.5), (1.0, 0.5)] {
                        for (sj, wj) in [(-1.0, -0.5), (1.0, 0.5)] {
                            for (sk, wk) in [(-1.0, -0.5), (1.0, 0.5)] {
                                fd += wi * wj * wk * pdf_at(si * h, i, sj * h, j, sk * h, k);
                            }
                        }
                    }
                    fd /= h * h * h;
                    let expected = -fd / p0;
                    let got = s3.get(i, j, k);
                    let rel = (got - expected).abs() / expected.abs().max(1e-6);
                    assert!(rel <= 1e-3, "({i},{j},{k}): got {got}, fd {expected}");
                }
            }
        }
    }

    #[test]
    fn score1_zero_mean_stein_identity() {
        let psi = MixtureParams::isotropic(3, &[(0.6, 0.8, 1.0), (0.4, -0.5, 1.4)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let samples = psi.sample(n, &mut rng);
        let mut mean = DVector::zeros(3);
        let mut sq = 0.0;
        for s in &samples {
            let sc = psi.score1(&s.x).unwrap();
            sq += sc.norm_squared();
            mean += sc;
        }
        mean /= n as f64;
        let trace_bound = sq / n as f64;
        assert!(
            mean.norm() <= 5.0 * (trace_bound / n as f64).sqrt(),
            "score mean norm {} bound {}",
            mean.norm(),
            5.0 * (trace_bound / n as f64).sqrt()
        );
    }

    #[test]
    fn directional_moment_bound() {
        // E[(u'x)^{2t}] <= (2t-1)!! sum_l lambda_l (‖mu_l‖+‖Sigma_l^{1/2}‖)^{2t}
        let psi = MixtureParams::isotropic(4, &[(0.3, 1.2, 0.8), (0.7, -0.4, 1.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut u = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        let n = 200_000;
        let samples = psi.sample(n, &mut rng);
        for t in 1..=3usize {
            let double_fact: f64 = (1..=2 * t - 1).step_by(2).map(|k| k as f64).product();
            let bound: f64 = double_fact
                * psi
                    .components()
                    .iter()
                    .map(|c| c.weight * (c.mean.norm() + c.sigma_top()).powi(2 * t as i32))
                    .sum::<f64>();
            let vals: Vec<f64> = samples
                .iter()
                .map(|s| u.dot(&s.x).powi(2 * t as i32))
                .collect();
            let (m, se) = mean_std_err(&vals);
            assert!(m <= bound + 3.0 * se, "t={t}: mc {m} bound {bound} se {se}");
        }
    }

    #[test]
    fn norm_moment_bound() {
        // E[‖x‖^{2t}] <= d^t (2t-1)!! sum_l lambda_l (‖mu_l‖+‖Sigma_l^{1/2}‖)^{2t}
        let psi = MixtureParams::isotropic(3, &[(0.5, 0.9, 1.1), (0.5, -0.2, 0.6)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let samples = psi.sample(n, &mut rng);
        let d = 3.0f64;
        for t in 1..=3usize {
            let double_fact: f64 = (1..=2 * t - 1).step_by(2).map(|k| k as f64).product();
            let bound: f64 = d.powi(t as i32)
                * double_fact
                * psi
                    .components()
                    .iter()
                    .map(|c| c.weight * (c.mean.norm() + c.sigma_top()).powi(2 * t as i32))
                    .sum::<f64>();
            let vals: Vec<f64> = samples
                .iter()
                .map(|s| s.x.norm_squared().powi(t as i32))
                .collect();
            let (m, se) = mean_std_err(&vals);
            assert!(m <= bound + 3.0 * se, "t={t}: mc {m} bound {bound} se {se}");
        }
    }

    #[test]
    fn symmetry_exact_pair() {
        let psi = two_component(3);
        let sym = psi.detect_symmetry(DEFAULT_SYMMETRY_TOL);
        assert!(sym.symmetric);
        assert_eq!(sym.pairing, Some(vec![(0, 1)]));
        assert_eq!(sym.unpaired_zero_mean, None);
    }

    #[test]
    fn symmetry_unpaired_nonzero_mean() {
        let psi = MixtureParams::isotropic(3, &[(0.5, 1.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        assert!(!psi.detect_symmetry(DEFAULT_SYMMETRY_TOL).symmetric);
    }

    #[test]
    fn symmetry_odd_count_with_zero_mean() {
        let psi = MixtureParams::isotropic(
            3,
            &[(0.4, 1.0, 1.0), (0.4, -1.0, 1.0), (0.2, 0.0, 2.0_f64.sqrt())],
        )
        .unwrap();
        let sym = psi.detect_symmetry(DEFAULT_SYMMETRY_TOL);
        assert!(sym.symmetric);
        assert_eq!(sym.unpaired_zero_mean, Some(2));
    }

    #[test]
    fn json_round_trip() {
        let psi = MixtureParams::isotropic(2, &[(0.25, 1.5, 0.7), (0.75, -0.5, 1.3)]).unwrap();
        let doc = psi.to_json();
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: MixtureJson = serde_json::from_str(&text).unwrap();
        let back = MixtureParams::from_json(&parsed).unwrap();
        assert_eq!(back.dimension(), 2);
        for (a, b) in back.components().iter().zip(psi.components()) {
            assert!((a.weight - b.weight).abs() < 1e-15);
            assert!((&a.mean - &b.mean).abs().max() < 1e-15);
            assert!((&a.covariance - &b.covariance).abs().max() < 1e-15);
        }
    }
}
