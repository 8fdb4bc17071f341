//! Moment-based initialization: label-weighted score moments Q1, Q2, Q3,
//! column-span recovery, symmetric tensor power decomposition with deflation,
//! and the least-squares magnitude solve that assembles the initial weights.

use crate::error::{Error, Result};
use crate::mixture::{MixtureParams, MAX_DENSE_DIM};
use crate::teacher::LabeledSample;
use crate::tensor3::Tensor3;
use crate::util::derive_seed;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Eigengap below this attaches an ill-conditioned-subspace warning.
const EIGENGAP_WARN: f64 = 1e-12;
/// Gram matrices with condition number above this are rejected as collinear.
const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Contiguous three-way partition of a dataset.
#[derive(Debug, Clone)]
pub struct ThreeWaySplit {
    pub first: Range<usize>,
    pub second: Range<usize>,
    pub third: Range<usize>,
}

impl ThreeWaySplit {
    /// Equal thirds (the last split absorbs the remainder).
    pub fn equal_thirds(n: usize) -> Self {
        let a = n / 3;
        let b = 2 * n / 3;
        ThreeWaySplit {
            first: 0..a,
            second: a..b,
            third: b..n,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        for (name, r) in [
            ("first", &self.first),
            ("second", &self.second),
            ("third", &self.third),
        ] {
            if r.is_empty() {
                return Err(Error::InvalidInput(format!("{name} split is empty")));
            }
            if r.end > n {
                return Err(Error::InvalidInput(format!(
                    "{name} split {r:?} exceeds dataset length {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Sample-mean estimator of the label-weighted third-order score moment,
/// held as a closure over its data split. Contractions never materialize
/// the d^3 tensor.
pub struct ScoreContractor<'a> {
    psi: &'a MixtureParams,
    samples: &'a [LabeledSample],
}

impl<'a> ScoreContractor<'a> {
    pub fn new(psi: &'a MixtureParams, samples: &'a [LabeledSample]) -> Self {
        ScoreContractor { psi, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Multilinear contraction `Q3(A, B, C)` with per-sample cost
    /// O(d(a+b+c) + abc) after fixed per-component precomputation.
    pub fn contract(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
    ) -> Result<Tensor3> {
        let d = self.psi.dimension();
        for (name, m) in [("A", a), ("B", b), ("C", c)] {
            if m.nrows() != d {
                return Err(Error::InvalidInput(format!(
                    "{name} has {} rows, expected {d}",
                    m.nrows()
                )));
            }
        }
        let (na, nb, nc) = (a.ncols(), b.ncols(), c.ncols());
        // Gram blocks against each component's precision are sample-independent.
        let comps = self.psi.components();
        let g_bc: Vec<DMatrix<f64>> = comps
            .iter()
            .map(|cmp| b.transpose() * cmp.precision() * c)
            .collect();
        let g_ac: Vec<DMatrix<f64>> = comps
            .iter()
            .map(|cmp| a.transpose() * cmp.precision() * c)
            .collect();
        let g_ab: Vec<DMatrix<f64>> = comps
            .iter()
            .map(|cmp| a.transpose() * cmp.precision() * b)
            .collect();

        let mut acc = Tensor3::zeros(na, nb, nc);
        for s in self.samples {
            if s.label == 0 {
                continue;
            }
            let score = self.psi.score3(&s.x)?;
            for (l, (w, r, _)) in score.terms().enumerate() {
                let ta = a.transpose() * r;
                let tb = b.transpose() * r;
                let tc = c.transpose() * r;
                for p in 0..na {
                    for q in 0..nb {
                        let tab = ta[p] * tb[q];
                        let gab = g_ab[l][(p, q)];
                        for u in 0..nc {
                            acc.add_at(
                                p,
                                q,
                                u,
                                w * (tab * tc[u]
                                    - ta[p] * g_bc[l][(q, u)]
                                    - tb[q] * g_ac[l][(p, u)]
                                    - tc[u] * gab),
                            );
                        }
                    }
                }
            }
        }
        acc.scale(1.0 / self.samples.len() as f64);
        Ok(acc)
    }

    /// The d x d matrix `Q3(I, I, alpha)` used for span recovery when the
    /// mixture is symmetric.
    pub fn contract_identity_pair(&self, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.psi.dimension();
        if alpha.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: alpha.len(),
            });
        }
        let p_alpha: Vec<DVector<f64>> = self
            .psi
            .components()
            .iter()
            .map(|c| c.precision() * alpha)
            .collect();
        let mut acc = DMatrix::zeros(d, d);
        for s in self.samples {
            if s.label == 0 {
                continue;
            }
            let score = self.psi.score3(&s.x)?;
            for (l, (w, r, prec)) in score.terms().enumerate() {
                let ra = r.dot(alpha);
                acc += (r * r.transpose() * ra
                    - r * p_alpha[l].transpose()
                    - &p_alpha[l] * r.transpose()
                    - prec * ra)
                    * w;
            }
        }
        acc /= self.samples.len() as f64;
        Ok(acc)
    }

    /// Dense sample-mean tensor, testing-only (d <= 16).
    pub fn dense(&self) -> Result<Tensor3> {
        let d = self.psi.dimension();
        if d > MAX_DENSE_DIM {
            return Err(Error::InvalidInput(format!(
                "dense moment tensor gated to d <= {MAX_DENSE_DIM}"
            )));
        }
        let mut acc = Tensor3::zeros(d, d, d);
        for s in self.samples {
            if s.label == 0 {
                continue;
            }
            let t = self.psi.score3(&s.x)?.dense()?;
            acc.add_scaled(&t, 1.0);
        }
        acc.scale(1.0 / self.samples.len() as f64);
        Ok(acc)
    }
}

/// How the column span is recovered: from the second-order moment when the
/// mixture is not symmetric, otherwise from a random contraction of the
/// third-order moment (the second-order one vanishes by symmetry).
pub enum SubspaceMoment<'a> {
    SecondOrder(DMatrix<f64>),
    ThirdOrderProbe(ScoreContractor<'a>),
}

/// Label-weighted score moments estimated on disjoint splits.
pub struct MomentEstimates<'a> {
    /// First-order moment from the third split.
    pub q1: DVector<f64>,
    /// Span source from the first split.
    pub subspace: SubspaceMoment<'a>,
    /// Third-order contractor bound to the second split.
    pub q3: ScoreContractor<'a>,
    pub n_used: (usize, usize, usize),
    /// Norm-vs-noise warnings (a moment indistinguishable from zero breaks
    /// the identifiability assumption the method rests on).
    pub warnings: Vec<String>,
}

impl MomentEstimates<'_> {
    /// Second-order moment when present (non-symmetric mixtures only).
    pub fn q2(&self) -> Option<&DMatrix<f64>> {
        match &self.subspace {
            SubspaceMoment::SecondOrder(m) => Some(m),
            SubspaceMoment::ThirdOrderProbe(_) => None,
        }
    }
}

/// Estimates Q1 (third split), the span moment (first split), and binds the
/// third-order contractor to the second split.
pub fn estimate_moments<'a>(
    data: &'a [LabeledSample],
    psi: &'a MixtureParams,
    split: &ThreeWaySplit,
) -> Result<MomentEstimates<'a>> {
    split.validate(data.len())?;
    let d = psi.dimension();
    let mut warnings = Vec::new();

    // Q1 on the third split, with a scalar spread estimate for the
    // norm-vs-noise check.
    let third = &data[split.third.clone()];
    let mut q1 = DVector::zeros(d);
    for s in third {
        if s.label == 1 {
            q1 += psi.score1(&s.x)?;
        }
    }
    q1 /= third.len() as f64;
    let mut spread = 0.0;
    for s in third {
        let v = if s.label == 1 {
            psi.score1(&s.x)? - &q1
        } else {
            -q1.clone()
        };
        spread += v.norm_squared();
    }
    let q1_se = (spread / third.len() as f64 / third.len() as f64).sqrt();
    if q1.norm() <= 3.0 * q1_se {
        warnings.push(format!(
            "first-order moment norm {:.3e} below 3x its standard error {:.3e}",
            q1.norm(),
            q1_se
        ));
    }

    let first = &data[split.first.clone()];
    let subspace = if psi.is_symmetric() {
        SubspaceMoment::ThirdOrderProbe(ScoreContractor::new(psi, first))
    } else {
        let mut q2 = DMatrix::zeros(d, d);
        for s in first {
            if s.label == 1 {
                q2 += psi.score2(&s.x)?;
            }
        }
        q2 /= first.len() as f64;
        let mut spread = 0.0;
        for s in first {
            let m = if s.label == 1 {
                psi.score2(&s.x)? - &q2
            } else {
                -q2.clone()
            };
            spread += m.norm_squared();
        }
        let q2_se = (spread / first.len() as f64 / first.len() as f64).sqrt();
        if q2.norm() <= 3.0 * q2_se {
            warnings.push(format!(
                "second-order moment norm {:.3e} below 3x its standard error {:.3e}",
                q2.norm(),
                q2_se
            ));
        }
        // Enforce exact symmetry before eigendecomposition.
        let q2 = (&q2 + q2.transpose()) * 0.5;
        SubspaceMoment::SecondOrder(q2)
    };

    let second = &data[split.second.clone()];
    let q3 = ScoreContractor::new(psi, second);

    Ok(MomentEstimates {
        q1,
        subspace,
        q3,
        n_used: (first.len(), second.len(), third.len()),
        warnings,
    })
}

/// Orthonormal estimate of the teacher column span.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    pub basis: DMatrix<f64>,
    /// Gap between the K-th and (K+1)-th absolute eigenvalues.
    pub eigengap: f64,
    pub warning: Option<String>,
}

/// Top-K |eigenvalue| eigenvectors of the span moment. For symmetric
/// mixtures the span matrix is `Q3(I, I, alpha)` with a fixed random unit
/// probe drawn from `probe_seed`.
pub fn estimate_subspace(
    moments: &MomentEstimates<'_>,
    k: usize,
    probe_seed: u64,
) -> Result<SubspaceEstimate> {
    let matrix = match &moments.subspace {
        SubspaceMoment::SecondOrder(q2) => q2.clone(),
        SubspaceMoment::ThirdOrderProbe(contractor) => {
            let d = contractor.psi.dimension();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(probe_seed, 0xa1fa, 0));
            let mut alpha =
                DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            alpha /= alpha.norm();
            let m = contractor.contract_identity_pair(&alpha)?;
            (&m + m.transpose()) * 0.5
        }
    };
    let d = matrix.nrows();
    if k > d {
        return Err(Error::InvalidInput(format!("K {k} exceeds dimension {d}")));
    }
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .abs()
            .partial_cmp(&eig.eigenvalues[i].abs())
            .unwrap()
    });
    let basis = DMatrix::from_fn(d, k, |i, j| eig.eigenvectors[(i, order[j])]);
    let eigengap = if k < d {
        eig.eigenvalues[order[k - 1]].abs() - eig.eigenvalues[order[k]].abs()
    } else {
        eig.eigenvalues[order[k - 1]].abs()
    };
    let warning = (eigengap < EIGENGAP_WARN).then(|| {
        format!("subspace eigengap {eigengap:.3e} below {EIGENGAP_WARN:.0e}; span is ill-conditioned")
    });
    Ok(SubspaceEstimate {
        basis,
        eigengap,
        warning,
    })
}

/// Result of the robust symmetric power decomposition.
#[derive(Debug, Clone)]
pub struct DecompResult {
    pub vectors: Vec<DVector<f64>>,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

fn power_step(t: &Tensor3, u: &DVector<f64>) -> Option<DVector<f64>> {
    let v = t.apply_uu(u);
    let norm = v.norm();
    if norm < 1e-300 {
        None
    } else {
        Some(v / norm)
    }
}

/// Fixed-point residual modulo the sign ambiguity of odd-order tensors.
fn signed_residual(next: &DVector<f64>, prev: &DVector<f64>) -> f64 {
    ((next - prev).norm()).min((next + prev).norm())
}

/// Robust symmetric tensor power method with deflation: for each of `k`
/// components, `restarts` random unit starts each get `power_iters`
/// iterations, the start with the largest |T(u,u,u)| is iterated to a fixed
/// point, and the recovered rank-one piece is deflated away.
pub fn decompose_r3(
    tensor: &Tensor3,
    k: usize,
    restarts: usize,
    power_iters: usize,
    fixed_point_tol: f64,
    seed: u64,
) -> Result<DecompResult> {
    let (a, b, c) = tensor.dims();
    if a != b || b != c {
        return Err(Error::InvalidInput("tensor must be cubic".into()));
    }
    if tensor.asymmetry() > 1e-6 * tensor.max_abs().max(1e-300) {
        return Err(Error::InvalidInput(format!(
            "tensor asymmetry {:.3e} too large for symmetric decomposition",
            tensor.asymmetry()
        )));
    }
    let dim = a;
    if k > dim {
        return Err(Error::InvalidInput(format!(
            "cannot extract {k} components from a {dim}-dimensional tensor"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7e24, 0));
    let mut work = tensor.clone();
    let mut vectors = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut warnings = Vec::new();

    for comp in 0..k {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for _ in 0..restarts {
            let mut u =
                DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            u /= u.norm();
            for _ in 0..power_iters {
                match power_step(&work, &u) {
                    Some(next) => u = next,
                    None => break,
                }
            }
            let value = work.triple(&u).abs();
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, u));
            }
        }
        let (_, mut u) = best.expect("at least one restart");
        // Re-iterate the winning start to a fixed point.
        let mut residual = f64::INFINITY;
        for _ in 0..power_iters {
            match power_step(&work, &u) {
                Some(next) => {
                    residual = signed_residual(&next, &u);
                    u = next;
                    if residual <= fixed_point_tol {
                        break;
                    }
                }
                None => break,
            }
        }
        if residual > fixed_point_tol {
            warnings.push(format!(
                "component {comp}: power iteration residual {residual:.3e} above {fixed_point_tol:.0e}; keeping best iterate"
            ));
        }
        let lambda = work.triple(&u);
        let deflate = Tensor3::rank_one(&u, &u, &u);
        work.add_scaled(&deflate, -lambda);
        vectors.push(u);
        eigenvalues.push(lambda);
        residuals.push(residual);
    }
    Ok(DecompResult {
        vectors,
        eigenvalues,
        residuals,
        warnings,
    })
}

/// Least-squares magnitudes: solves `min_z ‖q1 - Σ_j z_j dir_j‖` through the
/// K x K normal equations. Negative solutions are folded into the direction
/// signs so the returned magnitudes are nonnegative.
pub fn recover_magnitudes(q1: &DVector<f64>, directions: &mut [DVector<f64>]) -> Result<Vec<f64>> {
    let k = directions.len();
    if k == 0 {
        return Err(Error::InvalidInput("no directions".into()));
    }
    let mut gram = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = directions[i].dot(&directions[j]);
        }
        rhs[i] = directions[i].dot(q1);
    }
    let eig = SymmetricEigen::new(gram.clone());
    let max_e = eig.eigenvalues.max();
    let min_e = eig.eigenvalues.min();
    if !(min_e > 0.0) || max_e / min_e > GRAM_CONDITION_LIMIT {
        return Err(Error::InvalidInput(format!(
            "directions nearly collinear: Gram condition {:.3e}",
            max_e / min_e.max(1e-300)
        )));
    }
    let z = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("normal equations solve failed".into()))?;
    let mut out = Vec::with_capacity(k);
    for (j, dir) in directions.iter_mut().enumerate() {
        let mut zj = z[j];
        if zj < 0.0 {
            *dir = -&*dir;
            zj = -zj;
        }
        out.push(zj);
    }
    Ok(out)
}

/// Knobs of the initializer. Defaults: 50 restarts, 100 power iterations,
/// fixed-point tolerance 1e-8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInitConfig {
    pub restarts: usize,
    pub power_iters: usize,
    pub fixed_point_tol: f64,
    pub probe_seed: u64,
}

impl Default for TensorInitConfig {
    fn default() -> Self {
        TensorInitConfig {
            restarts: 50,
            power_iters: 100,
            fixed_point_tol: 1e-8,
            probe_seed: 0,
        }
    }
}

/// Diagnostics recorded alongside the initial weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitDiagnostics {
    pub probe_seed: u64,
    pub eigengap: f64,
    pub power_residuals: Vec<f64>,
    pub tensor_eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Output of the initializer: the weight estimate and its factors.
#[derive(Debug, Clone)]
pub struct InitResult {
    pub w0: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    /// Unit directions in the K-dimensional reduced space.
    pub directions: Vec<DVector<f64>>,
    pub magnitudes: Vec<f64>,
    pub diagnostics: InitDiagnostics,
}

impl InitResult {
    pub fn to_json(&self) -> InitResultJson {
        let (d, k) = self.w0.shape();
        InitResultJson {
            w0: (0..d)
                .map(|i| (0..k).map(|j| self.w0[(i, j)]).collect())
                .collect(),
            basis: (0..d)
                .map(|i| (0..k).map(|j| self.basis[(i, j)]).collect())
                .collect(),
            directions: self
                .directions
                .iter()
                .map(|v| v.iter().cloned().collect())
                .collect(),
            magnitudes: self.magnitudes.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// JSON document form of `InitResult` for handing off to training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitResultJson {
    pub w0: Vec<Vec<f64>>,
    pub basis: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub magnitudes: Vec<f64>,
    pub diagnostics: InitDiagnostics,
}

/// Full pipeline: split, estimate moments, recover span, decompose the
/// reduced tensor, solve magnitudes, and assemble `W0`.
pub fn tensor_init(
    data: &[LabeledSample],
    psi: &MixtureParams,
    k: usize,
    config: &TensorInitConfig,
) -> Result<InitResult> {
    let split = ThreeWaySplit::equal_thirds(data.len());
    let moments =
        estimate_moments(data, psi, &split).map_err(|e| e.in_stage("estimate_moments"))?;
    let sub = estimate_subspace(&moments, k, config.probe_seed)
        .map_err(|e| e.in_stage("estimate_subspace"))?;
    let r3 = moments
        .q3
        .contract(&sub.basis, &sub.basis, &sub.basis)
        .map_err(|e| e.in_stage("reduced_moment"))?
        .symmetrized();
    let decomp = decompose_r3(
        &r3,
        k,
        config.restarts,
        config.power_iters,
        config.fixed_point_tol,
        config.probe_seed,
    )
    .map_err(|e| e.in_stage("decompose_r3"))?;

    // Lift reduced directions back to feature space before the magnitude solve.
    let mut lifted: Vec<DVector<f64>> = decomp.vectors.iter().map(|v| &sub.basis * v).collect();
    let magnitudes = recover_magnitudes(&moments.q1, &mut lifted)
        .map_err(|e| e.in_stage("recover_magnitudes"))?;

    let d = psi.dimension();
    let mut w0 = DMatrix::zeros(d, k);
    for (j, dir) in lifted.iter().enumerate() {
        w0.column_mut(j).copy_from(&(dir * magnitudes[j]));
    }
    // Keep the reduced-space directions consistent with any sign folding.
    let directions: Vec<DVector<f64>> = lifted
        .iter()
        .map(|w| sub.basis.transpose() * w)
        .collect();

    let mut warnings = moments.warnings.clone();
    if let Some(w) = &sub.warning {
        warnings.push(w.clone());
    }
    warnings.extend(decomp.warnings.iter().cloned());

    Ok(InitResult {
        w0,
        basis: sub.basis,
        directions,
        magnitudes,
        diagnostics: InitDiagnostics {
            probe_seed: config.probe_seed,
            eigengap: sub.eigengap,
            power_residuals: decomp.residuals,
            tensor_eigenvalues: decomp.eigenvalues,
            warnings,
        },
    })
}
