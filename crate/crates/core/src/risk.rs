//! Cross-entropy loss with analytic gradient and Hessian, empirical and
//! Monte-Carlo population/group risks, and the permutation-aligned
//! parameter distance.

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;
use crate::teacher::{forward, sigmoid_deriv, sigmoid_second_deriv, Dataset, TeacherModel};
use crate::util::{derive_seed, pairwise_matrix_sum, pairwise_sum_by};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Network outputs are clamped to this range inside logs and denominators so
/// saturated inputs stay finite. Gradient checks should avoid the clamped
/// region.
pub const PROB_FLOOR: f64 = 1e-12;

/// Dense Hessian assembly is gated to this many parameters.
pub const MAX_HESSIAN_PARAMS: usize = 256;

/// Largest width for which the exhaustive permutation alignment runs.
pub const MAX_ALIGN_NEURONS: usize = 8;

#[inline]
fn clamp_prob(h: f64) -> f64 {
    h.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// A risk estimate with the number of samples used and, for Monte-Carlo
/// estimates, the standard error (0 for empirical risk).
#[derive(Debug, Clone, Copy)]
pub struct RiskEval {
    pub value: f64,
    pub n_used: usize,
    pub mc_std_err: f64,
}

/// Cross-entropy loss of one sample.
pub fn loss(weights: &DMatrix<f64>, x: &DVector<f64>, label: u8) -> Result<f64> {
    let h = clamp_prob(forward(weights, x)?);
    let y = label as f64;
    Ok(-y * h.ln() - (1.0 - y) * (1.0 - h).ln())
}

/// Per-sample gradient: column j is `zeta_j * x` with
/// `zeta_j = -(1/K) (y - H) / (H(1-H)) * phi'(w_jᵀx)`.
pub fn grad(weights: &DMatrix<f64>, x: &DVector<f64>, label: u8) -> Result<DMatrix<f64>> {
    let h = clamp_prob(forward(weights, x)?);
    let y = label as f64;
    let k = weights.ncols();
    let common = -(y - h) / (h * (1.0 - h)) / k as f64;
    let mut g = DMatrix::zeros(weights.nrows(), k);
    for j in 0..k {
        let zeta = common * sigmoid_deriv(weights.column(j).dot(x));
        g.column_mut(j).axpy(zeta, x, 1.0);
    }
    Ok(g)
}

/// The scalar in front of `x xᵀ` in Hessian block (j, l).
fn xi_entry(weights: &DMatrix<f64>, x: &DVector<f64>, label: u8, j: usize, l: usize) -> f64 {
    let h = clamp_prob(forward(weights, x).expect("dims checked by caller"));
    let y = label as f64;
    let k = weights.ncols() as f64;
    let dj = sigmoid_deriv(weights.column(j).dot(x));
    let dl = sigmoid_deriv(weights.column(l).dot(x));
    let num = h * h + y - 2.0 * y * h;
    let den = h * h * (1.0 - h) * (1.0 - h);
    let mut xi = dj * dl * num / den / (k * k);
    if j == l {
        let second = sigmoid_second_deriv(weights.column(j).dot(x));
        xi -= second * (y - h) / (h * (1.0 - h)) / k;
    }
    xi
}

/// Per-sample Hessian as a dense dK x dK matrix of `xi_{j,l} x xᵀ` blocks.
/// Intended for small problems (the local-convexity checks).
pub fn hessian(weights: &DMatrix<f64>, x: &DVector<f64>, label: u8) -> Result<DMatrix<f64>> {
    let d = weights.nrows();
    let k = weights.ncols();
    if d != x.len() {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if d * k > MAX_HESSIAN_PARAMS {
        return Err(Error::InvalidInput(format!(
            "dense Hessian gated to dK <= {MAX_HESSIAN_PARAMS}, got {}",
            d * k
        )));
    }
    let outer = x * x.transpose();
    let mut hess = DMatrix::zeros(d * k, d * k);
    for j in 0..k {
        for l in j..k {
            let xi = xi_entry(weights, x, label, j, l);
            for a in 0..d {
                for b in 0..d {
                    hess[(j * d + a, l * d + b)] = xi * outer[(a, b)];
                    if j != l {
                        hess[(l * d + a, j * d + b)] = xi * outer[(a, b)];
                    }
                }
            }
        }
    }
    Ok(hess)
}

/// Matrix-form view of a dataset for repeated risk/gradient evaluation: the
/// features packed as a d x n matrix so each evaluation is two matrix
/// products plus element-wise sigmoids.
pub struct TrainWorkspace {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    acts: DMatrix<f64>,
}

impl TrainWorkspace {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        let d = data.samples[0].x.len();
        let n = data.len();
        let mut features = DMatrix::zeros(d, n);
        for (i, s) in data.samples.iter().enumerate() {
            if s.x.len() != d {
                return Err(Error::InvalidInput("ragged dataset".into()));
            }
            features.column_mut(i).copy_from(&s.x);
        }
        Ok(TrainWorkspace {
            features,
            labels: data.samples.iter().map(|s| s.label).collect(),
            acts: DMatrix::zeros(0, 0),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Empirical risk and gradient at `weights`. The per-sample H uses the
    /// same value-ordered neuron sum as `forward`, and the risk total uses
    /// the same pairwise reduction as `empirical_risk`, so the value agrees
    /// bitwise with the sample-by-sample path.
    pub fn risk_and_grad(&mut self, weights: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let d = self.features.nrows();
        let n = self.len();
        let k = weights.ncols();
        if weights.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: weights.nrows(),
            });
        }
        // acts[(i, j)] = w_j . x_i, reused across iterations.
        if self.acts.shape() != (n, k) {
            self.acts = DMatrix::zeros(n, k);
        }
        let acts = &mut self.acts;
        acts.gemm_tr(1.0, &self.features, weights, 0.0);

        let mut sorted = vec![0.0f64; k];
        let mut losses = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..k {
                let s = crate::teacher::sigmoid(acts[(i, j)]);
                acts[(i, j)] = s;
                sorted[j] = s;
            }
            let h = clamp_prob(crate::util::sorted_sum(&mut sorted) / k as f64);
            let y = self.labels[i] as f64;
            losses[i] = -y * h.ln() - (1.0 - y) * (1.0 - h).ln();
            let common = -(y - h) / (h * (1.0 - h)) / k as f64;
            for j in 0..k {
                let s = acts[(i, j)];
                acts[(i, j)] = common * (s * (1.0 - s));
            }
        }
        let risk = crate::util::pairwise_sum(&losses) / n as f64;
        let grad = &self.features * &*acts / n as f64;
        Ok((risk, grad))
    }
}

/// One-pass empirical risk and gradient; the training hot path. See
/// `TrainWorkspace` for the repeated-evaluation form.
pub fn risk_and_grad(weights: &DMatrix<f64>, data: &Dataset) -> Result<(f64, DMatrix<f64>)> {
    TrainWorkspace::new(data)?.risk_and_grad(weights)
}

/// Mean loss over a dataset via pairwise reduction.
pub fn empirical_risk(weights: &DMatrix<f64>, data: &Dataset) -> Result<RiskEval> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let n = data.len();
    let total = pairwise_sum_by(n, &|i| {
        let s = &data.samples[i];
        loss(weights, &s.x, s.label).expect("dims validated")
    });
    Ok(RiskEval {
        value: total / n as f64,
        n_used: n,
        mc_std_err: 0.0,
    })
}

/// Mean gradient over a dataset via pairwise reduction.
pub fn empirical_grad(weights: &DMatrix<f64>, data: &Dataset) -> Result<DMatrix<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let n = data.len();
    let sum = pairwise_matrix_sum(n, weights.nrows(), weights.ncols(), &|i| {
        let s = &data.samples[i];
        grad(weights, &s.x, s.label).expect("dims validated")
    });
    Ok(sum / n as f64)
}

/// Mean Hessian over a dataset; same dK gate as `hessian`.
pub fn empirical_hessian(weights: &DMatrix<f64>, data: &Dataset) -> Result<DMatrix<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let n = data.len();
    let p = weights.nrows() * weights.ncols();
    if p > MAX_HESSIAN_PARAMS {
        return Err(Error::InvalidInput(format!(
            "dense Hessian gated to dK <= {MAX_HESSIAN_PARAMS}, got {p}"
        )));
    }
    let sum = pairwise_matrix_sum(n, p, p, &|i| {
        let s = &data.samples[i];
        hessian(weights, &s.x, s.label).expect("dims validated")
    });
    Ok(sum / n as f64)
}

const MIN_MC_SAMPLES: usize = 100;

fn mc_risk<F>(weights: &DMatrix<f64>, teacher: &TeacherModel, n_mc: usize, seed: u64, draw: F) -> Result<RiskEval>
where
    F: Fn(&mut ChaCha8Rng) -> DVector<f64>,
{
    if n_mc < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "Monte-Carlo risk needs at least {MIN_MC_SAMPLES} samples, got {n_mc}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5259, 0));
    let mut losses = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let x = draw(&mut rng);
        let y = teacher.draw_label(&x, &mut rng)?;
        losses.push(loss(weights, &x, y)?);
    }
    let (mean, se) = crate::util::mean_std_err(&losses);
    Ok(RiskEval {
        value: mean,
        n_used: n_mc,
        mc_std_err: se,
    })
}

/// Average risk: Monte-Carlo expectation of the loss over fresh draws from
/// the full mixture, labels drawn from the teacher.
pub fn population_risk(
    weights: &DMatrix<f64>,
    psi: &MixtureParams,
    teacher: &TeacherModel,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEval> {
    mc_risk(weights, teacher, n_mc, seed, |rng| psi.sample_one(rng).x)
}

/// Group-l risk: expectation conditioned on component `l` (1-based index).
pub fn group_risk(
    weights: &DMatrix<f64>,
    psi: &MixtureParams,
    teacher: &TeacherModel,
    group: usize,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEval> {
    if group == 0 || group > psi.group_count() {
        return Err(Error::InvalidInput(format!(
            "group {group} out of range 1..={}",
            psi.group_count()
        )));
    }
    mc_risk(weights, teacher, n_mc, seed, |rng| {
        psi.sample_component(group - 1, rng)
    })
}

/// Result of permutation alignment: the minimal Frobenius distance and the
/// minimizing column permutation (`permutation[j]` is the reference column
/// placed at position j).
#[derive(Debug, Clone)]
pub struct AlignedError {
    pub distance: f64,
    pub permutation: Vec<usize>,
}

/// Minimum over all column permutations P of `‖W - W_ref P‖_F`, exhaustive
/// for K <= 8.
pub fn aligned_error(weights: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<AlignedError> {
    if weights.shape() != reference.shape() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: {:?} vs {:?}",
            weights.shape(),
            reference.shape()
        )));
    }
    let k = weights.ncols();
    if k > MAX_ALIGN_NEURONS {
        return Err(Error::InvalidInput(format!(
            "permutation alignment gated to K <= {MAX_ALIGN_NEURONS}, got {k}"
        )));
    }
    // Pairwise squared distances between columns, then exhaustive search.
    let mut cost = DMatrix::zeros(k, k);
    for j in 0..k {
        for r in 0..k {
            cost[(j, r)] = (weights.column(j) - reference.column(r)).norm_squared();
        }
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, perm.clone());
    // Each candidate total is summed in value order so the reported distance
    // is exactly invariant under column permutations of either argument.
    let mut scratch = vec![0.0; k];
    permute_search(&mut perm, 0, &cost, &mut scratch, &mut best);
    Ok(AlignedError {
        distance: best.0.max(0.0).sqrt(),
        permutation: best.1,
    })
}

fn permute_search(
    perm: &mut Vec<usize>,
    depth: usize,
    cost: &DMatrix<f64>,
    scratch: &mut [f64],
    best: &mut (f64, Vec<usize>),
) {
    let k = perm.len();
    if depth == k {
        for j in 0..k {
            scratch[j] = cost[(j, perm[j])];
        }
        let total = crate::util::sorted_sum(scratch);
        if total < best.0 {
            *best = (total, perm.clone());
        }
        return;
    }
    for i in depth..k {
        perm.swap(depth, i);
        permute_search(perm, depth + 1, cost, scratch, best);
        perm.swap(depth, i);
    }
}

/// Applies the alignment found by `aligned_error`, returning `W_ref`'s
/// columns reordered to match `weights`.
pub fn apply_permutation(reference: &DMatrix<f64>, permutation: &[usize]) -> DMatrix<f64> {
    let d = reference.nrows();
    let k = reference.ncols();
    DMatrix::from_fn(d, k, |i, j| reference[(i, permutation[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::LabeledSample;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_instance(
        rng: &mut ChaCha8Rng,
        d: usize,
        k: usize,
    ) -> (DMatrix<f64>, DVector<f64>, u8) {
        let w = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.7);
        let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = u8::from(rng.random::<f64>() < 0.5);
        (w, x, y)
    }

    #[test]
    fn loss_at_half_is_ln2() {
        let w = DMatrix::zeros(3, 1);
        let x = DVector::from_vec(vec![0.3, -0.4, 0.5]);
        let l = loss(&w, &x, 1).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_vanishes_when_confident() {
        let x = DVector::from_vec(vec![0.6, 0.8]);
        let w = DMatrix::from_fn(2, 1, |i, _| 50.0 * x[i]);
        let l = loss(&w, &x, 1).unwrap();
        assert!(l <= 1e-8, "loss {l}");
    }

    #[test]
    fn loss_permutation_invariant_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (w, x, y) = random_instance(&mut rng, 4, 3);
        let perm = [2usize, 0, 1];
        let wp = DMatrix::from_fn(4, 3, |i, j| w[(i, perm[j])]);
        assert_eq!(
            loss(&w, &x, y).unwrap().to_bits(),
            loss(&wp, &x, y).unwrap().to_bits()
        );
    }

    #[test]
    fn grad_known_value_single_neuron() {
        // K=1, w=0, y=1, x=e1: gradient is -0.5 e1.
        let w = DMatrix::zeros(3, 1);
        let mut x = DVector::zeros(3);
        x[0] = 1.0;
        let g = grad(&w, &x, 1).unwrap();
        assert!((g[(0, 0)] + 0.5).abs() < 1e-12);
        assert!(g[(1, 0)].abs() < 1e-15);
        // And it matches central finite differences of the loss.
        let h = 1e-6;
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[(0, 0)] += h;
        wm[(0, 0)] -= h;
        let fd = (loss(&wp, &x, 1).unwrap() - loss(&wm, &x, 1).unwrap()) / (2.0 * h);
        assert!((g[(0, 0)] - fd).abs() / fd.abs() < 1e-6);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let (w, x, y) = random_instance(&mut rng, 6, 3);
            let g = grad(&w, &x, y).unwrap();
            let step = 1e-6;
            let mut fd = DMatrix::zeros(6, 3);
            for j in 0..3 {
                for a in 0..6 {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[(a, j)] += step;
                    wm[(a, j)] -= step;
                    fd[(a, j)] =
                        (loss(&wp, &x, y).unwrap() - loss(&wm, &x, y).unwrap()) / (2.0 * step);
                }
            }
            let rel = (&g - &fd).norm() / g.norm().max(1e-10);
            assert!(rel <= 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn grad_zero_mean_at_teacher() {
        // With labels drawn from the teacher, the expected gradient at the
        // teacher weights vanishes; the MC mean should sit within noise.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let psi = MixtureParams::isotropic(4, &[(0.5, 0.4, 1.0), (0.5, -0.4, 1.0)]).unwrap();
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let n = 100_000;
        let data = Dataset::generate(&psi, &teacher, n, &mut rng).unwrap();
        let mean = empirical_grad(teacher.weights(), &data).unwrap();
        // Entry-wise standard error estimate.
        let mut var = 0.0;
        for s in &data.samples {
            var += grad(teacher.weights(), &s.x, s.label).unwrap().norm_squared();
        }
        let se = (var / n as f64 / n as f64).sqrt();
        assert!(
            mean.norm() <= 5.0 * se,
            "gradient mean norm {} vs 5*se {}",
            mean.norm(),
            5.0 * se
        );
    }

    #[test]
    fn hessian_symmetric_and_matches_grad_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..5 {
            let (w, x, y) = random_instance(&mut rng, 4, 2);
            let hess = hessian(&w, &x, y).unwrap();
            assert!((&hess - hess.transpose()).abs().max() < 1e-10);
            let step = 1e-6;
            let mut fd = DMatrix::zeros(8, 8);
            for j in 0..2 {
                for a in 0..4 {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[(a, j)] += step;
                    wm[(a, j)] -= step;
                    let gp = grad(&wp, &x, y).unwrap();
                    let gm = grad(&wm, &x, y).unwrap();
                    for l in 0..2 {
                        for b in 0..4 {
                            fd[(j * 4 + a, l * 4 + b)] =
                                (gp[(b, l)] - gm[(b, l)]) / (2.0 * step);
                        }
                    }
                }
            }
            let rel = (&hess - &fd).norm() / hess.norm().max(1e-10);
            assert!(rel <= 1e-4, "relative error {rel}");
        }
    }

    #[test]
    fn xi_entries_bounded_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..10_000 {
            let (w, x, y) = random_instance(&mut rng, 3, 2);
            for j in 0..2 {
                for l in 0..2 {
                    let xi = xi_entry(&w, &x, y, j, l);
                    assert!(xi.abs() <= 1.0 + 1e-12, "xi {xi}");
                }
            }
        }
    }

    #[test]
    fn empirical_risk_single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let (w, x, y) = random_instance(&mut rng, 3, 2);
        let data = Dataset {
            samples: vec![LabeledSample {
                x: x.clone(),
                label: y,
                group: 0,
            }],
        };
        let r = empirical_risk(&w, &data).unwrap();
        assert_eq!(r.value, loss(&w, &x, y).unwrap());
        assert_eq!(r.mc_std_err, 0.0);
        let g = empirical_grad(&w, &data).unwrap();
        assert!((g - grad(&w, &x, y).unwrap()).abs().max() < 1e-15);
    }

    #[test]
    fn empirical_risk_shuffle_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let psi = MixtureParams::standard(3);
        let teacher = TeacherModel::random(3, 2, &mut rng).unwrap();
        let data = Dataset::generate(&psi, &teacher, 5000, &mut rng).unwrap();
        let w = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let base = empirical_risk(&w, &data).unwrap().value;
        let mut shuffled = data.samples.clone();
        shuffled.reverse();
        shuffled.swap(0, 2500);
        let shuffled = Dataset { samples: shuffled };
        let v = empirical_risk(&w, &shuffled).unwrap().value;
        assert!((base - v).abs() < 1e-12);
    }

    #[test]
    fn empirical_risk_matches_compensated_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let psi = MixtureParams::standard(4);
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let data = Dataset::generate(&psi, &teacher, 100_000, &mut rng).unwrap();
        let w = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fast = empirical_risk(&w, &data).unwrap().value;
        // Oracle: two-pass Kahan compensated summation.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for s in &data.samples {
            let v = loss(&w, &s.x, s.label).unwrap();
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        let oracle = (sum + comp) / data.len() as f64;
        assert!((fast - oracle).abs() < 1e-10);
    }

    #[test]
    fn population_risk_minimized_near_teacher() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let psi = MixtureParams::isotropic(4, &[(0.5, 0.5, 1.0), (0.5, -0.5, 1.0)]).unwrap();
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let at_teacher = population_risk(teacher.weights(), &psi, &teacher, 40_000, 7).unwrap();
        let far = teacher.weights() + DMatrix::from_fn(4, 2, |_, _| 3.0);
        let at_far = population_risk(&far, &psi, &teacher, 40_000, 8).unwrap();
        let gap = at_far.value - at_teacher.value;
        let combined = (at_far.mc_std_err.powi(2) + at_teacher.mc_std_err.powi(2)).sqrt();
        assert!(gap > 3.0 * combined, "gap {gap} combined se {combined}");
    }

    #[test]
    fn single_group_population_equals_group_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let psi = MixtureParams::new(vec![(
            1.0,
            DVector::from_vec(vec![0.5, -0.2, 0.0]),
            DMatrix::identity(3, 3) * 1.3,
        )])
        .unwrap();
        let teacher = TeacherModel::random(3, 2, &mut rng).unwrap();
        let w = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let pop = population_risk(&w, &psi, &teacher, 500, 99).unwrap();
        let grp = group_risk(&w, &psi, &teacher, 1, 500, 99).unwrap();
        assert_eq!(pop.value.to_bits(), grp.value.to_bits());
    }

    #[test]
    fn group_risks_average_to_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let psi = MixtureParams::isotropic(3, &[(0.3, 1.0, 1.0), (0.7, -0.5, 1.2)]).unwrap();
        let teacher = TeacherModel::random(3, 2, &mut rng).unwrap();
        let w = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = 60_000;
        let pop = population_risk(&w, &psi, &teacher, n, 1).unwrap();
        let g1 = group_risk(&w, &psi, &teacher, 1, n, 2).unwrap();
        let g2 = group_risk(&w, &psi, &teacher, 2, n, 3).unwrap();
        let mix = 0.3 * g1.value + 0.7 * g2.value;
        let se = (pop.mc_std_err.powi(2)
            + (0.3 * g1.mc_std_err).powi(2)
            + (0.7 * g2.mc_std_err).powi(2))
        .sqrt();
        assert!((pop.value - mix).abs() <= 3.0 * se);
    }

    #[test]
    fn mc_risk_rejects_tiny_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let psi = MixtureParams::standard(3);
        let teacher = TeacherModel::random(3, 1, &mut rng).unwrap();
        assert!(population_risk(teacher.weights(), &psi, &teacher, 50, 1).is_err());
    }

    #[test]
    fn aligned_error_recovers_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let w = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let perm = [2usize, 0, 1];
        let wp = DMatrix::from_fn(5, 3, |i, j| w[(i, perm[j])]);
        let res = aligned_error(&wp, &w).unwrap();
        assert!(res.distance < 1e-14);
        assert_eq!(res.permutation, perm.to_vec());
        assert!((apply_permutation(&w, &res.permutation) - &wp).abs().max() < 1e-15);
    }

    #[test]
    fn aligned_error_k1_is_frobenius() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 0.0]);
        let res = aligned_error(&a, &b).unwrap();
        assert!((res.distance - a.norm()).abs() < 1e-14);
    }

    #[test]
    fn aligned_error_matches_brute_force_oracle() {
        use itertools::Itertools;
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10 {
            let a = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let res = aligned_error(&a, &b).unwrap();
            let oracle = (0..3)
                .permutations(3)
                .map(|p| {
                    let bp = DMatrix::from_fn(4, 3, |i, j| b[(i, p[j])]);
                    (&a - bp).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((res.distance - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_error_value_symmetric_under_column_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let a = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let base = aligned_error(&a, &b).unwrap().distance;
        let perm = [1usize, 2, 0];
        let ap = DMatrix::from_fn(4, 3, |i, j| a[(i, perm[j])]);
        let bp = DMatrix::from_fn(4, 3, |i, j| b[(i, perm[j])]);
        assert_eq!(aligned_error(&ap, &b).unwrap().distance, base);
        assert_eq!(aligned_error(&a, &bp).unwrap().distance, base);
    }

    #[test]
    fn aligned_error_rejects_large_k() {
        let a = DMatrix::zeros(10, 9);
        assert!(aligned_error(&a, &a).is_err());
    }
}
