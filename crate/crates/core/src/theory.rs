//! Curvature and rate predictions: the per-group rho function via
//! Gauss-Hermite quadrature, the normalized moment summaries D_m, the
//! weighted curvature aggregate, and the assembled report (rate, step size,
//! convex radius, sample-complexity indicator). All order-constants are 1.

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;
use crate::teacher::{sigmoid_deriv, TeacherModel};
use crate::train::auto_step_size;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Default node count; doubled until the self-check passes.
pub const GH_BASE_NODES: usize = 61;
/// Node-doubling cap. Reaching it without stabilizing is an error.
pub const GH_MAX_NODES: usize = 3904;
/// Two successive node counts must agree to this tolerance.
pub const GH_SELF_CHECK_TOL: f64 = 1e-9;

fn gh_cache() -> &'static Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Scaled Hermite functions `h~_k(x) e^{-x^2/2}` (orthonormal polynomials
/// times the square-root weight); bounded everywhere, so the recurrence
/// cannot overflow. Returns (value_n, value_{n-1}).
fn hermite_scaled(n: usize, x: f64) -> (f64, f64) {
    let mut hm = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return (hm, 0.0);
    }
    let mut h = std::f64::consts::SQRT_2 * x * hm;
    for k in 1..n {
        let kf = k as f64;
        let next = x * (2.0 / (kf + 1.0)).sqrt() * h - (kf / (kf + 1.0)).sqrt() * hm;
        hm = h;
        h = next;
    }
    (h, hm)
}

/// Number of Jacobi-matrix eigenvalues strictly below x (Sturm count for the
/// symmetric tridiagonal with zero diagonal and off-diagonals sqrt(k/2)).
fn sturm_count(n: usize, x: f64) -> usize {
    let mut count = 0usize;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let b2 = k as f64 / 2.0;
        let denom = if d.abs() > 1e-300 {
            d
        } else if d >= 0.0 {
            1e-300
        } else {
            -1e-300
        };
        d = -x - b2 / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gauss-Hermite nodes and weights for `∫ f(t) e^{-t^2} dt ≈ Σ w_i f(t_i)`.
/// Nodes by Sturm bisection plus Newton polish; weights from the classical
/// `1/(n h~_{n-1}(x_i)^2)` identity, evaluated in log space.
pub fn gauss_hermite_table(n: usize) -> (Vec<f64>, Vec<f64>) {
    if let Some(hit) = gh_cache().lock().unwrap().get(&n) {
        return ((**hit).0.clone(), (**hit).1.clone());
    }
    assert!(n >= 1);
    let bound = (2.0 * n as f64 + 2.0).sqrt();
    let half = n / 2;
    let mut nodes = vec![0.0f64; n];
    // Roots are symmetric about zero; bisect only the upper half.
    for k in (n - half)..n {
        let (mut lo, mut hi) = (0.0f64, bound);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(n, mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..4 {
            let (hn, hnm1) = hermite_scaled(n, x);
            let deriv = (2.0 * n as f64).sqrt() * hnm1 - x * hn;
            if deriv.abs() < 1e-300 {
                break;
            }
            x -= hn / deriv;
        }
        nodes[k] = x;
        nodes[n - 1 - k] = -x;
    }
    let mut weights = vec![0.0f64; n];
    let log_n = (n as f64).ln();
    for (i, &x) in nodes.iter().enumerate() {
        let (_, hnm1) = hermite_scaled(n, x);
        if hnm1 == 0.0 {
            weights[i] = 0.0;
        } else {
            // w = 1/(n h~_{n-1}^2) with h~ = hhat e^{x^2/2}.
            let log_w = -log_n - 2.0 * (hnm1.abs().ln() + 0.5 * x * x);
            weights[i] = log_w.exp();
        }
    }
    gh_cache()
        .lock()
        .unwrap()
        .insert(n, Arc::new((nodes.clone(), weights.clone())));
    (nodes, weights)
}

fn gh_expectation(n: usize, u: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite_table(n);
    let mut acc = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        acc += w * g(u + std::f64::consts::SQRT_2 * t);
    }
    acc / std::f64::consts::PI.sqrt()
}

/// The two per-coordinate quadrature moments of the rho definition.
#[derive(Debug, Clone, Copy)]
pub struct AlphaBeta {
    /// `E[phi'(sigma z) z^q]` for `z ~ N(u, 1)`.
    pub alpha: f64,
    /// `E[phi'(sigma z)^2 z^q]`.
    pub beta: f64,
}

/// Gauss-Hermite evaluation of alpha_q and beta_q, centered at `u` and
/// doubling the node count until successive values agree to 1e-9.
pub fn alpha_beta(q: u8, u: f64, sigma: f64) -> Result<AlphaBeta> {
    if q > 2 {
        return Err(Error::InvalidInput(format!("q must be 0, 1 or 2, got {q}")));
    }
    if sigma == 0.0 {
        return Err(Error::InvalidInput("sigma must be nonzero".into()));
    }
    let power = |z: f64| match q {
        0 => 1.0,
        1 => z,
        _ => z * z,
    };
    let fa = move |z: f64| sigmoid_deriv(sigma * z) * power(z);
    let fb = move |z: f64| {
        let p = sigmoid_deriv(sigma * z);
        p * p * power(z)
    };
    let mut n = GH_BASE_NODES;
    let mut alpha = gh_expectation(n, u, &fa);
    let mut beta = gh_expectation(n, u, &fb);
    loop {
        let n2 = n * 2;
        if n2 > GH_MAX_NODES {
            return Err(Error::Quadrature(format!(
                "alpha/beta(q={q}, u={u}, sigma={sigma}) not stable at {n} nodes"
            )));
        }
        let alpha2 = gh_expectation(n2, u, &fa);
        let beta2 = gh_expectation(n2, u, &fb);
        let drift = (alpha2 - alpha).abs().max((beta2 - beta).abs());
        alpha = alpha2;
        beta = beta2;
        n = n2;
        if drift <= GH_SELF_CHECK_TOL {
            return Ok(AlphaBeta { alpha, beta });
        }
    }
}

/// The curvature surrogate: minimum over coordinate pairs (i, j != i) of
/// `(u_j^2+1)(beta_0(i) - alpha_0(i)^2)` and `beta_2(i) - alpha_2(i)^2/(u_i^2+1)`.
/// Strictly positive for any u and nonzero sigma; needs at least two
/// coordinates because the minimum ranges over pairs.
pub fn rho(u: &DVector<f64>, sigma: f64) -> Result<f64> {
    if u.len() < 2 {
        return Err(Error::InvalidInput(
            "rho is defined through a minimum over coordinate pairs j != i; need dimension >= 2"
                .into(),
        ));
    }
    if sigma == 0.0 {
        return Err(Error::InvalidInput("sigma must be nonzero".into()));
    }
    let d = u.len();
    let mut best = f64::INFINITY;
    for i in 0..d {
        let ab0 = alpha_beta(0, u[i], sigma)?;
        let ab2 = alpha_beta(2, u[i], sigma)?;
        let variance_term = ab0.beta - ab0.alpha * ab0.alpha;
        let second_term = ab2.beta - ab2.alpha * ab2.alpha / (u[i] * u[i] + 1.0);
        for j in 0..d {
            if j == i {
                continue;
            }
            best = best.min((u[j] * u[j] + 1.0) * variance_term);
        }
        best = best.min(second_term);
    }
    Ok(best)
}

/// Normalized moment summary `D_m = Σ_l λ_l (‖μ_l‖ / ‖Σ_l^{-1}‖^{-1/2} + 1)^m`,
/// always at least 1.
pub fn d_function(psi: &MixtureParams, m: u32) -> f64 {
    psi.components()
        .iter()
        .map(|c| c.weight * (c.mean.norm() / c.sigma_bottom() + 1.0).powi(m as i32))
        .sum()
}

/// Arguments of the per-group rho evaluation.
fn rho_group(psi: &MixtureParams, teacher: &TeacherModel, l: usize) -> Result<f64> {
    let stats = teacher.stats();
    let delta_k = *stats.deltas.last().unwrap();
    let c = &psi.components()[l];
    let scale = delta_k * c.sigma_bottom();
    let u = teacher.weights().transpose() * &c.mean / scale;
    rho(&u, scale)
}

/// Weighted curvature aggregate
/// `Γ = Σ_l λ_l/(τ^K κ^2 η) · ‖Σ_l^{-1}‖^{-1}/σ_max^2 · ρ_l`.
pub fn gamma(psi: &MixtureParams, teacher: &TeacherModel) -> Result<f64> {
    let k = teacher.neuron_count();
    if k < 2 {
        return Err(Error::InvalidInput(
            "the aggregate needs K >= 2 (rho's pairwise form)".into(),
        ));
    }
    let stats = teacher.stats();
    let shared = psi.tau().powi(k as i32) * stats.kappa * stats.kappa * stats.eta;
    let smax2 = psi.sigma_max() * psi.sigma_max();
    let mut total = 0.0;
    for l in 0..psi.group_count() {
        let c = &psi.components()[l];
        let s2 = c.sigma_bottom() * c.sigma_bottom();
        total += c.weight / shared * (s2 / smax2) * rho_group(psi, teacher, l)?;
    }
    Ok(total)
}

/// The Theorem-style curvature sum without the sigma_max normalization:
/// `Σ_l λ_l ‖Σ_l^{-1}‖^{-1}/(η τ^K κ^2) · ρ_l`. Both this and `gamma` are
/// reported, labeled, since the two normalizations appear in different roles.
pub fn curvature_sum(psi: &MixtureParams, teacher: &TeacherModel) -> Result<f64> {
    let k = teacher.neuron_count();
    if k < 2 {
        return Err(Error::InvalidInput(
            "the aggregate needs K >= 2 (rho's pairwise form)".into(),
        ));
    }
    let stats = teacher.stats();
    let shared = psi.tau().powi(k as i32) * stats.kappa * stats.kappa * stats.eta;
    let mut total = 0.0;
    for l in 0..psi.group_count() {
        let c = &psi.components()[l];
        let s2 = c.sigma_bottom() * c.sigma_bottom();
        total += c.weight * s2 / shared * rho_group(psi, teacher, l)?;
    }
    Ok(total)
}

/// Assembled predictions for one (mixture, teacher) pair. Every hidden
/// constant is set to 1, so these are order-level quantities: tests and
/// reports compare trends, never absolute values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub rho_per_group: Vec<f64>,
    /// (m, D_m) pairs for a standard ladder of orders.
    pub d_functions: Vec<(u32, f64)>,
    /// Curvature aggregate with the sigma_max^2 normalization.
    pub gamma: f64,
    /// Curvature sum without the sigma_max^2 normalization.
    pub curvature_sum: f64,
    /// Ratio of curvature lower bound to smoothness upper bound, in (0,1).
    pub q: f64,
    /// Predicted contraction factor `v = 1 - q/K^2`.
    pub predicted_rate: f64,
    pub step_size: f64,
    /// Radius of the locally convex region (constant 1).
    pub radius: f64,
    /// Sample-complexity indicator `B`, order-wise with constants 1.
    pub sample_complexity_indicator: f64,
    pub epsilon0: f64,
}

/// Builds the full report. `epsilon0` must lie in (0, 1/4).
pub fn theory_report(
    psi: &MixtureParams,
    teacher: &TeacherModel,
    epsilon0: f64,
) -> Result<TheoryReport> {
    if !(epsilon0 > 0.0 && epsilon0 < 0.25) {
        return Err(Error::InvalidInput(format!(
            "epsilon0 {epsilon0} outside (0, 1/4)"
        )));
    }
    let k = teacher.neuron_count();
    let stats = teacher.stats();
    let rho_per_group: Vec<f64> = (0..psi.group_count())
        .map(|l| rho_group(psi, teacher, l))
        .collect::<Result<_>>()?;
    let d_functions: Vec<(u32, f64)> = [1u32, 2, 3, 4, 6, 8, 12]
        .into_iter()
        .map(|m| (m, d_function(psi, m)))
        .collect();
    let gamma_v = gamma(psi, teacher)?;
    let curvature = curvature_sum(psi, teacher)?;
    let smoothness = psi.second_moment_scale();
    let q = (curvature / smoothness).clamp(1e-300, 1.0 - 1e-12);
    let predicted_rate = 1.0 - q / (k * k) as f64;

    let s4: f64 = psi
        .components()
        .iter()
        .map(|c| c.weight * (c.mean.norm() + c.sigma_top()).powi(4))
        .sum();
    let s8: f64 = psi
        .components()
        .iter()
        .map(|c| c.weight * (c.mean.norm() + c.sigma_top()).powi(8))
        .sum();
    let radius = epsilon0 * curvature / ((k as f64).powf(3.5) * (s4 * s8).powf(0.25));

    let smax2 = psi.sigma_max() * psi.sigma_max();
    let b_inner: f64 = psi
        .components()
        .iter()
        .zip(&rho_per_group)
        .map(|(c, r)| {
            c.weight * c.sigma_bottom() * c.sigma_bottom() / (stats.eta * smax2) * r
        })
        .sum();
    let d12 = d_function(psi, 12);
    let sample_complexity_indicator = (psi.sigma_max() * stats.deltas[0]).powi(2)
        * psi.tau().powi(12)
        * b_inner.powi(-2)
        * d12;

    Ok(TheoryReport {
        rho_per_group,
        d_functions,
        gamma: gamma_v,
        curvature_sum: curvature,
        q,
        predicted_rate,
        step_size: auto_step_size(psi),
        radius,
        sample_complexity_indicator,
        epsilon0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn gauss_hermite_polynomial_exactness() {
        // ∫ t^2 e^{-t^2} = sqrt(pi)/2; ∫ e^{-t^2} = sqrt(pi).
        let (nodes, weights) = gauss_hermite_table(10);
        let total: f64 = weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let second: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * t * t).sum();
        assert!((second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_beta_odd_moment_vanishes_at_zero_mean() {
        for sigma in [0.3, 1.0, 4.0] {
            let ab = alpha_beta(1, 0.0, sigma).unwrap();
            assert!(ab.alpha.abs() <= 1e-12, "alpha1 {}", ab.alpha);
            assert!(ab.beta.abs() <= 1e-12, "beta1 {}", ab.beta);
        }
    }

    #[test]
    fn alpha_zero_small_sigma_limit() {
        let ab = alpha_beta(0, 0.0, 1e-4).unwrap();
        assert!((ab.alpha - 0.25).abs() < 1e-6, "alpha0 {}", ab.alpha);
    }

    /// Adaptive Simpson oracle for E_{z~N(u,1)}[g(z)], paneled so narrow
    /// features (large sigma in the integrand) cannot slip between the
    /// initial probe points.
    fn simpson_expectation(u: f64, g: &dyn Fn(f64) -> f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let s = |a: f64, b: f64| {
                let c = 0.5 * (a + b);
                (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
            };
            let whole = s(a, b);
            let left = s(a, c);
            let right = s(c, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, c, tol / 2.0, depth - 1) + rec(f, c, b, tol / 2.0, depth - 1)
            }
        }
        let f = move |z: f64| {
            g(z) * (-(z - u) * (z - u) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let mut total = 0.0;
        let panels = 80;
        for p in 0..panels {
            let a = u - 40.0 + 80.0 * p as f64 / panels as f64;
            let b = a + 80.0 / panels as f64;
            total += rec(&f, a, b, 1e-14, 30);
        }
        total
    }

    #[test]
    fn alpha_beta_matches_adaptive_oracle() {
        let sigma = 1.0;
        let ab = alpha_beta(0, 0.0, sigma).unwrap();
        let alpha_oracle = simpson_expectation(0.0, &|z| sigmoid_deriv(sigma * z));
        let beta_oracle = simpson_expectation(0.0, &|z| {
            let p = sigmoid_deriv(sigma * z);
            p * p
        });
        assert!((ab.alpha - alpha_oracle).abs() < 1e-9);
        assert!((ab.beta - beta_oracle).abs() < 1e-9);
    }

    #[test]
    fn alpha_beta_large_sigma_matches_oracle() {
        // The hard quadrature regime: a narrow feature under a wide Gaussian.
        for (u, sigma) in [(0.0, 5.0), (2.0, 10.0), (-3.0, 10.0)] {
            let ab = alpha_beta(2, u, sigma).unwrap();
            let alpha_oracle = simpson_expectation(u, &|z| sigmoid_deriv(sigma * z) * z * z);
            assert!(
                (ab.alpha - alpha_oracle).abs() < 1e-8,
                "u={u} sigma={sigma}: {} vs {alpha_oracle}",
                ab.alpha
            );
        }
    }

    #[test]
    fn rho_small_sigma_proof_constants() {
        // Leading orders at u = 0, from the Taylor expansion
        // phi'(t) = 1/4 - t^2/16 + t^4/96 + O(t^6):
        //   beta0 - alpha0^2 = sigma^4/128 + O(sigma^6)
        //   beta2 - alpha2^2 = 3 sigma^4/128 + O(sigma^6)
        // (the sigma^2 terms of the second branch cancel exactly; its minimum
        // with the first branch is therefore the sigma^4/128 term).
        let sigma = 0.05f64;
        let ab0 = alpha_beta(0, 0.0, sigma).unwrap();
        let v1 = ab0.beta - ab0.alpha * ab0.alpha;
        let target1 = sigma.powi(4) / 128.0;
        assert!(
            (v1 - target1).abs() <= 0.2 * target1,
            "variance term {v1} vs {target1}"
        );
        let ab2 = alpha_beta(2, 0.0, sigma).unwrap();
        let v2 = ab2.beta - ab2.alpha * ab2.alpha;
        let target2 = 3.0 * sigma.powi(4) / 128.0;
        assert!(
            (v2 - target2).abs() <= 0.2 * target2,
            "second term {v2} vs {target2}"
        );
    }

    #[test]
    fn rho_positive_on_grid() {
        let sigmas = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
        for ui in -3..=3 {
            for uj in -3..=3 {
                let u = DVector::from_vec(vec![ui as f64, uj as f64]);
                for &s in &sigmas {
                    let r = rho(&u, s).unwrap();
                    assert!(r > 0.0, "rho({ui},{uj},{s}) = {r}");
                }
            }
        }
    }

    #[test]
    fn rho_rejects_one_dimension() {
        let u = DVector::from_vec(vec![1.0]);
        let err = rho(&u, 1.0).unwrap_err();
        assert!(err.to_string().contains("pairs"));
    }

    #[test]
    fn rho_zero_mean_limit_continuous() {
        for sigma in [0.5, 1.0, 2.0] {
            let at_zero = rho(&DVector::zeros(2), sigma).unwrap();
            let near_zero = rho(&DVector::from_element(2, 1e-6), sigma).unwrap();
            assert!(
                (at_zero - near_zero).abs() <= 1e-6,
                "sigma {sigma}: {at_zero} vs {near_zero}"
            );
        }
    }

    #[test]
    fn rho_small_sigma_asymptotic_ratio() {
        // rho(0, sigma) / (min_j (u_j^2+1) sigma^4/128) -> 1 monotonically.
        let u = DVector::zeros(2);
        let mut prev_gap = f64::INFINITY;
        for sigma in [0.2, 0.1, 0.05, 0.025] {
            let ratio = rho(&u, sigma).unwrap() / (sigma.powi(4) / 128.0);
            let gap = (ratio - 1.0).abs();
            assert!(gap <= prev_gap + 1e-9, "gap grew at sigma {sigma}");
            prev_gap = gap;
            if sigma == 0.025 {
                assert!(gap <= 0.10, "final ratio {ratio}");
            }
        }
    }

    fn random_psi(rng: &mut ChaCha8Rng, d: usize, groups: usize) -> MixtureParams {
        let raw: Vec<f64> = (0..groups).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let specs: Vec<(f64, f64, f64)> = raw
            .iter()
            .map(|w| {
                (
                    w / total,
                    rng.random_range(-1.5..1.5),
                    rng.random_range(0.4..2.0),
                )
            })
            .collect();
        // Re-normalize exactly to absorb rounding.
        let mut specs = specs;
        let s: f64 = specs.iter().map(|v| v.0).sum();
        for v in &mut specs {
            v.0 /= s;
        }
        MixtureParams::isotropic(d, &specs).unwrap()
    }

    #[test]
    fn d_function_unit_means() {
        let psi = MixtureParams::isotropic(3, &[(0.4, 0.0, 0.7), (0.6, 0.0, 1.8)]).unwrap();
        for m in [1, 2, 5, 12] {
            assert!((d_function(&psi, m) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn d_function_ratio_one_gives_four() {
        // Both groups have ‖mu‖ equal to the covariance floor: (1+1)^2 = 4.
        let d = 4;
        let coeff = 1.0 / (d as f64).sqrt();
        let psi =
            MixtureParams::isotropic(d, &[(0.5, coeff, 1.0), (0.5, -coeff, 1.0)]).unwrap();
        assert!((d_function(&psi, 2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn d_function_inequalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for _ in 0..20 {
            let psi = random_psi(&mut rng, 3, 3);
            for m in [1u32, 2, 3] {
                let dm = d_function(&psi, m);
                let d2m = d_function(&psi, 2 * m);
                let d3m = d_function(&psi, 3 * m);
                assert!(dm * d2m <= d3m * (1.0 + 1e-12), "m={m}");
                assert!(dm * dm <= d2m * (1.0 + 1e-12), "m={m}");
            }
        }
    }

    #[test]
    fn gamma_matches_hand_composition() {
        let psi = MixtureParams::standard(2);
        let teacher = TeacherModel::new(nalgebra::DMatrix::identity(2, 2)).unwrap();
        let got = gamma(&psi, &teacher).unwrap();
        // Hand-composed: tau = kappa = eta = 1, sigma terms 1, delta_K = 1.
        let expected = rho(&DVector::zeros(2), 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn gamma_prefers_zero_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let centered = MixtureParams::isotropic(4, &[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        let shifted = MixtureParams::isotropic(4, &[(0.5, 2.5, 1.0), (0.5, -2.5, 1.0)]).unwrap();
        let g0 = gamma(&centered, &teacher).unwrap();
        let g5 = gamma(&shifted, &teacher).unwrap();
        assert!(g0 >= g5, "centered {g0} shifted {g5}");
    }

    #[test]
    fn gamma_positive_for_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..20 {
            let psi = random_psi(&mut rng, 3, 2);
            let teacher = TeacherModel::random(3, 2, &mut rng).unwrap();
            assert!(gamma(&psi, &teacher).unwrap() > 0.0);
        }
    }

    #[test]
    fn report_rate_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..20 {
            let psi = random_psi(&mut rng, 4, 2);
            let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
            let rep = theory_report(&psi, &teacher, 0.1).unwrap();
            assert!(rep.q > 0.0 && rep.q < 1.0);
            assert!(rep.predicted_rate > 0.0 && rep.predicted_rate < 1.0);
            assert!(rep.radius > 0.0);
            assert!(rep.sample_complexity_indicator > 0.0);
        }
    }

    #[test]
    fn report_rejects_bad_epsilon() {
        let psi = MixtureParams::standard(2);
        let teacher = TeacherModel::new(nalgebra::DMatrix::identity(2, 2)).unwrap();
        assert!(theory_report(&psi, &teacher, 0.3).is_err());
        assert!(theory_report(&psi, &teacher, 0.0).is_err());
    }

    #[test]
    fn report_rate_grows_with_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let mut prev = 0.0;
        for sigma in [1.0, 1.5, 2.0, 3.0] {
            let psi =
                MixtureParams::isotropic(4, &[(0.5, 0.5, sigma), (0.5, -0.5, 1.0)]).unwrap();
            let rep = theory_report(&psi, &teacher, 0.1).unwrap();
            assert!(
                rep.predicted_rate >= prev,
                "rate fell at sigma {sigma}: {} < {prev}",
                rep.predicted_rate
            );
            prev = rep.predicted_rate;
        }
    }

    #[test]
    fn report_rate_grows_with_mean_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let mut prev = 0.0;
        for mu in [0.0, 1.0, 2.0, 3.5, 5.0] {
            let psi = MixtureParams::isotropic(4, &[(0.5, mu, 1.0), (0.5, -mu, 1.0)]).unwrap();
            let rep = theory_report(&psi, &teacher, 0.1).unwrap();
            assert!(
                rep.predicted_rate >= prev - 1e-12,
                "rate fell at mu {mu}: {} < {prev}",
                rep.predicted_rate
            );
            prev = rep.predicted_rate;
        }
    }

    #[test]
    fn hermite_scaled_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        for _ in 0..100 {
            let x: f64 = rng.sample::<f64, _>(StandardNormal) * 30.0;
            let (h, hm) = hermite_scaled(200, x);
            assert!(h.is_finite() && hm.is_finite());
            assert!(h.abs() < 1.0 && hm.abs() < 1.0);
        }
    }
}
