//! Full-batch gradient descent with bounded per-sample gradient noise, the
//! mixture-derived step-size rule, convergence-rate fitting, and the
//! multi-start recovery success criterion.

use crate::error::{Error, Result};
use crate::mixture::MixtureParams;
use crate::risk::{aligned_error, apply_permutation};
use crate::teacher::{Dataset, TeacherModel};
use crate::util::{derive_seed, fmt_f64, linear_fit};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Recovery is declared successful when the across-start spread V_W stays
/// at or below this threshold.
pub const SUCCESS_VW_THRESHOLD: f64 = 1e-3;
/// Training aborts once the empirical risk exceeds this multiple of its
/// initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
/// Fraction of iterations discarded at the head of a trace before rate
/// fitting; the transient before the local linear regime.
pub const BURN_IN_FRACTION: f64 = 0.1;
/// Fraction of iterations discarded at the tail, where the
/// distance-to-final proxy bends away from geometric decay.
pub const TAIL_FRACTION: f64 = 0.1;

/// Gradient-descent configuration. `step_size: None` means the
/// mixture-derived rule of `auto_step_size`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step_size: Option<f64>,
    pub iterations: usize,
    /// Entry-wise bound on the per-sample gradient noise (uniform on
    /// [-noise_level, noise_level]); 0 disables the noise path entirely.
    pub noise_level: f64,
    pub seed: u64,
    /// Optional early stop: halt once the Frobenius norm of one update falls
    /// below this, so converged runs skip dead iterations. Traces then hold
    /// stop_iteration + 1 entries instead of iterations + 1.
    #[serde(default)]
    pub stop_movement: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: None,
            iterations: 300,
            noise_level: 0.0,
            seed: 0,
            stop_movement: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.step_size {
            if !(eta > 0.0) {
                return Err(Error::InvalidInput(format!("step size {eta} must be > 0")));
            }
        }
        if self.noise_level < 0.0 {
            return Err(Error::InvalidInput("noise level must be >= 0".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("need at least one iteration".into()));
        }
        Ok(())
    }
}

/// Step size `1 / Σ_l λ_l (‖μ_l‖ + ‖Σ_l^{1/2}‖)^2`. The constant in front is
/// 1 by convention; override through `TrainConfig::step_size`.
pub fn auto_step_size(psi: &MixtureParams) -> f64 {
    1.0 / psi.second_moment_scale()
}

/// Per-iteration diagnostics of one gradient-descent run.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    /// Aligned distance to the reference weights, per iteration (length T+1).
    pub aligned_error: Vec<f64>,
    /// Distance to the final iterate, per iteration (length T+1). This is the
    /// observable proxy for distance to the empirical critical point, which
    /// is unknown during a run.
    pub dist_to_final: Vec<f64>,
    /// Empirical risk per iteration (length T+1).
    pub empirical_risk: Vec<f64>,
    pub final_weights: DMatrix<f64>,
}

impl TrainTrace {
    pub fn iterations(&self) -> usize {
        self.empirical_risk.len() - 1
    }

    /// CSV export: `iter,aligned_error,dist_to_final,empirical_risk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,aligned_error,dist_to_final,empirical_risk\n");
        for t in 0..self.empirical_risk.len() {
            out.push_str(&format!(
                "{t},{},{},{}\n",
                fmt_f64(self.aligned_error[t]),
                fmt_f64(self.dist_to_final[t]),
                fmt_f64(self.empirical_risk[t])
            ));
        }
        out
    }
}

/// Runs `config.iterations` full-batch gradient steps from `w0`.
///
/// With a positive noise level, every sample's gradient receives an
/// independent matrix of entries uniform on [-xi, xi] each step; only the
/// average enters the update. Deterministic for a fixed seed.
pub fn gd_train(
    w0: &DMatrix<f64>,
    data: &Dataset,
    config: &TrainConfig,
    reference: &DMatrix<f64>,
    psi: &MixtureParams,
) -> Result<TrainTrace> {
    config.validate()?;
    if w0.shape() != reference.shape() {
        return Err(Error::InvalidInput(
            "initial and reference weights must share a shape".into(),
        ));
    }
    let eta = config.step_size.unwrap_or_else(|| auto_step_size(psi));
    let xi = config.noise_level;
    let n = data.len() as f64;
    let t_max = config.iterations;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x6d5e, 0));

    let mut w = w0.clone();
    let mut weights_history = Vec::with_capacity(t_max + 1);
    let mut aligned = Vec::with_capacity(t_max + 1);
    let mut risks = Vec::with_capacity(t_max + 1);
    let mut workspace = crate::risk::TrainWorkspace::new(data)?;

    let mut initial_risk = f64::NAN;
    for t in 0..=t_max {
        // One fused pass gives both the diagnostic risk and the step.
        let (risk, gradient) = workspace.risk_and_grad(&w)?;
        if t == 0 {
            initial_risk = risk;
        }
        if !risk.is_finite() || risk > DIVERGENCE_FACTOR * initial_risk.max(1e-300) {
            return Err(Error::Diverged {
                iteration: t,
                detail: format!("empirical risk {risk:.3e} from initial {initial_risk:.3e}"),
            });
        }
        aligned.push(aligned_error(&w, reference)?.distance);
        risks.push(risk);
        weights_history.push(w.clone());
        if t == t_max {
            break;
        }

        let mut step = gradient;
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                iteration: t,
                detail: "non-finite gradient".into(),
            });
        }
        if xi > 0.0 {
            // Average of n i.i.d. uniform [-xi, xi] matrices, drawn entry by
            // entry so every nu_i exists even though only the mean is used.
            let samples = data.len();
            for a in 0..step.nrows() {
                for b in 0..step.ncols() {
                    let mut acc = 0.0;
                    for _ in 0..samples {
                        acc += rng.random_range(-xi..=xi);
                    }
                    step[(a, b)] += acc / n;
                }
            }
        }
        let update = step * eta;
        let movement = update.norm();
        w -= update;
        if let Some(tol) = config.stop_movement {
            if movement <= tol {
                // Record the stopped iterate and end the trace here.
                aligned.push(aligned_error(&w, reference)?.distance);
                risks.push(workspace.risk_and_grad(&w)?.0);
                weights_history.push(w.clone());
                break;
            }
        }
    }

    let final_weights = weights_history.last().unwrap().clone();
    let dist_to_final = weights_history
        .iter()
        .map(|wt| (wt - &final_weights).norm())
        .collect();
    Ok(TrainTrace {
        aligned_error: aligned,
        dist_to_final,
        empirical_risk: risks,
        final_weights,
    })
}

/// Geometric-rate fit of a trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    /// Estimated per-iteration contraction factor.
    pub rate: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// True when the usable window was cut short by the numeric floor.
    pub truncated: bool,
}

/// Least-squares slope of log distance against iteration, exponentiated.
///
/// The first and last `BURN_IN_FRACTION`/`TAIL_FRACTION` of iterations are
/// excluded (transient, and the bend where the distance-to-final proxy
/// collapses), as are points at the numeric floor. If fewer than 20 usable
/// points remain the fit still runs on the usable prefix and is flagged.
pub fn fit_geometric_rate(distances: &[f64]) -> Result<RateFit> {
    let t_total = distances.len();
    if t_total < 4 {
        return Err(Error::InvalidInput(
            "need at least 4 trace points to fit a rate".into(),
        ));
    }
    let start = ((t_total as f64) * BURN_IN_FRACTION).floor() as usize;
    let end = t_total - 1 - ((t_total as f64) * TAIL_FRACTION).floor() as usize;
    if end <= start + 1 {
        return Err(Error::InvalidInput("trace too short after burn-in".into()));
    }
    let scale = distances[start..=end]
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let floor = scale * 1e-12 + 1e-300;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated = false;
    for (t, &d) in distances.iter().enumerate().take(end + 1).skip(start) {
        if d > floor {
            xs.push(t as f64);
            ys.push(d.ln());
        } else {
            truncated = true;
            break;
        }
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(
            "distances hit the numeric floor immediately; no usable prefix".into(),
        ));
    }
    truncated |= xs.len() < 20;
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::InvalidInput("degenerate rate fit".into()))?;
    Ok(RateFit {
        rate: fit.slope.exp(),
        r_squared: fit.r_squared,
        points_used: xs.len(),
        truncated,
    })
}

/// Rate fit on a training trace's distance-to-final diagnostic.
pub fn fit_rate(trace: &TrainTrace) -> Result<RateFit> {
    fit_geometric_rate(&trace.dist_to_final)
}

/// Initialization on the sphere of Frobenius radius `radius` around the
/// reference weights.
pub fn local_random_init<R: Rng + ?Sized>(
    reference: &DMatrix<f64>,
    radius: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut dir = DMatrix::from_fn(reference.nrows(), reference.ncols(), |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });
    let norm = dir.norm();
    if norm > 0.0 {
        dir /= norm;
    }
    reference + dir * radius
}

/// Outcome of the multi-start recovery experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    /// Root-mean-square spread of the aligned endpoints around their mean.
    /// When failure was certified early this is a lower bound on the spread.
    pub v_w: f64,
    pub diverged_trials: usize,
    /// True when a pair of endpoints alone certified failure and the
    /// remaining starts were skipped.
    pub failed_fast: bool,
}

/// Runs `m_trials` trainings on one shared dataset from independent local
/// random initializations; success means the aligned endpoints agree to
/// within `SUCCESS_VW_THRESHOLD`.
pub fn trial_success(
    psi: &MixtureParams,
    teacher: &TeacherModel,
    n: usize,
    m_trials: usize,
    seed: u64,
    config: &TrainConfig,
    init_radius: f64,
) -> Result<TrialOutcome> {
    trial_success_impl(psi, teacher, n, m_trials, seed, config, init_radius, false)
}

/// `trial_success` with an exact early exit: the spread obeys
/// `V_W >= ‖Wa - Wb‖ / sqrt(2M)` for any endpoint pair, so once two aligned
/// endpoints are far enough apart the failure verdict cannot change and the
/// remaining starts are skipped. Verdicts match the full run; only the
/// reported spread degrades to a certified lower bound.
pub fn trial_success_fail_fast(
    psi: &MixtureParams,
    teacher: &TeacherModel,
    n: usize,
    m_trials: usize,
    seed: u64,
    config: &TrainConfig,
    init_radius: f64,
) -> Result<TrialOutcome> {
    trial_success_impl(psi, teacher, n, m_trials, seed, config, init_radius, true)
}

#[allow(clippy::too_many_arguments)]
fn trial_success_impl(
    psi: &MixtureParams,
    teacher: &TeacherModel,
    n: usize,
    m_trials: usize,
    seed: u64,
    config: &TrainConfig,
    init_radius: f64,
    fail_fast: bool,
) -> Result<TrialOutcome> {
    if m_trials < 2 {
        return Err(Error::InvalidInput("need at least 2 trials".into()));
    }
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xda7a, 0));
    let data = Dataset::generate(psi, teacher, n, &mut data_rng)?;

    let pair_margin = SUCCESS_VW_THRESHOLD * (2.0 * m_trials as f64).sqrt();
    let mut endpoints: Vec<DMatrix<f64>> = Vec::with_capacity(m_trials);
    let mut diverged = 0usize;
    for m in 0..m_trials {
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1217, m as u64));
        let w0 = local_random_init(teacher.weights(), init_radius, &mut init_rng);
        let mut cfg = config.clone();
        cfg.seed = derive_seed(seed, 0x7261, m as u64);
        match gd_train(&w0, &data, &cfg, teacher.weights(), psi) {
            Ok(trace) => endpoints.push(trace.final_weights),
            Err(Error::Diverged { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
        if fail_fast && diverged == 0 && endpoints.len() >= 2 {
            let last = endpoints.last().unwrap();
            let gap = aligned_error(&endpoints[0], last)?.distance;
            if gap > pair_margin {
                return Ok(TrialOutcome {
                    success: false,
                    v_w: gap / (2.0 * m_trials as f64).sqrt(),
                    diverged_trials: 0,
                    failed_fast: true,
                });
            }
        }
    }
    if diverged > 0 {
        return Ok(TrialOutcome {
            success: false,
            v_w: f64::INFINITY,
            diverged_trials: diverged,
            failed_fast: false,
        });
    }

    // Align every endpoint to the first before measuring spread.
    let first = endpoints[0].clone();
    let aligned: Vec<DMatrix<f64>> = endpoints
        .iter()
        .map(|w| {
            let res = aligned_error(&first, w)?;
            Ok(apply_permutation(w, &res.permutation))
        })
        .collect::<Result<_>>()?;
    let mut mean = DMatrix::zeros(first.nrows(), first.ncols());
    for w in &aligned {
        mean += w;
    }
    mean /= m_trials as f64;
    let v_w = (aligned
        .iter()
        .map(|w| (w - &mean).norm_squared())
        .sum::<f64>()
        / m_trials as f64)
        .sqrt();
    Ok(TrialOutcome {
        success: v_w <= SUCCESS_VW_THRESHOLD,
        v_w,
        diverged_trials: 0,
        failed_fast: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::LabeledSample;
    use nalgebra::DVector;

    #[test]
    fn auto_step_size_standard_gaussian() {
        let psi = MixtureParams::standard(3);
        assert!((auto_step_size(&psi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auto_step_size_scales_with_covariance() {
        let psi = MixtureParams::isotropic(3, &[(1.0, 0.0, 2.0)]).unwrap();
        assert!((auto_step_size(&psi) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn auto_step_size_two_group_closed_form() {
        let psi = MixtureParams::isotropic(5, &[(0.5, 1.0, 1.0), (0.5, -1.0, 1.0)]).unwrap();
        // Independent recomputation: both groups contribute (sqrt(5)+1)^2.
        let expected = 1.0 / (5.0f64.sqrt() + 1.0).powi(2);
        assert!((auto_step_size(&psi) - expected).abs() < 1e-12);
        assert!((auto_step_size(&psi) - 0.0954915).abs() < 1e-6);
    }

    #[test]
    fn gd_fixed_at_critical_point() {
        // Two samples with opposite labels at the same x make W = 0 an exact
        // critical point of the empirical risk.
        let x = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let data = Dataset {
            samples: vec![
                LabeledSample {
                    x: x.clone(),
                    label: 1,
                    group: 0,
                },
                LabeledSample {
                    x: x.clone(),
                    label: 0,
                    group: 0,
                },
            ],
        };
        let psi = MixtureParams::standard(3);
        let w0 = DMatrix::zeros(3, 2);
        let cfg = TrainConfig {
            iterations: 25,
            ..TrainConfig::default()
        };
        let trace = gd_train(&w0, &data, &cfg, &w0, &psi).unwrap();
        assert!(trace.final_weights.abs().max() == 0.0);
        assert!(trace.dist_to_final.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn gd_deterministic_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let psi = MixtureParams::isotropic(4, &[(0.5, 0.5, 1.0), (0.5, -0.5, 1.0)]).unwrap();
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let data = Dataset::generate(&psi, &teacher, 2000, &mut rng).unwrap();
        let w0 = local_random_init(teacher.weights(), 0.1, &mut rng);
        let cfg = TrainConfig {
            iterations: 40,
            ..TrainConfig::default()
        };
        let a = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).unwrap();
        let b = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).unwrap();
        for (x, y) in a.dist_to_final.iter().zip(&b.dist_to_final) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.empirical_risk.iter().zip(&b.empirical_risk) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(
            (a.final_weights - b.final_weights).abs().max(),
            0.0
        );
    }

    #[test]
    fn gd_linear_convergence_smoke() {
        // One seeded instance of the zero-mean setting; the 18-of-20
        // statistical version lives in the acceptance suite.
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let psi = MixtureParams::isotropic(5, &[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        let teacher = TeacherModel::random(5, 3, &mut rng).unwrap();
        let data = Dataset::generate(&psi, &teacher, 10_000, &mut rng).unwrap();
        let w0 = local_random_init(teacher.weights(), 0.1, &mut rng);
        let cfg = TrainConfig {
            iterations: 2500,
            ..TrainConfig::default()
        };
        let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).unwrap();
        let fit = fit_rate(&trace).unwrap();
        assert!(fit.rate > 0.0 && fit.rate < 1.0, "rate {}", fit.rate);
        assert!(fit.r_squared >= 0.98, "r2 {}", fit.r_squared);
    }

    #[test]
    fn monotone_descent_with_auto_step() {
        let mut violations = 0usize;
        let mut steps = 0usize;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let psi = MixtureParams::isotropic(4, &[(0.5, 0.5, 1.0), (0.5, -0.5, 1.0)]).unwrap();
            let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
            let data = Dataset::generate(&psi, &teacher, 3000, &mut rng).unwrap();
            let w0 = local_random_init(teacher.weights(), 0.2, &mut rng);
            let cfg = TrainConfig {
                iterations: 60,
                ..TrainConfig::default()
            };
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).unwrap();
            for pair in trace.empirical_risk.windows(2) {
                steps += 1;
                if pair[1] > pair[0] + 1e-12 {
                    violations += 1;
                    eprintln!("descent violation seed {seed}: {} -> {}", pair[0], pair[1]);
                }
            }
        }
        assert!(
            (violations as f64) <= 0.01 * steps as f64,
            "{violations}/{steps} non-monotone steps"
        );
    }

    #[test]
    fn noise_raises_plateau() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let psi = MixtureParams::isotropic(4, &[(0.5, 0.5, 1.0), (0.5, -0.5, 1.0)]).unwrap();
        let teacher = TeacherModel::random(4, 2, &mut rng).unwrap();
        let data = Dataset::generate(&psi, &teacher, 3000, &mut rng).unwrap();
        let w0 = local_random_init(teacher.weights(), 0.1, &mut rng);
        let plateau = |xi: f64| {
            let cfg = TrainConfig {
                iterations: 120,
                noise_level: xi,
                seed: 7,
                ..TrainConfig::default()
            };
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).unwrap();
            let tail = &trace.dist_to_final[96..120];
            crate::util::median(tail)
        };
        let clean = plateau(0.0);
        let noisy = plateau(0.1);
        assert!(noisy > clean, "noisy {noisy} clean {clean}");
    }

    #[test]
    fn fit_rate_exact_geometric() {
        let dists: Vec<f64> = (0..200).map(|t| 0.9f64.powi(t)).collect();
        let fit = fit_geometric_rate(&dists).unwrap();
        assert!((fit.rate - 0.9).abs() < 1e-6, "rate {}", fit.rate);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_rate_constant_sequence() {
        let dists = vec![2.5; 100];
        let fit = fit_geometric_rate(&dists).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_rate_reports_truncation_at_floor() {
        // Falls to the floor after 30 points, then stays there.
        let mut dists: Vec<f64> = (0..30).map(|t| 0.5f64.powi(t)).collect();
        dists.extend(std::iter::repeat(1e-20).take(170));
        let fit = fit_geometric_rate(&dists).unwrap();
        assert!(fit.truncated);
        assert!((fit.rate - 0.5).abs() < 0.05);
    }

    #[test]
    fn trial_success_logistic_regression_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let psi = MixtureParams::isotropic(2, &[(0.5, 0.5, 1.0), (0.5, -0.5, 1.0)]).unwrap();
        let teacher = TeacherModel::random(2, 1, &mut rng).unwrap();
        let cfg = TrainConfig {
            iterations: 400,
            ..TrainConfig::default()
        };
        let out = trial_success(&psi, &teacher, 100_000, 5, 1, &cfg, 0.1).unwrap();
        assert!(out.success, "v_w {}", out.v_w);
    }

    #[test]
    fn trial_success_fails_tiny_n() {
        let mut fails = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(4500 + seed);
            let psi = MixtureParams::isotropic(5, &[(0.5, 1.0, 1.0), (0.5, -1.0, 1.0)]).unwrap();
            let teacher = TeacherModel::random(5, 3, &mut rng).unwrap();
            let cfg = TrainConfig {
                iterations: 150,
                ..TrainConfig::default()
            };
            let out = trial_success(&psi, &teacher, 10, 5, seed, &cfg, 0.1).unwrap();
            if !out.success {
                fails += 1;
            }
        }
        assert!(fails >= 18, "only {fails}/20 failed");
    }
}
