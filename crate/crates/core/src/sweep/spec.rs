//! Experiment specifications. Every spec deserializes from JSON with
//! defaults mirroring the synthetic-study setups, so `{"kind": "..."}` is a
//! complete spec; every field can be overridden.

use serde::{Deserialize, Serialize};

/// Training knobs shared by all experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub iterations: usize,
    /// `null` selects the mixture-derived step size.
    pub step_size: Option<f64>,
    /// Multiplier on the mixture-derived step size when `step_size` is null.
    pub step_scale: f64,
    pub noise_level: f64,
    /// Frobenius radius of the local random initialization sphere.
    pub init_radius: f64,
    /// Optional early stop on per-update movement.
    pub stop_movement: Option<f64>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            iterations: 300,
            step_size: None,
            step_scale: 1.0,
            noise_level: 0.0,
            init_radius: 0.1,
            stop_movement: None,
        }
    }
}

/// Success-rate heatmap over (d, n) cells. Teacher width is fixed at 2 so
/// the full d grid stays valid (d >= K).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleComplexityGridSpec {
    pub d_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub k: usize,
    /// Independent (teacher, training set) repetitions per cell.
    pub trials: usize,
    /// Random restarts inside each repetition's recovery experiment.
    pub inner_restarts: usize,
    /// First group mean coefficient (mean = c * ones).
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda1: f64,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for SampleComplexityGridSpec {
    fn default() -> Self {
        SampleComplexityGridSpec {
            d_values: vec![2, 3, 4, 5, 6],
            n_values: vec![
                40, 50, 63, 79, 98, 123, 154, 192, 240, 300, 375, 469, 586, 733, 916,
            ],
            k: 2,
            trials: 8,
            inner_restarts: 20,
            mu1: 1.0,
            mu2: 0.0,
            sigma1: 1.0,
            sigma2: 1.0,
            lambda1: 0.5,
            // Desk-scale protocol: an 8x step (the rule pins only the order)
            // plus a movement-based early stop keep converged starts cheap.
            train: TrainSpec {
                iterations: 3000,
                step_scale: 8.0,
                stop_movement: Some(1e-8),
                ..TrainSpec::default()
            },
            seed: 7,
        }
    }
}

/// Which parameter the convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceAxis {
    /// Opposed means `mu1 = -mu2 = c * ones`, structured covariance.
    MeanScale,
    /// Covariance scale `Sigma = c^2 * (structured spectrum)`.
    CovarianceScale,
    /// Teacher width; identity covariance.
    NeuronCount,
}

/// Fitted convergence rate per sweep value, joined with predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceSweepSpec {
    pub axis: ConvergenceAxis,
    pub values: Vec<f64>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    /// Seed for the structured covariance's orthogonal factor (recorded so
    /// the spectrum is reproducible).
    pub spectrum_seed: u64,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for ConvergenceSweepSpec {
    fn default() -> Self {
        ConvergenceSweepSpec {
            axis: ConvergenceAxis::MeanScale,
            values: vec![0.0, 1.0, 2.0, 3.0],
            d: 5,
            k: 3,
            n: 10_000,
            trials: 10,
            spectrum_seed: 42,
            train: TrainSpec {
                iterations: 400,
                ..TrainSpec::default()
            },
            seed: 11,
        }
    }
}

impl ConvergenceSweepSpec {
    /// The covariance-sweep defaults (interior-optimum study).
    pub fn covariance_default() -> Self {
        ConvergenceSweepSpec {
            axis: ConvergenceAxis::CovarianceScale,
            values: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            n: 20_000,
            ..ConvergenceSweepSpec::default()
        }
    }

    /// The width-sweep defaults (rate linear in -1/K^2).
    pub fn neuron_default() -> Self {
        ConvergenceSweepSpec {
            axis: ConvergenceAxis::NeuronCount,
            values: vec![2.0, 3.0, 4.0, 5.0],
            ..ConvergenceSweepSpec::default()
        }
    }
}

/// Final aligned error against sqrt(log n / n) over an n grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorVsNSpec {
    pub n_values: Vec<usize>,
    pub d: usize,
    pub k: usize,
    pub trials: usize,
    /// Covariance is sigma^2 I for both groups.
    pub sigma: f64,
    /// Mean coefficients: mu1 = c * ones, mu2 = -c * ones.
    pub mu: f64,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for ErrorVsNSpec {
    fn default() -> Self {
        ErrorVsNSpec {
            n_values: vec![2_000, 5_000, 10_000, 20_000, 40_000, 60_000],
            d: 5,
            k: 3,
            trials: 20,
            sigma: 3.0,
            mu: 1.0,
            train: TrainSpec {
                iterations: 500,
                ..TrainSpec::default()
            },
            seed: 13,
        }
    }
}

/// Risk sweeps over one group-2 parameter with group 2 as the minority.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskSweepSpec {
    /// Grid of the swept parameter (mean coefficient or sigma2).
    pub values: Vec<f64>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// Fresh evaluation draws for each risk estimate.
    pub n_mc: usize,
    pub trials: usize,
    pub lambda2: f64,
    /// Standard deviation of the teacher's i.i.d. normal entries.
    pub teacher_scale: f64,
    /// Group-1 mean coefficient.
    pub mu1: f64,
    /// Group-2 mean coefficient; the mean sweep overrides this per cell.
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for RiskSweepSpec {
    fn default() -> Self {
        RiskSweepSpec {
            values: vec![0.0, 0.6, 1.2, 1.8, 2.4, 3.0],
            d: 5,
            k: 3,
            n: 20_000,
            n_mc: 40_000,
            trials: 10,
            lambda2: 0.2,
            teacher_scale: 1.0,
            mu1: 2.0,
            mu2: -2.0,
            sigma1: 1.0,
            sigma2: 1.0,
            train: TrainSpec {
                iterations: 400,
                ..TrainSpec::default()
            },
            seed: 17,
        }
    }
}

impl RiskSweepSpec {
    pub fn sigma_default() -> Self {
        RiskSweepSpec {
            values: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            ..RiskSweepSpec::default()
        }
    }
}

/// One covariance configuration of the minority-fraction sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaConfiguration {
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda2_values: Vec<f64>,
}

/// Minority-fraction sweep with both covariance orderings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskVsLambdaSpec {
    pub configurations: Vec<LambdaConfiguration>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub n_mc: usize,
    pub trials: usize,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for RiskVsLambdaSpec {
    fn default() -> Self {
        RiskVsLambdaSpec {
            configurations: vec![
                LambdaConfiguration {
                    sigma1: 10.0f64.sqrt(),
                    sigma2: 1.0,
                    lambda2_values: vec![0.05, 0.125, 0.2, 0.275, 0.35, 0.425, 0.5],
                },
                LambdaConfiguration {
                    sigma1: 1.0,
                    sigma2: 10.0f64.sqrt(),
                    lambda2_values: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
                },
            ],
            d: 5,
            k: 3,
            n: 20_000,
            n_mc: 40_000,
            trials: 10,
            train: TrainSpec {
                iterations: 400,
                ..TrainSpec::default()
            },
            seed: 19,
        }
    }
}

/// Three-arm initialization comparison on a symmetric two-group mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InitCompareSpec {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    /// Symmetric means are +-mu * ones.
    pub mu: f64,
    /// Teacher entries are uniform on [-teacher_scale, teacher_scale].
    pub teacher_scale: f64,
    /// Standard deviation of the far random initialization's entries.
    pub far_std: f64,
    pub local_radius: f64,
    /// Final gradient norm below this counts as converged.
    pub grad_tol: f64,
    pub tensor_restarts: usize,
    pub tensor_power_iters: usize,
    pub train: TrainSpec,
    pub seed: u64,
}

impl Default for InitCompareSpec {
    fn default() -> Self {
        InitCompareSpec {
            d: 20,
            k: 2,
            n: 100_000,
            trials: 3,
            mu: 0.3,
            teacher_scale: 0.1,
            far_std: 5.0,
            local_radius: 0.1,
            grad_tol: 1e-3,
            tensor_restarts: 50,
            tensor_power_iters: 100,
            train: TrainSpec {
                iterations: 400,
                ..TrainSpec::default()
            },
            seed: 23,
        }
    }
}

/// Top-level experiment selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    SampleComplexityGrid(SampleComplexityGridSpec),
    ConvergenceSweep(ConvergenceSweepSpec),
    ErrorVsN(ErrorVsNSpec),
    RiskVsMu(RiskSweepSpec),
    RiskVsSigma(RiskSweepSpec),
    RiskVsLambda(RiskVsLambdaSpec),
    InitCompare(InitCompareSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::SampleComplexityGrid(_) => "sample_complexity_grid",
            ExperimentSpec::ConvergenceSweep(_) => "convergence_sweep",
            ExperimentSpec::ErrorVsN(_) => "error_vs_n",
            ExperimentSpec::RiskVsMu(_) => "risk_vs_mu",
            ExperimentSpec::RiskVsSigma(_) => "risk_vs_sigma",
            ExperimentSpec::RiskVsLambda(_) => "risk_vs_lambda",
            ExperimentSpec::InitCompare(_) => "init_compare",
        }
    }

    /// Default spec for a named kind.
    pub fn default_for(kind: &str) -> Option<ExperimentSpec> {
        match kind {
            "sample_complexity_grid" => Some(ExperimentSpec::SampleComplexityGrid(
                SampleComplexityGridSpec::default(),
            )),
            "convergence_sweep" => Some(ExperimentSpec::ConvergenceSweep(
                ConvergenceSweepSpec::default(),
            )),
            "error_vs_n" => Some(ExperimentSpec::ErrorVsN(ErrorVsNSpec::default())),
            "risk_vs_mu" => Some(ExperimentSpec::RiskVsMu(RiskSweepSpec::default())),
            "risk_vs_sigma" => Some(ExperimentSpec::RiskVsSigma(RiskSweepSpec::sigma_default())),
            "risk_vs_lambda" => {
                Some(ExperimentSpec::RiskVsLambda(RiskVsLambdaSpec::default()))
            }
            "init_compare" => Some(ExperimentSpec::InitCompare(InitCompareSpec::default())),
            _ => None,
        }
    }

    /// Base seed used for stream derivation; overridable from the CLI.
    pub fn seed(&self) -> u64 {
        match self {
            ExperimentSpec::SampleComplexityGrid(s) => s.seed,
            ExperimentSpec::ConvergenceSweep(s) => s.seed,
            ExperimentSpec::ErrorVsN(s) => s.seed,
            ExperimentSpec::RiskVsMu(s) | ExperimentSpec::RiskVsSigma(s) => s.seed,
            ExperimentSpec::RiskVsLambda(s) => s.seed,
            ExperimentSpec::InitCompare(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentSpec::SampleComplexityGrid(s) => s.seed = seed,
            ExperimentSpec::ConvergenceSweep(s) => s.seed = seed,
            ExperimentSpec::ErrorVsN(s) => s.seed = seed,
            ExperimentSpec::RiskVsMu(s) | ExperimentSpec::RiskVsSigma(s) => s.seed = seed,
            ExperimentSpec::RiskVsLambda(s) => s.seed = seed,
            ExperimentSpec::InitCompare(s) => s.seed = seed,
        }
    }
}
