//! Experiment runners. Cells and trials fan out over a work pool with
//! per-job derived seeds; rows are emitted in (cell, trial) order, so output
//! bytes are identical for a fixed spec and seed regardless of thread count.

use super::csvio::{Field, SweepResult};
use super::spec::*;
use super::svg::{heatmap, line_plot, Series};
use crate::error::{Error, Result};
use crate::mixture::MixtureParams;
use crate::risk::{aligned_error, empirical_grad, group_risk, population_risk};
use crate::teacher::{Dataset, TeacherModel};
use crate::tensorinit::{tensor_init, TensorInitConfig};
use crate::theory::theory_report;
use crate::train::{auto_step_size, fit_rate, gd_train, local_random_init, trial_success_fail_fast, TrainConfig};
use crate::util::{derive_seed, linear_fit, mean_std_err, median};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

/// Dispatches a spec to its runner.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    match spec {
        ExperimentSpec::SampleComplexityGrid(s) => run_sample_complexity_grid(s),
        ExperimentSpec::ConvergenceSweep(s) => run_convergence_sweep(s),
        ExperimentSpec::ErrorVsN(s) => run_error_vs_n(s),
        ExperimentSpec::RiskVsMu(s) => run_risk_sweep_mu(s),
        ExperimentSpec::RiskVsSigma(s) => run_risk_sweep_sigma(s),
        ExperimentSpec::RiskVsLambda(s) => run_risk_vs_lambda(s),
        ExperimentSpec::InitCompare(s) => run_init_compare(s),
    }
}

/// Success threshold defining the phase boundary n*(d).
pub const BOUNDARY_SUCCESS_RATE: f64 = 0.5;

fn train_config(spec: &TrainSpec, seed: u64, psi: &MixtureParams) -> TrainConfig {
    let step_size = spec
        .step_size
        .or_else(|| (spec.step_scale != 1.0).then(|| spec.step_scale * auto_step_size(psi)));
    TrainConfig {
        step_size,
        iterations: spec.iterations,
        noise_level: spec.noise_level,
        seed,
        stop_movement: spec.stop_movement,
    }
}

/// Two isotropic groups with means `c * ones`.
fn two_group_isotropic(
    d: usize,
    lambda1: f64,
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
) -> Result<MixtureParams> {
    MixtureParams::new(vec![
        (
            lambda1,
            DVector::from_element(d, mu1),
            DMatrix::identity(d, d) * sigma1 * sigma1,
        ),
        (
            1.0 - lambda1,
            DVector::from_element(d, mu2),
            DMatrix::identity(d, d) * sigma2 * sigma2,
        ),
    ])
}

/// Structured covariance `Lambda' D Lambda` with D = diag(1, 1.1, ...) and
/// Lambda the left singular vectors of a seeded Gaussian matrix.
fn structured_covariance(d: usize, spectrum_seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spectrum_seed, 0x5bec, 0));
    let raw = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let svd = raw.svd(true, false);
    let lam = svd.u.expect("left singular vectors requested");
    let diag = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| 1.0 + 0.1 * i as f64));
    lam.transpose() * diag * lam
}

// ---------------------------------------------------------------------------
// Sample-complexity grid
// ---------------------------------------------------------------------------

pub fn run_sample_complexity_grid(spec: &SampleComplexityGridSpec) -> Result<SweepResult> {
    if spec.d_values.is_empty() || spec.n_values.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if spec.d_values.iter().any(|&d| d < spec.k) {
        return Err(Error::InvalidInput(format!(
            "every d must be >= K = {}",
            spec.k
        )));
    }
    struct Job {
        cell: usize,
        d: usize,
        n: usize,
        rep: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    let mut cell = 0usize;
    for &d in &spec.d_values {
        for &n in &spec.n_values {
            for rep in 0..spec.trials {
                jobs.push(Job {
                    cell,
                    d,
                    n,
                    rep,
                    seed: derive_seed(spec.seed, 0x9c1d, ((cell as u64) << 16) | rep as u64),
                });
            }
            cell += 1;
        }
    }
    let results: Vec<Result<(f64, bool)>> = jobs
        .par_iter()
        .map(|job| {
            let psi = two_group_isotropic(
                job.d,
                spec.lambda1,
                spec.mu1,
                spec.sigma1,
                spec.mu2,
                spec.sigma2,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher = TeacherModel::random(job.d, spec.k, &mut rng)?;
            let cfg = train_config(&spec.train, job.seed, &psi);
            let out = trial_success_fail_fast(
                &psi,
                &teacher,
                job.n,
                spec.inner_restarts,
                job.seed,
                &cfg,
                spec.train.init_radius,
            )?;
            Ok((out.v_w, out.success))
        })
        .collect();

    let header = vec!["d", "n", "rep", "seed", "v_w", "success"];
    let mut rows = Vec::with_capacity(jobs.len());
    let n_cells = spec.d_values.len() * spec.n_values.len();
    let mut successes = vec![0usize; n_cells];
    for (job, res) in jobs.iter().zip(results) {
        let (v_w, success) = res?;
        if success {
            successes[job.cell] += 1;
        }
        rows.push(vec![
            Field::UInt(job.d as u64),
            Field::UInt(job.n as u64),
            Field::UInt(job.rep as u64),
            Field::UInt(job.seed),
            Field::Float(v_w),
            Field::Bool(success),
        ]);
    }

    // Success rates, boundary, and the linear boundary fit.
    let nn = spec.n_values.len();
    let mut rates = vec![vec![0.0; nn]; spec.d_values.len()];
    for (di, _) in spec.d_values.iter().enumerate() {
        for ni in 0..nn {
            rates[di][ni] = successes[di * nn + ni] as f64 / spec.trials as f64;
        }
    }
    let mut boundary: Vec<Option<usize>> = Vec::new();
    for (di, _) in spec.d_values.iter().enumerate() {
        boundary.push(
            (0..nn)
                .find(|&ni| rates[di][ni] >= BOUNDARY_SUCCESS_RATE)
                .map(|ni| spec.n_values[ni]),
        );
    }
    let fit_points: Vec<(f64, f64)> = spec
        .d_values
        .iter()
        .zip(&boundary)
        .filter_map(|(&d, b)| b.map(|n| (d as f64, n as f64)))
        .collect();
    let boundary_fit = if fit_points.len() >= 2 {
        let xs: Vec<f64> = fit_points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit_points.iter().map(|p| p.1).collect();
        linear_fit(&xs, &ys)
    } else {
        None
    };

    let heat = heatmap(
        "recovery success rate",
        "n (grid index)",
        "d",
        &spec
            .n_values
            .iter()
            .map(|&n| n as f64)
            .collect::<Vec<_>>(),
        &spec
            .d_values
            .iter()
            .map(|&d| d as f64)
            .collect::<Vec<_>>(),
        &transpose_rates(&rates),
    );
    let summary = json!({
        "kind": "sample_complexity_grid",
        "success_rate": rates,
        "d_values": spec.d_values,
        "n_values": spec.n_values,
        "boundary_n": boundary,
        "boundary_fit": boundary_fit.map(|f| json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
        })),
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![("success_rate.svg".into(), heat)],
    })
}

fn transpose_rates(rates: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nd = rates.len();
    let nn = rates[0].len();
    (0..nn)
        .map(|ni| (0..nd).map(|di| rates[di][ni]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Convergence-rate sweep
// ---------------------------------------------------------------------------

pub fn run_convergence_sweep(spec: &ConvergenceSweepSpec) -> Result<SweepResult> {
    if spec.values.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    struct Job {
        cell: usize,
        value: f64,
        trial: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for (cell, &value) in spec.values.iter().enumerate() {
        for trial in 0..spec.trials {
            jobs.push(Job {
                cell,
                value,
                trial,
                seed: derive_seed(spec.seed, 0xc09e, ((cell as u64) << 16) | trial as u64),
            });
        }
    }
    let structured = structured_covariance(spec.d, spec.spectrum_seed);

    let results: Vec<Result<(f64, f64, usize, f64, f64)>> = jobs
        .par_iter()
        .map(|job| {
            let (psi, k) = convergence_cell(spec, &structured, job.value)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher = TeacherModel::random(spec.d, k, &mut rng)?;
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0xda7a, 0));
            let data = Dataset::generate(&psi, &teacher, spec.n, &mut data_rng)?;
            let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, 0));
            let w0 = local_random_init(teacher.weights(), spec.train.init_radius, &mut init_rng);
            let cfg = train_config(&spec.train, job.seed, &psi);
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi)?;
            let fit = fit_rate(&trace)?;
            let report = theory_report(&psi, &teacher, 0.1)?;
            Ok((
                fit.rate,
                fit.r_squared,
                fit.points_used,
                report.predicted_rate,
                report.q,
            ))
        })
        .collect();

    let header = vec![
        "axis_value",
        "trial",
        "seed",
        "v_hat",
        "fit_r_squared",
        "fit_points",
        "predicted_v",
        "predicted_q",
    ];
    let mut rows = Vec::with_capacity(jobs.len());
    let mut per_cell_rates: Vec<Vec<f64>> = vec![Vec::new(); spec.values.len()];
    let mut per_cell_pred: Vec<Vec<f64>> = vec![Vec::new(); spec.values.len()];
    for (job, res) in jobs.iter().zip(results) {
        let (v_hat, r2, pts, pred_v, pred_q) = res?;
        per_cell_rates[job.cell].push(v_hat);
        per_cell_pred[job.cell].push(pred_v);
        rows.push(vec![
            Field::Float(job.value),
            Field::UInt(job.trial as u64),
            Field::UInt(job.seed),
            Field::Float(v_hat),
            Field::Float(r2),
            Field::UInt(pts as u64),
            Field::Float(pred_v),
            Field::Float(pred_q),
        ]);
    }

    let medians: Vec<f64> = per_cell_rates.iter().map(|v| median(v)).collect();
    let std_errs: Vec<f64> = per_cell_rates.iter().map(|v| mean_std_err(v).1).collect();
    let pred_medians: Vec<f64> = per_cell_pred.iter().map(|v| median(v)).collect();

    // Width sweep: fitted rate against -1/K^2.
    let rate_law_fit = if spec.axis == ConvergenceAxis::NeuronCount {
        let xs: Vec<f64> = spec.values.iter().map(|&k| -1.0 / (k * k)).collect();
        linear_fit(&xs, &medians)
    } else {
        None
    };

    let plot = line_plot(
        "fitted vs predicted convergence rate",
        match spec.axis {
            ConvergenceAxis::MeanScale => "mean coefficient",
            ConvergenceAxis::CovarianceScale => "covariance scale",
            ConvergenceAxis::NeuronCount => "K",
        },
        "contraction factor",
        &[
            Series {
                label: "measured median".into(),
                points: spec.values.iter().cloned().zip(medians.clone()).collect(),
            },
            Series {
                label: "predicted".into(),
                points: spec
                    .values
                    .iter()
                    .cloned()
                    .zip(pred_medians.clone())
                    .collect(),
            },
        ],
    );

    let summary = json!({
        "kind": "convergence_sweep",
        "axis": spec.axis,
        "values": spec.values,
        "median_v_hat": medians,
        "v_hat_std_err": std_errs,
        "median_predicted_v": pred_medians,
        "rate_law_fit": rate_law_fit.map(|f| json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
        })),
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![("convergence_rate.svg".into(), plot)],
    })
}

fn convergence_cell(
    spec: &ConvergenceSweepSpec,
    structured: &DMatrix<f64>,
    value: f64,
) -> Result<(MixtureParams, usize)> {
    let d = spec.d;
    match spec.axis {
        ConvergenceAxis::MeanScale => {
            let psi = MixtureParams::new(vec![
                (0.5, DVector::from_element(d, value), structured.clone()),
                (0.5, DVector::from_element(d, -value), structured.clone()),
            ])?;
            Ok((psi, spec.k))
        }
        ConvergenceAxis::CovarianceScale => {
            let cov = structured * value * value;
            let psi = MixtureParams::new(vec![
                (0.5, DVector::from_element(d, 1.0), cov.clone()),
                (0.5, DVector::from_element(d, -1.0), cov),
            ])?;
            Ok((psi, spec.k))
        }
        ConvergenceAxis::NeuronCount => {
            let k = value as usize;
            if k < 2 || k > d {
                return Err(Error::InvalidInput(format!(
                    "neuron count {k} outside 2..=d"
                )));
            }
            let psi = two_group_isotropic(d, 0.5, 1.0, 1.0, -1.0, 1.0)?;
            Ok((psi, k))
        }
    }
}

// ---------------------------------------------------------------------------
// Error against sqrt(log n / n)
// ---------------------------------------------------------------------------

/// The production fitter for the statistical-error scaling; exposed so tests
/// can feed it synthetic data.
pub fn error_scaling_fit(n_values: &[f64], errors: &[f64]) -> Option<crate::util::LinearFit> {
    let xs: Vec<f64> = n_values.iter().map(|&n| (n.ln() / n).sqrt()).collect();
    linear_fit(&xs, errors)
}

pub fn run_error_vs_n(spec: &ErrorVsNSpec) -> Result<SweepResult> {
    if spec.n_values.is_empty() {
        return Err(Error::InvalidInput("empty n grid".into()));
    }
    struct Job {
        cell: usize,
        n: usize,
        trial: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for (cell, &n) in spec.n_values.iter().enumerate() {
        for trial in 0..spec.trials {
            jobs.push(Job {
                cell,
                n,
                trial,
                seed: derive_seed(spec.seed, 0xe44e, ((cell as u64) << 16) | trial as u64),
            });
        }
    }
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|job| {
            let psi = two_group_isotropic(spec.d, 0.5, spec.mu, spec.sigma, -spec.mu, spec.sigma)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher = TeacherModel::random(spec.d, spec.k, &mut rng)?;
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0xda7a, 0));
            let data = Dataset::generate(&psi, &teacher, job.n, &mut data_rng)?;
            let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, 0));
            let w0 = local_random_init(teacher.weights(), spec.train.init_radius, &mut init_rng);
            let cfg = train_config(&spec.train, job.seed, &psi);
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi)?;
            Ok(*trace.aligned_error.last().unwrap())
        })
        .collect();

    let header = vec!["n", "trial", "seed", "aligned_error", "sqrt_log_n_over_n"];
    let mut rows = Vec::with_capacity(jobs.len());
    let mut per_cell: Vec<Vec<f64>> = vec![Vec::new(); spec.n_values.len()];
    for (job, res) in jobs.iter().zip(results) {
        let err = res?;
        per_cell[job.cell].push(err);
        let x = ((job.n as f64).ln() / job.n as f64).sqrt();
        rows.push(vec![
            Field::UInt(job.n as u64),
            Field::UInt(job.trial as u64),
            Field::UInt(job.seed),
            Field::Float(err),
            Field::Float(x),
        ]);
    }
    let means: Vec<f64> = per_cell.iter().map(|v| mean_std_err(v).0).collect();
    let fit = if spec.n_values.len() >= 2 {
        error_scaling_fit(
            &spec.n_values.iter().map(|&n| n as f64).collect::<Vec<_>>(),
            &means,
        )
    } else {
        None
    };
    let plot = line_plot(
        "final aligned error vs sqrt(log n / n)",
        "sqrt(log n / n)",
        "mean aligned error",
        &[Series {
            label: "measured".into(),
            points: spec
                .n_values
                .iter()
                .map(|&n| ((n as f64).ln() / n as f64).sqrt())
                .zip(means.clone())
                .collect(),
        }],
    );
    let summary = json!({
        "kind": "error_vs_n",
        "n_values": spec.n_values,
        "mean_aligned_error": means,
        "scaling_fit": fit.map(|f| json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
        })),
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![("error_scaling.svg".into(), plot)],
    })
}

// ---------------------------------------------------------------------------
// Risk sweeps (mean and covariance of the minority group)
// ---------------------------------------------------------------------------

enum RiskAxis {
    /// Sweep value is the group-2 mean coefficient.
    MeanCoeff,
    /// Sweep value is sigma2.
    SigmaScale,
}

/// Risk sweep over the minority group's mean coefficient.
pub fn run_risk_sweep_mu(spec: &RiskSweepSpec) -> Result<SweepResult> {
    run_risk_sweep(spec, RiskAxis::MeanCoeff)
}

/// Risk sweep over the minority group's covariance scale.
pub fn run_risk_sweep_sigma(spec: &RiskSweepSpec) -> Result<SweepResult> {
    run_risk_sweep(spec, RiskAxis::SigmaScale)
}

fn run_risk_sweep(spec: &RiskSweepSpec, axis: RiskAxis) -> Result<SweepResult> {
    if spec.values.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    struct Job {
        cell: usize,
        value: f64,
        trial: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for (cell, &value) in spec.values.iter().enumerate() {
        for trial in 0..spec.trials {
            jobs.push(Job {
                cell,
                value,
                trial,
                seed: derive_seed(spec.seed, 0x415c, ((cell as u64) << 16) | trial as u64),
            });
        }
    }
    let results: Vec<Result<(f64, f64, f64, f64, f64, f64, f64)>> = jobs
        .par_iter()
        .map(|job| {
            let (mu2, sigma2) = match axis {
                RiskAxis::MeanCoeff => (job.value, spec.sigma2),
                RiskAxis::SigmaScale => (spec.mu2, job.value),
            };
            let psi = two_group_isotropic(
                spec.d,
                1.0 - spec.lambda2,
                spec.mu1,
                spec.sigma1,
                mu2,
                sigma2,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher = TeacherModel::random_scaled(spec.d, spec.k, spec.teacher_scale, &mut rng)?;
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0xda7a, 0));
            let data = Dataset::generate(&psi, &teacher, spec.n, &mut data_rng)?;
            let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, 0));
            let w0 = local_random_init(teacher.weights(), spec.train.init_radius, &mut init_rng);
            let cfg = train_config(&spec.train, job.seed, &psi);
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi)?;
            let w_hat = &trace.final_weights;
            let avg = population_risk(w_hat, &psi, &teacher, spec.n_mc, derive_seed(job.seed, 0x4e57, 1))?;
            let grp = group_risk(w_hat, &psi, &teacher, 2, spec.n_mc, derive_seed(job.seed, 0x4e57, 2))?;
            let report = theory_report(&psi, &teacher, 0.1)?;
            Ok((
                avg.value,
                avg.mc_std_err,
                grp.value,
                grp.mc_std_err,
                *trace.aligned_error.last().unwrap(),
                report.predicted_rate,
                report.q,
            ))
        })
        .collect();

    let header = vec![
        "sweep_value",
        "trial",
        "seed",
        "avg_risk",
        "avg_se",
        "group2_risk",
        "group2_se",
        "aligned_error",
        "predicted_v",
        "predicted_q",
    ];
    let mut rows = Vec::with_capacity(jobs.len());
    let n_cells = spec.values.len();
    let mut avg_cells: Vec<Vec<f64>> = vec![Vec::new(); n_cells];
    let mut grp_cells: Vec<Vec<f64>> = vec![Vec::new(); n_cells];
    for (job, res) in jobs.iter().zip(results) {
        let (avg, avg_se, grp, grp_se, err, pv, pq) = res?;
        avg_cells[job.cell].push(avg);
        grp_cells[job.cell].push(grp);
        rows.push(vec![
            Field::Float(job.value),
            Field::UInt(job.trial as u64),
            Field::UInt(job.seed),
            Field::Float(avg),
            Field::Float(avg_se),
            Field::Float(grp),
            Field::Float(grp_se),
            Field::Float(err),
            Field::Float(pv),
            Field::Float(pq),
        ]);
    }
    let avg_means: Vec<f64> = avg_cells.iter().map(|v| mean_std_err(v).0).collect();
    let avg_ses: Vec<f64> = avg_cells.iter().map(|v| mean_std_err(v).1).collect();
    let grp_means: Vec<f64> = grp_cells.iter().map(|v| mean_std_err(v).0).collect();
    let grp_ses: Vec<f64> = grp_cells.iter().map(|v| mean_std_err(v).1).collect();
    let grp_argmin = grp_means
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);

    let kind = match axis {
        RiskAxis::MeanCoeff => "risk_vs_mu",
        RiskAxis::SigmaScale => "risk_vs_sigma",
    };
    let plot = line_plot(
        "average and group-2 risk",
        match axis {
            RiskAxis::MeanCoeff => "group-2 mean coefficient",
            RiskAxis::SigmaScale => "sigma2",
        },
        "cross-entropy risk",
        &[
            Series {
                label: "average".into(),
                points: spec.values.iter().cloned().zip(avg_means.clone()).collect(),
            },
            Series {
                label: "group 2".into(),
                points: spec.values.iter().cloned().zip(grp_means.clone()).collect(),
            },
        ],
    );
    let summary = json!({
        "kind": kind,
        "values": spec.values,
        "avg_risk_mean": avg_means,
        "avg_risk_std_err": avg_ses,
        "group2_risk_mean": grp_means,
        "group2_risk_std_err": grp_ses,
        "group2_argmin_index": grp_argmin,
        "group2_argmin_interior": grp_argmin > 0 && grp_argmin + 1 < n_cells,
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![(format!("{kind}.svg"), plot)],
    })
}

// ---------------------------------------------------------------------------
// Minority-fraction sweep
// ---------------------------------------------------------------------------

pub fn run_risk_vs_lambda(spec: &RiskVsLambdaSpec) -> Result<SweepResult> {
    if spec.configurations.is_empty() {
        return Err(Error::InvalidInput("no configurations".into()));
    }
    struct Job {
        config: usize,
        lambda2: f64,
        trial: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for (ci, config) in spec.configurations.iter().enumerate() {
        for (cell, &lambda2) in config.lambda2_values.iter().enumerate() {
            for trial in 0..spec.trials {
                jobs.push(Job {
                    config: ci,
                    lambda2,
                    trial,
                    seed: derive_seed(
                        spec.seed,
                        0x1a3b,
                        ((ci as u64) << 32) | ((cell as u64) << 16) | trial as u64,
                    ),
                });
            }
        }
    }
    let results: Vec<Result<(f64, f64, f64, f64, f64)>> = jobs
        .par_iter()
        .map(|job| {
            let config = &spec.configurations[job.config];
            // Both groups zero-mean; only the covariances differ.
            let psi = two_group_isotropic(
                spec.d,
                1.0 - job.lambda2,
                0.0,
                config.sigma1,
                0.0,
                config.sigma2,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher = TeacherModel::random(spec.d, spec.k, &mut rng)?;
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0xda7a, 0));
            let data = Dataset::generate(&psi, &teacher, spec.n, &mut data_rng)?;
            let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, 0));
            let w0 = local_random_init(teacher.weights(), spec.train.init_radius, &mut init_rng);
            let cfg = train_config(&spec.train, job.seed, &psi);
            let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi)?;
            let w_hat = &trace.final_weights;
            let avg = population_risk(w_hat, &psi, &teacher, spec.n_mc, derive_seed(job.seed, 0x4e57, 1))?;
            let grp = group_risk(w_hat, &psi, &teacher, 2, spec.n_mc, derive_seed(job.seed, 0x4e57, 2))?;
            Ok((
                avg.value,
                avg.mc_std_err,
                grp.value,
                grp.mc_std_err,
                *trace.aligned_error.last().unwrap(),
            ))
        })
        .collect();

    let header = vec![
        "config",
        "sigma1",
        "sigma2",
        "lambda2",
        "trial",
        "seed",
        "avg_risk",
        "avg_se",
        "group2_risk",
        "group2_se",
        "aligned_error",
    ];
    let mut rows = Vec::with_capacity(jobs.len());
    let mut grp_points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.configurations.len()];
    let mut avg_points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.configurations.len()];
    for (job, res) in jobs.iter().zip(results) {
        let config = &spec.configurations[job.config];
        let (avg, avg_se, grp, grp_se, err) = res?;
        grp_points[job.config].push((job.lambda2, grp));
        avg_points[job.config].push((job.lambda2, avg));
        rows.push(vec![
            Field::UInt(job.config as u64),
            Field::Float(config.sigma1),
            Field::Float(config.sigma2),
            Field::Float(job.lambda2),
            Field::UInt(job.trial as u64),
            Field::UInt(job.seed),
            Field::Float(avg),
            Field::Float(avg_se),
            Field::Float(grp),
            Field::Float(grp_se),
            Field::Float(err),
        ]);
    }

    let mut config_summaries = Vec::new();
    let mut plot_series = Vec::new();
    for (ci, config) in spec.configurations.iter().enumerate() {
        let xs: Vec<f64> = grp_points[ci].iter().map(|p| p.0).collect();
        let ys: Vec<f64> = grp_points[ci].iter().map(|p| p.1).collect();
        let grp_fit = linear_fit(&xs, &ys);
        let ys_avg: Vec<f64> = avg_points[ci].iter().map(|p| p.1).collect();
        let avg_fit = linear_fit(&xs, &ys_avg);
        config_summaries.push(json!({
            "sigma1": config.sigma1,
            "sigma2": config.sigma2,
            "group2_slope": grp_fit.map(|f| f.slope),
            "group2_slope_std_err": grp_fit.map(|f| f.slope_std_err),
            "avg_slope": avg_fit.map(|f| f.slope),
            "avg_slope_std_err": avg_fit.map(|f| f.slope_std_err),
        }));
        // Cell means for the plot.
        let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
        for &(x, y) in &grp_points[ci] {
            match cells.iter_mut().find(|(cx, _)| *cx == x) {
                Some((_, v)) => v.push(y),
                None => cells.push((x, vec![y])),
            }
        }
        plot_series.push(Series {
            label: format!("group2, sigma1={:.2}, sigma2={:.2}", config.sigma1, config.sigma2),
            points: cells
                .iter()
                .map(|(x, v)| (*x, mean_std_err(v).0))
                .collect(),
        });
    }
    let plot = line_plot(
        "group-2 risk vs minority fraction",
        "lambda2",
        "cross-entropy risk",
        &plot_series,
    );
    let summary = json!({
        "kind": "risk_vs_lambda",
        "configurations": config_summaries,
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![("risk_vs_lambda.svg".into(), plot)],
    })
}

// ---------------------------------------------------------------------------
// Initialization comparison
// ---------------------------------------------------------------------------

pub fn run_init_compare(spec: &InitCompareSpec) -> Result<SweepResult> {
    const ARMS: [&str; 3] = ["tensor", "local", "far"];
    struct Job {
        trial: usize,
        seed: u64,
    }
    let jobs: Vec<Job> = (0..spec.trials)
        .map(|trial| Job {
            trial,
            seed: derive_seed(spec.seed, 0x1c6a, trial as u64),
        })
        .collect();

    struct ArmOutcome {
        init_rel_error: f64,
        converged: bool,
        final_aligned_error: f64,
        final_grad_norm: f64,
        wall_secs: f64,
    }
    let results: Vec<Result<Vec<ArmOutcome>>> = jobs
        .par_iter()
        .map(|job| {
            let psi = two_group_isotropic(spec.d, 0.5, spec.mu, 1.0, -spec.mu, 1.0)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x7ea0, 0));
            let teacher =
                TeacherModel::random_uniform(spec.d, spec.k, spec.teacher_scale, &mut rng)?;
            let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0xda7a, 0));
            let data = Dataset::generate(&psi, &teacher, spec.n, &mut data_rng)?;
            let w_norm = teacher.weights().norm();

            let mut outcomes = Vec::with_capacity(ARMS.len());
            for (ai, arm) in ARMS.iter().enumerate() {
                let started = std::time::Instant::now();
                let w0 = match *arm {
                    "tensor" => {
                        let cfg = TensorInitConfig {
                            restarts: spec.tensor_restarts,
                            power_iters: spec.tensor_power_iters,
                            probe_seed: derive_seed(job.seed, 0xa1fa, 7),
                            ..TensorInitConfig::default()
                        };
                        tensor_init(&data.samples, &psi, spec.k, &cfg)?.w0
                    }
                    "local" => {
                        let mut init_rng =
                            ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, ai as u64));
                        local_random_init(teacher.weights(), spec.local_radius, &mut init_rng)
                    }
                    _ => {
                        let mut init_rng =
                            ChaCha8Rng::seed_from_u64(derive_seed(job.seed, 0x1217, ai as u64));
                        DMatrix::from_fn(spec.d, spec.k, |_, _| {
                            init_rng.sample::<f64, _>(rand_distr::StandardNormal) * spec.far_std
                        })
                    }
                };
                let init_rel_error =
                    aligned_error(&w0, teacher.weights())?.distance / w_norm;
                let cfg = train_config(&spec.train, derive_seed(job.seed, 0x7261, ai as u64), &psi);
                let outcome = match gd_train(&w0, &data, &cfg, teacher.weights(), &psi) {
                    Ok(trace) => {
                        let grad_norm = empirical_grad(&trace.final_weights, &data)?.norm();
                        ArmOutcome {
                            init_rel_error,
                            converged: grad_norm <= spec.grad_tol,
                            final_aligned_error: *trace.aligned_error.last().unwrap(),
                            final_grad_norm: grad_norm,
                            wall_secs: started.elapsed().as_secs_f64(),
                        }
                    }
                    Err(Error::Diverged { .. }) => ArmOutcome {
                        init_rel_error,
                        converged: false,
                        final_aligned_error: f64::NAN,
                        final_grad_norm: f64::NAN,
                        wall_secs: started.elapsed().as_secs_f64(),
                    },
                    Err(e) => return Err(e),
                };
                outcomes.push(outcome);
            }
            Ok(outcomes)
        })
        .collect();

    let header = vec![
        "trial",
        "arm",
        "seed",
        "init_rel_error",
        "converged",
        "final_aligned_error",
        "final_grad_norm",
    ];
    let mut rows = Vec::new();
    let mut per_arm: Vec<Vec<&ArmOutcome>> = vec![Vec::new(); ARMS.len()];
    let mut all: Vec<Vec<ArmOutcome>> = Vec::with_capacity(jobs.len());
    for res in results {
        all.push(res?);
    }
    for (job, outcomes) in jobs.iter().zip(&all) {
        for (ai, arm) in ARMS.iter().enumerate() {
            let o = &outcomes[ai];
            per_arm[ai].push(o);
            rows.push(vec![
                Field::UInt(job.trial as u64),
                Field::Str((*arm).into()),
                Field::UInt(job.seed),
                Field::Float(o.init_rel_error),
                Field::Bool(o.converged),
                Field::Float(o.final_aligned_error),
                Field::Float(o.final_grad_norm),
            ]);
        }
    }

    let arm_summary: Vec<serde_json::Value> = ARMS
        .iter()
        .enumerate()
        .map(|(ai, arm)| {
            let outs = &per_arm[ai];
            let init: Vec<f64> = outs.iter().map(|o| o.init_rel_error).collect();
            let final_err: Vec<f64> = outs
                .iter()
                .filter(|o| o.final_aligned_error.is_finite())
                .map(|o| o.final_aligned_error)
                .collect();
            // Wall times live only in the summary; the CSV stays
            // byte-deterministic for a fixed spec and seed.
            let wall: Vec<f64> = outs.iter().map(|o| o.wall_secs).collect();
            json!({
                "arm": arm,
                "median_init_rel_error": median(&init),
                "median_final_aligned_error": if final_err.is_empty() { f64::NAN } else { median(&final_err) },
                "all_converged": outs.iter().all(|o| o.converged),
                "any_converged": outs.iter().any(|o| o.converged),
                "median_wall_secs": median(&wall),
            })
        })
        .collect();

    let summary = json!({
        "kind": "init_compare",
        "arms": arm_summary,
    });
    Ok(SweepResult {
        header,
        rows,
        summary,
        plots: vec![],
    })
}
