//! Calibration batch for the sweep experiments.
use groupmix::sweep::runner::*;
use groupmix::sweep::spec::*;
use groupmix::util::linear_fit;

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let has = |s: &str| which.is_empty() || which.iter().any(|w| w == s);

    if has("error_vs_n") {
        let t0 = std::time::Instant::now();
        for (scale, iters) in [(4.0f64, 800usize), (8.0, 800)] {
            let spec = ErrorVsNSpec {
                trials: 10,
                train: TrainSpec { iterations: iters, step_scale: scale, stop_movement: Some(1e-9), ..TrainSpec::default() },
                ..ErrorVsNSpec::default()
            };
            let res = run_error_vs_n(&spec).unwrap();
            eprintln!("error_vs_n scale={scale} T={iters}: {} ({:.0}s)", res.summary["scaling_fit"], t0.elapsed().as_secs_f64());
            eprintln!("  means={}", res.summary["mean_aligned_error"]);
        }
    }

    if has("conv_mu") {
        let t0 = std::time::Instant::now();
        let spec = ConvergenceSweepSpec {
            trials: 8,
            train: TrainSpec { iterations: 1500, ..TrainSpec::default() },
            ..ConvergenceSweepSpec::default()
        };
        let res = run_convergence_sweep(&spec).unwrap();
        eprintln!("conv_mu: v_hat={} se={} pred={} ({:.0}s)", res.summary["median_v_hat"], res.summary["v_hat_std_err"], res.summary["median_predicted_v"], t0.elapsed().as_secs_f64());
    }

    if has("conv_sigma") {
        let t0 = std::time::Instant::now();
        let spec = ConvergenceSweepSpec {
            trials: 8,
            n: 20_000,
            train: TrainSpec { iterations: 1500, ..TrainSpec::default() },
            ..ConvergenceSweepSpec::covariance_default()
        };
        let res = run_convergence_sweep(&spec).unwrap();
        eprintln!("conv_sigma: v_hat={} se={} ({:.0}s)", res.summary["median_v_hat"], res.summary["v_hat_std_err"], t0.elapsed().as_secs_f64());
    }

    if has("conv_k") {
        let t0 = std::time::Instant::now();
        let spec = ConvergenceSweepSpec {
            trials: 8,
            train: TrainSpec { iterations: 1500, ..TrainSpec::default() },
            ..ConvergenceSweepSpec::neuron_default()
        };
        let res = run_convergence_sweep(&spec).unwrap();
        eprintln!("conv_k: v_hat={} fit={} ({:.0}s)", res.summary["median_v_hat"], res.summary["rate_law_fit"], t0.elapsed().as_secs_f64());
    }

    if has("risk_mu") {
        let t0 = std::time::Instant::now();
        let spec = RiskSweepSpec { trials: 6, train: TrainSpec { iterations: 600, step_scale: 4.0, ..TrainSpec::default() }, ..RiskSweepSpec::default() };
        let res = run_risk_sweep_mu(&spec).unwrap();
        eprintln!("risk_mu: grp={} se={} avg={} ({:.0}s)", res.summary["group2_risk_mean"], res.summary["group2_risk_std_err"], res.summary["avg_risk_mean"], t0.elapsed().as_secs_f64());
    }

    if has("risk_sigma") {
        let t0 = std::time::Instant::now();
        let spec = RiskSweepSpec { trials: 6, train: TrainSpec { iterations: 600, step_scale: 4.0, ..TrainSpec::default() }, ..RiskSweepSpec::sigma_default() };
        let res = run_risk_sweep_sigma(&spec).unwrap();
        eprintln!("risk_sigma: grp={} argmin={} avg={} ({:.0}s)", res.summary["group2_risk_mean"], res.summary["group2_argmin_index"], res.summary["avg_risk_mean"], t0.elapsed().as_secs_f64());
    }

    if has("risk_lambda") {
        let t0 = std::time::Instant::now();
        let spec = RiskVsLambdaSpec { trials: 6, train: TrainSpec { iterations: 600, step_scale: 4.0, ..TrainSpec::default() }, ..RiskVsLambdaSpec::default() };
        let res = run_risk_vs_lambda(&spec).unwrap();
        eprintln!("risk_lambda: {} ({:.0}s)", res.summary["configurations"], t0.elapsed().as_secs_f64());
    }

    if has("init_compare") {
        let t0 = std::time::Instant::now();
        let spec = InitCompareSpec { trials: 3, ..InitCompareSpec::default() };
        let res = run_init_compare(&spec).unwrap();
        eprintln!("init_compare: {} ({:.0}s)", serde_json::to_string_pretty(&res.summary).unwrap(), t0.elapsed().as_secs_f64());
    }
    let _ = linear_fit(&[0.0, 1.0], &[0.0, 1.0]);
}
