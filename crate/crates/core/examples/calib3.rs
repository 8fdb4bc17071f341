use groupmix::sweep::runner::*;
use groupmix::sweep::spec::*;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let has = |s: &str| args.is_empty() || args.iter().any(|w| w == s);
    if has("sigma") {
        for seed in [901u64, 902] {
            let spec = RiskSweepSpec {
                values: vec![0.5, 0.707, 1.0, 1.414, 2.0],
                n: 1000, trials: 12, seed,
                train: TrainSpec { iterations: 6000, step_scale: 8.0, stop_movement: Some(1e-8), ..TrainSpec::default() },
                ..RiskSweepSpec::sigma_default()
            };
            let res = run_risk_sweep_sigma(&spec).unwrap();
            eprintln!("sigma seed={seed}: grp={} se={} argmin={}", res.summary["group2_risk_mean"], res.summary["group2_risk_std_err"], res.summary["group2_argmin_index"]);
        }
    }
    if has("mu") {
        for seed in [903u64, 904] {
            let spec = RiskSweepSpec {
                values: vec![0.0, -0.15, -0.3, -0.45, -0.6],
                n: 1000, trials: 12, seed,
                train: TrainSpec { iterations: 6000, step_scale: 8.0, stop_movement: Some(1e-8), ..TrainSpec::default() },
                ..RiskSweepSpec::default()
            };
            let res = run_risk_sweep_mu(&spec).unwrap();
            eprintln!("mu seed={seed}: grp={} se={}", res.summary["group2_risk_mean"], res.summary["group2_risk_std_err"]);
        }
    }
    if has("lambda") {
        let spec = RiskVsLambdaSpec {
            n: 2000, trials: 10,
            train: TrainSpec { iterations: 6000, step_scale: 8.0, stop_movement: Some(1e-8), ..TrainSpec::default() },
            ..RiskVsLambdaSpec::default()
        };
        let res = run_risk_vs_lambda(&spec).unwrap();
        eprintln!("lambda: {}", serde_json::to_string_pretty(&res.summary["configurations"]).unwrap());
    }
}
