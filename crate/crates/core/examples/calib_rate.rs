use groupmix::sweep::{run_experiment, ExperimentSpec};

fn main() {
    let t0 = std::time::Instant::now();
    let spec = ExperimentSpec::default_for("sample_complexity_grid").unwrap();
    let result = run_experiment(&spec).unwrap();
    eprintln!("rows: {}", result.rows.len());
    eprintln!("summary: {}", serde_json::to_string_pretty(&result.summary).unwrap());
    eprintln!("wall={:.1}s", t0.elapsed().as_secs_f64());
}
