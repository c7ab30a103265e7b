use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forestmfg_core::dynamics::CounterfactualReport;
use forestmfg_core::equilibrium::{q_mfe_stationary, EquilibriumSolution, FiniteHorizonSolution};
use forestmfg_core::estimation::EstimationResult;
use forestmfg_core::{adherence_grid, BeliefPrior, ModelParams};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn cli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forestmfg"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("FORESTMFG_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn equilibrium_matches_library_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let o = cli(
        dir.path(),
        &["equilibrium", "--params", data("table5.json").to_str().unwrap(), "--prior", data("beta_table5.json").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let direct = q_mfe_stationary(&ModelParams::table5(), &BeliefPrior::table5(), &adherence_grid(101)).unwrap();
    let (header, rows) = read_csv(&dir.path().join("equilibrium.csv"));
    assert_eq!(header, ["a", "q_rate", "threshold"]);
    assert_eq!(rows.len(), 101);
    for (row, (&a, &q)) in rows.iter().zip(direct.grid.iter().zip(&direct.q_rate)) {
        assert!((row[0] - a).abs() < 1e-12);
        assert!((row[1] - q).abs() <= 1e-11 * q.abs().max(1e-3));
    }

    let text = std::fs::read_to_string(dir.path().join("equilibrium.json")).unwrap();
    let parsed: EquilibriumSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, direct);
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);
}

#[test]
fn finite_horizon_outputs_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["equilibrium", "--grid-points", "11", "--horizon", "30", "--time-points", "31"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("finite_horizon.csv"));
    assert_eq!(header, ["a", "time", "rate"]);
    assert_eq!(rows.len(), 11 * 31);
    let text = std::fs::read_to_string(dir.path().join("finite_horizon.json")).unwrap();
    let parsed: FiniteHorizonSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);
}

#[test]
fn iteration_cap_is_non_convergence() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["equilibrium", "--horizon", "50", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn fit_beliefs_recovers_fixture_truth() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["fit-beliefs", "--input", data("synthetic_beta.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: EstimationResult = json(&dir.path().join("fit_beliefs.json"));
    for (name, truth) in [("alpha", 0.553), ("beta", 2.251)] {
        let (est, se) = (r.estimates[name], r.std_errors[name]);
        assert!((est - truth).abs() <= 3.0 * se, "{name}: {est} ± {se}");
    }
}

#[test]
fn missing_file_names_the_path() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["fit-beliefs", "--input", "/no/such/shares.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/shares.csv"), "{}", stderr(&o));

    let o = cli(dir.path(), &["equilibrium", "--params", "/no/such/params.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--params") && stderr(&o).contains("/no/such/params.json"));
}

#[test]
fn unknown_flag_and_bad_values_are_input_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(dir.path(), &["equilibrium", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(cli(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let o = cli(dir.path(), &["equilibrium", "--horizon", "10", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--tol"));
    assert_eq!(cli(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = TempDir::new().unwrap();
    let shares = dir.path().join("shares.csv");
    std::fs::write(&shares, "unit_id,atr_share\nA,0.2\nB,0.3\nC,oops\n").unwrap();
    let o = cli(dir.path(), &["fit-beliefs", "--input", shares.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let panel = dir.path().join("panel.csv");
    std::fs::write(&panel, "unit_id,year,tree_area_km2,atr_share\nA,1992,10,0.1\nA,1993,-4,0.1\n").unwrap();
    let o = cli(dir.path(), &["fit-gbm", "--input", panel.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn identical_seeds_give_identical_files() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["simulate", "--adherence", "0.3", "--paths", "200", "--seed", "7"];
    for d in [&a, &b] {
        assert_eq!(cli(d.path(), &args).status.code(), Some(0));
    }
    for f in ["trajectory.csv", "trajectory.json", "density.csv", "endpoints.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let c = TempDir::new().unwrap();
    assert_eq!(cli(c.path(), &["simulate", "--adherence", "0.3", "--seed", "8"]).status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.path().join("trajectory.csv")).unwrap(),
        std::fs::read(c.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn gbm_fit_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let input = data("synthetic_panel.csv");
    for d in [&a, &b] {
        let o = cli(d.path(), &["fit-gbm", "--input", input.to_str().unwrap(), "--n-boot", "100"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(
        std::fs::read(a.path().join("fit_gbm.json")).unwrap(),
        std::fs::read(b.path().join("fit_gbm.json")).unwrap()
    );
}

#[test]
fn density_grid_integrates_to_one() {
    for extra in [&[][..], &["--cap", "80"][..]] {
        let dir = TempDir::new().unwrap();
        let mut args = vec!["simulate", "--adherence", "0.5", "--horizon", "30"];
        args.extend_from_slice(extra);
        let o = cli(dir.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let (header, rows) = read_csv(&dir.path().join("density.csv"));
        assert_eq!(header, ["x", "density"]);
        let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1])).sum();
        assert!((mass - 1.0).abs() < 1e-4, "{extra:?}: mass {mass}");
    }
}

#[test]
fn config_fields_yield_to_flags() {
    let dir = TempDir::new().unwrap();
    let sub = dir.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    std::fs::copy(data("table5.json"), sub.join("p.json")).unwrap();
    let cfg = sub.join("run.json");
    std::fs::write(&cfg, r#"{"params": "p.json", "prior": {"alpha": 2.0, "beta": 3.0}, "grid_points": 11}"#).unwrap();

    let o = cli(dir.path(), &["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sol: EquilibriumSolution = json(&dir.path().join("equilibrium.json"));
    assert_eq!(sol.grid.len(), 11);
    assert_eq!(sol.prior, BeliefPrior::new(2.0, 3.0).unwrap());

    let o = cli(
        dir.path(),
        &["equilibrium", "--config", cfg.to_str().unwrap(), "--grid-points", "21", "--prior", data("beta_table5.json").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sol: EquilibriumSolution = json(&dir.path().join("equilibrium.json"));
    assert_eq!(sol.grid.len(), 21);
    assert_eq!(sol.prior, BeliefPrior::table5());

    std::fs::write(&cfg, r#"{"grid_pints": 11}"#).unwrap();
    let o = cli(dir.path(), &["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid_pints"));
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_forestmfg"))
        .args(["equilibrium", "--grid-points", "5"])
        .env("FORESTMFG_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("equilibrium.csv").is_file());
}

#[test]
fn illustrative_curves_are_nonincreasing() {
    let dir = TempDir::new().unwrap();
    for k in [1.0, 2.0, 3.0] {
        let p = ModelParams::new(0.018, 0.05, 0.02, 1.5, forestmfg_core::G1Form::Unit, forestmfg_core::G2Form::PowA { k2: k }).unwrap();
        let pf = dir.path().join(format!("p{k}.json"));
        std::fs::write(&pf, serde_json::to_string(&p).unwrap()).unwrap();
        let o = cli(dir.path(), &["equilibrium", "--params", pf.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let (_, rows) = read_csv(&dir.path().join("equilibrium.csv"));
        assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1] + 1e-12), "k={k}");
    }
}

#[test]
fn counterfactual_on_bundled_panel() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["counterfactual", "--input", data("synthetic_panel.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: CounterfactualReport = json(&dir.path().join("counterfactual.json"));
    assert_eq!(r.years, (1992, 2013));
    assert_eq!(r.rows.len(), 546);
    assert!(r.mean_diff_km2_predicted > 0.0);
    let mut rd = csv::Reader::from_path(dir.path().join("counterfactual.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["unit", "observed", "predicted", "counterfactual", "diff_km2", "diff_pct"]);
}

#[test]
fn fit_gamma_on_bundled_panel() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["fit-gamma", "--input", data("synthetic_panel.csv").to_str().unwrap(), "--moments", "mean-and-variance"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: EstimationResult = json(&dir.path().join("fit_gamma.json"));
    assert!(r.estimates["gamma"] > 1.0);
}

#[test]
fn instrument_variants() {
    let dir = TempDir::new().unwrap();
    let base = [
        "instrument",
        "--units",
        data("units.csv").to_str().unwrap().to_owned().leak(),
        "--transmitters",
        data("transmitters.csv").to_str().unwrap().to_owned().leak(),
        "--density",
        data("density.csv").to_str().unwrap().to_owned().leak(),
    ];
    let o = cli(dir.path(), &base);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(dir.path().join("exposure.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert!(header.contains(&"instrument".to_string()), "{header:?}");
    assert_eq!(rd.records().count(), 20 * 3);

    let mut args = base.to_vec();
    args.extend(["--variant", "no-hd", "--lambda", "0.8", "--floor-dbm", "-95"]);
    let o = cli(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("NoHd"));

    args.extend(["--lambda", "-1"]);
    assert_eq!(cli(dir.path(), &args).status.code(), Some(2));
}

#[test]
fn demo_prints_pipeline_summary() {
    let dir = TempDir::new().unwrap();
    let o = cli(dir.path(), &["demo"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["== equilibrium", "q_rate", "== counterfactual", "== sustainability verdict", "unsustainable"] {
        assert!(out.contains(needle), "missing `{needle}` in\n{out}");
    }
    for f in ["equilibrium.csv", "counterfactual.csv", "fit_gamma.json"] {
        assert!(dir.path().join(f).is_file());
    }
}

#[test]
fn thread_flag_is_validated() {
    let dir = TempDir::new().unwrap();
    assert_eq!(cli(dir.path(), &["equilibrium", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(cli(dir.path(), &["equilibrium", "--threads", "2"]).status.code(), Some(0));
}
