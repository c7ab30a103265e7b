use std::io::Read;
use std::path::PathBuf;

use forestmfg_core::dynamics::{
    counterfactual_panel, lognormal_tpd, reflected_tpd, simulate_endpoints, simulate_path,
    simulate_reflected, CounterfactualReport, DensitySpec, Scheme,
};
use forestmfg_core::equilibrium::{
    classify_sustainability, q_mfe_finite_horizon, q_mfe_stationary, time_grid, EquilibriumSolution,
    FiniteHorizonOptions, Sustainability,
};
use forestmfg_core::estimation::{
    fit_beliefs, fit_gamma, fit_gbm, EstimationResult, FixedParams, GammaOptions, GbmControl,
    GbmOptions, MomentSet,
};
use forestmfg_core::instrument::{
    build_exposure, read_density_path, read_transmitters_path, read_units_path,
    write_exposure_csv, InstrumentConfig, ZVariant,
};
use forestmfg_core::panel::Panel;
use forestmfg_core::plot::DensityGrid;
use forestmfg_core::{adherence_grid, BeliefPrior, G2Form, ModelParams};

use crate::config::{require_file, require_positive, RunConfig};
use crate::output::Outputs;
use crate::{
    Cli, CliError, Command, CounterfactualArgs, EquilibriumArgs, FitBeliefsArgs, FitGammaArgs,
    FitGbmArgs, InstrumentArgs, MomentsArg, SimulateArgs, VariantArg,
};

pub const DEFAULT_SEED: u64 = 42;

const DEMO_PARAMS: &str = include_str!("../data/table5.json");
const DEMO_PRIOR: &str = include_str!("../data/beta_table5.json");
const DEMO_PANEL: &str = include_str!("../data/synthetic_panel.csv");

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: Outputs,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let threads = cli.global.threads.or(cfg.threads);
    let seed = cli.global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let dir = cli
        .global
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        cfg,
        seed,
        out: Outputs::new(dir)?,
    };
    let work = move || match cli.command {
        Command::Equilibrium(a) => equilibrium(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Counterfactual(a) => counterfactual(&ctx, a),
        Command::FitBeliefs(a) => fit_beliefs_cmd(&ctx, a),
        Command::FitGbm(a) => fit_gbm_cmd(&ctx, a),
        Command::FitGamma(a) => fit_gamma_cmd(&ctx, a),
        Command::Instrument(a) => instrument(&ctx, a),
        Command::Demo => demo(&ctx),
    };
    match threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?
            .install(work),
        None => work(),
    }
}

fn input_path(flag: Option<PathBuf>, cfg: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let p = flag
        .or_else(|| cfg.clone())
        .ok_or_else(|| CliError::Input(format!("{name} is required")))?;
    require_file(&p, name)?;
    Ok(p)
}

fn verdict(s: Sustainability) -> String {
    match s {
        Sustainability::SustainableForAll => "sustainable at every adherence level".into(),
        Sustainability::UnsustainableForAll => "unsustainable at every adherence level".into(),
        Sustainability::SwitchesAt(a) => format!("switches to sustainable above a* = {a:.6}"),
    }
}

fn stationary(params: &ModelParams, prior: &BeliefPrior, n: usize) -> Result<EquilibriumSolution, CliError> {
    if n < 2 {
        return Err(CliError::Input(format!("--grid-points must be at least 2, got {n}")));
    }
    let sol = q_mfe_stationary(params, prior, &adherence_grid(n))?;
    if !sol.converged {
        return Err(CliError::NonConvergence(format!(
            "stationary equilibrium residual {:e}",
            sol.residual
        )));
    }
    for w in &sol.warnings {
        log::warn!("{w}");
    }
    Ok(sol)
}

fn print_equilibrium(sol: &EquilibriumSolution) {
    println!("median rate q~*      {:.10}", sol.q_tilde_star);
    println!("threshold mu-s^2/2   {:.10}", sol.threshold);
    println!("verdict              {}", verdict(classify_sustainability(sol)));
}

fn equilibrium(ctx: &Ctx, a: EquilibriumArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let params = cfg.params(a.model.params.as_deref())?;
    let prior = cfg.prior(a.model.prior.as_deref())?;
    let n = a.grid_points.or(cfg.grid_points).unwrap_or(101);
    let horizon = a.horizon.or(cfg.horizon);
    let opts = FiniteHorizonOptions {
        tol: require_positive(a.tol.or(cfg.tol).unwrap_or(1e-10), "--tol")?,
        max_iter: a.max_iter.or(cfg.max_iter).unwrap_or(500),
    };
    let bequest = cfg.bequest.unwrap_or_default();

    let sol = stationary(&params, &prior, n)?;
    ctx.out.plot("equilibrium.csv", &sol)?;
    ctx.out.json("equilibrium.json", &sol)?;
    print_equilibrium(&sol);

    if let Some(t) = horizon {
        let t = require_positive(t, "--horizon")?;
        let m = a.time_points.or(cfg.time_points).unwrap_or(101);
        if m < 2 {
            return Err(CliError::Input(format!("--time-points must be at least 2, got {m}")));
        }
        let fh = q_mfe_finite_horizon(&params, &prior, t, &time_grid(t, m), &sol.grid, &bequest, &opts)?;
        ctx.out.plot("finite_horizon.csv", &fh)?;
        ctx.out.json("finite_horizon.json", &fh)?;
        if !fh.converged {
            return Err(CliError::NonConvergence(format!(
                "finite-horizon fixed point after {} iterations, residual {:e}",
                fh.iterations, fh.sup_norm_residual
            )));
        }
        println!("finite horizon       T = {t}, {} iterations", fh.iterations);
    }
    Ok(())
}

/// Log-spaced abscissae so the trapezoid rule resolves the mode of a wide
/// log-normal.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let params = cfg.params(a.model.params.as_deref())?;
    let x0 = require_positive(a.x0.or(cfg.x0).unwrap_or(50.0), "--x0")?;
    let horizon = require_positive(a.horizon.or(cfg.horizon).unwrap_or(50.0), "--horizon")?;
    let dt = require_positive(a.dt.or(cfg.dt).unwrap_or(1.0), "--dt")?;
    let cap = a.cap.or(cfg.cap);
    let paths = a.paths.or(cfg.paths).unwrap_or(1);
    let rate = match a.rate.or(cfg.rate) {
        Some(r) => r,
        None => {
            let prior = cfg.prior(a.model.prior.as_deref())?;
            let adherence = a.adherence.or(cfg.adherence).unwrap_or(0.0);
            stationary(&params, &prior, 2)?.rate_at(adherence)?
        }
    };

    let traj = match cap {
        Some(s) => simulate_reflected(x0, rate, &params, s, horizon, dt, ctx.seed)?,
        None => simulate_path(x0, rate, &params, horizon, dt, ctx.seed)?,
    };
    ctx.out.plot("trajectory.csv", &traj)?;
    ctx.out.json("trajectory.json", &traj)?;

    let spec = DensitySpec::from_model(&params, rate, x0, cap)?;
    let spread = 8.0 * params.sigma * horizon.sqrt() + spec.mu_star.abs() * horizon;
    let centre = x0.ln() + spec.mu_star * horizon;
    let x = match cap {
        Some(s) => log_grid(s * (-spread - (s / x0).ln()).exp(), s, 4001),
        None => log_grid((centre - spread).exp(), (centre + spread).exp(), 4001),
    };
    let density = x
        .iter()
        .map(|&v| match cap {
            Some(_) => reflected_tpd(v, horizon, &spec),
            None => lognormal_tpd(v, horizon, &spec),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grid = DensityGrid { x, density };
    log::info!("density grid mass {:.8}", grid.trapezoid());
    ctx.out.plot("density.csv", &grid)?;

    println!("rate                 {rate:.10}");
    println!("final cover          {:.6}", traj.last());
    if paths > 1 {
        let mut ends =
            simulate_endpoints(x0, &vec![rate; paths], &params, cap, horizon, dt, ctx.seed, Scheme::ExactLogNormal)?;
        let (path, mut w) = ctx.out.create("endpoints.csv")?;
        let mut csvw = csv::Writer::from_writer(&mut w);
        let io = |e: csv::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
        csvw.write_record(["path", "value"]).map_err(io)?;
        for (i, v) in ends.iter().enumerate() {
            csvw.write_record([i.to_string(), forestmfg_core::plot::fmt_g12(*v)]).map_err(io)?;
        }
        csvw.flush().map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        ends.sort_by(f64::total_cmp);
        println!("median endpoint      {:.6} over {paths} paths", ends[paths / 2]);
    }
    Ok(())
}

fn print_counterfactual(r: &CounterfactualReport) {
    println!("years                {} -> {}", r.years.0, r.years.1);
    println!("units                {} ({} skipped)", r.rows.len(), r.missing.len());
    println!("counterfactual rate  {:.10}", r.counterfactual_rate);
    println!(
        "lost w/o adherence {:.4} km2, {:.2}%",
        r.mean_diff_km2_predicted, r.mean_diff_pct_predicted
    );
    if let (Some(km2), Some(pct)) = (r.mean_diff_km2_observed, r.mean_diff_pct_observed) {
        println!("lost (vs observed)  {km2:.4} km2, {pct:.2}%");
    }
}

fn counterfactual(ctx: &Ctx, a: CounterfactualArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let params = cfg.params(a.model.params.as_deref())?;
    let prior = cfg.prior(a.model.prior.as_deref())?;
    let input = input_path(a.input, &cfg.input, "--input")?;
    let years = (
        a.base_year.or(cfg.base_year).unwrap_or(1992),
        a.end_year.or(cfg.end_year).unwrap_or(2013),
    );
    let panel = Panel::from_csv_path(&input)?;
    let report = counterfactual_panel(&panel, &params, &prior, years)?;
    ctx.out.plot("counterfactual.csv", &report)?;
    ctx.out.json("counterfactual.json", &report)?;
    print_counterfactual(&report);
    Ok(())
}

/// Adherence shares from the `atr_share` column; blank cells are skipped.
pub fn read_shares<R: Read>(reader: R, what: &str) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{what}: {e}")))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "atr_share")
        .ok_or_else(|| CliError::Input(format!("{what}: missing column `atr_share` in header")))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Input(format!("{what}: line {line}: {e}")))?;
        let cell = rec.get(col).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| CliError::Input(format!("{what}: line {line}: atr_share `{cell}` is not a number")))?;
        out.push(v);
    }
    Ok(out)
}

fn print_estimates(r: &EstimationResult) {
    for (k, v) in &r.estimates {
        match r.std_errors.get(k) {
            Some(se) => println!("{k:<20} {v:.6} (se {se:.6})"),
            None => println!("{k:<20} {v:.6}"),
        }
    }
    println!("{:<20} {}", "observations", r.n_obs);
}

fn fit_beliefs_cmd(ctx: &Ctx, a: FitBeliefsArgs) -> Result<(), CliError> {
    let input = input_path(a.input, &ctx.cfg.input, "--input")?;
    let f = std::fs::File::open(&input)
        .map_err(|e| CliError::Input(format!("--input: cannot open {}: {e}", input.display())))?;
    let shares = read_shares(f, &input.display().to_string())?;
    let r = fit_beliefs(&shares)?;
    ctx.out.json("fit_beliefs.json", &r)?;
    print_estimates(&r);
    Ok(())
}

fn fit_gbm_cmd(ctx: &Ctx, a: FitGbmArgs) -> Result<(), CliError> {
    let input = input_path(a.input, &ctx.cfg.input, "--input")?;
    let panel = Panel::from_csv_path(&input)?;
    let opts = GbmOptions {
        n_boot: a.n_boot.or(ctx.cfg.n_boot).unwrap_or(3000),
        seed: ctx.seed,
    };
    let r = fit_gbm(&panel, GbmControl::None, &opts)?;
    ctx.out.json("fit_gbm.json", &r)?;
    print_estimates(&r);
    Ok(())
}

fn moments_from(arg: Option<MomentsArg>, cfg: Option<&str>) -> Result<MomentSet, CliError> {
    let arg = match (arg, cfg) {
        (Some(m), _) => m,
        (None, None) => MomentsArg::Mean,
        (None, Some("mean")) => MomentsArg::Mean,
        (None, Some("mean-and-variance")) => MomentsArg::MeanAndVariance,
        (None, Some(other)) => {
            return Err(CliError::Input(format!(
                "config field `moments`: expected `mean` or `mean-and-variance`, got `{other}`"
            )))
        }
    };
    Ok(match arg {
        MomentsArg::Mean => MomentSet::MeanOnly,
        MomentsArg::MeanAndVariance => MomentSet::MeanAndVariance,
    })
}

fn default_k(params: &ModelParams) -> f64 {
    match params.g2_form {
        G2Form::PowA { k2 } => k2,
        G2Form::Zero => 1.0,
    }
}

fn fit_gamma_cmd(ctx: &Ctx, a: FitGammaArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let params = cfg.params(a.model.params.as_deref())?;
    let prior = cfg.prior(a.model.prior.as_deref())?;
    let input = input_path(a.input, &cfg.input, "--input")?;
    let k = require_positive(a.k.or(cfg.k).unwrap_or_else(|| default_k(&params)), "--k")?;
    let moments = moments_from(a.moments, cfg.moments.as_deref())?;
    let opts = GammaOptions {
        tol: require_positive(a.tol.or(cfg.tol).unwrap_or(1e-9), "--tol")?,
        ..GammaOptions::default()
    };
    let panel = Panel::from_csv_path(&input)?;
    let r = fit_gamma(&panel, FixedParams::from(&params), &prior, k, moments, &opts)?;
    ctx.out.json("fit_gamma.json", &r)?;
    print_estimates(&r);
    Ok(())
}

fn variant_from(v: VariantArg) -> ZVariant {
    match v {
        VariantArg::Full => ZVariant::Full,
        VariantArg::NoHd => ZVariant::NoHd,
        VariantArg::NoRp => ZVariant::NoRp,
    }
}

fn instrument(ctx: &Ctx, a: InstrumentArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let units = input_path(a.units, &cfg.units, "--units")?;
    let transmitters = input_path(a.transmitters, &cfg.transmitters, "--transmitters")?;
    let density = input_path(a.density, &cfg.density, "--density")?;
    let defaults = InstrumentConfig::default();
    let ic = InstrumentConfig {
        lambda: require_positive(a.lambda.or(cfg.lambda).unwrap_or(defaults.lambda), "--lambda")?,
        floor_dbm: a.floor_dbm.or(cfg.floor_dbm).unwrap_or(defaults.floor_dbm),
        homeland_lat: a.homeland_lat.or(cfg.homeland_lat).unwrap_or(defaults.homeland_lat),
        homeland_lon: a.homeland_lon.or(cfg.homeland_lon).unwrap_or(defaults.homeland_lon),
        reference: defaults.reference,
    };
    let variant = a.variant.map(variant_from).or(cfg.variant).unwrap_or_default();

    let rows = build_exposure(
        &read_units_path(&units)?,
        &read_transmitters_path(&transmitters)?,
        &read_density_path(&density)?,
        &ic,
    )?;
    let (path, w) = ctx.out.create("exposure.csv")?;
    write_exposure_csv(&rows, variant, w)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    ctx.out.json("exposure.json", &rows)?;
    println!("exposure rows        {}", rows.len());
    println!("variant              {variant:?}");
    Ok(())
}

fn demo(ctx: &Ctx) -> Result<(), CliError> {
    let bundled = |e: serde_json::Error| CliError::Input(format!("bundled fixture: {e}"));
    let params: ModelParams = serde_json::from_str(DEMO_PARAMS).map_err(bundled)?;
    let prior: BeliefPrior = serde_json::from_str(DEMO_PRIOR).map_err(bundled)?;
    let panel = Panel::from_csv_reader(DEMO_PANEL.as_bytes())?;

    println!("== equilibrium (calibrated parameters)");
    let sol = stationary(&params, &prior, 101)?;
    ctx.out.plot("equilibrium.csv", &sol)?;
    ctx.out.json("equilibrium.json", &sol)?;
    println!("{:>6}  {:>12}", "a", "q_rate");
    for i in (0..sol.grid.len()).step_by(10) {
        println!("{:>6.2}  {:>12.8}", sol.grid[i], sol.q_rate[i]);
    }
    print_equilibrium(&sol);

    println!("== beliefs from the bundled panel");
    let mut shares = Vec::new();
    for (_, recs) in panel.by_unit() {
        if let Some(a) = recs.first().and_then(|r| r.atr_share) {
            shares.push(a);
        }
    }
    let beliefs = fit_beliefs(&shares)?;
    ctx.out.json("fit_beliefs.json", &beliefs)?;
    print_estimates(&beliefs);

    println!("== curvature (GMM)");
    let gamma = fit_gamma(
        &panel,
        FixedParams::from(&params),
        &prior,
        default_k(&params),
        MomentSet::MeanOnly,
        &GammaOptions::default(),
    )?;
    ctx.out.json("fit_gamma.json", &gamma)?;
    print_estimates(&gamma);

    println!("== counterfactual without adherence");
    let report = counterfactual_panel(&panel, &params, &prior, (1992, 2013))?;
    ctx.out.plot("counterfactual.csv", &report)?;
    ctx.out.json("counterfactual.json", &report)?;
    print_counterfactual(&report);
    println!("== sustainability verdict");
    println!("{}", verdict(classify_sustainability(&sol)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_skip_blanks_and_report_lines() {
        let ok = read_shares("unit_id,atr_share\nA,0.2\nB,\nC,0.5\n".as_bytes(), "t").unwrap();
        assert_eq!(ok, vec![0.2, 0.5]);
        let e = read_shares("unit_id,atr_share\nA,0.2\nB,x\n".as_bytes(), "t").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_shares("unit_id,share\nA,0.2\n".as_bytes(), "t").unwrap_err();
        assert!(e.to_string().contains("atr_share"));
    }

    #[test]
    fn bundled_fixtures_parse() {
        let p: ModelParams = serde_json::from_str(DEMO_PARAMS).unwrap();
        assert_eq!(p, ModelParams::table5());
        let q: BeliefPrior = serde_json::from_str(DEMO_PRIOR).unwrap();
        assert_eq!(q, BeliefPrior::table5());
        assert_eq!(Panel::from_csv_reader(DEMO_PANEL.as_bytes()).unwrap().records.len(), 546 * 6);
    }

    #[test]
    fn moments_precedence() {
        assert_eq!(moments_from(None, None).unwrap(), MomentSet::MeanOnly);
        assert_eq!(
            moments_from(Some(MomentsArg::MeanAndVariance), Some("mean")).unwrap(),
            MomentSet::MeanAndVariance
        );
        assert!(moments_from(None, Some("median")).is_err());
    }
}
