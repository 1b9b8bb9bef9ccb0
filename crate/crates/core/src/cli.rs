//! Command-line front end.
//!
//! Every command reads one [`ExperimentConfig`]: defaults, then an optional
//! JSON file (`--config`), then command-line flags. The master seed falls back
//! to `LDP_PARTITION_SEED` when neither the file nor a flag sets it.
//!
//! Exit codes: 0 success, 2 validation error, 3 property-check failure, 4 I/O.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::collector::{self, aggregate_fast, privatize_and_aggregate, Mode};
use crate::error::{Error, Result};
use crate::estimator::{fit_private_regression, schedules};
use crate::evaluate::{
    consistency_sweep, grid_point, laplace_tail_check, privacy_ratio_audit, variance_identity_check, LaplaceTailCheck,
    PrivacyAudit, ScheduleOverrides, SweepConfig, VarianceCheck,
};
use crate::partition::Partition;
use crate::rng::{Purpose, SeedStream};
use crate::synthdata::{make_scenario, ScenarioParams};

pub const SEED_ENV: &str = "LDP_PARTITION_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Sample sizes of the audit subcommand's checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Random tuples fed to the privacy-loss evaluation.
    pub n_tuples: usize,
    pub tail_ns: Vec<usize>,
    pub tail_eps: Vec<f64>,
    pub tail_reps: usize,
    /// Sample size of the datasets in the variance check.
    pub variance_n: u64,
    pub variance_reps: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            n_tuples: 10_000,
            tail_ns: vec![10, 100, 1000],
            tail_eps: vec![0.25, 0.5, 1.0, 1.9],
            tail_reps: 100_000,
            variance_n: 200,
            variance_reps: 5000,
        }
    }
}

/// All settings of one run. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub d: usize,
    pub scenario_params: ScenarioParams,
    pub alpha: f64,
    /// Sample sizes; `privatize` and `audit` use the first.
    pub n: Vec<u64>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub c_prime: f64,
    pub m_scale: f64,
    pub r_scale: f64,
    pub overrides: ScheduleOverrides,
    pub noiseless: bool,
    pub n_test: usize,
    pub out: Option<PathBuf>,
    /// Master seed.
    pub seed: Option<u64>,
    pub jobs: usize,
    /// Published dataset read by `estimate` and `check`.
    pub input: Option<PathBuf>,
    /// Threshold constant for `estimate`; defaults to the schedule value.
    pub c_threshold: Option<f64>,
    pub audit: AuditConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: "lipschitz-uniform".into(),
            d: 1,
            scenario_params: ScenarioParams::default(),
            alpha: 2.0,
            n: vec![4096],
            seeds: vec![0],
            mode: Mode::Fast,
            c_prime: 1.0,
            m_scale: 1.0,
            r_scale: 1.0,
            overrides: ScheduleOverrides::default(),
            noiseless: false,
            n_test: 100_000,
            out: None,
            seed: None,
            jobs: 1,
            input: None,
            c_threshold: None,
            audit: AuditConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            scenario: self.scenario.clone(),
            d: self.d,
            scenario_params: self.scenario_params,
            alpha: self.alpha,
            ns: self.n.clone(),
            seeds: self.seeds.clone(),
            mode: self.mode,
            c_prime: self.c_prime,
            m_scale: self.m_scale,
            r_scale: self.r_scale,
            overrides: self.overrides,
            n_test: self.n_test,
            master_seed: self.master_seed(),
            noiseless: self.noiseless,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        if let Some(c) = self.c_threshold {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::invalid(format!("c_threshold must be finite and >= 0, got {c}")));
            }
        }
        self.sweep_config().validate()
    }
}

#[derive(Debug, Parser)]
#[command(name = "ldp-partition", version, about = "Locally private partitioning regression: privatise, estimate, sweep, audit")]
pub struct Cli {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print the resolved config as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset, privatise it and publish the aggregate (CSV + JSON sidecar).
    Privatize(Flags),
    /// Fit the private regression estimate from a published aggregate and export it.
    Estimate(Flags),
    /// Run the consistency sweep over sample sizes and seeds.
    Sweep(Flags),
    /// Check the privacy-loss bound, the Laplace tail bound and the variance identity.
    Audit(Flags),
    /// Validate the config (and the published aggregate given by --input, if any).
    Check(Flags),
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Privatize(f) | Command::Estimate(f) | Command::Sweep(f) | Command::Audit(f) | Command::Check(f) => f,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config key of
/// the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Scenario: lipschitz-uniform, heavytail-mixture or classification-smooth.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Feature dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Privacy budget alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sample size, or a comma-separated increasing list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    /// Comma-separated seed indices.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Aggregation path: faithful or fast.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Constant c' in h_n = c' n^{-1/(2(d+1))}.
    #[arg(long)]
    pub c_prime: Option<f64>,
    /// Truncation schedule M_n = m_scale sqrt(ln n).
    #[arg(long)]
    pub m_scale: Option<f64>,
    /// Ball radius schedule r_n = r_scale ln(1 + n).
    #[arg(long)]
    pub r_scale: Option<f64>,
    /// Fixed cell width, replacing the schedule.
    #[arg(long)]
    pub h: Option<f64>,
    /// Fixed threshold constant c, replacing the schedule.
    #[arg(long)]
    pub c: Option<f64>,
    /// Fixed truncation level M, replacing the schedule.
    #[arg(long)]
    pub m_trunc: Option<f64>,
    /// Fixed ball radius, replacing the schedule.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Noise scale on occupancy indicators (bypasses calibration).
    #[arg(long)]
    pub sigma_w: Option<f64>,
    /// Noise scale on responses (bypasses calibration).
    #[arg(long)]
    pub sigma_z: Option<f64>,
    /// No noise, no truncation, threshold ln n / (n h^d).
    #[arg(long)]
    pub noiseless: bool,
    /// Atom weight of heavytail-mixture.
    #[arg(long)]
    pub atom_weight: Option<f64>,
    /// Response noise half-width of lipschitz-uniform.
    #[arg(long)]
    pub noise_half_width: Option<f64>,
    /// Monte-Carlo design draws for risk evaluation.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Output path (CSV; JSON companions share its stem).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (falls back to $LDP_PARTITION_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Published aggregate CSV to read.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Threshold constant for `estimate`.
    #[arg(long)]
    pub c_threshold: Option<f64>,
    /// Audit: random tuples for the privacy-loss check.
    #[arg(long)]
    pub audit_tuples: Option<usize>,
    /// Audit: replicates per tail-bound grid point.
    #[arg(long)]
    pub audit_tail_reps: Option<usize>,
    /// Audit: dataset size for the variance check.
    #[arg(long)]
    pub audit_variance_n: Option<u64>,
    /// Audit: replicates for the variance check.
    #[arg(long)]
    pub audit_variance_reps: Option<usize>,
}

impl Flags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        set(&mut cfg.scenario, &self.scenario);
        set(&mut cfg.d, &self.d);
        set(&mut cfg.alpha, &self.alpha);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.seeds, &self.seeds);
        set(&mut cfg.mode, &self.mode);
        set(&mut cfg.c_prime, &self.c_prime);
        set(&mut cfg.m_scale, &self.m_scale);
        set(&mut cfg.r_scale, &self.r_scale);
        set_opt(&mut cfg.overrides.h, &self.h);
        set_opt(&mut cfg.overrides.c, &self.c);
        set_opt(&mut cfg.overrides.m_trunc, &self.m_trunc);
        set_opt(&mut cfg.overrides.radius, &self.radius);
        set_opt(&mut cfg.overrides.sigma_w, &self.sigma_w);
        set_opt(&mut cfg.overrides.sigma_z, &self.sigma_z);
        if self.noiseless {
            cfg.noiseless = true;
        }
        set(&mut cfg.scenario_params.atom_weight, &self.atom_weight);
        set(&mut cfg.scenario_params.noise_half_width, &self.noise_half_width);
        set(&mut cfg.n_test, &self.n_test);
        set_opt(&mut cfg.out, &self.out);
        set_opt(&mut cfg.seed, &self.seed);
        set(&mut cfg.jobs, &self.jobs);
        set_opt(&mut cfg.input, &self.input);
        set_opt(&mut cfg.c_threshold, &self.c_threshold);
        set(&mut cfg.audit.n_tuples, &self.audit_tuples);
        set(&mut cfg.audit.tail_reps, &self.audit_tail_reps);
        set(&mut cfg.audit.variance_n, &self.audit_variance_n);
        set(&mut cfg.audit.variance_reps, &self.audit_variance_reps);
    }
}

/// Defaults, then the config file contents, then flags, then the seed
/// fallback from the environment.
pub fn resolve_config(file: Option<&str>, flags: &Flags, env_seed: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match file {
        Some(text) => serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?,
        None => ExperimentConfig::default(),
    };
    flags.apply(&mut cfg);
    if cfg.seed.is_none() {
        if let Some(s) = env_seed {
            let seed = s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
            cfg.seed = Some(seed);
        }
    }
    if cfg.seed.is_none() {
        cfg.seed = Some(0);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// What a command produced: report lines for stdout and whether every
/// property check passed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn ok(lines: Vec<String>) -> Self {
        Outcome { lines, passed: true }
    }
}

fn out_path(cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Timestamp for the sidecar; honours `SOURCE_DATE_EPOCH` for reproducible output.
fn created_utc() -> Option<String> {
    let ts = match std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse::<i64>().ok()) {
        Some(secs) => chrono::DateTime::from_timestamp(secs, 0)?,
        None => chrono::Utc::now(),
    };
    Some(ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Generate the first `(n, seed)` grid point's data, privatise it and publish.
pub fn cmd_privatize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sweep = cfg.sweep_config();
    let (n, seed) = (cfg.n[0], cfg.seeds[0]);
    let scenario = make_scenario(&cfg.scenario, cfg.d, &cfg.scenario_params)?;
    let gp = grid_point(&sweep, n, seed)?;
    let partition = Partition::new(gp.spec)?;
    let data = scenario.sample_xy(&mut gp.stream.rng(Purpose::Data, 0), n as usize);
    let agg = match cfg.mode {
        Mode::Fast => aggregate_fast(&partition, &gp.params, &data, &mut gp.stream.rng(Purpose::Aggregate, 0))?,
        Mode::Faithful => privatize_and_aggregate(&partition, &gp.params, &data, &gp.stream)?,
    }
    .with_seed(cfg.master_seed());
    let path = out_path(cfg, "aggregate.csv");
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    collector::publish(&agg, &path, created_utc())?;
    Ok(Outcome::ok(vec![format!(
        "published {} cells (n={n}, h={}, radius={}, alpha={}) to {}",
        agg.len(),
        gp.spec.h,
        gp.spec.radius,
        gp.params.alpha,
        path.display()
    )]))
}

/// Load a published aggregate, fit the estimate, export `j,cell_coords,value`.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let input = cfg.input.as_ref().ok_or_else(|| Error::invalid("estimate needs --input"))?;
    let agg = collector::load(input)?;
    let c = match cfg.c_threshold {
        Some(c) => c,
        None if agg.params.is_noiseless() => {
            let nf = agg.n as f64;
            nf.ln() / (nf * agg.spec().cell_volume())
        }
        None => schedules((agg.n as u64).max(2), agg.spec().d, cfg.c_prime, cfg.m_scale, cfg.r_scale)?.c,
    };
    let est = fit_private_regression(&agg, c)?;
    let path = out_path(cfg, "estimate.csv");
    write_file(&path, &est.to_csv())?;
    let kept = est.values().iter().filter(|v| **v != 0.0).count();
    Ok(Outcome::ok(vec![format!(
        "estimate over {} cells ({kept} non-zero, c={c}) written to {}",
        est.values().len(),
        path.display()
    )]))
}

/// Run the sweep; write the per-row CSV and a per-n JSON summary next to it.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sweep_cfg = cfg.sweep_config();
    let result = consistency_sweep(&sweep_cfg, cfg.jobs)?;
    let path = out_path(cfg, "sweep.csv");
    write_file(&path, &result.to_csv())?;
    write_file(&path.with_extension("json"), &result.summary_json(&sweep_cfg)?)?;
    let mut lines: Vec<String> = result
        .summary()
        .iter()
        .map(|s| format!("n={:<8} median risk {:.6e} (min {:.3e}, max {:.3e})", s.n, s.median_risk, s.min_risk, s.max_risk))
        .collect();
    if let Some(slope) = result.loglog_slope() {
        lines.push(format!("log-log slope {slope:.4}"));
    }
    lines.push(format!("rows written to {}", path.display()));
    Ok(Outcome::ok(lines))
}

/// Full audit report, serialised to the `--out` JSON when given.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub privacy: PrivacyAudit,
    pub calibration_gap: f64,
    pub laplace_tail: Vec<LaplaceTailCheck>,
    pub variance: VarianceCheck,
    pub passed: bool,
}

pub fn run_audit(cfg: &ExperimentConfig) -> Result<AuditReport> {
    let sweep = cfg.sweep_config();
    let stream = SeedStream::new(cfg.master_seed());
    let scenario = make_scenario(&cfg.scenario, cfg.d, &cfg.scenario_params)?;

    let gp = grid_point(&sweep, cfg.n[0], cfg.seeds[0])?;
    let partition = Partition::new(gp.spec)?;
    let privacy = privacy_ratio_audit(&partition, &gp.params, cfg.audit.n_tuples, &mut stream.rng(Purpose::Audit, 0))?;
    let calibration_gap = if gp.params.is_noiseless() {
        0.0
    } else {
        (gp.params.privacy_loss_bound() - gp.params.alpha) / gp.params.alpha
    };

    let mut laplace_tail = Vec::new();
    for (i, &n) in cfg.audit.tail_ns.iter().enumerate() {
        for (k, &eps) in cfg.audit.tail_eps.iter().enumerate() {
            let mut rng = stream.child(i as u64, k as u64).rng(Purpose::Audit, 1);
            laplace_tail.push(laplace_tail_check(n, eps, cfg.audit.tail_reps, &mut rng)?);
        }
    }

    // The variance check draws only data and aggregation streams, never Audit ones.
    let vgp = grid_point(&sweep, cfg.audit.variance_n, cfg.seeds[0])?;
    let vpart = Partition::new(vgp.spec)?;
    let probe = scenario.sample_x(&mut stream.rng(Purpose::Audit, 2) as &mut dyn RngCore, 1);
    let cell = vgp.spec.quantise(&probe[0])?;
    let variance = variance_identity_check(
        scenario.as_ref(),
        &vpart,
        &vgp.params,
        cfg.audit.variance_n as usize,
        &cell,
        cfg.audit.variance_reps,
        cfg.mode,
        &stream,
    )?;

    let passed = privacy.pass && laplace_tail.iter().all(|c| c.pass) && variance.pass;
    Ok(AuditReport { privacy, calibration_gap, laplace_tail, variance, passed })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = run_audit(cfg)?;
    let p = &report.privacy;
    let mut lines = vec![if p.skipped {
        "PASS privacy-ratio: noiseless mechanism, nothing to bound".to_string()
    } else {
        format!(
            "{} privacy-ratio: alpha={} bound={:.12} max sampled={:.12} worst case={:.12} ({} tuples)",
            verdict(p.pass),
            p.alpha,
            p.bound,
            p.max_log_ratio,
            p.worst_case,
            p.n_tuples
        )
    }];
    for c in &report.laplace_tail {
        lines.push(format!(
            "{} laplace-tail: n={} eps={} empirical={:.6e} bound={:.6e} ({} reps)",
            verdict(c.pass),
            c.n,
            c.eps,
            c.empirical_tail,
            c.bound,
            c.n_rep
        ));
    }
    let v = &report.variance;
    lines.push(format!(
        "{} variance-identity: lhs={:.6} rhs={:.6} rel_err={:.4}",
        verdict(v.pass),
        v.lhs,
        v.rhs,
        v.rel_err
    ));
    if let Some(path) = &cfg.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_file(path, &json)?;
    }
    Ok(Outcome { lines, passed: report.passed })
}

pub fn cmd_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut lines = vec![format!("config ok: scenario {} d={} n={:?} seeds={:?}", cfg.scenario, cfg.d, cfg.n, cfg.seeds)];
    let sweep = cfg.sweep_config();
    for &n in &cfg.n {
        let gp = grid_point(&sweep, n, cfg.seeds[0])?;
        let cells = gp.spec.cell_count();
        lines.push(format!(
            "n={n}: h={:.6} c={:.6} M={:.6} r={:.6} cells={cells} condition_2d={:.6e}",
            gp.report.h, gp.c, gp.report.m_trunc, gp.report.radius, gp.report.condition_2d
        ));
        if cells > u128::from(crate::partition::DEFAULT_CELL_CAP) {
            return Err(Error::ResourceLimit { cells, cap: crate::partition::DEFAULT_CELL_CAP });
        }
    }
    if let Some(input) = &cfg.input {
        let agg = collector::load(input)?;
        lines.push(format!("{}: {} cells, n={}, schema ok", input.display(), agg.len(), agg.n));
    }
    Ok(Outcome::ok(lines))
}

pub fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match command {
        Command::Privatize(_) => cmd_privatize(cfg),
        Command::Estimate(_) => cmd_estimate(cfg),
        Command::Sweep(_) => cmd_sweep(cfg),
        Command::Audit(_) => cmd_audit(cfg),
        Command::Check(_) => cmd_check(cfg),
    }
}

/// Parse `args`, run, write the report to `out`/`err`, return the exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let file = match cli.config.as_ref().map(fs::read_to_string).transpose() {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read config: {e}");
            return EXIT_IO;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = match resolve_config(file.as_deref(), cli.command.flags(), env_seed.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    if cli.dump_config {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
        return EXIT_OK;
    }
    match execute(&cli.command, &cfg) {
        Ok(outcome) => {
            for line in &outcome.lines {
                let _ = writeln!(out, "{line}");
            }
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_env_is_a_fallback() {
        let file = r#"{"scenario": "heavytail-mixture", "alpha": 1.0, "seed": 5}"#;
        let flags = Flags { alpha: Some(0.5), ..Flags::default() };
        let cfg = resolve_config(Some(file), &flags, Some("9")).unwrap();
        assert_eq!(cfg.scenario, "heavytail-mixture");
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.seed, Some(5));

        let cfg = resolve_config(None, &Flags::default(), Some("9")).unwrap();
        assert_eq!(cfg.seed, Some(9));
        let cfg = resolve_config(None, &Flags { seed: Some(1), ..Flags::default() }, Some("9")).unwrap();
        assert_eq!(cfg.seed, Some(1));
        assert!(resolve_config(None, &Flags::default(), Some("x")).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve_config(Some(r#"{"alpah": 1.0}"#), &Flags::default(), None).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_VALIDATION);
        assert!(resolve_config(Some(r#"{"overrides": {"hh": 1.0}}"#), &Flags::default(), None).is_err());
    }

    #[test]
    fn dumped_config_round_trips() {
        let flags = Flags { n: Some(vec![100, 200]), h: Some(0.3), ..Flags::default() };
        let cfg = resolve_config(None, &flags, None).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(resolve_config(Some(&text), &Flags::default(), None).unwrap(), cfg);
    }

    #[test]
    fn validation_catches_bad_values() {
        for flags in [
            Flags { n: Some(vec![200, 100]), ..Flags::default() },
            Flags { alpha: Some(-1.0), ..Flags::default() },
            Flags { scenario: Some("nope".into()), ..Flags::default() },
            Flags { jobs: Some(0), ..Flags::default() },
            Flags { d: Some(0), ..Flags::default() },
        ] {
            assert!(resolve_config(None, &flags, None).is_err(), "{flags:?}");
        }
    }
}
