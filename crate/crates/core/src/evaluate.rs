//! Monte-Carlo risk evaluation, empirical checks of the mechanism's analytic
//! properties, and the consistency sweep.

use std::fmt::Write as _;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collector::{aggregate_fast, binned_sums, privatize_and_aggregate, Mode, PrivateAggregate};
use crate::error::{Error, Result};
use crate::estimator::{fit_private_regression, schedules, Classifier, Label, PrivateClassifier, Regressor};
use crate::mechanism::{calibrate, ldp_log_ratio, privatize_record, sample_unit_laplace, worst_case_log_ratio, PrivacyParams};
use crate::numfmt;
use crate::partition::{CellId, Partition, PartitionSpec};
use crate::rng::{Purpose, SeedStream};
use crate::synthdata::{make_scenario, Scenario, ScenarioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    L2Regression,
    ExcessClassification,
}

/// A Monte-Carlo integral over the design law with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub point_estimate: f64,
    pub std_error: f64,
    pub n_test: usize,
    pub kind: RiskKind,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// `int (m(x) - m_hat(x))^2 mu(dx)` estimated from `n_test` fresh design draws.
pub fn l2_risk(
    estimate: &dyn Regressor,
    scenario: &dyn Scenario,
    n_test: usize,
    rng: &mut dyn RngCore,
) -> Result<RiskReport> {
    if n_test == 0 {
        return Err(Error::invalid("n_test must be positive"));
    }
    let losses: Vec<f64> = scenario
        .sample_x(rng, n_test)
        .iter()
        .map(|x| (scenario.true_m(x) - estimate.predict(x)).powi(2))
        .collect();
    let (point_estimate, std_error) = mean_and_se(&losses);
    Ok(RiskReport { point_estimate, std_error, n_test, kind: RiskKind::L2Regression })
}

/// `L(g) - L* = int 1{g(x) != sign m(x)} |m(x)| mu(dx)` from fresh design draws.
pub fn excess_class_risk(
    classifier: &dyn Classifier,
    scenario: &dyn Scenario,
    n_test: usize,
    rng: &mut dyn RngCore,
) -> Result<RiskReport> {
    if !scenario.is_classification() {
        return Err(Error::WrongScenarioKind {
            scenario: scenario.name().to_string(),
            expected: "classification",
        });
    }
    if n_test == 0 {
        return Err(Error::invalid("n_test must be positive"));
    }
    let losses: Vec<f64> = scenario
        .sample_x(rng, n_test)
        .iter()
        .map(|x| {
            let m = scenario.true_m(x);
            if classifier.classify(x) != Label::sign_of(m) {
                m.abs()
            } else {
                0.0
            }
        })
        .collect();
    let (point_estimate, std_error) = mean_and_se(&losses);
    Ok(RiskReport { point_estimate, std_error, n_test, kind: RiskKind::ExcessClassification })
}

/// Outcome of one tail-bound check on the mean of unit Laplace draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceTailCheck {
    pub n: usize,
    pub eps: f64,
    pub n_rep: usize,
    pub empirical_tail: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Frequency of `|mean of n unit Laplace| >= eps` against `2 exp(-n eps^2 / 4)`.
/// Only upward violations beyond `4 sqrt(bound / n_rep)` fail.
pub fn laplace_tail_check(n: usize, eps: f64, n_rep: usize, rng: &mut dyn RngCore) -> Result<LaplaceTailCheck> {
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 2), got {eps}")));
    }
    if n == 0 || n_rep == 0 {
        return Err(Error::invalid("n and n_rep must be positive"));
    }
    let threshold = eps * n as f64;
    let mut hits = 0usize;
    for _ in 0..n_rep {
        let s: f64 = (0..n).map(|_| sample_unit_laplace(rng)).sum();
        if s.abs() >= threshold {
            hits += 1;
        }
    }
    let empirical_tail = hits as f64 / n_rep as f64;
    let bound = 2.0 * (-(n as f64) * eps * eps / 4.0).exp();
    let pass = empirical_tail <= bound + 4.0 * (bound / n_rep as f64).sqrt();
    Ok(LaplaceTailCheck { n, eps, n_rep, empirical_tail, bound, pass })
}

/// Outcome of the variance decomposition check on one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    /// `n Var(nu_tilde_j)` over the replicates.
    pub lhs: f64,
    /// `n Var(nu_j) + sigma_z^2`, with `nu_j` the noiseless binned mean of the
    /// truncated responses on the same datasets.
    pub rhs: f64,
    pub rel_err: f64,
    pub pass: bool,
}

pub const VARIANCE_REL_TOL: f64 = 0.1;

fn sample_var(v: &[f64]) -> f64 {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
}

/// Simulate `n_rep` datasets of size `n`, privatise each, and compare the two
/// sides of `n Var(nu_tilde_j) = n Var(nu_j) + sigma_z^2` on `cell`.
#[allow(clippy::too_many_arguments)]
pub fn variance_identity_check(
    scenario: &dyn Scenario,
    partition: &Partition,
    params: &PrivacyParams,
    n: usize,
    cell: &CellId,
    n_rep: usize,
    mode: Mode,
    stream: &SeedStream,
) -> Result<VarianceCheck> {
    let j = partition
        .slot(cell)
        .ok_or_else(|| Error::Precondition(format!("cell {cell} is not enumerated")))?;
    if n == 0 || n_rep < 2 {
        return Err(Error::invalid("need n >= 1 and n_rep >= 2"));
    }
    let mut private = Vec::with_capacity(n_rep);
    let mut plain = Vec::with_capacity(n_rep);
    for rep in 0..n_rep {
        let rep_stream = stream.child(rep as u64, 0);
        let data = scenario.sample_xy(&mut rep_stream.rng(Purpose::Data, 0), n);
        let (y_sum, _) = binned_sums(partition, params.m_trunc, &data)?;
        plain.push(y_sum[j] / n as f64);
        let agg = match mode {
            Mode::Fast => aggregate_fast(partition, params, &data, &mut rep_stream.rng(Purpose::Aggregate, 0))?,
            Mode::Faithful => privatize_and_aggregate(partition, params, &data, &rep_stream)?,
        };
        private.push(agg.nu_tilde[j]);
    }
    let nf = n as f64;
    let lhs = nf * sample_var(&private);
    let rhs = nf * sample_var(&plain) + params.sigma_z * params.sigma_z;
    let rel_err = if rhs > 0.0 {
        (lhs - rhs).abs() / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(VarianceCheck { lhs, rhs, rel_err, pass: rel_err <= VARIANCE_REL_TOL })
}

/// Result of sampling the privacy-loss random variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAudit {
    #[serde(with = "crate::numfmt::ext_f64")]
    pub alpha: f64,
    /// `2^{3/2}(1/sigma_w + M/sigma_z)` for the audited parameters.
    #[serde(with = "crate::numfmt::ext_f64")]
    pub bound: f64,
    pub max_log_ratio: f64,
    pub worst_case: f64,
    pub n_tuples: usize,
    /// Noiseless parameters have no density; nothing is sampled.
    pub skipped: bool,
    pub pass: bool,
}

pub const PRIVACY_TOL: f64 = 1e-9;

fn point_in_cell(spec: &PartitionSpec, cell: &CellId, rng: &mut dyn RngCore) -> Vec<f64> {
    // Stay clear of the upper faces so rounding cannot push the point out.
    cell.coords()
        .iter()
        .map(|&k| (k as f64 + rng.random_range(0.0..0.999)) * spec.h)
        .collect()
}

/// Evaluate the exact log density ratio on `n_tuples` random
/// `(w, z, x, y, x', y')`: half the outputs are genuine mechanism draws, half
/// adversarial; `x'` shares the cell of `x` half the time; a tenth of the
/// inputs lie outside the ball. Also evaluates the worst-case construction.
/// Passes when both stay within `alpha + 1e-9`.
pub fn privacy_ratio_audit(
    partition: &Partition,
    params: &PrivacyParams,
    n_tuples: usize,
    rng: &mut dyn RngCore,
) -> Result<PrivacyAudit> {
    if params.is_noiseless() {
        return Ok(PrivacyAudit {
            alpha: params.alpha,
            bound: params.privacy_loss_bound(),
            max_log_ratio: 0.0,
            worst_case: 0.0,
            n_tuples: 0,
            skipped: true,
            pass: true,
        });
    }
    let m = params.m_trunc;
    if !m.is_finite() {
        return Err(Error::Precondition("auditing needs a finite truncation level".into()));
    }
    let spec = partition.spec();
    let cells = partition.cells();
    let n_cells = cells.len();
    let far = CellId::new(vec![(spec.radius / spec.h).ceil() as i64 + 2; spec.d]);
    let pick_cell = |rng: &mut dyn RngCore| -> CellId {
        if rng.random::<f64>() < 0.1 {
            far.clone()
        } else {
            cells[rng.random_range(0..n_cells)].clone()
        }
    };
    let pick_y = |rng: &mut dyn RngCore| -> f64 {
        match rng.random_range(0..10) {
            0 => m,
            1 => -m,
            _ => rng.random_range(-m..=m),
        }
    };

    let mut max_log_ratio = f64::NEG_INFINITY;
    for _ in 0..n_tuples {
        let cell = pick_cell(rng);
        let x = point_in_cell(spec, &cell, rng);
        let x_alt = if rng.random::<bool>() { point_in_cell(spec, &cell, rng) } else { point_in_cell(spec, &pick_cell(rng), rng) };
        let (y, y_alt) = (pick_y(rng), pick_y(rng));
        let (w, z) = if rng.random::<bool>() {
            let rec = privatize_record(partition, params, &x, y, rng)?;
            (rec.w, rec.z)
        } else {
            let w = (0..n_cells)
                .map(|_| match rng.random_range(0..3) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random_range(-2.0..3.0),
                })
                .collect();
            let z = (0..n_cells).map(|_| rng.random_range(-2.0 * m..2.0 * m)).collect();
            (w, z)
        };
        let r = ldp_log_ratio(partition, params, &w, &z, (&x, y), (&x_alt, y_alt))?;
        max_log_ratio = max_log_ratio.max(r);
    }
    let worst_case = worst_case_log_ratio(partition, params)?;
    let limit = params.alpha + PRIVACY_TOL;
    Ok(PrivacyAudit {
        alpha: params.alpha,
        bound: params.privacy_loss_bound(),
        max_log_ratio,
        worst_case,
        n_tuples,
        skipped: false,
        pass: max_log_ratio <= limit && worst_case <= limit,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
}

impl KsTest {
    /// Asymptotic critical value `sqrt(-ln(level/2)/2) sqrt((n+m)/(nm))`.
    pub fn critical_value(&self, level: f64) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (-(level / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
    }

    pub fn rejects(&self, level: f64) -> bool {
        self.statistic > self.critical_value(level)
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut k) = (0, 0);
    let mut d = 0.0f64;
    while i < n && k < m {
        let v = a[i].min(b[k]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while k < m && b[k] <= v {
            k += 1;
        }
        d = d.max((i as f64 / n as f64 - k as f64 / m as f64).abs());
    }
    KsTest { statistic: d, n, m }
}

/// Explicit values that replace the schedule formulas. The noise scales
/// bypass calibration entirely; they exist for audits of mis-set mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleOverrides {
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub m_trunc: Option<f64>,
    pub radius: Option<f64>,
    pub sigma_w: Option<f64>,
    pub sigma_z: Option<f64>,
}

/// One consistency experiment: a grid of sample sizes and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenario: String,
    pub d: usize,
    pub scenario_params: ScenarioParams,
    pub alpha: f64,
    pub ns: Vec<u64>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub c_prime: f64,
    pub m_scale: f64,
    pub r_scale: f64,
    pub overrides: ScheduleOverrides,
    pub n_test: usize,
    pub master_seed: u64,
    /// Run without noise, without truncation and with `c = ln n / (n h^d)`,
    /// which reproduces the non-private partitioning estimate.
    pub noiseless: bool,
}

impl SweepConfig {
    pub fn new(scenario: &str, d: usize, alpha: f64, ns: Vec<u64>, seeds: Vec<u64>) -> Self {
        SweepConfig {
            scenario: scenario.to_string(),
            d,
            scenario_params: ScenarioParams::default(),
            alpha,
            ns,
            seeds,
            mode: Mode::Fast,
            c_prime: 1.0,
            m_scale: 1.0,
            r_scale: 1.0,
            overrides: ScheduleOverrides::default(),
            n_test: 100_000,
            master_seed: 0,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sweep needs at least one sample size and one seed"));
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sample sizes must be strictly increasing"));
        }
        if self.n_test == 0 {
            return Err(Error::invalid("n_test must be positive"));
        }
        if !self.noiseless && !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        make_scenario(&self.scenario, self.d, &self.scenario_params)?;
        schedules(self.ns[0], self.d, self.c_prime, self.m_scale, self.r_scale)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub seed: u64,
    pub h: f64,
    pub c: f64,
    pub m_trunc: f64,
    pub radius: f64,
    pub risk: f64,
    pub std_error: f64,
    pub condition_2d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub n: u64,
    pub median_risk: f64,
    pub min_risk: f64,
    pub max_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub kind: RiskKind,
    pub rows: Vec<SweepRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

impl SweepResult {
    /// Per-`n` median, min and max risk across seeds, in increasing `n`.
    pub fn summary(&self) -> Vec<SweepSummaryRow> {
        let mut ns: Vec<u64> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let risks: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.risk).collect();
                SweepSummaryRow {
                    n,
                    median_risk: median(&risks),
                    min_risk: risks.iter().copied().fold(f64::INFINITY, f64::min),
                    max_risk: risks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect()
    }

    pub fn medians(&self) -> Vec<(u64, f64)> {
        self.summary().into_iter().map(|s| (s.n, s.median_risk)).collect()
    }

    /// Least-squares slope of log median risk against log n.
    pub fn loglog_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .medians()
            .into_iter()
            .filter(|&(_, r)| r > 0.0)
            .map(|(n, r)| ((n as f64).ln(), r.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,seed,h_n,c_n,m_n,r_n,risk,std_error,condition_2d\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                r.seed,
                numfmt::exact(r.h),
                numfmt::exact(r.c),
                numfmt::exact(r.m_trunc),
                numfmt::exact(r.radius),
                numfmt::exact(r.risk),
                numfmt::exact(r.std_error),
                numfmt::exact(r.condition_2d),
            );
        }
        out
    }

    pub fn summary_json(&self, config: &SweepConfig) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'a str,
            d: usize,
            #[serde(with = "numfmt::ext_f64")]
            alpha: f64,
            mode: Mode,
            noiseless: bool,
            master_seed: u64,
            kind: RiskKind,
            per_n: Vec<SweepSummaryRow>,
            loglog_slope: Option<f64>,
        }
        let mut s = serde_json::to_string_pretty(&Summary {
            scenario: &self.scenario,
            d: config.d,
            alpha: if config.noiseless { f64::INFINITY } else { config.alpha },
            mode: config.mode,
            noiseless: config.noiseless,
            master_seed: config.master_seed,
            kind: self.kind,
            per_n: self.summary(),
            loglog_slope: self.loglog_slope(),
        })?;
        s.push('\n');
        Ok(s)
    }
}

/// Everything needed to rerun one grid point by hand.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub stream: SeedStream,
    pub spec: PartitionSpec,
    pub params: PrivacyParams,
    pub c: f64,
    pub report: crate::estimator::ScheduleReport,
}

/// Resolve schedules, overrides and the seed stream for `(n, seed)`.
pub fn grid_point(config: &SweepConfig, n: u64, seed: u64) -> Result<GridPoint> {
    let report = schedules(n, config.d, config.c_prime, config.m_scale, config.r_scale)?;
    let o = &config.overrides;
    let h = o.h.unwrap_or(report.h);
    let radius = o.radius.unwrap_or(report.radius);
    let m_trunc = o.m_trunc.unwrap_or(report.m_trunc);
    let spec = PartitionSpec::new(h, config.d, radius)?;
    let (params, c) = if config.noiseless {
        let nf = n as f64;
        (PrivacyParams::noiseless(f64::INFINITY)?, nf.ln() / (nf * spec.cell_volume()))
    } else {
        let calibrated = calibrate(config.alpha, m_trunc)?;
        let params = PrivacyParams::new(
            config.alpha,
            o.sigma_w.unwrap_or(calibrated.sigma_w),
            o.sigma_z.unwrap_or(calibrated.sigma_z),
            m_trunc,
        )?;
        (params, o.c.unwrap_or(report.c))
    };
    let report = crate::estimator::ScheduleReport { h, c, m_trunc: params.m_trunc, radius, ..report };
    Ok(GridPoint { stream: SeedStream::new(config.master_seed).child(n, seed), spec, params, c, report })
}

/// Generate, privatise, aggregate, fit and score one grid point.
pub fn run_grid_point(config: &SweepConfig, scenario: &dyn Scenario, n: u64, seed: u64) -> Result<SweepRow> {
    let gp = grid_point(config, n, seed)?;
    let partition = Partition::new(gp.spec)?;
    let data = scenario.sample_xy(&mut gp.stream.rng(Purpose::Data, 0), n as usize);
    let agg: PrivateAggregate = match config.mode {
        Mode::Fast => aggregate_fast(&partition, &gp.params, &data, &mut gp.stream.rng(Purpose::Aggregate, 0))?,
        Mode::Faithful => privatize_and_aggregate(&partition, &gp.params, &data, &gp.stream)?,
    };
    let mut test_rng = gp.stream.rng(Purpose::TestPoints, 0);
    let risk = if scenario.is_classification() {
        excess_class_risk(&PrivateClassifier::from_aggregate(&agg), scenario, config.n_test, &mut test_rng)?
    } else {
        l2_risk(&fit_private_regression(&agg, gp.c)?, scenario, config.n_test, &mut test_rng)?
    };
    Ok(SweepRow {
        n,
        seed,
        h: gp.report.h,
        c: gp.c,
        m_trunc: gp.report.m_trunc,
        radius: gp.report.radius,
        risk: risk.point_estimate,
        std_error: risk.std_error,
        condition_2d: gp.report.condition_2d,
    })
}

/// Run every `(n, seed)` grid point on up to `jobs` threads. Rows come back
/// in grid order (n outer, seed inner) and do not depend on `jobs`.
pub fn consistency_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepResult> {
    config.validate()?;
    let scenario = make_scenario(&config.scenario, config.d, &config.scenario_params)?;
    let grid: Vec<(u64, u64)> =
        config.ns.iter().flat_map(|&n| config.seeds.iter().map(move |&s| (n, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        grid.par_iter()
            .map(|&(n, seed)| run_grid_point(config, scenario.as_ref(), n, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let kind = if scenario.is_classification() { RiskKind::ExcessClassification } else { RiskKind::L2Regression };
    Ok(SweepResult { scenario: config.scenario.clone(), kind, rows })
}
