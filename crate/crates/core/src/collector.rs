//! Aggregation of private records into the publishable per-cell table, and
//! the on-disk format of that table.
//!
//! The published dataset is a CSV file
//!
//! ```text
//! j,cell_coords,nu_tilde,mu_tilde
//! 1,"-1",2.5000000000000000e-01,1.0000000000000000e+00
//! ```
//!
//! plus a JSON sidecar (same path, `.json` extension) carrying the sample
//! size, partition geometry and privacy parameters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{privatize_record, truncate, PrivacyParams, PrivateRecord};
use crate::numfmt::{self, ext_f64};
use crate::partition::{CellId, Partition, PartitionSpec};
use crate::rng::{Purpose, SeedStream};
use crate::synthdata::Observation;

/// How the per-cell noise was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every individual privatises every cell; the collector averages.
    #[default]
    Faithful,
    /// The summed noise per cell is drawn directly.
    Fast,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Mode::Faithful),
            "fast" => Ok(Mode::Fast),
            other => Err(Error::invalid(format!("unknown mode {other:?} (expected faithful or fast)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Faithful => "faithful",
            Mode::Fast => "fast",
        })
    }
}

/// Summation strategy for the faithful path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// Plain left-to-right accumulation in record order.
    #[default]
    Naive,
    /// Kahan-compensated accumulation, same order.
    Compensated,
}

/// The published dataset: per-cell private averages `nu_tilde` (responses)
/// and `mu_tilde` (occupancy), in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateAggregate {
    pub n: usize,
    pub partition: Partition,
    pub params: PrivacyParams,
    pub nu_tilde: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub mode: Mode,
    pub seed: Option<u64>,
}

impl PrivateAggregate {
    pub fn spec(&self) -> &PartitionSpec {
        self.partition.spec()
    }

    pub fn len(&self) -> usize {
        self.nu_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu_tilde.is_empty()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn check_lengths(&self) -> Result<()> {
        let n_cells = self.partition.len();
        for v in [&self.nu_tilde, &self.mu_tilde] {
            if v.len() != n_cells {
                return Err(Error::LengthMismatch { expected: n_cells, found: v.len() });
            }
        }
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Per-cell means of the records' `z` and `w`, summed in record order.
pub fn aggregate_faithful(
    records: &[PrivateRecord],
    partition: &Partition,
    params: &PrivacyParams,
) -> Result<PrivateAggregate> {
    aggregate_faithful_with(records, partition, params, Summation::Naive)
}

pub fn aggregate_faithful_with(
    records: &[PrivateRecord],
    partition: &Partition,
    params: &PrivacyParams,
    summation: Summation,
) -> Result<PrivateAggregate> {
    if records.is_empty() {
        return Err(Error::invalid("cannot aggregate zero records"));
    }
    let n_cells = partition.len();
    for r in records {
        for v in [&r.w, &r.z] {
            if v.len() != n_cells {
                return Err(Error::LengthMismatch { expected: n_cells, found: v.len() });
            }
        }
    }
    let n = records.len();
    let (nu_sum, mu_sum) = match summation {
        Summation::Naive => {
            let mut nu = vec![0.0; n_cells];
            let mut mu = vec![0.0; n_cells];
            for r in records {
                for j in 0..n_cells {
                    nu[j] += r.z[j];
                    mu[j] += r.w[j];
                }
            }
            (nu, mu)
        }
        Summation::Compensated => {
            let mut nu = vec![Kahan::default(); n_cells];
            let mut mu = vec![Kahan::default(); n_cells];
            for r in records {
                for j in 0..n_cells {
                    nu[j].add(r.z[j]);
                    mu[j].add(r.w[j]);
                }
            }
            (nu.iter().map(|k| k.sum).collect(), mu.iter().map(|k| k.sum).collect())
        }
    };
    let nf = n as f64;
    Ok(PrivateAggregate {
        n,
        partition: partition.clone(),
        params: *params,
        nu_tilde: nu_sum.into_iter().map(|s| s / nf).collect(),
        mu_tilde: mu_sum.into_iter().map(|s| s / nf).collect(),
        mode: Mode::Faithful,
        seed: None,
    })
}

/// Privatise each observation with its own substream (`Privatize`, index
/// `i`) and fold it into the running sums straight away. Bit-identical to
/// collecting the records and calling [`aggregate_faithful`], without holding
/// `n x N` values in memory.
pub fn privatize_and_aggregate(
    partition: &Partition,
    params: &PrivacyParams,
    data: &[Observation],
    stream: &SeedStream,
) -> Result<PrivateAggregate> {
    if data.is_empty() {
        return Err(Error::invalid("cannot aggregate zero observations"));
    }
    let n_cells = partition.len();
    let mut nu = vec![0.0; n_cells];
    let mut mu = vec![0.0; n_cells];
    for (i, obs) in data.iter().enumerate() {
        let mut rng = stream.rng(Purpose::Privatize, i as u64);
        let rec = privatize_record(partition, params, &obs.x, obs.y, &mut rng)?;
        for j in 0..n_cells {
            nu[j] += rec.z[j];
            mu[j] += rec.w[j];
        }
    }
    let nf = data.len() as f64;
    Ok(PrivateAggregate {
        n: data.len(),
        partition: partition.clone(),
        params: *params,
        nu_tilde: nu.into_iter().map(|s| s / nf).collect(),
        mu_tilde: mu.into_iter().map(|s| s / nf).collect(),
        mode: Mode::Faithful,
        seed: None,
    })
}

/// Noiseless per-cell sums of truncated responses and of occupancy counts,
/// accumulated in data order.
pub(crate) fn binned_sums(
    partition: &Partition,
    m_trunc: f64,
    data: &[Observation],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut y_sum = vec![0.0; partition.len()];
    let mut count = vec![0.0; partition.len()];
    for obs in data {
        let y = truncate(obs.y, m_trunc)?;
        if let Some(j) = partition.locate(&obs.x)? {
            y_sum[j] += y;
            count[j] += 1.0;
        }
    }
    Ok((y_sum, count))
}

/// Sum of `n` i.i.d. unit Laplace variables, drawn as the difference of two
/// Gamma(n, 1/sqrt(2)) variables.
pub fn sample_laplace_sum<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    let gamma = Gamma::new(n as f64, std::f64::consts::FRAC_1_SQRT_2).expect("valid gamma parameters");
    gamma.sample(rng) - gamma.sample(rng)
}

/// Same distribution as [`aggregate_faithful`] over freshly privatised
/// records, in `O(N)` noise draws instead of `O(nN)`. Noise for `mu_tilde`
/// is drawn for all cells first, then for `nu_tilde`.
pub fn aggregate_fast<R: Rng + ?Sized>(
    partition: &Partition,
    params: &PrivacyParams,
    data: &[Observation],
    rng: &mut R,
) -> Result<PrivateAggregate> {
    if data.is_empty() {
        return Err(Error::invalid("cannot aggregate zero observations"));
    }
    let n = data.len();
    let (mut y_sum, mut count) = binned_sums(partition, params.m_trunc, data)?;
    if params.sigma_w > 0.0 {
        for c in &mut count {
            *c += params.sigma_w * sample_laplace_sum(n, rng);
        }
    }
    if params.sigma_z > 0.0 {
        for s in &mut y_sum {
            *s += params.sigma_z * sample_laplace_sum(n, rng);
        }
    }
    let nf = n as f64;
    Ok(PrivateAggregate {
        n,
        partition: partition.clone(),
        params: *params,
        nu_tilde: y_sum.into_iter().map(|s| s / nf).collect(),
        mu_tilde: count.into_iter().map(|s| s / nf).collect(),
        mode: Mode::Fast,
        seed: None,
    })
}

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub radius: f64,
    #[serde(with = "ext_f64")]
    pub alpha: f64,
    pub sigma_w: f64,
    pub sigma_z: f64,
    #[serde(with = "ext_f64")]
    pub m_trunc: f64,
    pub seed: Option<u64>,
    pub mode: Mode,
    pub created_utc: Option<String>,
}

/// Sidecar path for a published CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// The CSV body of a published dataset.
pub fn render_csv(agg: &PrivateAggregate) -> Result<String> {
    agg.check_lengths()?;
    let mut out = String::from("j,cell_coords,nu_tilde,mu_tilde\n");
    for (slot, cell) in agg.partition.cells().iter().enumerate() {
        out.push_str(&format!(
            "{},\"{}\",{},{}\n",
            slot + 1,
            cell,
            numfmt::exact(agg.nu_tilde[slot]),
            numfmt::exact(agg.mu_tilde[slot]),
        ));
    }
    Ok(out)
}

/// Write the dataset to `csv_path` and its sidecar next to it. Both files are
/// written to a temporary name first and renamed into place.
pub fn publish(agg: &PrivateAggregate, csv_path: &Path, created_utc: Option<String>) -> Result<()> {
    let csv = render_csv(agg)?;
    let spec = agg.spec();
    let sidecar = Sidecar {
        n: agg.n,
        d: spec.d,
        h: spec.h,
        radius: spec.radius,
        alpha: agg.params.alpha,
        sigma_w: agg.params.sigma_w,
        sigma_z: agg.params.sigma_z,
        m_trunc: agg.params.m_trunc,
        seed: agg.seed,
        mode: agg.mode,
        created_utc,
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    write_atomic(csv_path, csv.as_bytes())?;
    write_atomic(&sidecar_path(csv_path), json.as_bytes())?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    j: usize,
    cell_coords: String,
    nu_tilde: String,
    mu_tilde: String,
}

/// Read a dataset written by [`publish`], re-deriving the enumeration from the
/// sidecar and checking every row against it.
pub fn load(csv_path: &Path) -> Result<PrivateAggregate> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)
        .map_err(|e| Error::schema(format!("sidecar: {e}")))?;
    let spec = PartitionSpec::new(sidecar.h, sidecar.d, sidecar.radius)?;
    let params = PrivacyParams::new(sidecar.alpha, sidecar.sigma_w, sidecar.sigma_z, sidecar.m_trunc)?;
    if sidecar.n == 0 {
        return Err(Error::schema("sample size must be positive"));
    }
    let partition = Partition::new(spec)?;

    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["j", "cell_coords", "nu_tilde", "mu_tilde"] {
        return Err(Error::schema(format!("unexpected CSV header {headers:?}")));
    }
    let mut nu_tilde = Vec::with_capacity(partition.len());
    let mut mu_tilde = Vec::with_capacity(partition.len());
    for (slot, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        let cell: CellId = row.cell_coords.parse()?;
        if slot >= partition.len() || row.j != slot + 1 || partition.cells()[slot] != cell {
            return Err(Error::schema(format!(
                "row {} (cell {cell}) does not match the enumeration",
                row.j
            )));
        }
        let num = |s: &str| numfmt::parse_ext(s).ok_or_else(|| Error::schema(format!("bad number {s:?}")));
        nu_tilde.push(num(&row.nu_tilde)?);
        mu_tilde.push(num(&row.mu_tilde)?);
    }
    if nu_tilde.len() != partition.len() {
        return Err(Error::LengthMismatch { expected: partition.len(), found: nu_tilde.len() });
    }
    Ok(PrivateAggregate {
        n: sidecar.n,
        partition,
        params,
        nu_tilde,
        mu_tilde,
        mode: sidecar.mode,
        seed: sidecar.seed,
    })
}
