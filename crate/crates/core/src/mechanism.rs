//! The per-individual privacy mechanism.
//!
//! Individual `i` holding `(x, y)` releases, for every enumerated cell `j`,
//!
//! ```text
//! w_j = 1{x in A_j}            + sigma_w * zeta_j
//! z_j = [y]_{-M}^{M} 1{x in A_j} + sigma_z * eps_j
//! ```
//!
//! with i.i.d. zero-mean unit-variance Laplace `zeta`, `eps`. The conditional
//! density ratio between any two inputs is at most
//! `exp(2^{3/2} / sigma_w + 2^{3/2} M / sigma_z)`, so `calibrate` picks the
//! scales that make that exponent equal to the budget `alpha`.

use std::f64::consts::SQRT_2;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::ext_f64;
use crate::partition::Partition;

const TWO_POW_THREE_HALVES: f64 = 2.0 * SQRT_2;

/// Noise scales and truncation level of the mechanism.
///
/// `alpha` and `m_trunc` may be infinite: a noiseless audit run has no
/// meaningful budget, and the non-private baseline does not truncate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    #[serde(with = "ext_f64")]
    pub alpha: f64,
    pub sigma_w: f64,
    pub sigma_z: f64,
    #[serde(with = "ext_f64")]
    pub m_trunc: f64,
}

/// `sigma_w = sqrt(32) / alpha`, `sigma_z = sqrt(32) M / alpha`, which makes
/// the privacy-loss bound exactly `alpha`.
pub fn calibrate(alpha: f64, m_trunc: f64) -> Result<PrivacyParams> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    if !(m_trunc.is_finite() && m_trunc > 0.0) {
        return Err(Error::invalid(format!(
            "truncation level must be positive and finite, got {m_trunc}"
        )));
    }
    let root32 = 32f64.sqrt();
    Ok(PrivacyParams {
        alpha,
        sigma_w: root32 / alpha,
        sigma_z: root32 * m_trunc / alpha,
        m_trunc,
    })
}

impl PrivacyParams {
    pub fn new(alpha: f64, sigma_w: f64, sigma_z: f64, m_trunc: f64) -> Result<Self> {
        let p = PrivacyParams { alpha, sigma_w, sigma_z, m_trunc };
        p.validate()?;
        Ok(p)
    }

    /// No noise at all: the degenerate mode used for audits and for
    /// reproducing the non-private estimator.
    pub fn noiseless(m_trunc: f64) -> Result<Self> {
        Self::new(f64::INFINITY, 0.0, 0.0, m_trunc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, s) in [("sigma_w", self.sigma_w), ("sigma_z", self.sigma_z)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {s}")));
            }
        }
        if self.m_trunc.is_nan() || self.m_trunc <= 0.0 {
            return Err(Error::invalid(format!("truncation level must be positive, got {}", self.m_trunc)));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_w == 0.0 && self.sigma_z == 0.0
    }

    /// `2^{3/2} (1 / sigma_w + M / sigma_z)`, the log of the worst-case
    /// density ratio these parameters admit.
    pub fn privacy_loss_bound(&self) -> f64 {
        TWO_POW_THREE_HALVES * (1.0 / self.sigma_w + self.m_trunc / self.sigma_z)
    }

    /// Whether the loss bound fits within `alpha` (1e-12 relative slack).
    pub fn satisfies_budget(&self) -> bool {
        self.privacy_loss_bound() <= self.alpha * (1.0 + 1e-12)
    }
}

/// Clamp `y` to `[-M, M]`.
pub fn truncate(y: f64, m_trunc: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::invalid(format!("non-finite response {y}")));
    }
    Ok(y.clamp(-m_trunc, m_trunc))
}

/// One draw from the Laplace law with density `exp(-sqrt(2)|x|) / sqrt(2)`
/// (mean 0, variance 1), by inversion of a single open-interval uniform.
pub fn sample_unit_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = u - 0.5;
    -v.signum() * (1.0 - 2.0 * v.abs()).ln() / SQRT_2
}

/// What one individual transmits: one `(w_j, z_j)` pair per enumerated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateRecord {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

impl PrivateRecord {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Privatise one observation. All `w` noise is drawn before the `z` noise;
/// a zero scale draws nothing.
pub fn privatize_record<R: Rng + ?Sized>(
    partition: &Partition,
    params: &PrivacyParams,
    x: &[f64],
    y: f64,
    rng: &mut R,
) -> Result<PrivateRecord> {
    let slot = partition.locate(x)?;
    let y = truncate(y, params.m_trunc)?;
    let n_cells = partition.len();

    let mut w = vec![0.0; n_cells];
    let mut z = vec![0.0; n_cells];
    if let Some(j) = slot {
        w[j] = 1.0;
        z[j] = y;
    }
    if params.sigma_w > 0.0 {
        for wj in &mut w {
            *wj += params.sigma_w * sample_unit_laplace(rng);
        }
    }
    if params.sigma_z > 0.0 {
        for zj in &mut z {
            *zj += params.sigma_z * sample_unit_laplace(rng);
        }
    }
    Ok(PrivateRecord { w, z })
}

/// Exact log of `q(w, z | x, y) / q(w, z | x', y')` for the mechanism above.
///
/// Both responses must lie in `[-M, M]`; outside that range the density
/// ratio is not controlled by the budget.
pub fn ldp_log_ratio(
    partition: &Partition,
    params: &PrivacyParams,
    w: &[f64],
    z: &[f64],
    (x, y): (&[f64], f64),
    (x_alt, y_alt): (&[f64], f64),
) -> Result<f64> {
    let n_cells = partition.len();
    if w.len() != n_cells {
        return Err(Error::LengthMismatch { expected: n_cells, found: w.len() });
    }
    if z.len() != n_cells {
        return Err(Error::LengthMismatch { expected: n_cells, found: z.len() });
    }
    if params.sigma_w <= 0.0 || params.sigma_z <= 0.0 {
        return Err(Error::Precondition("a noiseless mechanism has no density".into()));
    }
    for r in [y, y_alt] {
        if r.is_nan() || r.abs() > params.m_trunc {
            return Err(Error::Precondition(format!(
                "response {r} lies outside [-{m}, {m}]",
                m = params.m_trunc
            )));
        }
    }
    let slot = partition.locate(x)?;
    let slot_alt = partition.locate(x_alt)?;
    let ind = |s: Option<usize>, j: usize| if s == Some(j) { 1.0 } else { 0.0 };

    let mut w_sum = 0.0;
    let mut z_sum = 0.0;
    for j in 0..n_cells {
        let (a, a_alt) = (ind(slot, j), ind(slot_alt, j));
        w_sum += (w[j] - a_alt).abs() - (w[j] - a).abs();
        z_sum += (z[j] - y_alt * a_alt).abs() - (z[j] - y * a).abs();
    }
    Ok(SQRT_2 / params.sigma_w * w_sum + SQRT_2 / params.sigma_z * z_sum)
}

/// Evaluate the log-ratio at the input pair and output that attain the bound:
/// `x`, `x'` in the first two cells, `w = e_j`, `z = M e_j`, `y = M`,
/// `y' = -M`. Needs a finite `M` and at least two cells.
pub fn worst_case_log_ratio(partition: &Partition, params: &PrivacyParams) -> Result<f64> {
    if partition.len() < 2 {
        return Err(Error::Precondition("worst case needs at least two cells".into()));
    }
    if !params.m_trunc.is_finite() {
        return Err(Error::Precondition("worst case needs a finite truncation level".into()));
    }
    let spec = partition.spec();
    let x = spec.cell_center(&partition.cells()[0]);
    let x_alt = spec.cell_center(&partition.cells()[1]);
    let m = params.m_trunc;
    let mut w = vec![0.0; partition.len()];
    let mut z = vec![0.0; partition.len()];
    w[0] = 1.0;
    z[0] = m;
    ldp_log_ratio(partition, params, &w, &z, (&x, m), (&x_alt, -m))
}
