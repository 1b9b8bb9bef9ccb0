//! Estimators built from a published aggregate.
//!
//! The private regression estimate on cell `j` is `nu_j / mu_j` when the
//! private occupancy `mu_j` reaches `c h^d`, and zero otherwise; points whose
//! cell is not enumerated also get zero. The private classifier is the sign
//! of `nu_j`, with `sign(0) = -1`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::collector::{binned_sums, PrivateAggregate};
use crate::error::{Error, Result};
use crate::numfmt;
use crate::partition::Partition;
use crate::synthdata::Observation;

/// Anything that predicts a real response at a point.
pub trait Regressor {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Regressor for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Binary decision in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// `+1` for `v > 0`, `-1` for `v <= 0`.
    pub fn sign_of(v: f64) -> Label {
        if v > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }
}

pub trait Classifier {
    fn classify(&self, x: &[f64]) -> Label;
}

impl<F: Fn(&[f64]) -> Label> Classifier for F {
    fn classify(&self, x: &[f64]) -> Label {
        self(x)
    }
}

/// A fitted piecewise-constant regression estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEstimate {
    partition: Partition,
    c_threshold: f64,
    values: Vec<f64>,
}

/// Ratio with the `0 / 0 = 0` convention.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Fit the thresholded private estimate. `c_threshold = 0` is accepted so the
/// non-private reduction `c = log n / (n h^d)` works at `n = 1`.
pub fn fit_private_regression(agg: &PrivateAggregate, c_threshold: f64) -> Result<RegressionEstimate> {
    if !(c_threshold.is_finite() && c_threshold >= 0.0) {
        return Err(Error::invalid(format!("threshold constant must be finite and >= 0, got {c_threshold}")));
    }
    let cutoff = c_threshold * agg.spec().cell_volume();
    let values = agg
        .nu_tilde
        .iter()
        .zip(&agg.mu_tilde)
        .map(|(&nu, &mu)| if mu >= cutoff { ratio(nu, mu) } else { 0.0 })
        .collect();
    Ok(RegressionEstimate { partition: agg.partition.clone(), c_threshold, values })
}

/// The classical partitioning estimate on raw data: binned means, kept where
/// the empirical cell frequency reaches `log n / n`. Responses are truncated
/// at `m_trunc` (pass infinity for none).
pub fn fit_nonprivate_baseline(
    data: &[Observation],
    partition: &Partition,
    m_trunc: f64,
) -> Result<RegressionEstimate> {
    if data.is_empty() {
        return Err(Error::invalid("baseline needs at least one observation"));
    }
    if m_trunc.is_nan() || m_trunc <= 0.0 {
        return Err(Error::invalid(format!("truncation level must be positive, got {m_trunc}")));
    }
    let n = data.len() as f64;
    let cutoff = n.ln() / n;
    let (y_sum, count) = binned_sums(partition, m_trunc, data)?;
    let values = y_sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| {
            let (nu, mu) = (s / n, c / n);
            if mu >= cutoff {
                ratio(nu, mu)
            } else {
                0.0
            }
        })
        .collect();
    let c_threshold = cutoff / partition.spec().cell_volume();
    Ok(RegressionEstimate { partition: partition.clone(), c_threshold, values })
}

impl RegressionEstimate {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn c_threshold(&self) -> f64 {
        self.c_threshold
    }

    /// Per-cell values in enumeration order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value of the cell holding `x`; zero outside the enumerated cells.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.partition.locate(x)?.map_or(0.0, |j| self.values[j]))
    }

    /// `j,cell_coords,value` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,cell_coords,value\n");
        for (slot, cell) in self.partition.cells().iter().enumerate() {
            let _ = writeln!(out, "{},\"{}\",{}", slot + 1, cell, numfmt::exact(self.values[slot]));
        }
        out
    }
}

/// Non-finite inputs predict 0; use [`RegressionEstimate::evaluate`] to see
/// the error instead.
impl Regressor for RegressionEstimate {
    fn predict(&self, x: &[f64]) -> f64 {
        self.evaluate(x).unwrap_or(0.0)
    }
}

/// `sign(nu_tilde)` of the cell holding `x`; `-1` outside the enumeration.
/// The occupancy estimates are not used.
pub fn classify(agg: &PrivateAggregate, x: &[f64]) -> Result<Label> {
    let nu = agg.partition.locate(x)?.map_or(0.0, |j| agg.nu_tilde[j]);
    Ok(Label::sign_of(nu))
}

/// The classifier as a standalone object (holds only what it needs).
#[derive(Debug, Clone)]
pub struct PrivateClassifier {
    partition: Partition,
    nu_tilde: Vec<f64>,
}

impl PrivateClassifier {
    pub fn from_aggregate(agg: &PrivateAggregate) -> Self {
        PrivateClassifier { partition: agg.partition.clone(), nu_tilde: agg.nu_tilde.clone() }
    }
}

impl Classifier for PrivateClassifier {
    fn classify(&self, x: &[f64]) -> Label {
        let nu = match self.partition.locate(x) {
            Ok(Some(j)) => self.nu_tilde[j],
            _ => 0.0,
        };
        Label::sign_of(nu)
    }
}

/// Tuning sequences at sample size `n` and the two consistency diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub n: u64,
    pub h: f64,
    pub c: f64,
    pub m_trunc: f64,
    pub radius: f64,
    /// `(ln n)^3 / (n c^2 h^{2d})`; must vanish for strong consistency of the
    /// regression estimate.
    pub condition_2d: f64,
    /// `ln n / (n h^{2d})`; must vanish for the classifier.
    pub class_condition: f64,
}

/// `h = c' n^{-1/(2(d+1))}`, `c = 1/sqrt(ln n)`, `M = m_scale sqrt(ln n)`,
/// `r = r_scale ln(1 + n)`.
pub fn schedules(n: u64, d: usize, c_prime: f64, m_scale: f64, r_scale: f64) -> Result<ScheduleReport> {
    if n < 2 {
        return Err(Error::invalid(format!("schedules need n >= 2, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    for (name, v) in [("c_prime", c_prime), ("m_scale", m_scale), ("r_scale", r_scale)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let h = c_prime * nf.powf(-1.0 / (2.0 * (d as f64 + 1.0)));
    let c = 1.0 / ln_n.sqrt();
    let h2d = h.powi(2 * d as i32);
    Ok(ScheduleReport {
        n,
        h,
        c,
        m_trunc: m_scale * ln_n.sqrt(),
        radius: r_scale * nf.ln_1p(),
        condition_2d: ln_n.powi(3) / (nf * c * c * h2d),
        class_condition: ln_n / (nf * h2d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collector::Mode;
    use crate::mechanism::PrivacyParams;
    use crate::partition::PartitionSpec;
    use proptest::prelude::*;

    fn part(h: f64, d: usize, r: f64) -> Partition {
        Partition::new(PartitionSpec::new(h, d, r).unwrap()).unwrap()
    }

    fn agg_with(p: &Partition, nu: Vec<f64>, mu: Vec<f64>) -> PrivateAggregate {
        PrivateAggregate {
            n: 10,
            partition: p.clone(),
            params: PrivacyParams::noiseless(f64::INFINITY).unwrap(),
            nu_tilde: nu,
            mu_tilde: mu,
            mode: Mode::Fast,
            seed: None,
        }
    }

    fn one_cell(p: &Partition, j: usize, nu: f64, mu: f64) -> PrivateAggregate {
        let mut nus = vec![0.0; p.len()];
        let mut mus = vec![0.0; p.len()];
        nus[j] = nu;
        mus[j] = mu;
        agg_with(p, nus, mus)
    }

    #[test]
    fn fit_examples() {
        let p = part(1.0, 1, 2.0);
        let j = p.locate(&[0.5]).unwrap().unwrap();
        let est = fit_private_regression(&one_cell(&p, j, 2.0, 1.0), 0.1).unwrap();
        assert_eq!(est.evaluate(&[0.5]).unwrap(), 2.0);
        assert_eq!(est.evaluate(&[0.99]).unwrap(), 2.0);
        assert_eq!(est.evaluate(&[-0.5]).unwrap(), 0.0);
        assert_eq!(est.evaluate(&[50.0]).unwrap(), 0.0);

        // Exactly at the cutoff counts as occupied.
        let est = fit_private_regression(&one_cell(&p, j, 0.3, 0.1), 0.1).unwrap();
        assert_eq!(est.evaluate(&[0.5]).unwrap(), 0.3 / 0.1);

        let below = 0.1f64.next_down();
        let est = fit_private_regression(&one_cell(&p, j, 5.0, below), 0.1).unwrap();
        assert_eq!(est.evaluate(&[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn baseline_examples() {
        let p = part(1.0, 1, 2.0);
        let data = [Observation { x: vec![0.2], y: 1.0 }, Observation { x: vec![0.3], y: 3.0 }];
        let est = fit_nonprivate_baseline(&data, &p, f64::INFINITY).unwrap();
        assert_eq!(est.evaluate(&[0.5]).unwrap(), 2.0);
        assert_eq!(est.evaluate(&[-0.5]).unwrap(), 0.0);
        let clipped = fit_nonprivate_baseline(&data, &p, 2.0).unwrap();
        assert_eq!(clipped.evaluate(&[0.5]).unwrap(), 1.5);
    }

    #[test]
    fn classify_examples() {
        let p = part(1.0, 1, 2.0);
        let j = p.locate(&[0.5]).unwrap().unwrap();
        assert_eq!(classify(&one_cell(&p, j, 0.7, -3.0), &[0.5]).unwrap(), Label::Positive);
        assert_eq!(classify(&one_cell(&p, j, 0.0, 1.0), &[0.5]).unwrap(), Label::Negative);
        assert_eq!(classify(&one_cell(&p, j, 0.7, 1.0), &[50.0]).unwrap(), Label::Negative);
        let c = PrivateClassifier::from_aggregate(&one_cell(&p, j, 0.7, 1.0));
        assert_eq!(c.classify(&[0.2]), Label::Positive);
        assert_eq!(c.classify(&[1.2]), Label::Negative);
    }

    #[test]
    fn schedule_examples() {
        let r = schedules(1024, 1, 1.0, 1.0, 1.0).unwrap();
        let ln = 10.0 * 2f64.ln();
        assert!((r.h - 2f64.powf(-2.5)).abs() < 1e-15);
        assert!((r.h - 0.1767766952966369).abs() < 1e-12);
        assert!((r.c - 0.3798282560433022).abs() < 1e-12);
        assert!((r.condition_2d - ln.powi(4) / (1024.0 * 2f64.powi(-5))).abs() < 1e-9);
        assert!((r.condition_2d - 72.13596830721359).abs() < 1e-9);
        assert!((r.m_trunc - ln.sqrt()).abs() < 1e-12);
        assert!((r.radius - 1025f64.ln()).abs() < 1e-12);
        assert!(schedules(1, 1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn schedule_monotonicity() {
        for d in 1..=3 {
            let reports: Vec<_> = (10..=24).map(|k| schedules(1u64 << k, d, 1.0, 1.0, 1.0).unwrap()).collect();
            for w in reports.windows(2) {
                assert!(w[1].h < w[0].h);
            }
            // (ln n)^4 / n^{1/(d+1)} decreases exactly once ln n > 4(d + 1).
            for w in reports.windows(2) {
                if (w[0].n as f64).ln() > 4.0 * (d as f64 + 1.0) {
                    assert!(w[1].condition_2d < w[0].condition_2d, "d={d} n={}", w[0].n);
                } else if (w[1].n as f64).ln() < 4.0 * (d as f64 + 1.0) {
                    assert!(w[1].condition_2d > w[0].condition_2d, "d={d} n={}", w[0].n);
                }
            }
            let (a, b) = (&reports[0], &reports[reports.len() - 1]);
            let slope = (b.h.ln() - a.h.ln()) / ((b.n as f64).ln() - (a.n as f64).ln());
            assert!((slope + 1.0 / (2.0 * (d as f64 + 1.0))).abs() < 1e-12, "d={d}: {slope}");
        }
    }

    proptest! {
        #[test]
        fn estimate_is_bounded_and_piecewise_constant(
            vals in prop::collection::vec((-5.0f64..5.0, -1.0f64..1.0), 6),
            c in 0.05f64..2.0,
            x in -3.0f64..3.0,
            shift in 0.0f64..1.0,
        ) {
            let p = part(1.0, 1, 2.0);
            let (nu, mu): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
            let max_nu = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let est = fit_private_regression(&agg_with(&p, nu, mu), c).unwrap();
            let v = est.evaluate(&[x]).unwrap();
            prop_assert!(v.is_finite());
            prop_assert!(v.abs() <= max_nu / c + 1e-12);
            let other = x.floor() + shift * 0.999;
            prop_assert_eq!(v, est.evaluate(&[other]).unwrap());
        }
    }
}
