//! Synthetic data-generating scenarios with known regression functions.
//!
//! | name                    | X                               | m(x)                   | Y - m(X)                   |
//! |-------------------------|---------------------------------|------------------------|----------------------------|
//! | `lipschitz-uniform`     | Uniform[0,1]^d                  | mean of sin(2 pi x_l)  | Uniform[-a, a] (a = 1)     |
//! | `heavytail-mixture`     | atom at 0 (w.p. 0.3), else U[-1,1]^d | L1 norm of x      | Student-t(3), unit variance |
//! | `classification-smooth` | Uniform[0,1]^d                  | sin(2 pi x_1)          | labels in {-1, +1}         |
//!
//! `lipschitz-uniform` has bounded responses and a design density bounded
//! away from zero on its support. `heavytail-mixture` has an atom in the
//! design law and unbounded responses with a finite second moment only. The
//! atom sits on a cell corner of every origin-anchored lattice.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A data-generating distribution of `(X, Y)` with known `m(x) = E[Y | X = x]`.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `n` i.i.d. draws of `(X, Y)`.
    fn sample_xy(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Observation>;

    /// `n` i.i.d. draws from the design law of `X`.
    fn sample_x(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Vec<f64>>;

    fn true_m(&self, x: &[f64]) -> f64;

    fn is_classification(&self) -> bool {
        false
    }

    /// Lipschitz constant of `m` w.r.t. the Euclidean norm, where known.
    fn lipschitz_const(&self) -> Option<f64> {
        None
    }

    fn y_second_moment_finite(&self) -> bool {
        true
    }
}

/// Optional knobs for the built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Probability of the atom at the origin (`heavytail-mixture`).
    pub atom_weight: f64,
    /// Half-width of the uniform response noise (`lipschitz-uniform`).
    pub noise_half_width: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams { atom_weight: 0.3, noise_half_width: 1.0 }
    }
}

pub const SCENARIO_NAMES: [&str; 3] = ["lipschitz-uniform", "heavytail-mixture", "classification-smooth"];

pub fn make_scenario(name: &str, d: usize, params: &ScenarioParams) -> Result<Box<dyn Scenario>> {
    if d == 0 {
        return Err(Error::invalid("scenario dimension must be at least 1"));
    }
    match name {
        "lipschitz-uniform" => {
            let a = params.noise_half_width;
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid(format!("noise_half_width must be finite and >= 0, got {a}")));
            }
            Ok(Box::new(LipschitzUniform { d, noise_half_width: a }))
        }
        "heavytail-mixture" => {
            let w = params.atom_weight;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid(format!("atom_weight must lie in [0, 1], got {w}")));
            }
            Ok(Box::new(HeavytailMixture { d, atom_weight: w, noise: StudentT::new(3.0).expect("dof > 0") }))
        }
        "classification-smooth" => Ok(Box::new(ClassificationSmooth { d })),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// `|m(x)|`, the weight a wrong decision at `x` adds to the excess
/// classification risk.
pub fn bayes_excess_weight(scenario: &dyn Scenario, x: &[f64]) -> Result<f64> {
    if !scenario.is_classification() {
        return Err(Error::WrongScenarioKind {
            scenario: scenario.name().to_string(),
            expected: "classification",
        });
    }
    Ok(scenario.true_m(x).abs())
}

fn unit_cube(rng: &mut dyn RngCore, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

#[derive(Debug, Clone)]
pub struct LipschitzUniform {
    d: usize,
    noise_half_width: f64,
}

impl Scenario for LipschitzUniform {
    fn name(&self) -> &str {
        "lipschitz-uniform"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn sample_xy(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let x = unit_cube(rng, self.d);
                let u = rng.random_range(-1.0..=1.0) * self.noise_half_width;
                let y = self.true_m(&x) + u;
                Observation { x, y }
            })
            .collect()
    }

    fn sample_x(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| unit_cube(rng, self.d)).collect()
    }

    fn true_m(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xl| (2.0 * PI * xl).sin()).sum::<f64>() / self.d as f64
    }

    fn lipschitz_const(&self) -> Option<f64> {
        Some(2.0 * PI / (self.d as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct HeavytailMixture {
    d: usize,
    atom_weight: f64,
    noise: StudentT<f64>,
}

impl HeavytailMixture {
    fn draw_x(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        if rng.random::<f64>() < self.atom_weight {
            vec![0.0; self.d]
        } else {
            (0..self.d).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    }
}

impl Scenario for HeavytailMixture {
    fn name(&self) -> &str {
        "heavytail-mixture"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn sample_xy(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Observation> {
        let scale = 3f64.sqrt().recip();
        (0..n)
            .map(|_| {
                let x = self.draw_x(rng);
                let t = self.noise.sample(rng) * scale;
                let y = self.true_m(&x) + t;
                Observation { x, y }
            })
            .collect()
    }

    fn sample_x(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.draw_x(rng)).collect()
    }

    fn true_m(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }

    fn lipschitz_const(&self) -> Option<f64> {
        Some((self.d as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationSmooth {
    d: usize,
}

impl ClassificationSmooth {
    /// `P(Y = 1 | x)`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        (1.0 + (2.0 * PI * x[0]).sin()) / 2.0
    }
}

impl Scenario for ClassificationSmooth {
    fn name(&self) -> &str {
        "classification-smooth"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn sample_xy(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let x = unit_cube(rng, self.d);
                let y = if rng.random::<f64>() < self.eta(&x) { 1.0 } else { -1.0 };
                Observation { x, y }
            })
            .collect()
    }

    fn sample_x(&self, rng: &mut dyn RngCore, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| unit_cube(rng, self.d)).collect()
    }

    fn true_m(&self, x: &[f64]) -> f64 {
        2.0 * self.eta(x) - 1.0
    }

    fn is_classification(&self) -> bool {
        true
    }

    fn lipschitz_const(&self) -> Option<f64> {
        Some(2.0 * PI)
    }
}

/// Dump raw observations as `x1,..,xd,y` for debugging.
pub fn write_observations_csv(path: &Path, data: &[Observation]) -> Result<()> {
    let d = data.first().map_or(0, |o| o.x.len());
    let mut out = (1..=d).map(|l| format!("x{l},")).collect::<String>();
    out.push_str("y\n");
    for o in data {
        for v in &o.x {
            out.push_str(&numfmt::exact(*v));
            out.push(',');
        }
        out.push_str(&numfmt::exact(o.y));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
