//! Origin-anchored cubic partitions of `R^d`.
//!
//! Cells are the half-open cubes `[k_l h, (k_l + 1) h)` indexed by an integer
//! vector `k`. Only the cells whose closure meets the closed ball of radius
//! `radius` around the origin take part in the mechanism; they are numbered
//! lexicographically by `k`, starting from `j = 1`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of enumerated cells unless a caller raises it.
pub const DEFAULT_CELL_CAP: u64 = 10_000_000;

// Lattice indices are kept well inside the range where `k as f64` is exact.
const MAX_LATTICE_INDEX: f64 = (1u64 << 52) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Cube side length.
    pub h: f64,
    /// Dimension of the feature space.
    pub d: usize,
    /// Radius of the origin-centred ball whose cells are enumerated.
    pub radius: f64,
}

/// Integer lattice coordinates of a cube.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(Vec<i64>);

impl CellId {
    pub fn new(coords: Vec<i64>) -> Self {
        CellId(coords)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for CellId {
    fn from(coords: Vec<i64>) -> Self {
        CellId(coords)
    }
}

/// Comma-joined coordinates, e.g. `-1,0`. This is the CSV representation.
impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl FromStr for CellId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::schema(format!("bad cell coordinate {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(CellId)
    }
}

/// Distance from the origin to the cube `[k h, (k + 1) h]` along one axis.
fn axis_gap(k: i64, h: f64) -> f64 {
    k.max(-k - 1) as f64 * h
}

impl PartitionSpec {
    pub fn new(h: f64, d: usize, radius: f64) -> Result<Self> {
        let spec = PartitionSpec { h, d, radius };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid(format!("cell width must be positive and finite, got {}", self.h)));
        }
        if self.d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "ball radius must be positive and finite, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Volume `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// The cell containing `x`: `k_l = floor(x_l / h)`.
    pub fn quantise(&self, x: &[f64]) -> Result<CellId> {
        if x.len() != self.d {
            return Err(Error::invalid(format!("expected a {}-vector, got length {}", self.d, x.len())));
        }
        x.iter()
            .map(|&xl| {
                if !xl.is_finite() {
                    return Err(Error::invalid(format!("non-finite coordinate {xl}")));
                }
                let q = (xl / self.h).floor();
                if q.abs() > MAX_LATTICE_INDEX {
                    return Err(Error::invalid(format!("coordinate {xl} is too far out for cell width {}", self.h)));
                }
                // Division can round across a cell boundary; settle on the cube
                // whose floating-point bounds actually contain x.
                let mut k = q as i64;
                if xl < k as f64 * self.h {
                    k -= 1;
                } else if xl >= (k + 1) as f64 * self.h {
                    k += 1;
                }
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()
            .map(CellId)
    }

    /// Centre `((k_l + 1/2) h)_l` of a cell.
    pub fn cell_center(&self, cell: &CellId) -> Vec<f64> {
        cell.0.iter().map(|&k| (k as f64 + 0.5) * self.h).collect()
    }

    /// Whether the closed cube meets the closed ball: the origin clamped into
    /// the cube must lie within `radius`.
    pub fn intersects_ball(&self, cell: &CellId) -> bool {
        let mut dist2 = 0.0;
        for &k in &cell.0 {
            let lo = k as f64 * self.h;
            let hi = (k + 1) as f64 * self.h;
            let nearest = 0.0f64.clamp(lo, hi);
            dist2 += nearest * nearest;
        }
        dist2 <= self.radius * self.radius
    }

    /// Largest `t >= 0` with `acc + (t h)^2 <= r^2`; along that axis the
    /// admissible indices are then `-t - 1 ..= t`.
    fn axis_reach(&self, acc: f64) -> Option<i64> {
        let r2 = self.radius * self.radius;
        if acc > r2 {
            return None;
        }
        let fits = |t: i64| {
            let g = axis_gap(t, self.h);
            acc + g * g <= r2
        };
        let guess = ((r2 - acc).max(0.0).sqrt() / self.h).floor().min(MAX_LATTICE_INDEX);
        let mut t = guess as i64;
        while t > 0 && !fits(t) {
            t -= 1;
        }
        while (t as f64) < MAX_LATTICE_INDEX && fits(t + 1) {
            t += 1;
        }
        Some(t)
    }

    /// Number of cells meeting the ball, without materialising them.
    pub fn cell_count(&self) -> u128 {
        self.count_from(0, 0.0)
    }

    fn count_from(&self, axis: usize, acc: f64) -> u128 {
        let Some(t) = self.axis_reach(acc) else { return 0 };
        if axis + 1 == self.d {
            return 2 * (t as u128 + 1);
        }
        let mut total: u128 = 0;
        for k in (-t - 1)..=t {
            let g = axis_gap(k, self.h);
            total = total.saturating_add(self.count_from(axis + 1, acc + g * g));
        }
        total
    }

    /// All cells meeting the ball in lexicographic order of their coordinates,
    /// failing if there are more than [`DEFAULT_CELL_CAP`].
    pub fn enumerate_cells(&self) -> Result<Vec<CellId>> {
        self.enumerate_cells_capped(DEFAULT_CELL_CAP)
    }

    pub fn enumerate_cells_capped(&self, cap: u64) -> Result<Vec<CellId>> {
        self.validate()?;
        let count = self.cell_count();
        if count > u128::from(cap) {
            return Err(Error::ResourceLimit { cells: count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut prefix = Vec::with_capacity(self.d);
        self.enumerate_from(0.0, &mut prefix, &mut out);
        Ok(out)
    }

    fn enumerate_from(&self, acc: f64, prefix: &mut Vec<i64>, out: &mut Vec<CellId>) {
        let Some(t) = self.axis_reach(acc) else { return };
        let last = prefix.len() + 1 == self.d;
        for k in (-t - 1)..=t {
            prefix.push(k);
            if last {
                out.push(CellId(prefix.clone()));
            } else {
                let g = axis_gap(k, self.h);
                self.enumerate_from(acc + g * g, prefix, out);
            }
            prefix.pop();
        }
    }
}

/// A partition together with its enumerated cells and a reverse index.
#[derive(Debug, Clone)]
pub struct Partition {
    spec: PartitionSpec,
    cells: Vec<CellId>,
    slots: HashMap<CellId, usize>,
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Partition {
    pub fn new(spec: PartitionSpec) -> Result<Self> {
        Self::with_cap(spec, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(spec: PartitionSpec, cap: u64) -> Result<Self> {
        let cells = spec.enumerate_cells_capped(cap)?;
        if cells.is_empty() {
            return Err(Error::invalid("partition has no cells meeting the ball"));
        }
        let slots = cells.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Partition { spec, cells, slots })
    }

    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    /// `N`, the number of enumerated cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Zero-based position of a cell in the enumeration.
    pub fn slot(&self, cell: &CellId) -> Option<usize> {
        self.slots.get(cell).copied()
    }

    /// One-based cell number `j`, or `None` for cells outside the ball.
    pub fn cell_index(&self, cell: &CellId) -> Option<usize> {
        self.slot(cell).map(|s| s + 1)
    }

    /// Zero-based slot of the cell holding `x`, if that cell is enumerated.
    pub fn locate(&self, x: &[f64]) -> Result<Option<usize>> {
        Ok(self.slot(&self.spec.quantise(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(h: f64, d: usize, r: f64) -> PartitionSpec {
        PartitionSpec::new(h, d, r).unwrap()
    }

    fn ids(v: &[&[i64]]) -> Vec<CellId> {
        v.iter().map(|c| CellId::new(c.to_vec())).collect()
    }

    /// Brute-force scan of the bounding box `[-r - h, r + h]^d` in
    /// lexicographic order.
    fn brute_force(s: &PartitionSpec) -> Vec<CellId> {
        let lo = ((-s.radius - s.h) / s.h).floor() as i64;
        let hi = ((s.radius + s.h) / s.h).ceil() as i64;
        let mut out = Vec::new();
        let mut k = vec![lo; s.d];
        loop {
            let c = CellId::new(k.clone());
            if s.intersects_ball(&c) {
                out.push(c);
            }
            let mut axis = s.d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if k[axis] < hi {
                    k[axis] += 1;
                    break;
                }
                k[axis] = lo;
            }
        }
    }

    #[test]
    fn quantise_examples() {
        assert_eq!(spec(1.0, 1, 1.0).quantise(&[0.3]).unwrap(), CellId::new(vec![0]));
        assert_eq!(spec(1.0, 1, 1.0).quantise(&[-0.2]).unwrap(), CellId::new(vec![-1]));
        assert_eq!(spec(0.25, 2, 1.0).quantise(&[0.30, 0.99]).unwrap(), CellId::new(vec![1, 3]));
        assert_eq!(spec(1.0, 1, 1.0).cell_center(&CellId::new(vec![-1])), vec![-0.5]);
    }

    #[test]
    fn quantise_rejects_bad_input() {
        let s = spec(1.0, 2, 1.0);
        assert!(matches!(s.quantise(&[f64::NAN, 0.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(s.quantise(&[f64::INFINITY, 0.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(s.quantise(&[0.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cell_center_examples() {
        assert_eq!(spec(1.0, 1, 1.0).cell_center(&CellId::new(vec![0])), vec![0.5]);
        assert_eq!(spec(2.0, 2, 1.0).cell_center(&CellId::new(vec![-1, 0])), vec![-1.0, 1.0]);
        assert_eq!(spec(0.5, 1, 1.0).cell_center(&CellId::new(vec![4])), vec![2.25]);
    }

    #[test]
    fn intersects_ball_examples() {
        assert!(spec(1.0, 1, 0.4).intersects_ball(&CellId::new(vec![0])));
        assert!(!spec(1.0, 1, 0.9).intersects_ball(&CellId::new(vec![1])));
        assert!(spec(1.0, 2, 1.5).intersects_ball(&CellId::new(vec![1, 1])));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(spec(1.0, 1, 0.5).enumerate_cells().unwrap(), ids(&[&[-1], &[0]]));
        assert_eq!(spec(10.0, 1, 1.0).enumerate_cells().unwrap(), ids(&[&[-1], &[0]]));
        // The four cubes at the origin plus one neighbour on each side of them.
        let expected = ids(&[
            &[-2, -1],
            &[-2, 0],
            &[-1, -2],
            &[-1, -1],
            &[-1, 0],
            &[-1, 1],
            &[0, -2],
            &[0, -1],
            &[0, 0],
            &[0, 1],
            &[1, -1],
            &[1, 0],
        ]);
        let s = spec(1.0, 2, 1.0);
        assert_eq!(brute_force(&s), expected);
        assert_eq!(s.enumerate_cells().unwrap(), expected);
        assert_eq!(s.cell_count(), 12);
    }

    #[test]
    fn cell_index_examples() {
        let p = Partition::new(spec(1.0, 1, 0.5)).unwrap();
        assert_eq!(p.cell_index(&CellId::new(vec![0])), Some(2));
        assert_eq!(p.cell_index(&CellId::new(vec![5])), None);
        assert_eq!(p.cell_index(&CellId::new(vec![-1])), Some(1));
    }

    #[test]
    fn cap_is_enforced() {
        let s = spec(0.01, 3, 4.0);
        match s.enumerate_cells_capped(1000) {
            Err(Error::ResourceLimit { cells, cap }) => {
                assert_eq!(cap, 1000);
                assert_eq!(cells, s.cell_count());
                assert!(cells > 1000);
            }
            other => panic!("expected resource limit, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(PartitionSpec::new(0.0, 1, 1.0).is_err());
        assert!(PartitionSpec::new(1.0, 0, 1.0).is_err());
        assert!(PartitionSpec::new(1.0, 1, f64::INFINITY).is_err());
        assert!(PartitionSpec::new(1.0, 1, -1.0).is_err());
    }

    #[test]
    fn display_round_trip() {
        let c = CellId::new(vec![-3, 0, 12]);
        assert_eq!(c.to_string(), "-3,0,12");
        assert_eq!(c.to_string().parse::<CellId>().unwrap(), c);
    }

    proptest! {
        #[test]
        fn quantise_tiles(h in 0.01f64..5.0, xs in prop::collection::vec(-100.0f64..100.0, 1..4)) {
            let s = PartitionSpec::new(h, xs.len(), 1.0).unwrap();
            let c = s.quantise(&xs).unwrap();
            for (&x, &k) in xs.iter().zip(c.coords()) {
                prop_assert!(k as f64 * h <= x && x < (k + 1) as f64 * h);
            }
        }

        #[test]
        fn enumeration_matches_brute_force(h in 0.2f64..3.0, d in 1usize..=3, r in 0.05f64..4.0) {
            let s = PartitionSpec::new(h, d, r).unwrap();
            let cells = s.enumerate_cells().unwrap();
            prop_assert_eq!(&cells, &brute_force(&s));
            prop_assert_eq!(cells.len() as u128, s.cell_count());
            for c in &cells {
                prop_assert_eq!(&s.quantise(&s.cell_center(c)).unwrap(), c);
            }
        }

        #[test]
        fn enlarging_radius_keeps_cells(h in 0.2f64..3.0, d in 1usize..=3, r in 0.05f64..3.0, extra in 0.0f64..2.0) {
            let small = PartitionSpec::new(h, d, r).unwrap().enumerate_cells().unwrap();
            let big = Partition::new(PartitionSpec::new(h, d, r + extra).unwrap()).unwrap();
            for c in &small {
                prop_assert!(big.slot(c).is_some());
            }
        }
    }
}
