use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]` with a uniform grid of `steps` cells.
///
/// A singleton space (`lo == hi`) has exactly one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpace {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SignalSpace {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidModel(format!(
                "bad signal space [{lo}, {hi}]"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidModel("grid needs at least one step".into()));
        }
        Ok(SignalSpace { lo, hi, steps })
    }

    pub fn unit(steps: usize) -> Self {
        SignalSpace {
            lo: 0.0,
            hi: 1.0,
            steps,
        }
    }

    pub fn singleton(x: f64) -> Self {
        SignalSpace {
            lo: x,
            hi: x,
            steps: 1,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        if self.is_singleton() {
            1
        } else {
            self.steps + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn step(&self) -> f64 {
        self.range() / self.steps as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if self.is_singleton() {
            return self.lo;
        }
        if k >= self.steps {
            self.hi
        } else {
            self.lo + self.range() * (k as f64 / self.steps as f64)
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        SignalSpace {
            lo: self.lo,
            hi: self.hi,
            steps: steps.max(1),
        }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Grid index of `x`, if `x` is within `tol` of a grid point.
    pub fn index_of(&self, x: f64, tol: f64) -> Option<usize> {
        if !self.contains(x, tol) {
            return None;
        }
        if self.is_singleton() {
            return Some(0);
        }
        let k = ((x - self.lo) / self.step()).round();
        let k = k.clamp(0.0, self.steps as f64) as usize;
        ((self.point(k) - x).abs() <= tol).then_some(k)
    }

    /// Perturbation sizes used by the property estimators: one grid step,
    /// a quarter and a half of the range.
    pub fn deltas(&self) -> Vec<f64> {
        if self.is_singleton() {
            return Vec::new();
        }
        let mut out: Vec<f64> = Vec::with_capacity(3);
        for d in [self.step(), self.range() / 4.0, self.range() / 2.0] {
            if !out.iter().any(|&e| (e - d).abs() <= 1e-15 * self.range()) {
                out.push(d);
            }
        }
        out
    }
}

/// Signals of `n` agents on `m` items, stored agent-major.
///
/// Single-item profiles have `m == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SignalProfile {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl SignalProfile {
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m || n == 0 || m == 0 {
            return Err(Error::Shape(format!(
                "expected {n}x{m} signals, got {}",
                data.len()
            )));
        }
        Ok(SignalProfile { n, m, data })
    }

    pub fn single(s: Vec<f64>) -> Self {
        SignalProfile {
            n: s.len(),
            m: 1,
            data: s,
        }
    }

    pub fn filled(n: usize, m: usize, x: f64) -> Self {
        SignalProfile {
            n,
            m,
            data: vec![x; n * m],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged signal rows".into()));
        }
        SignalProfile::new(n, m, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.data[i * self.m + l]
    }

    pub fn set(&mut self, i: usize, l: usize, x: f64) {
        self.data[i * self.m + l] = x;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, l)).collect()
    }

    /// The single-item signal vector. Panics unless `m == 1`.
    pub fn as_single(&self) -> &[f64] {
        assert_eq!(self.m, 1, "not a single-item profile");
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SignalProfile {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SignalProfile::from_rows(rows)
    }
}

impl From<SignalProfile> for Vec<Vec<f64>> {
    fn from(p: SignalProfile) -> Self {
        p.rows()
    }
}
