use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discovery::TestFunction;
use crate::error::{ensure_dim, Error, Result};
use crate::model::StateVec;

/// Regular lattice over a box. Flat indices are row-major with the first
/// coordinate varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

impl Lattice {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != n.len() || lo.is_empty() {
            return Err(Error::invalid("lattice", "lo, hi and n must have the same nonzero length"));
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::invalid("lattice", format!("need lo < hi in dimension {i}")));
            }
            if n[i] < 2 {
                return Err(Error::invalid("lattice", format!("need at least 2 points in dimension {i}")));
            }
        }
        Ok(Self { lo, hi, n })
    }

    /// `n^d` points over `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, i: usize) -> f64 {
        (self.hi[i] - self.lo[i]) / (self.n[i] - 1) as f64
    }

    /// Coordinate of index `k` along dimension `i`; `k` may lie outside the
    /// lattice. Computed from the box center so that a box symmetric about
    /// zero gives coordinates that are exact negatives of each other.
    pub fn coord(&self, i: usize, k: i64) -> f64 {
        let last = (self.n[i] - 1) as f64;
        let mid = 0.5 * (self.lo[i] + self.hi[i]);
        let half = 0.5 * (self.hi[i] - self.lo[i]);
        mid + half * ((2 * k) as f64 - last) / last
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = idx % self.n[i];
            idx /= self.n[i];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.n).fold(0, |acc, (k, n)| acc * n + k)
    }

    pub fn point(&self, idx: usize) -> StateVec {
        let m = self.multi_index(idx);
        DVector::from_fn(self.dim(), |i, _| self.coord(i, m[i] as i64))
    }

    pub fn points(&self) -> Vec<StateVec> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| *v >= self.lo[i] && *v <= self.hi[i])
    }

    /// Cell index and fractional offset along dimension `i`, with `x` clamped
    /// into the box.
    /// The offset is measured against [`Lattice::coord`], so lattice points
    /// get offset exactly 0 (or 1 on the last cell).
    fn cell(&self, i: usize, x: f64) -> (usize, f64) {
        let n = self.n[i];
        let x = x.clamp(self.coord(i, 0), self.coord(i, n as i64 - 1));
        let t = ((x - self.lo[i]) / self.spacing(i)).clamp(0.0, (n - 1) as f64);
        let mut k = (t.floor() as usize).min(n - 2);
        // rounding in `t` can land one cell off near a node
        if x < self.coord(i, k as i64) && k > 0 {
            k -= 1;
        } else if x >= self.coord(i, k as i64 + 1) && k + 2 < n {
            k += 1;
        }
        let (a, b) = (self.coord(i, k as i64), self.coord(i, k as i64 + 1));
        (k, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Multilinear weights of `x` (clamped into the box) on the corners of
    /// its cell; zero weights are omitted and indices are ascending.
    pub fn barycentric(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let d = self.dim();
        let cells: Vec<(usize, f64)> = (0..d).map(|i| self.cell(i, x[i])).collect();
        let mut out = Vec::with_capacity(1 << d);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut multi = vec![0; d];
            for i in 0..d {
                let (k, f) = cells[i];
                if corner >> (d - 1 - i) & 1 == 1 {
                    w *= f;
                    multi[i] = k + 1;
                } else {
                    w *= 1.0 - f;
                    multi[i] = k;
                }
            }
            if w != 0.0 {
                out.push((self.flat_index(&multi), w));
            }
        }
        out
    }

    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = (0..self.dim())
            .map(|i| {
                let t = ((x[i] - self.lo[i]) / self.spacing(i)).round();
                t.clamp(0.0, (self.n[i] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&multi)
    }
}

/// Values on a lattice with multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValue {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl GridValue {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        ensure_dim("value table", lattice.len(), values.len())?;
        Ok(Self { lattice, values })
    }

    /// Interpolated value; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        if !self.lattice.contains(x) {
            return None;
        }
        Some(self.lattice.barycentric(x).iter().map(|(i, w)| w * self.values[*i]).sum())
    }

    /// Interpolated value with `x` clamped into the box.
    pub fn interpolate_clamped(&self, x: &[f64]) -> f64 {
        self.lattice.barycentric(x).iter().map(|(i, w)| w * self.values[*i]).sum()
    }

    /// Derivative of the multilinear interpolant inside the cell holding `x`:
    /// `∂/∂x_j` when only `dj` is set, `∂²/∂x_j∂x_k` (`j ≠ k`) when both are.
    fn corner_sum(&self, x: &[f64], dj: Option<usize>, dk: Option<usize>) -> f64 {
        let lat = &self.lattice;
        let d = lat.dim();
        let cells: Vec<(usize, f64)> = (0..d).map(|i| lat.cell(i, x[i])).collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut multi = vec![0; d];
            for (i, &(k, f)) in cells.iter().enumerate() {
                let hi = corner >> (d - 1 - i) & 1 == 1;
                multi[i] = if hi { k + 1 } else { k };
                let diff = Some(i) == dj || Some(i) == dk;
                w *= match (diff, hi) {
                    (true, true) => 1.0 / lat.spacing(i),
                    (true, false) => -1.0 / lat.spacing(i),
                    (false, true) => f,
                    (false, false) => 1.0 - f,
                };
            }
            acc += w * self.values[lat.flat_index(&multi)];
        }
        acc
    }
}

impl TestFunction for GridValue {
    fn name(&self) -> String {
        "grid_value".to_string()
    }
    fn value(&self, s: &StateVec) -> f64 {
        self.interpolate_clamped(s.as_slice())
    }
    fn gradient(&self, s: &StateVec) -> DVector<f64> {
        DVector::from_fn(self.lattice.dim(), |j, _| self.corner_sum(s.as_slice(), Some(j), None))
    }
    fn hessian(&self, s: &StateVec) -> DMatrix<f64> {
        let d = self.lattice.dim();
        DMatrix::from_fn(d, d, |j, k| {
            if j == k {
                0.0
            } else {
                self.corner_sum(s.as_slice(), Some(j), Some(k))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_coordinates() {
        let lat = Lattice::cube(2, -2.0, 2.0, 21).unwrap();
        assert_eq!(lat.len(), 441);
        for idx in [0, 17, 220, 440] {
            assert_eq!(lat.flat_index(&lat.multi_index(idx)), idx);
        }
        assert_eq!(lat.point(0).as_slice(), &[-2.0, -2.0]);
        assert_eq!(lat.point(220).as_slice(), &[0.0, 0.0]);
        assert_eq!(lat.point(440).as_slice(), &[2.0, 2.0]);
        assert_eq!(lat.point(1).as_slice(), &[-2.0, -1.8]);
    }

    #[test]
    fn barycentric_weights_reproduce_point() {
        let lat = Lattice::cube(2, -2.0, 2.0, 21).unwrap();
        let x = [0.33, -1.07];
        let w = lat.barycentric(&x);
        assert!(w.len() <= 4);
        let total: f64 = w.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let mut rec = [0.0; 2];
        for (i, wt) in &w {
            let p = lat.point(*i);
            rec[0] += wt * p[0];
            rec[1] += wt * p[1];
        }
        assert!((rec[0] - x[0]).abs() < 1e-14 && (rec[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn lattice_point_has_single_weight() {
        let lat = Lattice::cube(2, -2.0, 2.0, 5).unwrap();
        let w = lat.barycentric(&[1.0, -1.0]);
        assert_eq!(w, vec![(lat.flat_index(&[3, 1]), 1.0)]);
        let w = lat.barycentric(&[2.0, 2.0]);
        assert_eq!(w, vec![(24, 1.0)]);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear_functions() {
        let lat = Lattice::cube(2, -1.0, 1.0, 7).unwrap();
        let f = |p: &StateVec| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let gv = GridValue::new(lat.clone(), lat.points().iter().map(f).collect()).unwrap();
        let x = DVector::from_vec(vec![0.123, -0.456]);
        assert!((gv.interpolate(x.as_slice()).unwrap() - f(&x)).abs() < 1e-14);
        let g = gv.gradient(&x);
        assert!((g[0] - (2.0 + 0.5 * x[1])).abs() < 1e-12);
        assert!((g[1] - (-1.0 + 0.5 * x[0])).abs() < 1e-12);
        let h = gv.hessian(&x);
        assert!((h[(0, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(h[(0, 0)], 0.0);
        assert!(gv.interpolate(&[1.5, 0.0]).is_none());
    }
}
