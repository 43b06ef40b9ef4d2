//! Uniform grids on `[0, L]^dim` with homogeneous Dirichlet boundary.
//!
//! Only interior nodes are stored. Node `j` (0-based) along an axis sits at
//! `x = (j + 1) h` with `h = L / (n + 1)`; the boundary nodes at `x = 0` and
//! `x = L` are implicit zeros. 2D fields are stored row-major with `x`
//! varying fastest.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    /// Uniform grid with `n` interior nodes per axis.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3 interior nodes, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        Ok(Self {
            dim,
            n,
            length,
            h: length / (n as f64 + 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of stored (interior) nodes.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Quadrature weight of one node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Physical coordinates of node `idx`; unused axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.n;
        let iy = idx / self.n;
        let x = (ix + 1) as f64 * self.h;
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, (iy + 1) as f64 * self.h]
        }
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (1..=self.n).map(|j| j as f64 * self.h).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.node_count() {
            return Err(Error::ShapeMismatch {
                expected: self.node_count(),
                found: len,
            });
        }
        Ok(())
    }

    /// Five-point (3-point in 1D) Laplacian of raw nodal values into `out`.
    pub fn laplacian_into(&self, src: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(src.len())?;
        self.check_len(out.len())?;
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let at = |i: isize| -> f64 {
            if i < 0 || i as usize >= n {
                0.0
            } else {
                src[i as usize]
            }
        };
        match self.dim {
            1 => {
                for j in 0..n {
                    let j_ = j as isize;
                    out[j] = (at(j_ - 1) - 2.0 * src[j] + at(j_ + 1)) * inv_h2;
                }
            }
            _ => {
                for iy in 0..n {
                    for ix in 0..n {
                        let k = iy * n + ix;
                        let west = if ix > 0 { src[k - 1] } else { 0.0 };
                        let east = if ix + 1 < n { src[k + 1] } else { 0.0 };
                        let south = if iy > 0 { src[k - n] } else { 0.0 };
                        let north = if iy + 1 < n { src[k + n] } else { 0.0 };
                        out[k] = (west + east + south + north - 4.0 * src[k]) * inv_h2;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        let mut out = vec![0.0; f.values.len()];
        self.laplacian_into(&f.values, &mut out)?;
        Ok(Field {
            grid: *self,
            values: out,
        })
    }

    /// Weighted discrete L^p norm `(sum w |f|^p h^dim)^(1/p)`.
    pub fn integrate_lp(&self, f: &Field, p: f64, weight: Option<&Field>) -> Result<f64> {
        self.check_field(f)?;
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        if let Some(w) = weight {
            self.check_field(w)?;
            if let Some(bad) = w.values.iter().find(|&&x| !(x >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "quadrature weight must be nonnegative, found {bad}"
                )));
            }
        }
        let scale = f.sup_norm();
        if scale == 0.0 {
            return Ok(0.0);
        }
        // Normalize by the sup norm so large p does not overflow.
        let sum: f64 = match weight {
            Some(w) => f
                .values
                .iter()
                .zip(&w.values)
                .map(|(x, wi)| wi * (x.abs() / scale).powf(p))
                .sum(),
            None => f.values.iter().map(|x| (x.abs() / scale).powf(p)).sum(),
        };
        Ok(scale * (sum * self.cell_volume()).powf(1.0 / p))
    }

    /// Centered-difference gradient magnitude at each node, using the zero
    /// boundary value for neighbours outside the interior.
    pub fn gradient_magnitude(&self, f: &Field) -> Result<Field> {
        self.check_field(f)?;
        let n = self.n;
        let src = &f.values;
        let inv_2h = 0.5 / self.h;
        let mut out = vec![0.0; src.len()];
        match self.dim {
            1 => {
                for j in 0..n {
                    let left = if j > 0 { src[j - 1] } else { 0.0 };
                    let right = if j + 1 < n { src[j + 1] } else { 0.0 };
                    out[j] = ((right - left) * inv_2h).abs();
                }
            }
            _ => {
                for iy in 0..n {
                    for ix in 0..n {
                        let k = iy * n + ix;
                        let west = if ix > 0 { src[k - 1] } else { 0.0 };
                        let east = if ix + 1 < n { src[k + 1] } else { 0.0 };
                        let south = if iy > 0 { src[k - n] } else { 0.0 };
                        let north = if iy + 1 < n { src[k + n] } else { 0.0 };
                        let gx = (east - west) * inv_2h;
                        let gy = (north - south) * inv_2h;
                        out[k] = gx.hypot(gy);
                    }
                }
            }
        }
        Ok(Field {
            grid: *self,
            values: out,
        })
    }

    pub fn gradient_sup(&self, f: &Field) -> Result<f64> {
        Ok(self.gradient_magnitude(f)?.sup_norm())
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid != *self {
            return Err(Error::GridMismatch);
        }
        self.check_len(f.values.len())
    }
}

/// One scalar grid function over the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    /// Samples `f(x, y)` at every interior node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| {
                let [x, y] = grid.coords(i);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quadrature of `f` itself (signed), `sum f h^dim`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite(format!(
                "{what}: node {i} holds {}",
                self.values[i]
            ))),
        }
    }

    /// Writes the plain-text snapshot format: a `dim n h t` header line
    /// followed by one value per line in row-major node order.
    pub fn write_snapshot<W: Write>(&self, t: f64, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(24 * (self.values.len() + 1));
        let g = &self.grid;
        writeln!(buf, "{} {} {:e} {:e}", g.dim, g.n, g.h, t).expect("string write");
        for v in &self.values {
            writeln!(buf, "{v:e}").expect("string write");
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Reads a single-field snapshot written by [`Field::write_snapshot`],
    /// returning the field and its time stamp.
    pub fn read_snapshot<R: BufRead>(input: R) -> Result<(Field, f64)> {
        let mut blocks = Self::read_snapshots(input)?;
        if blocks.len() != 1 {
            return Err(Error::Snapshot(format!("expected one field block, found {}", blocks.len())));
        }
        Ok(blocks.remove(0))
    }

    /// Reads consecutive snapshot blocks (one per species in multi-species
    /// files). The grid length is reconstructed from `h`.
    pub fn read_snapshots<R: BufRead>(input: R) -> Result<Vec<(Field, f64)>> {
        let mut out = Vec::new();
        let mut current: Option<(Grid, f64, Vec<f64>)> = None;
        for line in input.lines() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            if current.is_none() {
                current = Some(parse_header(s)?);
                continue;
            }
            let (grid, t, values) = current.as_mut().expect("checked above");
            values.push(
                s.parse::<f64>()
                    .map_err(|_| Error::Snapshot(format!("bad value {s:?}")))?,
            );
            if values.len() == grid.node_count() {
                let (grid, t, values) = (*grid, *t, std::mem::take(values));
                out.push((Field::new(grid, values)?, t));
                current = None;
            }
        }
        if let Some((grid, _, values)) = current {
            return Err(Error::Snapshot(format!(
                "truncated block: {} of {} values",
                values.len(),
                grid.node_count()
            )));
        }
        if out.is_empty() {
            return Err(Error::Snapshot("empty snapshot".into()));
        }
        Ok(out)
    }
}

fn parse_header(header: &str) -> Result<(Grid, f64, Vec<f64>)> {
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::Snapshot(format!("bad header line {header:?}")));
    }
    let parse_err = |what: &str| Error::Snapshot(format!("bad {what} in header {header:?}"));
    let dim: usize = parts[0].parse().map_err(|_| parse_err("dim"))?;
    let n: usize = parts[1].parse().map_err(|_| parse_err("n"))?;
    let h: f64 = parts[2].parse().map_err(|_| parse_err("h"))?;
    let t: f64 = parts[3].parse().map_err(|_| parse_err("t"))?;
    let grid = Grid::new(dim, n, h * (n as f64 + 1.0))?;
    Ok((grid, t, Vec::with_capacity(grid.node_count())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn build_uniform_grid_examples() {
        let g = Grid::new(1, 3, 1.0).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.axis_coords(), vec![0.25, 0.5, 0.75]);

        let g = Grid::new(2, 4, 2.0).unwrap();
        assert!((g.h() - 0.4).abs() < 1e-15);
        assert_eq!(g.node_count(), 16);

        assert!(Grid::new(3, 8, 1.0).is_err());
        assert!(Grid::new(1, 2, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(1, 8, -1.0).is_err());
    }

    #[test]
    fn laplacian_of_spike() {
        let g = Grid::new(1, 3, 1.0).unwrap();
        let f = Field::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        let lap = g.laplacian(&f).unwrap();
        assert_eq!(lap.values(), &[16.0, -32.0, 16.0]);

        let g = Grid::new(1, 7, 2.0).unwrap();
        let mut v = vec![0.0; 7];
        v[3] = 1.0;
        let lap = g.laplacian(&Field::new(g, v).unwrap()).unwrap();
        assert_eq!(lap.values(), &[0.0, 0.0, 16.0, -32.0, 16.0, 0.0, 0.0]);
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = Grid::new(2, 5, 1.0).unwrap();
        let lap = g.laplacian(&Field::zeros(g)).unwrap();
        assert!(lap.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_of_sine_within_taylor_bound() {
        let g = Grid::new(1, 128, 1.0).unwrap();
        let f = Field::from_fn(g, |x, _| (PI * x).sin());
        let lap = g.laplacian(&f).unwrap();
        let bound = PI.powi(4) * g.h().powi(2) / 12.0;
        for (i, v) in lap.values().iter().enumerate() {
            let exact = -PI * PI * (PI * g.coords(i)[0]).sin();
            assert!((v - exact).abs() <= bound, "node {i}: {v} vs {exact}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0; 3]).is_err());
        let other = Grid::new(1, 5, 1.0).unwrap();
        assert!(g.laplacian(&Field::zeros(other)).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = Grid::new(1, 128, 1.0).unwrap();
        let one = Field::constant(g, 1.0);
        let norm = g.integrate_lp(&one, 2.0, None).unwrap();
        assert!((norm - 1.0).abs() <= g.h());

        let zero = Field::zeros(g);
        for p in [1.0, 2.0, 7.5, 64.0] {
            assert_eq!(g.integrate_lp(&zero, p, None).unwrap(), 0.0);
        }

        let s = Field::from_fn(g, |x, _| (PI * x).sin());
        let norm = g.integrate_lp(&s, 2.0, None).unwrap();
        assert!((norm - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn lp_norm_rejects_negative_weight_and_small_p() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let f = Field::constant(g, 1.0);
        let w = Field::new(g, vec![1.0, -0.5, 1.0, 1.0]).unwrap();
        assert!(g.integrate_lp(&f, 2.0, Some(&w)).is_err());
        assert!(g.integrate_lp(&f, 0.5, None).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        assert_eq!(g.gradient_sup(&Field::zeros(g)).unwrap(), 0.0);

        // f_j = j h: interior slope 1, but the right-edge node sees the zero
        // boundary value: |0 - f_{n-1}| / 2h = (n - 1) / 2.
        let ramp = Field::from_fn(g, |x, _| x);
        let grad = g.gradient_magnitude(&ramp).unwrap();
        assert!((grad.values()[5] - 1.0).abs() < 1e-12);
        let edge = grad.values()[15];
        assert!((edge - 7.5).abs() < 1e-12);
        assert_eq!(g.gradient_sup(&ramp).unwrap(), edge);

        let g = Grid::new(1, 128, 1.0).unwrap();
        let s = Field::from_fn(g, |x, _| (PI * x).sin());
        assert!((g.gradient_sup(&s).unwrap() - PI).abs() < 1e-2);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(2, 3, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| x * 10.0 + y);
        let mut buf = Vec::new();
        f.write_snapshot(0.125, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 3 2.5e-1 1.25e-1\n"));
        assert_eq!(text.lines().count(), 10);
        let (back, t) = Field::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(back.values(), f.values());
    }
}
