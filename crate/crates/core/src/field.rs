//! Uniform periodic grids on `[-L, L]^n` and real fields sampled on them.
//!
//! Lattice point `i` along an axis sits at `x_i = -L + i h` with `h = 2L / N`,
//! so the origin is always a lattice point. Values are stored row-major with
//! axis 0 varying slowest. Integrals and norms use the midpoint rule: every
//! lattice point carries weight `h^n`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass fraction in the outer shell above which a field is considered too wide
/// for the periodic box to stand in for the whole space.
pub const OUTER_SHELL_WARN_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} must be positive and finite"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be a power of two >= 8"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Quadrature weight `h^n` of a single lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, axis_index: usize) -> f64 {
        -self.half_width + axis_index as f64 * self.spacing()
    }

    /// Per-axis indices of a flat row-major index.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        idx
    }

    /// Physical position of a flat index; unused trailing axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: format!("{self:?}"),
                right: format!("{other:?}"),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len())
            .map(|i| f(&spec.point(i)[..spec.dim()]))
            .collect();
        Self::new(spec, values)
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete `L^q` norm, `(h^n Σ |f_i|^q)^{1/q}`; pass `f64::INFINITY` for the max norm.
    pub fn norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "norm exponent {q} must lie in [1, inf]"
            )));
        }
        Ok(if q.is_infinite() {
            self.norm_inf()
        } else if q == 1.0 {
            self.norm_l1()
        } else {
            let sum: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
            (self.spec.cell_volume() * sum).powf(1.0 / q)
        })
    }

    pub fn norm_l1(&self) -> f64 {
        self.spec.cell_volume() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Signed integral `h^n Σ f_i`.
    pub fn integral(&self) -> f64 {
        self.spec.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max{f, 0}` pointwise.
    pub fn positive_part(&self) -> Self {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    /// `min{f, 0}` pointwise.
    pub fn negative_part(&self) -> Self {
        self.map(|v| if v < 0.0 { v } else { 0.0 })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(Self::from_vec_unchecked(
            self.spec,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Fraction of `‖f‖₁` carried by points with some coordinate outside `[-L/2, L/2]`.
    pub fn outer_shell_fraction(&self) -> f64 {
        let total = self.norm_l1();
        if total == 0.0 {
            return 0.0;
        }
        let half = 0.5 * self.spec.half_width;
        let outer: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.spec.point(*i)[..self.spec.dim()]
                    .iter()
                    .any(|x| x.abs() > half)
            })
            .map(|(_, v)| v.abs())
            .sum::<f64>()
            * self.spec.cell_volume();
        outer / total
    }

    /// Logs a warning when too much mass sits near the periodic boundary.
    /// Returns the measured fraction.
    pub fn check_support(&self, label: &str) -> f64 {
        let fraction = self.outer_shell_fraction();
        if fraction > OUTER_SHELL_WARN_FRACTION {
            log::warn!(
                "{label}: {fraction:.3e} of the mass lies in the outer shell of the box; \
                 periodic wraparound may be visible"
            );
        }
        fraction
    }

    /// Binary layout: `dim: u32`, `half_width: f64`, `N: u32`, then `N^n` values,
    /// all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.spec.dim as u32).to_le_bytes())?;
        out.write_all(&self.spec.half_width.to_le_bytes())?;
        out.write_all(&(self.spec.points_per_axis as u32).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let bad = |e: std::io::Error| Error::InvalidArgument(format!("field header: {e}"));
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4).map_err(bad)?;
        let dim = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b8).map_err(bad)?;
        let half_width = f64::from_le_bytes(b8);
        input.read_exact(&mut b4).map_err(bad)?;
        let n = u32::from_le_bytes(b4) as usize;
        let spec = GridSpec::new(dim, half_width, n)?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            input
                .read_exact(&mut b8)
                .map_err(|e| Error::InvalidArgument(format!("field body: {e}")))?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::new(spec, values)
    }

    /// CSV with columns `i0[,i1,i2],x0[,x1,x2],value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.spec.dim;
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..dim).map(|a| format!("i{a}")).collect();
        header.extend((0..dim).map(|a| format!("x{a}")));
        header.push("value".into());
        writer.write_record(&header)?;
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.spec.multi_index(flat);
            let x = self.spec.point(flat);
            let mut row: Vec<String> = idx[..dim].iter().map(|i| i.to_string()).collect();
            row.extend(x[..dim].iter().map(|x| x.to_string()));
            row.push(v.to_string());
            writer.write_record(&row)?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// True iff `a_i <= b_i + slack` at every lattice point.
pub fn pointwise_leq(a: &GridField, b: &GridField, slack: f64) -> Result<bool> {
    Ok(first_violation(a, b, slack)?.is_none())
}

/// First index where `a_i > b_i + slack`, with the offending pair.
pub fn first_violation(a: &GridField, b: &GridField, slack: f64) -> Result<Option<(usize, f64, f64)>> {
    a.spec.check_same(&b.spec)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .enumerate()
        .find(|(_, (&x, &y))| x > y + slack)
        .map(|(i, (&x, &y))| (i, x, y)))
}
