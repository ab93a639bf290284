//! The heat semigroup `S(t)` on the periodic grid, applied as the spectral
//! multiplier `exp(-|ξ|² t)` of the Gaussian kernel.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{GridField, GridSpec};

/// Relative size of an imaginary residue that is silently discarded on inversion.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;

/// Gaussian heat kernel `G(x,t) = (4πt)^{-n/2} exp(-|x|²/4t)`, with `n = x.len()`.
pub fn heat_kernel(x: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let n = x.len() as f64;
    Ok((4.0 * PI * t).powf(-0.5 * n) * (-r2 / (4.0 * t)).exp())
}

/// `G(· - center, t)` sampled on `spec`.
pub fn sampled_kernel(spec: GridSpec, t: f64, center: &[f64]) -> Result<GridField> {
    heat_kernel(&vec![0.0; spec.dim()], t)?;
    GridField::from_fn(spec, |x| {
        let shifted: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
        heat_kernel(&shifted, t).unwrap_or(0.0)
    })
}

/// Largest time for which whole-space decay estimates are checked on the torus.
pub fn validity_window(spec: &GridSpec) -> f64 {
    let q = spec.half_width() / 4.0;
    q * q
}

#[derive(Clone)]
pub struct HeatPropagator {
    spec: GridSpec,
    frequency_grid: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for HeatPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatPropagator")
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

impl HeatPropagator {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let wavenumber = |k: usize| -> f64 {
            let signed = if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            PI * signed / spec.half_width()
        };
        let frequency_grid = (0..spec.len())
            .map(|flat| {
                let idx = spec.multi_index(flat);
                idx[..spec.dim()]
                    .iter()
                    .map(|&k| wavenumber(k).powi(2))
                    .sum()
            })
            .collect();
        Self {
            spec,
            frequency_grid,
            forward,
            inverse,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// `|ξ|²` for every discrete frequency, in the same flat order as field values.
    pub fn frequency_grid(&self) -> &[f64] {
        &self.frequency_grid
    }

    fn transform(&self, data: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let n = self.spec.points_per_axis();
        let dim = self.spec.dim();
        let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex::default(); n];
        for axis in 0..dim.saturating_sub(1) {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, field: &GridField) -> Result<Vec<Complex<f64>>> {
        self.spec.check_same(field.spec())?;
        let mut data: Vec<Complex<f64>> =
            field.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        Ok(data)
    }

    /// Inverse transform back to a real field. Imaginary parts below
    /// [`IMAGINARY_RESIDUE_TOL`] relative to the coefficient mass are dropped;
    /// anything larger is an error.
    pub fn inverse(&self, mut spectrum: Vec<Complex<f64>>) -> Result<GridField> {
        if spectrum.len() != self.spec.len() {
            return Err(Error::InvalidArgument(format!(
                "spectrum length {} does not match grid size {}",
                spectrum.len(),
                self.spec.len()
            )));
        }
        let norm = 1.0 / self.spec.len() as f64;
        let scale = spectrum.iter().map(|c| c.norm()).sum::<f64>() * norm;
        self.transform(&mut spectrum, &self.inverse);
        let mut residue: f64 = 0.0;
        let mut values = Vec::with_capacity(spectrum.len());
        for (index, c) in spectrum.iter().enumerate() {
            let re = c.re * norm;
            if !re.is_finite() {
                return Err(Error::NonFinite { index });
            }
            residue = residue.max((c.im * norm).abs());
            values.push(re);
        }
        if residue > IMAGINARY_RESIDUE_TOL * scale {
            return Err(Error::ImaginaryResidue { residue, scale });
        }
        Ok(GridField::from_vec_unchecked(self.spec, values))
    }

    /// Multiplies a spectrum by `exp(-|ξ|² t)` in place.
    pub fn propagate_spectrum(&self, spectrum: &mut [Complex<f64>], t: f64) {
        if t == 0.0 {
            return;
        }
        for (c, &k2) in spectrum.iter_mut().zip(&self.frequency_grid) {
            *c *= (-k2 * t).exp();
        }
    }

    /// `S(t) field`. `t = 0` returns the input untouched.
    pub fn apply(&self, field: &GridField, t: f64) -> Result<GridField> {
        self.spec.check_same(field.spec())?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "propagation time must be finite and >= 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(field.clone());
        }
        let mut spectrum = self.forward(field)?;
        self.propagate_spectrum(&mut spectrum, t);
        self.inverse(spectrum)
    }

    /// `S(t) field` for several times from one forward transform.
    pub fn apply_many(&self, field: &GridField, times: &[f64]) -> Result<Vec<GridField>> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "propagation time must be finite and >= 0, got {t}"
            )));
        }
        let spectrum = self.forward(field)?;
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return Ok(field.clone());
                }
                let mut s = spectrum.clone();
                self.propagate_spectrum(&mut s, t);
                self.inverse(s)
            })
            .collect()
    }

    /// `‖S(t)φ‖_r t^{(n/2)(1/q - 1/r)} / ‖φ‖_q`, bounded by 1 in the whole space.
    pub fn smoothing_ratio(&self, field: &GridField, q: f64, r: f64, t: f64) -> Result<f64> {
        check_exponents(q, r)?;
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("smoothing needs t > 0, got {t}")));
        }
        let denom = field.norm(q)?;
        if denom == 0.0 {
            return Err(Error::InvalidArgument(
                "smoothing ratio of a zero field".into(),
            ));
        }
        let evolved = self.apply(field, t)?;
        let alpha = smoothing_exponent(self.spec.dim(), q, r);
        Ok(evolved.norm(r)? * t.powf(alpha) / denom)
    }

    /// Series `(t, t^α ‖S(t)φ‖_r)` with `α = (n/2)(1/q - 1/r)`, which tends to
    /// zero as `t -> 0` for every `φ ∈ L^q`.
    pub fn smoothing_decay_profile(
        &self,
        field: &GridField,
        q: f64,
        r: f64,
        times: &[f64],
    ) -> Result<Vec<(f64, f64)>> {
        check_exponents(q, r)?;
        if q >= r {
            return Err(Error::InvalidArgument(format!(
                "decay profile needs q < r, got q = {q}, r = {r}"
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidArgument("empty time list".into()));
        }
        if times.iter().any(|&t| !(t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "times must be positive and strictly increasing".into(),
            ));
        }
        let alpha = smoothing_exponent(self.spec.dim(), q, r);
        let evolved = self.apply_many(field, times)?;
        times
            .iter()
            .zip(evolved)
            .map(|(&t, u)| Ok((t, t.powf(alpha) * u.norm(r)?)))
            .collect()
    }
}

pub fn smoothing_exponent(dim: usize, q: f64, r: f64) -> f64 {
    let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
    0.5 * dim as f64 * (inv(q) - inv(r))
}

fn check_exponents(q: f64, r: f64) -> Result<()> {
    if q.is_nan() || r.is_nan() || q < 1.0 || r < q {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= q <= r <= inf, got q = {q}, r = {r}"
        )));
    }
    Ok(())
}
