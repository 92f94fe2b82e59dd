//! Periodic-box discretization of R^N.
//!
//! Fields are stored as normalized discrete Fourier coefficients over an
//! `M^N` lattice covering the cube `[-L, L)^N`. Every linear operator used
//! by the solver (heat semigroup, derivatives, Leray projection) is a
//! diagonal Fourier multiplier and is applied exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{arg, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

struct GridData {
    dim: usize,
    points: usize,
    half_width: f64,
    spacing: f64,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// |xi|^2 per mode.
    k2: Vec<f64>,
    /// Integer |m|^2 per mode, so that `k2 = (pi / L)^2 |m|^2`.
    msq: Vec<u32>,
    /// Odd-symbol wavenumbers per mode (`dim` entries each), Nyquist zeroed.
    kappa: Vec<f64>,
    /// Modes kept by the 2/3 rule.
    dealias_keep: Vec<bool>,
}

/// A periodic lattice with `points` samples per axis on `[-L, L)^dim`.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.0.dim)
            .field("points", &self.0.points)
            .field("half_width", &self.0.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.points == other.0.points
                && self.0.half_width == other.0.half_width)
    }
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return arg(format!("grid dimension must be 2 or 3, got {dim}"));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return arg(format!("points per axis must be even and >= 8, got {points}"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return arg(format!("box half-width must be positive, got {half_width}"));
        }
        let len = points.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let scale = PI / half_width;
        let cutoff = (points / 3) as i64;
        let mut k2 = Vec::with_capacity(len);
        let mut msq = Vec::with_capacity(len);
        let mut kappa = Vec::with_capacity(len * dim);
        let mut dealias_keep = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = unflatten(flat, points, dim);
            let mut s = 0.0;
            let mut ms = 0u32;
            let mut keep = true;
            for &i in idx.iter().take(dim) {
                let m = signed_mode(i, points);
                ms += (m * m) as u32;
                let xi = scale * m as f64;
                s += xi * xi;
                kappa.push(if i == points / 2 { 0.0 } else { xi });
                keep &= m.abs() <= cutoff;
            }
            k2.push(s);
            msq.push(ms);
            dealias_keep.push(keep);
        }
        Ok(Grid(Arc::new(GridData {
            dim,
            points,
            half_width,
            spacing: 2.0 * half_width / points as f64,
            len,
            forward,
            inverse,
            k2,
            msq,
            kappa,
            dealias_keep,
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn points(&self) -> usize {
        self.0.points
    }

    pub fn half_width(&self) -> f64 {
        self.0.half_width
    }

    /// Grid spacing `h = 2L / M`.
    pub fn spacing(&self) -> f64 {
        self.0.spacing
    }

    /// Total number of lattice sites, `M^N`.
    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.powi(self.0.dim as i32)
    }

    /// Signed integer mode number for array index `i` along one axis.
    pub fn mode_number(&self, i: usize) -> i64 {
        signed_mode(i, self.0.points)
    }

    /// Physical wavenumber `pi m / L` for array index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI / self.0.half_width * self.mode_number(i) as f64
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.0.half_width + j as f64 * self.0.spacing
    }

    pub fn indices(&self, flat: usize) -> [usize; 3] {
        unflatten(flat, self.0.points, self.0.dim)
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.0.dim)
            .fold(0, |acc, &i| acc * self.0.points + i)
    }

    /// Physical coordinates of lattice site `flat` (unused axes are 0).
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let mut x = [0.0; 3];
        for a in 0..self.0.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// All lattice positions, each truncated to `dim` entries.
    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |flat| self.position(flat))
    }

    pub fn k2(&self, flat: usize) -> f64 {
        self.0.k2[flat]
    }

    /// Integer `|m|^2` of mode `flat`.
    pub fn mode_norm_sq(&self, flat: usize) -> usize {
        self.0.msq[flat] as usize
    }

    /// Largest `|m|^2` on the grid.
    pub fn max_mode_norm_sq(&self) -> usize {
        self.0.dim * (self.0.points / 2).pow(2)
    }

    /// `(pi / L)^2`, the factor turning `|m|^2` into `|xi|^2`.
    pub fn wave_scale_sq(&self) -> f64 {
        (PI / self.0.half_width).powi(2)
    }

    /// Derivative wavenumber along `axis` (zero at the Nyquist index).
    pub fn kappa(&self, flat: usize, axis: usize) -> f64 {
        self.0.kappa[flat * self.0.dim + axis]
    }

    pub fn dealias_keeps(&self, flat: usize) -> bool {
        self.0.dealias_keep[flat]
    }

    /// Unnormalized forward transform over every axis, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.0.forward);
    }

    /// Unnormalized inverse transform over every axis, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.0.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
        let m = self.0.points;
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        let mut lines = vec![ZERO; data.len()];
        for axis in 0..self.0.dim {
            let stride = m.pow((self.0.dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * m;
            let mut line = 0;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut lines[line * m..(line + 1) * m];
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &lines[line * m..(line + 1) * m];
                    for (j, s) in src.iter().enumerate() {
                        data[base + j * stride] = *s;
                    }
                    line += 1;
                }
            }
        }
    }

    /// Normalized coefficients of a real sample array.
    pub fn analyze(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        let norm = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
        buf
    }

    /// Real samples of a coefficient array.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

fn signed_mode(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

fn unflatten(mut flat: usize, m: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    for a in (0..dim).rev() {
        idx[a] = flat % m;
        flat /= m;
    }
    idx
}

/// Fourier coefficients of one real scalar component.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
    pinned: bool,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.len()],
            pinned: false,
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_physical(grid: &Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return arg(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            ));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs: grid.analyze(values),
            pinned: false,
        })
    }

    /// Samples `f` at every lattice site (the argument has `dim` entries).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values: Vec<f64> = grid.positions().map(|x| f(&x[..dim])).collect();
        Self {
            grid: grid.clone(),
            coeffs: grid.analyze(&values),
            pinned: false,
        }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return arg("coefficient array does not match grid size");
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            pinned: false,
        })
    }

    /// Marks the field as living in S'/P: the zero mode is set to 0.
    pub fn pinned(mut self) -> Self {
        self.coeffs[0] = ZERO;
        self.pinned = true;
        self
    }

    pub fn is_pinned(&self) -> bool {
        self.pinned
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.synthesize(&self.coeffs)
    }

    /// Largest imaginary part of the inverse transform relative to the largest
    /// real part; zero for exactly conjugate-symmetric coefficients.
    pub fn realness_defect(&self) -> f64 {
        let mut buf = self.coeffs.clone();
        self.grid.inverse(&mut buf);
        let re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if re == 0.0 {
            im
        } else {
            im / re
        }
    }

    /// Spatial mean (the zero mode).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_physical()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        if self.pinned {
            self.coeffs[0] = ZERO;
        }
        Ok(())
    }

    fn zip(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| op(a, b))
            .collect();
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
            pinned: self.pinned,
        };
        if out.pinned {
            out.coeffs[0] = ZERO;
        }
        Ok(out)
    }

    fn multiplier(&self, symbol: impl Fn(usize) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * symbol(k))
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
            pinned: self.pinned,
        }
    }

    /// `e^{t Delta} f`.
    pub fn heat_apply(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return arg(format!("heat time must be finite and >= 0, got {t}"));
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        let g = &self.grid;
        Ok(self.multiplier(|k| Complex64::new((-t * g.k2(k)).exp(), 0.0)))
    }

    /// `d/dx_axis e^{t Delta} f`, defined for `t > 0` only.
    pub fn heat_grad_apply(&self, t: f64, axis: usize) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return arg(format!(
                "gradient of the heat semigroup needs t > 0, got {t}"
            ));
        }
        if axis >= self.grid.dim() {
            return arg(format!("axis {axis} out of range"));
        }
        let g = &self.grid;
        let mut out =
            self.multiplier(|k| Complex64::new(0.0, g.kappa(k, axis)) * (-t * g.k2(k)).exp());
        out.pinned = false;
        Ok(out)
    }

    /// `e^{-gamma t} e^{t Delta} f`.
    pub fn damped_heat_apply(&self, t: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return arg(format!("damping rate must be >= 0, got {gamma}"));
        }
        let heated = self.heat_apply(t)?;
        if gamma == 0.0 {
            return Ok(heated);
        }
        Ok(heated.scale((-gamma * t).exp()))
    }

    /// Plain spectral derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim() {
            return arg(format!("axis {axis} out of range"));
        }
        let g = &self.grid;
        let mut out = self.multiplier(|k| Complex64::new(0.0, g.kappa(k, axis)));
        out.pinned = false;
        Ok(out)
    }

    pub fn gradient(&self) -> VectorField {
        let components = (0..self.grid.dim())
            .map(|a| self.derivative(a).expect("axis in range"))
            .collect();
        VectorField { components }
    }

    /// Zeroes every mode outside the 2/3-rule box.
    pub fn dealias(&mut self) {
        let g = self.grid.clone();
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            if !g.dealias_keeps(k) {
                *c = ZERO;
            }
        }
    }

    /// `x -> lambda^degree f(lambda x)` for a positive integer `lambda`.
    ///
    /// On the periodic lattice the map is an exact index permutation of the
    /// samples: `lambda x_j` is again a lattice site, modulo the period.
    pub fn rescale(&self, lambda: f64, degree: f64) -> Result<Self> {
        let factor = lattice_factor(lambda)?;
        if factor == 1 {
            return Ok(self.scale(lambda.powf(degree)));
        }
        let g = &self.grid;
        let m = g.points() as i64;
        let shift = (factor as i64 - 1) * m / 2;
        let map = |j: usize| -> usize { (factor as i64 * j as i64 - shift).rem_euclid(m) as usize };
        let values = self.to_physical();
        let amp = lambda.powf(degree);
        let mut out = vec![0.0; g.len()];
        let dim = g.dim();
        for (flat, o) in out.iter_mut().enumerate() {
            let idx = g.indices(flat);
            let mut src = [0usize; 3];
            for a in 0..dim {
                src[a] = map(idx[a]);
            }
            *o = amp * values[g.flatten(&src[..dim])];
        }
        let mut f = Self::from_physical(g, &out)?;
        if self.pinned {
            f = f.pinned();
        }
        Ok(f)
    }
}

fn lattice_factor(lambda: f64) -> Result<usize> {
    let r = lambda.round();
    if !(lambda.is_finite() && lambda >= 1.0 && (lambda - r).abs() <= 1e-12 * r) {
        return arg(format!(
            "scale factor {lambda} is not lattice-compatible (positive integers only)"
        ));
    }
    Ok(r as usize)
}

/// A `dim`-component field on one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<SpectralField>,
}

impl VectorField {
    pub fn new(components: Vec<SpectralField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return arg("vector field needs at least one component");
        };
        if components.len() != first.grid.dim() {
            return arg(format!(
                "expected {} components, got {}",
                first.grid.dim(),
                components.len()
            ));
        }
        if components.iter().any(|c| c.grid != first.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| SpectralField::zeros(grid)).collect(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let dim = grid.dim();
        let mut cols = vec![Vec::with_capacity(grid.len()); dim];
        for x in grid.positions() {
            let v = f(&x[..dim]);
            for a in 0..dim {
                cols[a].push(v[a]);
            }
        }
        Self {
            components: cols
                .iter()
                .map(|c| SpectralField::from_physical(grid, c).expect("sized"))
                .collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[SpectralField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &SpectralField {
        &self.components[axis]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SpectralField::is_zero)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale(s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.axpy(s, b)?;
        }
        Ok(())
    }

    pub fn heat_apply(&self, t: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.heat_apply(t))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    /// Spectral divergence `sum_j i kappa_j u_j`.
    pub fn divergence(&self) -> SpectralField {
        let g = self.grid().clone();
        let mut coeffs = vec![ZERO; g.len()];
        for (axis, comp) in self.components.iter().enumerate() {
            for (k, (o, c)) in coeffs.iter_mut().zip(comp.coeffs()).enumerate() {
                *o += Complex64::new(0.0, g.kappa(k, axis)) * c;
            }
        }
        SpectralField::from_coeffs(&g, coeffs).expect("sized")
    }

    /// `max_k |kappa . u_k| / max_k |u_k|` (0 for the zero field).
    pub fn divergence_defect(&self) -> f64 {
        let g = self.grid();
        let mut div_max: f64 = 0.0;
        let mut mag_max: f64 = 0.0;
        for k in 0..g.len() {
            let mut d = ZERO;
            for (axis, comp) in self.components.iter().enumerate() {
                let c = comp.coeffs()[k];
                d += c * g.kappa(k, axis);
                mag_max = mag_max.max(c.norm());
            }
            div_max = div_max.max(d.norm());
        }
        if mag_max == 0.0 {
            0.0
        } else {
            div_max / mag_max
        }
    }

    /// Leray-Helmholtz projection with symbol `delta_jk - kappa_j kappa_k / |kappa|^2`;
    /// modes with `kappa = 0` pass through unchanged.
    pub fn leray_project(&self) -> Self {
        let g = self.grid().clone();
        let dim = g.dim();
        let mut out = self.clone();
        for k in 0..g.len() {
            let mut kap = [0.0; 3];
            let mut kk = 0.0;
            for (a, slot) in kap.iter_mut().enumerate().take(dim) {
                *slot = g.kappa(k, a);
                kk += *slot * *slot;
            }
            if kk == 0.0 {
                continue;
            }
            let mut dot = ZERO;
            for (a, &ka) in kap.iter().enumerate().take(dim) {
                dot += self.components[a].coeffs()[k] * ka;
            }
            let dot = dot / kk;
            for (a, &ka) in kap.iter().enumerate().take(dim) {
                out.components[a].coeffs_mut()[k] -= dot * ka;
            }
        }
        out
    }

    pub fn rescale(&self, lambda: f64, degree: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.rescale(lambda, degree))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid().len()];
        for comp in &self.components {
            for (a, v) in acc.iter_mut().zip(comp.to_physical()) {
                *a += v * v;
            }
        }
        acc.iter_mut().for_each(|a| *a = a.sqrt());
        acc
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.components
            .iter()
            .map(SpectralField::max_abs_coeff)
            .fold(0.0, f64::max)
    }
}

/// Heat semigroup applied to a vector field.
pub fn heat_apply(field: &SpectralField, t: f64) -> Result<SpectralField> {
    field.heat_apply(t)
}

pub fn heat_grad_apply(field: &SpectralField, t: f64, axis: usize) -> Result<SpectralField> {
    field.heat_grad_apply(t, axis)
}

pub fn damped_heat_apply(field: &SpectralField, t: f64, gamma: f64) -> Result<SpectralField> {
    field.damped_heat_apply(t, gamma)
}

pub fn leray_project(u: &VectorField) -> VectorField {
    u.leray_project()
}

pub fn rescale_field(field: &SpectralField, lambda: f64, degree: f64) -> Result<SpectralField> {
    field.rescale(lambda, degree)
}
