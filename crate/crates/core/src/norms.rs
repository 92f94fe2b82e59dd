//! Discrete Morrey, Besov-Morrey and solution-space norms.
//!
//! All Morrey evaluations are finite maxima over sampled ball centers and
//! radii, so they are lower estimates of the continuum supremum.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::TimeGrid;
use crate::error::{arg, Result};
use crate::experiments::admissibility::{check_admissible, ExponentSet};
use crate::solver::{InitialData, StateTuple};
use crate::spectral::{Grid, SpectralField, VectorField};

/// Outer and inner exponents of `M^p_{p1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyIndex {
    pub p: f64,
    pub p1: f64,
}

impl MorreyIndex {
    pub fn new(p: f64, p1: f64) -> Result<Self> {
        if p.is_infinite() && p1.is_infinite() && p > 0.0 && p1 > 0.0 {
            return Ok(Self::sup());
        }
        if !(p.is_finite() && p1.is_finite() && p1 >= 1.0 && p1 <= p) {
            return arg(format!("Morrey index needs 1 <= p1 <= p < inf, got ({p}, {p1})"));
        }
        Ok(Self { p, p1 })
    }

    /// The sup-norm case `p = p1 = inf`.
    pub fn sup() -> Self {
        Self {
            p: f64::INFINITY,
            p1: f64::INFINITY,
        }
    }

    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn is_sup(&self) -> bool {
        self.p.is_infinite()
    }

    /// `M^p_p = L^p`.
    pub fn is_lebesgue(&self) -> bool {
        self.p1 >= self.p * (1.0 - 1e-12)
    }
}

/// Ball centers (every `center_stride`-th lattice site per axis) and radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSampling {
    center_stride: usize,
    radii: Vec<f64>,
}

/// Distinct lattice distances `sqrt(k) <= max_index` between sites of a
/// `dim`-dimensional integer lattice, in index units and increasing.
pub fn lattice_distances(dim: usize, max_index: f64) -> Vec<f64> {
    let kmax = (max_index * max_index + 1e-9).floor() as usize;
    let mut hit = vec![false; kmax + 1];
    let m = (max_index + 1e-9).floor() as usize;
    let squares: Vec<usize> = (0..=m).map(|i| i * i).collect();
    fn fill(dim: usize, acc: usize, squares: &[usize], hit: &mut [bool]) {
        if dim == 0 {
            if acc < hit.len() {
                hit[acc] = true;
            }
            return;
        }
        for &s in squares {
            if acc + s >= hit.len() {
                break;
            }
            fill(dim - 1, acc + s, squares, hit);
        }
    }
    fill(dim, 0, &squares, &mut hit);
    (1..=kmax)
        .filter(|&k| hit[k])
        .map(|k| (k as f64).sqrt())
        .collect()
}

impl BallSampling {
    pub fn new(grid: &Grid, center_stride: usize, radii: Vec<f64>) -> Result<Self> {
        if center_stride == 0 {
            return arg("center stride must be >= 1");
        }
        if radii.is_empty() {
            return arg("at least one radius is required");
        }
        if radii[0] < grid.spacing() * (1.0 - 1e-12) {
            return arg(format!(
                "smallest radius {} is below the grid spacing {}",
                radii[0],
                grid.spacing()
            ));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
            return arg("radii must be finite and strictly increasing");
        }
        Ok(Self {
            center_stride,
            radii,
        })
    }

    /// Largest radius whose lattice ball does not wrap around the torus.
    pub fn radius_cap(grid: &Grid) -> f64 {
        (grid.points() / 2 - 1) as f64 * grid.spacing()
    }

    /// Dense default: every lattice distance up to `8h`, then radii growing
    /// by `2^(1/4)` up to the cap; center stride `clamp(M/16, 1, 4)`.
    pub fn default_for(grid: &Grid) -> Self {
        let h = grid.spacing();
        let cap_idx = (grid.points() / 2 - 1) as f64;
        let mut radii: Vec<f64> = lattice_distances(grid.dim(), cap_idx.min(8.0))
            .into_iter()
            .map(|d| d * h)
            .collect();
        let mut r = 8.0;
        loop {
            r *= 2f64.powf(0.25);
            if r >= cap_idx {
                break;
            }
            radii.push(r * h);
        }
        if cap_idx > 8.0 {
            radii.push(cap_idx * h);
        }
        let stride = (grid.points() / 16).clamp(1, 4);
        Self {
            center_stride: stride,
            radii,
        }
    }

    /// Cheap preset: radii `h 2^j` up to the cap (cap included).
    pub fn dyadic(grid: &Grid, center_stride: usize) -> Self {
        let h = grid.spacing();
        let cap_idx = (grid.points() / 2 - 1) as f64;
        let mut radii = Vec::new();
        let mut r = 1.0;
        while r < cap_idx {
            radii.push(r * h);
            r *= 2.0;
        }
        radii.push(cap_idx * h);
        Self {
            center_stride: center_stride.max(1),
            radii,
        }
    }

    /// Every center and every distinct lattice radius up to the cap.
    pub fn exhaustive(grid: &Grid) -> Self {
        let h = grid.spacing();
        let cap_idx = (grid.points() / 2 - 1) as f64;
        Self {
            center_stride: 1,
            radii: lattice_distances(grid.dim(), cap_idx)
                .into_iter()
                .map(|d| d * h)
                .collect(),
        }
    }

    pub fn center_stride(&self) -> usize {
        self.center_stride
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

type BallKey = (usize, usize, usize);

struct BallCache {
    map: HashMap<BallKey, Arc<Vec<f64>>>,
    bytes: usize,
}

static BALLS: LazyLock<Mutex<BallCache>> = LazyLock::new(|| {
    Mutex::new(BallCache {
        map: HashMap::new(),
        bytes: 0,
    })
});

const BALL_CACHE_BYTES: usize = 256 << 20;

/// Normalized spectrum of the periodic lattice ball `|j| <= sqrt(kmax)`.
fn ball_spectrum(grid: &Grid, kmax: usize) -> Arc<Vec<f64>> {
    let key = (grid.dim(), grid.points(), kmax);
    if let Some(b) = BALLS.lock().expect("ball cache").map.get(&key) {
        return b.clone();
    }
    let m = grid.points();
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (flat, b) in buf.iter_mut().enumerate() {
        let idx = grid.indices(flat);
        let mut d2 = 0;
        for &i in idx.iter().take(grid.dim()) {
            let d = i.min(m - i);
            d2 += d * d;
        }
        if d2 <= kmax {
            *b = Complex64::new(1.0, 0.0);
        }
    }
    grid.forward(&mut buf);
    let norm = 1.0 / grid.len() as f64;
    let spec = Arc::new(buf.iter().map(|c| c.re * norm).collect::<Vec<_>>());
    let mut cache = BALLS.lock().expect("ball cache");
    let size = spec.len() * std::mem::size_of::<f64>();
    if cache.bytes + size > BALL_CACHE_BYTES {
        cache.map.clear();
        cache.bytes = 0;
    }
    cache.bytes += size;
    cache.map.insert(key, spec.clone());
    spec
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Morrey norm of real samples on `grid`.
pub fn morrey_norm_values(
    grid: &Grid,
    values: &[f64],
    idx: MorreyIndex,
    sampling: &BallSampling,
) -> f64 {
    let scale = sup_abs(values);
    if scale == 0.0 {
        return 0.0;
    }
    if idx.is_sup() {
        return scale;
    }
    let vol = grid.cell_volume();
    if idx.is_lebesgue() {
        let p = idx.p;
        let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
        return scale * (vol * s).powf(1.0 / p);
    }
    let (p, p1) = (idx.p, idx.p1);
    let n = grid.dim() as f64;
    let h = grid.spacing();
    let mut g: Vec<Complex64> = values
        .iter()
        .map(|v| Complex64::new((v.abs() / scale).powf(p1), 0.0))
        .collect();
    grid.forward(&mut g);

    let stride = sampling.center_stride;
    let centers: Vec<usize> = (0..grid.len())
        .filter(|&flat| {
            grid.indices(flat)
                .iter()
                .take(grid.dim())
                .all(|&i| i % stride == 0)
        })
        .collect();

    let mut best: f64 = 0.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut last_kmax = usize::MAX;
    for &radius in &sampling.radii {
        let rr = radius / h;
        let kmax = (rr * rr + 1e-9).floor() as usize;
        let weight = radius.powf(n / p - n / p1);
        if kmax != last_kmax {
            let ball = ball_spectrum(grid, kmax);
            for ((b, gk), bk) in buf.iter_mut().zip(&g).zip(ball.iter()) {
                *b = gk * *bk;
            }
            grid.inverse(&mut buf);
            last_kmax = kmax;
        }
        let local = centers
            .iter()
            .map(|&c| buf[c].re)
            .fold(0.0, f64::max);
        best = best.max(weight * (vol * local.max(0.0)).powf(1.0 / p1));
    }
    scale * best
}

/// `max over (x0, R) of R^(N/p - N/p1) ||f||_{L^p1(B(x0, R))}` on the sampled balls.
pub fn morrey_norm(field: &SpectralField, idx: MorreyIndex, sampling: &BallSampling) -> f64 {
    morrey_norm_values(field.grid(), &field.to_physical(), idx, sampling)
}

/// Morrey norm of the pointwise Euclidean magnitude.
pub fn morrey_norm_vector(u: &VectorField, idx: MorreyIndex, sampling: &BallSampling) -> f64 {
    morrey_norm_values(u.grid(), &u.magnitude(), idx, sampling)
}

fn magnitude_of(parts: &[SpectralField]) -> Vec<f64> {
    if parts.len() == 1 {
        return parts[0].to_physical();
    }
    let mut acc = vec![0.0; parts[0].grid().len()];
    for c in parts {
        for (a, v) in acc.iter_mut().zip(c.to_physical()) {
            *a += v * v;
        }
    }
    acc.iter_mut().for_each(|a| *a = a.sqrt());
    acc
}

fn drop_mean(f: &SpectralField) -> SpectralField {
    let mut g = f.clone();
    g.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    g
}

fn besov_heat_parts(
    parts: &[SpectralField],
    idx: MorreyIndex,
    s: f64,
    times: &TimeGrid,
    sampling: &BallSampling,
) -> Result<f64> {
    if !(s < 0.0) {
        return arg(format!(
            "heat characterization requires a negative regularity index, got s = {s}"
        ));
    }
    let base: Vec<SpectralField> = parts.iter().map(drop_mean).collect();
    if base.iter().all(SpectralField::is_zero) {
        return Ok(0.0);
    }
    let grid = base[0].grid().clone();
    let mut best: f64 = 0.0;
    for t in times.times() {
        let heated = base
            .iter()
            .map(|f| f.heat_apply(t))
            .collect::<Result<Vec<_>>>()?;
        let m = morrey_norm_values(&grid, &magnitude_of(&heated), idx, sampling);
        best = best.max(t.powf(-s / 2.0) * m);
    }
    Ok(best)
}

/// `sup_t t^(-s/2) ||e^(t Delta) f||_{M^p_{p1}}` over `times`; the zero mode
/// is discarded (distributions modulo polynomials).
pub fn besov_morrey_norm_heat(
    field: &SpectralField,
    idx: MorreyIndex,
    s: f64,
    times: &TimeGrid,
    sampling: &BallSampling,
) -> Result<f64> {
    besov_heat_parts(std::slice::from_ref(field), idx, s, times, sampling)
}

pub fn besov_morrey_norm_heat_vector(
    u: &VectorField,
    idx: MorreyIndex,
    s: f64,
    times: &TimeGrid,
    sampling: &BallSampling,
) -> Result<f64> {
    besov_heat_parts(u.components(), idx, s, times, sampling)
}

/// Default heat time grid: 64 geometric points on `[h^2, L^2]`.
pub fn besov_time_grid(grid: &Grid) -> TimeGrid {
    let h = grid.spacing();
    let l = grid.half_width();
    TimeGrid::geometric(h * h, l * l, 64).expect("valid geometric grid")
}

/// Dyadic Littlewood-Paley blocks `phi_j(xi) = chi(2^-j |xi|) - chi(2^(1-j) |xi|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LittlewoodPaleyBank {
    pub j_min: i32,
    pub j_max: i32,
}

fn bump_edge(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

impl LittlewoodPaleyBank {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return arg(format!("empty block window [{j_min}, {j_max}]"));
        }
        Ok(Self { j_min, j_max })
    }

    /// Window whose blocks sum to one on every nonzero wavenumber of `grid`.
    pub fn for_grid(grid: &Grid) -> Self {
        let xi_min = std::f64::consts::PI / grid.half_width();
        let xi_max = std::f64::consts::PI / grid.spacing() * (grid.dim() as f64).sqrt();
        let j_min = (1.2 * xi_min).log2().floor() as i32;
        let j_max = (xi_max / 1.5).log2().ceil() as i32;
        Self { j_min, j_max }
    }

    /// Smooth cutoff: 1 on `[0, 3/2]`, 0 from `5/3` on.
    pub fn chi(rho: f64) -> f64 {
        let t = (rho - 1.5) / (5.0 / 3.0 - 1.5);
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let a = bump_edge(t);
        let b = bump_edge(1.0 - t);
        b / (a + b)
    }

    pub fn phi(j: i32, xi: f64) -> f64 {
        let s = 2f64.powi(-j);
        Self::chi(s * xi) - Self::chi(2.0 * s * xi)
    }

    /// Fourier block `j` of `field`.
    pub fn block(&self, field: &SpectralField, j: i32) -> SpectralField {
        let g = field.grid().clone();
        let coeffs = field
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c * Self::phi(j, g.k2(k).sqrt()))
            .collect();
        SpectralField::from_coeffs(&g, coeffs).expect("sized")
    }
}

/// `max_j 2^(s j) ||phi_j(D) f||_{M^p_{p1}}` over the bank window.
pub fn besov_morrey_norm_lp(
    field: &SpectralField,
    idx: MorreyIndex,
    s: f64,
    bank: &LittlewoodPaleyBank,
    sampling: &BallSampling,
) -> f64 {
    let f = drop_mean(field);
    if f.is_zero() {
        return 0.0;
    }
    (bank.j_min..=bank.j_max)
        .map(|j| 2f64.powf(s * j as f64) * morrey_norm(&bank.block(&f, j), idx, sampling))
        .fold(0.0, f64::max)
}

/// Weighted norms of one state: `t^l_q ||n||`, `||c||_inf`, `t^mu_r ||grad c||`,
/// `t^mu_r ||grad v||`, `t^mu_p ||u||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XNormSample {
    pub t: f64,
    pub n: f64,
    pub c_sup: f64,
    pub c_grad: f64,
    pub v_grad: f64,
    pub u: f64,
}

/// Sup-in-time weighted norms of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XNormsRecord {
    pub n: f64,
    pub c: f64,
    pub v: f64,
    pub u: f64,
    pub total: f64,
    pub samples: Vec<XNormSample>,
}

/// Morrey indices `(q, q1)`, `(r, r1)`, `(p, p1)` of an exponent set.
pub fn indices_of(exps: &ExponentSet) -> (MorreyIndex, MorreyIndex, MorreyIndex) {
    (
        MorreyIndex { p: exps.q, p1: exps.q1 },
        MorreyIndex { p: exps.r, p1: exps.r1 },
        MorreyIndex { p: exps.p, p1: exps.p1 },
    )
}

/// Unweighted norms `(||n||, ||c||_inf, ||grad c||, ||grad v||, ||u||)` of a state.
pub fn state_norms(state: &StateTuple, exps: &ExponentSet, sampling: &BallSampling) -> [f64; 5] {
    let (iq, ir, ip) = indices_of(exps);
    let grid = state.n.grid();
    [
        morrey_norm(&state.n, iq, sampling),
        sup_abs(&state.c.to_physical()),
        morrey_norm_vector(&state.c.gradient(), ir, sampling),
        morrey_norm_vector(&state.v.gradient(), ir, sampling),
        morrey_norm_values(grid, &state.u.magnitude(), ip, sampling),
    ]
}

pub fn x_norm_sample(state: &StateTuple, exps: &ExponentSet, sampling: &BallSampling) -> XNormSample {
    let w = exps.weights();
    let t = state.t;
    let [n, c, gc, gv, u] = state_norms(state, exps, sampling);
    XNormSample {
        t,
        n: t.powf(w.l_q) * n,
        c_sup: c,
        c_grad: t.powf(w.mu_r) * gc,
        v_grad: t.powf(w.mu_r) * gv,
        u: t.powf(w.mu_p) * u,
    }
}

/// Folds per-time samples into the four component norms and their sum.
pub fn x_norms_from_samples(samples: Vec<XNormSample>) -> XNormsRecord {
    let max = |f: fn(&XNormSample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    let n = max(|s| s.n);
    let c = max(|s| s.c_sup) + max(|s| s.c_grad);
    let v = max(|s| s.v_grad);
    let u = max(|s| s.u);
    XNormsRecord {
        n,
        c,
        v,
        u,
        total: n + c + v + u,
        samples,
    }
}

/// The time-weighted solution-space norms of a stored trajectory.
pub fn x_space_norms(
    trajectory: &[StateTuple],
    exps: &ExponentSet,
    sampling: &BallSampling,
) -> Result<XNormsRecord> {
    if trajectory.is_empty() {
        return arg("trajectory is empty");
    }
    if trajectory[0].t <= 0.0 || trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return arg("trajectory times must be positive and strictly increasing");
    }
    Ok(x_norms_from_samples(
        trajectory
            .iter()
            .map(|s| x_norm_sample(s, exps, sampling))
            .collect(),
    ))
}

/// The five terms of the initial-data norm and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataNorm {
    pub n0: f64,
    pub c0_sup: f64,
    pub grad_c0: f64,
    pub grad_v0: f64,
    pub u0: f64,
    pub total: f64,
}

pub fn data_norm_terms(
    data: &InitialData,
    exps: &ExponentSet,
    times: &TimeGrid,
    sampling: &BallSampling,
) -> Result<DataNorm> {
    let verdict = check_admissible(exps);
    if !verdict.admissible {
        return arg(format!(
            "exponent set not admissible: {}",
            verdict.failures.join("; ")
        ));
    }
    let (iq, ir, ip) = indices_of(exps);
    let (sn, sr, sp) = exps.regularity();
    let n0 = besov_morrey_norm_heat(&data.n0, iq, sn, times, sampling)?;
    let c0_sup = sup_abs(&data.c0.to_physical());
    let grad_c0 = besov_morrey_norm_heat_vector(&data.c0.gradient(), ir, sr, times, sampling)?;
    let grad_v0 = besov_morrey_norm_heat_vector(&data.v0.gradient(), ir, sr, times, sampling)?;
    let u0 = besov_morrey_norm_heat_vector(&data.u0, ip, sp, times, sampling)?;
    Ok(DataNorm {
        n0,
        c0_sup,
        grad_c0,
        grad_v0,
        u0,
        total: n0 + c0_sup + grad_c0 + grad_v0 + u0,
    })
}

/// `||(n0, c0, v0, u0)||_I`.
pub fn data_norm_i(
    data: &InitialData,
    exps: &ExponentSet,
    times: &TimeGrid,
    sampling: &BallSampling,
) -> Result<f64> {
    Ok(data_norm_terms(data, exps, times, sampling)?.total)
}
