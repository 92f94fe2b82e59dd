//! Singular-kernel time quadrature, the Duhamel operators of the mild
//! formulation, and the beta-function constants of the bilinear estimates.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::experiments::admissibility::{check_admissible, ExponentSet};
use crate::norms::{morrey_norm, morrey_norm_values, morrey_norm_vector, BallSampling, MorreyIndex};
use crate::solver::StateTuple;
use crate::spectral::{Grid, SpectralField, VectorField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Geometric time lattice `t_k = t0 * ratio^k`, `k = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    ratio: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return arg(format!("first time must be positive, got {t0}"));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return arg(format!("time ratio must exceed 1, got {ratio}"));
        }
        if count == 0 {
            return arg("time grid needs at least one point");
        }
        Ok(Self { t0, ratio, count })
    }

    /// `count` geometric points from `t_min` to `t_max` inclusive.
    pub fn geometric(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(t_max > t_min) {
            return arg(format!(
                "need count >= 2 and t_max > t_min, got {count}, [{t_min}, {t_max}]"
            ));
        }
        Self::new(t_min, (t_max / t_min).powf(1.0 / (count - 1) as f64), count)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 * self.ratio.powi(k as i32)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.time(k)).collect()
    }

    /// Interval index `j` and fraction `theta` (linear in `log t`) locating
    /// `tau` between `t_j` and `t_{j+1}`; times below `t0` clamp to `(0, 0)`.
    pub fn locate(&self, tau: f64) -> (usize, f64) {
        if self.count == 1 || tau <= self.t0 {
            return (0, 0.0);
        }
        let x = (tau / self.t0).ln() / self.ratio.ln();
        let j = (x.floor() as usize).min(self.count - 2);
        let theta = (x - j as f64).clamp(0.0, 1.0);
        (j, theta)
    }
}

/// Euler beta function `Gamma(x) Gamma(y) / Gamma(x + y)`.
pub fn beta_function(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return arg(format!("beta function needs positive arguments, got ({x}, {y})"));
    }
    statrs::function::beta::checked_beta(x, y).map_err(|e| Error::Argument(e.to_string()))
}

/// Gauss-Jacobi rule on `(0, 1)` for the weight `(1 - z)^(-a) z^(-b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(a: f64, b: f64, node_count: usize) -> Result<Self> {
        if !(a < 1.0 && b < 1.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::NonIntegrable { a, b });
        }
        if node_count == 0 {
            return arg("quadrature needs at least one node");
        }
        // Jacobi weight (1 - x)^alpha (1 + x)^beta on [-1, 1], z = (1 + x) / 2.
        let (al, be) = (-a, -b);
        let n = node_count;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let ab = al + be;
        for i in 0..n {
            let k = i as f64;
            jac[(i, i)] = if i == 0 {
                (be - al) / (ab + 2.0)
            } else {
                (be * be - al * al) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
            };
            if i + 1 < n {
                let m = k + 1.0;
                let b2 = if i == 0 {
                    4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    4.0 * m * (m + al) * (m + be) * (m + ab)
                        / ((2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0))
                };
                let off = b2.sqrt();
                jac[(i, i + 1)] = off;
                jac[(i + 1, i)] = off;
            }
        }
        let eig = SymmetricEigen::new(jac);
        let total = beta_function(1.0 - a, 1.0 - b)?;
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                ((1.0 + x) / 2.0, total * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(Self {
            a,
            b,
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Gauss-Legendre on `(0, 1)`.
    pub fn legendre(node_count: usize) -> Result<Self> {
        Self::new(0.0, 0.0, node_count)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_0^1 (1 - z)^(-a) z^(-b) g(z) dz`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * g(z))
            .sum()
    }

    /// `int_0^t (t - tau)^(-a) tau^(-b) dtau`, which equals `t^(1-a-b) b(1-a, 1-b)`.
    pub fn scalar_duhamel(&self, t: f64) -> f64 {
        t.powf(1.0 - self.a - self.b) * self.integrate(|_| 1.0)
    }

    /// Factor turning the weight back into 1 at node `z`.
    fn unweight(&self, z: f64) -> f64 {
        let mut f = 1.0;
        if self.a != 0.0 {
            f *= (1.0 - z).powf(self.a);
        }
        if self.b != 0.0 {
            f *= z.powf(self.b);
        }
        f
    }
}

/// The constants of the bilinear estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstantTag {
    C1,
    C2,
    C3,
    C4_1,
    C4_2,
    C5_1,
    C5_2,
    C6,
    C7,
}

impl ConstantTag {
    pub const ALL: [ConstantTag; 9] = [
        ConstantTag::C1,
        ConstantTag::C2,
        ConstantTag::C3,
        ConstantTag::C4_1,
        ConstantTag::C4_2,
        ConstantTag::C5_1,
        ConstantTag::C5_2,
        ConstantTag::C6,
        ConstantTag::C7,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConstantTag::C1 => "C1",
            ConstantTag::C2 => "C2",
            ConstantTag::C3 => "C3",
            ConstantTag::C4_1 => "C4_1",
            ConstantTag::C4_2 => "C4_2",
            ConstantTag::C5_1 => "C5_1",
            ConstantTag::C5_2 => "C5_2",
            ConstantTag::C6 => "C6",
            ConstantTag::C7 => "C7",
        }
    }

    /// Beta-function arguments `(x, y)` with descriptions.
    pub fn beta_args(&self, e: &ExponentSet) -> [(&'static str, f64); 2] {
        let n = e.n();
        let (p, q, r) = (e.p, e.q, e.r);
        match self {
            ConstantTag::C1 => [
                ("1/2 - N/2p", 0.5 - n / (2.0 * p)),
                ("-1/2 + N/2p + N/2q", -0.5 + n / (2.0 * p) + n / (2.0 * q)),
            ],
            ConstantTag::C2 | ConstantTag::C3 => [
                ("1/2 - N/2r", 0.5 - n / (2.0 * r)),
                ("-1/2 + N/2q + N/2r", -0.5 + n / (2.0 * q) + n / (2.0 * r)),
            ],
            ConstantTag::C4_1 => [
                ("1/2 - N/2p", 0.5 - n / (2.0 * p)),
                ("1/2 + N/2p", 0.5 + n / (2.0 * p)),
            ],
            ConstantTag::C4_2 | ConstantTag::C6 => [
                ("1/2 - N/2p", 0.5 - n / (2.0 * p)),
                ("N/2p + N/2r", n / (2.0 * p) + n / (2.0 * r)),
            ],
            ConstantTag::C5_1 => [("1 - N/2q", 1.0 - n / (2.0 * q)), ("N/2q", n / (2.0 * q))],
            ConstantTag::C5_2 => [
                ("1/2 - N/2q + N/2r", 0.5 - n / (2.0 * q) + n / (2.0 * r)),
                ("N/2q", n / (2.0 * q)),
            ],
            ConstantTag::C7 => [("1/2 - N/2p", 0.5 - n / (2.0 * p)), ("N/p", n / p)],
        }
    }

    /// Smoothing estimate used by this constant: source index, target
    /// index and derivative order.
    pub fn estimate(&self, e: &ExponentSet) -> (MorreyIndex, MorreyIndex, usize) {
        let (p, q, r) = (
            MorreyIndex { p: e.p, p1: e.p1 },
            MorreyIndex { p: e.q, p1: e.q1 },
            MorreyIndex { p: e.r, p1: e.r1 },
        );
        match self {
            ConstantTag::C1 => (holder(p, q), q, 1),
            ConstantTag::C2 | ConstantTag::C3 => (holder(q, r), q, 1),
            ConstantTag::C4_1 => (p, MorreyIndex::sup(), 1),
            ConstantTag::C4_2 | ConstantTag::C6 => (holder(p, r), r, 1),
            ConstantTag::C5_1 => (q, MorreyIndex::sup(), 0),
            ConstantTag::C5_2 => (q, r, 1),
            ConstantTag::C7 => (holder(p, p), p, 1),
        }
    }
}

/// The linear-term constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearTag {
    L3,
    L4,
}

impl LinearTag {
    pub fn beta_args(&self, e: &ExponentSet) -> [(&'static str, f64); 2] {
        let n = e.n();
        match self {
            LinearTag::L3 => [
                ("1/2 - N/2q + N/2r", 0.5 - n / (2.0 * e.q) + n / (2.0 * e.r)),
                ("N/2q", n / (2.0 * e.q)),
            ],
            LinearTag::L4 => [
                ("1/2 + N/2p - N/2q", 0.5 + n / (2.0 * e.p) - n / (2.0 * e.q)),
                ("N/2q", n / (2.0 * e.q)),
            ],
        }
    }

    pub fn estimate(&self, e: &ExponentSet) -> (MorreyIndex, MorreyIndex, usize) {
        match self {
            LinearTag::L3 => (
                MorreyIndex { p: e.q, p1: e.q1 },
                MorreyIndex { p: e.r, p1: e.r1 },
                1,
            ),
            LinearTag::L4 => (
                holder(MorreyIndex { p: e.n(), p1: e.n1 }, MorreyIndex { p: e.q, p1: e.q1 }),
                MorreyIndex { p: e.p, p1: e.p1 },
                0,
            ),
        }
    }
}

/// Index of a product under the Morrey Hoelder inequality.
pub fn holder(a: MorreyIndex, b: MorreyIndex) -> MorreyIndex {
    MorreyIndex {
        p: 1.0 / (1.0 / a.p + 1.0 / b.p),
        p1: 1.0 / (1.0 / a.p1 + 1.0 / b.p1),
    }
}

fn beta_of_args(args: [(&'static str, f64); 2], e: &ExponentSet) -> Result<f64> {
    for (name, v) in args {
        if !(v > 0.0) {
            return arg(format!("beta argument {name} = {v} is not positive"));
        }
    }
    let verdict = check_admissible(e);
    if !verdict.admissible {
        return arg(format!(
            "exponent set not admissible: {}",
            verdict.failures.join("; ")
        ));
    }
    beta_function(args[0].1, args[1].1)
}

/// Beta-function factor of a bilinear constant.
pub fn bilinear_constant_bound(which: ConstantTag, exps: &ExponentSet) -> Result<f64> {
    beta_of_args(which.beta_args(exps), exps)
}

/// `alpha` factor (L3) or `||f||_{M^N_{N1}}` times the `beta` factor (L4).
pub fn linear_constant_bound(
    which: LinearTag,
    exps: &ExponentSet,
    force: Option<&ForceField>,
) -> Result<f64> {
    let b = beta_of_args(which.beta_args(exps), exps)?;
    match which {
        LinearTag::L3 => Ok(b),
        LinearTag::L4 => match force {
            Some(f) => Ok(f.morrey_norm_n_n1() * b),
            None => arg("the L4 constant requires a force field"),
        },
    }
}

/// A time-independent force with its cached `M^N_{N1}` norm.
#[derive(Clone, Debug)]
pub struct ForceField {
    f: VectorField,
    n1: f64,
    norm: f64,
}

impl ForceField {
    pub fn new(f: VectorField, n1: f64, sampling: &BallSampling) -> Result<Self> {
        let n = f.grid().dim() as f64;
        let idx = MorreyIndex::new(n, n1)?;
        let norm = morrey_norm_vector(&f, idx, sampling);
        Ok(Self { f, n1, norm })
    }

    pub fn zero(grid: &Grid, n1: f64) -> Self {
        Self {
            f: VectorField::zeros(grid),
            n1,
            norm: 0.0,
        }
    }

    pub fn field(&self) -> &VectorField {
        &self.f
    }

    pub fn n1(&self) -> f64 {
        self.n1
    }

    pub fn morrey_norm_n_n1(&self) -> f64 {
        self.norm
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            f: self.f.scale(s),
            n1: self.n1,
            norm: self.norm * s.abs(),
        }
    }

    /// Physical samples of every component.
    pub fn physical(&self) -> Vec<Vec<f64>> {
        self.f.components().iter().map(|c| c.to_physical()).collect()
    }
}

/// The semigroup applied inside a Duhamel integral; derivatives and the
/// Leray projection commute with the heat multiplier and act after the
/// time integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `e^{(t - tau) Delta}` componentwise.
    Plain,
    /// `e^{-gamma (t - tau)} e^{(t - tau) Delta}` componentwise.
    Damped(f64),
    /// `div e^{(t - tau) Delta}` of an `N`-vector; scalar output.
    Divergence,
    /// `P e^{(t - tau) Delta}` of an `N`-vector.
    Leray,
    /// `P div e^{(t - tau) Delta}` of an `N x N` tensor (row-major `T_ab`,
    /// divergence over `b`).
    LerayDivergence,
}

/// Heat multipliers `exp(-s |xi|^2)` tabulated by integer `|m|^2`.
pub(crate) fn heat_table(grid: &Grid, s: f64) -> Vec<f64> {
    let w = grid.wave_scale_sq() * s;
    (0..=grid.max_mode_norm_sq())
        .map(|k| (-w * k as f64).exp())
        .collect()
}

/// Divergence `sum_a i kappa_a X_a` of coefficient arrays.
pub(crate) fn spectral_divergence(grid: &Grid, parts: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut out = vec![ZERO; grid.len()];
    for (axis, part) in parts.iter().enumerate() {
        for (k, (o, c)) in out.iter_mut().zip(part).enumerate() {
            *o += Complex64::new(0.0, grid.kappa(k, axis)) * c;
        }
    }
    out
}

fn finish_kernel(grid: &Grid, kernel: Kernel, acc: Vec<Vec<Complex64>>) -> Result<Vec<SpectralField>> {
    let dim = grid.dim();
    let fields = |parts: Vec<Vec<Complex64>>| -> Result<Vec<SpectralField>> {
        parts
            .into_iter()
            .map(|c| SpectralField::from_coeffs(grid, c))
            .collect()
    };
    match kernel {
        Kernel::Plain | Kernel::Damped(_) => fields(acc),
        Kernel::Divergence => {
            if acc.len() != dim {
                return arg(format!("divergence kernel needs {dim} components"));
            }
            fields(vec![spectral_divergence(grid, &acc)])
        }
        Kernel::Leray => {
            if acc.len() != dim {
                return arg(format!("Leray kernel needs {dim} components"));
            }
            Ok(VectorField::new(fields(acc)?)?.leray_project().components().to_vec())
        }
        Kernel::LerayDivergence => {
            if acc.len() != dim * dim {
                return arg(format!("tensor kernel needs {} components", dim * dim));
            }
            let rows: Vec<Vec<Complex64>> = acc
                .chunks(dim)
                .map(|row| spectral_divergence(grid, row))
                .collect();
            Ok(VectorField::new(fields(rows)?)?.leray_project().components().to_vec())
        }
    }
}

/// `int_0^t K(t - tau) F(tau) dtau` with `tau = t z` and the Gauss-Jacobi
/// rule; the integrand is divided by the rule's weight at each node.
pub fn duhamel_integral<F>(
    kernel: Kernel,
    integrand_at: F,
    t: f64,
    rule: &QuadratureRule,
) -> Result<Vec<SpectralField>>
where
    F: Fn(f64) -> Result<Vec<SpectralField>>,
{
    if !(t > 0.0 && t.is_finite()) {
        return arg(format!("Duhamel integral needs t > 0, got {t}"));
    }
    if let Kernel::Damped(g) = kernel {
        if !(g >= 0.0) {
            return arg(format!("damping rate must be >= 0, got {g}"));
        }
    }
    let mut acc: Vec<Vec<Complex64>> = Vec::new();
    let mut grid: Option<Grid> = None;
    for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
        let tau = t * z;
        let parts = integrand_at(tau)?;
        if parts.is_empty() {
            return arg("integrand returned no components");
        }
        let g = parts[0].grid().clone();
        if parts.iter().any(|p| *p.grid() != g) {
            return Err(Error::GridMismatch);
        }
        match &grid {
            None => {
                acc = vec![vec![ZERO; g.len()]; parts.len()];
                grid = Some(g.clone());
            }
            Some(g0) => {
                if *g0 != g {
                    return Err(Error::GridMismatch);
                }
                if parts.len() != acc.len() {
                    return arg("integrand changed its number of components");
                }
            }
        }
        let s = t - tau;
        let mut fac = w * t * rule.unweight(z);
        if let Kernel::Damped(gamma) = kernel {
            fac *= (-gamma * s).exp();
        }
        let table = heat_table(&g, s);
        for (a, part) in acc.iter_mut().zip(&parts) {
            for (k, (o, c)) in a.iter_mut().zip(part.coeffs()).enumerate() {
                *o += c * (fac * table[g.mode_norm_sq(k)]);
            }
        }
    }
    let grid = grid.expect("at least one node");
    finish_kernel(&grid, kernel, acc)
}

/// Dealiased spectral coefficients of physical samples.
pub(crate) fn dealiased(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut c = grid.analyze(values);
    for (k, v) in c.iter_mut().enumerate() {
        if !grid.dealias_keeps(k) {
            *v = ZERO;
        }
    }
    c
}

fn pointwise(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// The seven bilinear Duhamel terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BilinearTag {
    B141,
    B112,
    B113,
    B242,
    B212,
    B343,
    B444,
}

impl BilinearTag {
    pub const ALL: [BilinearTag; 7] = [
        BilinearTag::B141,
        BilinearTag::B112,
        BilinearTag::B113,
        BilinearTag::B242,
        BilinearTag::B212,
        BilinearTag::B343,
        BilinearTag::B444,
    ];

    fn needs_solenoidal(&self) -> bool {
        matches!(self, BilinearTag::B141 | BilinearTag::B242)
    }
}

/// Divergence tolerance for terms that move the derivative onto the product.
pub const SOLENOIDAL_TOL: f64 = 1e-8;

fn physical_vector(u: &VectorField) -> Vec<Vec<f64>> {
    u.components().iter().map(|c| c.to_physical()).collect()
}

fn bilinear_integrand(tag: BilinearTag, s: &StateTuple) -> Result<Vec<SpectralField>> {
    let grid = s.n.grid().clone();
    let dim = grid.dim();
    if tag.needs_solenoidal() {
        let defect = s.u.divergence_defect();
        if defect > SOLENOIDAL_TOL {
            return Err(Error::Precondition(format!(
                "velocity is not solenoidal (relative spectral divergence {defect:.3e})"
            )));
        }
    }
    let field = |v: Vec<f64>| SpectralField::from_coeffs(&grid, dealiased(&grid, &v));
    match tag {
        BilinearTag::B141 => {
            let n = s.n.to_physical();
            physical_vector(&s.u)
                .iter()
                .map(|ua| field(pointwise(ua, &n)))
                .collect()
        }
        BilinearTag::B112 | BilinearTag::B113 => {
            let n = s.n.to_physical();
            let g = if tag == BilinearTag::B112 { &s.c } else { &s.v };
            physical_vector(&g.gradient())
                .iter()
                .map(|ga| field(pointwise(&n, ga)))
                .collect()
        }
        BilinearTag::B242 => {
            let c = s.c.to_physical();
            physical_vector(&s.u)
                .iter()
                .map(|ua| field(pointwise(ua, &c)))
                .collect()
        }
        BilinearTag::B212 => Ok(vec![field(pointwise(&s.n.to_physical(), &s.c.to_physical()))?]),
        BilinearTag::B343 => {
            let u = physical_vector(&s.u);
            let gv = physical_vector(&s.v.gradient());
            let mut dot = vec![0.0; grid.len()];
            for a in 0..dim {
                for (d, (x, y)) in dot.iter_mut().zip(u[a].iter().zip(&gv[a])) {
                    *d += x * y;
                }
            }
            Ok(vec![field(dot)?])
        }
        BilinearTag::B444 => {
            let u = physical_vector(&s.u);
            let mut out = Vec::with_capacity(dim * dim);
            for a in 0..dim {
                for b in 0..dim {
                    out.push(field(pointwise(&u[a], &u[b]))?);
                }
            }
            Ok(out)
        }
    }
}

fn negate(parts: Vec<SpectralField>) -> Vec<SpectralField> {
    parts.into_iter().map(|p| p.scale(-1.0)).collect()
}

/// One bilinear term of the mild formulation at time `t`, with its sign:
/// `B141 = -div int e(u n)`, `B112 = -div int e(n grad c)`,
/// `B113 = -div int e(n grad v)`, `B242 = -div int e(u c)`,
/// `B212 = -int e(n c)`, `B343 = -int e^{-gamma} e(u . grad v)`,
/// `B444 = -P div int e(u (x) u)`.
/// Scalar terms return one component, `B444` returns `N`.
pub fn bilinear_b<F>(
    tag: BilinearTag,
    state_at: F,
    t: f64,
    gamma: f64,
    rule: &QuadratureRule,
) -> Result<Vec<SpectralField>>
where
    F: Fn(f64) -> Result<StateTuple>,
{
    let kernel = match tag {
        BilinearTag::B141 | BilinearTag::B112 | BilinearTag::B113 | BilinearTag::B242 => {
            Kernel::Divergence
        }
        BilinearTag::B212 => Kernel::Plain,
        BilinearTag::B343 => Kernel::Damped(gamma),
        BilinearTag::B444 => Kernel::LerayDivergence,
    };
    let out = duhamel_integral(kernel, |tau| bilinear_integrand(tag, &state_at(tau)?), t, rule)?;
    Ok(negate(out))
}

/// `L3 = int e^{-gamma (t - tau)} e^{(t - tau) Delta} n` (scalar) or
/// `L4 = -int e^{(t - tau) Delta} P(n f)` (vector).
pub fn linear_l<F>(
    tag: LinearTag,
    n_at: F,
    t: f64,
    gamma: f64,
    force: Option<&ForceField>,
    rule: &QuadratureRule,
) -> Result<Vec<SpectralField>>
where
    F: Fn(f64) -> Result<SpectralField>,
{
    match tag {
        LinearTag::L3 => {
            let kernel = if gamma == 0.0 {
                Kernel::Plain
            } else {
                Kernel::Damped(gamma)
            };
            duhamel_integral(kernel, |tau| Ok(vec![n_at(tau)?]), t, rule)
        }
        LinearTag::L4 => {
            let Some(force) = force else {
                return arg("L4 requires a force field");
            };
            let fphys = force.physical();
            let out = duhamel_integral(
                Kernel::Leray,
                |tau| {
                    let n = n_at(tau)?;
                    let grid = n.grid().clone();
                    let np = n.to_physical();
                    fphys
                        .iter()
                        .map(|fa| SpectralField::from_coeffs(&grid, dealiased(&grid, &pointwise(&np, fa))))
                        .collect()
                },
                t,
                rule,
            )?;
            Ok(negate(out))
        }
    }
}

/// Measured constant of one heat smoothing estimate
/// `||D^k e^{t Delta} g||_tgt <= C t^(-k/2 - N/2 (1/src - 1/tgt)) ||g||_src`:
/// the largest ratio over centered Gaussian probes of variance
/// `{2, 8, 32} h^2` and 8 geometric times in `[h^2 / 2, L^2 / 16]`.
pub fn measure_smoothing_constant(
    grid: &Grid,
    src: MorreyIndex,
    tgt: MorreyIndex,
    order: usize,
    sampling: &BallSampling,
) -> Result<f64> {
    if order > 1 {
        return arg("only derivative orders 0 and 1 are supported");
    }
    let n = grid.dim() as f64;
    let h = grid.spacing();
    let l = grid.half_width();
    let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
    let expo = order as f64 / 2.0 + n / 2.0 * (inv(src.p) - inv(tgt.p));
    let times = TimeGrid::geometric(h * h / 2.0, l * l / 16.0, 8)?.times();
    let mut best: f64 = 0.0;
    for var in [2.0, 8.0, 32.0].map(|s| s * h * h) {
        let g = SpectralField::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (-r2 / (2.0 * var)).exp()
        });
        let base = morrey_norm(&g, src, sampling);
        if base == 0.0 {
            continue;
        }
        for &t in &times {
            let num = if order == 0 {
                morrey_norm(&g.heat_apply(t)?, tgt, sampling)
            } else {
                let parts = (0..grid.dim())
                    .map(|a| g.heat_grad_apply(t, a))
                    .collect::<Result<Vec<_>>>()?;
                let u = VectorField::new(parts)?;
                morrey_norm_values(grid, &u.magnitude(), tgt, sampling)
            };
            best = best.max(num * t.powf(expo) / base);
        }
    }
    Ok(best)
}

/// Constants of the contraction argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4_1: f64,
    pub c4_2: f64,
    pub c5_1: f64,
    pub c5_2: f64,
    pub c6: f64,
    pub c7: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub epsilon: f64,
    /// Measured `||y||_X / ||data||_I`; absent for zero data.
    pub c0: Option<f64>,
    pub delta: Option<f64>,
    pub data_norm: Option<f64>,
    /// `||data||_I <= delta`.
    pub small: Option<bool>,
    /// Exact beta factors by name.
    pub beta_factors: BTreeMap<String, f64>,
    /// Measured smoothing constants by name.
    pub smoothing: BTreeMap<String, f64>,
}

impl ConstantsTable {
    /// Builds the table from the nine bilinear constants (in
    /// `ConstantTag::ALL` order), `alpha` and `beta`.
    pub fn from_constants(c: [f64; 9], alpha: f64, beta: f64) -> Self {
        let [c1, c2, c3, c4_1, c4_2, c5_1, c5_2, c6, c7] = c;
        let k1 = 1.0 + alpha + beta;
        let s123 = c1 + c2 + c3;
        let k2 = (alpha + beta) * s123 + s123 + (c4_1 + c4_2) + (c5_1 + c5_2) + c6 + c7;
        Self {
            c1,
            c2,
            c3,
            c4_1,
            c4_2,
            c5_1,
            c5_2,
            c6,
            c7,
            alpha,
            beta,
            k1,
            k2,
            epsilon: 1.0 / (8.0 * k1 * k2),
            c0: None,
            delta: None,
            data_norm: None,
            small: None,
            beta_factors: BTreeMap::new(),
            smoothing: BTreeMap::new(),
        }
    }

    pub fn c4(&self) -> f64 {
        self.c4_1 + self.c4_2
    }

    pub fn c5(&self) -> f64 {
        self.c5_1 + self.c5_2
    }

    /// Records `C0` and the data norm, deriving `delta = epsilon / C0`.
    pub fn with_data(mut self, c0: Option<f64>, data_norm: f64) -> Self {
        self.c0 = c0;
        self.data_norm = Some(data_norm);
        self.delta = c0.map(|c| self.epsilon / c);
        self.small = Some(match self.delta {
            Some(d) => data_norm <= d,
            None => true,
        });
        self
    }
}

/// Beta factors times measured smoothing constants for every constant.
pub fn compute_constants(
    exps: &ExponentSet,
    force: Option<&ForceField>,
    probe: &Grid,
    sampling: &BallSampling,
) -> Result<ConstantsTable> {
    let mut factors = BTreeMap::new();
    let mut smoothing = BTreeMap::new();
    let mut cs = [0.0; 9];
    let mut cache: Vec<((MorreyIndex, MorreyIndex, usize), f64)> = Vec::new();
    let mut measured = |est: (MorreyIndex, MorreyIndex, usize)| -> Result<f64> {
        if let Some((_, v)) = cache.iter().find(|(k, _)| *k == est) {
            return Ok(*v);
        }
        let v = measure_smoothing_constant(probe, est.0, est.1, est.2, sampling)?;
        cache.push((est, v));
        Ok(v)
    };
    for (slot, tag) in cs.iter_mut().zip(ConstantTag::ALL) {
        let b = bilinear_constant_bound(tag, exps)?;
        let m = measured(tag.estimate(exps))?;
        factors.insert(tag.name().to_string(), b);
        smoothing.insert(tag.name().to_string(), m);
        *slot = b * m;
    }
    let ba = linear_constant_bound(LinearTag::L3, exps, None)?;
    let ma = measured(LinearTag::L3.estimate(exps))?;
    factors.insert("alpha".into(), ba);
    smoothing.insert("alpha".into(), ma);
    let bb = beta_of_args(LinearTag::L4.beta_args(exps), exps)?;
    let mb = measured(LinearTag::L4.estimate(exps))?;
    factors.insert("beta".into(), bb);
    smoothing.insert("beta".into(), mb);
    let fnorm = force.map(ForceField::morrey_norm_n_n1).unwrap_or(0.0);
    let mut table = ConstantsTable::from_constants(cs, ba * ma, fnorm * bb * mb);
    table.beta_factors = factors;
    table.smoothing = smoothing;
    Ok(table)
}
