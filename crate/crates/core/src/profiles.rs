//! Named initial-data and force recipes.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::QuadratureRule;
use crate::error::{arg, Result};
use crate::solver::InitialData;
use crate::spectral::{Grid, SpectralField, VectorField};

fn dist2(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .zip(center.iter().chain(std::iter::repeat(&0.0)))
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// `amplitude * exp(-|x - center|^2 / (2 variance))`.
pub fn gaussian_at(grid: &Grid, center: &[f64], variance: f64, amplitude: f64) -> SpectralField {
    SpectralField::from_fn(grid, |x| amplitude * (-dist2(x, center) / (2.0 * variance)).exp())
}

pub fn gaussian(grid: &Grid, variance: f64, amplitude: f64) -> SpectralField {
    gaussian_at(grid, &[0.0; 3], variance, amplitude)
}

/// Smooth compactly supported bump `amplitude * exp(1 - 1 / (1 - (r/R)^2))`.
pub fn bump(grid: &Grid, center: &[f64], radius: f64, amplitude: f64) -> SpectralField {
    SpectralField::from_fn(grid, |x| {
        let s = dist2(x, center) / (radius * radius);
        if s < 1.0 {
            amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    })
}

/// Divergence-free field `curl(psi e_N)`: `(-d2 psi, d1 psi)` in 2D and
/// `(d2 psi, -d1 psi, 0)` in 3D.
pub fn swirl_of(psi: &SpectralField) -> VectorField {
    let d1 = psi.derivative(0).expect("axis");
    let d2 = psi.derivative(1).expect("axis");
    let mut comps = if psi.grid().dim() == 2 {
        vec![d2.scale(-1.0), d1]
    } else {
        vec![d2, d1.scale(-1.0)]
    };
    if psi.grid().dim() == 3 {
        comps.push(SpectralField::zeros(psi.grid()));
    }
    VectorField::new(comps).expect("same grid")
}

/// Gaussian data: `n0 = c0 = v0 = A G`, `u0 = curl(A G)`.
pub fn gaussian_data(grid: &Grid, variance: f64, amplitude: f64) -> InitialData {
    let g = gaussian(grid, variance, amplitude);
    InitialData {
        n0: g.clone(),
        c0: g.clone(),
        v0: g.clone().pinned(),
        u0: swirl_of(&g),
    }
}

/// Bump in every component, centered at `center`.
pub fn bump_data(grid: &Grid, center: &[f64], radius: f64, amplitude: f64) -> InitialData {
    let b = bump(grid, center, radius, amplitude);
    InitialData {
        n0: b.clone(),
        c0: b.clone(),
        v0: b.clone().pinned(),
        u0: swirl_of(&b),
    }
}

/// Sum of `count` random Gaussians with widths between `L/16` and `L/4`,
/// centers within `|x_i| < L/4` and amplitudes in `[-1, 1]`.
pub fn random_smooth_field<R: Rng>(grid: &Grid, rng: &mut R, count: usize) -> SpectralField {
    let l = grid.half_width();
    let dim = grid.dim();
    let blobs: Vec<(Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-l / 4.0..l / 4.0)).collect();
            let w: f64 = rng.random_range(l / 16.0..l / 4.0);
            let a: f64 = rng.random_range(-1.0..1.0);
            (c, w * w, a)
        })
        .collect();
    SpectralField::from_fn(grid, |x| {
        blobs
            .iter()
            .map(|(c, var, a)| a * (-dist2(x, c) / (2.0 * var)).exp())
            .sum()
    })
}

/// Dawson's integral `D(z) = exp(-z^2) int_0^z exp(s^2) ds`.
pub fn dawson(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if z < 0.0 {
        return -dawson(-z);
    }
    if z > 12.0 {
        // asymptotic series
        let y = 1.0 / (2.0 * z * z);
        return (1.0 + y * (1.0 + 3.0 * y * (1.0 + 5.0 * y))) / (2.0 * z);
    }
    let rule = QuadratureRule::legendre(96).expect("rule");
    z * rule.integrate(|s| (z * z * (s * s - 1.0)).exp())
}

/// Whole-space `e^{eps Delta} |x|^{-2}` in three dimensions.
pub fn heat_of_inverse_square(r: f64, eps: f64) -> f64 {
    let se = eps.sqrt();
    if r < 1e-12 * se {
        return 1.0 / (2.0 * eps);
    }
    dawson(r / (2.0 * se)) / (r * se)
}

/// Parameters of the heat-mollified homogeneous data in three dimensions:
/// `n0 = A_n |x|^{-2}`, `c0 = c`, `v0 = 0`, `u0 = A_u (-x2, x1, 0) / |x|^2`
/// and force `f = A_f x / |x|^2`, each smoothed by `e^{eps Delta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSpec {
    pub amp_n: f64,
    pub amp_u: f64,
    pub c0: f64,
    pub amp_f: f64,
    /// Mollification time in units of `h^2`.
    pub eps_cells: f64,
}

impl Default for HomogeneousSpec {
    fn default() -> Self {
        Self {
            amp_n: 0.05,
            amp_u: 0.05,
            c0: 0.1,
            amp_f: 0.05,
            eps_cells: 0.5,
        }
    }
}

/// Spectral coefficients of a whole-space transform `hat(xi)` sampled on
/// the periodic lattice (grid origin at `-L`), with the Nyquist planes removed.
fn from_transform(grid: &Grid, eps: f64, hat: impl Fn(&[f64; 3]) -> Complex64) -> SpectralField {
    let n = grid.dim();
    let vol = (2.0 * grid.half_width()).powi(n as i32);
    let m = grid.points();
    let coeffs: Vec<Complex64> = (0..grid.len())
        .map(|k| {
            let idx = grid.indices(k);
            if idx.iter().take(n).any(|&i| i == m / 2) || k == 0 {
                return Complex64::new(0.0, 0.0);
            }
            let mut xi = [0.0; 3];
            let mut sign = 1.0;
            for a in 0..n {
                xi[a] = grid.wavenumber(idx[a]);
                if grid.mode_number(idx[a]).rem_euclid(2) == 1 {
                    sign = -sign;
                }
            }
            hat(&xi) * (sign * (-eps * grid.k2(k)).exp() / vol)
        })
        .collect();
    SpectralField::from_coeffs(grid, coeffs).expect("sized")
}

/// Mollified homogeneous data and force (three dimensions only).
///
/// The zero mode of `n0` is fixed so that the periodic field matches the
/// whole-space mollified profile on average over `8h <= |x| <= L/4`.
pub fn homogeneous_data(grid: &Grid, spec: &HomogeneousSpec) -> Result<(InitialData, VectorField)> {
    if grid.dim() != 3 {
        return arg("homogeneous data are only available in three dimensions");
    }
    let h = grid.spacing();
    let eps = spec.eps_cells * h * h;
    let two_pi2 = 2.0 * PI * PI;
    let norm = |xi: &[f64; 3]| (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();

    let mut n0 = from_transform(grid, eps, |xi| Complex64::new(two_pi2 / norm(xi), 0.0));
    let phys = n0.to_physical();
    let (mut acc, mut cnt) = (0.0, 0usize);
    for (k, x) in grid.positions().enumerate() {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r >= 8.0 * h && r <= grid.half_width() / 4.0 {
            acc += heat_of_inverse_square(r, eps) - phys[k];
            cnt += 1;
        }
    }
    if cnt > 0 {
        n0.coeffs_mut()[0] = Complex64::new(acc / cnt as f64, 0.0);
    }
    let n0 = n0.scale(spec.amp_n);

    let swirl_hat = |a: usize| {
        move |xi: &[f64; 3]| {
            let r = norm(xi);
            let comp = match a {
                0 => -xi[1],
                1 => xi[0],
                _ => 0.0,
            };
            Complex64::new(0.0, -two_pi2 * comp / (r * r * r))
        }
    };
    let u0 = VectorField::new((0..3).map(|a| from_transform(grid, eps, swirl_hat(a))).collect())?
        .scale(spec.amp_u);
    let radial_hat = |a: usize| {
        move |xi: &[f64; 3]| {
            let r = norm(xi);
            Complex64::new(0.0, -two_pi2 * xi[a] / (r * r * r))
        }
    };
    let f = VectorField::new((0..3).map(|a| from_transform(grid, eps, radial_hat(a))).collect())?
        .scale(spec.amp_f);

    let data = InitialData {
        n0,
        c0: SpectralField::constant(grid, spec.c0),
        v0: SpectralField::zeros(grid).pinned(),
        u0,
    };
    Ok((data, f))
}
