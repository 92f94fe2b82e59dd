#![allow(dead_code)]

use chemoflow::profiles::random_smooth_field;
use chemoflow::{ExponentSet, Grid, SpectralField};
use rand::Rng;

/// (N, gamma, q, p, r, p1, q1, r1, N1) = (3, 0, 3, 4, 4, 8/3, 2, 8/3, 2).
pub fn worked_set() -> ExponentSet {
    ExponentSet {
        dim: 3,
        gamma: 0.0,
        p: 4.0,
        p1: 8.0 / 3.0,
        q: 3.0,
        q1: 2.0,
        r: 4.0,
        r1: 8.0 / 3.0,
        n1: 2.0,
    }
}

/// Lanczos approximation (g = 7, n = 9), independent of the library's gamma.
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn beta_oracle(x: f64, y: f64) -> f64 {
    (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
}

pub fn zero_mean(f: SpectralField) -> SpectralField {
    let m = f.mean();
    f.sub(&SpectralField::constant(f.grid(), m)).unwrap()
}

pub fn random_field<R: Rng>(grid: &Grid, rng: &mut R) -> SpectralField {
    random_smooth_field(grid, rng, 4)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
