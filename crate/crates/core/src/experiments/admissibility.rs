//! Exponent bookkeeping: the admissible parameter region for critical
//! Morrey data, derived time weights, and a sub-index generator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

const TOL: f64 = 1e-12;

/// Which of the three outer-exponent regimes applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// `N/2 < q < N`
    I,
    /// `q = N`
    II,
    /// `N < q < 2N`
    III,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "(i)",
            Case::II => "(ii)",
            Case::III => "(iii)",
        })
    }
}

/// Outer exponents `p, q, r`, their Morrey sub-exponents, the force index
/// `N1`, the spatial dimension and the damping rate `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub dim: usize,
    pub gamma: f64,
    pub p: f64,
    pub p1: f64,
    pub q: f64,
    pub q1: f64,
    pub r: f64,
    pub r1: f64,
    pub n1: f64,
}

/// Time-weight exponents of the solution space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XNormWeights {
    pub l_q: f64,
    pub mu_r: f64,
    pub mu_p: f64,
}

impl ExponentSet {
    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    pub fn weights(&self) -> XNormWeights {
        let n = self.n();
        XNormWeights {
            l_q: 1.0 - n / (2.0 * self.q),
            mu_r: 0.5 - n / (2.0 * self.r),
            mu_p: 0.5 - n / (2.0 * self.p),
        }
    }

    /// Regularity indices `(N/q - 2, N/r - 1, N/p - 1)` of the data space.
    pub fn regularity(&self) -> (f64, f64, f64) {
        let n = self.n();
        (n / self.q - 2.0, n / self.r - 1.0, n / self.p - 1.0)
    }

    pub fn case(&self) -> Option<Case> {
        outer_case(self.dim, self.p, self.q, self.r).ok()
    }
}

/// Result of checking an exponent set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub case: Option<Case>,
    /// Names and descriptions of every violated clause.
    pub failures: Vec<String>,
    pub weights: XNormWeights,
    /// Every argument of the beta functions in the bilinear and linear
    /// constants, with a flag for strict positivity.
    pub beta_arguments: Vec<(String, f64, bool)>,
}

fn lt(a: f64, b: f64) -> bool {
    a < b - TOL * b.abs().max(1.0)
}

fn le(a: f64, b: f64) -> bool {
    a <= b + TOL * b.abs().max(1.0)
}

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

/// Classifies `(p, q, r)` or returns the per-case failure descriptions.
fn outer_case(dim: usize, p: f64, q: f64, r: f64) -> std::result::Result<Case, Vec<String>> {
    let n = dim as f64;
    let mut why = Vec::new();

    // (i)
    if dim >= 3 {
        let mut ok = true;
        if !(lt(n / 2.0, q) && lt(q, n)) {
            why.push(format!("(i) q-range: requires N/2 < q < N, got q = {q}"));
            ok = false;
        } else {
            let bound = n * q / (n - q);
            if !(lt(n, p) && lt(p, bound)) {
                why.push(format!("(i) p-range: requires N < p < Nq/(N-q) = {bound}, got p = {p}"));
                ok = false;
            }
            if !(lt(n, r) && lt(r, bound)) {
                why.push(format!("(i) r-range: requires N < r < Nq/(N-q) = {bound}, got r = {r}"));
                ok = false;
            }
        }
        if ok {
            return Ok(Case::I);
        }

        // (ii)
        let mut ok = true;
        if !eq(q, n) {
            why.push(format!("(ii) q-range: requires q = N, got q = {q}"));
            ok = false;
        } else {
            if !(lt(n, p) && p.is_finite()) {
                why.push(format!("(ii) p-range: requires N < p < inf, got p = {p}"));
                ok = false;
            }
            if !(lt(n, r) && r.is_finite()) {
                why.push(format!("(ii) r-range: requires N < r < inf, got r = {r}"));
                ok = false;
            }
        }
        if ok {
            return Ok(Case::II);
        }
    } else {
        why.push("(i)/(ii) dimension: only case (iii) is available when N = 2".to_string());
    }

    // (iii)
    let mut ok = true;
    if !(lt(n, q) && lt(q, 2.0 * n)) {
        why.push(format!("(iii) q-range: requires N < q < 2N, got q = {q}"));
        ok = false;
    } else {
        let bound = n * q / (q - n);
        if !(lt(n, p) && lt(p, bound)) {
            why.push(format!("(iii) p-range: requires N < p < Nq/(q-N) = {bound}, got p = {p}"));
            ok = false;
        }
        if !(le(q, r) && lt(r, bound)) {
            why.push(format!("(iii) r-range: requires q <= r < Nq/(q-N) = {bound}, got r = {r}"));
            ok = false;
        }
    }
    if ok {
        return Ok(Case::III);
    }
    Err(why)
}

/// Beta-function arguments appearing in the bilinear and linear estimates.
pub fn beta_arguments(e: &ExponentSet) -> Vec<(String, f64)> {
    let n = e.n();
    let (p, q, r) = (e.p, e.q, e.r);
    vec![
        ("C1.x = 1/2 - N/2p".into(), 0.5 - n / (2.0 * p)),
        ("C1.y = -1/2 + N/2p + N/2q".into(), -0.5 + n / (2.0 * p) + n / (2.0 * q)),
        ("C2.x = 1/2 - N/2r".into(), 0.5 - n / (2.0 * r)),
        ("C2.y = -1/2 + N/2q + N/2r".into(), -0.5 + n / (2.0 * q) + n / (2.0 * r)),
        ("C4.y = 1/2 + N/2p".into(), 0.5 + n / (2.0 * p)),
        ("C4.y' = N/2p + N/2r".into(), n / (2.0 * p) + n / (2.0 * r)),
        ("C5.x = 1 - N/2q".into(), 1.0 - n / (2.0 * q)),
        ("C5.x' = 1/2 - N/2q + N/2r".into(), 0.5 - n / (2.0 * q) + n / (2.0 * r)),
        ("C5.y = N/2q".into(), n / (2.0 * q)),
        ("C7.y = N/p".into(), n / p),
        ("beta.x = 1/2 + N/2p - N/2q".into(), 0.5 + n / (2.0 * p) - n / (2.0 * q)),
    ]
}

/// Checks every clause of the admissibility assumption; never errors.
pub fn check_admissible(e: &ExponentSet) -> Admissibility {
    let mut failures = Vec::new();
    let n = e.n();
    let vals = [
        ("p", e.p),
        ("p1", e.p1),
        ("q", e.q),
        ("q1", e.q1),
        ("r", e.r),
        ("r1", e.r1),
        ("N1", e.n1),
    ];
    let mut finite = true;
    for (name, v) in vals {
        if !v.is_finite() || v < 1.0 {
            failures.push(format!("range: {name} must be a finite real >= 1, got {v}"));
            finite = false;
        }
    }
    if e.dim < 2 {
        failures.push(format!("dimension: N >= 2 required, got {}", e.dim));
    }
    if !(e.gamma.is_finite() && e.gamma >= 0.0) {
        failures.push(format!("gamma: must be >= 0, got {}", e.gamma));
    }

    let case = if e.dim >= 2 && finite {
        match outer_case(e.dim, e.p, e.q, e.r) {
            Ok(c) => Some(c),
            Err(why) => {
                failures.extend(why);
                None
            }
        }
    } else {
        None
    };

    if finite {
        // (A)
        for (name, sub, outer) in [
            ("p1 <= p", e.p1, e.p),
            ("q1 <= q", e.q1, e.q),
            ("r1 <= r", e.r1, e.r),
            ("N1 <= N", e.n1, n),
        ] {
            if !le(sub, outer) {
                failures.push(format!("(A): requires 1 <= {name}, got {sub} vs {outer}"));
            }
        }
        // (B)
        for (name, a, b) in [
            ("1/p1 + 1/q1 <= 1", e.p1, e.q1),
            ("1/r1 + 1/q1 <= 1", e.r1, e.q1),
            ("1/p1 + 1/r1 <= 1", e.p1, e.r1),
            ("1/N1 + 1/q1 <= 1", e.n1, e.q1),
        ] {
            let s = 1.0 / a + 1.0 / b;
            if !le(s, 1.0) {
                failures.push(format!("(B): requires {name}, got {s}"));
            }
        }
        // (C)
        let (pp, qq, rr) = (e.p / e.p1, e.q / e.q1, e.r / e.r1);
        if !eq(qq, rr) {
            failures.push(format!("(C): requires q/q1 = r/r1, got {qq} vs {rr}"));
        }
        if !le(pp, qq) {
            failures.push(format!("(C): requires p/p1 <= q/q1, got {pp} vs {qq}"));
        }
        // (D)
        let lhs = e.p1 * (1.0 / e.n1 + 1.0 / e.q1);
        let rhs = e.p * (1.0 / n + 1.0 / e.q);
        if !le(lhs, rhs) {
            failures.push(format!(
                "(D): requires p1(1/N1 + 1/q1) <= p(1/N + 1/q), got {lhs} vs {rhs}"
            ));
        }
    }

    let beta_arguments = if e.dim >= 1 {
        beta_arguments(e)
            .into_iter()
            .map(|(name, v)| (name, v, v > 0.0))
            .collect()
    } else {
        Vec::new()
    };

    Admissibility {
        admissible: failures.is_empty(),
        case,
        failures,
        weights: e.weights(),
        beta_arguments,
    }
}

/// Finds Morrey sub-indices for the outer exponents `(p, q, r)`.
///
/// Scans `q1 = q - k (q - 1) / 64` for `k = 1, 2, ...` (strict Morrey
/// indices first) and falls back to `k = 0`; `p1` and `r1` follow from the
/// equality case of clause (C) and `N1` is the smallest value allowed by
/// clauses (A), (B) and (D).
pub fn suggest_subindices(
    dim: usize,
    gamma: f64,
    p: f64,
    q: f64,
    r: f64,
) -> Result<Option<ExponentSet>> {
    if dim < 2 {
        return arg(format!("dimension must be >= 2, got {dim}"));
    }
    if let Err(why) = outer_case(dim, p, q, r) {
        return arg(format!(
            "(p, q, r) = ({p}, {q}, {r}) satisfies none of the cases: {}",
            why.join("; ")
        ));
    }
    let n = dim as f64;
    let candidate = |k: usize| -> ExponentSet {
        let q1 = q - k as f64 * (q - 1.0) / 64.0;
        let s = q1 / q;
        let n1_b = if q1 > 1.0 { q1 / (q1 - 1.0) } else { f64::INFINITY };
        ExponentSet {
            dim,
            gamma,
            p,
            p1: p * s,
            q,
            q1,
            r,
            r1: r * s,
            n1: (n * s).max(n1_b).max(1.0),
        }
    };
    for k in (1..64).chain(std::iter::once(0)) {
        let e = candidate(k);
        if check_admissible(&e).admissible {
            return Ok(Some(e));
        }
    }
    Ok(None)
}
