mod common;

use chemoflow::experiments::decay::{fit_power_law, fit_series, tail_indices, DecayComponent};
use chemoflow::experiments::self_similar::{verify_self_similar, SimilarityWindow};
use chemoflow::experiments::stability::{
    asymptotic_stability_run, final_decade_start, lipschitz_ratio, tail_verdicts, WeightedSeries,
};
use chemoflow::profiles::{bump_data, gaussian_data};
use chemoflow::*;
use common::*;

fn caloric(dim: usize, points: usize, ratio: f64, count: usize) -> (Vec<StateTuple>, Grid) {
    let g = Grid::new(dim, points, 4.0).unwrap();
    let tg = TimeGrid::new(0.05, ratio, count).unwrap();
    let y = caloric_extension(&gaussian_data(&g, 0.5, 1.0), 0.0, &tg).unwrap();
    (y, g)
}

#[test]
fn unit_scale_has_zero_residual() {
    let (y, g) = caloric(3, 16, 2.0, 4);
    let w = SimilarityWindow { inner: g.spacing(), outer: 2.0 };
    let rep = verify_self_similar(&y, 0.0, &[1.0], w).unwrap();
    assert_eq!(rep.max(), 0.0);
    assert_eq!(rep.residuals[0].pairs, 4);
    assert!(rep.window_sites > 0);
}

#[test]
fn localized_data_are_not_self_similar() {
    let (y, g) = caloric(3, 16, 4.0, 3);
    let w = SimilarityWindow { inner: g.spacing(), outer: 2.0 };
    let rep = verify_self_similar(&y, 0.0, &[2.0], w).unwrap();
    assert_eq!(rep.residuals[0].pairs, 2);
    assert!(rep.max() > 0.1, "{}", rep.max());
}

#[test]
fn self_similarity_preconditions() {
    let (y, g) = caloric(3, 16, 2.0, 4);
    let w = SimilarityWindow::default_for(&g);
    assert!(matches!(verify_self_similar(&y, 0.5, &[2.0], w), Err(Error::Precondition(_))));
    // lambda^2 = 3 is not a power of the ratio 2
    let wide = SimilarityWindow { inner: 0.0, outer: 2.0 };
    assert!(matches!(verify_self_similar(&y, 0.0, &[3f64.sqrt()], wide), Err(Error::Precondition(_))));
    // lambda = 8 needs 6 ratio steps, only 4 stored
    assert!(verify_self_similar(&y, 0.0, &[8.0], wide).is_err());
    let empty = SimilarityWindow { inner: 3.0, outer: 1.0 };
    assert!(verify_self_similar(&y, 0.0, &[1.0], empty).is_err());
    let (y2, _) = caloric(2, 16, 2.0, 4);
    assert!(matches!(verify_self_similar(&y2, 0.0, &[1.0], wide), Err(Error::Precondition(_))));
}

#[test]
fn power_law_fit_recovers_exponent_and_prefactor() {
    let t: Vec<f64> = (0..20).map(|k| 0.1 * 1.3f64.powi(k)).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.5 * t.powf(-0.75)).collect();
    let (slope, intercept) = fit_power_law(&t, &y).unwrap();
    assert!((slope + 0.75).abs() < 1e-12);
    assert!((intercept - 3.5f64.ln()).abs() < 1e-12);
    assert!(fit_power_law(&t, &[0.0; 20]).is_err());
    assert!(fit_power_law(&t[..1], &y[..1]).is_err());
}

#[test]
fn decay_fit_uses_only_the_last_decade() {
    // a kink before the final decade must not affect the fit
    let t: Vec<f64> = (0..30).map(|k| 1.25f64.powi(k)).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&t| if t < 50.0 { 1.0 } else { 50f64.sqrt() * t.powf(-0.5) })
        .collect();
    let idx = tail_indices(&t).unwrap();
    let t_max = *t.last().unwrap();
    assert!(idx.iter().all(|&i| t[i] >= t_max / 10.0));
    let f = fit_series(DecayComponent::U, &t, &y, -0.5).unwrap();
    assert!((f.fitted_slope.unwrap() + 0.5).abs() < 1e-12);
    assert!(f.deviation.unwrap() < 1e-10);
    // too few points inside the decade
    let short: Vec<f64> = (0..6).map(|k| 1.0 + k as f64).collect();
    assert!(tail_indices(&short).is_err());
}

#[test]
fn weighted_exponents_give_predicted_slopes() {
    let e = worked_set();
    let w = e.weights();
    assert_eq!(DecayComponent::N.predicted_slope(&e), -w.l_q);
    assert_eq!(DecayComponent::GradC.predicted_slope(&e), -w.mu_r);
    assert_eq!(DecayComponent::GradV.predicted_slope(&e), -w.mu_r);
    assert_eq!(DecayComponent::U.predicted_slope(&e), -w.mu_p);
    // 1 - N/(2q) and 1/2 - N/(2r) and 1/2 - N/(2p) for the worked set
    assert!((w.l_q - 0.5).abs() < 1e-15);
    assert!((w.mu_r - 0.125).abs() < 1e-15);
    assert!((w.mu_p - 0.125).abs() < 1e-15);
}

#[test]
fn tail_verdicts_follow_the_final_decade() {
    let times: Vec<f64> = (0..11).map(|k| 10f64.powf(k as f64 / 5.0)).collect();
    assert_eq!(final_decade_start(&times), 5);
    let falling: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let flat = vec![1.0; 11];
    let s = WeightedSeries {
        n: falling.clone(),
        c_sup: flat.clone(),
        grad_c: vec![0.0; 11],
        grad_v: falling.clone(),
        u: falling,
    };
    let v = tail_verdicts(&times, &s);
    let by = |n: &str| v.iter().find(|x| x.name == n).unwrap().decreasing;
    assert!(by("n") && by("grad_v") && by("u") && by("grad_c"));
    assert!(!by("c_sup"));
}

fn small_config() -> (SolverConfig, InitialData) {
    let g = Grid::new(3, 16, 4.0).unwrap();
    let tg = TimeGrid::geometric(g.spacing().powi(2), 2.0, 12).unwrap();
    let mut c = SolverConfig::new(worked_set(), g.clone(), tg).unwrap();
    c.quad = QuadratureRule::legendre(12).unwrap();
    (c, gaussian_data(&g, 0.5, 1e-4))
}

#[test]
fn identical_data_give_zero_difference_series() {
    let (c, d) = small_config();
    let rep = asymptotic_stability_run(&d, &d, &c).unwrap();
    assert!(rep.volta.is_identically_zero() && rep.ida.is_identically_zero());
    assert!(rep.volta_decreasing && rep.ida_decreasing);
    assert_eq!(rep.traces.len(), 2);
}

#[test]
fn large_perturbation_is_refused() {
    let (c, d) = small_config();
    let big = d.scale(1e6);
    assert!(matches!(asymptotic_stability_run(&d, &big, &c), Err(Error::Precondition(_))));
}

#[test]
fn lipschitz_ratio_of_a_tiny_perturbation_is_near_one() {
    let (c, d) = small_config();
    let dir = bump_data(&c.grid, &[0.5, 0.0, 0.0], 1.5, 1e-4);
    let r = lipschitz_ratio(&d, &dir, 1.0, &c).unwrap();
    assert!((r - 1.0).abs() < 0.05, "{r}");
    let zero = InitialData::zeros(&c.grid);
    assert!(lipschitz_ratio(&d, &zero, 1.0, &c).is_err());
}
