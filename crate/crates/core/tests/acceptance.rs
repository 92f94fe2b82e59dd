//! One pass/fail line per acceptance criterion.
//!
//! Runs as a plain binary so the lines are always visible. Set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit status.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use chemoflow::cli_io::{run_scenario, write_output, Command, RunOptions, ScenarioConfig};
use chemoflow::duhamel::holder;
use chemoflow::experiments::decay::{fit_decay_rate, fit_series, DecayComponent};
use chemoflow::experiments::self_similar::{verify_self_similar, SimilarityWindow};
use chemoflow::experiments::stability::{asymptotic_stability_run, lipschitz_ratio};
use chemoflow::norms::{besov_time_grid, morrey_norm_values};
use chemoflow::profiles::{bump_data, gaussian_data, homogeneous_data, HomogeneousSpec};
use chemoflow::solver::caloric_extension;
use chemoflow::*;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn admissible_sets() -> Vec<ExponentSet> {
    let triples: [(usize, f64, f64, f64); 10] = [
        (3, 4.0, 3.0, 4.0),
        (3, 5.0, 3.0, 5.0),
        (3, 4.0, 2.5, 4.0),
        (3, 4.0, 2.0, 5.0),
        (3, 5.0, 4.0, 6.0),
        (2, 4.0, 3.0, 4.0),
        (2, 5.0, 3.0, 3.5),
        (2, 3.0, 2.5, 5.0),
        (2, 4.5, 3.5, 4.0),
        (3, 6.0, 5.0, 6.0),
    ];
    triples
        .iter()
        .map(|&(n, p, q, r)| suggest_subindices(n, 0.0, p, q, r).unwrap().unwrap())
        .collect()
}

fn c1_scalar_duhamel() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for e in admissible_sets() {
        let mut args: Vec<[(&str, f64); 2]> = ConstantTag::ALL.iter().map(|t| t.beta_args(&e)).collect();
        args.push(LinearTag::L3.beta_args(&e));
        args.push(LinearTag::L4.beta_args(&e));
        for [(_, x), (_, y)] in args {
            let (a, b) = (1.0 - x, 1.0 - y);
            let rule = QuadratureRule::new(a, b, 32).unwrap();
            for t in [0.01f64, 1.0, 7.5] {
                let exact = t.powf(1.0 - a - b) * beta_oracle(1.0 - a, 1.0 - b);
                worst = worst.max((rule.scalar_duhamel(t) - exact).abs() / exact);
            }
            // polynomial moments are integrated exactly as well
            for k in 1..6 {
                let exact = beta_oracle(1.0 - a, 1.0 - b + k as f64);
                let got = rule.integrate(|z| z.powi(k));
                worst = worst.max((got - exact).abs() / exact);
            }
            pairs += 1;
        }
    }
    (worst <= 1e-10, format!("{pairs} (a,b) pairs, max rel err {worst:.2e} (tol 1e-10)"))
}

fn c2_beta_specials() -> Outcome {
    let pi = std::f64::consts::PI;
    let cases = [(1.0, 1.0, 1.0), (0.5, 0.5, pi), (0.5, 1.0, 2.0)];
    let worst = cases
        .iter()
        .map(|&(x, y, v)| (beta_function(x, y).unwrap() - v).abs())
        .fold(0.0, f64::max);
    (worst <= 1e-10, format!("max abs err {worst:.2e} (tol 1e-10)"))
}

fn morrey_gap(m: usize, l: f64, fields: usize, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let g = Grid::new(2, m, l).unwrap();
    let fast = BallSampling::default_for(&g);
    let brute = BallSampling::exhaustive(&g);
    let ball = SpectralField::from_fn(&g, |x| if x[0] * x[0] + x[1] * x[1] <= 1.0 { 1.0 } else { 0.0 });
    let mut cases: Vec<(Vec<f64>, MorreyIndex)> = Vec::new();
    for _ in 0..fields {
        let vals = random_field(&g, rng).to_physical();
        for idx in [MorreyIndex::new(3.0, 2.0).unwrap(), MorreyIndex::new(4.0, 8.0 / 3.0).unwrap()] {
            cases.push((vals.clone(), idx));
        }
    }
    cases.push((ball.to_physical(), MorreyIndex::new(2.0, 1.0).unwrap()));
    let worst = cases
        .iter()
        .map(|(v, idx)| {
            let b = morrey_norm_values(&g, v, *idx, &brute);
            (morrey_norm_values(&g, v, *idx, &fast) - b).abs() / b
        })
        .fold(0.0, f64::max);
    (worst, cases.len())
}

fn c3_morrey_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut count) = (0.0f64, 0);
    for (m, l) in [(8usize, 2.0), (12, 3.0), (16, 4.0)] {
        let (w, c) = morrey_gap(m, l, 20, &mut rng);
        worst = worst.max(w);
        count += c;
    }
    // outside the gated range the default preset strides centers
    let (beyond, _) = morrey_gap(32, 8.0, 20, &mut rng);
    (
        worst <= 0.02,
        format!("{count} comparisons on 8^2-16^2, max rel gap {worst:.2e} (tol 2%); 32^2 gap {beyond:.2e} (not gated)"),
    )
}

fn c4_holder() -> Outcome {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let s = BallSampling::default_for(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let triples = [
        (MorreyIndex::new(4.0, 8.0 / 3.0).unwrap(), MorreyIndex::new(4.0, 8.0 / 3.0).unwrap()),
        (MorreyIndex::new(3.0, 2.0).unwrap(), MorreyIndex::new(4.0, 8.0 / 3.0).unwrap()),
        (MorreyIndex::new(6.0, 3.0).unwrap(), MorreyIndex::new(3.0, 2.0).unwrap()),
    ];
    let (mut worst, mut hard) = (f64::NEG_INFINITY, 0);
    for (a, b) in triples {
        let ab = holder(a, b);
        for _ in 0..50 {
            let f = random_field(&g, &mut rng).to_physical();
            let h = random_field(&g, &mut rng).to_physical();
            let fh: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x * y).collect();
            let lhs = morrey_norm_values(&g, &fh, ab, &s);
            let rhs = morrey_norm_values(&g, &f, a, &s) * morrey_norm_values(&g, &h, b, &s);
            let excess = lhs / rhs - 1.0;
            worst = worst.max(excess);
            if excess > 0.05 {
                hard += 1;
            }
        }
    }
    (hard == 0, format!("150 pairs, max excess {worst:.2e}, {hard} beyond 5% margin"))
}

fn smoothing_constants(m: usize) -> [f64; 3] {
    let g = Grid::new(2, m, 8.0).unwrap();
    let s = BallSampling::default_for(&g);
    let (iq, ir, sup) = (
        MorreyIndex::new(3.0, 2.0).unwrap(),
        MorreyIndex::new(4.0, 8.0 / 3.0).unwrap(),
        MorreyIndex::sup(),
    );
    let times = TimeGrid::geometric(0.005, 50.0, 24).unwrap().times();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut best = [0.0f64; 3];
    for _ in 0..20 {
        let f = zero_mean(random_field(&g, &mut rng));
        let base = morrey_norm(&f, iq, &s);
        for &t in &times {
            let ht = f.heat_apply(t).unwrap();
            best[0] = best[0].max(t.powf(1.0 / 3.0 - 1.0 / 4.0) * morrey_norm(&ht, ir, &s) / base);
            best[1] = best[1].max(t.powf(1.0 / 3.0) * morrey_norm(&ht, sup, &s) / base);
            let grad = VectorField::new((0..2).map(|a| f.heat_grad_apply(t, a).unwrap()).collect()).unwrap();
            let gn = morrey_norm_values(&g, &grad.magnitude(), ir, &s);
            best[2] = best[2].max(t.powf(0.5 + 1.0 / 3.0 - 1.0 / 4.0) * gn / base);
        }
    }
    best
}

fn c5_smoothing() -> Outcome {
    let a = smoothing_constants(64);
    let b = smoothing_constants(128);
    let drift = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / y)
        .fold(0.0, f64::max);
    let finite = a.iter().chain(&b).all(|v| v.is_finite() && *v > 0.0);
    (
        finite && drift < 0.05,
        format!("constants 64: {a:.4?}, 128: {b:.4?}, max drift {drift:.2e} (tol 5%)"),
    )
}

fn c6_besov_equivalence() -> Outcome {
    let g = Grid::new(2, 64, 8.0).unwrap();
    let s = BallSampling::default_for(&g);
    let tg = besov_time_grid(&g);
    let bank = LittlewoodPaleyBank::for_grid(&g);
    let idx = MorreyIndex::new(3.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let f = zero_mean(random_field(&g, &mut rng));
        for sv in [-1.0, -0.5] {
            let a = besov_morrey_norm_heat(&f, idx, sv, &tg, &s).unwrap();
            let b = besov_morrey_norm_lp(&f, idx, sv, &bank, &s);
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
    }
    (
        lo >= 0.25 && hi <= 4.0,
        format!("heat/LP ratio in [{lo:.3}, {hi:.3}] (gate [1/4, 4])"),
    )
}

struct SmallRun {
    config: SolverConfig,
    table: ConstantsTable,
    data: InitialData,
    trajectory: Vec<StateTuple>,
    trace: IterationTrace,
}

fn small_gaussian_run() -> SmallRun {
    let g = Grid::new(3, 32, 8.0).unwrap();
    let tg = TimeGrid::geometric(g.spacing().powi(2), 4.0, 24).unwrap();
    let config = SolverConfig::new(worked_set(), g.clone(), tg).unwrap();
    let raw = gaussian_data(&g, 1.0, 1.0);
    let t0 = smallness_check(&raw, &config).unwrap();
    let data = raw.scale(0.5 * t0.delta.unwrap() / t0.data_norm.unwrap());
    let table = smallness_check(&data, &config).unwrap();
    let (trajectory, trace) = picard_solve(&data, &config).unwrap();
    SmallRun {
        config,
        table,
        data,
        trajectory,
        trace,
    }
}

fn c7_contraction(run: &SmallRun) -> Outcome {
    let t = &run.trace;
    let ratios_ok = t.ratios.iter().all(|r| *r < 1.0);
    let ok = run.table.small == Some(true) && t.converged && t.iterations() <= 50 && ratios_ok;
    (
        ok,
        format!(
            "small: {:?}, converged in {} iterations, ratios {:?}",
            run.table.small,
            t.iterations(),
            t.ratios
        ),
    )
}

fn c8_ball_bound(run: &SmallRun) -> Outcome {
    let y = caloric_extension(&run.data, run.config.gamma, &run.config.time_grid).unwrap();
    let yx = x_space_norms(&y, &run.config.exps, &run.config.sampling).unwrap().total;
    let x = *run.trace.x_norms.last().unwrap();
    let bound = 2.0 * run.table.k1 * yx * 1.1;
    (x <= bound, format!("||x||_X = {x:.4e} <= 2 K1 ||y||_X * 1.1 = {bound:.4e}"))
}

fn c9_mass(run: &SmallRun) -> Outcome {
    let m0 = run.data.n0.mean();
    let drift = run
        .trajectory
        .iter()
        .map(|s| (s.n.mean() - m0).abs() / m0.abs())
        .fold(0.0, f64::max);
    (drift <= 1e-6, format!("max relative drift of the mean of n {drift:.2e} (tol 1e-6)"))
}

fn c10_decay() -> Outcome {
    let t: Vec<f64> = (0..24).map(|k| 1.25f64.powi(k)).collect();
    let mut synth: f64 = 0.0;
    for slope in [-0.5, -1.0, -1.5, -0.125] {
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t.powf(slope)).collect();
        let f = fit_series(DecayComponent::N, &t, &y, slope).unwrap();
        synth = synth.max((f.fitted_slope.unwrap() - slope).abs());
    }
    let g = Grid::new(3, 64, 8.0).unwrap();
    let h = g.spacing();
    let data = gaussian_data(&g, h * h, 1.0);
    let tg = TimeGrid::geometric(h * h, 60.0 * h * h, 24).unwrap();
    let y = caloric_extension(&data, 0.0, &tg).unwrap();
    let e = worked_set();
    let fit = fit_decay_rate(&y, DecayComponent::N, &e, &BallSampling::dyadic(&g, 1)).unwrap();
    let slope = fit.fitted_slope.unwrap();
    // closed-form Gaussian decay -(N/2)(1 - 1/q)
    let oracle = -(3.0 / 2.0) * (1.0 - 1.0 / 3.0);
    let dev = (slope - oracle).abs() / oracle.abs();
    (
        dev <= 0.05 && synth <= 1e-10,
        format!(
            "Gaussian tail slope {slope:.4} vs {oracle} (dev {dev:.2e}, tol 5%); synthetic max err {synth:.1e} (tol 1e-10); predicted critical slope {}",
            fit.predicted_slope
        ),
    )
}

fn c11_self_similar() -> Outcome {
    let g = Grid::new(3, 64, 8.0).unwrap();
    let h = g.spacing();
    let spec = HomogeneousSpec::default();
    let (data, f) = homogeneous_data(&g, &spec).unwrap();
    let tg = TimeGrid::new(2.0 * h * h, 2.0, 6).unwrap();
    let mut config = SolverConfig::new(worked_set(), g.clone(), tg).unwrap();
    config.sampling = BallSampling::dyadic(&g, 2);
    config.force = Some(ForceField::new(f, 2.0, &config.sampling).unwrap());
    let (traj, trace) = picard_solve(&data, &config).unwrap();
    let window = SimilarityWindow::default_for(&g);
    let rep = verify_self_similar(&traj, 0.0, &[1.0, 2.0], window).unwrap();
    let one = &rep.residuals[0];
    let two = &rep.residuals[1];
    let ok = trace.converged && one.max() == 0.0 && two.max() < 2e-2;
    (
        ok,
        format!(
            "lambda=1 residual {:.1e}; lambda=2 residuals n {:.2e}, grad_c {:.2e}, grad_v {:.2e}, u {:.2e} over {} sites (tol 2e-2)",
            one.max(),
            two.n,
            two.grad_c,
            two.grad_v,
            two.u,
            rep.window_sites
        ),
    )
}

fn c12_lipschitz() -> Outcome {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let exps = suggest_subindices(2, 0.0, 4.0, 3.0, 4.0).unwrap().unwrap();
    let tg = TimeGrid::geometric(g.spacing().powi(2), 4.0, 24).unwrap();
    let config = SolverConfig::new(exps, g.clone(), tg).unwrap();
    let raw = gaussian_data(&g, 1.0, 1.0);
    let t0 = smallness_check(&raw, &config).unwrap();
    let delta = t0.delta.unwrap();
    let data = raw.scale(0.5 * delta / t0.data_norm.unwrap());
    let dir = bump_data(&g, &[1.0, -0.5], 2.0, 1.0);
    let dn = data_norm_i(&dir, &exps, &besov_time_grid(&g), &config.sampling).unwrap();
    let dir = dir.scale(delta / dn);
    let a = lipschitz_ratio(&data, &dir, 0.2, &config).unwrap();
    let b = lipschitz_ratio(&data, &dir, 0.1, &config).unwrap();
    let drift = (a - b).abs() / b;
    (
        a.is_finite() && b.is_finite() && drift < 0.1,
        format!("Lambda(0.2 delta) = {a:.5}, Lambda(0.1 delta) = {b:.5}, drift {drift:.2e} (tol 10%)"),
    )
}

fn c13_stability() -> Outcome {
    let g = Grid::new(3, 32, 8.0).unwrap();
    let tg = TimeGrid::geometric(g.spacing().powi(2), 4.0, 24).unwrap();
    let config = SolverConfig::new(worked_set(), g.clone(), tg).unwrap();
    let raw = gaussian_data(&g, 1.0, 1.0);
    let t0 = smallness_check(&raw, &config).unwrap();
    let delta = t0.delta.unwrap();
    let data = raw.scale(0.5 * delta / t0.data_norm.unwrap());
    let bump = bump_data(&g, &[0.0, 0.0, 0.0], 2.0, 1.0);
    let bn = data_norm_i(&bump, &config.exps, &besov_time_grid(&g), &config.sampling).unwrap();
    let perturbed = data.add(&bump.scale(0.01 * delta / bn)).unwrap();
    let rep = asymptotic_stability_run(&data, &perturbed, &config).unwrap();

    let gs = Grid::new(3, 16, 8.0).unwrap();
    let tgs = TimeGrid::geometric(gs.spacing().powi(2), 4.0, 12).unwrap();
    let cs = SolverConfig::new(worked_set(), gs.clone(), tgs).unwrap();
    let ds = gaussian_data(&gs, 1.0, 1e-4);
    let same = asymptotic_stability_run(&ds, &ds, &cs).unwrap();
    let zero = same.volta.is_identically_zero() && same.ida.is_identically_zero();
    (
        rep.volta_decreasing && rep.ida_decreasing && zero,
        format!(
            "volta tails decreasing: {}, ida tails decreasing: {}, identical data zero series: {zero}",
            rep.volta_decreasing, rep.ida_decreasing
        ),
    )
}

fn sample_valid_triple(rng: &mut ChaCha8Rng) -> (usize, f64, f64, f64) {
    let open = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let w = hi - lo;
        rng.random_range(lo + 1e-3 * w..hi - 1e-3 * w)
    };
    let n = if rng.random_bool(0.5) { 2 } else { 3 };
    let nf = n as f64;
    let case = if n == 2 { 2 } else { rng.random_range(0..3) };
    match case {
        0 => {
            let q = open(rng, nf / 2.0, nf);
            let b = nf * q / (nf - q);
            (n, open(rng, nf, b), q, open(rng, nf, b))
        }
        1 => (n, open(rng, nf, 40.0), nf, open(rng, nf, 40.0)),
        _ => {
            let q = open(rng, nf, 2.0 * nf);
            let b = nf * q / (q - nf);
            (n, open(rng, nf, b), q, rng.random_range(q..b - 1e-3 * (b - q)))
        }
    }
}

fn c14_admissibility() -> Outcome {
    let worked = check_admissible(&worked_set());
    let ok1 = worked.admissible && worked.case == Some(Case::II);
    let bad = check_admissible(&ExponentSet {
        q: 1.0,
        q1: 1.0,
        ..worked_set()
    });
    let ok2 = !bad.admissible && bad.failures.iter().any(|f| f.contains("q-range"));
    let two = suggest_subindices(2, 0.0, 4.0, 3.0, 4.0).unwrap().unwrap();
    let v3 = check_admissible(&two);
    let ok3 = v3.admissible && v3.case == Some(Case::III);

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut fails, mut none) = (0, 0);
    for _ in 0..1000 {
        let (n, p, q, r) = sample_valid_triple(&mut rng);
        match suggest_subindices(n, 0.0, p, q, r) {
            Ok(Some(e)) => {
                if !check_admissible(&e).admissible {
                    fails += 1;
                }
            }
            Ok(None) => none += 1,
            Err(_) => fails += 1,
        }
    }
    (
        ok1 && ok2 && ok3 && fails == 0,
        format!(
            "worked sets: (ii) {ok1}, q=1 rejected {ok2}, 2D (iii) {ok3}; fuzz 1000: {fails} failures, {none} without suggestion"
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"
[grid]
dim = 2
points = 32
half_width = 8.0

[exponents]
p = 4
q = 3
r = 4

[time]
t_max = 4.0
count = 12

[solver]
quad_nodes = 16

[data]
profile = "random"
amplitude = 1e-3
"#;

fn c15_determinism() -> Outcome {
    let cfg = ScenarioConfig::parse(DETERMINISM_CONFIG).unwrap();
    let opts = RunOptions {
        seed: 42,
        ..Default::default()
    };
    let a = run_scenario(&cfg, Command::Solve, &opts);
    let b = run_scenario(&cfg, Command::Solve, &opts);
    let da = tempfile::tempdir().unwrap();
    let db = tempfile::tempdir().unwrap();
    write_output(&a, da.path()).unwrap();
    write_output(&b, db.path()).unwrap();
    let mut same = a.report.without_timings().to_json().unwrap() == b.report.without_timings().to_json().unwrap();
    let mut files = 0;
    for t in &a.tables {
        let name = format!("{}.csv", t.name);
        let x = std::fs::read(da.path().join(&name)).unwrap();
        let y = std::fs::read(db.path().join(&name)).unwrap();
        same &= x == y;
        files += 1;
    }
    (
        same && files > 0 && a.report.error.is_none(),
        format!("{files} tables and the report byte-identical across two runs: {same}"),
    )
}

fn guard(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut record = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = guard(f);
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {k:>2}: {} - {} [{secs:.1}s]",
            if o.0 { "PASS" } else { "FAIL" },
            o.1
        );
        results.push((k, o, secs));
    };
    record(1, &mut c1_scalar_duhamel);
    record(2, &mut c2_beta_specials);
    record(3, &mut c3_morrey_oracle);
    record(4, &mut c4_holder);
    record(5, &mut c5_smoothing);
    record(6, &mut c6_besov_equivalence);
    let run = catch_unwind(small_gaussian_run).ok();
    let missing = || (false, "small-data solve failed".to_string());
    record(7, &mut || run.as_ref().map(c7_contraction).unwrap_or_else(missing));
    record(8, &mut || run.as_ref().map(c8_ball_bound).unwrap_or_else(missing));
    record(9, &mut || run.as_ref().map(c9_mass).unwrap_or_else(missing));
    drop(run);
    record(10, &mut c10_decay);
    record(11, &mut c11_self_similar);
    record(12, &mut c12_lipschitz);
    record(13, &mut c13_stability);
    record(14, &mut c14_admissibility);
    record(15, &mut c15_determinism);

    let passed = results.iter().filter(|r| r.1 .0).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
