//! Acceptance criteria 1 to 8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is printed on success too.
//! Criteria listed in `UNATTAINABLE` are evaluated exactly as stated and
//! reported, and the run checks that they fail by the analysed mechanism;
//! any other failure makes the run fail.

mod common;

use pencil_transit::degeneracy::extract_parameters;
use pencil_transit::models::builtin;
use pencil_transit::oracle::{extract_empirical_T, fit_order, ConvergenceStudy};
use pencil_transit::pcf::{gamma::rgamma, pcf_d, recurrence_residual, wronskian, Ray, Z_SWITCH};
use pencil_transit::pencil::uniform_grid;
use pencil_transit::transition::{canonical_T, general_T, reflection_transmission};
use pencil_transit::{
    AdiabaticConfig, AdiabaticModes, Analysis, AnalysisOptions, Convention, Error, Model, ModeSpec, OracleOptions, Side,
    TransitionMatrix2, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

const UNATTAINABLE: [u32; 1] = [2];
const HBARS: [f64; 3] = [1e-2, 1e-3, 1e-4];
const MATCH_X0: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
    /// For unattainable criteria: the failure follows the analysed law.
    explained: bool,
}

fn identity() -> [[C64; 2]; 2] {
    [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn analysis(name: &str) -> Analysis {
    Analysis::new(&builtin(name, &[]).unwrap(), AnalysisOptions::default()).unwrap()
}

fn fixed_x0() -> OracleOptions {
    OracleOptions { match_distance: Some(MATCH_X0), ..Default::default() }
}

fn measured_rt(t: &TransitionMatrix2) -> (C64, C64) {
    let g = TransitionMatrix2::new(t.t, Convention::General, t.nu, t.w);
    reflection_transmission(&g).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut mag, mut det): (f64, f64) = (0.0, 0.0);
    for w in [1, -1] {
        let wf = w as f64;
        for a in log_spaced(1e-4, 50.0, 50) {
            let t = canonical_T(C64::new(0.0, a * wf), w).unwrap();
            let d = (-PI * a * wf).exp();
            let off = (1.0 - (-2.0 * PI * a).exp()) * (-PI * a * (wf - 1.0)).exp();
            mag = mag.max((t.t[0][0].norm() - d).abs() / d);
            mag = mag.max(((t.t[0][1] * t.t[1][0]).norm() - off).abs() / off);
            det = det.max((t.det() - 1.0).norm() / d.max(1.0).powi(2));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: mag <= 1e-10 && det <= 1e-12 && secs < 1.0,
        detail: format!("max rel magnitude error {mag:.1e}, max |det - 1| {det:.1e} (relative to |t11|^2), {secs:.3} s"),
        explained: false,
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    // clause (a): ‖T − I‖ ≤ 5|ν| for |ν| ≤ 1e−3
    let mut worst_ratio: f64 = 0.0;
    let mut law: f64 = 0.0;
    for w in [1, -1] {
        for a in [1e-3, 1e-4, 1e-6] {
            let t = canonical_T(C64::new(0.0, a * w as f64), w).unwrap();
            let d = t.frobenius_diff(&identity());
            worst_ratio = worst_ratio.max(d / (5.0 * a));
            law = law.max((d / (4.0 * PI * a).sqrt() - 1.0).abs());
        }
    }
    let clause_a = worst_ratio <= 1.0;
    // clause (b): w = +1, |ν| = 20, ‖T − [[0, −1], [1, 0]]‖ ≤ 1e−8, sign included
    let t = canonical_T(C64::new(0.0, 20.0), 1).unwrap();
    let lim = [[C64::new(0.0, 0.0), C64::new(-1.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
    let dist = t.frobenius_diff(&lim);
    let flipped = t.frobenius_diff(&[[lim[0][0], -lim[0][1]], [-lim[1][0], lim[1][1]]]);
    let clause_b = dist <= 1e-8;
    let stirling = 2f64.sqrt() * (1.0 / 240.0 + 1.0 / (360.0 * 8000.0));
    let sign_ok = dist < 0.01 && flipped > 1.9;
    let secs = start.elapsed().as_secs_f64();
    let explained = !clause_a && law <= 0.01 && !clause_b && (dist / stirling - 1.0).abs() <= 1e-3 && sign_ok;
    Outcome {
        passed: clause_a && clause_b && sign_ok && secs < 1.0,
        detail: format!(
            "(a) max ||T-I||/(5|nu|) = {worst_ratio:.1} at |nu| <= 1e-3; measured ||T-I|| = sqrt(4 pi |nu|) within {law:.1e}. \
             (b) ||T-T_lim|| = {dist:.3e} at |nu| = 20 vs residual phase law sqrt(2)(1/(12|nu|) + ...) = {stirling:.3e}; \
             limit sign [[0,-1],[1,0]] {}; {secs:.3} s",
            if sign_ok { "confirmed" } else { "NOT confirmed" }
        ),
        explained,
    }
}

struct Reproduction {
    errors: Vec<f64>,
    order: Option<f64>,
    c_sqrt: f64,
    closure: Vec<f64>,
    drift: f64,
}

fn reproduce(a: &Analysis, opts: &OracleOptions, error: impl Fn(&TransitionMatrix2) -> (f64, f64)) -> Reproduction {
    let study: ConvergenceStudy = a.convergence_study(&HBARS, opts).unwrap();
    let mut rows: Vec<_> = study.rows.iter().collect();
    rows.sort_by(|x, y| y.empirical.hbar.total_cmp(&x.empirical.hbar));
    let errors: Vec<f64> = rows.iter().map(|r| error(&r.empirical.matrix).0).collect();
    let closure: Vec<f64> = rows.iter().map(|r| error(&r.empirical.matrix).1).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.empirical.hbar).collect();
    Reproduction {
        order: fit_order(&hs, &errors, 1e-14),
        c_sqrt: errors.iter().zip(&hs).map(|(e, h)| e / h.sqrt()).fold(0.0, f64::max),
        drift: rows.iter().map(|r| r.empirical.max_flux_drift()).fold(0.0, f64::max),
        errors,
        closure,
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn closure_ok(r: &Reproduction) -> bool {
    r.closure.iter().zip(HBARS).all(|(c, h)| *c <= 3.0 * h.sqrt())
}

fn criterion_3(drifts: &mut Vec<f64>) -> Outcome {
    let start = Instant::now();
    let a = analysis("graphene");
    let want = (-PI / 2.0).exp();
    let err = |t: &TransitionMatrix2| {
        let (r, tr) = measured_rt(t);
        ((tr.norm() - want).abs(), (r.norm_sqr() + tr.norm_sqr() - 1.0).abs())
    };
    let fixed = reproduce(&a, &fixed_x0(), err);
    let rule = reproduce(&a, &OracleOptions::default(), err);
    drifts.extend([fixed.drift, rule.drift]);
    let secs = start.elapsed().as_secs_f64();
    let order_ok = fixed.order.is_some_and(|o| o >= 0.4);
    Outcome {
        passed: order_ok && closure_ok(&fixed) && secs < 120.0,
        detail: format!(
            "graphene nu = {:.3}i, X0 = {MATCH_X0}: ||T|-e^(-pi/2)| = [{}] at hbar = 1e-2, 1e-3, 1e-4, fitted order {:.2}, \
             C = max err/sqrt(hbar) = {:.1e}; ||R|^2+|T|^2-1| = [{}] (bound 3 sqrt(hbar)). \
             Default X0 rule: [{}], order {:.2}. {secs:.1} s (both runs)",
            a.data.nu.im,
            fmt_list(&fixed.errors),
            fixed.order.unwrap_or(f64::NAN),
            fixed.c_sqrt,
            fmt_list(&fixed.closure),
            fmt_list(&rule.errors),
            rule.order.unwrap_or(f64::NAN),
        ),
        explained: false,
    }
}

fn unitarity(t: &TransitionMatrix2) -> f64 {
    let m = t.t;
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        for k in 0..2 {
            let e = m[0][j].conj() * m[0][k] + m[1][j].conj() * m[1][k] - if j == k { 1.0 } else { 0.0 };
            worst = worst.max(e.norm());
        }
    }
    worst
}

fn criterion_4(drifts: &mut Vec<f64>) -> Outcome {
    let start = Instant::now();
    let a = analysis("lz");
    let want = 1.0 - (-PI).exp();
    let err = |t: &TransitionMatrix2| ((t.t[1][0].norm_sqr() - want).abs(), unitarity(t));
    let fixed = reproduce(&a, &fixed_x0(), err);
    let rule = reproduce(&a, &OracleOptions::default(), err);
    drifts.extend([fixed.drift, rule.drift]);
    let secs = start.elapsed().as_secs_f64();
    let order_ok = fixed.order.is_some_and(|o| o >= 0.4);
    Outcome {
        passed: order_ok && closure_ok(&fixed) && secs < 120.0,
        detail: format!(
            "lz |nu| = {:.3}, X0 = {MATCH_X0}: ||t21|^2-(1-e^-pi)| = [{}], fitted order {:.2}, C = {:.1e}; \
             ||T^+T - I|| = [{}] (bound 3 sqrt(hbar)). Default X0 rule: [{}], order {:.2}. {secs:.1} s (both runs)",
            a.data.nu.norm(),
            fmt_list(&fixed.errors),
            fixed.order.unwrap_or(f64::NAN),
            fixed.c_sqrt,
            fmt_list(&fixed.closure),
            fmt_list(&rule.errors),
            rule.order.unwrap_or(f64::NAN),
        ),
        explained: false,
    }
}

fn criterion_5(drifts: &[f64]) -> Outcome {
    let worst = drifts.iter().cloned().fold(0.0, f64::max);
    let a = analysis("lz");
    let strict = OracleOptions { tol: 1e-5, flux_tol: 1e-17, ..Default::default() };
    let aborted = matches!(a.empirical_T(1e-2, &strict), Err(Error::FluxDrift { .. }));
    Outcome {
        passed: worst <= 1e-8 && aborted,
        detail: format!(
            "max relative drift over {} oracle runs (criteria 3, 4) {worst:.1e}; forced violation aborts: {aborted}",
            drifts.len() * 3
        ),
        explained: false,
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut ode, mut rec, mut cont, mut wr): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let radii: Vec<f64> = (1..=56).map(|k| 0.25 * k as f64).collect();
    let h = 2e-3;
    for im in [0.0, 0.5, 2.0] {
        let nu = C64::new(0.0, im);
        for ray in [Ray::Lower, Ray::Upper] {
            let e = ray.point(1.0);
            let y = |r: f64| pcf_d(nu, ray.point(r)).unwrap();
            let max_y = radii.iter().map(|&r| y(r).value.norm()).fold(0.0, f64::max);
            for &r in &radii {
                let s = r - 0.05;
                let dy = |r: f64| y(r).derivative;
                let d2 = (-dy(s + 2.0 * h) + 8.0 * dy(s + h) - 8.0 * dy(s - h) + dy(s - 2.0 * h)) / (12.0 * h * e);
                let z = ray.point(s);
                ode = ode.max((d2 + (nu + 0.5 - z * z / 4.0) * y(s).value).norm() / max_y);
                rec = rec.max(recurrence_residual(nu, ray.point(r)).unwrap());
            }
            let a = y(Z_SWITCH);
            let b = y(Z_SWITCH * (1.0 + 1e-12));
            cont = cont.max((a.value - b.value).norm() / a.value.norm());
        }
        let want = (2.0 * PI).sqrt() * rgamma(-nu);
        for &r in &radii {
            let (w, scale) = wronskian(nu, Ray::Lower.point(r)).unwrap();
            wr = wr.max((w - want).norm() / scale.max(want.norm()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: ode <= 1e-6 && rec <= 1e-8 && cont <= 1e-5 && wr <= 1e-8 && secs < 10.0,
        detail: format!(
            "nu in {{0, i/2, 2i}}, both rays, |z| <= 14: ODE {ode:.1e} (x max|y|), recurrence {rec:.1e}, \
             switch continuity {cont:.1e} at |z| = {Z_SWITCH}, Wronskian {wr:.1e}; {secs:.2} s"
        ),
        explained: false,
    }
}

fn criterion_7() -> Outcome {
    let mut models: Vec<(String, Model)> =
        ["graphene", "lz", "wave"].iter().map(|n| (n.to_string(), builtin(n, &[]).unwrap())).collect();
    models.push(("random 4x4".into(), common::random_pencil(7, true).0));
    let (mut k12, mut slope, mut orth): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (_, m) in &models {
        let a = Analysis::new(m, AnalysisOptions::default()).unwrap();
        let x0 = a.data.x0;
        let kp = a.problem.k_prime(x0);
        let p = [a.branches[0].eval(x0).unwrap(), a.branches[1].eval(x0).unwrap()];
        k12 = k12.max(p[0].phi.dotc(&(&kp * &p[1].phi)).norm()).max(p[1].phi.dotc(&(&kp * &p[0].phi)).norm());
        let (lo, hi) = a.problem.domain();
        let h = 1e-5;
        for x in uniform_grid((lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)), 9) {
            let kp = a.problem.k_prime(x);
            let q = [a.branches[0].eval(x).unwrap(), a.branches[1].eval(x).unwrap()];
            for (br, p) in a.branches.iter().zip(&q) {
                let fd = (br.eval(x + h).unwrap().beta - br.eval(x - h).unwrap().beta) / (2.0 * h);
                slope = slope.max((fd - p.phi.dotc(&(&kp * &p.phi)).re / p.norm).abs());
            }
            let g = a.problem.gamma();
            orth = orth.max(q[0].phi.dotc(&(g * &q[1].phi)).norm() / (q[0].norm * q[1].norm).abs().sqrt());
        }
    }
    Outcome {
        passed: k12 <= 1e-8 && slope <= 1e-6 && orth <= 1e-10,
        detail: format!(
            "{}: max |K'12|, |K'21| at x0 {k12:.1e}; max |dbeta/dx - K'jj/Nj| {slope:.1e}; Gamma-orthogonality {orth:.1e}",
            models.iter().map(|m| m.0.as_str()).collect::<Vec<_>>().join(", ")
        ),
        explained: false,
    }
}

fn regauged(a: &Analysis, hbar: f64, seed: u64) -> AdiabaticModes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
    let [b0, b1] = a.branches.clone();
    let branches = [
        b0.with_regauge(move |x| c[0] + c[1] * x + c[2] * (2.0 * x).sin()),
        b1.with_regauge(move |x| c[3] + c[4] * x * x + c[5] * (3.0 * x).cos()),
    ];
    let data = extract_parameters(&branches, &a.problem, a.data.x0, None).unwrap();
    AdiabaticModes::new(a.problem.clone(), branches, data, hbar, a.options.adiabatic).unwrap()
}

fn general_from(md: &AdiabaticModes, x_ref: (f64, f64)) -> TransitionMatrix2 {
    let n = |j: usize, side: Side, x: f64| md.mode_norm_factor(&ModeSpec::general(j, side, x)).unwrap();
    let t = canonical_T(md.data.nu, md.data.w).unwrap();
    general_T(&t, n(1, Side::Left, x_ref.0), n(2, Side::Left, x_ref.0), n(1, Side::Right, x_ref.1), n(2, Side::Right, x_ref.1))
        .unwrap()
}

fn abs_change(a: &TransitionMatrix2, b: &TransitionMatrix2) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    (0..4).map(|i| (x[i / 2][i % 2] - y[i / 2][i % 2]).abs()).fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let (mut emp, mut gen): (f64, f64) = (0.0, 0.0);
    let hbar = 1e-3;
    for name in ["graphene", "lz"] {
        let a = analysis(name);
        let base = a.modes(hbar).unwrap();
        let e0 = extract_empirical_T(&base, &OracleOptions::default()).unwrap().matrix;
        let x_ref = (a.data.x0 - 0.6, a.data.x0 + 0.6);
        let g0 = general_from(&base, x_ref);
        for seed in [1, 2, 3] {
            let md = regauged(&a, hbar, seed);
            emp = emp.max(abs_change(&extract_empirical_T(&md, &OracleOptions::default()).unwrap().matrix, &e0));
            gen = gen.max(abs_change(&general_from(&md, x_ref), &g0));
        }
    }
    // doubling x*: canonical mode values away from the crossing
    let a = analysis("graphene");
    let g = a.options.adiabatic.g;
    let mut ratios = Vec::new();
    let mut diffs = Vec::new();
    for h in HBARS {
        let one = a.modes(h).unwrap();
        let two = AdiabaticModes::new(
            a.problem.clone(),
            a.branches.clone(),
            a.data.clone(),
            h,
            AdiabaticConfig { x_star_scale: 2.0 * a.options.adiabatic.x_star_scale, ..a.options.adiabatic },
        )
        .unwrap();
        let mut d: f64 = 0.0;
        for (side, x) in [(Side::Left, a.data.x0 - 0.7), (Side::Right, a.data.x0 + 0.7)] {
            for j in [1, 2] {
                let u = one.canonical_mode_value(j, side, x).unwrap();
                let v = two.canonical_mode_value(j, side, x).unwrap();
                d = d.max((&u - &v).norm() / u.norm());
            }
        }
        diffs.push(d);
        ratios.push(d / h.powf(0.5 - g));
    }
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    let bounded = ratios.last().unwrap() <= &(ratios[0] * 1.5);
    Outcome {
        passed: emp <= 1e-6 && gen <= 1e-6 && bounded,
        detail: format!(
            "regauge (3 seeds, graphene and lz, hbar = 1e-3): max ||entries| change| empirical {emp:.1e}, general {gen:.1e}; \
             doubling x*: relative mode change [{}] at hbar = 1e-2, 1e-3, 1e-4, ratio to hbar^(1/2-g) [{}], C = {c:.2}",
            fmt_list(&diffs),
            fmt_list(&ratios)
        ),
        explained: false,
    }
}

fn main() {
    // libtest arguments such as --nocapture or a name filter are ignored
    let total = Instant::now();
    let mut drifts = Vec::new();
    let results: Vec<(u32, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3(&mut drifts)),
        (4, criterion_4(&mut drifts)),
        (5, criterion_5(&drifts)),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
    ];
    let mut unexpected = Vec::new();
    for (id, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id}: {tag}  {}", o.detail);
        if UNATTAINABLE.contains(id) {
            if !o.passed {
                println!(
                    "criterion {id}: unattainable as stated; failure {} the analysed law",
                    if o.explained { "matches" } else { "does NOT match" }
                );
                if !o.explained {
                    unexpected.push(*id);
                }
            }
        } else if !o.passed {
            unexpected.push(*id);
        }
    }
    println!("acceptance: {:.1} s total", total.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
