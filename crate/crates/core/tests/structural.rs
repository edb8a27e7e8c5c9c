//! Structural identities of the tracked pair: vanishing coupling at the
//! crossing, the slope identity and Γ-orthogonality.

mod common;

use pencil_transit::models::builtin;
use pencil_transit::pencil::uniform_grid;
use pencil_transit::{Analysis, AnalysisOptions, Model, C64};

fn inner(a: &pencil_transit::CVec, m: &pencil_transit::CMat, b: &pencil_transit::CVec) -> C64 {
    a.dotc(&(m * b))
}

fn models() -> Vec<(String, Model)> {
    let mut out: Vec<(String, Model)> = ["graphene", "lz", "wave"]
        .iter()
        .map(|n| (n.to_string(), builtin(n, &[]).unwrap()))
        .collect();
    out.push(("random 4x4, opposite signs".into(), common::random_pencil(7, true).0));
    out.push(("random 4x4, equal signs".into(), common::random_pencil(11, false).0));
    out
}

#[test]
fn coupling_vanishes_at_crossing() {
    for (name, m) in models() {
        let a = Analysis::new(&m, AnalysisOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let x0 = a.data.x0;
        let kp = a.problem.k_prime(x0);
        let p = [a.branches[0].eval(x0).unwrap(), a.branches[1].eval(x0).unwrap()];
        let k12 = inner(&p[0].phi, &kp, &p[1].phi);
        let k21 = inner(&p[1].phi, &kp, &p[0].phi);
        assert!(k12.norm() <= 1e-8 && k21.norm() <= 1e-8, "{name}: K'12 = {k12:e}, K'21 = {k21:e}");
        assert!(a.elements.kp[0][1].norm() <= 1e-8, "{name}");
    }
}

#[test]
fn slope_identity() {
    for (name, m) in models() {
        let a = Analysis::new(&m, AnalysisOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (lo, hi) = a.problem.domain();
        let h = 1e-5;
        for x in uniform_grid((lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)), 9) {
            let kp = a.problem.k_prime(x);
            for br in &a.branches {
                let p = br.eval(x).unwrap();
                let slope = (br.eval(x + h).unwrap().beta - br.eval(x - h).unwrap().beta) / (2.0 * h);
                let want = inner(&p.phi, &kp, &p.phi).re / p.norm;
                assert!((slope - want).abs() <= 1e-6, "{name} x={x}: {slope} vs {want}");
            }
        }
        assert!(a.elements.consistent(), "{name}");
    }
}

#[test]
fn gamma_orthogonality() {
    for (name, m) in models() {
        let a = Analysis::new(&m, AnalysisOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let g = a.problem.gamma().clone();
        for x in uniform_grid(a.problem.domain(), 41) {
            if (x - a.data.x0).abs() < 1e-3 {
                continue;
            }
            let p = [a.branches[0].eval(x).unwrap(), a.branches[1].eval(x).unwrap()];
            let o = inner(&p[0].phi, &g, &p[1].phi).norm() / (p[0].norm.abs() * p[1].norm.abs()).sqrt();
            assert!(o <= 1e-10, "{name} x={x}: {o:e}");
            for q in &p {
                assert!((inner(&q.phi, &g, &q.phi).re - q.norm).abs() <= 1e-12, "{name} x={x}");
            }
        }
        assert!(a.properties.all_passed(), "{name}");
    }
}

#[test]
fn random_pencil_crossing_location() {
    for (seed, opposite) in [(7, true), (11, false), (23, true), (31, false)] {
        let name = format!("seed {seed}");
        let (m, xc) = common::random_pencil(seed, opposite);
        let a = Analysis::new(&m, AnalysisOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!((a.data.x0 - xc).abs() < 1e-8, "seed {seed}: {} vs {xc}", a.data.x0);
        assert_eq!(a.data.w, if opposite { -1 } else { 1 }, "seed {seed}");
    }
}

