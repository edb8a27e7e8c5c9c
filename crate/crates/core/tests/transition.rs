//! Closed-form transition matrices over a wide range of orders.

use pencil_transit::transition::{canonical_T, check_T_properties, general_T, polar_T, renumber_T, reflection_transmission};
use pencil_transit::C64;
use std::f64::consts::PI;

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn order(a: f64, w: i32) -> C64 {
    C64::new(0.0, a * w as f64)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn magnitudes_over_fifty_orders() {
    for w in [1, -1] {
        let wf = w as f64;
        for a in log_spaced(1e-4, 50.0, 50) {
            let t = canonical_T(order(a, w), w).unwrap();
            let d = (-PI * a * wf).exp();
            let off = (1.0 - (-2.0 * PI * a).exp()) * (-PI * a * (wf - 1.0)).exp();
            assert!(rel(t.t[0][0].norm(), d) <= 1e-10 && rel(t.t[1][1].norm(), d) <= 1e-10, "w={w} |nu|={a}");
            assert!(rel((t.t[0][1] * t.t[1][0]).norm(), off) <= 1e-10, "w={w} |nu|={a}");
            assert!((t.det() - 1.0).norm() <= 1e-12 * d.max(1.0).powi(2), "w={w} |nu|={a}: det {}", t.det());
        }
    }
}

#[test]
fn reference_entries() {
    // mpmath at 30 digits
    type Entry = (f64, f64);
    let table: [(f64, i32, [Entry; 3]); 6] = [
        (0.5, 1, [(0.2078795763507619, 0.0), (-0.961842220161643, 0.17789217310143052), (0.961842220161643, 0.17789217310143052)]),
        (-0.5, -1, [(4.810477380965351, 0.0), (4.626920244145079, 0.8557462749552044), (4.626920244145079, -0.8557462749552044)]),
        (2.0, 1, [(0.0018674427317079889, 0.0), (-0.9991144462739109, 0.04203374720888251), (0.9991144462739109, 0.04203374720888251)]),
        (-2.0, -1, [(535.4916555247647, 0.0), (535.0174488939251, 22.508720880793955), (535.0174488939251, -22.508720880793955)]),
        (0.01, 1, [(0.9690724263048106, 0.0), (-0.18304681980442356, 0.16550678032997393), (0.18304681980442356, 0.16550678032997393)]),
        (7.5, 1, [(5.85028934679409e-11, 0.0), (-0.999938198683347, 0.011117500344201213), (0.999938198683347, 0.011117500344201213)]),
    ];
    for (y, w, [d, t12, t21]) in table {
        let t = canonical_T(C64::new(0.0, y), w).unwrap();
        for (got, want) in [(t.t[0][0], d), (t.t[1][1], d), (t.t[0][1], t12), (t.t[1][0], t21)] {
            let want = C64::new(want.0, want.1);
            assert!((got - want).norm() <= 1e-12 * want.norm(), "nu={y}i: {got} vs {want}");
        }
    }
}

#[test]
fn polar_form_agrees_over_sweep() {
    for w in [1, -1] {
        for a in log_spaced(1e-4, 50.0, 50) {
            let t = canonical_T(order(a, w), w).unwrap();
            let p = polar_T(order(a, w), w).unwrap();
            let scale = t.t.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(p.matrix.max_diff(&t.t) <= 1e-10 * scale, "w={w} |nu|={a}");
        }
    }
}

#[test]
fn flux_structure_over_sweep() {
    for a in log_spaced(1e-4, 50.0, 50) {
        // w = +1 pairs modes of equal flux sign, w = −1 of opposite sign
        for (w, s2) in [(1, 1.0), (-1, -1.0)] {
            let t = canonical_T(order(a, w), w).unwrap();
            let report = check_T_properties(&t, 1.0, s2, 1e-10);
            assert!(report.all_passed(), "w={w} |nu|={a}: {report:?}");
            let r = renumber_T(&t).unwrap();
            assert!((r.det() - t.det()).norm() <= 1e-12 * t.t[0][0].norm().max(1.0).powi(2));
        }
    }
}

#[test]
fn adiabatic_limit_with_sign() {
    // w = +1, |ν| → ∞: each mode follows its branch, t₁₂ → −1 and t₂₁ → +1,
    // with the residual phase given by the Stirling series of arg Γ(1 + i|ν|)
    for a in [5.0, 10.0, 20.0, 50.0, 100.0] {
        let t = canonical_T(order(a, 1), 1).unwrap();
        assert!(t.t[0][0].norm() <= 2.0 * (-PI * a).exp());
        let theta = 1.0 / (12.0 * a) + 1.0 / (360.0 * a.powi(3)) + 1.0 / (1260.0 * a.powi(5));
        let want12 = -C64::from_polar(1.0, -theta);
        let want21 = C64::from_polar(1.0, theta);
        assert!((t.t[0][1] - want12).norm() <= 1e-6 / a, "|nu|={a}: {}", t.t[0][1]);
        assert!((t.t[1][0] - want21).norm() <= 1e-6 / a, "|nu|={a}: {}", t.t[1][0]);
    }
}

#[test]
fn small_order_limit() {
    // T − I is dominated by off-diagonal entries of size √(2π|ν|)
    for w in [1, -1] {
        for a in log_spaced(1e-8, 1e-3, 6) {
            let t = canonical_T(order(a, w), w).unwrap();
            for (j, k) in [(0, 1), (1, 0)] {
                assert!(rel(t.t[j][k].norm(), (2.0 * PI * a).sqrt()) <= 5.0 * a, "w={w} |nu|={a}");
            }
            assert!((t.t[0][0] - 1.0).norm() <= 4.0 * a);
        }
    }
}

#[test]
fn reflection_probability_sums_to_one() {
    for a in log_spaced(1e-3, 10.0, 20) {
        let t = canonical_T(order(a, -1), -1).unwrap();
        let (r, tr) = reflection_transmission(&t).unwrap();
        assert!(rel(tr.norm(), (-PI * a).exp()) <= 1e-10);
        assert!((r.norm_sqr() + tr.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn general_matrix_rescales_consistently() {
    let t = canonical_T(C64::new(0.0, 0.7), 1).unwrap();
    let n = [C64::new(0.8, 0.1), C64::new(1.3, -0.4), C64::new(-0.5, 0.9), C64::new(1.1, 0.2)];
    let g = general_T(&t, n[0], n[1], n[2], n[3]).unwrap();
    // undoing the renormalization recovers the canonical entries
    let back = general_T(&g, C64::new(1.0, 0.0) / n[0], C64::new(1.0, 0.0) / n[1], C64::new(1.0, 0.0) / n[2], C64::new(1.0, 0.0) / n[3]).unwrap();
    assert!(back.max_diff(&t.t) <= 1e-14);
}
