//! Gamma function of complex argument.
//!
//! Lanczos approximation with Pugh's coefficients (r = 10.900511, 11 terms),
//! reflection for `Re z < 1/2`.

use crate::C64;
use std::f64::consts::PI;

const LANCZOS_R: f64 = 10.900511;

const LANCZOS_D: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// ln(2·sqrt(e/π))
const LN_TWO_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

/// Lanczos branch, valid for `Re z >= 1/2`; continuous in z there.
fn ln_gamma_right(z: C64) -> C64 {
    let mut s = C64::new(LANCZOS_D[0], 0.0);
    for (k, &d) in LANCZOS_D.iter().enumerate().skip(1) {
        s += d / (z + (k as f64 - 1.0));
    }
    let zh = z - 0.5;
    let l = C64::new(LN_TWO_SQRT_E_OVER_PI, 0.0) + s.ln() + zh * ((zh + LANCZOS_R).ln() - 1.0);
    // the principal log of the Lanczos sum can wrap; snap to the continuous branch
    let rough = continuous_arg_estimate(z);
    let turns = ((rough - l.im) / (2.0 * PI)).round();
    C64::new(l.re, l.im + 2.0 * PI * turns)
}

/// Imaginary part of ln Γ(z) on the branch continuous from the positive real
/// axis, accurate to well below π for `Re z >= 1/2`.
fn continuous_arg_estimate(z: C64) -> f64 {
    let mut w = z;
    let mut shift = 0.0;
    while w.norm() < 8.0 {
        shift += w.arg();
        w += 1.0;
    }
    ((w - 0.5) * w.ln() - w + 1.0 / (12.0 * w)).im - shift
}

/// Log-gamma of complex argument.
///
/// For `Re z >= 1/2` this is the analytic continuation from the positive real
/// axis (so `Im ln Γ(1+iy)` is the continuous argument). For `Re z < 1/2`
/// the reflection formula is used and the imaginary part is only defined
/// modulo 2π.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re >= 0.5 {
        ln_gamma_right(z)
    } else {
        let s = (z * PI).sin();
        C64::new(PI.ln(), 0.0) - s.ln() - ln_gamma_right(1.0 - z)
    }
}

fn is_nonpositive_integer(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// Γ(z). Returns infinity at the poles.
pub fn gamma(z: C64) -> C64 {
    if is_nonpositive_integer(z) {
        return C64::new(f64::INFINITY, 0.0);
    }
    if z.re >= 0.5 {
        ln_gamma_right(z).exp()
    } else {
        PI / ((z * PI).sin() * ln_gamma_right(1.0 - z).exp())
    }
}

/// 1/Γ(z), entire; exactly zero at the poles of Γ.
pub fn rgamma(z: C64) -> C64 {
    if is_nonpositive_integer(z) {
        return C64::new(0.0, 0.0);
    }
    if z.re >= 0.5 {
        (-ln_gamma_right(z)).exp()
    } else {
        (z * PI).sin() * ln_gamma_right(1.0 - z).exp() / PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stirling series after upward shift; independent of the Lanczos table.
    fn ln_gamma_stirling(z: C64) -> C64 {
        let mut shift = C64::new(0.0, 0.0);
        let mut w = z;
        while w.norm() < 20.0 || w.re < 10.0 {
            shift += w.ln();
            w += 1.0;
        }
        let b = [
            1.0 / 12.0,
            -1.0 / 360.0,
            1.0 / 1260.0,
            -1.0 / 1680.0,
            1.0 / 1188.0,
            -691.0 / 360360.0,
            1.0 / 156.0,
        ];
        let mut series = C64::new(0.0, 0.0);
        let w2 = w * w;
        let mut wp = w;
        for bk in b {
            series += bk / wp;
            wp *= w2;
        }
        (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
    }

    #[test]
    fn real_values() {
        assert!((gamma(C64::new(1.0, 0.0)).re - 1.0).abs() < 1e-14);
        assert!((gamma(C64::new(5.0, 0.0)).re - 24.0).abs() < 1e-12);
        assert!((gamma(C64::new(0.5, 0.0)).re - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(C64::new(-0.5, 0.0)).re + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert_eq!(rgamma(C64::new(0.0, 0.0)), C64::new(0.0, 0.0));
        assert_eq!(rgamma(C64::new(-3.0, 0.0)), C64::new(0.0, 0.0));
    }

    #[test]
    fn modulus_identities_on_imaginary_lines() {
        for &y in &[1e-4, 0.1, 0.5, 1.0, 3.0, 10.0, 20.0, 50.0, 100.0] {
            // |Γ(1+iy)|² = πy / sinh(πy)
            let l = ln_gamma(C64::new(1.0, y));
            let expect = (PI * y).ln() - (PI * y).sinh().ln();
            assert!((2.0 * l.re - expect).abs() < 1e-12, "y={y}");
            // |Γ(1/2+iy)|² = π / cosh(πy)
            let l = ln_gamma(C64::new(0.5, y));
            let expect = PI.ln() - (PI * y).cosh().ln();
            assert!((2.0 * l.re - expect).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn agrees_with_stirling() {
        for &(x, y) in &[
            (1.0, 0.5),
            (1.0, -0.5),
            (1.0, 20.0),
            (1.0, -50.0),
            (0.5, 3.0),
            (2.5, -7.0),
            (1.0, 100.0),
            (0.7, 0.01),
        ] {
            let z = C64::new(x, y);
            let a = ln_gamma(z);
            let b = ln_gamma_stirling(z);
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "z={z} {a} {b}");
        }
    }

    #[test]
    fn reflection_side() {
        for &(x, y) in &[(0.0, 0.5), (0.0, -2.0), (-1.0, 0.5), (0.25, 1.5)] {
            let z = C64::new(x, y);
            // Γ(z+1) = zΓ(z)
            let lhs = gamma(z + 1.0);
            let rhs = z * gamma(z);
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm(), "z={z}");
            assert!((rgamma(z) * gamma(z) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn mpmath_reference_values() {
        // mpmath.loggamma at 30 digits
        let cases = [
            ((1.0, 0.5), (-0.19094549918677936, -0.24405829890542776)),
            ((1.0, 20.0), (-28.999121865916264, 40.695876620339897)),
            ((0.5, 3.0), (-3.7934504504362232, 0.30981927108643917)),
            ((1.0, -50.0), (-75.664866303826085, -146.38488174591332)),
        ];
        for ((x, y), (re, im)) in cases {
            let l = ln_gamma(C64::new(x, y));
            assert!((l.re - re).abs() < 1e-12 && (l.im - im).abs() < 1e-11, "{l}");
        }
    }
}
