//! Closed-form 2×2 transition matrices and their structural identities.
//!
//! A solution equal to `Σ k_j⁻ Ψ_{j−}` left of the crossing equals
//! `Σ k_j⁺ Ψ_{j+}` right of it, with `k⁺ = T k⁻`.

use crate::pcf::gamma::ln_gamma;
use crate::pcf::NU_MAX;
use crate::{c, Error, Result, C64};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

/// Which modes the matrix connects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Canonical modes, smooth-eigenvalue numbering.
    Canonical,
    /// Modes with arbitrary normalization and reference points.
    General,
    /// Left modes renumbered by phase velocity.
    Renumbered,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::Canonical => "canonical",
            Convention::General => "general",
            Convention::Renumbered => "renumbered",
        }
    }
}

/// A 2×2 complex transition matrix with its convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix2 {
    pub t: [[C64; 2]; 2],
    pub convention: Convention,
    pub nu: C64,
    pub w: i32,
}

impl TransitionMatrix2 {
    pub fn new(t: [[C64; 2]; 2], convention: Convention, nu: C64, w: i32) -> Self {
        TransitionMatrix2 { t, convention, nu, w }
    }

    /// Entry `t_jk` with 1-based indices.
    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.t[j - 1][k - 1]
    }

    pub fn det(&self) -> C64 {
        self.t[0][0] * self.t[1][1] - self.t[0][1] * self.t[1][0]
    }

    pub fn abs(&self) -> [[f64; 2]; 2] {
        self.t.map(|r| r.map(|z| z.norm()))
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_diff(&self, other: &[[C64; 2]; 2]) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                m = m.max((self.t[j][k] - other[j][k]).norm());
            }
        }
        m
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_diff(&self, other: &[[C64; 2]; 2]) -> f64 {
        let mut s = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                s += (self.t[j][k] - other[j][k]).norm_sqr();
            }
        }
        s.sqrt()
    }
}

impl fmt::Display for TransitionMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.t {
            writeln!(
                f,
                "[{:+.9e}{:+.9e}i  {:+.9e}{:+.9e}i]",
                r[0].re, r[0].im, r[1].re, r[1].im
            )?;
        }
        Ok(())
    }
}

fn check_nu(nu: C64, w: i32) -> Result<()> {
    if w != 1 && w != -1 {
        return Err(Error::Transition(format!("w must be ±1, got {w}")));
    }
    if nu.re.abs() > 1e-12 * (1.0 + nu.norm()) {
        return Err(Error::Transition(format!("nu = {nu} is not purely imaginary")));
    }
    if nu.norm() > NU_MAX {
        return Err(Error::OutOfRange(format!("|nu| = {} exceeds {NU_MAX}", nu.norm())));
    }
    if nu.im != 0.0 && nu.im.signum() as i32 != w {
        return Err(Error::Transition(format!("sign of Im nu = {} disagrees with w = {w}", nu.im)));
    }
    Ok(())
}

/// `√ν = e^{iπw/4}√|ν|`.
pub fn sqrt_nu(nu: C64, w: i32) -> C64 {
    C64::from_polar(nu.norm().sqrt(), FRAC_PI_4 * w as f64)
}

/// The canonical transition matrix.
///
/// `t₁₁ = t₂₂ = e^{iπν}`,
/// `t₁₂ = i√(2πν) e^{iπν/2 + ν − ν ln|ν|}/Γ(1−ν)`,
/// `t₂₁ = √(2πν) e^{iπν/2 − ν + ν ln|ν|}/Γ(1+ν)`; `ν = 0` gives the identity.
#[allow(non_snake_case)]
pub fn canonical_T(nu: C64, w: i32) -> Result<TransitionMatrix2> {
    check_nu(nu, w)?;
    let nu = c(0.0, nu.im);
    if nu.im == 0.0 {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        return Ok(TransitionMatrix2::new([[one, zero], [zero, one]], Convention::Canonical, nu, w));
    }
    let i = c(0.0, 1.0);
    let ln_abs = nu.norm().ln();
    let ln_pref = ((2.0 * PI).sqrt() * sqrt_nu(nu, w)).ln();
    let diag = (i * PI * nu).exp();
    let t12 = i * (ln_pref + i * PI * nu / 2.0 + nu - nu * ln_abs - ln_gamma(1.0 - nu)).exp();
    let t21 = (ln_pref + i * PI * nu / 2.0 - nu + nu * ln_abs - ln_gamma(1.0 + nu)).exp();
    Ok(TransitionMatrix2::new([[diag, t12], [t21, diag]], Convention::Canonical, nu, w))
}

/// `θ_Γ(ν)`, the leading large-`|ν|` form of `arg Γ(1+ν)`:
/// `iθ_Γ = −ν + ν ln|ν| + iπw/4`.
pub fn theta_gamma(nu: C64, w: i32) -> f64 {
    let a = nu.norm();
    w as f64 * a * (a.ln() - 1.0) + FRAC_PI_4 * w as f64
}

/// Polar form of the canonical matrix.
#[derive(Debug, Clone, Copy)]
pub struct PolarT {
    pub matrix: TransitionMatrix2,
    /// `θ′ = arg Γ(1+ν) − θ_Γ`; `None` for `ν = 0`.
    pub theta_prime: Option<f64>,
}

/// The canonical matrix from moduli and arguments:
/// `t₁₁ = t₂₂ = e^{−π|ν|w}`, off-diagonal modulus
/// `√(1−e^{−2π|ν|}) e^{−π|ν|(w−1)/2}` with phases `e^{iθ′}e^{iπ(1+w)/2}`
/// and `e^{−iθ′}`.
#[allow(non_snake_case)]
pub fn polar_T(nu: C64, w: i32) -> Result<PolarT> {
    check_nu(nu, w)?;
    let a = nu.norm();
    if a == 0.0 {
        return Ok(PolarT {
            matrix: canonical_T(nu, w)?,
            theta_prime: None,
        });
    }
    let nu = c(0.0, nu.im);
    let theta = ln_gamma(1.0 + nu).im - theta_gamma(nu, w);
    let wf = w as f64;
    let diag = c((-PI * a * wf).exp(), 0.0);
    let off = (-(-2.0 * PI * a).exp_m1()).sqrt() * (-0.5 * PI * a * (wf - 1.0)).exp();
    let t12 = C64::from_polar(off, theta + 0.5 * PI * (1.0 + wf));
    let t21 = C64::from_polar(off, -theta);
    Ok(PolarT {
        matrix: TransitionMatrix2::new([[diag, t12], [t21, diag]], Convention::Canonical, nu, w),
        theta_prime: Some(theta),
    })
}

/// `T̃ = diag(n₁⁺, n₂⁺) T diag(1/n₁⁻, 1/n₂⁻)`.
#[allow(non_snake_case)]
pub fn general_T(canonical: &TransitionMatrix2, n1m: C64, n2m: C64, n1p: C64, n2p: C64) -> Result<TransitionMatrix2> {
    if [n1m, n2m, n1p, n2p].iter().any(|z| z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Transition("normalization factors must be finite and non-zero".into()));
    }
    let left = [n1p, n2p];
    let right = [n1m, n2m];
    let mut t = canonical.t;
    for j in 0..2 {
        for k in 0..2 {
            t[j][k] = left[j] * canonical.t[j][k] / right[k];
        }
    }
    Ok(TransitionMatrix2::new(t, Convention::General, canonical.nu, canonical.w))
}

/// `T · [[0, 1], [−1, 0]]`: left modes numbered by phase velocity.
#[allow(non_snake_case)]
pub fn renumber_T(t: &TransitionMatrix2) -> Result<TransitionMatrix2> {
    if t.convention == Convention::Renumbered {
        return Err(Error::Transition("matrix is already renumbered".into()));
    }
    let m = t.t;
    Ok(TransitionMatrix2::new(
        [[-m[0][1], m[0][0]], [-m[1][1], m[1][0]]],
        Convention::Renumbered,
        t.nu,
        t.w,
    ))
}

/// Reflection `R = −t₂₁/t₂₂` and transmission `T = det T/t₂₂`, using
/// `det T = 1` for canonical and renumbered matrices.
pub fn reflection_transmission(t: &TransitionMatrix2) -> Result<(C64, C64)> {
    let t22 = t.t[1][1];
    if t22.norm() == 0.0 {
        return Err(Error::Transition("t22 = 0: reflection and transmission are undefined".into()));
    }
    if t.w == 1 {
        log::warn!("reflection/transmission requested for an avoided crossing (w = +1)");
    }
    let det = match t.convention {
        Convention::General => t.det(),
        _ => c(1.0, 0.0),
    };
    Ok((-t.t[1][0] / t22, det / t22))
}

/// One structural identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Relative residual (or the measured quantity, for `unitarity`).
    pub value: f64,
    pub tolerance: f64,
}

/// Flux identities, determinant and unitarity of a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TPropertyReport {
    pub checks: Vec<TCheck>,
    /// `γ = conj(t₁₁)/t₂₂`.
    pub gamma: C64,
    pub det: C64,
}

impl TPropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&TCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Closed-form tolerance.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// Tolerance for empirical matrices, `max(1e−6, 3√ħ)`.
pub fn empirical_tolerance(hbar: f64) -> f64 {
    (3.0 * hbar.sqrt()).max(1e-6)
}

/// Checks `T†diag(N)T = diag(N)` entrywise, `det T = 1`, and that `T` is
/// unitary exactly when `N₁N₂ > 0`. Residuals are relative to the size of
/// the terms involved.
#[allow(non_snake_case)]
pub fn check_T_properties(t: &TransitionMatrix2, n1_sign: f64, n2_sign: f64, tol: f64) -> TPropertyReport {
    let m = t.t;
    let (n1, n2) = (n1_sign, n2_sign);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, res: f64, scale: f64| {
        let v = res / scale.max(1e-300);
        checks.push(TCheck {
            name,
            passed: v <= tol,
            value: v,
            tolerance: tol,
        });
    };
    let a = m[0][0].norm_sqr() * n1 + m[1][0].norm_sqr() * n2;
    push("flux_1", (n1 - a).abs(), n1.abs() + m[0][0].norm_sqr() + m[1][0].norm_sqr());
    let b = m[0][1].norm_sqr() * n1 + m[1][1].norm_sqr() * n2;
    push("flux_2", (n2 - b).abs(), n2.abs() + m[0][1].norm_sqr() + m[1][1].norm_sqr());
    let x = m[0][0].conj() * m[0][1] * n1 + m[1][0].conj() * m[1][1] * n2;
    push("flux_cross", x.norm(), (m[0][0] * m[0][1]).norm() + (m[1][0] * m[1][1]).norm());
    let det = t.det();
    push("det", (det - 1.0).norm(), 1.0 + (m[0][0] * m[1][1]).norm() + (m[0][1] * m[1][0]).norm());
    let mut u: f64 = 0.0;
    let mut uscale: f64 = 1.0;
    for j in 0..2 {
        for k in 0..2 {
            let e = m[j][0] * m[k][0].conj() + m[j][1] * m[k][1].conj() - if j == k { 1.0 } else { 0.0 };
            u = u.max(e.norm());
            uscale = uscale.max(m[j][0].norm_sqr() + m[j][1].norm_sqr());
        }
    }
    let same_sign = n1 * n2 > 0.0;
    let unit = u / uscale <= tol;
    let trivial = t.nu.norm() == 0.0;
    checks.push(TCheck {
        name: "unitarity",
        passed: if same_sign { unit } else { !unit || trivial },
        value: u / uscale,
        tolerance: tol,
    });
    let gamma = if m[1][1].norm() == 0.0 { c(f64::NAN, f64::NAN) } else { m[0][0].conj() / m[1][1] };
    TPropertyReport { checks, gamma, det }
}
