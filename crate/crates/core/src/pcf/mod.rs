//! Parabolic cylinder functions `D_ν(z)` for purely imaginary `ν`.
//!
//! Only the set needed by the matching analysis is supported: the disk
//! `|z| <= z_switch` (Maclaurin series) and the two rays `arg z = −π/4` and
//! `arg z = 3π/4` beyond it (asymptotic series). The asymptotic series is
//! truncated at a fixed number of terms per order, chosen once at
//! `|z| = z_switch`, so evaluations are smooth along each ray.

pub mod gamma;

use crate::{Error, Result, C64};
use gamma::rgamma;
use std::f64::consts::{FRAC_PI_4, PI};

/// Default switch radius between series and asymptotic regimes.
pub const Z_SWITCH: f64 = 7.0;

/// Cap on asymptotic terms.
const MAX_ASYMPTOTIC_TERMS: usize = 18;

/// Largest supported `|ν|`.
pub const NU_MAX: f64 = 100.0;

const RAY_TOL: f64 = 1e-9;

/// Evaluation regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Series,
    Asymptotic,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Series => "series",
            Regime::Asymptotic => "asymptotic",
        }
    }
}

/// Asymptotic sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// `arg z ∈ (−3π/4, 3π/4)`.
    Principal,
    /// `arg z ∈ (π/4, 5π/4)`.
    Extended,
}

/// Value and derivative of `D_ν(z)`.
#[derive(Debug, Clone, Copy)]
pub struct PcfEvaluation {
    pub value: C64,
    pub derivative: C64,
    pub regime: Regime,
    /// Heuristic relative error (round-off growth in the series, first
    /// omitted term in the asymptotic regime).
    pub est_error: f64,
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy)]
pub struct PcfConfig {
    pub z_switch: f64,
}

impl Default for PcfConfig {
    fn default() -> Self {
        PcfConfig { z_switch: Z_SWITCH }
    }
}

/// The two supported rays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ray {
    /// `arg z = −π/4`
    Lower,
    /// `arg z = 3π/4`
    Upper,
}

impl Ray {
    pub fn angle(self) -> f64 {
        match self {
            Ray::Lower => -FRAC_PI_4,
            Ray::Upper => 3.0 * FRAC_PI_4,
        }
    }

    pub fn point(self, r: f64) -> C64 {
        C64::from_polar(r, self.angle())
    }

    /// Which ray `z` lies on, if any.
    pub fn of(z: C64) -> Option<Ray> {
        if z.norm() == 0.0 {
            return None;
        }
        let a = z.arg();
        if (a + FRAC_PI_4).abs() <= RAY_TOL {
            Some(Ray::Lower)
        } else if (a - 3.0 * FRAC_PI_4).abs() <= RAY_TOL {
            Some(Ray::Upper)
        } else {
            None
        }
    }
}

/// `D_ν(z)` with the default configuration.
///
/// `ν` must be purely imaginary with `|ν| <= 100`. Accuracy is verified for
/// `|ν| <= 5`; for larger orders both regimes lose digits at `|z| ≈ z_switch`.
pub fn pcf_d(nu: C64, z: C64) -> Result<PcfEvaluation> {
    check_nu(nu)?;
    pcf_d_order(nu, z, &PcfConfig::default())
}

/// `D_{ν−1}(z)` for purely imaginary `ν`.
pub fn pcf_d_lowered(nu: C64, z: C64) -> Result<PcfEvaluation> {
    check_nu(nu)?;
    pcf_d_order(nu - 1.0, z, &PcfConfig::default())
}

fn check_nu(nu: C64) -> Result<()> {
    if nu.re.abs() > 1e-12 * (1.0 + nu.norm()) {
        return Err(Error::Pcf(format!("order {nu} is not purely imaginary")));
    }
    if nu.norm() > NU_MAX {
        return Err(Error::OutOfRange(format!("|nu| = {} exceeds {NU_MAX}", nu.norm())));
    }
    Ok(())
}

/// `D_μ(z)` for a general order `μ` (used with `μ = ν` and `μ = ν − 1`).
pub fn pcf_d_order(mu: C64, z: C64, cfg: &PcfConfig) -> Result<PcfEvaluation> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Pcf(format!("non-finite argument {z}")));
    }
    if z.norm() <= cfg.z_switch {
        return series(mu, z);
    }
    let ray = Ray::of(z).ok_or_else(|| {
        Error::Pcf(format!(
            "argument {z} (|z| = {:.3}, arg = {:.6}) is off the supported rays",
            z.norm(),
            z.arg()
        ))
    })?;
    let n = asymptotic_terms(mu, z.norm());
    let (v, d, err) = match ray {
        Ray::Lower => {
            let (v, d, e) = principal_part(mu, z, n);
            (v, d, e)
        }
        Ray::Upper => {
            let (v1, d1, e1) = principal_part(mu, z, n);
            let (v2, d2, e2) = extended_part(mu, z, asymptotic_terms(-mu - 1.0, z.norm()));
            let scale = (v1 + v2).norm().max(1e-300);
            (v1 + v2, d1 + d2, (e1 * v1.norm() + e2 * v2.norm()) / scale)
        }
    };
    Ok(PcfEvaluation {
        value: v,
        derivative: d,
        regime: Regime::Asymptotic,
        est_error: err,
    })
}

/// `D_μ(0)` and `D_μ'(0)`.
pub fn initial_values(mu: C64) -> (C64, C64) {
    let sqrt_pi = PI.sqrt();
    let two = C64::new(2.0, 0.0);
    let d0 = two.powc(mu / 2.0) * sqrt_pi * rgamma((1.0 - mu) / 2.0);
    let d1 = -two.powc((mu + 1.0) / 2.0) * sqrt_pi * rgamma(-mu / 2.0);
    (d0, d1)
}

fn series(mu: C64, z: C64) -> Result<PcfEvaluation> {
    let (d0, d1) = initial_values(mu);
    let a = mu + 0.5;
    let zero = C64::new(0.0, 0.0);
    // Maclaurin coefficients of the even (ce) and odd (co) fundamental
    // solutions of y'' = (z²/4 − μ − 1/2) y.
    let mut ce = vec![C64::new(1.0, 0.0), zero];
    let mut co = vec![zero, C64::new(1.0, 0.0)];
    let (mut ye, mut yo) = (C64::new(1.0, 0.0), z);
    let (mut dye, mut dyo) = (zero, C64::new(1.0, 0.0));
    let mut zk_minus = z; // z^{k-1}
    let mut maxterm = 1.0f64.max(z.norm());
    let mut small_run = 0;
    let mut k = 2usize;
    loop {
        let kf = k as f64;
        let back = |c: &Vec<C64>| if k >= 4 { c[k - 4] / 4.0 } else { zero };
        let ne = (-a * ce[k - 2] + back(&ce)) / (kf * (kf - 1.0));
        let no = (-a * co[k - 2] + back(&co)) / (kf * (kf - 1.0));
        ce.push(ne);
        co.push(no);
        let zk = zk_minus * z;
        ye += ne * zk;
        yo += no * zk;
        dye += ne * kf * zk_minus;
        dyo += no * kf * zk_minus;
        zk_minus = zk;
        let t = (ne * zk).norm().max((no * zk).norm());
        maxterm = maxterm.max(t);
        let tot = ye.norm().max(yo.norm()).max(1e-300);
        if t <= 1e-18 * tot {
            small_run += 1;
            if small_run >= 4 {
                break;
            }
        } else {
            small_run = 0;
        }
        if k > 4000 {
            return Err(Error::Pcf(format!("series did not converge for mu={mu}, z={z}")));
        }
        k += 1;
    }
    let value = d0 * ye + d1 * yo;
    let derivative = d0 * dye + d1 * dyo;
    let scale = (d0.norm() + d1.norm()) * maxterm;
    let est = 1e-16 * (k as f64).sqrt() * scale / value.norm().max(1e-300);
    Ok(PcfEvaluation {
        value,
        derivative,
        regime: Regime::Series,
        est_error: est,
    })
}

/// Number of asymptotic terms for the series `Σ_s (−1)^s (−μ)_{2s}/(s!(2z²)^s)`:
/// optimal truncation at radius `r`, capped.
fn asymptotic_terms(mu: C64, r: f64) -> usize {
    let x = 2.0 * r * r;
    let mut prev = 1.0f64;
    let mut term = 1.0f64;
    for s in 1..=MAX_ASYMPTOTIC_TERMS {
        let sf = s as f64;
        term *= ((-mu + 2.0 * sf - 2.0) * (-mu + 2.0 * sf - 1.0)).norm() / (sf * x);
        if term > prev {
            return s;
        }
        prev = term;
    }
    MAX_ASYMPTOTIC_TERMS
}

/// `e^{−z²/4} z^μ Σ_{s<n} (−1)^s (−μ)_{2s}/(s!(2z²)^s)` with derivative and
/// relative size of the first omitted term.
fn principal_part(mu: C64, z: C64, n: usize) -> (C64, C64, f64) {
    principal_part_log(mu, z, z.ln(), n)
}

fn principal_part_log(mu: C64, z: C64, lnz: C64, n: usize) -> (C64, C64, f64) {
    let u = 1.0 / (2.0 * z * z);
    let mut coef = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut dsum = C64::new(0.0, 0.0); // Σ s·a_s u^s
    let mut up = C64::new(1.0, 0.0);
    for s in 0..n {
        let t = coef * up;
        sum += t;
        dsum += t * (s as f64);
        let sf = (s + 1) as f64;
        coef *= -(-mu + 2.0 * sf - 2.0) * (-mu + 2.0 * sf - 1.0) / sf;
        up *= u;
    }
    let omitted = (coef * up).norm() / sum.norm().max(1e-300);
    let pref = (-z * z / 4.0 + mu * lnz).exp();
    let value = pref * sum;
    // d/dz Σ a_s u^s = −(2/z) Σ s a_s u^s
    let derivative = pref * ((-z / 2.0 + mu / z) * sum - 2.0 / z * dsum);
    (value, derivative, omitted)
}

/// `ξ_μ e^{2iπμ} e^{z²/4} z^{−μ−1} Σ_{s<n} (μ+1)_{2s}/(s!(2z²)^s)`.
fn extended_part(mu: C64, z: C64, n: usize) -> (C64, C64, f64) {
    extended_part_log(mu, z, z.ln(), n)
}

fn extended_part_log(mu: C64, z: C64, lnz: C64, n: usize) -> (C64, C64, f64) {
    let xi = xi(mu);
    if xi.norm() == 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
    }
    let u = 1.0 / (2.0 * z * z);
    let mut coef = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut dsum = C64::new(0.0, 0.0);
    let mut up = C64::new(1.0, 0.0);
    for s in 0..n {
        let t = coef * up;
        sum += t;
        dsum += t * (s as f64);
        let sf = (s + 1) as f64;
        coef *= (mu + 2.0 * sf - 1.0) * (mu + 2.0 * sf) / sf;
        up *= u;
    }
    let omitted = (coef * up).norm() / sum.norm().max(1e-300);
    let e = mu + 1.0;
    let pref = xi * (C64::new(0.0, 2.0 * PI) * mu).exp() * (z * z / 4.0 - e * lnz).exp();
    let value = pref * sum;
    let derivative = pref * ((z / 2.0 - e / z) * sum - 2.0 / z * dsum);
    (value, derivative, omitted)
}

/// `ξ_μ = −√(2π) e^{−iπμ} / Γ(−μ)`.
pub fn xi(mu: C64) -> C64 {
    -(2.0 * PI).sqrt() * (C64::new(0.0, -PI) * mu).exp() * rgamma(-mu)
}

/// `ξ_{ν−1} = √(2π) e^{−iπν} / Γ(1−ν)`.
pub fn xi_lowered(nu: C64) -> C64 {
    xi(nu - 1.0)
}

/// The asymptotic expansion alone, for `|z| >= z_switch` in the given sector.
pub fn pcf_asymptotic(nu: C64, z: C64, sector: Sector) -> Result<C64> {
    check_nu(nu)?;
    let cfg = PcfConfig::default();
    if z.norm() < cfg.z_switch * (1.0 - 1e-12) {
        return Err(Error::Pcf(format!("|z| = {} below z_switch", z.norm())));
    }
    let a = z.arg();
    let inside = match sector {
        Sector::Principal => a > -3.0 * FRAC_PI_4 && a < 3.0 * FRAC_PI_4,
        Sector::Extended => a > FRAC_PI_4 || a < -3.0 * FRAC_PI_4,
    };
    if !inside {
        return Err(Error::Pcf(format!("arg z = {a} outside the {sector:?} sector")));
    }
    let n = asymptotic_terms(nu, z.norm());
    Ok(match sector {
        Sector::Principal => principal_part(nu, z, n).0,
        Sector::Extended => {
            // powers of z taken with arg z in (π/4, 5π/4)
            let lnz = if a < 0.0 { C64::new(z.norm().ln(), a + 2.0 * PI) } else { z.ln() };
            let m = asymptotic_terms(-nu - 1.0, z.norm());
            principal_part_log(nu, z, lnz, n).0 + extended_part_log(nu, z, lnz, m).0
        }
    })
}

/// Leading forms of `D_ν(±σ(τ+b))` and `D_{ν−1}(±σ(τ+b))` for large `|τ|`.
#[derive(Debug, Clone, Copy)]
pub struct LimitForms {
    /// `arg(±σ(τ+b))`, either `−π/4` or `3π/4`.
    pub ray_arg: f64,
    /// `e^{iν arg}|στ|^ν e^{−σ²(τ+b)²/4}`.
    pub d_nu: C64,
    /// `None`: `D_{ν−1}` is `O(1/τ)` on this ray. `Some`: the growing form
    /// `e^{−iν arg} ξ_{ν−1} e^{2iπν} |στ|^{−ν} e^{σ²(τ+b)²/4}`.
    pub d_nu_lowered: Option<C64>,
    /// Heuristic `C/|τ|` relative remainder.
    pub remainder: f64,
}

/// Leading large-`τ` forms on the matching rays.
pub fn pcf_limit_forms(nu: C64, tau: f64, sigma: C64, b: f64, side: i32) -> Result<LimitForms> {
    check_nu(nu)?;
    if tau.abs() < 10.0 {
        return Err(Error::OutOfRange(format!("|tau| = {} < 10", tau.abs())));
    }
    if side != 1 && side != -1 {
        return Err(Error::OutOfRange(format!("side must be ±1, got {side}")));
    }
    let t = sigma * (tau + b) * side as f64;
    let ray = Ray::of(t).ok_or_else(|| Error::Pcf(format!("±σ(τ+b) = {t} is off the matching rays")))?;
    let arg = ray.angle();
    let st = (sigma * tau).norm();
    let s2 = sigma * sigma * (tau + b) * (tau + b);
    let i = C64::new(0.0, 1.0);
    let d_nu = (i * nu * arg).exp() * (nu * st.ln()).exp() * (-s2 / 4.0).exp();
    let d_low = match ray {
        Ray::Lower => None,
        Ray::Upper => Some(
            (-i * nu * arg).exp()
                * xi_lowered(nu)
                * (2.0 * PI * i * nu).exp()
                * (-nu * st.ln()).exp()
                * (s2 / 4.0).exp(),
        ),
    };
    let c = 1.0 + nu.norm() + nu.norm_sqr() + xi(nu).norm() * (PI * nu.norm()).exp();
    Ok(LimitForms {
        ray_arg: arg,
        d_nu,
        d_nu_lowered: d_low,
        remainder: c / tau.abs(),
    })
}

/// Relative residual of `D_ν' + (z/2)D_ν − νD_{ν−1} = 0`.
pub fn recurrence_residual(nu: C64, z: C64) -> Result<f64> {
    let d = pcf_d(nu, z)?;
    let dl = pcf_d_lowered(nu, z)?;
    let r = d.derivative + z / 2.0 * d.value - nu * dl.value;
    let scale = d.derivative.norm() + (z / 2.0 * d.value).norm() + (nu * dl.value).norm();
    Ok(r.norm() / scale.max(1e-300))
}

/// Wronskian `W{D_ν(z), D_ν(−z)} = −D_ν(z)D_ν'(−z) − D_ν'(z)D_ν(−z)` and the
/// magnitude scale of its two products.
pub fn wronskian(nu: C64, z: C64) -> Result<(C64, f64)> {
    let a = pcf_d(nu, z)?;
    let b = pcf_d(nu, -z)?;
    let p1 = a.value * b.derivative;
    let p2 = a.derivative * b.value;
    Ok((-p1 - p2, p1.norm() + p2.norm()))
}
