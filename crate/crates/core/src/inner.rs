//! The resonance solution near the crossing.
//!
//! In the slow variable `τ = (x − x₀)/√ħ` the leading inner state is
//! `ψ = (a₁φ₁(0) + a₂φ₂(0))·exp((i/√ħ)∫_{−b}^{τ}(β₀ + √ħβ̂_av)dτ′)` where
//! `a₂ = A D_ν(t) + B D_ν(−t)`, `a₁ = −i B₁₂/(σN₁)(A D_{ν−1}(t) − B D_{ν−1}(−t))`
//! and `t = σ(τ + b)`. The pair `(a₁, a₂)` solves
//! `−iȧ₁ = −Q(τ+b)a₁ + (B₁₂/N₁)a₂`, `−iȧ₂ = (B₂₁/N₂)a₁ + Q(τ+b)a₂`.

use crate::degeneracy::DegeneracyData;
use crate::pcf::{pcf_d, pcf_d_lowered, xi_lowered};
use crate::{c, CVec, Error, Result, C64};
use std::f64::consts::PI;

/// Default exponent `g′` of the inner validity bound `|τ| ≤ ħ^{−1/4+g′}`.
pub const DEFAULT_G_PRIME: f64 = 0.05;

/// The leading inner state with free constants `A`, `B`.
#[derive(Debug, Clone)]
pub struct InnerState {
    pub a: C64,
    pub b: C64,
    pub data: DegeneracyData,
    pub hbar: f64,
    pub g_prime: f64,
}

/// Coefficients of `φ₁(0)` and `φ₂(0)` in the large-`|τ|` leading forms.
#[derive(Debug, Clone, Copy)]
pub struct InnerAsymptote {
    pub side: i32,
    pub tau: f64,
    /// Coefficient of `φ₁(0)` (the growing-phase `ξ_{ν−1}` term).
    pub coef1: C64,
    /// Coefficient of `φ₂(0)`.
    pub coef2: C64,
    /// Heuristic `C/|τ|` bound on the omitted terms relative to `|A| + |B|`.
    pub remainder: f64,
}

impl InnerState {
    pub fn new(a: C64, b: C64, data: DegeneracyData, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::OutOfRange(format!("hbar must be positive, got {hbar}")));
        }
        Ok(InnerState {
            a,
            b,
            data,
            hbar,
            g_prime: DEFAULT_G_PRIME,
        })
    }

    /// `t = σ(τ + b)`.
    pub fn t(&self, tau: f64) -> C64 {
        self.data.sigma * (tau + self.data.b)
    }

    /// `−iB₁₂/(σN₁)`.
    fn a1_prefactor(&self) -> C64 {
        c(0.0, -1.0) * self.data.b12 / (self.data.sigma * self.data.n1)
    }

    /// Largest `|τ|` inside the inner validity region.
    pub fn validity_limit(&self) -> f64 {
        self.hbar.powf(-0.25 + self.g_prime)
    }

    /// `(a₁(τ), a₂(τ))`.
    pub fn coefficients(&self, tau: f64) -> Result<(C64, C64)> {
        let (a1, a2, _, _) = self.coefficients_with_derivative(tau)?;
        Ok((a1, a2))
    }

    /// `(a₁, a₂, ȧ₁, ȧ₂)` from the PCF values and derivatives.
    pub fn coefficients_with_derivative(&self, tau: f64) -> Result<(C64, C64, C64, C64)> {
        let nu = self.data.nu;
        let s = self.data.sigma;
        let t = self.t(tau);
        let dp = pcf_d(nu, t)?;
        let dm = pcf_d(nu, -t)?;
        let a2 = self.a * dp.value + self.b * dm.value;
        let da2 = s * (self.a * dp.derivative - self.b * dm.derivative);
        if self.data.b12.norm() == 0.0 {
            return Ok((c(0.0, 0.0), a2, c(0.0, 0.0), da2));
        }
        let lp = pcf_d_lowered(nu, t)?;
        let lm = pcf_d_lowered(nu, -t)?;
        let k = self.a1_prefactor();
        let a1 = k * (self.a * lp.value - self.b * lm.value);
        let da1 = k * s * (self.a * lp.derivative + self.b * lm.derivative);
        Ok((a1, a2, da1, da2))
    }

    /// Largest residual of the 2×2 system at `τ`, relative to the size of its terms.
    pub fn system_residual(&self, tau: f64) -> Result<f64> {
        let (a1, a2, d1, d2) = self.coefficients_with_derivative(tau)?;
        let d = &self.data;
        let qt = d.q * (tau + d.b);
        let c12 = d.b12 / d.n1;
        let c21 = d.b21() / d.n2;
        let i = c(0.0, 1.0);
        let r1 = -i * d1 + qt * a1 - c12 * a2;
        let r2 = -i * d2 - c21 * a1 - qt * a2;
        let s1 = d1.norm() + (qt * a1).norm() + (c12 * a2).norm();
        let s2 = d2.norm() + (c21 * a1).norm() + (qt * a2).norm();
        Ok((r1.norm() / s1.max(1e-300)).max(r2.norm() / s2.max(1e-300)))
    }

    /// `φ^{(0)}(τ) = a₁φ₁(0) + a₂φ₂(0)`.
    pub fn amplitude(&self, tau: f64) -> Result<CVec> {
        let (a1, a2) = self.coefficients(tau)?;
        Ok(&self.data.phi1 * a1 + &self.data.phi2 * a2)
    }

    /// `exp((i/√ħ)∫_{−b}^{τ}(β₀ + √ħβ̂_av)dτ′)`.
    pub fn phase_factor(&self, tau: f64) -> C64 {
        let d = &self.data;
        let sh = self.hbar.sqrt();
        let phase = d.beta0 * (tau + d.b) / sh + d.beta_av_integral(tau);
        C64::from_polar(1.0, phase)
    }

    /// The leading inner state `ψ(τ)`.
    pub fn value(&self, tau: f64) -> Result<CVec> {
        if tau.abs() > self.validity_limit() {
            log::warn!(
                "tau = {tau} is outside the inner validity region |tau| <= {:.3}",
                self.validity_limit()
            );
        }
        Ok(self.amplitude(tau)? * self.phase_factor(tau))
    }

    /// The flux `(ψ, Γψ) = N₁|a₁|² + N₂|a₂|²`.
    pub fn flux(&self, tau: f64) -> Result<f64> {
        let (a1, a2) = self.coefficients(tau)?;
        Ok(self.data.n1 * a1.norm_sqr() + self.data.n2 * a2.norm_sqr())
    }

    /// Leading forms of the `φ₁(0)`, `φ₂(0)` coefficients of `φ^{(0)}` for
    /// `τ → side·∞`.
    pub fn asymptote(&self, side: i32, tau: f64) -> Result<InnerAsymptote> {
        if side != 1 && side != -1 {
            return Err(Error::OutOfRange(format!("side must be ±1, got {side}")));
        }
        if tau.abs() < 10.0 || tau.signum() as i32 != side {
            return Err(Error::OutOfRange(format!("tau = {tau} is not on side {side} with |tau| >= 10")));
        }
        if (tau + self.data.b).signum() != tau.signum() {
            return Err(Error::OutOfRange(format!("tau + b = {} changes sign", tau + self.data.b)));
        }
        let d = &self.data;
        let nu = d.nu;
        let i = c(0.0, 1.0);
        let s = d.sigma;
        let st = (s * tau).norm();
        let grow = (s * s * (tau + d.b) * (tau + d.b) / 4.0).exp();
        let pow = (nu * st.ln()).exp();
        let e = |k: f64| (i * PI * nu * k / 4.0).exp();
        let k1 = i * xi_lowered(nu) * d.b12 / (s * d.n1);
        let (coef1, coef2) = if side < 0 {
            (-k1 * self.a * e(5.0) * grow / pow, (self.a * e(3.0) + self.b * e(-1.0)) * pow / grow)
        } else {
            (k1 * self.b * e(5.0) * grow / pow, (self.a * e(-1.0) + self.b * e(3.0)) * pow / grow)
        };
        let cst = 1.0 + nu.norm() + nu.norm_sqr() + d.b.abs() + k1.norm() * (PI * nu.norm()).exp();
        Ok(InnerAsymptote {
            side,
            tau,
            coef1,
            coef2,
            remainder: cst / tau.abs(),
        })
    }
}
