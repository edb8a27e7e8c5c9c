//! Adiabatic (outer) modes away from the crossing.
//!
//! The canonical mode is
//! `Ψ_j± = e^{iϑ_j} φ_j(x)/|N_j(x)|^{1/2} exp((i/ħ)∫_{Re κ±}^{x}(β̂_j^{pr} − ħ Im S_jj)dx′)`
//! with `β̂_j^{pr}` the outer perturbed eigenvalue for `|x′ − x₀| > x*` and
//! the inner root form `β₀ + √ħ(β̂_av + (−1)^j sgn(τ+b)√(Q²(τ+b)² + p²w))`
//! inside. The inner part of the phase is integrated in closed form; the
//! outer part and the Berry term by adaptive Gauss–Kronrod quadrature with
//! the seams `x₀ ± x*` as panel boundaries.

use crate::degeneracy::{away_terms, DegeneracyData};
use crate::pencil::{EigenBranch, PencilProblem};
use crate::quad::{integrate, integrate_with_breaks, QuadOptions};
use crate::{c, CVec, Error, Result, C64};

/// Side of the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// A mode: branch `j ∈ {1, 2}`, side, and for general modes the reference
/// point `x_j^±` of the phase integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub j: usize,
    pub side: Side,
    /// `None` for the canonical mode.
    pub x_ref: Option<f64>,
}

impl ModeSpec {
    pub fn canonical(j: usize, side: Side) -> Self {
        ModeSpec { j, side, x_ref: None }
    }

    pub fn general(j: usize, side: Side, x_ref: f64) -> Self {
        ModeSpec { j, side, x_ref: Some(x_ref) }
    }
}

/// Numerical settings.
#[derive(Debug, Clone, Copy)]
pub struct AdiabaticConfig {
    /// Matching exponent `g ∈ (0, 1/4)`; `x* = x_star_scale·ħ^{1/2−g}`.
    pub g: f64,
    pub x_star_scale: f64,
    /// Step for `∂_xφ_j`; `None` uses `1e−5` of the domain width.
    pub fd_step: Option<f64>,
    /// Absolute tolerance on `(1/ħ)∫β̂^{pr}dx′` (scaled by `ħ` internally).
    pub phase_tol: f64,
    /// Absolute tolerance on `∫Im S_jj dx′`.
    pub berry_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdiabaticConfig {
    fn default() -> Self {
        AdiabaticConfig {
            g: 0.2,
            x_star_scale: 1.0,
            fd_step: None,
            phase_tol: 1e-10,
            berry_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

/// Mode constructor for one crossing at a fixed `ħ`.
#[derive(Debug, Clone)]
pub struct AdiabaticModes {
    pub problem: PencilProblem,
    pub branches: [EigenBranch; 2],
    pub data: DegeneracyData,
    pub hbar: f64,
    pub config: AdiabaticConfig,
}

fn check_j(j: usize) -> Result<usize> {
    if j == 1 || j == 2 {
        Ok(j - 1)
    } else {
        Err(Error::OutOfRange(format!("mode index must be 1 or 2, got {j}")))
    }
}

/// `(−1)^j`.
fn parity(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl AdiabaticModes {
    pub fn new(
        problem: PencilProblem,
        branches: [EigenBranch; 2],
        data: DegeneracyData,
        hbar: f64,
        config: AdiabaticConfig,
    ) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::OutOfRange(format!("hbar must be positive, got {hbar}")));
        }
        if !(config.g > 0.0 && config.g < 0.25) {
            return Err(Error::OutOfRange(format!("g = {} is outside (0, 1/4)", config.g)));
        }
        if !(config.x_star_scale > 0.0) {
            return Err(Error::OutOfRange("x_star_scale must be positive".into()));
        }
        Ok(AdiabaticModes {
            problem,
            branches,
            data,
            hbar,
            config,
        })
    }

    pub fn sqrt_hbar(&self) -> f64 {
        self.hbar.sqrt()
    }

    /// The seam radius `x*`.
    pub fn x_star(&self) -> f64 {
        self.config.x_star_scale * self.hbar.powf(0.5 - self.config.g)
    }

    /// `Re κ±` in `x` units.
    pub fn kappa_re(&self, side: Side) -> f64 {
        let tau = self.data.tau_pm(side.sign() as i32);
        self.data.x0 + self.sqrt_hbar() * tau
    }

    fn fd_step(&self, j0: usize) -> f64 {
        self.config.fd_step.unwrap_or_else(|| self.branches[j0].default_fd_step())
    }

    fn tau(&self, x: f64) -> f64 {
        (x - self.data.x0) / self.sqrt_hbar()
    }

    /// Inner root form of `β̂_j^{pr}` at `x`.
    pub fn beta_inner(&self, j: usize, x: f64) -> Result<C64> {
        check_j(j)?;
        let d = &self.data;
        let tau = self.tau(x);
        let u = tau + d.b;
        let root = c(d.q * d.q * u * u + d.p * d.p * d.w as f64, 0.0).sqrt();
        let sgn = if u < 0.0 { -1.0 } else { 1.0 };
        Ok(d.beta0 + self.sqrt_hbar() * (d.beta_av(tau) + parity(j) * sgn * root))
    }

    /// Outer form of `β̂_j^{pr}` at `x`.
    pub fn beta_outer(&self, j: usize, x: f64) -> Result<f64> {
        let j0 = check_j(j)?;
        let t = away_terms(&self.branches, &self.problem, x)?;
        Ok(t.beta_check(self.sqrt_hbar())[j0])
    }

    /// `β̂_j^{pr}(x, ħ)`: inner form for `|x − x₀| < x*`, outer otherwise.
    pub fn beta_pr(&self, j: usize, x: f64) -> Result<C64> {
        if (x - self.data.x0).abs() < self.x_star() {
            self.beta_inner(j, x)
        } else {
            Ok(c(self.beta_outer(j, x)?, 0.0))
        }
    }

    /// Jump of `β̂_j^{pr}` across the seam on the given side.
    pub fn seam_jump(&self, j: usize, side: Side) -> Result<f64> {
        let xs = self.data.x0 + side.sign() * self.x_star();
        Ok((self.beta_inner(j, xs)? - self.beta_outer(j, xs)?).norm())
    }

    /// `Im S_jj(x) = Im (φ_j, Γ∂_xφ_j)/N_j`, with a check that the gauge is
    /// continuous across the difference stencil.
    pub fn berry_phase_integrand(&self, j: usize, x: f64) -> Result<f64> {
        let j0 = check_j(j)?;
        let h = self.fd_step(j0);
        let br = &self.branches[j0];
        let lo = br.phi(x - h)?;
        let hi = br.phi(x + h)?;
        if lo.dotc(&hi).re <= 0.0 {
            return Err(Error::NotSmooth(format!(
                "gauge of branch {j} is discontinuous near x = {x}"
            )));
        }
        br.berry_integrand(x, h)
    }

    /// `ϑ_j = (−1)^{j+1}θ_a/2 + (1/√ħ)∫_{−b}^{τ±}(β₀ + √ħβ̂_av)dτ′`.
    pub fn vartheta(&self, j: usize, side: Side) -> Result<f64> {
        check_j(j)?;
        let d = &self.data;
        let tp = d.tau_pm(side.sign() as i32);
        let integral = d.beta0 * (tp + d.b) / self.sqrt_hbar() + d.beta_av_integral(tp);
        Ok(-parity(j) * d.theta_a / 2.0 + integral)
    }

    /// `∫_{v_t}^{v} √(Q²v′² + p²w) dv′` for `v ≥ v_t`, `v_t` the real turning
    /// point (`0` when `w = +1`).
    fn root_primitive(&self, v: f64) -> f64 {
        let d = &self.data;
        let cc = d.p * d.p * d.w as f64;
        let h = |v: f64| {
            if cc == 0.0 {
                0.5 * d.q * v * v
            } else {
                let s = (d.q * d.q * v * v + cc).max(0.0).sqrt();
                0.5 * v * s + cc / (2.0 * d.q) * (d.q * v + s).ln()
            }
        };
        let vt = if d.w < 0 { d.p / d.q } else { 0.0 };
        h(v.max(vt)) - h(vt)
    }

    /// `(1/ħ)∫_{xa}^{xb} β̂_j^{pr} dx′` over a piece inside the seam.
    fn inner_phase(&self, j: usize, side: Side, xa: f64, xb: f64) -> Result<f64> {
        let d = &self.data;
        let (ta, tb) = (self.tau(xa), self.tau(xb));
        let vt = if d.w < 0 { d.p / d.q } else { 0.0 };
        let slack = 1e-9 * (1.0 + vt);
        for t in [ta, tb] {
            let u = (t + d.b) * side.sign();
            if d.p > 0.0 && u < vt - slack {
                return Err(Error::OutOfRange(format!(
                    "phase path enters tau + b = {:.6} beyond the {} turning point",
                    t + d.b,
                    side.as_str()
                )));
            }
        }
        let smooth = d.beta0 * (tb - ta) / self.sqrt_hbar() + d.beta_av_integral(tb) - d.beta_av_integral(ta);
        let root = self.root_primitive((tb + d.b).abs()) - self.root_primitive((ta + d.b).abs());
        Ok(smooth + parity(j) * root)
    }

    /// `(1/ħ)∫_{xa}^{xb}(β̂_j^{pr} − ħ Im S_jj)dx′` along a path on one side.
    pub fn phase_integral(&self, j: usize, side: Side, xa: f64, xb: f64) -> Result<C64> {
        check_j(j)?;
        if xa == xb {
            return Ok(c(0.0, 0.0));
        }
        let x0 = self.data.x0;
        let xs = self.x_star();
        let seams = [x0 - xs, x0 + xs];
        let (lo, hi) = (xa.min(xb), xa.max(xb));
        let mut pts = vec![lo];
        pts.extend(seams.iter().copied().filter(|&s| s > lo && s < hi));
        pts.push(hi);
        let opts = QuadOptions {
            abs_tol: self.config.phase_tol * self.hbar,
            rel_tol: 1e-13,
            max_intervals: self.config.max_intervals,
        };
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if (mid - x0).abs() < xs {
                total += self.inner_phase(j, side, w[0], w[1])?;
            } else {
                let r = integrate(|x| Ok(c(self.beta_outer(j, x)?, 0.0)), w[0], w[1], &opts)?;
                total += r.value.re / self.hbar;
            }
        }
        let bopts = QuadOptions {
            abs_tol: self.config.berry_tol,
            rel_tol: 1e-12,
            max_intervals: self.config.max_intervals,
        };
        let berry = integrate_with_breaks(|x| Ok(c(self.berry_phase_integrand(j, x)?, 0.0)), lo, hi, &seams, &bopts)?;
        let sign = if xb >= xa { 1.0 } else { -1.0 };
        Ok(c(sign * (total - berry.value.re), 0.0))
    }

    fn check_point(&self, spec: &ModeSpec, x: f64) -> Result<()> {
        let d = &self.data;
        let dist = (x - d.x0) * spec.side.sign();
        if dist < 2.0 * self.sqrt_hbar() {
            return Err(Error::OutOfRange(format!(
                "x = {x} is not on the {} side at least 2·sqrt(hbar) = {:.3e} from x0 = {}",
                spec.side.as_str(),
                2.0 * self.sqrt_hbar(),
                d.x0
            )));
        }
        let kr = self.kappa_re(spec.side);
        if d.p > 0.0 && (x - kr) * spec.side.sign() <= 0.0 {
            return Err(Error::OutOfRange(format!("x = {x} is inside the turning point Re kappa = {kr}")));
        }
        Ok(())
    }

    /// `ϑ_j + (1/ħ)∫_{Re κ±}^{x}(β̂_j^{pr} − ħ Im S_jj)dx′`, the phase of the
    /// canonical mode relative to `φ_j(x)/|N_j(x)|^{1/2}`.
    pub fn canonical_phase(&self, j: usize, side: Side, x: f64) -> Result<f64> {
        let spec = ModeSpec::canonical(j, side);
        if self.data.p > 0.0 {
            self.check_point(&spec, x)?;
        }
        Ok(self.vartheta(j, side)? + self.phase_integral(j, side, self.kappa_re(side), x)?.re)
    }

    /// The canonical mode `Ψ_j±` at `x`.
    pub fn canonical_mode_value(&self, j: usize, side: Side, x: f64) -> Result<CVec> {
        let phase = self.canonical_phase(j, side, x)?;
        let p = self.branches[check_j(j)?].eval(x)?;
        Ok(p.phi * (C64::from_polar(1.0, phase) / p.norm.abs().sqrt()))
    }

    /// The general mode `φ_j exp((i/ħ)∫_{x_ref}^{x}(β̂_j^{out} + iħS_jj)dx′)`,
    /// written as `|N_j(x_ref)|^{1/2} φ_j/|N_j|^{1/2} exp((i/ħ)∫(β̂ − ħ Im S))`.
    pub fn general_mode_value(&self, spec: &ModeSpec, x: f64) -> Result<CVec> {
        let xr = self.reference(spec)?;
        self.check_point(spec, x)?;
        let j0 = check_j(spec.j)?;
        let p = self.branches[j0].eval(x)?;
        let nr = self.branches[j0].norm(xr)?.abs();
        let phase = self.outer_phase(spec.j, xr, x)?;
        Ok(p.phi * (C64::from_polar((nr / p.norm.abs()).sqrt(), phase)))
    }

    fn reference(&self, spec: &ModeSpec) -> Result<f64> {
        let xr = spec
            .x_ref
            .ok_or_else(|| Error::OutOfRange("general mode needs a reference point".into()))?;
        self.check_point(spec, xr)?;
        if (xr - self.data.x0).abs() < self.x_star() {
            log::warn!("reference point {xr} lies inside the seam radius {:.3e}", self.x_star());
        }
        Ok(xr)
    }

    /// `(1/ħ)∫(β̂^{out} − ħ Im S)` with the outer form throughout.
    fn outer_phase(&self, j: usize, xa: f64, xb: f64) -> Result<f64> {
        let opts = QuadOptions {
            abs_tol: self.config.phase_tol * self.hbar,
            rel_tol: 1e-13,
            max_intervals: self.config.max_intervals,
        };
        let r = integrate(|x| Ok(c(self.beta_outer(j, x)?, 0.0)), xa, xb, &opts)?;
        let bopts = QuadOptions {
            abs_tol: self.config.berry_tol,
            rel_tol: 1e-12,
            max_intervals: self.config.max_intervals,
        };
        let b = integrate(|x| Ok(c(self.berry_phase_integrand(j, x)?, 0.0)), xa, xb, &bopts)?;
        Ok(r.value.re / self.hbar - b.value.re)
    }

    /// `n_j^± = |N_j(x_ref)|^{1/2} e^{−iϑ_j} exp((i/ħ)∫_{x_ref}^{Re κ±}(β̂^{pr} − ħ Im S))`.
    pub fn mode_norm_factor(&self, spec: &ModeSpec) -> Result<C64> {
        let xr = self.reference(spec)?;
        let j0 = check_j(spec.j)?;
        let nr = self.branches[j0].norm(xr)?.abs();
        let phase = -self.vartheta(spec.j, spec.side)?
            + self.phase_integral(spec.j, spec.side, xr, self.kappa_re(spec.side))?.re;
        Ok(C64::from_polar(nr.sqrt(), phase))
    }

    /// The flux `(Ψ, ΓΨ)` of a vector.
    pub fn flux(&self, psi: &CVec) -> f64 {
        psi.dotc(&(self.problem.gamma() * psi)).re
    }
}
