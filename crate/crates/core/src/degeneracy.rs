//! The crossing point and the scalar parameters that control the transition.
//!
//! Near the crossing `x₀` the perturbed pencil reduces, in the slow variable
//! `τ = (x − x₀)/√ħ`, to a 2×2 problem whose eigenvalues are
//! `β₀ + √ħ(β̂_av(τ) ± √(Q²(τ+b)² + p²w))`. All quantities stored in
//! [`DegeneracyData`] are independent of `ħ`; the degeneracy points `κ±` are
//! kept in `τ` units and converted with [`DegeneracyData::kappa_x`].

use crate::pencil::{EigenBranch, PencilProblem};
use crate::{c, CMat, CVec, Error, Result, C64};
use std::f64::consts::{FRAC_PI_4, PI};

/// Transition scenario fixed by `w = sgn(N₁N₂)` and the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `w = +1`: complex conjugate degeneracy points.
    AvoidedCrossing,
    /// `w = −1`: two real turning points.
    RealTurningPoints,
    /// `p = 0`: the modes do not interact.
    Trivial,
}

impl Scenario {
    pub fn describe(&self) -> &'static str {
        match self {
            Scenario::AvoidedCrossing => "avoided crossing",
            Scenario::RealTurningPoints => "two real turning points",
            Scenario::Trivial => "trivial transition",
        }
    }
}

/// Scalar parameters of a simple crossing.
#[derive(Debug, Clone)]
pub struct DegeneracyData {
    pub x0: f64,
    /// Half the difference of the branch slopes, `> 0`.
    pub q: f64,
    /// Shift of the perturbed degeneracy point, in `τ` units.
    pub b: f64,
    /// Separation parameter `p = |B₁₂|/√|N₁N₂| ≥ 0`.
    pub p: f64,
    /// `ν = i p² w/(2Q)`.
    pub nu: C64,
    /// `√ν = e^{iπw/4}√|ν|`.
    pub sqrt_nu: C64,
    /// `σ = e^{−iπ/4}√(2Q)`.
    pub sigma: C64,
    pub theta_a: f64,
    /// `sgn(N₁N₂)`.
    pub w: i32,
    /// `β₁(x₀) = β₂(x₀)`.
    pub beta0: f64,
    /// `β̂_av(τ) = c0 + c1·τ`.
    pub beta_av_c0: f64,
    pub beta_av_c1: f64,
    /// `κ±` in `τ` units.
    pub kappa_plus: C64,
    pub kappa_minus: C64,
    /// Matrix elements at `x₀` in the branch gauge.
    pub b11: f64,
    pub b22: f64,
    pub b12: C64,
    pub n1: f64,
    pub n2: f64,
    pub kp11: f64,
    pub kp22: f64,
    /// `φ_j(x₀)` in the branch gauge.
    pub phi1: CVec,
    pub phi2: CVec,
}

impl DegeneracyData {
    /// Assembles the derived fields from the primary ones.
    #[allow(clippy::too_many_arguments)]
    pub fn from_elements(
        x0: f64,
        beta0: f64,
        n: [f64; 2],
        kp: [f64; 2],
        b_diag: [f64; 2],
        b12: C64,
        phi: [CVec; 2],
    ) -> Result<Self> {
        let [n1, n2] = n;
        let q = 0.5 * (kp[1] / n2 - kp[0] / n1);
        if !(q > 0.0) {
            return Err(Error::Degeneracy(format!(
                "Q = {q:.6e} is not positive under the branch numbering"
            )));
        }
        let w: i32 = if n1 * n2 > 0.0 { 1 } else { -1 };
        let b = (b_diag[1] / n2 - b_diag[0] / n1) / (2.0 * q);
        let p = b12.norm() / (n1 * n2).abs().sqrt();
        let nu = c(0.0, p * p * w as f64 / (2.0 * q));
        let sqrt_nu = C64::from_polar(nu.norm().sqrt(), FRAC_PI_4 * w as f64);
        let sigma = C64::from_polar((2.0 * q).sqrt(), -FRAC_PI_4);
        let theta_a = if p == 0.0 {
            0.0
        } else {
            wrap_angle((b12 / n1).arg() + FRAC_PI_4 * (1 - w) as f64)
        };
        let (kappa_plus, kappa_minus) = if w == 1 {
            (c(-b, p / q), c(-b, -p / q))
        } else {
            (c(-b + p / q, 0.0), c(-b - p / q, 0.0))
        };
        let [phi1, phi2] = phi;
        Ok(DegeneracyData {
            x0,
            q,
            b,
            p,
            nu,
            sqrt_nu,
            sigma,
            theta_a,
            w,
            beta0,
            beta_av_c0: 0.5 * (b_diag[0] / n1 + b_diag[1] / n2),
            beta_av_c1: 0.5 * (kp[0] / n1 + kp[1] / n2),
            kappa_plus,
            kappa_minus,
            b11: b_diag[0],
            b22: b_diag[1],
            b12,
            n1,
            n2,
            kp11: kp[0],
            kp22: kp[1],
            phi1,
            phi2,
        })
    }

    pub fn scenario(&self) -> Scenario {
        if self.p == 0.0 {
            Scenario::Trivial
        } else if self.w == 1 {
            Scenario::AvoidedCrossing
        } else {
            Scenario::RealTurningPoints
        }
    }

    pub fn b21(&self) -> C64 {
        self.b12.conj()
    }

    /// `β̂_av(τ)`.
    pub fn beta_av(&self, tau: f64) -> f64 {
        self.beta_av_c0 + self.beta_av_c1 * tau
    }

    /// `∫_{−b}^{τ} β̂_av(τ′) dτ′`.
    pub fn beta_av_integral(&self, tau: f64) -> f64 {
        let prim = |t: f64| self.beta_av_c0 * t + 0.5 * self.beta_av_c1 * t * t;
        prim(tau) - prim(-self.b)
    }

    /// `κ±` in `x` units for the given `ħ`.
    pub fn kappa_x(&self, hbar: f64) -> (C64, C64) {
        let s = hbar.sqrt();
        (self.kappa_plus * s + self.x0, self.kappa_minus * s + self.x0)
    }

    /// `τ±`, the real parts of `κ±`: `side = +1` gives `τ₊`.
    pub fn tau_pm(&self, side: i32) -> f64 {
        if side >= 0 {
            self.kappa_plus.re
        } else {
            self.kappa_minus.re
        }
    }

    /// The invariants `Re ν = 0`, `ν = ip²w/(2Q)`, `√ν² = ν`, `σ² = −2iQ`.
    pub fn invariant_residual(&self) -> f64 {
        let nu = c(0.0, self.p * self.p * self.w as f64 / (2.0 * self.q));
        let s = self.nu.norm().max(1e-300);
        let r1 = self.nu.re.abs() / s;
        let r2 = (self.nu - nu).norm() / s;
        let r3 = if self.nu.norm() == 0.0 { 0.0 } else { (self.sqrt_nu * self.sqrt_nu - self.nu).norm() / s };
        let r4 = (self.sigma * self.sigma - c(0.0, -2.0 * self.q)).norm() / (2.0 * self.q);
        r1.max(r2).max(r3).max(r4)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Root of a scalar function with exactly one sign change in `bracket`.
///
/// The sign pattern is checked on `samples` equispaced points, the root is
/// bisected to `1e−12` of the bracket width and polished by one Newton step
/// with `slope` when it is supplied.
pub fn locate_sign_change<F, G>(f: F, slope: Option<G>, bracket: (f64, f64), samples: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    G: Fn(f64) -> Result<f64>,
{
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Degeneracy(format!("empty bracket [{lo}, {hi}]")));
    }
    let n = samples.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let mut changes = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            changes.push((xs[i], xs[i]));
        } else if vals[i] * vals[i + 1] < 0.0 {
            changes.push((xs[i], xs[i + 1]));
        }
    }
    if vals[n] == 0.0 {
        changes.push((xs[n], xs[n]));
    }
    changes.dedup_by(|a, b| a.0 == b.1 || a.0 == b.0);
    match changes.len() {
        0 => return Err(Error::Degeneracy(format!("no sign change of the branch difference on [{lo}, {hi}]"))),
        1 => {}
        k => {
            return Err(Error::Degeneracy(format!(
                "{k} sign changes of the branch difference on [{lo}, {hi}]; a single simple crossing is required"
            )))
        }
    }
    let (mut a, mut b) = changes[0];
    if a != b {
        let mut fa = f(a)?;
        let tol = 1e-12 * (hi - lo);
        while b - a > tol {
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
    }
    let mut x = 0.5 * (a + b);
    if let Some(g) = slope {
        let d = g(x)?;
        if d.abs() < 1e-8 {
            return Err(Error::Degeneracy(format!(
                "slope of the branch difference is {d:.3e} at x = {x}; the crossing is not simple"
            )));
        }
        let step = f(x)? / d;
        if step.abs() <= (hi - lo) * 1e-6 {
            x -= step;
        }
    }
    Ok(x)
}

/// The crossing point of two tracked branches inside `bracket`.
pub fn locate_degeneracy(branches: &[EigenBranch; 2], bracket: (f64, f64)) -> Result<f64> {
    let problem = branches[0].problem();
    let (dlo, dhi) = problem.domain();
    let bracket = (bracket.0.max(dlo), bracket.1.min(dhi));
    let diff = |x: f64| -> Result<f64> { Ok(branches[1].beta(x)? - branches[0].beta(x)?) };
    let slope = |x: f64| -> Result<f64> {
        let kp = problem.k_prime(x);
        let mut s = [0.0; 2];
        for (j, br) in branches.iter().enumerate() {
            let p = br.eval(x)?;
            s[j] = p.phi.dotc(&(&kp * &p.phi)).re / p.norm;
        }
        Ok(s[1] - s[0])
    };
    let n = branches[0]
        .samples()
        .iter()
        .filter(|s| s.x >= bracket.0 && s.x <= bracket.1)
        .count()
        .max(64);
    let x0 = locate_sign_change(diff, Some(slope), bracket, n)?;
    if slope(x0)? <= 0.0 {
        return Err(Error::Degeneracy(format!(
            "β₂ − β₁ decreases through x = {x0}; the branch numbering is inconsistent"
        )));
    }
    let scale = 1.0 + branches[0].beta(x0)?.abs();
    let gap = diff(x0)?.abs();
    if gap > 1e-10 * scale {
        return Err(Error::Degeneracy(format!("branch gap {gap:.3e} at the located crossing x = {x0}")));
    }
    Ok(x0)
}

/// All parameters of the crossing at `x0`.
///
/// `fd_step` is unused when the problem supplies `K′` analytically; otherwise
/// it overrides the default finite-difference step of `K′`.
pub fn extract_parameters(
    branches: &[EigenBranch; 2],
    problem: &PencilProblem,
    x0: f64,
    fd_step: Option<f64>,
) -> Result<DegeneracyData> {
    let p1 = branches[0].eval(x0)?;
    let p2 = branches[1].eval(x0)?;
    let kp = match fd_step {
        Some(h) if !problem.has_analytic_derivative() => {
            let k = |s: f64| problem.k(x0 + s);
            (k(-2.0 * h) - k(2.0 * h) + (k(h) - k(-h)) * c(8.0, 0.0)) / c(12.0 * h, 0.0)
        }
        _ => problem.k_prime(x0),
    };
    let b = problem.b(x0);
    let el = |u: &CVec, m: &CMat, v: &CVec| u.dotc(&(m * v));
    let b11 = el(&p1.phi, &b, &p1.phi).re;
    let b22 = el(&p2.phi, &b, &p2.phi).re;
    let b12 = el(&p1.phi, &b, &p2.phi);
    let kp11 = el(&p1.phi, &kp, &p1.phi).re;
    let kp22 = el(&p2.phi, &kp, &p2.phi).re;
    let beta0 = 0.5 * (p1.beta + p2.beta);
    DegeneracyData::from_elements(
        x0,
        beta0,
        [p1.norm, p2.norm],
        [kp11, kp22],
        [b11, b22],
        b12,
        [p1.phi, p2.phi],
    )
}

/// `β̂_j^{(1)}(τ) = β̂_av(τ) + (−1)^j √(Q²(τ+b)² + p²w)` with the principal root.
pub fn perturbed_eigvals_near(data: &DegeneracyData, tau: f64) -> [C64; 2] {
    let s = tau + data.b;
    let root = c(data.q * data.q * s * s + data.p * data.p * data.w as f64, 0.0).sqrt();
    let av = c(data.beta_av(tau), 0.0);
    [av - root, av + root]
}

/// Coefficients `α_jk` of the perturbed eigenvectors
/// `φ̂_j = α_j1 φ₁(x₀) + α_j2 φ₂(x₀)`, each row scaled to unit Euclidean length.
///
/// The primary form is `(B₁₂/N₁, β̂_j − β̂_av + Q(τ+b))`; where it degenerates
/// the row is taken from the second equation, `(β̂_j − β̂_av − Q(τ+b), B₂₁/N₂)`.
pub fn perturbed_eigvecs_near(data: &DegeneracyData, tau: f64) -> [[C64; 2]; 2] {
    let betas = perturbed_eigvals_near(data, tau);
    let s = data.q * (tau + data.b);
    let mut rows = [[c(0.0, 0.0); 2]; 2];
    for j in 0..2 {
        let lam = betas[j] - data.beta_av(tau);
        let a = [data.b12 / data.n1, lam + s];
        let alt = [lam - s, data.b21() / data.n2];
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        let nb = (alt[0].norm_sqr() + alt[1].norm_sqr()).sqrt();
        assert!(na.max(nb) > 0.0, "both eigenvector representations vanish");
        rows[j] = if na >= nb { [a[0] / na, a[1] / na] } else { [alt[0] / nb, alt[1] / nb] };
    }
    rows
}

/// Residual of the reduced 2×2 eigenproblem for the rows of [`perturbed_eigvecs_near`].
pub fn near_residual(data: &DegeneracyData, tau: f64) -> f64 {
    let betas = perturbed_eigvals_near(data, tau);
    let rows = perturbed_eigvecs_near(data, tau);
    let s = data.q * (tau + data.b);
    let m = [[c(-s, 0.0), data.b12 / data.n1], [data.b21() / data.n2, c(s, 0.0)]];
    let scale = data.q * (tau + data.b).abs() + data.p + 1e-300;
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let lam = betas[j] - data.beta_av(tau);
        let a = rows[j];
        for r in 0..2 {
            let v = m[r][0] * a[0] + m[r][1] * a[1] - lam * a[r];
            worst = worst.max(v.norm() / scale);
        }
    }
    worst
}

/// Terms of the perturbed eigenproblem of `K + √ħB` away from the crossing.
#[derive(Debug, Clone)]
pub struct AwayTerms {
    pub x: f64,
    pub beta: [f64; 2],
    pub norm: [f64; 2],
    /// `B_jj` (real).
    pub b_diag: [f64; 2],
    pub b12: C64,
    /// `(φ_j, Bφ_{j⊥}^{(1)})/N_j`.
    pub perp_shift: [f64; 2],
    /// `φ_{j⊥}^{(1)}`, Γ-orthogonal to `φ₁` and `φ₂`.
    pub perp: [CVec; 2],
    /// Coefficient of the partner mode in the first-order eigenvector:
    /// `c_12 = B₂₁/((β₁−β₂)N₂)` for `j = 1`, `c_21 = B₁₂/((β₂−β₁)N₁)` for `j = 2`.
    pub partner: [C64; 2],
}

impl AwayTerms {
    /// `β̌_j = β_j + √ħ B_jj/N_j + ħ[(−1)^j B₂₁B₁₂/((β₂−β₁)N₁N₂) + (φ_j, Bφ_{j⊥})/N_j]`.
    pub fn beta_check(&self, sqrt_hbar: f64) -> [f64; 2] {
        let hbar = sqrt_hbar * sqrt_hbar;
        let mix = self.b12.norm_sqr() / ((self.beta[1] - self.beta[0]) * self.norm[0] * self.norm[1]);
        [
            self.beta[0] + sqrt_hbar * self.b_diag[0] / self.norm[0] + hbar * (-mix + self.perp_shift[0]),
            self.beta[1] + sqrt_hbar * self.b_diag[1] / self.norm[1] + hbar * (mix + self.perp_shift[1]),
        ]
    }
}

/// `φ_{j⊥}` from `(K − β_jΓ)φ⊥ = −(Bφ_j − Σ_k (B_kj/N_k)Γφ_k)` with
/// `(φ_k, Γφ⊥) = 0`, `k = 1, 2`, solved in the least-squares sense.
fn solve_perp(problem: &PencilProblem, k: &CMat, b: &CMat, beta_j: f64, phis: [&CVec; 2], norms: [f64; 2], j: usize) -> Result<CVec> {
    let n = problem.dim();
    if n == 2 {
        return Ok(CVec::zeros(2));
    }
    let g = problem.gamma();
    let bphi = b * phis[j];
    let mut rhs = -bphi.clone();
    for kk in 0..2 {
        let bkj = phis[kk].dotc(&bphi);
        rhs += (g * phis[kk]) * (bkj / norms[kk]);
    }
    let mut a = CMat::zeros(n + 2, n);
    let op = k - g * c(beta_j, 0.0);
    a.view_mut((0, 0), (n, n)).copy_from(&op);
    for kk in 0..2 {
        let row = (g * phis[kk]).adjoint();
        a.view_mut((n + kk, 0), (1, n)).copy_from(&row);
    }
    let mut r = CVec::zeros(n + 2);
    r.rows_mut(0, n).copy_from(&rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(&r, 1e-12 * smax.max(1e-300))
        .map_err(|e| Error::EigenSolver {
            x: f64::NAN,
            reason: format!("orthogonal-complement solve failed: {e}"),
        })
}

/// Matrix elements and first-order corrections of the tracked pair at `x`.
pub fn away_terms(branches: &[EigenBranch; 2], problem: &PencilProblem, x: f64) -> Result<AwayTerms> {
    let p = [branches[0].eval(x)?, branches[1].eval(x)?];
    let b = problem.b(x);
    let k = problem.k(x);
    let norms = [p[0].norm, p[1].norm];
    let phis = [&p[0].phi, &p[1].phi];
    let b_diag = [phis[0].dotc(&(&b * phis[0])).re, phis[1].dotc(&(&b * phis[1])).re];
    let b12 = phis[0].dotc(&(&b * phis[1]));
    let mut perp = [CVec::zeros(problem.dim()), CVec::zeros(problem.dim())];
    let mut shift = [0.0; 2];
    for j in 0..2 {
        perp[j] = solve_perp(problem, &k, &b, p[j].beta, phis, norms, j)?;
        shift[j] = (phis[j].dotc(&(&b * &perp[j])) / norms[j]).re;
    }
    let d = p[1].beta - p[0].beta;
    Ok(AwayTerms {
        x,
        beta: [p[0].beta, p[1].beta],
        norm: norms,
        b_diag,
        b12,
        perp_shift: shift,
        perp,
        partner: [b12.conj() / (-d * norms[1]), b12 / (d * norms[0])],
    })
}

/// Perturbed eigenvalues `β̌_j` and first-order eigenvector corrections at `x`.
#[derive(Debug, Clone)]
pub struct PerturbedAway {
    pub beta: [f64; 2],
    pub terms: AwayTerms,
}

/// `β̌_j` at `x` for `√ħ = sqrt_hbar`; errors inside `2√ħ` of `x0`.
pub fn perturbed_away(
    branches: &[EigenBranch; 2],
    problem: &PencilProblem,
    x0: f64,
    x: f64,
    sqrt_hbar: f64,
) -> Result<PerturbedAway> {
    let d = (x - x0).abs();
    if d < 2.0 * sqrt_hbar {
        return Err(Error::OutOfRange(format!(
            "x = {x} is within 2√ħ = {:.3e} of the crossing; the outer series is not asymptotic there",
            2.0 * sqrt_hbar
        )));
    }
    if d < 5.0 * sqrt_hbar {
        log::warn!("x = {x} is within 5√ħ of the crossing; outer corrections are unreliable");
    }
    let terms = away_terms(branches, problem, x)?;
    Ok(PerturbedAway {
        beta: terms.beta_check(sqrt_hbar),
        terms,
    })
}
