//! Direct integration of `(K + √ħB)Ψ = −iħΓΨ′` and empirical transition
//! matrices.
//!
//! A column of the empirical matrix comes from one run: the solution starts
//! as mode `j` left of the crossing and is projected onto both modes on the
//! right. The modes used for preparation and projection are the canonical
//! phase factors times the eigenvectors of the perturbed pencil
//! `K + √ħB − β̂Γ`; these are exactly Γ-orthogonal, so the projection
//! separates the two tracked modes from each other and from the rest of the
//! spectrum.

mod dop853;
mod tableau;

pub use dop853::{IntegratorStats, StepControl};

use crate::adiabatic::{AdiabaticModes, Side};
use crate::pencil::{solve_matrix_pencil, PencilProblem};
use crate::transition::{canonical_T, Convention, TransitionMatrix2};
use crate::{c, CVec, Error, Result, C64};
use rayon::prelude::*;
use std::io::Write;

/// Oracle settings.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Relative and absolute local error tolerance.
    pub tol: f64,
    /// Allowed relative flux drift; runs abort beyond `100·flux_tol`.
    pub flux_tol: f64,
    /// Step ceiling `ceiling_factor·ħ/ρ` with `ρ` the largest spectral
    /// radius of `Γ⁻¹(K + √ħB)` along the path.
    pub ceiling_factor: f64,
    pub max_steps: usize,
    /// Projection abscissa `X0`; `None` uses [`default_match_distance`].
    pub match_distance: Option<f64>,
    /// Keep the full traces in the result.
    pub keep_traces: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-12,
            flux_tol: 1e-8,
            ceiling_factor: 0.1,
            max_steps: 20_000_000,
            match_distance: None,
            keep_traces: false,
        }
    }
}

/// Samples of one integration.
#[derive(Debug, Clone)]
pub struct OracleTrace {
    pub hbar: f64,
    pub x: Vec<f64>,
    pub psi: Vec<CVec>,
    pub flux: Vec<f64>,
    pub stats: IntegratorStats,
}

impl OracleTrace {
    /// `max |flux(x) − flux(x_start)| / (1 + |flux(x_start)|)`.
    pub fn flux_drift(&self) -> f64 {
        let f0 = self.flux[0];
        self.flux.iter().map(|f| (f - f0).abs()).fold(0.0, f64::max) / (1.0 + f0.abs())
    }

    pub fn last(&self) -> &CVec {
        self.psi.last().expect("a trace has at least one sample")
    }

    /// CSV with columns `x, re_psi1, im_psi1, …, flux`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.psi.first().map_or(0, |p| p.len());
        let mut head = vec!["x".to_string()];
        for k in 1..=n {
            head.push(format!("re_psi{k}"));
            head.push(format!("im_psi{k}"));
        }
        head.push("flux".into());
        writeln!(w, "{}", head.join(","))?;
        for ((x, p), f) in self.x.iter().zip(&self.psi).zip(&self.flux) {
            let mut row = vec![format!("{x:.17e}")];
            for z in p.iter() {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            row.push(format!("{f:.17e}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn system_matrix(problem: &PencilProblem, hbar: f64, x: f64) -> crate::CMat {
    problem.gamma_inv() * problem.perturbed_k(x, hbar.sqrt())
}

/// Largest spectral radius of `Γ⁻¹(K + √ħB)` on 33 points of the path.
fn spectral_bound(problem: &PencilProblem, hbar: f64, a: f64, b: f64) -> f64 {
    (0..=32)
        .map(|k| {
            let x = a + (b - a) * k as f64 / 32.0;
            let m = system_matrix(problem, hbar, x);
            match m.clone().schur().eigenvalues() {
                Some(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
                None => m.norm(),
            }
        })
        .fold(0.0, f64::max)
}

/// Integrates `Ψ′ = (i/ħ)Γ⁻¹(K + √ħB)Ψ` from `x_from` to `x_to`, recording
/// every accepted step and aborting when the flux drifts beyond
/// `100·flux_tol`.
pub fn integrate(problem: &PencilProblem, hbar: f64, x_from: f64, x_to: f64, psi0: CVec, opts: &OracleOptions) -> Result<OracleTrace> {
    if psi0.len() != problem.dim() {
        return Err(Error::Dimension(format!("initial vector has length {}, expected {}", psi0.len(), problem.dim())));
    }
    if !(hbar > 0.0) {
        return Err(Error::OutOfRange(format!("hbar must be positive, got {hbar}")));
    }
    if opts.tol < 1e-14 {
        return Err(Error::OutOfRange(format!("tol = {} is below 1e-14", opts.tol)));
    }
    let (lo, hi) = problem.domain();
    for x in [x_from, x_to] {
        if x < lo || x > hi {
            return Err(Error::OutOfRange(format!("x = {x} is outside the domain [{lo}, {hi}]")));
        }
    }
    let rho = spectral_bound(problem, hbar, x_from, x_to);
    let span = (x_to - x_from).abs().max(1e-300);
    let ctl = StepControl {
        rtol: opts.tol,
        atol: opts.tol,
        max_step: if rho > 0.0 { (opts.ceiling_factor * hbar / rho).min(span) } else { span },
        max_steps: opts.max_steps,
    };
    let gamma = problem.gamma();
    let flux = |p: &CVec| p.dotc(&(gamma * p)).re;
    let f0 = flux(&psi0);
    let abort = 100.0 * opts.flux_tol * (1.0 + f0.abs());
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut fs = Vec::new();
    let i_over_h = c(0.0, 1.0 / hbar);
    let rhs = |x: f64, y: &CVec| (system_matrix(problem, hbar, x) * y) * i_over_h;
    let (_, stats) = dop853::integrate(rhs, x_from, x_to, psi0, &ctl, |x, y| {
        let f = flux(y);
        if (f - f0).abs() > abort {
            return Err(Error::FluxDrift {
                drift: (f - f0).abs() / (1.0 + f0.abs()),
                tol: opts.flux_tol,
            });
        }
        xs.push(x);
        ps.push(y.clone());
        fs.push(f);
        Ok(())
    })?;
    Ok(OracleTrace {
        hbar,
        x: xs,
        psi: ps,
        flux: fs,
        stats,
    })
}

/// `X0 = max(5ħ^{0.3}, 20√ħ)`.
pub fn default_match_distance(hbar: f64) -> f64 {
    (5.0 * hbar.powf(0.3)).max(20.0 * hbar.sqrt())
}

/// Eigenvectors of the perturbed pencil paired with the tracked branches.
#[derive(Debug, Clone)]
pub struct PerturbedBasis {
    pub x: f64,
    /// `φ̂_j` with `|N̂_j| = 1`, phased so that `(φ_j, Γφ̂_j)/N_j > 0`.
    pub phi: [CVec; 2],
    pub norm: [f64; 2],
    pub beta: [f64; 2],
}

impl PerturbedBasis {
    /// `(φ̂_m, ΓΨ)/N̂_m`, `m = 1, 2`, and the relative size of what is left.
    pub fn project(&self, gamma: &crate::CMat, psi: &CVec) -> ([C64; 2], f64) {
        let gp = gamma * psi;
        let k = [self.phi[0].dotc(&gp) / self.norm[0], self.phi[1].dotc(&gp) / self.norm[1]];
        let rest = psi - &self.phi[0] * k[0] - &self.phi[1] * k[1];
        (k, rest.norm() / psi.norm().max(1e-300))
    }
}

/// Perturbed eigenvectors at `x` matched to the tracked branches by Γ-overlap.
pub fn perturbed_basis(modes: &AdiabaticModes, x: f64) -> Result<PerturbedBasis> {
    let problem = &modes.problem;
    let g = problem.gamma();
    let k = problem.perturbed_k(x, modes.sqrt_hbar());
    let pairs = solve_matrix_pencil(problem, &k, x, false)?;
    let mut phi: [CVec; 2] = [CVec::zeros(0), CVec::zeros(0)];
    let mut norm = [0.0; 2];
    let mut beta = [0.0; 2];
    let mut used = Vec::new();
    for j in 0..2 {
        let p = modes.branches[j].eval(x)?;
        let gp = g * &p.phi;
        let scale = p.phi.norm() * gp.norm();
        let best = pairs
            .iter()
            .enumerate()
            .filter(|(i, q)| q.real && !used.contains(i))
            .map(|(i, q)| (i, q.phi.dotc(&gp).norm() / (q.phi.norm() * scale).max(1e-300)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Projection {
                residual: 1.0,
                limit: 0.0,
            })?;
        used.push(best.0);
        let q = &pairs[best.0];
        let nq = q.norm.re;
        if nq.signum() != p.norm.signum() || nq.abs() < 1e-12 {
            return Err(Error::Projection {
                residual: 1.0,
                limit: 0.0,
            });
        }
        let mut v = &q.phi / c(nq.abs().sqrt(), 0.0);
        let ov = v.dotc(&gp) / p.norm;
        v *= ov / ov.norm();
        phi[j] = v;
        norm[j] = nq.signum();
        beta[j] = q.beta.re;
    }
    Ok(PerturbedBasis { x, phi, norm, beta })
}

/// `e^{iϕ}φ̂_j(x)` with `ϕ` the canonical phase: the canonical mode with its
/// amplitude replaced by the perturbed eigenvector.
pub fn prepared_mode(modes: &AdiabaticModes, basis: &PerturbedBasis, j: usize, side: Side) -> Result<CVec> {
    let phase = modes.canonical_phase(j, side, basis.x)?;
    Ok(&basis.phi[j - 1] * C64::from_polar(1.0, phase))
}

/// Empirical transition matrix at one `ħ`.
#[derive(Debug, Clone)]
pub struct EmpiricalTransition {
    pub matrix: TransitionMatrix2,
    pub hbar: f64,
    /// Distance `X0` of the projection points from `x₀`.
    pub match_distance: f64,
    /// Per column: relative part of `Ψ(x₀ + X0)` outside the two modes.
    pub residuals: [f64; 2],
    /// Per column: relative flux drift of the run.
    pub flux_drift: [f64; 2],
    pub stats: [IntegratorStats; 2],
    pub traces: Option<[OracleTrace; 2]>,
}

impl EmpiricalTransition {
    pub fn max_flux_drift(&self) -> f64 {
        self.flux_drift[0].max(self.flux_drift[1])
    }
}

/// Columns `T[·][j]` from runs started in `Ψ_{j−}` at `x₀ − X0`.
#[allow(non_snake_case)]
pub fn extract_empirical_T(modes: &AdiabaticModes, opts: &OracleOptions) -> Result<EmpiricalTransition> {
    let hbar = modes.hbar;
    let x0 = modes.data.x0;
    let (lo, hi) = modes.problem.domain();
    let margin = 1e-3 * (hi - lo);
    let want = opts.match_distance.unwrap_or_else(|| default_match_distance(hbar));
    let room = (x0 - lo).min(hi - x0) - margin;
    let dist = want.min(room);
    if dist < want {
        log::warn!("match distance clipped from {want:.4} to {dist:.4} by the domain");
    }
    let floor = 5.0 * hbar.powf(0.5 - modes.config.g);
    if dist < floor {
        log::warn!("match distance {dist:.4} is below 5·hbar^(1/2-g) = {floor:.4}");
    }
    let left = perturbed_basis(modes, x0 - dist)?;
    let right = perturbed_basis(modes, x0 + dist)?;
    let right_phase = [
        modes.canonical_phase(1, Side::Right, x0 + dist)?,
        modes.canonical_phase(2, Side::Right, x0 + dist)?,
    ];
    let run = |j: usize| -> Result<([C64; 2], f64, OracleTrace)> {
        let psi0 = prepared_mode(modes, &left, j, Side::Left)?;
        let tr = integrate(&modes.problem, hbar, x0 - dist, x0 + dist, psi0, opts)?;
        let (k, res) = right.project(modes.problem.gamma(), tr.last());
        let k = [
            k[0] / C64::from_polar(1.0, right_phase[0]),
            k[1] / C64::from_polar(1.0, right_phase[1]),
        ];
        Ok((k, res, tr))
    };
    let (c1, c2) = rayon::join(|| run(1), || run(2));
    let (k1, r1, t1) = c1?;
    let (k2, r2, t2) = c2?;
    let limit = 10.0 * hbar.sqrt();
    for r in [r1, r2] {
        if r > limit {
            return Err(Error::Projection { residual: r, limit });
        }
    }
    let d = &modes.data;
    let matrix = TransitionMatrix2::new([[k1[0], k2[0]], [k1[1], k2[1]]], Convention::Canonical, d.nu, d.w);
    let flux_drift = [t1.flux_drift(), t2.flux_drift()];
    let stats = [t1.stats, t2.stats];
    Ok(EmpiricalTransition {
        matrix,
        hbar,
        match_distance: dist,
        residuals: [r1, r2],
        flux_drift,
        stats,
        traces: if opts.keep_traces { Some([t1, t2]) } else { None },
    })
}

/// One `ħ` of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub empirical: EmpiricalTransition,
    pub asymptotic: TransitionMatrix2,
    /// `|t_jk^{emp} − t_jk|`.
    pub entry_diff: [[f64; 2]; 2],
    /// Frobenius norm of the difference.
    pub diff_norm: f64,
}

/// Errors against `ħ` with a least-squares order fit.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Slope of `ln ‖ΔT‖` against `ln ħ`; `None` with fewer than three
    /// `ħ` values or fewer than two errors above the round-off floor.
    pub fitted_order: Option<f64>,
    /// Errors decrease with `ħ`.
    pub monotone: bool,
}

/// Least-squares slope of `ln y` against `ln x`, over `y > floor`.
pub fn fit_order(x: &[f64], y: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > floor).map(|(&a, &b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Runs [`extract_empirical_T`] for each `ħ` (in parallel) and compares with
/// the canonical matrix.
pub fn convergence_study<F>(build: F, hbars: &[f64], opts: &OracleOptions) -> Result<ConvergenceStudy>
where
    F: Fn(f64) -> Result<AdiabaticModes> + Sync,
{
    if hbars.is_empty() {
        return Err(Error::OutOfRange("no hbar values".into()));
    }
    let rows: Vec<ConvergenceRow> = hbars
        .par_iter()
        .map(|&h| -> Result<ConvergenceRow> {
            let modes = build(h)?;
            let emp = extract_empirical_T(&modes, opts).map_err(|e| match e {
                Error::Integrator(m) => Error::Integrator(format!("hbar = {h}: {m}")),
                other => other,
            })?;
            let asym = canonical_T(modes.data.nu, modes.data.w)?;
            let mut entry = [[0.0; 2]; 2];
            for (j, row) in entry.iter_mut().enumerate() {
                for (k, e) in row.iter_mut().enumerate() {
                    *e = (emp.matrix.t[j][k] - asym.t[j][k]).norm();
                }
            }
            let diff = emp.matrix.frobenius_diff(&asym.t);
            Ok(ConvergenceRow {
                empirical: emp,
                asymptotic: asym,
                entry_diff: entry,
                diff_norm: diff,
            })
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].empirical.hbar.total_cmp(&rows[a].empirical.hbar));
    let monotone = order.windows(2).all(|w| rows[w[1]].diff_norm <= rows[w[0]].diff_norm);
    if !monotone {
        log::warn!("transition errors are not monotone in hbar; the match distance may resonate");
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.empirical.hbar).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.diff_norm).collect();
    Ok(ConvergenceStudy {
        fitted_order: if hs.len() >= 3 { fit_order(&hs, &es, 1e-10) } else { None },
        rows,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::AdiabaticConfig;
    use crate::degeneracy::{extract_parameters, locate_degeneracy};
    use crate::models::{graphene, lz, GrapheneParams, LzParams, Model};
    use crate::pencil::{smooth_branches, uniform_grid, BranchOptions};
    use crate::CMat;
    use nalgebra::dvector;

    fn modes(m: &Model, hbar: f64) -> AdiabaticModes {
        let grid = uniform_grid(m.problem.domain(), 121);
        let br = smooth_branches(
            &m.problem,
            &grid,
            &BranchOptions {
                selection: m.selection,
                ..Default::default()
            },
        )
        .unwrap();
        let x0 = locate_degeneracy(&br, m.problem.domain()).unwrap();
        let d = extract_parameters(&br, &m.problem, x0, None).unwrap();
        AdiabaticModes::new(m.problem.clone(), br, d, hbar, AdiabaticConfig::default()).unwrap()
    }

    #[test]
    fn constant_diagonal_is_exponential() {
        let k = CMat::from_diagonal(&dvector![c(0.7, 0.0), c(-1.3, 0.0)]);
        let p = PencilProblem::new(2, move |_| k.clone(), |_| CMat::zeros(2, 2), CMat::identity(2, 2), (-1.0, 1.0)).unwrap();
        let hbar = 1e-2;
        let opts = OracleOptions::default();
        let tr = integrate(&p, hbar, -1.0, 1.0, dvector![c(1.0, 0.0), c(0.0, 0.0)], &opts).unwrap();
        let want = C64::from_polar(1.0, 0.7 * 2.0 / hbar);
        assert!((tr.last()[0] - want).norm() < 1e-9);
        assert!(tr.flux_drift() < 1e-10);
        for (x, p) in tr.x.iter().zip(&tr.psi) {
            assert!((p[0] - C64::from_polar(1.0, 0.7 * (x + 1.0) / hbar)).norm() < 1e-9);
        }
    }

    #[test]
    fn graphene_flux_and_round_trip() {
        let m = graphene(&GrapheneParams::default()).unwrap();
        let hbar = 1e-3;
        let opts = OracleOptions {
            tol: 1e-11,
            ..Default::default()
        };
        let psi0 = dvector![c(0.6, 0.1), c(-0.2, 0.7)];
        let tr = integrate(&m.problem, hbar, -0.5, 0.5, psi0.clone(), &opts).unwrap();
        assert!(tr.flux_drift() <= 1e-8, "{}", tr.flux_drift());
        let back = integrate(&m.problem, hbar, 0.5, -0.5, tr.last().clone(), &opts).unwrap();
        assert!((back.last() - &psi0).norm() < 1e-8);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,re_psi1,im_psi1,re_psi2,im_psi2,flux\n"));
        assert_eq!(text.lines().count(), tr.x.len() + 1);
    }

    #[test]
    fn rejects_bad_input() {
        let m = graphene(&GrapheneParams::default()).unwrap();
        let o = OracleOptions::default();
        assert!(integrate(&m.problem, 1e-3, -0.5, 0.5, dvector![c(1.0, 0.0)], &o).is_err());
        assert!(integrate(&m.problem, 1e-3, -5.0, 0.5, dvector![c(1.0, 0.0), c(0.0, 0.0)], &o).is_err());
        assert!(integrate(&m.problem, -1.0, -0.5, 0.5, dvector![c(1.0, 0.0), c(0.0, 0.0)], &o).is_err());
    }

    #[test]
    fn perturbed_basis_is_orthonormal() {
        let md = modes(&graphene(&GrapheneParams::default()).unwrap(), 1e-3);
        let b = perturbed_basis(&md, 0.4).unwrap();
        let g = md.problem.gamma();
        assert!((b.phi[0].dotc(&(g * &b.phi[0])).re - b.norm[0]).abs() < 1e-12);
        assert!(b.phi[0].dotc(&(g * &b.phi[1])).norm() < 1e-12);
        let psi = &b.phi[0] * c(0.3, 0.2) + &b.phi[1] * c(-1.0, 0.5);
        let (k, r) = b.project(g, &psi);
        assert!((k[0] - c(0.3, 0.2)).norm() < 1e-12 && (k[1] - c(-1.0, 0.5)).norm() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn uncoupled_is_identity() {
        let md = modes(&lz(&LzParams { coupling: 0.0, ..Default::default() }).unwrap(), 1e-2);
        let e = extract_empirical_T(&md, &OracleOptions::default()).unwrap();
        let id = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(e.matrix.max_diff(&id) < 1e-6, "{}", e.matrix);
    }

    #[test]
    fn landau_zener_magnitudes() {
        let md = modes(&lz(&LzParams::default()).unwrap(), 1e-3);
        let e = extract_empirical_T(&md, &OracleOptions::default()).unwrap();
        let t21 = e.matrix.t[1][0].norm_sqr();
        let want = 1.0 - (-std::f64::consts::PI).exp();
        assert!((t21 - want).abs() < 3.0 * 1e-3f64.sqrt(), "{t21} vs {want}");
        assert!(e.max_flux_drift() <= 1e-8);
    }

    #[test]
    fn order_fit() {
        let h = [1e-2, 1e-3, 1e-4];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        assert!((fit_order(&h, &e, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        assert!(fit_order(&h, &[1e-15; 3], 1e-12).is_none());
    }
}
