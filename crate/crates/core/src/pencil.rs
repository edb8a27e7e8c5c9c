//! Self-adjoint matrix pencils `K(x) − βΓ`: eigen-solves, smooth branch
//! tracking with a fixed gauge, Γ-inner products, matrix elements and
//! structural property checks.

use crate::{c, CMat, CVec, Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// A matrix-valued function of the real coordinate.
pub type MatFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// A real scalar function of the coordinate (regauge phases, amplitudes).
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const HERMITIAN_TOL: f64 = 1e-12;
const GAMMA_COND_TOL: f64 = 1e-10;
const SAMPLE_POINTS: usize = 33;

/// The pencil problem `(K(x) + √ħ B(x))Ψ = −iħΓΨ′` without ħ.
#[derive(Clone)]
pub struct PencilProblem {
    dim: usize,
    k: MatFn,
    b: MatFn,
    dk: Option<MatFn>,
    gamma: CMat,
    gamma_inv: CMat,
    domain: (f64, f64),
}

impl fmt::Debug for PencilProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PencilProblem")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("analytic_derivative", &self.dk.is_some())
            .finish()
    }
}

fn hermitian_deviation(m: &CMat) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

/// Frobenius norm.
pub(crate) fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl PencilProblem {
    /// Builds and validates a problem. `k` and `b` are sampled on the domain
    /// for shape, Hermiticity and smoothness; `gamma` must be Hermitian with
    /// condition number below `1e10`.
    pub fn new(
        dim: usize,
        k: impl Fn(f64) -> CMat + Send + Sync + 'static,
        b: impl Fn(f64) -> CMat + Send + Sync + 'static,
        gamma: CMat,
        domain: (f64, f64),
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::Dimension(format!("invalid domain [{}, {}]", domain.0, domain.1)));
        }
        if gamma.nrows() != dim || gamma.ncols() != dim {
            return Err(Error::Dimension(format!(
                "Gamma is {}x{}, expected {dim}x{dim}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let (dev, row, col) = hermitian_deviation(&gamma);
        if dev > HERMITIAN_TOL * fro(&gamma).max(1e-300) {
            return Err(Error::NotHermitian {
                which: "Gamma",
                x: f64::NAN,
                row,
                col,
                dev,
            });
        }
        let sv = gamma.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > GAMMA_COND_TOL * smax) {
            return Err(Error::SingularGamma {
                ratio: smin / smax.max(1e-300),
            });
        }
        let gamma_inv = gamma
            .clone()
            .try_inverse()
            .ok_or(Error::SingularGamma { ratio: 0.0 })?;
        let p = PencilProblem {
            dim,
            k: Arc::new(k),
            b: Arc::new(b),
            dk: None,
            gamma,
            gamma_inv,
            domain,
        };
        p.validate()?;
        Ok(p)
    }

    /// Supplies an analytic `K′(x)`, used instead of finite differences.
    pub fn with_k_derivative(mut self, dk: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        self.dk = Some(Arc::new(dk));
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        for i in 0..SAMPLE_POINTS {
            let x = lo + (hi - lo) * i as f64 / (SAMPLE_POINTS - 1) as f64;
            for (which, m) in [("K", self.k(x)), ("B", self.b(x))] {
                if m.nrows() != self.dim || m.ncols() != self.dim {
                    return Err(Error::Dimension(format!(
                        "{which}({x}) is {}x{}, expected {}x{}",
                        m.nrows(),
                        m.ncols(),
                        self.dim,
                        self.dim
                    )));
                }
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NotSmooth(format!("{which}({x}) has non-finite entries")));
                }
                let (dev, row, col) = hermitian_deviation(&m);
                if dev > HERMITIAN_TOL * fro(&m).max(1e-300) {
                    return Err(Error::NotHermitian { which, x, row, col, dev });
                }
            }
        }
        self.check_smoothness()
    }

    /// Second differences at steps `H`, `H/2`, `H/4` on centres spaced `H/2`:
    /// for a smooth function successive differences shrink by about four,
    /// a kink or jump within `H/4` of a centre breaks that pattern.
    fn check_smoothness(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        let w = hi - lo;
        let big_h = w / 32.0;
        let centres = 64;
        for i in 0..=centres {
            let x = lo + w * i as f64 / centres as f64;
            if x - big_h < lo || x + big_h > hi {
                continue;
            }
            for (which, f) in [("K", &self.k), ("B", &self.b)] {
                let f0 = f(x);
                let d2 = |s: f64| (f(x + s) - &f0 * c(2.0, 0.0) + f(x - s)) / c(s * s, 0.0);
                let (a, b, d) = (d2(big_h), d2(big_h / 2.0), d2(big_h / 4.0));
                let e1 = fro(&(&a - &b));
                let e2 = fro(&(&b - &d));
                let floor = 1e-8 * (fro(&f0) / (w * w) + fro(&a) + fro(&d)) + 1e-12;
                if e2 > 0.5 * e1 + floor {
                    return Err(Error::NotSmooth(format!(
                        "{which} is not smooth near x = {x:.6} (second differences do not converge)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn width(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn gamma(&self) -> &CMat {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &CMat {
        &self.gamma_inv
    }

    pub fn k(&self, x: f64) -> CMat {
        (self.k)(x)
    }

    pub fn b(&self, x: f64) -> CMat {
        (self.b)(x)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.dk.is_some()
    }

    /// `K′(x)`: analytic when supplied, otherwise a fourth-order central
    /// difference with step `1e−4` of the domain width.
    pub fn k_prime(&self, x: f64) -> CMat {
        if let Some(dk) = &self.dk {
            return dk(x);
        }
        let h = 1e-4 * self.width();
        let f = &self.k;
        (f(x - 2.0 * h) - f(x + 2.0 * h) + (f(x + h) - f(x - h)) * c(8.0, 0.0)) / c(12.0 * h, 0.0)
    }

    /// `K(x) + √ħ B(x)`.
    pub fn perturbed_k(&self, x: f64, sqrt_hbar: f64) -> CMat {
        self.k(x) + self.b(x) * c(sqrt_hbar, 0.0)
    }
}

/// `(u, Γv)`, conjugate-linear in `u`.
pub fn gamma_inner(u: &CVec, v: &CVec, gamma: &CMat) -> Result<C64> {
    if u.len() != v.len() || gamma.nrows() != u.len() || gamma.ncols() != v.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {} against a {}x{} Gamma",
            u.len(),
            v.len(),
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    Ok(u.dotc(&(gamma * v)))
}

fn ginner(u: &CVec, v: &CVec, gamma: &CMat) -> C64 {
    u.dotc(&(gamma * v))
}

/// Euclidean overlap `|(u, v)| / (|u||v|)`.
pub fn euclidean_overlap(u: &CVec, v: &CVec) -> f64 {
    u.dotc(v).norm() / (u.norm() * v.norm()).max(1e-300)
}

/// One solution of `Kφ = βΓφ`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub beta: C64,
    /// Euclidean unit vector; the largest component is real and positive.
    pub phi: CVec,
    /// `N = (φ, Γφ)`.
    pub norm: C64,
    /// `|Im β| ≤ 1e−10‖K‖`.
    pub real: bool,
}

fn schur_eigenvalues(m: &CMat, x: f64) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| Error::EigenSolver {
        x,
        reason: "Schur iteration did not converge".into(),
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Single-linkage clusters of eigenvalues within `tol`.
fn cluster(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Right singular vectors of `m` belonging to the `count` smallest singular
/// values, plus those singular values.
fn smallest_right_singular(m: &CMat, count: usize) -> (CMat, Vec<f64>) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut out = CMat::zeros(n, count);
    let mut sv = Vec::with_capacity(count);
    for (col, &i) in idx.iter().take(count).enumerate() {
        let v = vt.row(i).adjoint();
        out.set_column(col, &v);
        sv.push(svd.singular_values[i]);
    }
    (out, sv)
}

fn orthonormalize(v: CMat) -> CMat {
    let m = v.ncols();
    let q = v.qr().q();
    q.columns(0, m).into_owned()
}

/// Invariant subspace of `a` for a cluster centred at `mu`: smallest singular
/// vectors of `a − μI`, refined by two steps of shifted inverse subspace
/// iteration.
fn invariant_subspace(a: &CMat, mu: C64, m: usize, scale: f64) -> CMat {
    let n = a.nrows();
    let shifted = a - CMat::identity(n, n) * mu;
    let (mut v, _) = smallest_right_singular(&shifted, m);
    let eps = 1e-10 * scale.max(1e-300);
    let lu = (a - CMat::identity(n, n) * (mu + c(eps, 0.7 * eps))).lu();
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => v = orthonormalize(w),
            _ => break,
        }
    }
    v
}

struct SmallEigen {
    value: C64,
    basis: CMat,
    defective: bool,
}

/// Eigen-decomposition of a small dense matrix by clusters.
fn small_eigen(m: &CMat, x: f64, tol: f64) -> Result<Vec<SmallEigen>> {
    let vals = schur_eigenvalues(m, x)?;
    let scale = fro(m).max(1e-300);
    let mut out = Vec::new();
    for group in cluster(&vals, tol) {
        let k = group.len();
        let mu = group.iter().map(|&i| vals[i]).sum::<C64>() / k as f64;
        let n = m.nrows();
        let shifted = m - CMat::identity(n, n) * mu;
        let (basis, sv) = smallest_right_singular(&shifted, k);
        let null_tol = 1e-7 * scale;
        let defective = k > 1 && sv.iter().any(|&s| s > null_tol);
        out.push(SmallEigen {
            value: mu,
            basis,
            defective,
        });
    }
    Ok(out)
}

/// Solves the 2-or-more dimensional degenerate block spanned by `w` (columns)
/// with the restricted pencil `(W†K′W, W†ΓW)`.
fn resolve_with_derivative(w: &CMat, kp: &CMat, gamma: &CMat, x: f64) -> Result<Vec<CVec>> {
    let gr = w.adjoint() * gamma * w;
    let kr = w.adjoint() * kp * w;
    let gr_inv = gr.clone().try_inverse().ok_or_else(|| Error::EigenSolver {
        x,
        reason: "degenerate eigenspace is Gamma-neutral".into(),
    })?;
    let mp = &gr_inv * &kr;
    let tol = 1e-9 * fro(&mp).max(1e-300);
    let mut vecs = Vec::new();
    for e in small_eigen(&mp, x, tol)? {
        if e.basis.ncols() == 1 {
            vecs.push(w * e.basis.column(0));
        } else {
            // K′ does not split the block either: Γ-orthogonalize it
            let sub = w * &e.basis;
            let g = sub.adjoint() * gamma * &sub;
            let eig = g.symmetric_eigen();
            for j in 0..sub.ncols() {
                vecs.push(&sub * eig.eigenvectors.column(j));
            }
        }
    }
    Ok(vecs)
}

fn fix_phase(mut v: CVec) -> CVec {
    let nrm = v.norm();
    if nrm > 0.0 {
        v /= c(nrm, 0.0);
    }
    let mut best = 0;
    let mut bmax = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > bmax * (1.0 + 1e-12) {
            bmax = a;
            best = i;
        }
    }
    if bmax > 0.0 {
        let ph = v[best].conj() / bmax;
        v *= ph;
    }
    v
}

/// All eigenpairs of `K(x)φ = βΓφ`, sorted by `(Re β, Im β)`.
///
/// Eigenvalues are clustered at `1e−6‖Γ⁻¹K‖`; each cluster's invariant
/// subspace is refined and solved by Rayleigh–Ritz. An exactly degenerate
/// real eigenvalue is split by the restricted derivative pencil, which yields
/// the limits of the smooth branches. A defective cluster is a Jordan block.
pub fn solve_pencil_at(problem: &PencilProblem, x: f64) -> Result<Vec<EigenPair>> {
    solve_matrix_pencil(problem, &problem.k(x), x, true)
}

/// As [`solve_pencil_at`] for an arbitrary Hermitian `k` paired with the
/// problem's Γ (used for the perturbed operator `K + √ħB`).
pub fn solve_matrix_pencil(problem: &PencilProblem, k: &CMat, x: f64, resolve: bool) -> Result<Vec<EigenPair>> {
    let n = problem.dim;
    let gamma = &problem.gamma;
    let a = &problem.gamma_inv * k;
    let sa = fro(&a).max(1e-300);
    let sk = fro(k);
    let vals = schur_eigenvalues(&a, x)?;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    let real_tol = 1e-10 * sk.max(1e-300);
    for group in cluster(&vals, 1e-6 * sa) {
        let m = group.len();
        let mu = group.iter().map(|&i| vals[i]).sum::<C64>() / m as f64;
        let v = invariant_subspace(&a, mu, m, sa);
        let mut vecs: Vec<(C64, CVec)> = Vec::new();
        if m == 1 {
            vecs.push((vals[group[0]], v.column(0).into_owned()));
        } else {
            let ar = v.adjoint() * &a * &v;
            let tol = 1e-9 * sa;
            for e in small_eigen(&ar, x, tol)? {
                if e.defective {
                    return Err(Error::JordanBlock { x });
                }
                if e.basis.ncols() == 1 {
                    vecs.push((e.value, &v * e.basis.column(0)));
                } else {
                    let w = orthonormalize(&v * &e.basis);
                    let split = if resolve && e.value.im.abs() <= real_tol {
                        resolve_with_derivative(&w, &problem.k_prime(x), gamma, x)?
                    } else {
                        let g = w.adjoint() * gamma * &w;
                        let eig = g.symmetric_eigen();
                        (0..w.ncols()).map(|j| &w * eig.eigenvectors.column(j)).collect()
                    };
                    for s in split {
                        vecs.push((e.value, s));
                    }
                }
            }
            if m == 2 && vecs.len() == 2 && euclidean_overlap(&vecs[0].1, &vecs[1].1) > 1.0 - 1e-6 {
                return Err(Error::JordanBlock { x });
            }
        }
        for (lambda, phi) in vecs {
            let phi = fix_phase(phi);
            let norm = ginner(&phi, &phi, gamma);
            let real = lambda.im.abs() <= real_tol;
            let beta = if real && norm.norm() > 1e-12 * fro(gamma) {
                c(phi.dotc(&(k * &phi)).re / norm.re, 0.0)
            } else if real {
                c(lambda.re, 0.0)
            } else {
                lambda
            };
            pairs.push(EigenPair {
                beta,
                phi,
                norm: c(norm.re, 0.0),
                real,
            });
        }
    }
    pairs.sort_by(|p, q| p.beta.re.total_cmp(&q.beta.re).then(p.beta.im.total_cmp(&q.beta.im)));
    Ok(pairs)
}

/// How the crossing pair is picked out of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchSelection {
    /// The pair of real eigenvalues with the smallest gap anywhere on the grid.
    Auto,
    /// Positions in the value-sorted real spectrum at the minimal-gap point.
    Indices(usize, usize),
    /// The real pair closest to the given eigenvalue.
    Near(f64),
}

/// Branch tracking settings.
#[derive(Debug, Clone, Copy)]
pub struct BranchOptions {
    pub selection: BranchSelection,
    /// Minimal distance from the tracked pair to the rest of the spectrum.
    pub gap_min: f64,
    /// Minimal `|N|` of a Euclidean-unit eigenvector.
    pub norm_floor: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            selection: BranchSelection::Auto,
            gap_min: 1e-3,
            norm_floor: 1e-8,
        }
    }
}

/// A tracked sample of a branch.
#[derive(Debug, Clone)]
pub struct BranchSample {
    pub x: f64,
    pub beta: f64,
    /// Gauge-fixed eigenvector with `|N| = 1`.
    pub phi: CVec,
    /// `dβ/dx = K′_jj/N_j`.
    pub slope: f64,
    /// `|dβ₂/dx − dβ₁/dx|` at this sample.
    pub slope_gap: f64,
}

/// Value of a branch at one point.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub beta: f64,
    pub phi: CVec,
    /// `N = (φ, Γφ)` (±1 unless an amplitude is imposed).
    pub norm: f64,
}

/// A smooth real eigenvalue branch `β_j(x)` with a gauge-fixed eigenvector.
///
/// The gauge makes `(r, φ_j(x))` real and positive for an anchor vector `r`
/// (the eigenvector at the tracking start), so values at arbitrary `x` are
/// reproducible without path dependence. Where the anchor overlap falls
/// below 0.2 the phase is aligned with the nearest tracked sample instead.
#[derive(Clone)]
pub struct EigenBranch {
    pub index: usize,
    pub norm_sign: f64,
    samples: Vec<BranchSample>,
    anchor: CVec,
    problem: PencilProblem,
    norm_floor: f64,
    regauge: Option<ScalarFn>,
    amplitude: Option<ScalarFn>,
}

impl fmt::Debug for EigenBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenBranch")
            .field("index", &self.index)
            .field("norm_sign", &self.norm_sign)
            .field("samples", &self.samples.len())
            .field("regauged", &self.regauge.is_some())
            .finish()
    }
}

const ANCHOR_MIN_OVERLAP: f64 = 0.2;

impl EigenBranch {
    pub fn samples(&self) -> &[BranchSample] {
        &self.samples
    }

    pub fn problem(&self) -> &PencilProblem {
        &self.problem
    }

    /// The same branch with `φ_j(x)` multiplied by `e^{iσ(x)}`.
    pub fn with_regauge(mut self, sigma: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.regauge = Some(Arc::new(sigma));
        self
    }

    /// The same branch with `φ_j(x)` multiplied by `a(x) > 0`.
    pub fn with_amplitude(mut self, a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.amplitude = Some(Arc::new(a));
        self
    }

    fn nearest(&self, x: f64) -> usize {
        let i = self.samples.partition_point(|s| s.x < x);
        if i == 0 {
            0
        } else if i >= self.samples.len() {
            self.samples.len() - 1
        } else if (self.samples[i].x - x).abs() < (x - self.samples[i - 1].x).abs() {
            i
        } else {
            i - 1
        }
    }

    fn local_step(&self, k: usize) -> f64 {
        let s = &self.samples;
        if s.len() < 2 {
            return self.problem.width();
        }
        if k + 1 < s.len() {
            s[k + 1].x - s[k].x
        } else {
            s[k].x - s[k - 1].x
        }
    }

    fn gauge(&self, phi: CVec, reference: Option<&CVec>) -> CVec {
        let ov = self.anchor.dotc(&phi);
        if ov.norm() >= ANCHOR_MIN_OVERLAP * self.anchor.norm() * phi.norm() || reference.is_none() {
            if ov.norm() == 0.0 {
                return phi;
            }
            return phi * (ov.conj() / ov.norm());
        }
        let r = reference.expect("checked above");
        let ov = r.dotc(&phi);
        if ov.norm() == 0.0 {
            phi
        } else {
            phi * (ov.conj() / ov.norm())
        }
    }

    /// Branch value in the fixed gauge, without regauge or amplitude.
    fn base_eval(&self, x: f64) -> Result<BranchPoint> {
        let k = self.nearest(x);
        let s = &self.samples[k];
        let pairs = solve_pencil_at(&self.problem, x)?;
        let pred = s.beta + s.slope * (x - s.x);
        let scale = (s.slope_gap * (x - s.x).abs().max(0.5 * self.local_step(k))).max(1e-12 * (1.0 + s.beta.abs()));
        let mut best: Option<(f64, &EigenPair)> = None;
        for p in &pairs {
            let cost = (p.beta - pred).norm() / scale + (1.0 - euclidean_overlap(&s.phi, &p.phi));
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, p));
            }
        }
        let (_, p) = best.ok_or_else(|| Error::Branch(format!("no eigenpairs at x = {x}")))?;
        if !p.real {
            return Err(Error::Branch(format!(
                "branch {} becomes complex at x = {x} (beta = {})",
                self.index, p.beta
            )));
        }
        let n = p.norm.re;
        if n.abs() < self.norm_floor || n.signum() != self.norm_sign {
            return Err(Error::Branch(format!(
                "branch {} has norm {n:.3e} at x = {x} (sign {} expected)",
                self.index, self.norm_sign
            )));
        }
        let phi = self.gauge(&p.phi / c(n.abs().sqrt(), 0.0), Some(&s.phi));
        Ok(BranchPoint {
            beta: p.beta.re,
            phi,
            norm: self.norm_sign,
        })
    }

    /// `β_j(x)`, `φ_j(x)` and `N_j(x)` at any `x`.
    pub fn eval(&self, x: f64) -> Result<BranchPoint> {
        let mut p = self.base_eval(x)?;
        if let Some(a) = &self.amplitude {
            let a = a(x);
            p.phi *= c(a, 0.0);
            p.norm *= a * a;
        }
        if let Some(s) = &self.regauge {
            p.phi *= C64::from_polar(1.0, s(x));
        }
        Ok(p)
    }

    pub fn beta(&self, x: f64) -> Result<f64> {
        Ok(self.base_eval(x)?.beta)
    }

    pub fn phi(&self, x: f64) -> Result<CVec> {
        Ok(self.eval(x)?.phi)
    }

    pub fn norm(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.norm)
    }

    /// `dφ_j/dx` by central differences with one Richardson step.
    pub fn phi_derivative(&self, x: f64, h: f64) -> Result<CVec> {
        let d = |s: f64| -> Result<CVec> { Ok((self.phi(x + s)? - self.phi(x - s)?) / c(2.0 * s, 0.0)) };
        let d1 = d(h)?;
        let d2 = d(h / 2.0)?;
        Ok((d2 * c(4.0, 0.0) - d1) / c(3.0, 0.0))
    }

    /// Default differentiation step `1e−5` of the domain width.
    pub fn default_fd_step(&self) -> f64 {
        1e-5 * self.problem.width()
    }

    /// `Im S_jj(x) = Im (φ_j, Γ∂_xφ_j)/N_j`.
    pub fn berry_integrand(&self, x: f64, h: f64) -> Result<f64> {
        let p = self.eval(x)?;
        let d = self.phi_derivative(x, h)?;
        Ok((ginner(&p.phi, &d, self.problem.gamma()) / p.norm).im)
    }
}

/// Spectrum samples at the grid, computed in parallel.
fn solve_grid(problem: &PencilProblem, grid: &[f64]) -> Result<Vec<Vec<EigenPair>>> {
    grid.par_iter().map(|&x| solve_pencil_at(problem, x)).collect()
}

fn real_indices(pairs: &[EigenPair]) -> Vec<usize> {
    (0..pairs.len()).filter(|&i| pairs[i].real).collect()
}

/// The start point and candidate pair for tracking.
fn select_pair(spectra: &[Vec<EigenPair>], sel: BranchSelection) -> Result<(usize, usize, usize)> {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for (g, pairs) in spectra.iter().enumerate() {
        let reals = real_indices(pairs);
        let mut consider = |a: usize, b: usize, key: f64| {
            if best.is_none_or(|(k, ..)| key < k) {
                best = Some((key, g, a, b));
            }
        };
        match sel {
            BranchSelection::Auto => {
                for w in reals.windows(2) {
                    let gap = (pairs[w[1]].beta.re - pairs[w[0]].beta.re).abs();
                    consider(w[0], w[1], gap);
                }
            }
            BranchSelection::Indices(i, j) => {
                if i < reals.len() && j < reals.len() && i != j {
                    let gap = (pairs[reals[i]].beta.re - pairs[reals[j]].beta.re).abs();
                    consider(reals[i], reals[j], gap);
                }
            }
            BranchSelection::Near(t) => {
                let mut by_dist = reals.clone();
                by_dist.sort_by(|&a, &b| (pairs[a].beta.re - t).abs().total_cmp(&(pairs[b].beta.re - t).abs()));
                if by_dist.len() >= 2 {
                    let (a, b) = (by_dist[0], by_dist[1]);
                    let gap = (pairs[a].beta.re - pairs[b].beta.re).abs();
                    consider(a, b, gap);
                }
            }
        }
    }
    best.map(|(_, g, a, b)| (g, a, b))
        .ok_or_else(|| Error::Branch("fewer than two real eigenvalues on the grid".into()))
}

#[derive(Clone)]
struct Tracked {
    idx: usize,
    beta: f64,
    phi: CVec,
    norm: f64,
    slope: f64,
}

fn tracked_from(problem: &PencilProblem, pairs: &[EigenPair], idx: usize, x: f64) -> Tracked {
    let p = &pairs[idx];
    let kp = problem.k_prime(x);
    let slope = p.phi.dotc(&(&kp * &p.phi)).re / p.norm.re;
    Tracked {
        idx,
        beta: p.beta.re,
        phi: p.phi.clone(),
        norm: p.norm.re,
        slope,
    }
}

/// Tracks the crossing pair along a sorted grid.
///
/// Tracking starts at the grid point of minimal gap and proceeds outward in
/// both directions; at each step the pair is matched jointly by a cost of
/// predictor distance plus eigenvector misalignment, never by value order.
/// Branch 2 is the one with the larger slope at the start, so that
/// `β₂ − β₁` increases through the crossing.
pub fn smooth_branches(problem: &PencilProblem, grid: &[f64], opts: &BranchOptions) -> Result<[EigenBranch; 2]> {
    if grid.len() < 3 {
        return Err(Error::Branch("grid needs at least three points".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Branch("grid must be strictly increasing".into()));
    }
    let spectra = solve_grid(problem, grid)?;
    let (g0, ia, ib) = select_pair(&spectra, opts.selection)?;
    let pa = &spectra[g0][ia];
    let pb = &spectra[g0][ib];
    if euclidean_overlap(&pa.phi, &pb.phi) > 0.9 {
        return Err(Error::JordanBlock { x: grid[g0] });
    }
    let ta = tracked_from(problem, &spectra[g0], ia, grid[g0]);
    let tb = tracked_from(problem, &spectra[g0], ib, grid[g0]);
    let (t1, t2) = if ta.slope <= tb.slope { (ta, tb) } else { (tb, ta) };
    if (t2.slope - t1.slope).abs() <= 1e-8 * (1.0 + t1.slope.abs() + t2.slope.abs()) {
        return Err(Error::Branch(format!(
            "branches touch without crossing near x = {} (equal slopes)",
            grid[g0]
        )));
    }
    let mut track: Vec<Option<[Tracked; 2]>> = vec![None; grid.len()];
    track[g0] = Some([t1, t2]);
    for dir in [1isize, -1] {
        let mut prev = g0;
        let mut g = g0 as isize + dir;
        while g >= 0 && (g as usize) < grid.len() {
            let gi = g as usize;
            let last = track[prev].clone().expect("tracked");
            let dx = grid[gi] - grid[prev];
            let pairs = &spectra[gi];
            let scale = ((last[1].slope - last[0].slope).abs() * dx.abs()).max(1e-14 * (1.0 + last[0].beta.abs()));
            let cost = |t: &Tracked, p: &EigenPair| {
                let pred = t.beta + t.slope * dx;
                (p.beta - pred).norm() / scale + (1.0 - euclidean_overlap(&t.phi, &p.phi))
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..pairs.len() {
                for j in 0..pairs.len() {
                    if i == j {
                        continue;
                    }
                    let cst = cost(&last[0], &pairs[i]) + cost(&last[1], &pairs[j]);
                    if best.is_none_or(|(b, ..)| cst < b) {
                        best = Some((cst, i, j));
                    }
                }
            }
            let (_, i, j) = best.ok_or_else(|| Error::Branch(format!("lost the pair at x = {}", grid[gi])))?;
            for &k in &[i, j] {
                if !pairs[k].real {
                    return Err(Error::Branch(format!(
                        "tracked eigenvalue is complex at x = {} (beta = {})",
                        grid[gi], pairs[k].beta
                    )));
                }
            }
            track[gi] = Some([tracked_from(problem, pairs, i, grid[gi]), tracked_from(problem, pairs, j, grid[gi])]);
            prev = gi;
            g += dir;
        }
    }
    let track: Vec<[Tracked; 2]> = track.into_iter().map(|t| t.expect("all tracked")).collect();

    // spectral gap, norms
    for (gi, (pairs, t)) in spectra.iter().zip(&track).enumerate() {
        for (pi, p) in pairs.iter().enumerate() {
            if t.iter().any(|tj| tj.idx == pi) {
                continue;
            }
            for tj in t {
                let d = (p.beta - c(tj.beta, 0.0)).norm();
                if d < opts.gap_min {
                    return Err(Error::Branch(format!(
                        "spectral gap {d:.3e} below {:.3e} at x = {}",
                        opts.gap_min, grid[gi]
                    )));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(2);
    for j in 0..2 {
        let sign = track[g0][j].norm.signum();
        for (gi, t) in track.iter().enumerate() {
            let n = t[j].norm;
            if n.abs() < opts.norm_floor {
                return Err(Error::Branch(format!(
                    "|N_{}| = {:.3e} below floor at x = {}",
                    j + 1,
                    n.abs(),
                    grid[gi]
                )));
            }
            if n.signum() != sign {
                return Err(Error::Branch(format!("sign of N_{} changes at x = {}", j + 1, grid[gi])));
            }
        }
        let anchor = &track[g0][j].phi / c(track[g0][j].norm.abs().sqrt(), 0.0);
        let mut branch = EigenBranch {
            index: j + 1,
            norm_sign: sign,
            samples: Vec::with_capacity(grid.len()),
            anchor: anchor.clone(),
            problem: problem.clone(),
            norm_floor: opts.norm_floor,
            regauge: None,
            amplitude: None,
        };
        let mut phis: Vec<Option<CVec>> = vec![None; grid.len()];
        phis[g0] = Some(anchor);
        for dir in [1isize, -1] {
            let mut prev = g0;
            let mut g = g0 as isize + dir;
            while g >= 0 && (g as usize) < grid.len() {
                let gi = g as usize;
                let t = &track[gi][j];
                let raw = &t.phi / c(t.norm.abs().sqrt(), 0.0);
                let phi = branch.gauge(raw, phis[prev].as_ref());
                let pr = phis[prev].as_ref().expect("previous sample");
                if sign * ginner(pr, &phi, problem.gamma()).re <= 0.0 {
                    return Err(Error::Branch(format!(
                        "gauge discontinuity for branch {} between x = {} and x = {}; refine the grid",
                        j + 1,
                        grid[prev],
                        grid[gi]
                    )));
                }
                phis[gi] = Some(phi);
                prev = gi;
                g += dir;
            }
        }
        for (gi, phi) in phis.into_iter().enumerate() {
            branch.samples.push(BranchSample {
                x: grid[gi],
                beta: track[gi][j].beta,
                phi: phi.expect("gauged"),
                slope: track[gi][j].slope,
                slope_gap: (track[gi][1].slope - track[gi][0].slope).abs(),
            });
        }
        out.push(branch);
    }
    let b2 = out.pop().expect("two branches");
    let b1 = out.pop().expect("two branches");
    Ok([b1, b2])
}

/// Uniform grid with `n` points on the problem domain.
pub fn uniform_grid(domain: (f64, f64), n: usize) -> Vec<f64> {
    let n = n.max(3);
    (0..n)
        .map(|i| domain.0 + (domain.1 - domain.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Matrix elements of the tracked pair at one point.
#[derive(Debug, Clone)]
pub struct MatrixElementTable {
    pub x: f64,
    pub beta: [f64; 2],
    pub n: [f64; 2],
    /// `B_jk = (φ_j, Bφ_k)`.
    pub b: [[C64; 2]; 2],
    /// `K′_jk = (φ_j, K′φ_k)`.
    pub kp: [[C64; 2]; 2],
    /// `S_jk = (φ_j, Γ∂_xφ_k)/N_j`.
    pub s: [[C64; 2]; 2],
    /// `max_j |dβ_j/dx − K′_jj/N_j|` with `dβ/dx` by finite differences.
    pub slope_residual: f64,
    /// `max_{j≠k} |K′_jk − (β_k − β_j)N_j S_jk|`.
    pub coupling_residual: f64,
    /// `max |K′_jk|`, the scale of both residuals.
    pub kp_scale: f64,
}

impl MatrixElementTable {
    /// Both identity checks pass at `1e−6` relative to `max|K′|`.
    pub fn consistent(&self) -> bool {
        let tol = 1e-6 * self.kp_scale.max(1e-300);
        self.slope_residual <= tol && self.coupling_residual <= tol
    }
}

/// Matrix elements `B_jk`, `K′_jk`, `S_jk` of the pair at `x` and the two
/// derivative identities. `fd_step` defaults to `1e−5` of the domain width.
pub fn matrix_elements(branches: &[EigenBranch; 2], problem: &PencilProblem, x: f64, fd_step: Option<f64>) -> Result<MatrixElementTable> {
    let (lo, hi) = problem.domain();
    let h = fd_step.unwrap_or(1e-5 * problem.width());
    if x - 2.0 * h < lo || x + 2.0 * h > hi {
        return Err(Error::OutOfRange(format!("x = {x} is too close to the domain edge")));
    }
    let pts = [branches[0].eval(x)?, branches[1].eval(x)?];
    let dphi = [branches[0].phi_derivative(x, h)?, branches[1].phi_derivative(x, h)?];
    let bm = problem.b(x);
    let kp = problem.k_prime(x);
    let g = problem.gamma();
    let zero = C64::new(0.0, 0.0);
    let mut b = [[zero; 2]; 2];
    let mut kpm = [[zero; 2]; 2];
    let mut s = [[zero; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            b[j][k] = pts[j].phi.dotc(&(&bm * &pts[k].phi));
            kpm[j][k] = pts[j].phi.dotc(&(&kp * &pts[k].phi));
            s[j][k] = ginner(&pts[j].phi, &dphi[k], g) / pts[j].norm;
        }
    }
    let beta = [pts[0].beta, pts[1].beta];
    let n = [pts[0].norm, pts[1].norm];
    let hb = 1e-4 * problem.width();
    let mut slope_residual = 0.0f64;
    for j in 0..2 {
        let bp = |s: f64| branches[j].beta(x + s);
        let d = (bp(-2.0 * hb)? - bp(2.0 * hb)? + 8.0 * (bp(hb)? - bp(-hb)?)) / (12.0 * hb);
        slope_residual = slope_residual.max((d - kpm[j][j].re / n[j]).abs());
    }
    let mut coupling_residual = 0.0f64;
    for (j, k) in [(0, 1), (1, 0)] {
        let r = kpm[j][k] - s[j][k] * (beta[k] - beta[j]) * n[j];
        coupling_residual = coupling_residual.max(r.norm());
    }
    let kp_scale = kpm.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(MatrixElementTable {
        x,
        beta,
        n,
        b,
        kp: kpm,
        s,
        slope_residual,
        coupling_residual,
        kp_scale,
    })
}

/// One named pass/fail check.
#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Measured value (worst case over the grid).
    pub value: f64,
    pub tolerance: f64,
}

/// Structural properties of a pencil and its tracked pair.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
    /// `sgn N₁ · sgn N₂`.
    pub sign_product: f64,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Γ-orthogonality, non-vanishing constant-sign norms, reality of the pair
/// and solvability of `(K − β₀Γ)u = f` for `f` orthogonal to the kernel at
/// the crossing. Report only; never fails.
pub fn verify_pencil_properties(branches: &[EigenBranch; 2], problem: &PencilProblem, grid: &[f64]) -> PropertyReport {
    let mut checks = Vec::new();
    let g = problem.gamma();
    let sv = g.clone().singular_values();
    let ratio = sv.min() / sv.max().max(1e-300);
    checks.push(PropertyCheck {
        name: "gamma_invertible",
        passed: ratio > GAMMA_COND_TOL,
        value: ratio,
        tolerance: GAMMA_COND_TOL,
    });
    let mut ort = 0.0f64;
    let mut min_norm = f64::INFINITY;
    let mut sign_ok = true;
    let mut real_ok = true;
    let mut failures = 0usize;
    for &x in grid {
        match solve_pencil_at(problem, x) {
            Ok(pairs) => {
                for (a, pa) in pairs.iter().enumerate() {
                    for pb in pairs.iter().skip(a + 1) {
                        if (pa.beta.conj() - pb.beta).norm() > 1e-8 * (1.0 + pa.beta.norm()) {
                            ort = ort.max(ginner(&pa.phi, &pb.phi, g).norm());
                        }
                    }
                }
            }
            Err(_) => failures += 1,
        }
        for br in branches {
            match br.eval(x) {
                Ok(p) => {
                    // |N| of the Euclidean-unit vector
                    let nn = p.norm.abs() / p.phi.norm_squared();
                    min_norm = min_norm.min(nn);
                    sign_ok &= p.norm.signum() == br.norm_sign;
                }
                Err(_) => {
                    real_ok = false;
                }
            }
        }
    }
    checks.push(PropertyCheck {
        name: "gamma_orthogonality",
        passed: ort <= 1e-10 && failures == 0,
        value: ort,
        tolerance: 1e-10,
    });
    checks.push(PropertyCheck {
        name: "norm_nonvanishing",
        passed: min_norm >= 1e-8,
        value: min_norm,
        tolerance: 1e-8,
    });
    checks.push(PropertyCheck {
        name: "norm_sign_constant",
        passed: sign_ok,
        value: if sign_ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });
    checks.push(PropertyCheck {
        name: "beta_real",
        passed: real_ok,
        value: if real_ok { 0.0 } else { 1.0 },
        tolerance: 0.0,
    });
    let solv = solvability_residual(branches, problem);
    checks.push(PropertyCheck {
        name: "solvability",
        passed: solv.is_some_and(|r| r <= 1e-8),
        value: solv.unwrap_or(f64::INFINITY),
        tolerance: 1e-8,
    });
    PropertyReport {
        checks,
        sign_product: branches[0].norm_sign * branches[1].norm_sign,
    }
}

/// Relative residual of a least-squares solve of `(K − β₀Γ)u = f` at the
/// sample of smallest gap, with `f` orthogonal to both crossing vectors.
fn solvability_residual(branches: &[EigenBranch; 2], problem: &PencilProblem) -> Option<f64> {
    let s1 = branches[0].samples();
    let s2 = branches[1].samples();
    let k = (0..s1.len()).min_by(|&a, &b| {
        (s1[a].beta - s2[a].beta)
            .abs()
            .total_cmp(&(s1[b].beta - s2[b].beta).abs())
    })?;
    let x = s1[k].x;
    let beta0 = 0.5 * (s1[k].beta + s2[k].beta);
    let n = problem.dim();
    let m = problem.k(x) - problem.gamma() * c(beta0, 0.0);
    let mut f = DVector::from_fn(n, |i, _| c(1.0 + 0.5 * i as f64, 0.3 - 0.2 * i as f64));
    let q = orthonormalize(DMatrix::from_columns(&[s1[k].phi.clone(), s2[k].phi.clone()]));
    for j in 0..2 {
        let qj = q.column(j).into_owned();
        let proj = qj.dotc(&f);
        f -= qj * proj;
    }
    if n <= 2 {
        return Some(0.0);
    }
    let svd = m.clone().svd(true, true);
    let tol = 1e-8 * svd.singular_values.max();
    let u = svd.solve(&f, tol).ok()?;
    Some((&m * u - &f).norm() / f.norm().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[(f64, f64)]]) -> CMat {
        let n = rows.len();
        CMat::from_fn(n, rows[0].len(), |i, j| c(rows[i][j].0, rows[i][j].1))
    }

    fn sigma_x() -> CMat {
        cm(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]])
    }

    fn diag_problem() -> PencilProblem {
        PencilProblem::new(
            2,
            |x| cm(&[&[(-x, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (x, 0.0)]]),
            |_| CMat::zeros(2, 2),
            CMat::identity(2, 2),
            (-1.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn gamma_inner_examples() {
        let g = sigma_x();
        let u = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(gamma_inner(&u, &u, &g).unwrap(), c(0.0, 0.0));
        let s = 1.0 / 2f64.sqrt();
        let v = CVec::from_vec(vec![c(s, 0.0), c(-s, 0.0)]);
        assert!((gamma_inner(&v, &v, &g).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        let e2 = CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(gamma_inner(&u, &e2, &CMat::identity(2, 2)).unwrap(), c(0.0, 0.0));
        let short = CVec::from_vec(vec![c(1.0, 0.0)]);
        assert!(gamma_inner(&short, &u, &g).is_err());
    }

    #[test]
    fn gamma_inner_is_hermitian_form() {
        let g = cm(&[&[(2.0, 0.0), (0.5, -1.0)], &[(0.5, 1.0), (-1.0, 0.0)]]);
        let u = CVec::from_vec(vec![c(0.3, 1.1), c(-0.7, 0.2)]);
        let v = CVec::from_vec(vec![c(1.3, -0.4), c(0.1, 0.9)]);
        let a = gamma_inner(&u, &v, &g).unwrap();
        let b = gamma_inner(&v, &u, &g).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        assert!(gamma_inner(&u, &u, &g).unwrap().im.abs() < 1e-15);
    }

    #[test]
    fn solve_diagonal() {
        let p = PencilProblem::new(
            2,
            |_| cm(&[&[(2.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (3.0, 0.0)]]),
            |_| CMat::zeros(2, 2),
            CMat::identity(2, 2),
            (0.0, 1.0),
        )
        .unwrap();
        let pairs = solve_pencil_at(&p, 0.5).unwrap();
        assert!((pairs[0].beta - c(2.0, 0.0)).norm() < 1e-14);
        assert!((pairs[1].beta - c(3.0, 0.0)).norm() < 1e-14);
        assert!((pairs[0].phi[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((pairs[1].phi[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(pairs.iter().all(|q| q.real && (q.norm - c(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn solve_scalar_k_with_flip_gamma() {
        let a = 0.7;
        let p = PencilProblem::new(2, move |_| CMat::identity(2, 2) * c(a, 0.0), |_| CMat::zeros(2, 2), sigma_x(), (0.0, 1.0)).unwrap();
        let pairs = solve_pencil_at(&p, 0.1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((pairs[0].beta.re + a).abs() < 1e-14);
        assert!((pairs[1].beta.re - a).abs() < 1e-14);
        assert!((pairs[0].phi[0].re - s).abs() < 1e-14 && (pairs[0].phi[1].re + s).abs() < 1e-14);
        assert!((pairs[0].norm.re + 1.0).abs() < 1e-14);
        assert!((pairs[1].norm.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_flip_k() {
        let p = PencilProblem::new(2, |_| sigma_x(), |_| CMat::zeros(2, 2), CMat::identity(2, 2), (0.0, 1.0)).unwrap();
        let pairs = solve_pencil_at(&p, 0.0).unwrap();
        assert!((pairs[0].beta.re + 1.0).abs() < 1e-14);
        assert!((pairs[1].beta.re - 1.0).abs() < 1e-14);
        assert!(pairs[0].phi.dotc(&pairs[1].phi).norm() < 1e-14);
    }

    #[test]
    fn exact_crossing_is_split_by_derivative() {
        // U†diag(−x, x)U at x = 0 is zero; the split must follow U's columns
        let th = 0.4f64;
        let u = cm(&[&[(th.cos(), 0.0), (-th.sin(), 0.0)], &[(th.sin(), 0.0), (th.cos(), 0.0)]]);
        let uu = u.clone();
        let p = PencilProblem::new(
            2,
            move |x| uu.adjoint() * cm(&[&[(-x, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (x, 0.0)]]) * &uu,
            |_| CMat::zeros(2, 2),
            CMat::identity(2, 2),
            (-1.0, 1.0),
        )
        .unwrap();
        let pairs = solve_pencil_at(&p, 0.0).unwrap();
        assert_eq!(pairs.len(), 2);
        let col0 = u.adjoint().column(0).into_owned();
        let overl = pairs.iter().map(|q| euclidean_overlap(&q.phi, &col0)).fold(0.0, f64::max);
        assert!(overl > 1.0 - 1e-12);
    }

    #[test]
    fn jordan_block_detected() {
        // β² = x: defective at x = 0
        let p = PencilProblem::new(
            2,
            |x| cm(&[&[(x, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]),
            |_| CMat::zeros(2, 2),
            sigma_x(),
            (-1.0, 1.0),
        )
        .unwrap();
        assert!(matches!(solve_pencil_at(&p, 0.0), Err(Error::JordanBlock { .. })));
        let grid = uniform_grid((-1.0, 1.0), 41);
        let r = smooth_branches(&p, &grid, &BranchOptions::default());
        assert!(matches!(r, Err(Error::JordanBlock { .. })), "{r:?}");
    }

    #[test]
    fn rejects_bad_problems() {
        let nonherm = PencilProblem::new(
            2,
            |_| cm(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]),
            |_| CMat::zeros(2, 2),
            CMat::identity(2, 2),
            (0.0, 1.0),
        );
        assert!(matches!(nonherm, Err(Error::NotHermitian { which: "K", .. })));
        let singular = PencilProblem::new(
            2,
            |_| CMat::zeros(2, 2),
            |_| CMat::zeros(2, 2),
            cm(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1e-13, 0.0)]]),
            (0.0, 1.0),
        );
        assert!(matches!(singular, Err(Error::SingularGamma { .. })));
        let kink = PencilProblem::new(
            2,
            |x| cm(&[&[(x.abs(), 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]),
            |_| CMat::zeros(2, 2),
            CMat::identity(2, 2),
            (-1.0, 1.0),
        );
        assert!(matches!(kink, Err(Error::NotSmooth(_))), "{kink:?}");
    }

    #[test]
    fn diagonal_branches() {
        let p = diag_problem();
        let grid = uniform_grid((-1.0, 1.0), 41);
        let [b1, b2] = smooth_branches(&p, &grid, &BranchOptions::default()).unwrap();
        for &x in &[-0.9, -0.31, 0.0, 0.013, 0.77] {
            assert!((b1.beta(x).unwrap() + x).abs() < 1e-13);
            assert!((b2.beta(x).unwrap() - x).abs() < 1e-13);
        }
        let phi = b1.phi(0.5).unwrap();
        assert!((phi[0] - c(1.0, 0.0)).norm() < 1e-13);
        let m = matrix_elements(&[b1, b2], &p, 0.25, None).unwrap();
        assert!((m.kp[0][0].re + 1.0).abs() < 1e-9 && (m.kp[1][1].re - 1.0).abs() < 1e-9);
        assert!(m.kp[0][1].norm() < 1e-12);
        assert!(m.consistent());
    }

    #[test]
    fn regauge_leaves_invariants() {
        let p = diag_problem();
        let grid = uniform_grid((-1.0, 1.0), 21);
        let [b1, _] = smooth_branches(&p, &grid, &BranchOptions::default()).unwrap();
        let twisted = b1.clone().with_regauge(|x| x);
        let x = 0.3;
        let h = b1.default_fd_step();
        let a = b1.berry_integrand(x, h).unwrap();
        let b = twisted.berry_integrand(x, h).unwrap();
        assert!((b - a - 1.0).abs() < 1e-8);
        assert_eq!(b1.beta(x).unwrap(), twisted.beta(x).unwrap());
        assert!((twisted.norm(x).unwrap() - b1.norm(x).unwrap()).abs() < 1e-12);
    }
}
