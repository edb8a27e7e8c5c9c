//! Builtin pencil problems.
//!
//! * `graphene`: `K = (E − U(x))I₂`, `Γ = σ_x`, `B = [[0, −ip], [ip, 0]]`
//!   (massless Dirac electron on a potential step; real turning points).
//! * `lz`: `K = diag(−Qx, Qx)`, `B = [[0, c], [c, 0]]`, `Γ = I` (Landau–Zener).
//! * `wave`: two acoustic waveguide modes with squared modal wavenumbers
//!   `λ₁(x)`, `λ₂(x)`, coupled by `g`; state `(u, −iħu′)`.
//! * `schrodinger`: the stationary Schrödinger system, a Jordan-block case
//!   that the analysis must reject.
//! * polynomial matrices and Γ-unitary rotations of diagonal pencils.

use crate::pencil::{BranchSelection, PencilProblem};
use crate::{c, CMat, Error, Result, C64};
use std::sync::Arc;

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<C64>);

impl Poly {
    pub fn real(coeffs: &[f64]) -> Self {
        Poly(coeffs.iter().map(|&a| c(a, 0.0)).collect())
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.0.iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|a| a.norm() == 0.0)
    }
}

/// Square matrix of polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    pub entries: Vec<Vec<Poly>>,
}

impl PolyMatrix {
    pub fn new(entries: Vec<Vec<Poly>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("polynomial matrix must be square and non-empty".into()));
        }
        Ok(PolyMatrix { entries })
    }

    pub fn zeros(n: usize) -> Self {
        PolyMatrix {
            entries: vec![vec![Poly(vec![]); n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn eval(&self, x: f64) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |i, j| self.entries[i][j].eval(x))
    }

    pub fn derivative(&self) -> PolyMatrix {
        PolyMatrix {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(Poly::derivative).collect())
                .collect(),
        }
    }
}

/// A named builtin problem and the branch selection suited to it.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub problem: PencilProblem,
    pub selection: BranchSelection,
}

fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Graphene parameters; `u` is the potential polynomial.
#[derive(Debug, Clone)]
pub struct GrapheneParams {
    pub energy: f64,
    pub u: Vec<f64>,
    pub p: f64,
    pub domain: (f64, f64),
}

impl Default for GrapheneParams {
    fn default() -> Self {
        GrapheneParams {
            energy: 0.0,
            u: vec![0.0, -1.0],
            p: 1.0,
            domain: (-3.0, 3.0),
        }
    }
}

pub fn graphene(params: &GrapheneParams) -> Result<Model> {
    let u = Poly::real(&params.u);
    let du = u.derivative();
    let e = params.energy;
    let p = params.p;
    let k = move |x: f64| CMat::identity(2, 2) * (c(e, 0.0) - u.eval(x));
    let b = move |_x: f64| CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -p), c(0.0, p), c(0.0, 0.0)]);
    let problem = PencilProblem::new(2, k, b, sigma_x(), params.domain)?
        .with_k_derivative(move |x| CMat::identity(2, 2) * (-du.eval(x)));
    Ok(Model {
        name: "graphene".into(),
        problem,
        selection: BranchSelection::Auto,
    })
}

/// Landau–Zener parameters.
#[derive(Debug, Clone)]
pub struct LzParams {
    pub q: f64,
    pub coupling: f64,
    pub domain: (f64, f64),
}

impl Default for LzParams {
    fn default() -> Self {
        LzParams {
            q: 1.0,
            coupling: 1.0,
            domain: (-3.0, 3.0),
        }
    }
}

pub fn lz(params: &LzParams) -> Result<Model> {
    if !(params.q > 0.0) {
        return Err(Error::OutOfRange(format!("lz requires Q > 0, got {}", params.q)));
    }
    let q = params.q;
    let g = params.coupling;
    let k = move |x: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-q * x, 0.0), c(q * x, 0.0)]));
    let b = move |_x: f64| CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(g, 0.0), c(g, 0.0), c(0.0, 0.0)]);
    let problem = PencilProblem::new(2, k, b, CMat::identity(2, 2), params.domain)?
        .with_k_derivative(move |_| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-q, 0.0), c(q, 0.0)])));
    Ok(Model {
        name: "lz".into(),
        problem,
        selection: BranchSelection::Auto,
    })
}

/// Two-mode waveguide parameters. `lambda1`, `lambda2` are the squared
/// normalized modal wavenumbers `c₀²/c_m(x)²`; they must stay positive.
#[derive(Debug, Clone)]
pub struct WaveParams {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub coupling: f64,
    pub domain: (f64, f64),
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            lambda1: vec![1.0, -1.0],
            lambda2: vec![1.0, 1.0],
            coupling: 2f64.sqrt(),
            domain: (-0.8, 0.8),
        }
    }
}

/// `K = diag(λ₁, λ₂, 1, 1)`, `Γ = [[0, I], [I, 0]]`, `B = [[C, 0], [0, 0]]`
/// with `C = [[0, g], [g, 0]]`. Eigenvalues are `±√λ_m` with eigenvectors
/// `(e_m, βe_m)`; the forward pair crosses where `λ₁ = λ₂`.
pub fn wave(params: &WaveParams) -> Result<Model> {
    let l1 = Poly::real(&params.lambda1);
    let l2 = Poly::real(&params.lambda2);
    let (lo, hi) = params.domain;
    for i in 0..=64 {
        let x = lo + (hi - lo) * i as f64 / 64.0;
        if !(l1.eval(x).re > 0.0 && l2.eval(x).re > 0.0) {
            return Err(Error::OutOfRange(format!(
                "wave: modal profile must stay positive on the domain (fails at x = {x})"
            )));
        }
    }
    let (d1, d2) = (l1.derivative(), l2.derivative());
    let g = params.coupling;
    let k = move |x: f64| {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = l1.eval(x);
        m[(1, 1)] = l2.eval(x);
        m[(2, 2)] = c(1.0, 0.0);
        m[(3, 3)] = c(1.0, 0.0);
        m
    };
    let dk = move |x: f64| {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = d1.eval(x);
        m[(1, 1)] = d2.eval(x);
        m
    };
    let b = move |_x: f64| {
        let mut m = CMat::zeros(4, 4);
        m[(0, 1)] = c(g, 0.0);
        m[(1, 0)] = c(g, 0.0);
        m
    };
    let mut gamma = CMat::zeros(4, 4);
    for i in 0..2 {
        gamma[(i, i + 2)] = c(1.0, 0.0);
        gamma[(i + 2, i)] = c(1.0, 0.0);
    }
    let problem = PencilProblem::new(4, k, b, gamma, params.domain)?.with_k_derivative(dk);
    Ok(Model {
        name: "wave".into(),
        problem,
        selection: BranchSelection::Near(1.0),
    })
}

/// Stationary Schrödinger system `K = [[E − U(x), 0], [0, 1]]`, `Γ = σ_x`:
/// `β² = E − U`, defective where `E = U`.
pub fn schrodinger(energy: f64, u: &[f64], domain: (f64, f64)) -> Result<Model> {
    let u = Poly::real(u);
    let k = move |x: f64| CMat::from_row_slice(2, 2, &[c(energy, 0.0) - u.eval(x), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let problem = PencilProblem::new(2, k, |_| CMat::zeros(2, 2), sigma_x(), domain)?;
    Ok(Model {
        name: "schrodinger".into(),
        problem,
        selection: BranchSelection::Auto,
    })
}

/// Polynomial problem: `K`, `B` polynomial matrices, constant Γ.
pub fn polynomial(k: PolyMatrix, b: PolyMatrix, gamma: CMat, domain: (f64, f64)) -> Result<Model> {
    let n = k.dim();
    if b.dim() != n {
        return Err(Error::Dimension(format!("K is {n}x{n} but B is {0}x{0}", b.dim())));
    }
    let dk = k.derivative();
    let kk = k.clone();
    let problem = PencilProblem::new(n, move |x| kk.eval(x), move |x| b.eval(x), gamma, domain)?.with_k_derivative(move |x| dk.eval(x));
    Ok(Model {
        name: "polynomial".into(),
        problem,
        selection: BranchSelection::Auto,
    })
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut s = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        s += 1;
    }
    let m = a * c(scale, 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=20 {
        term = &term * &m / c(k as f64, 0.0);
        sum += &term;
        if term.iter().map(|z| z.norm()).sum::<f64>() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `x ↦ exp(xA)` for a fixed generator. A well-conditioned eigenbasis
/// `A = W Λ W⁻¹` (from the Schur form) reduces each evaluation to one scaled
/// product; otherwise every call falls back to [`expm`].
struct ExpFlow {
    generator: CMat,
    eigen: Option<(CMat, Vec<C64>, CMat)>,
}

impl ExpFlow {
    fn new(generator: CMat) -> Self {
        let eigen = Self::diagonalize(&generator);
        ExpFlow { generator, eigen }
    }

    fn diagonalize(a: &CMat) -> Option<(CMat, Vec<C64>, CMat)> {
        let n = a.nrows();
        let (q, t) = a.clone().schur().unpack();
        let lambda: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let scale = a.norm().max(1e-300);
        // eigenvectors of the triangular factor by back substitution
        let mut v = CMat::zeros(n, n);
        for k in 0..n {
            v[(k, k)] = c(1.0, 0.0);
            for i in (0..k).rev() {
                let gap = t[(i, i)] - lambda[k];
                if gap.norm() < 1e-8 * scale {
                    return None;
                }
                let s: C64 = (i + 1..=k).map(|j| t[(i, j)] * v[(j, k)]).sum();
                v[(i, k)] = -s / gap;
            }
        }
        let w = q * v;
        let winv = w.clone().try_inverse()?;
        if w.norm() * winv.norm() > 1e6 {
            return None;
        }
        Some((w, lambda, winv))
    }

    fn at(&self, x: f64) -> CMat {
        match &self.eigen {
            Some((w, lambda, winv)) => {
                let mut m = w.clone();
                for (j, l) in lambda.iter().enumerate() {
                    let e = (l * x).exp();
                    for i in 0..m.nrows() {
                        m[(i, j)] *= e;
                    }
                }
                m * winv
            }
            None => expm(&(&self.generator * c(x, 0.0))),
        }
    }
}

/// `K(x) = U(x)†D(x)U(x)` with `U(x) = exp(x·iΓH)` for a Hermitian `H` and a
/// Hermitian involution Γ (`Γ² = I`), so `U†ΓU = Γ` and the spectrum of
/// `K − βΓ` equals that of the diagonal `D − βΓ`. `B(x) = b0 + x·b1`.
pub fn gamma_rotated(
    d: Vec<Poly>,
    gamma: CMat,
    h: CMat,
    b0: CMat,
    b1: CMat,
    domain: (f64, f64),
) -> Result<Model> {
    let n = d.len();
    if gamma.nrows() != n || h.nrows() != n || b0.nrows() != n || b1.nrows() != n {
        return Err(Error::Dimension("gamma_rotated: inconsistent sizes".into()));
    }
    let gen = &gamma * &h * c(0.0, 1.0);
    let flow = Arc::new(ExpFlow::new(gen));
    let dd = Arc::new(d);
    let (f1, d1) = (flow.clone(), dd.clone());
    let k = move |x: f64| {
        let u = f1.at(x);
        let dm = CMat::from_fn(n, n, |i, j| if i == j { d1[i].eval(x) } else { c(0.0, 0.0) });
        u.adjoint() * dm * u
    };
    let (f2, d2) = (flow, dd);
    let dk = move |x: f64| {
        let u = f2.at(x);
        let du = &f2.generator * &u;
        let dm = CMat::from_fn(n, n, |i, j| if i == j { d2[i].eval(x) } else { c(0.0, 0.0) });
        let ddm = CMat::from_fn(n, n, |i, j| if i == j { d2[i].derivative().eval(x) } else { c(0.0, 0.0) });
        du.adjoint() * &dm * &u + u.adjoint() * ddm * &u + u.adjoint() * dm * du
    };
    let b = move |x: f64| &b0 + &b1 * c(x, 0.0);
    let problem = PencilProblem::new(n, k, b, gamma, domain)?.with_k_derivative(dk);
    Ok(Model {
        name: "rotated".into(),
        problem,
        selection: BranchSelection::Auto,
    })
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["graphene", "lz", "wave", "schrodinger"];

/// A builtin model with named real parameters overriding the defaults.
///
/// graphene: `E`, `p`, `U0`, `U1`, `U2` (potential coefficients), `x_lo`, `x_hi`.
/// lz: `Q`, `c`, `x_lo`, `x_hi`. wave: `g`, `a1`, `a2` (slopes of `λ₁`, `λ₂`
/// around 1), `x_lo`, `x_hi`. schrodinger: `E`, `U1`, `x_lo`, `x_hi`.
pub fn builtin(name: &str, params: &[(String, f64)]) -> Result<Model> {
    let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
    let allowed: &[&str] = match name {
        "graphene" => &["E", "p", "U0", "U1", "U2", "x_lo", "x_hi"],
        "lz" => &["Q", "c", "x_lo", "x_hi"],
        "wave" => &["g", "a1", "a2", "x_lo", "x_hi"],
        "schrodinger" => &["E", "U1", "x_lo", "x_hi"],
        _ => {
            return Err(Error::OutOfRange(format!(
                "unknown builtin model '{name}' (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::OutOfRange(format!("unknown parameter '{k}' for builtin '{name}'")));
    }
    match name {
        "graphene" => {
            let d = GrapheneParams::default();
            let mut u = vec![get("U0").unwrap_or(0.0), get("U1").unwrap_or(-1.0)];
            if let Some(u2) = get("U2") {
                u.push(u2);
            }
            graphene(&GrapheneParams {
                energy: get("E").unwrap_or(d.energy),
                u,
                p: get("p").unwrap_or(d.p),
                domain: (get("x_lo").unwrap_or(d.domain.0), get("x_hi").unwrap_or(d.domain.1)),
            })
        }
        "lz" => {
            let d = LzParams::default();
            lz(&LzParams {
                q: get("Q").unwrap_or(d.q),
                coupling: get("c").unwrap_or(d.coupling),
                domain: (get("x_lo").unwrap_or(d.domain.0), get("x_hi").unwrap_or(d.domain.1)),
            })
        }
        "wave" => {
            let d = WaveParams::default();
            wave(&WaveParams {
                lambda1: vec![1.0, -get("a1").unwrap_or(1.0)],
                lambda2: vec![1.0, get("a2").unwrap_or(1.0)],
                coupling: get("g").unwrap_or(d.coupling),
                domain: (get("x_lo").unwrap_or(d.domain.0), get("x_hi").unwrap_or(d.domain.1)),
            })
        }
        _ => schrodinger(
            get("E").unwrap_or(0.0),
            &[0.0, get("U1").unwrap_or(-1.0)],
            (get("x_lo").unwrap_or(-1.0), get("x_hi").unwrap_or(1.0)),
        ),
    }
}
