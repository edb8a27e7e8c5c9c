//! End-to-end analysis of a pencil problem: branches, crossing parameters,
//! structural checks and transition matrices.

use crate::adiabatic::{AdiabaticConfig, AdiabaticModes, ModeSpec, Side};
use crate::degeneracy::{extract_parameters, locate_degeneracy, DegeneracyData, Scenario};
use crate::models::Model;
use crate::oracle::{self, ConvergenceStudy, EmpiricalTransition, OracleOptions};
use crate::pencil::{
    matrix_elements, smooth_branches, uniform_grid, verify_pencil_properties, BranchOptions, BranchSelection,
    EigenBranch, MatrixElementTable, PencilProblem, PropertyReport,
};
use crate::transition::{self, check_T_properties, Convention, TPropertyReport, TransitionMatrix2, CLOSED_FORM_TOL};
use crate::{Error, Result, C64};

/// Settings of [`Analysis::new`].
#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Points of the uniform branch-tracking grid.
    pub grid_points: usize,
    pub branch: BranchOptions,
    /// Finite-difference step for `K′` when it is not analytic.
    pub fd_step: Option<f64>,
    pub adiabatic: AdiabaticConfig,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            grid_points: 121,
            branch: BranchOptions::default(),
            fd_step: None,
            adiabatic: AdiabaticConfig::default(),
        }
    }
}

/// Everything that does not depend on `ħ`.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub name: String,
    pub problem: PencilProblem,
    pub branches: [EigenBranch; 2],
    pub data: DegeneracyData,
    pub properties: PropertyReport,
    /// Matrix elements and derivative identities at `x₀`.
    pub elements: MatrixElementTable,
    pub options: AnalysisOptions,
}

impl Analysis {
    /// Tracks the crossing pair, locates `x₀` and extracts its parameters.
    pub fn new(model: &Model, options: AnalysisOptions) -> Result<Self> {
        Self::from_problem(&model.name, &model.problem, model.selection, options)
    }

    pub fn from_problem(name: &str, problem: &PencilProblem, selection: BranchSelection, options: AnalysisOptions) -> Result<Self> {
        if options.grid_points < 8 {
            return Err(Error::OutOfRange(format!("grid_points = {} is below 8", options.grid_points)));
        }
        let grid = uniform_grid(problem.domain(), options.grid_points);
        let branch = BranchOptions { selection, ..options.branch };
        let branches = smooth_branches(problem, &grid, &branch)?;
        let x0 = locate_degeneracy(&branches, problem.domain())?;
        let data = extract_parameters(&branches, problem, x0, options.fd_step)?;
        let properties = verify_pencil_properties(&branches, problem, &grid);
        let elements = matrix_elements(&branches, problem, x0, None)?;
        Ok(Analysis {
            name: name.to_string(),
            problem: problem.clone(),
            branches,
            data,
            properties,
            elements,
            options,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.data.scenario()
    }

    /// Degeneracy points `x₀ + √ħ κ±`.
    pub fn kappa_x(&self, hbar: f64) -> (C64, C64) {
        self.data.kappa_x(hbar)
    }

    /// `sgn N₁`, `sgn N₂`.
    pub fn norm_signs(&self) -> (f64, f64) {
        (self.data.n1.signum(), self.data.n2.signum())
    }

    /// Adiabatic modes at one `ħ`.
    pub fn modes(&self, hbar: f64) -> Result<AdiabaticModes> {
        AdiabaticModes::new(self.problem.clone(), self.branches.clone(), self.data.clone(), hbar, self.options.adiabatic)
    }

    /// The canonical matrix `T(ν, w)`.
    #[allow(non_snake_case)]
    pub fn canonical_T(&self) -> Result<TransitionMatrix2> {
        transition::canonical_T(self.data.nu, self.data.w)
    }

    /// The canonical matrix with the left modes renumbered by phase velocity.
    #[allow(non_snake_case)]
    pub fn renumbered_T(&self) -> Result<TransitionMatrix2> {
        transition::renumber_T(&self.canonical_T()?)
    }

    /// The matrix between general modes normalized at `x_ref = (left, right)`.
    #[allow(non_snake_case)]
    pub fn general_T(&self, hbar: f64, x_ref: (f64, f64)) -> Result<TransitionMatrix2> {
        let modes = self.modes(hbar)?;
        let n = |j: usize, side: Side, x: f64| modes.mode_norm_factor(&ModeSpec::general(j, side, x));
        let t = self.canonical_T()?;
        transition::general_T(
            &t,
            n(1, Side::Left, x_ref.0)?,
            n(2, Side::Left, x_ref.0)?,
            n(1, Side::Right, x_ref.1)?,
            n(2, Side::Right, x_ref.1)?,
        )
    }

    /// `(R, T)` for real turning points, `None` otherwise.
    pub fn reflection_transmission(&self) -> Result<Option<(C64, C64)>> {
        if self.data.w != -1 {
            return Ok(None);
        }
        transition::reflection_transmission(&self.canonical_T()?).map(Some)
    }

    /// Structural checks of a matrix against this problem's flux signs, at the
    /// closed-form tolerance without `ħ` and at `empirical_tolerance(ħ)` with
    /// it. Renumbered matrices are checked after undoing the renumbering.
    pub fn check(&self, t: &TransitionMatrix2, hbar: Option<f64>) -> TPropertyReport {
        let (s1, s2) = self.norm_signs();
        let tol = hbar.map_or(CLOSED_FORM_TOL, transition::empirical_tolerance);
        let t = if t.convention == Convention::Renumbered {
            let m = t.t;
            TransitionMatrix2::new([[m[0][1], -m[0][0]], [m[1][1], -m[1][0]]], Convention::Canonical, t.nu, t.w)
        } else {
            *t
        };
        check_T_properties(&t, s1, s2, tol)
    }

    /// Empirical matrix from the direct solver at one `ħ`.
    #[allow(non_snake_case)]
    pub fn empirical_T(&self, hbar: f64, opts: &OracleOptions) -> Result<EmpiricalTransition> {
        oracle::extract_empirical_T(&self.modes(hbar)?, opts)
    }

    /// Empirical matrices over several `ħ`, compared with the canonical one.
    pub fn convergence_study(&self, hbars: &[f64], opts: &OracleOptions) -> Result<ConvergenceStudy> {
        oracle::convergence_study(|h| self.modes(h), hbars, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, graphene, lz, GrapheneParams, LzParams};
    use std::f64::consts::PI;

    #[test]
    fn graphene_summary() {
        let a = Analysis::new(&graphene(&GrapheneParams::default()).unwrap(), AnalysisOptions::default()).unwrap();
        assert_eq!(a.scenario(), Scenario::RealTurningPoints);
        assert!(a.data.x0.abs() < 1e-10);
        assert!((a.data.nu - C64::new(0.0, -0.5)).norm() < 1e-10);
        let (kp, km) = a.kappa_x(1e-2);
        assert!((kp - C64::new(0.1, 0.0)).norm() < 1e-9 && (km - C64::new(-0.1, 0.0)).norm() < 1e-9);
        let (_, tr) = a.reflection_transmission().unwrap().unwrap();
        assert!((tr.norm() - (-PI / 2.0).exp()).abs() < 1e-12);
        assert!(a.properties.all_passed());
        assert!(a.elements.consistent());
        assert!(a.check(&a.canonical_T().unwrap(), None).all_passed());
    }

    #[test]
    fn lz_summary() {
        let a = Analysis::new(&lz(&LzParams::default()).unwrap(), AnalysisOptions::default()).unwrap();
        assert_eq!(a.scenario(), Scenario::AvoidedCrossing);
        assert!(a.reflection_transmission().unwrap().is_none());
        let (kp, km) = a.kappa_x(1e-2);
        assert!(kp.im > 0.0 && (kp - km.conj()).norm() < 1e-12);
        let t = a.canonical_T().unwrap();
        assert!((t.t[1][0].norm_sqr() - (1.0 - (-PI).exp())).abs() < 1e-12);
        let r = a.renumbered_T().unwrap();
        assert_eq!(r.convention, Convention::Renumbered);
        assert!(a.check(&r, None).all_passed());
    }

    #[test]
    fn general_matrix_magnitudes() {
        let a = Analysis::new(&lz(&LzParams::default()).unwrap(), AnalysisOptions::default()).unwrap();
        let g = a.general_T(1e-3, (-1.0, 1.0)).unwrap();
        let t = a.canonical_T().unwrap();
        for j in 0..2 {
            for k in 0..2 {
                // |N_j| = 1 at both reference points, so only phases change
                assert!((g.t[j][k].norm() - t.t[j][k].norm()).abs() < 1e-9);
            }
        }
        assert!(a.check(&g, Some(1e-3)).all_passed());
    }

    #[test]
    fn jordan_block_is_rejected() {
        let m = builtin("schrodinger", &[]).unwrap();
        let e = Analysis::new(&m, AnalysisOptions::default()).unwrap_err();
        assert!(matches!(e, Error::JordanBlock { .. }), "{e}");
    }
}
