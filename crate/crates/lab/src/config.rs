//! Study configuration: one JSON file per experiment, no environment
//! variables. The shipped `configs/baseline.json` is the reference example.

use crate::asymptotics::StudyParams;
use crate::error::{LabError, Result};
use emt_core::curve::CurveSpec;
use emt_core::domain::Domain;
use emt_core::moment::Convention;
use emt_core::tensor::{SymMat2, Tensor4, TensorSpec};
use emt_core::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: Domain,
    pub curve: CurveSpec,
    pub background: TensorSpec,
    pub inclusion: TensorSpec,
    pub traction: TractionSpec,
    pub eval_points: Vec<Vec2>,
    /// Strictly decreasing tube half-widths.
    pub eps: Vec<f64>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub quadrature: QuadConfig,
    /// Endpoint-trim exponent of the reduced tube.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Number of smallest ε entering the residual slope fit.
    #[serde(default = "default_fit_points")]
    pub fit_points: usize,
    /// Constant K of the curve admissibility checks.
    #[serde(default = "default_k")]
    pub admissibility_k: f64,
    /// Candidate sign convention judged by the sign-discrimination gate.
    #[serde(default = "default_convention")]
    pub convention: Convention,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub gates: Gates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TractionSpec {
    /// `ψ = (C0 E) ν` for a constant strain `E`.
    ConstantStrain { strain: SymMat2 },
    /// `ψ = Σ ν` for a constant stress `Σ`.
    ConstantStress { stress: SymMat2 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_order")]
    pub order: u8,
    #[serde(default = "default_focus_factor")]
    pub focus_factor: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { h: default_h(), order: default_order(), focus_factor: default_focus_factor() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    #[serde(default = "default_quad_order")]
    pub order: usize,
    #[serde(default = "default_quad_panels")]
    pub panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { order: default_quad_order(), panels: default_quad_panels() }
    }
}

/// Numerical pass thresholds of the study summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum fitted residual slope for the candidate convention.
    #[serde(default = "default_resid_slope")]
    pub residual_slope: f64,
    #[serde(default = "default_h1_low")]
    pub h1_low: f64,
    #[serde(default = "default_h1_high")]
    pub h1_high: f64,
    #[serde(default = "default_l2_slope")]
    pub l2_slope: f64,
    /// Relative tolerance of the representation identity check.
    #[serde(default = "default_representation")]
    pub representation: f64,
    /// Relative Frobenius tolerance of the cell moment check.
    #[serde(default = "default_cell_moment")]
    pub cell_moment: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            residual_slope: default_resid_slope(),
            h1_low: default_h1_low(),
            h1_high: default_h1_high(),
            l2_slope: default_l2_slope(),
            representation: default_representation(),
            cell_moment: default_cell_moment(),
        }
    }
}

/// Which threshold checks decide the convergence exit code. Disabled checks
/// are still computed and reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gates {
    #[serde(default = "yes")]
    pub residual_slope: bool,
    #[serde(default = "yes")]
    pub sign_discrimination: bool,
    /// The H¹ window presumes a loading that saturates the interface strain
    /// jump; off by default, enabled in rate-study configs.
    #[serde(default = "no")]
    pub h1_window: bool,
    #[serde(default = "yes")]
    pub l2_slope: bool,
    #[serde(default = "yes")]
    pub representation: bool,
    /// The cell estimate carries a physical finite-ε deficit scaling with
    /// contrast × ε/L; off by default, reported always.
    #[serde(default = "no")]
    pub cell_moment: bool,
    #[serde(default = "yes")]
    pub quadrature_stability: bool,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            residual_slope: yes(),
            sign_discrimination: yes(),
            h1_window: no(),
            l2_slope: yes(),
            representation: yes(),
            cell_moment: no(),
            quadrature_stability: yes(),
        }
    }
}

fn yes() -> bool {
    true
}
fn no() -> bool {
    false
}
fn default_beta() -> f64 {
    0.45
}
fn default_fit_points() -> usize {
    4
}
fn default_k() -> f64 {
    10.0
}
fn default_convention() -> Convention {
    Convention::Expansion
}
fn default_h() -> f64 {
    0.07
}
fn default_order() -> u8 {
    2
}
fn default_focus_factor() -> f64 {
    4.0
}
fn default_quad_order() -> usize {
    6
}
fn default_quad_panels() -> usize {
    24
}
fn default_resid_slope() -> f64 {
    1.2
}
fn default_h1_low() -> f64 {
    0.4
}
fn default_h1_high() -> f64 {
    0.6
}
fn default_l2_slope() -> f64 {
    0.8
}
fn default_representation() -> f64 {
    0.02
}
fn default_cell_moment() -> f64 {
    0.05
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<StudyConfig> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("config parse error: {e}")))
    }

    pub fn traction_strain(&self, background: &Tensor4) -> Result<SymMat2> {
        match &self.traction {
            TractionSpec::ConstantStrain { strain } => Ok(*strain),
            TractionSpec::ConstantStress { stress } => {
                // E with (C0 E) = Σ
                let inv = background.invert()?;
                Ok(inv.contract(*stress))
            }
        }
    }

    /// Validates and resolves into study parameters. Mirrors the geometry
    /// admissibility checks, tensor convexity, and ε-list invariants.
    pub fn resolve(&self, jobs: usize, quad_order_override: Option<usize>) -> Result<StudyParams> {
        let background = self.background.to_tensor();
        let inclusion = self.inclusion.to_tensor();
        for (name, t) in [("background", &background), ("inclusion", &inclusion)] {
            let sym = t.symmetry_residual();
            if sym > 1e-12 {
                return Err(LabError::Config(format!("{name} tensor breaks major symmetry ({sym:e})")));
            }
            let margin = t.convexity_margin();
            if margin <= 0.0 {
                return Err(LabError::Config(format!(
                    "{name} tensor is not strongly convex (margin {margin:e})"
                )));
            }
        }
        let report = self.curve.validate(&self.domain, self.admissibility_k);
        if !report.all_ok() {
            return Err(LabError::Config(format!(
                "curve fails admissibility checks:\n{}",
                report.render()
            )));
        }
        // eval points must sit on the boundary
        let mut eval_points = Vec::new();
        for &p in &self.eval_points {
            let d = self.domain.boundary_distance(p);
            if d.abs() > 1e-6 {
                return Err(LabError::Config(format!(
                    "eval point ({}, {}) is {:.2e} away from the boundary",
                    p.x, p.y, d.abs()
                )));
            }
            eval_points.push(p);
        }
        let traction_strain = self.traction_strain(&background)?;
        Ok(StudyParams {
            domain: self.domain.clone(),
            curve: self.curve.clone(),
            background,
            inclusion,
            traction_strain,
            eval_points,
            eps_list: self.eps.clone(),
            h: self.mesh.h,
            focus_factor: self.mesh.focus_factor,
            order: self.mesh.order,
            quad_order: quad_order_override.unwrap_or(self.quadrature.order),
            quad_panels: self.quadrature.panels,
            beta: self.beta,
            fit_points: self.fit_points,
            jobs: jobs.max(1),
            seed: self.seed,
        })
    }
}
