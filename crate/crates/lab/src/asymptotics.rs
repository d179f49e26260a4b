//! First-order boundary corrections for thin inclusions and the ε-sweep
//! harness that verifies them at desk scale.
//!
//! For a tube of half-width ε around a spine σ0, the boundary perturbation
//! admits the first-order form
//!
//! ```text
//! (u_ε − U)(y) = 2ε ∫_{σ0} T(x) ∇̂U(x) : ∇̂G(x, y) dσ(x) + o(ε),
//! ```
//!
//! with `T` the Expansion-convention moment tensor and `G` the
//! representation kernel (see `fem::representation_kernel`). The sweep
//! solves the perturbed and unperturbed problems across a decreasing ε list,
//! compares against the quadrature of the right-hand side under both sign
//! conventions, and fits log-log slopes: the residual slope discriminates
//! the conventions, and the energy-norm slopes check the a-priori rates
//! (H¹ like ε^{1/2}, L² like ε^{1−}).

use crate::error::{LabError, Result};
use crate::fem::{
    energy_norms, representation_kernel, ElasticSystem, FeSpace, FemField, PhaseField, Traction,
};
use crate::mesh::{generate_mesh, MeshSpec, Region};
use emt_core::curve::{CurveNode, CurveSpec, TubeRegion};
use emt_core::domain::Domain;
use emt_core::moment::{moment_tensor, Convention, MomentTensor};
use emt_core::tensor::{SymMat2, Tensor4};
use emt_core::Vec2;

/// Relative change allowed when the quadrature order is doubled.
pub const QUAD_STABILITY_TOL: f64 = 1e-3;

/// Weighted point masses carrying moment tensors, for the general
/// (measure-form) correction.
#[derive(Debug, Clone)]
pub struct MeasurePoints {
    points: Vec<(Vec2, f64, MomentTensor)>,
    normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Weights sum to one (a probability measure).
    Probability,
    /// Weights sum to the curve length (arclength measure).
    Arclength,
}

impl MeasurePoints {
    pub fn new(points: Vec<(Vec2, f64, MomentTensor)>, normalization: Normalization) -> Result<Self> {
        if points.iter().any(|(_, w, _)| *w <= 0.0) {
            return Err(LabError::Config("measure weights must be positive".into()));
        }
        Ok(MeasurePoints { points, normalization })
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|(_, w, _)| w).sum()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Probability measure on quadrature nodes of a curve, all carrying the
    /// same moment tensor.
    pub fn from_curve_nodes(nodes: &[CurveNode], moment: MomentTensor) -> Result<Self> {
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        let points = nodes
            .iter()
            .map(|n| (n.point, n.weight / total, moment))
            .collect();
        MeasurePoints::new(points, Normalization::Probability)
    }
}

/// Inputs evaluated at curve quadrature nodes.
pub struct CurveFields<'a> {
    /// Expansion-convention moment tensor at each node.
    pub moment: &'a dyn Fn(&CurveNode) -> Result<Tensor4>,
    /// Background strain at each node.
    pub grad_u: &'a dyn Fn(&CurveNode) -> Result<SymMat2>,
    /// Representation-kernel strain per displacement component.
    pub grad_kernel: &'a dyn Fn(&CurveNode) -> Result<[SymMat2; 2]>,
}

/// `2ε Σ_q w_q [T(x_q) ∇̂U(x_q)] : ∇̂G_k(x_q)` over given nodes.
pub fn first_order_correction(nodes: &[CurveNode], fields: &CurveFields, eps: f64) -> Result<Vec2> {
    let mut acc = Vec2::ZERO;
    for node in nodes {
        let t = (fields.moment)(node)?;
        let gu = (fields.grad_u)(node)?;
        let gk = (fields.grad_kernel)(node)?;
        let tgu = t.contract(gu);
        acc += Vec2::new(tgu.ddot(gk[0]), tgu.ddot(gk[1])) * node.weight;
    }
    Ok(acc * (2.0 * eps))
}

/// [`first_order_correction`] with a built-in stability check: the result at
/// doubled Gauss order must agree to [`QUAD_STABILITY_TOL`] relative.
pub fn first_order_correction_checked(
    curve: &CurveSpec,
    fields: &CurveFields,
    eps: f64,
    trim: f64,
    order: usize,
    panels: usize,
) -> Result<(Vec2, bool)> {
    let nodes = curve.quadrature_nodes(order, panels, trim)?;
    let coarse = first_order_correction(&nodes, fields, eps)?;
    let nodes2 = curve.quadrature_nodes(2 * order, panels, trim)?;
    let fine = first_order_correction(&nodes2, fields, eps)?;
    let stable = (coarse - fine).norm() <= QUAD_STABILITY_TOL * fine.norm() + 1e-14;
    Ok((fine, stable))
}

/// Measure-form correction `|ω| Σ w_k (M_k ∇̂U(x_k)) : ∇̂G(x_k)`.
/// The measure must be probability-normalized.
pub fn general_correction(
    measure: &MeasurePoints,
    volume: f64,
    grad_u: &dyn Fn(Vec2) -> Result<SymMat2>,
    grad_kernel: &dyn Fn(Vec2) -> Result<[SymMat2; 2]>,
) -> Result<Vec2> {
    if measure.normalization != Normalization::Probability {
        return Err(LabError::Config("general correction expects a probability measure".into()));
    }
    let total = measure.total_weight();
    if (total - 1.0).abs() > 1e-10 {
        return Err(LabError::Config(format!("measure weights sum to {total}, expected 1")));
    }
    let mut acc = Vec2::ZERO;
    for (x, w, m) in &measure.points {
        let t = m.expansion_tensor();
        let tgu = t.contract(grad_u(*x)?);
        let gk = grad_kernel(*x)?;
        acc += Vec2::new(tgu.ddot(gk[0]), tgu.ddot(gk[1])) * *w;
    }
    Ok(acc * volume)
}

/// Numerical moment-tensor estimate from the three cell problems: solves
/// `v_ε^{ij}`, averages `(C1−C0) ∇̂v_ε^{ij}` over the inclusion-tagged
/// elements with footpoint in the trimmed arclength range, and assembles the
/// columns. Returns the Expansion-convention estimate.
pub fn cell_average_moment(
    system_eps: &ElasticSystem,
    c0: &Tensor4,
    tube: &TubeRegion,
) -> Result<Tensor4> {
    let c1 = system_eps.phases.inclusion;
    let contrast = c1 - system_eps.phases.background;
    let trim = tube.trim();
    let length = tube.curve().length();
    let space = &system_eps.space;
    let mut columns = [[0.0f64; 3]; 3];
    for (col, (i, j)) in [(0usize, 0usize), (1, 1), (0, 1)].into_iter().enumerate() {
        let v = system_eps.solve_cell(c0, i, j)?;
        let mut acc = SymMat2::ZERO;
        let mut area_sum = 0.0;
        for e in 0..space.elems.len() {
            if space.mesh.regions[e] != Region::Inclusion {
                continue;
            }
            let t = &space.mesh.triangles[e];
            let centroid =
                (space.mesh.nodes[t[0]] + space.mesh.nodes[t[1]] + space.mesh.nodes[t[2]]) * (1.0 / 3.0);
            let Some(tc) = tube.curve().signed_tube_coordinates(centroid) else {
                continue;
            };
            if tc.s < trim || tc.s > length - trim {
                continue;
            }
            let area = 0.5
                * (space.mesh.nodes[t[1]] - space.mesh.nodes[t[0]])
                    .cross(space.mesh.nodes[t[2]] - space.mesh.nodes[t[0]]);
            let strain = v.sym_gradient(centroid)?;
            acc = acc + contrast.contract(strain) * area;
            area_sum += area;
        }
        if area_sum <= 0.0 {
            return Err(LabError::Mesh("no tagged elements in the trimmed tube".into()));
        }
        let avg = acc * (1.0 / area_sum);
        let scale = if col == 2 { std::f64::consts::SQRT_2 } else { 1.0 };
        let v3 = avg.to_mandel();
        for r in 0..3 {
            columns[r][col] = scale * v3[r];
        }
    }
    Ok(Tensor4::from_mandel(columns))
}

/// Least-squares log-log fit.
#[derive(Debug, Clone, Copy)]
#[derive(serde::Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space (flags preasymptotic data).
    pub residual: f64,
}

/// Fits `ln y = slope ln x + intercept`. `None` when any value is
/// non-positive (degenerate data, e.g. zero contrast).
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if ys.iter().any(|&v| v <= 0.0) || xs.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(ly.iter())
        .map(|(x, y)| {
            let p = slope * x + intercept;
            (y - p) * (y - p)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Some(SlopeFit { slope, intercept, residual })
}

/// Study definition (resolved, validated form).
pub struct StudyParams {
    pub domain: Domain,
    pub curve: CurveSpec,
    pub background: Tensor4,
    pub inclusion: Tensor4,
    /// Traction is `(C0 E) ν` for this constant strain.
    pub traction_strain: SymMat2,
    pub eval_points: Vec<Vec2>,
    /// Strictly decreasing tube half-widths.
    pub eps_list: Vec<f64>,
    pub h: f64,
    pub focus_factor: f64,
    pub order: u8,
    pub quad_order: usize,
    pub quad_panels: usize,
    pub beta: f64,
    /// Number of smallest ε used in the residual slope fit.
    pub fit_points: usize,
    pub jobs: usize,
    /// Seed of the deterministic mesh-generation jitter.
    pub seed: u64,
}

type CaseOutput = (ConvergenceRow, Option<RepresentationCheck>, Option<CellMomentCheck>);

/// One ε row of the sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// Tagged inclusion area of the discrete problem.
    pub area: f64,
    pub lhs: Vec<Vec2>,
    pub rhs_exp: Vec<Vec2>,
    pub resid_exp: Vec<f64>,
    pub resid_neg: Vec<f64>,
    pub l2_diff: f64,
    pub h1_diff: f64,
    pub quad_stable: bool,
}

#[derive(Debug, Clone)]
pub struct EvalPointSummary {
    pub point: Vec2,
    pub resid_exp_fit: Option<SlopeFit>,
    pub resid_neg_fit: Option<SlopeFit>,
    /// Negated-convention residual strictly larger at every ε.
    pub negated_strictly_worse: bool,
}

#[derive(Debug, Clone)]
pub struct RepresentationCheck {
    pub eps: f64,
    /// Relative mismatch per evaluation point (max over components measured
    /// against the vector norm).
    pub rel_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CellMomentCheck {
    pub eps: f64,
    pub estimate: Tensor4,
    pub reference: Tensor4,
    pub rel_frobenius_error: f64,
    pub mandel_asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub eval_points: Vec<Vec2>,
    pub per_point: Vec<EvalPointSummary>,
    pub h1_fit: Option<SlopeFit>,
    pub l2_fit: Option<SlopeFit>,
    pub representation: Option<RepresentationCheck>,
    pub cell_moment: Option<CellMomentCheck>,
    /// All residuals identically zero (no contrast): slopes undefined.
    pub degenerate_zero_contrast: bool,
}

/// Runs the full sweep. Within each ε the work is one mesh plus two solves
/// plus kernel-side quadrature; ε cases run on up to `jobs` worker threads
/// with no shared mutable state, and the report is assembled in ε order.
pub fn convergence_study(params: &StudyParams) -> Result<ConvergenceReport> {
    validate_params(params)?;
    let contrast = params.inclusion - params.background;
    let zero_contrast = contrast.frobenius() < emt_core::moment::ZERO_CONTRAST_TOL;

    // kernel stage: inclusion-free solves on a matched fine mesh
    let min_eps = *params.eps_list.last().unwrap();
    let max_eps = params.eps_list[0];
    let kernel_size = 0.5 * min_eps;
    let band = 2.0 * max_eps;
    let kernel_mesh = {
        let mut spec = MeshSpec::new(&params.domain, params.h);
        spec.curve_refine = Some((&params.curve, kernel_size, band));
        spec.focus = &params.eval_points;
        spec.focus_factor = params.focus_factor;
        spec.seed = params.seed;
        generate_mesh(&spec)?
    };
    let kernel_space = FeSpace::new(kernel_mesh, params.order)?;
    let kernel_system = ElasticSystem::new(kernel_space.clone(), PhaseField::uniform(params.background))?;
    let traction = Traction::from_constant_strain(&params.background, params.traction_strain);
    let u_kernel = kernel_system.solve_neumann(&traction, None)?;
    let mut kernels: Vec<[FemField; 2]> = Vec::with_capacity(params.eval_points.len());
    let mut y_nodes_kernel = Vec::new();
    for &y in &params.eval_points {
        let node = kernel_space
            .mesh
            .boundary_node_near(y, 1e-9)
            .ok_or_else(|| LabError::Config(format!("eval point ({}, {}) not on kernel mesh boundary", y.x, y.y)))?;
        y_nodes_kernel.push(node);
        kernels.push([
            representation_kernel(&kernel_system, node, 0)?,
            representation_kernel(&kernel_system, node, 1)?,
        ]);
    }

    // per-ε tasks
    let n_eps = params.eps_list.len();
    let mut rows: Vec<Option<ConvergenceRow>> = (0..n_eps).map(|_| None).collect();
    let mut repr: Option<RepresentationCheck> = None;
    let mut cell: Option<CellMomentCheck> = None;

    let run_case = |eps: f64| -> Result<CaseOutput> {
        let tube = TubeRegion::new(params.curve.clone(), eps, params.beta)?;
        let mut spec = MeshSpec::new(&params.domain, params.h);
        spec.tube = Some(&tube);
        spec.focus = &params.eval_points;
        spec.focus_factor = params.focus_factor;
        spec.seed = params.seed;
        let mesh = generate_mesh(&spec)?;
        let space = FeSpace::new(mesh, params.order)?;
        let sys0 = ElasticSystem::new(space.clone(), PhaseField::uniform(params.background))?;
        let sys_eps = ElasticSystem::new(
            space.clone(),
            PhaseField { background: params.background, inclusion: params.inclusion },
        )?;
        let u0 = sys0.solve_neumann(&traction, None)?;
        let ue = sys_eps.solve_neumann(&traction, None)?;
        let (l2_diff, h1_diff) = energy_norms(&ue, &u0)?;
        let area = space.mesh.region_area(Region::Inclusion);

        let trim = tube.trim();
        let mut lhs = Vec::new();
        let mut rhs_exp = Vec::new();
        let mut resid_exp = Vec::new();
        let mut resid_neg = Vec::new();
        let mut quad_stable = true;
        for (yi, &y) in params.eval_points.iter().enumerate() {
            let node = space
                .mesh
                .boundary_node_near(y, 1e-9)
                .ok_or_else(|| LabError::Config(format!("eval point ({}, {}) lost from mesh", y.x, y.y)))?;
            let diff = ue.node_value(node) - u0.node_value(node);
            let g = &kernels[yi];
            let moment_fn = |n: &CurveNode| -> Result<Tensor4> {
                Ok(moment_tensor(&params.background, &params.inclusion, n.frame.normal(), Convention::Expansion)?.tensor)
            };
            let grad_u_fn = |n: &CurveNode| u_kernel.sym_gradient(n.point);
            let grad_k_fn = |n: &CurveNode| -> Result<[SymMat2; 2]> {
                Ok([g[0].sym_gradient(n.point)?, g[1].sym_gradient(n.point)?])
            };
            let fields = CurveFields { moment: &moment_fn, grad_u: &grad_u_fn, grad_kernel: &grad_k_fn };
            let (rhs, stable) = first_order_correction_checked(
                &params.curve,
                &fields,
                eps,
                trim,
                params.quad_order,
                params.quad_panels,
            )?;
            quad_stable &= stable;
            lhs.push(diff);
            rhs_exp.push(rhs);
            resid_exp.push((diff - rhs).norm());
            resid_neg.push((diff + rhs).norm());
        }

        // representation identity at the largest ε: volume form against the
        // kernel-mesh N
        let repr_here = if (eps - max_eps).abs() < 1e-15 && !zero_contrast {
            let mut rel = Vec::new();
            for (yi, _) in params.eval_points.iter().enumerate() {
                let g = &kernels[yi];
                let mut vol = Vec2::ZERO;
                for e in 0..space.elems.len() {
                    if space.mesh.regions[e] != Region::Inclusion {
                        continue;
                    }
                    let t = &space.mesh.triangles[e];
                    let p0 = space.mesh.nodes[t[0]];
                    let d1 = space.mesh.nodes[t[1]] - p0;
                    let d2 = space.mesh.nodes[t[2]] - p0;
                    let area_e = 0.5 * d1.cross(d2);
                    for &(xi, eta, w) in [
                        (1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0),
                        (2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
                        (1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0),
                    ]
                    .iter()
                    {
                        let x = p0 + d1 * xi + d2 * eta;
                        let su = ue.sym_gradient(x)?;
                        let c_su = contrast.contract(su);
                        let g0 = g[0].sym_gradient(x)?;
                        let g1 = g[1].sym_gradient(x)?;
                        vol += Vec2::new(c_su.ddot(g0), c_su.ddot(g1)) * (w * area_e);
                    }
                }
                let diff = lhs[yi];
                rel.push((diff - vol).norm() / diff.norm().max(1e-300));
            }
            Some(RepresentationCheck { eps, rel_errors: rel })
        } else {
            None
        };

        // cell-problem moment estimate at the smallest ε
        let cell_here = if (eps - min_eps).abs() < 1e-15 && !zero_contrast {
            let estimate = cell_average_moment(&sys_eps, &params.background, &tube)?;
            let mid_frame = params.curve.frame_at(0.5 * params.curve.length())?;
            let reference = moment_tensor(
                &params.background,
                &params.inclusion,
                mid_frame.normal(),
                Convention::Expansion,
            )?
            .tensor;
            let rel = (estimate - reference).frobenius() / reference.frobenius().max(1e-300);
            Some(CellMomentCheck {
                eps,
                estimate,
                reference,
                rel_frobenius_error: rel,
                mandel_asymmetry: estimate.symmetry_residual(),
            })
        } else {
            None
        };

        Ok((
            ConvergenceRow { eps, area, lhs, rhs_exp, resid_exp, resid_neg, l2_diff, h1_diff, quad_stable },
            repr_here,
            cell_here,
        ))
    };

    if params.jobs <= 1 {
        for (i, &eps) in params.eps_list.iter().enumerate() {
            let (row, r, c) = run_case(eps)?;
            rows[i] = Some(row);
            repr = repr.or(r);
            cell = cell.or(c);
        }
    } else {
        let results: Vec<Result<CaseOutput>> =
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for &eps in &params.eps_list {
                    handles.push(scope.spawn(move || run_case(eps)));
                }
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
        for (i, res) in results.into_iter().enumerate() {
            let (row, r, c) = res?;
            rows[i] = Some(row);
            repr = repr.or(r);
            cell = cell.or(c);
        }
    }
    let rows: Vec<ConvergenceRow> = rows.into_iter().map(|r| r.unwrap()).collect();

    // slope fits
    let eps_all: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let h1_all: Vec<f64> = rows.iter().map(|r| r.h1_diff).collect();
    let l2_all: Vec<f64> = rows.iter().map(|r| r.l2_diff).collect();
    let h1_fit = fit_log_slope(&eps_all, &h1_all);
    let l2_fit = fit_log_slope(&eps_all, &l2_all);

    let k = params.fit_points.min(rows.len());
    let tail = &rows[rows.len() - k..];
    let eps_tail: Vec<f64> = tail.iter().map(|r| r.eps).collect();
    let mut per_point = Vec::new();
    for yi in 0..params.eval_points.len() {
        let re: Vec<f64> = tail.iter().map(|r| r.resid_exp[yi]).collect();
        let rn: Vec<f64> = tail.iter().map(|r| r.resid_neg[yi]).collect();
        let strictly = rows.iter().all(|r| r.resid_neg[yi] > r.resid_exp[yi]);
        per_point.push(EvalPointSummary {
            point: params.eval_points[yi],
            resid_exp_fit: fit_log_slope(&eps_tail, &re),
            resid_neg_fit: fit_log_slope(&eps_tail, &rn),
            negated_strictly_worse: strictly,
        });
    }

    Ok(ConvergenceReport {
        rows,
        eval_points: params.eval_points.clone(),
        per_point,
        h1_fit,
        l2_fit,
        representation: repr,
        cell_moment: cell,
        degenerate_zero_contrast: zero_contrast,
    })
}

fn validate_params(params: &StudyParams) -> Result<()> {
    if params.eps_list.is_empty() {
        return Err(LabError::Config("eps list is empty".into()));
    }
    for w in params.eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(LabError::Config("eps list must be strictly decreasing".into()));
        }
    }
    let reach = params.curve.reach_estimate();
    if params.eps_list[0] >= reach {
        return Err(LabError::Config(format!(
            "largest eps {} exceeds curve reach estimate {reach}",
            params.eps_list[0]
        )));
    }
    if !(0.0 < params.beta && params.beta < 1.0) {
        return Err(LabError::Config("beta must lie in (0, 1)".into()));
    }
    for (name, c) in [("background", &params.background), ("inclusion", &params.inclusion)] {
        let m = c.convexity_margin();
        if m <= 0.0 {
            return Err(LabError::Config(format!("{name} tensor not strongly convex (margin {m:e})")));
        }
    }
    if params.eval_points.is_empty() {
        return Err(LabError::Config("need at least one evaluation point".into()));
    }
    for &y in &params.eval_points {
        if params.domain.boundary_distance(y).abs() > 1e-6 {
            return Err(LabError::Config(format!("eval point ({}, {}) is not on the boundary", y.x, y.y)));
        }
    }
    if params.fit_points < 2 {
        return Err(LabError::Config("slope fit needs at least 2 points".into()));
    }
    Ok(())
}
