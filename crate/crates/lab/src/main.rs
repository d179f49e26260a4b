//! Command-line front end: tensor inspection, single solves, Neumann-column
//! checks, mesh export, and full convergence studies driven by a JSON
//! config.
//!
//! Exit codes: 0 success / all enabled gates pass; 1 an enabled convergence
//! gate failed; 2 parse, configuration, or geometry validation error;
//! 3 tensor symmetry or convexity violation (check-tensor); 4 numerical
//! failure (meshing, incompatible data, or solver breakdown).

use clap::{Args, Parser, Subcommand};
use emt_core::moment::{
    bounds_check, fit_isotropic_coeffs, isotropic_moment_coeffs, moment_tensor, Convention, Frame,
};
use emt_core::rng::SplitMix64;
use emt_core::tensor::{SymMat2, Tensor4, TensorSpec};
use emt_core::Vec2;
use emt_lab::asymptotics::convergence_study;
use emt_lab::config::StudyConfig;
use emt_lab::fem::{neumann_field, ElasticSystem, FeSpace, FemField, PhaseField, Traction};
use emt_lab::mesh::{generate_mesh, MeshSpec};
use emt_lab::report::{csv_for_point, Summary};
use emt_lab::LabError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "emt-lab", version, about = "Thin-inclusion elasticity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a tensor JSON file: Mandel matrix, symmetry, convexity.
    CheckTensor {
        /// Tensor JSON ({"lambda": .., "mu": ..} or {"mandel": [[..]; 3]})
        file: PathBuf,
    },
    /// Thin-inclusion moment tensor for two phases and an interface normal.
    Emt {
        /// Background tensor JSON file
        c0: PathBuf,
        /// Inclusion tensor JSON file
        c1: PathBuf,
        /// Interface normal "nx,ny" (must be unit length)
        #[arg(long, default_value = "0,1")]
        normal: String,
        /// Seed of the oracle/bounds sweeps
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the background and perturbed problems at the largest ε.
    Solve(StudyArgs),
    /// Solve one Neumann-matrix column and report its diagnostics.
    Neumann {
        #[command(flatten)]
        study: StudyArgs,
        /// Index into eval_points
        #[arg(long, default_value_t = 0)]
        point_index: usize,
        /// Load direction (0 = x, 1 = y)
        #[arg(long, default_value_t = 0)]
        dir: usize,
    },
    /// Run the full ε-sweep and write CSV reports plus a JSON summary.
    Convergence(StudyArgs),
    /// Generate and export the mesh of the study at a given ε.
    MeshExport {
        #[command(flatten)]
        study: StudyArgs,
        /// Tube half-width (defaults to the largest configured ε)
        #[arg(long)]
        eps: Option<f64>,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration JSON
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Parallel ε-cases (1 = fully deterministic order of execution)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the curve quadrature order
    #[arg(long)]
    quad_order: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &LabError) -> u8 {
    match e {
        LabError::Config(_) | LabError::Io(_) | LabError::Core(_) => 2,
        LabError::Mesh(_)
        | LabError::Solver(_)
        | LabError::IncompatibleTraction { .. }
        | LabError::PointOutsideMesh { .. }
        | LabError::MeshMismatch => 4,
    }
}

fn run(cli: Cli) -> Result<ExitCode, LabError> {
    match cli.command {
        Command::CheckTensor { file } => check_tensor(&file),
        Command::Emt { c0, c1, normal, seed } => cmd_emt(&c0, &c1, &normal, seed),
        Command::Solve(args) => cmd_solve(&args),
        Command::Neumann { study, point_index, dir } => cmd_neumann(&study, point_index, dir),
        Command::Convergence(args) => cmd_convergence(&args),
        Command::MeshExport { study, eps } => cmd_mesh_export(&study, eps),
    }
}

fn load_tensor(path: &Path) -> Result<Tensor4, LabError> {
    let text = std::fs::read_to_string(path)?;
    let spec: TensorSpec = serde_json::from_str(&text)
        .map_err(|e| LabError::Config(format!("tensor parse error in {}: {e}", path.display())))?;
    Ok(spec.to_tensor())
}

fn print_mandel(label: &str, t: &Tensor4) {
    println!("{label}:");
    for row in t.mandel() {
        println!("  [{:+.12e}, {:+.12e}, {:+.12e}]", row[0], row[1], row[2]);
    }
}

fn check_tensor(file: &Path) -> Result<ExitCode, LabError> {
    let t = load_tensor(file)?;
    print_mandel("mandel", &t);
    let sym = t.symmetry_residual();
    let margin = t.convexity_margin();
    println!("symmetry residual: {sym:e}");
    println!("convexity margin:  {margin:.12}");
    match t.isotropy(1e-12) {
        Some((lambda, mu)) => println!("isotropic: yes (lambda = {lambda}, mu = {mu})"),
        None => println!("isotropic: no"),
    }
    if sym > 1e-12 {
        eprintln!("error: Mandel matrix is not symmetric (major symmetry violated)");
        return Ok(ExitCode::from(3));
    }
    if margin <= 0.0 {
        eprintln!("error: tensor is not strongly convex");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_emt(c0_path: &Path, c1_path: &Path, normal: &str, seed: u64) -> Result<ExitCode, LabError> {
    let c0 = load_tensor(c0_path)?;
    let c1 = load_tensor(c1_path)?;
    let parts: Vec<&str> = normal.split(',').collect();
    if parts.len() != 2 {
        return Err(LabError::Config("normal must be given as \"nx,ny\"".into()));
    }
    let n = Vec2::new(
        parts[0].trim().parse().map_err(|_| LabError::Config("bad normal component".into()))?,
        parts[1].trim().parse().map_err(|_| LabError::Config("bad normal component".into()))?,
    );
    let t = moment_tensor(&c0, &c1, n, Convention::Expansion).map_err(LabError::Core)?;
    let m = moment_tensor(&c0, &c1, n, Convention::Constructive).map_err(LabError::Core)?;
    print_mandel("T (expansion convention)", &t.tensor);
    print_mandel("M~ (constructive convention)", &m.tensor);

    if let (Some((l0, m0)), Some((l1, m1))) = (c0.isotropy(1e-12), c1.isotropy(1e-12)) {
        match isotropic_moment_coeffs(l0, m0, l1, m1) {
            Ok(c) => {
                println!("isotropic closed-form coefficients (reference display):");
                println!("  a = {:+.12}, b = {:+.12}, c = {:+.12}, d = {:+.12}", c.a, c.b, c.c, c.d);
            }
            Err(e) => println!("isotropic coefficients unavailable: {e}"),
        }
        let frame = Frame::from_normal(n).map_err(LabError::Core)?;
        let fit = fit_isotropic_coeffs(&m.tensor, &frame);
        println!("coefficients fitted from the constructed tensor:");
        println!("  a = {:+.12}, b = {:+.12}, c = {:+.12}, d = {:+.12}", fit.a, fit.b, fit.c, fit.d);
    }

    // oracle residual: transmission-consistency of T over random strains
    let mut rng = SplitMix64::new(seed);
    let contrast = c1 - c0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let e = SymMat2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        let tr = emt_core::moment::transmission_solve(&c0, &c1, n, e).map_err(LabError::Core)?;
        let resid = (contrast.contract(tr.e_int) - t.tensor.contract(e)).norm() / e.norm().max(1e-30);
        worst = worst.max(resid);
    }
    println!("transmission oracle residual (200 seeded strains): {worst:e}");

    let mut upper_ok = true;
    let mut lower_fail = 0usize;
    for _ in 0..1000 {
        let e = SymMat2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        let b = bounds_check(&c0, &c1, &t, e).map_err(LabError::Core)?;
        upper_ok &= b.upper_ok;
        if !b.lower_ok {
            lower_fail += 1;
        }
    }
    println!(
        "quadratic bounds over 1000 seeded strains: upper {} / lower violations {lower_fail}",
        if upper_ok { "holds" } else { "VIOLATED" }
    );
    Ok(ExitCode::SUCCESS)
}

fn write_field_csv(path: &Path, field: &FemField) -> Result<(), LabError> {
    let mut out = String::from("node,x,y,ux,uy\n");
    for (i, p) in field.space.nodes.iter().enumerate() {
        let u = field.node_value(i);
        out.push_str(&format!("{},{},{},{},{}\n", i, p.x, p.y, u.x, u.y));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn load_config(args: &StudyArgs) -> Result<StudyConfig, LabError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = StudyConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_solve(args: &StudyArgs) -> Result<ExitCode, LabError> {
    let cfg = load_config(args)?;
    let params = cfg.resolve(args.jobs, args.quad_order)?;
    std::fs::create_dir_all(&args.out)?;
    let eps = params.eps_list[0];
    let tube = emt_core::curve::TubeRegion::new(params.curve.clone(), eps, params.beta)
        .map_err(LabError::Core)?;
    let mut spec = MeshSpec::new(&params.domain, params.h);
    spec.tube = Some(&tube);
    spec.focus = &params.eval_points;
    spec.focus_factor = params.focus_factor;
    spec.seed = params.seed;
    let mesh = generate_mesh(&spec)?;
    println!("mesh: {} nodes, {} triangles", mesh.nodes.len(), mesh.triangles.len());
    let space = FeSpace::new(mesh, params.order)?;
    let traction = Traction::from_constant_strain(&params.background, params.traction_strain);
    let sys0 = ElasticSystem::new(space.clone(), PhaseField::uniform(params.background))?;
    let sys_eps = ElasticSystem::new(
        space.clone(),
        PhaseField { background: params.background, inclusion: params.inclusion },
    )?;
    let u0 = sys0.solve_neumann(&traction, None)?;
    let ue = sys_eps.solve_neumann(&traction, None)?;
    let (l2, h1) = emt_lab::fem::energy_norms(&ue, &u0)?;
    println!("eps = {eps}: |u_eps - U|_L2 = {l2:e}, |u_eps - U|_H1 = {h1:e}");
    write_field_csv(&args.out.join("field_background.csv"), &u0)?;
    write_field_csv(&args.out.join("field_perturbed.csv"), &ue)?;
    println!("fields written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_neumann(args: &StudyArgs, point_index: usize, dir: usize) -> Result<ExitCode, LabError> {
    let cfg = load_config(args)?;
    let params = cfg.resolve(args.jobs, args.quad_order)?;
    if point_index >= params.eval_points.len() {
        return Err(LabError::Config(format!("point index {point_index} out of range")));
    }
    if dir > 1 {
        return Err(LabError::Config("direction must be 0 or 1".into()));
    }
    std::fs::create_dir_all(&args.out)?;
    let mut spec = MeshSpec::new(&params.domain, params.h);
    let min_eps = *params.eps_list.last().unwrap();
    spec.curve_refine = Some((&params.curve, 0.5 * min_eps, 2.0 * params.eps_list[0]));
    spec.focus = &params.eval_points;
    spec.focus_factor = params.focus_factor;
    spec.seed = params.seed;
    let mesh = generate_mesh(&spec)?;
    let space = FeSpace::new(mesh, params.order)?;
    let y = params.eval_points[point_index];
    let node = space
        .mesh
        .boundary_node_near(y, 1e-9)
        .ok_or_else(|| LabError::Config("eval point is not a boundary vertex".into()))?;
    let sys = ElasticSystem::new(space.clone(), PhaseField::uniform(params.background))?;
    let n = neumann_field(&sys, node, dir)?;
    println!("Neumann column at y = ({}, {}), direction {dir}", y.x, y.y);
    println!("boundary mean: {:e}", n.boundary_integral().norm());
    println!("spin integral: {:e}", n.spin_integral());
    write_field_csv(&args.out.join(format!("neumann_y{point_index}_d{dir}.csv")), &n)?;
    println!("field written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_convergence(args: &StudyArgs) -> Result<ExitCode, LabError> {
    let cfg = load_config(args)?;
    let params = cfg.resolve(args.jobs, args.quad_order)?;
    std::fs::create_dir_all(&args.out)?;
    let report = convergence_study(&params)?;
    for yi in 0..report.eval_points.len() {
        let path = args.out.join(format!("sweep_y{yi}.csv"));
        std::fs::write(&path, csv_for_point(&report, yi))?;
    }
    let summary = Summary::build(&report, &cfg.thresholds, &cfg.gates, cfg.convention);
    std::fs::write(args.out.join("summary.json"), summary.to_json())?;
    if summary.degenerate_zero_contrast {
        println!("degenerate: all residuals zero (no material contrast); slopes undefined");
        println!("reports written to {}", args.out.display());
        return Ok(ExitCode::SUCCESS);
    }
    for (p, s) in report.per_point.iter().zip(summary.per_point.iter()) {
        println!(
            "y = ({:+.4}, {:+.4}): candidate slope {} rejected slope {} strictly-worse {}",
            p.point.x,
            p.point.y,
            s.resid_candidate_fit
                .as_ref()
                .map(|f| format!("{:.3}", f.slope))
                .unwrap_or_else(|| "n/a".into()),
            s.resid_rejected_fit
                .as_ref()
                .map(|f| format!("{:.3}", f.slope))
                .unwrap_or_else(|| "n/a".into()),
            s.rejected_strictly_larger
        );
    }
    if let Some(f) = &summary.h1_fit {
        println!("H1 slope {:.3} (fit residual {:.3})", f.slope, f.fit_residual);
    }
    if let Some(f) = &summary.l2_fit {
        println!("L2 slope {:.3} (fit residual {:.3})", f.slope, f.fit_residual);
    }
    if let Some(errs) = &summary.representation_rel_errors {
        println!("representation identity rel errors: {errs:?}");
    }
    if let Some(err) = summary.cell_moment_rel_error {
        println!("cell moment rel error: {err:.4}");
    }
    let gate_line = |name: &str, v: Option<bool>| match v {
        Some(true) => println!("[gate] {name}: pass"),
        Some(false) => println!("[gate] {name}: FAIL"),
        None => println!("[gate] {name}: (reported only)"),
    };
    gate_line("residual slope", summary.gates.residual_slope);
    gate_line("sign discrimination", summary.gates.sign_discrimination);
    gate_line("h1 window", summary.gates.h1_window);
    gate_line("l2 slope", summary.gates.l2_slope);
    gate_line("representation identity", summary.gates.representation);
    gate_line("cell moment", summary.gates.cell_moment);
    gate_line("quadrature stability", summary.gates.quadrature_stability);
    println!("reports written to {}", args.out.display());
    if summary.pass {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("one or more enabled gates failed");
        Ok(ExitCode::from(1))
    }
}

fn cmd_mesh_export(args: &StudyArgs, eps: Option<f64>) -> Result<ExitCode, LabError> {
    let cfg = load_config(args)?;
    let params = cfg.resolve(args.jobs, args.quad_order)?;
    print!("{}", params.curve.validate(&params.domain, cfg.admissibility_k).render());
    std::fs::create_dir_all(&args.out)?;
    let eps = eps.unwrap_or(params.eps_list[0]);
    let tube = emt_core::curve::TubeRegion::new(params.curve.clone(), eps, params.beta)
        .map_err(LabError::Core)?;
    let mut spec = MeshSpec::new(&params.domain, params.h);
    spec.tube = Some(&tube);
    spec.focus = &params.eval_points;
    spec.focus_factor = params.focus_factor;
    spec.seed = params.seed;
    let mesh = generate_mesh(&spec)?;
    let path = args.out.join("mesh.txt");
    std::fs::write(&path, mesh.export_text())?;
    println!(
        "mesh at eps = {eps}: {} nodes, {} triangles, {} boundary edges -> {}",
        mesh.nodes.len(),
        mesh.triangles.len(),
        mesh.boundary.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}
