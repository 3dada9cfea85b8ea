//! The four workflows.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use stochom::convergence::{run_convergence_study, ConvergenceReport, DirichletOptions, StudyConfig};
use stochom::corrector::{assemble_homogenized, HomogenizationConfig, HomogenizedTensor};
use stochom::maxwell::{build_tilde_a, p_sweep, sweep_table, BianisotropicMatrix};
use stochom::medium::{
    default_sampling, estimate_mean_gradient, null_lagrangian_check, sample_diffeomorphism,
    CoefficientField, DiffeomorphismSpec, EnsembleConfig, MeanGradientEstimate, NullLagrangianReport,
};

use crate::config::{cells_per_unit, Medium, ResolvedConfig, Workflow};
use crate::report::{CliError, Envelope, OutputDir};

/// What a successful run wrote.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<std::path::PathBuf>,
}

fn homogenization_config(cfg: &ResolvedConfig) -> Result<HomogenizationConfig, CliError> {
    let n = &cfg.numerics;
    Ok(HomogenizationConfig {
        realizations: n.realizations.unwrap_or(8),
        supercell_size: n.supercell_size.unwrap_or(4),
        cells_per_unit: cells_per_unit(n.h.unwrap_or(0.125))?,
        theta: n.theta.unwrap_or(0.0),
        seed: n.seed.unwrap_or(0),
        tol: n.tol.unwrap_or(1e-10),
        quadrature_order: n.quadrature_order.unwrap_or(3),
        max_iter: n.max_iter,
    })
}

fn seed_block(h: &HomogenizationConfig) -> Value {
    json!({
        "seed": h.seed,
        "derivation": "realization r uses derive_seed(seed, r); cell k of a realization uses ChaCha stream k of that seed",
        "realizations": (0..h.realizations).map(|r| h.realization_seed(r)).collect::<Vec<_>>(),
    })
}

fn envelope<'a, T: Serialize>(cfg: &'a ResolvedConfig, seeds: Value, result: T) -> Envelope<'a, T> {
    Envelope {
        tool: "stochom",
        version: env!("CARGO_PKG_VERSION"),
        workflow: cfg.workflow.name(),
        config: cfg,
        seeds,
        result,
    }
}

/// Runs the configured workflow and writes its outputs under
/// `cfg.output`.
pub fn run(cfg: &ResolvedConfig, medium: &Medium) -> Result<RunOutcome, CliError> {
    match cfg.workflow {
        Workflow::Inspect => inspect(cfg, medium),
        Workflow::Homogenize => homogenize(cfg, medium),
        Workflow::Converge => converge(cfg, medium),
        Workflow::Maxwell => maxwell(cfg, medium),
    }
}

fn finish(mut out: OutputDir, mut summary: String) -> Result<RunOutcome, CliError> {
    summary.push_str("files:\n");
    for f in &out.written {
        summary.push_str(&format!("  {}\n", f.display()));
    }
    summary.push_str(&format!("  {}\n", out.root.join("summary.txt").display()));
    out.write("summary.txt", &summary)?;
    Ok(RunOutcome {
        summary,
        files: out.written,
    })
}

#[derive(Debug, Serialize)]
struct MediumDiagnostics {
    description: String,
    dim: usize,
    components: usize,
    /// Smallest Hermitian-part eigenvalue of `A` (of `A₀` for dispersive
    /// media) over the sample grid.
    ellipticity_min: f64,
    samples_per_axis: usize,
    /// `min Re⟨Ã(y,p)U,U⟩/|U|²` per Laplace point (dispersive media only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    dissipativity: Vec<(Complex64, f64)>,
}

#[derive(Debug, Serialize)]
struct DiffeoDiagnostics {
    linear_det: f64,
    /// `eta_max · sup|∇B|`, at most `1 − margin`.
    lipschitz_bound: f64,
    /// Smallest `det∇Φ` seen on the sample points of all realizations.
    min_jacobian: f64,
    sample_points_per_cell_axis: usize,
}

#[derive(Debug, Serialize)]
struct InspectReport {
    medium: MediumDiagnostics,
    diffeo: DiffeoDiagnostics,
    mean_gradient: MeanGradientEstimate,
    null_lagrangian: NullLagrangianReport,
    null_lagrangian_within_3_stderr: bool,
}

fn min_jacobian(spec: &DiffeomorphismSpec, ens: &EnsembleConfig, per_axis: usize) -> Result<f64, CliError> {
    let d = spec.dim;
    let n = ens.supercell_size;
    let side = n * per_axis;
    let values: Vec<f64> = (0..ens.realizations)
        .into_par_iter()
        .map(|r| -> Result<f64, CliError> {
            let real = sample_diffeomorphism(spec, n, stochom::stats::derive_seed(ens.seed, r as u64))?;
            let mut worst = f64::INFINITY;
            let mut y = vec![0.0; d];
            for flat in 0..side.pow(d as u32) {
                let mut rem = flat;
                for yi in y.iter_mut() {
                    *yi = ((rem % side) as f64 + 0.5) / per_axis as f64;
                    rem /= side;
                }
                worst = worst.min(real.jacobian(&y));
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    Ok(values.into_iter().fold(f64::INFINITY, f64::min))
}

/// Medium and diffeomorphism diagnostics.
pub fn inspect(cfg: &ResolvedConfig, medium: &Medium) -> Result<RunOutcome, CliError> {
    let h = homogenization_config(cfg)?;
    let ens = EnsembleConfig {
        realizations: h.realizations,
        supercell_size: h.supercell_size,
        quadrature_order: h.quadrature_order,
        seed: h.seed,
    };
    let medium_diag = match medium {
        Medium::Field(spec) => {
            let field = spec.build()?;
            MediumDiagnostics {
                description: field.description(),
                dim: field.dim(),
                components: field.components(),
                ellipticity_min: field.ellipticity_constant(),
                samples_per_axis: default_sampling(field.dim()),
                dissipativity: Vec::new(),
            }
        }
        Medium::Dispersive(spec) => {
            let m = spec.build()?;
            let points = cfg.numerics.p_list.clone().unwrap_or_default();
            let dissipativity = points
                .iter()
                .map(|&p| Ok((p, build_tilde_a(&m, p)?.dissipativity())))
                .collect::<Result<Vec<_>, stochom::Error>>()?;
            MediumDiagnostics {
                description: spec.description.clone(),
                dim: 3,
                components: 2,
                ellipticity_min: m.static_ellipticity(),
                samples_per_axis: default_sampling(3),
                dissipativity,
            }
        }
    };
    let per_axis = 8;
    let diffeo = DiffeoDiagnostics {
        linear_det: cfg.diffeo.linear_det(),
        lipschitz_bound: cfg.diffeo.eta_max * cfg.diffeo.gradient_bound(),
        min_jacobian: min_jacobian(&cfg.diffeo, &ens, per_axis)?,
        sample_points_per_cell_axis: per_axis,
    };
    let mean_gradient = estimate_mean_gradient(&cfg.diffeo, &ens)?;
    let null_lagrangian = null_lagrangian_check(&cfg.diffeo, &ens)?;
    let within = null_lagrangian.within(3.0);
    let report = InspectReport {
        medium: medium_diag,
        diffeo,
        mean_gradient,
        null_lagrangian,
        null_lagrangian_within_3_stderr: within,
    };
    let seeds = seed_block(&h);
    let mut out = OutputDir::create(&cfg.output)?;
    out.write_json("inspect.json", &envelope(cfg, seeds.clone(), &report))?;
    let summary = format!(
        "workflow: inspect\nmedium: {}\nseed: {} (realization r uses derive_seed(seed, r))\n\
         ellipticity min: {:.6e}\nmin det grad Phi: {:.6e}\nc_Phi: {:.12}\n\
         null-Lagrangian residual: {:.3e} (combined stderr {:.3e}, within 3 stderr: {})\n",
        report.medium.description,
        h.seed,
        report.medium.ellipticity_min,
        report.diffeo.min_jacobian,
        report.mean_gradient.c_phi,
        report.null_lagrangian.residual,
        report.null_lagrangian.combined_stderr,
        within,
    );
    finish(out, summary)
}

fn field_of(medium: &Medium) -> Result<stochom::medium::TermField, CliError> {
    match medium {
        Medium::Field(spec) => Ok(spec.build()?),
        Medium::Dispersive(_) => unreachable!("resolve rejects dispersive media here"),
    }
}

#[derive(Debug, Serialize)]
struct HomogenizeResult<'a> {
    tensor: &'a HomogenizedTensor,
    asymmetry: f64,
    ellipticity: f64,
}

fn matrix_text(t: &HomogenizedTensor) -> String {
    let n = t.size();
    let mut s = String::new();
    for r in 0..n {
        let row: Vec<String> = (0..n)
            .map(|c| format!("{:>12.6} ±{:.1e}", t.re(r, c), t.stderr_at(r, c)))
            .collect();
        s.push_str(&format!("  {}\n", row.join("  ")));
    }
    s
}

/// Effective tensor of a real medium.
pub fn homogenize(cfg: &ResolvedConfig, medium: &Medium) -> Result<RunOutcome, CliError> {
    let field = field_of(medium)?;
    let h = homogenization_config(cfg)?;
    let tensor = assemble_homogenized(&field, &cfg.diffeo, &h)?;
    let seeds = seed_block(&h);
    let mut out = OutputDir::create(&cfg.output)?;
    if cfg.format.json() {
        let result = HomogenizeResult {
            tensor: &tensor,
            asymmetry: tensor.asymmetry(),
            ellipticity: tensor.ellipticity(),
        };
        out.write_json("homogenized.json", &envelope(cfg, seeds.clone(), result))?;
    }
    if cfg.format.csv() {
        let table = format!("{}\n{}\n", tensor.csv_header("theta"), tensor.csv_row(h.theta));
        out.write_csv("homogenized.csv", cfg, &seeds, &table)?;
    }
    let summary = format!(
        "workflow: homogenize\nmedium: {}\nR = {}, N = {}, h = 1/{}, theta = {}\n\
         seed: {} (realization r uses derive_seed(seed, r))\nc_Phi: {:.12}\nA* (flux layout, row beta*d+j, column alpha*d+i):\n{}\
         asymmetry: {:.3e}\nsolver: max iterations {}, max residual {:.3e}, fallbacks {}\n",
        field.description(),
        h.realizations,
        h.supercell_size,
        h.cells_per_unit,
        h.theta,
        h.seed,
        tensor.meta.c_phi,
        matrix_text(&tensor),
        tensor.asymmetry(),
        tensor.meta.max_iterations,
        tensor.meta.max_residual,
        tensor.meta.fallbacks.len(),
    );
    finish(out, summary)
}

#[derive(Debug, Serialize)]
struct ConvergeResult<'a> {
    homogenized: &'a HomogenizedTensor,
    study: &'a ConvergenceReport,
}

/// ε → 0 study against the homogenized problem.
pub fn converge(cfg: &ResolvedConfig, medium: &Medium) -> Result<RunOutcome, CliError> {
    let field = field_of(medium)?;
    let h = homogenization_config(cfg)?;
    let astar = assemble_homogenized(&field, &cfg.diffeo, &h)?;
    let study_cfg = StudyConfig {
        epsilons: cfg.numerics.epsilons.clone().unwrap_or_default(),
        cells_per_period: cfg.numerics.cells_per_period.unwrap_or(8),
        source: cfg.source.clone().expect("resolve sets the source"),
        seed: h.seed,
        dirichlet: DirichletOptions {
            quadrature_order: h.quadrature_order,
            tol: h.tol,
            max_iter: h.max_iter,
            ..Default::default()
        },
    };
    let report = run_convergence_study(&field, &cfg.diffeo, &astar, &study_cfg)?;
    let mut seeds = seed_block(&h);
    seeds["epsilon_derivation"] = json!("the oscillating problem at scale eps uses derive_seed(seed, eps.to_bits())");
    seeds["epsilons"] = json!(report.seeds);
    let mut out = OutputDir::create(&cfg.output)?;
    if cfg.format.json() {
        let result = ConvergeResult {
            homogenized: &astar,
            study: &report,
        };
        out.write_json("convergence.json", &envelope(cfg, seeds.clone(), result))?;
    }
    if cfg.format.csv() {
        out.write_csv("convergence.csv", cfg, &seeds, &report.to_csv())?;
    }
    let mut summary = format!(
        "workflow: converge\nmedium: {}\nA* from R = {}, N = {}, h = 1/{}, seed {}\n\
         epsilon        l2_error       energy_ratio\n",
        field.description(),
        h.realizations,
        h.supercell_size,
        h.cells_per_unit,
        h.seed,
    );
    for k in 0..report.epsilons.len() {
        summary.push_str(&format!(
            "{:<14.6e} {:<14.6e} {:.4}\n",
            report.epsilons[k], report.l2_errors[k], report.energy_ratios[k]
        ));
    }
    finish(out, summary)
}

/// Effective bianisotropic matrices on the Laplace grid.
pub fn maxwell(cfg: &ResolvedConfig, medium: &Medium) -> Result<RunOutcome, CliError> {
    let spec = match medium {
        Medium::Dispersive(spec) => spec,
        Medium::Field(_) => unreachable!("resolve rejects real fields here"),
    };
    let m = spec.build()?;
    let h = homogenization_config(cfg)?;
    let points = cfg.numerics.p_list.clone().unwrap_or_default();
    let results: Vec<BianisotropicMatrix> = p_sweep(&m, &cfg.diffeo, &points, &h)?;
    let seeds = seed_block(&h);
    let mut out = OutputDir::create(&cfg.output)?;
    if cfg.format.json() {
        out.write_json("maxwell.json", &envelope(cfg, seeds.clone(), &results))?;
    }
    if cfg.format.csv() {
        out.write_csv("maxwell.csv", cfg, &seeds, &sweep_table(&results))?;
    }
    let mut summary = format!(
        "workflow: maxwell\nmedium: {}\nR = {}, N = {}, h = 1/{}, seed {} (same realizations at every p)\n\
         p                      eps*_11                    mu*_11                     route gap  |zeta*-xi*^T|\n",
        spec.description, h.realizations, h.supercell_size, h.cells_per_unit, h.seed,
    );
    for r in &results {
        summary.push_str(&format!(
            "{:<22} {:<26} {:<26} {:.2e}   {:.2e}\n",
            format!("{:.4}{:+.4}i", r.p.re, r.p.im),
            format!("{:.8}{:+.8}i", r.eps_star[0][0].re, r.eps_star[0][0].im),
            format!("{:.8}{:+.8}i", r.mu_star[0][0].re, r.mu_star[0][0].im),
            r.route_discrepancy,
            r.zeta_xi_transpose_gap,
        ));
    }
    finish(out, summary)
}
