//! The staged run: exponent → kernel → parametrix → validate → simulate.

use std::fs;
use std::path::{Path, PathBuf};

use levy_parametrix::exponent::{log_nodes, DensityShape, LevyMeasureSpec, Regime};
use levy_parametrix::freekernel::{fourier_invert_p0, verify_p0_bounds, KernelGrid};
use levy_parametrix::hexfloat::to_hex;
use levy_parametrix::parametrix::{
    assemble_p_multi, default_length, require_convergence, Grids, ModelSpec, Solver,
};
use levy_parametrix::simulate::{compare_to_row, sample_perturbed, DensityComparison, Scheme, SimulationPlan};
use levy_parametrix::spectral::CircleGrid;
use levy_parametrix::validate::{
    check_chapman_kolmogorov, check_conservation, check_convolution_lemma, check_example_bounds,
    check_generator_identity, check_lower_bound, check_nonnegativity, check_on_diagonal, ConvolutionLemmaParams,
    GeneratorParams, Outcome, TestFunction, ValidationReport,
};
use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{GridConfig, RunConfig, Stage};
use crate::{CliError, CliResult, EXIT_PASS, EXIT_VALIDATION};

/// Largest grid for which the Chapman–Kolmogorov check is run.
const CK_MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// `ran`, `reused` or `skipped`.
    pub status: String,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheRecord {
    pub hash: String,
    pub reused: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub verdict: Outcome,
    pub worst_residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub out: PathBuf,
    pub stages: Vec<StageRecord>,
    pub cache: Option<CacheRecord>,
    pub checks: Vec<CheckRow>,
    pub exit_code: i32,
}

struct Ctx<'a> {
    config: &'a RunConfig,
    model: ModelSpec,
    grid: CircleGrid,
    /// Row and export stride on the circle grid.
    stride: usize,
    out: PathBuf,
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn t_label(t: f64) -> String {
    format!("t{t}")
}

/// Circle grid from the config; the returned config section holds the resolved values.
pub fn resolve_grid(config: &GridConfig, model: &ModelSpec, t_min: f64) -> CliResult<(CircleGrid, GridConfig)> {
    let length = match config.half_width {
        Some(h) => 2.0 * h,
        None => default_length(model),
    };
    if let Some(p) = model.pert.period() {
        let k = (length / p).round();
        if k < 1.0 || (k * p - length).abs() > 1e-9 * length {
            return Err(CliError::config(format!(
                "circle length {length} is not a multiple of the amplitude period {p}"
            )));
        }
    }
    let n = match config.spacing {
        Some(s) => ((length / s) * (1.0 - 1e-12)).ceil().max(64.0) as usize,
        None => Grids::auto(model, t_min)?.n,
    }
    .next_power_of_two();
    let grid = CircleGrid::new(n, length)?;
    Ok((grid, GridConfig { half_width: Some(0.5 * length), spacing: Some(grid.dx()) }))
}

/// Runs the requested stages and writes all artifacts below `config.out`.
pub fn run(config: &RunConfig) -> CliResult<RunSummary> {
    config.validate()?;
    let model = config.build_model()?;
    let (grid, resolved) = resolve_grid(&config.grid, &model, config.t[0])?;
    let out = config.out.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    let mut effective = config.clone();
    effective.grid = resolved;
    if let Some(s) = &mut effective.model.series {
        s.clone_from(&model.series_params);
    } else {
        effective.model.series = Some(model.series_params.clone());
    }
    if effective.simulation.t.is_none() {
        effective.simulation.t = Some(default_simulation_time(&config.t));
    }
    write(&out.join("effective_config.toml"), &effective.to_toml()?)?;

    let stride = grid.n.div_ceil(config.export.max_nodes).next_power_of_two().min(grid.n);
    let ctx = Ctx { config: &effective, model, grid, stride, out: out.clone() };
    let first = *config.stages.first().expect("validated");
    let last = *config.stages.last().expect("validated");
    let wants = |s: Stage| s >= first && s <= last;

    let mut summary =
        RunSummary { name: config.name.clone(), out, stages: Vec::new(), cache: None, checks: Vec::new(), exit_code: EXIT_PASS };
    if wants(Stage::Exponent) {
        summary.stages.push(exponent_stage(&ctx)?);
    }
    if wants(Stage::Kernel) {
        summary.stages.push(kernel_stage(&ctx)?);
    }
    let needs_family = last >= Stage::Parametrix;
    let mut family = None;
    if needs_family {
        let (fam, rec, cache) = parametrix_stage(&ctx, wants(Stage::Parametrix))?;
        summary.stages.push(rec);
        summary.cache = Some(cache);
        family = Some(fam);
    }
    let family = family.unwrap_or_default();
    let mut failed = false;
    if wants(Stage::Validate) {
        let (reports, rec) = validate_stage(&ctx, &family)?;
        for r in &reports {
            failed |= matches!(r.verdict, Outcome::Fail | Outcome::Unstable);
            summary.checks.push(CheckRow {
                check: r.check.clone(),
                verdict: r.verdict,
                worst_residual: r.worst_residual,
                tolerance: r.tolerance,
            });
        }
        summary.stages.push(rec);
    }
    if wants(Stage::Simulate) {
        let (row, rec) = simulate_stage(&ctx, &family)?;
        failed |= row.verdict != Outcome::Pass;
        summary.checks.push(row);
        summary.stages.push(rec);
    }
    if failed {
        summary.exit_code = EXIT_VALIDATION;
    }
    write(&summary.out.join("summary.json"), &json(&summary))?;
    Ok(summary)
}

fn default_simulation_time(ts: &[f64]) -> f64 {
    *ts.iter().min_by(|a, b| (*a - 0.25).abs().total_cmp(&(*b - 0.25).abs())).expect("nonempty times")
}

#[derive(Serialize)]
struct SymbolRow {
    xi: f64,
    q: f64,
    q_upper: f64,
    q_lower: f64,
    /// Local index `a(ln(1 + ξ))` of an oscillating density.
    local_index: Option<f64>,
    /// `q(ξ)/ξ^{local_index}`.
    sandwich_ratio: Option<f64>,
}

#[derive(Serialize)]
struct ExponentReport<'a> {
    a1: &'a levy_parametrix::exponent::A1Report,
    perturbation: &'a levy_parametrix::exponent::PerturbationReport,
    sigma_hat: f64,
    eta: f64,
    delta: f64,
    rho: Vec<(f64, f64)>,
    symbol: Vec<SymbolRow>,
    /// Range of the sandwich ratio, when the density oscillates.
    sandwich_range: Option<(f64, f64)>,
}

fn exponent_stage(ctx: &Ctx) -> CliResult<StageRecord> {
    let m = &ctx.model;
    let shape = match &m.base {
        LevyMeasureSpec::Density { density: d @ DensityShape::LogOscillating { .. } } => Some(d),
        _ => None,
    };
    let mut symbol = Vec::new();
    for xi in log_nodes(1.0, 1e6, 10) {
        let q = m.base.q(xi)?;
        let local_index = shape.and_then(|d| d.local_index(xi.ln_1p()));
        symbol.push(SymbolRow {
            xi,
            q,
            q_upper: m.base.q_upper(xi)?,
            q_lower: m.base.q_lower(xi)?,
            local_index,
            sandwich_ratio: local_index.map(|a| q / xi.powf(a)),
        });
    }
    let ratios: Vec<f64> = symbol.iter().filter_map(|r| r.sandwich_ratio).collect();
    let sandwich_range = (!ratios.is_empty())
        .then(|| (ratios.iter().cloned().fold(f64::INFINITY, f64::min), ratios.iter().cloned().fold(0.0, f64::max)));
    let rho = ctx.config.t.iter().map(|&t| Ok((t, m.rho(t)?))).collect::<CliResult<Vec<_>>>()?;
    let report = ExponentReport {
        a1: &m.a1,
        perturbation: &m.pert_report,
        sigma_hat: m.sigma(),
        eta: m.eta(),
        delta: m.series_params.delta_hint,
        rho,
        symbol,
        sandwich_range,
    };
    write(&ctx.out.join("exponent.json"), &json(&report))?;
    let mut notes = vec![format!("A1 {}: beta_hat = {:.4}", if m.a1.pass { "pass" } else { "fail" }, m.a1.beta_hat)];
    if let Some((lo, hi)) = sandwich_range {
        notes.push(format!("q(xi)/xi^a(ln xi) stays in [{lo:.4}, {hi:.4}]"));
    }
    Ok(StageRecord { stage: Stage::Exponent, status: "ran".into(), files: vec!["exponent.json".into()], notes })
}

fn export_grid(ctx: &Ctx, g: &KernelGrid, stem: &str, files: &mut Vec<String>) -> CliResult<()> {
    let ex = &ctx.config.export;
    if ex.csv {
        let path = ctx.out.join(format!("{stem}.csv"));
        let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        g.write_csv(std::io::BufWriter::new(f), ex.exact)?;
        files.push(format!("{stem}.csv"));
    }
    if ex.json {
        write(&ctx.out.join(format!("{stem}.json")), &g.to_json(ex.exact)?)?;
        files.push(format!("{stem}.json"));
    }
    Ok(())
}

fn kernel_stage(ctx: &Ctx) -> CliResult<StageRecord> {
    let xs: Vec<f64> = (0..ctx.grid.n).step_by(ctx.stride).map(|j| ctx.grid.node(j)).collect();
    let mut files = Vec::new();
    for &t in &ctx.config.t {
        let g = fourier_invert_p0(&ctx.model.base, t, &xs)?;
        export_grid(ctx, &g, &format!("p0_{}", t_label(t)), &mut files)?;
    }
    let mut notes = Vec::new();
    if ctx.config.t.len() >= 2 {
        let z: Vec<f64> = (0..=160).map(|i| -20.0 + 0.25 * i as f64).collect();
        let rep = verify_p0_bounds(&ctx.model.base, &ctx.config.t, &z)?;
        write(&ctx.out.join("p0_bounds.json"), &json(&rep))?;
        files.push("p0_bounds.json".into());
    } else {
        notes.push("free-kernel bound fit needs two times".into());
    }
    Ok(StageRecord { stage: Stage::Kernel, status: "ran".into(), files, notes })
}

/// Hash of everything the kernel family depends on.
fn cache_hash(ctx: &Ctx) -> String {
    let key = serde_json::json!({
        "model": ctx.config.model,
        "grid": ctx.config.grid,
        "t": ctx.config.t,
        "stride": ctx.stride,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_cached(dir: &Path, ts: &[f64]) -> Option<Vec<KernelGrid>> {
    ts.iter()
        .map(|&t| {
            let text = fs::read_to_string(dir.join(format!("p_{}.json", t_label(t)))).ok()?;
            KernelGrid::from_json(&text).ok()
        })
        .collect()
}

/// Columns `cols` of `g`.
fn columns(g: &KernelGrid, cols: &[usize]) -> KernelGrid {
    let v = Array2::from_shape_fn((g.x_nodes.len(), cols.len()), |(r, c)| g.values[(r, cols[c])]);
    KernelGrid::new(g.t, g.x_nodes.clone(), cols.iter().map(|&c| g.y_nodes[c]).collect(), v, g.meta.clone())
        .expect("consistent shape")
}

/// `p_t` for every configured time, rows at the export stride and all columns.
fn parametrix_stage(ctx: &Ctx, requested: bool) -> CliResult<(Vec<KernelGrid>, StageRecord, CacheRecord)> {
    let hash = cache_hash(ctx);
    let dir = ctx.out.join("cache").join(&hash);
    let ts = &ctx.config.t;
    let mut notes = Vec::new();
    let cached = if requested { None } else { load_cached(&dir, ts) };
    let reused = cached.is_some();
    let family = match cached {
        Some(f) => {
            notes.push(format!("kernel family reused from cache {hash}"));
            f
        }
        None => {
            let solver = Solver::new(&ctx.model, ctx.grid)?;
            let grids = Grids::new(ctx.grid, ctx.stride, (0..ctx.grid.n).collect())?;
            let (family, diag, negatives) = assemble_p_multi(&solver, ts, &grids)?;
            write(&ctx.out.join("series_diagnostics.json"), &diag.to_json())?;
            write(&ctx.out.join("negatives.json"), &json(&negatives))?;
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for g in &family {
                write(&dir.join(format!("p_{}.json", t_label(g.t))), &g.to_json(true)?)?;
            }
            if !requested {
                notes.push(format!("cache {hash} missing; kernel family recomputed"));
            }
            family
        }
    };
    let mut files = Vec::new();
    if !reused {
        files.extend(["series_diagnostics.json".to_string(), "negatives.json".to_string()]);
        let cols: Vec<usize> = (0..ctx.grid.n).step_by(ctx.stride).collect();
        for g in &family {
            export_grid(ctx, &columns(g, &cols), &format!("p_{}", t_label(g.t)), &mut files)?;
        }
    }
    let status = if reused { "reused" } else if requested { "ran" } else { "ran (implied)" };
    let rec = StageRecord { stage: Stage::Parametrix, status: status.into(), files, notes };
    Ok((family, rec, CacheRecord { hash, reused }))
}

fn validate_stage(ctx: &Ctx, family: &[KernelGrid]) -> CliResult<(Vec<ValidationReport>, StageRecord)> {
    let tol = &ctx.config.tolerances;
    let model = &ctx.model;
    let rho = |t: f64| model.rho(t);
    let mut reports = vec![check_conservation(family, Some(&model.base), tol)?, check_nonnegativity(family, tol)?];
    let mut notes = Vec::new();
    reports.push(check_on_diagonal(family, &rho, tol)?);
    reports.push(check_lower_bound(family, &rho, tol)?);
    if ctx.config.oscillatory {
        notes.push("oscillatory exponent: bound templates are not fitted".into());
    } else if let Some(bound) = &ctx.config.example_bound {
        reports.push(check_example_bounds(family, bound, tol)?);
    }
    if family.len() < 2 {
        notes.push("a single time: constant drifts are trivially 1".into());
    }
    let t_max = *ctx.config.t.last().expect("nonempty");
    let solver = Solver::new(model, ctx.grid)?;
    if ctx.grid.n <= CK_MAX_NODES {
        let half = 0.5 * t_max;
        let cols: Vec<usize> = (0..ctx.grid.n).step_by(ctx.stride).collect();
        let (ps, d1) = solver.kernel_grids(&[half], &Grids::new(ctx.grid, ctx.stride, (0..ctx.grid.n).collect())?)?;
        let (pts, d2) = solver.kernel_grids(&[half], &Grids::new(ctx.grid, 1, cols.clone())?)?;
        require_convergence(&d1)?;
        require_convergence(&d2)?;
        let pt = columns(family.last().expect("nonempty"), &cols);
        reports.push(check_chapman_kolmogorov(&ps[0], &pts[0], &pt, tol.composed)?);
    } else {
        notes.push(format!("Chapman-Kolmogorov skipped above {CK_MAX_NODES} nodes"));
    }
    let width = (0.5f64).max(6.0 * ctx.grid.dx());
    let bump = TestFunction::Bump { center: 0.0, width, period: ctx.grid.length };
    let params = GeneratorParams { x_stride: ctx.stride, tolerance: tol.composed, ..GeneratorParams::default() };
    reports.push(check_generator_identity(&solver, &bump, t_max, &params)?);
    let drift_scaling = |t: f64| model.rho(t);
    let conv = ConvolutionLemmaParams {
        delta: model.series_params.delta_hint,
        t_nodes: ctx.config.t.clone(),
        ..ConvolutionLemmaParams::default()
    };
    if conv.t_nodes.len() >= 2 {
        reports.push(check_convolution_lemma(&drift_scaling, &conv, tol.drift)?);
    }
    write(&ctx.out.join("validation.json"), &json(&reports))?;
    Ok((reports, StageRecord { stage: Stage::Validate, status: "ran".into(), files: vec!["validation.json".into()], notes }))
}

#[derive(Serialize)]
struct SimulationReport {
    plan: SimulationPlan,
    comparison: DensityComparison,
    tolerance: f64,
    pass: bool,
    proposed: u64,
    accepted: u64,
}

fn simulate_stage(ctx: &Ctx, family: &[KernelGrid]) -> CliResult<(CheckRow, StageRecord)> {
    let sim = &ctx.config.simulation;
    let t = sim.t.expect("resolved in the effective config");
    let g = family
        .iter()
        .find(|g| (g.t - t).abs() <= 1e-12 * t)
        .ok_or_else(|| CliError::config(format!("simulation time {t} has no kernel")))?;
    // start from the kernel row nearest to x0
    let h = g.x_nodes[1] - g.x_nodes[0];
    let rows = g.x_nodes.len() as i64;
    let row = (((sim.x0 - g.x_nodes[0]) / h).round() as i64).rem_euclid(rows) as usize;
    let x0 = g.x_nodes[row];
    let model = &ctx.model;
    let (scheme, tolerance) = if model.pert.is_zero() {
        (Scheme::Exact, sim.ks_tol)
    } else if model.pert_report.regime == Regime::Bounded {
        (Scheme::Thinning, sim.ks_tol)
    } else {
        (Scheme::EulerChain { dt: t / sim.euler_steps as f64 }, sim.ks_tol_euler)
    };
    let plan = SimulationPlan::new(&model.base, sim.n_paths, t, x0, scheme, ctx.config.seed)?;
    let samples = sample_perturbed(model, &plan)?;
    let comparison = compare_to_row(&samples.values, g, row)?;
    let pass = comparison.ks_distance <= tolerance;
    let mut csv = String::from("x\n");
    for v in &samples.values {
        csv.push_str(&if ctx.config.export.exact { to_hex(*v) } else { format!("{v:.17e}") });
        csv.push('\n');
    }
    write(&ctx.out.join("samples.csv"), &csv)?;
    let row_check = CheckRow {
        check: "monte_carlo".into(),
        verdict: if pass { Outcome::Pass } else { Outcome::Fail },
        worst_residual: comparison.ks_distance,
        tolerance,
    };
    let notes = vec![format!("x0 = {x0} (nearest kernel row)")];
    let report =
        SimulationReport { plan, comparison, tolerance, pass, proposed: samples.proposed, accepted: samples.accepted };
    write(&ctx.out.join("simulation.json"), &json(&report))?;
    let rec = StageRecord {
        stage: Stage::Simulate,
        status: "ran".into(),
        files: vec!["samples.csv".into(), "simulation.json".into()],
        notes,
    };
    Ok((row_check, rec))
}

/// Plain-text table of the checks.
pub fn format_table(summary: &RunSummary) -> String {
    let mut s = format!("{:<24} {:<13} {:>12} {:>12}\n", "check", "verdict", "worst", "tolerance");
    for c in &summary.checks {
        let verdict = serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        s.push_str(&format!("{:<24} {:<13} {:>12.4e} {:>12.4e}\n", c.check, verdict, c.worst_residual, c.tolerance));
    }
    for st in &summary.stages {
        for n in &st.notes {
            s.push_str(&format!("[{}] {n}\n", st.stage.name()));
        }
    }
    if let Some(c) = &summary.cache {
        s.push_str(&format!("cache {} ({})\n", c.hash, if c.reused { "reused" } else { "written" }));
    }
    s
}

