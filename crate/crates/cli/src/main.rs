//! `stohom`: generate microstructures, homogenize, compute permeability,
//! run macroscopic reaction models and ergodic sweeps.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 solver or
//! percolation failure.

mod config;
mod output;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stohom_core::cellproblem::{homogenize, SolverConfig};
use stohom_core::ergodic::{empirical_average, tensor_convergence, tensor_entry_name, ConvergenceRow, Observable, Sweep};
use stohom_core::fields::{
    coefficient_field, specific_surface, volume_fraction, write_vtk_scalar, write_vtk_vector, ScalarField, TorusGrid,
};
use stohom_core::geometry::{read_phase_field, write_phase_field, PhaseField};
use stohom_core::reaction::{run, Boundary, ExchangeLaw, MacroState, ReactionParams, Source};
use stohom_core::stokes::{permeability, StokesConfig};
use stohom_core::tensor::SmallMatrix;
use stohom_core::Error;

use config::{missing, RunConfig};
use output::{num, opt, write_manifest, OutDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter { .. } | Error::Format(_) | Error::Io(_) | Error::Contract(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "stohom", version, about = "Stochastic homogenization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Realization seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Also write fields as legacy VTK.
    #[arg(long, global = true)]
    vtk: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Rasterize a random geometry to a phase-field file.
    Generate,
    /// Effective diffusion tensor of a two-phase medium.
    Homogenize,
    /// Darcy permeability tensor of the fluid phase.
    Permeability,
    /// Macroscopic bulk/surface reaction model.
    React,
    /// Window-size sweeps over seeds.
    Converge,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Homogenize => "homogenize",
            Command::Permeability => "permeability",
            Command::React => "react",
            Command::Converge => "converge",
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: OutDir,
    vtk: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stohom {}: {e}", cli.command.name());
            ExitCode::from(e.code())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let seed = cfg.seed.unwrap_or(0);
    let mut ctx = Ctx { cfg, seed, out: OutDir::new(&cli.out)?, vtk: cli.vtk };
    match cli.command {
        Command::Generate => generate(&mut ctx)?,
        Command::Homogenize => homogenize_cmd(&mut ctx)?,
        Command::Permeability => permeability_cmd(&mut ctx)?,
        Command::React => react(&mut ctx)?,
        Command::Converge => converge(&mut ctx)?,
    }
    write_manifest(&mut ctx.out, cli.command.name(), ctx.seed, &ctx.cfg)
}

fn realize(ctx: &Ctx, input: Option<&Path>) -> Result<PhaseField<f64>, CliError> {
    if let Some(path) = input {
        let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        return Ok(read_phase_field(&mut BufReader::new(file))?);
    }
    let g = ctx.cfg.geometry()?;
    Ok(g.recipe()?.realize(g.side, g.m, ctx.seed)?)
}

fn phase_scalar(pf: &PhaseField<f64>) -> ScalarField<f64> {
    ScalarField { grid: pf.grid, values: pf.cells.iter().map(|&c| c as f64).collect() }
}

fn generate(ctx: &mut Ctx) -> Result<(), CliError> {
    let pf = realize(ctx, None)?;
    ctx.out.write("phase.shpf", |w| write_phase_field(w, &pf).map_err(std::io::Error::other))?;
    let row = vec![pf.seed.to_string(), num(volume_fraction(&pf)), num(specific_surface(&pf))];
    ctx.out.csv("generate.csv", "seed,theta,s", &[row])?;
    if ctx.vtk {
        let field = phase_scalar(&pf);
        ctx.out.write("phase.vtk", |w| write_vtk_scalar(w, &pf.model, "phase", &field))?;
    }
    if let Some(w) = &pf.warning {
        eprintln!("warning: {w:?}");
    }
    Ok(())
}

fn homogenize_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let hc = ctx.cfg.homogenize.clone().ok_or_else(|| missing("homogenize"))?;
    let pf = realize(ctx, hc.input.as_deref())?;
    let cf = coefficient_field(&pf, hc.d_a, hc.d_b)?;
    let mut solver = SolverConfig::default();
    if let Some(t) = hc.tol {
        solver.tol = t;
    }
    solver.max_iter = hc.max_iter;
    let (h, correctors) = homogenize(&cf, &solver)?;
    let n = pf.grid.dim();
    let mut header = vec!["seed", "m", "L", "D_A", "D_B", "theta"].into_iter().map(String::from).collect::<Vec<_>>();
    let mut row = vec![pf.seed.to_string(), h.m.to_string(), num(h.side), num(h.d_a), num(h.d_b), num(volume_fraction(&pf))];
    for i in 0..n {
        for j in 0..n {
            header.push(tensor_entry_name(i, j));
            row.push(num(h.tensor.get(i, j)));
        }
    }
    for (j, r) in h.residuals.iter().enumerate() {
        header.push(format!("res{}", j + 1));
        row.push(num(*r));
    }
    ctx.out.csv("homogenize.csv", &header.join(","), &[row])?;
    if ctx.vtk {
        for c in &correctors {
            let name = format!("corrector_{}.vtk", c.direction + 1);
            ctx.out.write(&name, |w| write_vtk_scalar(w, "corrector", "phi", &c.field))?;
        }
    }
    Ok(())
}

fn permeability_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let pc = ctx.cfg.permeability.clone().ok_or_else(|| missing("permeability"))?;
    let pf = realize(ctx, pc.input.as_deref())?;
    if pf.count_a() == 0 {
        return Err(CliError::Solver("percolation failure: the field has no fluid cells".into()));
    }
    let mut cfg = StokesConfig { nu: pc.nu, ..StokesConfig::default() };
    if let Some(t) = pc.tol {
        cfg.tol = t;
    }
    if let Some(t) = pc.div_tol {
        cfg.div_tol = t;
    }
    cfg.max_iter = pc.max_iter;
    let (k, correctors) = permeability(&pf, &cfg)?;
    let n = pf.grid.dim();
    let mut header = vec!["seed", "m", "L", "nu", "porosity"].into_iter().map(String::from).collect::<Vec<_>>();
    let mut row = vec![k.seed.to_string(), k.m.to_string(), num(k.side), num(k.nu), num(k.porosity)];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("K{}{}", i + 1, j + 1));
            row.push(num(k.tensor.get(i, j)));
        }
    }
    header.extend(["res_mom".to_string(), "res_div".to_string()]);
    row.extend([num(k.res_mom), num(k.res_div)]);
    ctx.out.csv("permeability.csv", &header.join(","), &[row])?;
    if ctx.vtk {
        for c in &correctors {
            let v = c.cell_velocity();
            ctx.out.write(&format!("velocity_{}.vtk", c.direction + 1), |w| write_vtk_vector(w, "cell velocity", "u", &v))?;
            ctx.out.write(&format!("pressure_{}.vtk", c.direction + 1), |w| write_vtk_scalar(w, "cell pressure", "p", &c.pressure))?;
        }
    }
    Ok(())
}

/// `D11,D12,...` from the first data row of a homogenize CSV.
fn tensor_from_csv(path: &Path) -> Result<SmallMatrix<f64>, CliError> {
    let bad = |why: String| CliError::Config(format!("Dhom from {}: {why}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    let row: Vec<&str> = lines.next().ok_or_else(|| bad("no data row".into()))?.split(',').collect();
    let dim = (1..=3).rev().find(|&n| header.contains(&tensor_entry_name(n - 1, n - 1).as_str())).ok_or_else(|| bad("no D11 column".into()))?;
    let mut d = SmallMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let name = tensor_entry_name(i, j);
            let col = header.iter().position(|h| *h == name).ok_or_else(|| bad(format!("no {name} column")))?;
            let v: f64 = row.get(col).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("bad {name} value")))?;
            d.set(i, j, v);
        }
    }
    Ok(d)
}

fn parse_dhom(value: &serde_json::Value, base: Option<&Path>) -> Result<SmallMatrix<f64>, CliError> {
    if let Some(s) = value.as_str() {
        let path = s.strip_prefix("from ").ok_or_else(|| CliError::Config("`Dhom` string must read \"from <csv>\"".into()))?.trim();
        let path = match base {
            Some(dir) if Path::new(path).is_relative() => dir.join(path),
            _ => PathBuf::from(path),
        };
        return tensor_from_csv(&path);
    }
    let rows: Vec<Vec<f64>> =
        serde_json::from_value(value.clone()).map_err(|_| CliError::Config("`Dhom` must be a square matrix or \"from <csv>\"".into()))?;
    let n = rows.len();
    if !(1..=3).contains(&n) || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("`Dhom` must be a square matrix of size 1 to 3".into()));
    }
    let mut d = SmallMatrix::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            d.set(i, j, *v);
        }
    }
    Ok(d)
}

fn react(ctx: &mut Ctx) -> Result<(), CliError> {
    let rc = ctx.cfg.react.clone().ok_or_else(|| missing("react"))?;
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| missing(key));
    let law = match rc.family.as_str() {
        "linear" => ExchangeLaw::Linear { k: need(rc.k, "k")? },
        "langmuir" => ExchangeLaw::Langmuir { k1: need(rc.k1, "k1")?, k2: need(rc.k2, "k2")?, umax: need(rc.umax, "Umax")? },
        other => return Err(CliError::Config(format!("unknown `family` \"{other}\""))),
    };
    let boundary = match rc.bc.as_str() {
        "neumann" => Boundary::Neumann,
        "dirichlet" => Boundary::Dirichlet,
        other => return Err(CliError::Config(format!("`bc` must be neumann or dirichlet, got \"{other}\""))),
    };
    let dhom = parse_dhom(&rc.dhom, None)?;
    let grid = TorusGrid::coarse(dhom.dim, rc.cells, rc.side)?;
    let params = ReactionParams { law, theta: rc.theta, s: rc.s, source: Source::Constant(rc.f), dhom, boundary, unit_capacity: rc.unit_capacity };
    params.validate(&grid)?;
    let width = 0.1 * rc.side;
    let u: Vec<f64> = (0..grid.len())
        .map(|a| {
            let x = grid.center(a);
            let r2: f64 = (0..grid.dim()).map(|k| (x[k] - 0.5 * rc.side).powi(2)).sum();
            rc.u0 + rc.bump * (-r2 / (width * width)).exp()
        })
        .collect();
    let state = MacroState::new(grid, u, vec![rc.big_u0; grid.len()])?;
    let out = run(&state, &params, rc.dt, rc.t_end, rc.stride.unwrap_or(1))?;
    let rows: Vec<Vec<String>> = out
        .ledger
        .iter()
        .map(|r| vec![num(r.t), num(r.mass_u), num(r.mass_surface), num(r.total), num(r.min_u), num(r.max_u)])
        .collect();
    ctx.out.csv("react.csv", "t,mass_u,mass_U,total_mass,min_u,max_u", &rows)?;
    if ctx.vtk {
        for (i, snap) in out.snapshots.iter().enumerate() {
            let u = ScalarField { grid, values: snap.u.clone() };
            let s = ScalarField { grid, values: snap.surface.clone() };
            let title = format!("t = {}", num(snap.t));
            ctx.out.write(&format!("u_{i:04}.vtk"), |w| write_vtk_scalar(w, &title, "u", &u))?;
            ctx.out.write(&format!("U_{i:04}.vtk"), |w| write_vtk_scalar(w, &title, "U", &s))?;
        }
    }
    Ok(())
}

fn converge(ctx: &mut Ctx) -> Result<(), CliError> {
    let cc = ctx.cfg.converge.clone().ok_or_else(|| missing("converge"))?;
    let recipe = ctx.cfg.geometry()?.recipe()?;
    let seeds: Vec<u64> = (0..cc.seeds as u64).map(|i| ctx.seed.wrapping_add(i)).collect();
    let sweep = Sweep::new(cc.sides.clone(), cc.resolution, seeds);
    let mut geometric = Vec::new();
    let mut tensor = false;
    for o in &cc.observables {
        match o.as_str() {
            "volume_fraction" => geometric.push(Observable::VolumeFraction),
            "specific_surface" => geometric.push(Observable::SpecificSurface),
            "Dhom" => tensor = true,
            other => return Err(CliError::Config(format!("unknown observable \"{other}\" in `observables`"))),
        }
    }
    let mut rows: Vec<ConvergenceRow<f64>> = Vec::new();
    if !geometric.is_empty() {
        rows.extend(empirical_average(&recipe, &geometric, &sweep)?.rows);
    }
    if tensor {
        let d_b = cc.d_b.ok_or_else(|| missing("D_B"))?;
        let solver = cc.tol.map(SolverConfig::with_tol).unwrap_or_default();
        rows.extend(tensor_convergence(&recipe, cc.d_a, d_b, &sweep, &solver)?.rows);
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.observable.clone(),
                num(r.side),
                r.m.to_string(),
                r.seeds.to_string(),
                num(r.mean),
                num(r.variance),
                opt(r.reference),
                r.flag(),
            ]
        })
        .collect();
    ctx.out.csv("converge.csv", "observable,L,m,seeds,mean,variance,reference,flag", &table)?;
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        let _ = writeln!(std::io::stderr(), "warning: {failures} realization(s) failed; see the flag column");
    }
    Ok(())
}
