//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use pim_core::fft::RustFftProvider;
use pim_core::pgf::{partial_sums, pgf_total, TruncationPolicy};
use pim_core::solver::{build_plan_cached, solve, Problem};
use pim_core::study::{bench, error_study, random_neutral_sources, separated_observers, CoaxSpec, SweepPoint};
use pim_core::ObserverPointSet;

use crate::args::{Cli, CoaxArgs, Command, ProblemArgs, SweepArgs};
use crate::points::{fmt, read_observers_file, read_sources_file, write_field, write_observers, write_sources, write_table};
use crate::problem::ProblemFile;
use crate::CliError;

/// Opens the table destination: a file when given, stdout otherwise.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn load(args: &ProblemArgs) -> Result<ProblemFile, CliError> {
    ProblemFile::load(args.problem.as_deref(), &args.overrides())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { problem, output } => cmd_solve(&load(&problem)?, output.as_deref()),
        Command::Convergence {
            problem,
            x,
            y,
            z,
            shells,
            reference_tol,
            output,
        } => cmd_convergence(&load(&problem)?, [x, y, z], shells, reference_tol, output.as_deref()),
        Command::ErrorStudy { problem, sweep, output } => cmd_error_study(&load(&problem)?, &sweep, output.as_deref()),
        Command::Bench {
            problem,
            sizes,
            repeats,
            seed,
            output,
        } => cmd_bench(&load(&problem)?, &sizes, repeats, seed, output.as_deref()),
        Command::GenCoax { coax, output } => cmd_gen_coax(&coax, output.as_deref()),
    }
}

pub fn cmd_solve(pf: &ProblemFile, output: Option<&Path>) -> Result<(), CliError> {
    let src_path = pf
        .sources_path
        .as_deref()
        .ok_or_else(|| CliError::Validation("sources_path is required".to_string()))?;
    let sources = read_sources_file(src_path)?;
    let observers = match &pf.observers_path {
        Some(p) => read_observers_file(p)?,
        None => ObserverPointSet::new(sources.positions().to_vec()),
    };
    let problem = Problem {
        cfg: pf.cfg,
        target: pf.target,
        sources,
        observers,
        params: pf.params,
    };
    let provider = RustFftProvider::new();
    let plan = build_plan_cached(&problem, &provider, pf.kernel_cache.as_deref())?;
    let t = Instant::now();
    let u = solve(&plan, problem.sources.amplitudes(), &provider)?;
    let eval = t.elapsed();
    eprintln!(
        "N = {}, M = {}, near grid {:?}, far grid {:?}, build {:.3} s, eval {:.3} s, series terms {}",
        problem.sources.len(),
        problem.observers.len(),
        plan.near.grid.dims,
        plan.far.as_ref().map(|f| f.source_grid.dims),
        plan.build_time.as_secs_f64(),
        eval.as_secs_f64(),
        plan.series_terms()
    );
    write_field(sink(output.or(pf.output_path.as_deref()))?, &problem.observers, &u.values)
}

pub fn cmd_convergence(pf: &ProblemFile, r: [f64; 3], shells: usize, tol: f64, output: Option<&Path>) -> Result<(), CliError> {
    let reference = pgf_total(r, &pf.cfg, &TruncationPolicy::with_tol(tol))?.into_value()?;
    let sums = partial_sums(r, &pf.cfg, shells, tol)?;
    let rows = sums
        .iter()
        .enumerate()
        .map(|(m, s)| vec![m.to_string(), fmt((s - reference).norm() / reference.norm())]);
    write_table(sink(output.or(pf.output_path.as_deref()))?, &["terms", "relative_error"], rows)
}

pub fn cmd_error_study(pf: &ProblemFile, sweep: &SweepArgs, output: Option<&Path>) -> Result<(), CliError> {
    let sources = match &pf.sources_path {
        Some(p) => read_sources_file(p)?,
        None => random_neutral_sources(sweep.sources, &pf.target, sweep.seed),
    };
    if sources.len() > sweep.max_sources {
        return Err(CliError::Validation(format!(
            "{} sources exceed the direct-reference cap of {}",
            sources.len(),
            sweep.max_sources
        )));
    }
    let observers = match &pf.observers_path {
        Some(p) => read_observers_file(p)?,
        None => {
            let min_sep = 0.01 * pf.target.extent.iter().cloned().fold(0.0, f64::max);
            separated_observers(sweep.observers, &pf.target, &sources, min_sep, sweep.seed)
        }
    };
    let mut points = Vec::new();
    for &far_order in &sweep.orders {
        for &far_grid in &sweep.grids {
            for &i_d in &sweep.ids {
                points.push(SweepPoint { far_order, far_grid, i_d });
            }
        }
    }
    let problem = Problem {
        cfg: pf.cfg,
        target: pf.target,
        sources,
        observers,
        params: pf.params,
    };
    let policy = TruncationPolicy::with_tol(pf.params.series_tol.min(1e-12));
    let rows = error_study(&problem, &points, &RustFftProvider::new(), &policy)?;
    let rows = rows.iter().map(|r| {
        vec![
            r.point.far_order.to_string(),
            r.point.far_grid.to_string(),
            r.point.i_d.to_string(),
            fmt(r.far_error),
            fmt(r.pipeline_error),
        ]
    });
    write_table(
        sink(output.or(pf.output_path.as_deref()))?,
        &["far_order", "far_grid", "i_d", "far_error", "pipeline_error"],
        rows,
    )
}

pub fn cmd_bench(pf: &ProblemFile, sizes: &[usize], repeats: usize, seed: u64, output: Option<&Path>) -> Result<(), CliError> {
    let rows = bench(&pf.cfg, &pf.target, &pf.params, sizes, repeats, seed, &RustFftProvider::new())?;
    let ms = |d: std::time::Duration| format!("{:.3}", d.as_secs_f64() * 1e3);
    let rows = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            ms(r.build),
            ms(r.eval),
            format!("{:.4}", r.eval_overhead()),
            ms(r.free_build),
            ms(r.free_eval),
            format!("{:.4}", r.build_overhead()),
        ]
    });
    write_table(
        sink(output.or(pf.output_path.as_deref()))?,
        &[
            "n",
            "build_ms",
            "eval_ms",
            "periodic_overhead_ratio",
            "free_build_ms",
            "free_eval_ms",
            "build_overhead_ratio",
        ],
        rows,
    )
}

pub fn cmd_gen_coax(args: &CoaxArgs, output: Option<&Path>) -> Result<(), CliError> {
    let spec = CoaxSpec {
        inner_radius: args.inner_radius,
        inner_density: args.inner_density,
        outer_radius: args.outer_radius,
        outer_density: args.outer_density,
        length: args.length,
        inner_angular: args.inner_angular,
        outer_angular: args.outer_angular,
        axial: args.axial,
    };
    if !(spec.inner_radius > 0.0 && spec.inner_radius < spec.outer_radius && spec.length > 0.0) {
        return Err(CliError::Validation("need 0 < inner_radius < outer_radius and length > 0".to_string()));
    }
    if spec.inner_angular == 0 || spec.outer_angular == 0 || spec.axial == 0 {
        return Err(CliError::Validation("point counts must be positive".to_string()));
    }
    if spec.outer_density == 0.0 {
        return Err(CliError::Validation("outer_density must be nonzero to balance the inner shell".to_string()));
    }
    write_sources(sink(output)?, &spec.sources())?;
    if let Some(path) = &args.axis_observers {
        write_observers(sink(Some(path))?, &spec.axis_observers(args.axis_count))?;
    }
    let [dx, dy, dz] = spec.target_box().extent;
    eprintln!("target box: Dx = {dx} Dy = {dy} Dz = {dz}; period Lx = {}", spec.length);
    Ok(())
}
