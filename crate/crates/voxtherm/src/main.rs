//! Command-line interface: run problems, execute benchmark presets, verify
//! sensitivities against the finite-difference oracle.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use voxtherm::driver::{self, StepRow, Termination};
use voxtherm::oracle;
use voxtherm::problem::{generate_benchmark, ProblemDefinition};
use voxtherm::vtk;

#[derive(Parser)]
#[command(
    name = "voxtherm",
    about = "Thermo-elastic topology optimization on voxel grids",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a problem file or a named preset.
    Run {
        /// Path to a problem file, or a preset name
        /// (clamped-beam-point | clamped-beam-distributed).
        problem: String,
        /// Output directory for run.csv, constraints.csv, final.vtk and the
        /// canonical problem.txt.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// key=value override in the problem-file grammar; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Also export the last augmented sensitivity field as sens.vtk.
        #[arg(long)]
        dump_sensitivity: bool,
    },
    /// Run a benchmark preset and print the ratio table.
    Bench {
        preset: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the finite-difference sensitivity verification suite.
    Verify {
        /// Elements sampled per QoI and thermal mode.
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
}

fn load_problem(spec: &str, overrides: &[String]) -> Result<ProblemDefinition<f64>, String> {
    let mut def = if spec.ends_with(".txt") || std::path::Path::new(spec).exists() {
        let text = fs::read_to_string(spec).map_err(|e| format!("reading {spec}: {e}"))?;
        ProblemDefinition::parse(&text).map_err(|e| e.to_string())?
    } else {
        generate_benchmark(spec).map_err(|e| e.to_string())?
    };
    def.apply_overrides(overrides).map_err(|e| e.to_string())?;
    Ok(def)
}

fn print_step(row: &StepRow<f64>, _design: &voxtherm::grid::DesignState) {
    let g: Vec<String> = row.g.iter().map(|v| format!("{v:+.3e}")).collect();
    println!(
        "step {:>3}  vf {:.4}  J/J0 {:.4}  s/s0 {:.4}  inner {}  fea {}  g [{}]  {:.1}s",
        row.step,
        row.vf,
        row.j_ratio,
        row.sigma_ratio,
        row.inner_iters,
        row.fea_count,
        g.join(", "),
        row.wall_ms as f64 / 1000.0
    );
}

fn write_csv(record: &driver::RunRecord<f64>, dir: &Path) -> std::io::Result<()> {
    let nc = record
        .rows
        .first()
        .map(|r| r.g.len())
        .or_else(|| record.evaluations.first().map(|e| e.g.len()))
        .unwrap_or(0);
    let mut run = String::from("step,vf,tau,inner_iters,fea_count,wall_ms,J,J_over_J0,sigma_pn,sigma_over_sigma0");
    for i in 0..nc {
        run.push_str(&format!(",g_{i},mu_{i},gamma_{i}"));
    }
    run.push('\n');
    for r in &record.rows {
        run.push_str(&format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e}",
            r.step, r.vf, r.tau, r.inner_iters, r.fea_count, r.wall_ms, r.j, r.j_ratio, r.sigma_pn, r.sigma_ratio
        ));
        for i in 0..nc {
            run.push_str(&format!(",{:e},{:e},{:e}", r.g[i], r.mu[i], r.gamma[i]));
        }
        run.push('\n');
    }
    fs::write(dir.join("run.csv"), run)?;

    let mut cons = String::from("eval,vf,accepted");
    for i in 0..nc {
        cons.push_str(&format!(",value_{i},g_{i},mu_{i},gamma_{i}"));
    }
    cons.push('\n');
    for (idx, e) in record.evaluations.iter().enumerate() {
        cons.push_str(&format!("{},{},{}", idx, e.vf, e.accepted as u8));
        for i in 0..e.g.len() {
            cons.push_str(&format!(
                ",{:e},{:e},{:e},{:e}",
                e.values[i], e.g[i], e.mu[i], e.gamma[i]
            ));
        }
        cons.push('\n');
    }
    fs::write(dir.join("constraints.csv"), cons)
}

fn cmd_run(
    problem: &str,
    out: &Path,
    overrides: &[String],
    dump_sensitivity: bool,
) -> Result<Termination, String> {
    let def = load_problem(problem, overrides)?;
    let (grid, material, bc, specs, config) = def.build().map_err(|e| e.to_string())?;
    let kernels = voxtherm::Kernels::compute(&material, &grid).map_err(|e| e.to_string())?;
    println!(
        "problem: {} elements, {} structural DOFs, {} constraint(s)",
        grid.num_elements(),
        grid.num_struct_dofs(),
        specs.len()
    );
    let output = driver::run(&grid, &kernels, &bc, &specs, &config, print_step)
        .map_err(|e| e.to_string())?;
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    write_csv(&output.record, out).map_err(|e| e.to_string())?;
    fs::write(out.join("problem.txt"), def.serialize()).map_err(|e| e.to_string())?;
    vtk::export_vtk(
        &grid,
        &output.design,
        &output.fields,
        material.t0,
        &out.join("final.vtk"),
    )
    .map_err(|e| e.to_string())?;
    if dump_sensitivity {
        // Final compliance retention field for inspection.
        let settings = config.cg_settings(grid.num_struct_dofs());
        let adj = voxtherm::sensitivity::solve_adjoints(
            &grid,
            &kernels,
            &output.design,
            &bc,
            &output.fields,
            &voxtherm::qoi::QoIKind::Compliance,
            &settings,
        )
        .map_err(|e| e.to_string())?;
        let qprime = voxtherm::sensitivity::element_qprime(
            &grid,
            &kernels,
            &output.design,
            &output.fields,
            &voxtherm::qoi::QoIKind::Compliance,
            &adj,
        );
        let field =
            voxtherm::sensitivity::SensitivityField::from_qprime(&qprime, &grid, &output.design);
        vtk::export_sensitivity_vtk(&grid, &output.design, &field, &out.join("sens.vtk"))
            .map_err(|e| e.to_string())?;
    }

    let rec = &output.record;
    match &rec.termination {
        Termination::FeaFailure(msg) => println!("terminated: fea_failure ({msg})"),
        other => println!("terminated: {}", other.name()),
    }
    println!(
        "final vf {:.4}   J/J0 {:.4}   sigma/sigma0 {:.4}   FEAs {}",
        rec.final_vf,
        rec.rows.last().map(|r| r.j_ratio).unwrap_or(f64::NAN),
        rec.rows.last().map(|r| r.sigma_ratio).unwrap_or(f64::NAN),
        rec.total_fea
    );
    println!("wrote {}", out.display());
    Ok(rec.termination.clone())
}

fn cmd_bench(preset: &str, overrides: &[String]) -> Result<(), String> {
    let def = load_problem(preset, overrides)?;
    let (grid, material, bc, specs, config) = def.build().map_err(|e| e.to_string())?;
    let kernels = voxtherm::Kernels::compute(&material, &grid).map_err(|e| e.to_string())?;
    let output = driver::run(&grid, &kernels, &bc, &specs, &config, print_step)
        .map_err(|e| e.to_string())?;
    let rec = &output.record;

    // Load-ratio on the final design.
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ratio = norm(&output.fields.f_th) / norm(&output.fields.f_st);

    println!();
    println!("benchmark: {preset}");
    match &rec.termination {
        Termination::FeaFailure(msg) => println!("  termination:        fea_failure ({msg})"),
        other => println!("  termination:        {}", other.name()),
    }
    println!("  final vf:           {:.4}", rec.final_vf);
    println!(
        "  J/J0:               {:.4}",
        rec.rows.last().map(|r| r.j_ratio).unwrap_or(f64::NAN)
    );
    println!(
        "  sigma/sigma0:       {:.4}",
        rec.rows.last().map(|r| r.sigma_ratio).unwrap_or(f64::NAN)
    );
    println!("  |f_th|/|f_st|:      {ratio:.4}");
    println!("  FEAs:               {}", rec.total_fea);
    println!("  J0:                 {:.6e}", rec.j0);
    println!("  sigma0:             {:.6e}", rec.sigma0);
    Ok(())
}

fn cmd_verify(samples: usize) -> Result<bool, String> {
    println!("finite-difference sensitivity check (eps = 1e-4, tolerance {:.0}%)", oracle::FD_TOLERANCE * 100.0);
    let report = oracle::run_fd_suite(samples, 0x5eed).map_err(|e| e.to_string())?;
    let mut worst: std::collections::BTreeMap<(&str, &str), f64> = Default::default();
    for c in &report.cases {
        let w = worst.entry((c.qoi, c.mode)).or_insert(0.0);
        *w = w.max(c.rel_err);
    }
    for ((qoi, mode), err) in &worst {
        let ok = *err <= oracle::FD_TOLERANCE;
        println!(
            "  {:<13} {:<9} max rel err {:.3e}  {}",
            qoi,
            mode,
            err,
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} comparisons, max relative error {:.3e}",
        report.cases.len(),
        report.max_rel_err
    );
    Ok(report.max_rel_err <= oracle::FD_TOLERANCE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            problem,
            out,
            overrides,
            dump_sensitivity,
        } => match cmd_run(&problem, &out, &overrides, dump_sensitivity) {
            Ok(Termination::FeaFailure(_)) => ExitCode::from(2),
            Ok(_) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Bench { preset, overrides } => match cmd_bench(&preset, &overrides) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Verify { samples } => match cmd_verify(samples) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
