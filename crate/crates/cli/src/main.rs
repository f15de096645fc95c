use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use memlaw::config::{KernelSpec, MaterialSpec, Overrides, ProblemSpec, ScenarioFile};
use memlaw::kernels::{check_hypotheses, HypothesisOptions};
use memlaw::material_laws::{solvability_margin, MarginGrid};
use memlaw::scenarios::{run_phase, run_visco};
use memlaw::solver::{FrequencySolver, TimeStepper};
use memlaw::{Error, WeightedSignal};

/// Kernel checks, material-law margins and solvers for evolutionary inclusions with memory.
#[derive(Parser, Debug)]
#[command(name = "memlaw", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check selfadjointness, commutation and the imaginary-part bound of a kernel.
    CheckKernel {
        file: PathBuf,
        /// Weight at which the imaginary-part bound is estimated.
        #[arg(long, default_value_t = 1.0)]
        nu0: f64,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Estimate the solvability margin of a material law.
    CheckMaterial {
        file: PathBuf,
        /// Radius of the scanned half-plane; defaults to 1/(2 nu).
        #[arg(long)]
        r1: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Solve a linear problem.
    SolveLinear {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverChoice::Frequency)]
        solver: SolverChoice,
        #[command(flatten)]
        common: Common,
    },
    /// Solve a problem with monotone relations by the time stepper.
    SolveInclusion {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one of the built-in scenarios.
    Demo {
        scenario: Scenario,
        /// Scenario settings overriding the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    cells: Option<usize>,
    /// Run even when the margin gate or the hypotheses fail.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

impl Common {
    fn problem_overrides(&self) -> Result<Overrides, Failure> {
        if self.cells.is_some() {
            return Err(Failure::Usage("--cells applies to demo runs only".into()));
        }
        Ok(self.overrides())
    }

    fn overrides(&self) -> Overrides {
        Overrides { nu: self.nu, dt: self.dt, tmax: self.tmax, cells: self.cells }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverChoice {
    Frequency,
    Time,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Visco,
    Phase,
}

/// Failure of a run, carrying its exit code.
enum Failure {
    Check,
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::DimensionMismatch(_) | Error::GridMismatch(_) | Error::WeightMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn emit(dir: &Path, report: &str, json: &serde_json::Value, solution: Option<&WeightedSignal>) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    println!("{report}");
    fs::write(dir.join("report.txt"), format!("{report}\n"))?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(json).expect("serializable report"))?;
    if let Some(u) = solution {
        u.write_csv(&dir.join("solution.csv"))?;
    }
    Ok(())
}

fn verdict(pass: bool) -> Result<(), Failure> {
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn check_kernel(file: &Path, nu0: f64, out: &Path) -> Result<(), Failure> {
    if !(nu0 >= 0.0) {
        return Err(Failure::Usage(format!("--nu0 must be non-negative, got {nu0}")));
    }
    let kernel = KernelSpec::load(file)?.build_standalone()?;
    let r = check_hypotheses(&kernel, &HypothesisOptions::new(nu0))?;
    let j = json!({
        "pass": r.pass(),
        "nu0": r.nu0,
        "l1_norm": r.l1_norm,
        "selfadjoint": { "pass": r.selfadjoint.pass, "value": r.selfadjoint.value },
        "commuting": { "pass": r.commuting.pass, "value": r.commuting.value },
        "d_est": r.d_est,
        "d": r.d,
        "propagation": { "pass": r.propagation.pass, "worst_value": r.propagation.worst_value },
    });
    emit(out, &format!("{r}\nd = {:.6e}", r.d), &j, None)?;
    verdict(r.pass())
}

fn check_material(file: &Path, r1: Option<f64>, nu: f64, out: &Path) -> Result<(), Failure> {
    if !(nu > 0.0) || r1.is_some_and(|r| !(r > 0.0)) {
        return Err(Failure::Usage("--nu and --r1 must be positive".into()));
    }
    let r1 = r1.unwrap_or(1.0 / (2.0 * nu));
    let law = MaterialSpec::load(file)?.build()?;
    let r = solvability_margin(&law, r1, &MarginGrid::standard(r1))?;
    let j = json!({
        "pass": r.c_est > 0.0,
        "r1": r1,
        "c_est": r.c_est,
        "nu_min": r.nu_min,
        "worst_xi": r.worst_xi,
        "worst_nu": r.worst_nu,
        "analytic_bound": r.analytic_bound,
        "status": r.label(),
    });
    emit(out, &r.to_string(), &j, None)?;
    verdict(r.c_est > 0.0)
}

fn solve_linear(file: &Path, solver: SolverChoice, c: &Common) -> Result<(), Failure> {
    let p = ProblemSpec::load(file)?.build(&c.problem_overrides()?)?;
    if !p.relations.is_empty() {
        return Err(Failure::Usage("the problem has relations; use solve-inclusion".into()));
    }
    let mut lines = Vec::new();
    let mut j = json!({ "nu": p.nu, "dt": p.grid.dt, "samples": p.grid.n });
    let freq = match solver {
        SolverChoice::Frequency | SolverChoice::Both => {
            let fs = FrequencySolver::new(&p.law, &p.a, p.grid, p.nu, c.force)?;
            let sol = fs.solve_detailed(&p.f)?;
            lines.push(format!("margin\n{}", fs.margin()));
            lines.push(format!("frequency residual {:.6e}", sol.residual));
            j["c_est"] = json!(fs.margin().c_est);
            j["frequency_residual"] = json!(sol.residual);
            Some(sol.solution)
        }
        SolverChoice::Time => None,
    };
    let time = match solver {
        SolverChoice::Time | SolverChoice::Both => {
            let ts = TimeStepper::new(&p.law, &p.a, &[], p.grid, p.nu, c.force)?;
            let sol = ts.solve_detailed(&p.f)?;
            if freq.is_none() {
                lines.push(format!("margin\n{}", ts.margin()));
                j["c_est"] = json!(ts.margin().c_est);
            }
            lines.push(format!("max step residual {:.6e}", sol.max_step_residual));
            j["max_step_residual"] = json!(sol.max_step_residual);
            Some(sol.solution)
        }
        SolverChoice::Frequency => None,
    };
    if let (Some(f), Some(t)) = (&freq, &time) {
        let err = t.sub(f)?.norm() / f.norm().max(f64::MIN_POSITIVE);
        lines.push(format!("time vs frequency {err:.6e}"));
        j["cross_error"] = json!(err);
        fs::create_dir_all(&c.output_dir)?;
        f.write_csv(&c.output_dir.join("solution_frequency.csv"))?;
    }
    emit(&c.output_dir, &lines.join("\n"), &j, time.as_ref().or(freq.as_ref()))
}

fn solve_inclusion(file: &Path, c: &Common) -> Result<(), Failure> {
    let p = ProblemSpec::load(file)?.build(&c.problem_overrides()?)?;
    let ts = TimeStepper::new(&p.law, &p.a, &p.relations, p.grid, p.nu, c.force)?;
    let sol = ts.solve_detailed(&p.f)?;
    let report = format!(
        "margin\n{}\nmax step residual {:.6e}\ninner iterations {}",
        ts.margin(),
        sol.max_step_residual,
        sol.inner_iterations
    );
    let j = json!({
        "nu": p.nu,
        "dt": p.grid.dt,
        "c_est": ts.margin().c_est,
        "max_step_residual": sol.max_step_residual,
        "inner_iterations": sol.inner_iterations,
    });
    emit(&c.output_dir, &report, &j, Some(&sol.solution))
}

fn demo(scenario: Scenario, config: Option<&Path>, c: &Common) -> Result<(), Failure> {
    let file = match config {
        Some(p) => ScenarioFile::load(p)?,
        None => ScenarioFile::default(),
    };
    let o = c.overrides();
    match scenario {
        Scenario::Visco => {
            let run = run_visco(&file.visco(&o)?, c.force)?;
            let j = serde_json::to_value(&run.report).expect("serializable report");
            emit(&c.output_dir, &run.report.to_string(), &j, Some(&run.solution))?;
            verdict(run.report.pass())
        }
        Scenario::Phase => {
            let run = run_phase(&file.phase(&o)?, c.force)?;
            let j = serde_json::to_value(&run.report).expect("serializable report");
            emit(&c.output_dir, &run.report.to_string(), &j, Some(&run.solution))?;
            verdict(run.report.pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match &cli.command {
        Command::CheckKernel { file, nu0, output_dir } => check_kernel(file, *nu0, output_dir),
        Command::CheckMaterial { file, r1, nu, output_dir } => check_material(file, *r1, *nu, output_dir),
        Command::SolveLinear { file, solver, common } => solve_linear(file, *solver, common),
        Command::SolveInclusion { file, common } => solve_inclusion(file, common),
        Command::Demo { scenario, config, common } => demo(*scenario, config.as_deref(), common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
