//! The experiments behind the CLI subcommands. Each one returns a [`Table`];
//! rows come out in level or sample order so reruns are byte identical.

use std::fmt;
use std::str::FromStr;

use cutdg::{
    eoc, error_norms, estimate_condition, solve, Discretization, ErrorReport, Field, GeometryOptions, Manufactured,
    Mesh, Penalties, SolverMethod, SolverOptions, SpectrumOptions,
};

use crate::config::ExperimentConfig;
use crate::table::{opt_sci, sci, Table};
use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Convergence,
    Condition,
    Perturbation,
    Ablation,
    Solve,
}

impl Experiment {
    pub const ALL: [Self; 5] = [
        Self::Convergence,
        Self::Condition,
        Self::Perturbation,
        Self::Ablation,
        Self::Solve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::Condition => "condition",
            Self::Perturbation => "perturbation",
            Self::Ablation => "ablation",
            Self::Solve => "solve",
        }
    }

    /// Solver used when the configuration does not pick one.
    pub fn default_solver(self) -> SolverMethod {
        match self {
            Self::Perturbation | Self::Ablation => SolverMethod::Bicgstab,
            _ => SolverMethod::Direct,
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
        match self {
            Self::Convergence => run_convergence(cfg),
            Self::Condition => run_condition(cfg),
            Self::Perturbation => run_perturbation(cfg),
            Self::Ablation => run_ablation(cfg),
            Self::Solve => run_solve(cfg),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

fn metadata(table: &mut Table, experiment: Experiment, cfg: &ExperimentConfig, solver: &SolverOptions) {
    let p = cfg.penalties();
    table.meta("experiment", experiment);
    table.meta("geometry", cfg.geometry);
    table.meta("degree", cfg.degree);
    table.meta("epsilon", sci(cfg.epsilon));
    table.meta("gamma0", sci(p.gamma0));
    table.meta("gamma1", sci(p.gamma1));
    table.meta("gamman", sci(p.gamman));
    table.meta("solver", solver.method);
    table.meta("preconditioner", solver.preconditioner());
    table.meta("tolerance", sci(solver.tolerance));
    table.meta("max_iterations", solver.max_iterations);
    table.meta("seed", cfg.seed);
}

pub fn discretize(cfg: &ExperimentConfig, mesh: Mesh, penalties: Penalties) -> Result<Discretization<f64>, HarnessError> {
    let levelset = cfg.geometry.levelset();
    let problem = Manufactured::new(cfg.epsilon, levelset.clone())?;
    Ok(Discretization::build(
        levelset,
        mesh,
        cfg.degree,
        problem.problem_data(),
        penalties,
        GeometryOptions::for_degree(cfg.degree),
    )?)
}

/// Outcome of one solve. A failed direct factorization counts as a
/// non-converged solve with undefined errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOutcome {
    pub errors: Option<ErrorReport<f64>>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

pub fn solve_and_measure(d: &Discretization<f64>, solver: &SolverOptions) -> Result<SolveOutcome, HarnessError> {
    let report = match solve(&d.system.matrix, &d.system.rhs, solver) {
        Ok(r) => r,
        Err(cutdg::Error::SingularMatrix | cutdg::Error::NotConverged(_)) => {
            return Ok(SolveOutcome {
                errors: None,
                iterations: 0,
                relative_residual: f64::NAN,
                converged: false,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let uh = Field::from_vec(&d.space, report.solution)?;
    let errors = error_norms(&d.space, &uh, &d.data, &d.scalings, Some(&d.system.gram_stab))?;
    Ok(SolveOutcome {
        errors: Some(errors),
        iterations: report.iterations,
        relative_residual: report.relative_residual,
        converged: report.converged,
    })
}

fn note_warnings(table: &mut Table, label: &str, d: &Discretization<f64>) {
    for w in d.scalings.warnings.iter().chain(&d.system.warnings) {
        let w = w.to_string();
        if !table.metadata.iter().any(|(k, v)| k == "warning" && v.ends_with(&w)) {
            table.meta("warning", format!("{label}: {w}"));
        }
    }
}

/// Levels whose mesh repeats the previous level's are not recomputed.
fn repeats_previous(cfg: &ExperimentConfig, i: usize) -> bool {
    i > 0 && cfg.geometry.counts(cfg.levels[i]) == cfg.geometry.counts(cfg.levels[i - 1])
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let solver = cfg.solver_options(Experiment::Convergence.default_solver());
    let mut table = Table::new(&["level", "h", "ndofs", "l2_error", "sd_error", "eoc_l2", "eoc_sd", "converged"]);
    metadata(&mut table, Experiment::Convergence, cfg, &solver);
    let mut last: Option<(f64, usize, SolveOutcome)> = None;
    // (h, l2, sd) of the last distinct mesh.
    let mut previous_distinct: Option<(f64, f64, f64)> = None;
    for (i, &level) in cfg.levels.iter().enumerate() {
        let repeat = repeats_previous(cfg, i);
        if !repeat {
            let d = discretize(cfg, cfg.geometry.mesh(level)?, cfg.penalties())?;
            note_warnings(&mut table, &format!("level {level}"), &d);
            last = Some((d.h(), d.ndofs(), solve_and_measure(&d, &solver)?));
        }
        let (h, ndofs, out) = last.expect("first level is computed");
        let (l2, sd) = out.errors.map_or((f64::NAN, f64::NAN), |e| (e.l2_error, e.sd_error));
        let (eoc_l2, eoc_sd) = match previous_distinct {
            Some((h0, l0, s0)) if !repeat => (
                eoc(&[l0, l2], &[h0, h]).ok().map(|v| v[0]),
                eoc(&[s0, sd], &[h0, h]).ok().map(|v| v[0]),
            ),
            _ => (None, None),
        };
        if repeat {
            table.meta("repeat", format!("level {level} has the mesh of level {}", cfg.levels[i - 1]));
        } else {
            previous_distinct = Some((h, l2, sd));
        }
        table.push(vec![
            level.to_string(),
            sci(h),
            ndofs.to_string(),
            sci(l2),
            sci(sd),
            opt_sci(eoc_l2),
            opt_sci(eoc_sd),
            out.converged.to_string(),
        ]);
    }
    Ok(table)
}

fn spectrum_options(cfg: &ExperimentConfig) -> SpectrumOptions {
    SpectrumOptions {
        seed: cfg.seed,
        ..SpectrumOptions::default()
    }
}

pub fn run_condition(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let solver = cfg.solver_options(Experiment::Condition.default_solver());
    let mut table = Table::new(&["h", "ndofs", "sigma_max", "sigma_min", "cond"]);
    metadata(&mut table, Experiment::Condition, cfg, &solver);
    table.meta("estimator", "lanczos");
    for (i, &level) in cfg.levels.iter().enumerate() {
        if repeats_previous(cfg, i) {
            table.meta("repeat", format!("level {level} has the mesh of level {}", cfg.levels[i - 1]));
            continue;
        }
        let d = discretize(cfg, cfg.geometry.mesh(level)?, cfg.penalties())?;
        note_warnings(&mut table, &format!("level {level}"), &d);
        let report = match estimate_condition(&d.system.matrix, &spectrum_options(cfg)) {
            Ok(r) => r,
            Err(cutdg::Error::SingularMatrix) => {
                table.meta("skipped", format!("level {level}: singular matrix"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        match (report.sigma_min, report.cond) {
            (Some(smin), Some(cond)) => table.push(vec![
                sci(d.h()),
                d.ndofs().to_string(),
                sci(report.sigma_max),
                sci(smin),
                sci(cond),
            ]),
            _ => table.meta(
                "skipped",
                format!(
                    "level {level}: {}",
                    report.failure.as_deref().unwrap_or("sigma_min estimate failed")
                ),
            ),
        }
    }
    Ok(table)
}

/// One mesh position of a perturbation sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSample {
    pub delta: f64,
    pub sd_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cond: Option<f64>,
}

/// Shifts the first level's mesh through `cfg.deltas()` and solves each.
pub fn sweep(
    cfg: &ExperimentConfig,
    penalties: Penalties,
    solver: &SolverOptions,
    table: &mut Table,
) -> Result<Vec<SweepSample>, HarnessError> {
    let base = cfg.geometry.mesh(cfg.levels[0])?;
    let mut samples = Vec::with_capacity(cfg.delta_samples);
    for delta in cfg.deltas() {
        let d = discretize(cfg, base.shifted(delta)?, penalties)?;
        note_warnings(table, &format!("delta {}", sci(delta)), &d);
        let out = solve_and_measure(&d, solver)?;
        let cond = if cfg.cond {
            match estimate_condition(&d.system.matrix, &spectrum_options(cfg)) {
                Ok(r) => r.cond,
                Err(cutdg::Error::SingularMatrix) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        samples.push(SweepSample {
            delta,
            sd_error: out.errors.map_or(f64::NAN, |e| e.sd_error),
            iterations: out.iterations,
            converged: out.converged,
            cond,
        });
    }
    Ok(samples)
}

fn sweep_header(cfg: &ExperimentConfig, variant: bool) -> Vec<&'static str> {
    let mut h = Vec::new();
    if variant {
        h.push("variant");
    }
    h.extend(["delta", "sd_error", "iters", "converged"]);
    if cfg.cond {
        h.push("cond");
    }
    h
}

fn sweep_row(cfg: &ExperimentConfig, variant: Option<&str>, s: &SweepSample) -> Vec<String> {
    let mut row: Vec<String> = variant.map(str::to_string).into_iter().collect();
    row.extend([
        sci(s.delta),
        sci(s.sd_error),
        s.iterations.to_string(),
        s.converged.to_string(),
    ]);
    if cfg.cond {
        row.push(opt_sci(s.cond));
    }
    row
}

fn sweep_metadata(table: &mut Table, experiment: Experiment, cfg: &ExperimentConfig, solver: &SolverOptions) {
    metadata(table, experiment, cfg, solver);
    table.meta("level", cfg.levels[0]);
    table.meta("delta_samples", cfg.delta_samples);
}

pub fn run_perturbation(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let solver = cfg.solver_options(Experiment::Perturbation.default_solver());
    let mut table = Table::new(&sweep_header(cfg, false));
    sweep_metadata(&mut table, Experiment::Perturbation, cfg, &solver);
    for s in sweep(cfg, cfg.penalties(), &solver, &mut table)? {
        table.push(sweep_row(cfg, None, &s));
    }
    Ok(table)
}

/// The configured penalties and the three single-parameter ablations.
pub fn ablation_variants(base: Penalties) -> [(&'static str, Penalties); 4] {
    [
        ("default", base),
        ("gamman=0", Penalties { gamman: 0.0, ..base }),
        ("gamma0=0", Penalties { gamma0: 0.0, ..base }),
        ("gamma1=0", Penalties { gamma1: 0.0, ..base }),
    ]
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let solver = cfg.solver_options(Experiment::Ablation.default_solver());
    let mut table = Table::new(&sweep_header(cfg, true));
    sweep_metadata(&mut table, Experiment::Ablation, cfg, &solver);
    for (name, penalties) in ablation_variants(cfg.penalties()) {
        for s in sweep(cfg, penalties, &solver, &mut table)? {
            table.push(sweep_row(cfg, Some(name), &s));
        }
    }
    Ok(table)
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<Table, HarnessError> {
    let solver = cfg.solver_options(Experiment::Solve.default_solver());
    let mut table = Table::new(&[
        "level",
        "h",
        "ndofs",
        "l2_error",
        "up_error",
        "sd_error",
        "sdstar_error",
        "stab_seminorm",
        "iters",
        "relative_residual",
        "converged",
    ]);
    metadata(&mut table, Experiment::Solve, cfg, &solver);
    for &level in &cfg.levels {
        let d = discretize(cfg, cfg.geometry.mesh(level)?, cfg.penalties())?;
        note_warnings(&mut table, &format!("level {level}"), &d);
        let out = solve_and_measure(&d, &solver)?;
        let e = out.errors.unwrap_or(ErrorReport {
            l2_error: f64::NAN,
            up_error: f64::NAN,
            sd_error: f64::NAN,
            sdstar_error: f64::NAN,
            stab_seminorm: f64::NAN,
            sdh_error: f64::NAN,
        });
        table.push(vec![
            level.to_string(),
            sci(d.h()),
            d.ndofs().to_string(),
            sci(e.l2_error),
            sci(e.up_error),
            sci(e.sd_error),
            sci(e.sdstar_error),
            sci(e.stab_seminorm),
            out.iterations.to_string(),
            sci(out.relative_residual),
            out.converged.to_string(),
        ]);
    }
    Ok(table)
}
