use std::io::Write;

use floquet_anholonomy::adiabatic::{
    adiabatic_evolve_with_flow, anholonomic_cycle_with_flow, convergence_scan_with_flow, ConvergencePoint,
    CycleRecord, Schedule,
};
use floquet_anholonomy::floquet::{presets, trivial_eigenvector_report, TrivialReport};
use floquet_anholonomy::flow::{certify_anholonomy, sweep_with, winding_report, ClauseCheck, SweepOptions};
use floquet_anholonomy::structure::{
    degeneracy_report, is_cyclic, reduce_hilbert_space, CyclicityReport, DegeneracyReport, TrivialBlock,
};
use floquet_anholonomy::numeric::CVector;
use floquet_anholonomy::{Error, FloquetFamily, SpectralFlow};
use serde::Serialize;

use crate::config::Scenario;
use crate::output::{flow_csv, toml_report, write_file};
use crate::{CliError, RunArgs};

const TRIVIAL_TOL: f64 = 1e-9;

fn kick_vector(family: &FloquetFamily) -> Result<CVector, CliError> {
    family
        .perturbation()
        .rank1()
        .map(|p| p.vector().clone())
        .ok_or_else(|| CliError::Config("scenario must use a rank-1 kick".into()))
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub scenario: String,
    pub dimension: usize,
    pub steps: usize,
    pub cycles: usize,
    pub lambda_start: f64,
    pub lambda_period: f64,
    pub period_t: f64,
    /// Dimension of the space the certificate refers to.
    pub certified_dimension: usize,
    pub trivial_levels: usize,
    /// Holonomy of the full family, including trivial levels.
    pub full_permutation: Vec<usize>,
    pub permutation: Vec<usize>,
    pub delta_e: Vec<f64>,
    pub delta_n: i64,
    pub windings: Vec<i64>,
    pub shift: Option<usize>,
    pub min_gap: f64,
    pub min_step_overlap: f64,
    pub anholonomy: bool,
    pub certified: bool,
    pub clauses: Vec<ClauseCheck>,
}

pub struct SweepOutcome {
    pub report: SweepReport,
    pub flow: SpectralFlow,
}

/// Sweeps the scenario; when `v` misses some eigenvectors the certificate is
/// computed on the reduced family, and the tracks of the full family are kept
/// for output whenever its spectrum allows it.
pub fn run_sweep(scn: &Scenario, stderr: &mut dyn Write) -> Result<SweepOutcome, CliError> {
    let family = &scn.family;
    let v = kick_vector(family)?;
    let opts = SweepOptions {
        steps: scn.steps,
        cycles: scn.cycles,
        ..SweepOptions::default()
    };
    let trivial = trivial_eigenvector_report(family.u0(), &v, TRIVIAL_TOL)?;
    let reduced = if trivial.is_empty() {
        None
    } else {
        match reduce_hilbert_space(family.u0(), &v, TRIVIAL_TOL) {
            Ok(r) => {
                writeln!(
                    stderr,
                    "warning: {} trivial eigenvector(s) found; anholonomy is certified on the reduced space",
                    trivial.first_kind.len()
                )?;
                Some(r.reduced_family(family.period_t())?)
            }
            // nothing left to certify on; the full flow carries the verdict
            Err(e @ (Error::VIsEigenvector | Error::EmptyReduction)) => {
                writeln!(stderr, "warning: {e}; certifying the full family")?;
                None
            }
            Err(e) => return Err(e.into()),
        }
    };
    let cert_flow = match &reduced {
        Some(f) => sweep_with(f, scn.lambda_start, &opts)?,
        None => sweep_with(family, scn.lambda_start, &opts)?,
    };
    let flow = match &reduced {
        None => cert_flow.clone(),
        Some(_) => match sweep_with(family, scn.lambda_start, &opts) {
            Ok(f) => f,
            Err(Error::DegenerateSpectrum { .. }) => {
                writeln!(stderr, "warning: full spectrum is degenerate; writing reduced tracks")?;
                cert_flow.clone()
            }
            Err(e) => return Err(e.into()),
        },
    };
    let cert = certify_anholonomy(&cert_flow);
    let winding = winding_report(&cert_flow);
    let report = SweepReport {
        scenario: scn.name.clone(),
        dimension: family.dim(),
        steps: scn.steps,
        cycles: scn.cycles,
        lambda_start: scn.lambda_start,
        lambda_period: cert_flow.lambda_period(),
        period_t: cert_flow.period_t(),
        certified_dimension: cert_flow.dim(),
        trivial_levels: trivial.first_kind.len(),
        full_permutation: flow.permutation().to_vec(),
        permutation: cert.permutation.clone(),
        delta_e: cert.delta_e.clone(),
        delta_n: winding.delta_n,
        windings: winding.windings,
        shift: winding.shift,
        min_gap: cert_flow.min_gap(),
        min_step_overlap: cert_flow.min_step_overlap(),
        anholonomy: cert.anholonomy,
        certified: cert.passed(),
        clauses: cert.clauses,
    };
    Ok(SweepOutcome { report, flow })
}

pub fn sweep(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (scn, out) = args.scenario()?;
    let outcome = run_sweep(&scn, stderr)?;
    let csv_path = write_file(&out, &format!("{}_flow.csv", scn.name), &flow_csv(&outcome.flow)?)?;
    let report_path = write_file(
        &out,
        &format!("{}_sweep.toml", scn.name),
        toml_report(&outcome.report)?.as_bytes(),
    )?;
    let r = &outcome.report;
    writeln!(stdout, "scenario {} (N = {})", r.scenario, r.dimension)?;
    writeln!(stdout, "permutation {:?}, delta_n = {}", r.permutation, r.delta_n)?;
    for c in &r.clauses {
        writeln!(
            stdout,
            "clause {:?}: residual {:.3e} {}",
            c.clause,
            c.residual,
            if c.pass { "pass" } else { "FAIL" }
        )?;
    }
    writeln!(stdout, "wrote {} and {}", csv_path.display(), report_path.display())?;
    if !r.certified && !args.no_certify {
        let failing = r.clauses.iter().find(|c| !c.pass).expect("a failing clause");
        return Err(CliError::Certification(format!(
            "clause {} residual {:e}",
            failing.clause, failing.residual
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub target_level: Option<usize>,
    pub fidelity: f64,
    pub infidelity: f64,
    pub leakage: f64,
    pub total_phase: f64,
    pub dynamical_phase: f64,
    pub geometric_phase: f64,
    pub phase_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct AdiabaticReport {
    pub scenario: String,
    pub dimension: usize,
    pub initial_level: usize,
    pub steps_per_cycle: usize,
    pub cycles: usize,
    pub span: f64,
    /// True when no kick step is applied (`M = 0`).
    pub identity: bool,
    pub run: RunSummary,
    pub per_cycle: Vec<CycleRecord>,
    pub convergence: Vec<ConvergencePoint>,
}

pub fn run_adiabatic(scn: &Scenario) -> Result<AdiabaticReport, CliError> {
    let family = &scn.family;
    let flow = sweep_with(
        family,
        scn.lambda_start,
        &SweepOptions {
            steps: scn.steps,
            ..SweepOptions::default()
        },
    )?;
    let m = scn.adiabatic_steps[0];
    let identity = m == 0 || scn.cycles == 0;
    let schedule = if identity {
        Schedule::linear(scn.lambda_start, 0.0, 0)
    } else {
        Schedule::linear(scn.lambda_start, scn.span(), m * scn.cycles)
    };
    let run = adiabatic_evolve_with_flow(family, &schedule, scn.initial_level, &flow)?;
    let per_cycle = if identity {
        Vec::new()
    } else {
        anholonomic_cycle_with_flow(family, m, scn.cycles, scn.initial_level, &flow)?.records
    };
    let convergence = if scn.adiabatic_steps.len() > 1 && !identity {
        let ms: Vec<usize> = scn.adiabatic_steps.iter().map(|&m| m * scn.cycles).collect();
        convergence_scan_with_flow(family, scn.span(), &ms, scn.initial_level, &flow)?
    } else {
        Vec::new()
    };
    Ok(AdiabaticReport {
        scenario: scn.name.clone(),
        dimension: family.dim(),
        initial_level: scn.initial_level,
        steps_per_cycle: m,
        cycles: if identity { 0 } else { scn.cycles },
        span: schedule.span,
        identity,
        run: RunSummary {
            target_level: run.target_level,
            fidelity: run.fidelity,
            infidelity: run.infidelity(),
            leakage: run.leakage(),
            total_phase: run.total_phase,
            dynamical_phase: run.dynamical_phase,
            geometric_phase: run.geometric_phase,
            phase_residual: run.phase_residual,
        },
        per_cycle,
        convergence,
    })
}

pub fn adiabatic(args: &RunArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let (scn, out) = args.scenario()?;
    let report = run_adiabatic(&scn)?;
    let path = write_file(
        &out,
        &format!("{}_adiabatic.toml", scn.name),
        toml_report(&report)?.as_bytes(),
    )?;
    writeln!(stdout, "scenario {} (N = {})", report.scenario, report.dimension)?;
    writeln!(
        stdout,
        "level {} -> {:?}: fidelity {:.9}",
        report.initial_level, report.run.target_level, report.run.fidelity
    )?;
    for c in &report.per_cycle {
        writeln!(
            stdout,
            "cycle {}: expected level {}, dominant level {}, fidelity {:.9}",
            c.cycle, c.expected_level, c.dominant_level, c.fidelity
        )?;
    }
    for c in &report.convergence {
        writeln!(stdout, "M = {}: infidelity {:.3e}", c.steps, c.infidelity)?;
    }
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ReductionSummary {
    pub reduced_dimension: Option<usize>,
    pub trivial_blocks: Vec<TrivialBlock>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub dimension: usize,
    pub degeneracy: DegeneracyReport,
    pub cyclicity: CyclicityReport,
    pub trivial: TrivialReport,
    pub reduction: ReductionSummary,
}

pub fn run_analyze(scn: &Scenario) -> Result<AnalysisReport, CliError> {
    let family = &scn.family;
    let v = kick_vector(family)?;
    let reduction = match reduce_hilbert_space(family.u0(), &v, TRIVIAL_TOL) {
        Ok(r) => ReductionSummary {
            reduced_dimension: Some(r.dim()),
            trivial_blocks: r.trivial_blocks,
            error: None,
        },
        Err(e @ (Error::VIsEigenvector | Error::EmptyReduction)) => ReductionSummary {
            reduced_dimension: None,
            trivial_blocks: Vec::new(),
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    };
    Ok(AnalysisReport {
        scenario: scn.name.clone(),
        dimension: family.dim(),
        degeneracy: degeneracy_report(family.u0(), floquet_anholonomy::numeric::TOL_DEG),
        cyclicity: is_cyclic(family.u0(), &v, TRIVIAL_TOL)?,
        trivial: trivial_eigenvector_report(family.u0(), &v, TRIVIAL_TOL)?,
        reduction,
    })
}

pub fn analyze(args: &RunArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), CliError> {
    let (scn, out) = args.scenario()?;
    let report = run_analyze(&scn)?;
    let path = write_file(
        &out,
        &format!("{}_analysis.toml", scn.name),
        toml_report(&report)?.as_bytes(),
    )?;
    let c = &report.cyclicity;
    writeln!(stdout, "scenario {} (N = {})", report.scenario, report.dimension)?;
    writeln!(
        stdout,
        "cyclic: {} (krylov rank {}, degenerate {})",
        c.is_cyclic, c.krylov_rank, c.degenerate
    )?;
    for cl in report.degeneracy.clusters.iter().filter(|cl| cl.indices.len() > 1) {
        writeln!(stdout, "degenerate cluster {:?} at phase {:.12}", cl.indices, cl.phases[0])?;
    }
    match report.reduction.reduced_dimension {
        Some(d) => writeln!(stdout, "reduced dimension {d}")?,
        None => writeln!(stdout, "no reduction: {}", report.reduction.error.as_deref().unwrap_or(""))?,
    }
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(())
}

pub fn list_presets(stdout: &mut dyn Write) -> Result<(), CliError> {
    let notes = [
        "two levels, H0 = diag(0, pi), v = (|up> - i|down>)/sqrt 2",
        "two levels, H0 = diag(0, pi), v = cos(pi/8)|up> + sin(pi/8)|down>",
        "Haar U0 and Gaussian v (needs --seed; dimension via --random N, default 5)",
        "N = 5, v supported on 3 eigenvectors of U0 (needs --seed)",
    ];
    for (name, note) in presets::PRESET_NAMES.iter().zip(notes) {
        writeln!(stdout, "{name:<16} {note}")?;
    }
    Ok(())
}
