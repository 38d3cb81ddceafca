//! Stroboscopic evolution under a slowly ramped kick strength,
//! `Ψ_f = U_{λ_M} ⋯ U_{λ_1} ξ_n(λ₀)`, and the cycle protocol that walks a
//! state through the levels.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::FloquetFamily;
use crate::flow::{sweep, SpectralFlow, Track, DEFAULT_STEPS};
use crate::numeric::{unitary_eigensolve, wrap_angle, CVector, UnitaryEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Linear,
    /// `λ₀ + span (1 - cos(πj/M))/2`, slow at both ends.
    Cosine,
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub lambda_start: f64,
    pub span: f64,
    pub steps: usize,
    pub profile: Profile,
}

impl Schedule {
    pub fn linear(lambda_start: f64, span: f64, steps: usize) -> Self {
        Self {
            lambda_start,
            span,
            steps,
            profile: Profile::Linear,
        }
    }

    pub fn lambda_end(&self) -> f64 {
        self.lambda_start + self.span
    }

    /// `λ_1, …, λ_M`; the initial state sits at `λ₀`.
    pub fn lambdas(&self) -> Vec<f64> {
        let m = self.steps as f64;
        (1..=self.steps)
            .map(|j| {
                let s = j as f64 / m;
                let f = match self.profile {
                    Profile::Linear => s,
                    Profile::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * s).cos()),
                };
                if j == self.steps {
                    self.lambda_end()
                } else {
                    self.lambda_start + self.span * f
                }
            })
            .collect()
    }

    /// `C` with `|λ_{j+1} - λ_j| ≤ C/M`.
    pub fn max_step_constant(&self) -> f64 {
        match self.profile {
            Profile::Linear => self.span.abs(),
            Profile::Cosine => 0.5 * std::f64::consts::PI * self.span.abs(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdiabaticRun {
    pub schedule: Schedule,
    pub initial_level: usize,
    /// Level label at `λ₀` of the eigenvector the state should end in, when
    /// the span is a whole number of periods.
    pub target_level: Option<usize>,
    #[serde(skip)]
    pub initial_state: CVector,
    #[serde(skip)]
    pub final_state: CVector,
    #[serde(skip)]
    pub target_state: CVector,
    pub fidelity: f64,
    /// `arg⟨ξ_target|Ψ_f⟩`.
    pub total_phase: f64,
    /// `Σ_j E_n(λ_j) T` mod 2π along the tracked level.
    pub dynamical_phase: f64,
    /// `arg⟨ξ_target|ξ^{pt}(λ_f)⟩` for the parallel-transported eigenvector.
    pub geometric_phase: f64,
    /// `total + dynamical - geometric`, wrapped; vanishes in the adiabatic
    /// limit.
    pub phase_residual: f64,
}

impl AdiabaticRun {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }

    /// Population outside the target level, `1 - fidelity²`.
    pub fn leakage(&self) -> f64 {
        1.0 - self.fidelity * self.fidelity
    }
}

fn evolve(family: &FloquetFamily, lambdas: &[f64], psi: &CVector) -> CVector {
    lambdas.iter().fold(psi.clone(), |x, &l| family.evaluate(l).apply(&x))
}

/// Where the tracked level ends: the target eigenvector and its
/// parallel-transported counterpart.
struct Endpoint {
    target_level: Option<usize>,
    target: CVector,
    transported: CVector,
    track: Track,
}

fn grid_spacing(flow: &SpectralFlow) -> f64 {
    flow.lambda_period() / flow.steps() as f64
}

fn check_flow(flow: &SpectralFlow, family: &FloquetFamily, schedule: &Schedule) -> Result<()> {
    if flow.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            found: flow.dim(),
        });
    }
    if (flow.lambdas()[0] - schedule.lambda_start).abs() > 1e-12 {
        return Err(Error::GridMismatch {
            lambda: schedule.lambda_start,
        });
    }
    if !(schedule.span >= 0.0) {
        return Err(Error::InvalidSchedule("span must be non-negative"));
    }
    Ok(())
}

/// Eigenvector of `eig` closest to `reference`, rephased to a positive
/// overlap with it, and its index.
fn closest(eig: &UnitaryEigen, reference: &CVector) -> (usize, CVector) {
    let (k, o) = (0..eig.dim())
        .map(|k| (k, eig.eigenvectors.column(k).dotc(reference)))
        .fold((0, crate::numeric::c64(0.0, 0.0)), |acc, (k, o)| if o.norm() > acc.1.norm() { (k, o) } else { acc });
    // o = ⟨ξ_k|ref⟩, so ξ_k·o/|o| has a positive overlap with ref
    (k, eig.vector(k) * (o / o.norm()))
}

fn endpoint(family: &FloquetFamily, flow: &SpectralFlow, schedule: &Schedule, n: usize) -> Result<Endpoint> {
    let period = flow.lambda_period();
    let cycles_f = schedule.span / period;
    let whole = cycles_f.round();
    let is_closed = (cycles_f - whole).abs() < 1e-12;
    let cycles = if is_closed { whole as usize } else { cycles_f.ceil() as usize };
    let track = flow.continued_track(n, cycles.max(1))?;
    let h = grid_spacing(flow);
    let g = ((schedule.span / h).round() as usize).min(track.vectors.len() - 1);
    let on_grid = (schedule.span / h - g as f64).abs() < 1e-9;
    let transported = if on_grid {
        track.vectors[g].clone()
    } else {
        let eig = unitary_eigensolve(&family.evaluate(schedule.lambda_end()));
        closest(&eig, &track.vectors[g]).1
    };
    let (target_level, target) = if is_closed {
        let level = flow.permutation_power(n, whole as usize);
        (Some(level), flow.start().vector(level))
    } else {
        let eig = unitary_eigensolve(&family.evaluate(schedule.lambda_end()));
        let (k, _) = closest(&eig, &transported);
        (None, eig.vector(k))
    };
    Ok(Endpoint {
        target_level,
        target,
        transported,
        track,
    })
}

/// Default flow used to label levels: one period at [`DEFAULT_STEPS`].
pub fn reference_flow(family: &FloquetFamily, lambda_start: f64) -> Result<SpectralFlow> {
    sweep(family, lambda_start, DEFAULT_STEPS)
}

pub fn adiabatic_evolve(family: &FloquetFamily, schedule: &Schedule, initial_level: usize) -> Result<AdiabaticRun> {
    let flow = reference_flow(family, schedule.lambda_start)?;
    adiabatic_evolve_with_flow(family, schedule, initial_level, &flow)
}

/// As [`adiabatic_evolve`] with a precomputed flow starting at `λ₀`.
pub fn adiabatic_evolve_with_flow(
    family: &FloquetFamily,
    schedule: &Schedule,
    initial_level: usize,
    flow: &SpectralFlow,
) -> Result<AdiabaticRun> {
    check_flow(flow, family, schedule)?;
    if initial_level >= flow.dim() {
        return Err(Error::IndexOutOfRange {
            index: initial_level,
            dim: flow.dim(),
        });
    }
    let end = endpoint(family, flow, schedule, initial_level)?;
    let lambdas = schedule.lambdas();
    let initial_state = flow.start().vector(initial_level);
    let final_state = evolve(family, &lambdas, &initial_state);
    let overlap = end.target.dotc(&final_state);

    let h = grid_spacing(flow);
    let last = end.track.vectors.len() - 1;
    let dynamical: f64 = lambdas
        .par_iter()
        .map(|&l| {
            let g = (((l - schedule.lambda_start) / h).round() as usize).min(last);
            let eig = unitary_eigensolve(&family.evaluate(l));
            let (k, _) = closest(&eig, &end.track.vectors[g]);
            eig.phases[k]
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let dynamical_phase = wrap_angle(dynamical);
    let geometric_phase = end.target.dotc(&end.transported).arg();
    let total_phase = overlap.arg();
    Ok(AdiabaticRun {
        schedule: schedule.clone(),
        initial_level,
        target_level: end.target_level,
        initial_state,
        final_state,
        target_state: end.target,
        fidelity: overlap.norm().min(1.0),
        total_phase,
        dynamical_phase,
        geometric_phase,
        phase_residual: wrap_angle(total_phase + dynamical_phase - geometric_phase),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseDecomposition {
    pub dynamical: f64,
    pub geometric: f64,
    pub residual: f64,
}

/// Phase bookkeeping of a run from the tracked levels of `flow`, whose grid
/// must contain every `λ_j` of the schedule.
pub fn phase_decompose(run: &AdiabaticRun, flow: &SpectralFlow) -> Result<PhaseDecomposition> {
    let schedule = &run.schedule;
    if (flow.lambdas()[0] - schedule.lambda_start).abs() > 1e-12 {
        return Err(Error::GridMismatch {
            lambda: schedule.lambda_start,
        });
    }
    let period = flow.lambda_period();
    let cycles = (schedule.span / period).ceil().max(1.0) as usize;
    let track = flow.continued_track(run.initial_level, cycles)?;
    let h = grid_spacing(flow);
    let t = flow.period_t();
    let mut dynamical = 0.0;
    let mut last = 0;
    for l in schedule.lambdas() {
        let x = (l - schedule.lambda_start) / h;
        let g = x.round();
        if (x - g).abs() > 1e-9 || g < 0.0 || g as usize >= track.energies.len() {
            return Err(Error::GridMismatch { lambda: l });
        }
        last = g as usize;
        dynamical += track.energies[last] * t;
    }
    let dynamical = wrap_angle(dynamical);
    let geometric = run.target_state.dotc(&track.vectors[last]).arg();
    Ok(PhaseDecomposition {
        dynamical,
        geometric,
        residual: wrap_angle(run.total_phase + dynamical - geometric),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergencePoint {
    pub steps: usize,
    pub fidelity: f64,
    pub infidelity: f64,
}

/// Infidelity after a ramp over `span` for each step count, evaluated in
/// parallel.
pub fn convergence_scan(
    family: &FloquetFamily,
    span: f64,
    ms: &[usize],
    initial_level: usize,
) -> Result<Vec<ConvergencePoint>> {
    let flow = reference_flow(family, 0.0)?;
    convergence_scan_with_flow(family, span, ms, initial_level, &flow)
}

pub fn convergence_scan_with_flow(
    family: &FloquetFamily,
    span: f64,
    ms: &[usize],
    initial_level: usize,
    flow: &SpectralFlow,
) -> Result<Vec<ConvergencePoint>> {
    let lambda0 = flow.lambdas()[0];
    let probe = Schedule::linear(lambda0, span, 0);
    check_flow(flow, family, &probe)?;
    let end = endpoint(family, flow, &probe, initial_level)?;
    let psi0 = flow.start().vector(initial_level);
    Ok(ms
        .par_iter()
        .map(|&m| {
            let psi = evolve(family, &Schedule::linear(lambda0, span, m).lambdas(), &psi0);
            let fidelity = end.target.dotc(&psi).norm().min(1.0);
            ConvergencePoint {
                steps: m,
                fidelity,
                infidelity: 1.0 - fidelity,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub expected_level: usize,
    /// `|⟨ξ_expected(λ₀)|Ψ⟩|` after this cycle.
    pub fidelity: f64,
    pub dominant_level: usize,
    pub overlaps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleRun {
    pub steps_per_cycle: usize,
    pub cycles: usize,
    pub initial_level: usize,
    pub records: Vec<CycleRecord>,
    #[serde(skip)]
    pub final_state: CVector,
}

/// Repeats the ramp `λ₀ → λ₀ + Λ` `k` times, resetting λ after each cycle
/// (the family is periodic), and records where the state sits.
pub fn anholonomic_cycle(family: &FloquetFamily, steps: usize, k: usize, initial_level: usize) -> Result<CycleRun> {
    let flow = reference_flow(family, 0.0)?;
    anholonomic_cycle_with_flow(family, steps, k, initial_level, &flow)
}

pub fn anholonomic_cycle_with_flow(
    family: &FloquetFamily,
    steps: usize,
    k: usize,
    initial_level: usize,
    flow: &SpectralFlow,
) -> Result<CycleRun> {
    if initial_level >= flow.dim() {
        return Err(Error::IndexOutOfRange {
            index: initial_level,
            dim: flow.dim(),
        });
    }
    let lambda0 = flow.lambdas()[0];
    let lambdas = Schedule::linear(lambda0, flow.lambda_period(), steps).lambdas();
    let start = flow.start();
    let mut psi = start.vector(initial_level);
    let mut records = Vec::with_capacity(k);
    for c in 1..=k {
        psi = evolve(family, &lambdas, &psi);
        let overlaps: Vec<f64> = (0..flow.dim()).map(|m| start.vector(m).dotc(&psi).norm()).collect();
        let dominant_level = overlaps
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (m, &o)| if o > acc.1 { (m, o) } else { acc })
            .0;
        let expected_level = flow.permutation_power(initial_level, c);
        records.push(CycleRecord {
            cycle: c,
            expected_level,
            fidelity: overlaps[expected_level],
            dominant_level,
            overlaps,
        });
    }
    Ok(CycleRun {
        steps_per_cycle: steps,
        cycles: k,
        initial_level,
        records,
        final_state: psi,
    })
}

/// `U₀^steps ψ`: the kick switched off after a completed cycle.
pub fn evolve_unperturbed(family: &FloquetFamily, psi: &CVector, steps: usize) -> CVector {
    (0..steps).fold(psi.clone(), |x, _| family.u0().apply(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::presets;
    use crate::flow::{sweep_with, SweepOptions};
    use crate::numeric::haar_random_unitary;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn schedule_endpoints() {
        let s = Schedule::linear(0.5, TAU, 8);
        let l = s.lambdas();
        assert_eq!(l.len(), 8);
        assert!((l[0] - (0.5 + TAU / 8.0)).abs() < 1e-15);
        assert_eq!(l[7], 0.5 + TAU);
        let c = Schedule {
            profile: Profile::Cosine,
            ..s.clone()
        };
        let l = c.lambdas();
        assert_eq!(l[7], 0.5 + TAU);
        let mut prev = 0.5;
        for x in l {
            assert!(x - prev <= c.max_step_constant() / 8.0 + 1e-15);
            prev = x;
        }
        assert!(Schedule::linear(0.0, 1.0, 0).lambdas().is_empty());
    }

    #[test]
    fn empty_schedule_is_identity() {
        let f = presets::twolevel_pi();
        let run = adiabatic_evolve(&f, &Schedule::linear(0.0, 0.0, 0), 0).unwrap();
        assert_eq!(run.final_state, run.initial_state);
        assert!((run.fidelity - 1.0).abs() < 1e-15);
        assert_eq!(run.target_level, Some(0));
    }

    #[test]
    fn twolevel_cycle_reaches_upper_level() {
        let f = presets::twolevel_pi();
        let run = adiabatic_evolve(&f, &Schedule::linear(0.0, TAU, 1600), 0).unwrap();
        assert_eq!(run.target_level, Some(1));
        assert!(run.fidelity >= 0.999);
        assert!((run.final_state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twolevel_dynamical_phase_direct_sum() {
        let f = presets::twolevel_pi();
        let m = 1000;
        let run = adiabatic_evolve(&f, &Schedule::linear(0.0, TAU, m), 0).unwrap();
        // E₀(λ) = λ/2 with T = 1; summation oracle
        let direct: f64 = (1..=m).map(|j| 0.5 * TAU * j as f64 / m as f64).sum();
        assert!(wrap_angle(run.dynamical_phase - direct).abs() < 1e-6);
    }

    #[test]
    fn twolevel_phase_decomposition() {
        let f = presets::twolevel_pi();
        let flow = sweep(&f, 0.0, 6400).unwrap();
        let run = adiabatic_evolve_with_flow(&f, &Schedule::linear(0.0, TAU, 6400), 0, &flow).unwrap();
        let p = phase_decompose(&run, &flow).unwrap();
        assert!(p.geometric.abs() < 1e-9);
        assert!(p.residual.abs() <= 1e-3);
        assert!(wrap_angle(p.dynamical - run.dynamical_phase).abs() < 1e-9);

        let two = adiabatic_evolve_with_flow(&f, &Schedule::linear(0.0, 2.0 * TAU, 12800), 0, &flow).unwrap();
        let p = phase_decompose(&two, &flow).unwrap();
        assert!((p.geometric.abs() - PI).abs() < 1e-9);
        assert!(p.residual.abs() <= 1e-3);
    }

    #[test]
    fn phase_decomposition_grid_mismatch() {
        let f = presets::twolevel_pi();
        let flow = sweep(&f, 0.0, 100).unwrap();
        let run = adiabatic_evolve_with_flow(&f, &Schedule::linear(0.0, TAU, 33), 0, &flow).unwrap();
        assert!(matches!(phase_decompose(&run, &flow), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn unperturbed_family_phases() {
        let f = FloquetFamily::unperturbed(haar_random_unitary(3, 5).unwrap(), 1.0).unwrap();
        let flow = sweep(&f, 0.0, 64).unwrap();
        let m = 64;
        let run = adiabatic_evolve_with_flow(&f, &Schedule::linear(0.0, TAU, m), 1, &flow).unwrap();
        let p = phase_decompose(&run, &flow).unwrap();
        let e = flow.start().quasienergies[1];
        assert!(wrap_angle(p.dynamical - m as f64 * e).abs() < 1e-9);
        assert!(p.geometric.abs() < 1e-12);
        let scan = convergence_scan_with_flow(&f, TAU, &[10, 20, 40], 1, &flow).unwrap();
        assert!(scan.iter().all(|c| c.infidelity.abs() < 1e-12));
    }

    #[test]
    fn cycles_walk_through_levels() {
        let f = presets::twolevel_pi();
        let run = anholonomic_cycle(&f, 1600, 2, 0).unwrap();
        assert_eq!(run.records[0].dominant_level, 1);
        assert_eq!(run.records[1].dominant_level, 0);
        assert!(run.records[1].fidelity >= 0.998);
        let none = anholonomic_cycle(&f, 1600, 0, 0).unwrap();
        assert!(none.records.is_empty());
        assert_eq!(none.final_state, sweep(&f, 0.0, 16).unwrap().start().vector(0));
    }

    #[test]
    fn switch_off_keeps_overlap() {
        let f = presets::random_cyclic(3, 9).unwrap();
        let flow = reference_flow(&f, 0.0).unwrap();
        let run = anholonomic_cycle_with_flow(&f, 800, 1, 0, &flow).unwrap();
        let target = flow.start().vector(flow.permutation()[0]);
        let o0 = target.dotc(&run.final_state).norm();
        for steps in [1, 7, 50] {
            let psi = evolve_unperturbed(&f, &run.final_state, steps);
            assert!((target.dotc(&psi).norm() - o0).abs() < 1e-12);
        }
    }

    #[test]
    fn open_span_targets_instantaneous_eigenvector() {
        let f = presets::random_cyclic(3, 2).unwrap();
        let flow = sweep_with(&f, 0.0, &SweepOptions::default()).unwrap();
        let run = adiabatic_evolve_with_flow(&f, &Schedule::linear(0.0, 2.0, 4000), 0, &flow).unwrap();
        assert_eq!(run.target_level, None);
        let u = f.evaluate(2.0);
        let x = &run.target_state;
        let z = x.dotc(&u.apply(x));
        assert!((u.apply(x) - x * z).norm() < 1e-9);
        assert!(run.fidelity > 0.9);
    }
}
