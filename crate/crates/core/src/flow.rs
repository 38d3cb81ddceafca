//! Quasienergy branches, continuation of levels along λ, and the holonomy
//! of a full parameter cycle.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::FloquetFamily;
use crate::numeric::{
    c64, outer, unitary_eigensolve, wrap_angle, CMatrix, CVector, UnitaryEigen, UnitaryOperator, C64,
};

pub const DEFAULT_STEPS: usize = 2048;
pub const MATCH_FLOOR: f64 = 0.9;
/// Two candidate `|overlap|²` closer than this trigger a global assignment.
pub const TIE_MARGIN: f64 = 0.05;
pub const TOL_CERT: f64 = 1e-8;

/// Which eigenvalue gets the label 0.
#[derive(Debug, Clone, Default)]
pub enum GroundRule {
    /// Smallest eigenphase in `[0, 2π)`.
    #[default]
    LowestPhase,
    /// Eigenvector with the largest overlap with the given reference.
    IndexOfVector(CVector),
}

/// Spectrum of one Floquet operator with quasienergies
/// `E_0 < E_1 < … < E_{N-1} < E_0 + 2π/T`.
#[derive(Debug, Clone)]
pub struct QuasienergyBranch {
    pub lambda: f64,
    pub period_t: f64,
    pub quasienergies: Vec<f64>,
    pub eigenvalues: Vec<C64>,
    pub eigenvectors: CMatrix,
    /// Position of the ground level in ascending-phase order.
    pub ground_index: usize,
}

impl QuasienergyBranch {
    pub fn dim(&self) -> usize {
        self.quasienergies.len()
    }

    pub fn vector(&self, n: usize) -> CVector {
        self.eigenvectors.column(n).into_owned()
    }
}

fn degenerate(lambda: f64, eig: &UnitaryEigen) -> Error {
    Error::DegenerateSpectrum {
        lambda,
        clusters: eig.degenerate_clusters(),
    }
}

fn branch_from_eigen(eig: &UnitaryEigen, period_t: f64, rule: &GroundRule, lambda: f64) -> Result<QuasienergyBranch> {
    if eig.is_degenerate() {
        return Err(degenerate(lambda, eig));
    }
    let n = eig.dim();
    let ground = match rule {
        GroundRule::LowestPhase => 0,
        GroundRule::IndexOfVector(r) => {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            (0..n)
                .map(|k| eig.eigenvectors.column(k).dotc(r).norm())
                .enumerate()
                .fold((0, -1.0), |acc, (k, o)| if o > acc.1 { (k, o) } else { acc })
                .0
        }
    };
    let order: Vec<usize> = (0..n).map(|k| (ground + k) % n).collect();
    let quasienergies = order
        .iter()
        .map(|&k| {
            let shift = if k < ground { TAU } else { 0.0 };
            (eig.phases[k] + shift) / period_t
        })
        .collect();
    Ok(QuasienergyBranch {
        lambda,
        period_t,
        quasienergies,
        eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        eigenvectors: CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]),
        ground_index: ground,
    })
}

pub fn quasienergy_branch(u: &UnitaryOperator, period_t: f64, rule: &GroundRule) -> Result<QuasienergyBranch> {
    branch_from_eigen(&unitary_eigensolve(u), period_t, rule, 0.0)
}

fn branch_at(family: &FloquetFamily, lambda: f64) -> Result<QuasienergyBranch> {
    let eig = unitary_eigensolve(&family.evaluate(lambda));
    branch_from_eigen(&eig, family.period_t(), &GroundRule::LowestPhase, lambda)
}

fn check_level(n: usize, dim: usize) -> Result<()> {
    if n >= dim {
        return Err(Error::IndexOutOfRange { index: n, dim });
    }
    Ok(())
}

/// `∂E_n/∂λ = ⟨ξ_n|V|ξ_n⟩/T`, levels labeled by ascending eigenphase at λ.
pub fn level_velocity(family: &FloquetFamily, lambda: f64, n: usize) -> Result<f64> {
    check_level(n, family.dim())?;
    let b = branch_at(family, lambda)?;
    Ok(family.perturbation().expectation(&b.vector(n)) / family.period_t())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauge {
    /// `⟨ξ_n|∂ξ_n⟩ = 0`.
    ParallelTransport,
    /// Prescribed gauge potential `A_n = i⟨ξ_n|∂ξ_n⟩`.
    Potential(f64),
}

#[derive(Debug, Clone)]
pub struct EigenvectorDerivative {
    pub eigenvector: CVector,
    pub derivative: CVector,
}

/// `∂ξ_n = -iA_n ξ_n + i Σ_{m≠n} z_m ⟨ξ_m|V|ξ_n⟩ / (z_m - z_n) ξ_m`, with the
/// derivative expressed in the gauge of the returned eigenvector.
pub fn eigenvector_derivative(family: &FloquetFamily, lambda: f64, n: usize, gauge: Gauge) -> Result<EigenvectorDerivative> {
    check_level(n, family.dim())?;
    let b = branch_at(family, lambda)?;
    let xi_n = b.vector(n);
    let potential = match gauge {
        Gauge::ParallelTransport => 0.0,
        Gauge::Potential(a) => a,
    };
    let mut d = &xi_n * c64(0.0, -potential);
    for m in 0..b.dim() {
        if m == n {
            continue;
        }
        let xi_m = b.vector(m);
        let vmn = family.perturbation().element(&xi_m, &xi_n);
        let zm = b.eigenvalues[m];
        d += xi_m * (c64(0.0, 1.0) * zm * vmn / (zm - b.eigenvalues[n]));
    }
    Ok(EigenvectorDerivative {
        eigenvector: xi_n,
        derivative: d,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Grid steps per parameter period.
    pub steps: usize,
    pub cycles: usize,
    pub match_floor: f64,
    pub ground: GroundRule,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            cycles: 1,
            match_floor: MATCH_FLOOR,
            ground: GroundRule::LowestPhase,
        }
    }
}

/// Tracked levels over `cycles` parameter periods starting at `λ₀`.
#[derive(Debug, Clone)]
pub struct SpectralFlow {
    lambdas: Vec<f64>,
    /// `energies[n][j]`, unwrapped.
    energies: Vec<Vec<f64>>,
    /// Column `n` of `vectors[j]` is `ξ_n(λ_j)` in the positive-overlap gauge.
    vectors: Vec<CMatrix>,
    weights: Vec<Vec<f64>>,
    permutation: Vec<usize>,
    start: QuasienergyBranch,
    trace_v: f64,
    lambda_period: f64,
    steps: usize,
    cycles: usize,
    min_gap: f64,
    min_step_overlap: f64,
}

/// Column assigned to each row of a matrix of `|overlap|²`. Greedy unless a
/// row has a near tie or two rows pick the same column.
fn assign(o2: &DMatrix<f64>) -> Vec<usize> {
    let n = o2.nrows();
    let mut greedy = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut ambiguous = false;
    for i in 0..n {
        let (mut best, mut first, mut second) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for j in 0..n {
            let x = o2[(i, j)];
            if x > first {
                second = first;
                first = x;
                best = j;
            } else if x > second {
                second = x;
            }
        }
        if first - second < TIE_MARGIN || used[best] {
            ambiguous = true;
        }
        used[best] = true;
        greedy.push(best);
    }
    if !ambiguous {
        return greedy;
    }
    let weights = Matrix::from_fn(n, n, |(i, j)| (o2[(i, j)] * 1e12).round() as i64);
    kuhn_munkres(&weights).1
}

fn overlap_sq(a: &CMatrix, b: &CMatrix) -> DMatrix<f64> {
    (a.adjoint() * b).map(|z| z.norm_sqr())
}

pub fn sweep(family: &FloquetFamily, lambda0: f64, steps: usize) -> Result<SpectralFlow> {
    sweep_with(
        family,
        lambda0,
        &SweepOptions {
            steps,
            ..SweepOptions::default()
        },
    )
}

pub fn sweep_with(family: &FloquetFamily, lambda0: f64, opts: &SweepOptions) -> Result<SpectralFlow> {
    let period = family.lambda_period().ok_or(Error::MissingPeriod)?;
    if opts.steps == 0 || opts.cycles == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let n = family.dim();
    let t = family.period_t();
    let total = opts.steps * opts.cycles;
    let lambdas: Vec<f64> = (0..=total)
        .map(|j| lambda0 + period * j as f64 / opts.steps as f64)
        .collect();
    let eigs: Vec<UnitaryEigen> = lambdas
        .par_iter()
        .map(|&l| unitary_eigensolve(&family.evaluate(l)))
        .collect();
    let mut min_gap = f64::INFINITY;
    for (eig, &l) in eigs.iter().zip(&lambdas) {
        if eig.is_degenerate() {
            return Err(degenerate(l, eig));
        }
        min_gap = min_gap.min(eig.min_gap());
    }

    let start = branch_from_eigen(&eigs[0], t, &opts.ground, lambda0)?;
    let mut energies: Vec<Vec<f64>> = start.quasienergies.iter().map(|&e| vec![e]).collect();
    let mut vectors = Vec::with_capacity(total + 1);
    vectors.push(start.eigenvectors.clone());
    let mut min_step_overlap = 1.0f64;
    for j in 1..=total {
        let eig = &eigs[j];
        let prev = &vectors[j - 1];
        let o2 = overlap_sq(prev, &eig.eigenvectors);
        let cols = assign(&o2);
        let mut next = CMatrix::zeros(n, n);
        for (track, &col) in cols.iter().enumerate() {
            let x = eig.eigenvectors.column(col);
            let o = prev.column(track).dotc(&x);
            let mag = o.norm();
            min_step_overlap = min_step_overlap.min(mag);
            if mag < opts.match_floor {
                return Err(Error::TrackingAmbiguity {
                    step: j,
                    lambda: lambdas[j],
                    overlap: mag,
                });
            }
            next.set_column(track, &(x * (o.conj() / mag)));
            let e_prev = energies[track][j - 1];
            let e = e_prev + wrap_angle(eig.phases[col] - e_prev * t) / t;
            energies[track].push(e);
        }
        vectors.push(next);
    }

    let o2 = overlap_sq(&start.eigenvectors, &vectors[opts.steps]);
    // assign() maps rows (start levels) to columns (tracks); invert it
    let start_of_track = assign(&o2.transpose());
    let weights = (0..n)
        .map(|k| {
            vectors
                .iter()
                .map(|m| family.perturbation().expectation(&m.column(k).into_owned()))
                .collect()
        })
        .collect();

    Ok(SpectralFlow {
        lambdas,
        energies,
        vectors,
        weights,
        permutation: start_of_track,
        start,
        trace_v: family.perturbation().trace(),
        lambda_period: period,
        steps: opts.steps,
        cycles: opts.cycles,
        min_gap,
        min_step_overlap,
    })
}

/// A level followed over several periods, continued through the holonomy
/// permutation when the sweep itself is shorter.
#[derive(Debug, Clone)]
pub struct Track {
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub vectors: Vec<CVector>,
    pub end_level: usize,
}

impl SpectralFlow {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn energies(&self, n: usize) -> &[f64] {
        &self.energies[n]
    }

    /// `⟨ξ_n|V|ξ_n⟩` along the grid.
    pub fn weights(&self, n: usize) -> &[f64] {
        &self.weights[n]
    }

    /// `|⟨ξ_n(λ₀)|ξ_n(λ)⟩|²` along the grid.
    pub fn survival(&self, n: usize) -> Vec<f64> {
        let x0 = self.vectors[0].column(n);
        self.vectors.iter().map(|m| x0.dotc(&m.column(n)).norm_sqr()).collect()
    }

    pub fn vector(&self, j: usize, n: usize) -> CVector {
        self.vectors[j].column(n).into_owned()
    }

    pub fn vectors_at(&self, j: usize) -> &CMatrix {
        &self.vectors[j]
    }

    pub fn start(&self) -> &QuasienergyBranch {
        &self.start
    }

    /// `π(n)`: the level at `λ₀` that track `n` reaches after one period.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn permutation_power(&self, n: usize, k: usize) -> usize {
        (0..k).fold(n, |m, _| self.permutation[m])
    }

    /// `E_n(λ₀ + Λ) - E_n(λ₀)` of the unwrapped tracks.
    pub fn delta_e(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e[self.steps] - e[0]).collect()
    }

    /// `ΔE_n` from trapezoidal integration of the level velocity, a
    /// cross-check of [`SpectralFlow::delta_e`].
    pub fn integrated_delta_e(&self) -> Vec<f64> {
        let h = self.lambda_period / self.steps as f64;
        let t = self.period_t();
        self.weights
            .iter()
            .map(|w| {
                let inner: f64 = w[1..self.steps].iter().sum();
                h * (inner + 0.5 * (w[0] + w[self.steps])) / t
            })
            .collect()
    }

    pub fn trace_v(&self) -> f64 {
        self.trace_v
    }

    pub fn lambda_period(&self) -> f64 {
        self.lambda_period
    }

    pub fn period_t(&self) -> f64 {
        self.start.period_t
    }

    pub fn quasienergy_period(&self) -> f64 {
        TAU / self.period_t()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn min_step_overlap(&self) -> f64 {
        self.min_step_overlap
    }

    /// True when some level fails to return to itself after one period.
    pub fn exhibits_anholonomy(&self) -> bool {
        self.permutation.iter().enumerate().any(|(n, &m)| n != m)
    }

    /// Grid index of `λ`, if it is a grid point.
    pub fn grid_index(&self, lambda: f64) -> Option<usize> {
        let h = self.lambda_period / self.steps as f64;
        let x = (lambda - self.lambdas[0]) / h;
        let j = x.round();
        if j < 0.0 || j as usize >= self.lambdas.len() || (x - j).abs() > 1e-9 {
            return None;
        }
        Some(j as usize)
    }

    /// Track of level `n` over `cycles` periods.
    pub fn continued_track(&self, n: usize, cycles: usize) -> Result<Track> {
        check_level(n, self.dim())?;
        let lambda0 = self.lambdas[0];
        if cycles <= self.cycles {
            let end = cycles * self.steps;
            return Ok(Track {
                lambdas: self.lambdas[..=end].to_vec(),
                energies: self.energies[n][..=end].to_vec(),
                vectors: (0..=end).map(|j| self.vector(j, n)).collect(),
                end_level: self.permutation_power(n, cycles),
            });
        }
        let mut track = Track {
            lambdas: vec![lambda0],
            energies: vec![self.energies[n][0]],
            vectors: vec![self.vector(0, n)],
            end_level: n,
        };
        let mut level = n;
        let mut phase = c64(1.0, 0.0);
        let mut offset = 0.0;
        for p in 0..cycles {
            for j in 1..=self.steps {
                track
                    .lambdas
                    .push(lambda0 + self.lambda_period * (p * self.steps + j) as f64 / self.steps as f64);
                track.energies.push(self.energies[level][j] + offset);
                track.vectors.push(self.vector(j, level) * phase);
            }
            let x = track.vectors.last().unwrap().clone();
            let e_end = *track.energies.last().unwrap();
            level = self.permutation[level];
            let o = self.vector(0, level).dotc(&x);
            phase = o / o.norm();
            offset = e_end - self.energies[level][0];
        }
        track.end_level = level;
        Ok(track)
    }
}

/// Pancharatnam phase of level `n` transported around `cycles` periods,
/// wrapped to `(-π, π]`.
pub fn geometric_phase(flow: &SpectralFlow, n: usize, cycles: usize) -> Result<f64> {
    let track = flow.continued_track(n, cycles)?;
    if track.end_level != n {
        return Err(Error::OpenTrack {
            level: n,
            cycles,
            end_level: track.end_level,
        });
    }
    // raw products -Im Σ ln⟨ξ_j|ξ_{j+1}⟩ are zero in the positive-overlap gauge,
    // leaving the closing overlap
    let mut total = 0.0;
    for w in track.vectors.windows(2) {
        total -= w[0].dotc(&w[1]).arg();
    }
    let closing = track.vectors.last().unwrap().dotc(&track.vectors[0]);
    total -= closing.arg();
    Ok(wrap_angle(total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Clause {
    /// `ΔE_n ≡ E_{π(n)}(λ₀) - E_n(λ₀)` mod `2π/T`.
    Quantization,
    /// `0 < ΔE_n < 2π/T`.
    Bound,
    /// `Σ ΔE_n = Λ tr V / T`.
    SumRule,
    /// Endpoint projectors equal the projectors of the permuted start levels.
    Projector,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::Quantization => "a (quantization)",
            Clause::Bound => "b (bound)",
            Clause::SumRule => "c (sum rule)",
            Clause::Projector => "d (projector)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClauseCheck {
    pub clause: Clause,
    /// Deviation for clauses a, c, d; for clause b the smallest distance of
    /// any `ΔE_n` to the ends of `(0, 2π/T)`.
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub permutation: Vec<usize>,
    pub delta_e: Vec<f64>,
    pub clauses: Vec<ClauseCheck>,
    pub anholonomy: bool,
    pub tolerance: f64,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, clause: Clause) -> &ClauseCheck {
        self.clauses.iter().find(|c| c.clause == clause).expect("all clauses present")
    }

    /// First failing clause as an error.
    pub fn require(&self) -> Result<()> {
        match self.clauses.iter().find(|c| !c.pass) {
            Some(c) => Err(Error::CertificationFailure {
                clause: c.clause,
                residual: c.residual,
            }),
            None => Ok(()),
        }
    }
}

fn wrap_cell(x: f64, cell: f64) -> f64 {
    x - cell * (x / cell).round()
}

pub fn certify_anholonomy(flow: &SpectralFlow) -> Certificate {
    certify_with(flow, TOL_CERT)
}

pub fn certify_with(flow: &SpectralFlow, tol: f64) -> Certificate {
    let cell = flow.quasienergy_period();
    let de = flow.delta_e();
    let pi = flow.permutation();
    let e0 = &flow.start.quasienergies;

    let quant = (0..flow.dim())
        .map(|n| wrap_cell(e0[n] + de[n] - e0[pi[n]], cell).abs())
        .fold(0.0, f64::max);
    let margin = de.iter().map(|&d| d.min(cell - d)).fold(f64::INFINITY, f64::min);
    let expected_sum = flow.lambda_period * flow.trace_v / flow.period_t();
    let sum = (de.iter().sum::<f64>() - expected_sum).abs();
    let proj = (0..flow.dim())
        .map(|n| {
            let end = flow.vector(flow.steps, n);
            let start = flow.start.vector(pi[n]);
            (outer(&end) - outer(&start)).norm()
        })
        .fold(0.0, f64::max);

    Certificate {
        permutation: pi.to_vec(),
        delta_e: de,
        clauses: vec![
            ClauseCheck {
                clause: Clause::Quantization,
                residual: quant,
                pass: quant <= tol,
            },
            ClauseCheck {
                clause: Clause::Bound,
                residual: margin,
                pass: margin > tol,
            },
            ClauseCheck {
                clause: Clause::SumRule,
                residual: sum,
                pass: sum <= tol,
            },
            ClauseCheck {
                clause: Clause::Projector,
                residual: proj,
                pass: proj <= tol,
            },
        ],
        anholonomy: flow.exhibits_anholonomy(),
        tolerance: tol,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingReport {
    /// Times track `n` crosses the quasienergy cell boundary during one period.
    pub windings: Vec<i64>,
    /// Total winding, the increment `δn` of the level index.
    pub delta_n: i64,
    /// `s` when the permutation is `n ↦ n + s mod N`.
    pub shift: Option<usize>,
}

pub fn winding_report(flow: &SpectralFlow) -> WindingReport {
    let cell = flow.quasienergy_period();
    let de = flow.delta_e();
    let pi = flow.permutation();
    let e0 = &flow.start.quasienergies;
    let n = flow.dim();
    let windings: Vec<i64> = (0..n)
        .map(|k| ((e0[k] + de[k] - e0[pi[k]]) / cell).round() as i64)
        .collect();
    let s = (pi[0] + n) % n;
    let shift = (0..n).all(|k| pi[k] == (k + s) % n).then_some(s);
    WindingReport {
        delta_n: windings.iter().sum(),
        windings,
        shift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::presets;
    use crate::numeric::{haar_random_unitary, phase_factor};
    use std::f64::consts::PI;

    #[test]
    fn branch_of_pauli_z() {
        let u = UnitaryOperator::from_phases(&[0.0, PI]);
        let b = quasienergy_branch(&u, 1.0, &GroundRule::LowestPhase).unwrap();
        assert!(b.quasienergies[0].abs() < 1e-12);
        assert!((b.quasienergies[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn branch_single_level() {
        let u = UnitaryOperator::from_phases(&[0.4]);
        let b = quasienergy_branch(&u, 1.0, &GroundRule::LowestPhase).unwrap();
        assert!((b.quasienergies[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn branch_exponentiation_oracle() {
        let u = haar_random_unitary(6, 21).unwrap();
        let t = 0.7;
        let b = quasienergy_branch(&u, t, &GroundRule::LowestPhase).unwrap();
        for k in 0..6 {
            assert!((phase_factor(b.quasienergies[k] * t) - b.eigenvalues[k]).norm() < 1e-11);
            let x = b.vector(k);
            assert!((u.apply(&x) - &x * b.eigenvalues[k]).norm() < 1e-9);
        }
        for w in b.quasienergies.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(b.quasienergies[5] - b.quasienergies[0] < TAU / t);
    }

    #[test]
    fn branch_ground_by_reference_vector() {
        let u = UnitaryOperator::from_phases(&[0.5, 2.0, 4.0]);
        let r = CVector::from_vec(vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let b = quasienergy_branch(&u, 1.0, &GroundRule::IndexOfVector(r)).unwrap();
        let expected = [4.0, 0.5 + TAU, 2.0 + TAU];
        for (e, x) in b.quasienergies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_rejects_degenerate() {
        let u = UnitaryOperator::from_phases(&[0.3, 0.3, 1.0]);
        assert!(matches!(
            quasienergy_branch(&u, 1.0, &GroundRule::LowestPhase),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn twolevel_velocity_is_half() {
        let f = presets::twolevel_pi();
        for &l in &[0.1, 1.0, 2.5, 5.0] {
            assert!((level_velocity(&f, l, 0).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_level_has_zero_velocity() {
        let f = presets::random_broken(2).unwrap();
        let b = branch_at(&f, 0.0).unwrap();
        let v = f.perturbation().rank1().unwrap().vector().clone();
        let trivial = (0..5).find(|&k| b.vector(k).dotc(&v).norm() < 1e-12).unwrap();
        assert!(level_velocity(&f, 0.0, trivial).unwrap().abs() < 1e-20);
    }

    #[test]
    fn twolevel_eigenvector_derivative() {
        let f = presets::twolevel_pi();
        for &l in &[0.3, 1.1, 2.0] {
            let d = eigenvector_derivative(&f, l, 0, Gauge::ParallelTransport).unwrap();
            let (c, s) = ((l / 4.0).cos(), (l / 4.0).sin());
            let analytic = CVector::from_vec(vec![c64(c, 0.0), c64(s, 0.0)]);
            let ph = analytic.dotc(&d.eigenvector);
            assert!((ph.norm() - 1.0).abs() < 1e-12);
            let expected = CVector::from_vec(vec![c64(-s / 4.0, 0.0), c64(c / 4.0, 0.0)]) * ph;
            assert!((d.derivative - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn unperturbed_derivative_vanishes() {
        let f = FloquetFamily::unperturbed(haar_random_unitary(3, 1).unwrap(), 1.0).unwrap();
        let d = eigenvector_derivative(&f, 0.4, 1, Gauge::ParallelTransport).unwrap();
        assert!(d.derivative.norm() < 1e-15);
    }

    #[test]
    fn twolevel_sweep_swaps_levels() {
        let flow = sweep(&presets::twolevel_pi(), 0.0, 1000).unwrap();
        assert_eq!(flow.permutation(), &[1, 0]);
        for d in flow.delta_e() {
            assert!((d - PI).abs() < 1e-10);
        }
        let cert = certify_anholonomy(&flow);
        assert!(cert.passed(), "{cert:?}");
        assert!(cert.clause(Clause::SumRule).residual < 1e-10);
        let w = winding_report(&flow);
        assert_eq!(w.delta_n, 1);
        assert_eq!(w.shift, Some(1));
    }

    #[test]
    fn unperturbed_family_certificate() {
        let f = FloquetFamily::unperturbed(haar_random_unitary(3, 2).unwrap(), 1.0).unwrap();
        let flow = sweep(&f, 0.0, 64).unwrap();
        let cert = certify_anholonomy(&flow);
        assert!(!cert.anholonomy);
        assert!(!cert.clause(Clause::Bound).pass);
        assert!(matches!(cert.require(), Err(Error::CertificationFailure { clause: Clause::Bound, .. })));
        let w = winding_report(&flow);
        assert!(w.windings.iter().all(|&x| x == 0));
    }

    #[test]
    fn random_cyclic_shift_by_one() {
        let flow = sweep(&presets::random_cyclic(5, 7).unwrap(), 0.0, DEFAULT_STEPS).unwrap();
        assert_eq!(flow.permutation(), &[1, 2, 3, 4, 0]);
        assert!(certify_anholonomy(&flow).passed());
        let integrated = flow.integrated_delta_e();
        for (a, b) in flow.delta_e().iter().zip(integrated) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn geometric_phase_twolevel_two_cycles() {
        let flow = sweep(&presets::twolevel_pi(), 0.0, 512).unwrap();
        let g = geometric_phase(&flow, 0, 2).unwrap();
        assert!((g.abs() - PI).abs() < 1e-9);
        assert!(matches!(geometric_phase(&flow, 0, 1), Err(Error::OpenTrack { .. })));
    }

    #[test]
    fn geometric_phase_single_level() {
        let u0 = UnitaryOperator::from_phases(&[0.7]);
        let v = crate::floquet::Rank1Perturbation::new(CVector::from_element(1, c64(1.0, 0.0))).unwrap();
        let f = FloquetFamily::rank1(u0, v, 1.0).unwrap();
        let flow = sweep(&f, 0.0, 128).unwrap();
        assert!(geometric_phase(&flow, 0, 1).unwrap().abs() < 1e-12);
        assert!((flow.delta_e()[0] - TAU).abs() < 1e-10);
    }

    #[test]
    fn continued_track_matches_direct_sweep() {
        let f = presets::random_cyclic(3, 4).unwrap();
        let short = sweep(&f, 0.0, 256).unwrap();
        let long = sweep_with(
            &f,
            0.0,
            &SweepOptions {
                steps: 256,
                cycles: 3,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        let a = short.continued_track(0, 3).unwrap();
        let b = long.continued_track(0, 3).unwrap();
        assert_eq!(a.lambdas.len(), b.lambdas.len());
        assert_eq!(a.end_level, b.end_level);
        for j in 0..a.lambdas.len() {
            assert!((a.energies[j] - b.energies[j]).abs() < 1e-9);
            assert!(a.vectors[j].dotc(&b.vectors[j]).norm() > 1.0 - 1e-9);
        }
        let ga = geometric_phase(&short, 0, 3).unwrap();
        let gb = geometric_phase(&long, 0, 3).unwrap();
        assert!(wrap_angle(ga - gb).abs() < 1e-8);
    }

    #[test]
    fn greedy_assignment_and_conflicts() {
        let o = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        assert_eq!(assign(&o), vec![0, 1]);
        let o = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.7, 0.3]);
        assert_eq!(assign(&o), vec![1, 0]);
    }

    #[test]
    fn grid_lookup() {
        let flow = sweep(&presets::twolevel_pi(), 0.0, 100).unwrap();
        assert_eq!(flow.grid_index(TAU * 0.25), Some(25));
        assert_eq!(flow.grid_index(0.001), None);
    }
}
