//! Degeneracy clusters, cyclic-vector diagnostics and reduction of the
//! Hilbert space to the part actually moved by a rank-1 kick.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{FloquetFamily, Rank1Perturbation};
use crate::numeric::{
    c64, unitary_eigensolve, CMatrix, CVector, UnitaryOperator, C64, TOL_DEG,
};

/// Relative singular-value cutoff for the Krylov rank.
pub const KRYLOV_RTOL: f64 = 1e-10;

/// One eigenvalue cluster of `U₀` split against `v`.
#[derive(Debug, Clone)]
pub struct EigenspaceSplit {
    pub eigenvalue: C64,
    pub phase: f64,
    pub indices: Vec<usize>,
    /// Normalized projection of `v` onto the cluster eigenspace, when it
    /// exceeds the tolerance.
    pub parallel: Option<CVector>,
    pub parallel_weight: f64,
    /// Orthonormal basis of the part of the eigenspace orthogonal to `v`.
    pub orthogonal: Vec<CVector>,
}

/// Splits every eigenspace `H_z` of `u0` into the direction of `v`'s
/// projection and its orthocomplement within `H_z`.
pub fn eigenspace_split(u0: &UnitaryOperator, v: &CVector, tol: f64) -> Vec<EigenspaceSplit> {
    let eig = unitary_eigensolve(u0);
    let mut out = Vec::with_capacity(eig.clusters.len());
    for cluster in &eig.clusters {
        let d = cluster.len();
        let q = CMatrix::from_fn(u0.dim(), d, |i, j| eig.eigenvectors[(i, cluster[j])]);
        let mean = cluster.iter().map(|&k| eig.eigenvalues[k]).sum::<C64>();
        let eigenvalue = mean / mean.norm();
        let phase = eig.phases[cluster[0]];
        let p = q.adjoint() * v;
        let weight = p.norm();
        let (parallel, orthogonal) = if weight > tol {
            // QR of [p̂ | I] gives a unitary whose first column is ∝ p̂
            let mut aug = CMatrix::zeros(d, d + 1);
            aug.set_column(0, &(&p / c64(weight, 0.0)));
            for j in 0..d {
                aug[(j, j + 1)] = c64(1.0, 0.0);
            }
            let basis = aug.qr().q();
            let orth = (1..d).map(|j| &q * basis.column(j)).collect();
            (Some(&q * &p / c64(weight, 0.0)), orth)
        } else {
            (None, (0..d).map(|j| q.column(j).into_owned()).collect())
        };
        out.push(EigenspaceSplit {
            eigenvalue,
            phase,
            indices: cluster.clone(),
            parallel,
            parallel_weight: weight,
            orthogonal,
        });
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCluster {
    pub indices: Vec<usize>,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub clusters: Vec<PhaseCluster>,
    pub nondegenerate: bool,
    pub min_gap: f64,
}

pub fn degeneracy_report(u: &UnitaryOperator, tol: f64) -> DegeneracyReport {
    let eig = unitary_eigensolve(u);
    let clusters: Vec<PhaseCluster> = crate::numeric::phase_clusters(&eig.phases, tol)
        .into_iter()
        .map(|indices| PhaseCluster {
            phases: indices.iter().map(|&k| eig.phases[k]).collect(),
            indices,
        })
        .collect();
    DegeneracyReport {
        nondegenerate: clusters.iter().all(|c| c.indices.len() == 1),
        clusters,
        min_gap: eig.min_gap(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CyclicityReport {
    pub is_cyclic: bool,
    pub overlaps: Vec<f64>,
    pub krylov_rank: usize,
    pub krylov_singular_values: Vec<f64>,
    pub vandermonde_abs: f64,
    pub degenerate: bool,
    /// Verdict from the overlaps alone, with degenerate clusters counted as
    /// failing (a degenerate eigenspace always contains a vector orthogonal
    /// to `v`).
    pub overlap_route: bool,
    pub krylov_route: bool,
    /// Nondegeneracy read off the Vandermonde factors, combined with the
    /// overlaps.
    pub vandermonde_route: bool,
}

impl CyclicityReport {
    pub fn routes_agree(&self) -> bool {
        self.overlap_route == self.krylov_route && self.krylov_route == self.vandermonde_route
    }
}

/// Three independent tests of whether the orbit `{Uᵐ v}` spans the space.
pub fn is_cyclic(u: &UnitaryOperator, v: &CVector, tol: f64) -> Result<CyclicityReport> {
    let n = u.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let eig = unitary_eigensolve(u);
    let overlaps: Vec<f64> = (0..n).map(|k| eig.vector(k).dotc(v).norm()).collect();
    let degenerate = eig.is_degenerate();
    let overlaps_nonzero = overlaps.iter().all(|&o| o > tol);

    let mut krylov = CMatrix::zeros(n, n);
    let mut x = v.clone();
    for m in 0..n {
        krylov.set_column(m, &x);
        x = u.apply(&x);
    }
    let mut sv: Vec<f64> = krylov.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let krylov_rank = sv.iter().filter(|&&s| smax > 0.0 && s > KRYLOV_RTOL * smax).count();

    // |z_a - z_b| for eigenphases closer than the degeneracy tolerance
    let chord_floor = 2.0 * (0.5 * TOL_DEG).sin();
    let mut vandermonde_abs = 1.0;
    let mut factors_nonzero = true;
    for a in 0..n {
        for b in a + 1..n {
            let f = (eig.eigenvalues[b] - eig.eigenvalues[a]).norm();
            vandermonde_abs *= f;
            factors_nonzero &= f >= chord_floor;
        }
    }

    let krylov_route = krylov_rank == n;
    Ok(CyclicityReport {
        is_cyclic: krylov_route,
        overlaps,
        krylov_rank,
        krylov_singular_values: sv,
        vandermonde_abs,
        degenerate,
        overlap_route: !degenerate && overlaps_nonzero,
        krylov_route,
        vandermonde_route: factors_nonzero && overlaps_nonzero,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialBlock {
    pub phase: f64,
    #[serde(skip)]
    pub eigenvalue: C64,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub reduced_u0: UnitaryOperator,
    pub reduced_v: CVector,
    /// Isometry from the reduced space into the original one; columns are
    /// ordered by eigenphase.
    pub embedding: CMatrix,
    pub trivial_blocks: Vec<TrivialBlock>,
}

impl ReductionResult {
    pub fn dim(&self) -> usize {
        self.reduced_v.len()
    }

    pub fn is_identity(&self) -> bool {
        self.trivial_blocks.is_empty()
    }

    pub fn trivial_dimension(&self) -> usize {
        self.trivial_blocks.iter().map(|b| b.dim).sum()
    }

    pub fn reduced_family(&self, period_t: f64) -> Result<FloquetFamily> {
        FloquetFamily::rank1(
            self.reduced_u0.clone(),
            Rank1Perturbation::normalized(self.reduced_v.clone())?,
            period_t,
        )
    }

    /// Lifts a reduced-space vector to the original space.
    pub fn embed(&self, x: &CVector) -> CVector {
        &self.embedding * x
    }
}

/// Keeps, for every eigenvalue of `u0`, only the direction of `v`'s
/// projection onto that eigenspace. The result has a nondegenerate spectrum
/// and `v` overlaps every reduced eigenvector.
pub fn reduce_hilbert_space(u0: &UnitaryOperator, v: &CVector, tol: f64) -> Result<ReductionResult> {
    if v.len() != u0.dim() {
        return Err(Error::DimensionMismatch {
            expected: u0.dim(),
            found: v.len(),
        });
    }
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::NotNormalized { norm });
    }
    let v = v / c64(norm, 0.0);
    let splits = eigenspace_split(u0, &v, tol);
    let kept: Vec<&CVector> = splits.iter().filter_map(|s| s.parallel.as_ref()).collect();
    match kept.len() {
        0 => return Err(Error::EmptyReduction),
        1 => return Err(Error::VIsEigenvector),
        _ => {}
    }
    let embedding = CMatrix::from_columns(&kept.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
    let reduced_u0 = UnitaryOperator::new(embedding.adjoint() * u0.matrix() * &embedding)?;
    let p = embedding.adjoint() * &v;
    let pn = p.norm();
    let trivial_blocks = splits
        .iter()
        .filter(|s| !s.orthogonal.is_empty())
        .map(|s| TrivialBlock {
            phase: s.phase,
            eigenvalue: s.eigenvalue,
            dim: s.orthogonal.len(),
        })
        .collect();
    Ok(ReductionResult {
        reduced_u0,
        reduced_v: p / c64(pn, 0.0),
        embedding,
        trivial_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::presets;
    use crate::numeric::{haar_random_unitary, phase_factor, random_unit_vector_from, seeded_rng};

    fn uniform(n: usize) -> CVector {
        CVector::from_element(n, c64(1.0 / (n as f64).sqrt(), 0.0))
    }

    #[test]
    fn degeneracy_of_identity_and_pauli() {
        let r = degeneracy_report(&UnitaryOperator::identity(4), TOL_DEG);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].indices.len(), 4);
        assert!(!r.nondegenerate);
        let r = degeneracy_report(&UnitaryOperator::from_phases(&[0.0, std::f64::consts::PI]), TOL_DEG);
        assert_eq!(r.clusters.len(), 2);
        assert!(r.nondegenerate);
    }

    #[test]
    fn haar_eight_is_nondegenerate() {
        for seed in 0..10 {
            let u = haar_random_unitary(8, seed).unwrap();
            let r = degeneracy_report(&u, TOL_DEG);
            assert!(r.nondegenerate);
            // direct phase-gap oracle
            let e = unitary_eigensolve(&u);
            let mut ph = e.phases.clone();
            ph.sort_by(f64::total_cmp);
            let mut gap = ph[0] + std::f64::consts::TAU - ph[7];
            for k in 1..8 {
                gap = gap.min(ph[k] - ph[k - 1]);
            }
            assert!((gap - r.min_gap).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_uniform_combination() {
        let u = haar_random_unitary(5, 3).unwrap();
        let e = unitary_eigensolve(&u);
        let v = (0..5).fold(CVector::zeros(5), |acc, k| acc + e.vector(k)) / c64(5f64.sqrt(), 0.0);
        let r = is_cyclic(&u, &v, 1e-9).unwrap();
        assert!(r.is_cyclic && r.routes_agree());
    }

    #[test]
    fn one_missing_component_drops_rank() {
        let u = haar_random_unitary(5, 4).unwrap();
        let e = unitary_eigensolve(&u);
        let v = (0..4).fold(CVector::zeros(5), |acc, k| acc + e.vector(k)) / c64(2.0, 0.0);
        let r = is_cyclic(&u, &v, 1e-9).unwrap();
        assert!(!r.is_cyclic && r.routes_agree());
        assert_eq!(r.krylov_rank, 4);
    }

    #[test]
    fn degenerate_operator_has_no_cyclic_vector() {
        let u = UnitaryOperator::from_phases(&[0.0, 0.0, 1.0]);
        let r = is_cyclic(&u, &uniform(3), 1e-9).unwrap();
        assert!(r.degenerate);
        assert!(!r.is_cyclic && r.routes_agree());
        assert_eq!(r.krylov_rank, 2);
    }

    #[test]
    fn reduction_of_degenerate_three_level() {
        let delta = 2.0;
        let u0 = UnitaryOperator::from_phases(&[0.0, 0.0, delta]);
        let v = CVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.48), c64(0.64, 0.0)]);
        let r = reduce_hilbert_space(&u0, &v, 1e-9).unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(r.trivial_blocks.len(), 1);
        assert_eq!(r.trivial_blocks[0].dim, 1);
        // brute-force: kept z = 1 direction is (v₀, v₁, 0)/‖·‖ up to phase
        let expected = CVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.48), c64(0.0, 0.0)]);
        let expected = &expected / c64(expected.norm(), 0.0);
        let col = r.embedding.column(0).into_owned();
        assert!((col.dotc(&expected).norm() - 1.0).abs() < 1e-12);
        assert!((r.embedding.adjoint() * &r.embedding - crate::numeric::identity(2)).norm() < 1e-12);
        let e = unitary_eigensolve(&r.reduced_u0);
        assert!(!e.is_degenerate());
        for k in 0..2 {
            let o = e.vector(k).dotc(&r.reduced_v).norm();
            assert!(o > 1e-9 && o < 1.0 - 1e-9);
        }
        assert!((e.eigenvalues[1] - phase_factor(delta)).norm() < 1e-12);
    }

    #[test]
    fn reduction_is_identity_for_cyclic_vector() {
        let u0 = haar_random_unitary(4, 5).unwrap();
        let v = random_unit_vector_from(&mut seeded_rng(6), 4).unwrap();
        let r = reduce_hilbert_space(&u0, &v, 1e-9).unwrap();
        assert!(r.is_identity());
        assert_eq!(r.dim(), 4);
    }

    #[test]
    fn reduction_of_broken_preset() {
        let f = presets::random_broken(11).unwrap();
        let v = f.perturbation().rank1().unwrap().vector().clone();
        let r = reduce_hilbert_space(f.u0(), &v, 1e-9).unwrap();
        assert_eq!(r.dim(), 3);
        assert_eq!(r.trivial_blocks.len(), 2);
        assert!(r.trivial_blocks.iter().all(|b| b.dim == 1));
        let again = reduce_hilbert_space(&r.reduced_u0, &r.reduced_v, 1e-9).unwrap();
        assert!(again.is_identity());
    }

    #[test]
    fn reduction_rejects_eigenvector() {
        let u0 = haar_random_unitary(3, 9).unwrap();
        let v = unitary_eigensolve(&u0).vector(1);
        assert!(matches!(reduce_hilbert_space(&u0, &v, 1e-9), Err(Error::VIsEigenvector)));
    }
}
