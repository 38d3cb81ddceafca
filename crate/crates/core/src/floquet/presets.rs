//! Named scenarios. Random presets are fully determined by their seed.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{
    c64, complex_gaussian_matrix, haar_unitary_from, random_unit_vector_from, seeded_rng,
    unitary_eigensolve, CVector, HermitianOperator, UnitaryOperator,
};

use super::{FloquetFamily, KickedModel, Perturbation, Rank1Perturbation};

/// Support pattern of the broken-cyclicity preset in the eigenbasis of `U₀`.
pub const BROKEN_MASK: [bool; 5] = [true, false, true, true, false];

pub const PRESET_NAMES: [&str; 4] = ["twolevel-pi", "twolevel-tilted", "random-cyclic", "random-broken"];

/// `H₀ = diag(0, δ)`, `T = 1`, rank-1 kick along `v`.
pub fn twolevel(delta: f64, v: CVector) -> Result<FloquetFamily> {
    let model = KickedModel {
        h0: HermitianOperator::from_diagonal(&[0.0, delta])?,
        perturbation: Perturbation::Rank1(Rank1Perturbation::new(v)?),
        period_t: 1.0,
    };
    model.family()
}

/// `δ = π`, `v = (|↑⟩ - i|↓⟩)/√2`: levels `E₀ = λ/2`, `E₁ = π + λ/2`.
pub fn twolevel_pi() -> FloquetFamily {
    let v = CVector::from_vec(vec![c64(FRAC_1_SQRT_2, 0.0), c64(0.0, -FRAC_1_SQRT_2)]);
    twolevel(PI, v).expect("valid preset")
}

/// `δ = π`, `v = cos(π/8)|↑⟩ + sin(π/8)|↓⟩`: an avoided crossing.
pub fn twolevel_tilted() -> FloquetFamily {
    let a = PI / 8.0;
    let v = CVector::from_vec(vec![c64(a.cos(), 0.0), c64(a.sin(), 0.0)]);
    twolevel(PI, v).expect("valid preset")
}

/// Haar `U₀` rotated so that its lowest eigenphase is zero.
fn grounded_haar<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<UnitaryOperator> {
    let w = haar_unitary_from(rng, n)?;
    let theta0 = unitary_eigensolve(&w).phases[0];
    Ok(w.rephased(-theta0))
}

/// Haar `U₀` and a Gaussian random `v`, both drawn from one seeded stream.
pub fn random_cyclic(n: usize, seed: u64) -> Result<FloquetFamily> {
    let mut rng = seeded_rng(seed);
    let u0 = grounded_haar(&mut rng, n)?;
    let v = random_unit_vector_from(&mut rng, n)?;
    FloquetFamily::rank1(u0, Rank1Perturbation::new(v)?, 1.0)
}

/// As [`random_cyclic`] but `v` has support only on the eigenvectors of `U₀`
/// (ordered by eigenphase) selected by `mask`.
pub fn random_masked(n: usize, mask: &[bool], seed: u64) -> Result<FloquetFamily> {
    if mask.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyReduction);
    }
    let mut rng = seeded_rng(seed);
    let u0 = grounded_haar(&mut rng, n)?;
    let eig = unitary_eigensolve(&u0);
    let g = complex_gaussian_matrix(&mut rng, n, 1);
    let mut v = CVector::zeros(n);
    for (k, &keep) in mask.iter().enumerate() {
        if keep {
            v += eig.vector(k) * g[(k, 0)];
        }
    }
    FloquetFamily::rank1(u0, Rank1Perturbation::normalized(v)?, 1.0)
}

/// N = 5 with `v` on three of the five eigenvectors of `U₀`.
pub fn random_broken(seed: u64) -> Result<FloquetFamily> {
    random_masked(5, &BROKEN_MASK, seed)
}

/// Looks up a preset by name; random presets take `n` (default 5) and `seed`.
pub fn by_name(name: &str, n: Option<usize>, seed: u64) -> Option<Result<FloquetFamily>> {
    match name {
        "twolevel-pi" => Some(Ok(twolevel_pi())),
        "twolevel-tilted" => Some(Ok(twolevel_tilted())),
        "random-cyclic" => Some(random_cyclic(n.unwrap_or(5), seed)),
        "random-broken" => Some(random_broken(seed)),
        _ => None,
    }
}
