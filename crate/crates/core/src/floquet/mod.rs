//! Parametrized Floquet operators of kicked systems,
//! `U_λ = e^{-i H₀ T} e^{-i λ V}` with ħ = 1.
//!
//! For a rank-1 kick `V = |v⟩⟨v|` the exponential is never computed
//! numerically: `e^{-iλV} = 1 - (1 - e^{-iλ}) V` exactly, which makes the
//! 2π period of the family structural.

pub mod presets;

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{
    c64, expm_hermitian, identity, phase_factor, structural_tolerance, CMatrix, CVector,
    HermitianOperator, UnitaryOperator, C64, EPS_ORTH,
};
use crate::structure::eigenspace_split;

/// Largest denominator accepted when reconstructing eigenvalue ratios.
pub const MAX_PERIOD_DENOMINATOR: u64 = 1_000_000;

/// Normalized kick direction `|v⟩` of `V = |v⟩⟨v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Perturbation {
    v: CVector,
}

impl Rank1Perturbation {
    pub fn new(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if v.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if (norm - 1.0).abs() > EPS_ORTH {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { v })
    }

    /// Normalizes `v` first; fails only for the zero vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(v / c64(norm, 0.0))
    }

    pub fn vector(&self) -> &CVector {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn projector(&self) -> CMatrix {
        &self.v * self.v.adjoint()
    }
}

#[derive(Debug, Clone)]
pub enum Perturbation {
    Rank1(Rank1Perturbation),
    General(HermitianOperator),
}

impl Perturbation {
    pub fn dim(&self) -> usize {
        match self {
            Perturbation::Rank1(p) => p.dim(),
            Perturbation::General(h) => h.dim(),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Perturbation::Rank1(p) => p.projector(),
            Perturbation::General(h) => h.matrix().clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Perturbation::Rank1(p) => p.v.norm_squared(),
            Perturbation::General(h) => h.trace(),
        }
    }

    /// `⟨ξ|V|ξ⟩`; for rank-1 kicks this is `|⟨v|ξ⟩|²`.
    pub fn expectation(&self, xi: &CVector) -> f64 {
        match self {
            Perturbation::Rank1(p) => p.v.dotc(xi).norm_sqr(),
            Perturbation::General(h) => h.expectation(xi),
        }
    }

    /// `⟨a|V|b⟩`.
    pub fn element(&self, a: &CVector, b: &CVector) -> C64 {
        match self {
            Perturbation::Rank1(p) => a.dotc(&p.v) * p.v.dotc(b),
            Perturbation::General(h) => a.dotc(&(h.matrix() * b)),
        }
    }

    pub fn rank1(&self) -> Option<&Rank1Perturbation> {
        match self {
            Perturbation::Rank1(p) => Some(p),
            Perturbation::General(_) => None,
        }
    }
}

/// `λ ↦ U_λ = U₀ e^{-iλV}` together with the kick period `T` and, when one
/// exists, the parameter period `Λ` of the family.
#[derive(Debug, Clone)]
pub struct FloquetFamily {
    u0: UnitaryOperator,
    perturbation: Perturbation,
    period_t: f64,
    lambda_period: Option<f64>,
}

impl FloquetFamily {
    /// Rank-1 family; `Λ = 2π`.
    pub fn rank1(u0: UnitaryOperator, v: Rank1Perturbation, period_t: f64) -> Result<Self> {
        check_dims(u0.dim(), v.dim())?;
        check_time_step(period_t)?;
        Ok(Self {
            u0,
            perturbation: Perturbation::Rank1(v),
            period_t,
            lambda_period: Some(TAU),
        })
    }

    /// General Hermitian kick. A declared period is verified against
    /// `e^{-iΛV} = 1`; otherwise the period is searched with [`family_period`].
    pub fn general(
        u0: UnitaryOperator,
        v: HermitianOperator,
        period_t: f64,
        declared_period: Option<f64>,
    ) -> Result<Self> {
        check_dims(u0.dim(), v.dim())?;
        check_time_step(period_t)?;
        let lambda_period = match declared_period {
            Some(period) => {
                let defect = (expm_hermitian(&v, period).matrix() - identity(v.dim())).norm();
                if !(period > 0.0) || defect > structural_tolerance(v.dim()) {
                    return Err(Error::NotPeriodic { period, defect });
                }
                Some(period)
            }
            None => family_period(&v, 1e-9),
        };
        Ok(Self {
            u0,
            perturbation: Perturbation::General(v),
            period_t,
            lambda_period,
        })
    }

    /// λ-independent family `U_λ = U₀` with a declared period of 2π.
    pub fn unperturbed(u0: UnitaryOperator, period_t: f64) -> Result<Self> {
        let zero = HermitianOperator::zeros(u0.dim())?;
        Self::general(u0, zero, period_t, Some(TAU))
    }

    pub fn evaluate(&self, lambda: f64) -> UnitaryOperator {
        match &self.perturbation {
            Perturbation::Rank1(p) => rank1_product(&self.u0, &p.v, lambda),
            Perturbation::General(h) => self.u0.compose(&expm_hermitian(h, lambda)),
        }
    }

    pub fn dim(&self) -> usize {
        self.u0.dim()
    }

    pub fn u0(&self) -> &UnitaryOperator {
        &self.u0
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn period_t(&self) -> f64 {
        self.period_t
    }

    pub fn lambda_period(&self) -> Option<f64> {
        self.lambda_period
    }

    /// Quasienergy cell width `2π/T`.
    pub fn quasienergy_period(&self) -> f64 {
        TAU / self.period_t
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_time_step(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTimeStep(t));
    }
    Ok(())
}

fn rank1_product(u0: &UnitaryOperator, v: &CVector, lambda: f64) -> UnitaryOperator {
    let coeff = c64(1.0, 0.0) - phase_factor(lambda);
    let u0v = u0.apply(v);
    let m = u0.matrix() - (u0v * v.adjoint()) * coeff;
    UnitaryOperator::from_trusted(m)
}

/// `U₀ {1 - (1 - e^{-iλ}) |v⟩⟨v|}`.
pub fn rank1_floquet(u0: &UnitaryOperator, v: &CVector, lambda: f64) -> Result<UnitaryOperator> {
    check_dims(u0.dim(), v.len())?;
    let norm = v.norm();
    if (norm - 1.0).abs() > EPS_ORTH {
        return Err(Error::NotNormalized { norm });
    }
    Ok(rank1_product(u0, v, lambda))
}

/// `H₀`, the kick operator and the kick period `T`.
#[derive(Debug, Clone)]
pub struct KickedModel {
    pub h0: HermitianOperator,
    pub perturbation: Perturbation,
    pub period_t: f64,
}

impl KickedModel {
    pub fn u0(&self) -> UnitaryOperator {
        expm_hermitian(&self.h0, self.period_t)
    }

    pub fn family(&self) -> Result<FloquetFamily> {
        match &self.perturbation {
            Perturbation::Rank1(p) => FloquetFamily::rank1(self.u0(), p.clone(), self.period_t),
            Perturbation::General(h) => FloquetFamily::general(self.u0(), h.clone(), self.period_t, None),
        }
    }
}

/// `e^{-iH₀T} e^{-iλV}`.
pub fn kicked_floquet(model: &KickedModel, lambda: f64) -> Result<UnitaryOperator> {
    check_dims(model.h0.dim(), model.perturbation.dim())?;
    let u0 = model.u0();
    match &model.perturbation {
        Perturbation::Rank1(p) => rank1_floquet(&u0, &p.v, lambda),
        Perturbation::General(h) => Ok(u0.compose(&expm_hermitian(h, lambda))),
    }
}

/// First continued-fraction convergent `p/q` of `x` with `|q x - p| ≤ tol`.
/// Convergents are the best approximations of the second kind, so this is
/// also the smallest such denominator.
fn rational_approximation(x: f64, tol: f64, max_den: u64) -> Option<(i64, u64)> {
    let (mut h_prev, mut h) = (1i128, x.floor() as i128);
    let (mut k_prev, mut k) = (0i128, 1i128);
    let mut frac = x - x.floor();
    loop {
        if ((k as f64) * x - h as f64).abs() <= tol {
            return Some((h as i64, k as u64));
        }
        if frac.abs() < 1e-300 {
            return None;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as i128;
        let h_next = a * h + h_prev;
        let k_next = a * k + k_prev;
        if k_next as u64 > max_den || k_next <= 0 {
            return None;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `Λ > 0` with `Λ v_n / 2π` integral (within `tol`) for every
/// eigenvalue `v_n` of `V`, found by rational reconstruction of the
/// eigenvalue ratios with denominators up to [`MAX_PERIOD_DENOMINATOR`].
///
/// `None` for incommensurate spectra, and for `V = 0` where no smallest
/// period exists.
pub fn family_period(v: &HermitianOperator, tol: f64) -> Option<f64> {
    let values = v.eigenvalues();
    let reference = values
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if reference.abs() <= tol {
        return None;
    }
    let mut common = 1u64;
    for &x in values {
        if x.abs() <= tol * reference.abs().max(1.0) {
            continue;
        }
        let (_, q) = rational_approximation(x / reference, tol, MAX_PERIOD_DENOMINATOR)?;
        common = common / gcd(common, q) * q;
        if common > MAX_PERIOD_DENOMINATOR {
            return None;
        }
    }
    Some(TAU * common as f64 / reference.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialEigenvector {
    pub phase: f64,
    #[serde(skip)]
    pub eigenvalue: C64,
    #[serde(skip)]
    pub vector: CVector,
}

/// Eigenvectors of `U₀` untouched by the kick.
///
/// `first_kind` are orthogonal to `v` and stay eigenvectors of `U_λ` with a
/// fixed eigenvalue; `second_kind` is set when `v` itself is an eigenvector
/// of `U₀`, whose eigenvalue then drifts as `z₀ e^{-iλ}`.
#[derive(Debug, Clone, Serialize)]
pub struct TrivialReport {
    pub first_kind: Vec<TrivialEigenvector>,
    pub second_kind: Option<TrivialEigenvector>,
}

impl TrivialReport {
    pub fn is_empty(&self) -> bool {
        self.first_kind.is_empty() && self.second_kind.is_none()
    }
}

pub fn trivial_eigenvector_report(u0: &UnitaryOperator, v: &CVector, tol: f64) -> Result<TrivialReport> {
    check_dims(u0.dim(), v.len())?;
    let splits = eigenspace_split(u0, v, tol);
    let mut first_kind = Vec::new();
    let parallel: Vec<_> = splits.iter().filter(|s| s.parallel.is_some()).collect();
    for s in &splits {
        for x in &s.orthogonal {
            first_kind.push(TrivialEigenvector {
                phase: s.phase,
                eigenvalue: s.eigenvalue,
                vector: x.clone(),
            });
        }
    }
    let second_kind = match parallel.as_slice() {
        [only] => Some(TrivialEigenvector {
            phase: only.phase,
            eigenvalue: only.eigenvalue,
            vector: only.parallel.clone().unwrap(),
        }),
        _ => None,
    };
    Ok(TrivialReport {
        first_kind,
        second_kind,
    })
}
