//! Flat key-value scenario files and their resolution into a Floquet family.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use floquet_anholonomy::floquet::{presets, KickedModel, Perturbation, Rank1Perturbation};
use floquet_anholonomy::numeric::{
    c64, complex_gaussian_matrix, expm_hermitian, random_hermitian_from, random_unit_vector_from,
    seeded_rng, unitary_eigensolve, SeededRng, CMatrix, CVector, HermitianOperator,
};
use floquet_anholonomy::FloquetFamily;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_ADIABATIC_STEPS: usize = 1600;

/// Every key is optional in the file; flags fill in or override keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Option<String>,
    pub dimension: Option<usize>,
    /// Kick period `T`.
    pub period: Option<f64>,
    /// `"random"` for a seeded GUE matrix.
    pub h0: Option<String>,
    pub h0_diagonal: Option<Vec<f64>>,
    pub h0_real: Option<Vec<Vec<f64>>>,
    pub h0_imag: Option<Vec<Vec<f64>>>,
    /// `"random"` for a seeded Gaussian vector.
    pub v: Option<String>,
    pub v_real: Option<Vec<f64>>,
    pub v_imag: Option<Vec<f64>>,
    /// Support of a random `v` in the eigenbasis of `U₀`, by ascending phase.
    pub v_mask: Option<Vec<bool>>,
    pub seed: Option<u64>,
    pub lambda_start: Option<f64>,
    pub steps: Option<usize>,
    pub adiabatic_steps: Option<Vec<usize>>,
    pub cycles: Option<usize>,
    pub initial_level: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A resolved experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub family: FloquetFamily,
    pub seed: Option<u64>,
    pub lambda_start: f64,
    pub steps: usize,
    pub adiabatic_steps: Vec<usize>,
    pub cycles: usize,
    pub initial_level: usize,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require_seed(cfg: &ScenarioConfig, what: &str) -> Result<u64, CliError> {
    cfg.seed.ok_or_else(|| config_error(format!("{what} requires a seed")))
}

fn build_h0(cfg: &ScenarioConfig, n: usize, rng: &mut SeededRng) -> Result<HermitianOperator, CliError> {
    let given = [cfg.h0.is_some(), cfg.h0_diagonal.is_some(), cfg.h0_real.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(config_error("exactly one of h0, h0_diagonal, h0_real must be given"));
    }
    if let Some(kind) = &cfg.h0 {
        if kind != "random" {
            return Err(config_error(format!("unknown h0 spec {kind:?}")));
        }
        return random_hermitian_from(rng, n).map_err(CliError::from_config);
    }
    if let Some(d) = &cfg.h0_diagonal {
        if d.len() != n {
            return Err(config_error(format!("h0_diagonal has {} entries, expected {n}", d.len())));
        }
        return HermitianOperator::from_diagonal(d).map_err(CliError::from_config);
    }
    let re = cfg.h0_real.as_ref().unwrap();
    let zeros = vec![vec![0.0; n]; n];
    let im = cfg.h0_imag.as_ref().unwrap_or(&zeros);
    if re.len() != n || im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
        return Err(config_error(format!("h0_real/h0_imag must be {n}x{n}")));
    }
    let m = CMatrix::from_fn(n, n, |i, j| c64(re[i][j], im[i][j]));
    HermitianOperator::new(m).map_err(CliError::from_config)
}

fn build_v(
    cfg: &ScenarioConfig,
    n: usize,
    u0: &floquet_anholonomy::UnitaryOperator,
    rng: &mut SeededRng,
) -> Result<CVector, CliError> {
    let given = [cfg.v.is_some(), cfg.v_real.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(config_error("exactly one of v, v_real must be given"));
    }
    if let Some(re) = &cfg.v_real {
        let zeros = vec![0.0; n];
        let im = cfg.v_imag.as_ref().unwrap_or(&zeros);
        if re.len() != n || im.len() != n {
            return Err(config_error(format!("v_real/v_imag must have {n} entries")));
        }
        return Ok(CVector::from_fn(n, |i, _| c64(re[i], im[i])));
    }
    let kind = cfg.v.as_ref().unwrap();
    if kind != "random" {
        return Err(config_error(format!("unknown v spec {kind:?}")));
    }
    match &cfg.v_mask {
        None => random_unit_vector_from(rng, n).map_err(CliError::from_config),
        Some(mask) => {
            if mask.len() != n {
                return Err(config_error(format!("v_mask has {} entries, expected {n}", mask.len())));
            }
            let eig = unitary_eigensolve(u0);
            let g = complex_gaussian_matrix(rng, n, 1);
            let mut v = CVector::zeros(n);
            for (k, &keep) in mask.iter().enumerate() {
                if keep {
                    v += eig.vector(k) * g[(k, 0)];
                }
            }
            Ok(v)
        }
    }
}

fn custom_family(cfg: &ScenarioConfig) -> Result<FloquetFamily, CliError> {
    let n = cfg.dimension.ok_or_else(|| config_error("dimension is required without a preset"))?;
    if n == 0 {
        return Err(config_error("dimension must be positive"));
    }
    let random = cfg.h0.is_some() || cfg.v.is_some();
    let mut rng = seeded_rng(if random { require_seed(cfg, "a random h0 or v")? } else { 0 });
    let period = cfg.period.unwrap_or(1.0);
    let h0 = build_h0(cfg, n, &mut rng)?;
    let u0 = expm_hermitian(&h0, period);
    let v = build_v(cfg, n, &u0, &mut rng)?;
    let model = KickedModel {
        h0,
        perturbation: Perturbation::Rank1(Rank1Perturbation::normalized(v).map_err(CliError::from_config)?),
        period_t: period,
    };
    model.family().map_err(CliError::from_config)
}

impl Scenario {
    pub fn resolve(cfg: &ScenarioConfig, fallback_name: &str) -> Result<Self, CliError> {
        let (name, family) = match &cfg.preset {
            Some(p) => {
                let random = p.starts_with("random");
                let seed = if random { require_seed(cfg, &format!("preset {p}"))? } else { 0 };
                let family = presets::by_name(p, cfg.dimension, seed)
                    .ok_or_else(|| config_error(format!("unknown preset {p:?}")))?
                    .map_err(CliError::from_config)?;
                let name = if random {
                    format!("{p}-n{}-s{seed}", family.dim())
                } else {
                    p.clone()
                };
                (name, family)
            }
            None => (fallback_name.to_string(), custom_family(cfg)?),
        };
        let steps = cfg.steps.unwrap_or(floquet_anholonomy::flow::DEFAULT_STEPS);
        if steps == 0 {
            return Err(config_error("steps must be positive"));
        }
        let initial_level = cfg.initial_level.unwrap_or(0);
        if initial_level >= family.dim() {
            return Err(config_error(format!(
                "initial_level {initial_level} out of range for dimension {}",
                family.dim()
            )));
        }
        let mut adiabatic_steps = cfg.adiabatic_steps.clone().unwrap_or_else(|| vec![DEFAULT_ADIABATIC_STEPS]);
        if adiabatic_steps.is_empty() {
            adiabatic_steps.push(DEFAULT_ADIABATIC_STEPS);
        }
        Ok(Self {
            name,
            family,
            seed: cfg.seed,
            lambda_start: cfg.lambda_start.unwrap_or(0.0),
            steps,
            adiabatic_steps,
            cycles: cfg.cycles.unwrap_or(1),
            initial_level,
        })
    }

    pub fn span(&self) -> f64 {
        self.family.lambda_period().unwrap_or(TAU) * self.cycles as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Scenario, CliError> {
        Scenario::resolve(&ScenarioConfig::parse(text)?, "file")
    }

    #[test]
    fn flat_keys_parse() {
        let cfg = ScenarioConfig::parse("preset = \"random-cyclic\"\ndimension = 4\nseed = 9\nadiabatic_steps = [100, 200]\n")
            .unwrap();
        assert_eq!(cfg.dimension, Some(4));
        assert_eq!(cfg.adiabatic_steps, Some(vec![100, 200]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ScenarioConfig::parse("dimensions = 3"), Err(CliError::Config(_))));
    }

    #[test]
    fn random_names_carry_dimension_and_seed() {
        let s = resolve("preset = \"random-cyclic\"\ndimension = 4\nseed = 9\n").unwrap();
        assert_eq!(s.name, "random-cyclic-n4-s9");
        assert_eq!(s.family.dim(), 4);
        assert_eq!(s.adiabatic_steps, vec![DEFAULT_ADIABATIC_STEPS]);
    }

    #[test]
    fn random_parts_need_a_seed() {
        assert!(resolve("preset = \"random-broken\"").is_err());
        assert!(resolve("dimension = 2\nh0 = \"random\"\nv_real = [1.0, 0.0]\n").is_err());
        assert!(resolve("dimension = 2\nh0 = \"random\"\nv_real = [1.0, 0.0]\nseed = 1\n").is_ok());
    }

    #[test]
    fn h0_sources_are_exclusive() {
        let text = "dimension = 2\nh0 = \"random\"\nh0_diagonal = [0.0, 1.0]\nv_real = [1.0, 1.0]\nseed = 1\n";
        assert!(resolve(text).is_err());
    }

    #[test]
    fn shapes_are_checked() {
        assert!(resolve("dimension = 3\nh0_diagonal = [0.0, 1.0]\nv_real = [1.0, 1.0, 1.0]\n").is_err());
        assert!(resolve("dimension = 2\nh0_diagonal = [0.0, 1.0]\nv_real = [1.0, 1.0, 1.0]\n").is_err());
        assert!(resolve("dimension = 2\nh0_real = [[0.0, 1.0], [1.0]]\nv_real = [1.0, 1.0]\n").is_err());
    }

    #[test]
    fn custom_v_is_normalized() {
        let s = resolve("dimension = 2\nh0_diagonal = [0.0, 1.0]\nv_real = [3.0, 0.0]\nv_imag = [0.0, 4.0]\n").unwrap();
        let v = s.family.perturbation().rank1().unwrap().vector().clone();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert!((v[1].im - 0.8).abs() < 1e-15);
    }

    #[test]
    fn masked_v_misses_eigenvectors() {
        let s = resolve("dimension = 4\nh0 = \"random\"\nv = \"random\"\nv_mask = [true, false, true, true]\nseed = 2\n")
            .unwrap();
        let v = s.family.perturbation().rank1().unwrap().vector().clone();
        let eig = unitary_eigensolve(s.family.u0());
        assert!(eig.vector(1).dotc(&v).norm() < 1e-12);
        assert!(eig.vector(0).dotc(&v).norm() > 1e-3);
    }

    #[test]
    fn initial_level_and_steps_are_validated() {
        assert!(resolve("preset = \"twolevel-pi\"\ninitial_level = 2\n").is_err());
        assert!(resolve("preset = \"twolevel-pi\"\nsteps = 0\n").is_err());
        let s = resolve("preset = \"twolevel-pi\"\ncycles = 3\n").unwrap();
        assert!((s.span() - 3.0 * TAU).abs() < 1e-12);
    }
}
