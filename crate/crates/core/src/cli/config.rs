//! Experiment configuration file.

use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::Deserialize;

use crate::action::{ActionMatrix, HamiltonianModel, DEFAULT_MATRIX_CAP};
use crate::amplitude::PhaseConstant;
use crate::game::SolverOptions;
use crate::lattice::{PositionPathEnumerator, SpaceGrid, TimeGrid, DEFAULT_PATH_CAP};

use super::CliError;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

fn default_extent_sigma() -> f64 {
    8.0
}

fn default_spacing_divisor() -> f64 {
    8.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    Explicit {
        points: Vec<f64>,
    },
    Uniform {
        start: f64,
        spacing: f64,
        count: usize,
    },
    /// Extent `extent_sigma·σ` past the endpoints, spacing `σ/spacing_divisor`.
    Oracle {
        #[serde(default = "default_extent_sigma")]
        extent_sigma: f64,
        #[serde(default = "default_spacing_divisor")]
        spacing_divisor: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    pub q_i: f64,
    pub q_f: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub path_cap: u64,
    pub matrix_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            path_cap: DEFAULT_PATH_CAP,
            matrix_cap: DEFAULT_MATRIX_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub brute_force_resolution: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            brute_force_resolution: 201,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixSpec {
    Explicit {
        rows: Vec<Vec<f64>>,
    },
    /// Integer entries drawn uniformly from `low..=high` with the config seed.
    Random {
        n: usize,
        low: i64,
        high: i64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FermionSpec {
    pub n_generators: usize,
    pub exhaustive_n: usize,
    pub draws: usize,
}

impl Default for FermionSpec {
    fn default() -> Self {
        Self {
            n_generators: 4,
            exhaustive_n: 4,
            draws: 1000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub levels: usize,
    pub extent_sigma: f64,
    pub base_spacing_divisor: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            levels: 4,
            extent_sigma: 8.0,
            base_spacing_divisor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeSpec {
    /// Intermediate time; the midpoint when absent.
    pub t_split: Option<f64>,
    pub extent_sigma: f64,
    pub spacing_divisor: f64,
}

impl Default for ComposeSpec {
    fn default() -> Self {
        Self {
            t_split: None,
            extent_sigma: 64.0,
            spacing_divisor: 256.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianModel,
    pub time: TimeSpec,
    pub space: SpaceSpec,
    pub endpoints: EndpointSpec,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default)]
    pub phase_constant: PhaseConstant,
    #[serde(default)]
    pub hop_limit: Option<usize>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
    #[serde(default)]
    pub fermion: FermionSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub compose: ComposeSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianModel::Free { mass: 1.0 },
            time: TimeSpec {
                t_start: 0.0,
                t_end: 1.0,
                n_steps: 2,
            },
            space: SpaceSpec::Uniform {
                start: 0.0,
                spacing: 0.5,
                count: 3,
            },
            endpoints: EndpointSpec { q_i: 0.0, q_f: 1.0 },
            hbar: 1.0,
            phase_constant: PhaseConstant::default(),
            hop_limit: None,
            limits: Limits::default(),
            solver: SolverSpec::default(),
            matrix: None,
            fermion: FermionSpec::default(),
            compare: CompareSpec::default(),
            compose: ComposeSpec::default(),
            output: OutputSpec::default(),
            seed: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Checks every field that a command may touch.
    pub fn validate(&self) -> Result<(), CliError> {
        self.hamiltonian
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(invalid(format!("hbar must be positive, got {}", self.hbar)));
        }
        self.enumerator()?;
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver.tol must be positive"));
        }
        if !(3..=201).contains(&self.solver.brute_force_resolution) {
            return Err(invalid("solver.brute_force_resolution must lie in 3..=201"));
        }
        match &self.matrix {
            Some(MatrixSpec::Explicit { rows }) => {
                ActionMatrix::from_rows(rows.clone()).map_err(|e| invalid(e.to_string()))?;
            }
            Some(MatrixSpec::Random { n, low, high }) => {
                if *n == 0 || low > high {
                    return Err(invalid("random matrix needs n >= 1 and low <= high"));
                }
            }
            None => {}
        }
        let f = self.fermion;
        if f.n_generators == 0 || f.n_generators > crate::grassmann::MAX_GENERATORS {
            return Err(invalid("fermion.n_generators must lie in 1..=16"));
        }
        if f.exhaustive_n > 8 {
            return Err(invalid("fermion.exhaustive_n must be at most 8"));
        }
        if self.compare.levels == 0
            || !(self.compare.extent_sigma > 0.0)
            || !(self.compare.base_spacing_divisor > 0.0)
        {
            return Err(invalid("compare settings must be positive"));
        }
        let c = self.compose;
        if !(c.extent_sigma > 0.0 && c.spacing_divisor > 0.0) {
            return Err(invalid("compose settings must be positive"));
        }
        if let Some(t) = c.t_split {
            if !(t > self.time.t_start && t < self.time.t_end) {
                return Err(invalid(
                    "compose.t_split must lie strictly inside the time interval",
                ));
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.time.t_start, self.time.t_end, self.time.n_steps)
            .map_err(|e| invalid(e.to_string()))
    }

    /// Grid reaching `extent_sigma·σ` past both endpoints with spacing
    /// `σ/divisor`, `σ = √(ħT/m)`.
    pub fn oracle_space(
        &self,
        duration: f64,
        extent_sigma: f64,
        divisor: f64,
    ) -> Result<SpaceGrid, CliError> {
        let m = self.hamiltonian.mass();
        let sigma = (self.hbar * duration / m).sqrt();
        let (a, b) = (self.endpoints.q_i, self.endpoints.q_f);
        SpaceGrid::covering(a.min(b), a.max(b), extent_sigma * sigma, sigma / divisor)
            .map_err(|e| invalid(e.to_string()))
    }

    pub fn space_grid(&self) -> Result<SpaceGrid, CliError> {
        match &self.space {
            SpaceSpec::Explicit { points } => {
                SpaceGrid::new(points.clone()).map_err(|e| invalid(e.to_string()))
            }
            SpaceSpec::Uniform {
                start,
                spacing,
                count,
            } => SpaceGrid::uniform(*start, *spacing, *count).map_err(|e| invalid(e.to_string())),
            SpaceSpec::Oracle {
                extent_sigma,
                spacing_divisor,
            } => self.oracle_space(
                self.time_grid()?.duration(),
                *extent_sigma,
                *spacing_divisor,
            ),
        }
    }

    pub fn enumerator(&self) -> Result<PositionPathEnumerator, CliError> {
        PositionPathEnumerator::new(
            self.time_grid()?,
            self.space_grid()?,
            self.endpoints.q_i,
            self.endpoints.q_f,
            self.hop_limit,
        )
        .map_err(|e| invalid(e.to_string()))
    }

    /// Explicit or seeded matrix, if the config supplies one.
    pub fn supplied_matrix(&self) -> Result<Option<ActionMatrix>, CliError> {
        match &self.matrix {
            None => Ok(None),
            Some(MatrixSpec::Explicit { rows }) => ActionMatrix::from_rows(rows.clone())
                .map(Some)
                .map_err(|e| invalid(e.to_string())),
            Some(MatrixSpec::Random { n, low, high }) => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
                let rows = (0..*n)
                    .map(|_| {
                        (0..*n)
                            .map(|_| rng.gen_range(*low..=*high) as f64)
                            .collect()
                    })
                    .collect();
                ActionMatrix::from_rows(rows)
                    .map(Some)
                    .map_err(|e| invalid(e.to_string()))
            }
        }
    }
}
