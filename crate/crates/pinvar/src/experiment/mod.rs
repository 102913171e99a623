//! The cross-validation protocol: one training window, several disjoint
//! test intervals, and a grid over basis, ridge `r` and ODE weight `w_o`.
//!
//! Indices in [`ExperimentConfig`] are 1-based. A test interval starting at
//! `k₀` seeds the rollout with rows `k₀ − (p − 1) s ..= k₀` and compares
//! prediction `j` against row `k₀ + j`.

mod report;
mod sweep;

use std::collections::HashSet;
use std::path::PathBuf;

use pinvar_core::train::{training_objective, TrainingWeights};
use pinvar_core::{
    build_training_problem, generate_dataset, generate_exact_spring_dataset, solve_weights, Basis, Dataset,
    EmbeddingSpec, MetricReport, NvarModel, OdeSystem, StateFunctionSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_file::{ModelFile, TrainingMeta};

pub use report::{
    aggregate_csv, aggregate_median, lower_median, markdown_tables, read_results, write_aggregate, write_errors, write_results,
    AggregateRow, Aggregation, IncompleteCell,
};
pub use sweep::{run_sweep, CellError, CellKey, SweepOutcome, TrialRecord};

/// Rows the support radii are measured over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiiSource {
    /// The training inputs only.
    Training,
    /// Every row of the dataset.
    #[default]
    All,
}

impl RadiiSource {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "training" => Ok(RadiiSource::Training),
            "all" => Ok(RadiiSource::All),
            _ => Err(Error::Config(format!("unknown radii source {name:?} (expected training or all)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Sample the closed-form solution (spring only).
    Exact { h: f64 },
    /// RK4 at `fine_h`, keeping every `downsample`-th state.
    Rk4 { fine_h: f64, downsample: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub n_points: usize,
    pub scheme: Scheme,
}

impl GenerationConfig {
    pub const DEFAULT_POINTS: usize = 100_000;

    pub fn default_for(system: &OdeSystem) -> Self {
        let scheme = match system {
            OdeSystem::Spring { .. } => Scheme::Exact { h: 1e-3 },
            OdeSystem::LotkaVolterra { .. } => Scheme::Rk4 {
                fine_h: 1e-5,
                downsample: 10_000,
            },
            OdeSystem::Lorenz { .. } => Scheme::Rk4 {
                fine_h: 1e-5,
                downsample: 100,
            },
        };
        GenerationConfig {
            n_points: Self::DEFAULT_POINTS,
            scheme,
        }
    }

    pub fn h(&self) -> f64 {
        match self.scheme {
            Scheme::Exact { h } => h,
            Scheme::Rk4 { fine_h, downsample } => fine_h * downsample as f64,
        }
    }

    pub fn generate(&self, system: &OdeSystem) -> Result<Dataset> {
        match (self.scheme, system) {
            (Scheme::Exact { h }, OdeSystem::Spring { k }) => {
                Ok(generate_exact_spring_dataset(*k, h, self.n_points)?)
            }
            (Scheme::Exact { .. }, _) => Err(Error::Config(format!(
                "{} has no closed-form solution; use the rk4 scheme",
                system.name()
            ))),
            (Scheme::Rk4 { fine_h, downsample }, _) => Ok(generate_dataset(
                system.name(),
                system,
                &system.initial_state(),
                fine_h,
                downsample,
                self.n_points,
            )?),
        }
    }
}

/// A complete experiment description. Missing fields take the defaults of
/// [`ExperimentConfig::for_problem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    /// Overrides the canonical parameters of `problem`.
    pub system: Option<OdeSystem>,
    /// Read the dataset from this CSV instead of generating it.
    pub data: Option<PathBuf>,
    pub generation: Option<GenerationConfig>,
    pub bases: Vec<Basis>,
    pub lookback: usize,
    pub stride: usize,
    pub train_start: usize,
    pub train_len: usize,
    pub test_starts: Vec<usize>,
    pub test_len: usize,
    pub ridge: Vec<f64>,
    pub ode_weights: Vec<f64>,
    pub data_weight: f64,
    pub threshold: f64,
    pub radii_from: RadiiSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "spring".into(),
            system: None,
            data: None,
            generation: None,
            bases: Basis::ALL.to_vec(),
            lookback: 10,
            stride: 1,
            train_start: 2001,
            train_len: 1500,
            test_starts: vec![10_001, 20_001, 30_001, 40_001, 50_001],
            test_len: 10_000,
            ridge: vec![1e-12, 1e-8, 1e-4, 1e-2, 1e-1],
            ode_weights: vec![0.0, 1e-4, 1e-2, 1e-1, 0.5, 1.0],
            data_weight: 1.0,
            threshold: 1e-4,
            radii_from: RadiiSource::All,
        }
    }
}

impl ExperimentConfig {
    pub fn for_problem(problem: &str) -> Self {
        ExperimentConfig {
            problem: problem.into(),
            ..Default::default()
        }
    }

    pub fn system(&self) -> Result<OdeSystem> {
        let canonical = OdeSystem::from_name(&self.problem)?;
        match self.system {
            Some(s) if s.name() != canonical.name() => Err(Error::Config(format!(
                "system {} does not match problem {}",
                s.name(),
                self.problem
            ))),
            Some(s) => Ok(s),
            None => Ok(canonical),
        }
    }

    /// Fills in the system parameters and, when generating, the generation
    /// settings, so the config records everything the run depends on.
    pub fn resolved(&self) -> Result<Self> {
        let system = self.system()?;
        let mut out = self.clone();
        out.system = Some(system);
        if out.data.is_none() && out.generation.is_none() {
            out.generation = Some(GenerationConfig::default_for(&system));
        }
        Ok(out)
    }

    pub fn history(&self) -> usize {
        self.lookback.saturating_sub(1) * self.stride
    }

    /// Checks everything that does not depend on the dataset, then the
    /// index sets against a dataset of `n_points` rows.
    pub fn validate(&self, n_points: usize) -> Result<()> {
        self.system()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lookback == 0 || self.stride == 0 {
            return bad("lookback and stride must be positive".into());
        }
        if self.bases.is_empty() || self.ridge.is_empty() || self.ode_weights.is_empty() {
            return bad("bases, ridge and ode_weights must be non-empty".into());
        }
        let unique: HashSet<_> = self.bases.iter().collect();
        if unique.len() != self.bases.len() {
            return bad("bases contains duplicates".into());
        }
        for (name, grid) in [("ridge", &self.ridge), ("ode_weights", &self.ode_weights)] {
            let unique: HashSet<u64> = grid.iter().map(|v| v.to_bits()).collect();
            if unique.len() != grid.len() {
                return bad(format!("{name} contains duplicates"));
            }
        }
        for &r in &self.ridge {
            for &w_o in &self.ode_weights {
                TrainingWeights::new(self.data_weight, w_o, r).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return bad(format!("threshold must be positive, got {}", self.threshold));
        }
        if self.train_len == 0 {
            return bad("training window is empty".into());
        }
        if self.test_len == 0 || self.test_starts.is_empty() {
            return bad("at least one non-empty test interval is required".into());
        }

        let hist = self.history();
        if self.train_start <= hist {
            return bad(format!(
                "train_start {} leaves fewer than {hist} rows of history",
                self.train_start
            ));
        }
        let train_rows = (self.train_start - hist, self.train_start + self.train_len);
        if train_rows.1 > n_points {
            return bad(format!(
                "training targets reach row {} but the dataset has {n_points} rows",
                train_rows.1
            ));
        }
        for &k0 in &self.test_starts {
            if k0 <= hist {
                return bad(format!("test interval at {k0} leaves fewer than {hist} rows of history"));
            }
            let rows = (k0 - hist, k0 + self.test_len);
            if rows.1 > n_points {
                return bad(format!(
                    "test interval at {k0} reaches row {} but the dataset has {n_points} rows",
                    rows.1
                ));
            }
            if rows.0 <= train_rows.1 && train_rows.0 <= rows.1 {
                return bad(format!(
                    "test interval rows {}..={} overlap training rows {}..={}",
                    rows.0, rows.1, train_rows.0, train_rows.1
                ));
            }
        }
        Ok(())
    }
}

/// 0-based rows the radii are taken over.
pub fn radii_rows(source: RadiiSource, train_start: usize, train_len: usize, n_points: usize) -> std::ops::Range<usize> {
    match source {
        RadiiSource::Training => train_start - 1..train_start - 1 + train_len,
        RadiiSource::All => 0..n_points,
    }
}

/// Everything needed to train one model outside a sweep.
#[derive(Debug, Clone)]
pub struct TrainRequest<'a> {
    pub dataset: &'a Dataset,
    pub system: OdeSystem,
    pub basis: Basis,
    pub embedding: EmbeddingSpec,
    /// 1-based.
    pub train_start: usize,
    pub train_len: usize,
    pub weights: TrainingWeights,
    pub radii: &'a [f64],
    pub radii_from: RadiiSource,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: NvarModel,
    pub file: ModelFile,
}

pub fn train_model(req: &TrainRequest<'_>) -> Result<TrainedModel> {
    if req.train_start == 0 {
        return Err(Error::Config("train_start is 1-based and must be positive".into()));
    }
    let spec = StateFunctionSpec::with_radii(req.basis, req.embedding, req.radii)?;
    let problem = build_training_problem(
        req.dataset,
        &req.system,
        &spec,
        req.train_start - 1,
        req.train_len,
        req.weights,
    )?;
    let solution = solve_weights(&problem)?;
    let objective = training_objective(&problem, &solution.weights)?;
    let model = NvarModel::new(solution.weights.clone(), spec.clone(), req.dataset.h)?;
    let file = ModelFile {
        system: req.system,
        spec,
        h: req.dataset.h,
        d: req.embedding.dim,
        m: model.m(),
        weights: solution.weights,
        training: TrainingMeta {
            w_d: req.weights.data,
            w_o: req.weights.ode,
            r: req.weights.ridge,
            train_start: req.train_start,
            train_len: req.train_len,
            radii: req.radii.to_vec(),
            radii_from: req.radii_from,
            rank_deficient: solution.rank_deficient,
            objective,
        },
    };
    Ok(TrainedModel { model, file })
}

/// Rolls `model` out from the interval starting at 1-based row `k0` and
/// scores it against the following `steps` rows.
pub fn evaluate_interval(
    model: &NvarModel,
    system: &OdeSystem,
    dataset: &Dataset,
    k0: usize,
    steps: usize,
    threshold: f64,
) -> Result<MetricReport> {
    let hist = model.spec().embedding.history();
    if k0 <= hist || k0 + steps > dataset.len() {
        return Err(Error::Config(format!(
            "interval at {k0} with {steps} steps needs rows {}..={} of a {}-row dataset",
            k0 as isize - hist as isize,
            k0 + steps,
            dataset.len()
        )));
    }
    let newest = k0 - 1;
    let seed = dataset.rows(newest - hist, newest + 1);
    let rollout = model.recursive_predict(seed, steps)?;
    let reference = dataset.rows(newest + 1, newest + 1 + steps);
    Ok(MetricReport::evaluate(model, system, seed, &rollout, reference, threshold)?)
}

/// A validated config together with its dataset and radii.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: OdeSystem,
    pub dataset: Dataset,
    pub radii: Vec<f64>,
}

impl Experiment {
    /// Reads or generates the dataset described by `config`.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let config = config.resolved()?;
        let system = config.system()?;
        let dataset = match (&config.data, &config.generation) {
            (Some(path), _) => crate::dataset_csv::read_dataset(path)?,
            (None, Some(gen)) => gen.generate(&system)?,
            (None, None) => unreachable!("resolved config has a data source"),
        };
        Self::new(config, dataset)
    }

    pub fn new(config: ExperimentConfig, dataset: Dataset) -> Result<Self> {
        let config = config.resolved()?;
        let system = config.system()?;
        if dataset.dim() != pinvar_core::VectorField::dim(&system) {
            return Err(Error::Config(format!(
                "dataset has dimension {} but {} has dimension {}",
                dataset.dim(),
                system.name(),
                pinvar_core::VectorField::dim(&system)
            )));
        }
        if !dataset.system_name.is_empty() && dataset.system_name != system.name() {
            return Err(Error::Config(format!(
                "dataset is for {} but the problem is {}",
                dataset.system_name,
                system.name()
            )));
        }
        config.validate(dataset.len())?;
        let rows = radii_rows(config.radii_from, config.train_start, config.train_len, dataset.len());
        let radii = pinvar_core::state_function::compute_radii(&dataset, rows)?;
        Ok(Experiment {
            config,
            system,
            dataset,
            radii,
        })
    }

    pub fn embedding(&self) -> EmbeddingSpec {
        EmbeddingSpec {
            lookback: self.config.lookback,
            stride: self.config.stride,
            dim: self.dataset.dim(),
        }
    }

    pub fn train(&self, basis: Basis, r: f64, w_o: f64) -> Result<TrainedModel> {
        train_model(&TrainRequest {
            dataset: &self.dataset,
            system: self.system,
            basis,
            embedding: self.embedding(),
            train_start: self.config.train_start,
            train_len: self.config.train_len,
            weights: TrainingWeights::new(self.config.data_weight, w_o, r)?,
            radii: &self.radii,
            radii_from: self.config.radii_from,
        })
    }

    /// Scores a trained model on test interval `interval` (1-based position
    /// in `test_starts`).
    pub fn evaluate(&self, model: &NvarModel, interval: usize) -> Result<MetricReport> {
        let k0 = *interval
            .checked_sub(1)
            .and_then(|i| self.config.test_starts.get(i))
            .ok_or_else(|| Error::Config(format!("no test interval {interval}")))?;
        evaluate_interval(model, &self.system, &self.dataset, k0, self.config.test_len, self.config.threshold)
    }

    /// Trains the `(basis, r, w_o)` model and scores it on one interval.
    pub fn run_trial(&self, basis: Basis, r: f64, w_o: f64, interval: usize) -> Result<MetricReport> {
        let trained = self.train(basis, r, w_o)?;
        self.evaluate(&trained.model, interval)
    }

    /// Grid cells in canonical order: basis, then `r`, then `w_o`.
    pub fn cells(&self) -> Vec<CellKey> {
        let c = &self.config;
        c.bases
            .iter()
            .flat_map(|&basis| {
                c.ridge
                    .iter()
                    .flat_map(move |&r| c.ode_weights.iter().map(move |&w_o| CellKey { basis, r, w_o }))
            })
            .collect()
    }
}
