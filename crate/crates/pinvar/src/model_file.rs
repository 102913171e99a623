//! Model JSON: the trained weights, the state function that produced them
//! and how they were trained.

use std::fs;
use std::path::Path;

use pinvar_core::train::Objective;
use pinvar_core::{NvarModel, OdeSystem, StateFunctionSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub w_d: f64,
    pub w_o: f64,
    pub r: f64,
    /// 1-based index of the first training input.
    pub train_start: usize,
    pub train_len: usize,
    pub radii: Vec<f64>,
    pub radii_from: crate::experiment::RadiiSource,
    pub rank_deficient: bool,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub system: OdeSystem,
    pub spec: StateFunctionSpec,
    pub h: f64,
    pub d: usize,
    pub m: usize,
    /// Row-major `d × m`.
    pub weights: Vec<f64>,
    pub training: TrainingMeta,
}

impl ModelFile {
    pub fn model(&self) -> Result<NvarModel> {
        if self.d != self.spec.embedding.dim || self.m != self.spec.m() {
            return Err(Error::Other(format!(
                "model header says {}×{} but the state function is {}×{}",
                self.d,
                self.m,
                self.spec.embedding.dim,
                self.spec.m()
            )));
        }
        Ok(NvarModel::new(self.weights.clone(), self.spec.clone(), self.h)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
