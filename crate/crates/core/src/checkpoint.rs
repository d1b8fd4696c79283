//! Versioned JSON checkpoints.

use std::fs;
use std::io::Write;
use std::path::Path;

use funcgnn_numcore::optim::AdamRecord;
use funcgnn_numcore::params::TensorRecord;
use funcgnn_numcore::rng::stream;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMask, Vocabularies};
use crate::hiernet::{HierModel, ModelSpec, TIERS};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    /// Epoch whose parameters are stored.
    pub epoch: usize,
    pub model: ModelSpec,
    pub mask: FeatureMask,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub classes: [usize; TIERS],
    pub vocab_hash: String,
    pub vocab: Vocabularies,
    pub params: Vec<(String, TensorRecord)>,
    pub optimizer: Option<AdamRecord>,
}

impl Checkpoint {
    pub fn capture(
        model: &HierModel,
        vocab: &Vocabularies,
        mask: FeatureMask,
        seed: u64,
        epoch: usize,
        optimizer: Option<AdamRecord>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed,
            epoch,
            model: model.spec.clone(),
            mask,
            node_dim: model.node_dim,
            edge_dim: model.edge_dim,
            classes: model.classes,
            vocab_hash: vocab.hash(),
            vocab: vocab.clone(),
            params: model.store.records(),
            optimizer,
        }
    }

    /// Rebuilds the model and loads every stored parameter.
    pub fn restore(&self) -> Result<HierModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let found = self.vocab.hash();
        if found != self.vocab_hash {
            return Err(Error::VocabHash {
                expected: self.vocab_hash.clone(),
                found,
            });
        }
        let mut model = HierModel::new(
            self.model.clone(),
            self.node_dim,
            self.edge_dim,
            self.classes,
            &mut stream(0, 0),
        )?;
        model
            .store
            .load_records(self.params.iter().map(|(n, r)| (n.as_str(), r)))?;
        Ok(model)
    }

    /// Fails unless `vocab` is the vocabulary this checkpoint was trained on.
    pub fn check_vocab(&self, vocab: &Vocabularies) -> Result<()> {
        let found = vocab.hash();
        if found == self.vocab_hash {
            Ok(())
        } else {
            Err(Error::VocabHash {
                expected: self.vocab_hash.clone(),
                found,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes to `<path>.partial`, then renames into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let partial = path.with_extension("json.partial");
        let mut f = fs::File::create(&partial)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.sync_all()?;
        fs::rename(&partial, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
