//! Checkpoint container: a JSON document holding the encoder configuration
//! and named parameter tensors in up to three sections.
//!
//! ```text
//! {
//!   "format": "polyprobe-checkpoint",
//!   "version": 1,
//!   "encoder_config": { "vocab_size": .., "d_model": .., ... },
//!   "sections": {
//!     "encoder":       [ { "name": "token_embedding", "shape": [V, d], "data": [..] }, ... ],
//!     "task_head":     [ { "name": "weight", ... }, { "name": "bias", ... } ],
//!     "language_head": [ ... ]
//!   }
//! }
//! ```
//!
//! Tensors are stored row-major. Floats are written with enough digits to
//! round-trip exactly. Absent heads are omitted from `sections`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, EncoderModel};
use crate::error::{Error, Result};
use crate::heads::ClassifierHead;
use crate::params::{Params, TensorRecord};

pub const FORMAT: &str = "polyprobe-checkpoint";
pub const VERSION: u32 = 1;

/// An encoder and optionally its two heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderModel,
    pub task_head: Option<ClassifierHead>,
    pub language_head: Option<ClassifierHead>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    encoder_config: EncoderConfig,
    sections: BTreeMap<String, Vec<TensorRecord>>,
}

fn head_from_records(records: &[TensorRecord], section: &str) -> Result<ClassifierHead> {
    let weight = records
        .iter()
        .find(|r| r.name == "weight")
        .ok_or_else(|| Error::Checkpoint(format!("section {section} has no weight tensor")))?;
    if weight.shape.len() != 2 {
        return Err(Error::Checkpoint(format!("section {section}: weight must be 2-d")));
    }
    let mut head = ClassifierHead::zeros(weight.shape[0], weight.shape[1])
        .map_err(|e| Error::Checkpoint(format!("section {section}: {e}")))?;
    head.load_records(records)
        .map_err(|e| Error::Checkpoint(format!("section {section}: {e}")))?;
    Ok(head)
}

impl Checkpoint {
    pub fn encoder_only(encoder: EncoderModel) -> Self {
        Checkpoint {
            encoder,
            task_head: None,
            language_head: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut sections = BTreeMap::new();
        sections.insert("encoder".to_string(), self.encoder.to_records());
        if let Some(h) = &self.task_head {
            sections.insert("task_head".to_string(), h.to_records());
        }
        if let Some(h) = &self.language_head {
            sections.insert("language_head".to_string(), h.to_records());
        }
        let doc = Document {
            format: FORMAT.to_string(),
            version: VERSION,
            encoder_config: self.encoder.config.clone(),
            sections,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if doc.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format tag {:?}", doc.format)));
        }
        if doc.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", doc.version)));
        }
        let mut encoder = EncoderModel::zeros(doc.encoder_config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let records = doc
            .sections
            .get("encoder")
            .ok_or_else(|| Error::Checkpoint("missing encoder section".into()))?;
        encoder.load_records(records)?;
        let task_head = doc.sections.get("task_head").map(|r| head_from_records(r, "task_head")).transpose()?;
        let language_head = doc
            .sections
            .get("language_head")
            .map(|r| head_from_records(r, "language_head"))
            .transpose()?;
        if let Some(unknown) = doc
            .sections
            .keys()
            .find(|k| !["encoder", "task_head", "language_head"].contains(&k.as_str()))
        {
            return Err(Error::Checkpoint(format!("unknown section {unknown}")));
        }
        for head in task_head.iter().chain(&language_head) {
            if head.d_model() != encoder.d_model() {
                return Err(Error::Checkpoint(format!(
                    "head input dimension {} does not match encoder width {}",
                    head.d_model(),
                    encoder.d_model()
                )));
            }
        }
        Ok(Checkpoint {
            encoder,
            task_head,
            language_head,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
