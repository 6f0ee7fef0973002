//! File-backed model repository: one TOML metadata file per model under a
//! root directory, with an in-memory index rebuilt by scanning on open.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{valid_model_id, ModelDescriptor, ModelFamily};
use crate::error::{from_toml, Error, Result};

const EXTENSION: &str = "toml";
const MODEL_SCHEMA_VERSION: u32 = 1;

/// Filter for [`ModelRepository::search`]. `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelQuery {
    pub family: Option<ModelFamily>,
    pub num_layers: Option<u32>,
    pub width: Option<u32>,
    pub seq_len: Option<u32>,
    pub precision_bytes: Option<u8>,
    pub id_prefix: Option<String>,
}

impl ModelQuery {
    pub fn family(family: ModelFamily) -> Self {
        ModelQuery {
            family: Some(family),
            ..Default::default()
        }
    }

    pub fn matches(&self, m: &ModelDescriptor) -> bool {
        if self.family.is_some_and(|f| f != m.family) {
            return false;
        }
        if let Some(prefix) = &self.id_prefix {
            if !m.model_id.starts_with(prefix.as_str()) {
                return false;
            }
        }
        let wants_params = self.num_layers.is_some()
            || self.width.is_some()
            || self.seq_len.is_some()
            || self.precision_bytes.is_some();
        if !wants_params {
            return true;
        }
        let Some(p) = m.generator_params() else {
            return false;
        };
        self.num_layers.is_none_or(|v| v == p.num_layers)
            && self.width.is_none_or(|v| v == p.width)
            && self.seq_len.is_none_or(|v| Some(v) == p.seq_len)
            && self.precision_bytes.is_none_or(|v| v == p.precision_bytes)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    model: ModelDescriptor,
}

/// Model repository rooted at a directory.
///
/// Mutations are serialised behind a write lock and land on disk by
/// write-then-rename, so a crash never leaves a half-written model file.
#[derive(Debug)]
pub struct ModelRepository {
    root: PathBuf,
    index: RwLock<BTreeMap<String, ModelDescriptor>>,
}

impl ModelRepository {
    /// Opens (creating if needed) a repository and rebuilds its index.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let mut index = BTreeMap::new();
        let entries = std::fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&root, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let model = read_model_file(&path)?;
            index.insert(model.model_id.clone(), model);
        }
        Ok(ModelRepository {
            root,
            index: RwLock::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn register(&self, descriptor: ModelDescriptor) -> Result<ModelDescriptor> {
        descriptor.validate()?;
        let mut index = self.index.write().expect("repository lock poisoned");
        if index.contains_key(&descriptor.model_id) {
            return Err(Error::Duplicate {
                kind: "model",
                id: descriptor.model_id,
            });
        }
        let stored = ModelDescriptor {
            version: 1,
            ..descriptor
        };
        self.write_file(&stored)?;
        index.insert(stored.model_id.clone(), stored.clone());
        Ok(stored)
    }

    /// Replaces an existing model's figures and bumps its version.
    pub fn update(&self, descriptor: ModelDescriptor) -> Result<ModelDescriptor> {
        descriptor.validate()?;
        let mut index = self.index.write().expect("repository lock poisoned");
        let current = index.get(&descriptor.model_id).ok_or_else(|| Error::NotFound {
            kind: "model",
            id: descriptor.model_id.clone(),
        })?;
        let stored = ModelDescriptor {
            version: current.version + 1,
            ..descriptor
        };
        self.write_file(&stored)?;
        index.insert(stored.model_id.clone(), stored.clone());
        Ok(stored)
    }

    pub fn delete(&self, model_id: &str) -> Result<ModelDescriptor> {
        let mut index = self.index.write().expect("repository lock poisoned");
        if !index.contains_key(model_id) {
            return Err(Error::NotFound {
                kind: "model",
                id: model_id.to_string(),
            });
        }
        let path = self.path_for(model_id);
        std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        Ok(index.remove(model_id).expect("checked above"))
    }

    pub fn get(&self, model_id: &str) -> Result<ModelDescriptor> {
        self.index
            .read()
            .expect("repository lock poisoned")
            .get(model_id)
            .cloned()
            .ok_or_else(|| Error::NotFound {
                kind: "model",
                id: model_id.to_string(),
            })
    }

    /// Matching models ordered by id.
    pub fn search(&self, query: &ModelQuery) -> Vec<ModelDescriptor> {
        self.index
            .read()
            .expect("repository lock poisoned")
            .values()
            .filter(|m| query.matches(m))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("repository lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path_for(&self, model_id: &str) -> PathBuf {
        debug_assert!(valid_model_id(model_id));
        self.root.join(format!("{model_id}.{EXTENSION}"))
    }

    fn write_file(&self, model: &ModelDescriptor) -> Result<()> {
        let text = model_to_toml(model);
        let path = self.path_for(&model.model_id);
        let tmp = self.root.join(format!(".{}.tmp", model.model_id));
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

pub fn model_to_toml(model: &ModelDescriptor) -> String {
    toml::to_string(&ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    })
    .expect("descriptor serializes")
}

pub fn model_from_toml(text: &str) -> Result<ModelDescriptor> {
    let file: ModelFile = toml::from_str(text).map_err(|e| from_toml(text, e))?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::validation(
            "schema_version",
            format!("unsupported model file version {}", file.schema_version),
        ));
    }
    file.model.validate()?;
    Ok(file.model)
}

pub fn read_model_file(path: &Path) -> Result<ModelDescriptor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_toml(&text)
}
