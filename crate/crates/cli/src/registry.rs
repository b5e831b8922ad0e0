//! Named suffix generators loaded from model directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use imtkit::imt::{CopyGenerator, NmtGenerator, SmtGenerator, SuffixGenerator};
use imtkit::nmt::{NmtError, NmtSystem, NMT_MODEL_FILE};
use imtkit::smt::{SmtError, SmtModel, PHRASE_TABLE_FILE};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable naming the directory scanned for engines.
pub const MODEL_DIR_ENV: &str = "IMT_MODEL_DIR";

/// Name of the always-present engine that proposes the source unchanged.
pub const COPY_ENGINE: &str = "copy";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: no phrase table or neural checkpoint found")]
    NotAModel(PathBuf),
    #[error("engine {0:?} is already registered")]
    Duplicate(String),
    #[error("unknown engine {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Nmt(#[from] NmtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Smt,
    Neural,
    Copy,
    Scripted,
}

/// A loaded engine and where it came from.
#[derive(Clone)]
pub struct Engine {
    pub name: String,
    pub kind: EngineKind,
    pub path: Option<PathBuf>,
    /// SHA-256 over the model directory's files.
    pub digest: String,
    pub generator: Arc<dyn SuffixGenerator>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("path", &self.path)
            .field("digest", &self.digest)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineInfo {
    pub name: String,
    pub kind: EngineKind,
    pub path: Option<String>,
    pub digest: String,
}

impl Engine {
    pub fn copy() -> Self {
        Engine {
            name: COPY_ENGINE.to_string(),
            kind: EngineKind::Copy,
            path: None,
            digest: hex::encode(Sha256::digest(COPY_ENGINE.as_bytes())),
            generator: Arc::new(CopyGenerator),
        }
    }

    /// Loads an SMT or neural model directory, telling them apart by their
    /// main file.
    pub fn load(name: &str, dir: &Path) -> Result<Self, RegistryError> {
        let (kind, generator): (EngineKind, Arc<dyn SuffixGenerator>) = if dir.join(PHRASE_TABLE_FILE).is_file() {
            (EngineKind::Smt, Arc::new(SmtGenerator::new(Arc::new(SmtModel::load(dir)?))))
        } else if dir.join(NMT_MODEL_FILE).is_file() {
            (EngineKind::Neural, Arc::new(NmtGenerator::new(Arc::new(NmtSystem::load(dir)?))))
        } else {
            return Err(RegistryError::NotAModel(dir.to_path_buf()));
        };
        Ok(Engine {
            name: name.to_string(),
            kind,
            path: Some(dir.to_path_buf()),
            digest: model_digest(dir)?,
            generator,
        })
    }

    pub fn info(&self) -> EngineInfo {
        EngineInfo {
            name: self.name.clone(),
            kind: self.kind,
            path: self.path.as_ref().map(|p| p.display().to_string()),
            digest: self.digest.clone(),
        }
    }
}

/// SHA-256 over the names and contents of the regular files in `dir`,
/// visited in name order.
pub fn model_digest(dir: &Path) -> Result<String, RegistryError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RegistryError::Io { path, source }
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        if entry.file_type().map_err(io(&entry.path()))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for path in files {
        let bytes = fs::read(&path).map_err(io(&path))?;
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Engines by unique name. Always contains the copy engine.
#[derive(Debug, Clone)]
pub struct EngineRegistry {
    engines: BTreeMap<String, Engine>,
}

impl Default for EngineRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl EngineRegistry {
    pub fn new() -> Self {
        let mut engines = BTreeMap::new();
        engines.insert(COPY_ENGINE.to_string(), Engine::copy());
        EngineRegistry { engines }
    }

    /// Registers every subdirectory of `dir` holding a model, named after
    /// the subdirectory.
    pub fn from_dir(dir: &Path) -> Result<Self, RegistryError> {
        let mut reg = Self::new();
        let io = |source| RegistryError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut subdirs = Vec::new();
        for entry in fs::read_dir(dir).map_err(io)? {
            let entry = entry.map_err(io)?;
            if entry.path().is_dir() {
                subdirs.push(entry.path());
            }
        }
        subdirs.sort();
        for sub in subdirs {
            let name = sub.file_name().unwrap_or_default().to_string_lossy().into_owned();
            match Engine::load(&name, &sub) {
                Ok(engine) => {
                    log::info!("engine {name}: {:?} from {}", engine.kind, sub.display());
                    reg.register(engine)?;
                }
                Err(RegistryError::NotAModel(p)) => log::debug!("skipping {}", p.display()),
                Err(e) => return Err(e),
            }
        }
        Ok(reg)
    }

    /// Reads [`MODEL_DIR_ENV`]; only the copy engine when it is unset.
    pub fn from_env() -> Result<Self, RegistryError> {
        match std::env::var_os(MODEL_DIR_ENV) {
            Some(dir) => Self::from_dir(Path::new(&dir)),
            None => Ok(Self::new()),
        }
    }

    pub fn register(&mut self, engine: Engine) -> Result<(), RegistryError> {
        if self.engines.contains_key(&engine.name) {
            return Err(RegistryError::Duplicate(engine.name));
        }
        self.engines.insert(engine.name.clone(), engine);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Engine> {
        self.engines.get(name)
    }

    /// A registered name, or else a path to a model directory.
    pub fn resolve(&self, spec: &str) -> Result<Engine, RegistryError> {
        if let Some(e) = self.get(spec) {
            return Ok(e.clone());
        }
        let path = Path::new(spec);
        if path.is_dir() {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            return Engine::load(&name, path);
        }
        Err(RegistryError::Unknown(spec.to_string()))
    }

    pub fn infos(&self) -> Vec<EngineInfo> {
        self.engines.values().map(Engine::info).collect()
    }

    pub fn len(&self) -> usize {
        self.engines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.engines.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use imtkit::smt::{train_smt, SmtTrainConfig};
    use imtkit::{ParallelCorpus, Sentence};

    fn save_toy_smt(dir: &Path) {
        let (corpus, _) = ParallelCorpus::from_pairs(
            "toy",
            [("el fijo dixo", "el hijo dijo"), ("el fijo vio", "el hijo vio")]
                .iter()
                .map(|(s, t)| (Sentence::from_words(s), Sentence::from_words(t))),
        );
        train_smt(&corpus, &[], &SmtTrainConfig::default()).unwrap().save(dir).unwrap();
    }

    #[test]
    fn scans_model_dirs_and_keeps_copy() {
        let root = tempfile::tempdir().unwrap();
        save_toy_smt(&root.path().join("smt"));
        fs::create_dir(root.path().join("empty")).unwrap();
        let reg = EngineRegistry::from_dir(root.path()).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.get("smt").unwrap().kind, EngineKind::Smt);
        assert_eq!(reg.get(COPY_ENGINE).unwrap().kind, EngineKind::Copy);
        let src = Sentence::from_words("el fijo dixo");
        let out = reg.get("smt").unwrap().generator.suffix(&src, &Sentence::default()).unwrap();
        assert_eq!(out, Sentence::from_words("el hijo dijo"));
    }

    #[test]
    fn digest_tracks_model_file_changes() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("smt");
        save_toy_smt(&dir);
        let a = model_digest(&dir).unwrap();
        assert_eq!(a, model_digest(&dir).unwrap());
        let weights = dir.join(imtkit::smt::WEIGHTS_FILE);
        let original = fs::read_to_string(&weights).unwrap();
        fs::write(&weights, format!("{original}\n")).unwrap();
        let b = model_digest(&dir).unwrap();
        assert_ne!(a, b);
        fs::write(&weights, original).unwrap();
        assert_eq!(a, model_digest(&dir).unwrap());
    }

    #[test]
    fn duplicate_and_unknown_names_are_errors() {
        let mut reg = EngineRegistry::new();
        assert!(matches!(reg.register(Engine::copy()), Err(RegistryError::Duplicate(_))));
        assert!(matches!(reg.resolve("nope"), Err(RegistryError::Unknown(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(reg.resolve(dir.path().to_str().unwrap()), Err(RegistryError::NotAModel(_))));
    }
}
