use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use hsc_core::body::BodyModel;
use log::error;

use crate::config::PipelineConfig;
use crate::manifest::{DatasetManifest, SequenceEntry};

/// Everything a command needs: the validated config, the manifest and the
/// body model, plus the sequence-level parallelism limit.
pub struct Workspace {
    pub cfg: PipelineConfig,
    pub manifest: DatasetManifest,
    pub model: BodyModel,
    pub jobs: usize,
}

impl Workspace {
    pub fn open(cfg: PipelineConfig, jobs: usize) -> Result<Self> {
        cfg.validate()?;
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        let manifest = DatasetManifest::load(&cfg.output)?;
        let model = BodyModel::load(&cfg.output.join(&manifest.model))?;
        Ok(Self { cfg, manifest, model, jobs })
    }

    pub fn root(&self) -> &Path {
        &self.cfg.output
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.cfg.output.join(rel)
    }

    /// Runs `f` on every sequence, at most `jobs` at a time, and returns the
    /// results in input order. Every sequence runs even if another fails;
    /// failures are logged and the first is returned.
    pub fn for_each<R, F>(&self, sequences: &[&SequenceEntry], f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(&SequenceEntry) -> Result<R> + Sync + Send,
    {
        let results = self.map_limited(sequences, |s| f(s));
        let mut out = Vec::with_capacity(results.len());
        let mut first_error = None;
        for (s, r) in sequences.iter().zip(results) {
            match r {
                Ok(v) => out.push(v),
                Err(e) => {
                    error!("sequence {}: {e:#}", s.id);
                    first_error.get_or_insert(e.context(format!("sequence {}", s.id)));
                }
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    #[cfg(feature = "parallel")]
    fn map_limited<R, F>(&self, sequences: &[&SequenceEntry], f: F) -> Vec<Result<R>>
    where
        R: Send,
        F: Fn(&SequenceEntry) -> Result<R> + Sync + Send,
    {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build() {
            Ok(pool) => pool.install(|| sequences.par_iter().map(|s| f(s)).collect()),
            Err(e) => {
                log::warn!("no thread pool ({e}); running sequentially");
                sequences.iter().map(|s| f(s)).collect()
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn map_limited<R, F>(&self, sequences: &[&SequenceEntry], f: F) -> Vec<Result<R>>
    where
        R: Send,
        F: Fn(&SequenceEntry) -> Result<R> + Sync + Send,
    {
        sequences.iter().map(|s| f(s)).collect()
    }
}
