//! Flat key=value run configuration: a text file merged with command-line
//! overrides, fully resolved (and echoed to disk) before any work starts.
//! Unknown keys are rejected so typos fail loudly.

use crate::dataspace::{ResplitTargets, SynthConfig};
use crate::encoders::ModelDims;
use crate::error::{Error, Result};
use crate::training::TrainConfig;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Every key any subcommand understands. One global registry keeps the
/// reject-unknown-keys rule simple and the echoed configs uniform.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "variant",
    "dims.word_dim",
    "dims.relation_dim",
    "dims.hidden",
    "dims.disc_hidden",
    "train.learning_rate",
    "train.batch_size",
    "train.negatives",
    "train.margin",
    "train.clip",
    "train.dropout",
    "train.lambda_adapter",
    "train.lambda_recon",
    "train.n_critic",
    "train.epochs",
    "train.patience",
    "gen.relations",
    "gen.seen_fraction",
    "gen.entities",
    "gen.samples",
    "gen.dim",
    "resplit.tolerance",
    "resplit.unseen_fraction",
    "resplit.train",
    "resplit.dev_seen",
    "resplit.dev_unseen",
    "resplit.test_seen",
    "resplit.test_unseen",
    "paths.corpus",
    "paths.split",
    "paths.checkpoint",
    "paths.baseline_checkpoint",
    "ablate.counts",
    "pca.source",
    "crossval.folds",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new() -> RunConfig {
        RunConfig::default()
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected KEY=VALUE, got {:?}", line),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key {:?}", key)));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{}: expected integer, got {:?}", key, v))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.get_u64(key, default as u64)? as usize)
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{}: expected number, got {:?}", key, v))),
        }
    }

    pub fn get_path(&self, key: &str) -> Result<PathBuf> {
        self.get(key)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("required config key {} not set", key)))
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("required config key {} not set", key)))?;
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{}: bad list entry {:?}", key, p)))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_u64("seed", 1)
    }

    pub fn dims(&self) -> Result<ModelDims> {
        let d = ModelDims::default();
        Ok(ModelDims {
            word_dim: self.get_usize("dims.word_dim", d.word_dim)?,
            relation_dim: self.get_usize("dims.relation_dim", d.relation_dim)?,
            hidden: self.get_usize("dims.hidden", d.hidden)?,
            disc_hidden: self.get_usize("dims.disc_hidden", d.disc_hidden)?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        Ok(TrainConfig {
            learning_rate: self.get_f64("train.learning_rate", d.learning_rate)?,
            batch_size: self.get_usize("train.batch_size", d.batch_size)?,
            negatives: self.get_usize("train.negatives", d.negatives)?,
            margin: self.get_f64("train.margin", d.margin)?,
            clip: self.get_f64("train.clip", d.clip)?,
            dropout: self.get_f64("train.dropout", d.dropout)?,
            lambda_adapter: self.get_f64("train.lambda_adapter", d.lambda_adapter)?,
            lambda_recon: self.get_f64("train.lambda_recon", d.lambda_recon)?,
            n_critic: self.get_usize("train.n_critic", d.n_critic)?,
            epochs: self.get_usize("train.epochs", d.epochs)?,
            patience: self.get_usize("train.patience", d.patience)?,
            seed: self.seed()?,
        })
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let d = SynthConfig::default();
        Ok(SynthConfig {
            relations: self.get_usize("gen.relations", d.relations)?,
            seen_fraction: self.get_f64("gen.seen_fraction", d.seen_fraction)?,
            entities: self.get_usize("gen.entities", d.entities)?,
            samples: self.get_usize("gen.samples", d.samples)?,
            dim: self.get_usize("gen.dim", d.dim)?,
        })
    }

    /// Resplit targets: explicit keys win; otherwise derived from the
    /// generator's seen fraction so the two stay consistent.
    pub fn resplit_targets(&self) -> Result<ResplitTargets> {
        let d = self.synth_config()?.resplit_targets();
        Ok(ResplitTargets {
            train: self.get_f64("resplit.train", d.train)?,
            dev_seen: self.get_f64("resplit.dev_seen", d.dev_seen)?,
            dev_unseen: self.get_f64("resplit.dev_unseen", d.dev_unseen)?,
            test_seen: self.get_f64("resplit.test_seen", d.test_seen)?,
            test_unseen: self.get_f64("resplit.test_unseen", d.test_unseen)?,
            unseen_relation_fraction: self
                .get_f64("resplit.unseen_fraction", d.unseen_relation_fraction)?,
        })
    }

    pub fn resplit_tolerance(&self) -> Result<f64> {
        self.get_f64("resplit.tolerance", 0.08)
    }

    /// Canonical rendering: sorted KEY=VALUE lines, used both for the
    /// provenance echo and the content hash.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{}={}", k, v);
        }
        out
    }

    /// FNV-1a over the canonical rendering, as an 8-hex-digit tag.
    pub fn content_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.render().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{:08x}", h as u32 ^ (h >> 32) as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn parse_and_override() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nseed=7\ntrain.epochs=3\n\ngen.relations=20\n").unwrap();
        let mut c = RunConfig::load(&path).unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        assert_eq!(c.train_config().unwrap().epochs, 3);
        assert_eq!(c.synth_config().unwrap().relations, 20);
        // CLI-style override wins
        c.set("seed", "9").unwrap();
        assert_eq!(c.seed().unwrap(), 9);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::new();
        assert!(c.set("trian.epochs", "3").is_err());
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "no_such_key=1\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "seed=1\njust a line\n").unwrap();
        match RunConfig::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn hash_tracks_content() {
        let mut a = RunConfig::new();
        a.set("seed", "1").unwrap();
        let mut b = RunConfig::new();
        b.set("seed", "1").unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        b.set("seed", "2").unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 8);
    }

    #[test]
    fn defaults_flow_through() {
        let c = RunConfig::new();
        assert_eq!(c.train_config().unwrap().batch_size, 256);
        assert_eq!(c.dims().unwrap().hidden, 256);
        let t = c.resplit_targets().unwrap();
        assert!((t.unseen_relation_fraction - 0.4).abs() < 1e-12);
    }
}
