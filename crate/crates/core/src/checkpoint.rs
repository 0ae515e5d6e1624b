//! Checkpoint serialization. JSON container holding every tensor with its
//! name and shape plus the training configuration; f64 values round-trip
//! exactly, so reload → re-evaluate is bit-identical.

use crate::error::{Error, Result};
use crate::training::TrainedModel;
use std::path::Path;

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string(model)
        .map_err(|e| Error::Format(format!("checkpoint encode: {}", e)))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("checkpoint decode {}: {}", path.display(), e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{balanced_resplit, generate_synthetic_corpus, SynthConfig};
    use crate::encoders::ModelDims;
    use crate::training::{train_variant, ModelVariant, TrainConfig};
    use tempfile::tempdir;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let config = SynthConfig {
            relations: 8,
            seen_fraction: 0.6,
            entities: 16,
            samples: 100,
            dim: 8,
        };
        let corpus = generate_synthetic_corpus(&config, 2).unwrap();
        let split = balanced_resplit(&corpus.samples, 2, &config.resplit_targets(), 0.25).unwrap();
        let dims = ModelDims {
            word_dim: 8,
            relation_dim: 8,
            hidden: 4,
            disc_hidden: 8,
        };
        let tc = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            negatives: 4,
            epochs: 1,
            seed: 2,
            ..Default::default()
        };
        let model = train_variant(
            &split,
            &corpus.kg,
            &corpus.embeddings,
            ModelVariant::BasicAdapter,
            &dims,
            &tc,
            None,
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        // exact tensor round-trip
        for (name, t) in model.params.iter() {
            assert_eq!(loaded.params.get(name).unwrap(), t, "param {}", name);
        }
        assert_eq!(loaded.variant, model.variant);
        assert_eq!(loaded.relation_vec(0).unwrap(), model.relation_vec(0).unwrap());
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        let err = load_model(Path::new("/nonexistent/model.json")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }
}
