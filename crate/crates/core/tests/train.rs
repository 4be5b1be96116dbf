use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viml::features::{generate_synthetic, FeatureStore, SyntheticDataset, SyntheticSpec};
use viml::model::{ForwardMode, ModelConfig, Parameterized, TriModalExample, ViML};
use viml::train::{load_corpus, train, train_with, TextSource, TrainConfig, TrainOptions};
use viml::Error;

fn small_spec(tracks: usize, noise: f64) -> SyntheticSpec {
    SyntheticSpec {
        video_dim: 24,
        music_dim: 20,
        text_dim: 16,
        ..SyntheticSpec::new(tracks, 6, noise, 3)
    }
}

fn small_model(spec: &SyntheticSpec) -> ModelConfig {
    let mut m = ModelConfig::tiny();
    m.embed_dim = 16;
    m.ff_dim = 32;
    m.heads = 2;
    m.base_dims.video = spec.video_dim;
    m.base_dims.music = spec.music_dim;
    m.base_dims.text = spec.text_dim;
    m
}

fn dataset(tracks: usize, noise: f64) -> (tempfile::TempDir, SyntheticDataset, FeatureStore) {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(&small_spec(tracks, noise)).unwrap();
    let store = data.write(dir.path()).unwrap();
    (dir, data, store)
}

fn values(m: &ViML<f32>) -> Vec<f32> {
    let mut v = Vec::new();
    m.visit("", &mut |_, p| v.extend(p.value.iter().copied()));
    v
}

#[test]
fn zero_epochs_returns_initialisation() {
    let (_dir, data, store) = dataset(20, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let config = TrainConfig {
        model: small_model(&data.spec),
        epochs: 0,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, log) = train(&config, &corpus).unwrap();
    assert!(log.steps.is_empty());
    assert_eq!(values(&model), values(&ViML::new(config.model, 5).unwrap()));
}

#[test]
fn loss_decreases_on_noise_free_data() {
    let (_dir, data, store) = dataset(64, 0.0);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let config = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 16,
        epochs: 50,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let (_, log) = train(&config, &corpus).unwrap();
    assert_eq!(log.steps.len(), 200);
    let first = log.initial_loss().unwrap();
    let last = log.final_loss().unwrap();
    assert!(last < first, "{first} -> {last}");
    assert!(log.steps.iter().all(|s| s.loss.is_finite()));
}

#[test]
fn training_is_deterministic() {
    let (_dir, data, store) = dataset(40, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let config = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 8,
        epochs: 3,
        ..TrainConfig::default()
    };
    let (a, la) = train(&config, &corpus).unwrap();
    let (b, lb) = train(&config, &corpus).unwrap();
    assert_eq!(values(&a), values(&b));
    assert_eq!(la, lb);
    let (c, _) = train(&TrainConfig { seed: 1, ..config }, &corpus).unwrap();
    assert_ne!(values(&a), values(&c));
}

#[test]
fn observed_dropout_lies_in_binomial_interval() {
    let (_dir, data, store) = dataset(400, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let config = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 50,
        epochs: 3,
        ..TrainConfig::default()
    };
    let opts = TrainOptions {
        snapshot_examples: 0,
        ..TrainOptions::default()
    };
    let (_, log) = train_with(&config, &corpus, &opts).unwrap();
    let p = config.model.text_dropout_p;
    let half_width = 2.576 * (p * (1.0 - p) / 400.0).sqrt();
    for e in &log.epochs {
        assert!((e.dropout_fraction - p).abs() <= half_width, "{e:?}");
    }
}

#[test]
fn nan_features_abort_with_divergence() {
    let config = ModelConfig::tiny();
    let corpus: Vec<_> = (0..4)
        .map(|i| TriModalExample {
            track_id: format!("t{i}"),
            video: Some(Array2::from_elem((2, 6), f32::NAN)),
            music: Array2::ones((2, 5)),
            text: None,
        })
        .collect();
    let err = train(
        &TrainConfig {
            model: config,
            batch_size: 2,
            epochs: 1,
            ..TrainConfig::default()
        },
        &corpus,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Divergence { step: 0, .. }), "{err}");
    assert!(err.to_string().contains("divergence"));
}

#[test]
fn invalid_configs_are_rejected() {
    let (_dir, data, store) = dataset(10, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let bad = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 1,
        ..TrainConfig::default()
    };
    assert!(train(&bad, &corpus).is_err());
    assert!(train(
        &TrainConfig {
            batch_size: 2,
            ..bad
        },
        &corpus[..1]
    )
    .is_err());
}

#[test]
fn step_zero_loss_is_near_uniform_at_unit_temperature() {
    let (_dir, data, store) = dataset(64, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let mut model_config = small_model(&data.spec);
    model_config.tau = 1.0;
    let model = ViML::<f32>::new(model_config, 0).unwrap();
    let loss = model
        .batch_loss(
            &corpus,
            ForwardMode::Train,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap() as f64;
    let uniform = 2.0 * (corpus.len() as f64).ln();
    assert!((loss / uniform - 1.0).abs() < 0.2, "{loss} vs {uniform}");
}

#[test]
fn text_source_none_ignores_texts() {
    let (_dir, data, store) = dataset(30, 0.1);
    let records = data.records();
    let with_text = load_corpus(&store, &records, TextSource::Tags, true).unwrap();
    let without = load_corpus(&store, &records, TextSource::None, true).unwrap();
    assert!(without.iter().all(|e| e.text.is_none()));
    let config = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 10,
        epochs: 2,
        text_source: TextSource::None,
        ..TrainConfig::default()
    };
    let (a, _) = train(&config, &with_text).unwrap();
    let (b, _) = train(&config, &without).unwrap();
    assert_eq!(values(&a), values(&b));
}

#[test]
fn corpus_sources() {
    let (_dir, data, store) = dataset(12, 0.1);
    let records = data.records();
    let human = load_corpus(&store, &records, TextSource::Human, true).unwrap();
    for (i, ex) in human.iter().enumerate() {
        let stored = data
            .sequence(i, viml::features::Modality::Text)
            .features()
            .row(0)
            .to_owned();
        assert_eq!(ex.text.as_ref().unwrap(), &stored);
    }
    let tags = load_corpus(&store, &records, TextSource::Tags, true).unwrap();
    for (ex, r) in tags.iter().zip(&records) {
        assert_eq!(ex.text.is_some(), !r.text.is_empty());
        assert_eq!(ex.video.as_ref().unwrap().ncols(), 24);
    }
    let music_only = load_corpus(&store, &records, TextSource::Tags, false).unwrap();
    assert!(music_only.iter().all(|e| e.video.is_none()));
}

#[test]
fn corpus_errors() {
    let (_dir, data, store) = dataset(5, 0.1);
    let mut records = data.records();
    records.push(records[0].clone());
    assert!(load_corpus(&store, &records, TextSource::Tags, true).is_err());
    records.pop();
    records[1].track_id = "unknown".into();
    assert!(matches!(
        load_corpus(&store, &records, TextSource::Tags, true),
        Err(Error::MissingModality(_))
    ));
    assert!(load_corpus(&store, &[], TextSource::Tags, true).is_err());
}

#[test]
fn periodic_checkpoints_are_written() {
    let (dir, data, store) = dataset(12, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let out = dir.path().join("ckpt");
    let config = TrainConfig {
        model: small_model(&data.spec),
        batch_size: 4,
        epochs: 4,
        checkpoint_every: 2,
        ..TrainConfig::default()
    };
    let opts = TrainOptions {
        checkpoint_dir: Some(out.clone()),
        ..TrainOptions::default()
    };
    let (model, log) = train_with(&config, &corpus, &opts).unwrap();
    assert!(out.join("epoch-2").join("config.json").exists());
    assert!(!out.join("epoch-3").exists());
    let last = viml::model::load_checkpoint(&out.join("epoch-4")).unwrap();
    assert_eq!(values(&last), values(&model));
    assert_eq!(log.epochs.len(), 4);
    assert!(log.epochs.iter().all(|e| e.pool_size == 12));
}

#[test]
fn empty_string_null_requires_a_feature() {
    let (_dir, data, store) = dataset(8, 0.1);
    let corpus = load_corpus(&store, &data.records(), TextSource::Tags, true).unwrap();
    let mut model = small_model(&data.spec);
    model.null_text = viml::model::NullTextSource::EmptyStringEmbedding;
    let config = TrainConfig {
        model,
        batch_size: 4,
        epochs: 1,
        ..TrainConfig::default()
    };
    assert!(train(&config, &corpus).is_err());
    let opts = TrainOptions {
        empty_text: Some(ndarray::Array1::from_elem(16, 0.1)),
        ..TrainOptions::default()
    };
    let (m, _) = train_with(&config, &corpus, &opts).unwrap();
    assert_eq!(m.null_text()[0], 0.1);
}
