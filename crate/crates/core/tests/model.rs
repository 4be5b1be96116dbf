use approx::assert_abs_diff_eq;
use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viml::features::Modality;
use viml::model::{
    load_checkpoint, save_checkpoint, ForwardMode, FusionVariant, ModelConfig, Parameterized,
    Pooling, TriModalExample, ViML,
};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

fn batch(config: &ModelConfig, size: usize, seed: u64) -> Vec<TriModalExample<f32>> {
    (0..size as u64)
        .map(|i| TriModalExample {
            track_id: format!("t{i}"),
            video: Some(gaussian(3, config.base_dims.video, seed * 1000 + 3 * i)),
            music: gaussian(3, config.base_dims.music, seed * 1000 + 3 * i + 1),
            text: Some(
                gaussian(1, config.base_dims.text, seed * 1000 + 3 * i + 2)
                    .row(0)
                    .to_owned(),
            ),
        })
        .collect()
}

#[test]
fn projection_matches_triple_loop() {
    let config = ModelConfig::tiny();
    let model = ViML::<f32>::new(config.clone(), 1).unwrap();
    let x = gaussian(4, config.base_dims.music, 9);
    let got = model.project(Modality::Music, x.view()).unwrap();
    let w = &model.music.projection.weight.value;
    let b = &model.music.projection.bias.value;
    for i in 0..x.nrows() {
        for j in 0..w.ncols() {
            let mut acc = b[[0, j]] as f64;
            for k in 0..x.ncols() {
                acc += x[[i, k]] as f64 * w[[k, j]] as f64;
            }
            assert_abs_diff_eq!(got[[i, j]] as f64, acc, epsilon = 1e-5);
        }
    }
}

#[test]
fn projection_rejects_wrong_width() {
    let model = ViML::<f32>::new(ModelConfig::tiny(), 1).unwrap();
    assert!(model
        .project(Modality::Music, gaussian(2, 7, 0).view())
        .is_err());
    assert!(model
        .project(Modality::Music, Array2::zeros((0, 5)).view())
        .is_err());
}

#[test]
fn single_token_pooling_modes_agree() {
    let mean = ViML::<f32>::new(ModelConfig::tiny(), 4).unwrap();
    let first = ViML::<f32>::new(
        ModelConfig {
            pooling: Pooling::FirstToken,
            ..ModelConfig::tiny()
        },
        4,
    )
    .unwrap();
    let x = gaussian(1, 8, 2);
    assert_eq!(
        mean.encode(Modality::Video, x.view()).unwrap(),
        first.encode(Modality::Video, x.view()).unwrap()
    );
}

#[test]
fn mean_pooling_without_positions_is_permutation_invariant() {
    let config = ModelConfig {
        positional_embeddings: false,
        ..ModelConfig::tiny()
    };
    let model = ViML::<f32>::new(config, 5).unwrap();
    let x = gaussian(4, 8, 3);
    let mut permuted = x.clone();
    for (dst, src) in [3, 0, 2, 1].into_iter().enumerate() {
        permuted.row_mut(dst).assign(&x.row(src));
    }
    let a = model.encode(Modality::Music, x.view()).unwrap();
    let b = model.encode(Modality::Music, permuted.view()).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert_abs_diff_eq!(*u, *v, epsilon = 1e-5);
    }
}

#[test]
fn positions_make_encoding_order_sensitive() {
    let model = ViML::<f32>::new(ModelConfig::tiny(), 5).unwrap();
    let x = gaussian(3, 8, 3);
    let reversed = x.slice(s![..;-1, ..]).to_owned();
    let a = model.encode(Modality::Music, x.view()).unwrap();
    let b = model.encode(Modality::Music, reversed.view()).unwrap();
    assert!(a.iter().zip(&b).any(|(u, v)| (u - v).abs() > 1e-6));
}

#[test]
fn sequences_longer_than_position_table_are_rejected() {
    let model = ViML::<f32>::new(ModelConfig::tiny(), 5).unwrap();
    assert!(model
        .encode(Modality::Music, gaussian(5, 8, 0).view())
        .is_err());
}

#[test]
fn addition_fusion_with_zero_text_is_identity() {
    let config = ModelConfig {
        fusion_variant: FusionVariant::Addition,
        ..ModelConfig::tiny()
    };
    let model = ViML::<f32>::new(config, 0).unwrap();
    let y = gaussian(1, 8, 1).row(0).to_owned();
    assert_eq!(model.fuse(&y, &Array1::zeros(8)).unwrap(), y);
}

#[test]
fn fusion_parameter_counts_at_default_width() {
    let count = |v| {
        ViML::<f32>::new(
            ModelConfig {
                fusion_variant: v,
                ..ModelConfig::default()
            },
            0,
        )
        .unwrap()
        .fusion_parameters()
    };
    assert_eq!(count(FusionVariant::Addition), 0);
    assert_eq!(count(FusionVariant::Linear), 131_328);
    // 512 -> 512 -> 256
    assert_eq!(count(FusionVariant::Mlp), 512 * 512 + 512 + 512 * 256 + 256);
    // positions + one block + final norm
    let block = 4 * (256 * 256 + 256) + 2 * 512 + 256 * 1024 + 1024 + 1024 * 256 + 256;
    assert_eq!(count(FusionVariant::Transformer1), 2 * 256 + block + 512);
    assert_eq!(
        count(FusionVariant::Transformer2),
        2 * 256 + 2 * block + 512
    );
}

#[test]
fn eval_without_text_ignores_text() {
    let config = ModelConfig::tiny();
    let model = ViML::<f32>::new(config.clone(), 2).unwrap();
    let with = batch(&config, 4, 1);
    let mut without = with.clone();
    for ex in &mut without {
        ex.text = None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = model
        .forward(&with, ForwardMode::EvalNoText, &mut rng)
        .unwrap();
    let b = model
        .forward(&without, ForwardMode::EvalWithText, &mut rng)
        .unwrap();
    assert_eq!(a.queries, b.queries);
    assert_eq!(a.music, b.music);
}

#[test]
fn training_forward_without_dropout_equals_eval_with_text() {
    let config = ModelConfig {
        text_dropout_p: 0.0,
        ..ModelConfig::tiny()
    };
    let model = ViML::<f32>::new(config.clone(), 2).unwrap();
    let b = batch(&config, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train = model.forward(&b, ForwardMode::Train, &mut rng).unwrap();
    let eval = model
        .forward(&b, ForwardMode::EvalWithText, &mut rng)
        .unwrap();
    assert_eq!(train.queries, eval.queries);
    assert!(train.dropped.iter().all(|d| !d));
}

#[test]
fn full_dropout_equals_eval_without_text() {
    let config = ModelConfig {
        text_dropout_p: 1.0,
        ..ModelConfig::tiny()
    };
    let model = ViML::<f32>::new(config.clone(), 2).unwrap();
    let b = batch(&config, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train = model.forward(&b, ForwardMode::Train, &mut rng).unwrap();
    let eval = model
        .forward(&b, ForwardMode::EvalNoText, &mut rng)
        .unwrap();
    assert_eq!(train.queries, eval.queries);
    assert!(train.dropped.iter().all(|&d| d));
}

#[test]
fn music_text_model_queries_with_text_branch() {
    let config = ModelConfig {
        use_video: false,
        ..ModelConfig::tiny()
    };
    let model = ViML::<f32>::new(config.clone(), 6).unwrap();
    assert!(model.video.is_none() && model.fusion.is_none());
    let t = gaussian(1, config.base_dims.text, 4);
    let q = model.query_embedding(None, Some(t.row(0))).unwrap();
    assert_eq!(q, model.embed(Modality::Text, t.view()).unwrap());
    assert!(model
        .embed(Modality::Video, gaussian(2, 6, 0).view())
        .is_err());
}

#[test]
fn missing_text_uses_null_feature() {
    let model = ViML::<f32>::new(ModelConfig::tiny(), 6).unwrap();
    let v = gaussian(2, 6, 1);
    let null = model.null_text().clone();
    assert_eq!(
        model.query_embedding(Some(v.view()), None).unwrap(),
        model
            .query_embedding(Some(v.view()), Some(null.view()))
            .unwrap()
    );
}

#[test]
fn empty_string_null_feature_is_kept() {
    let config = ModelConfig::tiny();
    let empty = Array1::from(vec![0.5f32; config.base_dims.text]);
    let model = ViML::with_empty_string_null(config.clone(), 0, empty.clone()).unwrap();
    assert_eq!(model.null_text(), &empty);
    assert!(ViML::with_empty_string_null(config, 0, Array1::<f32>::zeros(3)).is_err());
}

#[test]
fn initialisation_is_seeded() {
    let a = ViML::<f32>::new(ModelConfig::tiny(), 11).unwrap();
    let b = ViML::<f32>::new(ModelConfig::tiny(), 11).unwrap();
    let c = ViML::<f32>::new(ModelConfig::tiny(), 12).unwrap();
    let values = |m: &ViML<f32>| {
        let mut v = Vec::new();
        m.visit("", &mut |_, p| v.extend(p.value.iter().copied()));
        v
    };
    assert_eq!(values(&a), values(&b));
    assert_ne!(values(&a), values(&c));
}

#[test]
fn parameter_names_are_unique() {
    let model = ViML::<f32>::new(ModelConfig::default(), 0).unwrap();
    let mut names = Vec::new();
    model.visit("", &mut |n, _| names.push(n.to_string()));
    let total = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), total);
    assert!(names.contains(&"fusion.encoder.blocks.1.attn.query.weight".to_string()));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig {
        fusion_variant: FusionVariant::Mlp,
        ..ModelConfig::tiny()
    };
    let model =
        ViML::with_empty_string_null(config.clone(), 8, Array1::from(vec![0.25f32; 4])).unwrap();
    save_checkpoint(&model, dir.path()).unwrap();
    let loaded = load_checkpoint(dir.path()).unwrap();
    assert_eq!(loaded.config(), model.config());
    assert_eq!(loaded.null_text(), model.null_text());
    let b = batch(&config, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        model
            .forward(&b, ForwardMode::EvalWithText, &mut rng)
            .unwrap(),
        loaded
            .forward(&b, ForwardMode::EvalWithText, &mut rng)
            .unwrap()
    );
}

#[test]
fn checkpoint_with_mismatched_shape_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = ViML::<f32>::new(ModelConfig::tiny(), 8).unwrap();
    save_checkpoint(&model, dir.path()).unwrap();
    let other = ViML::<f32>::new(
        ModelConfig {
            ff_dim: 12,
            ..ModelConfig::tiny()
        },
        8,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("config.json"),
        serde_json::to_string(other.config()).unwrap(),
    )
    .unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

#[test]
fn checkpoint_missing_tensor_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = ViML::<f32>::new(ModelConfig::tiny(), 8).unwrap();
    save_checkpoint(&model, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("music.projection.weight.bin")).unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

#[test]
fn cast_to_f64_preserves_outputs() {
    let config = ModelConfig::tiny();
    let model = ViML::<f32>::new(config.clone(), 3).unwrap();
    let wide = model.cast::<f64>();
    let b = batch(&config, 3, 5);
    let wide_b: Vec<_> = b.iter().map(|e| e.cast::<f64>()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let narrow = model
        .forward(&b, ForwardMode::EvalWithText, &mut rng)
        .unwrap();
    let broad = wide
        .forward(&wide_b, ForwardMode::EvalWithText, &mut rng)
        .unwrap();
    for (u, v) in narrow.queries.iter().zip(&broad.queries) {
        assert_abs_diff_eq!(*u as f64, *v, epsilon = 1e-4);
    }
}

#[test]
fn accumulate_gradients_reports_loss() {
    let config = ModelConfig::tiny();
    let mut model = ViML::<f32>::new(config.clone(), 3).unwrap();
    let b = batch(&config, 4, 5);
    let expected = model
        .batch_loss(
            &b,
            ForwardMode::EvalWithText,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
    let stats = model
        .accumulate_gradients(
            &b,
            ForwardMode::EvalWithText,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
    assert_abs_diff_eq!(stats.loss, expected as f64, epsilon = 1e-5);
    assert_eq!(stats.batch_size, 4);
    let mut nonzero = false;
    model.visit("", &mut |_, p| nonzero |= p.grad.iter().any(|g| *g != 0.0));
    assert!(nonzero);
    assert!(model
        .accumulate_gradients(&[], ForwardMode::Train, &mut ChaCha8Rng::seed_from_u64(0))
        .is_err());
}
