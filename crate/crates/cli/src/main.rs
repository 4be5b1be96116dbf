use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;
use viml::eval::{
    embed_corpus, evaluate, evaluate_ensemble, PoolSpec, QueryMode, RetrievalReport, CLIP_POOL_SIZE,
};
use viml::features::{generate_synthetic, read_store, FeatureStore, Modality, SyntheticSpec};
use viml::model::{load_checkpoint, save_checkpoint, TriModalExample, ViML};
use viml::tagtext::{
    read_jsonl, synthesize_texts, write_jsonl, AnalogyExample, ExampleRecord, HttpLlmClient,
    LlmClient, LlmConfig, Method, MockLlm, RuleRephraser, SynthesisContext, TemplateBank,
    TextRecord, DEFAULT_FEW_SHOT_K, DEFAULT_TAG_THRESHOLD,
};
use viml::train::{
    load_corpus, preset, train_with, NamedConfig, TextSource, TrainConfig, TrainOptions, PRESETS,
};
use viml_service::{Engine, ServiceState};

const TEXTS_FILE: &str = "texts.jsonl";
const TRAIN_LOG_FILE: &str = "train_log.json";

#[derive(Parser)]
#[command(
    name = "viml",
    version,
    about = "Language-guided music retrieval for video"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a latent-factor synthetic feature store and its tag/text file.
    GenSynthetic(GenSynthetic),
    /// Write a text description for every track of a tags file.
    SynthText(SynthText),
    /// Train a model (or every run of a preset) on a feature store.
    Train(Train),
    /// Pool-based retrieval evaluation of a checkpoint.
    Eval(Eval),
    /// Serve retrieval over HTTP.
    Serve(Serve),
    /// List presets, or print the configurations of one.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct GenSynthetic {
    #[arg(long, default_value_t = 500)]
    num_tracks: usize,
    #[arg(long, default_value_t = 16)]
    latent_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    segments: Option<usize>,
    /// Store directory; the tag/text records go to `texts.jsonl` inside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmChoice {
    /// Deterministic offline stand-in.
    Mock,
    /// Completion endpoint configured through `VIML_LLM_*` variables.
    Http,
}

#[derive(Args)]
struct SynthText {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// JSON lines of `{track_id, tags, text}`.
    #[arg(long)]
    tags_file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAG_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_FEW_SHOT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON lines of `{tags, description}` few-shot examples (prompt2text).
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LlmChoice::Mock)]
    llm: LlmChoice,
    #[arg(long, default_value_t = 128)]
    max_tokens: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    /// TOML training configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Train every run of a preset, each into its own subdirectory.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    store: PathBuf,
    /// Track texts; defaults to `texts.jsonl` in the store.
    #[arg(long)]
    texts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    texts: Option<PathBuf>,
    /// `human` uses the store's text features; the synthesised sources
    /// encode the texts file.
    #[arg(long, default_value = "tags", value_parser = parse_text_source)]
    text_source: TextSource,
    #[arg(long, default_value_t = CLIP_POOL_SIZE)]
    pool_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `video_plus_text`, or `text_only` for a music+text model.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<QueryMode>,
    /// Second checkpoint to ensemble with, weighted by `alpha`.
    #[arg(long, requires = "alpha")]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct Serve {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    texts: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: viml::Error| e.to_string())
}

fn parse_text_source(s: &str) -> Result<TextSource, String> {
    s.parse().map_err(|e: viml::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<QueryMode, String> {
    s.parse().map_err(|e: viml::Error| e.to_string())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::SynthText(args) => synth_text(args),
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Serve(args) => serve(args),
        Command::Preset { name } => show_preset(name.as_deref()),
    }
}

fn gen_synthetic(args: GenSynthetic) -> Result<()> {
    let mut spec = SyntheticSpec::new(args.num_tracks, args.latent_dim, args.noise, args.seed);
    if let Some(n) = args.segments {
        spec.segments_per_track = n;
    }
    let data = generate_synthetic(&spec)?;
    let store = data.write(&args.out)?;
    write_jsonl(&args.out.join(TEXTS_FILE), &data.records())?;
    println!(
        "wrote {} tracks to {} (video {}-d, music {}-d, text {}-d)",
        store.len() / 3,
        args.out.display(),
        spec.video_dim,
        spec.music_dim,
        spec.text_dim
    );
    Ok(())
}

fn synth_text(args: SynthText) -> Result<()> {
    let records: Vec<TextRecord> = read_jsonl(&args.tags_file)?;
    let examples: Vec<AnalogyExample> = match &args.examples {
        Some(path) => read_jsonl::<ExampleRecord>(path)?
            .into_iter()
            .map(AnalogyExample::try_from)
            .collect::<viml::Result<_>>()?,
        None => Vec::new(),
    };
    if args.method == Method::Prompt2text && examples.is_empty() {
        bail!("prompt2text needs --examples");
    }
    let llm: Box<dyn LlmClient> = match args.llm {
        LlmChoice::Mock => Box::new(MockLlm::describe()),
        LlmChoice::Http => Box::new(HttpLlmClient::new(LlmConfig::from_env()?)?),
    };
    let bank = TemplateBank::default();
    let ctx = SynthesisContext {
        threshold: args.threshold,
        seed: args.seed,
        bank: &bank,
        rephraser: &RuleRephraser,
        examples: &examples,
        k: args.k,
        llm: Some(llm.as_ref()),
        max_tokens: args.max_tokens,
    };
    let out = synthesize_texts(&records, args.method, &ctx)?;
    let empty = out.iter().filter(|r| r.text.is_empty()).count();
    write_jsonl(&args.out, &out)?;
    println!(
        "wrote {} {} texts to {} ({empty} without tags above {})",
        out.len(),
        args.method,
        args.out.display(),
        args.threshold
    );
    Ok(())
}

fn texts_path(store: &Path, texts: Option<&PathBuf>) -> PathBuf {
    texts.cloned().unwrap_or_else(|| store.join(TEXTS_FILE))
}

fn read_records(store: &Path, texts: Option<&PathBuf>) -> Result<Vec<TextRecord>> {
    let path = texts_path(store, texts);
    read_jsonl(&path).with_context(|| format!("reading {}", path.display()))
}

/// Base feature widths always follow the store.
fn match_store(config: &mut TrainConfig, store: &FeatureStore) {
    let dims = &mut config.model.base_dims;
    for (modality, slot) in [
        (Modality::Video, &mut dims.video),
        (Modality::Music, &mut dims.music),
        (Modality::Text, &mut dims.text),
    ] {
        if let Some(d) = store.dim(modality) {
            if *slot != d {
                tracing::info!(
                    "{modality} base dimension {} -> {d} to match the store",
                    *slot
                );
                *slot = d;
            }
        }
    }
}

fn train(args: Train) -> Result<()> {
    let mut runs: Vec<NamedConfig> = match (&args.config, &args.preset) {
        (Some(path), None) => vec![NamedConfig {
            name: String::new(),
            config: TrainConfig::load(path)?,
        }],
        (None, Some(name)) => preset(name)?,
        (None, None) => vec![NamedConfig {
            name: String::new(),
            config: TrainConfig::default(),
        }],
        (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
    };
    let store = read_store(&args.store)?;
    let records = read_records(&args.store, args.texts.as_ref())?;
    for run in &mut runs {
        let config = &mut run.config;
        if let Some(e) = args.epochs {
            config.epochs = e;
        }
        if let Some(s) = args.seed {
            config.seed = s;
        }
        match_store(config, &store);
        let out = if run.name.is_empty() {
            args.out.clone()
        } else {
            args.out.join(&run.name)
        };
        let corpus = load_corpus(&store, &records, config.text_source, config.model.use_video)?;
        tracing::info!(
            "training {} on {} examples for {} epochs",
            if run.name.is_empty() {
                "model"
            } else {
                &run.name
            },
            corpus.len(),
            config.epochs
        );
        let (model, log) = train_with(config, &corpus, &TrainOptions::default())?;
        save_checkpoint(&model, &out)?;
        config.save(&out.join("train_config.toml"))?;
        log.write_json(&out.join(TRAIN_LOG_FILE))?;
        let last = log.epochs.last();
        println!(
            "{}: loss {:.4} -> {:.4}{}; checkpoint {}",
            if run.name.is_empty() {
                "model"
            } else {
                &run.name
            },
            log.initial_loss().unwrap_or(f64::NAN),
            log.final_loss().unwrap_or(f64::NAN),
            last.map(|e| format!(", R@10 {:.1} on a pool of {}", e.recall_at_10, e.pool_size))
                .unwrap_or_default(),
            out.display()
        );
    }
    Ok(())
}

fn default_mode(model: &ViML<f32>) -> QueryMode {
    if model.config().use_video {
        QueryMode::VideoPlusText
    } else {
        QueryMode::TextOnly
    }
}

fn corpus_for(
    model: &ViML<f32>,
    store: &FeatureStore,
    records: &[TextRecord],
    source: TextSource,
) -> Result<Vec<TriModalExample<f32>>> {
    Ok(load_corpus(
        store,
        records,
        source,
        model.config().use_video,
    )?)
}

fn eval(args: Eval) -> Result<()> {
    let model = load_checkpoint(&args.ckpt)?;
    let store = read_store(&args.store)?;
    let records = read_records(&args.store, args.texts.as_ref())?;
    let spec = PoolSpec::new(args.pool_size, args.seed);
    let mode = args.mode.unwrap_or_else(|| default_mode(&model));
    let corpus = corpus_for(&model, &store, &records, args.text_source)?;
    let report: RetrievalReport = match (&args.ensemble, args.alpha) {
        (Some(path), Some(alpha)) => {
            let other = load_checkpoint(path)?;
            let other_corpus = corpus_for(&other, &store, &records, args.text_source)?;
            let (q1, m1) = embed_corpus(&model, &corpus, mode)?;
            let (q2, m2) = embed_corpus(&other, &other_corpus, default_mode(&other))?;
            evaluate_ensemble((q1.view(), m1.view()), (q2.view(), m2.view()), alpha, &spec)?
        }
        _ => evaluate(&model, &corpus, &spec, mode)?,
    };
    println!("{report}");
    if let Some(path) = &args.report {
        report.write_json(path)?;
    }
    Ok(())
}

fn serve(args: Serve) -> Result<()> {
    let texts = texts_path(&args.store, args.texts.as_ref());
    let engine = Engine::load(
        &args.ckpt,
        &args.store,
        texts.exists().then_some(texts.as_path()),
    )?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", args.host, args.port))?;
    tracing::info!(
        "{} tracks, {} videos, checkpoint {}",
        engine.index().len(),
        engine.video_ids().count(),
        &engine.index().fingerprint()[..12]
    );
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(viml_service::serve(ServiceState::new(engine), addr))?;
    Ok(())
}

fn show_preset(name: Option<&str>) -> Result<()> {
    match name {
        None => {
            for p in PRESETS {
                let runs = preset(p)?;
                let names: Vec<_> = runs.iter().map(|r| r.name.as_str()).collect();
                println!("{p}: {}", names.join(", "));
            }
        }
        Some(name) => {
            for run in preset(name)? {
                println!("# {}\n{}", run.name, run.config.to_toml()?);
            }
        }
    }
    Ok(())
}
