use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, NullTextSource};
use super::dropout::text_dropout;
use super::encoder::{Encoder, EncoderCache, EncoderSpec};
use super::fusion::{Fusion, FusionCache};
use super::layers::Linear;
use super::loss::symmetric_loss_with_grad;
use super::{join, Param, Parameterized, Real};
use crate::error::{Error, Result};
use crate::features::Modality;

/// Projection followed by a Transformer encoder for one modality.
#[derive(Debug, Clone)]
pub struct Branch<T: Real> {
    pub projection: Linear<T>,
    pub encoder: Encoder<T>,
}

struct BranchCache<T> {
    input: Array2<T>,
    encoder: EncoderCache<T>,
}

impl<T: Real> Branch<T> {
    fn new<R: Rng>(rng: &mut R, config: &ModelConfig, base_dim: usize, layers: usize) -> Self {
        Self {
            projection: Linear::new(rng, base_dim, config.embed_dim),
            encoder: Encoder::new(
                rng,
                &EncoderSpec {
                    dim: config.embed_dim,
                    layers,
                    heads: config.heads,
                    ff_dim: config.ff_dim,
                    max_positions: config.positional_embeddings.then_some(config.max_positions),
                    pooling: config.pooling,
                },
            ),
        }
    }

    fn forward(&self, x: ArrayView2<'_, T>) -> Result<(Array1<T>, BranchCache<T>)> {
        let tokens = self.projection.forward(x);
        let (y, encoder) = self.encoder.forward(tokens.view())?;
        Ok((
            y,
            BranchCache {
                input: x.to_owned(),
                encoder,
            },
        ))
    }

    fn backward(&mut self, cache: &BranchCache<T>, dy: &Array1<T>) {
        let dtokens = self.encoder.backward(&cache.encoder, dy);
        self.projection.backward(cache.input.view(), &dtokens);
    }
}

impl<T: Real> Parameterized<T> for Branch<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.projection.visit(&join(prefix, "projection"), f);
        self.encoder.visit(&join(prefix, "encoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.projection.visit_mut(&join(prefix, "projection"), f);
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
    }
}

/// Aligned base features for one clip or track.
#[derive(Debug, Clone, PartialEq)]
pub struct TriModalExample<T> {
    pub track_id: String,
    /// `n_v x video_dim`; may be absent for the music+text model.
    pub video: Option<Array2<T>>,
    /// `n_m x music_dim`.
    pub music: Array2<T>,
    /// Text base feature; `None` when the example has no text.
    pub text: Option<Array1<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Text dropout active.
    Train,
    /// Text used as given (missing text still maps to the null feature).
    EvalWithText,
    /// Every example receives the null text feature.
    EvalNoText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// Fused video+text (or text-only) query embeddings, one row per example.
    pub queries: Array2<T>,
    pub music: Array2<T>,
    /// Per example, whether text dropout replaced its text.
    pub dropped: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub dropped: usize,
    pub batch_size: usize,
}

struct QueryCache<T> {
    video: Option<BranchCache<T>>,
    text: BranchCache<T>,
    fusion: Option<FusionCache<T>>,
}

/// The tri-modal model.
#[derive(Debug, Clone)]
pub struct ViML<T: Real> {
    config: ModelConfig,
    pub video: Option<Branch<T>>,
    pub music: Branch<T>,
    pub text: Branch<T>,
    pub fusion: Option<Fusion<T>>,
    null_text: Array1<T>,
}

impl<T: Real> ViML<T> {
    /// Randomly initialised model with a zero null text feature.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let null = Array1::zeros(config.base_dims.text);
        let mut config = config;
        config.null_text = NullTextSource::Zeros;
        Self::build(config, seed, null)
    }

    /// Randomly initialised model whose null text feature is the frozen text
    /// encoder's embedding of the empty string.
    pub fn with_empty_string_null(
        config: ModelConfig,
        seed: u64,
        empty: Array1<T>,
    ) -> Result<Self> {
        if empty.len() != config.base_dims.text {
            return Err(Error::shape(format!(
                "null text feature has {} entries, text base dim is {}",
                empty.len(),
                config.base_dims.text
            )));
        }
        let mut config = config;
        config.null_text = NullTextSource::EmptyStringEmbedding;
        Self::build(config, seed, empty)
    }

    fn build(config: ModelConfig, seed: u64, null_text: Array1<T>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let video = config.use_video.then(|| {
            Branch::new(
                &mut rng,
                &config,
                config.base_dims.video,
                config.video_layers,
            )
        });
        let music = Branch::new(
            &mut rng,
            &config,
            config.base_dims.music,
            config.music_layers,
        );
        let text = Branch::new(&mut rng, &config, config.base_dims.text, config.text_layers);
        let fusion = config.use_video.then(|| Fusion::new(&mut rng, &config));
        Ok(Self {
            config,
            video,
            music,
            text,
            fusion,
            null_text,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn null_text(&self) -> &Array1<T> {
        &self.null_text
    }

    pub(crate) fn config_mut(&mut self) -> &mut ModelConfig {
        &mut self.config
    }

    pub(crate) fn set_null_text(&mut self, null: Array1<T>) {
        self.null_text = null;
    }

    fn branch(&self, modality: Modality) -> Result<&Branch<T>> {
        match modality {
            Modality::Video => self
                .video
                .as_ref()
                .ok_or_else(|| Error::MissingModality("model has no video branch".into())),
            Modality::Music => Ok(&self.music),
            Modality::Text => Ok(&self.text),
        }
    }

    fn check_input(&self, modality: Modality, x: &ArrayView2<'_, T>) -> Result<()> {
        let want = self.config.base_dims.get(modality);
        if x.ncols() != want {
            return Err(Error::shape(format!(
                "{modality} features have d={}, model expects {want}",
                x.ncols()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(())
    }

    /// Per-row linear projection of base features to `embed_dim`.
    pub fn project(&self, modality: Modality, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(modality, &x)?;
        Ok(self.branch(modality)?.projection.forward(x))
    }

    /// Transformer encoding and pooling of an already projected sequence.
    pub fn encode(&self, modality: Modality, projected: ArrayView2<'_, T>) -> Result<Array1<T>> {
        if projected.ncols() != self.config.embed_dim {
            return Err(Error::shape(format!(
                "projected sequence has width {}, expected {}",
                projected.ncols(),
                self.config.embed_dim
            )));
        }
        Ok(self.branch(modality)?.encoder.forward(projected)?.0)
    }

    /// Projection then encoding.
    pub fn embed(&self, modality: Modality, x: ArrayView2<'_, T>) -> Result<Array1<T>> {
        self.check_input(modality, &x)?;
        Ok(self.branch(modality)?.forward(x)?.0)
    }

    pub fn fuse(&self, y_video: &Array1<T>, y_text: &Array1<T>) -> Result<Array1<T>> {
        let d = self.config.embed_dim;
        if y_video.len() != d || y_text.len() != d {
            return Err(Error::shape("fusion inputs must have embed_dim entries"));
        }
        let fusion = self
            .fusion
            .as_ref()
            .ok_or_else(|| Error::MissingModality("model has no video branch to fuse".into()))?;
        Ok(fusion.forward(y_video, y_text)?.0)
    }

    fn text_input<'a>(&'a self, text: Option<ArrayView1<'a, T>>) -> Result<Array2<T>> {
        let t = text.unwrap_or(self.null_text.view());
        if t.len() != self.config.base_dims.text {
            return Err(Error::shape(format!(
                "text feature has {} entries, model expects {}",
                t.len(),
                self.config.base_dims.text
            )));
        }
        Ok(t.to_owned().insert_axis(ndarray::Axis(0)))
    }

    fn query_forward(
        &self,
        video: Option<ArrayView2<'_, T>>,
        text: Option<ArrayView1<'_, T>>,
    ) -> Result<(Array1<T>, QueryCache<T>)> {
        let text_x = self.text_input(text)?;
        let (y_text, text_cache) = self.text.forward(text_x.view())?;
        match (&self.video, &self.fusion) {
            (Some(branch), Some(fusion)) => {
                let v = video.ok_or_else(|| Error::MissingModality("video features".into()))?;
                self.check_input(Modality::Video, &v)?;
                let (y_video, video_cache) = branch.forward(v)?;
                let (y, fusion_cache) = fusion.forward(&y_video, &y_text)?;
                Ok((
                    y,
                    QueryCache {
                        video: Some(video_cache),
                        text: text_cache,
                        fusion: Some(fusion_cache),
                    },
                ))
            }
            _ => Ok((
                y_text,
                QueryCache {
                    video: None,
                    text: text_cache,
                    fusion: None,
                },
            )),
        }
    }

    /// Query embedding for a video and optional text; `None` text uses the
    /// null feature. For the music+text model the video is ignored.
    pub fn query_embedding(
        &self,
        video: Option<ArrayView2<'_, T>>,
        text: Option<ArrayView1<'_, T>>,
    ) -> Result<Array1<T>> {
        Ok(self.query_forward(video, text)?.0)
    }

    pub fn music_embedding(&self, music: ArrayView2<'_, T>) -> Result<Array1<T>> {
        self.embed(Modality::Music, music)
    }

    fn resolve_texts<'a, R: Rng>(
        &'a self,
        batch: &'a [TriModalExample<T>],
        mode: ForwardMode,
        rng: &mut R,
    ) -> (Vec<Option<ArrayView1<'a, T>>>, Vec<bool>) {
        let mut dropped = Vec::with_capacity(batch.len());
        let texts = batch
            .iter()
            .map(|ex| match mode {
                ForwardMode::Train => {
                    let (t, d) = text_dropout(
                        ex.text.as_ref(),
                        self.config.text_dropout_p,
                        &self.null_text,
                        rng,
                    );
                    dropped.push(d);
                    Some(t.view())
                }
                ForwardMode::EvalWithText => {
                    dropped.push(false);
                    ex.text.as_ref().map(|t| t.view())
                }
                ForwardMode::EvalNoText => {
                    dropped.push(false);
                    None
                }
            })
            .collect();
        (texts, dropped)
    }

    pub fn forward<R: Rng>(
        &self,
        batch: &[TriModalExample<T>],
        mode: ForwardMode,
        rng: &mut R,
    ) -> Result<ForwardOutput<T>> {
        let d = self.config.embed_dim;
        let (texts, dropped) = self.resolve_texts(batch, mode, rng);
        let mut queries = Array2::zeros((batch.len(), d));
        let mut music = Array2::zeros((batch.len(), d));
        for (i, (ex, text)) in batch.iter().zip(texts).enumerate() {
            let y = self.query_embedding(ex.video.as_ref().map(|v| v.view()), text)?;
            queries.row_mut(i).assign(&y);
            music
                .row_mut(i)
                .assign(&self.music_embedding(ex.music.view())?);
        }
        Ok(ForwardOutput {
            queries,
            music,
            dropped,
        })
    }

    /// Symmetric InfoNCE loss of a batch, without gradients.
    pub fn batch_loss<R: Rng>(
        &self,
        batch: &[TriModalExample<T>],
        mode: ForwardMode,
        rng: &mut R,
    ) -> Result<T> {
        let out = self.forward(batch, mode, rng)?;
        super::loss::symmetric_loss(out.queries.view(), out.music.view(), self.config.tau)
    }

    /// Forward and backward pass over one batch. Gradients are added to the
    /// parameters' `grad` buffers; call [`Parameterized::zero_grad`] first for a
    /// fresh step.
    pub fn accumulate_gradients<R: Rng>(
        &mut self,
        batch: &[TriModalExample<T>],
        mode: ForwardMode,
        rng: &mut R,
    ) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let d = self.config.embed_dim;
        let (texts, dropped) = self.resolve_texts(batch, mode, rng);
        let mut queries = Array2::zeros((batch.len(), d));
        let mut music = Array2::zeros((batch.len(), d));
        let mut query_caches = Vec::with_capacity(batch.len());
        let mut music_caches = Vec::with_capacity(batch.len());
        for (i, (ex, text)) in batch.iter().zip(texts).enumerate() {
            let (y, qc) = self.query_forward(ex.video.as_ref().map(|v| v.view()), text)?;
            queries.row_mut(i).assign(&y);
            query_caches.push(qc);
            self.check_input(Modality::Music, &ex.music.view())?;
            let (m, mc) = self.music.forward(ex.music.view())?;
            music.row_mut(i).assign(&m);
            music_caches.push(mc);
        }

        let (loss, dqueries, dmusic) =
            symmetric_loss_with_grad(queries.view(), music.view(), self.config.tau)?;

        for (i, qc) in query_caches.iter().enumerate() {
            let dy = dqueries.row(i).to_owned();
            match (&mut self.fusion, &mut self.video, &qc.fusion, &qc.video) {
                (Some(fusion), Some(video), Some(fc), Some(vc)) => {
                    let (dv, dt) = fusion.backward(fc, &dy);
                    video.backward(vc, &dv);
                    self.text.backward(&qc.text, &dt);
                }
                _ => self.text.backward(&qc.text, &dy),
            }
        }
        for (i, mc) in music_caches.iter().enumerate() {
            self.music.backward(mc, &dmusic.row(i).to_owned());
        }

        Ok(StepStats {
            loss: loss.as_f64(),
            dropped: dropped.iter().filter(|&&d| d).count(),
            batch_size: batch.len(),
        })
    }

    /// Parameters of the fusion module only.
    pub fn fusion_parameters(&self) -> usize {
        self.fusion.as_ref().map_or(0, |f| f.num_parameters())
    }

    /// Element-type conversion, e.g. an `f32` checkpoint into `f64` for
    /// gradient checking.
    pub fn cast<U: Real>(&self) -> ViML<U> {
        let mut out = ViML::<U>::build(
            self.config.clone(),
            0,
            self.null_text.mapv(|v| U::of(v.as_f64())),
        )
        .expect("config already validated");
        let mut values = Vec::new();
        self.visit("", &mut |_, p| {
            values.push(p.value.mapv(|v| U::of(v.as_f64())))
        });
        let mut it = values.into_iter();
        out.visit_mut("", &mut |_, p| p.value = it.next().expect("same layout"));
        out
    }
}

impl<T: Real> Parameterized<T> for ViML<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        if let Some(v) = &self.video {
            v.visit(&join(prefix, "video"), f);
        }
        self.music.visit(&join(prefix, "music"), f);
        self.text.visit(&join(prefix, "text"), f);
        if let Some(fu) = &self.fusion {
            fu.visit(&join(prefix, "fusion"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        if let Some(v) = &mut self.video {
            v.visit_mut(&join(prefix, "video"), f);
        }
        self.music.visit_mut(&join(prefix, "music"), f);
        self.text.visit_mut(&join(prefix, "text"), f);
        if let Some(fu) = &mut self.fusion {
            fu.visit_mut(&join(prefix, "fusion"), f);
        }
    }
}

impl<T: Real> TriModalExample<T> {
    pub fn cast<U: Real>(&self) -> TriModalExample<U> {
        let c = |v: &T| U::of(v.as_f64());
        TriModalExample {
            track_id: self.track_id.clone(),
            video: self.video.as_ref().map(|m| m.map(c)),
            music: self.music.map(c),
            text: self.text.as_ref().map(|t| t.map(c)),
        }
    }
}
