//! The action-conditioned late-fusion success predictor: per-modality
//! encoders (vision, two weight-tied tactile stacks, action MLP) whose
//! embeddings are concatenated and fused by two dense layers.

mod calibration;
mod kfold;
pub(crate) mod train;

pub use calibration::{expected_calibration_error, platt_fit, platt_fit_scores, reliability_bins, Calibration, ReliabilityBin};
pub use kfold::{chance_kfold, kfold_eval, FoldResult, KFoldReport};
pub use train::{accuracy, evaluate_scores, train, train_records, TrainReport, TrainSchedule};

use crate::domain::{action_to_feature, Action, GraspState, TrialRecord, FEATURE_LEN, TACTILE_SIZE, VISION_SIZE};
use crate::error::{Error, Result};
use crate::nn::{self, Cache, Checkpoint, LayerSpec, Network, ParamStore, Tensor};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fusion,
    VisionOnly,
    TactileOnly,
    NoAction,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Fusion, Variant::VisionOnly, Variant::TactileOnly, Variant::NoAction];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fusion => "fusion",
            Variant::VisionOnly => "vision_only",
            Variant::TactileOnly => "tactile_only",
            Variant::NoAction => "no_action",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }

    pub fn uses_vision(self) -> bool {
        self != Variant::TactileOnly
    }

    pub fn uses_tactile(self) -> bool {
        self != Variant::VisionOnly
    }

    pub fn uses_action(self) -> bool {
        self != Variant::NoAction
    }
}

/// One strided convolution: `(out_channels, kernel, stride)`.
pub type ConvWidth = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vision_convs: Vec<ConvWidth>,
    pub vision_embed: usize,
    pub tactile_convs: Vec<ConvWidth>,
    pub tactile_embed: usize,
    pub action_hidden: usize,
    pub fusion_hidden: usize,
    /// Share one set of weights between the left and right tactile stacks.
    pub tie_tactile: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Fusion,
            vision_convs: vec![(8, 5, 2), (16, 3, 2), (16, 3, 2)],
            vision_embed: 64,
            tactile_convs: vec![(8, 5, 2), (16, 3, 2)],
            tactile_embed: 64,
            action_hidden: 64,
            fusion_hidden: 128,
            tie_tactile: true,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ModelConfig {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.vision_embed, self.tactile_embed, self.action_hidden, self.fusion_hidden];
        let convs = self.vision_convs.iter().chain(&self.tactile_convs);
        if widths.contains(&0) || convs.clone().any(|&(c, k, s)| c == 0 || k == 0 || s == 0) {
            return Err(Error::Config("all widths, kernels and strides must be at least 1".into()));
        }
        Ok(())
    }
}

/// Encoded inputs for a batch of `(state, action)` pairs.
pub struct Batch {
    pub vision: Tensor,
    pub tactile_left: Tensor,
    pub tactile_right: Tensor,
    pub action: Tensor,
}

fn raster_tensor(rasters: &[&crate::domain::Raster], size: usize, what: &str) -> Result<Tensor> {
    let mut data = Vec::with_capacity(rasters.len() * size * size);
    for r in rasters {
        if r.height != size || r.width != size {
            return Err(Error::shape(
                what,
                format!("expected {size}x{size} raster, got {}x{}", r.height, r.width),
            ));
        }
        data.extend(r.data.iter().map(|&v| v as f64));
    }
    Tensor::new(vec![rasters.len(), 1, size, size], data)
}

impl Batch {
    pub fn encode(pairs: &[(&GraspState, &Action)]) -> Result<Batch> {
        if pairs.is_empty() {
            return Err(Error::shape("input", "empty batch"));
        }
        let vis: Vec<_> = pairs.iter().map(|(s, _)| &s.vision).collect();
        let left: Vec<_> = pairs.iter().map(|(s, _)| &s.tactile_left).collect();
        let right: Vec<_> = pairs.iter().map(|(s, _)| &s.tactile_right).collect();
        let feats: Vec<f64> = pairs.iter().flat_map(|(s, a)| action_to_feature(a, &s.pose)).collect();
        Ok(Batch {
            vision: raster_tensor(&vis, VISION_SIZE, "vision")?,
            tactile_left: raster_tensor(&left, TACTILE_SIZE, "tactile_left")?,
            tactile_right: raster_tensor(&right, TACTILE_SIZE, "tactile_right")?,
            action: Tensor::new(vec![pairs.len(), FEATURE_LEN], feats)?,
        })
    }

    pub fn from_records(records: &[&TrialRecord]) -> Result<Batch> {
        let pairs: Vec<_> = records.iter().map(|r| (&r.state, &r.action)).collect();
        Batch::encode(&pairs)
    }

    pub fn len(&self) -> usize {
        self.action.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Intermediates of a full forward pass, for [`Model::backward`].
pub struct ModelCache {
    vision: Option<Cache>,
    left: Option<Cache>,
    right: Option<Cache>,
    action: Option<Cache>,
    head: Cache,
    widths: Vec<usize>,
}

impl ModelCache {
    /// ReLU on/off pattern across every branch and the head.
    pub fn activation_pattern(&self) -> Vec<bool> {
        [&self.vision, &self.left, &self.right, &self.action]
            .into_iter()
            .flatten()
            .chain(std::iter::once(&self.head))
            .flat_map(Cache::activation_pattern)
            .collect()
    }
}

/// Built networks plus their parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    vision: Option<Network>,
    tactile_left: Option<Network>,
    tactile_right: Option<Network>,
    action: Option<Network>,
    head: Network,
}

/// Two models are equal when configuration and weights agree; the layer
/// seeds only matter at initialization.
impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

fn conv_stack(prefix: &str, input: Vec<usize>, convs: &[ConvWidth], embed: usize, seed: &mut impl FnMut() -> u64) -> Network {
    let mut layers = Vec::new();
    for (i, &(c, k, s)) in convs.iter().enumerate() {
        layers.push(LayerSpec::conv(&format!("{prefix}.conv{}", i + 1), c, k, s, seed()));
        layers.push(LayerSpec::relu());
    }
    layers.push(LayerSpec::flatten());
    layers.push(LayerSpec::dense(&format!("{prefix}.embed"), embed, seed()));
    Network::new(input, layers)
}

impl Model {
    /// Builds the variant's topology with freshly initialized weights.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut counter = 0u64;
        let mut next = || {
            counter += 1;
            rng::derive(seed, rng::stream::INIT_WEIGHTS, counter)
        };
        let v = config.variant;
        let vision = v
            .uses_vision()
            .then(|| conv_stack("vision", vec![1, VISION_SIZE, VISION_SIZE], &config.vision_convs, config.vision_embed, &mut next));
        let (tactile_left, tactile_right) = if v.uses_tactile() {
            let input = vec![1, TACTILE_SIZE, TACTILE_SIZE];
            let (lp, rp) = if config.tie_tactile {
                ("tactile", "tactile")
            } else {
                ("tactile_left", "tactile_right")
            };
            let l = conv_stack(lp, input.clone(), &config.tactile_convs, config.tactile_embed, &mut next);
            let r = conv_stack(rp, input, &config.tactile_convs, config.tactile_embed, &mut next);
            (Some(l), Some(r))
        } else {
            (None, None)
        };
        let action = v.uses_action().then(|| {
            Network::new(
                vec![FEATURE_LEN],
                vec![
                    LayerSpec::dense("action.fc1", config.action_hidden, next()),
                    LayerSpec::relu(),
                    LayerSpec::dense("action.fc2", config.action_hidden, next()),
                ],
            )
        });
        let mut width = 0;
        for n in [&vision, &tactile_left, &tactile_right, &action].into_iter().flatten() {
            width += n.output_shape()?[0];
        }
        let head = Network::new(
            vec![width],
            vec![
                LayerSpec::dense("fusion.fc1", config.fusion_hidden, next()),
                LayerSpec::relu(),
                LayerSpec::dense("fusion.out", 1, next()),
            ],
        );
        let mut params = ParamStore::new();
        for n in [&vision, &tactile_left, &tactile_right, &action].into_iter().flatten() {
            n.init_params(&mut params)?;
        }
        head.init_params(&mut params)?;
        Ok(Model {
            config: config.clone(),
            params,
            vision,
            tactile_left,
            tactile_right,
            action,
            head,
        })
    }

    /// Rebuilds the topology for `config` around existing parameters.
    pub fn with_params(config: &ModelConfig, params: ParamStore) -> Result<Model> {
        let mut m = Model::build(config, 0)?;
        if m.params.names() != params.names() {
            return Err(Error::Checkpoint("parameter names do not match the model topology".into()));
        }
        for (k, p) in m.params.iter() {
            let q = params.get(k).expect("same names");
            if p.weight.shape() != q.weight.shape() || p.bias.shape() != q.bias.shape() {
                return Err(Error::Checkpoint(format!("parameter `{k}` has the wrong shape")));
            }
        }
        m.params = params;
        Ok(m)
    }

    fn branches(&self) -> [(&Option<Network>, fn(&Batch) -> &Tensor); 4] {
        [
            (&self.vision, |b| &b.vision),
            (&self.tactile_left, |b| &b.tactile_left),
            (&self.tactile_right, |b| &b.tactile_right),
            (&self.action, |b| &b.action),
        ]
    }

    /// Pre-sigmoid scores for a batch, with the cache needed for training.
    pub fn forward(&self, batch: &Batch) -> Result<(Vec<f64>, ModelCache)> {
        let mut embeds = Vec::new();
        let mut caches: [Option<Cache>; 4] = [None, None, None, None];
        for (i, (net, input)) in self.branches().into_iter().enumerate() {
            if let Some(net) = net {
                let (y, c) = nn::forward(net, &self.params, input(batch))?;
                embeds.push(y);
                caches[i] = Some(c);
            }
        }
        let widths: Vec<usize> = embeds.iter().map(|t| t.shape()[1]).collect();
        let refs: Vec<&Tensor> = embeds.iter().collect();
        let joint = Tensor::concat_features(&refs)?;
        let (out, head) = nn::forward(&self.head, &self.params, &joint)?;
        let [vision, left, right, action] = caches;
        Ok((
            out.into_data(),
            ModelCache {
                vision,
                left,
                right,
                action,
                head,
                widths,
            },
        ))
    }

    /// Parameter gradients given the loss gradient for each score.
    pub fn backward(&self, cache: &ModelCache, dscores: &[f64]) -> Result<ParamStore> {
        let g = Tensor::new(vec![dscores.len(), 1], dscores.to_vec())?;
        let (mut grads, djoint) = nn::backward(&self.head, &self.params, &cache.head, &g)?;
        let parts = djoint.split_features(&cache.widths)?;
        let mut parts = parts.into_iter();
        let caches = [&cache.vision, &cache.left, &cache.right, &cache.action];
        for ((net, _), c) in self.branches().into_iter().zip(caches) {
            if let (Some(net), Some(c)) = (net, c) {
                let part = parts.next().expect("one part per branch");
                let (bg, _) = nn::backward(net, &self.params, c, &part)?;
                grads.accumulate(&bg)?;
            }
        }
        Ok(grads)
    }

    /// Pre-sigmoid scores, evaluated in chunks.
    pub fn scores(&self, pairs: &[(&GraspState, &Action)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(256) {
            out.extend(self.forward(&Batch::encode(chunk)?)?.0);
        }
        Ok(out)
    }

    pub fn score(&self, s: &GraspState, a: &Action) -> Result<f64> {
        Ok(self.scores(&[(s, a)])?[0])
    }

    /// Precomputes everything that depends only on the state, so that many
    /// candidate actions can be scored cheaply.
    pub fn embed_state(&self, s: &GraspState) -> Result<StateEmbedding> {
        let batch = Batch::encode(&[(s, &Action::ZERO)])?;
        let mut state = Vec::new();
        for (net, input) in self.branches().into_iter().take(3) {
            if let Some(net) = net {
                state.extend(nn::predict(net, &self.params, input(&batch))?.into_data());
            }
        }
        let fc1 = self.params.require("fusion.fc1")?;
        let (h, d) = (fc1.weight.shape()[0], fc1.weight.shape()[1]);
        let w = fc1.weight.data();
        let pre: Vec<f64> = (0..h)
            .map(|i| fc1.bias.data()[i] + (0..state.len()).map(|j| w[i * d + j] * state[j]).sum::<f64>())
            .collect();
        Ok(StateEmbedding {
            pose: s.pose,
            offset: state.len(),
            pre,
        })
    }

    /// Pre-sigmoid scores of `actions` from an embedded state. Agrees with
    /// [`Model::score`] up to floating-point reassociation.
    pub fn score_actions(&self, emb: &StateEmbedding, actions: &[Action]) -> Result<Vec<f64>> {
        let fc1 = self.params.require("fusion.fc1")?;
        let out = self.params.require("fusion.out")?;
        let (h, d) = (fc1.weight.shape()[0], fc1.weight.shape()[1]);
        let w1 = fc1.weight.data();
        let w2 = out.weight.data();
        let b2 = out.bias.data()[0];
        let finish = |pre: &[f64]| -> f64 { b2 + pre.iter().zip(w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>() };
        let Some(action_net) = &self.action else {
            return Ok(vec![finish(&emb.pre); actions.len()]);
        };
        let mut scores = Vec::with_capacity(actions.len());
        for chunk in actions.chunks(256) {
            let feats: Vec<f64> = chunk.iter().flat_map(|a| action_to_feature(a, &emb.pose)).collect();
            let x = Tensor::new(vec![chunk.len(), FEATURE_LEN], feats)?;
            let e = nn::predict(action_net, &self.params, &x)?;
            let k = e.shape()[1];
            let mut pre = vec![0.0; h];
            for row in e.data().chunks(k) {
                for i in 0..h {
                    let wi = &w1[i * d + emb.offset..i * d + emb.offset + k];
                    pre[i] = emb.pre[i] + wi.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
                scores.push(finish(&pre));
            }
        }
        Ok(scores)
    }

    /// Writes parameters, configuration and optional calibration.
    pub fn save(&self, path: &Path, calibration: Option<&Calibration>, step: u64) -> Result<()> {
        self.to_checkpoint(calibration, step).save(path)
    }

    pub fn to_checkpoint(&self, calibration: Option<&Calibration>, step: u64) -> Checkpoint {
        Checkpoint {
            step,
            params: self.params.clone(),
            optimizer: None,
            meta: serde_json::json!({
                "model_config": self.config,
                "calibration": calibration,
            }),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Model, Option<Calibration>)> {
        let config: ModelConfig = serde_json::from_value(ck.meta["model_config"].clone())
            .map_err(|e| Error::Checkpoint(format!("missing model configuration: {e}")))?;
        let calibration: Option<Calibration> = serde_json::from_value(ck.meta["calibration"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad calibration: {e}")))?;
        Ok((Model::with_params(&config, ck.params.clone())?, calibration))
    }

    pub fn load(path: &Path) -> Result<(Model, Option<Calibration>)> {
        Model::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// State-dependent part of the first fusion layer.
#[derive(Clone, Debug)]
pub struct StateEmbedding {
    pose: crate::domain::Pose,
    offset: usize,
    pre: Vec<f64>,
}

/// Predictions never reach exactly 0 or 1.
const PROB_FLOOR: f64 = 1e-12;

/// Maps a pre-sigmoid score to a probability, through the calibration when given.
/// Finite-difference check of [`Model::backward`] under the summed
/// cross-entropy of `batch` against `labels`, at `max_coords` sampled
/// parameters (all of them when `None`).
pub fn grad_check_model(
    model: &Model,
    batch: &Batch,
    labels: &[f64],
    seed: u64,
    max_coords: Option<usize>,
) -> Result<nn::GradCheckReport> {
    let loss = |m: &Model| -> Result<(f64, Vec<f64>, ModelCache)> {
        let (scores, cache) = m.forward(batch)?;
        let (mean, grad) = nn::logit_cross_entropy(&scores, labels);
        let n = labels.len() as f64;
        Ok((mean * n, grad.iter().map(|g| g * n).collect(), cache))
    };
    let (_, dscores, cache) = loss(model)?;
    let grads = model.backward(&cache, &dscores)?;
    let coords = nn::gradcheck::sample_coords(model.params.num_values(), max_coords, seed);
    nn::check_gradient(&model.params, &grads, &coords, |p| {
        let probe = Model {
            params: p.clone(),
            ..model.clone()
        };
        let (l, _, c) = loss(&probe)?;
        Ok((l, c.activation_pattern()))
    })
}

pub fn score_to_probability(score: f64, calibration: Option<&Calibration>) -> f64 {
    let p = match calibration {
        Some(c) => c.apply(score),
        None => nn::sigmoid(score),
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Success probability of taking `a` from `s`.
pub fn predict(model: &Model, calibration: Option<&Calibration>, s: &GraspState, a: &Action) -> Result<f64> {
    Ok(score_to_probability(model.score(s, a)?, calibration))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{Pose, Raster};
    use crate::rng;
    use rand::Rng;

    pub(crate) fn random_state(seed: u64) -> GraspState {
        let mut r = rng::rng(seed);
        let mut raster = |n: usize| Raster {
            height: n,
            width: n,
            data: (0..n * n).map(|_| r.gen_range(0.0f32..1.0)).collect(),
        };
        GraspState {
            vision: raster(VISION_SIZE),
            tactile_left: raster(TACTILE_SIZE),
            tactile_right: raster(TACTILE_SIZE),
            pose: Pose::new(0.01, -0.03, 0.02, 0.7),
            force: 12.0,
        }
    }

    #[test]
    fn fusion_shape_contract() {
        let m = Model::build(&ModelConfig::default(), 1).unwrap();
        let s = random_state(1);
        let p = predict(&m, None, &s, &Action::new(0.01, 0.0, -0.01, 0.1, 3.0)).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(p, predict(&m, None, &s, &Action::new(0.01, 0.0, -0.01, 0.1, 3.0)).unwrap());
    }

    fn grad_batch(seed: u64) -> (Batch, Vec<f64>) {
        let states: Vec<GraspState> = (0..3).map(|i| random_state(seed * 10 + i)).collect();
        let actions = [
            Action::new(0.01, -0.005, 0.002, 0.1, 3.0),
            Action::new(-0.02, 0.0, -0.01, -0.2, -5.0),
            Action::ZERO,
        ];
        let pairs: Vec<_> = states.iter().zip(&actions).collect();
        (Batch::encode(&pairs).unwrap(), vec![1.0, 0.0, 1.0])
    }

    #[test]
    fn reduced_width_fusion_gradients_exact_everywhere() {
        let cfg = ModelConfig {
            vision_convs: vec![(2, 5, 4), (2, 3, 2), (2, 3, 2)],
            vision_embed: 3,
            tactile_convs: vec![(2, 5, 4), (2, 3, 2)],
            tactile_embed: 3,
            action_hidden: 4,
            fusion_hidden: 5,
            ..ModelConfig::default()
        };
        for seed in 0..3 {
            let m = Model::build(&cfg, seed).unwrap();
            let (b, labels) = grad_batch(seed);
            let rep = grad_check_model(&m, &b, &labels, seed, None).unwrap();
            assert_eq!(rep.checked + rep.skipped, m.params.num_values());
            assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn full_width_fusion_gradients_at_sampled_coordinates() {
        let m = Model::build(&ModelConfig::default(), 5).unwrap();
        let (b, labels) = grad_batch(5);
        let rep = grad_check_model(&m, &b, &labels, 5, Some(200)).unwrap();
        assert!(rep.checked >= 150, "{rep:?}");
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut m = Model::build(&ModelConfig::default(), 2).unwrap();
        m.params.get_mut("fusion.out").unwrap().weight.data_mut().fill(0.0);
        assert_eq!(predict(&m, None, &random_state(3), &Action::ZERO).unwrap(), 0.5);
    }

    #[test]
    fn ablations_ignore_their_missing_inputs() {
        let s = random_state(4);
        let a = Action::new(0.01, -0.01, 0.0, 0.2, -3.0);
        let b = Action::new(-0.02, 0.005, 0.02, -0.1, 5.0);
        let mut other = random_state(5);
        other.pose = s.pose;
        other.force = s.force;

        let m = Model::build(&ModelConfig::with_variant(Variant::NoAction), 3).unwrap();
        assert_eq!(m.score(&s, &a).unwrap(), m.score(&s, &b).unwrap());

        let m = Model::build(&ModelConfig::with_variant(Variant::VisionOnly), 3).unwrap();
        let mut t = s.clone();
        t.tactile_left = other.tactile_left.clone();
        t.tactile_right = other.tactile_right.clone();
        assert_eq!(m.score(&s, &a).unwrap(), m.score(&t, &a).unwrap());

        let m = Model::build(&ModelConfig::with_variant(Variant::TactileOnly), 3).unwrap();
        let mut t = s.clone();
        t.vision = other.vision.clone();
        assert_eq!(m.score(&s, &a).unwrap(), m.score(&t, &a).unwrap());
    }

    #[test]
    fn tied_tactile_branches_share_parameters() {
        let m = Model::build(&ModelConfig::default(), 4).unwrap();
        assert!(m.params.contains("tactile.conv1"));
        assert!(!m.params.contains("tactile_left.conv1"));
        let untied = Model::build(
            &ModelConfig {
                tie_tactile: false,
                ..ModelConfig::default()
            },
            4,
        )
        .unwrap();
        assert!(untied.params.contains("tactile_left.conv1") && untied.params.contains("tactile_right.conv1"));
    }

    #[test]
    fn fast_scoring_matches_full_forward() {
        for variant in Variant::ALL {
            let m = Model::build(&ModelConfig::with_variant(variant), 5).unwrap();
            let s = random_state(6);
            let acts: Vec<Action> = (0..300)
                .map(|i| Action::new(0.0001 * i as f64 - 0.015, 0.01, -0.005, 0.001 * i as f64 - 0.1, 1.0))
                .collect();
            let emb = m.embed_state(&s).unwrap();
            let fast = m.score_actions(&emb, &acts).unwrap();
            let pairs: Vec<_> = acts.iter().map(|a| (&s, a)).collect();
            let slow = m.scores(&pairs).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{variant:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_wrong_raster_size() {
        let m = Model::build(&ModelConfig::default(), 1).unwrap();
        let mut s = random_state(1);
        s.vision = Raster::zeros(32, 32);
        assert!(predict(&m, None, &s, &Action::ZERO).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Model::build(&ModelConfig::with_variant(Variant::TactileOnly), 9).unwrap();
        let cal = Calibration { a: -1.3, b: 0.2 };
        let ck = m.to_checkpoint(Some(&cal), 5);
        let (back, c) = Model::from_checkpoint(&nn::Checkpoint::from_json(&ck.to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(c, Some(cal));
    }
}
