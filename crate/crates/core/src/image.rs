//! The imaging branch: crop and resize to a fixed cube, augmentation, and a
//! pooled-linear baseline classifier.
//!
//! Every sample has 8 channels of 64³ voxels: T1, T1ce, T2, FLAIR, then the
//! ET, NET, CC and ED indicators. The embedding is an 8×8×8 average pool of
//! each channel (4096 values) and the classifier is `sigmoid(w·emb + b)`.
//!
//! Flips and 90° rotations of the 64³ cube map pooling cells onto pooling
//! cells, and the mean of 512 independent N(0, σ²) draws is N(0, σ²/512).
//! Augmenting the pooled embedding with the same geometric draw and noise of
//! σ/√512 is therefore distributed exactly like pooling an augmented sample,
//! which is how the trainer augments.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{nearest, trilinear, CaseBundle, Dims, Sequence};
use crate::labeling::Outcome;
use crate::math;
use crate::segmentation::{MergedSegmentation, SUBREGION_LABELS};

pub const SIDE: usize = 64;
pub const CHANNELS: usize = 8;
pub const INTENSITY_CHANNELS: usize = 4;
/// Pooling cells per axis.
pub const CELLS: usize = 8;
/// Voxels per pooling cell along each axis.
pub const CELL: usize = SIDE / CELLS;
pub const EMBED_DIM: usize = CHANNELS * CELLS * CELLS * CELLS;
pub const DEFAULT_MARGIN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSample {
    pub case_id: String,
    pub label: Option<Outcome>,
    /// `CHANNELS` cubes of `SIDE³` values, x fastest.
    pub channels: Vec<Vec<f64>>,
}

impl ImageSample {
    pub fn zeros(case_id: &str) -> Self {
        ImageSample {
            case_id: case_id.into(),
            label: None,
            channels: (0..CHANNELS).map(|_| alloc::vec![0.0; SIDE * SIDE * SIDE]).collect(),
        }
    }
}

/// Inclusive bounding box of the foreground grown by `margin` and clipped
/// to the grid.
pub fn crop_box(merged: &MergedSegmentation, margin: usize) -> Result<([usize; 3], [usize; 3])> {
    let g = merged.labels.geometry();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &l) in merged.labels.labels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        any = true;
        let c = g.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    if !any {
        return Err(Error::EmptyRoi);
    }
    for a in 0..3 {
        lo[a] = lo[a].saturating_sub(margin);
        hi[a] = (hi[a] + margin).min(g.dims[a] - 1);
    }
    Ok((lo, hi))
}

fn crop<T: Copy>(src: &[T], dims: Dims, lo: [usize; 3], hi: [usize; 3]) -> (Vec<T>, Dims) {
    let out_dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let mut out = Vec::with_capacity(out_dims.iter().product());
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            let row = dims[0] * (y + dims[1] * z);
            out.extend_from_slice(&src[row + lo[0]..=row + hi[0]]);
        }
    }
    (out, out_dims)
}

/// Zero mean, unit population variance; a constant channel becomes zeros.
fn z_normalize(values: &mut [f64]) {
    let (mean, std) = math::mean_std(values);
    if std > 0.0 {
        values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

pub fn crop_and_resize(bundle: &CaseBundle, merged: &MergedSegmentation, margin: usize) -> Result<ImageSample> {
    bundle.check_congruent()?;
    let dims = bundle.sequence(Sequence::T1).dims();
    bundle.sequence(Sequence::T1).geometry().check_congruent(merged.labels.geometry())?;
    let (lo, hi) = crop_box(merged, margin)?;
    let target = [SIDE; 3];
    let mut channels = Vec::with_capacity(CHANNELS);
    for s in Sequence::ALL {
        let (c, cd) = crop(bundle.sequence(s).data(), dims, lo, hi);
        let mut resized = trilinear(&c, cd, target);
        z_normalize(&mut resized);
        channels.push(resized);
    }
    let (labels, cd) = crop(merged.labels.labels(), dims, lo, hi);
    let resized = nearest(&labels, cd, target);
    for label in SUBREGION_LABELS {
        channels.push(resized.iter().map(|&l| (l == label) as u8 as f64).collect());
    }
    Ok(ImageSample { case_id: bundle.case_id.clone(), label: None, channels })
}

/// One geometric augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometricDraw {
    pub flips: [bool; 3],
    /// Quarter turns, 0..4.
    pub turns: u8,
    /// Rotation axis, 0..3.
    pub axis: u8,
}

impl GeometricDraw {
    pub const IDENTITY: GeometricDraw = GeometricDraw { flips: [false; 3], turns: 0, axis: 0 };

    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let flips = [rng.random_bool(0.5), rng.random_bool(0.5), rng.random_bool(0.5)];
        let turns = rng.random_range(0..4u8);
        let axis = rng.random_range(0..3u8);
        GeometricDraw { flips, turns, axis }
    }

    /// Where the voxel at `c` lands in a cube of side `side`.
    pub fn forward(&self, mut c: [usize; 3], side: usize) -> [usize; 3] {
        for a in 0..3 {
            if self.flips[a] {
                c[a] = side - 1 - c[a];
            }
        }
        let (u, v) = match self.axis {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        for _ in 0..self.turns {
            let (cu, cv) = (c[u], c[v]);
            c[u] = side - 1 - cv;
            c[v] = cu;
        }
        c
    }

    /// Applies the draw to a cube of side `side` stored x fastest.
    pub fn apply(&self, data: &[f64], side: usize) -> Vec<f64> {
        if *self == GeometricDraw::IDENTITY {
            return data.to_vec();
        }
        let mut out = alloc::vec![0.0; data.len()];
        for z in 0..side {
            for y in 0..side {
                for x in 0..side {
                    let [ox, oy, oz] = self.forward([x, y, z], side);
                    out[ox + side * (oy + side * oz)] = data[x + side * (y + side * z)];
                }
            }
        }
        out
    }
}

/// Random flips, one quarter-turn rotation and Gaussian noise of `sigma` on
/// the intensity channels.
pub fn augment<R: Rng>(sample: &ImageSample, rng: &mut R, sigma: f64) -> ImageSample {
    let draw = GeometricDraw::sample(rng);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let channels = sample
        .channels
        .iter()
        .enumerate()
        .map(|(c, data)| {
            let mut out = draw.apply(data, SIDE);
            if c < INTENSITY_CHANNELS && sigma > 0.0 {
                out.iter_mut().for_each(|v| *v += noise.sample(rng));
            }
            out
        })
        .collect();
    ImageSample { case_id: sample.case_id.clone(), label: sample.label, channels }
}

/// The same augmentation acting on a pooled embedding.
pub fn augment_pooled<R: Rng>(embedding: &[f64], rng: &mut R, sigma: f64) -> Vec<f64> {
    let draw = GeometricDraw::sample(rng);
    let cell_sigma = sigma / math::sqrt((CELL * CELL * CELL) as f64);
    let noise = Normal::new(0.0, cell_sigma).expect("finite sigma");
    let block = CELLS * CELLS * CELLS;
    let mut out = Vec::with_capacity(embedding.len());
    for c in 0..CHANNELS {
        let mut ch = draw.apply(&embedding[c * block..(c + 1) * block], CELLS);
        if c < INTENSITY_CHANNELS && sigma > 0.0 {
            ch.iter_mut().for_each(|v| *v += noise.sample(rng));
        }
        out.extend(ch);
    }
    out
}

/// 8×8×8 average pool per channel; cell `(bx, by, bz)` of channel `c` is at
/// `c·512 + bx + 8·(by + 8·bz)`.
pub fn extract_embedding(sample: &ImageSample) -> Result<Vec<f64>> {
    if sample.channels.len() != CHANNELS {
        return Err(Error::Shape { expected: CHANNELS, found: sample.channels.len() });
    }
    let scale = 1.0 / (CELL * CELL * CELL) as f64;
    let mut out = alloc::vec![0.0; EMBED_DIM];
    for (c, data) in sample.channels.iter().enumerate() {
        if data.len() != SIDE * SIDE * SIDE {
            return Err(Error::Shape { expected: SIDE * SIDE * SIDE, found: data.len() });
        }
        let base = c * CELLS * CELLS * CELLS;
        for z in 0..SIDE {
            for y in 0..SIDE {
                let row = SIDE * (y + SIDE * z);
                let cell_row = base + CELLS * (y / CELL + CELLS * (z / CELL));
                for x in 0..SIDE {
                    out[cell_row + x / CELL] += data[row + x];
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty `(l2/2)·‖w‖²` on the weights (not the bias).
    pub l2: f64,
    /// Validation accuracy is checked after every this many epochs.
    pub eval_every: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 500,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2: 1e-4,
            eval_every: 10,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Range { what: "learning_rate", value: self.learning_rate });
        }
        if self.batch_size == 0 {
            return Err(Error::Range { what: "batch_size", value: 0.0 });
        }
        if self.eval_every == 0 {
            return Err(Error::Range { what: "eval_every", value: 0.0 });
        }
        if !(self.l2 >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::Range { what: "l2", value: self.l2 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImgModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: TrainConfig,
}

impl ImgModel {
    pub fn zeros(config: TrainConfig) -> Self {
        ImgModel { weights: alloc::vec![0.0; EMBED_DIM], bias: 0.0, config }
    }

    pub fn logit(&self, embedding: &[f64]) -> f64 {
        self.bias + dot(&self.weights, embedding)
    }

    pub fn predict_embedding(&self, embedding: &[f64]) -> f64 {
        math::sigmoid(self.logit(embedding))
    }

    pub fn predict_prob(&self, sample: &ImageSample) -> Result<f64> {
        Ok(self.predict_embedding(&extract_embedding(sample)?))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pooled embedding with its 0/1 target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSample {
    pub case_id: String,
    pub embedding: Vec<f64>,
    pub label: f64,
}

/// Mean BCE over the batch plus `(l2/2)·‖w‖²`, with its gradient with
/// respect to the weights and bias.
pub fn loss_and_grad(weights: &[f64], bias: f64, batch: &[(&[f64], f64)], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = batch.len() as f64;
    let mut grad = weights.iter().map(|w| l2 * w).collect::<Vec<f64>>();
    let mut grad_b = 0.0;
    let mut loss = 0.5 * l2 * dot(weights, weights);
    for &(x, y) in batch {
        let z = bias + dot(weights, x);
        loss += math::logistic_loss(z, y) / n;
        let r = (math::sigmoid(z) - y) / n;
        grad_b += r;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
    }
    (loss, grad, grad_b)
}

fn accuracy(model: &ImgModel, samples: &[PooledSample]) -> f64 {
    let correct =
        samples.iter().filter(|s| ((model.predict_embedding(&s.embedding) >= 0.5) as u8 as f64) == s.label).count();
    correct as f64 / samples.len() as f64
}

/// Adam on the pooled embeddings with per-epoch augmentation. When `val` is
/// non-empty the weights with the best validation accuracy at the periodic
/// checks are kept (earliest on ties); otherwise the final weights.
pub fn train_baseline(train: &[PooledSample], val: &[PooledSample], cfg: &TrainConfig) -> Result<ImgModel> {
    cfg.validate()?;
    let positives = train.iter().filter(|s| s.label == 1.0).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::DegenerateLabels);
    }
    if let Some(s) = train.iter().chain(val).find(|s| s.embedding.len() != EMBED_DIM) {
        return Err(Error::Shape { expected: EMBED_DIM, found: s.embedding.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ImgModel::zeros(cfg.clone());
    let mut m = alloc::vec![0.0; EMBED_DIM + 1];
    let mut v = alloc::vec![0.0; EMBED_DIM + 1];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, ImgModel)> = None;
    let mut augmented: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            augmented.clear();
            for &i in chunk {
                augmented.push(augment_pooled(&train[i].embedding, &mut rng, cfg.noise_sigma));
            }
            let batch: Vec<(&[f64], f64)> =
                chunk.iter().zip(&augmented).map(|(&i, x)| (x.as_slice(), train[i].label)).collect();
            let (_, grad, grad_b) = loss_and_grad(&model.weights, model.bias, &batch, cfg.l2);
            step += 1;
            let c1 = 1.0 - math::powi(cfg.beta1, step);
            let c2 = 1.0 - math::powi(cfg.beta2, step);
            for (k, g) in grad.iter().copied().chain(core::iter::once(grad_b)).enumerate() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                let update = cfg.learning_rate * (m[k] / c1) / (math::sqrt(v[k] / c2) + cfg.epsilon);
                if k < EMBED_DIM {
                    model.weights[k] -= update;
                } else {
                    model.bias -= update;
                }
            }
        }
        if !val.is_empty() && (epoch + 1) % cfg.eval_every == 0 {
            let acc = accuracy(&model, val);
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.clone()));
            }
        }
    }
    Ok(best.map_or(model, |(_, m)| m))
}

/// Probabilities computed outside this crate, keyed by case id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalProbs {
    pub probs: BTreeMap<String, f64>,
}

impl ExternalProbs {
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        let mut probs = BTreeMap::new();
        for (id, p) in pairs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Range { what: "probability", value: p });
            }
            if probs.insert(id.clone(), p).is_some() {
                return Err(Error::Duplicate(id));
            }
        }
        Ok(ExternalProbs { probs })
    }

    pub fn get(&self, case_id: &str) -> Result<f64> {
        self.probs.get(case_id).copied().ok_or_else(|| Error::MissingProb(case_id.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Geometry, LabelMask, LabelVocabulary, Volume3D};
    use crate::segmentation::{SubregionMasks, ET};
    use alloc::string::ToString;
    use alloc::vec;

    fn bundle_with(n: usize, voxel: [usize; 3]) -> (CaseBundle, MergedSegmentation) {
        let g = Geometry::new([n; 3], [1.0; 3]).unwrap();
        let seq = |v: f64| Volume3D::filled(g.clone(), v).unwrap();
        let mut labels = vec![0u8; n * n * n];
        labels[g.index(voxel[0], voxel[1], voxel[2])] = ET;
        let merged =
            MergedSegmentation::new(LabelMask::new(g.clone(), labels, LabelVocabulary::Subregions).unwrap()).unwrap();
        let masks = SubregionMasks::from_merged(&merged).unwrap();
        let bundle = CaseBundle::new("c".to_string(), [seq(1.0), seq(2.0), seq(3.0), seq(4.0)], masks).unwrap();
        (bundle, merged)
    }

    #[test]
    fn crop_box_margin_and_clipping() {
        let (_, merged) = bundle_with(20, [10, 10, 10]);
        assert_eq!(crop_box(&merged, 5).unwrap(), ([5; 3], [15; 3]));
        let (_, corner) = bundle_with(20, [0, 0, 19]);
        assert_eq!(crop_box(&corner, 5).unwrap(), ([0, 0, 14], [5, 5, 19]));
    }

    #[test]
    fn constant_sequences_normalize_to_zero() {
        let (bundle, merged) = bundle_with(16, [8, 8, 8]);
        let s = crop_and_resize(&bundle, &merged, 5).unwrap();
        assert_eq!(s.channels.len(), CHANNELS);
        assert!(s.channels[..4].iter().all(|c| c.iter().all(|&v| v == 0.0)));
        assert!(s.channels[4..].iter().all(|c| c.iter().all(|&v| v == 0.0 || v == 1.0)));
        assert!(s.channels[4].iter().any(|&v| v == 1.0));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let g = Geometry::new([4; 3], [1.0; 3]).unwrap();
        let merged = MergedSegmentation::new(LabelMask::empty(g, LabelVocabulary::Subregions).unwrap()).unwrap();
        assert_eq!(crop_box(&merged, 5), Err(Error::EmptyRoi));
    }

    #[test]
    fn embedding_of_constant_channel() {
        let mut s = ImageSample::zeros("c");
        s.channels[2].iter_mut().for_each(|v| *v = 3.5);
        let e = extract_embedding(&s).unwrap();
        assert!(e[1024..1536].iter().all(|&v| v == 3.5));
        assert!(e[..1024].iter().chain(&e[1536..]).all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_a_bijection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let d = GeometricDraw::sample(&mut rng);
            let mut seen = vec![false; 64];
            for z in 0..4 {
                for y in 0..4 {
                    for x in 0..4 {
                        let [a, b, c] = d.forward([x, y, z], 4);
                        assert!(!seen[a + 4 * (b + 4 * c)]);
                        seen[a + 4 * (b + 4 * c)] = true;
                    }
                }
            }
        }
    }

    #[test]
    fn external_probs_validation() {
        let ok = ExternalProbs::from_pairs([("a".to_string(), 0.1), ("b".to_string(), 1.0)]).unwrap();
        assert_eq!(ok.get("a"), Ok(0.1));
        assert!(matches!(ok.get("z"), Err(Error::MissingProb(_))));
        assert!(matches!(ExternalProbs::from_pairs([("a".to_string(), 1.5)]), Err(Error::Range { .. })));
        assert!(matches!(
            ExternalProbs::from_pairs([("a".to_string(), 0.5), ("a".to_string(), 0.2)]),
            Err(Error::Duplicate(_))
        ));
    }

    #[test]
    fn zero_model_is_undecided() {
        let m = ImgModel::zeros(TrainConfig::default());
        assert_eq!(m.predict_embedding(&vec![1.0; EMBED_DIM]), 0.5);
    }
}
