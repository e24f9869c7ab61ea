//! Adam training loop with a geometric learning-rate decay, plus evaluation.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{shuffled_indices, PatchPair};
use crate::error::{Error, Result};
use crate::metrics::{ImageMetrics, MetricsReport};
use crate::model::{init_params, save_checkpoint, ModelParams, ParamGrads, DEFAULT_FILTER_COUNT};
use crate::mosaic::{HyperCube, MosaicImage, MosaicPattern};
use crate::scalar::Scalar;
use crate::tensor::{mse_backward, mse_loss, Tensor};

/// Which loss picks the returned parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Lowest loss on a validation split carved from the training pairs.
    #[default]
    HeldOut,
    /// Lowest mean training loss of an epoch.
    Training,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_initial: f64,
    pub lr_floor: f64,
    /// Epoch at which the decay reaches `lr_floor`.
    pub decay_epochs: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables.
    pub checkpoint_interval: usize,
    pub patch_size: usize,
    pub val_fraction: f64,
    /// Global gradient-norm clip; `None` trains unclipped.
    pub grad_clip: Option<f64>,
    pub selection: Selection,
    pub filter_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_initial: 1e-3,
            lr_floor: 1e-4,
            decay_epochs: 30_000,
            max_epochs: 30_000,
            batch_size: 20,
            seed: 42,
            checkpoint_interval: 0,
            patch_size: 100,
            val_fraction: 0.1,
            grad_clip: Some(10.0),
            selection: Selection::HeldOut,
            filter_count: DEFAULT_FILTER_COUNT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lr_floor > 0.0 && self.lr_floor <= self.lr_initial) {
            return bad(format!("need 0 < lr_floor <= lr_initial, got {} and {}", self.lr_floor, self.lr_initial));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        if self.selection == Selection::HeldOut && self.val_fraction == 0.0 {
            return bad("held-out selection needs a positive val_fraction".into());
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

/// Geometric decay from `lr_initial` to `lr_floor` over `decay_epochs`, then flat.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch >= cfg.decay_epochs {
        return cfg.lr_floor;
    }
    let ratio = cfg.lr_floor / cfg.lr_initial;
    (cfg.lr_initial * ratio.powf(epoch as f64 / cfg.decay_epochs as f64)).max(cfg.lr_floor)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments per parameter block, kept in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(block_sizes: &[usize]) -> Self {
        Self {
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn for_params<T: Scalar>(p: &ModelParams<T>) -> Self {
        Self::new(&p.blocks().iter().map(|b| b.len()).collect::<Vec<_>>())
    }

    /// One bias-corrected Adam update of every block.
    pub fn step<T: Scalar>(&mut self, params: &mut [&mut Vec<T>], grads: &[Vec<T>], lr: f64) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != self.m.len()
            || params.iter().zip(grads).zip(&self.m).any(|((p, g), m)| p.len() != m.len() || g.len() != m.len())
        {
            return Err(Error::ShapeMismatch("Adam state, parameters and gradients differ in layout".into()));
        }
        for (bi, g) in grads.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("block {bi}, element {i}")));
            }
        }
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for (bi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[bi], &mut self.v[bi]);
            for i in 0..g.len() {
                let gi = g[i].f64();
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                p[i] = T::of(p[i].f64() - update);
            }
            if m.iter().chain(v.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("Adam moments of block {bi}")));
            }
        }
        Ok(())
    }
}

pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ParamGrads<T>,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    state.step(&mut params.blocks_mut(), &grads.blocks, lr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossLog {
    /// Mean training loss of the initial parameters, before any update.
    pub initial_train_mse: f64,
    pub rows: Vec<LossRow>,
}

impl LossLog {
    /// `epoch,lr,train_mse,val_mse`, one row per epoch; empty `val_mse` when
    /// no validation split exists.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_mse,val_mse\n");
        for r in &self.rows {
            let val = r.val_mse.map(|v| format!("{v:.9e}")).unwrap_or_default();
            writeln!(s, "{},{:.9e},{:.9e},{val}", r.epoch, r.lr, r.train_mse).expect("string write");
        }
        s
    }

    pub fn final_train_mse(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_mse)
    }
}

pub struct TrainOutcome<T> {
    /// Parameters at the selected epoch.
    pub best: ModelParams<T>,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: ModelParams<T>,
    pub log: LossLog,
    pub train_count: usize,
    pub val_count: usize,
}

fn stack<T: Scalar>(pairs: &[&PatchPair<T>]) -> Result<(Tensor<T>, Tensor<T>)> {
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let (w, h, l) = (first.mosaic.width(), first.mosaic.height(), first.truth.bands());
    let mut x = Vec::with_capacity(pairs.len() * w * h);
    let mut y = Vec::with_capacity(pairs.len() * l * w * h);
    for p in pairs {
        if p.mosaic.width() != w || p.mosaic.height() != h || p.truth.width() != w || p.truth.height() != h {
            return Err(Error::ShapeMismatch(format!("pair {} differs in size from the batch", p.id)));
        }
        p.mosaic.require_aligned()?;
        x.extend_from_slice(p.mosaic.data());
        y.extend_from_slice(p.truth.data());
    }
    Ok((Tensor::new(vec![pairs.len(), 1, h, w], x)?, Tensor::new(vec![pairs.len(), l, h, w], y)?))
}

/// Mean per-sample MSE of `params` over `pairs`, evaluated in batches.
pub fn dataset_mse<T: Scalar>(params: &ModelParams<T>, pairs: &[&PatchPair<T>], batch: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(batch.max(1)) {
        let (x, y) = stack(chunk)?;
        total += mse_loss(&params.forward(&x)?, &y)? * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Splits `n` pair indices into (train, validation) with a seeded shuffle.
pub fn holdout_split(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5a11);
    let idx = shuffled_indices(n, &mut rng);
    let n_val = if val_fraction > 0.0 { ((n as f64 * val_fraction).round() as usize).clamp(1, n.saturating_sub(1)) } else { 0 };
    let (val, train) = idx.split_at(n_val);
    let (mut train, mut val) = (train.to_vec(), val.to_vec());
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Trains on `pairs`, starting from `init` or a fresh seeded initialisation.
/// `on_epoch` sees every logged row as it is produced.
pub fn train<T: Scalar>(
    pairs: &[PatchPair<T>],
    pattern: &MosaicPattern,
    cfg: &TrainConfig,
    init: Option<ModelParams<T>>,
    checkpoint_dir: Option<&Path>,
    mut on_epoch: impl FnMut(&LossRow),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(p) = pairs.iter().find(|p| p.mosaic.width() != cfg.patch_size || p.mosaic.height() != cfg.patch_size) {
        return Err(Error::ShapeMismatch(format!(
            "pair {} is {}x{}, config expects {}px patches",
            p.id,
            p.mosaic.width(),
            p.mosaic.height(),
            cfg.patch_size
        )));
    }
    let (train_idx, val_idx) = if cfg.selection == Selection::HeldOut || cfg.val_fraction > 0.0 {
        holdout_split(pairs.len(), cfg.val_fraction, cfg.seed)
    } else {
        ((0..pairs.len()).collect(), vec![])
    };
    if cfg.selection == Selection::HeldOut && (val_idx.is_empty() || train_idx.is_empty()) {
        return Err(Error::InvalidConfig("held-out selection needs at least two training pairs".into()));
    }
    let train_set: Vec<&PatchPair<T>> = train_idx.iter().map(|&i| &pairs[i]).collect();
    let val_set: Vec<&PatchPair<T>> = val_idx.iter().map(|&i| &pairs[i]).collect();

    let mut params = match init {
        Some(p) => {
            if p.pattern() != pattern {
                return Err(Error::InvalidPattern("initial parameters use a different pattern".into()));
            }
            p
        }
        None => init_params(cfg.seed, cfg.filter_count, pattern.clone())?,
    };
    params.meta.provenance.seed = cfg.seed;
    let start_epochs = params.meta.provenance.epochs;
    let mut adam = AdamState::for_params(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = LossLog { initial_train_mse: dataset_mse(&params, &train_set, cfg.batch_size)?, rows: vec![] };
    if !log.initial_train_mse.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut best = (f64::INFINITY, 0usize, params.clone());

    for epoch in 0..cfg.max_epochs {
        let lr = lr_schedule(epoch, cfg);
        let order = shuffled_indices(train_set.len(), &mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PatchPair<T>> = chunk.iter().map(|&i| train_set[i]).collect();
            let (x, y) = stack(&batch)?;
            let trace = params.forward_traced(&x)?;
            let loss = mse_loss(&trace.output, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            sum += loss * batch.len() as f64;
            let mut grads = params.backward(&trace, &mse_backward(&trace.output, &y)?)?;
            if let Some(clip) = cfg.grad_clip {
                let norm = grads.global_norm();
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam_step(&mut params, &grads, &mut adam, lr)?;
        }
        let train_mse = sum / train_set.len() as f64;
        let val_mse = if val_set.is_empty() { None } else { Some(dataset_mse(&params, &val_set, cfg.batch_size)?) };
        if val_mse.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        params.meta.provenance.epochs = start_epochs + epoch + 1;
        let score = match cfg.selection {
            Selection::HeldOut => val_mse.expect("validation split exists"),
            Selection::Training => train_mse,
        };
        if score < best.0 {
            best = (score, epoch, params.clone());
        }
        let row = LossRow { epoch, lr, train_mse, val_mse };
        on_epoch(&row);
        log.rows.push(row);
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0 {
                std::fs::create_dir_all(dir)?;
                save_checkpoint(&params, &dir.join(format!("epoch_{:06}.ckpt", epoch + 1)))?;
            }
        }
    }
    let (_, best_epoch, best_params) = best;
    Ok(TrainOutcome {
        best: if cfg.max_epochs == 0 { params.clone() } else { best_params },
        best_epoch,
        last: params,
        log,
        train_count: train_set.len(),
        val_count: val_set.len(),
    })
}

/// Scores any demosaicer on `(mosaic, truth)` pairs.
pub fn evaluate_with<T: Scalar>(
    method: &str,
    pairs: &[&PatchPair<T>],
    max_val: f64,
    mut demosaic: impl FnMut(&MosaicImage<T>) -> Result<HyperCube<T>>,
) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let images = pairs
        .iter()
        .map(|p| ImageMetrics::compute(&p.id, &demosaic(&p.mosaic)?, &p.truth, max_val))
        .collect::<Result<_>>()?;
    MetricsReport::from_images(method, max_val, images)
}

pub fn evaluate<T: Scalar>(params: &ModelParams<T>, pairs: &[&PatchPair<T>], max_val: f64) -> Result<MetricsReport> {
    evaluate_with("net", pairs, max_val, |mi| params.demosaic(mi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{SourceKind, Split};
    use crate::mosaic::{cube_to_mosaic, SamplingMode};
    use rand::Rng;

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 1e-3);
        assert_eq!(lr_schedule(30_000, &cfg), 1e-4);
        assert_eq!(lr_schedule(45_000, &cfg), 1e-4);
        assert!((lr_schedule(15_000, &cfg) - (1e-3f64 * 1e-4).sqrt()).abs() < 1e-9);
        let lrs: Vec<f64> = (0..31_000).step_by(7).map(|e| lr_schedule(e, &cfg)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert!(lrs.iter().all(|&l| (1e-4..=1e-3).contains(&l)));
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut s = AdamState::new(&[1]);
        let mut theta = vec![0.5f64];
        s.step(&mut [&mut theta], &[vec![0.0]], 1e-3).unwrap();
        assert_eq!(theta[0], 0.5);
        let mut s = AdamState::new(&[1]);
        s.step(&mut [&mut theta], &[vec![1.0]], 1e-3).unwrap();
        assert!((theta[0] - (0.5 - 1e-3)).abs() < 1e-10);
        assert!(s.v[0][0] >= 0.0);
        assert!(matches!(s.step(&mut [&mut theta], &[vec![f64::NAN]], 1e-3), Err(Error::NonFiniteGradient(_))));
        assert!(matches!(s.step(&mut [&mut theta], &[vec![1.0, 2.0]], 1e-3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn adam_on_a_quadratic() {
        // independent scalar transcription of the update rule
        let (mut th, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut reference = vec![];
        for t in 1..=200 {
            let g = 2.0 * th;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            th -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            reference.push(th);
        }
        let mut s = AdamState::new(&[1]);
        let mut theta = vec![1.0f64];
        let mut traj = vec![];
        for _ in 0..200 {
            let g = vec![2.0 * theta[0]];
            s.step(&mut [&mut theta], &[g], 0.1).unwrap();
            traj.push(theta[0]);
        }
        for (a, b) in traj.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(theta[0].abs() < 1e-2);
        // the iterate rings around the minimum; its envelope shrinks
        let env: Vec<f64> = traj[40..].chunks(40).map(|c| c.iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect();
        assert!(env.windows(2).all(|w| w[1] < w[0]), "{env:?}");
    }

    fn pair(id: usize, mosaic_fill: impl Fn(usize, usize) -> f32, truth: HyperCube<f32>) -> PatchPair<f32> {
        let pattern = MosaicPattern::default_4x4();
        let mosaic = MosaicImage::from_fn(truth.width(), truth.height(), pattern, |x, y| mosaic_fill(x, y)).unwrap();
        PatchPair {
            id: format!("p{id}"),
            source_id: "s".into(),
            split: Split::Train,
            offset: (0, 0),
            kind: SourceKind::Synthetic,
            mosaic,
            truth,
            divergence_rms: 0.0,
        }
    }

    #[test]
    fn overfits_a_constant_target() {
        let pattern = MosaicPattern::default_4x4();
        let truth = HyperCube::from_fn(16, 16, pattern.wavelengths_nm().to_vec(), |_, _, _| 0.5f32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise: Vec<f32> = (0..256).map(|_| rng.random()).collect();
        let pairs = vec![pair(0, |x, y| noise[y * 16 + x], truth)];
        let cfg = TrainConfig {
            max_epochs: 2000,
            decay_epochs: 2000,
            patch_size: 16,
            val_fraction: 0.0,
            selection: Selection::Training,
            filter_count: 32,
            seed: 3,
            ..TrainConfig::default()
        };
        let out = train(&pairs, &pattern, &cfg, None, None, |_| {}).unwrap();
        let first = out.log.initial_train_mse;
        let last = dataset_mse(&out.best, &[&pairs[0]], 1).unwrap();
        assert!(last < first * 1e-4, "{first} -> {last}");
        for r in &out.log.rows {
            assert_eq!(r.lr, lr_schedule(r.epoch, &cfg));
        }
    }

    fn tiny_corpus() -> Vec<PatchPair<f32>> {
        let pattern = MosaicPattern::default_4x4();
        (0..6)
            .map(|k| {
                let truth = HyperCube::from_fn(16, 16, pattern.wavelengths_nm().to_vec(), |b, x, y| {
                    ((b + x * (k + 1) + y) % 11) as f32 / 12.0
                })
                .unwrap();
                let mi = cube_to_mosaic(&truth, &pattern, SamplingMode::Simulate).unwrap();
                pair(k, |x, y| mi.get(x, y), truth)
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic() {
        let pairs = tiny_corpus();
        let cfg = TrainConfig {
            max_epochs: 4,
            decay_epochs: 4,
            patch_size: 16,
            batch_size: 2,
            val_fraction: 0.34,
            filter_count: 32,
            ..TrainConfig::default()
        };
        let pattern = MosaicPattern::default_4x4();
        let a = train(&pairs, &pattern, &cfg, None, None, |_| {}).unwrap();
        let b = train(&pairs, &pattern, &cfg, None, None, |_| {}).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.best, b.best);
        assert_eq!((a.train_count, a.val_count), (4, 2));
        assert!(a.log.rows.iter().all(|r| r.val_mse.is_some()));
        assert_eq!(a.log.to_csv().lines().next(), Some("epoch,lr,train_mse,val_mse"));
        let c = train(&pairs, &pattern, &TrainConfig { seed: 9, ..cfg }, None, None, |_| {}).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn checkpoints_written_on_interval() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            max_epochs: 4,
            patch_size: 16,
            batch_size: 3,
            checkpoint_interval: 2,
            filter_count: 32,
            ..TrainConfig::default()
        };
        train(&tiny_corpus(), &MosaicPattern::default_4x4(), &cfg, None, Some(dir.path()), |_| {}).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["epoch_000002.ckpt", "epoch_000004.ckpt"]);
    }

    #[test]
    fn config_and_dataset_errors() {
        let pattern = MosaicPattern::default_4x4();
        let cfg = TrainConfig { patch_size: 16, filter_count: 32, ..TrainConfig::default() };
        assert!(matches!(train::<f32>(&[], &pattern, &cfg, None, None, |_| {}), Err(Error::EmptyDataset)));
        let bad = TrainConfig { lr_floor: 1e-2, ..cfg.clone() };
        assert!(matches!(train(&tiny_corpus(), &pattern, &bad, None, None, |_| {}), Err(Error::InvalidConfig(_))));
        let wrong = TrainConfig { patch_size: 32, ..cfg };
        assert!(matches!(train(&tiny_corpus(), &pattern, &wrong, None, None, |_| {}), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn evaluation_report() {
        let pairs = tiny_corpus();
        let refs: Vec<&PatchPair<f32>> = pairs.iter().collect();
        let perfect = evaluate_with("oracle", &refs, 1.0, |mi| {
            Ok(pairs.iter().find(|p| p.mosaic.data() == mi.data()).unwrap().truth.clone())
        })
        .unwrap();
        assert_eq!(perfect.mean_psnr, 100.0);
        assert!((perfect.mean_ssim - 1.0).abs() < 1e-9);
        let p = init_params::<f32>(0, 32, MosaicPattern::default_4x4()).unwrap();
        let r = evaluate(&p, &refs, 1.0).unwrap();
        assert_eq!(r.images.len(), 6);
        assert!(r.images.iter().all(|m| m.psnr_bands.len() == 16));
        let mean = r.images.iter().map(|m| m.psnr).sum::<f64>() / 6.0;
        assert!((r.mean_psnr - mean).abs() < 1e-9);
        assert!(matches!(evaluate(&p, &[], 1.0), Err(Error::EmptyDataset)));
    }
}
