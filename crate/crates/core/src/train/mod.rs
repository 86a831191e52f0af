//! Optimization loop: batch assembly, Adam steps, early stopping on
//! validation AUC, checkpointing, and ablation switches.
//!
//! All randomness is drawn from streams derived from (seed, epoch, role), so
//! a run resumed from epoch k replays epochs k+1.. bit-for-bit, and the
//! interaction sampler never shares a stream with the per-kind samplers.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamHyper, AdamState, Bindings};
use crate::data::{sample_kind_batch, stream_rng, HeteroDataset, InteractionIndex, Split};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::kernel::median_bandwidth;
use crate::model::{build_loss_graph, BandwidthConfig, BatchBundle, LossSpec, ModelParams};
use crate::tensor::DenseMatrix;

/// Training hyperparameters and ablation switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Per-kind sample count for the alignment/topology terms.
    pub align_batch: usize,
    pub lr: f64,
    pub max_epochs: usize,
    /// Consecutive non-improving validation epochs before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Drop the alignment term (its weight becomes 0).
    pub disable_alignment: bool,
    /// Drop the topology term.
    pub disable_topology: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            align_batch: 128,
            lr: 0.001,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            disable_alignment: false,
            disable_topology: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.align_batch == 0 || self.max_epochs == 0 {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} must be in 1..=max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Pre-update batch loss terms of one step.
#[derive(Clone, Copy, Debug)]
pub struct StepLosses {
    pub c: f64,
    pub a: f64,
    pub t: f64,
    pub l: f64,
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub c: f64,
    pub a: f64,
    pub t: f64,
    pub l: f64,
    pub val_auc: f64,
    pub best_val_auc: f64,
    pub wall_ms: u64,
}

/// Result of a fit: best and last checkpoints, the per-epoch log, and the
/// diagnostic when training aborted on a numeric-health failure.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub abort: Option<String>,
}

fn effective_weights(params: &ModelParams, cfg: &TrainConfig) -> (f64, f64) {
    (
        if cfg.disable_alignment {
            0.0
        } else {
            params.config.alpha
        },
        if cfg.disable_topology {
            0.0
        } else {
            params.config.beta
        },
    )
}

/// One optimizer step: forward, backward, Adam update. The returned losses
/// are the pre-update batch values; disabled terms report zero.
pub fn step(
    ds: &HeteroDataset,
    index: &InteractionIndex,
    params: &mut ModelParams,
    adam: &mut AdamState,
    bundle: &BatchBundle,
    spec: &LossSpec,
) -> Result<StepLosses> {
    let mut sg = build_loss_graph(ds, index, params, bundle, spec)?;
    sg.graph.forward(&params.set, &Bindings::new())?;
    let (c, a, t, l) = sg.term_values()?;
    sg.graph.backward(sg.loss, &params.set)?;
    let grads = sg.graph.param_gradients(&params.set);
    adam_step(&mut params.set, &grads, adam)?;
    Ok(StepLosses { c, a, t, l })
}

/// Resolve the kernel bandwidth: a fixed value passes through; the median
/// heuristic runs on the first per-kind batches mapped through the current
/// parameters, and the resolved value is frozen into the model config.
fn resolve_bandwidth(
    ds: &HeteroDataset,
    params: &mut ModelParams,
    cfg: &TrainConfig,
) -> Result<f64> {
    match params.config.bandwidth {
        BandwidthConfig::Fixed(v) => Ok(v),
        BandwidthConfig::Median => {
            let mut sets: Vec<DenseMatrix> = Vec::with_capacity(ds.num_kinds());
            for p in 0..ds.num_kinds() {
                let mut rng = stream_rng(cfg.seed, 1 + p as u64);
                let items = sample_kind_batch(&mut rng, ds, p as u16, cfg.align_batch)?;
                let catalog = &ds.catalogs[p];
                let encoded = catalog.schema.encode_matrix(
                    items
                        .iter()
                        .map(|&i| catalog.items[i as usize].attrs.as_slice()),
                )?;
                sets.push(params.map_items(p as u16, &encoded)?);
            }
            let lambda = median_bandwidth(&sets)?;
            params.config.bandwidth = BandwidthConfig::Fixed(lambda);
            Ok(lambda)
        }
    }
}

/// Train from scratch. See [`resume`] for continuing a checkpoint.
pub fn fit(ds: &HeteroDataset, params: ModelParams, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let adam = AdamState::new(
        &params.set,
        AdamHyper {
            lr: cfg.lr,
            ..AdamHyper::default()
        },
    );
    run(ds, params, adam, cfg, 1, f64::NEG_INFINITY, 0)
}

/// Continue training from a checkpoint with its stored configuration. The
/// derived per-epoch streams make the trajectory identical to the
/// uninterrupted run.
pub fn resume(ds: &HeteroDataset, ck: &Checkpoint) -> Result<FitOutcome> {
    let cfg = ck.train_config.clone();
    cfg.validate()?;
    let params = ck.model()?;
    let (alpha, _) = effective_weights(&params, &cfg);
    if alpha != 0.0 && matches!(params.config.bandwidth, BandwidthConfig::Median) {
        return Err(Error::Checkpoint(
            "checkpoint carries an unresolved bandwidth".into(),
        ));
    }
    run(
        ds,
        params,
        ck.adam.clone(),
        &cfg,
        ck.epoch + 1,
        ck.best_val_auc,
        ck.best_epoch,
    )
}

fn run(
    ds: &HeteroDataset,
    mut params: ModelParams,
    mut adam: AdamState,
    cfg: &TrainConfig,
    start_epoch: usize,
    mut best_auc: f64,
    mut best_epoch: usize,
) -> Result<FitOutcome> {
    if ds.split_len(Split::Train) == 0 {
        return Err(Error::Data("train split is empty".into()));
    }
    if ds.split_len(Split::Val) == 0 {
        return Err(Error::Data("validation split is empty".into()));
    }
    let index = InteractionIndex::build(ds);
    let (alpha, beta) = effective_weights(&params, cfg);
    let bandwidth = if alpha != 0.0 {
        resolve_bandwidth(ds, &mut params, cfg)?
    } else {
        1.0 // alignment skipped; value never used
    };
    let spec = LossSpec {
        with_classification: true,
        alpha,
        beta,
        bandwidth,
    };
    let needs_kind_samples = alpha != 0.0 || beta != 0.0;
    let train_ids = ds.split_indices(Split::Train);
    let kinds = ds.num_kinds();

    let mut log: Vec<EpochRecord> = Vec::new();
    let mut abort = None;
    let mut best_snapshot: Option<(ParamsSnapshot, usize)> = None;
    let mut reached = start_epoch.saturating_sub(1);

    'epochs: for epoch in start_epoch..=cfg.max_epochs {
        let t0 = Instant::now();
        let mut order = train_ids.clone();
        order.shuffle(&mut stream_rng(cfg.seed, epoch as u64 * 1024));
        let mut kind_rngs: Vec<_> = (0..kinds)
            .map(|p| stream_rng(cfg.seed, epoch as u64 * 1024 + 1 + p as u64))
            .collect();

        let mut sums = StepLosses {
            c: 0.0,
            a: 0.0,
            t: 0.0,
            l: 0.0,
        };
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let bundle = BatchBundle {
                interactions: chunk.iter().map(|&i| ds.interactions[i]).collect(),
                kind_items: if needs_kind_samples {
                    (0..kinds)
                        .map(|p| sample_kind_batch(&mut kind_rngs[p], ds, p as u16, cfg.align_batch))
                        .collect::<Result<Vec<_>>>()?
                } else {
                    Vec::new()
                },
            };
            match step(ds, &index, &mut params, &mut adam, &bundle, &spec) {
                Ok(losses) => {
                    sums.c += losses.c;
                    sums.a += losses.a;
                    sums.t += losses.t;
                    sums.l += losses.l;
                    steps += 1;
                }
                Err(Error::NumericHealth(msg)) => {
                    abort = Some(format!("epoch {epoch}: {msg}"));
                    reached = epoch;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        reached = epoch;
        let div = steps.max(1) as f64;
        let (c, a, t, l) = (sums.c / div, sums.a / div, sums.t / div, sums.l / div);

        let val_auc = evaluate(&params, ds, &index, Split::Val, false)?.overall_auc;
        if val_auc > best_auc {
            best_auc = val_auc;
            best_epoch = epoch;
            best_snapshot = Some(((params.set.clone(), adam.clone()), epoch));
        }
        log.push(EpochRecord {
            epoch,
            c,
            a,
            t,
            l,
            val_auc,
            best_val_auc: best_auc,
            wall_ms: t0.elapsed().as_millis() as u64,
        });

        if epoch == start_epoch {
            warn_on_scale_mismatch(c, alpha * a, beta * t);
        }
        if epoch >= best_epoch + cfg.patience {
            break;
        }
    }

    let make = |set: crate::autodiff::ParamSet, adam: AdamState, epoch: usize| Checkpoint {
        model_config: params.config.clone(),
        dims: params.dims.clone(),
        train_config: cfg.clone(),
        epoch,
        best_val_auc: best_auc,
        best_epoch,
        params: set,
        adam,
    };
    let last = make(params.set.clone(), adam.clone(), reached);
    let best = match best_snapshot {
        Some(((set, adam), epoch)) => make(set, adam, epoch),
        None => last.clone(),
    };
    Ok(FitOutcome {
        best,
        last,
        log,
        abort,
    })
}

type ParamsSnapshot = (crate::autodiff::ParamSet, AdamState);

/// Soft guideline: the weighted loss terms should sit within two orders of
/// magnitude of one another. Logged, never fatal.
fn warn_on_scale_mismatch(c: f64, weighted_a: f64, weighted_t: f64) {
    let active: Vec<f64> = [c, weighted_a, weighted_t]
        .into_iter()
        .filter(|v| *v > 0.0)
        .collect();
    if active.len() < 2 {
        return;
    }
    let max = active.iter().cloned().fold(f64::MIN, f64::max);
    let min = active.iter().cloned().fold(f64::MAX, f64::min);
    if max / min > 100.0 {
        log::warn!(
            "loss terms span more than two orders of magnitude after the first epoch \
             (C={c:.3e}, alpha*A={weighted_a:.3e}, beta*T={weighted_t:.3e}); \
             consider retuning alpha/beta"
        );
    }
}
