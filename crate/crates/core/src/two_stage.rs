//! Two-stage training.
//!
//! Stage 1 fits P and Q on FG, AG and FC. Current students never see
//! advanced courses as negatives. Stage 2 freezes Q and refits the current
//! students' rows of P on FC alone, drawing negatives from fundamental
//! courses only.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;

use crate::bpr::{
    init_model, sgd_epoch_observed, FactorModel, Hyperparameters, SamplingScope, SgdRngs, Triple,
    UpdateRule,
};
use crate::dataset::{Block, PartitionedDataset};
use crate::error::{Error, Result};
use crate::evaluation::model_mean_auc;
use crate::network::TransitionNetwork;

#[derive(Clone, Debug)]
pub struct TrainingPlan {
    pub stage1_positives: Vec<(usize, usize)>,
    pub stage2_positives: Vec<(usize, usize)>,
    pub stage1_scope: SamplingScope,
    pub stage2_scope: SamplingScope,
}

impl TrainingPlan {
    pub fn new(ds: &PartitionedDataset) -> Result<Self> {
        let all: Vec<usize> = (0..ds.num_courses()).collect();
        let fundamental = ds.fundamental_courses();
        let pool_of: Vec<usize> = (0..ds.num_students())
            .map(|s| usize::from(ds.is_current(s)))
            .collect();

        let stage1_positives = ds.positives(&[Block::FG, Block::AG, Block::FC]);
        let stage2_positives = ds.positives(&[Block::FC]);
        let stage1_scope = SamplingScope::new(
            UpdateRule::StudentAndCourses,
            vec![all, fundamental.clone()],
            pool_of.clone(),
            &stage1_positives,
        )?;
        let stage2_scope = SamplingScope::new(
            UpdateRule::StudentOnly,
            vec![Vec::new(), fundamental],
            pool_of,
            &stage2_positives,
        )?;
        Ok(TrainingPlan {
            stage1_positives,
            stage2_positives,
            stage1_scope,
            stage2_scope,
        })
    }
}

/// Stops a stage once mean held-out AUC has not improved for `patience`
/// epochs, restoring the best model seen.
#[derive(Clone, Debug)]
pub struct EarlyStop {
    pub patience: usize,
    pub truth: BTreeMap<usize, BTreeSet<usize>>,
}

#[derive(Clone, Debug, Default)]
pub struct TwoStageOptions {
    /// Defaults to the stage-1 learning rate.
    pub stage2_alpha: Option<f64>,
    /// Defaults to the stage-1 epoch count.
    pub stage2_epochs: Option<usize>,
    /// Redraw current students' P rows before stage 2 instead of continuing
    /// from stage 1.
    pub reinit_current: bool,
    pub early_stop: Option<EarlyStop>,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    model: &mut FactorModel,
    ds: &PartitionedDataset,
    positives: &[(usize, usize)],
    scope: &SamplingScope,
    network: Option<&TransitionNetwork>,
    rngs: &mut SgdRngs,
    epochs: usize,
    early: Option<&EarlyStop>,
    observer: &mut dyn FnMut(Triple),
) -> Result<()> {
    let mut best: Option<(f64, FactorModel)> = None;
    let mut stale = 0;
    for epoch in 0..epochs {
        let l = sgd_epoch_observed(model, positives, scope, network, rngs, observer)?;
        debug!("epoch {epoch}: loss {l:.4}");
        let Some(stop) = early else { continue };
        let auc = model_mean_auc(model, ds, &stop.truth);
        match &best {
            Some((b, _)) if auc <= *b => {
                stale += 1;
                if stale >= stop.patience {
                    debug!("early stop after epoch {epoch}");
                    break;
                }
            }
            _ => {
                best = Some((auc, model.clone()));
                stale = 0;
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(())
}

pub fn train_single_stage(
    ds: &PartitionedDataset,
    hyper: Hyperparameters,
    network: Option<&TransitionNetwork>,
) -> Result<FactorModel> {
    train_single_stage_observed(ds, hyper, network, None, &mut |_| {})
}

pub fn train_single_stage_observed(
    ds: &PartitionedDataset,
    hyper: Hyperparameters,
    network: Option<&TransitionNetwork>,
    early: Option<&EarlyStop>,
    observer: &mut dyn FnMut(Triple),
) -> Result<FactorModel> {
    let plan = TrainingPlan::new(ds)?;
    let mut model = init_model(ds.num_students(), ds.num_courses(), hyper)?;
    let mut rngs = SgdRngs::new(hyper.seed);
    run_stage(
        &mut model,
        ds,
        &plan.stage1_positives,
        &plan.stage1_scope,
        network,
        &mut rngs,
        hyper.epochs,
        early,
        observer,
    )?;
    Ok(model)
}

pub fn train_two_stage(
    ds: &PartitionedDataset,
    hyper: Hyperparameters,
    network: Option<&TransitionNetwork>,
    opts: &TwoStageOptions,
) -> Result<FactorModel> {
    train_two_stage_observed(ds, hyper, network, opts, &mut |_| {})
}

/// [`train_two_stage`], reporting every sampled triple of both stages.
pub fn train_two_stage_observed(
    ds: &PartitionedDataset,
    hyper: Hyperparameters,
    network: Option<&TransitionNetwork>,
    opts: &TwoStageOptions,
    observer: &mut dyn FnMut(Triple),
) -> Result<FactorModel> {
    let plan = TrainingPlan::new(ds)?;
    if plan.stage2_positives.is_empty() {
        return Err(Error::Training(
            "FC block is empty: no current students to recommend to".into(),
        ));
    }
    let mut model = init_model(ds.num_students(), ds.num_courses(), hyper)?;
    let mut rngs = SgdRngs::new(hyper.seed);
    let early = opts.early_stop.as_ref();
    run_stage(
        &mut model,
        ds,
        &plan.stage1_positives,
        &plan.stage1_scope,
        network,
        &mut rngs,
        hyper.epochs,
        early,
        observer,
    )?;

    if opts.reinit_current {
        let fresh = init_model(ds.num_students(), ds.num_courses(), hyper)?;
        for s in ds.current_indices() {
            model.p.row_mut(s).assign(&fresh.p.row(s));
        }
    }
    let stage1 = model.hyper;
    model.hyper.alpha = opts.stage2_alpha.unwrap_or(hyper.alpha);
    model.hyper.validate()?;
    // Q cannot move in stage 2, so the network penalty has nothing to act on
    run_stage(
        &mut model,
        ds,
        &plan.stage2_positives,
        &plan.stage2_scope,
        None,
        &mut rngs,
        opts.stage2_epochs.unwrap_or(hyper.epochs),
        early,
        observer,
    )?;
    model.hyper = stage1;
    Ok(model)
}
