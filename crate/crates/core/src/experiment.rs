//! End-to-end comparison on one dataset: baselines, PPR, single-stage and
//! two-stage factor models, and the RankSVM ensemble.

use std::collections::BTreeMap;

use log::info;

use crate::baselines::{MemoryBased, Popularity, SimilarityKind};
use crate::bpr::{FactorModel, Hyperparameters};
use crate::config::RunConfig;
use crate::dataset::{cohorts, prepare, PartitionedDataset, RegistrationRecord};
use crate::ensemble::{sample_pairs, train_ranksvm, EnsembleRecommender, RankSvmModel};
use crate::error::{Error, Result};
use crate::evaluation::{
    candidates, evaluate, paired_test, EvalOptions, EvaluationReport, PairedTest,
};
use crate::network::{build_network_from, TransitionNetwork};
use crate::parallel::{map_indexed, Execution};
use crate::ppr::PprRecommender;
use crate::rng::{stream, Stream};
use crate::synthetic::generate_synthetic;
use crate::two_stage::{train_single_stage_observed, train_two_stage, EarlyStop};

/// Target and validation cohorts, resolved against the data.
pub fn resolve_cohorts(
    cfg: &RunConfig,
    records: &[RegistrationRecord],
) -> Result<(i32, Option<i32>)> {
    let all = cohorts(records);
    let target = match cfg.target_cohort {
        Some(y) => y,
        None => *all
            .last()
            .ok_or_else(|| Error::Validation("no records".into()))?,
    };
    let validation = cfg
        .validation_cohort
        .or_else(|| all.iter().copied().filter(|&y| y < target).max());
    Ok((target, validation))
}

/// Thresholded transition network over the dataset's observed records.
pub fn dataset_network(ds: &PartitionedDataset, threshold: f64) -> Result<TransitionNetwork> {
    build_network_from(ds.observed_records(), &ds.course_index)?.apply_threshold(threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SingleStage,
    TwoStage,
}

pub fn train(
    cfg: &RunConfig,
    ds: &PartitionedDataset,
    method: Method,
    network: Option<&TransitionNetwork>,
) -> Result<FactorModel> {
    let mut opts = cfg.two_stage_options();
    if let Some(patience) = cfg.early_stop_patience {
        opts.early_stop = Some(EarlyStop {
            patience,
            truth: ds.heldout_truth(),
        });
    }
    match method {
        Method::SingleStage => {
            let early = opts.early_stop.as_ref();
            train_single_stage_observed(ds, cfg.hyper, network, early, &mut |_| {})
        }
        Method::TwoStage => train_two_stage(ds, cfg.hyper, network, &opts),
    }
}

/// Fits the RankSVM on the validation cohort: the dataset holds that
/// cohort's final grade out, and the test cohort must already be removed.
pub fn fit_ensemble(cfg: &RunConfig, val: &PartitionedDataset, seed: u64) -> Result<RankSvmModel> {
    let net = dataset_network(val, cfg.threshold)?;
    let hyper = Hyperparameters { seed, ..cfg.hyper };
    let cf = train_two_stage(val, hyper, Some(&net), &cfg.two_stage_options())?;
    let ppr = PprRecommender {
        network: &net,
        dataset: val,
        gamma: cfg.gamma,
        full_history: cfg.ppr_full_history,
    };
    let ens = EnsembleRecommender {
        model: RankSvmModel::with_weight([0.0, 0.0], cfg.reg_c),
        cf: &cf,
        ppr: &ppr,
    };
    let truth = val.heldout_truth();
    let mut rng = stream(seed, Stream::Ensemble);
    let mut pairs = Vec::new();
    for (&s, positives) in &truth {
        let cands = candidates(val, s, cfg.include_taken);
        let Ok(feats) = ens.features(s, &cands) else {
            continue;
        };
        pairs.extend(sample_pairs(&feats, positives, &mut rng));
    }
    train_ranksvm(&pairs, cfg.reg_c, cfg.svm_epochs, seed)
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub seed: u64,
    pub reports: BTreeMap<&'static str, EvaluationReport>,
    pub ensemble_model: RankSvmModel,
    /// Two-stage versus single-stage.
    pub test_two_stage: PairedTest,
    /// Two-stage with the network penalty versus without.
    pub test_cdr: PairedTest,
}

pub const POPULARITY: &str = "popularity";
pub const INTERSECTION: &str = "intersection";
pub const JACCARD: &str = "jaccard";
pub const PPR: &str = "ppr";
pub const BPR: &str = "bpr";
pub const TWO_STAGE: &str = "two-stage";
pub const TWO_STAGE_CDR: &str = "two-stage+cdr";
pub const ENSEMBLE: &str = "ensemble";

impl AblationReport {
    pub fn mean(&self, name: &str) -> f64 {
        self.reports[name].mean_auc
    }
}

fn paired(a: &EvaluationReport, b: &EvaluationReport) -> Result<PairedTest> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .per_student_auc
        .iter()
        .filter_map(|(s, x)| b.per_student_auc.get(s).map(|y| (*x, *y)))
        .unzip();
    paired_test(&xs, &ys)
}

/// Runs every method on the given records.
pub fn run_ablation_on(
    cfg: &RunConfig,
    records: &[RegistrationRecord],
    exec: Execution,
) -> Result<AblationReport> {
    cfg.validate()?;
    let seed = cfg.hyper.seed;
    let (target, validation) = resolve_cohorts(cfg, records)?;
    let validation = validation.ok_or_else(|| {
        Error::Validation("need a cohort before the target cohort to fit the ensemble".into())
    })?;
    let ds = prepare(records, Some(target), cfg.grades, cfg.classify)?;
    let net = dataset_network(&ds, cfg.threshold)?;
    info!(
        "network: {} edges, mean out-degree {:.1}",
        net.num_edges(),
        net.average_out_degree()
    );

    let models = map_indexed(exec, 3, |k| match k {
        0 => train(cfg, &ds, Method::SingleStage, None),
        1 => train(cfg, &ds, Method::TwoStage, None),
        _ => train(cfg, &ds, Method::TwoStage, Some(&net)),
    });
    let mut models = models.into_iter();
    let bpr = models.next().expect("three models")?;
    let two_stage = models.next().expect("three models")?;
    let two_stage_cdr = models.next().expect("three models")?;

    let val_records: Vec<RegistrationRecord> = records
        .iter()
        .filter(|r| r.cohort_year != target)
        .cloned()
        .collect();
    let val = prepare(&val_records, Some(validation), cfg.grades, cfg.classify)?;
    let ensemble_model = fit_ensemble(cfg, &val, seed)?;

    let ppr = PprRecommender {
        network: &net,
        dataset: &ds,
        gamma: cfg.gamma,
        full_history: cfg.ppr_full_history,
    };
    let popularity = Popularity::from_dataset(&ds);
    let inter = MemoryBased::new(&ds, SimilarityKind::Intersection);
    let jac = MemoryBased::new(&ds, SimilarityKind::Jaccard);
    let ens = EnsembleRecommender {
        model: ensemble_model,
        cf: &two_stage_cdr,
        ppr: &ppr,
    };

    let truth = ds.heldout_truth();
    let opts = EvalOptions {
        include_taken: cfg.include_taken,
        exec,
    };
    let mut reports = BTreeMap::new();
    let methods: [(&'static str, &dyn crate::ranking::Recommender); 8] = [
        (POPULARITY, &popularity),
        (INTERSECTION, &inter),
        (JACCARD, &jac),
        (PPR, &ppr),
        (BPR, &bpr),
        (TWO_STAGE, &two_stage),
        (TWO_STAGE_CDR, &two_stage_cdr),
        (ENSEMBLE, &ens),
    ];
    for (name, rec) in methods {
        let report = evaluate(rec, &ds, &truth, opts);
        info!("{}", report.summary(name));
        reports.insert(name, report);
    }
    let test_two_stage = paired(&reports[BPR], &reports[TWO_STAGE])?;
    let test_cdr = paired(&reports[TWO_STAGE], &reports[TWO_STAGE_CDR])?;
    Ok(AblationReport {
        seed,
        reports,
        ensemble_model,
        test_two_stage,
        test_cdr,
    })
}

/// Generates synthetic data with `seed` and runs every method on it.
pub fn run_ablation(cfg: &RunConfig, seed: u64, exec: Execution) -> Result<AblationReport> {
    let records = generate_synthetic(&cfg.synth, seed)?;
    let mut cfg = cfg.clone();
    cfg.hyper.seed = seed;
    run_ablation_on(&cfg, &records, exec)
}
