//! Linear RankSVM over two per-student normalized features: the factor
//! model score and the PPR mass.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ranking::{Recommender, ScoredRanking};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub course: usize,
    pub cf: f64,
    pub ppr: f64,
}

impl FeatureVector {
    fn as_array(&self) -> [f64; 2] {
        [self.cf, self.ppr]
    }
}

/// Rescales to [0, 1]; a constant column maps to 0.5.
fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; values.len()]
    }
}

/// One feature vector per candidate. Every candidate needs a CF score;
/// candidates missing from the PPR ranking get raw mass 0.
pub fn build_features(
    cf: &ScoredRanking,
    ppr: &ScoredRanking,
    candidates: &[usize],
) -> Result<Vec<FeatureVector>> {
    if candidates.is_empty() {
        return Err(Error::Validation("empty candidate set".into()));
    }
    let cf_map = cf.score_map();
    let ppr_map = ppr.score_map();
    let raw_cf: Vec<f64> = candidates
        .iter()
        .map(|c| {
            cf_map
                .get(c)
                .copied()
                .ok_or_else(|| Error::Validation(format!("course {c} has no CF score")))
        })
        .collect::<Result<_>>()?;
    let raw_ppr: Vec<f64> = candidates
        .iter()
        .map(|c| ppr_map.get(c).copied().unwrap_or(0.0))
        .collect();
    Ok(features_from_raw(candidates, &raw_cf, &raw_ppr))
}

fn features_from_raw(candidates: &[usize], cf: &[f64], ppr: &[f64]) -> Vec<FeatureVector> {
    let (cf, ppr) = (min_max(cf), min_max(ppr));
    candidates
        .iter()
        .zip(cf.into_iter().zip(ppr))
        .map(|(&course, (cf, ppr))| FeatureVector { course, cf, ppr })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSvmModel {
    pub weight: [f64; 2],
    pub reg_c: f64,
    pub trained: bool,
}

impl RankSvmModel {
    /// A fixed, already-trained weight vector.
    pub fn with_weight(weight: [f64; 2], reg_c: f64) -> Self {
        RankSvmModel {
            weight,
            reg_c,
            trained: true,
        }
    }

    pub fn decision(&self, x: &FeatureVector) -> f64 {
        dot(self.weight, x.as_array())
    }

    pub fn to_line(&self) -> String {
        format!(
            "ocrank-ensemble v1 {} {} {}",
            self.weight[0], self.weight[1], self.reg_c
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 || f[0] != "ocrank-ensemble" || f[1] != "v1" {
            return Err(Error::Validation(format!("bad ensemble line `{line}`")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad number `{s}` in ensemble line")))
        };
        Ok(RankSvmModel::with_weight(
            [num(f[2])?, num(f[3])?],
            num(f[4])?,
        ))
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn diff(pair: &(FeatureVector, FeatureVector)) -> [f64; 2] {
    [pair.0.cf - pair.1.cf, pair.0.ppr - pair.1.ppr]
}

/// (1/2)|w|^2 + reg_c * sum of max(0, 1 - w.(x+ - x-)).
pub fn ranksvm_objective(
    weight: [f64; 2],
    pairs: &[(FeatureVector, FeatureVector)],
    reg_c: f64,
) -> f64 {
    let hinge: f64 = pairs
        .iter()
        .map(|p| (1.0 - dot(weight, diff(p))).max(0.0))
        .sum();
    0.5 * dot(weight, weight) + reg_c * hinge
}

pub fn train_ranksvm(
    pairs: &[(FeatureVector, FeatureVector)],
    reg_c: f64,
    epochs: usize,
    seed: u64,
) -> Result<RankSvmModel> {
    train_ranksvm_traced(pairs, reg_c, epochs, seed).map(|(m, _)| m)
}

/// Stochastic subgradient descent on the RankSVM objective. Dividing the
/// objective by `reg_c * m` gives a `1 / (reg_c * m)`-strongly convex
/// problem, stepped with `eta_t = reg_c * m / t` and projected onto the ball
/// that must contain the optimum. Each epoch's averaged iterate is scored and
/// the best one so far, starting from `w = 0`, is kept. Returns that model and
/// the best objective after each epoch.
pub fn train_ranksvm_traced(
    pairs: &[(FeatureVector, FeatureVector)],
    reg_c: f64,
    epochs: usize,
    seed: u64,
) -> Result<(RankSvmModel, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::Validation("no training pairs".into()));
    }
    if !(reg_c > 0.0 && reg_c.is_finite()) {
        return Err(Error::Config(format!(
            "reg_c must be positive, got {reg_c}"
        )));
    }
    let m = pairs.len();
    let lambda = 1.0 / (reg_c * m as f64);
    let radius = 1.0 / lambda.sqrt();
    let diffs: Vec<[f64; 2]> = pairs.iter().map(diff).collect();

    let mut rng = stream(seed, Stream::Ensemble);
    let mut order: Vec<usize> = (0..m).collect();
    let mut w = [0.0f64; 2];
    let mut t = 0u64;
    let mut history = Vec::with_capacity(epochs);
    let mut best = ([0.0; 2], ranksvm_objective([0.0; 2], pairs, reg_c));
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        // iterate average over the epoch smooths the last-iterate noise
        let mut avg = [0.0; 2];
        for (k, &idx) in order.iter().enumerate() {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let d = diffs[idx];
            let violated = dot(w, d) < 1.0;
            let shrink = 1.0 - eta * lambda;
            w = [w[0] * shrink, w[1] * shrink];
            if violated {
                w = [w[0] + eta * d[0], w[1] + eta * d[1]];
            }
            let norm = dot(w, w).sqrt();
            if norm > radius {
                w = [w[0] * radius / norm, w[1] * radius / norm];
            }
            let kf = k as f64;
            avg = [
                (avg[0] * kf + w[0]) / (kf + 1.0),
                (avg[1] * kf + w[1]) / (kf + 1.0),
            ];
        }
        w = avg;
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::Training("RankSVM weights became non-finite".into()));
        }
        let obj = ranksvm_objective(w, pairs, reg_c);
        if obj <= best.1 {
            best = (w, obj);
        }
        history.push(best.1);
    }
    Ok((
        RankSvmModel {
            weight: best.0,
            reg_c,
            trained: true,
        },
        history,
    ))
}

/// Fraction of pairs the model orders strictly correctly.
pub fn pairwise_accuracy(model: &RankSvmModel, pairs: &[(FeatureVector, FeatureVector)]) -> f64 {
    let ok = pairs
        .iter()
        .filter(|(p, n)| model.decision(p) > model.decision(n))
        .count();
    ok as f64 / pairs.len() as f64
}

pub fn ensemble_rank(model: &RankSvmModel, features: &[FeatureVector]) -> Result<ScoredRanking> {
    if !model.trained {
        return Err(Error::Training("ensemble model is not trained".into()));
    }
    Ok(ScoredRanking::from_scores(
        features.iter().map(|x| (x.course, model.decision(x))),
    ))
}

/// One (positive, sampled negative) pair per positive candidate.
pub fn sample_pairs<R: Rng + ?Sized>(
    features: &[FeatureVector],
    positives: &BTreeSet<usize>,
    rng: &mut R,
) -> Vec<(FeatureVector, FeatureVector)> {
    let negatives: Vec<&FeatureVector> = features
        .iter()
        .filter(|x| !positives.contains(&x.course))
        .collect();
    if negatives.is_empty() {
        return Vec::new();
    }
    features
        .iter()
        .filter(|x| positives.contains(&x.course))
        .map(|p| (*p, *negatives[rng.random_range(0..negatives.len())]))
        .collect()
}

/// Combines two recommenders through a trained RankSVM.
pub struct EnsembleRecommender<'a> {
    pub model: RankSvmModel,
    pub cf: &'a dyn Recommender,
    pub ppr: &'a dyn Recommender,
}

impl EnsembleRecommender<'_> {
    pub fn features(&self, student: usize, candidates: &[usize]) -> Result<Vec<FeatureVector>> {
        if candidates.is_empty() {
            return Err(Error::Validation("empty candidate set".into()));
        }
        let cf = self.cf.score_candidates(student, candidates)?;
        let ppr = self.ppr.score_candidates(student, candidates)?;
        Ok(features_from_raw(candidates, &cf, &ppr))
    }
}

impl Recommender for EnsembleRecommender<'_> {
    fn score_candidates(&self, student: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        if !self.model.trained {
            return Err(Error::Training("ensemble model is not trained".into()));
        }
        Ok(self
            .features(student, candidates)?
            .iter()
            .map(|x| self.model.decision(x))
            .collect())
    }
}

/// Per-student features from id-keyed score tables, for file-based use.
/// Students missing a PPR entry get mass 0 everywhere.
pub fn features_from_tables(
    cf: &crate::ranking::ScoreTable,
    ppr: &crate::ranking::ScoreTable,
) -> Result<BTreeMap<String, Vec<(String, FeatureVector)>>> {
    let mut out = BTreeMap::new();
    for (student, rows) in cf {
        if rows.is_empty() {
            continue;
        }
        let ppr_rows: BTreeMap<&str, f64> = ppr
            .get(student)
            .map(|r| r.iter().map(|(c, s)| (c.as_str(), *s)).collect())
            .unwrap_or_default();
        let candidates: Vec<usize> = (0..rows.len()).collect();
        let raw_cf: Vec<f64> = rows.iter().map(|(_, s)| *s).collect();
        let raw_ppr: Vec<f64> = rows
            .iter()
            .map(|(c, _)| ppr_rows.get(c.as_str()).copied().unwrap_or(0.0))
            .collect();
        let feats = features_from_raw(&candidates, &raw_cf, &raw_ppr);
        out.insert(
            student.clone(),
            rows.iter().map(|(c, _)| c.clone()).zip(feats).collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(course: usize, cf: f64, ppr: f64) -> FeatureVector {
        FeatureVector { course, cf, ppr }
    }

    #[test]
    fn feature_normalization() {
        let cf = ScoredRanking::from_scores([(7, 2.0)]);
        let f = build_features(&cf, &ScoredRanking::default(), &[7]).unwrap();
        assert_eq!((f[0].cf, f[0].ppr), (0.5, 0.5));

        let cf = ScoredRanking::from_scores([(0, 1.0), (1, 3.0)]);
        let ppr = ScoredRanking::from_scores([(0, 0.2)]);
        let f = build_features(&cf, &ppr, &[0, 1]).unwrap();
        assert_eq!((f[0].cf, f[1].cf), (0.0, 1.0));
        // course 1 has no PPR mass: raw 0, the minimum
        assert_eq!((f[0].ppr, f[1].ppr), (1.0, 0.0));

        assert!(build_features(&cf, &ppr, &[]).is_err());
        assert!(build_features(&cf, &ppr, &[0, 5]).is_err());
    }

    #[test]
    fn separable_one_dimensional_pairs() {
        let pairs: Vec<_> = (0..10)
            .map(|k| {
                (
                    fv(0, 0.6 + 0.04 * k as f64, 0.5),
                    fv(1, 0.1 + 0.03 * k as f64, 0.5),
                )
            })
            .collect();
        let m = train_ranksvm(&pairs, 10.0, 200, 1).unwrap();
        assert!(m.weight[0] > 0.0);
        let violations = pairs
            .iter()
            .filter(|p| dot(m.weight, diff(p)) < 1.0 - 1e-3)
            .count();
        assert_eq!(violations, 0, "{:?}", m.weight);
    }

    #[test]
    fn identical_pairs_shrink_to_zero() {
        let pairs = vec![(fv(0, 0.4, 0.4), fv(1, 0.4, 0.4)); 5];
        let m = train_ranksvm(&pairs, 1.0, 20, 0).unwrap();
        assert_eq!(m.weight, [0.0, 0.0]);
        assert_eq!(ranksvm_objective(m.weight, &pairs, 1.0), 5.0);
    }

    #[test]
    fn swapping_pairs_reverses_the_ordering() {
        let pairs = vec![
            (fv(0, 0.9, 0.2), fv(1, 0.1, 0.4)),
            (fv(0, 0.7, 0.8), fv(1, 0.3, 0.1)),
            (fv(0, 0.5, 0.9), fv(1, 0.6, 0.2)),
        ];
        let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let m = train_ranksvm(&pairs, 1.0, 50, 4).unwrap();
        let r = train_ranksvm(&swapped, 1.0, 50, 4).unwrap();
        for (p, n) in &pairs {
            let fwd = m.decision(p) - m.decision(n);
            let back = r.decision(p) - r.decision(n);
            assert!(fwd * back < 0.0, "{fwd} {back}");
        }
    }

    #[test]
    fn projections_reproduce_single_models() {
        let feats = vec![fv(0, 0.2, 0.9), fv(1, 0.8, 0.1), fv(2, 0.5, 0.5)];
        let cf_only = ensemble_rank(&RankSvmModel::with_weight([1.0, 0.0], 1.0), &feats).unwrap();
        assert_eq!(cf_only.courses(), [1, 2, 0]);
        let ppr_only = ensemble_rank(&RankSvmModel::with_weight([0.0, 1.0], 1.0), &feats).unwrap();
        assert_eq!(ppr_only.courses(), [0, 2, 1]);
        let tie = ensemble_rank(
            &RankSvmModel::with_weight([0.5, 0.5], 1.0),
            &[fv(4, 0.0, 1.0), fv(3, 1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(tie.courses(), [3, 4]);
        let untrained = RankSvmModel {
            trained: false,
            ..RankSvmModel::with_weight([1.0, 1.0], 1.0)
        };
        assert!(ensemble_rank(&untrained, &feats).is_err());
    }

    #[test]
    fn model_line_round_trip() {
        let m = RankSvmModel::with_weight([0.125, -3.5], 2.0);
        assert_eq!(m.to_line(), "ocrank-ensemble v1 0.125 -3.5 2");
        assert_eq!(RankSvmModel::from_line(&m.to_line()).unwrap(), m);
        assert!(RankSvmModel::from_line("ocrank-ensemble v2 1 1 1").is_err());
    }

    #[test]
    fn pair_sampling_uses_non_positives() {
        let feats = vec![fv(0, 0.0, 0.0), fv(1, 1.0, 1.0), fv(2, 0.5, 0.5)];
        let mut rng = stream(0, Stream::Ensemble);
        let pairs = sample_pairs(&feats, &BTreeSet::from([1]), &mut rng);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.course, 1);
        assert_ne!(pairs[0].1.course, 1);
        assert!(sample_pairs(&feats, &BTreeSet::from([0, 1, 2]), &mut rng).is_empty());
    }
}
