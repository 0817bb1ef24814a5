//! Per-student AUC against held-out registrations, and paired significance
//! tests between two sets of per-student AUCs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::factorial::ln_binomial;

use crate::bpr::FactorModel;
use crate::dataset::PartitionedDataset;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::ranking::{Recommender, ScoredRanking};

/// AUC with ties counted as half a correctly ordered pair. `None` when the
/// list has no positives or no negatives.
pub fn auc(ranking: &ScoredRanking, positives: &BTreeSet<usize>) -> Option<f64> {
    auc_of(
        ranking
            .entries()
            .iter()
            .map(|&(c, s)| (s, positives.contains(&c))),
    )
}

/// AUC over (score, is_positive) pairs.
pub fn auc_of(scored: impl IntoIterator<Item = (f64, bool)>) -> Option<f64> {
    let mut items: Vec<(f64, bool)> = scored.into_iter().collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut wins, mut ties, mut neg_below) = (0u64, 0u64, 0u64);
    let (mut n_pos, mut n_neg) = (0u64, 0u64);
    let mut k = 0;
    while k < items.len() {
        let mut end = k;
        let (mut p, mut n) = (0u64, 0u64);
        while end < items.len() && items[end].0 == items[k].0 {
            if items[end].1 {
                p += 1;
            } else {
                n += 1;
            }
            end += 1;
        }
        wins += p * neg_below;
        ties += p * n;
        neg_below += n;
        n_pos += p;
        n_neg += n;
        k = end;
    }
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    Some((wins as f64 + 0.5 * ties as f64) / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub per_student_auc: BTreeMap<String, f64>,
    pub mean_auc: f64,
    /// Students with no positives or no negatives among their candidates,
    /// plus students whose scoring failed.
    pub num_skipped: usize,
    pub failures: BTreeMap<String, String>,
}

impl EvaluationReport {
    pub fn from_aucs(per_student_auc: BTreeMap<String, f64>, num_skipped: usize) -> Self {
        let mean_auc = mean(per_student_auc.values().copied());
        EvaluationReport {
            per_student_auc,
            mean_auc,
            num_skipped,
            failures: BTreeMap::new(),
        }
    }

    /// `student_id<TAB>auc` lines.
    pub fn write_per_student<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (s, a) in &self.per_student_auc {
            writeln!(w, "{s}\t{a}")?;
        }
        Ok(())
    }

    pub fn summary(&self, name: &str) -> String {
        format!(
            "{name}: mean AUC {:.4} over {} students ({} skipped)",
            self.mean_auc,
            self.per_student_auc.len(),
            self.num_skipped
        )
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn read_per_student<R: BufRead>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<auc>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            path: "<auc>".into(),
            line: k + 1,
            message: m,
        };
        let (s, a) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `student<TAB>auc`".into()))?;
        let a: f64 = a
            .parse()
            .map_err(|_| bad(format!("`{a}` is not a number")))?;
        out.insert(s.to_string(), a);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalOptions {
    /// Keep courses the student already took among the candidates.
    pub include_taken: bool,
    pub exec: Execution,
}

/// Every course, minus the ones the student has already taken unless
/// `include_taken` is set.
pub fn candidates(ds: &PartitionedDataset, s: usize, include_taken: bool) -> Vec<usize> {
    let taken = ds.taken_courses(s);
    (0..ds.num_courses())
        .filter(|c| include_taken || !taken.contains(c))
        .collect()
}

enum Outcome {
    Scored(f64),
    Skipped,
    Failed(String),
}

/// Scores every current student and averages the per-student AUCs.
pub fn evaluate(
    rec: &dyn Recommender,
    ds: &PartitionedDataset,
    heldout: &BTreeMap<usize, BTreeSet<usize>>,
    opts: EvalOptions,
) -> EvaluationReport {
    let students = ds.current_indices();
    let empty = BTreeSet::new();
    let outcomes = map_indexed(opts.exec, students.len(), |k| {
        let s = students[k];
        let cands = candidates(ds, s, opts.include_taken);
        let positives = heldout.get(&s).unwrap_or(&empty);
        match rec.rank(s, &cands) {
            Ok(r) if r.entries().iter().any(|(_, x)| x.is_nan()) => {
                Outcome::Failed("NaN score".into())
            }
            Ok(r) => auc(&r, positives).map_or(Outcome::Skipped, Outcome::Scored),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    });

    let mut per_student = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut skipped = 0;
    for (&s, outcome) in students.iter().zip(outcomes) {
        let id = ds.student_id(s).to_string();
        match outcome {
            Outcome::Scored(a) => {
                per_student.insert(id, a);
            }
            Outcome::Skipped => skipped += 1,
            Outcome::Failed(msg) => {
                skipped += 1;
                failures.insert(id, msg);
            }
        }
    }
    let mut report = EvaluationReport::from_aucs(per_student, skipped);
    report.failures = failures;
    report
}

/// Mean held-out AUC of a factor model over the students in `truth`.
pub fn model_mean_auc(
    model: &FactorModel,
    ds: &PartitionedDataset,
    truth: &BTreeMap<usize, BTreeSet<usize>>,
) -> f64 {
    evaluate(model, ds, truth, EvalOptions::default()).mean_auc
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_difference: f64,
    /// One-sided paired t-test of mean(b - a) > 0.
    pub t_p_value: f64,
    /// One-sided exact binomial sign test on the signs of b - a.
    pub sign_p_value: f64,
}

pub fn paired_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Validation(
            "paired test needs at least 2 pairs".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mean_difference = d.iter().sum::<f64>() / n as f64;
    if d.iter().all(|&x| x == 0.0) {
        return Ok(PairedTest {
            n,
            mean_difference: 0.0,
            t_p_value: 1.0,
            sign_p_value: 1.0,
        });
    }

    let var = d.iter().map(|x| (x - mean_difference).powi(2)).sum::<f64>() / (n - 1) as f64;
    // floating-point noise around a constant difference is treated as zero spread
    let degenerate = var.sqrt() <= 1e-12 * mean_difference.abs().max(f64::MIN_POSITIVE);
    let t_p_value = if var == 0.0 || degenerate {
        if mean_difference > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let t = mean_difference / (var / n as f64).sqrt();
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
        dist.sf(t)
    };

    let wins = d.iter().filter(|&&x| x > 0.0).count() as u64;
    let losses = d.iter().filter(|&&x| x < 0.0).count() as u64;
    Ok(PairedTest {
        n,
        mean_difference,
        t_p_value,
        sign_p_value: binomial_upper_tail(wins + losses, wins),
    })
}

/// P(X >= k) for X ~ Binomial(m, 1/2).
pub fn binomial_upper_tail(m: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > m {
        return 0.0;
    }
    if m <= 1000 {
        // walk down from C(m, m) / 2^m = 2^-m, which is exact
        let mut term = 0.5f64.powi(m as i32);
        let mut total = term;
        let mut i = m;
        while i > k {
            term *= i as f64 / (m - i + 1) as f64;
            total += term;
            i -= 1;
        }
        return total.min(1.0);
    }
    let ln_half = -(m as f64) * std::f64::consts::LN_2;
    let logs: Vec<f64> = (k..=m).map(|i| ln_binomial(m, i) + ln_half).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln())
        .exp()
        .min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(scored: &[(f64, bool)]) -> Option<f64> {
        let (mut wins, mut ties, mut p, mut n) = (0u64, 0u64, 0u64, 0u64);
        for &(_, pos) in scored {
            if pos {
                p += 1;
            } else {
                n += 1;
            }
        }
        for &(sp, a) in scored {
            for &(sn, b) in scored {
                if a && !b {
                    if sp > sn {
                        wins += 1;
                    } else if sp == sn {
                        ties += 1;
                    }
                }
            }
        }
        (p > 0 && n > 0).then(|| (wins as f64 + 0.5 * ties as f64) / (p as f64 * n as f64))
    }

    #[test]
    fn auc_examples() {
        let perfect = ScoredRanking::from_scores([(0, 0.9), (1, 0.8), (2, 0.1)]);
        assert_eq!(auc(&perfect, &BTreeSet::from([0, 1])), Some(1.0));
        let flat = ScoredRanking::from_scores([(0, 1.0), (1, 1.0), (2, 1.0)]);
        assert_eq!(auc(&flat, &BTreeSet::from([1])), Some(0.5));
        let mixed = ScoredRanking::from_scores([(1, 0.9), (4, 0.8), (3, 0.7), (2, 0.5)]);
        assert_eq!(auc(&mixed, &BTreeSet::from([1, 3])), Some(0.75));
        assert_eq!(auc(&mixed, &BTreeSet::new()), None);
        assert_eq!(auc(&mixed, &BTreeSet::from([1, 2, 3, 4])), None);
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut rng = crate::rng::stream(4, crate::rng::Stream::Init);
        for _ in 0..300 {
            let n = rng.random_range(1..40);
            let v: Vec<(f64, bool)> = (0..n)
                .map(|_| (rng.random_range(0..6) as f64, rng.random::<bool>()))
                .collect();
            assert_eq!(auc_of(v.clone()), brute(&v));
        }
    }

    #[test]
    fn reversing_scores_complements_auc() {
        let v = [
            (0.3, true),
            (0.1, false),
            (0.3, false),
            (0.9, true),
            (0.2, false),
        ];
        let a = auc_of(v).unwrap();
        let r = auc_of(v.iter().map(|&(s, p)| (-s, p))).unwrap();
        assert!((a + r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn paired_test_identical_and_shifted() {
        let a: Vec<f64> = (0..30).map(|k| 0.5 + k as f64 / 100.0).collect();
        let t = paired_test(&a, &a).unwrap();
        assert_eq!((t.t_p_value, t.sign_p_value), (1.0, 1.0));

        let b: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
        let t = paired_test(&a, &b).unwrap();
        assert_eq!(t.sign_p_value, 2f64.powi(-30));
        assert_eq!(t.t_p_value, 0.0);

        assert!(paired_test(&a, &b[1..]).is_err());
        assert!(paired_test(&a[..1], &b[..1]).is_err());
    }

    #[test]
    fn paired_t_test_against_reference() {
        // d = [1, 2, 3, 4]: mean 2.5, sd 1.29099, t = 3.87298 on 3 df;
        // one-sided p = 0.015227 (scipy.stats.ttest_rel alternative="greater")
        let a = [0.0; 4];
        let b = [1.0, 2.0, 3.0, 4.0];
        let t = paired_test(&a, &b).unwrap();
        assert!((t.t_p_value - 0.015227).abs() < 1e-5, "{}", t.t_p_value);
        assert_eq!(t.sign_p_value, 1.0 / 16.0);
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(binomial_upper_tail(4, 0), 1.0);
        assert_eq!(binomial_upper_tail(4, 2), 11.0 / 16.0);
        assert_eq!(binomial_upper_tail(4, 5), 0.0);
        let exact = binomial_upper_tail(1000, 520);
        let approx = {
            // same tail through the log-space branch
            let ln_half = -1000.0 * std::f64::consts::LN_2;
            (520..=1000u64)
                .map(|i| (ln_binomial(1000, i) + ln_half).exp())
                .sum::<f64>()
        };
        assert!((exact - approx).abs() < 1e-10);
        assert!((binomial_upper_tail(2000, 1000) - 0.5089).abs() < 1e-3);
    }

    #[test]
    fn per_student_file_round_trip() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 0.25);
        m.insert("b".to_string(), 1.0);
        let r = EvaluationReport::from_aucs(m.clone(), 0);
        assert_eq!(r.mean_auc, 0.625);
        let mut buf = Vec::new();
        r.write_per_student(&mut buf).unwrap();
        assert_eq!(read_per_student(buf.as_slice()).unwrap(), m);
    }
}
