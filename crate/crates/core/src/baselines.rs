//! Non-model baselines: course popularity and senior-peer similarity.

use std::collections::BTreeSet;

use indexmap::IndexSet;

use crate::dataset::{PartitionedDataset, RegistrationRecord};
use crate::error::{Error, Result};
use crate::ranking::{Recommender, ScoredRanking};

/// Ranks candidates by historical registration count. Courses absent from
/// `courses` are ignored when counting.
pub fn popularity_rank(
    records: &[RegistrationRecord],
    courses: &IndexSet<String>,
    candidates: &[usize],
) -> ScoredRanking {
    let counts = count_registrations(records.iter(), courses);
    ScoredRanking::from_scores(candidates.iter().map(|&c| (c, counts[c])))
}

fn count_registrations<'a>(
    records: impl Iterator<Item = &'a RegistrationRecord>,
    courses: &IndexSet<String>,
) -> Vec<f64> {
    let mut counts = vec![0.0; courses.len()];
    for r in records {
        if let Some(c) = courses.get_index_of(&r.course_id) {
            counts[c] += 1.0;
        }
    }
    counts
}

pub struct Popularity {
    counts: Vec<f64>,
}

impl Popularity {
    /// Counts every observed, non-held-out registration.
    pub fn from_dataset(ds: &PartitionedDataset) -> Self {
        Popularity {
            counts: count_registrations(ds.observed_records(), &ds.course_index),
        }
    }
}

impl Recommender for Popularity {
    fn score_candidates(&self, _student: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|&c| {
                self.counts.get(c).copied().ok_or(Error::IndexOutOfRange {
                    what: "course",
                    index: c,
                    size: self.counts.len(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentProfile {
    pub student_id: String,
    pub course_set: BTreeSet<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimilarityKind {
    Intersection,
    Jaccard,
}

pub fn similarity(a: &StudentProfile, b: &StudentProfile, kind: SimilarityKind) -> f64 {
    let common = a.course_set.intersection(&b.course_set).count();
    match kind {
        SimilarityKind::Intersection => common as f64,
        SimilarityKind::Jaccard => {
            let union = a.course_set.len() + b.course_set.len() - common;
            if union == 0 {
                0.0
            } else {
                common as f64 / union as f64
            }
        }
    }
}

/// Sum of similarities to the seniors who took `course`.
pub fn memory_score(
    target: &StudentProfile,
    seniors: &[StudentProfile],
    course: usize,
    kind: SimilarityKind,
) -> f64 {
    seniors
        .iter()
        .filter(|s| s.course_set.contains(&course))
        .map(|s| similarity(s, target, kind))
        .sum()
}

/// Memory-based scorer. Peers are graduated students only; the target's
/// profile is everything observed for them so far.
pub struct MemoryBased<'a> {
    dataset: &'a PartitionedDataset,
    seniors: Vec<StudentProfile>,
    pub kind: SimilarityKind,
}

impl<'a> MemoryBased<'a> {
    pub fn new(dataset: &'a PartitionedDataset, kind: SimilarityKind) -> Self {
        let seniors = dataset
            .graduated_indices()
            .into_iter()
            .map(|s| profile(dataset, s))
            .collect();
        MemoryBased {
            dataset,
            seniors,
            kind,
        }
    }

    pub fn seniors(&self) -> &[StudentProfile] {
        &self.seniors
    }
}

pub fn profile(ds: &PartitionedDataset, s: usize) -> StudentProfile {
    StudentProfile {
        student_id: ds.student_id(s).to_string(),
        course_set: ds.taken_courses(s),
    }
}

impl Recommender for MemoryBased<'_> {
    fn score_candidates(&self, student: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        let target = profile(self.dataset, student);
        let mut per_course = vec![0.0; self.dataset.num_courses()];
        for senior in &self.seniors {
            let sim = similarity(senior, &target, self.kind);
            if sim == 0.0 {
                continue;
            }
            for &c in &senior.course_set {
                per_course[c] += sim;
            }
        }
        Ok(candidates.iter().map(|&c| per_course[c]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::example_records;

    fn prof(courses: &[usize]) -> StudentProfile {
        StudentProfile {
            student_id: String::new(),
            course_set: courses.iter().copied().collect(),
        }
    }

    fn index(ids: &[&str]) -> IndexSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn popularity_counts_and_ties() {
        let recs = vec![
            RegistrationRecord::new("s1", "A", 2008, 1),
            RegistrationRecord::new("s2", "A", 2008, 1),
            RegistrationRecord::new("s3", "A", 2008, 1),
            RegistrationRecord::new("s1", "B", 2008, 2),
        ];
        let idx = index(&["A", "B"]);
        assert_eq!(popularity_rank(&recs, &idx, &[1, 0]).courses(), [0, 1]);

        let records = example_records();
        let idx = index(&["A", "B", "C", "D"]);
        let r = popularity_rank(&records, &idx, &[3, 1, 2, 0]);
        assert_eq!(r.courses(), [0, 1, 2, 3]);
        assert!(r.entries().iter().all(|&(_, s)| s == 3.0));

        let mut rev = records.clone();
        rev.reverse();
        assert_eq!(
            popularity_rank(&rev, &idx, &[0, 1, 2, 3]),
            popularity_rank(&records, &idx, &[0, 1, 2, 3])
        );
    }

    #[test]
    fn similarities() {
        let xy = prof(&[0, 1]);
        assert_eq!(similarity(&xy, &xy, SimilarityKind::Intersection), 2.0);
        assert_eq!(similarity(&xy, &xy, SimilarityKind::Jaccard), 1.0);
        let z = prof(&[2]);
        assert_eq!(similarity(&xy, &z, SimilarityKind::Intersection), 0.0);
        assert_eq!(similarity(&xy, &z, SimilarityKind::Jaccard), 0.0);
        let bc = prof(&[1, 2]);
        assert_eq!(similarity(&xy, &bc, SimilarityKind::Intersection), 1.0);
        assert_eq!(similarity(&xy, &bc, SimilarityKind::Jaccard), 1.0 / 3.0);
        assert_eq!(
            similarity(&prof(&[]), &prof(&[]), SimilarityKind::Jaccard),
            0.0
        );
    }

    #[test]
    fn memory_scores_add_up() {
        let target = prof(&[0, 1]);
        assert_eq!(
            memory_score(&target, &[prof(&[0, 5])], 9, SimilarityKind::Jaccard),
            0.0
        );
        // Jaccard({0,1}, {0,9}) = 1/3
        let half = prof(&[0, 9]);
        assert_eq!(
            memory_score(
                &target,
                std::slice::from_ref(&half),
                9,
                SimilarityKind::Jaccard
            ),
            1.0 / 3.0
        );
        let seniors = [prof(&[0, 1, 9]), prof(&[0, 1, 2, 9])];
        assert_eq!(
            memory_score(&target, &seniors, 9, SimilarityKind::Intersection),
            4.0
        );
        let seniors = [prof(&[0, 1, 9]), prof(&[0, 1, 9, 3]), prof(&[0, 7])];
        assert_eq!(
            memory_score(&target, &seniors, 9, SimilarityKind::Intersection),
            4.0
        );
        let two_three = [prof(&[0, 1, 9]), prof(&[0, 1, 4, 9])];
        let t3 = prof(&[0, 1, 4]);
        assert_eq!(
            memory_score(&t3, &two_three, 9, SimilarityKind::Intersection),
            5.0
        );
    }

    #[test]
    fn memory_recommender_matches_direct_sum() {
        let ds = crate::dataset::prepare(&example_records(), None, 3, Default::default()).unwrap();
        let m = MemoryBased::new(&ds, SimilarityKind::Jaccard);
        let s = 0;
        let target = profile(&ds, s);
        let cands: Vec<usize> = (0..ds.num_courses()).collect();
        let scores = m.score_candidates(s, &cands).unwrap();
        for (&c, &x) in cands.iter().zip(&scores) {
            let direct = memory_score(&target, m.seniors(), c, SimilarityKind::Jaccard);
            assert!((x - direct).abs() < 1e-12);
        }
    }
}
