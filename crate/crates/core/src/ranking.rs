//! Scored candidate lists and the recommender interface shared by every
//! model, plus the tab-separated score and truth file formats.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::bpr::FactorModel;
use crate::error::{Error, Result};

/// Courses with scores, best first. Equal scores are ordered by course
/// index, which matches course-id order because indices are assigned in
/// sorted id order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredRanking {
    entries: Vec<(usize, f64)>,
}

impl ScoredRanking {
    pub fn from_scores(scores: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.into_iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ScoredRanking { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn courses(&self) -> Vec<usize> {
        self.entries.iter().map(|&(c, _)| c).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_map(&self) -> BTreeMap<usize, f64> {
        self.entries.iter().copied().collect()
    }

    pub fn top(&self, n: usize) -> &[(usize, f64)] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// Anything that can score a student's candidate courses. Student and
/// course indices refer to the dataset the recommender was built for.
pub trait Recommender: Sync {
    fn score_candidates(&self, student: usize, candidates: &[usize]) -> Result<Vec<f64>>;

    fn rank(&self, student: usize, candidates: &[usize]) -> Result<ScoredRanking> {
        let scores = self.score_candidates(student, candidates)?;
        Ok(ScoredRanking::from_scores(
            candidates.iter().copied().zip(scores),
        ))
    }
}

impl Recommender for FactorModel {
    fn score_candidates(&self, student: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        candidates.iter().map(|&c| self.score(student, c)).collect()
    }
}

/// Per-student scored candidates keyed by ids.
pub type ScoreTable = BTreeMap<String, Vec<(String, f64)>>;

/// `student_id<TAB>course_id<TAB>score`, one line per candidate.
pub fn write_scores<W: Write>(mut w: W, table: &ScoreTable) -> std::io::Result<()> {
    for (s, rows) in table {
        for (c, score) in rows {
            writeln!(w, "{s}\t{c}\t{score}")?;
        }
    }
    Ok(())
}

fn split_line<'a>(line: &'a str, lineno: usize, want: usize, what: &str) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != want {
        return Err(Error::Parse {
            path: what.into(),
            line: lineno,
            message: format!(
                "expected {want} tab-separated fields, found {}",
                fields.len()
            ),
        });
    }
    Ok(fields)
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<ScoreTable> {
    let mut table = ScoreTable::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<scores>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_line(&line, k + 1, 3, "<scores>")?;
        let score: f64 = f[2].parse().map_err(|_| Error::Parse {
            path: "<scores>".into(),
            line: k + 1,
            message: format!("score `{}` is not a number", f[2]),
        })?;
        table
            .entry(f[0].to_string())
            .or_default()
            .push((f[1].to_string(), score));
    }
    Ok(table)
}

/// `student_id<TAB>course_id` pairs.
pub type Truth = BTreeMap<String, BTreeSet<String>>;

pub fn write_truth<W: Write>(mut w: W, truth: &Truth) -> std::io::Result<()> {
    for (s, courses) in truth {
        for c in courses {
            writeln!(w, "{s}\t{c}")?;
        }
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(reader: R) -> Result<Truth> {
    let mut truth = Truth::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<truth>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_line(&line, k + 1, 2, "<truth>")?;
        truth
            .entry(f[0].to_string())
            .or_default()
            .insert(f[1].to_string());
    }
    Ok(truth)
}
