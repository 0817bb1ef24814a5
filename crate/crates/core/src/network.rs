//! Directed course-transition graph.
//!
//! An edge f -> g counts students who took f in some grade and g in the next
//! grade; every (course at g, course at g+1) pair of one student counts once.
//! Out-weights are the counts normalized per source.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use indexmap::IndexSet;

use crate::dataset::RegistrationRecord;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.03;

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionNetwork {
    courses: IndexSet<String>,
    out_edges: Vec<Vec<(usize, f64)>>,
    in_edges: Vec<Vec<(usize, f64)>>,
}

impl TransitionNetwork {
    /// Builds from explicit adjacency lists over `courses`.
    pub fn from_edges(
        courses: IndexSet<String>,
        mut out_edges: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n = courses.len();
        if out_edges.len() != n {
            return Err(Error::Validation(format!(
                "{} adjacency lists for {n} courses",
                out_edges.len()
            )));
        }
        let mut in_edges = vec![Vec::new(); n];
        for (f, edges) in out_edges.iter_mut().enumerate() {
            edges.sort_by_key(|&(g, _)| g);
            for &(g, w) in edges.iter() {
                if g >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "course",
                        index: g,
                        size: n,
                    });
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::Validation(format!(
                        "edge {} -> {} has weight {w}",
                        courses[f], courses[g]
                    )));
                }
                in_edges[g].push((f, w));
            }
        }
        Ok(TransitionNetwork {
            courses,
            out_edges,
            in_edges,
        })
    }

    pub fn empty(courses: IndexSet<String>) -> Self {
        let n = courses.len();
        TransitionNetwork {
            courses,
            out_edges: vec![Vec::new(); n],
            in_edges: vec![Vec::new(); n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.courses.len()
    }

    pub fn num_edges(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn average_out_degree(&self) -> f64 {
        let sources = self.out_edges.iter().filter(|e| !e.is_empty()).count();
        if sources == 0 {
            0.0
        } else {
            self.num_edges() as f64 / sources as f64
        }
    }

    pub fn courses(&self) -> &IndexSet<String> {
        &self.courses
    }

    pub fn course(&self, id: &str) -> Option<usize> {
        self.courses.get_index_of(id)
    }

    pub fn neighbors(&self, f: usize) -> Result<&[(usize, f64)]> {
        self.out_edges
            .get(f)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                what: "course",
                index: f,
                size: self.num_nodes(),
            })
    }

    pub fn neighbors_of(&self, id: &str) -> Result<&[(usize, f64)]> {
        let f = self
            .course(id)
            .ok_or_else(|| Error::UnknownCourse(id.to_string()))?;
        self.neighbors(f)
    }

    /// Sources pointing at `g`, with their weights.
    pub fn incoming(&self, g: usize) -> &[(usize, f64)] {
        &self.in_edges[g]
    }

    pub fn weight(&self, f: usize, g: usize) -> Option<f64> {
        let edges = self.out_edges.get(f)?;
        edges
            .binary_search_by_key(&g, |&(t, _)| t)
            .ok()
            .map(|k| edges[k].1)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(f, e)| e.iter().map(move |&(g, w)| (f, g, w)))
    }

    /// Drops edges lighter than `threshold`. Surviving weights keep their
    /// original values.
    pub fn apply_threshold(&self, threshold: f64) -> Result<TransitionNetwork> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        let out = self
            .out_edges
            .iter()
            .map(|e| e.iter().copied().filter(|&(_, w)| w >= threshold).collect())
            .collect();
        TransitionNetwork::from_edges(self.courses.clone(), out)
    }

    /// Re-indexes onto a larger course universe, e.g. a dataset's index.
    pub fn reindex(&self, courses: &IndexSet<String>) -> Result<TransitionNetwork> {
        let map: Vec<usize> = self
            .courses
            .iter()
            .map(|c| {
                courses
                    .get_index_of(c)
                    .ok_or_else(|| Error::UnknownCourse(c.clone()))
            })
            .collect::<Result<_>>()?;
        let mut out = vec![Vec::new(); courses.len()];
        for (f, g, w) in self.edges() {
            out[map[f]].push((map[g], w));
        }
        TransitionNetwork::from_edges(courses.clone(), out)
    }

    /// `source<TAB>target<TAB>weight`, ordered by source then target index.
    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (f, g, wt) in self.edges() {
            writeln!(w, "{}\t{}\t{}", self.courses[f], self.courses[g], wt)?;
        }
        Ok(())
    }

    /// Reads an edge list; every id must be in `courses`.
    pub fn read_edges<R: BufRead>(
        reader: R,
        courses: &IndexSet<String>,
    ) -> Result<TransitionNetwork> {
        let mut out = vec![Vec::new(); courses.len()];
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<edge list>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse {
                path: "<edge list>".into(),
                line: k + 1,
                message: m,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let f = courses
                .get_index_of(fields[0])
                .ok_or_else(|| Error::UnknownCourse(fields[0].to_string()))?;
            let g = courses
                .get_index_of(fields[1])
                .ok_or_else(|| Error::UnknownCourse(fields[1].to_string()))?;
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| bad(format!("weight `{}` is not a number", fields[2])))?;
            out[f].push((g, w));
        }
        TransitionNetwork::from_edges(courses.clone(), out)
    }
}

/// Counts year-adjacent transitions over the given course universe.
pub fn build_network(
    records: &[RegistrationRecord],
    courses: &IndexSet<String>,
) -> Result<TransitionNetwork> {
    build_network_from(records.iter(), courses)
}

pub fn build_network_from<'a>(
    records: impl IntoIterator<Item = &'a RegistrationRecord>,
    courses: &IndexSet<String>,
) -> Result<TransitionNetwork> {
    let mut by_student: BTreeMap<&str, BTreeMap<u8, BTreeSet<usize>>> = BTreeMap::new();
    for r in records {
        let c = courses
            .get_index_of(&r.course_id)
            .ok_or_else(|| Error::UnknownCourse(r.course_id.clone()))?;
        by_student
            .entry(&r.student_id)
            .or_default()
            .entry(r.grade_level)
            .or_default()
            .insert(c);
    }

    let n = courses.len();
    let mut counts: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); n];
    for years in by_student.values() {
        for (&grade, from) in years {
            let Some(to) = years.get(&(grade + 1)) else {
                continue;
            };
            for &f in from {
                for &g in to {
                    *counts[f].entry(g).or_default() += 1;
                }
            }
        }
    }

    let out = counts
        .into_iter()
        .map(|row| {
            let total: u64 = row.values().sum();
            row.into_iter()
                .map(|(g, k)| (g, k as f64 / total as f64))
                .collect()
        })
        .collect();
    TransitionNetwork::from_edges(courses.clone(), out)
}

/// Builds over the sorted set of course ids found in `records`.
pub fn build_network_from_records(records: &[RegistrationRecord]) -> TransitionNetwork {
    let courses: IndexSet<String> = records
        .iter()
        .map(|r| r.course_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    build_network(records, &courses).expect("every course is indexed")
}
