//! Personalized PageRank over the transition network.
//!
//! With probability `gamma` the walk follows an out-link chosen in
//! proportion to its weight; otherwise it restarts at a uniformly chosen
//! course of the restart set. Sinks send all their mass to the restart set.
//! The stationary distribution is found by power iteration.

use std::collections::BTreeSet;

use log::warn;

use crate::dataset::PartitionedDataset;
use crate::error::{Error, Result};
use crate::network::TransitionNetwork;
use crate::ranking::{Recommender, ScoredRanking};

pub const DEFAULT_GAMMA: f64 = 0.7;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct PprQuery {
    pub restart_set: BTreeSet<usize>,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl PprQuery {
    pub fn new(restart_set: BTreeSet<usize>, gamma: f64) -> Self {
        PprQuery {
            restart_set,
            gamma,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PprDistribution {
    pub mass: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// L1 norm of one further application of the walk operator minus `mass`.
    pub residual: f64,
}

struct Walk<'a> {
    net: &'a TransitionNetwork,
    out_total: Vec<f64>,
    restart: Vec<f64>,
    gamma: f64,
}

impl Walk<'_> {
    fn step(&self, pi: &[f64], next: &mut [f64]) {
        let dangling: f64 = pi
            .iter()
            .zip(&self.out_total)
            .filter(|(_, &t)| t == 0.0)
            .map(|(p, _)| p)
            .sum();
        let restart_scale = (1.0 - self.gamma) + self.gamma * dangling;
        for (n, r) in next.iter_mut().zip(&self.restart) {
            *n = restart_scale * r;
        }
        for (f, &p) in pi.iter().enumerate() {
            if p == 0.0 || self.out_total[f] == 0.0 {
                continue;
            }
            let share = self.gamma * p / self.out_total[f];
            for &(g, w) in self.net.neighbors(f).expect("in range") {
                next[g] += share * w;
            }
        }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn personalized_pagerank(net: &TransitionNetwork, query: &PprQuery) -> Result<PprDistribution> {
    let n = net.num_nodes();
    if n == 0 {
        return Err(Error::Validation("empty network".into()));
    }
    if query.restart_set.is_empty() {
        return Err(Error::Validation("empty restart set".into()));
    }
    if let Some(&bad) = query.restart_set.iter().find(|&&c| c >= n) {
        return Err(Error::IndexOutOfRange {
            what: "course",
            index: bad,
            size: n,
        });
    }
    if !(query.gamma > 0.0 && query.gamma < 1.0) {
        return Err(Error::Config(format!(
            "gamma {} outside (0, 1)",
            query.gamma
        )));
    }
    if query.tolerance.is_nan() || query.tolerance <= 0.0 || query.max_iterations == 0 {
        return Err(Error::Config(
            "tolerance and max_iterations must be positive".into(),
        ));
    }

    let mut restart = vec![0.0; n];
    let share = 1.0 / query.restart_set.len() as f64;
    for &c in &query.restart_set {
        restart[c] = share;
    }
    let walk = Walk {
        net,
        out_total: (0..n)
            .map(|f| {
                net.neighbors(f)
                    .expect("in range")
                    .iter()
                    .map(|&(_, w)| w)
                    .sum()
            })
            .collect(),
        restart: restart.clone(),
        gamma: query.gamma,
    };

    let mut pi = restart;
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < query.max_iterations {
        walk.step(&pi, &mut next);
        iterations += 1;
        let change = l1(&pi, &next);
        std::mem::swap(&mut pi, &mut next);
        if change < query.tolerance {
            converged = true;
            break;
        }
    }
    walk.step(&pi, &mut next);
    let residual = l1(&pi, &next);
    Ok(PprDistribution {
        mass: pi,
        converged,
        iterations,
        residual,
    })
}

/// Ranks every non-restart course by stationary mass. Restart courses
/// outside the network are dropped with a warning.
pub fn rank_by_ppr(
    net: &TransitionNetwork,
    current_courses: &BTreeSet<usize>,
    gamma: f64,
) -> Result<ScoredRanking> {
    let restart = restart_within(net, current_courses)?;
    let dist = personalized_pagerank(net, &PprQuery::new(restart.clone(), gamma))?;
    if !dist.converged {
        warn!("PPR did not converge in {} iterations", dist.iterations);
    }
    Ok(ScoredRanking::from_scores(
        dist.mass
            .into_iter()
            .enumerate()
            .filter(|(c, _)| !restart.contains(c)),
    ))
}

fn restart_within(net: &TransitionNetwork, courses: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
    let n = net.num_nodes();
    let (inside, outside): (BTreeSet<usize>, BTreeSet<usize>) =
        courses.iter().partition(|&&c| c < n);
    if !outside.is_empty() {
        warn!(
            "dropping {} restart courses absent from the network",
            outside.len()
        );
    }
    if inside.is_empty() {
        return Err(Error::Validation(
            "none of the student's current courses is in the network".into(),
        ));
    }
    Ok(inside)
}

/// Scores a student's candidates by PPR mass, restarting from the courses of
/// their most recent grade (or their whole history with `full_history`).
pub struct PprRecommender<'a> {
    pub network: &'a TransitionNetwork,
    pub dataset: &'a PartitionedDataset,
    pub gamma: f64,
    pub full_history: bool,
}

impl PprRecommender<'_> {
    pub fn restart_set(&self, s: usize) -> BTreeSet<usize> {
        if self.full_history {
            self.dataset.taken_courses(s)
        } else {
            self.dataset.latest_courses(s)
        }
    }

    pub fn distribution(&self, s: usize) -> Result<PprDistribution> {
        let restart = restart_within(self.network, &self.restart_set(s))?;
        personalized_pagerank(self.network, &PprQuery::new(restart, self.gamma))
    }
}

impl Recommender for PprRecommender<'_> {
    fn score_candidates(&self, student: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        let dist = self.distribution(student)?;
        Ok(candidates
            .iter()
            .map(|&c| dist.mass.get(c).copied().unwrap_or(0.0))
            .collect())
    }
}
