//! One-class collaborative filtering for course registration data.
//!
//! Registration records are split into blocks by student status (graduated
//! or current) and course level (fundamental or advanced). A BPR matrix
//! factorization model is trained in two stages: course factors on all
//! usable blocks, then current students' factors against the frozen course
//! factors. A course-transition network built from year-to-year
//! registrations regularizes the course factors and drives a personalized
//! PageRank recommender; a linear RankSVM combines the two. Everything is
//! scored by per-student AUC against held-out final-year registrations.

pub mod baselines;
pub mod bpr;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod network;
pub mod parallel;
pub mod ppr;
pub mod ranking;
pub mod rng;
pub mod synthetic;
pub mod two_stage;

pub use bpr::{FactorModel, Hyperparameters, Triple};
pub use dataset::{PartitionedDataset, RegistrationRecord};
pub use error::{Error, Result};
pub use network::TransitionNetwork;
pub use ranking::{Recommender, ScoredRanking};
