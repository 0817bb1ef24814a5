//! Run configuration: defaults, overridden by a `key=value` file, overridden
//! by command-line flags.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::bpr::Hyperparameters;
use crate::dataset::{ClassifyOptions, DEFAULT_GRADES};
use crate::error::{Error, Result};
use crate::network::DEFAULT_THRESHOLD;
use crate::ppr::DEFAULT_GAMMA;
use crate::synthetic::SynthConfig;
use crate::two_stage::TwoStageOptions;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub hyper: Hyperparameters,
    pub threshold: f64,
    pub gamma: f64,
    pub ppr_full_history: bool,
    /// Cohort whose final-grade registrations are held out. Defaults to the
    /// latest cohort in the data.
    pub target_cohort: Option<i32>,
    /// Cohort used to fit the ensemble. Defaults to the one before the target.
    pub validation_cohort: Option<i32>,
    pub classify: ClassifyOptions,
    pub grades: u8,
    pub stage2_alpha: Option<f64>,
    pub stage2_epochs: Option<usize>,
    pub reinit_stage2: bool,
    pub early_stop_patience: Option<usize>,
    pub include_taken: bool,
    pub reg_c: f64,
    pub svm_epochs: usize,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hyper: Hyperparameters::default(),
            threshold: DEFAULT_THRESHOLD,
            gamma: DEFAULT_GAMMA,
            ppr_full_history: false,
            target_cohort: None,
            validation_cohort: None,
            classify: ClassifyOptions::default(),
            grades: DEFAULT_GRADES,
            stage2_alpha: None,
            stage2_epochs: None,
            reinit_stage2: false,
            early_stop_patience: None,
            include_taken: false,
            reg_c: 1.0,
            svm_epochs: 50,
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.hyper.k = parse(key, value)?,
            "lambda" => self.hyper.lambda = parse(key, value)?,
            "alpha" => self.hyper.alpha = parse(key, value)?,
            "beta" => self.hyper.beta = parse(key, value)?,
            "epochs" => self.hyper.epochs = parse(key, value)?,
            "seed" => self.hyper.seed = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "ppr_full_history" => self.ppr_full_history = parse(key, value)?,
            "target_cohort" => self.target_cohort = opt(key, value)?,
            "validation_cohort" => self.validation_cohort = opt(key, value)?,
            "advanced_grade" => self.classify.advanced_grade = parse(key, value)?,
            "dominance" => self.classify.dominance = parse(key, value)?,
            "grades" => {
                self.grades = parse(key, value)?;
                self.synth.grades = self.grades;
            }
            "stage2_alpha" => self.stage2_alpha = opt(key, value)?,
            "stage2_epochs" => self.stage2_epochs = opt(key, value)?,
            "reinit_stage2" => self.reinit_stage2 = parse(key, value)?,
            "early_stop_patience" => self.early_stop_patience = opt(key, value)?,
            "include_taken" => self.include_taken = parse(key, value)?,
            "reg_c" => self.reg_c = parse(key, value)?,
            "svm_epochs" => self.svm_epochs = parse(key, value)?,
            "cohorts" => self.synth.cohorts = parse(key, value)?,
            "first_cohort_year" => self.synth.first_cohort_year = parse(key, value)?,
            "students_per_cohort" => self.synth.students_per_cohort = parse(key, value)?,
            "courses" => self.synth.courses = parse(key, value)?,
            "courses_per_grade" => self.synth.courses_per_grade = parse(key, value)?,
            "concentration" => self.synth.concentration = parse(key, value)?,
            "tracks" => self.synth.tracks = parse(key, value)?,
            "track_affinity" => self.synth.track_affinity = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{raw}`", n + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma {} outside (0, 1)",
                self.gamma
            )));
        }
        if self.grades == 0 || self.classify.advanced_grade > self.grades {
            return Err(Error::Config(format!(
                "advanced_grade {} outside [1, {}]",
                self.classify.advanced_grade, self.grades
            )));
        }
        if self.reg_c.is_nan() || self.reg_c <= 0.0 {
            return Err(Error::Config("reg_c must be positive".into()));
        }
        if let Some(a) = self.stage2_alpha {
            if a.is_nan() || a <= 0.0 {
                return Err(Error::Config("stage2_alpha must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn two_stage_options(&self) -> TwoStageOptions {
        TwoStageOptions {
            stage2_alpha: self.stage2_alpha,
            stage2_epochs: self.stage2_epochs,
            reinit_current: self.reinit_stage2,
            early_stop: None,
        }
    }

    /// Every key with its effective value, in `key=value` form.
    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let s = &self.synth;
        let rows: Vec<(&str, String)> = vec![
            ("k", h.k.to_string()),
            ("lambda", h.lambda.to_string()),
            ("alpha", h.alpha.to_string()),
            ("beta", h.beta.to_string()),
            ("epochs", h.epochs.to_string()),
            ("seed", h.seed.to_string()),
            ("threshold", self.threshold.to_string()),
            ("gamma", self.gamma.to_string()),
            ("ppr_full_history", self.ppr_full_history.to_string()),
            ("target_cohort", show(&self.target_cohort)),
            ("validation_cohort", show(&self.validation_cohort)),
            ("advanced_grade", self.classify.advanced_grade.to_string()),
            ("dominance", self.classify.dominance.to_string()),
            ("grades", self.grades.to_string()),
            ("stage2_alpha", show(&self.stage2_alpha)),
            ("stage2_epochs", show(&self.stage2_epochs)),
            ("reinit_stage2", self.reinit_stage2.to_string()),
            ("early_stop_patience", show(&self.early_stop_patience)),
            ("include_taken", self.include_taken.to_string()),
            ("reg_c", self.reg_c.to_string()),
            ("svm_epochs", self.svm_epochs.to_string()),
            ("cohorts", s.cohorts.to_string()),
            ("first_cohort_year", s.first_cohort_year.to_string()),
            ("students_per_cohort", s.students_per_cohort.to_string()),
            ("courses", s.courses.to_string()),
            ("courses_per_grade", s.courses_per_grade.to_string()),
            ("concentration", s.concentration.to_string()),
            ("tracks", s.tracks.to_string()),
            ("track_affinity", s.track_affinity.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}
