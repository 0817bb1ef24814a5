//! Synthetic registration data with grade-concentrated course demand.
//!
//! Every course gets a home grade, a track and a base popularity. Each
//! student belongs to one track. At grade `g` a student picks
//! `courses_per_grade` distinct courses: with probability `concentration`
//! from the courses whose home grade is `g`, otherwise from the rest. Within
//! the chosen group, courses are weighted by popularity and by
//! `track_affinity` when the course matches the student's track.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::RegistrationRecord;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub cohorts: usize,
    pub first_cohort_year: i32,
    pub students_per_cohort: usize,
    pub courses: usize,
    pub courses_per_grade: usize,
    pub grades: u8,
    /// Probability that a pick comes from the current grade's home courses.
    pub concentration: f64,
    pub tracks: usize,
    /// Weight multiplier for courses in the student's own track.
    pub track_affinity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            cohorts: 3,
            first_cohort_year: 2008,
            students_per_cohort: 100,
            courses: 120,
            courses_per_grade: 6,
            grades: 4,
            concentration: 0.8,
            tracks: 6,
            track_affinity: 6.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.cohorts == 0 || self.students_per_cohort == 0 {
            return fail("need at least one cohort and one student".into());
        }
        if self.grades == 0 {
            return fail("grades must be >= 1".into());
        }
        if self.courses < self.grades as usize {
            return fail(format!(
                "{} courses cannot cover {} grades",
                self.courses, self.grades
            ));
        }
        if self.tracks == 0 {
            return fail("tracks must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.concentration) {
            return fail(format!(
                "concentration {} outside [0, 1]",
                self.concentration
            ));
        }
        if !self.track_affinity.is_finite() || self.track_affinity <= 0.0 {
            return fail("track_affinity must be positive".into());
        }
        if self.courses_per_grade == 0 {
            return fail("courses_per_grade must be >= 1".into());
        }
        if self.courses_per_grade * self.grades as usize > self.courses {
            return fail(format!(
                "{} courses per grade over {} grades exceeds {} available courses",
                self.courses_per_grade, self.grades, self.courses
            ));
        }
        let smallest_home = self.courses / self.grades as usize;
        if self.concentration == 1.0 && self.courses_per_grade > smallest_home {
            return fail(format!(
                "concentration 1 needs {} home courses per grade, only {smallest_home} exist",
                self.courses_per_grade
            ));
        }
        Ok(())
    }
}

struct Course {
    home_grade: u8,
    track: usize,
    popularity: f64,
}

pub fn course_id(c: usize) -> String {
    format!("C{c:03}")
}

pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Vec<RegistrationRecord>> {
    config.validate()?;
    let mut rng = stream(seed, Stream::Synth);
    let grades = config.grades as usize;

    let mut slots: Vec<usize> = (0..config.courses).collect();
    slots.shuffle(&mut rng);
    let courses: Vec<Course> = slots
        .iter()
        .map(|&slot| Course {
            home_grade: (slot * grades / config.courses) as u8 + 1,
            track: slot % config.tracks,
            popularity: 0.5 + 1.5 * rng.random::<f64>(),
        })
        .collect();

    let mut records = Vec::new();
    for cohort in 0..config.cohorts {
        let year = config.first_cohort_year + cohort as i32;
        for k in 0..config.students_per_cohort {
            let student = format!("S{year}-{k:04}");
            let track = rng.random_range(0..config.tracks);
            let mut taken = vec![false; config.courses];
            for grade in 1..=config.grades {
                let mut picked = Vec::with_capacity(config.courses_per_grade);
                for _ in 0..config.courses_per_grade {
                    let from_home = rng.random::<f64>() < config.concentration;
                    let weights = |home: bool| -> Vec<f64> {
                        courses
                            .iter()
                            .enumerate()
                            .map(|(c, course)| {
                                if taken[c] || (course.home_grade == grade) != home {
                                    0.0
                                } else if course.track == track {
                                    course.popularity * config.track_affinity
                                } else {
                                    course.popularity
                                }
                            })
                            .collect()
                    };
                    let mut w = weights(from_home);
                    if w.iter().all(|&x| x == 0.0) {
                        w = weights(!from_home);
                    }
                    let dist = WeightedIndex::new(&w)
                        .map_err(|e| Error::Config(format!("course sampling failed: {e}")))?;
                    let c = dist.sample(&mut rng);
                    taken[c] = true;
                    picked.push(c);
                }
                picked.sort_unstable();
                records.extend(
                    picked
                        .into_iter()
                        .map(|c| RegistrationRecord::new(&student, &course_id(c), year, grade)),
                );
            }
        }
    }
    Ok(records)
}
