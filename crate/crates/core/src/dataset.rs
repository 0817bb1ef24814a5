//! Registration records, course classification and the FG/AG/FC partition.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexSet;
use log::warn;

use crate::error::{Error, Result};

pub const DEFAULT_GRADES: u8 = 4;

/// One (student, course, cohort, grade) registration event.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegistrationRecord {
    pub student_id: String,
    pub course_id: String,
    pub cohort_year: i32,
    /// 1 = first year.
    pub grade_level: u8,
}

impl RegistrationRecord {
    pub fn new(student: &str, course: &str, cohort_year: i32, grade_level: u8) -> Self {
        RegistrationRecord {
            student_id: student.to_string(),
            course_id: course.to_string(),
            cohort_year,
            grade_level,
        }
    }
}

const CSV_HEADER: [&str; 4] = ["student_id", "course_id", "cohort_year", "grade_level"];

pub fn load_records(path: impl AsRef<Path>, grades: u8) -> Result<Vec<RegistrationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(file, path, grades)
}

/// Parses the `student_id,course_id,cohort_year,grade_level` CSV layout.
/// Duplicate (student, course, grade) triples collapse to their first
/// occurrence.
pub fn parse_records<R: Read>(
    reader: R,
    origin: &Path,
    grades: u8,
) -> Result<Vec<RegistrationRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`", CSV_HEADER.join(",")),
        ));
    }

    let mut seen = HashSet::new();
    let mut cohorts: HashMap<String, i32> = HashMap::new();
    let mut out = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = result.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        let cohort_year: i32 = rec[2]
            .parse()
            .map_err(|_| parse_err(line, format!("cohort_year `{}` is not an integer", &rec[2])))?;
        let grade: i64 = rec[3]
            .parse()
            .map_err(|_| parse_err(line, format!("grade_level `{}` is not an integer", &rec[3])))?;
        if grade < 1 || grade > grades as i64 {
            return Err(Error::Validation(format!(
                "line {line}: grade_level {grade} outside [1, {grades}]"
            )));
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_err(line, "empty student or course id".into()));
        }
        let record = RegistrationRecord::new(&rec[0], &rec[1], cohort_year, grade as u8);
        match cohorts.get(&record.student_id) {
            Some(&y) if y != cohort_year => {
                return Err(Error::Validation(format!(
                    "line {line}: student `{}` listed with cohorts {y} and {cohort_year}",
                    record.student_id
                )))
            }
            Some(_) => {}
            None => {
                cohorts.insert(record.student_id.clone(), cohort_year);
            }
        }
        let key = (
            record.student_id.clone(),
            record.course_id.clone(),
            record.grade_level,
        );
        if seen.insert(key) {
            out.push(record);
        }
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[RegistrationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Validation(format!("csv write: {e}"));
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record([
            r.student_id.as_str(),
            r.course_id.as_str(),
            &r.cohort_year.to_string(),
            &r.grade_level.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("csv flush: {e}")))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CourseKind {
    Fundamental,
    Advanced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CourseClass {
    pub course_id: String,
    pub kind: CourseKind,
    /// Grade with the most registrations (lowest grade on ties).
    pub dominant_grade: u8,
    /// Share of registrations at `dominant_grade`.
    pub dominance_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub advanced_grade: u8,
    pub dominance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            advanced_grade: 3,
            dominance: 0.5,
        }
    }
}

/// A course is advanced when at least `dominance` of its registrations fall
/// at grade `advanced_grade` or later.
pub fn classify_courses(
    records: &[RegistrationRecord],
    opts: ClassifyOptions,
) -> Result<BTreeMap<String, CourseClass>> {
    if opts.advanced_grade < 1 {
        return Err(Error::Config("advanced_grade must be >= 1".into()));
    }
    if !(opts.dominance > 0.0 && opts.dominance <= 1.0) {
        return Err(Error::Config(format!(
            "dominance {} outside (0, 1]",
            opts.dominance
        )));
    }
    let mut per_course: BTreeMap<&str, BTreeMap<u8, usize>> = BTreeMap::new();
    for r in records {
        *per_course
            .entry(&r.course_id)
            .or_default()
            .entry(r.grade_level)
            .or_default() += 1;
    }
    Ok(per_course
        .into_iter()
        .map(|(course, by_grade)| {
            let total: usize = by_grade.values().sum();
            let high: usize = by_grade.range(opts.advanced_grade..).map(|(_, n)| n).sum();
            // strict `>` keeps the lowest grade on ties
            let (dominant_grade, dominant_count) = by_grade.iter().fold(
                (0u8, 0usize),
                |best, (&g, &n)| if n > best.1 { (g, n) } else { best },
            );
            let kind = if high as f64 / total as f64 >= opts.dominance {
                CourseKind::Advanced
            } else {
                CourseKind::Fundamental
            };
            (
                course.to_string(),
                CourseClass {
                    course_id: course.to_string(),
                    kind,
                    dominant_grade,
                    dominance_fraction: dominant_count as f64 / total as f64,
                },
            )
        })
        .collect())
}

/// The matrix blocks a training record can belong to. The fourth block
/// (current students at advanced courses) is never used for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    FG,
    AG,
    FC,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Block::FG => "FG",
            Block::AG => "AG",
            Block::FC => "FC",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRecord {
    pub record: RegistrationRecord,
    pub block: Block,
}

/// Records split into blocks, with dense indices for students and courses.
///
/// Both index maps are sorted by id, so comparing indices is the same as
/// comparing ids lexicographically.
#[derive(Clone, Debug)]
pub struct PartitionedDataset {
    pub grades: u8,
    pub records: Vec<LabeledRecord>,
    /// Current students' registrations at advanced courses. Observed history,
    /// but excluded from training.
    pub excluded: Vec<RegistrationRecord>,
    /// The target cohort's final-grade registrations.
    pub heldout: Vec<RegistrationRecord>,
    pub student_index: IndexSet<String>,
    pub course_index: IndexSet<String>,
    pub graduated_students: BTreeSet<String>,
    pub current_students: BTreeSet<String>,
    /// Non-target students without a final-grade record; left out entirely.
    pub ignored_students: BTreeSet<String>,
    pub course_classes: BTreeMap<String, CourseClass>,
    current_mask: Vec<bool>,
    advanced_mask: Vec<bool>,
    observed: Vec<Vec<(usize, u8)>>,
}

pub fn partition(
    records: &[RegistrationRecord],
    classes: &BTreeMap<String, CourseClass>,
    target_cohort: Option<i32>,
    grades: u8,
) -> Result<PartitionedDataset> {
    let mut cohort_of: BTreeMap<&str, i32> = BTreeMap::new();
    let mut complete: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        if r.grade_level < 1 || r.grade_level > grades {
            return Err(Error::Validation(format!(
                "record ({}, {}) has grade {} outside [1, {grades}]",
                r.student_id, r.course_id, r.grade_level
            )));
        }
        match cohort_of.insert(&r.student_id, r.cohort_year) {
            Some(y) if y != r.cohort_year => {
                return Err(Error::Validation(format!(
                    "student `{}` listed with cohorts {y} and {}",
                    r.student_id, r.cohort_year
                )))
            }
            _ => {}
        }
        if r.grade_level == grades {
            complete.insert(&r.student_id);
        }
    }

    let is_target = |r: &RegistrationRecord| Some(r.cohort_year) == target_cohort;
    if let Some(y) = target_cohort {
        if !cohort_of.values().any(|&c| c == y) {
            return Err(Error::Validation(format!("target cohort {y} not in data")));
        }
        if !records
            .iter()
            .any(|r| is_target(r) && r.grade_level == grades)
        {
            return Err(Error::Validation(format!(
                "target cohort {y} has no grade-{grades} records to hold out"
            )));
        }
    }

    let mut graduated = BTreeSet::new();
    let mut current = BTreeSet::new();
    let mut ignored = BTreeSet::new();
    for (&s, &y) in &cohort_of {
        if Some(y) == target_cohort {
            current.insert(s.to_string());
        } else if complete.contains(s) {
            graduated.insert(s.to_string());
        } else {
            ignored.insert(s.to_string());
        }
    }
    if !ignored.is_empty() {
        warn!(
            "ignoring {} students with incomplete histories",
            ignored.len()
        );
    }

    let student_index: IndexSet<String> = graduated
        .iter()
        .chain(&current)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let course_index: IndexSet<String> = records
        .iter()
        .filter(|r| !ignored.contains(&r.student_id))
        .map(|r| r.course_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut labeled = Vec::new();
    let mut excluded = Vec::new();
    let mut heldout = Vec::new();
    for r in records {
        if ignored.contains(&r.student_id) {
            continue;
        }
        let is_current = current.contains(&r.student_id);
        if is_current && r.grade_level == grades {
            heldout.push(r.clone());
            continue;
        }
        let class = classes
            .get(&r.course_id)
            .ok_or_else(|| Error::Validation(format!("course `{}` has no class", r.course_id)))?;
        let block = match (is_current, class.kind) {
            (false, CourseKind::Fundamental) => Block::FG,
            (false, CourseKind::Advanced) => Block::AG,
            (true, CourseKind::Fundamental) => Block::FC,
            (true, CourseKind::Advanced) => {
                excluded.push(r.clone());
                continue;
            }
        };
        labeled.push(LabeledRecord {
            record: r.clone(),
            block,
        });
    }

    let current_mask = student_index.iter().map(|s| current.contains(s)).collect();
    let advanced_mask = course_index
        .iter()
        .map(|c| {
            classes
                .get(c)
                .is_none_or(|cls| cls.kind == CourseKind::Advanced)
        })
        .collect();
    let mut observed = vec![Vec::new(); student_index.len()];
    for r in labeled.iter().map(|l| &l.record).chain(&excluded) {
        let s = student_index.get_index_of(&r.student_id).expect("indexed");
        let c = course_index.get_index_of(&r.course_id).expect("indexed");
        observed[s].push((c, r.grade_level));
    }
    for h in &mut observed {
        h.sort_unstable();
        h.dedup();
    }

    Ok(PartitionedDataset {
        grades,
        records: labeled,
        excluded,
        heldout,
        student_index,
        course_index,
        graduated_students: graduated,
        current_students: current,
        ignored_students: ignored,
        course_classes: classes.clone(),
        current_mask,
        advanced_mask,
        observed,
    })
}

impl PartitionedDataset {
    pub fn num_students(&self) -> usize {
        self.student_index.len()
    }

    pub fn num_courses(&self) -> usize {
        self.course_index.len()
    }

    pub fn student(&self, id: &str) -> Option<usize> {
        self.student_index.get_index_of(id)
    }

    pub fn course(&self, id: &str) -> Option<usize> {
        self.course_index.get_index_of(id)
    }

    pub fn student_id(&self, s: usize) -> &str {
        &self.student_index[s]
    }

    pub fn course_id(&self, c: usize) -> &str {
        &self.course_index[c]
    }

    pub fn is_current(&self, s: usize) -> bool {
        self.current_mask[s]
    }

    /// Courses without a class (seen only in held-out data) count as advanced.
    pub fn is_advanced(&self, c: usize) -> bool {
        self.advanced_mask[c]
    }

    pub fn current_indices(&self) -> Vec<usize> {
        (0..self.num_students())
            .filter(|&s| self.is_current(s))
            .collect()
    }

    pub fn graduated_indices(&self) -> Vec<usize> {
        (0..self.num_students())
            .filter(|&s| !self.is_current(s))
            .collect()
    }

    pub fn fundamental_courses(&self) -> Vec<usize> {
        (0..self.num_courses())
            .filter(|&c| !self.is_advanced(c))
            .collect()
    }

    /// (student, course) index pairs of the records in the given blocks.
    pub fn positives(&self, blocks: &[Block]) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .records
            .iter()
            .filter(|l| blocks.contains(&l.block))
            .map(|l| {
                (
                    self.student(&l.record.student_id).expect("indexed"),
                    self.course(&l.record.course_id).expect("indexed"),
                )
            })
            .collect();
        // a course repeated across grades is still one positive
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every observed (course, grade) of a student, excluding held-out truth.
    pub fn history(&self, s: usize) -> &[(usize, u8)] {
        &self.observed[s]
    }

    pub fn taken_courses(&self, s: usize) -> BTreeSet<usize> {
        self.observed[s].iter().map(|&(c, _)| c).collect()
    }

    /// Courses from the student's most recent observed grade.
    pub fn latest_courses(&self, s: usize) -> BTreeSet<usize> {
        let last = self.observed[s].iter().map(|&(_, g)| g).max();
        self.observed[s]
            .iter()
            .filter(|&&(_, g)| Some(g) == last)
            .map(|&(c, _)| c)
            .collect()
    }

    /// All observed records that are not held out.
    pub fn observed_records(&self) -> impl Iterator<Item = &RegistrationRecord> {
        self.records.iter().map(|l| &l.record).chain(&self.excluded)
    }

    pub fn heldout_truth(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for r in &self.heldout {
            let s = self.student(&r.student_id).expect("indexed");
            let c = self.course(&r.course_id).expect("indexed");
            out.entry(s).or_default().insert(c);
        }
        out
    }

    pub fn block_count(&self, block: Block) -> usize {
        self.records.iter().filter(|l| l.block == block).count()
    }
}

/// Splits off a target cohort's final-grade records, classifies courses on
/// what remains, then partitions.
pub fn prepare(
    records: &[RegistrationRecord],
    target_cohort: Option<i32>,
    grades: u8,
    opts: ClassifyOptions,
) -> Result<PartitionedDataset> {
    let visible: Vec<RegistrationRecord> = records
        .iter()
        .filter(|r| !(Some(r.cohort_year) == target_cohort && r.grade_level == grades))
        .cloned()
        .collect();
    let classes = classify_courses(&visible, opts)?;
    partition(records, &classes, target_cohort, grades)
}

pub fn cohorts(records: &[RegistrationRecord]) -> Vec<i32> {
    records
        .iter()
        .map(|r| r.cohort_year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// The registrations from the running example of three students over
/// three years and courses A to D.
pub fn example_records() -> Vec<RegistrationRecord> {
    type Row<'a> = (&'a str, [&'a [&'a str]; 3]);
    let rows: [Row; 3] = [
        ("s1", [&["A", "B"], &["C"], &["D"]]),
        ("s2", [&["A"], &["C", "D"], &["B"]]),
        ("s3", [&["C"], &["A", "D"], &["B"]]),
    ];
    let mut out = Vec::new();
    for (s, years) in rows {
        for (g, courses) in (1u8..).zip(years) {
            for c in courses {
                out.push(RegistrationRecord::new(s, c, 2008, g));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<RegistrationRecord>> {
        parse_records(text.as_bytes(), Path::new("mem.csv"), 4)
    }

    #[test]
    fn duplicate_rows_collapse() {
        let recs =
            parse("student_id,course_id,cohort_year,grade_level\ns1,A,2008,1\ns1,A,2008,1\n")
                .unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn grade_out_of_range_is_validation_error() {
        let err = parse("student_id,course_id,cohort_year,grade_level\ns1,A,2008,9\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let err = parse("student_id,course_id,cohort_year,grade_level\ns1,A,2008,1\ns1,B,2008\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err =
            parse("student_id,course_id,cohort_year,grade_level\ns1,A,2008,one\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse("a,b,c,d\n").is_err());
    }

    #[test]
    fn example_round_trips_through_csv() {
        let recs = example_records();
        assert_eq!(recs.len(), 12);
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let back = parse_records(buf.as_slice(), Path::new("mem"), 3).unwrap();
        assert_eq!(back, recs);
        let students: BTreeSet<_> = back.iter().map(|r| r.student_id.as_str()).collect();
        let courses: BTreeSet<_> = back.iter().map(|r| r.course_id.as_str()).collect();
        assert_eq!(students.len(), 3);
        assert_eq!(
            courses.into_iter().collect::<Vec<_>>(),
            ["A", "B", "C", "D"]
        );
    }

    fn grades_for(course: &str, grades: &[u8]) -> Vec<RegistrationRecord> {
        grades
            .iter()
            .enumerate()
            .map(|(k, &g)| RegistrationRecord::new(&format!("s{k}"), course, 2008, g))
            .collect()
    }

    #[test]
    fn classification_by_grade_mass() {
        let mut recs = grades_for("low", &[1, 1]);
        recs.extend(grades_for("high", &[4]));
        recs.extend(grades_for("mixed", &[1, 3, 4, 4]));
        recs.extend(grades_for("half", &[1, 2, 3, 4]));
        recs.extend(grades_for("minor", &[1, 1, 2, 3]));
        let classes = classify_courses(&recs, ClassifyOptions::default()).unwrap();
        assert_eq!(classes["low"].kind, CourseKind::Fundamental);
        assert_eq!(classes["high"].kind, CourseKind::Advanced);
        assert_eq!(classes["mixed"].kind, CourseKind::Advanced);
        assert_eq!(classes["mixed"].dominant_grade, 4);
        assert_eq!(classes["mixed"].dominance_fraction, 0.5);
        // exactly half the mass at grade >= 3 meets the threshold
        assert_eq!(classes["half"].kind, CourseKind::Advanced);
        assert_eq!(classes["minor"].kind, CourseKind::Fundamental);
        assert_eq!(classes["low"].dominance_fraction, 1.0);
    }

    #[test]
    fn classification_rejects_bad_options() {
        let recs = grades_for("x", &[1]);
        let bad = ClassifyOptions {
            advanced_grade: 3,
            dominance: 0.0,
        };
        assert!(classify_courses(&recs, bad).is_err());
    }

    #[test]
    fn classification_ignores_order() {
        let mut recs = example_records();
        let a = classify_courses(&recs, ClassifyOptions::default()).unwrap();
        recs.reverse();
        let b = classify_courses(&recs, ClassifyOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn graduated_only_partition_has_no_fc() {
        let recs = example_records();
        let classes = classify_courses(&recs, ClassifyOptions::default()).unwrap();
        let ds = partition(&recs, &classes, None, 3).unwrap();
        assert_eq!(ds.block_count(Block::FC), 0);
        assert!(ds.current_students.is_empty());
        assert!(ds.heldout.is_empty());
        assert_eq!(ds.records.len(), 12);
        assert_eq!(ds.graduated_students.len(), 3);
    }

    #[test]
    fn example_partition_with_s3_current() {
        let mut recs = example_records();
        for r in recs.iter_mut().filter(|r| r.student_id == "s3") {
            r.cohort_year = 2009;
        }
        let visible: Vec<_> = recs
            .iter()
            .filter(|r| !(r.student_id == "s3" && r.grade_level == 3))
            .cloned()
            .collect();
        let classes = classify_courses(&visible, ClassifyOptions::default()).unwrap();
        // grade mass at >= 3 over visible rows: A 0/3, B 1/2, C 0/3, D 1/3
        assert_eq!(classes["A"].kind, CourseKind::Fundamental);
        assert_eq!(classes["B"].kind, CourseKind::Advanced);
        assert_eq!(classes["C"].kind, CourseKind::Fundamental);
        assert_eq!(classes["D"].kind, CourseKind::Fundamental);

        let ds = partition(&recs, &classes, Some(2009), 3).unwrap();
        let held: Vec<_> = ds.heldout.iter().map(|r| r.course_id.as_str()).collect();
        assert_eq!(held, ["B"]);
        let s3_blocks: Vec<_> = ds
            .records
            .iter()
            .filter(|l| l.record.student_id == "s3")
            .map(|l| (l.record.course_id.as_str(), l.block))
            .collect();
        assert_eq!(
            s3_blocks,
            [("C", Block::FC), ("A", Block::FC), ("D", Block::FC)]
        );
        assert!(ds.excluded.is_empty());
        assert_eq!(ds.block_count(Block::AG), 2);
        assert_eq!(ds.block_count(Block::FG), 6);

        // no loss, no duplication for the target cohort
        let mut target: Vec<_> = ds
            .records
            .iter()
            .map(|l| l.record.clone())
            .chain(ds.heldout.clone())
            .filter(|r| r.student_id == "s3")
            .collect();
        target.sort();
        let mut orig: Vec<_> = recs
            .iter()
            .filter(|r| r.student_id == "s3")
            .cloned()
            .collect();
        orig.sort();
        assert_eq!(target, orig);
    }

    #[test]
    fn current_advanced_records_are_excluded_from_training() {
        let recs = vec![
            RegistrationRecord::new("g", "F", 2008, 1),
            RegistrationRecord::new("g", "X", 2008, 2),
            RegistrationRecord::new("c", "F", 2009, 1),
            RegistrationRecord::new("c", "X", 2009, 1),
            RegistrationRecord::new("c", "Y", 2009, 2),
        ];
        let classes = classify_courses(
            &recs,
            ClassifyOptions {
                advanced_grade: 2,
                dominance: 0.5,
            },
        )
        .unwrap();
        let ds = partition(&recs, &classes, Some(2009), 2).unwrap();
        assert_eq!(ds.excluded.len(), 1);
        assert_eq!(ds.excluded[0].course_id, "X");
        assert!(ds
            .records
            .iter()
            .all(|l| !(l.record.student_id == "c" && l.record.course_id == "X")));
        let c = ds.student("c").unwrap();
        // excluded records still count as observed history
        assert!(ds.taken_courses(c).contains(&ds.course("X").unwrap()));
    }

    #[test]
    fn missing_target_cohort_is_an_error() {
        let recs = example_records();
        let classes = classify_courses(&recs, ClassifyOptions::default()).unwrap();
        assert!(partition(&recs, &classes, Some(1999), 3).is_err());
        // nothing at the final grade to hold out
        assert!(partition(&recs, &classes, Some(2008), 4).is_err());
    }

    #[test]
    fn incomplete_non_target_students_are_ignored() {
        let mut recs = example_records();
        recs.push(RegistrationRecord::new("dropout", "A", 2008, 1));
        let ds = prepare(&recs, None, 3, ClassifyOptions::default()).unwrap();
        assert!(ds.ignored_students.contains("dropout"));
        assert!(ds.student("dropout").is_none());
    }

    #[test]
    fn partition_is_deterministic() {
        let recs = example_records();
        let a = prepare(&recs, None, 3, ClassifyOptions::default()).unwrap();
        let b = prepare(&recs, None, 3, ClassifyOptions::default()).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn latest_courses_come_from_the_last_grade() {
        let ds = prepare(&example_records(), None, 3, ClassifyOptions::default()).unwrap();
        let s2 = ds.student("s2").unwrap();
        assert_eq!(
            ds.latest_courses(s2),
            BTreeSet::from([ds.course("B").unwrap()])
        );
    }
}
