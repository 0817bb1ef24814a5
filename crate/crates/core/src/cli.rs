//! Command-line front end. Every subcommand resolves a [`RunConfig`] from an
//! optional `--config` file plus flags, and writes the effective config next
//! to its outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::bpr::{read_model, write_model};
use crate::config::RunConfig;
use crate::dataset::{load_records, prepare, write_records, PartitionedDataset};
use crate::ensemble::{
    ensemble_rank, features_from_tables, sample_pairs, train_ranksvm, FeatureVector, RankSvmModel,
};
use crate::error::{Error, Result};
use crate::evaluation::{auc_of, candidates, paired_test, read_per_student, EvaluationReport};
use crate::experiment::{dataset_network, resolve_cohorts, run_ablation, train, Method};
use crate::network::TransitionNetwork;
use crate::parallel::{map_indexed, Execution};
use crate::ppr::PprRecommender;
use crate::ranking::{
    read_scores, read_truth, write_scores, write_truth, Recommender, ScoreTable, Truth,
};
use crate::rng::{stream, Stream};
use crate::synthetic::generate_synthetic;

#[derive(Parser, Debug)]
#[command(
    name = "ocrank",
    version,
    about = "Course recommendation from registration records"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct Partitioning {
    /// Registration CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Cohort whose final grade is held out; defaults to the latest.
    #[arg(long)]
    target_cohort: Option<i32>,
    #[arg(long)]
    advanced_grade: Option<u8>,
    #[arg(long)]
    dominance: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic registration dataset.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split records into training blocks and held-out truth.
    Partition {
        #[command(flatten)]
        data: Partitioning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the thresholded course transition network.
    BuildGraph {
        #[command(flatten)]
        data: Partitioning,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a factor model.
    Train {
        #[command(flatten)]
        data: Partitioning,
        #[arg(long, value_enum, default_value_t = TrainMethod::TwoStage)]
        method: TrainMethod,
        /// Regularize course factors with the transition network.
        #[arg(long)]
        cdr: bool,
        /// Edge list from build-graph; built from the data when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidate courses for current students.
    Recommend {
        #[command(flatten)]
        data: Partitioning,
        #[arg(long, conflicts_with = "ppr", required_unless_present = "ppr")]
        model: Option<PathBuf>,
        /// Score with personalized PageRank over --graph.
        #[arg(long, requires = "graph")]
        ppr: bool,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Only this student; all current students when omitted.
        #[arg(long)]
        student: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-student AUC of one or two score files, with paired tests for two.
    Evaluate {
        #[arg(long, num_args = 1, required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired tests on two per-student AUC files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Fit the RankSVM combiner on validation scores; optionally apply it.
    Ensemble {
        #[arg(long)]
        cf: PathBuf,
        #[arg(long)]
        ppr: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, requires = "test_ppr")]
        test_cf: Option<PathBuf>,
        #[arg(long, requires = "test_cf")]
        test_ppr: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every method on synthetic data for each seed and report AUCs.
    Experiment {
        #[arg(long, num_args = 1.., default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TrainMethod {
    Bpr,
    TwoStage,
}

/// Parses `argv` (program name first) and runs it. Returns the exit status:
/// 0 on success, 2 on usage errors, 1 on pipeline errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&parsed.common, parsed.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn apply_partitioning(cfg: &mut RunConfig, p: &Partitioning) {
    if p.target_cohort.is_some() {
        cfg.target_cohort = p.target_cohort;
    }
    if let Some(g) = p.advanced_grade {
        cfg.classify.advanced_grade = g;
    }
    if let Some(d) = p.dominance {
        cfg.classify.dominance = d;
    }
}

fn load_dataset(cfg: &RunConfig, input: &Path) -> Result<PartitionedDataset> {
    let records = load_records(input, cfg.grades)?;
    let (target, _) = resolve_cohorts(cfg, &records)?;
    let ds = prepare(&records, Some(target), cfg.grades, cfg.classify)?;
    info!(
        "{}: {} students ({} current), {} courses, target cohort {target}",
        input.display(),
        ds.num_students(),
        ds.current_students.len(),
        ds.num_courses()
    );
    Ok(ds)
}

fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn echo_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let text = cfg.to_text();
    write_file(&out.join("effective_config.txt"), |w| {
        w.write_all(text.as_bytes())
    })
}

fn read_graph(path: &Path, ds: &PartitionedDataset) -> Result<TransitionNetwork> {
    TransitionNetwork::read_edges(open(path)?, &ds.course_index)
}

fn execute(common: &Common, command: Command) -> Result<()> {
    let mut cfg = base_config(common)?;
    match command {
        Command::Generate { seed, out } => {
            if let Some(s) = seed {
                cfg.hyper.seed = s;
            }
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let records = generate_synthetic(&cfg.synth, cfg.hyper.seed)?;
            let path = out.join("records.csv");
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_records(BufWriter::new(file), &records)?;
            println!("wrote {} records to {}", records.len(), path.display());
        }
        Command::Partition { data, out } => {
            apply_partitioning(&mut cfg, &data);
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let ds = load_dataset(&cfg, &data.input)?;
            write_file(&out.join("blocks.tsv"), |w| {
                for lr in &ds.records {
                    writeln!(
                        w,
                        "{}\t{}\t{}",
                        lr.record.student_id, lr.record.course_id, lr.block
                    )?;
                }
                Ok(())
            })?;
            write_file(&out.join("classes.tsv"), |w| {
                for c in ds.course_classes.values() {
                    writeln!(
                        w,
                        "{}\t{:?}\t{}\t{}",
                        c.course_id, c.kind, c.dominant_grade, c.dominance_fraction
                    )?;
                }
                Ok(())
            })?;
            let truth = id_truth(&ds);
            write_file(&out.join("truth.tsv"), |w| write_truth(w, &truth))?;
            println!(
                "{} training records, {} held out, {} excluded",
                ds.records.len(),
                ds.heldout.len(),
                ds.excluded.len()
            );
        }
        Command::BuildGraph {
            data,
            threshold,
            out,
        } => {
            apply_partitioning(&mut cfg, &data);
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let ds = load_dataset(&cfg, &data.input)?;
            let net = dataset_network(&ds, cfg.threshold)?;
            write_file(&out.join("graph.tsv"), |w| net.write_edges(w))?;
            println!(
                "{} edges over {} courses (mean out-degree {:.2})",
                net.num_edges(),
                net.num_nodes(),
                net.average_out_degree()
            );
        }
        Command::Train {
            data,
            method,
            cdr,
            graph,
            epochs,
            seed,
            out,
        } => {
            apply_partitioning(&mut cfg, &data);
            if let Some(e) = epochs {
                cfg.hyper.epochs = e;
            }
            if let Some(s) = seed {
                cfg.hyper.seed = s;
            }
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let ds = load_dataset(&cfg, &data.input)?;
            let net = match (cdr, &graph) {
                (false, _) => None,
                (true, Some(path)) => Some(read_graph(path, &ds)?),
                (true, None) => Some(dataset_network(&ds, cfg.threshold)?),
            };
            let method = match method {
                TrainMethod::Bpr => Method::SingleStage,
                TrainMethod::TwoStage => Method::TwoStage,
            };
            let model = train(&cfg, &ds, method, net.as_ref())?;
            write_file(&out.join("model.txt"), |w| write_model(w, &model))?;
            println!("wrote {}", out.join("model.txt").display());
        }
        Command::Recommend {
            data,
            model,
            ppr,
            graph,
            student,
            out,
        } => {
            apply_partitioning(&mut cfg, &data);
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let ds = load_dataset(&cfg, &data.input)?;
            let students: Vec<usize> = match &student {
                Some(id) => vec![ds
                    .student(id)
                    .ok_or_else(|| Error::Validation(format!("unknown student `{id}`")))?],
                None => ds.current_indices(),
            };
            let table = if ppr {
                let net = read_graph(graph.as_deref().expect("clap requires --graph"), &ds)?;
                let rec = PprRecommender {
                    network: &net,
                    dataset: &ds,
                    gamma: cfg.gamma,
                    full_history: cfg.ppr_full_history,
                };
                score_table(&rec, &ds, &students, cfg.include_taken)?
            } else {
                let path = model.expect("clap requires --model or --ppr");
                let m = read_model(open(&path)?, cfg.hyper)?;
                if m.num_students() != ds.num_students() || m.num_courses() != ds.num_courses() {
                    return Err(Error::Validation(format!(
                        "model is {}x{} but the data has {} students and {} courses",
                        m.num_students(),
                        m.num_courses(),
                        ds.num_students(),
                        ds.num_courses()
                    )));
                }
                score_table(&m, &ds, &students, cfg.include_taken)?
            };
            write_file(&out.join("scores.tsv"), |w| write_scores(w, &table))?;
            if let Some(id) = &student {
                for (c, s) in table[id].iter().take(10) {
                    println!("{c}\t{s:.6}");
                }
            } else {
                println!("scored {} students", table.len());
            }
        }
        Command::Evaluate { scores, truth, out } => {
            if scores.len() > 2 {
                return Err(Error::Config(
                    "evaluate takes one or two --scores files".into(),
                ));
            }
            let truth = read_truth(open(&truth)?)?;
            let mut reports = Vec::new();
            for path in &scores {
                let report = evaluate_table(&read_scores(open(path)?)?, &truth);
                println!("{}", report.summary(&path.display().to_string()));
                reports.push(report);
            }
            if let Some(out) = &out {
                create_out_dir(out)?;
                for (k, r) in reports.iter().enumerate() {
                    write_file(&out.join(format!("auc_{k}.tsv")), |w| {
                        r.write_per_student(w)
                    })?;
                }
            }
            if let [a, b] = reports.as_slice() {
                print_paired(&a.per_student_auc, &b.per_student_auc)?;
            }
        }
        Command::Compare { a, b } => {
            let a = read_per_student(open(&a)?)?;
            let b = read_per_student(open(&b)?)?;
            print_paired(&a, &b)?;
        }
        Command::Ensemble {
            cf,
            ppr,
            truth,
            test_cf,
            test_ppr,
            seed,
            out,
        } => {
            if let Some(s) = seed {
                cfg.hyper.seed = s;
            }
            create_out_dir(&out)?;
            echo_config(&cfg, &out)?;
            let feats =
                features_from_tables(&read_scores(open(&cf)?)?, &read_scores(open(&ppr)?)?)?;
            let truth = read_truth(open(&truth)?)?;
            let mut rng = stream(cfg.hyper.seed, Stream::Ensemble);
            let mut pairs = Vec::new();
            for (s, rows) in &feats {
                let Some(pos) = truth.get(s) else { continue };
                let fv: Vec<FeatureVector> = rows.iter().map(|(_, f)| *f).collect();
                let positives: BTreeSet<usize> = rows
                    .iter()
                    .filter(|(c, _)| pos.contains(c))
                    .map(|(_, f)| f.course)
                    .collect();
                pairs.extend(sample_pairs(&fv, &positives, &mut rng));
            }
            let model = train_ranksvm(&pairs, cfg.reg_c, cfg.svm_epochs, cfg.hyper.seed)?;
            let line = model.to_line();
            write_file(&out.join("ensemble.txt"), |w| writeln!(w, "{line}"))?;
            println!(
                "trained on {} pairs: w = [{:.6}, {:.6}]",
                pairs.len(),
                model.weight[0],
                model.weight[1]
            );
            if let (Some(tc), Some(tp)) = (test_cf, test_ppr) {
                let test =
                    features_from_tables(&read_scores(open(&tc)?)?, &read_scores(open(&tp)?)?)?;
                let table = apply_ensemble(&model, &test)?;
                write_file(&out.join("scores.tsv"), |w| write_scores(w, &table))?;
            }
        }
        Command::Experiment {
            seeds,
            sequential,
            out,
        } => {
            cfg.validate()?;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let mut sums: BTreeMap<&'static str, f64> = BTreeMap::new();
            for &seed in &seeds {
                let report = run_ablation(&cfg, seed, exec)?;
                println!("seed {seed}");
                for (name, r) in &report.reports {
                    println!("  {name:<14} {:.4}", r.mean_auc);
                    *sums.entry(name).or_default() += r.mean_auc;
                }
                println!(
                    "  two-stage vs bpr: t p={:.3e} sign p={:.3e}; cdr vs two-stage: t p={:.3e} sign p={:.3e}",
                    report.test_two_stage.t_p_value,
                    report.test_two_stage.sign_p_value,
                    report.test_cdr.t_p_value,
                    report.test_cdr.sign_p_value
                );
            }
            println!("mean over {} seeds", seeds.len());
            for (name, s) in &sums {
                println!("  {name:<14} {:.4}", s / seeds.len() as f64);
            }
            if let Some(out) = &out {
                create_out_dir(out)?;
                echo_config(&cfg, out)?;
                write_file(&out.join("summary.tsv"), |w| {
                    for (name, s) in &sums {
                        writeln!(w, "{name}\t{}", s / seeds.len() as f64)?;
                    }
                    Ok(())
                })?;
            }
        }
    }
    Ok(())
}

fn id_truth(ds: &PartitionedDataset) -> Truth {
    ds.heldout_truth()
        .into_iter()
        .map(|(s, cs)| {
            (
                ds.student_id(s).to_string(),
                cs.into_iter()
                    .map(|c| ds.course_id(c).to_string())
                    .collect(),
            )
        })
        .collect()
}

fn score_table(
    rec: &dyn Recommender,
    ds: &PartitionedDataset,
    students: &[usize],
    include_taken: bool,
) -> Result<ScoreTable> {
    let rows = map_indexed(Execution::default(), students.len(), |k| {
        let s = students[k];
        let cands = candidates(ds, s, include_taken);
        rec.rank(s, &cands).map(|ranking| {
            let rows: Vec<(String, f64)> = ranking
                .entries()
                .iter()
                .map(|&(c, score)| (ds.course_id(c).to_string(), score))
                .collect();
            (ds.student_id(s).to_string(), rows)
        })
    });
    rows.into_iter().collect()
}

/// AUC per student over the scored candidates; students absent from the
/// truth are skipped.
fn evaluate_table(table: &ScoreTable, truth: &Truth) -> EvaluationReport {
    let mut aucs = BTreeMap::new();
    let mut skipped = 0;
    for (s, rows) in table {
        let Some(pos) = truth.get(s) else {
            skipped += 1;
            continue;
        };
        match auc_of(rows.iter().map(|(c, score)| (*score, pos.contains(c)))) {
            Some(a) => {
                aucs.insert(s.clone(), a);
            }
            None => skipped += 1,
        }
    }
    EvaluationReport::from_aucs(aucs, skipped)
}

fn apply_ensemble(
    model: &RankSvmModel,
    feats: &BTreeMap<String, Vec<(String, FeatureVector)>>,
) -> Result<ScoreTable> {
    let mut table = ScoreTable::new();
    for (s, rows) in feats {
        let fv: Vec<FeatureVector> = rows.iter().map(|(_, f)| *f).collect();
        let ranking = ensemble_rank(model, &fv)?;
        table.insert(
            s.clone(),
            ranking
                .entries()
                .iter()
                .map(|&(k, score)| (rows[k].0.clone(), score))
                .collect(),
        );
    }
    Ok(table)
}

fn print_paired(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<()> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(s, x)| b.get(s).map(|y| (*x, *y)))
        .unzip();
    let t = paired_test(&xs, &ys)?;
    println!(
        "paired over {} students: mean difference {:+.6}, t-test p = {:.6e}, sign test p = {:.6e}",
        t.n, t.mean_difference, t.t_p_value, t.sign_p_value
    );
    Ok(())
}
