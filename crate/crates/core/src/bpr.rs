//! BPR matrix factorization: pairwise logistic ranking loss over
//! (student, taken course, untaken course) triples, optionally regularized
//! by the course-transition network.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::TransitionNetwork;
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    /// Latent dimension.
    pub k: usize,
    /// L2 weight.
    pub lambda: f64,
    /// Learning rate.
    pub alpha: f64,
    /// Weight of the transition-network penalty.
    pub beta: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            k: 12,
            lambda: 0.05,
            alpha: 0.05,
            beta: 0.008,
            epochs: 30,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    /// Student factors, one row per student.
    pub p: Array2<f64>,
    /// Course factors, one row per course.
    pub q: Array2<f64>,
    pub hyper: Hyperparameters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub s: usize,
    pub i: usize,
    pub j: usize,
}

/// Entries drawn uniformly from [-0.01, 0.01].
pub fn init_model(
    num_students: usize,
    num_courses: usize,
    hyper: Hyperparameters,
) -> Result<FactorModel> {
    hyper.validate()?;
    if num_students == 0 || num_courses == 0 {
        return Err(Error::Config(format!(
            "cannot build a model for {num_students} students and {num_courses} courses"
        )));
    }
    let mut rng = stream(hyper.seed, Stream::Init);
    let mut draw = |_| rng.random_range(-0.01..=0.01);
    let p = Array2::from_shape_fn((num_students, hyper.k), &mut draw);
    let q = Array2::from_shape_fn((num_courses, hyper.k), &mut draw);
    Ok(FactorModel { p, q, hyper })
}

impl FactorModel {
    pub fn num_students(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_courses(&self) -> usize {
        self.q.nrows()
    }

    pub fn k(&self) -> usize {
        self.p.ncols()
    }

    fn check(&self, s: usize, c: usize) -> Result<()> {
        if s >= self.num_students() {
            return Err(Error::IndexOutOfRange {
                what: "student",
                index: s,
                size: self.num_students(),
            });
        }
        if c >= self.num_courses() {
            return Err(Error::IndexOutOfRange {
                what: "course",
                index: c,
                size: self.num_courses(),
            });
        }
        Ok(())
    }

    pub fn score(&self, s: usize, c: usize) -> Result<f64> {
        self.check(s, c)?;
        Ok(self.p.row(s).dot(&self.q.row(c)))
    }

    /// score(s, i) - score(s, j), computed as P_s . (Q_i - Q_j).
    pub fn pairwise_margin(&self, t: Triple) -> Result<f64> {
        self.check(t.s, t.i)?;
        self.check(t.s, t.j)?;
        Ok(margin(self.p.row(t.s), self.q.row(t.i), self.q.row(t.j)))
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|x| x.is_finite())
    }
}

fn margin(p: ArrayView1<f64>, qi: ArrayView1<f64>, qj: ArrayView1<f64>) -> f64 {
    Zip::from(&p)
        .and(&qi)
        .and(&qj)
        .fold(0.0, |acc, &p, &a, &b| acc + p * (a - b))
}

/// ln(1 + exp(-y)) without overflow.
pub fn pair_loss(y: f64) -> f64 {
    if y >= 0.0 {
        (-y).exp().ln_1p()
    } else {
        -y + y.exp().ln_1p()
    }
}

/// -exp(-y) / (1 + exp(-y)), the derivative of `pair_loss`.
pub fn pair_weight(y: f64) -> f64 {
    if y >= 0.0 {
        let e = (-y).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + y.exp())
    }
}

/// (beta / 2) * sum over edges of w * |Q_f - Q_g|^2.
pub fn cdr_penalty(q: &Array2<f64>, network: &TransitionNetwork, beta: f64) -> f64 {
    let total: f64 = network
        .edges()
        .map(|(f, g, w)| {
            let d = &q.row(f) - &q.row(g);
            w * d.dot(&d)
        })
        .sum();
    0.5 * beta * total
}

/// Gradient of the network penalty with respect to Q_f. Both edge
/// directions contribute: f's out-links and the links pointing at f.
pub fn cdr_gradient(
    q: &Array2<f64>,
    network: &TransitionNetwork,
    beta: f64,
    f: usize,
) -> Array1<f64> {
    let qf = q.row(f);
    let mut t = Array1::zeros(q.ncols());
    let edges = network
        .neighbors(f)
        .unwrap_or(&[])
        .iter()
        .chain(network.incoming(f));
    for &(g, w) in edges {
        Zip::from(&mut t)
            .and(&qf)
            .and(q.row(g))
            .for_each(|t, &a, &b| *t += w * (a - b));
    }
    t * beta
}

/// Full objective over the given triples.
pub fn loss(
    model: &FactorModel,
    triples: &[Triple],
    network: Option<&TransitionNetwork>,
) -> Result<f64> {
    let mut total = 0.0;
    for &t in triples {
        total += pair_loss(model.pairwise_margin(t)?);
    }
    let norm = model
        .p
        .iter()
        .chain(model.q.iter())
        .map(|x| x * x)
        .sum::<f64>();
    total += model.hyper.lambda * norm;
    if let Some(net) = network {
        total += cdr_penalty(&model.q, net, model.hyper.beta);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub p_s: Array1<f64>,
    pub q_i: Array1<f64>,
    pub q_j: Array1<f64>,
}

pub fn gradients(
    model: &FactorModel,
    t: Triple,
    network: Option<&TransitionNetwork>,
) -> Result<Gradients> {
    let y = model.pairwise_margin(t)?;
    let u = pair_weight(y);
    let lam2 = 2.0 * model.hyper.lambda;
    let (p, qi, qj) = (model.p.row(t.s), model.q.row(t.i), model.q.row(t.j));
    let mut g = Gradients {
        p_s: (&qi - &qj) * u + &p * lam2,
        q_i: &p * u + &qi * lam2,
        q_j: &p * -u + &qj * lam2,
    };
    if let Some(net) = network {
        let beta = model.hyper.beta;
        g.q_i += &cdr_gradient(&model.q, net, beta, t.i);
        g.q_j += &cdr_gradient(&model.q, net, beta, t.j);
    }
    Ok(g)
}

/// How many rejection draws to try before enumerating the eligible set.
const REJECTION_TRIES: usize = 32;

/// Uniform draw from `pool` minus the student's positives.
pub fn sample_negative<R: Rng + ?Sized>(
    rng: &mut R,
    s: usize,
    is_positive: impl Fn(usize) -> bool,
    pool: &[usize],
) -> Result<usize> {
    if !pool.is_empty() {
        for _ in 0..REJECTION_TRIES {
            let c = pool[rng.random_range(0..pool.len())];
            if !is_positive(c) {
                return Ok(c);
            }
        }
    }
    let eligible: Vec<usize> = pool.iter().copied().filter(|&c| !is_positive(c)).collect();
    if eligible.is_empty() {
        return Err(Error::EmptyNegativePool { student: s });
    }
    Ok(eligible[rng.random_range(0..eligible.len())])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateRule {
    /// Update P_s, Q_i and Q_j.
    StudentAndCourses,
    /// Update P_s only; Q is frozen.
    StudentOnly,
}

/// Which rows a training pass may move, and for each student the pool of
/// courses negatives are drawn from.
#[derive(Clone, Debug)]
pub struct SamplingScope {
    pub update: UpdateRule,
    pools: Vec<Vec<usize>>,
    pool_of: Vec<usize>,
    positives: Vec<Vec<usize>>,
}

impl SamplingScope {
    /// `pool_of[s]` selects one of `pools` for student `s`. A course is a
    /// positive of `s` when `(s, c)` appears in `positives`.
    pub fn new(
        update: UpdateRule,
        pools: Vec<Vec<usize>>,
        pool_of: Vec<usize>,
        positives: &[(usize, usize)],
    ) -> Result<Self> {
        if let Some(&bad) = pool_of.iter().find(|&&k| k >= pools.len()) {
            return Err(Error::IndexOutOfRange {
                what: "pool",
                index: bad,
                size: pools.len(),
            });
        }
        let mut sets = vec![Vec::new(); pool_of.len()];
        for &(s, c) in positives {
            sets.get_mut(s)
                .ok_or(Error::IndexOutOfRange {
                    what: "student",
                    index: s,
                    size: pool_of.len(),
                })?
                .push(c);
        }
        for set in &mut sets {
            set.sort_unstable();
            set.dedup();
        }
        Ok(SamplingScope {
            update,
            pools,
            pool_of,
            positives: sets,
        })
    }

    pub fn pool(&self, s: usize) -> &[usize] {
        &self.pools[self.pool_of[s]]
    }

    pub fn is_positive(&self, s: usize, c: usize) -> bool {
        self.positives[s].binary_search(&c).is_ok()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, s: usize) -> Result<usize> {
        sample_negative(rng, s, |c| self.is_positive(s, c), self.pool(s))
    }
}

/// Separate generators for visiting order and negative draws.
#[derive(Clone, Debug)]
pub struct SgdRngs {
    pub shuffle: ChaCha8Rng,
    pub negative: ChaCha8Rng,
}

impl SgdRngs {
    pub fn new(seed: u64) -> Self {
        SgdRngs {
            shuffle: stream(seed, Stream::Shuffle),
            negative: stream(seed, Stream::Negative),
        }
    }
}

/// One pass over `positives` in shuffled order, one sampled negative per
/// positive. Returns the summed pairwise loss of the visited triples,
/// measured before each update.
pub fn sgd_epoch(
    model: &mut FactorModel,
    positives: &[(usize, usize)],
    scope: &SamplingScope,
    network: Option<&TransitionNetwork>,
    rngs: &mut SgdRngs,
) -> Result<f64> {
    sgd_epoch_observed(model, positives, scope, network, rngs, &mut |_| {})
}

/// [`sgd_epoch`], reporting every sampled triple to `observer`.
pub fn sgd_epoch_observed(
    model: &mut FactorModel,
    positives: &[(usize, usize)],
    scope: &SamplingScope,
    network: Option<&TransitionNetwork>,
    rngs: &mut SgdRngs,
    observer: &mut dyn FnMut(Triple),
) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Training("no positive pairs to train on".into()));
    }
    let mut order: Vec<usize> = (0..positives.len()).collect();
    order.shuffle(&mut rngs.shuffle);

    let alpha = model.hyper.alpha;
    let mut epoch_loss = 0.0;
    for idx in order {
        let (s, i) = positives[idx];
        let j = scope.sample(&mut rngs.negative, s)?;
        let t = Triple { s, i, j };
        observer(t);
        epoch_loss += pair_loss(model.pairwise_margin(t)?);

        let g = gradients(model, t, network)?;
        let new_p = &model.p.row(s) - &(g.p_s * alpha);
        let new_q = match scope.update {
            UpdateRule::StudentAndCourses => Some((
                &model.q.row(i) - &(g.q_i * alpha),
                &model.q.row(j) - &(g.q_j * alpha),
            )),
            UpdateRule::StudentOnly => None,
        };
        let finite = new_p.iter().all(|x| x.is_finite())
            && new_q
                .as_ref()
                .is_none_or(|(a, b)| a.iter().chain(b.iter()).all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NonFinite {
                s,
                i,
                j,
                detail: format!("margin {}", model.pairwise_margin(t)?),
            });
        }
        model.p.row_mut(s).assign(&new_p);
        if let Some((qi, qj)) = new_q {
            model.q.row_mut(i).assign(&qi);
            model.q.row_mut(j).assign(&qj);
        }
    }
    Ok(epoch_loss)
}

const MODEL_MAGIC: &str = "ocrank-model";
const MODEL_VERSION: &str = "v1";

/// Header line, one line per student row, then one per course row.
pub fn write_model<W: Write>(mut w: W, model: &FactorModel) -> std::io::Result<()> {
    writeln!(
        w,
        "{MODEL_MAGIC} {MODEL_VERSION} {} {} {}",
        model.num_students(),
        model.num_courses(),
        model.k()
    )?;
    for row in model.p.rows().into_iter().chain(model.q.rows()) {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads a model written by [`write_model`]; `hyper.k` is taken from the file.
pub fn read_model<R: BufRead>(reader: R, mut hyper: Hyperparameters) -> Result<FactorModel> {
    let bad = |line: usize, m: String| Error::Parse {
        path: "<model>".into(),
        line,
        message: m,
    };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "empty model file".into()))?
        .map_err(|e| Error::io("<model>", e))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MODEL_MAGIC || fields[1] != MODEL_VERSION {
        return Err(bad(1, format!("bad header `{header}`")));
    }
    let dims: Vec<usize> = fields[2..]
        .iter()
        .map(|f| {
            f.parse()
                .map_err(|_| bad(1, format!("bad dimension `{f}`")))
        })
        .collect::<Result<_>>()?;
    let (ns, nc, k) = (dims[0], dims[1], dims[2]);
    hyper.k = k;
    let mut values = Vec::with_capacity((ns + nc) * k);
    for row in 0..ns + nc {
        let line = lines
            .next()
            .ok_or_else(|| bad(row + 2, "truncated model file".into()))?
            .map_err(|e| Error::io("<model>", e))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(row + 2, format!("bad value `{tok}`")))?,
            );
        }
        if values.len() - before != k {
            return Err(bad(row + 2, format!("expected {k} values")));
        }
    }
    let q = values.split_off(ns * k);
    Ok(FactorModel {
        p: Array2::from_shape_vec((ns, k), values).expect("sized"),
        q: Array2::from_shape_vec((nc, k), q).expect("sized"),
        hyper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexSet;
    use ndarray::array;

    fn hyper(k: usize) -> Hyperparameters {
        Hyperparameters {
            k,
            lambda: 0.0,
            beta: 0.0,
            ..Hyperparameters::default()
        }
    }

    fn model(p: Array2<f64>, q: Array2<f64>, lambda: f64, beta: f64) -> FactorModel {
        let k = p.ncols();
        FactorModel {
            p,
            q,
            hyper: Hyperparameters {
                lambda,
                beta,
                ..hyper(k)
            },
        }
    }

    #[test]
    fn init_shapes_and_determinism() {
        let h = Hyperparameters::default();
        let a = init_model(2, 3, h).unwrap();
        assert_eq!(a.p.dim(), (2, 12));
        assert_eq!(a.q.dim(), (3, 12));
        assert!(a.p.iter().all(|x| x.abs() <= 0.01));
        assert_eq!(a, init_model(2, 3, h).unwrap());
        let b = init_model(2, 3, Hyperparameters { seed: 1, ..h }).unwrap();
        assert_ne!(a.p, b.p);
        assert!(init_model(0, 3, h).is_err());
        assert!(init_model(2, 0, h).is_err());
        assert!(init_model(2, 3, Hyperparameters { k: 0, ..h }).is_err());
    }

    #[test]
    fn score_is_an_inner_product() {
        let m = model(
            array![[1.0, 2.0], [1.0, 0.0]],
            array![[3.0, 4.0], [0.0, 0.0]],
            0.0,
            0.0,
        );
        assert_eq!(m.score(0, 0).unwrap(), 11.0);
        assert_eq!(m.score(0, 1).unwrap(), 0.0);
        let e = model(array![[1.0, 0.0]], array![[1.0, 0.0]], 0.0, 0.0);
        assert_eq!(e.score(0, 0).unwrap(), 1.0);
        assert!(m.score(2, 0).is_err());
        assert!(m.score(0, 2).is_err());
    }

    #[test]
    fn margins() {
        let m = model(array![[2.0]], array![[3.0], [1.0], [3.0]], 0.0, 0.0);
        assert_eq!(m.pairwise_margin(Triple { s: 0, i: 0, j: 1 }).unwrap(), 4.0);
        assert_eq!(m.pairwise_margin(Triple { s: 0, i: 0, j: 2 }).unwrap(), 0.0);
        let m = model(array![[1.0, 2.0]], array![[0.5, 0.5], [0.0, 1.0]], 0.0, 0.0);
        assert_eq!(
            m.pairwise_margin(Triple { s: 0, i: 0, j: 1 }).unwrap(),
            -0.5
        );
    }

    #[test]
    fn loss_values() {
        let m = model(array![[0.0, 0.0]], array![[1.0, 1.0], [2.0, 2.0]], 0.0, 0.0);
        let t = Triple { s: 0, i: 0, j: 1 };
        let l = loss(&m, &[t, t, t], None).unwrap();
        assert!((l - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);

        let m = model(array![[2.0]], array![[3.0], [1.0]], 0.0, 0.0);
        let l = loss(&m, &[Triple { s: 0, i: 0, j: 1 }], None).unwrap();
        // ln(1 + e^-4) = 0.018149927917809...
        assert!((l - 0.018149927917809).abs() < 1e-12, "{l}");
    }

    #[test]
    fn cdr_vanishes_on_equal_rows() {
        let courses: IndexSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let net =
            TransitionNetwork::from_edges(courses, vec![vec![(1, 0.7)], vec![(0, 1.0)]]).unwrap();
        let q = array![[0.3, -0.2], [0.3, -0.2]];
        assert_eq!(cdr_penalty(&q, &net, 0.5), 0.0);
    }

    #[test]
    fn logistic_weight() {
        assert_eq!(pair_weight(0.0), -0.5);
        assert!(pair_weight(-800.0).is_finite());
        assert!((pair_weight(-800.0) + 1.0).abs() < 1e-15);
        assert!(pair_loss(-800.0).is_finite());
        assert_eq!(pair_loss(-800.0), 800.0);
    }

    #[test]
    fn gradient_example_values() {
        let m = model(array![[1.0, 2.0]], array![[0.5, 0.5], [0.0, 1.0]], 0.0, 0.0);
        let g = gradients(&m, Triple { s: 0, i: 0, j: 1 }, None).unwrap();
        // u = -1 / (1 + e^-0.5) = -0.6224593312...
        assert!((g.p_s[0] + 0.3112296656).abs() < 1e-9, "{}", g.p_s);
        assert!((g.p_s[1] - 0.3112296656).abs() < 1e-9);
    }

    #[test]
    fn cdr_term_for_a_single_edge() {
        let courses: IndexSet<String> = ["i", "j", "g"].iter().map(|s| s.to_string()).collect();
        let net =
            TransitionNetwork::from_edges(courses, vec![vec![(2, 0.5)], vec![], vec![]]).unwrap();
        let q = array![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let t = cdr_gradient(&q, &net, 0.1, 0);
        assert!((t[0] - 0.05).abs() < 1e-15 && t[1] == 0.0);

        let base = model(array![[0.2, -0.1]], q.clone(), 0.0, 0.1);
        let with = gradients(&base, Triple { s: 0, i: 0, j: 1 }, Some(&net)).unwrap();
        let without = gradients(&base, Triple { s: 0, i: 0, j: 1 }, None).unwrap();
        let diff = &with.q_i - &without.q_i;
        assert!((diff[0] - 0.05).abs() < 1e-15 && diff[1].abs() < 1e-15);
        assert_eq!(with.p_s, without.p_s);
    }

    #[test]
    fn negative_sampling_rules() {
        let mut rng = stream(0, Stream::Negative);
        assert_eq!(sample_negative(&mut rng, 0, |_| false, &[4]).unwrap(), 4);
        let err = sample_negative(&mut rng, 7, |c| c < 3, &[0, 1, 2]).unwrap_err();
        assert!(matches!(err, Error::EmptyNegativePool { student: 7 }));
        assert!(sample_negative(&mut rng, 0, |_| false, &[]).is_err());
        // a single eligible course among many positives is still found
        let pool: Vec<usize> = (0..200).collect();
        for _ in 0..20 {
            assert_eq!(
                sample_negative(&mut rng, 0, |c| c != 137, &pool).unwrap(),
                137
            );
        }
    }

    #[test]
    fn negative_sampling_is_uniform() {
        let mut rng = stream(1, Stream::Negative);
        let pool = [0usize, 1, 2, 3, 4];
        let mut hist = [0usize; 5];
        for _ in 0..20_000 {
            hist[sample_negative(&mut rng, 0, |c| c == 2, &pool).unwrap()] += 1;
        }
        assert_eq!(hist[2], 0);
        for &n in &[hist[0], hist[1], hist[3], hist[4]] {
            assert!((n as f64 - 5000.0).abs() < 300.0, "{hist:?}");
        }
    }

    fn tiny_scope(update: UpdateRule) -> (Vec<(usize, usize)>, SamplingScope) {
        let positives = vec![(0, 0), (0, 1), (1, 2)];
        let scope =
            SamplingScope::new(update, vec![vec![0, 1, 2, 3]], vec![0, 0], &positives).unwrap();
        (positives, scope)
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let mut m = init_model(2, 4, Hyperparameters::default()).unwrap();
        m.hyper.alpha = 0.0;
        let before = m.clone();
        let (pos, scope) = tiny_scope(UpdateRule::StudentAndCourses);
        sgd_epoch(&mut m, &pos, &scope, None, &mut SgdRngs::new(0)).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn student_only_scope_freezes_q() {
        let mut m = init_model(2, 4, Hyperparameters::default()).unwrap();
        let q = m.q.clone();
        let p = m.p.clone();
        let (pos, scope) = tiny_scope(UpdateRule::StudentOnly);
        sgd_epoch(&mut m, &pos, &scope, None, &mut SgdRngs::new(3)).unwrap();
        assert_eq!(m.q, q);
        assert_ne!(m.p, p);
    }

    #[test]
    fn single_step_matches_hand_update() {
        let h = Hyperparameters {
            k: 1,
            lambda: 0.05,
            alpha: 0.05,
            beta: 0.0,
            epochs: 1,
            seed: 11,
        };
        let mut m = FactorModel {
            p: array![[0.5]],
            q: array![[0.2], [-0.4]],
            hyper: h,
        };
        let positives = vec![(0, 0)];
        let scope = SamplingScope::new(
            UpdateRule::StudentAndCourses,
            vec![vec![0, 1]],
            vec![0],
            &positives,
        )
        .unwrap();
        sgd_epoch(&mut m, &positives, &scope, None, &mut SgdRngs::new(11)).unwrap();
        // y = 0.5 * (0.2 + 0.4) = 0.3; u = -1 / (1 + e^0.3)
        let u = -1.0 / (1.0 + 0.3f64.exp());
        let p = 0.5 - 0.05 * (u * 0.6 + 0.1 * 0.5);
        let qi = 0.2 - 0.05 * (u * 0.5 + 0.1 * 0.2);
        let qj = -0.4 - 0.05 * (-u * 0.5 + 0.1 * -0.4);
        assert!((m.p[[0, 0]] - p).abs() < 1e-15);
        assert!((m.q[[0, 0]] - qi).abs() < 1e-15);
        assert!((m.q[[1, 0]] - qj).abs() < 1e-15);
        // u = -0.425557483..., so P moves to about 0.5102667
        assert!((m.p[[0, 0]] - 0.510266724).abs() < 1e-8, "{}", m.p[[0, 0]]);
    }

    #[test]
    fn overflow_aborts_with_triple() {
        let mut m = FactorModel {
            p: array![[1e308]],
            q: array![[1e308], [-1e308]],
            hyper: Hyperparameters {
                k: 1,
                ..Hyperparameters::default()
            },
        };
        let positives = vec![(0, 0)];
        let scope = SamplingScope::new(
            UpdateRule::StudentAndCourses,
            vec![vec![0, 1]],
            vec![0],
            &positives,
        )
        .unwrap();
        let err = sgd_epoch(&mut m, &positives, &scope, None, &mut SgdRngs::new(0)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NonFinite {
                    s: 0,
                    i: 0,
                    j: 1,
                    ..
                }
            ),
            "{err}"
        );
        assert!(sgd_epoch(&mut m, &[], &scope, None, &mut SgdRngs::new(0)).is_err());
    }

    #[test]
    fn model_text_round_trip() {
        let m = init_model(
            3,
            5,
            Hyperparameters {
                k: 4,
                ..Hyperparameters::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ocrank-model v1 3 5 4\n"));
        assert_eq!(text.lines().count(), 9);
        let back = read_model(buf.as_slice(), m.hyper).unwrap();
        assert_eq!(back, m);
        assert!(read_model("ocrank-model v2 1 1 1\n0\n0\n".as_bytes(), m.hyper).is_err());
        assert!(read_model("ocrank-model v1 1 1 2\n0 1\n".as_bytes(), m.hyper).is_err());
    }
}
