//! The online active-learning loop and the sampling baselines.
//!
//! Per arriving document a [`Sampler`] decides pick or discard. A pick is
//! labeled by the (error-prone) oracle and added to the training set; every
//! `frequency` picks the classifier is refit and both metrics are recorded.
//! A run ends when the budget is spent or the stream is exhausted.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{shuffle_stream, Document};
use crate::dqn::decide;
use crate::encoder::{encode_state, EncoderConfig, LastSeenTracker, StateVector};
use crate::learner::{fit, human_f1, machine_f1, LearnerConfig, SoftmaxClassifier, TrainingSet};
use crate::nnet::DenseNet;
use crate::oracle::{DecayModel, Oracle};
use crate::reward::Action;
use crate::{derive_seed, OrisError, Result};

pub const RESULTS_HEADER: &str = "run_id,budget_exhausted,machine_f1_macro,human_f1_macro,picks,oracle_errors";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Random,
    Uncertainty,
    Diversity,
    Oris,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Random,
        AgentKind::Uncertainty,
        AgentKind::Diversity,
        AgentKind::Oris,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Uncertainty => "uncertainty",
            AgentKind::Diversity => "diversity",
            AgentKind::Oris => "oris",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = OrisError;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| OrisError::Invalid(format!("unknown agent {s:?}")))
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub budget: usize,
    pub frequency: usize,
    /// One run per seed.
    pub seeds: Vec<u64>,
    pub oracle: DecayModel,
    pub encoder: EncoderConfig,
    pub learner: LearnerConfig,
    /// `None` means `budget / stream length`.
    pub random_pick_prob: Option<f64>,
    pub uncertainty_theta0: f64,
    pub diversity_cap: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            budget: 500,
            frequency: 25,
            seeds: (0..5).collect(),
            oracle: DecayModel::SLOW_SIGMOID,
            encoder: EncoderConfig::default(),
            learner: LearnerConfig::default(),
            random_pick_prob: None,
            uncertainty_theta0: 0.5,
            diversity_cap: 5000,
        }
    }
}

impl HarnessConfig {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.budget == 0 {
            errs.push("harness.budget must be >= 1".into());
        }
        if self.frequency == 0 || self.frequency > self.budget {
            errs.push(format!(
                "harness.frequency must be in [1, budget={}], got {}",
                self.budget, self.frequency
            ));
        }
        if self.seeds.is_empty() {
            errs.push("at least one run seed is required".into());
        }
        if let Some(p) = self.random_pick_prob {
            if !(0.0..=1.0).contains(&p) {
                errs.push(format!("harness.random_pick_prob must be in [0, 1], got {p}"));
            }
        }
        if !(self.uncertainty_theta0 > 0.0 && self.uncertainty_theta0 <= 1.0) {
            errs.push(format!(
                "harness.uncertainty_theta0 must be in (0, 1], got {}",
                self.uncertainty_theta0
            ));
        }
        if self.diversity_cap < self.budget {
            errs.push(format!(
                "harness.diversity_cap ({}) must be >= budget ({})",
                self.diversity_cap, self.budget
            ));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(OrisError::Config(errs))
        }
    }
}

/// What a sampler may look at when deciding on the current document.
pub struct DecisionContext<'c> {
    pub doc: &'c Document,
    pub state: &'c StateVector,
    pub budget_used: usize,
    pub budget: usize,
    pub num_classes: usize,
    /// Latest refit classifier, if any.
    pub classifier: Option<&'c SoftmaxClassifier>,
}

pub trait Sampler {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action>;
}

pub fn random_decide<R: Rng>(rng: &mut R, pick_prob: f64) -> Action {
    if rng.random::<f64>() < pick_prob {
        Action::Pick
    } else {
        Action::Discard
    }
}

/// Normalized predictive entropy in `[0, 1]`.
pub fn normalized_entropy(probs: &[f64]) -> f64 {
    if probs.len() < 2 {
        return 0.0;
    }
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    (h / (probs.len() as f64).log2()).clamp(0.0, 1.0)
}

/// Threshold `theta0 * (1 - b / B)` shrinks linearly as the budget is spent.
pub fn uncertainty_threshold(theta0: f64, budget_used: usize, budget: usize) -> f64 {
    theta0 * (1.0 - budget_used as f64 / budget as f64)
}

/// Picks when the classifier's normalized entropy reaches the current
/// threshold; always picks while no classifier has been fit yet.
pub fn uncertainty_decide(
    classifier: Option<&SoftmaxClassifier>,
    embedding: &[f64],
    budget_used: usize,
    budget: usize,
    theta0: f64,
) -> Action {
    let Some(clf) = classifier else {
        return Action::Pick;
    };
    let h = normalized_entropy(&clf.predict_proba(embedding));
    if h >= uncertainty_threshold(theta0, budget_used, budget) {
        Action::Pick
    } else {
        Action::Discard
    }
}

pub struct RandomSampler {
    pub pick_prob: f64,
    rng: ChaCha8Rng,
}

impl RandomSampler {
    pub fn new(pick_prob: f64, seed: u64) -> Self {
        RandomSampler {
            pick_prob,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Sampler for RandomSampler {
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(random_decide(&mut self.rng, self.pick_prob))
    }
}

pub struct UncertaintySampler {
    pub theta0: f64,
}

impl Sampler for UncertaintySampler {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(uncertainty_decide(
            ctx.classifier,
            &ctx.doc.embedding,
            ctx.budget_used,
            ctx.budget,
            self.theta0,
        ))
    }
}

/// Picks exactly the documents chosen by offline clustering.
pub struct DiversitySampler {
    selected: HashSet<usize>,
}

impl DiversitySampler {
    pub fn new(selected: impl IntoIterator<Item = usize>) -> Self {
        DiversitySampler {
            selected: selected.into_iter().collect(),
        }
    }
}

impl Sampler for DiversitySampler {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        Ok(if self.selected.contains(&ctx.doc.id) {
            Action::Pick
        } else {
            Action::Discard
        })
    }
}

/// Greedy decisions of a trained Q-network.
pub struct OrisSampler<'n> {
    pub net: &'n DenseNet,
}

impl Sampler for OrisSampler<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        decide(self.net, ctx.state)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Condensed upper-triangular distance matrix.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn new(points: &[&[f64]]) -> Self {
        let n = points.len();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push(euclidean(points[i], points[j]));
            }
        }
        Condensed { n, d }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Average-linkage agglomerative clustering into `clusters` groups.
///
/// Builds the full dendrogram with the nearest-neighbor chain algorithm
/// (O(n^2) time and memory) and cuts it by replaying merges in order of
/// increasing linkage distance. Returns a cluster index per point; cluster
/// indices are ordered by their smallest member.
pub fn average_linkage(points: &[&[f64]], clusters: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if clusters == 0 || clusters > n {
        return Err(OrisError::Invalid(format!(
            "cannot form {clusters} clusters from {n} points"
        )));
    }
    let mut dist = Condensed::new(points);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        let (a, b, d) = loop {
            let a = *chain.last().expect("chain is nonempty");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let (mut best, mut best_d) = match prev {
                Some(p) => (p, dist.get(a, p)),
                None => (usize::MAX, f64::INFINITY),
            };
            for x in 0..n {
                if x == a || !active[x] {
                    continue;
                }
                let dx = dist.get(a, x);
                if dx < best_d {
                    best = x;
                    best_d = dx;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (a, best, best_d);
            }
            chain.push(best);
        };
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        let (sk, sg) = (size[keep] as f64, size[gone] as f64);
        for x in 0..n {
            if active[x] && x != keep && x != gone {
                let v = (sk * dist.get(keep, x) + sg * dist.get(gone, x)) / (sk + sg);
                dist.set(keep, x, v);
            }
        }
        size[keep] += size[gone];
        active[gone] = false;
        remaining -= 1;
        merges.push((keep, gone, d));
    }

    // stable: equal-distance merges keep the order the chain produced them in
    merges.sort_by(|x, y| x.2.total_cmp(&y.2));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    for &(a, b, _) in &merges {
        if components == clusters {
            break;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            components -= 1;
        }
    }
    let mut label_of_root = BTreeMap::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(&mut parent, i);
        let next = label_of_root.len();
        out.push(*label_of_root.entry(r).or_insert(next));
    }
    Ok(out)
}

/// Offline diversity selection: cluster embeddings into `budget` groups by
/// average linkage and take, per cluster, the document nearest its mean
/// (ties to the lowest id). Corpora larger than `cap` are first thinned to
/// `cap` documents by an even stride.
pub fn diversity_select(docs: &[Document], budget: usize, cap: usize) -> Result<Vec<usize>> {
    if docs.len() < budget {
        return Err(OrisError::Invalid(format!(
            "diversity selection needs at least {budget} documents, got {}",
            docs.len()
        )));
    }
    let pool: Vec<&Document> = if docs.len() > cap.max(budget) {
        let cap = cap.max(budget);
        (0..cap).map(|i| &docs[i * docs.len() / cap]).collect()
    } else {
        docs.iter().collect()
    };
    let points: Vec<&[f64]> = pool.iter().map(|d| d.embedding.as_slice()).collect();
    let labels = average_linkage(&points, budget)?;

    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; budget];
    let mut counts = vec![0usize; budget];
    for (p, &l) in points.iter().zip(&labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
        .collect();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; budget];
    for (doc, &l) in pool.iter().zip(&labels) {
        let d = euclidean(&doc.embedding, &means[l]);
        let better = match best[l] {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && doc.id < bid),
        };
        if better {
            best[l] = Some((d, doc.id));
        }
    }
    let mut ids: Vec<usize> = best.into_iter().map(|b| b.expect("every cluster has a member").1).collect();
    ids.sort_unstable();
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub run_id: usize,
    pub budget_exhausted: usize,
    pub machine_f1_macro: f64,
    pub human_f1_macro: f64,
    pub picks: usize,
    pub oracle_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub rows: Vec<RecordRow>,
    /// Number of oracle calls made during the run.
    pub oracle_queries: usize,
    /// The stream ran out before the budget was spent.
    pub truncated: bool,
}

impl RunRecord {
    pub fn final_row(&self) -> Option<&RecordRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentRecord {
    pub runs: Vec<RunRecord>,
}

impl ExperimentRecord {
    pub fn rows(&self) -> impl Iterator<Item = &RecordRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }

    /// Mean of a final-row metric over runs that produced at least one row.
    pub fn mean_final(&self, metric: impl Fn(&RecordRow) -> f64) -> f64 {
        let finals: Vec<f64> = self.runs.iter().filter_map(|r| r.final_row()).map(metric).collect();
        if finals.is_empty() {
            f64::NAN
        } else {
            finals.iter().sum::<f64>() / finals.len() as f64
        }
    }
}

const TAG_STREAM: u64 = 11;
const TAG_ORACLE: u64 = 12;
const TAG_SAMPLER: u64 = 13;
const TAG_LEARNER: u64 = 14;

pub fn sampler_seed(seed: u64) -> u64 {
    derive_seed(seed, TAG_SAMPLER)
}

/// One online active-learning run over a shuffled pass of `train`.
pub fn run_experiment(
    train: &[Document],
    test: &[Document],
    num_classes: usize,
    cfg: &HarnessConfig,
    sampler: &mut dyn Sampler,
    run_id: usize,
    seed: u64,
) -> Result<RunRecord> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(OrisError::Empty("test set".into()));
    }
    let stream = shuffle_stream(train, derive_seed(seed, TAG_STREAM))?;
    let mut oracle = Oracle::new(cfg.oracle, num_classes, derive_seed(seed, TAG_ORACLE));
    let mut tracker = LastSeenTracker::new(num_classes, cfg.encoder.k);
    let test_pairs: Vec<(&[f64], usize)> = test.iter().map(|d| (d.embedding.as_slice(), d.true_class)).collect();

    let mut set = TrainingSet::default();
    let mut picked_true = Vec::with_capacity(cfg.budget);
    let mut picked_emitted = Vec::with_capacity(cfg.budget);
    let mut classifier: Option<SoftmaxClassifier> = None;
    let mut errors = 0usize;
    let mut rows = Vec::with_capacity(cfg.budget / cfg.frequency);

    for doc in stream {
        if picked_true.len() >= cfg.budget {
            break;
        }
        let state = encode_state(&doc.embedding, &tracker, cfg.encoder.dt_scale);
        let ctx = DecisionContext {
            doc,
            state: &state,
            budget_used: picked_true.len(),
            budget: cfg.budget,
            num_classes,
            classifier: classifier.as_ref(),
        };
        if sampler.decide(&ctx)?.is_pick() {
            let emitted = oracle.annotate(doc.true_class);
            if emitted != doc.true_class {
                errors += 1;
            }
            set.push(doc.embedding.clone(), emitted);
            picked_true.push(doc.true_class);
            picked_emitted.push(emitted);
            tracker.record_emission(emitted);

            let b = picked_true.len();
            if b % cfg.frequency == 0 {
                let clf = fit(&set, num_classes, &cfg.learner, derive_seed(seed, TAG_LEARNER + b as u64))?;
                rows.push(RecordRow {
                    run_id,
                    budget_exhausted: b,
                    machine_f1_macro: machine_f1(&clf, &test_pairs, num_classes)?,
                    human_f1_macro: human_f1(&picked_true, &picked_emitted, num_classes)?,
                    picks: b,
                    oracle_errors: errors,
                });
                classifier = Some(clf);
            }
        }
        oracle.advance_step();
        tracker.advance_step();
    }

    let queries = picked_true.len();
    Ok(RunRecord {
        run_id,
        seed,
        rows,
        oracle_queries: queries,
        truncated: queries < cfg.budget,
    })
}

/// Builds the sampler for one run. `selection` is the precomputed diversity
/// pick list and `net` the trained agent, when the kind needs them.
pub fn build_sampler<'n>(
    kind: AgentKind,
    cfg: &HarnessConfig,
    stream_len: usize,
    selection: Option<&[usize]>,
    net: Option<&'n DenseNet>,
    seed: u64,
) -> Result<Box<dyn Sampler + 'n>> {
    Ok(match kind {
        AgentKind::Random => {
            let p = cfg
                .random_pick_prob
                .unwrap_or_else(|| (cfg.budget as f64 / stream_len as f64).min(1.0));
            Box::new(RandomSampler::new(p, sampler_seed(seed)))
        }
        AgentKind::Uncertainty => Box::new(UncertaintySampler {
            theta0: cfg.uncertainty_theta0,
        }),
        AgentKind::Diversity => {
            let sel = selection.ok_or_else(|| OrisError::Invalid("diversity agent needs a selection".into()))?;
            Box::new(DiversitySampler::new(sel.iter().copied()))
        }
        AgentKind::Oris => {
            let net = net.ok_or_else(|| OrisError::Invalid("oris agent needs a trained checkpoint".into()))?;
            Box::new(OrisSampler { net })
        }
    })
}

/// Worker count for independent runs: `ORIS_THREADS` if set, else the
/// available parallelism, never more than the number of runs.
pub fn run_parallelism(runs: usize) -> usize {
    let cap = std::env::var("ORIS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(runs).max(1)
}

/// Runs one experiment per configured seed, in parallel, and merges the
/// records in run order.
pub fn run_agent(
    kind: AgentKind,
    train: &[Document],
    test: &[Document],
    num_classes: usize,
    cfg: &HarnessConfig,
    net: Option<&DenseNet>,
) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let selection = if kind == AgentKind::Diversity {
        Some(diversity_select(train, cfg.budget, cfg.diversity_cap)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run_parallelism(cfg.seeds.len()))
        .build()
        .map_err(|e| OrisError::Invalid(format!("thread pool: {e}")))?;
    let runs: Vec<Result<RunRecord>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .enumerate()
            .map(|(run_id, &seed)| {
                let mut sampler = build_sampler(kind, cfg, train.len(), selection.as_deref(), net, seed)?;
                run_experiment(train, test, num_classes, cfg, sampler.as_mut(), run_id, seed)
            })
            .collect()
    });
    Ok(ExperimentRecord {
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}

pub fn record_to_csv(rows: &[RecordRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{},{}",
            r.run_id, r.budget_exhausted, r.machine_f1_macro, r.human_f1_macro, r.picks, r.oracle_errors
        );
    }
    s
}

pub fn write_record(rec: &ExperimentRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows: Vec<RecordRow> = rec.rows().cloned().collect();
    fs::write(path, record_to_csv(&rows)).map_err(|e| OrisError::io(path, e))
}

pub fn parse_record(text: &str, origin: &Path) -> Result<Vec<RecordRow>> {
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, message: String| OrisError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        Some((_, h)) => return Err(perr(1, format!("unexpected header {h:?}"))),
        None => return Err(OrisError::Empty(origin.display().to_string())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(perr(i + 1, format!("expected 6 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| perr(i + 1, format!("{s:?}: {e}")));
        let float = |s: &str| s.parse::<f64>().map_err(|e| perr(i + 1, format!("{s:?}: {e}")));
        rows.push(RecordRow {
            run_id: int(f[0])?,
            budget_exhausted: int(f[1])?,
            machine_f1_macro: float(f[2])?,
            human_f1_macro: float(f[3])?,
            picks: int(f[4])?,
            oracle_errors: int(f[5])?,
        });
    }
    Ok(rows)
}

pub fn read_record(path: impl AsRef<Path>) -> Result<Vec<RecordRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| OrisError::io(path, e))?;
    parse_record(&text, path)
}

/// Mean and sample standard deviation of every metric at one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSummary {
    pub budget_exhausted: usize,
    pub runs: usize,
    pub machine_mean: f64,
    pub machine_std: f64,
    pub human_mean: f64,
    pub human_std: f64,
    pub errors_mean: f64,
    pub errors_std: f64,
}

pub const AGGREGATE_HEADER: &str = "budget_exhausted,runs,machine_f1_macro_mean,machine_f1_macro_std,human_f1_macro_mean,human_f1_macro_std,oracle_errors_mean,oracle_errors_std";

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(rows: &[RecordRow]) -> Vec<IntervalSummary> {
    let mut by_interval: BTreeMap<usize, Vec<&RecordRow>> = BTreeMap::new();
    for r in rows {
        by_interval.entry(r.budget_exhausted).or_default().push(r);
    }
    by_interval
        .into_iter()
        .map(|(b, rs)| {
            let col = |f: fn(&RecordRow) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (machine_mean, machine_std) = mean_std(&col(|r| r.machine_f1_macro));
            let (human_mean, human_std) = mean_std(&col(|r| r.human_f1_macro));
            let (errors_mean, errors_std) = mean_std(&col(|r| r.oracle_errors as f64));
            IntervalSummary {
                budget_exhausted: b,
                runs: rs.len(),
                machine_mean,
                machine_std,
                human_mean,
                human_std,
                errors_mean,
                errors_std,
            }
        })
        .collect()
}

pub fn aggregate_to_csv(summary: &[IntervalSummary]) -> String {
    let mut s = String::from(AGGREGATE_HEADER);
    s.push('\n');
    for r in summary {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.budget_exhausted,
            r.runs,
            r.machine_mean,
            r.machine_std,
            r.human_mean,
            r.human_std,
            r.errors_mean,
            r.errors_std
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, LabelSpace};

    fn doc(id: usize, x: f64, y: f64) -> Document {
        Document {
            id,
            tokens: vec![],
            true_class: 0,
            embedding: vec![x, y],
        }
    }

    fn small_corpus() -> (Vec<Document>, Vec<Document>) {
        let labels = LabelSpace::numbered(2).unwrap();
        let train = generate_synthetic(&labels, &[40, 40], 2, 4.0, 1).unwrap();
        let test = generate_synthetic(&labels, &[20, 20], 2, 4.0, 2).unwrap();
        (train, test)
    }

    #[test]
    fn random_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| random_decide(&mut rng, 1.0).is_pick()));
        assert!((0..1000).all(|_| !random_decide(&mut rng, 0.0).is_pick()));
        let n = 10_000;
        let picks = (0..n).filter(|_| random_decide(&mut rng, 0.5).is_pick()).count();
        assert!((picks as f64 / n as f64 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn uncertainty_schedule() {
        assert_eq!(uncertainty_threshold(0.5, 250, 500), 0.25);
        let uniform = SoftmaxClassifier::zeros(3, 2);
        for b in [0, 100, 499] {
            assert!(uncertainty_decide(Some(&uniform), &[1.0, 2.0], b, 500, 0.5).is_pick());
        }
        let mut confident = SoftmaxClassifier::zeros(3, 2);
        confident.bias[1] = 800.0;
        assert_eq!(
            uncertainty_decide(Some(&confident), &[1.0, 2.0], 100, 500, 0.5),
            Action::Discard
        );
        assert!(uncertainty_decide(None, &[1.0, 2.0], 0, 500, 0.5).is_pick());
    }

    #[test]
    fn four_point_diversity() {
        let docs = vec![doc(0, 0.0, 0.0), doc(1, 0.0, 1.0), doc(2, 10.0, 10.0), doc(3, 10.0, 11.0)];
        // each pair's mean is equidistant from both members: lower id wins
        assert_eq!(diversity_select(&docs, 2, 5000).unwrap(), vec![0, 2]);
    }

    #[test]
    fn diversity_with_full_budget_selects_everything() {
        let docs: Vec<Document> = (0..7).map(|i| doc(i, i as f64, (i * i) as f64)).collect();
        assert_eq!(diversity_select(&docs, 7, 5000).unwrap(), (0..7).collect::<Vec<_>>());
        assert!(diversity_select(&docs, 8, 5000).is_err());
    }

    #[test]
    fn duplicated_points_share_a_cluster() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![5.0, 5.0], vec![1.0, 1.0], vec![9.0, 0.0], vec![5.0, 5.0]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let labels = average_linkage(&refs, 3).unwrap();
        assert_eq!(labels[0], labels[2]);
        assert_eq!(labels[1], labels[4]);
        assert_ne!(labels[0], labels[3]);
        assert_ne!(labels[1], labels[3]);
    }

    /// Naive O(n^3) average linkage: repeatedly merge the closest pair of
    /// clusters by mean pairwise distance.
    fn naive_average_linkage(points: &[&[f64]], k: usize) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let mut s = 0.0;
                    for &i in &clusters[a] {
                        for &j in &clusters[b] {
                            s += euclidean(points[i], points[j]);
                        }
                    }
                    let d = s / (clusters[a].len() * clusters[b].len()) as f64;
                    if d < best.0 {
                        best = (d, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        let mut out: Vec<Vec<usize>> = clusters
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn nn_chain_matches_naive_merging() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = 6 + trial % 10;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
            let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            for k in [1, 2, 3, n / 2] {
                let labels = average_linkage(&refs, k).unwrap();
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (i, l) in labels.iter().enumerate() {
                    groups.entry(*l).or_default().push(i);
                }
                let mut ours: Vec<Vec<usize>> = groups.into_values().collect();
                ours.sort();
                assert_eq!(ours, naive_average_linkage(&refs, k), "trial {trial} k {k}");
            }
        }
    }

    #[test]
    fn perfect_oracle_random_always_pick() {
        let (train, test) = small_corpus();
        let cfg = HarnessConfig {
            budget: 4,
            frequency: 2,
            oracle: DecayModel::Perfect,
            random_pick_prob: Some(1.0),
            ..HarnessConfig::default()
        };
        let mut s = RandomSampler::new(1.0, 0);
        let rec = run_experiment(&train, &test, 2, &cfg, &mut s, 0, 7).unwrap();
        assert_eq!(rec.rows.len(), 2);
        assert!(rec.rows.iter().all(|r| r.human_f1_macro == 1.0 || r.human_f1_macro == 0.5));
        // with both classes present, human f1 is exactly 1
        assert_eq!(rec.oracle_queries, 4);
        assert!(!rec.truncated);
        for r in &rec.rows {
            assert_eq!(r.oracle_errors, 0);
        }
    }

    #[test]
    fn run_is_deterministic_and_counts_budget() {
        let (train, test) = small_corpus();
        let cfg = HarnessConfig {
            budget: 20,
            frequency: 5,
            seeds: vec![4, 5],
            oracle: DecayModel::FAST_EXPONENTIAL,
            random_pick_prob: Some(0.5),
            ..HarnessConfig::default()
        };
        for kind in [AgentKind::Random, AgentKind::Uncertainty, AgentKind::Diversity] {
            let a = run_agent(kind, &train, &test, 2, &cfg, None).unwrap();
            let b = run_agent(kind, &train, &test, 2, &cfg, None).unwrap();
            assert_eq!(a, b);
            for run in &a.runs {
                if !run.truncated {
                    assert_eq!(run.oracle_queries, 20, "{kind}");
                    assert_eq!(run.rows.len(), 4);
                }
                let bs: Vec<usize> = run.rows.iter().map(|r| r.budget_exhausted).collect();
                assert!(bs.windows(2).all(|w| w[1] == w[0] + 5));
                let errs: Vec<usize> = run.rows.iter().map(|r| r.oracle_errors).collect();
                assert!(errs.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn oris_requires_a_network() {
        let (train, test) = small_corpus();
        let cfg = HarnessConfig {
            budget: 10,
            frequency: 5,
            ..HarnessConfig::default()
        };
        assert!(run_agent(AgentKind::Oris, &train, &test, 2, &cfg, None).is_err());
        let net = DenseNet::new(&[4, 8, 8, 2], 0).unwrap();
        let rec = run_agent(AgentKind::Oris, &train, &test, 2, &cfg, Some(&net)).unwrap();
        assert_eq!(rec.runs.len(), 5);
    }

    #[test]
    fn short_stream_is_flagged() {
        let (train, test) = small_corpus();
        let cfg = HarnessConfig {
            budget: 100,
            frequency: 25,
            random_pick_prob: Some(1.0),
            diversity_cap: 100,
            ..HarnessConfig::default()
        };
        let mut s = RandomSampler::new(1.0, 0);
        let rec = run_experiment(&train[..10], &test, 2, &cfg, &mut s, 0, 0).unwrap();
        assert!(rec.truncated);
        assert!(rec.rows.is_empty());
        assert_eq!(rec.oracle_queries, 10);
    }

    #[test]
    fn config_validation() {
        let cfg = HarnessConfig {
            frequency: 600,
            ..HarnessConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(HarnessConfig::default().validate().is_ok());
    }

    #[test]
    fn csv_round_trip_and_aggregation() {
        let mk = |run_id, b, m, h, e| RecordRow {
            run_id,
            budget_exhausted: b,
            machine_f1_macro: m,
            human_f1_macro: h,
            picks: b,
            oracle_errors: e,
        };
        let rows = vec![
            mk(0, 2, 0.5, 1.0, 0),
            mk(0, 4, 0.625, 0.75, 1),
            mk(1, 2, 0.25, 0.5, 2),
            mk(1, 4, 0.875, 0.25, 3),
            mk(2, 2, 0.75, 0.75, 1),
            mk(2, 4, 1.0, 0.5, 5),
        ];
        let text = record_to_csv(&rows);
        assert_eq!(text.lines().count(), 7);
        assert_eq!(parse_record(&text, Path::new("mem")).unwrap(), rows);

        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        // interval 2: machine {0.5, 0.25, 0.75} -> mean 0.5, sample sd 0.25
        assert_eq!(agg[0].runs, 3);
        assert!((agg[0].machine_mean - 0.5).abs() < 1e-12);
        assert!((agg[0].machine_std - 0.25).abs() < 1e-12);
        // human {1.0, 0.5, 0.75} -> 0.75, 0.25
        assert!((agg[0].human_mean - 0.75).abs() < 1e-12);
        assert!((agg[0].human_std - 0.25).abs() < 1e-12);
        // interval 4: errors {1, 3, 5} -> 3, 2
        assert!((agg[1].errors_mean - 3.0).abs() < 1e-12);
        assert!((agg[1].errors_std - 2.0).abs() < 1e-12);
        // machine {0.625, 0.875, 1.0} -> 0.833.., sd sqrt(((-5/24)^2 + (1/24)^2 + (4/24)^2)/2)
        let sd = ((25.0f64 + 1.0 + 16.0) / 576.0 / 2.0).sqrt();
        assert!((agg[1].machine_std - sd).abs() < 1e-12);
        assert!(aggregate_to_csv(&agg).starts_with(AGGREGATE_HEADER));
    }

    #[test]
    fn agent_names_parse() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        assert!("greedy".parse::<AgentKind>().is_err());
    }
}
