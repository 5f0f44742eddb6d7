//! The contrastive skill-learning objective: inner-product critic over
//! feature differences, the contrastive loss across candidate skills, the
//! alternative objective parametrizations, and the encoder training loop.

use crate::error::{Error, Result};
use crate::geometry::{dot, sample_uniform_sphere, SkillSet, UnitVector};
use crate::nn::{
    backward_accumulate, evaluate, forward, init_params, GradVector, MlpSpec, OptimState,
    ParamVector, StepOutcome,
};
use crate::rng::{child_seed, substream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which mutual-information parametrization the critic logits realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// logit_j = <phi(o') - phi(o), z_j>
    FutureDiff,
    /// two terms, <phi(o), z_j> and <phi(o'), z_j>, each trained as its own
    /// classification; reported logits are their mean
    Marginal,
    /// logit_j = <phi(o') - phi(o_0), z_j> against the episode anchor
    AnchorDiff,
}

impl ObjectiveKind {
    pub fn label(&self) -> &'static str {
        match self {
            ObjectiveKind::FutureDiff => "future-diff",
            ObjectiveKind::Marginal => "marginal",
            ObjectiveKind::AnchorDiff => "anchor-diff",
        }
    }
}

/// Learning-rate schedule over the run. Constant-rate Adam leaves a noise
/// floor that caps how precisely the encoder can settle; the cosine decay
/// removes it without touching the step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate down to 5% of it.
    Cosine,
}

impl LrSchedule {
    pub fn factor(&self, step: u64, total: u64) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                let t = if total == 0 { 0.0 } else { step as f64 / total as f64 };
                0.05 + 0.95 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Encoder training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: ObjectiveKind,
    /// Weight on the positive logit term.
    pub xi: f64,
    /// Negative candidates per record (K).
    pub negatives: usize,
    pub batch_size: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub encoder: MlpSpec,
    pub skill_mode: crate::geometry::SkillMode,
    pub seed: u64,
    /// Metric-history cadence in steps.
    pub eval_every: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(Error::InvalidConfig("xi must be positive".into()));
        }
        if self.negatives == 0 {
            return Err(Error::InvalidConfig("need at least one negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be >= 1".into()));
        }
        self.encoder.validate()
    }

    /// Chance level of the candidate classification.
    pub fn chance_accuracy(&self) -> f64 {
        1.0 / (self.negatives as f64 + 1.0)
    }
}

/// One training example: a pair of consecutive observations, the episode
/// anchor (first observation) when available, and the skill that generated
/// the step.
#[derive(Debug, Clone)]
pub struct SourceRecord {
    pub o: Vec<f64>,
    pub o_next: Vec<f64>,
    pub o_anchor: Option<Vec<f64>>,
    pub z: UnitVector,
}

/// A training batch: per-record positives and negative ranges indexed into
/// one shared candidate list.
#[derive(Debug, Clone)]
pub struct Batch {
    pub items: Vec<BatchItem>,
    /// Positives (one per item, in item order) followed by the negatives.
    pub candidates: Vec<UnitVector>,
    num_negatives: usize,
}

#[derive(Debug, Clone)]
pub struct BatchItem {
    pub o: Vec<f64>,
    pub o_next: Vec<f64>,
    pub o_anchor: Option<Vec<f64>>,
    pub pos_index: usize,
    /// This record's negatives inside the candidate list.
    pub negatives: std::ops::Range<usize>,
}

impl Batch {
    /// One negative set shared by every record of the batch.
    pub fn from_records(records: Vec<SourceRecord>, negatives: Vec<UnitVector>) -> Result<Self> {
        if negatives.is_empty() {
            return Err(Error::InvalidConfig("need at least one negative".into()));
        }
        let num_negatives = negatives.len();
        let mut candidates = Vec::with_capacity(records.len() + num_negatives);
        let mut items = Vec::with_capacity(records.len());
        let shared = records.len()..records.len() + num_negatives;
        for rec in records {
            items.push(BatchItem {
                o: rec.o,
                o_next: rec.o_next,
                o_anchor: rec.o_anchor,
                pos_index: candidates.len(),
                negatives: shared.clone(),
            });
            candidates.push(rec.z);
        }
        candidates.extend(negatives);
        Ok(Self {
            items,
            candidates,
            num_negatives,
        })
    }

    pub fn num_negatives(&self) -> usize {
        self.num_negatives
    }
}

/// Per-batch loss summary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub pos_logit_mean: f64,
    pub log_partition: f64,
    /// Fraction of records whose positive wins the argmax; exact ties share
    /// credit uniformly among the tied candidates.
    pub accuracy: f64,
}

/// Inner products of a feature vector against each candidate.
fn dots_against(features: &[f64], candidates: &[&UnitVector]) -> Vec<f64> {
    candidates
        .iter()
        .map(|z| dot(features, z.as_slice()))
        .collect()
}

/// Critic logits for one record, positive first. For the marginal objective
/// this is the mean of the two per-view logit rows; the loss still treats
/// the rows separately.
pub fn critic_logits(
    spec: &MlpSpec,
    params: &ParamVector,
    objective: ObjectiveKind,
    o: &[f64],
    o_next: &[f64],
    o_anchor: Option<&[f64]>,
    candidates: &[&UnitVector],
) -> Result<Vec<f64>> {
    let latent = spec.output_dim;
    if let Some(bad) = candidates.iter().find(|z| z.dim() != latent) {
        return Err(Error::DimensionMismatch {
            expected: latent,
            got: bad.dim(),
        });
    }
    let phi_o = evaluate(spec, params, o)?;
    let phi_next = evaluate(spec, params, o_next)?;
    match objective {
        ObjectiveKind::FutureDiff => {
            let diff: Vec<f64> = phi_next.iter().zip(&phi_o).map(|(a, b)| a - b).collect();
            Ok(dots_against(&diff, candidates))
        }
        ObjectiveKind::AnchorDiff => {
            let phi_anchor = match o_anchor {
                Some(anchor) => evaluate(spec, params, anchor)?,
                None => phi_o.clone(),
            };
            let diff: Vec<f64> = phi_next
                .iter()
                .zip(&phi_anchor)
                .map(|(a, b)| a - b)
                .collect();
            Ok(dots_against(&diff, candidates))
        }
        ObjectiveKind::Marginal => {
            let row_a = dots_against(&phi_o, candidates);
            let row_b = dots_against(&phi_next, candidates);
            Ok(row_a
                .iter()
                .zip(&row_b)
                .map(|(a, b)| 0.5 * (a + b))
                .collect())
        }
    }
}

/// The transition reward r_z = <phi(o') - phi(o), z>.
pub fn reward_of_transition(
    spec: &MlpSpec,
    params: &ParamVector,
    o: &[f64],
    o_next: &[f64],
    z: &UnitVector,
) -> Result<f64> {
    if z.dim() != spec.output_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.output_dim,
            got: z.dim(),
        });
    }
    let phi_o = evaluate(spec, params, o)?;
    let phi_next = evaluate(spec, params, o_next)?;
    Ok(phi_next
        .iter()
        .zip(&phi_o)
        .zip(z.as_slice())
        .map(|((a, b), zi)| (a - b) * zi)
        .sum())
}

/// Positive-wins indicator with uniform credit on exact ties.
fn fractional_hit(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties = logits.iter().filter(|&&l| l == max).count();
    if logits[0] == max {
        1.0 / ties as f64
    } else {
        0.0
    }
}

/// Contrastive loss over one logit row (positive at index 0):
/// -xi * logit_0 + log( mean_j exp(logit_j) ), guarded against overflow.
pub fn contrastive_loss(logits: &[f64], xi: f64) -> (f64, LossReport) {
    debug_assert!(!logits.is_empty());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let log_partition = max + sum_exp.ln() - (logits.len() as f64).ln();
    let loss = -xi * logits[0] + log_partition;
    let report = LossReport {
        loss,
        pos_logit_mean: logits[0],
        log_partition,
        accuracy: fractional_hit(logits),
    };
    (loss, report)
}

/// Loss gradient with respect to the logits: softmax(logits) - xi * e_0.
fn logit_gradient(logits: &[f64], xi: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut g: Vec<f64> = exps.iter().map(|e| e / total).collect();
    g[0] -= xi;
    g
}

/// Where a run's training data comes from. Implementations own their skill
/// distribution so negatives match the data (fresh uniform draws in
/// resample mode, draws from the fixed set otherwise).
pub trait TransitionSource {
    fn observation_dim(&self) -> usize;
    fn skill_dim(&self) -> usize;

    /// Produce the next batch of records. May collect fresh data first; the
    /// greedy policy reads the current parameters.
    fn next_batch(
        &mut self,
        step: u64,
        spec: &MlpSpec,
        params: &ParamVector,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<SourceRecord>>;

    /// Draw K negative candidate skills.
    fn draw_negatives(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<UnitVector>>;
}

/// Negative-candidate distribution for dataset-backed sources.
pub enum NegativePool {
    /// Fresh uniform draws on S^(d-1).
    Uniform { dim: usize },
    /// Uniform draws from a fixed skill set.
    FromSet(SkillSet),
}

impl NegativePool {
    fn draw(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<UnitVector>> {
        match self {
            NegativePool::Uniform { dim } => {
                (0..k).map(|_| sample_uniform_sphere(*dim, rng)).collect()
            }
            NegativePool::FromSet(set) => Ok((0..k)
                .map(|_| set.skills()[rng.gen_range(0..set.len())].clone())
                .collect()),
        }
    }
}

/// A fixed in-memory dataset (uniform sampling with replacement).
pub struct DatasetSource {
    records: Vec<SourceRecord>,
    negatives: NegativePool,
    observation_dim: usize,
    skill_dim: usize,
}

impl DatasetSource {
    pub fn new(records: Vec<SourceRecord>, negatives: NegativePool) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::MissingData("empty training dataset".into()));
        };
        let observation_dim = first.o.len();
        let skill_dim = first.z.dim();
        Ok(Self {
            records,
            negatives,
            observation_dim,
            skill_dim,
        })
    }
}

impl TransitionSource for DatasetSource {
    fn observation_dim(&self) -> usize {
        self.observation_dim
    }

    fn skill_dim(&self) -> usize {
        self.skill_dim
    }

    fn next_batch(
        &mut self,
        _step: u64,
        _spec: &MlpSpec,
        _params: &ParamVector,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<SourceRecord>> {
        Ok((0..n)
            .map(|_| self.records[rng.gen_range(0..self.records.len())].clone())
            .collect())
    }

    fn draw_negatives(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<UnitVector>> {
        self.negatives.draw(k, rng)
    }
}

/// Mean loss, report, and parameter gradient over a batch.
///
/// Returns the gradient already scaled to the batch mean.
pub fn batch_loss_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &Batch,
    objective: ObjectiveKind,
    xi: f64,
) -> Result<(LossReport, GradVector)> {
    let mut grad = GradVector::zeros(spec);
    let report = batch_pass(spec, params, batch, objective, xi, Some(&mut grad.0))?;
    grad.scale(1.0 / batch.items.len() as f64);
    Ok((report, grad))
}

/// Forward-only batch metrics.
pub fn batch_metrics(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &Batch,
    objective: ObjectiveKind,
    xi: f64,
) -> Result<LossReport> {
    batch_pass(spec, params, batch, objective, xi, None)
}

fn batch_pass(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &Batch,
    objective: ObjectiveKind,
    xi: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<LossReport> {
    if batch.items.is_empty() {
        return Err(Error::MissingData("empty batch".into()));
    }
    let latent = spec.output_dim;
    let k_plus_1 = batch.num_negatives() + 1;
    let mut cand_refs: Vec<&UnitVector> = Vec::with_capacity(k_plus_1);

    let mut loss_sum = 0.0;
    let mut pos_sum = 0.0;
    let mut logp_sum = 0.0;
    let mut acc_sum = 0.0;

    for item in &batch.items {
        cand_refs.clear();
        cand_refs.push(&batch.candidates[item.pos_index]);
        cand_refs.extend(batch.candidates[item.negatives.clone()].iter());

        let (phi_o, tape_o) = forward(spec, params, &item.o)?;
        let (phi_next, tape_next) = forward(spec, params, &item.o_next)?;

        // upstream gradients for each encoded view
        let mut up_o = vec![0.0; latent];
        let mut up_next = vec![0.0; latent];

        match objective {
            ObjectiveKind::FutureDiff => {
                let diff: Vec<f64> =
                    phi_next.iter().zip(&phi_o).map(|(a, b)| a - b).collect();
                let logits = dots_against(&diff, &cand_refs);
                let (loss, rep) = contrastive_loss(&logits, xi);
                loss_sum += loss;
                pos_sum += rep.pos_logit_mean;
                logp_sum += rep.log_partition;
                acc_sum += rep.accuracy;
                if grad.is_some() {
                    let w = logit_gradient(&logits, xi);
                    for (wj, z) in w.iter().zip(&cand_refs) {
                        for ((uo, un), zi) in
                            up_o.iter_mut().zip(up_next.iter_mut()).zip(z.as_slice())
                        {
                            *un += wj * zi;
                            *uo -= wj * zi;
                        }
                    }
                }
            }
            ObjectiveKind::Marginal => {
                let row_a = dots_against(&phi_o, &cand_refs);
                let row_b = dots_against(&phi_next, &cand_refs);
                let (loss_a, _) = contrastive_loss(&row_a, xi);
                let (loss_b, _) = contrastive_loss(&row_b, xi);
                loss_sum += 0.5 * (loss_a + loss_b);
                let combined: Vec<f64> = row_a
                    .iter()
                    .zip(&row_b)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                let (_, rep) = contrastive_loss(&combined, xi);
                pos_sum += rep.pos_logit_mean;
                logp_sum += 0.5
                    * (contrastive_loss(&row_a, xi).1.log_partition
                        + contrastive_loss(&row_b, xi).1.log_partition);
                acc_sum += rep.accuracy;
                if grad.is_some() {
                    let wa = logit_gradient(&row_a, xi);
                    let wb = logit_gradient(&row_b, xi);
                    for ((waj, wbj), z) in wa.iter().zip(&wb).zip(&cand_refs) {
                        for ((uo, un), zi) in
                            up_o.iter_mut().zip(up_next.iter_mut()).zip(z.as_slice())
                        {
                            *uo += 0.5 * waj * zi;
                            *un += 0.5 * wbj * zi;
                        }
                    }
                }
            }
            ObjectiveKind::AnchorDiff => {
                let anchor_view = item.o_anchor.as_deref();
                let (phi_anchor, tape_anchor) = match anchor_view {
                    Some(a) => {
                        let (p, t) = forward(spec, params, a)?;
                        (p, Some(t))
                    }
                    None => (phi_o.clone(), None),
                };
                let diff: Vec<f64> = phi_next
                    .iter()
                    .zip(&phi_anchor)
                    .map(|(a, b)| a - b)
                    .collect();
                let logits = dots_against(&diff, &cand_refs);
                let (loss, rep) = contrastive_loss(&logits, xi);
                loss_sum += loss;
                pos_sum += rep.pos_logit_mean;
                logp_sum += rep.log_partition;
                acc_sum += rep.accuracy;
                if let Some(acc) = grad.as_deref_mut() {
                    let w = logit_gradient(&logits, xi);
                    let mut up_anchor = vec![0.0; latent];
                    for (wj, z) in w.iter().zip(&cand_refs) {
                        for ((ua, un), zi) in
                            up_anchor.iter_mut().zip(up_next.iter_mut()).zip(z.as_slice())
                        {
                            *un += wj * zi;
                            *ua -= wj * zi;
                        }
                    }
                    match &tape_anchor {
                        Some(tape) => {
                            backward_accumulate(spec, params, tape, &up_anchor, acc)?;
                        }
                        None => {
                            // anchor aliases o
                            for (uo, ua) in up_o.iter_mut().zip(&up_anchor) {
                                *uo += ua;
                            }
                        }
                    }
                }
            }
        }

        if let Some(acc) = grad.as_deref_mut() {
            backward_accumulate(spec, params, &tape_o, &up_o, acc)?;
            backward_accumulate(spec, params, &tape_next, &up_next, acc)?;
        }
    }

    let n = batch.items.len() as f64;
    Ok(LossReport {
        loss: loss_sum / n,
        pos_logit_mean: pos_sum / n,
        log_partition: logp_sum / n,
        accuracy: acc_sum / n,
    })
}

/// One row of the metric history CSV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub loss: f64,
    pub pos_logit_mean: f64,
    pub log_partition: f64,
    pub accuracy: f64,
    pub r2_state: f64,
    pub r2_diff: f64,
}

/// How a training run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainStatus {
    Completed,
    /// More than 1% of steps were rejected for non-finite gradients.
    FailedRejectedBudget,
}

pub struct TrainOutcome {
    pub params: ParamVector,
    pub history: Vec<MetricRow>,
    pub rejected_steps: u64,
    pub status: TrainStatus,
}

/// Train the encoder against a transition source. Deterministic given the
/// config seed. `probe` supplies the (r2_state, r2_diff) columns of the
/// metric history; rows without a probe carry NaN there.
pub fn train_encoder<S: TransitionSource>(
    source: &mut S,
    config: &TrainConfig,
    mut probe: Option<&mut dyn FnMut(&ParamVector) -> (f64, f64)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if source.observation_dim() != config.encoder.input_dim {
        return Err(Error::DimensionMismatch {
            expected: config.encoder.input_dim,
            got: source.observation_dim(),
        });
    }
    if source.skill_dim() != config.encoder.output_dim {
        return Err(Error::DimensionMismatch {
            expected: config.encoder.output_dim,
            got: source.skill_dim(),
        });
    }

    let spec = &config.encoder;
    let mut params = init_params(spec, child_seed(config.seed, "encoder-init", 0));
    let mut opt = OptimState::new(params.len(), config.learning_rate);
    let mut history = Vec::new();

    let run_probe = |params: &ParamVector, probe: &mut Option<&mut dyn FnMut(&ParamVector) -> (f64, f64)>| {
        probe
            .as_deref_mut()
            .map(|p| p(params))
            .unwrap_or((f64::NAN, f64::NAN))
    };

    // step-0 row: metrics of the untrained encoder on one evaluation batch
    {
        let mut batch_rng = substream(config.seed, "eval-batch", 0);
        let records =
            source.next_batch(0, spec, &params, config.batch_size, &mut batch_rng)?;
        let mut neg_rng = substream(config.seed, "eval-negatives", 0);
        let negatives = source.draw_negatives(config.negatives, &mut neg_rng)?;
        let batch = Batch::from_records(records, negatives)?;
        let rep = batch_metrics(spec, &params, &batch, config.objective, config.xi)?;
        let (r2_state, r2_diff) = run_probe(&params, &mut probe);
        history.push(MetricRow {
            step: 0,
            loss: rep.loss,
            pos_logit_mean: rep.pos_logit_mean,
            log_partition: rep.log_partition,
            accuracy: rep.accuracy,
            r2_state,
            r2_diff,
        });
    }

    let mut acc = RunningMeans::default();
    for step in 0..config.steps {
        let mut batch_rng = substream(config.seed, "batch", step);
        let records =
            source.next_batch(step, spec, &params, config.batch_size, &mut batch_rng)?;
        let mut neg_rng = substream(config.seed, "negatives", step);
        let negatives = source.draw_negatives(config.negatives, &mut neg_rng)?;
        let batch = Batch::from_records(records, negatives)?;

        let (rep, grad) =
            batch_loss_and_grad(spec, &params, &batch, config.objective, config.xi)?;
        acc.push(&rep);
        opt.learning_rate = config.learning_rate * config.lr_schedule.factor(step, config.steps);
        let _ = matches!(
            opt.step(&mut params, &grad),
            StepOutcome::RejectedNonFinite
        );

        let done = step + 1 == config.steps;
        if (step + 1) % config.eval_every == 0 || done {
            let (r2_state, r2_diff) = run_probe(&params, &mut probe);
            history.push(acc.into_row(step + 1, r2_state, r2_diff));
            acc = RunningMeans::default();
        }
    }

    let rejected = opt.rejected;
    let status = if config.steps > 0 && rejected as f64 > 0.01 * config.steps as f64 {
        TrainStatus::FailedRejectedBudget
    } else {
        TrainStatus::Completed
    };

    Ok(TrainOutcome {
        params,
        history,
        rejected_steps: rejected,
        status,
    })
}

#[derive(Default)]
struct RunningMeans {
    loss: f64,
    pos: f64,
    logp: f64,
    acc: f64,
    n: usize,
}

impl RunningMeans {
    fn push(&mut self, rep: &LossReport) {
        self.loss += rep.loss;
        self.pos += rep.pos_logit_mean;
        self.logp += rep.log_partition;
        self.acc += rep.accuracy;
        self.n += 1;
    }

    fn into_row(self, step: u64, r2_state: f64, r2_diff: f64) -> MetricRow {
        let n = self.n.max(1) as f64;
        MetricRow {
            step,
            loss: self.loss / n,
            pos_logit_mean: self.pos / n,
            log_partition: self.logp / n,
            accuracy: self.acc / n,
            r2_state,
            r2_diff,
        }
    }
}

pub const METRICS_HEADER: &str =
    "step,loss,pos_logit_mean,log_partition,accuracy,r2_state,r2_diff";

/// Write the metric history in the fixed CSV schema.
pub fn write_metrics_csv<W: Write>(mut w: W, history: &[MetricRow]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for row in history {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.step,
            row.loss,
            row.pos_logit_mean,
            row.log_partition,
            row.accuracy,
            row.r2_state,
            row.r2_diff
        )?;
    }
    Ok(())
}
