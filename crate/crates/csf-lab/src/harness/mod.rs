//! Experiment orchestration: run configuration, seeding, the training loop
//! wiring (rollout collection interleaved with encoder updates), final
//! evaluation, and artifact emission.

mod ablate;
mod report;

pub use ablate::{
    ablate_dim, ablate_objective, ablate_skills, lemma_check, run_cells, verify_single_axis,
    AblationCell, DimAblationReport, LemmaCheckReport, ObjectiveAblationReport,
    SkillAblationReport,
};
pub use report::{emit_report, read_coverage_csv, read_metrics_csv, svg_line_plot};

use crate::csf::{
    batch_metrics, train_encoder, Batch, LrSchedule, MetricRow, ObjectiveKind, SourceRecord,
    TrainConfig, TrainStatus, TransitionSource,
};

fn default_lr_schedule() -> LrSchedule {
    LrSchedule::Constant
}
use crate::error::{Error, Result};
use crate::eval::{
    geometry_diagnostics, identifiability_probe, oracle_return, skill_conditioning,
    CoverageAccumulator, CoverageReport, GeometryDiagnostics, OracleReturnReport,
};
use crate::geometry::{
    is_affine_generator, sample_uniform_sphere, AffineGeneratorReport, SkillMode, SkillSet,
    UnitVector,
};
use crate::nn::{save_checkpoint, MlpSpec, ParamVector};
use crate::policy::{
    diversity_score, mean_oracle_reward, rollout, to_source_records, DiversityReport,
    PolicyContext, PolicyKind, SkillEmbed, Trajectory,
};
use crate::rng::{child_seed, substream};
use crate::world::{make_generator, EnvConfig, Generator, GeneratorSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Observation generator section of the run configuration. The latent
/// dimension comes from the environment section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSection {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub activation_slope: f64,
    #[serde(default)]
    pub identity: bool,
    /// Explicit generator seed; derived from the master seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            obs_dim: 16,
            hidden: vec![8, 16],
            activation_slope: 0.4,
            identity: false,
            seed: None,
        }
    }
}

/// Encoder architecture section (input/output dims are derived).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderSection {
    pub hidden: Vec<usize>,
    pub skip: bool,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            skip: true,
        }
    }
}

/// Skill distribution descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkillsSection {
    pub mode: SkillMode,
    /// Size of the fixed set (ignored in resample mode).
    pub count: usize,
}

impl Default for SkillsSection {
    fn default() -> Self {
        Self {
            mode: SkillMode::ResampleEachBatch,
            count: 16,
        }
    }
}

/// Optimization section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSection {
    pub objective: ObjectiveKind,
    pub xi: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub steps: u64,
    pub learning_rate: f64,
    #[serde(default = "default_lr_schedule")]
    pub lr_schedule: LrSchedule,
    /// Collect one fresh episode every this many encoder steps.
    pub collect_every: u64,
    pub replay_capacity: usize,
    /// Transitions required in the replay buffer before training begins.
    pub min_fill: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::FutureDiff,
            xi: 1.0,
            negatives: 255,
            batch_size: 256,
            steps: 20_000,
            learning_rate: 2e-3,
            lr_schedule: LrSchedule::Constant,
            collect_every: 8,
            replay_capacity: 65_536,
            min_fill: 4_096,
        }
    }
}

/// Evaluation cadence and probe sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSection {
    /// Metric-history cadence in encoder steps.
    pub cadence: u64,
    /// Latent pairs used by the identifiability probe.
    pub probe_pairs: usize,
    /// Held-out transitions for the final accuracy/geometry evaluation.
    pub heldout_records: usize,
    pub coverage_grid: usize,
    /// Skills sampled for the oracle-return probe.
    pub oracle_skills: usize,
    /// Rollout length of the oracle-return probe (environment horizon when
    /// absent).
    #[serde(default)]
    pub oracle_horizon: Option<usize>,
    /// Fixed probe skills for the diversity score.
    pub diversity_skills: usize,
    pub diversity_episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            cadence: 500,
            probe_pairs: 800,
            heldout_records: 4_096,
            coverage_grid: 50,
            oracle_skills: 64,
            oracle_horizon: None,
            diversity_skills: 16,
            diversity_episodes: 4,
        }
    }
}

/// Full experiment description; the JSON config file mirrors this
/// field-for-field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub generator: GeneratorSection,
    pub encoder: EncoderSection,
    /// Encoder output (= skill) dimensionality; the environment's latent
    /// dimension when absent.
    pub latent_dim: Option<usize>,
    pub skills: SkillsSection,
    pub train: TrainSection,
    pub policy: PolicyKind,
    pub eval: EvalSection,
    /// Return discount; with one-step greedy control it only scales return
    /// aggregation and defaults to 1.
    pub gamma: f64,
    /// Master seed; every random stream in the run is derived from it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig {
                d: 4,
                half_width: 100.0,
                boundary: crate::world::BoundaryRule::Reflect,
                kappa_env: 10.0,
                horizon: 50,
            },
            generator: GeneratorSection::default(),
            encoder: EncoderSection::default(),
            latent_dim: None,
            skills: SkillsSection::default(),
            train: TrainSection::default(),
            policy: PolicyKind::ScriptedVmf { kappa_act: 10.0 },
            eval: EvalSection::default(),
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn latent_dim(&self) -> usize {
        self.latent_dim.unwrap_or(self.env.d)
    }

    pub fn encoder_spec(&self) -> MlpSpec {
        MlpSpec::new(
            self.generator.obs_dim,
            self.latent_dim(),
            self.encoder.hidden.clone(),
            self.encoder.skip,
        )
    }

    pub fn generator_spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            d: self.env.d,
            obs_dim: self.generator.obs_dim,
            hidden: self.generator.hidden.clone(),
            activation_slope: self.generator.activation_slope,
            seed: self
                .generator
                .seed
                .unwrap_or_else(|| child_seed(self.seed, "generator", 0)),
            identity: self.generator.identity,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            objective: self.train.objective,
            xi: self.train.xi,
            negatives: self.train.negatives,
            batch_size: self.train.batch_size,
            steps: self.train.steps,
            learning_rate: self.train.learning_rate,
            lr_schedule: self.train.lr_schedule,
            encoder: self.encoder_spec(),
            skill_mode: self.skills.mode,
            seed: self.seed,
            eval_every: self.eval.cadence,
        }
    }

    /// Validate and return soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = self.env.validate()?;
        self.generator_spec().validate()?;
        self.train_config().validate()?;
        self.policy.validate()?;
        if self.skills.mode == SkillMode::FixedSet && self.skills.count == 0 {
            return Err(Error::InvalidConfig("fixed skill set may not be empty".into()));
        }
        if self.eval.probe_pairs < 500 {
            return Err(Error::InvalidConfig(
                "eval.probe_pairs must be at least 500".into(),
            ));
        }
        if self.eval.coverage_grid < 2 {
            return Err(Error::InvalidConfig("coverage grid must be at least 2".into()));
        }
        if self.train.min_fill < self.train.batch_size {
            return Err(Error::InvalidConfig(
                "train.min_fill must cover at least one batch".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1]".into()));
        }
        if self.env.half_width < self.env.horizon as f64 {
            warnings.push(format!(
                "horizon {} exceeds half_width {}; scripted episodes can press against the box",
                self.env.horizon, self.env.half_width
            ));
        }
        Ok(warnings)
    }

    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Training data produced by rolling the policy in the environment, with a
/// bounded replay buffer. Boundary-flagged transitions never enter training
/// batches; coverage counts every visited state regardless.
pub struct RolloutSource<'a> {
    env: &'a EnvConfig,
    generator: &'a Generator,
    embed: &'a SkillEmbed,
    policy: PolicyKind,
    fixed_skills: Option<&'a SkillSet>,
    latent_dim: usize,
    master: u64,
    collect_every: u64,
    replay_capacity: usize,
    min_fill: usize,
    keep_anchor: bool,
    replay: Vec<SourceRecord>,
    replay_cursor: usize,
    episode_count: u64,
    pub boundary_excluded: u64,
    pub coverage: CoverageAccumulator,
    /// (encoder step, occupied cells) at each collection point.
    pub coverage_history: Vec<(u64, usize)>,
    /// Skills of the first collected episodes (conditioning diagnostics).
    pub early_episode_skills: Vec<UnitVector>,
}

impl<'a> RolloutSource<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        env: &'a EnvConfig,
        generator: &'a Generator,
        embed: &'a SkillEmbed,
        policy: PolicyKind,
        fixed_skills: Option<&'a SkillSet>,
        config: &RunConfig,
    ) -> Self {
        Self {
            env,
            generator,
            embed,
            policy,
            fixed_skills,
            latent_dim: config.latent_dim(),
            master: config.seed,
            collect_every: config.train.collect_every.max(1),
            replay_capacity: config.train.replay_capacity,
            min_fill: config.train.min_fill,
            keep_anchor: config.train.objective == ObjectiveKind::AnchorDiff,
            replay: Vec::new(),
            replay_cursor: 0,
            episode_count: 0,
            boundary_excluded: 0,
            coverage: CoverageAccumulator::new(config.eval.coverage_grid, config.env.half_width),
            coverage_history: Vec::new(),
            early_episode_skills: Vec::new(),
        }
    }

    fn draw_episode_skill(&self, rng: &mut ChaCha8Rng) -> Result<UnitVector> {
        match self.fixed_skills {
            Some(set) => Ok(set.skills()[rng.gen_range(0..set.len())].clone()),
            None => sample_uniform_sphere(self.latent_dim, rng),
        }
    }

    fn collect_episode(&mut self, spec: &MlpSpec, params: &ParamVector) -> Result<()> {
        let mut rng = substream(self.master, "episode", self.episode_count);
        self.episode_count += 1;
        let skill = self.draw_episode_skill(&mut rng)?;
        if self.early_episode_skills.len() < 64 {
            self.early_episode_skills.push(skill.clone());
        }
        let ctx = PolicyContext {
            env: self.env,
            generator: self.generator,
            embed: self.embed,
            encoder: Some((spec, params)),
        };
        let traj = rollout(&ctx, &self.policy, &skill, self.env.horizon, &mut rng)?;
        self.coverage.add_trajectory(&traj);
        let records = to_source_records(&traj, self.keep_anchor);
        self.boundary_excluded += (traj.records.len() - records.len()) as u64;
        for rec in records {
            if self.replay.len() < self.replay_capacity {
                self.replay.push(rec);
            } else {
                self.replay[self.replay_cursor] = rec;
                self.replay_cursor = (self.replay_cursor + 1) % self.replay_capacity;
            }
        }
        Ok(())
    }

    /// Roll fresh evaluation episodes (outside the replay buffer).
    pub fn heldout_records(
        &self,
        spec: &MlpSpec,
        params: &ParamVector,
        n: usize,
        label: &str,
    ) -> Result<(Vec<SourceRecord>, Vec<Trajectory>)> {
        let mut records = Vec::with_capacity(n);
        let mut trajs = Vec::new();
        let mut episode = 0u64;
        while records.len() < n {
            let mut rng = substream(self.master, label, episode);
            episode += 1;
            let skill = self.draw_episode_skill(&mut rng)?;
            let ctx = PolicyContext {
                env: self.env,
                generator: self.generator,
                embed: self.embed,
                encoder: Some((spec, params)),
            };
            let traj = rollout(&ctx, &self.policy, &skill, self.env.horizon, &mut rng)?;
            records.extend(to_source_records(&traj, self.keep_anchor));
            trajs.push(traj);
            if episode > (n as u64 / self.env.horizon as u64 + 1) * 10 {
                return Err(Error::RunFailed(
                    "held-out collection kept hitting the boundary".into(),
                ));
            }
        }
        records.truncate(n);
        Ok((records, trajs))
    }
}

impl<'a> TransitionSource for RolloutSource<'a> {
    fn observation_dim(&self) -> usize {
        self.generator.obs_dim()
    }

    fn skill_dim(&self) -> usize {
        self.latent_dim
    }

    fn next_batch(
        &mut self,
        step: u64,
        spec: &MlpSpec,
        params: &ParamVector,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<SourceRecord>> {
        while self.replay.len() < self.min_fill.max(n) {
            self.collect_episode(spec, params)?;
        }
        if step % self.collect_every == 0 {
            self.collect_episode(spec, params)?;
            self.coverage_history.push((step, self.coverage.occupied()));
        }
        Ok((0..n)
            .map(|_| self.replay[rng.gen_range(0..self.replay.len())].clone())
            .collect())
    }

    fn draw_negatives(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<UnitVector>> {
        match self.fixed_skills {
            Some(set) => Ok((0..k)
                .map(|_| set.skills()[rng.gen_range(0..set.len())].clone())
                .collect()),
            None => (0..k)
                .map(|_| sample_uniform_sphere(self.latent_dim, rng))
                .collect(),
        }
    }
}

/// Everything a finished run reports. Self-contained: echoes the exact
/// configuration and the derived sub-seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub r2_state: f64,
    pub r2_diff: f64,
    pub final_loss: f64,
    pub final_train_accuracy: f64,
    /// Critic accuracy on fresh held-out transitions at the trained params.
    pub heldout_accuracy: f64,
    pub chance_accuracy: f64,
    pub diversity: DiversityReport,
    pub coverage: CoverageReport,
    pub oracle: OracleReturnReport,
    pub geometry: GeometryDiagnostics,
    /// Mean transition reward with oracle (ground-truth state) features.
    pub mean_oracle_feature_reward: f64,
    /// Smallest singular value of the centered skill matrix.
    pub conditioning: f64,
    pub affine_generator: AffineGeneratorReport,
    pub wall_time_s: f64,
    pub rejected_steps: u64,
    pub boundary_excluded: u64,
    /// Reason code when the run failed its budgets; None for healthy runs.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub config: RunConfig,
    pub config_hash: String,
    /// Content hash of the parameter checkpoint (hex SHA-256 of the packed
    /// little-endian f64 values).
    pub checkpoint_hash: String,
    pub derived_seeds: BTreeMap<String, u64>,
    #[serde(skip)]
    pub history: Vec<MetricRow>,
    #[serde(skip)]
    pub params: Option<ParamVector>,
}

/// Run the full pipeline: interleaved collection and encoder updates,
/// cadenced metrics, final evaluation, artifact emission.
pub fn run_csf(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    let started = Instant::now();
    let warnings = config.validate()?;
    let latent_dim = config.latent_dim();
    let encoder_spec = config.encoder_spec();
    let generator = make_generator(&config.generator_spec())?;

    let embed = SkillEmbed::seeded(
        config.env.d,
        latent_dim,
        &mut substream(config.seed, "skill-embed", 0),
    )?;

    let fixed_skills = match config.skills.mode {
        SkillMode::FixedSet => Some(SkillSet::sample_uniform(
            latent_dim,
            config.skills.count,
            SkillMode::FixedSet,
            &mut substream(config.seed, "skills", 0),
        )?),
        SkillMode::ResampleEachBatch => None,
    };

    let mut source = RolloutSource::new(
        &config.env,
        &generator,
        &embed,
        config.policy,
        fixed_skills.as_ref(),
        config,
    );

    // fixed probe set: latent pairs with uniform unit steps
    let probe_pairs: Vec<(Vec<f64>, Vec<f64>)> = {
        let mut rng = substream(config.seed, "probe", 0);
        let half = config.env.half_width / 2.0;
        (0..config.eval.probe_pairs)
            .map(|_| {
                let s: Vec<f64> = (0..config.env.d).map(|_| rng.gen_range(-half..half)).collect();
                let u = sample_uniform_sphere(config.env.d, &mut rng)?;
                let s_next = s.iter().zip(u.as_slice()).map(|(a, b)| a + b).collect();
                Ok((s, s_next))
            })
            .collect::<Result<_>>()?
    };
    let probe_split = child_seed(config.seed, "probe-split", 0);
    let mut probe_fn = |params: &ParamVector| -> (f64, f64) {
        identifiability_probe(&encoder_spec, params, &generator, &probe_pairs, probe_split)
            .map(|p| (p.r2_state, p.r2_diff))
            .unwrap_or((f64::NAN, f64::NAN))
    };

    let train_config = config.train_config();
    let outcome = train_encoder(&mut source, &train_config, Some(&mut probe_fn))?;
    let params = outcome.params;
    let history = outcome.history;
    let final_row = *history.last().expect("history always has the step-0 row");

    // ---- final evaluation ----
    let (heldout, heldout_trajs) =
        source.heldout_records(&encoder_spec, &params, config.eval.heldout_records, "heldout")?;
    let heldout_accuracy = {
        let mut neg_rng = substream(config.seed, "heldout-negatives", 0);
        let negatives = source.draw_negatives(config.train.negatives, &mut neg_rng)?;
        let batch = Batch::from_records(heldout.clone(), negatives)?;
        batch_metrics(
            &encoder_spec,
            &params,
            &batch,
            config.train.objective,
            config.train.xi,
        )?
        .accuracy
    };

    let geometry = geometry_diagnostics(&encoder_spec, &params, &heldout)?;

    let mean_oracle_feature_reward = {
        let flat: Vec<&crate::world::TransitionRecord> = heldout_trajs
            .iter()
            .flat_map(|t| t.records.iter())
            .collect();
        mean_oracle_reward(&flat, &embed)?
    };

    // skill-identification probe on a fixed fresh set
    let diversity = {
        let probe_skills = SkillSet::sample_uniform(
            latent_dim,
            config.eval.diversity_skills,
            SkillMode::FixedSet,
            &mut substream(config.seed, "diversity-skills", 0),
        )?;
        let ctx = PolicyContext {
            env: &config.env,
            generator: &generator,
            embed: &embed,
            encoder: Some((&encoder_spec, &params)),
        };
        let mut trajs = Vec::new();
        for (i, z) in probe_skills.skills().iter().enumerate() {
            for e in 0..config.eval.diversity_episodes {
                let mut rng = substream(
                    config.seed,
                    "diversity-episode",
                    (i * config.eval.diversity_episodes + e) as u64,
                );
                trajs.push(rollout(&ctx, &config.policy, z, config.env.horizon, &mut rng)?);
            }
        }
        diversity_score(&trajs, &encoder_spec, &params, config.train.objective)?
    };

    // zero-shot transfer probe
    let oracle = {
        let skills: Vec<UnitVector> = {
            let mut rng = substream(config.seed, "oracle-skills", 0);
            (0..config.eval.oracle_skills)
                .map(|_| sample_uniform_sphere(latent_dim, &mut rng))
                .collect::<Result<_>>()?
        };
        let hidden_w = sample_uniform_sphere(config.env.d, &mut substream(config.seed, "task", 0))?;
        let ctx = PolicyContext {
            env: &config.env,
            generator: &generator,
            embed: &embed,
            encoder: Some((&encoder_spec, &params)),
        };
        let horizon = config.eval.oracle_horizon.unwrap_or(config.env.horizon);
        oracle_return(
            &ctx,
            &config.policy,
            &skills,
            &hidden_w,
            horizon,
            &mut substream(config.seed, "oracle-rollouts", 0),
        )?
    };

    // conditioning of the run's skills: the fixed set, or the skills of the
    // first collected episodes in resample mode
    let conditioning_set = match &fixed_skills {
        Some(set) => set.clone(),
        None => SkillSet::new(source.early_episode_skills.clone(), SkillMode::FixedSet)?,
    };
    let conditioning = skill_conditioning(&conditioning_set)?;
    let affine = is_affine_generator(&conditioning_set);

    let mut failure = None;
    if outcome.status == TrainStatus::FailedRejectedBudget {
        failure = Some("rejected-step-budget".into());
    } else if !final_row.loss.is_finite() {
        failure = Some("divergence".into());
    }

    let mut derived_seeds = BTreeMap::new();
    for label in [
        "generator",
        "encoder-init",
        "probe-split",
        "skills",
        "skill-embed",
        "task",
    ] {
        derived_seeds.insert(label.to_string(), child_seed(config.seed, label, 0));
    }

    let checkpoint_hash = {
        let mut bytes = Vec::with_capacity(params.len() * 8);
        for v in params.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        hex_digest(&bytes)
    };

    let report = RunReport {
        r2_state: final_row.r2_state,
        r2_diff: final_row.r2_diff,
        final_loss: final_row.loss,
        final_train_accuracy: final_row.accuracy,
        heldout_accuracy,
        chance_accuracy: train_config.chance_accuracy(),
        diversity,
        coverage: source.coverage.report(),
        oracle,
        geometry,
        mean_oracle_feature_reward,
        conditioning,
        affine_generator: affine,
        wall_time_s: started.elapsed().as_secs_f64(),
        rejected_steps: outcome.rejected_steps,
        boundary_excluded: source.boundary_excluded,
        failure,
        warnings,
        config: config.clone(),
        config_hash: config.config_hash(),
        checkpoint_hash,
        derived_seeds,
        history,
        params: Some(params),
    };

    if let Some(dir) = out_dir {
        write_run_artifacts(dir, &report, &encoder_spec, &source.coverage_history)?;
    }
    Ok(report)
}

fn write_run_artifacts(
    dir: &Path,
    report: &RunReport,
    encoder_spec: &MlpSpec,
    coverage_history: &[(u64, usize)],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&report.config)?,
    )?;
    let mut metrics = Vec::new();
    crate::csf::write_metrics_csv(&mut metrics, &report.history)?;
    std::fs::write(dir.join("metrics.csv"), metrics)?;

    let mut coverage = String::from("step,occupied_cells\n");
    for (step, occupied) in coverage_history {
        coverage.push_str(&format!("{step},{occupied}\n"));
    }
    std::fs::write(dir.join("coverage.csv"), coverage)?;

    if let Some(params) = &report.params {
        save_checkpoint(
            &dir.join("checkpoint"),
            encoder_spec,
            params,
            report.config.seed,
            report.config.train.steps,
        )?;
    }
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    Ok(())
}
