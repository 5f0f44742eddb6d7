//! Ablation cells, the lemma experiment, and the fixed-size worker pool.
//! Cells are fully determined by their (config, seed); workers only change
//! who computes what, never the result.

use super::{run_csf, RunConfig, RunReport};
use crate::csf::ObjectiveKind;
use crate::error::{Error, Result};
use crate::eval::coverage_fractions;
use crate::geometry::SkillMode;
use crate::policy::PolicyKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// One ablation run: a label, its config, and (after running) its report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationCell {
    pub label: String,
    pub report: RunReport,
}

/// Check that the configs differ only in the allowed places. The allowed
/// entries are slash-separated paths into the config JSON ("skills/count").
pub fn verify_single_axis(configs: &[RunConfig], allowed: &[&str]) -> Result<()> {
    let mut normalized = Vec::with_capacity(configs.len());
    for config in configs {
        let mut value = serde_json::to_value(config)?;
        for path in allowed {
            null_out(&mut value, path);
        }
        normalized.push(value);
    }
    for (i, value) in normalized.iter().enumerate().skip(1) {
        if value != &normalized[0] {
            return Err(Error::InvalidConfig(format!(
                "ablation cell {i} changes fields outside the varied axis"
            )));
        }
    }
    Ok(())
}

fn null_out(value: &mut serde_json::Value, path: &str) {
    let mut cur = value;
    let mut parts = path.split('/').peekable();
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            if let Some(obj) = cur.as_object_mut() {
                obj.insert(part.to_string(), serde_json::Value::Null);
            }
            return;
        }
        match cur.get_mut(part) {
            Some(next) => cur = next,
            None => return,
        }
    }
}

/// Run labeled cells on a fixed-size worker pool. Each cell writes only its
/// own directory; results come back in cell order regardless of scheduling.
pub fn run_cells(
    cells: Vec<(String, RunConfig)>,
    out_root: Option<&Path>,
    workers: usize,
) -> Result<Vec<AblationCell>> {
    let workers = workers.max(1).min(cells.len().max(1));
    let n = cells.len();
    let jobs: Vec<(String, RunConfig, Option<PathBuf>)> = cells
        .into_iter()
        .map(|(label, config)| {
            let dir = out_root.map(|root| root.join(&label));
            (label, config, dir)
        })
        .collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<AblationCell>>>> = Mutex::new((0..n).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let (label, config, dir) = &jobs[i];
                let out = run_csf(config, dir.as_deref()).map(|report| AblationCell {
                    label: label.clone(),
                    report,
                });
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });

    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect()
}

/// Skill-count ablation across fixed-set sizes plus the resampling case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkillAblationReport {
    pub cells: Vec<AblationCell>,
    /// (label, r2_diff, coverage fraction of the union, affine generator).
    pub trend: Vec<(String, f64, f64, bool)>,
}

pub fn ablate_skills(
    base: &RunConfig,
    counts: &[usize],
    include_resample: bool,
    out_root: Option<&Path>,
    workers: usize,
) -> Result<SkillAblationReport> {
    let mut cells = Vec::new();
    for &count in counts {
        let mut config = base.clone();
        config.skills = super::SkillsSection {
            mode: SkillMode::FixedSet,
            count,
        };
        cells.push((format!("skills-{count:03}"), config));
    }
    if include_resample {
        let mut config = base.clone();
        config.skills = super::SkillsSection {
            mode: SkillMode::ResampleEachBatch,
            count: base.skills.count,
        };
        cells.push(("skills-resample".into(), config));
    }
    verify_single_axis(
        &cells.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
        &["skills"],
    )?;

    let mut cells = run_cells(cells, out_root, workers)?;

    let mut coverages: Vec<_> = cells.iter().map(|c| c.report.coverage.clone()).collect();
    coverage_fractions(&mut coverages);
    for (cell, cov) in cells.iter_mut().zip(coverages) {
        cell.report.coverage = cov;
    }

    let trend = cells
        .iter()
        .map(|c| {
            (
                c.label.clone(),
                c.report.r2_diff,
                c.report.coverage.fraction_of_union.unwrap_or(f64::NAN),
                c.report.affine_generator.is_generator,
            )
        })
        .collect();
    Ok(SkillAblationReport { cells, trend })
}

/// Latent-dimensionality ablation; only the encoder output dimension varies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimAblationReport {
    pub cells: Vec<AblationCell>,
    /// (label, r2_diff, oracle return).
    pub trend: Vec<(String, f64, f64)>,
}

pub fn ablate_dim(
    base: &RunConfig,
    dims: &[usize],
    out_root: Option<&Path>,
    workers: usize,
) -> Result<DimAblationReport> {
    let mut cells = Vec::new();
    for &dim in dims {
        let mut config = base.clone();
        config.latent_dim = Some(dim);
        cells.push((format!("dim-{dim:02}"), config));
    }
    verify_single_axis(
        &cells.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
        &["latent_dim"],
    )?;
    let cells = run_cells(cells, out_root, workers)?;
    let trend = cells
        .iter()
        .map(|c| (c.label.clone(), c.report.r2_diff, c.report.oracle.oracle_return))
        .collect();
    Ok(DimAblationReport { cells, trend })
}

/// Objective ablation on identical data streams (the scripted policy does
/// not consult the encoder, so equal seeds give equal transitions).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveAblationReport {
    pub cells: Vec<AblationCell>,
    /// mean |cos(phi(o), phi(o'))| per objective, in cell order.
    pub consecutive_cosine: Vec<(String, f64)>,
}

pub fn ablate_objective(
    base: &RunConfig,
    out_root: Option<&Path>,
    workers: usize,
) -> Result<ObjectiveAblationReport> {
    let mut cells = Vec::new();
    for objective in [
        ObjectiveKind::FutureDiff,
        ObjectiveKind::Marginal,
        ObjectiveKind::AnchorDiff,
    ] {
        let mut config = base.clone();
        config.train.objective = objective;
        cells.push((objective.label().to_string(), config));
    }
    verify_single_axis(
        &cells.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
        &["train/objective"],
    )?;
    let cells = run_cells(cells, out_root, workers)?;
    let consecutive_cosine = cells
        .iter()
        .map(|c| (c.label.clone(), c.report.geometry.mean_abs_cos_consecutive))
        .collect();
    Ok(ObjectiveAblationReport {
        cells,
        consecutive_cosine,
    })
}

/// The maximum-entropy experiment: one uniform-policy run and one scripted
/// run, differing only in the policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub uniform: RunReport,
    pub scripted: RunReport,
    pub chance_accuracy: f64,
    /// |heldout accuracy - chance| for the uniform run.
    pub uniform_accuracy_gap: f64,
    /// Mean reward with oracle features under the uniform policy.
    pub uniform_mean_reward: f64,
    pub scripted_mean_reward: f64,
}

pub fn lemma_check(
    base: &RunConfig,
    out_root: Option<&Path>,
    workers: usize,
) -> Result<LemmaCheckReport> {
    let mut uniform = base.clone();
    uniform.policy = PolicyKind::Uniform;
    let mut scripted = base.clone();
    scripted.policy = PolicyKind::ScriptedVmf {
        kappa_act: base.env.kappa_env,
    };
    verify_single_axis(&[uniform.clone(), scripted.clone()], &["policy"])?;

    let mut cells = run_cells(
        vec![("uniform".into(), uniform), ("scripted".into(), scripted)],
        out_root,
        workers,
    )?;
    let scripted = cells.pop().expect("two cells").report;
    let uniform = cells.pop().expect("two cells").report;
    Ok(LemmaCheckReport {
        chance_accuracy: uniform.chance_accuracy,
        uniform_accuracy_gap: (uniform.heldout_accuracy - uniform.chance_accuracy).abs(),
        uniform_mean_reward: uniform.mean_oracle_feature_reward,
        scripted_mean_reward: scripted.mean_oracle_feature_reward,
        uniform,
        scripted,
    })
}
