//! Command-line laboratory: train runs, ablations, the max-entropy check,
//! and report rendering. Every mode prints one PASS/FAIL line per asserted
//! property and exits nonzero if any of them fail.

use clap::{Args, Parser, Subcommand};
use csf_lab::error::{Error, Result};
use csf_lab::harness::{
    ablate_dim, ablate_objective, ablate_skills, emit_report, lemma_check, run_csf, RunConfig,
};
use csf_lab::nn::load_checkpoint;
use csf_lab::rng::{child_seed, substream};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "csf-lab",
    about = "Contrastive successor features on synthetic worlds: training, ablations, and identifiability checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config mirroring the run configuration; defaults apply to
    /// missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (CSF_LAB_OUT overrides).
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for multi-run modes.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training run and write its artifacts.
    Train(CommonArgs),
    /// Re-evaluate a finished run directory from its checkpoint.
    Eval(CommonArgs),
    /// Vary the fixed skill-set size (plus the resampling case).
    AblateSkills {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixed-set sizes to run.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 4, 8, 16, 64])]
        counts: Vec<usize>,
        /// Skip the resampling cell.
        #[arg(long)]
        no_resample: bool,
    },
    /// Vary the encoder output (skill) dimensionality.
    AblateDim {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4, 8, 16])]
        dims: Vec<usize>,
    },
    /// Compare the three critic parametrizations on identical data streams.
    AblateObjective(CommonArgs),
    /// Maximum-entropy experiment: uniform vs scripted policy.
    LemmaCheck(CommonArgs),
    /// Render summary.txt and SVG plots from a finished run directory.
    Report(CommonArgs),
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(common: &CommonArgs) -> PathBuf {
    match std::env::var_os("CSF_LAB_OUT") {
        Some(dir) => PathBuf::from(dir),
        None => common.out.clone(),
    }
}

/// Collects assertion lines; the process exit code reflects them.
struct Gate {
    failures: usize,
}

impl Gate {
    fn new() -> Self {
        Self { failures: 0 }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {name}: {detail}");
        if !pass {
            self.failures += 1;
        }
    }

    fn into_exit(self) -> ExitCode {
        if self.failures == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        }
    }
}

fn cmd_train(common: &CommonArgs) -> Result<ExitCode> {
    let config = load_config(common)?;
    let dir = out_dir(common);
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }
    let report = run_csf(&config, Some(&dir))?;
    emit_report(&dir)?;
    println!(
        "run finished in {:.1}s: loss={:.4} acc={:.4} r2_state={:.4} r2_diff={:.4} coverage={} oracle={:.2}",
        report.wall_time_s,
        report.final_loss,
        report.heldout_accuracy,
        report.r2_state,
        report.r2_diff,
        report.coverage.occupied,
        report.oracle.oracle_return,
    );
    let mut gate = Gate::new();
    gate.check(
        "run-health",
        report.failure.is_none(),
        format!("failure={:?}", report.failure),
    );
    gate.check(
        "metrics-finite",
        report.final_loss.is_finite() && report.r2_diff.is_finite(),
        format!("loss={} r2_diff={}", report.final_loss, report.r2_diff),
    );
    Ok(gate.into_exit())
}

fn cmd_eval(common: &CommonArgs) -> Result<ExitCode> {
    let dir = out_dir(common);
    let config: RunConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
    let (header, params) = load_checkpoint(&dir.join("checkpoint"))?;
    let generator = csf_lab::world::make_generator(&config.generator_spec())?;

    // fresh probe pairs, independent of the training probe stream
    let mut rng = substream(config.seed, "eval-cli-probe", 0);
    let half = config.env.half_width / 2.0;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..config.eval.probe_pairs.max(500))
        .map(|_| {
            let s: Vec<f64> = (0..config.env.d)
                .map(|_| rand::Rng::gen_range(&mut rng, -half..half))
                .collect();
            let u = csf_lab::geometry::sample_uniform_sphere(config.env.d, &mut rng)?;
            let s_next = s.iter().zip(u.as_slice()).map(|(a, b)| a + b).collect();
            Ok((s, s_next))
        })
        .collect::<Result<_>>()?;
    let probe = csf_lab::eval::identifiability_probe(
        &header.spec,
        &params,
        &generator,
        &pairs,
        child_seed(config.seed, "eval-cli-split", 0),
    )?;
    let eval_json = serde_json::json!({
        "checkpoint_step": header.step,
        "r2_state": probe.r2_state,
        "r2_diff": probe.r2_diff,
    });
    std::fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&eval_json)?)?;
    println!(
        "eval: step={} r2_state={:.4} r2_diff={:.4}",
        header.step, probe.r2_state, probe.r2_diff
    );
    let mut gate = Gate::new();
    gate.check(
        "probe-finite",
        probe.r2_state.is_finite() && probe.r2_diff.is_finite(),
        format!("r2_state={} r2_diff={}", probe.r2_state, probe.r2_diff),
    );
    Ok(gate.into_exit())
}

fn cmd_ablate_skills(
    common: &CommonArgs,
    counts: &[usize],
    include_resample: bool,
) -> Result<ExitCode> {
    let base = load_config(common)?;
    let dir = out_dir(common);
    let report = ablate_skills(&base, counts, include_resample, Some(&dir), common.workers)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("skill-ablation.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("label, r2_diff, coverage_fraction, affine_generator");
    for (label, r2, cov, affine) in &report.trend {
        println!("{label}, {r2:.4}, {cov:.4}, {affine}");
    }

    let mut gate = Gate::new();
    let d = base.env.d;
    for cell in &report.cells {
        let count = match cell.report.config.skills.mode {
            csf_lab::geometry::SkillMode::FixedSet => Some(cell.report.config.skills.count),
            csf_lab::geometry::SkillMode::ResampleEachBatch => None,
        };
        let expect = count.map_or(true, |c| c >= d + 1);
        gate.check(
            &format!("affine-{}", cell.label),
            cell.report.affine_generator.is_generator == expect,
            format!(
                "is_generator={} expected={expect}",
                cell.report.affine_generator.is_generator
            ),
        );
    }
    let fixed: Vec<&csf_lab::harness::AblationCell> = report
        .cells
        .iter()
        .filter(|c| c.report.config.skills.mode == csf_lab::geometry::SkillMode::FixedSet)
        .collect();
    if fixed.len() >= 2 {
        let smallest = fixed
            .iter()
            .min_by_key(|c| c.report.config.skills.count)
            .unwrap();
        let largest = fixed
            .iter()
            .max_by_key(|c| c.report.config.skills.count)
            .unwrap();
        gate.check(
            "r2-trend",
            smallest.report.r2_diff <= largest.report.r2_diff,
            format!(
                "r2_diff {}={:.4} vs {}={:.4}",
                smallest.label, smallest.report.r2_diff, largest.label, largest.report.r2_diff
            ),
        );
        gate.check(
            "coverage-trend",
            smallest.report.coverage.occupied <= largest.report.coverage.occupied,
            format!(
                "coverage {}={} vs {}={}",
                smallest.label,
                smallest.report.coverage.occupied,
                largest.label,
                largest.report.coverage.occupied
            ),
        );
    }
    Ok(gate.into_exit())
}

fn cmd_ablate_dim(common: &CommonArgs, dims: &[usize]) -> Result<ExitCode> {
    let base = load_config(common)?;
    let dir = out_dir(common);
    let report = ablate_dim(&base, dims, Some(&dir), common.workers)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("dim-ablation.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("label, r2_diff, oracle_return");
    for (label, r2, oracle) in &report.trend {
        println!("{label}, {r2:.4}, {oracle:.2}");
    }

    let mut gate = Gate::new();
    let d = base.env.d;
    let at_dim = |dim: usize| {
        report
            .cells
            .iter()
            .find(|c| c.report.config.latent_dim == Some(dim))
    };
    if let (Some(smallest), Some(native)) = (dims.iter().min().and_then(|&m| at_dim(m)), at_dim(d))
    {
        if smallest.report.config.latent_dim != Some(d) {
            gate.check(
                "bottleneck-r2",
                smallest.report.r2_diff <= native.report.r2_diff,
                format!(
                    "r2_diff {}={:.4} vs {}={:.4}",
                    smallest.label, smallest.report.r2_diff, native.label, native.report.r2_diff
                ),
            );
        }
    }
    gate.check("cells-ran", report.cells.len() == dims.len(), format!("{} cells", report.cells.len()));
    Ok(gate.into_exit())
}

fn cmd_ablate_objective(common: &CommonArgs) -> Result<ExitCode> {
    let base = load_config(common)?;
    let dir = out_dir(common);
    let report = ablate_objective(&base, Some(&dir), common.workers)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("objective-ablation.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("objective, mean_abs_cos_consecutive, r2_state, r2_diff");
    for cell in &report.cells {
        println!(
            "{}, {:.6}, {:.4}, {:.4}",
            cell.label,
            cell.report.geometry.mean_abs_cos_consecutive,
            cell.report.r2_state,
            cell.report.r2_diff
        );
    }
    let cos_of = |label: &str| {
        report
            .consecutive_cosine
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| *c)
            .unwrap_or(f64::NAN)
    };
    let mut gate = Gate::new();
    gate.check(
        "marginal-collapses-consecutive-features",
        cos_of("marginal") > cos_of("future-diff"),
        format!(
            "marginal |cos|={:.6} vs future-diff |cos|={:.6}",
            cos_of("marginal"),
            cos_of("future-diff")
        ),
    );
    Ok(gate.into_exit())
}

fn cmd_lemma_check(common: &CommonArgs) -> Result<ExitCode> {
    let base = load_config(common)?;
    let dir = out_dir(common);
    let report = lemma_check(&base, Some(&dir), common.workers)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("lemma-check.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "uniform:  accuracy={:.4} (chance {:.4}), mean_reward={:+.4}, diversity={:.4}",
        report.uniform.heldout_accuracy,
        report.chance_accuracy,
        report.uniform_mean_reward,
        report.uniform.diversity.score
    );
    println!(
        "scripted: accuracy={:.4}, mean_reward={:+.4}, diversity={:.4}",
        report.scripted.heldout_accuracy, report.scripted_mean_reward, report.scripted.diversity.score
    );

    let n = report.uniform.config.eval.heldout_records as f64;
    let mut gate = Gate::new();
    gate.check(
        "uniform-accuracy-at-chance",
        report.uniform_accuracy_gap <= 0.03,
        format!("gap={:.4}", report.uniform_accuracy_gap),
    );
    gate.check(
        "uniform-reward-vanishes",
        report.uniform_mean_reward.abs() <= 3.0 / n.sqrt(),
        format!(
            "|{:.4}| vs 3/sqrt(N)={:.4}",
            report.uniform_mean_reward,
            3.0 / n.sqrt()
        ),
    );
    gate.check(
        "scripted-beats-chance",
        report.scripted.heldout_accuracy >= 5.0 * report.chance_accuracy,
        format!(
            "{:.4} vs 5x chance {:.4}",
            report.scripted.heldout_accuracy,
            5.0 * report.chance_accuracy
        ),
    );
    Ok(gate.into_exit())
}

fn cmd_report(common: &CommonArgs) -> Result<ExitCode> {
    let dir = out_dir(common);
    emit_report(&dir)?;
    println!("report rendered into {}", dir.display());
    let mut gate = Gate::new();
    for file in ["summary.txt", "loss.svg", "r2.svg"] {
        gate.check(file, dir.join(file).exists(), format!("{}", dir.join(file).display()));
    }
    Ok(gate.into_exit())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(common) => cmd_train(common),
        Command::Eval(common) => cmd_eval(common),
        Command::AblateSkills {
            common,
            counts,
            no_resample,
        } => cmd_ablate_skills(common, counts, !no_resample),
        Command::AblateDim { common, dims } => cmd_ablate_dim(common, dims),
        Command::AblateObjective(common) => cmd_ablate_objective(common),
        Command::LemmaCheck(common) => cmd_lemma_check(common),
        Command::Report(common) => cmd_report(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::InvalidConfig(_) = err {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
