//! Evaluation stack: least-squares identifiability probes (held-out R^2),
//! state coverage, oracle return for zero-shot transfer, feature-geometry
//! diagnostics, and skill-set conditioning.

use crate::csf::SourceRecord;
use crate::error::{Error, Result};
use crate::geometry::{centered_min_singular_value, dot, norm, SkillSet, UnitVector};
use crate::nn::{evaluate, MlpSpec, ParamVector};
use crate::policy::{rollout, PolicyContext, PolicyKind, Trajectory};
use crate::rng::substream;
use crate::world::Generator;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Ridge strength of the rank-deficient fallback.
const RIDGE_LAMBDA: f64 = 1e-8;

/// Ordinary-least-squares map with held-out goodness of fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFitResult {
    /// Row-major target_dim x feature_dim map: targets ~ a * features + intercept.
    pub a: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    /// Held-out R^2 per target dimension.
    pub r2_per_dim: Vec<f64>,
    /// Variance-weighted aggregate over target dimensions.
    pub r2_aggregate: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Set when the design matrix was rank-deficient and a small ridge was used.
    pub ridge_fallback: bool,
    /// The fit always includes an intercept column.
    pub intercept_included: bool,
}

/// Least squares with intercept on a deterministic 80/20 split; R^2 is
/// evaluated on the held-out 20%. Rank-deficient designs fall back to a
/// small ridge and set a flag.
pub fn fit_linear_map(
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    split_seed: u64,
) -> Result<LinearFitResult> {
    if features.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    let n = features.len();
    let Some(p) = features.first().map(Vec::len) else {
        return Err(Error::MissingData("no samples to fit".into()));
    };
    let q = targets[0].len();
    if n < 10 * (p + 1) {
        return Err(Error::InvalidConfig(format!(
            "need at least {} samples for {} features, got {n}",
            10 * (p + 1),
            p
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = substream(split_seed, "linear-fit-split", 0);
    indices.shuffle(&mut rng);
    let n_test = (n / 5).max(1);
    let (test_idx, train_idx) = indices.split_at(n_test);

    // design matrix with leading intercept column
    let x = DMatrix::from_fn(train_idx.len(), p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            features[train_idx[r]][c - 1]
        }
    });
    let y = DMatrix::from_fn(train_idx.len(), q, |r, c| targets[train_idx[r]][c]);

    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..p + 1).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let rank_deficient = diag_max == 0.0
        || (0..p + 1).any(|i| r[(i, i)].abs() < 1e-12 * diag_max);

    let w = if rank_deficient {
        // (X^T X + lambda I) W = X^T Y via Cholesky
        let xtx = x.transpose() * &x + DMatrix::identity(p + 1, p + 1) * RIDGE_LAMBDA;
        let xty = x.transpose() * &y;
        let chol = xtx
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("ridge normal equations not SPD".into()))?;
        chol.solve(&xty)
    } else {
        let qt_y = qr.q().transpose() * &y;
        r.solve_upper_triangular(&qt_y)
            .ok_or_else(|| Error::InvalidConfig("triangular solve failed".into()))?
    };

    let intercept: Vec<f64> = (0..q).map(|c| w[(0, c)]).collect();
    let a: Vec<Vec<f64>> = (0..q)
        .map(|c| (0..p).map(|j| w[(j + 1, c)]).collect())
        .collect();

    // held-out R^2 per target dimension, and the variance-weighted aggregate
    let mut ss_res = vec![0.0; q];
    let mut ss_tot = vec![0.0; q];
    let mut test_mean = vec![0.0; q];
    for &i in test_idx {
        for c in 0..q {
            test_mean[c] += targets[i][c] / test_idx.len() as f64;
        }
    }
    for &i in test_idx {
        for c in 0..q {
            let pred = intercept[c] + dot(&a[c], &features[i]);
            ss_res[c] += (targets[i][c] - pred).powi(2);
            ss_tot[c] += (targets[i][c] - test_mean[c]).powi(2);
        }
    }
    let r2_per_dim: Vec<f64> = ss_res
        .iter()
        .zip(&ss_tot)
        .map(|(res, tot)| {
            if *tot > 0.0 {
                1.0 - res / tot
            } else if *res == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let total_res: f64 = ss_res.iter().sum();
    let total_tot: f64 = ss_tot.iter().sum();
    let r2_aggregate = if total_tot > 0.0 {
        1.0 - total_res / total_tot
    } else {
        0.0
    };

    Ok(LinearFitResult {
        a,
        intercept,
        r2_per_dim,
        r2_aggregate,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        ridge_fallback: rank_deficient,
        intercept_included: true,
    })
}

/// Identifiability probe results: how well a linear map recovers states from
/// features and state differences from feature differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeResult {
    pub r2_state: f64,
    pub r2_diff: f64,
    pub state_fit: LinearFitResult,
    pub diff_fit: LinearFitResult,
}

/// Observe latent pairs through the generator, encode, and fit linear maps
/// for both states and consecutive differences.
pub fn identifiability_probe(
    spec: &MlpSpec,
    params: &ParamVector,
    generator: &Generator,
    pairs: &[(Vec<f64>, Vec<f64>)],
    split_seed: u64,
) -> Result<ProbeResult> {
    if pairs.len() < 500 {
        return Err(Error::InvalidConfig(
            "probe needs at least 500 state pairs (1000 states)".into(),
        ));
    }
    let mut state_features = Vec::with_capacity(pairs.len() * 2);
    let mut state_targets = Vec::with_capacity(pairs.len() * 2);
    let mut diff_features = Vec::with_capacity(pairs.len());
    let mut diff_targets = Vec::with_capacity(pairs.len());
    for (s, s_next) in pairs {
        let phi = evaluate(spec, params, &generator.observe(s))?;
        let phi_next = evaluate(spec, params, &generator.observe(s_next))?;
        diff_features.push(phi.iter().zip(&phi_next).map(|(a, b)| b - a).collect());
        diff_targets.push(s.iter().zip(s_next).map(|(a, b)| b - a).collect());
        state_features.push(phi);
        state_targets.push(s.clone());
        state_features.push(phi_next);
        state_targets.push(s_next.clone());
    }
    let state_fit = fit_linear_map(&state_features, &state_targets, split_seed)?;
    let diff_fit = fit_linear_map(&diff_features, &diff_targets, split_seed)?;
    Ok(ProbeResult {
        r2_state: state_fit.r2_aggregate,
        r2_diff: diff_fit.r2_aggregate,
        state_fit,
        diff_fit,
    })
}

/// Occupancy of a G x G grid over the first two latent coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub grid: usize,
    pub cell_len: f64,
    pub occupied: usize,
    /// Fraction of this run's cells among the union of cells touched by all
    /// runs in a comparison set; filled by the comparison, absent otherwise.
    pub fraction_of_union: Option<f64>,
    #[serde(skip)]
    pub cells: std::collections::BTreeSet<(u32, u32)>,
}

/// Cell index of a state projected onto its first two coordinates.
fn cell_of(state: &[f64], grid: usize, half_width: f64) -> (u32, u32) {
    let cell_len = 2.0 * half_width / grid as f64;
    let clamp = |x: f64| -> u32 {
        let idx = ((x + half_width) / cell_len).floor();
        idx.clamp(0.0, (grid - 1) as f64) as u32
    };
    let x = state.first().copied().unwrap_or(0.0);
    let y = state.get(1).copied().unwrap_or(0.0);
    (clamp(x), clamp(y))
}

/// Count distinct occupied cells over all states of all trajectories.
pub fn state_coverage(
    trajectories: &[Trajectory],
    grid: usize,
    half_width: f64,
) -> Result<CoverageReport> {
    if grid < 2 {
        return Err(Error::InvalidConfig("grid must be at least 2".into()));
    }
    let mut report = CoverageReport {
        grid,
        cell_len: 2.0 * half_width / grid as f64,
        occupied: 0,
        fraction_of_union: None,
        cells: Default::default(),
    };
    for traj in trajectories {
        for state in traj.states() {
            report.cells.insert(cell_of(state, grid, half_width));
        }
    }
    report.occupied = report.cells.len();
    Ok(report)
}

/// Accumulating coverage counter for long runs.
#[derive(Debug, Clone)]
pub struct CoverageAccumulator {
    grid: usize,
    half_width: f64,
    cells: std::collections::BTreeSet<(u32, u32)>,
}

impl CoverageAccumulator {
    pub fn new(grid: usize, half_width: f64) -> Self {
        Self {
            grid,
            half_width,
            cells: Default::default(),
        }
    }

    pub fn add_state(&mut self, state: &[f64]) {
        self.cells.insert(cell_of(state, self.grid, self.half_width));
    }

    pub fn add_trajectory(&mut self, traj: &Trajectory) {
        for state in traj.states() {
            self.add_state(state);
        }
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    pub fn report(&self) -> CoverageReport {
        CoverageReport {
            grid: self.grid,
            cell_len: 2.0 * self.half_width / self.grid as f64,
            occupied: self.cells.len(),
            fraction_of_union: None,
            cells: self.cells.clone(),
        }
    }
}

/// Fill `fraction_of_union` across a comparison set of coverage reports.
pub fn coverage_fractions(reports: &mut [CoverageReport]) {
    let mut union = std::collections::BTreeSet::new();
    for rep in reports.iter() {
        union.extend(rep.cells.iter().copied());
    }
    let total = union.len().max(1) as f64;
    for rep in reports.iter_mut() {
        rep.fraction_of_union = Some(rep.cells.len() as f64 / total);
    }
}

/// Zero-shot transfer probe: roll every sampled skill once and score each
/// against a hidden task direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReturnReport {
    pub hidden_direction: UnitVector,
    pub per_skill: Vec<f64>,
    pub best_skill: usize,
    pub oracle_return: f64,
}

/// Per-skill return is the displacement along `hidden_w`:
/// sum_t <w, s_(t+1) - s_t> = <w, s_T - s_0>. The oracle return is the max.
pub fn oracle_return(
    ctx: &PolicyContext,
    policy: &PolicyKind,
    skills: &[UnitVector],
    hidden_w: &UnitVector,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<OracleReturnReport> {
    if skills.is_empty() {
        return Err(Error::MissingData("no skills to evaluate".into()));
    }
    if hidden_w.dim() != ctx.env.d {
        return Err(Error::DimensionMismatch {
            expected: ctx.env.d,
            got: hidden_w.dim(),
        });
    }
    let mut per_skill = Vec::with_capacity(skills.len());
    for z in skills {
        let traj = rollout(ctx, policy, z, horizon, rng)?;
        let start = &traj.records[0].s;
        let end = &traj.records.last().unwrap().s_next;
        let displacement: f64 = end
            .iter()
            .zip(start)
            .zip(hidden_w.as_slice())
            .map(|((e, s), w)| (e - s) * w)
            .sum();
        per_skill.push(displacement);
    }
    let best_skill = per_skill
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    Ok(OracleReturnReport {
        hidden_direction: hidden_w.clone(),
        oracle_return: per_skill[best_skill],
        best_skill,
        per_skill,
    })
}

/// Feature-geometry statistics over a transition sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryDiagnostics {
    /// Mean |cos(phi(o), phi(o'))| over valid pairs: collapse/antipodality
    /// indicator for consecutive features.
    pub mean_abs_cos_consecutive: f64,
    /// Mean cos(phi(o') - phi(o), z).
    pub mean_cos_diff_skill: f64,
    pub diff_norm_mean: f64,
    pub diff_norm_min: f64,
    pub diff_norm_max: f64,
    /// Pairs dropped because a feature or difference norm vanished.
    pub excluded: usize,
    pub included: usize,
}

pub fn geometry_diagnostics(
    spec: &MlpSpec,
    params: &ParamVector,
    records: &[SourceRecord],
) -> Result<GeometryDiagnostics> {
    if records.is_empty() {
        return Err(Error::MissingData("no transitions to diagnose".into()));
    }
    const EPS: f64 = 1e-12;
    let mut cos_sum = 0.0;
    let mut cos_diff_sum = 0.0;
    let mut norm_sum = 0.0;
    let mut norm_min = f64::INFINITY;
    let mut norm_max = 0.0_f64;
    let mut included = 0usize;
    let mut excluded = 0usize;
    for rec in records {
        let phi = evaluate(spec, params, &rec.o)?;
        let phi_next = evaluate(spec, params, &rec.o_next)?;
        let diff: Vec<f64> = phi_next.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let (n_o, n_n, n_d) = (norm(&phi), norm(&phi_next), norm(&diff));
        if n_o < EPS || n_n < EPS || n_d < EPS {
            excluded += 1;
            continue;
        }
        cos_sum += (dot(&phi, &phi_next) / (n_o * n_n)).abs();
        cos_diff_sum += dot(&diff, rec.z.as_slice()) / n_d;
        norm_sum += n_d;
        norm_min = norm_min.min(n_d);
        norm_max = norm_max.max(n_d);
        included += 1;
    }
    if included == 0 {
        return Ok(GeometryDiagnostics {
            mean_abs_cos_consecutive: f64::NAN,
            mean_cos_diff_skill: f64::NAN,
            diff_norm_mean: f64::NAN,
            diff_norm_min: f64::NAN,
            diff_norm_max: f64::NAN,
            excluded,
            included,
        });
    }
    Ok(GeometryDiagnostics {
        mean_abs_cos_consecutive: cos_sum / included as f64,
        mean_cos_diff_skill: cos_diff_sum / included as f64,
        diff_norm_mean: norm_sum / included as f64,
        diff_norm_min: norm_min,
        diff_norm_max: norm_max,
        excluded,
        included,
    })
}

/// Conditioning diagnostic: smallest singular value of the column-centered
/// skill matrix. Logged with every run; near-zero means the skills are
/// (almost) affinely dependent.
pub fn skill_conditioning(skills: &SkillSet) -> Result<f64> {
    if skills.len() < 2 {
        return Err(Error::SingleSkill);
    }
    Ok(centered_min_singular_value(skills))
}
