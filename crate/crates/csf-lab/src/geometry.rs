//! Directional statistics on the unit hypersphere: uniform and von
//! Mises-Fisher sampling, vMF log density, and rank diagnostics for skill
//! sets (affine generator check).

use crate::bessel::ln_vmf_normalizer;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Tolerance for the unit-norm invariant.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A point on the unit sphere S^(d-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wrap coordinates that are already unit-norm (within `UNIT_NORM_TOL`).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension);
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidConfig(format!(
                "unit vector norm {norm} deviates from 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Normalize arbitrary coordinates onto the sphere.
    pub fn from_unnormalized(mut coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension);
        }
        let norm = norm(&coords);
        if norm < 1e-12 || !norm.is_finite() {
            return Err(Error::InvalidConfig(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(coords))
    }

    /// Standard basis vector e_axis in R^d.
    pub fn basis(d: usize, axis: usize) -> Self {
        assert!(axis < d);
        let mut coords = vec![0.0; d];
        coords[axis] = 1.0;
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// von Mises-Fisher parameters; kappa = 0 is the uniform distribution.
#[derive(Debug, Clone)]
pub struct VmfParams {
    pub mean: UnitVector,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mean: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kappa must be finite and nonnegative, got {kappa}"
            )));
        }
        Ok(Self { mean, kappa })
    }
}

/// How a run treats its skill vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkillMode {
    /// A fixed list drawn once and reused for the whole run.
    FixedSet,
    /// The list is only the current draw; refreshed from the uniform sphere.
    ResampleEachBatch,
}

/// An ordered set of unit-norm skills, all of the same dimension.
#[derive(Debug, Clone)]
pub struct SkillSet {
    skills: Vec<UnitVector>,
    pub mode: SkillMode,
}

impl SkillSet {
    pub fn new(skills: Vec<UnitVector>, mode: SkillMode) -> Result<Self> {
        let Some(first) = skills.first() else {
            return Err(Error::InvalidConfig("skill set may not be empty".into()));
        };
        let d = first.dim();
        if skills.iter().any(|z| z.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: skills.iter().map(UnitVector::dim).max().unwrap(),
            });
        }
        Ok(Self { skills, mode })
    }

    /// Draw `count` skills uniformly from the sphere.
    pub fn sample_uniform<R: Rng>(d: usize, count: usize, mode: SkillMode, rng: &mut R) -> Result<Self> {
        let skills = (0..count)
            .map(|_| sample_uniform_sphere(d, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(skills, mode)
    }

    pub fn dim(&self) -> usize {
        self.skills[0].dim()
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn skills(&self) -> &[UnitVector] {
        &self.skills
    }

    /// Replace the current draw (resample mode refreshes between batches).
    pub fn refresh<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.dim();
        for z in &mut self.skills {
            *z = sample_uniform_sphere(d, rng)?;
        }
        Ok(())
    }
}

/// Uniform sample on S^(d-1): normalized standard Gaussian draw.
pub fn sample_uniform_sphere<R: Rng>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    loop {
        let coords: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::from_unnormalized(coords) {
            return Ok(u);
        }
        // astronomically rare: all-zero draw; try again
    }
}

/// vMF sample via the tangent-normal rejection scheme: draw the cosine t of
/// the angle to the mean from its marginal, draw the tangent direction
/// uniformly, then rotate the frame so e_1 maps to the mean.
pub fn sample_vmf<R: Rng>(params: &VmfParams, rng: &mut R) -> Result<UnitVector> {
    let d = params.mean.dim();
    if params.kappa == 0.0 {
        return sample_uniform_sphere(d, rng);
    }
    if d == 1 {
        // S^0 = {-1, +1}; P(mean) = sigmoid(2 kappa)
        let p_mean = 1.0 / (1.0 + (-2.0 * params.kappa).exp());
        let sign = if rng.gen::<f64>() < p_mean { 1.0 } else { -1.0 };
        return UnitVector::new(vec![sign * params.mean.as_slice()[0]]);
    }

    let t = sample_vmf_cosine(d, params.kappa, rng);
    let tangent = sample_uniform_sphere(d - 1, rng)?;
    let radial = (1.0 - t * t).max(0.0).sqrt();
    let mut in_frame = Vec::with_capacity(d);
    in_frame.push(t);
    in_frame.extend(tangent.as_slice().iter().map(|v| v * radial));

    UnitVector::from_unnormalized(reflect_e1_to(&in_frame, params.mean.as_slice()))
}

/// Marginal of <mean, x> for vMF(kappa) in R^d, by rejection from a
/// Beta-based envelope.
fn sample_vmf_cosine<R: Rng>(d: usize, kappa: f64, rng: &mut R) -> f64 {
    let dm1 = (d - 1) as f64;
    // stable form of (-2k + sqrt(4k^2 + (d-1)^2)) / (d-1)
    let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * dm1, 0.5 * dm1).expect("valid beta shape");
    loop {
        let z = beta.sample(rng);
        let t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.gen();
        if kappa * t + dm1 * (1.0 - x0 * t).ln() - c >= u.ln() {
            return t.clamp(-1.0, 1.0);
        }
    }
}

/// Householder reflection taking e_1 to `target` (unit norm), applied to `v`.
fn reflect_e1_to(v: &[f64], target: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = target.to_vec();
    w[0] -= 1.0; // w = target - e1
    let w_norm_sq: f64 = w.iter().map(|x| x * x).sum();
    if w_norm_sq < 1e-24 {
        return v.to_vec(); // target is (numerically) e1 already
    }
    let scale = 2.0 * dot(&w, v) / w_norm_sq;
    v.iter().zip(&w).map(|(vi, wi)| vi - scale * wi).collect()
}

/// Log density of vMF at x: kappa <mean, x> + ln C_d(kappa).
pub fn vmf_log_density(params: &VmfParams, x: &UnitVector) -> Result<f64> {
    let d = params.mean.dim();
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.dim(),
        });
    }
    Ok(params.kappa * dot(params.mean.as_slice(), x.as_slice()) + ln_vmf_normalizer(d, params.kappa))
}

/// Relative singular-value tolerance for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Diagnostics for the affine-generator check on a skill set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineGeneratorReport {
    /// True iff affine combinations of the skills reach all of R^d.
    pub is_generator: bool,
    /// Rank of the difference matrix [z_i - z_1].
    pub rank: usize,
    /// Smallest nonzero singular value of the difference matrix (0 if all zero).
    pub smallest_nonzero_sv: f64,
    /// Smallest singular value of the column-centered skill matrix; a
    /// conditioning diagnostic, reported but not judged.
    pub centered_min_sv: f64,
}

/// A skill set affinely generates R^d iff the differences to the first skill
/// span R^d. Rank is decided on singular values with a relative tolerance.
pub fn is_affine_generator(skills: &SkillSet) -> AffineGeneratorReport {
    let d = skills.dim();
    let m = skills.len();
    let list = skills.skills();

    let (rank, smallest_nonzero_sv) = if m < 2 {
        (0, 0.0)
    } else {
        let diff = DMatrix::from_fn(d, m - 1, |r, c| {
            list[c + 1].as_slice()[r] - list[0].as_slice()[r]
        });
        let svs = diff.singular_values();
        let max_sv = svs.iter().cloned().fold(0.0_f64, f64::max);
        let tol = RANK_REL_TOL * max_sv;
        let nonzero: Vec<f64> = svs.iter().cloned().filter(|&s| s > tol).collect();
        let min_nonzero = nonzero.iter().cloned().fold(f64::INFINITY, f64::min);
        (
            nonzero.len(),
            if nonzero.is_empty() { 0.0 } else { min_nonzero },
        )
    };

    AffineGeneratorReport {
        is_generator: rank == d,
        rank,
        smallest_nonzero_sv,
        centered_min_sv: centered_min_singular_value(skills),
    }
}

/// Smallest singular value of the column-centered skill matrix.
pub fn centered_min_singular_value(skills: &SkillSet) -> f64 {
    let d = skills.dim();
    let m = skills.len();
    let list = skills.skills();
    let mut mean = vec![0.0; d];
    for z in list {
        for (acc, v) in mean.iter_mut().zip(z.as_slice()) {
            *acc += v / m as f64;
        }
    }
    let centered = DMatrix::from_fn(d, m, |r, c| list[c].as_slice()[r] - mean[r]);
    centered
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    #[test]
    fn unit_vector_rejects_bad_inputs() {
        assert!(UnitVector::new(vec![]).is_err());
        assert!(UnitVector::new(vec![0.5, 0.5]).is_err());
        assert!(UnitVector::from_unnormalized(vec![0.0, 0.0]).is_err());
        let u = UnitVector::from_unnormalized(vec![3.0, 4.0]).unwrap();
        assert_relative_eq!(norm(u.as_slice()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_sphere_d1_is_plus_minus_one() {
        let mut rng = substream(11, "test-s0", 0);
        let mut seen = [false; 2];
        for _ in 0..64 {
            let u = sample_uniform_sphere(1, &mut rng).unwrap();
            let v = u.as_slice()[0];
            assert!(v == 1.0 || v == -1.0);
            seen[usize::from(v > 0.0)] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn uniform_sphere_rejects_d0() {
        let mut rng = substream(11, "test-d0", 0);
        assert!(matches!(
            sample_uniform_sphere(0, &mut rng),
            Err(Error::InvalidDimension)
        ));
    }

    #[test]
    fn uniform_sphere_norms() {
        let mut rng = substream(11, "test-norm", 0);
        for d in [1, 2, 3, 7, 16] {
            for _ in 0..100 {
                let u = sample_uniform_sphere(d, &mut rng).unwrap();
                assert!((norm(u.as_slice()) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn vmf_unit_norm_over_kappa_and_dim_grid() {
        let mut rng = substream(12, "test-vmf-grid", 0);
        for d in 2..=16 {
            for &kappa in &[0.0, 1e-3, 1.0, 10.0, 1e6] {
                let mean = sample_uniform_sphere(d, &mut rng).unwrap();
                let params = VmfParams::new(mean, kappa).unwrap();
                for _ in 0..50 {
                    let x = sample_vmf(&params, &mut rng).unwrap();
                    assert!(
                        (norm(x.as_slice()) - 1.0).abs() <= UNIT_NORM_TOL,
                        "norm violated at d={d}, kappa={kappa}"
                    );
                }
            }
        }
    }

    #[test]
    fn vmf_huge_kappa_concentrates_on_mean() {
        let mut rng = substream(13, "test-vmf-conc", 0);
        let mean = UnitVector::basis(4, 0);
        let params = VmfParams::new(mean.clone(), 1e6).unwrap();
        for _ in 0..200 {
            let x = sample_vmf(&params, &mut rng).unwrap();
            let dist: f64 = x
                .as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(dist < 0.01, "sample strayed {dist} from the mean");
        }
    }

    #[test]
    fn vmf_mean_direction_cosine_high_kappa() {
        // Empirical mean direction aligns with params.mean for kappa >= 10.
        let mut rng = substream(14, "test-vmf-cos", 0);
        for d in [3, 8] {
            for &kappa in &[10.0, 100.0] {
                let mean = sample_uniform_sphere(d, &mut rng).unwrap();
                let params = VmfParams::new(mean.clone(), kappa).unwrap();
                let n = 100_000;
                let mut acc = vec![0.0; d];
                for _ in 0..n {
                    let x = sample_vmf(&params, &mut rng).unwrap();
                    for (a, v) in acc.iter_mut().zip(x.as_slice()) {
                        *a += v;
                    }
                }
                let cos = dot(&acc, mean.as_slice()) / norm(&acc);
                assert!(cos >= 0.99, "cos={cos} at d={d}, kappa={kappa}");
            }
        }
    }

    #[test]
    fn vmf_d1_matches_two_point_distribution() {
        let mut rng = substream(15, "test-vmf-d1", 0);
        let params = VmfParams::new(UnitVector::basis(1, 0), 1.0).unwrap();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| sample_vmf(&params, &mut rng).unwrap().as_slice()[0] > 0.0)
            .count();
        let expected = 1.0 / (1.0 + (-2.0_f64).exp());
        let freq = hits as f64 / n as f64;
        assert!((freq - expected).abs() < 5e-3, "freq={freq} vs {expected}");
    }

    #[test]
    fn log_density_uniform_case_and_rotation_symmetry() {
        let params = VmfParams::new(UnitVector::basis(3, 0), 0.0).unwrap();
        let expect = (1.0 / (4.0 * std::f64::consts::PI)).ln();
        for axis in 0..3 {
            let x = UnitVector::basis(3, axis);
            assert_relative_eq!(vmf_log_density(&params, &x).unwrap(), expect, epsilon = 1e-12);
        }

        // density depends on x only through <mean, x>: rotate around the mean
        let params = VmfParams::new(UnitVector::basis(3, 2), 2.5).unwrap();
        let t = 0.3_f64;
        let r = (1.0 - t * t).sqrt();
        let mut rng = substream(16, "test-rot", 0);
        let mut reference = None;
        for _ in 0..20 {
            let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let x = UnitVector::new(vec![r * phi.cos(), r * phi.sin(), t]).unwrap();
            let ld = vmf_log_density(&params, &x).unwrap();
            let reference = *reference.get_or_insert(ld);
            assert_relative_eq!(ld, reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_density_dimension_mismatch() {
        let params = VmfParams::new(UnitVector::basis(3, 0), 1.0).unwrap();
        let x = UnitVector::basis(4, 0);
        assert!(vmf_log_density(&params, &x).is_err());
    }

    /// Row-echelon rank with partial pivoting: an oracle for the SVD-based
    /// rank decision that shares no code with it.
    fn elimination_rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
        let nrows = rows.len();
        if nrows == 0 {
            return 0;
        }
        let ncols = rows[0].len();
        let mut rank = 0;
        let mut col = 0;
        while rank < nrows && col < ncols {
            let pivot = (rank..nrows)
                .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
                .unwrap();
            if rows[pivot][col].abs() < tol {
                col += 1;
                continue;
            }
            rows.swap(rank, pivot);
            for r in rank + 1..nrows {
                let f = rows[r][col] / rows[rank][col];
                for c in col..ncols {
                    rows[r][c] -= f * rows[rank][c];
                }
            }
            rank += 1;
            col += 1;
        }
        rank
    }

    #[test]
    fn affine_generator_simplex_and_degenerate_sets() {
        // d+1 simplex vertices in R^d span affinely: use d=3 with the
        // vertices of a regular tetrahedron (normalized).
        let verts = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        let skills = verts
            .iter()
            .map(|v| UnitVector::from_unnormalized(v.to_vec()).unwrap())
            .collect();
        let set = SkillSet::new(skills, SkillMode::FixedSet).unwrap();
        let rep = is_affine_generator(&set);
        assert!(rep.is_generator);
        assert_eq!(rep.rank, 3);
        assert!(rep.centered_min_sv > 0.1);

        // d copies of one vector fail
        let z = UnitVector::from_unnormalized(vec![1.0, 2.0, 2.0]).unwrap();
        let set = SkillSet::new(vec![z.clone(), z.clone(), z], SkillMode::FixedSet).unwrap();
        let rep = is_affine_generator(&set);
        assert!(!rep.is_generator);
        assert_eq!(rep.rank, 0);
        assert!(rep.centered_min_sv.abs() < 1e-12);

        // collinear points fail: +e1, -e1 in R^2 (2 points, 1 difference)
        let set = SkillSet::new(
            vec![UnitVector::basis(2, 0), UnitVector::new(vec![-1.0, 0.0]).unwrap()],
            SkillMode::FixedSet,
        )
        .unwrap();
        let rep = is_affine_generator(&set);
        assert!(!rep.is_generator);
        assert_eq!(rep.rank, 1);
        assert!(rep.centered_min_sv.abs() < 1e-12);
    }

    #[test]
    fn affine_generator_matches_elimination_oracle_on_random_sets() {
        let mut rng = substream(17, "test-affine-oracle", 0);
        // 64 uniform samples on S^3 in R^4: generator with probability one.
        let set = SkillSet::sample_uniform(4, 64, SkillMode::FixedSet, &mut rng).unwrap();
        let rep = is_affine_generator(&set);
        assert!(rep.is_generator);

        let rows: Vec<Vec<f64>> = (1..set.len())
            .map(|i| {
                set.skills()[i]
                    .as_slice()
                    .iter()
                    .zip(set.skills()[0].as_slice())
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        // transpose-invariant rank; rows are the differences
        assert_eq!(elimination_rank(rows, 1e-10), rep.rank);

        // Undersized sets (m <= d collinear/under-spanning) agree with oracle.
        for m in 1..=4 {
            let set = SkillSet::sample_uniform(4, m, SkillMode::FixedSet, &mut rng).unwrap();
            let rep = is_affine_generator(&set);
            assert_eq!(rep.is_generator, m - 1 == 4, "m={m}");
            let rows: Vec<Vec<f64>> = (1..m)
                .map(|i| {
                    set.skills()[i]
                        .as_slice()
                        .iter()
                        .zip(set.skills()[0].as_slice())
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect();
            assert_eq!(elimination_rank(rows, 1e-10), rep.rank);
        }
    }

    #[test]
    fn affine_generator_verdict_invariant_under_linear_images() {
        // Invertible linear images preserve the affine-generator property.
        let mut rng = substream(18, "test-affine-inv", 0);
        for (count, expect) in [(6, true), (3, false)] {
            let base = SkillSet::sample_uniform(4, count, SkillMode::FixedSet, &mut rng).unwrap();
            assert_eq!(is_affine_generator(&base).is_generator, expect);
            for _ in 0..100 {
                // well-conditioned map: I + 0.3 * G with G standard normal
                let g: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
                let mapped: Vec<UnitVector> = base
                    .skills()
                    .iter()
                    .map(|z| {
                        let s = z.as_slice();
                        let coords: Vec<f64> = (0..4)
                            .map(|r| {
                                s[r] + 0.3 * (0..4).map(|c| g[4 * r + c] * s[c]).sum::<f64>()
                            })
                            .collect();
                        UnitVector::from_unnormalized(coords).unwrap()
                    })
                    .collect();
                let mapped = SkillSet::new(mapped, SkillMode::FixedSet).unwrap();
                assert_eq!(is_affine_generator(&mapped).is_generator, expect);
            }
        }
    }

    #[test]
    fn skill_set_refresh_changes_draw() {
        let mut rng = substream(19, "test-refresh", 0);
        let mut set =
            SkillSet::sample_uniform(3, 4, SkillMode::ResampleEachBatch, &mut rng).unwrap();
        let before = set.skills()[0].clone();
        set.refresh(&mut rng).unwrap();
        assert_ne!(before, set.skills()[0]);
        assert_eq!(set.len(), 4);
    }
}
