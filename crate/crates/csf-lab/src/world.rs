//! The synthetic ground-truth world: a latent random walk with unit-length
//! steps inside a box, plus a continuous injective generator that lifts
//! latent states to higher-dimensional observations.

use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_sphere, sample_vmf, UnitVector, VmfParams};
use crate::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Ground-truth latent state (coordinates in environment units).
pub type LatentState = Vec<f64>;
/// Observation produced by the generator.
pub type Observation = Vec<f64>;

/// What happens when a step would leave the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Mirror the overshoot back into the box.
    Reflect,
    /// Project onto the box.
    Clamp,
}

/// Environment parameters for the latent random walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Latent dimension d.
    pub d: usize,
    /// Box half-width B; states live in [-B, B]^d.
    pub half_width: f64,
    pub boundary: BoundaryRule,
    /// Concentration used by scripted policies.
    pub kappa_env: f64,
    /// Steps per episode.
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            d: 4,
            half_width: 50.0,
            boundary: BoundaryRule::Reflect,
            kappa_env: 10.0,
            horizon: 200,
        }
    }
}

impl EnvConfig {
    /// Hard validation plus soft recommendations.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.d == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(self.half_width > 0.0) {
            return Err(Error::InvalidConfig("half_width must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        let mut warnings = Vec::new();
        if self.half_width <= self.horizon as f64 / 10.0 {
            warnings.push(format!(
                "half_width {} <= horizon/10 = {}; boundary contact may be frequent",
                self.half_width,
                self.horizon as f64 / 10.0
            ));
        }
        Ok(warnings)
    }
}

/// One latent transition together with its observations and the skill that
/// was active when acting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s: LatentState,
    pub o: Observation,
    pub z: UnitVector,
    pub a: UnitVector,
    pub s_next: LatentState,
    pub o_next: Observation,
    /// Set when the step hit the box; such steps are not exactly unit length.
    pub boundary: bool,
}

/// Apply one deterministic step s' = s + a with the boundary rule.
/// Returns the next state and whether a boundary event occurred.
pub fn env_step(config: &EnvConfig, s: &[f64], a: &UnitVector) -> (LatentState, bool) {
    debug_assert_eq!(s.len(), config.d);
    debug_assert_eq!(a.dim(), config.d);
    let b = config.half_width;
    let mut hit = false;
    let next = s
        .iter()
        .zip(a.as_slice())
        .map(|(&si, &ai)| {
            let mut x = si + ai;
            if x > b {
                hit = true;
                x = match config.boundary {
                    BoundaryRule::Reflect => 2.0 * b - x,
                    BoundaryRule::Clamp => b,
                };
            } else if x < -b {
                hit = true;
                x = match config.boundary {
                    BoundaryRule::Reflect => -2.0 * b - x,
                    BoundaryRule::Clamp => -b,
                };
            }
            x
        })
        .collect();
    (next, hit)
}

/// Episode starts are uniform over the inner box [-B/2, B/2]^d.
pub fn sample_episode_start<R: Rng>(config: &EnvConfig, rng: &mut R) -> LatentState {
    let half = config.half_width / 2.0;
    (0..config.d).map(|_| rng.gen_range(-half..half)).collect()
}

/// Architecture and seed of the observation generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Latent (input) dimension.
    pub d: usize,
    /// Observation (output) dimension, at least d.
    pub obs_dim: usize,
    /// Hidden widths; must be non-decreasing and each at least d so that
    /// every layer map keeps full column rank.
    pub hidden: Vec<usize>,
    /// Negative-side slope of the piecewise-linear activation, in (0, 1).
    pub activation_slope: f64,
    pub seed: u64,
    /// Bypass everything and return the state unchanged (requires
    /// obs_dim == d and no hidden layers).
    #[serde(default)]
    pub identity: bool,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidDimension);
        }
        if self.obs_dim < self.d {
            return Err(Error::InvalidConfig(format!(
                "obs_dim {} must be >= d {}",
                self.obs_dim, self.d
            )));
        }
        if self.identity {
            if self.obs_dim != self.d || !self.hidden.is_empty() {
                return Err(Error::InvalidConfig(
                    "identity generator requires obs_dim == d and no hidden layers".into(),
                ));
            }
            return Ok(());
        }
        if !(self.activation_slope > 0.0 && self.activation_slope < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "activation_slope must be in (0, 1), got {}",
                self.activation_slope
            )));
        }
        let mut prev = self.d;
        for &w in &self.hidden {
            if w < self.d {
                return Err(Error::InvalidConfig(format!(
                    "hidden width {w} below latent dimension {}",
                    self.d
                )));
            }
            if w < prev {
                return Err(Error::InvalidConfig(
                    "hidden widths must be non-decreasing to keep every layer injective".into(),
                ));
            }
            prev = w;
        }
        if self.obs_dim < prev {
            return Err(Error::InvalidConfig(format!(
                "obs_dim {} below last hidden width {prev}",
                self.obs_dim
            )));
        }
        Ok(())
    }
}

struct GenLayer {
    /// Row-major (rows x cols).
    w: Vec<f64>,
    b: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl GenLayer {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let acc: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(acc + self.b[r]);
        }
    }
}

/// The injective observation map o = g(s). Immutable after construction; a
/// deterministic function of its spec.
pub struct Generator {
    spec: GeneratorSpec,
    layers: Vec<GenLayer>,
    /// Product of layer spectral norms: a Lipschitz bound for g.
    lipschitz_bound: f64,
}

/// Per-matrix conditioning floor: resample when min_sv < 1e-3 * max_sv.
const LAYER_COND_FLOOR: f64 = 1e-3;
/// Absolute floor on the final lift's smallest singular value.
const LIFT_SV_FLOOR: f64 = 1e-6;
const MAX_RESAMPLE_ATTEMPTS: usize = 100;

pub fn make_generator(spec: &GeneratorSpec) -> Result<Generator> {
    spec.validate()?;
    if spec.identity {
        return Ok(Generator {
            spec: spec.clone(),
            layers: Vec::new(),
            lipschitz_bound: 1.0,
        });
    }

    let mut widths = vec![spec.d];
    widths.extend_from_slice(&spec.hidden);
    widths.push(spec.obs_dim);

    let mut layers = Vec::with_capacity(widths.len() - 1);
    let mut lipschitz_bound = 1.0;
    for i in 0..widths.len() - 1 {
        let (cols, rows) = (widths[i], widths[i + 1]);
        let is_lift = i == widths.len() - 2;
        let mut rng = substream(spec.seed, "gen-layer", i as u64);
        let scale = 1.0 / (cols as f64).sqrt();

        let mut accepted = None;
        for _ in 0..MAX_RESAMPLE_ATTEMPTS {
            let w: Vec<f64> = (0..rows * cols)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect();
            let m = DMatrix::from_row_slice(rows, cols, &w);
            let svs = m.singular_values();
            let max_sv = svs.iter().cloned().fold(0.0_f64, f64::max);
            let min_sv = svs.iter().cloned().fold(f64::INFINITY, f64::min);
            let ok = min_sv >= LAYER_COND_FLOOR * max_sv && (!is_lift || min_sv >= LIFT_SV_FLOOR);
            if ok {
                accepted = Some((w, max_sv));
                break;
            }
        }
        let Some((w, spectral)) = accepted else {
            return Err(Error::DegenerateSpec(format!(
                "layer {i} ({rows}x{cols}) stayed ill-conditioned after {MAX_RESAMPLE_ATTEMPTS} draws"
            )));
        };
        lipschitz_bound *= spectral;
        let b: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        layers.push(GenLayer { w, b, rows, cols });
    }

    Ok(Generator {
        spec: spec.clone(),
        layers,
        lipschitz_bound,
    })
}

impl Generator {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.d
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.obs_dim
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// o = g(s). Hidden layers use the leaky piecewise-linear activation;
    /// the final lift is affine.
    pub fn observe(&self, s: &[f64]) -> Observation {
        debug_assert_eq!(s.len(), self.spec.d);
        if self.spec.identity {
            return s.to_vec();
        }
        let slope = self.spec.activation_slope;
        let mut cur = s.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i != last {
                for v in &mut next {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}

/// A ground-truth triple from the skill-conditioned step law, bypassing the
/// policy loop: z uniform on the sphere, s uniform in the inner box, and
/// s' - s drawn from vMF(z, kappa).
#[derive(Debug, Clone)]
pub struct Assumption1Sample {
    pub z: UnitVector,
    pub s: LatentState,
    pub s_next: LatentState,
}

/// Generate `n` independent triples. `half_width` sets the state range
/// (states are drawn from [-half_width/2, half_width/2]^d as for episode
/// starts); steps are not boundary-checked.
pub fn generate_assumption1_dataset<R: Rng>(
    n: usize,
    d: usize,
    kappa: f64,
    half_width: f64,
    rng: &mut R,
) -> Result<Vec<Assumption1Sample>> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    let half = half_width / 2.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z = sample_uniform_sphere(d, rng)?;
        let s: LatentState = (0..d).map(|_| rng.gen_range(-half..half)).collect();
        let step = sample_vmf(&VmfParams::new(z.clone(), kappa)?, rng)?;
        let s_next = s.iter().zip(step.as_slice()).map(|(a, b)| a + b).collect();
        out.push(Assumption1Sample { z, s, s_next });
    }
    Ok(out)
}

/// Turn ground-truth triples into full transition records by observing both
/// endpoints through the generator.
pub fn assumption1_records(
    generator: &Generator,
    samples: &[Assumption1Sample],
) -> Result<Vec<TransitionRecord>> {
    samples
        .iter()
        .map(|smp| {
            let step: Vec<f64> = smp
                .s_next
                .iter()
                .zip(&smp.s)
                .map(|(a, b)| a - b)
                .collect();
            Ok(TransitionRecord {
                o: generator.observe(&smp.s),
                o_next: generator.observe(&smp.s_next),
                s: smp.s.clone(),
                s_next: smp.s_next.clone(),
                z: smp.z.clone(),
                a: UnitVector::from_unnormalized(step)?,
                boundary: false,
            })
        })
        .collect()
}

/// Write transitions as CSV with the flat schema
/// (episode, t, s[..], o[..], z[..], s'[..], o'[..], boundary_flag).
pub fn write_transitions_csv<'a, W, I>(mut w: W, records: I, d: usize, obs_dim: usize, z_dim: usize) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (u64, u64, &'a TransitionRecord)>,
{
    let col = |prefix: &str, n: usize| -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
    };
    writeln!(
        w,
        "episode,t,{},{},{},{},{},boundary_flag",
        col("s", d),
        col("o", obs_dim),
        col("z", z_dim),
        col("sp", d),
        col("op", obs_dim),
    )?;
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    for (episode, t, rec) in records {
        writeln!(
            w,
            "{episode},{t},{},{},{},{},{},{}",
            join(&rec.s),
            join(&rec.o),
            join(rec.z.as_slice()),
            join(&rec.s_next),
            join(&rec.o_next),
            u8::from(rec.boundary),
        )?;
    }
    Ok(())
}
