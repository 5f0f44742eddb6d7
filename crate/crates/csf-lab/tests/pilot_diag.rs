// Temporary diagnostic: how nonlinear is the generator at each activation
// slope? Fits s ~ A o + b and ds ~ A do directly on raw observations.
// Run with: cargo test -p csf-lab --test pilot_diag -- --ignored --nocapture

use csf_lab::eval::fit_linear_map;
use csf_lab::geometry::sample_uniform_sphere;
use csf_lab::rng::substream;
use csf_lab::world::{make_generator, GeneratorSpec};
use rand::Rng;

#[test]
#[ignore]
fn linear_baseline_by_slope() {
    for slope in [0.2, 0.3, 0.4, 0.5] {
        let gen_spec = GeneratorSpec {
            d: 4,
            obs_dim: 16,
            hidden: vec![8, 16],
            activation_slope: slope,
            seed: csf_lab::rng::child_seed(1, "generator", 0),
            identity: false,
        };
        let generator = make_generator(&gen_spec).unwrap();
        let mut rng = substream(5, "baseline", 0);
        let mut state_feats = Vec::new();
        let mut state_targets = Vec::new();
        let mut diff_feats = Vec::new();
        let mut diff_targets = Vec::new();
        for _ in 0..4000 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let u = sample_uniform_sphere(4, &mut rng).unwrap();
            let s2: Vec<f64> = s.iter().zip(u.as_slice()).map(|(a, b)| a + b).collect();
            let o = generator.observe(&s);
            let o2 = generator.observe(&s2);
            diff_feats.push(o2.iter().zip(&o).map(|(a, b)| a - b).collect());
            diff_targets.push(u.as_slice().to_vec());
            state_feats.push(o);
            state_targets.push(s);
        }
        let state_fit = fit_linear_map(&state_feats, &state_targets, 1).unwrap();
        let diff_fit = fit_linear_map(&diff_feats, &diff_targets, 1).unwrap();
        println!(
            "slope {slope}: raw-linear r2_state = {:.4}, raw-linear r2_diff = {:.4}",
            state_fit.r2_aggregate, diff_fit.r2_aggregate
        );
    }
}
