use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Scene;
use crate::kinematics::{bound_with, resample_for_sweep, JointTrajectory};
use crate::{Error, Result};

/// Random-walk exploration settings.
#[derive(Debug, Clone, Copy)]
pub struct ExplorationParams {
    /// Number of samples including the start configuration.
    pub n_samples: usize,
    /// Displacement bound of every accepted step, in meters.
    pub step: f64,
    /// Timestamp rate of the emitted trajectory.
    pub rate_hz: f64,
    /// Weight of the previous direction when drawing the next one.
    pub momentum: f64,
    /// Spacing of the collision checks along each step, in meters.
    pub check_resolution: f64,
}

impl ExplorationParams {
    pub fn new(n_samples: usize, step: f64) -> Self {
        ExplorationParams {
            n_samples,
            step,
            rate_hz: 25.0,
            momentum: 0.97,
            check_resolution: step,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        if !(self.step > 0.0 && self.check_resolution > 0.0 && self.rate_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "step, check_resolution and rate_hz must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Simulated teleoperation session starting at the scene's seed configuration.
pub fn generate_exploration(
    scene: &Scene,
    seed: u64,
    params: &ExplorationParams,
) -> Result<JointTrajectory> {
    generate_exploration_from(scene, &scene.seed_config, seed, params)
}

/// Momentum random walk in joint space. Every step moves the robot by
/// exactly `params.step` in displacement bound; steps that leave the joint
/// limits or touch an obstacle are rejected and reverse the direction.
pub fn generate_exploration_from(
    scene: &Scene,
    start: &[f64],
    seed: u64,
    params: &ExplorationParams,
) -> Result<JointTrajectory> {
    params.validate()?;
    let chain = &scene.chain;
    chain.check_limits(start)?;
    if scene.in_collision(start)? {
        return Err(Error::Exploration("start configuration is in collision".into()));
    }
    let dof = chain.dof();
    let coeffs = chain.displacement_coefficients();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dof).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        v.iter_mut().for_each(|x| *x /= n);
    };
    let mut dir = gaussian(&mut rng);
    normalize(&mut dir);
    let noise_w = (1.0 - params.momentum * params.momentum).sqrt();
    let n_checks = (params.step / params.check_resolution).ceil().max(1.0) as usize;

    let mut configs = vec![start.to_vec()];
    let mut attempts = 0usize;
    let max_attempts = params.n_samples.saturating_mul(200).max(1000);
    while configs.len() < params.n_samples {
        attempts += 1;
        if attempts > max_attempts
            || (attempts >= 200 && (configs.len() - 1) * 100 < attempts)
        {
            return Err(Error::Exploration(format!(
                "only {} of {} proposals accepted",
                configs.len() - 1,
                attempts
            )));
        }
        let noise = gaussian(&mut rng);
        for (d, n) in dir.iter_mut().zip(&noise) {
            *d = params.momentum * *d + noise_w * n;
        }
        normalize(&mut dir);
        let l1: f64 = dir.iter().map(|d| d.abs()).sum();
        let cur = configs.last().expect("non-empty");
        let next: Vec<f64> = cur
            .iter()
            .zip(&dir)
            .zip(&coeffs)
            .map(|((q, d), c)| q + params.step * d / (c * l1))
            .collect();
        if segment_free(scene, cur, &next, n_checks)? {
            configs.push(next);
        } else {
            dir.iter_mut().for_each(|d| *d = -*d);
        }
    }
    log::debug!(
        "exploration: {} samples, {} proposals, bound per step {:.4}",
        configs.len(),
        attempts,
        configs
            .windows(2)
            .map(|w| bound_with(&coeffs, &w[0], &w[1]))
            .fold(0.0, f64::max)
    );
    JointTrajectory::from_configs(configs, params.rate_hz)
}

fn segment_free(scene: &Scene, a: &[f64], b: &[f64], n_checks: usize) -> Result<bool> {
    if !scene.chain.links.iter().zip(b).all(|(l, q)| l.joint.within_limits(*q)) {
        return Ok(false);
    }
    for k in 1..=n_checks {
        let t = k as f64 / n_checks as f64;
        let q: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect();
        if scene.in_collision(&q)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Re-checks a trajectory after resampling it to `resolution`; returns the
/// indices of resampled poses that are out of limits or in collision.
pub fn check_exploration(
    scene: &Scene,
    traj: &JointTrajectory,
    resolution: f64,
) -> Result<Vec<usize>> {
    let dense = resample_for_sweep(traj, &scene.chain, resolution)?;
    let flags = crate::par::map_range(dense.len(), |i| {
        let q = &dense.samples[i].q;
        Ok::<_, Error>(scene.chain.check_limits(q).is_err() || scene.in_collision(q)?)
    });
    let mut bad = Vec::new();
    for (i, f) in flags.into_iter().enumerate() {
        if f? {
            bad.push(i);
        }
    }
    Ok(bad)
}
