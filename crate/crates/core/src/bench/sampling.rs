//! Seeded random initial poses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lie::{exp_so3, Pose, Vec3};

/// Spread of the random initial poses around the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dispersion {
    /// Rotation angles are uniform on `[0, theta_max]` (rad).
    pub theta_max: f64,
    /// Positions are uniform in the cube `[−p_max, p_max]³` (m).
    pub p_max: f64,
}

impl Default for Dispersion {
    fn default() -> Self {
        Self {
            theta_max: 2.8,
            p_max: 0.5,
        }
    }
}

impl Dispersion {
    pub const NONE: Dispersion = Dispersion {
        theta_max: 0.0,
        p_max: 0.0,
    };
}

/// Uniformly distributed unit vector.
fn random_axis(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Draws `n` poses. The same seed always yields the same list, and the first
/// `k` poses do not depend on `n`.
pub fn sample_initial_poses(n: usize, seed: u64, dispersion: Dispersion) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let axis = random_axis(&mut rng);
            let angle = rng.random::<f64>() * dispersion.theta_max;
            let p = Vec3::from_fn(|_, _| (2.0 * rng.random::<f64>() - 1.0) * dispersion.p_max);
            Pose::new(exp_so3(&(axis * angle)), p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::log_so3;

    #[test]
    fn no_dispersion_gives_identity() {
        let poses = sample_initial_poses(1, 7, Dispersion::NONE);
        assert_eq!(poses, vec![Pose::identity()]);
    }

    #[test]
    fn seeded_and_prefix_stable() {
        let a = sample_initial_poses(20, 42, Dispersion::default());
        let b = sample_initial_poses(20, 42, Dispersion::default());
        assert_eq!(a, b);
        let c = sample_initial_poses(5, 42, Dispersion::default());
        assert_eq!(&a[..5], &c[..]);
        assert_ne!(sample_initial_poses(5, 43, Dispersion::default()), c);
    }

    #[test]
    fn within_bounds() {
        let d = Dispersion::default();
        for p in sample_initial_poses(500, 1, d) {
            assert!(log_so3(&p.rotation).norm() <= d.theta_max + 1e-9);
            assert!(p.position.amax() <= d.p_max);
            assert!(p.rotation.orthogonality_defect() < 1e-12);
        }
    }
}
