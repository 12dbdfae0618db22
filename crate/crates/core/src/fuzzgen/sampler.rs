use std::f64::consts::PI;

use rand::Rng;

use super::{GenError, POSE_ATTEMPTS};
use crate::scene::Pose;
use crate::Vec3;

/// Draws an upright resting pose: (x, y) uniform over the table, yaw uniform
/// over `[-pi, pi)`, z at the object's half height. Rejects draws closer than
/// `safe_dist` (centre to centre, in the table plane) to any placed object.
pub fn pose_sampler<R: Rng + ?Sized>(
    existing: &[Vec3],
    half_height: f64,
    safe_dist: f64,
    table_half_extents: [f64; 2],
    rng: &mut R,
) -> Result<Pose, GenError> {
    let [hx, hy] = table_half_extents;
    for _ in 0..POSE_ATTEMPTS {
        let x = rng.random_range(-hx..=hx);
        let y = rng.random_range(-hy..=hy);
        let yaw = rng.random_range(-PI..PI);
        let pose = Pose::upright(x, y, half_height, yaw);
        if existing.iter().all(|p| p.planar_distance(pose.position) >= safe_dist) {
            return Ok(pose);
        }
    }
    Err(GenError::SamplerExhausted(POSE_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_scene_accepts_first_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = pose_sampler(&[], 0.02, 0.15, [0.4, 0.4], &mut rng).unwrap();
        assert!(p.position.x.abs() <= 0.4 && p.position.y.abs() <= 0.4);
        assert_eq!(p.position.z, 0.02);
        assert_eq!((p.orientation.x, p.orientation.y), (0.0, 0.0));
    }

    #[test]
    fn keeps_distance_from_origin_object() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let origin = [Vec3::zeros()];
        for _ in 0..10_000 {
            let p = pose_sampler(&origin, 0.02, 0.15, [0.4, 0.4], &mut rng).unwrap();
            assert!(p.position.planar_distance(origin[0]) >= 0.15);
            assert!(p.position.x.abs() <= 0.4 && p.position.y.abs() <= 0.4);
            assert!((-PI..PI).contains(&p.yaw()));
        }
    }

    #[test]
    fn uniformity_smoke() {
        // Mean of U(-h, h) has standard error h / sqrt(3n).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = pose_sampler(&[], 0.02, 0.15, [0.4, 0.4], &mut rng).unwrap();
            sx += p.position.x;
            sy += p.position.y;
        }
        let se = 0.4 / (3.0 * n as f64).sqrt();
        assert!((sx / n as f64).abs() < 3.0 * se);
        assert!((sy / n as f64).abs() < 3.0 * se);
    }

    #[test]
    fn exhaustion_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let blockers = [Vec3::zeros()];
        let r = pose_sampler(&blockers, 0.02, 2.0, [0.4, 0.4], &mut rng);
        assert!(matches!(r, Err(GenError::SamplerExhausted(POSE_ATTEMPTS))));
    }
}
