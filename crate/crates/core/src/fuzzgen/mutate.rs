use rand::Rng;

use super::{GenError, LightingRange, CAMERA_ATTEMPTS};
use crate::render::{project_point, Projection};
use crate::scene::{CameraConfig, CameraMutation, LightingConfig, MAX_INTENSITY, MIN_INTENSITY};
use crate::{Vec3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightDirection {
    Increase,
    Decrease,
}

/// Scales the default intensity by a factor drawn uniformly from the
/// `increase` interval `(lo, hi]` or the `decrease` interval `[lo, hi)`.
pub fn mutate_lighting<R: Rng + ?Sized>(
    direction: LightDirection,
    range: &LightingRange,
    rng: &mut R,
) -> LightingConfig {
    let u: f64 = rng.random();
    let alpha = match direction {
        LightDirection::Decrease => {
            let [lo, hi] = range.decrease;
            lo + (hi - lo) * u
        }
        LightDirection::Increase => {
            let [lo, hi] = range.increase;
            hi - (hi - lo) * u
        }
    };
    let default = LightingConfig::default().intensity_scale;
    LightingConfig { intensity_scale: (alpha * default).clamp(MIN_INTENSITY, MAX_INTENSITY) }
}

/// Applies a recorded perturbation to a camera.
pub fn apply_camera_mutation(base: &CameraConfig, m: &CameraMutation) -> CameraConfig {
    CameraConfig {
        position: base.position + m.direction * m.distance,
        orientation: (base.orientation + m.rotation_delta).map(crate::scalar::wrap_angle),
        ..*base
    }
}

/// Whether all four table corners project inside the image.
pub fn camera_frames_table(cam: &CameraConfig, table_half_extents: [f64; 2]) -> bool {
    let [hx, hy] = table_half_extents;
    let (w, h) = (cam.resolution.0 as f64, cam.resolution.1 as f64);
    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].iter().all(|&(x, y)| match project_point(Vector3::new(x, y, 0.0), cam) {
        Projection::Pixel { u, v, .. } => (0.0..w).contains(&u) && (0.0..h).contains(&v),
        Projection::BehindCamera => false,
    })
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Rotates the camera by a uniform per-axis delta in `[-rot_max, rot_max]`
/// degrees and translates it along a uniformly random direction by a
/// distance uniform in `[0, trans_max]` meters. Draws that lose sight of a
/// table corner are redrawn.
pub fn mutate_camera<R: Rng + ?Sized>(
    base: &CameraConfig,
    rot_max_deg: f64,
    trans_max_m: f64,
    table_half_extents: [f64; 2],
    rng: &mut R,
) -> Result<(CameraConfig, CameraMutation), GenError> {
    let rot_max = rot_max_deg.to_radians();
    for _ in 0..CAMERA_ATTEMPTS {
        let mut axis = || if rot_max > 0.0 { rng.random_range(-rot_max..=rot_max) } else { 0.0 };
        let rotation_delta = Vector3::new(axis(), axis(), axis());
        let direction = random_unit(rng);
        let distance = if trans_max_m > 0.0 { rng.random_range(0.0..=trans_max_m) } else { 0.0 };
        let m = CameraMutation { rotation_delta, direction, distance };
        let cam = apply_camera_mutation(base, &m);
        if camera_frames_table(&cam, table_half_extents) {
            return Ok((cam, m));
        }
    }
    Err(GenError::CameraFraming(CAMERA_ATTEMPTS))
}
