//! Pinhole software rasterizer producing the policy's RGB observation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scene::{CameraConfig, Pose, Role, SceneConfig, Shape};
use crate::sim::WorldState;
use crate::{Mat3, Vec3, Vector3};

/// Points closer than this along the optical axis are treated as behind the camera.
pub const NEAR_PLANE: f64 = 0.01;
pub const BACKGROUND_GRAY: u8 = 60;
pub const TABLE_GRAY: u8 = 150;
pub const EE_COLOR: [u8; 3] = [40, 40, 40];
pub const TOP_FACTOR: f64 = 1.0;
pub const SIDE_FACTOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64, depth: f64 },
    BehindCamera,
}

/// Maps a world point to pixel coordinates. The camera looks along its
/// local +x axis; image u grows to the camera's right, v downwards.
pub fn project_point(p: Vec3, cam: &CameraConfig) -> Projection {
    let c = Mat3::from_rpy(cam.orientation).transpose() * (p - cam.position);
    if c.x <= NEAR_PLANE {
        return Projection::BehindCamera;
    }
    let (w, h) = (cam.resolution.0 as f64, cam.resolution.1 as f64);
    let f = focal_length(cam);
    Projection::Pixel { u: w / 2.0 - f * c.y / c.x, v: h / 2.0 - f * c.z / c.x, depth: c.x }
}

/// Focal length in pixels, from the horizontal field of view.
pub fn focal_length(cam: &CameraConfig) -> f64 {
    (cam.resolution.0 as f64 / 2.0) / (cam.fov_deg.to_radians() / 2.0).tan()
}

/// Ground truth handed to scripted policies in cheat mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Privileged {
    pub ee_pose: Pose,
    pub aperture: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached: Option<String>,
    pub objects: Vec<PrivilegedObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivilegedObject {
    pub id: String,
    pub role: Role,
    pub pose: Pose,
    pub shape: Shape,
    pub half_extents: Vec3,
    pub graspable: bool,
    pub is_container: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_half_extents: Option<Vec3>,
}

impl Privileged {
    pub fn from_state(state: &WorldState) -> Self {
        let objects = state
            .bodies
            .iter()
            .map(|(k, b)| PrivilegedObject {
                id: k.clone(),
                role: b.role,
                pose: state.object_poses[k],
                shape: b.record.shape,
                half_extents: b.record.half_extents,
                graspable: b.record.graspable,
                is_container: b.record.is_container,
                cavity_half_extents: b.record.cavity_half_extents,
            })
            .collect();
        Self { ee_pose: state.ee_pose, aperture: state.aperture, attached: state.attached_key().map(String::from), objects }
    }

    pub fn object(&self, id: &str) -> Option<&PrivilegedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn with_role(&self, role: Role) -> Option<&PrivilegedObject> {
        self.objects.iter().find(|o| o.role == role)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Row-major, `height * width * 3` bytes.
    pub rgb: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub step: u32,
    pub instruction: String,
    pub privileged: Option<Privileged>,
}

impl Observation {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Binary PPM (P6) dump.
    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "P6\n{} {}\n255\n", self.width, self.height)?;
        f.write_all(&self.rgb)?;
        f.flush()
    }
}

fn shade(base: [u8; 3], intensity: f64, factor: f64) -> [u8; 3] {
    base.map(|c| (c as f64 * intensity * factor).round().clamp(0.0, 255.0) as u8)
}

struct Face {
    corners: [(f64, f64); 4],
    depth: f64,
    color: [u8; 3],
}

fn box_faces(center: Vec3, yaw: f64, half: Vec3, base: [u8; 3], intensity: f64, cam: &CameraConfig, out: &mut Vec<Face>) {
    let r = Mat3::rot_z(yaw);
    let corner = |sx: f64, sy: f64, sz: f64| center + r * Vector3::new(sx * half.x, sy * half.y, sz * half.z);
    let ring = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let top = ring.map(|(sx, sy)| corner(sx, sy, 1.0));
    let mut quads: Vec<([Vec3; 4], f64)> = vec![(top, TOP_FACTOR)];
    for i in 0..4 {
        let (a, b) = (ring[i], ring[(i + 1) % 4]);
        quads.push(([corner(a.0, a.1, -1.0), corner(b.0, b.1, -1.0), corner(b.0, b.1, 1.0), corner(a.0, a.1, 1.0)], SIDE_FACTOR));
    }
    for (quad, factor) in quads {
        if let Some(face) = project_quad(&quad, shade(base, intensity, factor), cam) {
            out.push(face);
        }
    }
}

fn project_quad(quad: &[Vec3; 4], color: [u8; 3], cam: &CameraConfig) -> Option<Face> {
    let mut corners = [(0.0, 0.0); 4];
    let mut depth = 0.0;
    for (i, p) in quad.iter().enumerate() {
        match project_point(*p, cam) {
            Projection::Pixel { u, v, depth: d } => {
                corners[i] = (u, v);
                depth += d / 4.0;
            }
            Projection::BehindCamera => return None,
        }
    }
    Some(Face { corners, depth, color })
}

fn fill_triangle(buf: &mut [u8], w: usize, h: usize, tri: [(f64, f64); 3], color: [u8; 3]) {
    let [(x0, y0), (x1, y1), (x2, y2)] = tri;
    let area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if area.abs() < 1e-12 {
        return;
    }
    let min_x = x0.min(x1).min(x2).floor().max(0.0) as usize;
    let max_x = (x0.max(x1).max(x2).ceil().max(0.0) as usize).min(w);
    let min_y = y0.min(y1).min(y2).floor().max(0.0) as usize;
    let max_y = (y0.max(y1).max(y2).ceil().max(0.0) as usize).min(h);
    let edge = |ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64| ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) * area.signum();
    for py in min_y..max_y {
        let cy = py as f64 + 0.5;
        for px in min_x..max_x {
            let cx = px as f64 + 0.5;
            if edge(x0, y0, x1, y1, cx, cy) >= 0.0 && edge(x1, y1, x2, y2, cx, cy) >= 0.0 && edge(x2, y2, x0, y0, cx, cy) >= 0.0 {
                let i = (py * w + px) * 3;
                buf[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Renders the world from the scene camera under the scene lighting.
/// Deterministic: identical inputs give byte-identical buffers.
pub fn render_rgb(state: &WorldState, scene: &SceneConfig) -> Vec<u8> {
    let cam = &scene.camera;
    let intensity = scene.lighting.intensity_scale;
    let (w, h) = (cam.resolution.0 as usize, cam.resolution.1 as usize);
    let bg = shade([BACKGROUND_GRAY; 3], intensity, 1.0);
    let mut buf: Vec<u8> = bg.iter().copied().cycle().take(w * h * 3).collect();

    let [tx, ty] = scene.table_half_extents;
    let table = [Vector3::new(-tx, -ty, 0.0), Vector3::new(tx, -ty, 0.0), Vector3::new(tx, ty, 0.0), Vector3::new(-tx, ty, 0.0)];
    if let Some(face) = project_quad(&table, shade([TABLE_GRAY; 3], intensity, 1.0), cam) {
        draw(&mut buf, w, h, &face);
    }

    let mut faces = Vec::new();
    for (key, body) in state.bodies.iter() {
        let pose = &state.object_poses[key];
        box_faces(pose.position, pose.yaw(), body.record.half_extents, body.record.base_color, intensity, cam, &mut faces);
    }
    let e = 0.02;
    box_faces(state.ee_pose.position, state.ee_pose.yaw(), Vector3::new(e, e, e), EE_COLOR, intensity, cam, &mut faces);

    // Painter's algorithm: far to near. The sort is stable, so ties keep insertion order.
    faces.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    for face in &faces {
        draw(&mut buf, w, h, face);
    }
    buf
}

fn draw(buf: &mut [u8], w: usize, h: usize, face: &Face) {
    let [a, b, c, d] = face.corners;
    fill_triangle(buf, w, h, [a, b, c], face.color);
    fill_triangle(buf, w, h, [a, c, d], face.color);
}

/// Renders the observation for the current frame. The privileged block is
/// attached only when `privileged` is set.
pub fn observe(state: &WorldState, scene: &SceneConfig, privileged: bool) -> Observation {
    Observation {
        rgb: render_rgb(state, scene),
        width: scene.camera.resolution.0,
        height: scene.camera.resolution.1,
        step: state.frame,
        instruction: scene.task.instruction.clone(),
        privileged: privileged.then(|| Privileged::from_state(state)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{LightingConfig, ObjectDatabase};
    use crate::sim::init_world;

    fn fixture() -> (SceneConfig, WorldState) {
        let db = ObjectDatabase::builtin_seen();
        let json = include_str!("../tests/data/render_scene.scene.json");
        let scene = SceneConfig::from_json(json).unwrap();
        let w = init_world(&scene, &db).unwrap();
        (scene, w)
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraConfig::default();
        let axis = Mat3::from_rpy(cam.orientation).column(0);
        match project_point(cam.position + axis * 0.7, &cam) {
            Projection::Pixel { u, v, depth } => {
                assert!((u - 112.0).abs() < 1e-9 && (v - 112.0).abs() < 1e-9);
                assert!((depth - 0.7).abs() < 1e-12);
            }
            Projection::BehindCamera => panic!("on-axis point flagged behind"),
        }
    }

    #[test]
    fn behind_camera() {
        let cam = CameraConfig::default();
        let axis = Mat3::from_rpy(cam.orientation).column(0);
        assert_eq!(project_point(cam.position - axis, &cam), Projection::BehindCamera);
    }

    #[test]
    fn table_corners_in_view() {
        let cam = CameraConfig::default();
        for (x, y) in [(-0.4, -0.4), (0.4, -0.4), (0.4, 0.4), (-0.4, 0.4)] {
            match project_point(Vector3::new(x, y, 0.0), &cam) {
                Projection::Pixel { u, v, .. } => assert!((0.0..224.0).contains(&u) && (0.0..224.0).contains(&v)),
                Projection::BehindCamera => panic!(),
            }
        }
    }

    #[test]
    fn deterministic() {
        let (scene, w) = fixture();
        assert_eq!(render_rgb(&w, &scene), render_rgb(&w, &scene));
        assert_eq!(render_rgb(&w, &scene).len(), 224 * 224 * 3);
    }

    #[test]
    fn brighter_never_darker() {
        let (mut scene, w) = fixture();
        let base = render_rgb(&w, &scene);
        scene.lighting = LightingConfig { intensity_scale: 2.0 };
        let bright = render_rgb(&w, &scene);
        assert!(base.iter().zip(&bright).all(|(a, b)| b >= a));
        assert!(base.iter().zip(&bright).any(|(a, b)| b > a));
    }

    #[test]
    fn rotated_camera_changes_view() {
        let (mut scene, w) = fixture();
        let base = render_rgb(&w, &scene);
        scene.camera.orientation.z += 5f64.to_radians();
        assert_ne!(render_rgb(&w, &scene), base);
    }

    #[test]
    fn objects_are_visible() {
        let (scene, w) = fixture();
        let buf = render_rgb(&w, &scene);
        let db = ObjectDatabase::builtin_seen();
        for o in &scene.objects {
            let c = db.get(&o.record_id).unwrap().base_color;
            let top = shade(c, 1.0, TOP_FACTOR);
            assert!(buf.chunks(3).any(|p| p == top), "{} not visible", o.record_id);
        }
    }

    #[test]
    fn ppm_dump() {
        let (scene, w) = fixture();
        let obs = observe(&w, &scene, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ppm");
        obs.write_ppm(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n224 224\n255\n"));
        assert_eq!(bytes.len(), 15 + 224 * 224 * 3);
        assert!(obs.privileged.is_none());
    }
}
