//! Pinhole cameras (OpenCV axes: x right, y down, z forward) and camera-list files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::math::{Aabb, Mat3, Vec3};

/// Near plane distance in world units.
pub const NEAR_PLANE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in radians.
    pub vertical_fov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        position: Vec3,
        look_at: Vec3,
        up: Vec3,
        vertical_fov: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = Self {
            position: position.into(),
            look_at: look_at.into(),
            up: up.into(),
            vertical_fov,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera looking at `target` with world +z as up, falling back to +y when the view is vertical.
    pub fn looking_at(position: Vec3, target: Vec3, vertical_fov: f64, width: usize, height: usize) -> Result<Self> {
        let f = target - position;
        let n = f.norm();
        if n <= 1e-12 {
            return Err(Error::InvalidArgument("camera position equals look-at".into()));
        }
        let up = if (f / n).z.abs() > 0.99 { Vec3::y() } else { Vec3::z() };
        Self::new(position, target, up, vertical_fov, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.look_at_v() - self.position_v();
        if !(f.norm() > 1e-12) {
            return Err(Error::InvalidArgument("camera position equals look-at".into()));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!("vertical fov {} outside (0, pi)", self.vertical_fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("camera resolution must be non-zero".into()));
        }
        if f.normalize().cross(&self.up_v()).norm() < 1e-9 {
            return Err(Error::InvalidArgument("camera up vector is parallel to the view direction".into()));
        }
        Ok(())
    }

    pub fn position_v(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn look_at_v(&self) -> Vec3 {
        Vec3::from(self.look_at)
    }

    pub fn up_v(&self) -> Vec3 {
        Vec3::from(self.up)
    }

    pub fn forward(&self) -> Vec3 {
        (self.look_at_v() - self.position_v()).normalize()
    }

    /// World-to-camera rotation; rows are the camera right, down and forward axes.
    pub fn rotation(&self) -> Mat3 {
        let f = self.forward();
        let r = f.cross(&self.up_v()).normalize();
        let d = f.cross(&r);
        Mat3::from_rows(&[r.transpose(), d.transpose(), f.transpose()])
    }

    /// Focal length in pixels (square pixels).
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov).tan()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    pub fn view(&self) -> View {
        let r = self.rotation();
        View {
            rotation: r,
            translation: -(r * self.position_v()),
            focal: self.focal(),
            cx: 0.5 * self.width as f64,
            cy: 0.5 * self.height as f64,
            width: self.width,
            height: self.height,
            position: self.position_v(),
        }
    }

    /// Same pose and field of view at another resolution.
    pub fn with_resolution(&self, width: usize, height: usize) -> Camera {
        Camera { width, height, ..self.clone() }
    }

    /// Whether the box is not entirely outside the view frustum (conservative plane test).
    pub fn sees_box(&self, b: &Aabb) -> bool {
        self.view().box_in_frustum(b)
    }
}

/// Precomputed world-to-camera transform and intrinsics.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub position: Vec3,
}

impl View {
    #[inline]
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Pixel coordinates and depth of a world point in front of the near plane.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let c = self.to_camera(p);
        (c.z > NEAR_PLANE).then(|| (self.focal * c.x / c.z + self.cx, self.focal * c.y / c.z + self.cy, c.z))
    }

    /// Unit world-space direction through pixel coordinates (`x + 0.5` is a pixel center).
    pub fn ray_dir(&self, x: f64, y: f64) -> Vec3 {
        let d = Vec3::new((x - self.cx) / self.focal, (y - self.cy) / self.focal, 1.0);
        (self.rotation.transpose() * d).normalize()
    }

    /// Whether a world point lies in the view pyramid beyond the near plane.
    pub fn contains(&self, p: &Vec3) -> bool {
        match self.project(p) {
            Some((u, v, _)) => u >= 0.0 && v >= 0.0 && u <= self.width as f64 && v <= self.height as f64,
            None => false,
        }
    }

    fn planes(&self) -> [(Vec3, f64); 5] {
        // inward-facing frustum planes in camera space: n . c >= offset
        let hw = 0.5 * self.width as f64 / self.focal;
        let hh = 0.5 * self.height as f64 / self.focal;
        [
            (Vec3::new(1.0, 0.0, hw), 0.0),
            (Vec3::new(-1.0, 0.0, hw), 0.0),
            (Vec3::new(0.0, 1.0, hh), 0.0),
            (Vec3::new(0.0, -1.0, hh), 0.0),
            (Vec3::new(0.0, 0.0, 1.0), NEAR_PLANE),
        ]
    }

    /// False only when all box corners lie outside one frustum plane.
    pub fn box_in_frustum(&self, b: &Aabb) -> bool {
        let corners = b.corners().map(|c| self.to_camera(&c));
        self.planes().iter().all(|(n, off)| corners.iter().any(|c| n.dot(c) >= *off))
    }

    /// Whether every box corner projects inside the image in front of the camera.
    pub fn box_fully_visible(&self, b: &Aabb) -> bool {
        b.corners().iter().all(|c| self.contains(c))
    }
}

pub fn save_cameras(path: &Path, cameras: &[Camera]) -> Result<()> {
    let text = serde_json::to_string_pretty(cameras)?;
    std::fs::write(path, text + "\n").at(path)
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path).at(path)?;
    let cams: Vec<Camera> = serde_json::from_str(&text)?;
    for c in &cams {
        c.validate()?;
    }
    Ok(cams)
}
