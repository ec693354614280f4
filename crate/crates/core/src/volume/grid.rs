use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::math::{Aabb, Vec3};

/// Element type of a raw volume file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    U8,
    U16,
    F32,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::U8 => 1,
            ElementType::U16 => 2,
            ElementType::F32 => 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "u8" | "uint8" => Ok(ElementType::U8),
            "u16" | "uint16" => Ok(ElementType::U16),
            "f32" | "float32" => Ok(ElementType::F32),
            other => Err(Error::Unsupported(format!("element type '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::U8 => "u8",
            ElementType::U16 => "u16",
            ElementType::F32 => "f32",
        }
    }
}

/// Sidecar metadata describing a raw volume file.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMeta {
    pub dims: [usize; 3],
    pub dtype: ElementType,
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl VolumeMeta {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut dtype = None;
        let mut spacing = [1.0; 3];
        let mut origin = [0.0; 3];
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("metadata line without '=': {line}")))?;
            let value = value.trim();
            match key.trim() {
                "dims" => dims = Some(parse_triple::<usize>(value)?),
                "dtype" => dtype = Some(ElementType::parse(value)?),
                "spacing" => spacing = parse_triple::<f64>(value)?,
                "origin" => origin = parse_triple::<f64>(value)?,
                other => return Err(Error::Format(format!("unknown metadata key '{other}'"))),
            }
        }
        let dims = dims.ok_or_else(|| Error::Format("metadata missing 'dims'".into()))?;
        let dtype = dtype.ok_or_else(|| Error::Format("metadata missing 'dtype'".into()))?;
        Ok(Self {
            dims,
            dtype,
            spacing,
            origin,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "dims = {} {} {}\ndtype = {}\nspacing = {:?} {:?} {:?}\norigin = {:?} {:?} {:?}\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.dtype.name(),
            self.spacing[0],
            self.spacing[1],
            self.spacing[2],
            self.origin[0],
            self.origin[1],
            self.origin[2]
        )
    }
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() != 3 {
        return Err(Error::Format(format!("expected three values, got '{s}'")));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(
            p.parse::<T>()
                .map_err(|_| Error::Format(format!("cannot parse '{p}'")))?,
        );
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// Scalar field on a regular grid, values normalized to [0,1].
///
/// Voxel `(0,0,0)` is centered at `origin`; data is X-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<f32>,
}

impl VolumeGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("spacing must be > 0, got {spacing:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match dims product {n}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("value {v} outside [0,1]")));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            data,
        })
    }

    /// Builds a grid by evaluating `f` at every voxel center; results are clamped to [0,1].
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        mut f: impl FnMut(Vec3) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = Vec3::new(
                        origin[0] + x as f64 * spacing[0],
                        origin[1] + y as f64 * spacing[1],
                        origin[2] + z as f64 * spacing[2],
                    );
                    data.push(f(p).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(dims, spacing, origin, data).expect("from_fn produces a valid grid")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn voxel(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        )
    }

    /// World bounds: voxel centers padded by half a voxel.
    pub fn bbox(&self) -> Aabb {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..3 {
            min[a] = self.origin[a] - 0.5 * self.spacing[a];
            max[a] = self.origin[a] + (self.dims[a] as f64 - 0.5) * self.spacing[a];
        }
        Aabb::new(min, max)
    }

    /// Continuous voxel-index coordinates of a world point.
    #[inline]
    pub fn to_grid(&self, p: &Vec3) -> [f64; 3] {
        [
            (p.x - self.origin[0]) / self.spacing[0],
            (p.y - self.origin[1]) / self.spacing[1],
            (p.z - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Trilinear interpolation; zero outside the world bounding box.
    #[inline]
    pub fn sample(&self, p: &Vec3) -> f64 {
        let g = self.to_grid(p);
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut f = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a] as f64;
            if !(g[a] >= -0.5 && g[a] <= n - 0.5) {
                return 0.0;
            }
            let c = g[a].clamp(0.0, n - 1.0);
            let fl = c.floor();
            let lo = fl as usize;
            let hi = (lo + 1).min(self.dims[a] - 1);
            i0[a] = lo;
            i1[a] = hi;
            f[a] = c - fl;
        }
        let v = |x: usize, y: usize, z: usize| self.data[x + self.dims[0] * (y + self.dims[1] * z)] as f64;
        let c00 = v(i0[0], i0[1], i0[2]) * (1.0 - f[0]) + v(i1[0], i0[1], i0[2]) * f[0];
        let c10 = v(i0[0], i1[1], i0[2]) * (1.0 - f[0]) + v(i1[0], i1[1], i0[2]) * f[0];
        let c01 = v(i0[0], i0[1], i1[2]) * (1.0 - f[0]) + v(i1[0], i0[1], i1[2]) * f[0];
        let c11 = v(i0[0], i1[1], i1[2]) * (1.0 - f[0]) + v(i1[0], i1[1], i1[2]) * f[0];
        let c0 = c00 * (1.0 - f[1]) + c10 * f[1];
        let c1 = c01 * (1.0 - f[1]) + c11 * f[1];
        c0 * (1.0 - f[2]) + c1 * f[2]
    }

    /// Central-difference gradient of the sampled field, in scalar units per world unit.
    ///
    /// Difference taps are clamped into the bounding box so the box faces do not
    /// read as a jump to vacuum.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let b = self.bbox();
        let clamp = |mut q: Vec3| {
            for a in 0..3 {
                q[a] = q[a].clamp(b.min[a], b.max[a]);
            }
            q
        };
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut d = Vec3::zeros();
            d[a] = self.spacing[a];
            g[a] = (self.sample(&clamp(p + d)) - self.sample(&clamp(p - d))) / (2.0 * self.spacing[a]);
        }
        g
    }

    /// Reads a raw little-endian volume and normalizes by the element type's full range.
    pub fn load(path: &Path, meta: &VolumeMeta) -> Result<Self> {
        let bytes = fs::read(path).at(path)?;
        let n = meta.dims[0] * meta.dims[1] * meta.dims[2];
        let expected = n * meta.dtype.size();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "{}: file holds {} bytes, metadata implies {expected}",
                path.display(),
                bytes.len()
            )));
        }
        let data: Vec<f32> = match meta.dtype {
            ElementType::U8 => bytes.iter().map(|&b| b as f32 / 255.0).collect(),
            ElementType::U16 => bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32 / 65535.0)
                .collect(),
            ElementType::F32 => bytes
                .chunks_exact(4)
                .map(|c| {
                    let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                    if v.is_finite() {
                        v.clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        Self::new(meta.dims, meta.spacing, meta.origin, data)
    }

    /// Loads a volume whose metadata sits next to it as `<path>.meta` (or an explicit path).
    pub fn load_with_sidecar(path: &Path, meta_path: Option<&Path>) -> Result<Self> {
        let default_meta = sidecar_path(path);
        let meta_path = meta_path.unwrap_or(&default_meta);
        let text = fs::read_to_string(meta_path).at(meta_path)?;
        let meta = VolumeMeta::parse(&text)?;
        Self::load(path, &meta)
    }

    /// Writes raw data and the sidecar metadata file.
    pub fn save(&self, path: &Path, dtype: ElementType) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.data.len() * dtype.size());
        for &v in &self.data {
            match dtype {
                ElementType::U8 => bytes.push((v * 255.0).round() as u8),
                ElementType::U16 => bytes.extend_from_slice(&((v * 65535.0).round() as u16).to_le_bytes()),
                ElementType::F32 => bytes.extend_from_slice(&v.to_le_bytes()),
            }
        }
        fs::write(path, bytes).at(path)?;
        let meta = VolumeMeta {
            dims: self.dims,
            dtype,
            spacing: self.spacing,
            origin: self.origin,
        };
        let meta_path = sidecar_path(path);
        fs::write(&meta_path, meta.to_text()).at(meta_path)?;
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}
