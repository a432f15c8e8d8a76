//! Directed weighted pixel networks and their per-vertex measures.
//!
//! Every pixel is a vertex. Two pixels within Euclidean distance `r` are
//! connected by an edge pointing toward the brighter pixel; equal
//! intensities produce a bidirectional edge. Edge weights mix the
//! normalized intensity difference with the normalized distance.
//!
//! Measures are computed by scanning a fixed offset set around every pixel;
//! the network itself is never materialized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GrayImage;

/// Displacements `(dy, dx)` with `0 < dy² + dx² <= r²`, in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodOffsets {
    radius: u32,
    offsets: Vec<(i32, i32)>,
}

impl NeighborhoodOffsets {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

pub fn offsets_for(radius: u32) -> Result<NeighborhoodOffsets> {
    if radius < 1 {
        return Err(Error::Parameter(format!("radius must be >= 1, got {radius}")));
    }
    let r = radius as i32;
    let r2 = i64::from(r) * i64::from(r);
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = i64::from(dy) * i64::from(dy) + i64::from(dx) * i64::from(dx);
            if d2 != 0 && d2 <= r2 {
                offsets.push((dy, dx));
            }
        }
    }
    Ok(NeighborhoodOffsets { radius, offsets })
}

/// Weight of the edge between two pixels at distance `dist` in a network of
/// radius `radius`. Always in `[0, 1]` for valid inputs.
#[inline]
pub fn edge_weight(a: u16, b: u16, dist: f64, radius: u32, max_level: u16) -> f64 {
    let intensity = f64::from(a.abs_diff(b)) / f64::from(max_level);
    if radius == 1 {
        intensity
    } else {
        ((dist - 1.0) / (f64::from(radius) - 1.0) + intensity) / 2.0
    }
}

/// An out-edge of a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: usize,
    pub weight: f64,
    /// Set when both endpoints have the same intensity, in which case the
    /// reverse edge also exists.
    pub bidirectional: bool,
}

/// Out-edges of pixel `index` (row-major) in the network of radius `radius`.
pub fn directed_edges(img: &GrayImage, index: usize, radius: u32) -> Result<Vec<Edge>> {
    let (w, h) = (img.width(), img.height());
    if index >= w * h {
        return Err(Error::Parameter(format!(
            "pixel index {index} out of bounds for {w}x{h} image"
        )));
    }
    let offsets = offsets_for(radius)?;
    let (y, x) = ((index / w) as i64, (index % w) as i64);
    let pixels = img.pixels();
    let center = pixels[index];
    let mut edges = Vec::new();
    for &(dy, dx) in offsets.offsets() {
        let (ny, nx) = (y + i64::from(dy), x + i64::from(dx));
        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
            continue;
        }
        let target = ny as usize * w + nx as usize;
        let other = pixels[target];
        if center <= other {
            let dist = f64::from(dy * dy + dx * dx).sqrt();
            edges.push(Edge {
                target,
                weight: edge_weight(center, other, dist, radius, img.max_level()),
                bidirectional: center == other,
            });
        }
    }
    Ok(edges)
}

/// The three vertex measures used as network descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Out-degree.
    K,
    /// Weighted out-degree (strength).
    Ks,
    /// Weighted in-degree.
    Ke,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::K, Measure::Ks, Measure::Ke];

    pub fn name(self) -> &'static str {
        match self {
            Measure::K => "k",
            Measure::Ks => "ks",
            Measure::Ke => "ke",
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(Measure::K),
            "ks" => Ok(Measure::Ks),
            "ke" => Ok(Measure::Ke),
            other => Err(Error::Parameter(format!(
                "unknown measure '{other}', expected k, ks or ke"
            ))),
        }
    }
}

/// Per-pixel measures of the network built with one radius.
///
/// `k_in` (in-degree count) is not used for signatures but is kept for the
/// symmetry checks between out- and in- measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMaps {
    pub radius: u32,
    pub width: usize,
    pub height: usize,
    /// `|offsets(radius)|`, the largest degree a vertex can reach.
    pub max_degree: usize,
    pub k: Vec<f64>,
    pub ks: Vec<f64>,
    pub ke: Vec<f64>,
    pub k_in: Vec<f64>,
}

impl MeasureMaps {
    pub fn get(&self, measure: Measure) -> &[f64] {
        match measure {
            Measure::K => &self.k,
            Measure::Ks => &self.ks,
            Measure::Ke => &self.ke,
        }
    }
}

pub fn compute_measures(img: &GrayImage, radius: u32) -> Result<MeasureMaps> {
    let offsets = offsets_for(radius)?;
    let (w, h) = (img.width(), img.height());
    let pixels = img.pixels();
    let max_level = img.max_level();

    // Distance term per offset; the weight is recomputed with the same
    // expression as `edge_weight` so sums are reproducible bit for bit.
    let dists: Vec<f64> = offsets
        .offsets()
        .iter()
        .map(|&(dy, dx)| f64::from(dy * dy + dx * dx).sqrt())
        .collect();

    let mut k = vec![0.0; w * h];
    let mut ks = vec![0.0; w * h];
    let mut ke = vec![0.0; w * h];
    let mut k_in = vec![0.0; w * h];

    k.par_chunks_mut(w)
        .zip(ks.par_chunks_mut(w))
        .zip(ke.par_chunks_mut(w))
        .zip(k_in.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (((k_row, ks_row), ke_row), kin_row))| {
            for x in 0..w {
                let center = pixels[y * w + x];
                let (mut out_n, mut out_w, mut in_n, mut in_w) = (0u32, 0.0, 0u32, 0.0);
                for (&(dy, dx), &dist) in offsets.offsets().iter().zip(&dists) {
                    let ny = y as i64 + i64::from(dy);
                    let nx = x as i64 + i64::from(dx);
                    if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                        continue;
                    }
                    let other = pixels[ny as usize * w + nx as usize];
                    if center <= other {
                        out_n += 1;
                        out_w += edge_weight(center, other, dist, radius, max_level);
                    }
                    if other <= center {
                        in_n += 1;
                        in_w += edge_weight(other, center, dist, radius, max_level);
                    }
                }
                k_row[x] = f64::from(out_n);
                ks_row[x] = out_w;
                ke_row[x] = in_w;
                kin_row[x] = f64::from(in_n);
            }
        });

    Ok(MeasureMaps {
        radius,
        width: w,
        height: h,
        max_degree: offsets.len(),
        k,
        ks,
        ke,
        k_in,
    })
}

/// Renders one measure as an 8-bit image, scaled by the maximum possible
/// vertex degree of the network.
pub fn render_measure(maps: &MeasureMaps, measure: Measure) -> GrayImage {
    let scale = 255.0 / maps.max_degree as f64;
    let pixels = maps
        .get(measure)
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u16)
        .collect();
    GrayImage::new(maps.width, maps.height, 255, pixels).expect("valid map dimensions")
}
