//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use texnet_core::GrayImage;

/// Measures obtained by listing every directed edge of the network.
pub struct OracleMeasures {
    pub k: Vec<f64>,
    pub ks: Vec<f64>,
    pub ke: Vec<f64>,
    pub k_in: Vec<f64>,
}

/// Enumerates all ordered pixel pairs inside the radius' bounding box,
/// keeps `i -> j` when `I(i) <= I(j)` and accumulates each edge at its
/// source (out-measures) and target (in-measures).
pub fn brute_force_measures(img: &GrayImage, radius: u32) -> OracleMeasures {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let n = (w * h) as usize;
    let level = f64::from(img.max_level());
    let r = i64::from(radius);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for yi in 0..h {
        for xi in 0..w {
            for yj in (yi - r).max(0)..=(yi + r).min(h - 1) {
                for xj in (xi - r).max(0)..=(xi + r).min(w - 1) {
                    let d2 = (yj - yi).pow(2) + (xj - xi).pow(2);
                    if d2 == 0 || d2 > r * r {
                        continue;
                    }
                    let a = img.get(xi as usize, yi as usize);
                    let b = img.get(xj as usize, yj as usize);
                    if a > b {
                        continue;
                    }
                    let diff = f64::from(a.abs_diff(b)) / level;
                    let d = (d2 as i32 as f64).sqrt();
                    let weight = if radius == 1 {
                        diff
                    } else {
                        ((d - 1.0) / (f64::from(radius) - 1.0) + diff) / 2.0
                    };
                    edges.push(((yi * w + xi) as usize, (yj * w + xj) as usize, weight));
                }
            }
        }
    }
    let mut out = OracleMeasures {
        k: vec![0.0; n],
        ks: vec![0.0; n],
        ke: vec![0.0; n],
        k_in: vec![0.0; n],
    };
    for &(src, dst, weight) in &edges {
        out.k[src] += 1.0;
        out.ks[src] += weight;
        out.k_in[dst] += 1.0;
        out.ke[dst] += weight;
    }
    out
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize, levels: u16) -> GrayImage {
    let pixels = (0..width * height).map(|_| rng.random_range(0..=levels)).collect();
    GrayImage::new(width, height, levels, pixels).unwrap()
}

pub fn scripted_lcg(q: usize, p: usize) -> Vec<u64> {
    let e = (q * (p + 1)) as u64;
    let (a, b, c) = (e + 2, e + 3, e * e);
    let mut v = vec![e + 1];
    for n in 1..q * (p + 1) {
        v.push((a * v[n - 1] + b) % c);
    }
    v
}

fn standardize_row(row: &mut [f64]) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let std = (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if row.iter().all(|&v| v == row[0]) {
        row.iter_mut().for_each(|v| *v = 0.0);
    } else {
        row.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
}

/// Output weights from the closed form `D Zᵀ (Z Zᵀ + λI)⁻¹`, with every
/// intermediate (LCG weights, standardization, hidden layer) rebuilt here.
pub fn explicit_ridge_oracle(raw: &DMatrix<f64>, labels: &[f64], q: usize, lambda: f64) -> DVector<f64> {
    let (p, n) = raw.shape();
    let seq = scripted_lcg(q, p);
    let mut w = DMatrix::zeros(q, p + 1);
    for i in 0..q {
        let mut row: Vec<f64> = seq[i * (p + 1)..(i + 1) * (p + 1)].iter().map(|&v| v as f64).collect();
        standardize_row(&mut row);
        for (j, v) in row.into_iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    let mut x = DMatrix::from_element(p + 1, n, 1.0);
    for i in 0..p {
        let mut row: Vec<f64> = raw.row(i).iter().copied().collect();
        standardize_row(&mut row);
        for (j, v) in row.into_iter().enumerate() {
            x[(i + 1, j)] = v;
        }
    }
    let h = &w * &x;
    let mut z = DMatrix::from_element(q + 1, n, 1.0);
    for i in 0..q {
        for j in 0..n {
            z[(i, j)] = 1.0 / (1.0 + (-h[(i, j)]).exp());
        }
    }
    let d = DMatrix::from_row_slice(1, n, labels);
    let gram = &z * z.transpose() + DMatrix::identity(q + 1, q + 1) * lambda;
    let inv = gram.try_inverse().expect("regularized Gram matrix is invertible");
    let f = d * z.transpose() * inv;
    DVector::from_iterator(q + 1, f.iter().copied())
}

pub const GRATING_PERIOD: f64 = 8.0;

/// Sinusoidal grating at `angle` (radians) with random phase plus Gaussian
/// noise of standard deviation `sigma`, clamped to 8 bits.
pub fn noisy_grating(rng: &mut impl Rng, size: usize, angle: f64, sigma: f64) -> GrayImage {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, sigma).unwrap();
    let (c, s) = (angle.cos(), angle.sin());
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let t = (x as f64 * c + y as f64 * s) * std::f64::consts::TAU / GRATING_PERIOD + phase;
            let v = 128.0 + 60.0 * t.sin() + noise.sample(rng);
            pixels.push(v.round().clamp(0.0, 255.0) as u16);
        }
    }
    GrayImage::new(size, size, 255, pixels).unwrap()
}

/// Four texture classes: two grating orientations times two noise levels.
pub fn grating_classes(seed: u64, per_class: usize, size: usize) -> (Vec<GrayImage>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = [(0.0, 8.0), (0.0, 40.0), (std::f64::consts::FRAC_PI_4, 8.0), (std::f64::consts::FRAC_PI_4, 40.0)];
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (id, &(angle, sigma)) in classes.iter().enumerate() {
        for _ in 0..per_class {
            images.push(noisy_grating(&mut rng, size, angle, sigma));
            labels.push(id);
        }
    }
    (images, labels)
}
