//! Acceptance criteria, one line of output per criterion.
//!
//! Criteria 8 and 9 include full-dataset checks that need user-supplied
//! copies of the benchmark datasets. Point `TEXNET_DATASETS` at a directory
//! containing `outex/`, `usptex/`, `brodatz/` and `vistex/` (each laid out
//! as `<class>/<image>`) to run them; otherwise those parts are reported as
//! skipped.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use texnet_core::eval::{leave_one_out, sweep, sweep_combinations, FeatureTable, SweepMode};
use texnet_core::network::compute_measures;
use texnet_core::rnn::{hidden_outputs, lcg_generate, solve_output_weights, HiddenWeights, TrainingSet};
use texnet_core::signature::feature_count;
use texnet_core::{load_gray, scan_dataset, GrayImage, RunConfig, SignatureExtractor};

type Outcome = Result<String, String>;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

/// Q-triples and feature counts listed for the multi-Q signature with R = {2, 9}.
const Q_TRIPLES: [([usize; 3], usize); 20] = [
    ([4, 9, 14], 180),
    ([4, 9, 19], 210),
    ([4, 9, 24], 240),
    ([4, 9, 29], 270),
    ([4, 14, 19], 240),
    ([4, 14, 24], 270),
    ([4, 14, 29], 300),
    ([4, 19, 24], 300),
    ([4, 19, 29], 330),
    ([4, 24, 29], 360),
    ([9, 14, 19], 270),
    ([9, 14, 24], 300),
    ([9, 14, 29], 330),
    ([9, 19, 24], 330),
    ([9, 19, 29], 360),
    ([9, 24, 29], 390),
    ([14, 19, 24], 360),
    ([14, 19, 29], 390),
    ([14, 24, 29], 420),
    ([19, 24, 29], 450),
];

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, format!("{what} took {took:.2?}, limit {limit:.0?}"))
}

fn feature_lengths() -> Outcome {
    let img = GrayImage::from_fn(20, 20, |x, y| ((x * 31 + y * 17) % 256) as u8).unwrap();
    let ex = SignatureExtractor::new(&[2, 9], &[4, 19, 29], Default::default()).map_err(|e| e.to_string())?;
    let len = ex.extract(&img).map_err(|e| e.to_string())?.values.len();
    check(len == 330, format!("default signature has {len} entries"))?;
    for (qs, expected) in Q_TRIPLES {
        let got = feature_count(&[2, 9], &qs);
        check(got == expected, format!("Q={qs:?}: {got} features, expected {expected}"))?;
    }
    Ok("330 entries; all 20 Q-triples match (180..450)".into())
}

fn degree_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let levels = if i % 3 == 0 { 4 } else { 255 };
        let img = common::random_image(&mut rng, w, h, levels);
        for r in [1, 2, 3, 5] {
            let maps = compute_measures(&img, r).map_err(|e| e.to_string())?;
            let oracle = common::brute_force_measures(&img, r);
            check(maps.k == oracle.k, format!("image {i} r={r}: out-degree differs"))?;
            for (a, b) in maps.ks.iter().zip(&oracle.ks).chain(maps.ke.iter().zip(&oracle.ke)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max weighted-degree error {worst:e}"))?;
    within(start, Duration::from_secs(10), "oracle comparison")?;
    Ok(format!("200 images x 4 radii, k exact, max |Δks|,|Δke| = {worst:e}"))
}

fn ridge_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lambda = 1e-3;
    let (mut worst_res, mut worst_rel): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(1..=500);
        let q = rng.random_range(1..=29);
        let raw = DMatrix::from_fn(8, n, |_, _| rng.random_range(0.0..12.0));
        let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let ts = TrainingSet::from_raw(&raw, &labels).map_err(|e| e.to_string())?;
        let hw = HiddenWeights::new(q, 8).map_err(|e| e.to_string())?;
        let f = solve_output_weights(&ts, &hw, lambda).map_err(|e| e.to_string())?.f;
        let z = hidden_outputs(&ts, &hw).map_err(|e| e.to_string())?;
        let lhs = (&z * z.transpose() + DMatrix::identity(q + 1, q + 1) * lambda) * &f;
        let rhs = &z * DVector::from_column_slice(&labels);
        worst_res = worst_res.max((lhs - rhs).amax());
        let oracle = common::explicit_ridge_oracle(&raw, &labels, q, lambda);
        worst_rel = worst_rel.max((&f - &oracle).amax() / oracle.amax().max(f64::MIN_POSITIVE));
    }
    check(worst_res < 1e-8, format!("normal-equation residual {worst_res:e}"))?;
    check(worst_rel < 1e-8, format!("relative deviation from explicit inverse {worst_rel:e}"))?;
    within(start, Duration::from_secs(10), "ridge checks")?;
    Ok(format!("100 sets, max residual {worst_res:e}, max relative deviation {worst_rel:e}"))
}

fn lcg_conformance() -> Outcome {
    for q in [4, 19, 29] {
        let p = 8;
        let e = (q * (p + 1)) as u64;
        let seq = lcg_generate(q, p).map_err(|e| e.to_string())?;
        check(
            (seq.a, seq.b, seq.c, seq.values[0]) == (e + 2, e + 3, e * e, e + 1),
            format!("Q={q}: parameters ({}, {}, {}, {})", seq.a, seq.b, seq.c, seq.values[0]),
        )?;
        check(seq.values == common::scripted_lcg(q, p), format!("Q={q}: sequence differs"))?;
        check(seq.len() as u64 == e, format!("Q={q}: length {}", seq.len()))?;
    }
    Ok("(4,8), (19,8), (29,8) match the recurrence exactly".into())
}

fn signatures_on(cfg: &RunConfig, images: &[GrayImage]) -> Result<Vec<Vec<f64>>, String> {
    let ex = SignatureExtractor::new(&cfg.radii, &cfg.qs, cfg.training_options()).map_err(|e| e.to_string())?;
    cfg.install(|| {
        images
            .par_iter()
            .map(|img| ex.extract(img).map(|s| s.values))
            .collect::<texnet_core::Result<Vec<_>>>()
    })
    .and_then(|r| r)
    .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let images: Vec<GrayImage> = (0..8).map(|_| common::random_image(&mut rng, 48, 40, 255)).collect();
    let many = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let single = RunConfig { threads: 1, ..Default::default() };
    let multi = RunConfig { threads: many, ..Default::default() };
    let a = signatures_on(&single, &images)?;
    let b = signatures_on(&single, &images)?;
    let c = signatures_on(&multi, &images)?;
    let mut worst: f64 = 0.0;
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        for ((u, v), w) in x.iter().zip(y).zip(z) {
            worst = worst.max((u - v).abs()).max((u - w).abs());
        }
    }
    check(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("repeat and 1 vs {many} threads, max deviation {worst:e}"))
}

fn inversion_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let img = common::random_image(&mut rng, 16, 16, if i % 2 == 0 { 255 } else { 5 });
        for r in [1, 2, 3, 5] {
            let m = compute_measures(&img, r).map_err(|e| e.to_string())?;
            let inv = compute_measures(&img.inverted(), r).map_err(|e| e.to_string())?;
            check(inv.k == m.k_in && inv.k_in == m.k, format!("image {i} r={r}: degree counts not swapped"))?;
            for (a, b) in inv.ks.iter().zip(&m.ke).chain(inv.ke.iter().zip(&m.ks)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max weighted-degree mismatch {worst:e}"))?;
    Ok(format!("50 images, counts exact, max weighted mismatch {worst:e}"))
}

fn synthetic_classification() -> Outcome {
    let start = Instant::now();
    let (images, labels) = common::grating_classes(2024, 20, 64);
    let cfg = RunConfig::default();
    let rows = signatures_on(&cfg, &images)?;
    let table = FeatureTable::from_rows(&rows, labels).map_err(|e| e.to_string())?;
    let result = cfg.install(|| leave_one_out(&table, cfg.lda_gamma)).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(60), "synthetic benchmark")?;
    check(
        result.accuracy >= 0.95,
        format!("leave-one-out accuracy {}%", result.accuracy_percent()),
    )?;
    Ok(format!("4 classes x 20 images, {} features, accuracy {}%", table.num_features(), result.accuracy_percent()))
}

const DATASETS: [(&str, f64); 4] = [("outex", 92.13), ("usptex", 97.21), ("brodatz", 98.09), ("vistex", 99.88)];

fn dataset_root() -> Option<PathBuf> {
    std::env::var_os("TEXNET_DATASETS").map(PathBuf::from)
}

fn dataset_accuracy(root: &Path, radii: &[u32], qs: &[usize]) -> Result<f64, String> {
    let ds = scan_dataset(root).map_err(|e| e.to_string())?;
    let cfg = RunConfig { radii: radii.to_vec(), qs: qs.to_vec(), ..Default::default() };
    let ex = SignatureExtractor::new(radii, qs, cfg.training_options()).map_err(|e| e.to_string())?;
    let rows = cfg
        .install(|| {
            ds.samples
                .par_iter()
                .map(|s| load_gray(&s.path).and_then(|img| ex.extract(&img)).map(|sig| sig.values))
                .collect::<texnet_core::Result<Vec<_>>>()
        })
        .and_then(|r| r)
        .map_err(|e| e.to_string())?;
    let table = FeatureTable::from_rows(&rows, ds.labels()).map_err(|e| e.to_string())?;
    cfg.install(|| leave_one_out(&table, cfg.lda_gamma))
        .and_then(|r| r)
        .map(|r| r.accuracy * 100.0)
        .map_err(|e| e.to_string())
}

fn full_datasets() -> Status {
    let Some(root) = dataset_root() else {
        return Status::Skip("TEXNET_DATASETS not set; benchmark datasets are not bundled".into());
    };
    let mut report = Vec::new();
    let mut failed = false;
    for (name, target) in DATASETS {
        match dataset_accuracy(&root.join(name), &[2, 9], &[4, 19, 29]) {
            Ok(acc) => {
                failed |= (acc - target).abs() > 1.5;
                report.push(format!("{name} {acc:.2} (target {target:.2})"));
            }
            Err(e) => return Status::Fail(format!("{name}: {e}")),
        }
    }
    if failed {
        Status::Fail(report.join(", "))
    } else {
        Status::Pass(report.join(", "))
    }
}

fn sweep_shape() -> Status {
    let radii: Vec<u32> = (2..=10).collect();
    let shape = (|| -> Result<(), String> {
        let combos = sweep_combinations(&radii, &[4], SweepMode::ThetaPairs).map_err(|e| e.to_string())?;
        check(combos.len() == 45, format!("{} combinations", combos.len()))?;
        let mut cells: Vec<(u32, u32)> = combos
            .iter()
            .map(|(r, _)| (r[0], *r.last().unwrap()))
            .collect();
        cells.sort_unstable();
        cells.dedup();
        check(cells.len() == 45 && cells.iter().all(|(a, b)| a <= b), "grid is not upper triangular")?;

        // Run the sweep end to end on a small generated dataset.
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (images, labels) = common::grating_classes(9, 3, 24);
        for (i, (img, label)) in images.iter().zip(&labels).enumerate() {
            let class_dir = dir.path().join(format!("class{label}"));
            std::fs::create_dir_all(&class_dir).map_err(|e| e.to_string())?;
            img.save(class_dir.join(format!("{i:03}.png"))).map_err(|e| e.to_string())?;
        }
        let ds = scan_dataset(dir.path()).map_err(|e| e.to_string())?;
        let rows = sweep(&ds, &radii, &[4], SweepMode::ThetaPairs, Default::default(), 1e-4, &|_, _| {})
            .map_err(|e| e.to_string())?;
        check(rows.len() == 45, format!("sweep produced {} rows", rows.len()))?;
        check(rows.iter().all(|r| r.features == r.radii.len() * 15), "feature counts")?;
        Ok(())
    })();
    if let Err(e) = shape {
        return Status::Fail(e);
    }

    let Some(root) = dataset_root() else {
        return Status::Pass("45-cell upper-triangular grid (dataset-mean check skipped: TEXNET_DATASETS not set)".into());
    };
    let mut means = Vec::new();
    for &r in &radii {
        let mut total = 0.0;
        for (name, _) in DATASETS {
            match dataset_accuracy(&root.join(name), &[r], &[4]) {
                Ok(acc) => total += acc,
                Err(e) => return Status::Fail(format!("{name}: {e}")),
            }
        }
        means.push(total / DATASETS.len() as f64);
    }
    let best = means
        .iter()
        .enumerate()
        .fold(0, |b, (i, &m)| if m > means[b] { i } else { b });
    let at5 = means[3];
    let msg = format!("best single radius R={} ; mean at R=5 {at5:.2} (target 88.17)", radii[best]);
    if radii[best] == 5 && (at5 - 88.17).abs() <= 1.5 {
        Status::Pass(msg)
    } else {
        Status::Fail(msg)
    }
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Status>)> = vec![
        ("1 feature-length reproduction", Box::new(|| feature_lengths().into())),
        ("2 degree-oracle equivalence", Box::new(|| degree_oracle().into())),
        ("3 ridge-solution correctness", Box::new(|| ridge_correctness().into())),
        ("4 LCG conformance", Box::new(|| lcg_conformance().into())),
        ("5 determinism", Box::new(|| determinism().into())),
        ("6 structural symmetry", Box::new(|| inversion_symmetry().into())),
        ("7 desk-scale classification", Box::new(|| synthetic_classification().into())),
        ("8 full-dataset reproduction", Box::new(full_datasets)),
        ("9 sweep replication shape", Box::new(sweep_shape)),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let status = run();
        let took = start.elapsed();
        match status {
            Status::Pass(m) => println!("PASS  {name}: {m} [{took:.2?}]"),
            Status::Skip(m) => println!("SKIP  {name}: {m}"),
            Status::Fail(m) => {
                failures += 1;
                println!("FAIL  {name}: {m} [{took:.2?}]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}

impl From<Outcome> for Status {
    fn from(o: Outcome) -> Self {
        match o {
            Ok(m) => Status::Pass(m),
            Err(m) => Status::Fail(m),
        }
    }
}
