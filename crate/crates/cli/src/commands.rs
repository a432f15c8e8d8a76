use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{Context, Result};
use rayon::prelude::*;
use texnet_core::eval::{self, leave_one_out, SweepMode};
use texnet_core::features::{self, EvalReport, FeatureRow};
use texnet_core::network::{compute_measures, render_measure};
use texnet_core::{load_gray, scan_dataset, Error, Measure, RunConfig, SignatureExtractor};

use crate::{Command, ExtractArgs};

fn progress(done: usize, total: usize) {
    if done == total || done % 25 == 0 {
        eprintln!("[{done}/{total}]");
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract { root, params, out } => extract(&root, &config(&params, None)?, &out),
        Command::Eval {
            csv,
            gamma,
            threads,
            out,
        } => {
            let cfg = RunConfig {
                lda_gamma: gamma,
                threads: threads.unwrap_or(RunConfig::default().threads),
                ..RunConfig::default()
            };
            cfg.validate()?;
            evaluate(&csv, &cfg, out)
        }
        Command::Render {
            image,
            radius,
            measure,
            out,
        } => render(&image, radius, &measure, &out),
        Command::Sweep {
            root,
            params,
            mode,
            gamma,
            out,
        } => {
            let mode: SweepMode = mode.parse()?;
            sweep(&root, &config(&params, Some(gamma))?, mode, &out)
        }
    }
}

fn config(args: &ExtractArgs, gamma: Option<f64>) -> Result<RunConfig> {
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        radii: args.radii.clone(),
        qs: args.qs.clone(),
        lambda: args.lambda,
        label_normalization: !args.no_label_norm,
        lda_gamma: gamma.unwrap_or(defaults.lda_gamma),
        threads: args.threads.unwrap_or(defaults.threads),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn extract(root: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    let dataset = scan_dataset(root)?;
    let extractor = SignatureExtractor::new(&cfg.radii, &cfg.qs, cfg.training_options())?;
    eprintln!(
        "extracting {} features from {} images in {} classes",
        extractor.feature_count(),
        dataset.len(),
        dataset.num_classes()
    );

    let done = AtomicUsize::new(0);
    let rows: Vec<FeatureRow> = cfg.install(|| {
        dataset
            .samples
            .par_iter()
            .map(|sample| {
                let img = load_gray(&sample.path)?;
                let signature = extractor.extract(&img).map_err(|e| match e {
                    Error::Dimension { .. } => Error::Dataset(format!("{}: {e}", sample.path.display())),
                    other => other,
                })?;
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, dataset.len());
                Ok(FeatureRow {
                    path: dataset.relative_path(sample),
                    class_name: dataset.class_names[sample.class_id].clone(),
                    values: signature.values,
                })
            })
            .collect::<texnet_core::Result<Vec<_>>>()
    })??;

    features::write_feature_table(out, extractor.meta(), &dataset.class_names, &rows)
        .with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} and {}", out.display(), features::sidecar_path(out).display());
    Ok(())
}

fn report_prefix(csv: &Path, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        let mut p = csv.with_extension("");
        p.as_mut_os_string().push(".eval");
        p
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

fn evaluate(csv: &Path, cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let loaded = features::read_feature_table(csv)?;
    let table = loaded.to_table()?;
    let result = cfg.install(|| leave_one_out(&table, cfg.lda_gamma))??;
    let report = EvalReport {
        class_names: loaded.sidecar.class_names.clone(),
        gamma: cfg.lda_gamma,
        result,
    };

    let prefix = report_prefix(csv, out);
    features::write_json(&with_suffix(&prefix, ".json"), &report)?;
    features::write_file(
        &with_suffix(&prefix, ".txt"),
        features::render_eval_text(&report).as_bytes(),
    )?;
    println!("{}", report.result.accuracy_percent());
    Ok(())
}

fn render(image: &Path, radius: u32, measure: &str, out: &Path) -> Result<()> {
    let measure: Measure = measure.parse()?;
    let img = load_gray(image)?;
    let maps = compute_measures(&img, radius)?;
    render_measure(&maps, measure)
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn sweep(root: &Path, cfg: &RunConfig, mode: SweepMode, out: &Path) -> Result<()> {
    let dataset = scan_dataset(root)?;
    let combos = eval::sweep_combinations(&cfg.radii, &cfg.qs, mode)?;
    eprintln!("sweeping {} combinations over {} images", combos.len(), dataset.len());
    let rows = cfg.install(|| {
        eval::sweep(
            &dataset,
            &cfg.radii,
            &cfg.qs,
            mode,
            cfg.training_options(),
            cfg.lda_gamma,
            &progress,
        )
    })??;
    for row in &rows {
        println!(
            "radii={:?} qs={:?} features={} accuracy={:.2}",
            row.radii,
            row.qs,
            row.features,
            row.accuracy * 100.0
        );
    }
    features::write_file(out, &features::render_sweep_csv(&rows)?)?;
    Ok(())
}
