//! The four subcommands. Each reads one JSON configuration and writes its
//! results into an output directory; nothing depends on wall-clock time, so
//! identical inputs give identical bytes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use edgewalk_core::attacks::RunOptions;
use edgewalk_core::eval::{
    adversarial_training, boundary_crossing_stats, AdvTrainConfig, BenchSettings, BenchmarkReport,
    CrossingStats,
};
use edgewalk_core::models::{predict, train_sgd, Classifier, Dataset, MlpModel, TrainConfig};
use edgewalk_core::quantization::{
    expected_sq_distortion_exact, expected_sq_distortion_highres, mc_quantized_distortion,
    QuantPredictorInput,
};
use serde::Serialize;

use crate::bench::{par_benchmark, par_multi_epsilon};
use crate::config::{
    base_dir, grid, load_config, require_seed, resolve_seed, BenchRunConfig, QuantpredRunConfig,
    Trace2dRunConfig, TrainRunConfig,
};
use crate::model_file::{decode_model, encode_model};
use crate::report::{write_oc_csv, write_records_csv, ReportSummary};
use crate::Error;

/// Flags shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Worker threads for `bench`; all cores when absent.
    pub jobs: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn prepare_out(out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })
}

fn num_classes(sets: &[&Dataset]) -> usize {
    sets.iter()
        .flat_map(|d| d.labels().iter().copied())
        .max()
        .map_or(2, |m| (m + 1).max(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub seed: u64,
    pub input_dim: usize,
    pub num_classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub config: TrainRunConfig,
}

/// Trains an MLP; writes `model.bin` and `train_log.json`.
pub fn cmd_train(inv: &Invocation) -> Result<TrainLog, Error> {
    let mut cfg: TrainRunConfig = load_config(&inv.config)?;
    let base = base_dir(&inv.config);
    cfg.data.resolve(&base);
    if let Some(t) = &mut cfg.test {
        t.resolve(&base);
    }
    let seed = require_seed(inv.seed, cfg.seed)?;
    cfg.seed = Some(seed);

    let data = cfg.data.load(seed)?;
    let (train, test) = match &cfg.test {
        Some(spec) => (data, spec.load(seed.wrapping_add(1))?),
        None => data.split_tail(cfg.holdout),
    };
    let input_dim = train
        .dim()
        .ok_or(Error::Config("training set is empty".into()))?;
    let classes = num_classes(&[&train, &test]);
    let sgd = &cfg.train;
    let train_cfg = TrainConfig {
        epochs: sgd.epochs,
        batch_size: sgd.batch_size,
        learning_rate: sgd.learning_rate,
        seed,
        hidden_sizes: sgd.hidden_sizes.clone(),
    };
    eprintln!(
        "training on {} examples of dimension {input_dim}",
        train.len()
    );
    let mut model = train_sgd(
        &MlpModel::new(input_dim, &sgd.hidden_sizes, classes, seed),
        &train,
        &train_cfg,
    )?;
    if let Some(adv) = &cfg.adversarial {
        eprintln!(
            "adversarial training with {} for {} epochs",
            adv.attack.name(),
            adv.epochs
        );
        let adv_cfg = AdvTrainConfig {
            epochs: adv.epochs,
            mode: adv.mode,
            train: TrainConfig {
                epochs: 1,
                batch_size: adv.batch_size.unwrap_or(sgd.batch_size),
                learning_rate: adv.learning_rate.unwrap_or(sgd.learning_rate),
                ..train_cfg
            },
        };
        model = adversarial_training(
            &model,
            &train,
            &adv.attack,
            &adv_cfg,
            &RunOptions::default(),
        )?;
    }

    prepare_out(&inv.out)?;
    write_bytes(&inv.out.join("model.bin"), &encode_model(&model))?;
    let log = TrainLog {
        seed,
        input_dim,
        num_classes: classes,
        train_size: train.len(),
        test_size: test.len(),
        train_accuracy: model.accuracy(&train),
        test_accuracy: (!test.is_empty()).then(|| model.accuracy(&test)),
        config: cfg,
    };
    write_json(&inv.out.join("train_log.json"), &log)?;
    Ok(log)
}

pub fn load_model_file(path: &Path) -> Result<MlpModel, Error> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes).map_err(|source| Error::ModelFile {
        path: path.to_path_buf(),
        source,
    })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    Ok(builder.build()?)
}

/// Writes `report.csv`, `report.json` and `oc.csv`.
pub fn write_report<C: Serialize>(
    out: &Path,
    report: &BenchmarkReport,
    config: &C,
) -> Result<(), Error> {
    prepare_out(out)?;
    let mut w = create(&out.join("report.csv"))?;
    write_records_csv(report, &mut w)?;
    let mut w = create(&out.join("oc.csv"))?;
    write_oc_csv(&report.operating_characteristic(), &mut w)?;
    write_json(
        &out.join("report.json"),
        &ReportSummary::new(report, config),
    )
}

/// Benchmarks one attack, aggregating over `epsilons` when given.
pub fn cmd_bench(inv: &Invocation) -> Result<BenchmarkReport, Error> {
    let mut cfg: BenchRunConfig = load_config(&inv.config)?;
    let base = base_dir(&inv.config);
    cfg.model = base.join(&cfg.model);
    cfg.data.resolve(&base);
    let seed = resolve_seed(inv.seed, cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);

    let model = load_model_file(&cfg.model)?;
    let data = cfg.data.load(seed)?;
    if data.dim().is_some_and(|d| d != model.input_dim()) {
        return Err(Error::Config(format!(
            "images have dimension {}, the model expects {}",
            data.dim().unwrap_or(0),
            model.input_dim()
        )));
    }
    let settings = BenchSettings {
        d_upp: cfg.d_upp,
        options: RunOptions {
            grid: grid(cfg.levels)?,
            trace: false,
        },
    };
    let pool = thread_pool(inv.jobs)?;
    eprintln!(
        "running {} on {} images with {} threads",
        cfg.attack.name(),
        data.len(),
        pool.current_num_threads()
    );
    let report = pool.install(|| match &cfg.epsilons {
        Some(eps) => par_multi_epsilon(&model, &data, &cfg.attack, eps, &settings, seed),
        None => par_benchmark(&model, &data, &cfg.attack, &settings, seed),
    })?;
    write_report(&inv.out, &report, &cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantpredRow {
    pub rho: f64,
    pub sqrt_exact: f64,
    pub sqrt_highres: f64,
    pub sqrt_mc: Option<f64>,
}

pub fn quantpred_rows(cfg: &QuantpredRunConfig, seed: u64) -> Result<Vec<QuantpredRow>, Error> {
    cfg.rho_values()?
        .into_iter()
        .enumerate()
        .map(|(i, rho)| {
            let q = QuantPredictorInput {
                n: cfg.n,
                delta: cfg.delta,
                rho,
            };
            let sqrt_mc = match cfg.samples {
                0 => None,
                s => Some(mc_quantized_distortion(&q, s, seed.wrapping_add(i as u64))?.sqrt()),
            };
            Ok(QuantpredRow {
                rho,
                sqrt_exact: expected_sq_distortion_exact(&q)?.sqrt(),
                sqrt_highres: expected_sq_distortion_highres(&q)?.sqrt(),
                sqrt_mc,
            })
        })
        .collect()
}

/// Writes `quantpred.csv`; the `sqrt_mc` column only with Monte-Carlo samples.
pub fn cmd_quantpred(inv: &Invocation) -> Result<Vec<QuantpredRow>, Error> {
    let mut cfg: QuantpredRunConfig = load_config(&inv.config)?;
    let seed = if cfg.samples > 0 {
        require_seed(inv.seed, cfg.seed)?
    } else {
        resolve_seed(inv.seed, cfg.seed).unwrap_or(0)
    };
    cfg.seed = Some(seed);
    let rows = quantpred_rows(&cfg, seed)?;
    prepare_out(&inv.out)?;
    let mut w = csv::Writer::from_writer(create(&inv.out.join("quantpred.csv"))?);
    if cfg.samples > 0 {
        w.write_record(["rho", "sqrt_exact", "sqrt_highres", "sqrt_mc"])?;
    } else {
        w.write_record(["rho", "sqrt_exact", "sqrt_highres"])?;
    }
    for row in &rows {
        match row.sqrt_mc {
            Some(mc) => w.serialize((row.rho, row.sqrt_exact, row.sqrt_highres, mc))?,
            None => w.serialize((row.rho, row.sqrt_exact, row.sqrt_highres))?,
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: inv.out.join("quantpred.csv"),
        source,
    })?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub attack: &'static str,
    pub label: usize,
    pub success: bool,
    pub distortion_l2: f64,
    pub grads_used: usize,
    pub iterates: usize,
    pub crossings: usize,
    pub adversarial_fraction: Option<f64>,
    pub config: Trace2dRunConfig,
}

/// Attacks one point of the plane; writes `trace.csv`, `grid.csv` and
/// `stats.json`.
pub fn cmd_trace2d(inv: &Invocation) -> Result<TraceSummary, Error> {
    let mut cfg: Trace2dRunConfig = load_config(&inv.config)?;
    cfg.seed = Some(resolve_seed(inv.seed, cfg.seed).unwrap_or(0));
    let model = &cfg.model;
    let label = predict(model, &cfg.start)?;
    let options = RunOptions {
        grid: grid(cfg.levels)?,
        trace: true,
    };
    let outcome = cfg.attack.run(model, &cfg.start, label, &options)?;
    let trace = outcome.trace.unwrap_or_default();
    let flags: Vec<bool> = trace.iter().map(|s| s.adversarial).collect();
    let CrossingStats {
        crossings,
        adversarial_fraction,
    } = boundary_crossing_stats(&flags);

    prepare_out(&inv.out)?;
    let mut w = csv::Writer::from_writer(create(&inv.out.join("trace.csv"))?);
    w.write_record(["iter", "y0", "y1", "loss", "adversarial"])?;
    for (i, step) in trace.iter().enumerate() {
        w.serialize((i, step.point[0], step.point[1], step.loss, step.adversarial))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: inv.out.join("trace.csv"),
        source,
    })?;

    let mut w = csv::Writer::from_writer(create(&inv.out.join("grid.csv"))?);
    w.write_record(["y0", "y1", "p0", "p1"])?;
    let res = cfg.resolution.max(2);
    for i in 0..res {
        for j in 0..res {
            let y = [i as f64 / (res - 1) as f64, j as f64 / (res - 1) as f64];
            let p = model.forward(&y)?;
            w.serialize((y[0], y[1], p.as_slice()[0], p.as_slice()[1]))?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: inv.out.join("grid.csv"),
        source,
    })?;

    let summary = TraceSummary {
        attack: cfg.attack.name(),
        label,
        success: outcome.success,
        distortion_l2: outcome.distortion_l2,
        grads_used: outcome.grads_used,
        iterates: trace.len(),
        crossings,
        adversarial_fraction,
        config: cfg,
    };
    write_json(&inv.out.join("stats.json"), &summary)?;
    Ok(summary)
}
