//! Result archives: `<out>/<method>/` holding the manifest, the resolved
//! configuration, per-epoch and summary CSVs, and one `trial-<k>/`
//! directory per trial with the grounding log and model checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use groundlab_core::harness::{
    run_trial, ExperimentConfig, Method, Metric, TrialOutput, TrialResult,
};
use groundlab_core::nn::dump;
use groundlab_core::sim::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::dataset;
use crate::error::{Error, Result};
use crate::stats::{summarize, BestEpoch, SummaryRow};

pub const FORMAT: &str = "groundlab-archive/1";
pub const EPOCH_COLUMNS: [&str; 8] = [
    "trial",
    "epoch",
    "env",
    "att",
    "queue",
    "delay",
    "throughput",
    "reward",
];
pub const SUMMARY_COLUMNS: [&str; 7] = [
    "method",
    "metric",
    "mean_real",
    "std_real",
    "mean_gap",
    "std_gap",
    "best_epoch_mean",
];
pub const GROUNDING_COLUMNS: [&str; 8] = [
    "epoch",
    "episode",
    "t",
    "agent",
    "gated",
    "grounded_action",
    "original_action",
    "uncertainty",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub method: String,
    pub config_hash: String,
    pub environment_hash: String,
    pub trials: usize,
    pub completed_trials: Vec<usize>,
    pub complete: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub jobs: usize,
    pub save_dataset: bool,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(Error::from)
}

pub fn archive_dir(out: &Path, method: Method) -> PathBuf {
    out.join(method.name())
}

fn metric_fields(m: &MetricsReport) -> [String; 5] {
    [
        m.att.to_string(),
        m.queue.to_string(),
        m.delay.to_string(),
        m.throughput.to_string(),
        m.reward.to_string(),
    ]
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_file(&dir.join("manifest.json"), text)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::archive(dir, format!("bad manifest: {e}")))?;
    if m.format != FORMAT {
        return Err(Error::archive(
            dir,
            format!("unsupported format {:?}", m.format),
        ));
    }
    Ok(m)
}

fn write_trial(
    dir: &Path,
    config: &ExperimentConfig,
    out: &TrialOutput,
    save_dataset: bool,
) -> Result<()> {
    let tdir = dir.join(format!("trial-{}", out.result.trial));
    create_dir(&tdir)?;
    let r = &out.result;

    let mut w = csv_writer(&tdir.join("pretrain.csv"))?;
    w.write_record(["episode", "reward"])?;
    for (e, reward) in r.pretrain_rewards.iter().enumerate() {
        w.write_record([e.to_string(), reward.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&tdir, e))?;

    if config.method.grounds() {
        let mut w = csv_writer(&tdir.join("grounding.csv"))?;
        w.write_record(GROUNDING_COLUMNS)?;
        for row in &r.log {
            w.write_record([
                row.epoch.to_string(),
                row.episode.to_string(),
                row.t.to_string(),
                row.agent.to_string(),
                u8::from(row.gated).to_string(),
                row.grounded_action.index().to_string(),
                row.original_action.index().to_string(),
                row.uncertainty.map(|u| u.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&tdir, e))?;
    }

    for (i, p) in out.policies.iter().enumerate() {
        write_file(&tdir.join(format!("policy-{i}.txt")), p.checkpoint())?;
    }
    if let Some(g) = &out.grounder {
        for (o, f) in g.forward_models().enumerate() {
            write_file(&tdir.join(format!("forward-{o}.txt")), dump(f.net()))?;
            if let Some(ens) = g.ensemble(o) {
                for (k, m) in ens.members().iter().enumerate().skip(1) {
                    write_file(
                        &tdir.join(format!("forward-{o}-member-{k}.txt")),
                        dump(m.net()),
                    )?;
                }
            }
        }
        for (o, h) in g.inverse_models().iter().enumerate() {
            write_file(&tdir.join(format!("inverse-{o}.txt")), dump(h.net()))?;
        }
    }
    if save_dataset {
        let path = tdir.join("dataset.ndjson");
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        dataset::write(&mut buf, out.store.all()).map_err(|e| Error::io(&path, e))?;
        std::io::Write::flush(&mut buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn write_tables(
    dir: &Path,
    config: &ExperimentConfig,
    results: &[TrialResult],
) -> Result<Vec<SummaryRow>> {
    let mut w = csv_writer(&dir.join("epochs.csv"))?;
    w.write_record(EPOCH_COLUMNS)?;
    for r in results {
        for e in &r.epochs {
            for (env, m) in [("sim", &e.sim), ("real", &e.real)] {
                let mut rec = vec![r.trial.to_string(), e.epoch.to_string(), env.to_string()];
                rec.extend(metric_fields(m));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = csv_writer(&dir.join("pretrained.csv"))?;
    w.write_record([
        "trial",
        "env",
        "att",
        "queue",
        "delay",
        "throughput",
        "reward",
    ])?;
    for r in results {
        for (env, m) in [("sim", &r.pretrained.sim), ("real", &r.pretrained.real)] {
            let mut rec = vec![r.trial.to_string(), env.to_string()];
            rec.extend(metric_fields(m));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let best: Vec<BestEpoch> = results
        .iter()
        .map(|r| BestEpoch {
            epoch: r.best_epoch,
            real: r.best().real,
            sim: r.best().sim,
        })
        .collect();
    let rows = summarize(config.method.name(), &best);
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        w.write_record([
            row.method.clone(),
            row.metric.name().to_string(),
            row.mean_real.to_string(),
            opt(row.std_real),
            row.mean_gap.to_string(),
            opt(row.std_gap),
            row.best_epoch_mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every trial of `config` and writes the archive under
/// `<out>/<method>/`. Returns the archive directory and the trial results.
pub fn train(
    config: &ExperimentConfig,
    out: &Path,
    options: &TrainOptions,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<(PathBuf, Vec<TrialResult>)> {
    config.validate()?;
    let dir = archive_dir(out, config.method);
    create_dir(&dir)?;
    let mut manifest = Manifest {
        format: FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        method: config.method.name().into(),
        config_hash: config::config_hash(config)?,
        environment_hash: config::environment_hash(config)?,
        trials: config.trials,
        completed_trials: Vec::new(),
        complete: false,
    };
    write_manifest(&dir, &manifest)?;
    let mut text = config::dump(config)?;
    text.push('\n');
    write_file(&dir.join("config.json"), text)?;

    let next = Mutex::new(0usize);
    let done: Mutex<Vec<(usize, Result<TrialResult>)>> = Mutex::new(Vec::new());
    let jobs = options.jobs.clamp(1, config.trials);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let k = {
                    let mut n = next.lock().unwrap_or_else(|e| e.into_inner());
                    if *n >= config.trials {
                        return;
                    }
                    *n += 1;
                    *n - 1
                };
                progress(&format!("trial {k}: started"));
                let res = run_trial(config, k).map_err(Error::from).and_then(|o| {
                    write_trial(&dir, config, &o, options.save_dataset)?;
                    Ok(o.result)
                });
                if let Ok(r) = &res {
                    progress(&format!(
                        "trial {k}: done, best epoch {} real ATT {:.2}",
                        r.best_epoch,
                        r.best().real.att
                    ));
                }
                done.lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push((k, res));
            });
        }
    });
    let mut done = done.into_inner().unwrap_or_else(|e| e.into_inner());
    done.sort_by_key(|(k, _)| *k);
    let mut results = Vec::new();
    let mut first_err = None;
    for (k, r) in done {
        match r {
            Ok(r) => {
                manifest.completed_trials.push(k);
                results.push(r);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        write_manifest(&dir, &manifest)?;
        return Err(e);
    }
    write_tables(&dir, config, &results)?;
    manifest.complete = true;
    write_manifest(&dir, &manifest)?;
    Ok((dir, results))
}

/// Rows of `epochs.csv` as (trial, epoch, env, metrics).
pub fn read_epochs(dir: &Path) -> Result<Vec<(usize, usize, String, MetricsReport)>> {
    let path = dir.join("epochs.csv");
    let mut r = csv::Reader::from_path(&path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != EPOCH_COLUMNS {
        return Err(Error::archive(
            dir,
            format!("epochs.csv has columns {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::archive(dir, format!("epochs.csv: bad number {:?}", &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::archive(dir, format!("epochs.csv: bad integer {:?}", &rec[i])))
        };
        out.push((
            u(0)?,
            u(1)?,
            rec[2].to_string(),
            MetricsReport {
                att: f(3)?,
                queue: f(4)?,
                delay: f(5)?,
                throughput: u(6)? as u64,
                reward: f(7)?,
            },
        ));
    }
    Ok(out)
}

/// Best epoch per trial recomputed from `epochs.csv`: lowest real ATT,
/// earliest on ties.
pub fn best_epochs(dir: &Path) -> Result<Vec<BestEpoch>> {
    let rows = read_epochs(dir)?;
    let mut trials: Vec<usize> = rows.iter().map(|r| r.0).collect();
    trials.sort_unstable();
    trials.dedup();
    let mut out = Vec::new();
    for t in trials {
        let mut epochs: Vec<(usize, Option<MetricsReport>, Option<MetricsReport>)> = Vec::new();
        for (_, e, env, m) in rows.iter().filter(|r| r.0 == t) {
            let slot = match epochs.iter_mut().find(|x| x.0 == *e) {
                Some(s) => s,
                None => {
                    epochs.push((*e, None, None));
                    epochs.last_mut().expect("just pushed")
                }
            };
            match env.as_str() {
                "sim" => slot.1 = Some(*m),
                "real" => slot.2 = Some(*m),
                other => {
                    return Err(Error::archive(
                        dir,
                        format!("epochs.csv: unknown env {other:?}"),
                    ))
                }
            }
        }
        epochs.sort_by_key(|x| x.0);
        let mut best: Option<BestEpoch> = None;
        for (e, sim, real) in epochs {
            let (Some(sim), Some(real)) = (sim, real) else {
                return Err(Error::archive(
                    dir,
                    format!("trial {t} epoch {e} lacks a sim or real row"),
                ));
            };
            if best.is_none_or(|b| real.att < b.real.att) {
                best = Some(BestEpoch {
                    epoch: e,
                    real,
                    sim,
                });
            }
        }
        out.extend(best);
    }
    Ok(out)
}

/// Convenience accessor for one metric of a summary.
pub fn summary_value(rows: &[SummaryRow], metric: Metric) -> Option<&SummaryRow> {
    rows.iter().find(|r| r.metric == metric)
}
