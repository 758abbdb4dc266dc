//! Command-line front end. `--json` prints exactly what the service returns
//! for the same query.

use std::io::Write;
use std::net::SocketAddr;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use trackdiff_core::analysis::{synth_pair, SynthPairSpec};
use trackdiff_core::compression::{fidelity_compressed, FidelityReport};
use trackdiff_core::learn::{auc, cross_validate, extract_features, Model, ModelKind, TrainConfig};
use trackdiff_core::metrics::{compare_tracks, MetricConfig};
use trackdiff_core::model::{Label, LabeledPair, TrackRef};
use trackdiff_core::{MonitorItemSet, Track};

use crate::error::{Error, Result};
use crate::ingest::{export_batch, ingest_batch, ingest_reader, ingest_tcp};
use crate::query::{
    AnomalyRequest, CompareRequest, Query, StatDiffRequest, TopkRequest, DEFAULT_BUDGET, DEFAULT_MIN_RUN,
    DEFAULT_THRESHOLD_Z, DEFAULT_TOPK,
};
use crate::service::{serve, ServiceConfig};
use crate::store::{Snapshot, Store};

#[derive(Debug, Parser)]
#[command(name = "trackdiff", version, about = "Compare, search and archive multi-channel telemetry tracks")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "TRACKDIFF_STORE", default_value = "trackdiff-store")]
    pub store: PathBuf,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON file with metric settings (k, grid_n, dtw_band_frac, channel_weights, allow_cross_type).
    #[arg(long, global = true)]
    pub metric_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Items {
    /// Comma-separated monitor items (default: the seven standard items).
    #[arg(long, value_delimiter = ',')]
    pub items: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Logistic,
    Ffnn,
    Knn,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Logistic => ModelKind::Logistic,
            Kind::Ffnn => ModelKind::Ffnn,
            Kind::Knn => ModelKind::Knn,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a batch directory (manifest.json + CSV files).
    IngestBatch {
        dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Keep raw samples as sidecar files.
        #[arg(long)]
        keep_raw: bool,
    },
    /// Ingest newline-delimited JSON records from stdin or a TCP listener.
    IngestStream {
        /// Listen on this address instead of reading stdin; stops on Ctrl-C.
        #[arg(long)]
        listen: Option<SocketAddr>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long)]
        keep_raw: bool,
    },
    /// Similarity of two tracks (stored ids or paths to track JSON files).
    Compare {
        a: String,
        b: String,
        #[arg(long)]
        k: Option<f64>,
        #[command(flatten)]
        items: Items,
    },
    /// Most similar stored tracks of the target's type.
    Topk {
        target: String,
        #[arg(long, default_value_t = DEFAULT_TOPK)]
        k: usize,
        #[command(flatten)]
        items: Items,
    },
    /// Intervals where the target departs from a reference track.
    Anomalies {
        target: String,
        reference: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_Z)]
        threshold_z: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_RUN)]
        min_run: usize,
        #[command(flatten)]
        items: Items,
    },
    /// Per-channel Welch t-test between two tracks.
    Statdiff {
        a: String,
        b: String,
        #[command(flatten)]
        items: Items,
    },
    /// Write synthetic labeled pairs as a batch directory plus labels.json.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        similar: usize,
        #[arg(long, default_value_t = 10)]
        dissimilar: usize,
        #[arg(long, default_value_t = 2000)]
        length: usize,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cross-validate a classifier on labeled pairs and save the full-data model.
    Train {
        /// JSON array of {a, b, label} pairs.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value = "ffnn")]
        kind: Kind,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Where to write the model JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[command(flatten)]
        items: Items,
    },
    /// Score labeled pairs with a saved model and report the AUC.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        items: Items,
    },
    /// Raw versus compressed similarity over a range of hinge budgets.
    BenchCompression {
        /// Budgets as `lo..hi` (inclusive).
        #[arg(long, default_value = "5..30", value_parser = parse_range)]
        hinges: RangeInclusive<usize>,
        #[arg(long, default_value_t = 5)]
        step: usize,
        /// Stored track with raw sidecar; with `--b`, replaces the synthetic pair.
        #[arg(long, requires = "b")]
        a: Option<String>,
        #[arg(long, requires = "a")]
        b: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        length: usize,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[command(flatten)]
        items: Items,
    },
    /// Run the HTTP query service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_TOPK)]
        topk: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (lo, hi) = s.split_once("..").ok_or("expected lo..hi")?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo < 2 || hi < lo {
        return Err("need 2 <= lo <= hi".into());
    }
    Ok(lo..=hi)
}

/// A positional track argument: a readable `.json` file is an inline track,
/// anything else a stored id.
pub fn track_ref(arg: &str) -> Result<TrackRef> {
    let p = Path::new(arg);
    if p.extension().is_some_and(|e| e == "json") && p.is_file() {
        let t: Track = serde_json::from_slice(&std::fs::read(p)?)?;
        return Ok(TrackRef::Inline(Box::new(t)));
    }
    Ok(TrackRef::Id(arg.to_string()))
}

fn metric_config(path: &Option<PathBuf>) -> Result<MetricConfig> {
    let cfg: MetricConfig = match path {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => MetricConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn item_set(items: &Items) -> Result<MonitorItemSet> {
    match &items.items {
        Some(v) => Ok(MonitorItemSet::try_from(v.clone())?),
        None => Ok(MonitorItemSet::default()),
    }
}

fn json_line<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: TrackRef,
    pub b: TrackRef,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub auc: f64,
    pub pairs: Vec<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub auc: f64,
    pub fold_aucs: Vec<f64>,
    pub examples: usize,
}

pub fn save_model(path: &Path, m: &Model) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(m)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn read_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Synthetic labeled pairs: `similar` correlated then `dissimilar`
/// uncorrelated, seeds `seed, seed + 1, ...`.
pub fn synth_tracks(
    similar: usize,
    dissimilar: usize,
    length: usize,
    snr: f64,
    seed: u64,
) -> (Vec<Track>, Vec<LabeledPair>) {
    let mut tracks = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..similar + dissimilar {
        let correlated = i < similar;
        let s = seed + i as u64;
        let (mut a, mut b) = synth_pair(&SynthPairSpec { length, snr, correlated, seed: s });
        // One day apart, so listings have a stable newest-first order.
        a.start_epoch = 1.7e9 + 86_400.0 * i as f64;
        b.start_epoch = a.start_epoch + 3_600.0;
        pairs.push(LabeledPair {
            a: TrackRef::Id(a.track_id.clone()),
            b: TrackRef::Id(b.track_id.clone()),
            label: if correlated { Label::Similar } else { Label::Dissimilar },
        });
        tracks.push(a);
        tracks.push(b);
    }
    (tracks, pairs)
}

/// Raw and compressed breakdowns at each budget.
pub fn bench_compression(
    a: &Track,
    b: &Track,
    budgets: impl IntoIterator<Item = usize>,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<Vec<FidelityReport>> {
    let raw = compare_tracks(a, b, items, cfg)?;
    budgets
        .into_iter()
        .map(|budget| {
            let compressed = fidelity_compressed(a, b, budget, items, cfg)?;
            Ok(FidelityReport { budget, raw: raw.clone(), compressed })
        })
        .collect()
}

/// Executes a parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = metric_config(&cli.metric_config)?;
    let json = cli.json;
    let snapshot = || -> Result<Snapshot> {
        Store::open(&cli.store)?;
        Snapshot::load(&cli.store)
    };
    match cli.command {
        Command::IngestBatch { dir, budget, keep_raw } => {
            let mut store = Store::open(&cli.store)?;
            store.set_keep_raw(keep_raw);
            let report = ingest_batch(&dir, &mut store, budget)?;
            if json {
                json_line(out, &report)?;
            } else {
                writeln!(out, "ingested {} track(s), {} failed", report.ingested.len(), report.failed.len())?;
                for f in &report.failed {
                    writeln!(out, "  {}: {} ({})", f.track_id, f.message, f.code)?;
                }
            }
        }
        Command::IngestStream { listen, budget, keep_raw } => {
            let mut store = Store::open(&cli.store)?;
            store.set_keep_raw(keep_raw);
            let stats = match listen {
                None => ingest_reader(std::io::stdin().lock(), &mut store, budget)?,
                Some(addr) => {
                    let rt = tokio::runtime::Runtime::new()?;
                    rt.block_on(async move {
                        let listener = tokio::net::TcpListener::bind(addr)
                            .await
                            .map_err(|e| Error::Invalid(format!("cannot bind {addr}: {e}")))?;
                        let stop = async {
                            let _ = tokio::signal::ctrl_c().await;
                        };
                        ingest_tcp(listener, store, budget, stop).await.map(|(_, s)| s)
                    })?
                }
            };
            if json {
                json_line(out, &stats)?;
            } else {
                writeln!(
                    out,
                    "stored {} track(s); {} orphan sample(s), {} malformed line(s), {} protocol error(s), {} failed, {} unterminated",
                    stats.stored.len(),
                    stats.orphan_samples,
                    stats.malformed_lines,
                    stats.protocol_errors,
                    stats.failed.len(),
                    stats.unterminated.len()
                )?;
            }
        }
        Command::Compare { a, b, k, items } => {
            let snap = snapshot()?;
            let req = CompareRequest { a: track_ref(&a)?, b: track_ref(&b)?, items: items.items, k };
            let r = Query::new(&snap, &cfg, DEFAULT_BUDGET).compare(&req)?;
            if json {
                json_line(out, &r)?;
            } else {
                writeln!(
                    out,
                    "ss={:.3} pc={:.3} ed={:.3} dtw={:.3}",
                    r.aggregate_ss, r.aggregate_pc, r.aggregate_ed, r.aggregate_dtw
                )?;
                for (name, m) in &r.per_channel {
                    writeln!(out, "  {name:<36} ss={:.3} pc={:.3} ed={:.3} dtw={:.3}", m.ss, m.pc, m.ed, m.dtw)?;
                }
                if !r.missing_channels.is_empty() {
                    writeln!(out, "  missing: {}", r.missing_channels.join(", "))?;
                }
            }
        }
        Command::Topk { target, k, items } => {
            let snap = snapshot()?;
            let req = TopkRequest { target: track_ref(&target)?, k: Some(k), items: items.items };
            let r = Query::new(&snap, &cfg, DEFAULT_BUDGET).topk(&req)?;
            if json {
                json_line(out, &r)?;
            } else {
                for (i, m) in r.iter().enumerate() {
                    writeln!(out, "{:>3}  {:<24} ss={:.3}  {}", i + 1, m.track_id, m.aggregate_ss, m.dr_refs.join(","))?;
                }
            }
        }
        Command::Anomalies { target, reference, threshold_z, min_run, items } => {
            let snap = snapshot()?;
            let req = AnomalyRequest {
                target: track_ref(&target)?,
                reference: track_ref(&reference)?,
                threshold_z: Some(threshold_z),
                min_run: Some(min_run),
                items: items.items,
            };
            let r = Query::new(&snap, &cfg, DEFAULT_BUDGET).anomalies(&req)?;
            if json {
                json_line(out, &r)?;
            } else if r.is_empty() {
                writeln!(out, "no anomalies")?;
            } else {
                for a in &r {
                    writeln!(
                        out,
                        "{:<36} t=[{:.1}, {:.1}) samples {}..{} severity={:.2}",
                        a.channel_name, a.start_t, a.end_t, a.start_index, a.end_index, a.severity
                    )?;
                }
            }
        }
        Command::Statdiff { a, b, items } => {
            let snap = snapshot()?;
            let req = StatDiffRequest { a: track_ref(&a)?, b: track_ref(&b)?, items: items.items };
            let r = Query::new(&snap, &cfg, DEFAULT_BUDGET).statdiff(&req)?;
            if json {
                json_line(out, &r)?;
            } else {
                for (name, d) in &r.per_channel {
                    writeln!(
                        out,
                        "{name:<36} t={:.3} dof={:.1} p={:.4} mean {:.4} vs {:.4}",
                        d.t_stat, d.dof, d.p_value, d.mean_a, d.mean_b
                    )?;
                }
            }
        }
        Command::Synth { out: dir, similar, dissimilar, length, snr, seed } => {
            let (tracks, pairs) = synth_tracks(similar, dissimilar, length, snr, seed);
            export_batch(&dir, &tracks)?;
            std::fs::write(dir.join("labels.json"), serde_json::to_vec_pretty(&pairs)?)?;
            if json {
                json_line(out, &serde_json::json!({ "tracks": tracks.len(), "pairs": pairs.len() }))?;
            } else {
                writeln!(out, "wrote {} tracks and {} labeled pairs to {}", tracks.len(), pairs.len(), dir.display())?;
            }
        }
        Command::Train { pairs, kind, folds, seed, model_out, items } => {
            let snap = snapshot()?;
            let items = item_set(&items)?;
            let q = Query::new(&snap, &cfg, DEFAULT_BUDGET);
            let pairs = read_pairs(&pairs)?;
            let (xs, labels) = features(&q, &pairs, &items)?;
            let report = cross_validate(&xs, &labels, kind.into(), folds, seed, &TrainConfig::default())?;
            if let Some(p) = &model_out {
                save_model(p, &report.model)?;
            }
            let summary =
                TrainSummary { kind: report.kind, auc: report.auc, fold_aucs: report.fold_aucs, examples: xs.len() };
            if json {
                json_line(out, &summary)?;
            } else {
                writeln!(out, "{:?}: mean AUC {:.3} over {} folds ({} pairs)", summary.kind, summary.auc, folds, xs.len())?;
                let f: Vec<String> = summary.fold_aucs.iter().map(|a| format!("{a:.3}")).collect();
                writeln!(out, "  folds: {}", f.join(" "))?;
            }
        }
        Command::Evaluate { model, pairs, items } => {
            let snap = snapshot()?;
            let items = item_set(&items)?;
            let q = Query::new(&snap, &cfg, DEFAULT_BUDGET);
            let model = load_model(&model)?;
            let pairs = read_pairs(&pairs)?;
            let (xs, labels) = features(&q, &pairs, &items)?;
            let scores: Vec<f64> = xs.iter().map(|x| model.score(x)).collect();
            let ev = Evaluation {
                auc: auc(&scores, &labels)?,
                pairs: pairs
                    .into_iter()
                    .zip(&scores)
                    .map(|(p, &score)| PairScore { a: p.a, b: p.b, label: p.label, score })
                    .collect(),
            };
            if json {
                json_line(out, &ev)?;
            } else {
                writeln!(out, "AUC {:.3} over {} pairs", ev.auc, ev.pairs.len())?;
            }
        }
        Command::BenchCompression { hinges, step, a, b, seed, length, snr, items } => {
            if step == 0 {
                return Err(Error::Invalid("--step must be positive".into()));
            }
            let items = item_set(&items)?;
            let (ta, tb) = match (a, b) {
                (Some(a), Some(b)) => {
                    let snap = snapshot()?;
                    let raw = |id: &str| snap.read_raw(id)?.ok_or_else(|| Error::RawUnavailable(id.to_string()));
                    (raw(&a)?, raw(&b)?)
                }
                _ => synth_pair(&SynthPairSpec { length, snr, correlated: true, seed }),
            };
            let rows = bench_compression(&ta, &tb, hinges.step_by(step), &items, &cfg)?;
            if json {
                json_line(out, &rows)?;
            } else {
                writeln!(out, "{:>7} {:>9} {:>9} {:>9} {:>9}", "hinges", "ss", "pc", "ed", "dtw")?;
                if let Some(r) = rows.first() {
                    let w = &r.raw;
                    writeln!(
                        out,
                        "{:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                        "raw", w.aggregate_ss, w.aggregate_pc, w.aggregate_ed, w.aggregate_dtw
                    )?;
                }
                for r in &rows {
                    let c = &r.compressed;
                    writeln!(
                        out,
                        "{:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                        r.budget, c.aggregate_ss, c.aggregate_pc, c.aggregate_ed, c.aggregate_dtw
                    )?;
                }
            }
        }
        Command::Serve { listen, topk, budget } => {
            let mut sc = ServiceConfig::new(listen, cli.store.clone());
            sc.metrics = cfg;
            sc.topk_default = topk;
            sc.budget = budget;
            let rt = tokio::runtime::Runtime::new()?;
            writeln!(out, "serving {} on http://{listen}", cli.store.display())?;
            out.flush()?;
            rt.block_on(serve(sc, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
        }
    }
    Ok(())
}

fn features(q: &Query<'_>, pairs: &[LabeledPair], items: &MonitorItemSet) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let source = q.source();
    let mut xs = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for p in pairs {
        xs.push(extract_features(p, &source, items, q.cfg)?.values);
        labels.push(p.label.is_similar());
    }
    Ok((xs, labels))
}
