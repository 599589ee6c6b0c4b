use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, personalize, standardize, train_generic, ExperimentConfig, SpanKind};
use crate::corpus::{Corpus, Individual};
use crate::dwa::{build_pool, DwaConfig};
use crate::error::{Error, Result};
use crate::regressor::{save_checkpoint, Target};

pub const REPORT_FILE: &str = "report.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FAILURE_FILE: &str = "failure.json";

const REPORT_HEADER: [&str; 9] = ["metric", "n", "seed", "target", "split", "individual_id", "ccc", "pcc", "bcf"];

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// `generic`, `none` (fine-tuning without augmentation) or a distance metric.
    pub metric: String,
    pub n: usize,
    pub seed: u64,
    pub target: Target,
    pub split: SpanKind,
    pub individual_id: String,
    pub ccc: f64,
    pub pcc: Option<f64>,
    pub bcf: Option<f64>,
}

/// Mean CCC over individuals for one (cell, seed, target, split).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub metric: String,
    pub n: usize,
    pub seed: u64,
    pub target: Target,
    pub split: SpanKind,
    pub ccc: f64,
    pub individuals: usize,
}

/// Seed-averaged scores of one cell on one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub metric: String,
    pub n: usize,
    pub split: SpanKind,
    pub arousal: Option<f64>,
    pub valence: Option<f64>,
    /// Mean of arousal and valence when both were run.
    pub combined: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub corpus_fingerprint: String,
    pub pool_fingerprint: Option<String>,
    /// Generic checkpoint fingerprint per `target/seed`.
    pub generic_fingerprints: BTreeMap<String, String>,
    pub aggregates: Vec<Aggregate>,
    pub grid: Vec<GridRow>,
    #[serde(skip)]
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// Seed-averaged aggregate for a cell, if it was run.
    pub fn cell(&self, metric: &str, n: usize, split: SpanKind) -> Option<&GridRow> {
        self.grid
            .iter()
            .find(|g| g.metric == metric && g.n == n && g.split == split)
    }
}

#[derive(Debug, Clone)]
struct Cell {
    label: String,
    n: usize,
    dwa: Option<DwaConfig>,
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = vec![Cell {
        label: "none".into(),
        n: 0,
        dwa: None,
    }];
    if config.grid.metrics.is_empty() {
        if let Some(d) = &config.dwa {
            out.push(Cell {
                label: d.metric.to_string(),
                n: d.n,
                dwa: Some(d.clone()),
            });
        }
    } else {
        let exclude = config.dwa.as_ref().map(|d| d.exclude_source_ids.clone()).unwrap_or_default();
        for &metric in &config.grid.metrics {
            for &n in &config.grid.n_values {
                let mut d = DwaConfig::new(metric, n);
                d.exclude_source_ids = exclude.clone();
                out.push(Cell {
                    label: metric.to_string(),
                    n,
                    dwa: Some(d),
                });
            }
        }
    }
    out
}

fn row(label: &str, n: usize, seed: u64, rec: &super::EvaluationRecord) -> ReportRow {
    ReportRow {
        metric: label.to_string(),
        n,
        seed,
        target: rec.target,
        split: rec.split,
        individual_id: rec.individual_id.clone(),
        ccc: rec.ccc_report.ccc,
        pcc: rec.ccc_report.pcc,
        bcf: rec.ccc_report.bcf,
    }
}

struct Partial {
    rows: Vec<ReportRow>,
    generic_fingerprints: BTreeMap<String, String>,
    pool_fingerprint: Option<String>,
    corpus_fingerprint: String,
}

/// Runs the full protocol over every seed, target and grid cell, writing
/// `report.csv`, `grid.csv` and `summary.json` to `config.output_dir`.
///
/// On failure the rows completed so far are still written, together with
/// `failure.json` describing the error.
pub fn run_experiment(corpus: &Corpus, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let mut partial = Partial {
        rows: Vec::new(),
        generic_fingerprints: BTreeMap::new(),
        pool_fingerprint: None,
        corpus_fingerprint: corpus.fingerprint(),
    };
    match run_inner(corpus, config, &mut partial) {
        Ok(()) => {
            let _ = fs::remove_file(out.join(FAILURE_FILE));
            let report = finish(partial);
            write_outputs(&report, config, out)?;
            Ok(report)
        }
        Err(e) => {
            let report = finish(partial);
            write_outputs(&report, config, out)?;
            let failure = serde_json::json!({
                "error": e.to_string(),
                "class": format!("{:?}", e.class()),
                "completed_rows": report.rows.len(),
            });
            fs::write(out.join(FAILURE_FILE), serde_json::to_string_pretty(&failure)?)?;
            Err(e)
        }
    }
}

fn run_inner(corpus: &Corpus, config: &ExperimentConfig, partial: &mut Partial) -> Result<()> {
    let (scaled, _) = standardize(corpus)?;
    let cells = cells(config);
    let pool = if cells.iter().any(|c| c.dwa.is_some()) {
        let p = build_pool(&scaled, &config.seg)?;
        partial.pool_fingerprint = Some(p.fingerprint().to_string());
        Some(p)
    } else {
        None
    };
    let targets: Vec<&Individual> = scaled.targets();
    if targets.is_empty() {
        return Err(Error::EmptySet("test individuals"));
    }
    let ckpt_dir = config.output_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;

    for &seed in &config.seeds {
        let seeded = config.with_seed(seed);
        for &target in &config.targets {
            let generic = train_generic(&scaled, &seeded, target)?;
            let key = format!("{target}/{seed}");
            partial
                .generic_fingerprints
                .insert(key, generic.checkpoint.fingerprint.clone());
            save_checkpoint(&generic.checkpoint, &ckpt_dir.join(format!("generic_{target}_seed{seed}.json")))?;
            let generic_params = &generic.checkpoint.params;

            for ind in &targets {
                for span in [SpanKind::DevelI, SpanKind::Test] {
                    if !span_labeled(ind, span)? {
                        continue;
                    }
                    let ev = evaluate(generic_params, ind, span, target, &config.seg)?;
                    partial.rows.push(row("generic", 0, seed, &ev.record));
                }
            }

            let jobs: Vec<(&Cell, &Individual)> = cells
                .iter()
                .flat_map(|c| targets.iter().map(move |ind| (c, *ind)))
                .collect();
            let results: Vec<Result<Vec<ReportRow>>> = jobs
                .par_iter()
                .map(|(cell, ind)| {
                    let cfg = ExperimentConfig {
                        dwa: cell.dwa.clone(),
                        ..seeded.clone()
                    };
                    let p = personalize(generic_params, ind, pool.as_ref(), &cfg, target)?;
                    let mut rows = vec![row(&cell.label, cell.n, seed, &p.devel)];
                    if span_labeled(ind, SpanKind::Test)? {
                        let test = evaluate(&p.params, ind, SpanKind::Test, target, &config.seg)?;
                        rows.push(row(&cell.label, cell.n, seed, &test.record));
                    }
                    Ok(rows)
                })
                .collect();
            // keep rows from jobs that finished before the first error
            for r in results {
                partial.rows.extend(r?);
            }
        }
    }
    Ok(())
}

/// Real corpora ship no Test-span labels; those rows are skipped rather than failed.
fn span_labeled(ind: &Individual, span: SpanKind) -> Result<bool> {
    Ok(ind.labeled_len() >= span.range(ind)?.end)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn finish(partial: Partial) -> ExperimentReport {
    type CellKey = (String, usize);
    let mut order: Vec<CellKey> = Vec::new();
    let mut groups: BTreeMap<(CellKey, u64, Target, SpanKind), Vec<f64>> = BTreeMap::new();
    for r in &partial.rows {
        let ck = (r.metric.clone(), r.n);
        if !order.contains(&ck) {
            order.push(ck.clone());
        }
        groups.entry((ck, r.seed, r.target, r.split)).or_default().push(r.ccc);
    }
    let aggregates: Vec<Aggregate> = groups
        .iter()
        .map(|(((metric, n), seed, target, split), v)| Aggregate {
            metric: metric.clone(),
            n: *n,
            seed: *seed,
            target: *target,
            split: *split,
            ccc: mean(v),
            individuals: v.len(),
        })
        .collect();

    let mut grid = Vec::new();
    for (metric, n) in &order {
        for split in [SpanKind::DevelI, SpanKind::Test] {
            let per_target = |t: Target| {
                let v: Vec<f64> = aggregates
                    .iter()
                    .filter(|a| &a.metric == metric && a.n == *n && a.split == split && a.target == t)
                    .map(|a| a.ccc)
                    .collect();
                (!v.is_empty()).then(|| mean(&v))
            };
            let arousal = per_target(Target::Arousal);
            let valence = per_target(Target::Valence);
            if arousal.is_none() && valence.is_none() {
                continue;
            }
            grid.push(GridRow {
                metric: metric.clone(),
                n: *n,
                split,
                arousal,
                valence,
                combined: arousal.zip(valence).map(|(a, v)| 0.5 * (a + v)),
            });
        }
    }
    ExperimentReport {
        corpus_fingerprint: partial.corpus_fingerprint,
        pool_fingerprint: partial.pool_fingerprint,
        generic_fingerprints: partial.generic_fingerprints,
        aggregates,
        grid,
        rows: partial.rows,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `rows` as `report.csv`.
pub fn write_report_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            r.target.to_string(),
            r.split.to_string(),
            r.individual_id.clone(),
            r.ccc.to_string(),
            opt(r.pcc),
            opt(r.bcf),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(report: &ExperimentReport, config: &ExperimentConfig, out: &Path) -> Result<()> {
    write_report_csv(&report.rows, &out.join(REPORT_FILE))?;
    let mut w = csv::Writer::from_path(out.join(GRID_FILE))?;
    w.write_record(["metric", "n", "split", "arousal", "valence", "combined"])?;
    for g in &report.grid {
        w.write_record([
            g.metric.clone(),
            g.n.to_string(),
            g.split.to_string(),
            opt(g.arousal),
            opt(g.valence),
            opt(g.combined),
        ])?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "config": config,
        "report": report,
    });
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
