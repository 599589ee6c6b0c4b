use std::fs;
use std::path::{Path, PathBuf};

use dwa_core::corpus::{generate_synthetic, load_corpus, save_corpus};
use dwa_core::dwa::{augment_individual, build_pool, export_augmentation_report};
use dwa_core::metrics::ccc;
use dwa_core::pipeline::{
    evaluate as evaluate_span, late_fuse, personalize as personalize_one, run_experiment, standardize,
    train_generic as train_generic_model, write_report_csv, ReportRow,
};
use dwa_core::regressor::{load_checkpoint, save_checkpoint, Checkpoint};
use dwa_core::segmentation::segment_series;
use dwa_core::{
    Corpus, DistanceMetric, DwaConfig, Error, EvaluationRecord, ExperimentConfig, FusionWeights, Individual, SpanKind,
    SynthConfig, Target,
};

use crate::{Common, Failure};

type Outcome = std::result::Result<(), Failure>;

const PREDICTIONS_HEADER: [&str; 4] = ["individual_id", "index", "prediction", "label"];

fn read_config_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))
}

fn experiment_config(common: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    match &common.config {
        Some(path) => Ok(ExperimentConfig::from_json(&read_config_text(path)?)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> std::result::Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| Failure::Config(format!("{flag} is required")))
}

fn out_dir(common: &Common) -> std::result::Result<&Path, Failure> {
    let out = require(&common.out, "--out")?;
    fs::create_dir_all(out)?;
    Ok(out)
}

/// Loads the corpus and standardizes it with statistics from the global split.
fn standardized_corpus(common: &Common) -> std::result::Result<Corpus, Failure> {
    let corpus = load_corpus(require(&common.corpus, "--corpus")?)?;
    Ok(standardize(&corpus)?.0)
}

fn seed(common: &Common, config: &ExperimentConfig) -> u64 {
    common.seed.unwrap_or(config.seeds[0])
}

fn targets(common: &Common, config: &ExperimentConfig) -> Vec<Target> {
    common.target.map_or_else(|| config.targets.clone(), |t| vec![t])
}

/// `--metric`/`--n` override the config's augmentation; `None` means no augmentation.
fn dwa_config(common: &Common, config: &ExperimentConfig) -> std::result::Result<Option<DwaConfig>, Failure> {
    if common.metric.is_none() && common.n.is_none() {
        return Ok(config.dwa.clone());
    }
    let base = config.dwa.as_ref();
    let metric = common
        .metric
        .or(base.map(|d| d.metric))
        .ok_or_else(|| Failure::Config("--n needs --metric".into()))?;
    let n = common.n.or(base.map(|d| d.n)).unwrap_or(1);
    if n == 0 {
        return Err(Failure::Config("--n must be >= 1".into()));
    }
    Ok(Some(DwaConfig {
        metric,
        n,
        ..base.cloned().unwrap_or_else(|| DwaConfig::new(metric, n))
    }))
}

fn selected_individuals<'a>(
    corpus: &'a Corpus,
    only: Option<&str>,
) -> std::result::Result<Vec<&'a Individual>, Failure> {
    let mut inds = corpus.targets();
    if let Some(id) = only {
        inds.retain(|i| i.id == id);
        if inds.is_empty() {
            return Err(Failure::Core(Error::NotPersonalizable(id.to_string())));
        }
    }
    Ok(inds)
}

fn report_row(metric: &str, n: usize, seed: u64, record: &EvaluationRecord) -> ReportRow {
    ReportRow {
        metric: metric.to_string(),
        n,
        seed,
        target: record.target,
        split: record.split,
        individual_id: record.individual_id.clone(),
        ccc: record.ccc_report.ccc,
        pcc: record.ccc_report.pcc,
        bcf: record.ccc_report.bcf,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    fs::write(path, serde_json::to_string_pretty(value).map_err(Error::from)?)?;
    Ok(())
}

pub fn synth(common: &Common) -> Outcome {
    let config = match &common.config {
        Some(path) => serde_json::from_str::<SynthConfig>(&read_config_text(path)?).map_err(Error::from)?,
        None => SynthConfig::default(),
    };
    let corpus = generate_synthetic(&config, common.seed.unwrap_or(0))?;
    let out = out_dir(common)?;
    save_corpus(&corpus, out)?;
    println!(
        "wrote {} individuals to {} (fingerprint {})",
        corpus.individuals().len(),
        out.display(),
        corpus.fingerprint()
    );
    Ok(())
}

pub fn train_generic(common: &Common) -> Outcome {
    let config = experiment_config(common)?;
    let corpus = standardized_corpus(common)?;
    let out = out_dir(common)?;
    let config = config.with_seed(seed(common, &config));
    for target in targets(common, &config) {
        let model = train_generic_model(&corpus, &config, target)?;
        save_checkpoint(&model.checkpoint, &out.join(format!("generic_{target}.json")))?;
        write_json(&out.join(format!("generic_{target}_trace.json")), &model.trace)?;
        println!(
            "{target}: hidden {} best Devel_G CCC {:.4} at epoch {}",
            model.checkpoint.params.hidden_dim(),
            model.trace.best_dev_ccc,
            model.trace.best_epoch
        );
    }
    Ok(())
}

pub fn augment(common: &Common, only: Option<&str>) -> Outcome {
    let config = experiment_config(common)?;
    let dwa = dwa_config(common, &config)?
        .ok_or_else(|| Failure::Config("augment needs --metric (or `dwa` in the config)".into()))?;
    let corpus = standardized_corpus(common)?;
    let out = out_dir(common)?;
    let pool = build_pool(&corpus, &config.seg)?;
    for ind in selected_individuals(&corpus, only)? {
        let span = SpanKind::TrainI.range(ind)?;
        let segments = segment_series(&ind.features, Some(&ind.labels), &config.seg, span)?;
        let mut dwa = dwa.clone();
        dwa.exclude_source_ids.insert(ind.id.clone());
        let dataset = augment_individual(&pool, &segments, &dwa)?;
        export_augmentation_report(&dataset, &out.join(format!("augmentation_{}.csv", ind.id)))?;
        println!(
            "{}: {} Train_I segments, {} augmentations",
            ind.id,
            dataset.original.len(),
            dataset.augmentations.len()
        );
    }
    Ok(())
}

pub fn personalize(common: &Common, generic: Option<&Path>) -> Outcome {
    let mut config = experiment_config(common)?;
    config.dwa = dwa_config(common, &config)?;
    let seed = seed(common, &config);
    let config = config.with_seed(seed);
    let corpus = standardized_corpus(common)?;
    let out = out_dir(common)?;
    let pool = config.dwa.as_ref().map(|_| build_pool(&corpus, &config.seg)).transpose()?;
    let (metric, n) = config.dwa.as_ref().map_or(("none", 0), |d| (d.metric.as_str(), d.n));

    let models: Vec<(Target, Checkpoint)> = match generic {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let target = common
                .target
                .or(ckpt.target)
                .ok_or_else(|| Failure::Config("--target is required for an untargeted checkpoint".into()))?;
            vec![(target, ckpt)]
        }
        None => targets(common, &config)
            .into_iter()
            .map(|t| Ok((t, train_generic_model(&corpus, &config, t)?.checkpoint)))
            .collect::<std::result::Result<_, Error>>()?,
    };

    let mut rows = Vec::new();
    for (target, generic) in &models {
        for ind in corpus.targets() {
            let p = personalize_one(&generic.params, ind, pool.as_ref(), &config, *target)?;
            let ckpt = Checkpoint {
                params: p.params,
                target: Some(*target),
                fingerprint: p.devel.config_fingerprint.clone(),
            };
            save_checkpoint(&ckpt, &out.join(format!("{}_{target}.json", ind.id)))?;
            println!(
                "{} {target}: {} training segments, Devel_I CCC {:.4}",
                ind.id, p.train_set_size, p.devel.ccc_report.ccc
            );
            rows.push(report_row(metric, n, seed, &p.devel));
        }
    }
    write_report_csv(&rows, &out.join("report.csv"))?;
    Ok(())
}

pub fn evaluate(common: &Common, checkpoint: &Path, only: Option<&str>, split: SpanKind) -> Outcome {
    let config = experiment_config(common)?;
    let corpus = standardized_corpus(common)?;
    let out = out_dir(common)?;
    let per_individual = checkpoint.is_dir();
    let shared = if per_individual { None } else { Some(load_checkpoint(checkpoint)?) };
    let target = common
        .target
        .or(shared.as_ref().and_then(|c| c.target))
        .ok_or_else(|| Failure::Config("--target is required".into()))?;

    let mut rows = Vec::new();
    let mut preds = csv::Writer::from_path(out.join("predictions.csv")).map_err(Error::from)?;
    preds.write_record(PREDICTIONS_HEADER).map_err(Error::from)?;
    for ind in selected_individuals(&corpus, only)? {
        let ckpt = match &shared {
            Some(c) => c.clone(),
            None => load_checkpoint(&checkpoint.join(format!("{}_{target}.json", ind.id)))?,
        };
        let ev = evaluate_span(&ckpt.params, ind, split, target, &config.seg)?;
        for ((t, p), l) in ev.indices.iter().zip(&ev.predictions).zip(&ev.labels) {
            preds
                .write_record([ind.id.clone(), t.to_string(), p.to_string(), l.to_string()])
                .map_err(Error::from)?;
        }
        println!("{} {target} {split}: CCC {:.4}", ind.id, ev.record.ccc_report.ccc);
        rows.push(report_row("model", 0, common.seed.unwrap_or(ckpt.params.seed()), &ev.record));
    }
    preds.flush()?;
    write_report_csv(&rows, &out.join("report.csv"))?;
    Ok(())
}

/// Rows of a predictions file.
struct Predictions {
    keys: Vec<(String, usize)>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

fn read_predictions(path: &Path) -> std::result::Result<Predictions, Failure> {
    let malformed = |line: u64, reason: &str| {
        Failure::Core(Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason: reason.to_string(),
        })
    };
    let mut reader = csv::Reader::from_path(path).map_err(Error::from)?;
    let header = reader.headers().map_err(Error::from)?;
    if header.iter().ne(PREDICTIONS_HEADER) {
        return Err(malformed(1, "expected individual_id,index,prediction,label"));
    }
    let mut p = Predictions {
        keys: Vec::new(),
        values: Vec::new(),
        labels: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(Error::from)?;
        let line = record.position().map_or(0, |pos| pos.line());
        let field = |i: usize| record.get(i).ok_or_else(|| malformed(line, "missing column"));
        let parse = |i: usize| -> std::result::Result<f64, Failure> {
            field(i)?.parse::<f64>().map_err(|_| malformed(line, "not a number"))
        };
        let index = field(1)?.parse::<usize>().map_err(|_| malformed(line, "bad index"))?;
        p.keys.push((field(0)?.to_string(), index));
        p.values.push(parse(2)?);
        p.labels.push(parse(3)?);
    }
    Ok(p)
}

pub fn fuse(common: &Common, a: &Path, b: &Path, dev_a: Option<f64>, dev_b: Option<f64>) -> Outcome {
    let out = out_dir(common)?;
    let pa = read_predictions(a)?;
    let pb = read_predictions(b)?;
    if pa.keys.len() != pb.keys.len() {
        return Err(Error::LengthMismatch {
            left: pa.keys.len(),
            right: pb.keys.len(),
        }
        .into());
    }
    if pa.keys != pb.keys {
        return Err(Failure::Core(Error::InvalidConfig(
            "prediction files cover different (individual_id, index) rows".into(),
        )));
    }
    let ccc_a = ccc(&pa.values, &pa.labels)?.ccc;
    let ccc_b = ccc(&pb.values, &pb.labels)?.ccc;
    let weights = FusionWeights::from_dev_ccc(dev_a.unwrap_or(ccc_a), dev_b.unwrap_or(ccc_b));
    let fused = late_fuse(&pa.values, &pb.values, weights.dev_ccc_a, weights.dev_ccc_b)?;
    let ccc_fused = ccc(&fused, &pa.labels)?.ccc;

    let mut w = csv::Writer::from_path(out.join("fused.csv")).map_err(Error::from)?;
    w.write_record(PREDICTIONS_HEADER).map_err(Error::from)?;
    for (((id, t), p), l) in pa.keys.iter().zip(&fused).zip(&pa.labels) {
        w.write_record([id.clone(), t.to_string(), p.to_string(), l.to_string()])
            .map_err(Error::from)?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "weights": weights,
        "ccc_a": ccc_a,
        "ccc_b": ccc_b,
        "ccc_fused": ccc_fused,
    });
    write_json(&out.join("fusion.json"), &summary)?;
    println!(
        "weights {:.4}/{:.4}; CCC a {ccc_a:.4}, b {ccc_b:.4}, fused {ccc_fused:.4}",
        weights.w_a, weights.w_b
    );
    Ok(())
}

pub fn experiment(common: &Common) -> Outcome {
    let mut config = experiment_config(common)?;
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    if let Some(target) = common.target {
        config.targets = vec![target];
    }
    if let Some(metric) = common.metric {
        config.grid.metrics = vec![metric];
        if config.grid.n_values.is_empty() {
            config.grid.n_values = vec![common.n.unwrap_or(1)];
        }
    }
    if let Some(n) = common.n {
        config.grid.n_values = vec![n];
        if config.grid.metrics.is_empty() {
            config.grid.metrics = DistanceMetric::ALL.to_vec();
        }
    }
    if let Some(out) = &common.out {
        config.output_dir = PathBuf::from(out);
    }
    let corpus = match &common.corpus {
        Some(dir) => load_corpus(dir)?,
        None => generate_synthetic(&SynthConfig::default(), config.seeds[0])?,
    };
    let report = run_experiment(&corpus, &config)?;
    println!("{:<12} {:>2} {:<8} {:>9} {:>9} {:>9}", "metric", "n", "split", "arousal", "valence", "combined");
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for g in &report.grid {
        println!(
            "{:<12} {:>2} {:<8} {:>9} {:>9} {:>9}",
            g.metric,
            g.n,
            g.split.as_str(),
            cell(g.arousal),
            cell(g.valence),
            cell(g.combined)
        );
    }
    println!("results in {}", config.output_dir.display());
    Ok(())
}
