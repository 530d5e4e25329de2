use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rarity_core::activation::{tukey_threshold, CumulativeActivationMatrix, ScoredSample};
use rarity_core::datasets::{
    load_mnist_digits, load_mnist_parity, oversample, rarify, write_idx_images, write_idx_labels,
    write_mnist_split, LabeledDataset, RarefactionSpec, Split, PARITY_CLASS_NAMES,
};
use rarity_core::experiments::{
    decile_analysis, extremes_report, outlier_misclassification, rarity_experiment, report, train_with_seed,
    RarityConfig,
};
use rarity_core::monitor::{model_fingerprint, ScoreMonitor, ThresholdBasis, Verdict};
use rarity_core::montage::emit_montage;
use rarity_core::scoring::{build_activation_matrix, score_dataset};
use rarity_core::tinynet::{architecture_from_widths, evaluate, infer, FeedforwardModel, TrainConfig};
use rarity_core::{Error, Result};

use crate::args::*;
use crate::manifest::{manifest_path, now_ms, RunManifest};

/// What a command read and wrote, for the manifest.
struct Run {
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let started = now_ms();
    let (name, run) = match &cli.command {
        Command::Train(c) => ("train", train(c)?),
        Command::Matrix(c) => ("matrix", matrix(c)?),
        Command::Score(c) => ("score", score(c)?),
        Command::Outliers(c) => ("outliers", outliers(c)?),
        Command::Deciles(c) => ("deciles", deciles(c)?),
        Command::Extremes(c) => ("extremes", extremes(c)?),
        Command::Rarify(c) => ("rarify", rarify_cmd(c)?),
        Command::Oversample(c) => ("oversample", oversample_cmd(c)?),
        Command::Monitor(MonitorCmd::Build(c)) => ("monitor build", monitor_build(c)?),
        Command::Monitor(MonitorCmd::Assess(c)) => ("monitor assess", monitor_assess(c)?),
        Command::RarityExperiment(c) => ("rarity-experiment", experiment(c)?),
    };
    RunManifest {
        command: name.to_string(),
        argv: argv.to_vec(),
        flags: serde_json::to_value(&cli.command).map_err(|e| Error::Format(e.to_string()))?,
        seed: run.seed,
        inputs: run.inputs,
        outputs: run.outputs,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
    }
    .write(&run.manifest)
}

fn file_run(seed: Option<u64>, inputs: &[&Path], out: &Path) -> Run {
    Run {
        seed,
        inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        outputs: vec![out.to_path_buf()],
        manifest: manifest_path(out, false),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parity_names() -> Option<Vec<String>> {
    Some(PARITY_CLASS_NAMES.iter().map(|s| s.to_string()).collect())
}

fn train_config(h: &Hyper) -> TrainConfig {
    TrainConfig {
        epochs: h.epochs,
        batch_size: h.batch_size,
        learning_rate: h.lr,
        seed: 0,
    }
}

fn train(c: &TrainCmd) -> Result<Run> {
    let train_set = load_mnist_parity(&c.data, Split::Train)?;
    let test_set = load_mnist_parity(&c.data, Split::Test)?;
    let arch = architecture_from_widths(&c.hyper.arch)?;
    let model = train_with_seed(&arch, &train_set, &train_config(&c.hyper), c.seed)?;
    model.save(&c.out)?;
    let eval = evaluate(&model, &test_set)?;
    println!("trained on {} samples", train_set.len());
    println!(
        "test accuracy: {} ({} of {} misclassified)",
        eval.accuracy, eval.misclassified, eval.total
    );
    Ok(file_run(Some(c.seed), &[&c.data], &c.out))
}

fn matrix(c: &MatrixCmd) -> Result<Run> {
    let model = FeedforwardModel::load(&c.model)?;
    let data = load_mnist_parity(&c.data, c.split.into())?;
    let matrix = build_activation_matrix(&model, &data, parity_names())?;
    matrix.save(&c.out)?;
    println!("n={} k={}", matrix.neurons(), matrix.classes());
    for (name, count) in matrix.class_names().iter().zip(matrix.class_samples()) {
        println!("{name}: {count} samples");
    }
    Ok(file_run(None, &[&c.model, &c.data], &c.out))
}

fn score(c: &ScoreCmd) -> Result<Run> {
    let model = FeedforwardModel::load(&c.model)?;
    let matrix = CumulativeActivationMatrix::load(&c.matrix)?;
    let data = load_mnist_parity(&c.data, c.split.into())?;
    let scored = score_dataset(&model, &matrix, &data)?;
    report::write_scores(&c.out, &scored)?;
    println!("scored {} samples", scored.len());
    Ok(file_run(None, &[&c.model, &c.matrix, &c.data], &c.out))
}

fn score_values(scored: &[ScoredSample]) -> Vec<f64> {
    scored.iter().map(|s| s.score).collect()
}

fn outliers(c: &OutliersCmd) -> Result<Run> {
    let scored = report::read_scores(&c.scores)?;
    let reference = match &c.reference {
        Some(path) => report::read_scores(path)?,
        None => scored.clone(),
    };
    let threshold = tukey_threshold(&score_values(&reference), c.k_fence)?;
    let summary = outlier_misclassification(&scored, threshold.tau)?;
    report::write_outliers(&c.out, &summary, &threshold)?;
    println!("tau: {}", threshold.tau);
    println!("overall misclassification rate: {}", summary.overall_rate);
    match summary.outlier_rate {
        Some(rate) => println!(
            "outliers: {} ({} misclassified, rate {rate})",
            summary.outlier_count, summary.outlier_misclassified
        ),
        None => println!("outliers: 0"),
    }
    let mut inputs = vec![c.scores.as_path()];
    inputs.extend(c.reference.as_deref());
    Ok(file_run(None, &inputs, &c.out))
}

fn deciles(c: &DecilesCmd) -> Result<Run> {
    let scored = report::read_scores(&c.scores)?;
    let deciles = decile_analysis(&scored)?;
    report::write_deciles(&c.out, &deciles)?;
    for (g, &(count, wrong)) in deciles.per_group.iter().enumerate() {
        println!("group {g}: {wrong}/{count} misclassified ({})", deciles.rate(g));
    }
    Ok(file_run(None, &[&c.scores], &c.out))
}

fn extremes(c: &ExtremesCmd) -> Result<Run> {
    if c.count == 0 || c.count > 25 {
        return Err(Error::InvalidArgument(format!("--count must be 1 to 25, got {}", c.count)));
    }
    let scored = report::read_scores(&c.scores)?;
    let data = load_mnist_parity(&c.data, c.split.into())?;
    let (rows, cols) = data.image_dims();
    create_dir(&c.out)?;
    let classes: BTreeSet<usize> = scored.iter().map(|s| s.predicted).collect();
    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    for &class in &classes {
        let r = extremes_report(&scored, class, c.count)?;
        for (kind, ids) in [("lowest", &r.lowest), ("highest", &r.highest)] {
            let images = ids
                .iter()
                .map(|&id| {
                    data.position_of(id)
                        .map(|pos| data.image(pos))
                        .ok_or_else(|| Error::InvalidArgument(format!("sample {id} is not in {}", c.data.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            let path = c.out.join(format!("class{class}_{kind}.pgm"));
            emit_montage(&images, rows, cols, &path)?;
            outputs.push(path);
        }
        if r.truncated {
            eprintln!("class {class}: fewer than {} samples, lists truncated", c.count);
        }
        reports.push(r);
    }
    let csv = c.out.join("extremes.csv");
    report::write_extremes(&csv, &reports, &scored)?;
    outputs.insert(0, csv);
    println!("wrote extremes for {} classes to {}", classes.len(), c.out.display());
    Ok(Run {
        seed: None,
        inputs: vec![c.scores.clone(), c.data.clone()],
        outputs,
        manifest: manifest_path(&c.out, true),
    })
}

/// Writes `train` as the training split of `out` and copies the test split of `src` unchanged.
fn write_dataset_dir(train: &LabeledDataset, src: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let (test_images, test_labels) = load_mnist_digits(src, Split::Test)?;
    write_mnist_split(train, out, Split::Train)?;
    write_idx_images(&test_images, out.join(Split::Test.images_file()))?;
    write_idx_labels(&test_labels, out.join(Split::Test.labels_file()))?;
    Ok([Split::Train, Split::Test]
        .iter()
        .flat_map(|s| [out.join(s.images_file()), out.join(s.labels_file())])
        .collect())
}

fn dir_run(seed: u64, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>, out: &Path) -> Run {
    Run {
        seed: Some(seed),
        inputs,
        outputs,
        manifest: manifest_path(out, true),
    }
}

fn rarify_cmd(c: &RarifyCmd) -> Result<Run> {
    let data = load_mnist_parity(&c.data, Split::Train)?;
    let spec = RarefactionSpec::new(c.digit, c.p, c.seed)?;
    let rare = rarify(&data, &spec);
    let outputs = write_dataset_dir(&rare, &c.data, &c.out)?;
    let kept = rare.subclass_tags().iter().filter(|&&t| t == c.digit).count();
    let before = data.subclass_tags().iter().filter(|&&t| t == c.digit).count();
    println!("digit {}: kept {kept} of {before} training samples", c.digit);
    println!("training samples: {} -> {}", data.len(), rare.len());
    Ok(dir_run(c.seed, vec![c.data.clone()], outputs, &c.out))
}

/// Sample ids from any CSV with a `sample_id` column, optionally filtered
/// by its `subclass` column and cut to the lowest `score` rows.
fn selected_ids(path: &Path, digit: Option<u8>, lowest: Option<usize>) -> Result<BTreeSet<u64>> {
    let fmt = |msg: String| Error::Format(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fmt(e.to_string()))?;
    let header = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fmt(format!("no {name} column")))
    };
    let id_col = column("sample_id")?;
    let sub_col = digit.map(|_| column("subclass")).transpose()?;
    let score_col = lowest.map(|_| column("score")).transpose()?;

    let mut rows: Vec<(f64, u64)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fmt(e.to_string()))?;
        let get = |col: usize, what: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| fmt(format!("row {}: missing {what}", line + 1)))
        };
        if let (Some(col), Some(d)) = (sub_col, digit) {
            if get(col, "subclass")? != d.to_string() {
                continue;
            }
        }
        let id: u64 = get(id_col, "sample_id")?
            .parse()
            .map_err(|_| fmt(format!("row {}: bad sample_id", line + 1)))?;
        let score = match score_col {
            Some(col) => get(col, "score")?
                .parse()
                .map_err(|_| fmt(format!("row {}: bad score", line + 1)))?,
            None => 0.0,
        };
        rows.push((score, id));
    }
    if let Some(k) = lowest {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        rows.truncate(k);
    }
    Ok(rows.into_iter().map(|(_, id)| id).collect())
}

fn oversample_cmd(c: &OversampleCmd) -> Result<Run> {
    let data = load_mnist_parity(&c.data, Split::Train)?;
    let ids = selected_ids(&c.ids, c.digit, c.lowest)?;
    let augmented = oversample(&data, &ids, c.count, c.seed)?;
    let outputs = write_dataset_dir(&augmented, &c.data, &c.out)?;
    println!("selected {} samples, appended {} copies", ids.len(), c.count);
    println!("training samples: {} -> {}", data.len(), augmented.len());
    Ok(dir_run(c.seed, vec![c.data.clone(), c.ids.clone()], outputs, &c.out))
}

fn monitor_build(c: &MonitorBuildCmd) -> Result<Run> {
    let model_bytes = read_bytes(&c.model)?;
    let model = FeedforwardModel::from_bytes(&model_bytes)?;
    let matrix = CumulativeActivationMatrix::load(&c.matrix)?;
    let (split, basis) = match c.basis {
        BasisArg::TrainingScores => (Split::Train, ThresholdBasis::TrainingScores),
        BasisArg::TestScores => (Split::Test, ThresholdBasis::TestScores),
    };
    let data = load_mnist_parity(&c.data, split)?;
    let scores = score_values(&score_dataset(&model, &matrix, &data)?);
    let monitor = ScoreMonitor::build(matrix, &scores, basis, c.k_fence, model_fingerprint(&model_bytes))?;
    monitor.save(&c.out)?;
    let t = monitor.threshold();
    println!("tau: {} (q1 {}, q3 {}, k_fence {})", t.tau, t.q1, t.q3, t.k_fence);
    println!("basis: {basis} over {} samples", scores.len());
    Ok(file_run(None, &[&c.model, &c.matrix, &c.data], &c.out))
}

fn monitor_assess(c: &MonitorAssessCmd) -> Result<Run> {
    let monitor = ScoreMonitor::load(&c.monitor)?;
    let model_bytes = read_bytes(&c.model)?;
    monitor.verify_model(&model_bytes)?;
    let model = FeedforwardModel::from_bytes(&model_bytes)?;
    let data = load_mnist_parity(&c.data, c.split.into())?;
    let data = match c.sample {
        Some(id) => {
            let pos = data
                .position_of(id)
                .ok_or_else(|| Error::InvalidArgument(format!("sample {id} is not in {}", c.data.display())))?;
            data.select(&[pos])
        }
        None => data,
    };

    let mut writer = csv::Writer::from_path(&c.out).map_err(|e| Error::Format(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    writer
        .write_record(["sample_id", "true_label", "predicted_label", "subclass", "score", "verdict"])
        .map_err(csv_err)?;
    // (count, misclassified) per verdict: accept, refer.
    let mut tally = [(0usize, 0usize); 2];
    for (i, inf) in infer(&model, &data)?.into_iter().enumerate() {
        let decision = monitor.assess_activations(&inf.penultimate_raw, inf.predicted)?;
        let truth = data.class_labels()[i];
        let slot = &mut tally[usize::from(decision.verdict == Verdict::Refer)];
        slot.0 += 1;
        slot.1 += usize::from(inf.predicted != truth);
        writer
            .write_record([
                data.sample_ids()[i].to_string(),
                truth.to_string(),
                inf.predicted.to_string(),
                data.subclass_tags()[i].to_string(),
                decision.score.map(|s| s.value().to_string()).unwrap_or_default(),
                decision.verdict.to_string(),
            ])
            .map_err(csv_err)?;
        if c.sample.is_some() {
            println!("{}", decision.verdict);
        }
    }
    writer.flush().map_err(|e| Error::Io {
        path: c.out.clone(),
        source: e,
    })?;
    if c.sample.is_none() {
        let rate = |(n, wrong): (usize, usize)| if n == 0 { 0.0 } else { wrong as f64 / n as f64 };
        println!("tau: {}", monitor.threshold().tau);
        println!("accept: {} (misclassification rate {})", tally[0].0, rate(tally[0]));
        println!("refer: {} (misclassification rate {})", tally[1].0, rate(tally[1]));
    }
    Ok(file_run(None, &[&c.monitor, &c.model, &c.data], &c.out))
}

fn experiment(c: &RarityExperimentCmd) -> Result<Run> {
    let train_set = load_mnist_parity(&c.data, Split::Train)?;
    let test_set = load_mnist_parity(&c.data, Split::Test)?;
    let cfg = RarityConfig {
        digits: if c.digit.is_empty() { (0..10).collect() } else { c.digit.clone() },
        trials_per_digit: c.trials,
        drop_probability: c.p,
        architecture: architecture_from_widths(&c.hyper.arch)?,
        train: train_config(&c.hyper),
        master_seed: c.seed,
    };
    let result = rarity_experiment(&train_set, &test_set, &cfg)?;
    create_dir(&c.out)?;
    let trials = c.out.join("trials.csv");
    let ratios = c.out.join("ratios.csv");
    report::write_trials(&trials, &result.trials)?;
    report::write_ratios(&ratios, &result.summary)?;
    println!("trained {} models", result.models_trained);
    for s in &result.summary {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| v.to_string());
        println!(
            "digit {}: rare {} common {} ratio {}",
            s.digit,
            s.mean_rate_rare,
            show(s.mean_rate_common),
            show(s.ratio)
        );
    }
    Ok(dir_run(c.seed, vec![c.data.clone()], vec![trials, ratios], &c.out))
}
