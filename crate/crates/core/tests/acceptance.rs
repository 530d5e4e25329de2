//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.
//!
//! MNIST is read from `data/mnist` at the workspace root, or from the
//! directory named by `RARITY_MNIST_DIR`; criteria that need it are skipped
//! when it is absent. Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 1 2 9`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rarity_core::activation::{
    score, tukey_threshold, ActivationPattern, CumulativeActivationMatrix, MatrixBuilder, ScoredSample,
    DEFAULT_K_FENCE,
};
use rarity_core::datasets::{
    idx, load_mnist_parity, read_idx_images, read_idx_labels, write_idx_images, IdxImages, LabeledDataset, Split,
    PARITY_CLASS_NAMES,
};
use rarity_core::experiments::{
    decile_analysis, outlier_misclassification, oversampling_mitigation, rarity_experiment, train_with_seed,
    MitigationConfig, RarityConfig,
};
use rarity_core::monitor::{model_fingerprint, ScoreMonitor, ThresholdBasis, Verdict};
use rarity_core::rng::SplitMix64;
use rarity_core::scoring::{build_activation_matrix, score_dataset};
use rarity_core::tinynet::{
    evaluate, gradient_check, infer, parity_architecture, FeedforwardModel, LayerSpec, TrainConfig,
    DEFAULT_GRADCHECK_EPSILON,
};
use rarity_core::Error;

const SEED: u64 = 0;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("RARITY_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join(Split::Train.images_file()).is_file().then_some(dir)
}

struct Mnist {
    dir: PathBuf,
    train: LabeledDataset,
    test: LabeledDataset,
}

fn mnist() -> Option<&'static Mnist> {
    static DATA: OnceLock<Option<Mnist>> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = mnist_dir()?;
        Some(Mnist {
            train: load_mnist_parity(&dir, Split::Train).expect("load MNIST train"),
            test: load_mnist_parity(&dir, Split::Test).expect("load MNIST test"),
            dir,
        })
    })
    .as_ref()
}

struct Trained {
    model: FeedforwardModel,
    seconds: f64,
    matrix: CumulativeActivationMatrix,
}

/// The default parity model, trained once and shared by several criteria.
fn default_model(data: &Mnist) -> &'static Trained {
    static MODEL: OnceLock<Trained> = OnceLock::new();
    MODEL.get_or_init(|| {
        let start = Instant::now();
        let model = train_with_seed(&parity_architecture(), &data.train, &TrainConfig::default(), SEED)
            .expect("train default model");
        let seconds = start.elapsed().as_secs_f64();
        let names = PARITY_CLASS_NAMES.iter().map(|s| s.to_string()).collect();
        let matrix = build_activation_matrix(&model, &data.train, Some(names)).expect("matrix");
        Trained { model, seconds, matrix }
    })
}

fn random_pattern(rng: &mut SplitMix64, n: usize, density: f64) -> Vec<bool> {
    (0..n).map(|_| rng.next_f64() < density).collect()
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence

struct Instance {
    n: usize,
    k: usize,
    patterns: Vec<Vec<bool>>,
    labels: Vec<usize>,
    predicted: Vec<usize>,
}

fn random_instance(rng: &mut SplitMix64) -> Instance {
    let n = 1 + rng.below(8) as usize;
    let k = 1 + rng.below(3) as usize;
    let m = 1 + rng.below(100) as usize;
    let density = rng.next_f64();
    Instance {
        n,
        k,
        patterns: (0..m).map(|_| random_pattern(rng, n, density)).collect(),
        labels: (0..m).map(|_| rng.below(k as u64) as usize).collect(),
        predicted: (0..m).map(|_| rng.below(k as u64) as usize).collect(),
    }
}

fn oracle_counts(inst: &Instance) -> (Vec<Vec<u64>>, Vec<u64>) {
    let mut counts = vec![vec![0u64; inst.k]; inst.n];
    let mut samples = vec![0u64; inst.k];
    for (p, &label) in inst.patterns.iter().zip(&inst.labels) {
        samples[label] += 1;
        for (i, &bit) in p.iter().enumerate() {
            if bit {
                counts[i][label] += 1;
            }
        }
    }
    (counts, samples)
}

fn oracle_score(counts: &[Vec<u64>], pattern: &[bool], class: usize) -> Option<f64> {
    let mut fired = 0u64;
    let mut total = 0u64;
    for (row, &bit) in counts.iter().zip(pattern) {
        total += row[class];
        if bit {
            fired += row[class];
        }
    }
    (total > 0).then(|| fired as f64 / total as f64)
}

/// Ten groups by rank: rank r of N goes to the group g whose cumulative
/// capacity first exceeds r, where groups below N % 10 hold one extra sample.
fn oracle_deciles(samples: &[ScoredSample]) -> Vec<(usize, usize)> {
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Selection sort on (score, id).
    for i in 0..n {
        let mut best = i;
        for j in i + 1..n {
            let (a, b) = (&samples[order[j]], &samples[order[best]]);
            if a.score < b.score || (a.score == b.score && a.sample_id < b.sample_id) {
                best = j;
            }
        }
        order.swap(i, best);
    }
    let mut groups = vec![(0usize, 0usize); 10];
    for (rank, &idx) in order.iter().enumerate() {
        let mut g = 0;
        let mut capacity = n / 10 + usize::from(n % 10 > 0);
        while rank >= capacity {
            g += 1;
            capacity += n / 10 + usize::from(g < n % 10);
        }
        groups[g].0 += 1;
        let s = &samples[idx];
        groups[g].1 += usize::from(Some(s.predicted) != s.true_label);
    }
    groups
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xacce_0001);
    let mut checks = 0usize;
    let mut mismatches = Vec::new();
    for case in 0..500 {
        let inst = random_instance(&mut rng);
        let patterns: Vec<ActivationPattern> = inst
            .patterns
            .iter()
            .map(|p| ActivationPattern::from_bools(p.clone()).unwrap())
            .collect();
        let (counts, samples) = oracle_counts(&inst);

        let built = CumulativeActivationMatrix::build(patterns.iter().zip(inst.labels.iter().copied()), inst.n, inst.k)
            .unwrap();
        let split = rng.below(patterns.len() as u64 + 1) as usize;
        let mut left = MatrixBuilder::new(inst.n, inst.k).unwrap();
        let mut right = MatrixBuilder::new(inst.n, inst.k).unwrap();
        for (i, (p, &l)) in patterns.iter().zip(&inst.labels).enumerate() {
            (if i < split { &mut left } else { &mut right }).push(p, l).unwrap();
        }
        let finish = |b: MatrixBuilder| {
            if b.samples_seen() == 0 {
                CumulativeActivationMatrix::zeros(inst.n, inst.k).unwrap()
            } else {
                b.finish().unwrap()
            }
        };
        let merged = finish(left).merge(&finish(right)).unwrap();
        let matrix_ok = (0..inst.n).all(|i| (0..inst.k).all(|j| built.count(i, j) == counts[i][j]))
            && built.class_samples() == samples.as_slice()
            && merged == built;
        checks += 1;
        if !matrix_ok {
            mismatches.push(format!("case {case}: matrix"));
            continue;
        }

        let mut scored = Vec::new();
        for (s, p) in patterns.iter().enumerate() {
            let class = inst.predicted[s];
            let expected = oracle_score(&counts, &inst.patterns[s], class);
            let got = score(p, &built, class);
            checks += 1;
            match (expected, got) {
                (Some(e), Ok(g)) if e.to_bits() == g.value().to_bits() => scored.push(ScoredSample {
                    sample_id: s as u64,
                    predicted: class,
                    true_label: Some(inst.labels[s]),
                    subclass: None,
                    score: e,
                }),
                (None, Err(Error::UndefinedScore { class: c })) if c == class => {}
                (e, g) => mismatches.push(format!("case {case} sample {s}: score {e:?} vs {g:?}")),
            }
        }
        if scored.is_empty() {
            continue;
        }

        checks += 1;
        match decile_analysis(&scored) {
            Ok(report) if scored.len() >= 10 => {
                if report.per_group != oracle_deciles(&scored) {
                    mismatches.push(format!("case {case}: deciles"));
                }
            }
            Err(_) if scored.len() < 10 => {}
            other => mismatches.push(format!("case {case}: deciles on {} samples: {other:?}", scored.len())),
        }

        let tau = if rng.below(2) == 0 {
            scored[rng.below(scored.len() as u64) as usize].score
        } else {
            rng.next_f64()
        };
        let below: Vec<&ScoredSample> = scored.iter().filter(|s| s.score < tau).collect();
        let wrong_all = scored.iter().filter(|s| Some(s.predicted) != s.true_label).count();
        let wrong_below = below.iter().filter(|s| Some(s.predicted) != s.true_label).count();
        let summary = outlier_misclassification(&scored, tau).unwrap();
        checks += 1;
        let expected_rate = (!below.is_empty()).then(|| wrong_below as f64 / below.len() as f64);
        if summary.overall_rate != wrong_all as f64 / scored.len() as f64
            || summary.outlier_count != below.len()
            || summary.outlier_misclassified != wrong_below
            || summary.outlier_rate != expected_rate
        {
            mismatches.push(format!("case {case}: outliers"));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "500 instances, {checks} comparisons, {} mismatches{}, {:.2}s (limit 10s)",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Score soundness

fn random_matrix(rng: &mut SplitMix64, n: usize, k: usize) -> CumulativeActivationMatrix {
    let samples: Vec<u64> = (0..k).map(|_| 1 + rng.below(1000)).collect();
    let counts = (0..n * k).map(|idx| rng.below(samples[idx % k] + 1)).collect();
    CumulativeActivationMatrix::from_counts(n, counts, samples, None).unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xacce_0002);
    let (mut out_of_range, mut non_monotone, mut triples) = (0, 0, 0);
    while triples < 10_000 {
        let n = 1 + rng.below(128) as usize;
        let k = 1 + rng.below(4) as usize;
        let matrix = random_matrix(&mut rng, n, k);
        let class = rng.below(k as u64) as usize;
        if matrix.column_total(class) == 0 {
            continue;
        }
        triples += 1;
        let density = rng.next_f64();
        let mut bits = random_pattern(&mut rng, n, density);
        let before = score(&ActivationPattern::from_bools(bits.clone()).unwrap(), &matrix, class)
            .unwrap()
            .value();
        if !(0.0..=1.0).contains(&before) {
            out_of_range += 1;
        }
        let zeros: Vec<usize> = (0..n).filter(|&i| !bits[i]).collect();
        if zeros.is_empty() {
            continue;
        }
        bits[zeros[rng.below(zeros.len() as u64) as usize]] = true;
        let after = score(&ActivationPattern::from_bools(bits).unwrap(), &matrix, class)
            .unwrap()
            .value();
        if after < before || !(0.0..=1.0).contains(&after) {
            non_monotone += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        out_of_range == 0 && non_monotone == 0 && elapsed < Duration::from_secs(5),
        format!(
            "10000 triples, {out_of_range} out of [0,1], {non_monotone} monotonicity violations, {:.2}s (limit 5s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xacce_0003);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let input_dim = 2 + rng.below(7) as usize;
        let hidden = 2 + rng.below(9) as usize;
        let classes = 2 + rng.below(3) as usize;
        let mut specs = vec![LayerSpec::relu(input_dim, hidden)];
        if rng.below(2) == 1 {
            specs.push(LayerSpec::relu(hidden, hidden));
        }
        specs.push(LayerSpec::softmax(hidden, classes));
        let mut model = FeedforwardModel::init(&specs, 1000 + case).unwrap();
        let mut layers = model.layers().to_vec();
        for layer in &mut layers {
            layer.biases.iter_mut().for_each(|b| *b = rng.uniform(-0.1, 0.1));
        }
        model = FeedforwardModel::from_layers(layers).unwrap();
        let input: Vec<f64> = (0..input_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let label = rng.below(classes as u64) as usize;
        worst = worst.max(gradient_check(&model, &input, label, DEFAULT_GRADCHECK_EPSILON).unwrap());
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-6 && elapsed < Duration::from_secs(30),
        format!(
            "50 models, max relative error {worst:.3e} (limit 1e-6), {:.2}s (limit 30s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Parity model quality

fn criterion_4() -> Outcome {
    let Some(data) = mnist() else {
        return Skip("MNIST not found".into());
    };
    let trained = default_model(data);
    let eval = evaluate(&trained.model, &data.test).unwrap();
    verdict(
        eval.accuracy >= 0.96 && trained.seconds < 600.0,
        format!(
            "test accuracy {:.4} (floor 0.96), training {:.1}s (limit 600s)",
            eval.accuracy, trained.seconds
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Subclass-rarity directional reproduction

fn criterion_5() -> Outcome {
    let Some(data) = mnist() else {
        return Skip("MNIST not found".into());
    };
    let base = RarityConfig {
        trials_per_digit: 5,
        drop_probability: 0.8,
        master_seed: SEED,
        ..RarityConfig::default()
    };

    let start = Instant::now();
    let smoke = rarity_experiment(
        &data.train,
        &data.test,
        &RarityConfig {
            digits: vec![0, 1],
            trials_per_digit: 2,
            ..base.clone()
        },
    )
    .unwrap();
    let smoke_secs = start.elapsed().as_secs_f64();
    let rare: f64 = smoke.summary.iter().map(|s| s.mean_rate_rare).sum();
    let common: f64 = smoke.summary.iter().filter_map(|s| s.mean_rate_common).sum();
    let smoke_ratio = rare / common;
    let smoke_ok = smoke_ratio > 1.0 && smoke_secs < 900.0;
    println!(
        "    smoke tier (digits 0,1 x 2 trials): pooled ratio {smoke_ratio:.3} (must exceed 1), {smoke_secs:.0}s (limit 900s): {}",
        if smoke_ok { "pass" } else { "fail" }
    );

    let start = Instant::now();
    let full = rarity_experiment(&data.train, &data.test, &base).unwrap();
    let full_secs = start.elapsed().as_secs_f64();
    let ratios: Vec<f64> = full.summary.iter().filter_map(|s| s.ratio).collect();
    for s in &full.summary {
        println!(
            "    digit {}: rare {:.4} common {} ratio {}",
            s.digit,
            s.mean_rate_rare,
            s.mean_rate_common.map_or("n/a".into(), |v| format!("{v:.4}")),
            s.ratio.map_or("undefined".into(), |v| format!("{v:.3}"))
        );
    }
    let above_one = ratios.iter().filter(|&&r| r > 1.0).count();
    let grand = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let full_ok = ratios.len() == 10 && above_one >= 9 && grand >= 1.3 && full_secs < 7200.0;
    verdict(
        smoke_ok && full_ok,
        format!(
            "full tier: {} models, {above_one}/10 digits with ratio > 1 (need 9), grand mean ratio {grand:.3} (need 1.3), {full_secs:.0}s (limit 7200s); smoke tier pooled ratio {smoke_ratio:.3}",
            full.models_trained
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Score-misclassification correlation

fn criterion_6() -> Outcome {
    let Some(data) = mnist() else {
        return Skip("MNIST not found".into());
    };
    let trained = default_model(data);
    let scored = score_dataset(&trained.model, &trained.matrix, &data.test).unwrap();
    let deciles = decile_analysis(&scored).unwrap();
    let rates: Vec<String> = (0..10).map(|g| format!("{:.4}", deciles.rate(g))).collect();
    println!("    decile misclassification rates: {}", rates.join(" "));
    let decile_ok = deciles.rate(0) >= 2.0 * deciles.rate(9);

    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let threshold = tukey_threshold(&scores, DEFAULT_K_FENCE).unwrap();
    let summary = outlier_misclassification(&scored, threshold.tau).unwrap();
    let outlier_ok = match summary.outlier_rate {
        Some(rate) if summary.outlier_count >= 20 => rate >= 2.0 * summary.overall_rate,
        _ => true,
    };
    verdict(
        decile_ok && outlier_ok,
        format!(
            "group 0 rate {:.4} vs 2 x group 9 rate {:.4}; tau {:.4} (test scores) flags {} outliers with rate {} vs 2 x overall {:.4}",
            deciles.rate(0),
            2.0 * deciles.rate(9),
            threshold.tau,
            summary.outlier_count,
            summary.outlier_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
            2.0 * summary.overall_rate
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Mitigation effect

fn criterion_7() -> Outcome {
    let Some(data) = mnist() else {
        return Skip("MNIST not found".into());
    };
    let mut improved = 0;
    for rep in 0..5u64 {
        let cfg = MitigationConfig {
            seed: SEED + rep,
            ..MitigationConfig::default()
        };
        let r = oversampling_mitigation(&data.train, &data.test, &cfg).unwrap();
        println!(
            "    seed {}: digit {} rate {:.4} -> {:.4} ({} of {} retained samples eligible, {} copies)",
            cfg.seed, cfg.digit, r.rate_before, r.rate_after, r.selected, r.retained_target, cfg.added_count
        );
        improved += usize::from(r.rate_after < r.rate_before);
    }
    verdict(improved >= 4, format!("rate decreased in {improved} of 5 repetitions (need 4)"))
}

// ---------------------------------------------------------------------------
// 8. Monitor behavior

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median seconds per `score` call at width `n`.
fn score_timing(n: usize) -> f64 {
    let mut rng = SplitMix64::new(n as u64);
    let matrix = random_matrix(&mut rng, n, 2);
    let patterns: Vec<ActivationPattern> = (0..64)
        .map(|_| ActivationPattern::from_bools(random_pattern(&mut rng, n, 0.5)).unwrap())
        .collect();
    let class = usize::from(matrix.column_total(0) == 0);
    let reps = (2_000_000 / n).max(20);
    let mut samples = Vec::new();
    for _ in 0..31 {
        let start = Instant::now();
        let mut acc = 0.0;
        for r in 0..reps {
            acc += score(std::hint::black_box(&patterns[r % 64]), &matrix, class).unwrap().value();
        }
        std::hint::black_box(acc);
        samples.push(start.elapsed().as_secs_f64() / reps as f64);
    }
    median(samples)
}

fn criterion_8() -> Outcome {
    let sizes = [100usize, 1000, 10_000];
    let times: Vec<f64> = sizes.iter().map(|&n| score_timing(n)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = sizes.iter().zip(&times).map(|(&n, &t)| ((n as f64).ln(), t.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let timing_ok = times[0] < 5e-6 && (0.5..=2.0).contains(&slope);
    let timing = format!(
        "score median {:.3}us at n=100 (limit 5us), log-log slope {slope:.2} over n=100,1000,10000 (must lie in [0.5, 2])",
        times[0] * 1e6
    );

    let Some(data) = mnist() else {
        return if timing_ok {
            Skip(format!("MNIST not found; {timing}"))
        } else {
            Fail(timing)
        };
    };
    let trained = default_model(data);
    let train_scores: Vec<f64> = score_dataset(&trained.model, &trained.matrix, &data.train)
        .unwrap()
        .iter()
        .map(|s| s.score)
        .collect();
    let fp = model_fingerprint(&trained.model.to_bytes());
    let monitor = ScoreMonitor::build(
        trained.matrix.clone(),
        &train_scores,
        ThresholdBasis::TrainingScores,
        DEFAULT_K_FENCE,
        fp,
    )
    .unwrap();
    // (count, misclassified) for accepted and referred samples.
    let mut tally = [(0usize, 0usize); 2];
    for (i, inf) in infer(&trained.model, &data.test).unwrap().iter().enumerate() {
        let d = monitor.assess_activations(&inf.penultimate_raw, inf.predicted).unwrap();
        let slot = &mut tally[usize::from(d.verdict == Verdict::Refer)];
        slot.0 += 1;
        slot.1 += usize::from(inf.predicted != data.test.class_labels()[i]);
    }
    let rate = |(n, w): (usize, usize)| if n == 0 { 0.0 } else { w as f64 / n as f64 };
    let (accept, refer) = (rate(tally[0]), rate(tally[1]));
    let monitor_ok = tally[1].0 < 20 || refer >= 1.5 * accept;
    verdict(
        timing_ok && monitor_ok,
        format!(
            "tau {:.4} (training scores): {} referred with rate {refer:.4} vs 1.5 x accepted rate {:.4} ({} accepted); {timing}",
            monitor.threshold().tau,
            tally[1].0,
            1.5 * accept,
            tally[0].0
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Format fidelity

fn rejects<T: std::fmt::Debug>(f: impl FnOnce() -> rarity_core::Result<T>) -> Result<(), String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Err(Error::Format(_))) => Ok(()),
        Ok(other) => Err(format!("{other:?}")),
        Err(_) => Err("panic".into()),
    }
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // IDX: bitwise round trip of the real files when available, synthetic otherwise.
    let (images_bytes, labels_bytes) = match mnist() {
        Some(data) => (
            std::fs::read(data.dir.join(Split::Test.images_file())).unwrap(),
            std::fs::read(data.dir.join(Split::Test.labels_file())).unwrap(),
        ),
        None => {
            let mut rng = SplitMix64::new(9);
            let px = (0..50 * 784).map(|_| rng.below(256) as u8).collect();
            let labels: Vec<u8> = (0..50).map(|_| rng.below(10) as u8).collect();
            (IdxImages::new(50, 28, 28, px).unwrap().to_bytes(), idx::labels_to_bytes(&labels))
        }
    };
    let images = IdxImages::from_bytes(&images_bytes).unwrap();
    check("idx images round trip", images.to_bytes() == images_bytes);
    check(
        "idx labels round trip",
        idx::labels_to_bytes(&idx::labels_from_bytes(&labels_bytes).unwrap()) == labels_bytes,
    );
    let gz = tmp.path().join("images.gz");
    write_idx_images(&images, &gz).unwrap();
    check("idx gzip round trip", read_idx_images(&gz).unwrap() == images);
    let plain = tmp.path().join("labels");
    std::fs::write(&plain, &labels_bytes).unwrap();
    check("idx labels file", idx::labels_to_bytes(&read_idx_labels(&plain).unwrap()) == labels_bytes);

    // Model, matrix and monitor from a small trained model.
    let model = FeedforwardModel::init(&[LayerSpec::relu(6, 5), LayerSpec::softmax(5, 2)], 4).unwrap();
    let model_bytes = model.to_bytes();
    check(
        "model round trip",
        FeedforwardModel::from_bytes(&model_bytes).unwrap().to_bytes() == model_bytes,
    );
    let model_path = tmp.path().join("model.bin");
    model.save(&model_path).unwrap();
    check("model file", std::fs::read(&model_path).unwrap() == model_bytes);
    check("model load", FeedforwardModel::load(&model_path).unwrap() == model);

    let mut rng = SplitMix64::new(99);
    let matrix = random_matrix(&mut rng, 5, 2);
    let matrix_text = matrix.to_text();
    check(
        "matrix round trip",
        CumulativeActivationMatrix::from_text(&matrix_text).unwrap().to_text() == matrix_text,
    );
    let matrix_path = tmp.path().join("matrix.txt");
    matrix.save(&matrix_path).unwrap();
    check("matrix load", CumulativeActivationMatrix::load(&matrix_path).unwrap() == matrix);

    let reference: Vec<f64> = (0..101).map(|_| rng.next_f64() / 3.0).collect();
    let monitor = ScoreMonitor::build(
        matrix,
        &reference,
        ThresholdBasis::TestScores,
        1.5,
        model_fingerprint(&model_bytes),
    )
    .unwrap();
    let monitor_text = monitor.to_text();
    let reloaded = ScoreMonitor::from_text(&monitor_text).unwrap();
    check("monitor round trip", reloaded.to_text() == monitor_text && reloaded == monitor);
    check(
        "monitor tau bits",
        reloaded.threshold().tau.to_bits() == monitor.threshold().tau.to_bits(),
    );

    // Malformed corpus: every case must be a format error, never a panic.
    let mut corpus: Vec<(String, Result<(), String>)> = Vec::new();
    let mut wrong = images_bytes[..64].to_vec();
    wrong[3] = 0x04;
    corpus.push(("idx wrong magic".into(), rejects(|| IdxImages::from_bytes(&wrong))));
    corpus.push(("idx labels as images".into(), rejects(|| IdxImages::from_bytes(&labels_bytes))));
    corpus.push(("idx images as labels".into(), rejects(|| idx::labels_from_bytes(&images_bytes[..100]))));
    for cut in [0, 3, 8, 15, 16, 17, 1000] {
        corpus.push((format!("idx images cut at {cut}"), rejects(|| IdxImages::from_bytes(&images_bytes[..cut]))));
    }
    for cut in [0, 4, 7, 9] {
        corpus.push((format!("idx labels cut at {cut}"), rejects(|| idx::labels_from_bytes(&labels_bytes[..cut]))));
    }
    let mut bad_label = labels_bytes[..20].to_vec();
    bad_label[4..8].copy_from_slice(&12u32.to_be_bytes());
    bad_label[10] = 10;
    corpus.push(("idx label above 9".into(), rejects(|| idx::labels_from_bytes(&bad_label))));

    let mut skew = model_bytes.clone();
    skew[7] = b'2';
    corpus.push(("model version skew".into(), rejects(|| FeedforwardModel::from_bytes(&skew))));
    corpus.push(("model wrong magic".into(), rejects(|| FeedforwardModel::from_bytes(&images_bytes[..200]))));
    for cut in (0..model_bytes.len()).step_by(7) {
        corpus.push((format!("model cut at {cut}"), rejects(|| FeedforwardModel::from_bytes(&model_bytes[..cut]))));
    }
    let mut trailing = model_bytes.clone();
    trailing.push(0);
    corpus.push(("model trailing byte".into(), rejects(|| FeedforwardModel::from_bytes(&trailing))));

    let text_cases = [
        ("matrix version skew", matrix_text.replace("v1", "v2")),
        ("matrix wrong header", matrix_text.replace("RARITY-MATRIX", "RARITY-MATRICES")),
        ("matrix truncated", matrix_text[..matrix_text.len() / 2].to_string()),
        ("matrix missing newline", matrix_text.trim_end().to_string()),
    ];
    for (name, text) in text_cases {
        corpus.push((name.into(), rejects(|| CumulativeActivationMatrix::from_text(&text))));
    }
    let monitor_cases = [
        ("monitor version skew", monitor_text.replace("v1", "v9")),
        ("monitor truncated", monitor_text[..monitor_text.len() - 10].to_string()),
        (
            "monitor missing fingerprint",
            monitor_text.lines().filter(|l| !l.starts_with("MODEL")).map(|l| format!("{l}\n")).collect(),
        ),
        ("monitor unknown basis", monitor_text.replace("test_scores", "val_scores")),
    ];
    for (name, text) in monitor_cases {
        corpus.push((name.into(), rejects(|| ScoreMonitor::from_text(&text))));
    }
    let not_utf8 = tmp.path().join("binary.txt");
    std::fs::write(&not_utf8, &model_bytes).unwrap();
    corpus.push(("monitor from binary file".into(), rejects(|| ScoreMonitor::load(&not_utf8))));

    let bad: Vec<String> = corpus
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    verdict(
        failures.is_empty() && bad.is_empty(),
        format!(
            "round trips: {} failures{}; malformed corpus: {} cases, {} not rejected as format errors{}",
            failures.len(),
            failures.first().map(|f| format!(" ({f})")).unwrap_or_default(),
            corpus.len(),
            bad.len(),
            bad.first().map(|f| format!(" ({f})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "oracle equivalence", criterion_1),
        (2, "score soundness", criterion_2),
        (3, "gradient correctness", criterion_3),
        (4, "parity model quality", criterion_4),
        (5, "subclass rarity reproduction", criterion_5),
        (6, "score-misclassification correlation", criterion_6),
        (7, "mitigation effect", criterion_7),
        (8, "monitor behavior", criterion_8),
        (9, "format fidelity", criterion_9),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut results = BTreeMap::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => ("FAIL", d),
            Skip(d) => ("SKIP", d),
        };
        println!("criterion {id} [{name}]: {tag} ({detail}) [{secs:.1}s]");
        results.insert(id, tag);
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, &t)| t == "FAIL")
        .map(|(id, _)| id.to_string())
        .collect();
    let count = |tag: &str| results.values().filter(|&&t| t == tag).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        count("PASS"),
        count("FAIL"),
        count("SKIP")
    );
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
