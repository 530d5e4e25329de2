//! CSV artifacts. Reals are written with Rust's shortest round-trip
//! formatting, so parsing a column back yields the identical `f64`.

use std::path::Path;

use csv::{Reader, Writer};

use super::{DecileReport, DigitRatio, ExtremesReport, OutlierSummary, RarityTrialResult};
use crate::activation::{ScoredSample, TukeyThreshold};
use crate::error::{Error, Result};

pub const SCORE_COLUMNS: [&str; 5] = ["sample_id", "true_label", "predicted_label", "subclass", "score"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(format!("{}: {other:?}", path.display())),
    }
}

fn writer(path: &Path) -> Result<Writer<std::fs::File>> {
    Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the score table in ascending sample-id order.
pub fn write_scores(path: impl AsRef<Path>, scored: &[ScoredSample]) -> Result<()> {
    let mut rows: Vec<&ScoredSample> = scored.iter().collect();
    rows.sort_by_key(|s| s.sample_id);
    write_rows(
        path.as_ref(),
        &SCORE_COLUMNS,
        rows.into_iter().map(|s| {
            vec![
                s.sample_id.to_string(),
                opt(s.true_label),
                s.predicted.to_string(),
                opt(s.subclass),
                s.score.to_string(),
            ]
        }),
    )
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredSample>> {
    let path = path.as_ref();
    let mut reader = Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(SCORE_COLUMNS) {
        return Err(Error::format(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            SCORE_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let bad = |col: &str| Error::format(format!("{}: row {}: bad {col}", path.display(), line + 1));
        let field = |i: usize| record.get(i).unwrap_or("");
        let optional = |i: usize, col: &str| -> Result<Option<u64>> {
            match field(i) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(col)),
            }
        };
        let subclass = optional(3, "subclass")?
            .map(|v| u8::try_from(v).map_err(|_| bad("subclass")))
            .transpose()?;
        let score: f64 = field(4).parse().map_err(|_| bad("score"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad("score"));
        }
        out.push(ScoredSample {
            sample_id: field(0).parse().map_err(|_| bad("sample_id"))?,
            true_label: optional(1, "true_label")?.map(|v| v as usize),
            predicted: field(2).parse().map_err(|_| bad("predicted_label"))?,
            subclass,
            score,
        });
    }
    Ok(out)
}

pub fn write_trials(path: impl AsRef<Path>, trials: &[RarityTrialResult]) -> Result<()> {
    let mut header = vec!["digit".to_string(), "trial".into(), "rarefied_digit_rate".into()];
    header.extend((0..10).map(|d| format!("rate_{d}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path.as_ref(),
        &header,
        trials.iter().map(|t| {
            let mut row = vec![t.digit.to_string(), t.trial.to_string(), t.rate_rare.to_string()];
            row.extend((0..10u8).map(|d| {
                if d == t.digit {
                    t.rate_rare.to_string()
                } else {
                    opt(t.rate_common_per_digit.get(&d))
                }
            }));
            row
        }),
    )
}

pub fn write_ratios(path: impl AsRef<Path>, summary: &[DigitRatio]) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["digit", "mean_rate_rare", "mean_rate_common", "ratio"],
        summary.iter().map(|s| {
            vec![
                s.digit.to_string(),
                s.mean_rate_rare.to_string(),
                opt(s.mean_rate_common),
                opt(s.ratio),
            ]
        }),
    )
}

pub fn write_deciles(path: impl AsRef<Path>, report: &DecileReport) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["group", "count", "misclassified", "rate"],
        report.per_group.iter().enumerate().map(|(g, &(count, wrong))| {
            vec![
                g.to_string(),
                count.to_string(),
                wrong.to_string(),
                report.rate(g).to_string(),
            ]
        }),
    )
}

pub fn write_outliers(path: impl AsRef<Path>, summary: &OutlierSummary, threshold: &TukeyThreshold) -> Result<()> {
    write_rows(
        path.as_ref(),
        &[
            "overall_rate",
            "outlier_rate",
            "outlier_count",
            "outlier_misclassified",
            "tau",
            "q1",
            "q3",
            "k_fence",
        ],
        [vec![
            summary.overall_rate.to_string(),
            opt(summary.outlier_rate),
            summary.outlier_count.to_string(),
            summary.outlier_misclassified.to_string(),
            threshold.tau.to_string(),
            threshold.q1.to_string(),
            threshold.q3.to_string(),
            threshold.k_fence.to_string(),
        ]],
    )
}

/// One row per selected sample: `class,kind,rank,sample_id,score`.
pub fn write_extremes(path: impl AsRef<Path>, reports: &[ExtremesReport], scored: &[ScoredSample]) -> Result<()> {
    let score_of = |id: u64| {
        scored
            .iter()
            .find(|s| s.sample_id == id)
            .map(|s| s.score.to_string())
            .unwrap_or_default()
    };
    let mut rows = Vec::new();
    for r in reports {
        for (kind, ids) in [("lowest", &r.lowest), ("highest", &r.highest)] {
            for (rank, &id) in ids.iter().enumerate() {
                rows.push(vec![
                    r.class_id.to_string(),
                    kind.to_string(),
                    rank.to_string(),
                    id.to_string(),
                    score_of(id),
                ]);
            }
        }
    }
    write_rows(path.as_ref(), &["class", "kind", "rank", "sample_id", "score"], rows)
}
