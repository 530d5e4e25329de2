use std::fmt::Write as _;
use std::path::Path;

use super::ActivationPattern;
use crate::error::{Error, Result};

pub(crate) const MATRIX_HEADER: &str = "RARITY-MATRIX v1";

/// Per-class counts of how often each penultimate neuron fired over a
/// training set: an `n x k` table plus the number of samples seen per class.
///
/// Immutable once built; use [`MatrixBuilder`] or [`CumulativeActivationMatrix::build`]
/// to construct and [`CumulativeActivationMatrix::merge`] to combine partial builds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeActivationMatrix {
    neurons: usize,
    classes: usize,
    /// Row-major, `counts[i * classes + j]`.
    counts: Vec<u64>,
    class_samples: Vec<u64>,
    class_names: Vec<String>,
    column_totals: Vec<u64>,
}

fn default_class_names(k: usize) -> Vec<String> {
    (0..k).map(|j| j.to_string()).collect()
}

fn validate_class_names(names: &[String], k: usize) -> Result<()> {
    if names.len() != k {
        return Err(Error::DimensionMismatch {
            what: "class name count",
            expected: k,
            actual: names.len(),
        });
    }
    for name in names {
        if name.is_empty() || name.contains(',') || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "class name {name:?} must be non-empty without commas or whitespace"
            )));
        }
    }
    Ok(())
}

impl CumulativeActivationMatrix {
    /// Assembles a matrix from raw parts, checking every invariant.
    /// `counts` is row-major (`n` rows of `k` entries).
    pub fn from_counts(
        n: usize,
        counts: Vec<u64>,
        class_samples: Vec<u64>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let k = class_samples.len();
        if n == 0 || k == 0 {
            return Err(Error::invalid("matrix needs at least one neuron and one class"));
        }
        if counts.len() != n * k {
            return Err(Error::DimensionMismatch {
                what: "matrix entry count",
                expected: n * k,
                actual: counts.len(),
            });
        }
        let class_names = class_names.unwrap_or_else(|| default_class_names(k));
        validate_class_names(&class_names, k)?;

        let mut column_totals = vec![0u64; k];
        for (idx, &c) in counts.iter().enumerate() {
            let (i, j) = (idx / k, idx % k);
            if c > class_samples[j] {
                return Err(Error::format(format!(
                    "count[{i}][{j}] = {c} exceeds the {} samples seen for class {j}",
                    class_samples[j]
                )));
            }
            column_totals[j] += c;
        }
        Ok(Self {
            neurons: n,
            classes: k,
            counts,
            class_samples,
            class_names,
            column_totals,
        })
    }

    /// All-zero matrix; the identity element of [`merge`](Self::merge).
    pub fn zeros(n: usize, k: usize) -> Result<Self> {
        Self::from_counts(n, vec![0; n * k], vec![0; k], None)
    }

    /// Counts one stream of `(pattern, class label)` pairs.
    pub fn build<'a, I>(samples: I, n: usize, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a ActivationPattern, usize)>,
    {
        let mut builder = MatrixBuilder::new(n, k)?;
        for (pattern, label) in samples {
            builder.push(pattern, label)?;
        }
        builder.finish()
    }

    /// Elementwise sum of two matrices over the same neurons and classes.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.neurons != other.neurons {
            return Err(Error::DimensionMismatch {
                what: "matrix neuron count",
                expected: self.neurons,
                actual: other.neurons,
            });
        }
        if self.classes != other.classes {
            return Err(Error::DimensionMismatch {
                what: "matrix class count",
                expected: self.classes,
                actual: other.classes,
            });
        }
        if self.class_names != other.class_names {
            return Err(Error::invalid(format!(
                "class names differ: {:?} vs {:?}",
                self.class_names, other.class_names
            )));
        }
        let sum = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            neurons: self.neurons,
            classes: self.classes,
            counts: sum(&self.counts, &other.counts),
            class_samples: sum(&self.class_samples, &other.class_samples),
            class_names: self.class_names.clone(),
            column_totals: sum(&self.column_totals, &other.column_totals),
        })
    }

    /// Same counts under new class labels.
    pub fn with_class_names(self, names: Vec<String>) -> Result<Self> {
        validate_class_names(&names, self.classes)?;
        Ok(Self {
            class_names: names,
            ..self
        })
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, neuron: usize, class: usize) -> u64 {
        self.counts[neuron * self.classes + class]
    }

    pub fn column(&self, class: usize) -> Vec<u64> {
        (0..self.neurons).map(|i| self.count(i, class)).collect()
    }

    pub fn column_total(&self, class: usize) -> u64 {
        self.column_totals[class]
    }

    pub fn class_samples(&self) -> &[u64] {
        &self.class_samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Serializes to the versioned `RARITY-MATRIX v1` text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>();
        let _ = writeln!(out, "{MATRIX_HEADER}");
        let _ = writeln!(out, "n={} k={}", self.neurons, self.classes);
        let _ = writeln!(out, "classes={}", self.class_names.join(","));
        let _ = writeln!(out, "class_samples={}", join(&self.class_samples).join(","));
        for row in self.counts.chunks(self.classes) {
            let _ = writeln!(out, "{}", join(row).join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let matrix = Self::parse_lines(&mut lines)?;
        if lines.next().is_some() {
            return Err(Error::format("trailing content after matrix rows"));
        }
        Ok(matrix)
    }

    /// Parses one matrix block from `\n`-terminated lines, leaving the
    /// iterator positioned after the last row.
    pub(crate) fn parse_lines<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = &'a str>,
    {
        let mut next = |what: &str| -> Result<&'a str> {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(format!("matrix truncated: missing {what}")))?;
            line.strip_suffix('\n')
                .ok_or_else(|| Error::format(format!("matrix {what} line is not newline-terminated")))
        };

        let header = next("header")?;
        if header != MATRIX_HEADER {
            return Err(Error::format(format!(
                "unsupported matrix header {header:?}, expected {MATRIX_HEADER:?}"
            )));
        }

        let dims = next("dimensions")?;
        let (n, k) = dims
            .strip_prefix("n=")
            .and_then(|rest| rest.split_once(" k="))
            .and_then(|(n, k)| Some((parse_uint(n)? as usize, parse_uint(k)? as usize)))
            .ok_or_else(|| Error::format(format!("malformed dimension line {dims:?}")))?;
        if n == 0 || k == 0 {
            return Err(Error::format("matrix dimensions must be positive"));
        }

        let classes = next("classes")?;
        let names: Vec<String> = classes
            .strip_prefix("classes=")
            .ok_or_else(|| Error::format(format!("malformed classes line {classes:?}")))?
            .split(',')
            .map(str::to_owned)
            .collect();
        if names.len() != k {
            return Err(Error::format(format!(
                "classes line lists {} names for k={k}",
                names.len()
            )));
        }

        let samples_line = next("class_samples")?;
        let class_samples = samples_line
            .strip_prefix("class_samples=")
            .ok_or_else(|| Error::format(format!("malformed class_samples line {samples_line:?}")))?
            .split(',')
            .map(|tok| {
                parse_uint(tok).ok_or_else(|| Error::format(format!("bad class sample count {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if class_samples.len() != k {
            return Err(Error::format(format!(
                "class_samples lists {} counts for k={k}",
                class_samples.len()
            )));
        }

        let mut counts = Vec::with_capacity(n * k);
        for i in 0..n {
            let row = next("row")?;
            let before = counts.len();
            for tok in row.split(' ') {
                counts.push(
                    parse_uint(tok)
                        .ok_or_else(|| Error::format(format!("bad count {tok:?} in row {i}")))?,
                );
            }
            if counts.len() - before != k {
                return Err(Error::format(format!(
                    "row {i} has {} entries, expected {k}",
                    counts.len() - before
                )));
            }
        }

        Self::from_counts(n, counts, class_samples, Some(names))
            .map_err(|e| Error::format(format!("matrix fails validation: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&crate::error::read_text(path)?)
    }
}

/// Plain decimal digits only; `u64::from_str` would also take a leading `+`.
fn parse_uint(tok: &str) -> Option<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

/// Mutable accumulator behind [`CumulativeActivationMatrix::build`].
#[derive(Debug, Clone)]
pub struct MatrixBuilder {
    neurons: usize,
    classes: usize,
    counts: Vec<u64>,
    class_samples: Vec<u64>,
    class_names: Option<Vec<String>>,
}

impl MatrixBuilder {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("matrix needs at least one neuron and one class"));
        }
        Ok(Self {
            neurons: n,
            classes: k,
            counts: vec![0; n * k],
            class_samples: vec![0; k],
            class_names: None,
        })
    }

    pub fn class_names(mut self, names: Vec<String>) -> Result<Self> {
        validate_class_names(&names, self.classes)?;
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn push(&mut self, pattern: &ActivationPattern, label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.classes
            )));
        }
        if pattern.len() != self.neurons {
            return Err(Error::DimensionMismatch {
                what: "activation pattern length",
                expected: self.neurons,
                actual: pattern.len(),
            });
        }
        for (i, _) in pattern.bits().iter().enumerate().filter(|(_, &on)| on) {
            self.counts[i * self.classes + label] += 1;
        }
        self.class_samples[label] += 1;
        Ok(())
    }

    pub fn samples_seen(&self) -> u64 {
        self.class_samples.iter().sum()
    }

    /// Fails if nothing was pushed.
    pub fn finish(self) -> Result<CumulativeActivationMatrix> {
        if self.samples_seen() == 0 {
            return Err(Error::invalid("cannot build an activation matrix from an empty stream"));
        }
        CumulativeActivationMatrix::from_counts(
            self.neurons,
            self.counts,
            self.class_samples,
            self.class_names,
        )
    }
}
