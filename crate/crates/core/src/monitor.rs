//! Run-time trust monitor.
//!
//! A [`ScoreMonitor`] pairs the training-time activation matrix with a Tukey
//! threshold over reference commonality scores. Each incoming prediction is
//! scored and either accepted or referred for a second opinion.
//!
//! File layout: the `RARITY-MATRIX v1` block, then
//!
//! ```text
//! THRESHOLD tau=<hex> q1=<hex> q3=<hex> k_fence=<hex> basis=<training_scores|test_scores>
//! MODEL fp=<16 lowercase hex digits>
//! ```
//!
//! with reals written as hexadecimal floats so they survive bit-exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::activation::{
    binarize, score, tukey_threshold, ActivationPattern, CommonalityScore, CumulativeActivationMatrix,
    TukeyThreshold,
};
use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_hex};

/// Which scores the threshold was fitted on. Recorded for provenance only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdBasis {
    #[default]
    TrainingScores,
    TestScores,
}

impl fmt::Display for ThresholdBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdBasis::TrainingScores => "training_scores",
            ThresholdBasis::TestScores => "test_scores",
        })
    }
}

impl FromStr for ThresholdBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "training_scores" => Ok(ThresholdBasis::TrainingScores),
            "test_scores" => Ok(ThresholdBasis::TestScores),
            other => Err(Error::invalid(format!(
                "unknown threshold basis {other:?}, expected training_scores or test_scores"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Refer,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Refer => "refer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustDecision {
    /// `None` when the predicted class has an all-zero activation column; such
    /// predictions are always referred.
    pub score: Option<CommonalityScore>,
    pub verdict: Verdict,
    pub tau_used: f64,
}

/// 64-bit FNV-1a over the model file bytes.
pub fn model_fingerprint(model_bytes: &[u8]) -> u64 {
    model_bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMonitor {
    matrix: CumulativeActivationMatrix,
    threshold: TukeyThreshold,
    basis: ThresholdBasis,
    model_fingerprint: u64,
}

impl ScoreMonitor {
    pub fn build(
        matrix: CumulativeActivationMatrix,
        reference_scores: &[f64],
        basis: ThresholdBasis,
        k_fence: f64,
        model_fingerprint: u64,
    ) -> Result<Self> {
        let threshold = tukey_threshold(reference_scores, k_fence)?;
        Ok(Self {
            matrix,
            threshold,
            basis,
            model_fingerprint,
        })
    }

    pub fn matrix(&self) -> &CumulativeActivationMatrix {
        &self.matrix
    }

    pub fn threshold(&self) -> &TukeyThreshold {
        &self.threshold
    }

    pub fn basis(&self) -> ThresholdBasis {
        self.basis
    }

    pub fn model_fingerprint(&self) -> u64 {
        self.model_fingerprint
    }

    /// Scores a prediction and refers it when the score is strictly below tau.
    ///
    /// Pattern-length and class-range errors are returned as errors. An
    /// undefined score is not an error here: it yields a referral with no score.
    pub fn assess(&self, pattern: &ActivationPattern, predicted_class: usize) -> Result<TrustDecision> {
        let tau = self.threshold.tau;
        match score(pattern, &self.matrix, predicted_class) {
            Ok(s) => Ok(TrustDecision {
                score: Some(s),
                verdict: if s.value() < tau { Verdict::Refer } else { Verdict::Accept },
                tau_used: tau,
            }),
            Err(Error::UndefinedScore { .. }) => Ok(TrustDecision {
                score: None,
                verdict: Verdict::Refer,
                tau_used: tau,
            }),
            Err(e) => Err(e),
        }
    }

    /// Binarizes raw penultimate outputs, then assesses.
    pub fn assess_activations(&self, raw: &[f64], predicted_class: usize) -> Result<TrustDecision> {
        self.assess(&binarize(raw)?, predicted_class)
    }

    /// Fails unless `model_bytes` hash to the fingerprint this monitor was built for.
    pub fn verify_model(&self, model_bytes: &[u8]) -> Result<()> {
        let actual = model_fingerprint(model_bytes);
        if actual != self.model_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.model_fingerprint,
                actual,
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let t = &self.threshold;
        format!(
            "{}THRESHOLD tau={} q1={} q3={} k_fence={} basis={}\nMODEL fp={:016x}\n",
            self.matrix.to_text(),
            format_hex(t.tau),
            format_hex(t.q1),
            format_hex(t.q3),
            format_hex(t.k_fence),
            self.basis,
            self.model_fingerprint
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let matrix = CumulativeActivationMatrix::parse_lines(&mut lines)?;

        let mut next = |what: &str| -> Result<&str> {
            lines
                .next()
                .and_then(|l| l.strip_suffix('\n'))
                .ok_or_else(|| Error::format(format!("monitor file missing {what} line")))
        };

        let threshold_line = next("THRESHOLD")?;
        let fields = threshold_line
            .strip_prefix("THRESHOLD ")
            .ok_or_else(|| Error::format(format!("expected THRESHOLD line, got {threshold_line:?}")))?;
        let mut values = fields.split(' ');
        let mut field = |key: &str| -> Result<&str> {
            values
                .next()
                .and_then(|kv| kv.strip_prefix(key))
                .and_then(|kv| kv.strip_prefix('='))
                .ok_or_else(|| Error::format(format!("THRESHOLD line missing {key}")))
        };
        let tau = parse_hex(field("tau")?)?;
        let q1 = parse_hex(field("q1")?)?;
        let q3 = parse_hex(field("q3")?)?;
        let k_fence = parse_hex(field("k_fence")?)?;
        let basis: ThresholdBasis = field("basis")?
            .parse()
            .map_err(|e: Error| Error::format(e.to_string()))?;
        if values.next().is_some() {
            return Err(Error::format("unexpected fields after basis on THRESHOLD line"));
        }

        let model_line = next("MODEL")?;
        let fp = model_line
            .strip_prefix("MODEL fp=")
            .filter(|fp| fp.len() == 16 && fp.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
            .ok_or_else(|| Error::format(format!("malformed or absent model fingerprint {model_line:?}")))?;
        let model_fingerprint = u64::from_str_radix(fp, 16).expect("validated hex");

        if lines.next().is_some() {
            return Err(Error::format("trailing content after MODEL line"));
        }

        let threshold = TukeyThreshold { tau, q1, q3, k_fence };
        let consistent = [tau, q1, q3, k_fence].iter().all(|v| v.is_finite())
            && k_fence > 0.0
            && q1 <= q3
            && (q1 - k_fence * (q3 - q1)).to_bits() == tau.to_bits();
        if !consistent {
            return Err(Error::format(format!("inconsistent threshold {threshold:?}")));
        }
        Ok(Self {
            matrix,
            threshold,
            basis,
            model_fingerprint,
        })
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
