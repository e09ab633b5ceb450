//! Verdict plumbing shared by the assumption audits.
//!
//! A numerical audit can only sample, so every check reports one of three
//! outcomes together with the evidence that produced it. `Inconclusive` is
//! reserved for genuinely ambiguous data (for example a non-monotone trend
//! where a limit was expected); it is never used to paper over a clear
//! failure.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// One sampled quantity backing a verdict: `label` names the quantity,
/// `index` is the sample coordinate (an eta, a time, a point s, ...), and
/// `value` is what was measured there.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRow {
    pub label: String,
    pub index: f64,
    pub value: f64,
}

impl EvidenceRow {
    pub fn new(label: impl Into<String>, index: f64, value: f64) -> Self {
        EvidenceRow {
            label: label.into(),
            index,
            value,
        }
    }
}

/// Outcome of one assumption audit. Reproducible: a pure function of its
/// inputs, so rerunning the audit reproduces the table bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVerdict {
    /// Which condition was audited ("A1" .. "A5", "tail-sup", "tail-vanish",
    /// "mu-floor", "sufficient").
    pub condition: String,
    pub verdict: Verdict,
    /// Sampled quantities; never empty.
    pub evidence: Vec<EvidenceRow>,
    /// Thresholds that were in force, by name.
    pub thresholds: Vec<(String, f64)>,
    /// Free-form remarks: which trend was non-monotone, which probe failed...
    pub notes: Vec<String>,
}

impl ConditionVerdict {
    pub fn new(condition: impl Into<String>, verdict: Verdict) -> Self {
        ConditionVerdict {
            condition: condition.into(),
            verdict,
            evidence: Vec::new(),
            thresholds: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_threshold(mut self, name: &str, value: f64) -> Self {
        self.thresholds.push((name.to_string(), value));
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

/// Shared operationalization of "the sequence tends to zero": over the tail
/// (last half) of `values` the sequence must not increase, and the final
/// entry must sit below `tol`. Sequences that already sit entirely below
/// `tol` pass regardless of trend (they are noise around zero). A
/// non-monotone tail that is not below threshold is inconclusive rather than
/// a clean fail.
///
/// Returns the verdict and an optional note describing what was seen.
pub fn limit_trend(values: &[f64], tol: f64) -> (Verdict, Option<String>) {
    vanishing_trend(values, tol, 0.0)
}

/// Like [`limit_trend`], with a second acceptance route for sequences whose
/// limit is zero but whose final probe is still far from it in absolute
/// terms (e.g. sup-differences shrinking linearly in the perturbation
/// level): a nonincreasing tail whose final entry has dropped below
/// `ratio_tol` times the first entry counts as vanishing. `ratio_tol = 0`
/// disables that route.
pub fn vanishing_trend(values: &[f64], tol: f64, ratio_tol: f64) -> (Verdict, Option<String>) {
    assert!(!values.is_empty(), "vanishing_trend needs at least one sample");
    let tail_start = values.len() / 2;
    let tail = &values[tail_start..];
    let last = *tail.last().unwrap();
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // Slack absorbs rounding on an otherwise flat tail.
    let slack = 1e-12 * (1.0 + max_abs);

    if tail.iter().all(|v| v.abs() < tol) {
        return (Verdict::Pass, None);
    }
    let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0] + slack);
    let nondecreasing = tail.windows(2).all(|w| w[1] >= w[0] - slack);
    let ratio_ok = ratio_tol > 0.0 && last <= ratio_tol * values[0].abs();
    if nonincreasing && !nondecreasing && (last < tol || ratio_ok) {
        let note = ratio_ok.then(|| {
            format!(
                "accepted by decay ratio: final {last:.3e} <= {ratio_tol} * first {:.3e}",
                values[0]
            )
        });
        (Verdict::Pass, note)
    } else if nondecreasing {
        // Flat or growing tail: no limit toward zero. Checked before the
        // decreasing branch so a flat tail lands here.
        (
            Verdict::Fail,
            Some(format!(
                "tail does not decrease (final value {last:.3e})"
            )),
        )
    } else if nonincreasing {
        // Decreasing but still above threshold at the final sample.
        (
            Verdict::Fail,
            Some(format!(
                "tail decreases but final value {last:.3e} >= tol {tol:.3e}"
            )),
        )
    } else {
        (
            Verdict::Inconclusive,
            Some("tail is non-monotone; cannot certify a limit".to_string()),
        )
    }
}

/// Least-squares slope of ys against xs; 0 when xs has no spread.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope needs at least two points");
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - x_mean) * (y - y_mean);
        den += (x - x_mean) * (x - x_mean);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
