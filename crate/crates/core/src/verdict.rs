use serde::Serialize;

/// Outcome of an oscillation analysis.
///
/// `Certified*` verdicts come only from the criteria engine after every
/// hypothesis of a criterion was verified. `Numeric*` verdicts rest on
/// integrated trajectories and always name the finite horizon they cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum OscillationVerdict {
    CertifiedOscillatory,
    CertifiedNonoscillatory,
    /// Every solution vanishes somewhere in `[a, b]`.
    CertifiedOscillatoryOn { a: f64, b: f64 },
    NumericOscillatory { horizon: f64 },
    NumericNonoscillatory { horizon: f64 },
    Inconclusive,
}

impl OscillationVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(
            self,
            OscillationVerdict::CertifiedOscillatory
                | OscillationVerdict::CertifiedNonoscillatory
                | OscillationVerdict::CertifiedOscillatoryOn { .. }
        )
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, OscillationVerdict::Inconclusive)
    }
}
