use serde::{Deserialize, Serialize};

/// Binary outcome of classifying one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn is_attack(self) -> bool {
        matches!(self, Label::Attack)
    }

    /// Lowercase wire name used in verdict and rule files.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Attack => "attack",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "normal" => Some(Label::Normal),
            "attack" => Some(Label::Attack),
            _ => None,
        }
    }
}

/// Classification outcome with its anomaly score.
///
/// The label and score always agree: `Normal` iff `score <= 0`. Scores come
/// from the detector that produced the verdict (threshold margin for the
/// mixture classifier, range violation for the n-gram detector) and are not
/// comparable across detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub score: f64,
}

impl Verdict {
    /// Builds the verdict implied by a score: normal iff `score <= 0`.
    ///
    /// NaN never occurs in practice (scores are differences of finite
    /// statistics); treat it defensively as an attack.
    pub fn from_score(score: f64) -> Verdict {
        let label = if score <= 0.0 {
            Label::Normal
        } else {
            Label::Attack
        };
        Verdict { label, score }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trips_through_wire_name() {
        for label in [Label::Normal, Label::Attack] {
            assert_eq!(Label::parse(label.as_str()), Some(label));
        }
        assert_eq!(Label::parse("Attack"), None);
        assert_eq!(Label::parse(""), None);
    }

    #[test]
    fn score_sign_decides_label() {
        assert_eq!(Verdict::from_score(-1.5).label, Label::Normal);
        assert_eq!(Verdict::from_score(0.0).label, Label::Normal);
        assert_eq!(Verdict::from_score(1e-9).label, Label::Attack);
        assert_eq!(Verdict::from_score(f64::INFINITY).label, Label::Attack);
        assert_eq!(Verdict::from_score(f64::NEG_INFINITY).label, Label::Normal);
        assert_eq!(Verdict::from_score(f64::NAN).label, Label::Attack);
    }
}
