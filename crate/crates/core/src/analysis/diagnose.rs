//! Rule-based rhythm suggestions for the viewer's middle box.
//!
//! Suggestions are advisory text; they are never written as annotations.

use serde::{Deserialize, Serialize};

use super::features::RhythmFeatures;

/// Codes the rules can emit, independent of any dataset vocabulary.
pub const BUILTIN_RHYTHM_CODES: [&str; 5] = ["SB", "STACH", "IRREG", "NORHY", "INSUF"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoSuggestion {
    pub code: String,
    pub display_text: String,
    pub rule_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisThresholds {
    pub bradycardia_below_bpm: f64,
    pub tachycardia_above_bpm: f64,
    pub irregular_rr_cv: f64,
    pub irregular_min_beats: usize,
}

impl Default for DiagnosisThresholds {
    fn default() -> Self {
        DiagnosisThresholds {
            bradycardia_below_bpm: 60.0,
            tachycardia_above_bpm: 100.0,
            irregular_rr_cv: 0.15,
            irregular_min_beats: 8,
        }
    }
}

fn suggestion(rule_id: &str, code: &str, text: &str) -> AutoSuggestion {
    AutoSuggestion {
        code: code.into(),
        display_text: text.into(),
        rule_id: rule_id.into(),
    }
}

pub fn auto_diagnose(features: Option<&RhythmFeatures>) -> Vec<AutoSuggestion> {
    auto_diagnose_with(features, &DiagnosisThresholds::default())
}

/// Every rule that fires, ordered by rule id.
pub fn auto_diagnose_with(
    features: Option<&RhythmFeatures>,
    th: &DiagnosisThresholds,
) -> Vec<AutoSuggestion> {
    let Some(f) = features else {
        return vec![suggestion(
            "R0-insufficient",
            "INSUF",
            "insufficient signal for suggestions (nothing suggested)",
        )];
    };
    let mut out = Vec::new();
    if f.mean_hr < th.bradycardia_below_bpm {
        out.push(suggestion("R1-bradycardia", "SB", "sinus bradycardia (suggested)"));
    }
    if f.mean_hr > th.tachycardia_above_bpm {
        out.push(suggestion("R2-tachycardia", "STACH", "sinus tachycardia (suggested)"));
    }
    if f.rr_cv > th.irregular_rr_cv && f.n_beats >= th.irregular_min_beats {
        out.push(suggestion(
            "R3-irregular",
            "IRREG",
            "irregular rhythm, possible atrial fibrillation (suggested)",
        ));
    }
    if (th.bradycardia_below_bpm..=th.tachycardia_above_bpm).contains(&f.mean_hr)
        && f.rr_cv <= th.irregular_rr_cv
    {
        out.push(suggestion("R4-no-abnormality", "NORHY", "no rhythm abnormality suggested"));
    }
    out.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
    out
}
