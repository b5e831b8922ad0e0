use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::SmtError;

pub const NUM_FEATURES: usize = 6;

/// Per-derivation feature values, indexed by [`Feature`].
pub type FeatureVector = [f64; NUM_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// Sum of `ln p(t|s)` over phrases.
    TranslationTgs,
    /// Sum of `ln p(s|t)` over phrases.
    TranslationSgt,
    /// Natural-log language model probability including `</s>`.
    LanguageModel,
    /// Number of target words.
    WordPenalty,
    /// Number of phrases.
    PhrasePenalty,
    /// Minus the summed jump distance between consecutive phrases.
    Distortion,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::TranslationTgs,
        Feature::TranslationSgt,
        Feature::LanguageModel,
        Feature::WordPenalty,
        Feature::PhrasePenalty,
        Feature::Distortion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::TranslationTgs => "tm_t_given_s",
            Feature::TranslationSgt => "tm_s_given_t",
            Feature::LanguageModel => "lm",
            Feature::WordPenalty => "word_penalty",
            Feature::PhrasePenalty => "phrase_penalty",
            Feature::Distortion => "distortion",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearWeights(FeatureVector);

impl Default for LogLinearWeights {
    fn default() -> Self {
        LogLinearWeights([0.3, 0.2, 0.5, 0.5, -0.2, 0.3])
    }
}

impl LogLinearWeights {
    pub fn new(values: FeatureVector) -> Result<Self, SmtError> {
        if let Some(f) = Feature::ALL.iter().find(|f| !values[f.index()].is_finite()) {
            return Err(SmtError::InvalidWeight(format!("{} is not finite", f.name())));
        }
        Ok(LogLinearWeights(values))
    }

    pub fn values(&self) -> &FeatureVector {
        &self.0
    }

    pub fn dot(&self, features: &FeatureVector) -> f64 {
        self.0.iter().zip(features).map(|(w, f)| w * f).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LogLinearWeights(self.0.map(|w| w * factor))
    }

    /// `name<TAB>value` lines in feature order; values round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in Feature::ALL {
            let _ = writeln!(out, "{}\t{}", f.name(), self.0[f.index()]);
        }
        out
    }

    /// Parses `name<TAB>value` lines. Every feature must appear exactly once.
    pub fn from_text(text: &str) -> Result<Self, SmtError> {
        let mut values: [Option<f64>; NUM_FEATURES] = [None; NUM_FEATURES];
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| SmtError::Format {
                what: "weights file",
                line: n + 1,
                message,
            };
            let (name, value) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected name<TAB>value".into()))?;
            let f = Feature::from_name(name.trim()).ok_or_else(|| bad(format!("unknown feature {name:?}")))?;
            let v: f64 = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{name} is not finite")));
            }
            if values[f.index()].replace(v).is_some() {
                return Err(bad(format!("duplicate feature {name}")));
            }
        }
        let mut out = [0.0; NUM_FEATURES];
        for f in Feature::ALL {
            out[f.index()] = values[f.index()]
                .ok_or_else(|| SmtError::InvalidWeight(format!("missing feature {}", f.name())))?;
        }
        Ok(LogLinearWeights(out))
    }
}

impl Index<Feature> for LogLinearWeights {
    type Output = f64;

    fn index(&self, f: Feature) -> &f64 {
        &self.0[f.index()]
    }
}

impl IndexMut<Feature> for LogLinearWeights {
    fn index_mut(&mut self, f: Feature) -> &mut f64 {
        &mut self.0[f.index()]
    }
}
