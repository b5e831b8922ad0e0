//! Quality and effort tables with significance marks, as plain text and JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::significance::{approx_randomization, ALPHA};
use super::{BleuStats, EffortStats, EvalError, TerStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Ter,
    Wsr,
    Mar,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Bleu => "BLEU [↑]",
            Metric::Ter => "TER [↓]",
            Metric::Wsr => "WSR [↓]",
            Metric::Mar => "MAR [↓]",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Bleu)
    }
}

/// Per-sentence components a system was scored with.
#[derive(Debug, Clone, Default)]
pub struct SystemComponents {
    pub bleu: Option<Vec<BleuStats>>,
    pub ter: Option<Vec<TerStats>>,
    pub effort: Option<Vec<EffortStats>>,
}

impl SystemComponents {
    fn score(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu => self.bleu.as_ref().map(|c| bleu_metric(c)),
            Metric::Ter => self.ter.as_ref().map(|c| ter_metric(c)),
            Metric::Wsr => self.effort.as_ref().map(|c| wsr_metric(c)),
            Metric::Mar => self.effort.as_ref().map(|c| mar_metric(c)),
        }
    }

    fn p_value(&self, other: &Self, metric: Metric, reps: usize, seed: u64) -> Option<Result<f64, EvalError>> {
        match metric {
            Metric::Bleu => Some(approx_randomization(self.bleu.as_ref()?, other.bleu.as_ref()?, bleu_metric, reps, seed)),
            Metric::Ter => Some(approx_randomization(self.ter.as_ref()?, other.ter.as_ref()?, ter_metric, reps, seed)),
            Metric::Wsr => Some(approx_randomization(self.effort.as_ref()?, other.effort.as_ref()?, wsr_metric, reps, seed)),
            Metric::Mar => Some(approx_randomization(self.effort.as_ref()?, other.effort.as_ref()?, mar_metric, reps, seed)),
        }
    }
}

pub fn bleu_metric(c: &[BleuStats]) -> f64 {
    c.iter().copied().sum::<BleuStats>().score()
}

pub fn ter_metric(c: &[TerStats]) -> f64 {
    c.iter().copied().sum::<TerStats>().score()
}

pub fn wsr_metric(c: &[EffortStats]) -> f64 {
    c.iter().copied().sum::<EffortStats>().wsr()
}

pub fn mar_metric(c: &[EffortStats]) -> f64 {
    c.iter().copied().sum::<EffortStats>().mar()
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub system: String,
    pub bleu: Option<f64>,
    pub ter: Option<f64>,
    pub wsr: Option<f64>,
    pub mar: Option<f64>,
    /// Other system name -> metric -> p-value.
    pub p_values: BTreeMap<String, BTreeMap<Metric, f64>>,
    #[serde(skip)]
    pub components: SystemComponents,
}

impl SystemReport {
    pub fn score(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu => self.bleu,
            Metric::Ter => self.ter,
            Metric::Wsr => self.wsr,
            Metric::Mar => self.mar,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub baseline: Option<String>,
    pub systems: Vec<SystemReport>,
}

impl EvalReport {
    /// Scores every system and runs a significance test for each system
    /// pair and each metric both systems have components for.
    pub fn build(
        systems: Vec<(String, SystemComponents)>,
        baseline: Option<&str>,
        reps: usize,
        seed: u64,
    ) -> Result<Self, EvalError> {
        const METRICS: [Metric; 4] = [Metric::Bleu, Metric::Ter, Metric::Wsr, Metric::Mar];
        let mut rows: Vec<SystemReport> = systems
            .into_iter()
            .map(|(system, components)| SystemReport {
                bleu: components.score(Metric::Bleu),
                ter: components.score(Metric::Ter),
                wsr: components.score(Metric::Wsr),
                mar: components.score(Metric::Mar),
                system,
                p_values: BTreeMap::new(),
                components,
            })
            .collect();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                for metric in METRICS {
                    let Some(p) = rows[i].components.p_value(&rows[j].components, metric, reps, seed)
                    else {
                        continue;
                    };
                    let p = p?;
                    let (ni, nj) = (rows[i].system.clone(), rows[j].system.clone());
                    rows[i].p_values.entry(nj).or_default().insert(metric, p);
                    rows[j].p_values.entry(ni).or_default().insert(metric, p);
                }
            }
        }
        Ok(EvalReport {
            baseline: baseline.map(str::to_string),
            systems: rows,
        })
    }

    fn marks(&self, row: &SystemReport, metric: Metric) -> String {
        let mut marks = String::new();
        let Some(score) = row.score(metric) else {
            return marks;
        };
        let is_baseline = |name: &str| self.baseline.as_deref() == Some(name);
        if is_baseline(&row.system) {
            return marks;
        }
        if let Some(base) = &self.baseline {
            if row.p_values.get(base).and_then(|m| m.get(&metric)).is_some_and(|&p| p < ALPHA) {
                marks.push('†');
            }
        }
        // The double dagger goes on the better system of a significant
        // non-baseline pair.
        let beats_other = self.systems.iter().any(|other| {
            if other.system == row.system || is_baseline(&other.system) {
                return false;
            }
            let significant = row
                .p_values
                .get(&other.system)
                .and_then(|m| m.get(&metric))
                .is_some_and(|&p| p < ALPHA);
            let better = other.score(metric).is_some_and(|o| {
                if metric.higher_is_better() {
                    score > o
                } else {
                    score < o
                }
            });
            significant && better
        });
        if beats_other {
            marks.push('‡');
        }
        marks
    }

    /// Aligned plain-text table over the given metric columns.
    pub fn render(&self, metrics: &[Metric]) -> String {
        let mut cells: Vec<Vec<String>> = vec![std::iter::once("System".to_string())
            .chain(metrics.iter().map(|m| m.label().to_string()))
            .collect()];
        for row in &self.systems {
            let mut line = vec![row.system.clone()];
            for &m in metrics {
                line.push(match row.score(m) {
                    Some(v) => format!("{v:.1}{}", self.marks(row, m)),
                    None => "-".to_string(),
                });
            }
            cells.push(line);
        }
        let widths: Vec<usize> = (0..=metrics.len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                let pad = widths[c] - cell.chars().count();
                let _ = write!(line, "{cell}{}  ", " ".repeat(pad));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// BLEU/TER columns.
    pub fn render_quality(&self) -> String {
        self.render(&[Metric::Bleu, Metric::Ter])
    }

    /// WSR/MAR columns.
    pub fn render_effort(&self) -> String {
        self.render(&[Metric::Wsr, Metric::Mar])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.systems).expect("report serializes")
    }
}
