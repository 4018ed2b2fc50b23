//! Group fairness metrics and prediction-level comparisons.
//!
//! All quantities are ratios of integer counts and are returned exactly as
//! [`Rational64`]; convert with [`to_f64`] at the interface.

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::dataio::GroupSpec;
use crate::error::{Error, Result};

/// Predicted labels, each -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predictions(Vec<i8>);

impl Predictions {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Argument("predictions must be -1 or +1".into()));
        }
        Ok(Predictions(values))
    }

    /// From 0/1 positive-prediction indicators.
    pub fn from_indicators(ind: &[bool]) -> Self {
        Predictions(ind.iter().map(|&b| if b { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.0[i] == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FairnessMetric {
    StatisticalParity,
    EqualOpportunity,
}

impl FairnessMetric {
    pub fn short_name(self) -> &'static str {
        match self {
            FairnessMetric::StatisticalParity => "sp",
            FairnessMetric::EqualOpportunity => "eo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" | "statistical_parity" | "statisticalparity" => Some(FairnessMetric::StatisticalParity),
            "eo" | "equal_opportunity" | "equalopportunity" => Some(FairnessMetric::EqualOpportunity),
            _ => None,
        }
    }

    /// The two index sets compared by this metric, in (first, second) order.
    pub fn groups(self, groups: &GroupSpec) -> Result<(&[usize], &[usize])> {
        match self {
            FairnessMetric::StatisticalParity => Ok((&groups.g1, &groups.g2)),
            FairnessMetric::EqualOpportunity => {
                if groups.g1_pos.is_empty() || groups.g2_pos.is_empty() {
                    return Err(Error::MetricUndefined(
                        "equal opportunity needs positive examples in both groups".into(),
                    ));
                }
                Ok((&groups.g1_pos, &groups.g2_pos))
            }
        }
    }

    pub fn evaluate(self, preds: &Predictions, groups: &GroupSpec) -> Result<Rational64> {
        match self {
            FairnessMetric::StatisticalParity => statistical_parity(preds, groups),
            FairnessMetric::EqualOpportunity => equal_opportunity(preds, groups),
        }
    }
}

impl std::fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

fn check_groups(preds: &Predictions, groups: &GroupSpec) -> Result<()> {
    let max = groups.g1.iter().chain(&groups.g2).copied().max().unwrap_or(0);
    if max >= preds.len() {
        return Err(Error::LengthMismatch { expected: max + 1, actual: preds.len() });
    }
    Ok(())
}

fn positive_rate(preds: &Predictions, idx: &[usize]) -> Rational64 {
    let hits = idx.iter().filter(|&&i| preds.is_positive(i)).count();
    Rational64::new(hits as i64, idx.len() as i64)
}

pub fn statistical_parity(preds: &Predictions, groups: &GroupSpec) -> Result<Rational64> {
    check_groups(preds, groups)?;
    Ok(positive_rate(preds, &groups.g1) - positive_rate(preds, &groups.g2))
}

pub fn equal_opportunity(preds: &Predictions, groups: &GroupSpec) -> Result<Rational64> {
    check_groups(preds, groups)?;
    let (a, b) = FairnessMetric::EqualOpportunity.groups(groups)?;
    Ok(positive_rate(preds, a) - positive_rate(preds, b))
}

/// Fraction of examples whose prediction differs from the label.
pub fn empirical_loss(preds: &Predictions, labels: &[i8]) -> Result<Rational64> {
    Ok(Rational64::new(mismatches(preds.values(), labels)? as i64, labels.len() as i64))
}

/// Fraction of examples on which two prediction vectors differ.
pub fn disagreement(p1: &Predictions, p2: &Predictions) -> Result<Rational64> {
    Ok(Rational64::new(mismatches(p1.values(), p2.values())? as i64, p1.len().max(1) as i64))
}

/// Number of positions where `a` and `b` differ.
pub fn mismatches(a: &[i8], b: &[i8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: b.len(), actual: a.len() });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

pub fn to_f64(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
