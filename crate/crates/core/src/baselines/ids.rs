use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::env::{AttackKind, SignatureId, TelemetryEvent};
use crate::monitor::DetectionVerdict;
use crate::rng::{stream, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignaturePattern {
    Exact(SignatureId),
    /// Inclusive on both ends.
    Range(SignatureId, SignatureId),
}

impl SignaturePattern {
    pub fn covers(&self, id: SignatureId) -> bool {
        match *self {
            SignaturePattern::Exact(s) => s == id,
            SignaturePattern::Range(lo, hi) => lo <= id && id <= hi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rule {
    pub pattern: SignaturePattern,
    pub min_magnitude: Option<f64>,
}

impl Rule {
    pub fn matches(&self, e: &TelemetryEvent) -> bool {
        match e.signature_id {
            Some(id) => self.pattern.covers(id) && self.min_magnitude.is_none_or(|m| e.magnitude >= m),
            None => false,
        }
    }
}

/// Ordered signature rules; the first matching rule wins.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("rule file line {line}: {reason}")]
pub struct RuleParseError {
    pub line: usize,
    pub reason: String,
}

/// Fraction of known signatures the shipped rule set covers.
pub const DEFAULT_RULE_COVERAGE: f64 = 0.9;
const DEFAULT_RULE_SEED: u64 = 0x1d5;

impl RuleSet {
    /// Index of the first rule matching `e`.
    pub fn first_match(&self, e: &TelemetryEvent) -> Option<usize> {
        self.rules.iter().position(|r| r.matches(e))
    }

    /// Every known (non zero-day) signature except a seeded tenth.
    pub fn default_rules() -> RuleSet {
        let mut sigs = AttackKind::known_signatures();
        let mut rng = stream(DEFAULT_RULE_SEED, Domain::Rules, &[]);
        sigs.shuffle(&mut rng);
        let keep = (sigs.len() as f64 * DEFAULT_RULE_COVERAGE).round() as usize;
        let mut kept = sigs[..keep].to_vec();
        kept.sort();
        RuleSet {
            rules: kept
                .into_iter()
                .map(|s| Rule {
                    pattern: SignaturePattern::Exact(s),
                    min_magnitude: None,
                })
                .collect(),
        }
    }

    pub fn covers(&self, id: SignatureId) -> bool {
        self.rules.iter().any(|r| r.pattern.covers(id))
    }
}

fn parse_sig(s: &str) -> Result<SignatureId, String> {
    s.trim()
        .parse::<u32>()
        .map(SignatureId)
        .map_err(|_| format!("bad signature id {s:?}"))
}

/// One rule per line: `signature_id[,min_magnitude]`, where the id may also
/// be a `lo-hi` range. Blank lines and `#` comments are skipped.
impl FromStr for RuleSet {
    type Err = RuleParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| RuleParseError { line: i + 1, reason };
            let mut parts = line.split(',');
            let id = parts.next().unwrap_or("");
            let pattern = match id.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (parse_sig(lo).map_err(err)?, parse_sig(hi).map_err(err)?);
                    if lo > hi {
                        return Err(err(format!("empty range {}-{}", lo.0, hi.0)));
                    }
                    SignaturePattern::Range(lo, hi)
                }
                None => SignaturePattern::Exact(parse_sig(id).map_err(err)?),
            };
            let min_magnitude = match parts.next() {
                None => None,
                Some(m) => {
                    let v: f64 = m.trim().parse().map_err(|_| err(format!("bad magnitude {m:?}")))?;
                    if !v.is_finite() {
                        return Err(err(format!("bad magnitude {m:?}")));
                    }
                    Some(v)
                }
            };
            if parts.next().is_some() {
                return Err(err("too many fields".into()));
            }
            rules.push(Rule { pattern, min_magnitude });
        }
        Ok(RuleSet { rules })
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            match r.pattern {
                SignaturePattern::Exact(s) => write!(f, "{}", s.0)?,
                SignaturePattern::Range(lo, hi) => write!(f, "{}-{}", lo.0, hi.0)?,
            }
            if let Some(m) = r.min_magnitude {
                write!(f, ",{m}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Alerts when any event in the window matches any rule.
pub fn ids_match(rules: &RuleSet, events: &[TelemetryEvent], step: u64) -> DetectionVerdict {
    let alert = events.iter().any(|e| rules.first_match(e).is_some());
    DetectionVerdict {
        step,
        alert,
        score: if alert { 1.0 } else { 0.0 },
    }
}
