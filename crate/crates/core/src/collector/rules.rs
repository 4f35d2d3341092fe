//! Rule-driven virtual sensors.
//!
//! A rule is a composition of fusion operators over named streams:
//!
//! ```text
//! expr := ident
//!       | "fuse" "{" expr ("," expr)* "}"
//!       | "fir" "[" number ("," number)* "]" expr
//!       | "window_average" duration expr
//!       | "label" number expr          (top level only)
//!       | "(" expr ")"
//! duration := number ("ns" | "us" | "ms" | "s" | "min")
//! ```
//!
//! e.g. `window_average 10s (fuse {T1, T2, T3})` or `fir [0.25, 0.5, 0.25] P1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RuleError;
use crate::fusion::{
    fir_low_pass, label_with_uncertainty, virtual_sensor_fuse, window_average, FirFilter, LabeledValue,
};
use crate::time::{Duration, Timestamp};
use crate::uncertainty::Measurement;

#[derive(Debug, Clone, PartialEq)]
pub enum VirtualRule {
    Stream(String),
    Fuse(Vec<VirtualRule>),
    Fir { coefficients: Vec<f64>, input: Box<VirtualRule> },
    WindowAverage { window: Duration, input: Box<VirtualRule> },
    Label { threshold: f64, input: Box<VirtualRule> },
}

/// Output of a rule: a measurement stream, or labels for `label` rules.
#[derive(Debug, Clone, PartialEq)]
pub enum VirtualOutput {
    Measurements(Vec<Measurement>),
    Labels(Vec<LabeledValue>),
}

impl VirtualRule {
    /// Streams the rule reads, sorted.
    pub fn references(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            VirtualRule::Stream(s) => {
                out.insert(s);
            }
            VirtualRule::Fuse(items) => items.iter().for_each(|r| r.collect_refs(out)),
            VirtualRule::Fir { input, .. }
            | VirtualRule::WindowAverage { input, .. }
            | VirtualRule::Label { input, .. } => input.collect_refs(out),
        }
    }

    fn check_label_placement(&self, top: bool) -> Result<(), RuleError> {
        match self {
            VirtualRule::Stream(_) => Ok(()),
            VirtualRule::Label { input, .. } if top => input.check_label_placement(false),
            VirtualRule::Label { .. } => Err(RuleError::Parse("label may only appear at the top level".into())),
            VirtualRule::Fuse(items) => items.iter().try_for_each(|r| r.check_label_placement(false)),
            VirtualRule::Fir { input, .. } | VirtualRule::WindowAverage { input, .. } => {
                input.check_label_placement(false)
            }
        }
    }
}

impl fmt::Display for VirtualRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VirtualRule::Stream(s) => f.write_str(s),
            VirtualRule::Fuse(items) => {
                f.write_str("fuse {")?;
                for (i, r) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{r}")?;
                }
                f.write_str("}")
            }
            VirtualRule::Fir { coefficients, input } => {
                let cs: Vec<String> = coefficients.iter().map(|c| c.to_string()).collect();
                write!(f, "fir [{}] {}", cs.join(", "), Paren(input))
            }
            VirtualRule::WindowAverage { window, input } => {
                write!(f, "window_average {}ns {}", window.nanos(), Paren(input))
            }
            VirtualRule::Label { threshold, input } => write!(f, "label {threshold} {}", Paren(input)),
        }
    }
}

struct Paren<'a>(&'a VirtualRule);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            VirtualRule::Stream(_) | VirtualRule::Fuse(_) => write!(f, "{}", self.0),
            other => write!(f, "({other})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Token>, RuleError> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() || "_.:-+".contains(c) {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(Token::Word(std::mem::take(&mut word)));
        }
        match c {
            '{' | '}' | '[' | ']' | '(' | ')' | ',' => out.push(Token::Sym(c)),
            c if c.is_whitespace() => {}
            c => return Err(RuleError::Parse(format!("unexpected character `{c}`"))),
        }
    }
    if !word.is_empty() {
        out.push(Token::Word(word));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expect(&mut self, c: char) -> Result<(), RuleError> {
        match self.next() {
            Some(Token::Sym(x)) if x == c => Ok(()),
            other => Err(RuleError::Parse(format!("expected `{c}`, found {other:?}"))),
        }
    }

    fn number(&mut self) -> Result<f64, RuleError> {
        match self.next() {
            Some(Token::Word(w)) => w.parse().map_err(|_| RuleError::Parse(format!("expected a number, found `{w}`"))),
            other => Err(RuleError::Parse(format!("expected a number, found {other:?}"))),
        }
    }

    fn duration(&mut self) -> Result<Duration, RuleError> {
        let w = match self.next() {
            Some(Token::Word(w)) => w,
            other => return Err(RuleError::Parse(format!("expected a duration, found {other:?}"))),
        };
        let split = w
            .find(|c: char| c.is_alphabetic())
            .ok_or_else(|| RuleError::Parse(format!("duration `{w}` needs a unit")))?;
        let (num, unit) = w.split_at(split);
        let v: f64 = num.parse().map_err(|_| RuleError::Parse(format!("bad duration `{w}`")))?;
        let scale = match unit {
            "ns" => 1e-9,
            "us" => 1e-6,
            "ms" => 1e-3,
            "s" => 1.0,
            "min" => 60.0,
            _ => return Err(RuleError::Parse(format!("unknown duration unit `{unit}`"))),
        };
        let d = Duration::from_secs_f64(v * scale);
        if d.nanos() <= 0 {
            return Err(RuleError::Parse(format!("duration `{w}` must be positive")));
        }
        Ok(d)
    }

    fn expr(&mut self) -> Result<VirtualRule, RuleError> {
        match self.next() {
            Some(Token::Sym('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Word(w)) => match w.as_str() {
                "fuse" => {
                    self.expect('{')?;
                    let mut items = vec![self.expr()?];
                    while self.peek() == Some(&Token::Sym(',')) {
                        self.pos += 1;
                        items.push(self.expr()?);
                    }
                    self.expect('}')?;
                    Ok(VirtualRule::Fuse(items))
                }
                "fir" => {
                    self.expect('[')?;
                    let mut coefficients = vec![self.number()?];
                    while self.peek() == Some(&Token::Sym(',')) {
                        self.pos += 1;
                        coefficients.push(self.number()?);
                    }
                    self.expect(']')?;
                    FirFilter::new(coefficients.clone()).map_err(|e| RuleError::Parse(e.to_string()))?;
                    Ok(VirtualRule::Fir { coefficients, input: Box::new(self.expr()?) })
                }
                "window_average" => {
                    let window = self.duration()?;
                    Ok(VirtualRule::WindowAverage { window, input: Box::new(self.expr()?) })
                }
                "label" => {
                    let threshold = self.number()?;
                    Ok(VirtualRule::Label { threshold, input: Box::new(self.expr()?) })
                }
                _ => Ok(VirtualRule::Stream(w)),
            },
            other => Err(RuleError::Parse(format!("unexpected {other:?}"))),
        }
    }
}

impl FromStr for VirtualRule {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { tokens: tokenize(s)?, pos: 0 };
        let rule = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(RuleError::Parse(format!("trailing input after `{rule}`")));
        }
        rule.check_label_placement(true)?;
        Ok(rule)
    }
}

impl Serialize for VirtualRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for VirtualRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluates `rule` over aligned input streams and stamps every output with
/// `output_id`, so it is indistinguishable downstream from a physical stream.
pub fn run_virtual_sensor_rule(
    rule: &VirtualRule,
    streams: &BTreeMap<String, Vec<Measurement>>,
    output_id: &str,
) -> Result<VirtualOutput, RuleError> {
    match rule {
        VirtualRule::Label { threshold, input } => {
            let series = eval(input, streams, output_id)?;
            Ok(VirtualOutput::Labels(series.iter().map(|m| label_with_uncertainty(m, *threshold)).collect()))
        }
        other => Ok(VirtualOutput::Measurements(eval(other, streams, output_id)?)),
    }
}

fn eval(
    rule: &VirtualRule,
    streams: &BTreeMap<String, Vec<Measurement>>,
    output_id: &str,
) -> Result<Vec<Measurement>, RuleError> {
    let mut out = match rule {
        VirtualRule::Stream(name) => {
            streams.get(name).cloned().ok_or_else(|| RuleError::UnknownStreamRef(name.clone()))?
        }
        VirtualRule::Fuse(items) => {
            let inputs: Vec<Vec<Measurement>> =
                items.iter().map(|r| eval(r, streams, output_id)).collect::<Result<_, _>>()?;
            fuse_streams(&inputs, output_id)?
        }
        VirtualRule::Fir { coefficients, input } => {
            let series = eval(input, streams, output_id)?;
            let f = FirFilter::new(coefficients.clone()).map_err(RuleError::from)?;
            fir_low_pass(&series, &f)?
        }
        VirtualRule::WindowAverage { window, input } => {
            let series = eval(input, streams, output_id)?;
            window_average(&series, *window)?.measurements
        }
        VirtualRule::Label { .. } => return Err(RuleError::Parse("label may only appear at the top level".into())),
    };
    for m in &mut out {
        m.source_id = output_id.to_string();
    }
    Ok(out)
}

/// Fuses streams at every instant present in all of them.
fn fuse_streams(inputs: &[Vec<Measurement>], output_id: &str) -> Result<Vec<Measurement>, RuleError> {
    let mut common: Option<BTreeSet<Timestamp>> = None;
    for s in inputs {
        let ts: BTreeSet<Timestamp> = s.iter().map(|m| m.timestamp).collect();
        common = Some(match common {
            None => ts,
            Some(c) => c.intersection(&ts).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let mut out = Vec::with_capacity(common.len());
    for t in common {
        let at: Vec<Measurement> = inputs.iter().map(|s| s[s.partition_point(|m| m.timestamp < t)].clone()).collect();
        out.push(virtual_sensor_fuse(&at, Some(output_id))?.measurement);
    }
    Ok(out)
}
