//! Parsers for the structured flag values: `--arms`, `--days`, `--segment`,
//! and `--buckets`.

use prevalence_core::datamodel::{Bucketization, Day, Segment};
use prevalence_core::{Error, Result};

/// `control=<arm>,treatment=<arm>` in either order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmsSpec {
    pub control: String,
    pub treatment: String,
}

pub fn parse_arms(value: &str) -> Result<ArmsSpec> {
    let mut control = None;
    let mut treatment = None;
    for part in value.split(',') {
        let (role, arm) = part
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("arm mapping {part:?} is not role=arm")))?;
        let slot = match role.trim() {
            "control" => &mut control,
            "treatment" => &mut treatment,
            other => {
                return Err(Error::domain(format!(
                    "unknown role {other:?}; expected control or treatment"
                )))
            }
        };
        if slot.replace(arm.trim().to_string()).is_some() {
            return Err(Error::domain(format!("role {role:?} given twice")));
        }
    }
    match (control, treatment) {
        (Some(control), Some(treatment)) if !control.is_empty() && !treatment.is_empty() => {
            Ok(ArmsSpec { control, treatment })
        }
        _ => Err(Error::domain(
            "--arms must name both roles, e.g. control=base,treatment=filtered",
        )),
    }
}

/// Inclusive `from..to` day range, expanded to the list of days.
pub fn parse_days(value: &str) -> Result<Vec<Day>> {
    let (from, to) = value
        .split_once("..")
        .ok_or_else(|| Error::domain(format!("--days {value:?} is not from..to")))?;
    let from: Day = from
        .trim()
        .parse()
        .map_err(|e| Error::domain(format!("bad start day {from:?}: {e}")))?;
    let to: Day = to
        .trim()
        .parse()
        .map_err(|e| Error::domain(format!("bad end day {to:?}: {e}")))?;
    if to < from {
        return Err(Error::domain(format!("--days range {value:?} runs backwards")));
    }
    let mut days = Vec::new();
    let mut d = from;
    while d <= to {
        days.push(d);
        d = d
            .succ_opt()
            .ok_or_else(|| Error::domain("day range overflows the calendar"))?;
    }
    Ok(days)
}

/// `all`, or a comma list of `arm=<arm>`, `from=<day>`, `to=<day>`.
pub fn parse_segment(value: &str) -> Result<Segment> {
    if value.trim() == "all" {
        return Ok(Segment::all());
    }
    let mut segment = Segment::all();
    for part in value.split(',') {
        let (key, v) = part
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("segment part {part:?} is not key=value")))?;
        let v = v.trim();
        match key.trim() {
            "arm" => segment.arm = Some(v.to_string()),
            "from" => {
                segment.from = Some(
                    v.parse()
                        .map_err(|e| Error::domain(format!("bad from day {v:?}: {e}")))?,
                )
            }
            "to" => {
                segment.to = Some(
                    v.parse()
                        .map_err(|e| Error::domain(format!("bad to day {v:?}: {e}")))?,
                )
            }
            other => {
                return Err(Error::domain(format!(
                    "unknown segment key {other:?}; expected arm, from, or to"
                )))
            }
        }
    }
    Ok(segment)
}

/// Bucketization spec: `equal-width:<B>`, `quantile:<B>`, or
/// `explicit:<b0,b1,...,bk>`. Quantile boundaries are resolved against the
/// category's score distribution by the caller.
#[derive(Debug, Clone, PartialEq)]
pub enum BucketsSpec {
    EqualWidth(usize),
    Quantile(usize),
    Explicit(Vec<f64>),
}

pub fn parse_buckets(value: &str) -> Result<BucketsSpec> {
    let (kind, arg) = value
        .split_once(':')
        .ok_or_else(|| Error::domain(format!("--buckets {value:?} is not kind:arg")))?;
    match kind.trim() {
        "equal-width" => Ok(BucketsSpec::EqualWidth(parse_count(arg)?)),
        "quantile" => Ok(BucketsSpec::Quantile(parse_count(arg)?)),
        "explicit" => {
            let boundaries = arg
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::domain(format!("bad boundary {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(BucketsSpec::Explicit(boundaries))
        }
        other => Err(Error::domain(format!(
            "unknown bucket scheme {other:?}; expected equal-width, quantile, or explicit"
        ))),
    }
}

fn parse_count(arg: &str) -> Result<usize> {
    arg.trim()
        .parse::<usize>()
        .map_err(|e| Error::domain(format!("bad bucket count {arg:?}: {e}")))
}

impl BucketsSpec {
    /// Resolve to concrete boundaries, using `scores` for quantile specs.
    pub fn resolve(&self, scores: &[f64]) -> Result<Bucketization> {
        match self {
            BucketsSpec::EqualWidth(b) => Bucketization::equal_width(*b),
            BucketsSpec::Quantile(b) => Bucketization::from_quantiles(scores, *b),
            BucketsSpec::Explicit(bounds) => {
                Bucketization::explicit(bounds.clone())
            }
        }
    }
}
