//! Monte Carlo estimation with a single calibration draw per day: sample one
//! prevalence per bucket from its logit-normal calibration distribution,
//! then simulate flagged impressions user by user and aggregate per arm.

use std::collections::BTreeMap;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::calibration::LogitParams;
use crate::datamodel::{Bucketization, Day, ImpressionRecord, ScoreTable};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, stream, KeyedRng};
use crate::stats::sigmoid;

/// How per-bucket prevalences are drawn for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketDrawMode {
    /// Draw `theta = mu + sigma * z` with standard-normal `z` and map back
    /// through the inverse logit.
    LogitNormal,
    /// Skip the draw: `P* = inverse-logit(mu)`, i.e. the calibrated point.
    FixedAtPoint,
}

/// How impressions are flagged once `P*` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpressionMode {
    /// One uniform per impression, flag when `r < P*`.
    ExactLoop,
    /// One Binomial(I, P*) draw per (user, item); identical in distribution.
    BinomialFastPath,
}

/// Maps the experiment's role names to arm labels found in the logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmRoles {
    pub control: String,
    pub treatment: String,
}

impl ArmRoles {
    pub fn new(control: impl Into<String>, treatment: impl Into<String>) -> Result<Self> {
        let control = control.into();
        let treatment = treatment.into();
        if control == treatment {
            return Err(Error::domain(
                "control and treatment must map to different arm labels",
            ));
        }
        Ok(ArmRoles { control, treatment })
    }
}

/// Pure logit-normal transform behind the bucket draw.
pub fn logit_normal_transform(mu: f64, sigma: f64, z: f64) -> f64 {
    sigmoid(mu + sigma * z)
}

/// RNG stream for the per-(day, category) bucket prevalence draw.
pub fn bucket_draw_rng(seed: u64, category: &str, day: Day) -> KeyedRng {
    KeyedRng::new(
        seed,
        &[
            stream::BUCKET_DRAW,
            fnv1a(category.as_bytes()),
            day_key(day),
        ],
    )
}

fn day_key(day: Day) -> u64 {
    use chrono::Datelike;
    day.num_days_from_ce() as u64
}

/// Draw one prevalence `P*` per bucket; `None` entries are empty buckets.
///
/// In logit-normal mode each bucket consumes one Box–Muller normal from
/// `rng`; with `sigma = 0` the draw degenerates to the calibrated point.
pub fn draw_bucket_prevalences(
    params: &LogitParams,
    mode: BucketDrawMode,
    rng: &mut KeyedRng,
) -> Vec<Option<f64>> {
    params
        .per_bucket
        .iter()
        .map(|entry| {
            entry.map(|lb| match mode {
                BucketDrawMode::LogitNormal => logit_normal_transform(lb.mu, lb.sigma, rng.normal()),
                BucketDrawMode::FixedAtPoint => sigmoid(lb.mu),
            })
        })
        .collect()
}

/// Per-arm totals for one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDayOutcome {
    pub arm: String,
    pub impressions: u64,
    pub flagged: u64,
    pub prevalence: f64,
}

/// Per-user intermediate totals, kept on request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDayTotals {
    pub user: String,
    pub arm: String,
    pub impressions: u64,
    pub flagged: u64,
}

/// Outcome of simulating one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub day: Day,
    pub control: ArmDayOutcome,
    pub treatment: ArmDayOutcome,
    /// Treatment minus control prevalence.
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_totals: Option<Vec<UserDayTotals>>,
}

/// Configuration for one simulated day.
#[derive(Debug, Clone)]
pub struct DayRunConfig {
    pub day: Day,
    pub seed: u64,
    pub impression_mode: ImpressionMode,
    /// Retain per-user totals in the result.
    pub keep_user_totals: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Control,
    Treatment,
}

/// Simulate flagged impressions for one day under fixed `p_star`.
///
/// Every record on the day must belong to one of the two configured arms,
/// and each user must appear in exactly one arm. Randomness is keyed by
/// `(seed, day, user, item)`, so results are independent of record order.
pub fn simulate_day(
    records: &[ImpressionRecord],
    scores: &ScoreTable,
    category: &str,
    buckets: &Bucketization,
    p_star: &[Option<f64>],
    arms: &ArmRoles,
    config: &DayRunConfig,
) -> Result<SimulationResult> {
    if p_star.len() != buckets.len() {
        return Err(Error::domain(format!(
            "{} bucket prevalences supplied for {} buckets",
            p_star.len(),
            buckets.len()
        )));
    }
    let day = config.day;
    let mut user_roles: BTreeMap<&str, Role> = BTreeMap::new();
    // (user, item) -> (role, impressions). The log grain guarantees one
    // entry per (user, item) once the user-to-one-arm rule holds.
    let mut exposures: BTreeMap<(&str, &str), (Role, u64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.day == day) {
        let role = if r.arm == arms.control {
            Role::Control
        } else if r.arm == arms.treatment {
            Role::Treatment
        } else {
            return Err(Error::domain(format!(
                "user {} has impressions in arm {:?}, which is neither control nor treatment",
                r.user, r.arm
            )));
        };
        match user_roles.insert(&r.user, role) {
            Some(prev) if prev != role => {
                return Err(Error::domain(format!(
                    "user {} appears in both arms on {day}; arm assignment must be a function of the user",
                    r.user
                )));
            }
            _ => {}
        }
        let slot = exposures.entry((&r.user, &r.item)).or_insert((role, 0));
        slot.1 += r.impressions;
    }

    let mut control = ArmDayOutcome {
        arm: arms.control.clone(),
        impressions: 0,
        flagged: 0,
        prevalence: 0.0,
    };
    let mut treatment = ArmDayOutcome {
        arm: arms.treatment.clone(),
        impressions: 0,
        flagged: 0,
        prevalence: 0.0,
    };
    let mut user_totals: BTreeMap<(&str, Role), (u64, u64)> = BTreeMap::new();

    for (&(user, item), &(role, impressions)) in &exposures {
        let score = scores.score(category, item).unwrap_or(0.0);
        let bucket = buckets.bucket_of(score)?;
        let p = p_star[bucket - 1].ok_or_else(|| {
            Error::domain(format!(
                "bucket {bucket} has impressions on {day} but no calibrated prevalence (empty bucket)"
            ))
        })?;
        let mut rng = KeyedRng::new(
            config.seed,
            &[
                stream::SIMULATE,
                day_key(day),
                fnv1a(user.as_bytes()),
                fnv1a(item.as_bytes()),
            ],
        );
        let flagged = flag_impressions(impressions, p, config.impression_mode, &mut rng);
        let target = match role {
            Role::Control => &mut control,
            Role::Treatment => &mut treatment,
        };
        target.impressions += impressions;
        target.flagged += flagged;
        if config.keep_user_totals {
            let slot = user_totals.entry((user, role)).or_insert((0, 0));
            slot.0 += impressions;
            slot.1 += flagged;
        }
    }

    for (outcome, name) in [(&mut control, "control"), (&mut treatment, "treatment")] {
        if outcome.impressions == 0 {
            return Err(Error::domain(format!(
                "{name} arm ({:?}) has no impressions on {day}",
                outcome.arm
            )));
        }
        outcome.prevalence = outcome.flagged as f64 / outcome.impressions as f64;
    }

    let delta = treatment.prevalence - control.prevalence;
    let user_totals = config.keep_user_totals.then(|| {
        user_totals
            .into_iter()
            .map(|((user, role), (impressions, flagged))| UserDayTotals {
                user: user.to_string(),
                arm: match role {
                    Role::Control => arms.control.clone(),
                    Role::Treatment => arms.treatment.clone(),
                },
                impressions,
                flagged,
            })
            .collect()
    });
    Ok(SimulationResult {
        day,
        control,
        treatment,
        delta,
        user_totals,
    })
}

fn flag_impressions(impressions: u64, p: f64, mode: ImpressionMode, rng: &mut KeyedRng) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return impressions;
    }
    match mode {
        ImpressionMode::ExactLoop => (0..impressions).filter(|_| rng.open01() < p).count() as u64,
        ImpressionMode::BinomialFastPath => Binomial::new(impressions, p)
            .expect("p validated in (0,1)")
            .sample(rng),
    }
}
