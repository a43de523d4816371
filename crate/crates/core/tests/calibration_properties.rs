//! Calibration-table properties validated against exact synthetic oracles:
//! monotonicity recovery, weighting-scheme balance, and exact recovery at a
//! full-population sample.

mod common;

use common::{build_population, PopulationSpec, CATEGORY};
use prevalence_core::calibration::{calibrate, CalibrateParams};
use prevalence_core::datamodel::{Bucketization, Segment};
use prevalence_core::sampling::SampleWeightScheme;
use prevalence_core::synthgen::{
    generate_world, ArmConfig, BetaParams, CategoryConfig, ScoreModel, WorldConfig,
};

fn informative_world(items: usize, users: usize) -> WorldConfig {
    WorldConfig {
        items,
        users,
        days: 2,
        start_day: "2025-06-01".parse().unwrap(),
        seed: 41,
        mean_impressions_per_user_day: 30.0,
        popularity_exponent: 0.8,
        categories: vec![CategoryConfig {
            name: CATEGORY.into(),
            label_rate: 0.15,
            score_model: ScoreModel {
                positive: BetaParams { alpha: 6.0, beta: 2.0 },
                negative: BetaParams { alpha: 1.0, beta: 10.0 },
            },
        }],
        arms: vec![ArmConfig {
            name: "control".into(),
            filter: None,
        }],
    }
}

/// Where the true bucket prevalence is monotone in the bucket index, the
/// calibrated prevalences at n = 10,000 labels show at most 2 inversions.
#[test]
fn calibrated_prevalences_nearly_monotone() {
    let world = generate_world(&informative_world(20_000, 2_000)).unwrap();
    let buckets = Bucketization::equal_width(10).unwrap();

    // Confirm the oracle itself is monotone over non-empty buckets.
    let counts = world.bucket_truth_counts(&buckets, CATEGORY).unwrap();
    let truth: Vec<Option<f64>> = counts
        .iter()
        .map(|&(l, t)| (t > 0).then(|| l as f64 / t as f64))
        .collect();
    let mut last = -1.0;
    for p in truth.iter().flatten() {
        assert!(*p >= last, "fixture oracle must be monotone, got {truth:?}");
        last = *p;
    }

    let scores = world.score_table();
    let labels = world.label_table();
    let params = CalibrateParams::new(CATEGORY, SampleWeightScheme::ImpressionsOnly, 10_000, 77);
    let outcome = calibrate(&world.records, &scores, &labels, &buckets, &params).unwrap();

    let estimated: Vec<f64> = outcome
        .table
        .entries
        .iter()
        .filter_map(|e| e.prevalence)
        .collect();
    let inversions = estimated
        .windows(2)
        .filter(|w| w[1] < w[0])
        .count();
    assert!(
        inversions <= 2,
        "{inversions} inversions in calibrated prevalences {estimated:?}"
    );
}

/// On a skewed world, weighting by impressions-times-score sends strictly
/// more sampled items into the buckets where scores exceed 0.3.
#[test]
fn score_weighting_rebalances_sample_toward_high_buckets() {
    let pop = build_population(&PopulationSpec {
        seed: 21,
        items: 6_000,
        label_rate: 0.05,
        impression_skew: 1.5,
        top_impressions: 50_000,
        uniform_impressions: None,
    });
    let buckets = Bucketization::equal_width(10).unwrap();

    let high_score_count = |scheme: SampleWeightScheme| -> usize {
        let params = CalibrateParams::new(CATEGORY, scheme, 600, 5);
        let outcome = calibrate(&pop.records, &pop.scores, &pop.labels, &buckets, &params).unwrap();
        outcome
            .labeled
            .iter()
            .filter(|it| {
                let score = pop.scores.score(CATEGORY, &it.item).unwrap();
                score > 0.3
            })
            .count()
    };

    let plain = high_score_count(SampleWeightScheme::ImpressionsOnly);
    let rescored = high_score_count(SampleWeightScheme::ImpressionsTimesScore);
    assert!(
        rescored > plain,
        "impressions-times-score ({rescored}) not above impressions-only ({plain})"
    );
}

/// With the sample covering the whole population and uniform impressions,
/// every non-empty bucket prevalence equals the exact conditional frequency.
#[test]
fn full_population_sample_recovers_exact_conditionals() {
    let pop = build_population(&PopulationSpec {
        seed: 31,
        items: 400,
        label_rate: 0.3,
        impression_skew: 0.0,
        top_impressions: 0,
        uniform_impressions: Some(7),
    });
    let buckets = Bucketization::equal_width(10).unwrap();

    // Exact conditional frequency per bucket from direct counting.
    let mut lab = vec![0u64; buckets.len()];
    let mut tot = vec![0u64; buckets.len()];
    for r in &pop.records {
        let score = pop.scores.score(CATEGORY, &r.item).unwrap();
        let b = buckets.bucket_of(score).unwrap();
        tot[b - 1] += r.impressions;
        if prevalence_core::datamodel::LabelSource::label(&pop.labels, &r.item, CATEGORY).unwrap() {
            lab[b - 1] += r.impressions;
        }
    }

    // Capacity above the population size: the sample is the whole world.
    let params = CalibrateParams::new(CATEGORY, SampleWeightScheme::ImpressionsOnly, 1_000, 3);
    let outcome = calibrate(&pop.records, &pop.scores, &pop.labels, &buckets, &params).unwrap();
    assert_eq!(outcome.sample.items.len(), 400);

    for entry in &outcome.table.entries {
        let t = tot[entry.bucket - 1];
        if t == 0 {
            assert!(entry.empty);
            continue;
        }
        let exact = lab[entry.bucket - 1] as f64 / t as f64;
        let got = entry.prevalence.expect("non-empty bucket has a prevalence");
        assert!(
            (got - exact).abs() < 1e-9,
            "bucket {}: calibrated {got} vs exact {exact}",
            entry.bucket
        );
    }
}

/// The same convergence check through the segment machinery: a full-census
/// sample reproduces the exact global prevalence.
#[test]
fn full_population_sample_recovers_global_prevalence() {
    use prevalence_core::hansen_hurwitz::{attach_labels, hh_prevalence};
    use prevalence_core::sampling::draw_sample;

    let pop = build_population(&PopulationSpec {
        seed: 32,
        items: 250,
        label_rate: 0.4,
        impression_skew: 0.0,
        top_impressions: 0,
        uniform_impressions: Some(3),
    });
    let segment = Segment::all();
    let (sample, _) = draw_sample(
        &pop.records,
        &pop.scores,
        CATEGORY,
        &segment,
        SampleWeightScheme::ImpressionsOnly,
        9_999,
        1,
    )
    .unwrap();
    assert_eq!(sample.items.len(), 250);
    let labeled = attach_labels(&sample, &pop.labels, CATEGORY, &pop.records, &segment).unwrap();
    let est = hh_prevalence(&labeled, pop.total_impressions).unwrap();
    assert!(
        (est.point - pop.true_prevalence).abs() < 1e-9,
        "census estimate {} vs exact {}",
        est.point,
        pop.true_prevalence
    );
}
