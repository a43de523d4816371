//! The six pipeline commands. Each one is a pure function of
//! (input files, flags, seed): reruns write byte-identical outputs.

use std::path::Path;

use prevalence_core::calibration::{
    calibrate, logit_params, read_calibration, write_calibration, CalibrateParams,
};
use prevalence_core::datamodel::aggregate::{day_range, total_impressions};
use prevalence_core::datamodel::ingest::{
    ingest_labels, ingest_logs, ingest_scores, write_labels, write_logs, write_scores,
};
use prevalence_core::datamodel::{Day, ImpressionRecord, LabelTable, Segment};
use prevalence_core::hansen_hurwitz::{attach_labels, hh_prevalence, PrevalenceEstimate};
use prevalence_core::inference::{decide, DailyDeltaSeries, InferenceReport};
use prevalence_core::report::{DeltaRow, EstimateRow, OracleRow, SimulationRow};
use prevalence_core::rng::{stream, KeyedRng};
use prevalence_core::sampling::{read_sample, write_sample, SampleFileMeta, SampleWeightScheme};
use prevalence_core::simulation::{
    bucket_draw_rng, draw_bucket_prevalences, simulate_day, ArmRoles, BucketDrawMode,
    DayRunConfig, ImpressionMode,
};
use prevalence_core::surrogate::{arm_delta, impression_shares, surrogate_prevalence};
use prevalence_core::synthgen::{generate_world, WorldConfig};
use prevalence_core::{Error, Result};

use crate::manifest::RunManifest;
use crate::parse::{ArmsSpec, BucketsSpec};
use crate::report_io::{write_report, ReportLine};

/// How `--mode` maps onto the simulation knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimulateMode {
    /// Logit-normal bucket draw, per-impression Bernoulli loop.
    Exact,
    /// Logit-normal bucket draw, binomial fast path.
    Binomial,
    /// Fixed-at-point bucket prevalences, binomial fast path.
    Fixed,
}

impl SimulateMode {
    fn as_str(self) -> &'static str {
        match self {
            SimulateMode::Exact => "exact",
            SimulateMode::Binomial => "binomial",
            SimulateMode::Fixed => "fixed",
        }
    }

    fn bucket_draw(self) -> BucketDrawMode {
        match self {
            SimulateMode::Fixed => BucketDrawMode::FixedAtPoint,
            _ => BucketDrawMode::LogitNormal,
        }
    }

    fn impressions(self) -> ImpressionMode {
        match self {
            SimulateMode::Exact => ImpressionMode::ExactLoop,
            _ => ImpressionMode::BinomialFastPath,
        }
    }
}

fn read_config(path: &Path) -> Result<WorldConfig> {
    let bytes = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&bytes)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

/// Resolve `--category`: explicit flag, or the sole category in the data.
fn resolve_category<'a>(
    flag: Option<&'a str>,
    available: impl Iterator<Item = &'a str>,
    source: &str,
) -> Result<String> {
    let available: Vec<&str> = available.collect();
    match flag {
        Some(c) => {
            if available.iter().any(|&a| a == c) {
                Ok(c.to_string())
            } else {
                Err(Error::domain(format!(
                    "category {c:?} not present in {source}; available: {available:?}"
                )))
            }
        }
        None => match available.as_slice() {
            [only] => Ok((*only).to_string()),
            [] => Err(Error::domain(format!("{source} holds no categories"))),
            many => Err(Error::domain(format!(
                "{source} holds several categories {many:?}; pass --category"
            ))),
        },
    }
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(config_path: &Path, out_dir: &Path) -> Result<()> {
    let config = read_config(config_path)?;
    let world = generate_world(&config)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let logs_path = out_dir.join("logs.ndjson");
    let scores_path = out_dir.join("scores.ndjson");
    let labels_path = out_dir.join("labels.ndjson");
    let oracle_path = out_dir.join("oracle.ndjson");

    write_logs(&logs_path, &world.records)?;
    write_scores(&scores_path, &world.score_table())?;
    write_labels(&labels_path, world.label_rows())?;

    // Exact oracle prevalences per (category, segment, day) plus the
    // whole-window values per arm and overall.
    let mut rows = Vec::new();
    let arms: Vec<&str> = config.arms.iter().map(|a| a.name.as_str()).collect();
    for category in world.categories() {
        let mut segments = vec![Segment::all()];
        segments.extend(arms.iter().map(|&a| Segment::arm(a)));
        for segment in &segments {
            rows.push(ReportLine::Oracle(OracleRow {
                category: category.to_string(),
                segment: segment.label(),
                day: None,
                prevalence: world.true_prevalence(segment, category)?,
            }));
            for day_idx in 0..config.days {
                let day = config.start_day + chrono::Days::new(day_idx as u64);
                let daily = segment.clone().on_day(day);
                rows.push(ReportLine::Oracle(OracleRow {
                    category: category.to_string(),
                    segment: segment.label(),
                    day: Some(day),
                    prevalence: world.true_prevalence(&daily, category)?,
                }));
            }
        }
    }

    let manifest = RunManifest::new("synth")
        .input("config", config_path)?
        .flag("out-dir", out_dir.display())
        .seed(config.seed)
        .window(day_range(&world.records));
    write_report(&oracle_path, &manifest, &rows)?;
    manifest.write_sidecar(&out_dir.join("world"))?;

    println!(
        "world: {} items, {} users, {} days, {} arms, {} log rows, {} impressions",
        config.items,
        config.users,
        config.days,
        config.arms.len(),
        world.records.len(),
        total_impressions(&world.records, &Segment::all())
    );
    for category in world.categories() {
        println!(
            "  {category}: overall prevalence {:.6}",
            world.true_prevalence(&Segment::all(), category)?
        );
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate

#[allow(clippy::too_many_arguments)]
pub struct CalibrateArgs<'a> {
    pub logs: &'a Path,
    pub scores: &'a Path,
    pub labels: &'a Path,
    pub category: Option<&'a str>,
    pub buckets: BucketsSpec,
    pub buckets_raw: String,
    pub scheme: SampleWeightScheme,
    pub n: usize,
    pub seed: u64,
    pub low_confidence_floor: usize,
    pub out: &'a Path,
    pub sample_out: Option<&'a Path>,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let logs = ingest_logs(args.logs)?;
    let scores = ingest_scores(args.scores)?;
    let labels = ingest_labels(args.labels)?;
    let category = resolve_category(args.category, scores.categories(), "the scores file")?;

    let category_scores: Vec<f64> = scores.items_in(&category).map(|(_, s)| s).collect();
    let buckets = args.buckets.resolve(&category_scores)?;

    let mut params = CalibrateParams::new(&category, args.scheme, args.n, args.seed);
    params.low_confidence_floor = args.low_confidence_floor;
    let outcome = calibrate(&logs.records, &scores, &labels, &buckets, &params)?;
    write_calibration(args.out, &outcome.table)?;

    let manifest = RunManifest::new("calibrate")
        .input("logs", args.logs)?
        .input("scores", args.scores)?
        .input("labels", args.labels)?
        .flag("category", &category)
        .flag("buckets", &args.buckets_raw)
        .flag("scheme", args.scheme.as_str())
        .flag("n", args.n)
        .flag("low-confidence-floor", args.low_confidence_floor)
        .flag("out", args.out.display())
        .opt_flag("sample-out", args.sample_out.map(|p| p.display().to_string()))
        .seed(args.seed)
        .calibration_version(&outcome.table.version)
        .window(day_range(&logs.records));
    manifest.write_sidecar(args.out)?;

    if let Some(sample_out) = args.sample_out {
        write_sample(
            sample_out,
            &outcome.sample,
            &SampleFileMeta {
                seed: args.seed,
                scheme: args.scheme,
                capacity: args.n,
            },
        )?;
        manifest.write_sidecar(sample_out)?;
    }

    println!(
        "calibration {} for {category}: {} buckets, {} sampled items ({} with positive weight of {} in population)",
        outcome.table.version,
        outcome.table.buckets.len(),
        outcome.sample.items.len(),
        outcome.diagnostics.positive_weight_items,
        outcome.diagnostics.population_items,
    );
    println!("bucket  prevalence  variance      labeled  marginal  flags");
    for e in &outcome.table.entries {
        let flags = match (e.empty, e.low_confidence) {
            (true, _) => "empty",
            (false, true) => "low-confidence",
            _ => "",
        };
        match e.prevalence {
            Some(p) => println!(
                "{:>6}  {:>10.6}  {:>12.3e}  {:>7}  {:>8.6}  {flags}",
                e.bucket,
                p,
                e.variance.unwrap_or(0.0),
                e.labeled_count,
                e.marginal
            ),
            None => println!("{:>6}  {:>10}  {:>12}  {:>7}  {:>8.6}  {flags}", e.bucket, "-", "-", e.labeled_count, e.marginal),
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// estimate

pub struct EstimateArgs<'a> {
    pub logs: &'a Path,
    pub scores: &'a Path,
    pub calibration: &'a Path,
    pub arms: ArmsSpec,
    pub arms_raw: String,
    pub days: Vec<Day>,
    pub days_raw: String,
    pub out: &'a Path,
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let logs = ingest_logs(args.logs)?;
    let scores = ingest_scores(args.scores)?;
    let table = read_calibration(args.calibration)?;
    let category = table.category.clone();

    let mut rows = Vec::new();
    let mut deltas = Vec::new();
    for &day in &args.days {
        let mut per_role = Vec::new();
        for (role, arm) in [("control", &args.arms.control), ("treatment", &args.arms.treatment)] {
            let segment = Segment::arm(arm).on_day(day);
            let shares = impression_shares(&logs.records, &scores, &segment, &table.buckets, &category)
                .map_err(|e| Error::domain(format!("{role} arm {arm:?} on {day}: {e}")))?;
            let estimate = surrogate_prevalence(&shares, &table)?;
            rows.push(ReportLine::Estimate(EstimateRow {
                category: category.clone(),
                segment: segment.label(),
                day: Some(day),
                estimate: estimate.clone(),
            }));
            per_role.push(estimate);
        }
        let test = arm_delta(&per_role[1], &per_role[0])?;
        deltas.push(test.delta);
        rows.push(ReportLine::Delta(DeltaRow {
            category: category.clone(),
            day,
            control: per_role[0].point,
            treatment: per_role[1].point,
            delta: test.delta,
            z: test.z.is_finite().then_some(test.z),
            p_value: Some(test.p_value),
            degenerate: test.degenerate,
        }));
    }

    let manifest = RunManifest::new("estimate")
        .input("logs", args.logs)?
        .input("scores", args.scores)?
        .input("calibration", args.calibration)?
        .flag("arms", &args.arms_raw)
        .flag("days", &args.days_raw)
        .flag("out", args.out.display())
        .calibration_version(&table.version)
        .window(day_range(&logs.records));
    write_report(args.out, &manifest, &rows)?;

    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    println!(
        "estimate for {category} under calibration {}: {} days, arms control={} treatment={}",
        table.version, args.days.len(), args.arms.control, args.arms.treatment
    );
    for line in &rows {
        if let ReportLine::Delta(d) = line {
            println!(
                "  {}  control {:.6}  treatment {:.6}  delta {:+.6}",
                d.day, d.control, d.treatment, d.delta
            );
        }
    }
    println!("mean daily delta {mean_delta:+.6}");
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

pub struct SimulateArgs<'a> {
    pub logs: &'a Path,
    pub scores: &'a Path,
    pub calibration: &'a Path,
    pub arms: ArmsSpec,
    pub arms_raw: String,
    pub days: Vec<Day>,
    pub days_raw: String,
    pub seed: u64,
    pub repeats: u64,
    pub mode: SimulateMode,
    pub out: &'a Path,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let logs = ingest_logs(args.logs)?;
    let scores = ingest_scores(args.scores)?;
    let table = read_calibration(args.calibration)?;
    let category = table.category.clone();
    let params = logit_params(&table);
    let roles = ArmRoles::new(&args.arms.control, &args.arms.treatment)?;

    // Records in the simulated days must all belong to the two arms, so
    // restrict to the requested window before handing them over.
    let window: Vec<ImpressionRecord> = logs
        .records
        .iter()
        .filter(|r| args.days.contains(&r.day))
        .cloned()
        .collect();

    let mut rows = Vec::new();
    for repeat in 0..args.repeats {
        // Independent, reproducible seed per repeat.
        let rep_seed = KeyedRng::new(args.seed, &[stream::SIMULATE, repeat]).next_word();
        for &day in &args.days {
            let mut draw_rng = bucket_draw_rng(rep_seed, &category, day);
            let p_star = draw_bucket_prevalences(&params, args.mode.bucket_draw(), &mut draw_rng);
            let config = DayRunConfig {
                day,
                seed: rep_seed,
                impression_mode: args.mode.impressions(),
                keep_user_totals: false,
            };
            let result = simulate_day(
                &window,
                &scores,
                &category,
                &table.buckets,
                &p_star,
                &roles,
                &config,
            )?;
            rows.push(ReportLine::Simulation(SimulationRow {
                repeat,
                day,
                category: category.clone(),
                control: result.control,
                treatment: result.treatment,
                delta: result.delta,
            }));
        }
    }

    let manifest = RunManifest::new("simulate")
        .input("logs", args.logs)?
        .input("scores", args.scores)?
        .input("calibration", args.calibration)?
        .flag("arms", &args.arms_raw)
        .flag("days", &args.days_raw)
        .flag("repeats", args.repeats)
        .flag("mode", args.mode.as_str())
        .flag("out", args.out.display())
        .seed(args.seed)
        .calibration_version(&table.version)
        .window(day_range(&logs.records));
    write_report(args.out, &manifest, &rows)?;

    // Per-day mean delta across repeats.
    println!(
        "simulation ({} mode) for {category}: {} repeats x {} days",
        args.mode.as_str(),
        args.repeats,
        args.days.len()
    );
    for &day in &args.days {
        let day_deltas: Vec<f64> = rows
            .iter()
            .filter_map(|l| match l {
                ReportLine::Simulation(s) if s.day == day => Some(s.delta),
                _ => None,
            })
            .collect();
        let mean = day_deltas.iter().sum::<f64>() / day_deltas.len() as f64;
        println!("  {day}  mean delta {mean:+.6}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// delta-test

pub fn cmd_delta_test(input: &Path, alpha: f64, out: &Path) -> Result<()> {
    let lines = crate::report_io::read_report(input)?;
    let mut manifest_version = None;
    let mut delta_rows: Vec<DeltaRow> = Vec::new();
    for line in lines {
        match line {
            ReportLine::Manifest(m) => manifest_version = m.calibration_version.clone(),
            ReportLine::Delta(d) => delta_rows.push(d),
            _ => {}
        }
    }
    if delta_rows.is_empty() {
        return Err(Error::domain(format!(
            "{} holds no daily delta rows; run `estimate` first",
            input.display()
        )));
    }
    let version = manifest_version
        .ok_or_else(|| Error::domain("input manifest carries no calibration version"))?;
    let category = delta_rows[0].category.clone();
    if let Some(other) = delta_rows.iter().find(|d| d.category != category) {
        return Err(Error::domain(format!(
            "mixed categories in input: {category:?} and {:?}",
            other.category
        )));
    }

    delta_rows.sort_by_key(|d| d.day);
    let mut series = DailyDeltaSeries::new("delta-test", &category, &version);
    let mut control_sum = 0.0;
    for d in &delta_rows {
        series.push(d.day, d.delta, &version)?;
        control_sum += d.control;
    }
    let baseline = control_sum / delta_rows.len() as f64;
    let report = decide(&series, alpha, (baseline != 0.0).then_some(baseline))?;

    let manifest = RunManifest::new("delta-test")
        .input("input", input)?
        .flag("alpha", alpha)
        .flag("out", out.display())
        .calibration_version(&version)
        .window(Some((delta_rows[0].day, delta_rows[delta_rows.len() - 1].day)));
    write_report(out, &manifest, &[ReportLine::Inference(report.clone())])?;

    print_inference(&report);
    println!("wrote {}", out.display());
    Ok(())
}

fn print_inference(r: &InferenceReport) {
    println!(
        "sign test over {} days: {} down, {} up, {} zero -> p = {:.6}",
        r.days, r.n_neg, r.n_pos, r.n_zero, r.p_value
    );
    println!(
        "mean daily delta {:+.6}{}",
        r.mean_delta,
        r.relative_delta
            .map(|rel| format!(" ({:+.2}% of control)", 100.0 * rel))
            .unwrap_or_default()
    );
    if let (Some(lo), Some(hi)) = (r.ci_low, r.ci_high) {
        println!("empirical 95% interval [{lo:+.6}, {hi:+.6}]");
    }
    println!(
        "decision at alpha {}: {}",
        r.alpha,
        if r.significant { "SIGNIFICANT" } else { "not significant" }
    );
}

// ---------------------------------------------------------------------------
// hh

pub struct HhArgs<'a> {
    pub logs: &'a Path,
    pub sample: &'a Path,
    pub labels: &'a Path,
    pub category: Option<&'a str>,
    pub segment: Segment,
    pub segment_raw: String,
    pub out: &'a Path,
}

pub fn cmd_hh(args: &HhArgs) -> Result<()> {
    let logs = ingest_logs(args.logs)?;
    let (sample, _meta) = read_sample(args.sample)?;
    let labels: LabelTable = ingest_labels(args.labels)?;
    let category = resolve_category(args.category, labels.categories(), "the labels file")?;

    let labeled = attach_labels(&sample, &labels, &category, &logs.records, &args.segment)?;
    let total = total_impressions(&logs.records, &args.segment);
    let estimate: PrevalenceEstimate = hh_prevalence(&labeled, total)?;

    let manifest = RunManifest::new("hh")
        .input("logs", args.logs)?
        .input("sample", args.sample)?
        .input("labels", args.labels)?
        .flag("category", &category)
        .flag("segment", &args.segment_raw)
        .flag("out", args.out.display())
        .window(day_range(&logs.records));
    let row = ReportLine::Estimate(EstimateRow {
        category: category.clone(),
        segment: args.segment.label(),
        day: None,
        estimate: estimate.clone(),
    });
    write_report(args.out, &manifest, &[row])?;

    println!(
        "hansen-hurwitz estimate for {category} in segment {}: {:.6} (95% CI [{:.6}, {:.6}], n = {})",
        args.segment.label(),
        estimate.point,
        estimate.ci_low,
        estimate.ci_high,
        estimate.n
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

