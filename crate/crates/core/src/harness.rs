//! Monte-Carlo experiment runner: seeds x parameter grid x algorithm
//! variants, with metric aggregation and stable CSV/JSON table output.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Dest;
use crate::channel::{build_capacity_table, CapacityTable, ChannelError};
use crate::delay::weighted_sum_delay;
use crate::oracle::{check_constraints, check_state, ConstraintReport};
use crate::qtcajosa::{
    qtcajosa, qtcajosa_nonadaptive, restrict_destinations, DestRestriction, Solution,
};
use crate::scenario::{scenario_from_value, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("override path `{path}`: {reason}")]
    BadOverride { path: String, reason: String },
    #[error("sweep spec: {0}")]
    BadSweep(String),
    #[error("constraint violation (variant {variant}, seed {seed}): {report:?}")]
    ConstraintViolation {
        variant: String,
        seed: u64,
        report: Box<ConstraintReport>,
    },
}

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

/// Algorithm variant under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "no_leo")]
    NoLeo,
    #[serde(rename = "no_haps")]
    NoHaps,
    #[serde(rename = "nonadaptive")]
    NonAdaptive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::All,
        Variant::NoLeo,
        Variant::NoHaps,
        Variant::NonAdaptive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::All => "all",
            Variant::NoLeo => "no_leo",
            Variant::NoHaps => "no_haps",
            Variant::NonAdaptive => "nonadaptive",
        }
    }

    pub fn solve(&self, scenario: &Scenario<f64>, caps: &CapacityTable<f64>) -> Solution<f64> {
        match self {
            Variant::All => qtcajosa(scenario, caps, restrict_destinations(DestRestriction::All)),
            Variant::NoLeo => qtcajosa(
                scenario,
                caps,
                restrict_destinations(DestRestriction::NoLeo),
            ),
            Variant::NoHaps => qtcajosa(
                scenario,
                caps,
                restrict_destinations(DestRestriction::NoHaps),
            ),
            Variant::NonAdaptive => qtcajosa_nonadaptive(
                scenario,
                caps,
                restrict_destinations(DestRestriction::All),
            ),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Variant::All),
            "no_leo" => Ok(Variant::NoLeo),
            "no_haps" => Ok(Variant::NoHaps),
            "nonadaptive" => Ok(Variant::NonAdaptive),
            other => Err(format!(
                "unknown variant `{other}` (expected all, no_leo, no_haps, nonadaptive)"
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DestHistogram {
    pub local: f64,
    pub haps: f64,
    pub leo: f64,
    pub unallocated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: usize,
    pub dest: Option<Dest>,
    pub subchannel: Option<usize>,
    pub share_hz: f64,
    pub runtime_s: f64,
    pub access_s: f64,
    pub feeder_s: f64,
    pub compute_s: f64,
    pub total_s: f64,
    pub deadline_s: f64,
    pub feasible: bool,
}

/// Metrics of a single run.
///
/// `hat_tau` and `total_delay_s` sum over tasks that are allocated with a
/// finite delay; unallocated or uncomputable tasks are excluded and show up
/// in `dest_histogram.unallocated` and in `feasible_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub hat_tau: f64,
    pub total_delay_s: f64,
    pub feasible_fraction: f64,
    pub dest_histogram: DestHistogram,
    pub per_task: Vec<TaskOutcome>,
    pub runtime_model_s: f64,
    /// Wall-clock seconds; excluded from artifacts so identical seeds
    /// produce byte-identical output.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// Run one algorithm variant against pre-built capacities.
pub fn run_with_caps(
    scenario: &Scenario<f64>,
    caps: &CapacityTable<f64>,
    variant: Variant,
    seed: u64,
) -> Result<RunMetrics, HarnessError> {
    let start = Instant::now();
    let solution = variant.solve(scenario, caps);
    let delays = weighted_sum_delay(&solution.allocation, scenario, caps);

    // Hard gate: a structurally infeasible allocation is an internal bug.
    let mut report = check_constraints(&solution.allocation, scenario, caps);
    let state_report = check_state(&solution.state);
    let c1_flagged = report
        .c1
        .iter()
        .all(|&i| !delays.per_task[i].feasible);
    if !report.structure_ok() || !state_report.structure_ok() || !c1_flagged {
        report.c3.extend(state_report.c3);
        report.c4.extend(state_report.c4);
        report.c5.extend(state_report.c5);
        return Err(HarnessError::ConstraintViolation {
            variant: variant.as_str().into(),
            seed,
            report: Box::new(report),
        });
    }

    let n = scenario.tasks.len() as f64;
    let mut hist = DestHistogram::default();
    let mut total_delay = 0.0;
    let mut feasible = 0usize;
    let mut per_task = Vec::with_capacity(scenario.tasks.len());
    for (i, outcome) in delays.per_task.iter().enumerate() {
        let assignment = &solution.allocation.assignments[i];
        let computed = assignment.is_some() && outcome.breakdown.total.is_finite();
        match (computed, outcome.dest) {
            (true, Some(Dest::Local)) => hist.local += 1.0,
            (true, Some(Dest::Haps)) => hist.haps += 1.0,
            (true, Some(Dest::Leo)) => hist.leo += 1.0,
            _ => hist.unallocated += 1.0,
        }
        if computed {
            total_delay += outcome.breakdown.total;
        }
        if outcome.feasible {
            feasible += 1;
        }
        per_task.push(TaskOutcome {
            task: i,
            dest: outcome.dest,
            subchannel: assignment.as_ref().map(|a| a.subchannel),
            share_hz: assignment.as_ref().map_or(0.0, |a| a.share),
            runtime_s: outcome.breakdown.runtime,
            access_s: outcome.breakdown.access,
            feeder_s: outcome.breakdown.feeder,
            compute_s: outcome.breakdown.compute,
            total_s: outcome.breakdown.total,
            deadline_s: scenario.tasks[i].deadline,
            feasible: outcome.feasible,
        });
    }
    if n > 0.0 {
        hist.local /= n;
        hist.haps /= n;
        hist.leo /= n;
        hist.unallocated /= n;
    }

    Ok(RunMetrics {
        hat_tau: delays.hat_tau,
        total_delay_s: total_delay,
        feasible_fraction: if n > 0.0 { feasible as f64 / n } else { 1.0 },
        dest_histogram: hist,
        per_task,
        runtime_model_s: crate::delay::scenario_runtime_delay(scenario),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Build capacities from `seed` and run one variant.
pub fn run_once(
    scenario: &Scenario<f64>,
    variant: Variant,
    seed: u64,
) -> Result<RunMetrics, HarnessError> {
    let caps = build_capacity_table(scenario, seed)?;
    run_with_caps(scenario, &caps, variant, seed)
}

// ---------------------------------------------------------------------------
// Config overrides
// ---------------------------------------------------------------------------

/// Integral floats are stored as JSON integers so overrides can target
/// integer-typed fields.
pub fn json_number(x: f64) -> serde_json::Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        serde_json::Value::from(x as i64)
    } else {
        serde_json::Value::from(x)
    }
}

/// Set a dotted-path field inside a JSON config tree, creating intermediate
/// objects as needed (typos are still caught by the schema's unknown-field
/// rejection at parse time).
pub fn apply_override(
    config: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<(), HarnessError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::BadOverride {
            path: path.into(),
            reason: "empty path segment".into(),
        });
    }
    let mut node = config;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(HarnessError::BadOverride {
                path: path.into(),
                reason: format!("`{part}`'s parent is not an object"),
            });
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let last = parts[parts.len() - 1];
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(last.to_string(), value);
            Ok(())
        }
        None => Err(HarnessError::BadOverride {
            path: path.into(),
            reason: format!("`{last}`'s parent is not an object"),
        }),
    }
}

/// Parse a `key=value` override; the value is JSON when it parses as JSON,
/// else a bare string.
pub fn parse_override(arg: &str) -> Result<(String, serde_json::Value), HarnessError> {
    let (key, raw) = arg.split_once('=').ok_or_else(|| HarnessError::BadOverride {
        path: arg.into(),
        reason: "expected `path=value`".into(),
    })?;
    let value = serde_json::from_str(raw)
        .map(|v: serde_json::Value| match v.as_f64() {
            Some(x) => json_number(x),
            None => v,
        })
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Declarative sweep: primary axis x optional secondary axis x variants x
/// seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted config path of the swept parameter.
    pub axis: String,
    pub values: Vec<f64>,
    pub secondary_axis: Option<String>,
    #[serde(default)]
    pub secondary_values: Vec<f64>,
    pub variants: Vec<Variant>,
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
}

/// Sweep config document: a scenario plus the sweep description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: serde_json::Value,
    pub sweep: SweepSpec,
}

/// Aggregated metrics of one (axis value, secondary value, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub axis_value: f64,
    pub secondary_axis: Option<String>,
    pub secondary_value: Option<f64>,
    pub variant: Variant,
    pub n_seeds: usize,
    pub hat_tau_mean: f64,
    pub hat_tau_stderr: f64,
    pub total_delay_s_mean: f64,
    pub total_delay_s_stderr: f64,
    pub feasible_fraction_mean: f64,
    pub feasible_fraction_stderr: f64,
    pub frac_local_mean: f64,
    pub frac_haps_mean: f64,
    pub frac_leo_mean: f64,
    pub frac_unallocated_mean: f64,
    /// Mean HAPS+LEO offload fraction.
    pub remote_fraction_mean: f64,
    pub runtime_model_s_mean: f64,
}

/// Per-seed scalar metrics kept in the JSON mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub hat_tau: f64,
    pub total_delay_s: f64,
    pub feasible_fraction: f64,
    pub frac_local: f64,
    pub frac_haps: f64,
    pub frac_leo: f64,
    pub frac_unallocated: f64,
    pub runtime_model_s: f64,
}

impl SeedMetrics {
    fn from_run(seed: u64, m: &RunMetrics) -> Self {
        Self {
            seed,
            hat_tau: m.hat_tau,
            total_delay_s: m.total_delay_s,
            feasible_fraction: m.feasible_fraction,
            frac_local: m.dest_histogram.local,
            frac_haps: m.dest_histogram.haps,
            frac_leo: m.dest_histogram.leo,
            frac_unallocated: m.dest_histogram.unallocated,
            runtime_model_s: m.runtime_model_s,
        }
    }
}

/// One cell of the JSON mirror: raw per-seed metrics per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis_value: f64,
    pub secondary_value: Option<f64>,
    pub variant: Variant,
    pub runs: Vec<SeedMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

fn mean_stderr(samples: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = samples.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Seed list shared by every cell of a sweep, so variant and secondary-axis
/// comparisons see the same random instances while each cell stays
/// independently reproducible from (base_seed, index).
pub fn derive_seeds(base_seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| splitmix64(base_seed, i)).collect()
}

fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cross-product execution with per-cell aggregation. Cells run in parallel;
/// output order is deterministic.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResults, HarnessError> {
    let spec = &config.sweep;
    if spec.values.is_empty() || spec.n_seeds == 0 || spec.variants.is_empty() {
        return Err(HarnessError::BadSweep(
            "values, variants and n_seeds must be nonempty".into(),
        ));
    }
    if spec.secondary_axis.is_some() != !spec.secondary_values.is_empty() {
        return Err(HarnessError::BadSweep(
            "secondary_axis and secondary_values go together".into(),
        ));
    }
    let seeds = derive_seeds(spec.base_seed, spec.n_seeds);

    let secondary: Vec<Option<f64>> = match &spec.secondary_axis {
        Some(_) => spec.secondary_values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut grid = Vec::new();
    for &axis_value in &spec.values {
        for &secondary_value in &secondary {
            grid.push((axis_value, secondary_value));
        }
    }

    // One work unit per (grid point, seed): resolve the scenario and build
    // capacities once, then run every variant against them.
    let units: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..seeds.len()).map(move |s| (g, s)))
        .collect();
    let outcomes: Result<Vec<Vec<RunMetrics>>, HarnessError> = units
        .par_iter()
        .map(|&(g, s)| {
            let (axis_value, secondary_value) = grid[g];
            let seed = seeds[s];
            let mut cfg = config.scenario.clone();
            apply_override(&mut cfg, &spec.axis, json_number(axis_value))?;
            if let (Some(axis2), Some(v2)) = (&spec.secondary_axis, secondary_value) {
                apply_override(&mut cfg, axis2, json_number(v2))?;
            }
            apply_override(&mut cfg, "seed", serde_json::Value::from(seed))?;
            let scenario = scenario_from_value::<f64>(&cfg)?;
            let caps = build_capacity_table(&scenario, seed)?;
            spec.variants
                .iter()
                .map(|&variant| run_with_caps(&scenario, &caps, variant, seed))
                .collect()
        })
        .collect();
    let outcomes = outcomes?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (g, &(axis_value, secondary_value)) in grid.iter().enumerate() {
        for (v, &variant) in spec.variants.iter().enumerate() {
            let runs: Vec<SeedMetrics> = (0..seeds.len())
                .map(|s| SeedMetrics::from_run(seeds[s], &outcomes[g * seeds.len() + s][v]))
                .collect();
            let stat = |f: fn(&SeedMetrics) -> f64| mean_stderr(runs.iter().map(f));
            let (hat_tau_mean, hat_tau_stderr) = stat(|r| r.hat_tau);
            let (total_delay_s_mean, total_delay_s_stderr) = stat(|r| r.total_delay_s);
            let (feasible_fraction_mean, feasible_fraction_stderr) =
                stat(|r| r.feasible_fraction);
            rows.push(SweepRow {
                axis: spec.axis.clone(),
                axis_value,
                secondary_axis: spec.secondary_axis.clone(),
                secondary_value,
                variant,
                n_seeds: seeds.len(),
                hat_tau_mean,
                hat_tau_stderr,
                total_delay_s_mean,
                total_delay_s_stderr,
                feasible_fraction_mean,
                feasible_fraction_stderr,
                frac_local_mean: stat(|r| r.frac_local).0,
                frac_haps_mean: stat(|r| r.frac_haps).0,
                frac_leo_mean: stat(|r| r.frac_leo).0,
                frac_unallocated_mean: stat(|r| r.frac_unallocated).0,
                remote_fraction_mean: stat(|r| r.frac_haps + r.frac_leo).0,
                runtime_model_s_mean: stat(|r| r.runtime_model_s).0,
            });
            cells.push(SweepCell {
                axis_value,
                secondary_value,
                variant,
                runs,
            });
        }
    }
    Ok(SweepResults { rows, cells })
}

/// Stable CSV column set, one row per (axis value, secondary value, variant).
pub const CSV_COLUMNS: [&str; 18] = [
    "axis",
    "axis_value",
    "secondary_axis",
    "secondary_value",
    "variant",
    "n_seeds",
    "hat_tau_mean",
    "hat_tau_stderr",
    "total_delay_s_mean",
    "total_delay_s_stderr",
    "feasible_fraction_mean",
    "feasible_fraction_stderr",
    "frac_local_mean",
    "frac_haps_mean",
    "frac_leo_mean",
    "frac_unallocated_mean",
    "remote_fraction_mean",
    "runtime_model_s_mean",
];

impl SweepResults {
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.axis.clone(),
                r.axis_value.to_string(),
                r.secondary_axis.clone().unwrap_or_default(),
                r.secondary_value.map(|v| v.to_string()).unwrap_or_default(),
                r.variant.as_str().to_string(),
                r.n_seeds.to_string(),
                r.hat_tau_mean.to_string(),
                r.hat_tau_stderr.to_string(),
                r.total_delay_s_mean.to_string(),
                r.total_delay_s_stderr.to_string(),
                r.feasible_fraction_mean.to_string(),
                r.feasible_fraction_stderr.to_string(),
                r.frac_local_mean.to_string(),
                r.frac_haps_mean.to_string(),
                r.frac_leo_mean.to_string(),
                r.frac_unallocated_mean.to_string(),
                r.remote_fraction_mean.to_string(),
                r.runtime_model_s_mean.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable results")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base_config() -> serde_json::Value {
        json!({
            "seed": 3,
            "nodes": {
                "HAPS": { "f_max": 1e10, "n_antennas": 1024, "cosine_exponent": 6.0 },
                "LEO": { "f_max": 5e9, "n_antennas": 4096, "half_beamwidth_deg": 6.0 },
                "UAV": { "f_max": 1e9, "n_antennas_upa": 256 }
            },
            "task_generator": {
                "n_uavs": 2,
                "devices_per_cluster": 4,
                "d_max": 10000,
                "cluster_centers": [[6000, 0], [-6000, 0]]
            }
        })
    }

    #[test]
    fn run_once_is_deterministic() {
        let scenario = scenario_from_value::<f64>(&base_config()).unwrap();
        let mut a = run_once(&scenario, Variant::All, 5).unwrap();
        let mut b = run_once(&scenario, Variant::All, 5).unwrap();
        // Serialized artifacts already skip the wall clock.
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        a.wall_clock_s = 0.0;
        b.wall_clock_s = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn no_leo_variant_never_uses_leo() {
        let scenario = scenario_from_value::<f64>(&base_config()).unwrap();
        let m = run_once(&scenario, Variant::NoLeo, 7).unwrap();
        assert_eq!(m.dest_histogram.leo, 0.0);
        let m2 = run_once(&scenario, Variant::NoHaps, 7).unwrap();
        assert_eq!(m2.dest_histogram.haps, 0.0);
    }

    #[test]
    fn histogram_fractions_sum_to_one() {
        let scenario = scenario_from_value::<f64>(&base_config()).unwrap();
        for variant in Variant::ALL {
            let m = run_once(&scenario, variant, 11).unwrap();
            let h = m.dest_histogram;
            let sum = h.local + h.haps + h.leo + h.unallocated;
            assert!((sum - 1.0).abs() < 1e-12, "{variant:?}: {sum}");
            assert!(m.feasible_fraction >= 0.0 && m.feasible_fraction <= 1.0);
        }
    }

    #[test]
    fn override_paths() {
        let mut cfg = base_config();
        apply_override(&mut cfg, "nodes.LEO.f_max", json_number(1e10)).unwrap();
        assert_eq!(cfg["nodes"]["LEO"]["f_max"], json!(10000000000u64 as i64));
        apply_override(&mut cfg, "task_generator.d_max", json_number(2.5e4)).unwrap();
        assert_eq!(cfg["task_generator"]["d_max"], json!(25000));
        // Leaf creation is allowed; schema catches typos at parse time.
        apply_override(&mut cfg, "bands.n_subchannels", json_number(7.0)).unwrap();
        assert!(scenario_from_value::<f64>(&cfg).is_ok());
        apply_override(&mut cfg, "bandz.n_subchannels", json_number(7.0)).unwrap();
        assert!(scenario_from_value::<f64>(&cfg).is_err());
        // Descending into a non-object fails loudly.
        let err = apply_override(&mut cfg, "seed.inner", json_number(1.0));
        assert!(err.is_err());
    }

    #[test]
    fn parse_override_forms() {
        let (k, v) = parse_override("nodes.LEO.f_max=1e10").unwrap();
        assert_eq!(k, "nodes.LEO.f_max");
        assert_eq!(v, json!(10000000000i64));
        let (_, v) = parse_override("defaults.a2g_environment=rural").unwrap();
        assert_eq!(v, json!("rural"));
        let (_, v) = parse_override("task_generator.task_bits=[1e5,2e5]").unwrap();
        assert!(v.is_array());
        assert!(parse_override("no_equals_sign").is_err());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seeds(42, 8);
        let b = derive_seeds(42, 8);
        assert_eq!(a, b);
        let mut uniq = a.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), a.len());
        assert_ne!(derive_seeds(43, 8), a);
    }

    #[test]
    fn trivial_sweep_reduces_to_run_once() {
        let sweep = SweepConfig {
            scenario: base_config(),
            sweep: SweepSpec {
                axis: "task_generator.d_max".into(),
                values: vec![10_000.0],
                secondary_axis: None,
                secondary_values: vec![],
                variants: vec![Variant::All],
                n_seeds: 1,
                base_seed: 9,
            },
        };
        let results = run_sweep(&sweep).unwrap();
        assert_eq!(results.rows.len(), 1);
        let seed = derive_seeds(9, 1)[0];
        let mut cfg = base_config();
        apply_override(&mut cfg, "task_generator.d_max", json_number(10_000.0)).unwrap();
        apply_override(&mut cfg, "seed", json!(seed)).unwrap();
        let scenario = scenario_from_value::<f64>(&cfg).unwrap();
        let metrics = run_once(&scenario, Variant::All, seed).unwrap();
        let row = &results.rows[0];
        assert_eq!(row.hat_tau_mean, metrics.hat_tau);
        assert_eq!(row.hat_tau_stderr, 0.0);
        assert_eq!(row.total_delay_s_mean, metrics.total_delay_s);
        assert_eq!(row.n_seeds, 1);
    }

    #[test]
    fn sweep_row_count_is_grid_times_variants() {
        let sweep = SweepConfig {
            scenario: base_config(),
            sweep: SweepSpec {
                axis: "task_generator.cycles_per_bit".into(),
                values: vec![50.0, 100.0],
                secondary_axis: Some("nodes.LEO.f_max".into()),
                secondary_values: vec![1e9, 5e9, 1e10],
                variants: vec![Variant::All, Variant::NoLeo],
                n_seeds: 2,
                base_seed: 1,
            },
        };
        let results = run_sweep(&sweep).unwrap();
        assert_eq!(results.rows.len(), 2 * 3 * 2);
        assert_eq!(results.cells.len(), 2 * 3 * 2);
        for cell in &results.cells {
            assert_eq!(cell.runs.len(), 2);
        }
        // Fig-4-style shape: one curve per secondary value.
        let curves: std::collections::BTreeSet<String> = results
            .rows
            .iter()
            .filter(|r| r.variant == Variant::All)
            .map(|r| format!("{}", r.secondary_value.unwrap()))
            .collect();
        assert_eq!(curves.len(), 3);
    }

    #[test]
    fn csv_header_is_stable() {
        let sweep = SweepConfig {
            scenario: base_config(),
            sweep: SweepSpec {
                axis: "task_generator.d_max".into(),
                values: vec![8000.0],
                secondary_axis: None,
                secondary_values: vec![],
                variants: vec![Variant::All],
                n_seeds: 1,
                base_seed: 2,
            },
        };
        let results = run_sweep(&sweep).unwrap();
        let csv = results.to_csv_string();
        let header = csv.lines().next().unwrap();
        assert_eq!(header, CSV_COLUMNS.join(","));
    }

    #[test]
    fn variant_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }
}
