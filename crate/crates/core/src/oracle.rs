//! Independent ground truth at desk scale: a constraint checker, a numeric
//! convex solver for the per-node share problem, and exhaustive enumeration
//! of the joint assignment space.
//!
//! Nothing here shares code with the production solver paths it verifies:
//! shares come from a bisection on the budget multiplier rather than the
//! closed form, and assignments come from enumeration rather than greedy
//! selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{Allocation, Dest, TaskAssignment};
use crate::channel::CapacityTable;
use crate::compute_alloc::ComputeRequest;
use crate::delay::weighted_sum_delay;
use crate::qtcajosa::DestinationSet;
use crate::scalar::Float;
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "instance too large for exhaustive search: {tasks} tasks, {subchannels} subchannels, \
         {uavs} UAVs span ~{estimate:.1e} assignments (limits: {max_tasks}/{max_subchannels}/{max_uavs})"
    )]
    TooLarge {
        tasks: usize,
        subchannels: usize,
        uavs: usize,
        estimate: f64,
        max_tasks: usize,
        max_subchannels: usize,
        max_uavs: usize,
    },
}

// ---------------------------------------------------------------------------
// Constraint checker
// ---------------------------------------------------------------------------

/// Violations per constraint; an empty list means the constraint holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Deadline violations: allocated tasks with `tau_i > tau_i_max`.
    pub c1: Vec<usize>,
    /// Pool violations per node name.
    pub c2: Vec<String>,
    /// Tasks with more than one subchannel, as (uav, task).
    pub c3: Vec<(usize, usize)>,
    /// Subchannels assigned to more than one task, as (uav, subchannel, tasks).
    pub c4: Vec<(usize, usize, Vec<usize>)>,
    /// Offloading without an assigned subchannel, as (uav, task).
    pub c5: Vec<(usize, usize)>,
    /// Non-binary offload decisions (vacuous for boolean state).
    pub c6: Vec<(usize, usize)>,
    /// Non-binary subchannel decisions (vacuous for boolean state).
    pub c7: Vec<(usize, usize)>,
    /// Negative compute shares, as task ids.
    pub c8: Vec<usize>,
}

impl ConstraintReport {
    /// All structural and resource constraints hold (C2-C8).
    pub fn structure_ok(&self) -> bool {
        self.c2.is_empty()
            && self.c3.is_empty()
            && self.c4.is_empty()
            && self.c5.is_empty()
            && self.c6.is_empty()
            && self.c7.is_empty()
            && self.c8.is_empty()
    }

    pub fn all_ok(&self) -> bool {
        self.c1.is_empty() && self.structure_ok()
    }
}

/// Check C1-C8 on a finalized allocation.
///
/// C1 is checked for allocated tasks only (unallocated tasks are reported by
/// the caller's metrics, not as constraint violations) with a 1e-9 relative
/// boundary tolerance matching the delay model's feasibility flag.
pub fn check_constraints<F: Float>(
    alloc: &Allocation<F>,
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    let slack = F::one() + F::cast(1e-9);

    let delays = weighted_sum_delay(alloc, scenario, caps);
    for (i, t) in delays.per_task.iter().enumerate() {
        if t.dest.is_some() && t.breakdown.total > scenario.tasks[i].deadline * slack {
            report.c1.push(i);
        }
    }

    let mut used = [
        (F::zero(), scenario.haps.f_max, "HAPS".to_string()),
        (F::zero(), scenario.leo.f_max, "LEO".to_string()),
    ];
    let mut used_uav = vec![F::zero(); scenario.uavs.len()];
    for (u, cluster) in scenario.clusters.iter().enumerate() {
        let mut subchannel_users: Vec<Vec<usize>> =
            vec![Vec::new(); scenario.bands.n_subchannels];
        for &i in cluster {
            let Some(a) = &alloc.assignments[i] else {
                continue;
            };
            if a.share < F::zero() {
                report.c8.push(i);
            }
            subchannel_users[a.subchannel].push(i);
            match a.dest {
                Dest::Local => used_uav[u] += a.share,
                Dest::Haps => used[0].0 += a.share,
                Dest::Leo => used[1].0 += a.share,
            }
        }
        for (b, users) in subchannel_users.into_iter().enumerate() {
            if users.len() > 1 {
                report.c4.push((u, b, users));
            }
        }
        if used_uav[u] > scenario.uavs[u].f_max * slack {
            report.c2.push(format!("UAV{u}"));
        }
    }
    for (total, cap, name) in used {
        if total > cap * slack {
            report.c2.push(name);
        }
    }
    report
}

/// Matrix-level structural check of a solver working state (C3-C7).
pub fn check_state<F: Float>(state: &crate::qtcajosa::DecisionState<F>) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    for (u, s) in state.per_uav.iter().enumerate() {
        let n_subchannels = s.rho.first().map_or(0, Vec::len);
        for (i, row) in s.rho.iter().enumerate() {
            let row_sum = row.iter().filter(|&&r| r).count();
            if row_sum > 1 {
                report.c3.push((u, i));
            }
            if (s.beta_haps[i] as usize + s.beta_leo[i] as usize) > row_sum {
                report.c5.push((u, i));
            }
        }
        for b in 0..n_subchannels {
            let users: Vec<usize> = (0..s.rho.len()).filter(|&i| s.rho[i][b]).collect();
            if users.len() > 1 {
                report.c4.push((u, b, users));
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Numeric convex oracle
// ---------------------------------------------------------------------------

/// Solve `min sum_i (d_i c_i / tau_i) / f_i` s.t. `sum f_i <= F`,
/// `f_i >= f_min_i` by bisecting the budget multiplier with lower-bound
/// clamping. Returns `None` when the minimums do not fit the budget.
///
/// With `enforce_minimums = false` the bounds are dropped, giving the
/// unconstrained water-filling-style optimum.
pub fn convex_shares_oracle<F: Float>(
    requests: &[ComputeRequest<F>],
    f_max: F,
    enforce_minimums: bool,
) -> Option<Vec<F>> {
    if requests.is_empty() {
        return Some(Vec::new());
    }
    let mins: Vec<F> = if enforce_minimums {
        requests.iter().map(|r| r.f_min()).collect()
    } else {
        vec![F::zero(); requests.len()]
    };
    let total_min: F = mins.iter().copied().sum();
    if !(total_min <= f_max) {
        return None;
    }
    let sqrt_w: Vec<F> = requests
        .iter()
        .map(|r| (r.weight / r.deadline).sqrt())
        .collect();

    // f_i(mu) = max(f_min_i, sqrt(w_i) / sqrt(mu)) is decreasing in mu;
    // bisect until sum f_i(mu) = F to the duality tolerance.
    let spend = |mu: F| -> F {
        sqrt_w
            .iter()
            .zip(&mins)
            .map(|(&s, &m)| (s / mu.sqrt()).max(m))
            .sum()
    };
    let mut lo = F::cast(1e-300);
    let mut hi = F::one();
    while spend(hi) > f_max {
        hi = hi * F::cast(16.0);
        if hi.is_infinite() {
            return Some(mins);
        }
    }
    while spend(lo) < f_max && lo > F::cast(1e-300) {
        lo = lo / F::cast(16.0);
    }
    for _ in 0..500 {
        let mid = (lo * hi).sqrt();
        if spend(mid) > f_max {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * F::cast(1e-15) {
            break;
        }
    }
    let mu = (lo * hi).sqrt();
    Some(
        sqrt_w
            .iter()
            .zip(&mins)
            .map(|(&s, &m)| (s / mu.sqrt()).max(m))
            .collect(),
    )
}

/// Objective value `sum (d c / tau) / f` of a share vector.
pub fn shares_objective<F: Float>(requests: &[ComputeRequest<F>], shares: &[F]) -> F {
    requests
        .iter()
        .zip(shares)
        .map(|(r, &f)| {
            if f > F::zero() {
                (r.weight / r.deadline) / f
            } else {
                F::infinity()
            }
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Exhaustive search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_tasks: usize,
    pub max_subchannels: usize,
    pub max_uavs: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_tasks: 5,
            max_subchannels: 4,
            max_uavs: 2,
        }
    }
}

/// Exhaustive optimum over the joint assignment space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult<F> {
    /// Weighted sum delay of the feasible-allocated set at the optimum.
    pub best_objective: F,
    /// Number of tasks the optimum allocates (all allocated tasks meet C1).
    pub best_feasible_count: usize,
    pub best_allocation: Allocation<F>,
    /// Complete assignments enumerated.
    pub search_space_size: u64,
}

/// Enumerate every injective subchannel assignment and destination choice,
/// optimize shares per node with the numeric convex oracle, and keep the
/// lexicographic best: most tasks allocated feasibly, then smallest
/// weighted sum delay. Candidates in which any allocated task misses its
/// deadline are discarded (dropping that task is always enumerated
/// separately).
pub fn exhaustive_search<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    destinations: DestinationSet,
    limits: OracleLimits,
) -> Result<OracleResult<F>, OracleError> {
    let n_tasks = scenario.tasks.len();
    let b = scenario.bands.n_subchannels;
    let n_dests = 1 + destinations.haps as usize + destinations.leo as usize;
    let estimate = ((1 + b * n_dests) as f64).powi(n_tasks as i32);
    if n_tasks > limits.max_tasks
        || b > limits.max_subchannels
        || scenario.uavs.len() > limits.max_uavs
        || estimate > 2e6
    {
        return Err(OracleError::TooLarge {
            tasks: n_tasks,
            subchannels: b,
            uavs: scenario.uavs.len(),
            estimate,
            max_tasks: limits.max_tasks,
            max_subchannels: limits.max_subchannels,
            max_uavs: limits.max_uavs,
        });
    }

    let mut dests = vec![Dest::Local];
    if destinations.haps {
        dests.push(Dest::Haps);
    }
    if destinations.leo {
        dests.push(Dest::Leo);
    }

    let uav_of: Vec<usize> = (0..n_tasks).map(|i| scenario.uav_of_device(i)).collect();
    let mut choice: Vec<Option<(usize, Dest)>> = vec![None; n_tasks];
    let mut used_subchannel = vec![vec![false; b]; scenario.uavs.len()];
    let mut best: Option<(usize, F, Allocation<F>)> = None;
    let mut search_space = 0u64;

    enumerate(
        scenario,
        caps,
        &dests,
        &uav_of,
        0,
        &mut choice,
        &mut used_subchannel,
        &mut best,
        &mut search_space,
    );

    let (count, objective, allocation) = best.expect("empty assignment always evaluates");
    Ok(OracleResult {
        best_objective: objective,
        best_feasible_count: count,
        best_allocation: allocation,
        search_space_size: search_space,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    dests: &[Dest],
    uav_of: &[usize],
    task: usize,
    choice: &mut Vec<Option<(usize, Dest)>>,
    used_subchannel: &mut Vec<Vec<bool>>,
    best: &mut Option<(usize, F, Allocation<F>)>,
    search_space: &mut u64,
) {
    if task == scenario.tasks.len() {
        *search_space += 1;
        if let Some((count, objective, allocation)) = evaluate(scenario, caps, choice) {
            let better = match best {
                None => true,
                Some((bc, bo, _)) => count > *bc || (count == *bc && objective < *bo),
            };
            if better {
                *best = Some((count, objective, allocation));
            }
        }
        return;
    }
    choice[task] = None;
    enumerate(
        scenario,
        caps,
        dests,
        uav_of,
        task + 1,
        choice,
        used_subchannel,
        best,
        search_space,
    );
    let u = uav_of[task];
    for b in 0..scenario.bands.n_subchannels {
        if used_subchannel[u][b] {
            continue;
        }
        used_subchannel[u][b] = true;
        for &dest in dests {
            choice[task] = Some((b, dest));
            enumerate(
                scenario,
                caps,
                dests,
                uav_of,
                task + 1,
                choice,
                used_subchannel,
                best,
                search_space,
            );
        }
        used_subchannel[u][b] = false;
    }
    choice[task] = None;
}

/// Share-optimize one complete assignment; `None` when some allocated task
/// cannot meet its deadline.
fn evaluate<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    choice: &[Option<(usize, Dest)>],
) -> Option<(usize, F, Allocation<F>)> {
    let tau_op = crate::delay::scenario_runtime_delay(scenario);
    let n_uavs = scenario.uavs.len();
    let uav_of: Vec<usize> = (0..choice.len())
        .map(|i| scenario.uav_of_device(i))
        .collect();
    let local_of = |i: usize| -> usize {
        scenario.clusters[uav_of[i]]
            .iter()
            .position(|&g| g == i)
            .unwrap()
    };

    let mut shares = vec![F::zero(); choice.len()];
    for node in [Dest::Local, Dest::Haps, Dest::Leo] {
        let members: Vec<usize> = (0..choice.len())
            .filter(|&i| matches!(choice[i], Some((_, d)) if d == node))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut load = vec![F::zero(); n_uavs];
        for &i in &members {
            load[uav_of[i]] += scenario.tasks[i].bits;
        }
        // Local compute decouples per UAV; remote nodes pool across UAVs.
        let groups: Vec<(Vec<usize>, F)> = match node {
            Dest::Local => (0..n_uavs)
                .map(|u| {
                    (
                        members.iter().copied().filter(|&i| uav_of[i] == u).collect(),
                        scenario.uavs[u].f_max,
                    )
                })
                .collect(),
            Dest::Haps => vec![(members.clone(), scenario.haps.f_max)],
            Dest::Leo => vec![(members.clone(), scenario.leo.f_max)],
        };
        for (group, pool) in groups {
            if group.is_empty() {
                continue;
            }
            let reqs: Vec<ComputeRequest<F>> = group
                .iter()
                .map(|&i| {
                    let u = uav_of[i];
                    let (b, _) = choice[i].unwrap();
                    let access = scenario.tasks[i].bits / caps.r_access[u][local_of(i)][b];
                    let feeder = match node {
                        Dest::Local => F::zero(),
                        Dest::Haps => crate::delay::feeder_delay(
                            load[u],
                            caps.r_feeder_haps[u],
                            F::zero(),
                            false,
                        ),
                        Dest::Leo => crate::delay::feeder_delay(
                            load[u],
                            caps.r_feeder_leo[u],
                            scenario.uavs[u].position.distance_to(&scenario.leo.position),
                            true,
                        ),
                    };
                    ComputeRequest {
                        task_id: i,
                        weight: scenario.tasks[i].cycles(),
                        deadline: scenario.tasks[i].deadline,
                        arrival: tau_op + access + feeder,
                    }
                })
                .collect();
            let solved = convex_shares_oracle(&reqs, pool, true)?;
            for (r, f) in reqs.iter().zip(solved) {
                shares[r.task_id] = f;
            }
        }
    }

    let allocation = Allocation {
        assignments: choice
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.map(|(b, dest)| TaskAssignment {
                    subchannel: b,
                    dest,
                    share: shares[i],
                })
            })
            .collect(),
    };
    let report = weighted_sum_delay(&allocation, scenario, caps);
    let mut count = 0;
    for (i, t) in report.per_task.iter().enumerate() {
        if choice[i].is_some() {
            if !t.feasible {
                return None;
            }
            count += 1;
        }
    }
    Some((count, report.hat_tau, allocation))
}

// ---------------------------------------------------------------------------
// Greedy-vs-oracle comparison
// ---------------------------------------------------------------------------

/// One row of the optimality-gap table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub seed: u64,
    pub n_tasks: usize,
    pub n_subchannels: usize,
    pub greedy_feasible: usize,
    pub oracle_feasible: usize,
    /// Weighted sum delay over the greedy solution's feasible tasks.
    pub greedy_objective: f64,
    pub oracle_objective: f64,
    /// Relative gap when both allocate the same number of tasks, `+inf`
    /// when the oracle serves more.
    pub gap: f64,
    pub search_space: u64,
}

/// Run the greedy solver and the exhaustive oracle on one instance.
///
/// Both sides are scored the same way: tasks allocated and meeting C1,
/// ranked lexicographically by count then weighted sum delay.
pub fn compare_with_greedy(
    scenario: &Scenario<f64>,
    caps: &CapacityTable<f64>,
    destinations: DestinationSet,
    limits: OracleLimits,
    seed: u64,
) -> Result<GapRecord, OracleError> {
    let solution = crate::qtcajosa::qtcajosa(scenario, caps, destinations);
    let delays = weighted_sum_delay(&solution.allocation, scenario, caps);
    let mut greedy_feasible = 0usize;
    let mut greedy_objective = 0.0;
    for (i, t) in delays.per_task.iter().enumerate() {
        if t.dest.is_some() && t.feasible {
            greedy_feasible += 1;
            greedy_objective += t.breakdown.total / scenario.tasks[i].deadline;
        }
    }

    let oracle = exhaustive_search(scenario, caps, destinations, limits)?;
    let gap = if greedy_feasible == oracle.best_feasible_count {
        if oracle.best_objective > 0.0 {
            ((greedy_objective - oracle.best_objective) / oracle.best_objective).max(0.0)
        } else {
            0.0
        }
    } else if greedy_feasible < oracle.best_feasible_count {
        f64::INFINITY
    } else {
        // The greedy heuristic can never beat an exhaustive optimum; this
        // marks an objective-evaluation bug.
        f64::NEG_INFINITY
    };
    Ok(GapRecord {
        seed,
        n_tasks: scenario.tasks.len(),
        n_subchannels: scenario.bands.n_subchannels,
        greedy_feasible,
        oracle_feasible: oracle.best_feasible_count,
        greedy_objective,
        oracle_objective: oracle.best_objective,
        gap,
        search_space: oracle.search_space_size,
    })
}

/// Deterministic random desk-scale instance for oracle comparisons:
/// one cluster, a handful of tasks, destinations of all three tiers viable.
pub fn random_tiny_scenario(seed: u64, max_tasks: usize, max_subchannels: usize) -> Scenario<f64> {
    use crate::scenario::{ClusterConfig, DeviceConfig, ScenarioConfig, TaskConfig};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xD5C);
    let n_tasks = rng.gen_range(1..=max_tasks);
    let n_subchannels = rng.gen_range(1..=max_subchannels);

    let mut config = ScenarioConfig {
        seed,
        ..Default::default()
    };
    config.bands.n_subchannels = Some(n_subchannels);
    // Arrays sized so both feeder tiers close their Ka-band link budgets.
    config.nodes.uav.n_antennas_upa = Some(256);
    config.nodes.haps.n_antennas = Some(1024);
    config.nodes.leo.n_antennas = Some(4096);
    config.nodes.leo.half_beamwidth_deg = Some(6.0);
    config.nodes.uav.f_max = Some(10f64.powf(rng.gen_range(8.0..9.3)));
    config.nodes.haps.f_max = Some(10f64.powf(rng.gen_range(9.0..10.0)));
    config.nodes.leo.f_max = Some(10f64.powf(rng.gen_range(8.7..9.7)));

    for _ in 0..n_tasks {
        let radius = 2000.0 * rng.gen::<f64>().sqrt();
        let angle = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        config.nodes.devices.push(DeviceConfig {
            position: [radius * angle.cos(), radius * angle.sin(), 0.0],
            tx_power: None,
        });
    }
    config.clusters.push(ClusterConfig {
        members: (0..n_tasks).collect(),
        uav_position: None,
        uav_f_max: None,
    });
    for device in 0..n_tasks {
        config.tasks.push(TaskConfig {
            device,
            bits: rng.gen_range(1.0e5..5.0e6),
            cycles_per_bit: Some(rng.gen_range(50.0..300.0)),
            deadline: Some(rng.gen_range(5.0..30.0)),
        });
    }
    config
        .resolve()
        .expect("generated tiny instance is schema-valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtcajosa::{restrict_destinations, DestRestriction};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn tiny(seed: u64, max_tasks: usize, max_b: usize) -> (Scenario<f64>, CapacityTable<f64>) {
        let s = random_tiny_scenario(seed, max_tasks, max_b);
        let caps = crate::channel::build_capacity_table(&s, seed).unwrap();
        (s, caps)
    }

    #[test]
    fn empty_allocation_passes_vacuously() {
        let (s, caps) = tiny(1, 3, 3);
        let report = check_constraints(&Allocation::empty(s.tasks.len()), &s, &caps);
        assert!(report.all_ok());
    }

    #[test]
    fn shared_subchannel_reports_c4() {
        let (s, caps) = tiny(4, 3, 3);
        if s.tasks.len() < 2 {
            return;
        }
        let mut alloc = Allocation::empty(s.tasks.len());
        for i in 0..2 {
            alloc.assignments[i] = Some(TaskAssignment {
                subchannel: 0,
                dest: Dest::Local,
                share: 1e8,
            });
        }
        let report = check_constraints(&alloc, &s, &caps);
        assert_eq!(report.c4.len(), 1);
        let (u, b, users) = &report.c4[0];
        assert_eq!((*u, *b), (0, 0));
        assert_eq!(users.as_slice(), [0, 1]);
    }

    #[test]
    fn beta_without_rho_reports_c5() {
        use crate::qtcajosa::{DecisionState, UavState};
        // Hand-build a state with beta set but no subchannel.
        let mut uav = UavState::<f64>::new(2, 3, restrict_destinations(DestRestriction::All));
        uav.beta_haps[1] = true;
        let state = DecisionState {
            per_uav: vec![uav],
            pool_uav: vec![1e9],
            pool_haps: 1e10,
            pool_leo: 5e9,
        };
        let report = check_state(&state);
        assert_eq!(report.c5, vec![(0, 1)]);
    }

    #[test]
    fn pool_overdraw_reports_c2() {
        let (s, caps) = tiny(6, 3, 3);
        let mut alloc = Allocation::empty(s.tasks.len());
        alloc.assignments[0] = Some(TaskAssignment {
            subchannel: 0,
            dest: Dest::Local,
            share: s.uavs[0].f_max * 2.0,
        });
        let report = check_constraints(&alloc, &s, &caps);
        assert_eq!(report.c2, vec!["UAV0".to_string()]);
    }

    #[test]
    fn convex_oracle_single_request_takes_everything() {
        let reqs = vec![ComputeRequest {
            task_id: 0,
            weight: 1e8,
            deadline: 10.0,
            arrival: 0.0,
        }];
        let shares = convex_shares_oracle(&reqs, 3e9, true).unwrap();
        assert_relative_eq!(shares[0], 3e9, max_relative = 1e-9);
    }

    #[test]
    fn convex_oracle_kkt_residuals() {
        // With bounds active, unbounded tasks share the residual budget
        // proportionally to their sqrt weights (KKT stationarity).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let n = rng.gen_range(2..=8);
            let reqs: Vec<ComputeRequest<f64>> = (0..n)
                .map(|i| ComputeRequest {
                    task_id: i,
                    weight: rng.gen_range(1e6..1e9),
                    deadline: rng.gen_range(2.0..40.0),
                    arrival: rng.gen_range(0.0..1.8),
                })
                .collect();
            let total_min: f64 = reqs.iter().map(|r| r.f_min()).sum();
            let f_max = total_min * rng.gen_range(1.1..3.0);
            let shares = convex_shares_oracle(&reqs, f_max, true).unwrap();
            let spent: f64 = shares.iter().sum();
            assert!((spent - f_max).abs() <= f_max * 1e-8, "budget residual");
            // Stationarity: w_i / f_i^2 equal across tasks strictly above
            // their bound (equal to the multiplier), within 1e-8.
            let unbound: Vec<usize> = (0..n)
                .filter(|&i| shares[i] > reqs[i].f_min() * (1.0 + 1e-9))
                .collect();
            if unbound.len() >= 2 {
                let grad = |i: usize| {
                    (reqs[i].weight / reqs[i].deadline) / (shares[i] * shares[i])
                };
                let g0 = grad(unbound[0]);
                for &i in &unbound[1..] {
                    assert!(
                        (grad(i) - g0).abs() <= g0 * 1e-8,
                        "KKT residual {} vs {}",
                        grad(i),
                        g0
                    );
                }
            }
        }
    }

    #[test]
    fn infeasible_minimums_return_none() {
        let reqs = vec![ComputeRequest {
            task_id: 0,
            weight: 1e9,
            deadline: 1.0,
            arrival: 0.0,
        }];
        assert!(convex_shares_oracle(&reqs, 1e8, true).is_none());
        assert!(convex_shares_oracle(&reqs, 1e8, false).is_some());
    }

    #[test]
    fn single_task_oracle_equals_greedy() {
        for seed in [3u64, 11, 19] {
            let (s, caps) = tiny(seed, 1, 3);
            let limits = OracleLimits::default();
            let record =
                compare_with_greedy(&s, &caps, restrict_destinations(DestRestriction::All), limits, seed)
                    .unwrap();
            assert_eq!(record.greedy_feasible, record.oracle_feasible);
            assert!(record.gap.is_finite());
            assert!(record.gap.abs() < 1e-9, "gap {}", record.gap);
        }
    }

    #[test]
    fn oracle_best_passes_constraints_and_greedy_never_wins() {
        for seed in 0..15u64 {
            let (s, caps) = tiny(seed, 4, 3);
            let dests = restrict_destinations(DestRestriction::All);
            let oracle = exhaustive_search(&s, &caps, dests, OracleLimits::default()).unwrap();
            let report = check_constraints(&oracle.best_allocation, &s, &caps);
            assert!(report.all_ok(), "seed {seed}: {report:?}");
            let record = compare_with_greedy(&s, &caps, dests, OracleLimits::default(), seed).unwrap();
            assert!(
                record.gap >= 0.0,
                "seed {seed}: greedy beat the oracle (gap {})",
                record.gap
            );
        }
    }

    #[test]
    fn restricted_oracle_never_beats_full() {
        for seed in [2u64, 8, 21] {
            let (s, caps) = tiny(seed, 3, 2);
            let limits = OracleLimits::default();
            let full =
                exhaustive_search(&s, &caps, restrict_destinations(DestRestriction::All), limits)
                    .unwrap();
            for variant in [DestRestriction::NoLeo, DestRestriction::NoHaps] {
                let restricted =
                    exhaustive_search(&s, &caps, restrict_destinations(variant), limits).unwrap();
                assert!(
                    full.best_feasible_count > restricted.best_feasible_count
                        || (full.best_feasible_count == restricted.best_feasible_count
                            && full.best_objective <= restricted.best_objective * (1.0 + 1e-12)),
                    "seed {seed} variant {variant:?}"
                );
            }
        }
    }

    #[test]
    fn oversized_instance_refused_with_estimate() {
        let (s, caps) = tiny(1, 4, 3);
        let limits = OracleLimits {
            max_tasks: 1,
            ..Default::default()
        };
        if s.tasks.len() > 1 {
            let err = exhaustive_search(
                &s,
                &caps,
                restrict_destinations(DestRestriction::All),
                limits,
            )
            .unwrap_err();
            assert!(err.to_string().contains("assignments"));
        }
    }

    #[test]
    fn search_space_matches_manual_count_for_one_task() {
        let (s, caps) = tiny(3, 1, 3);
        assert_eq!(s.tasks.len(), 1);
        let oracle = exhaustive_search(
            &s,
            &caps,
            restrict_destinations(DestRestriction::All),
            OracleLimits::default(),
        )
        .unwrap();
        // Unallocated plus B subchannels x 3 destinations.
        assert_eq!(
            oracle.search_space_size,
            1 + 3 * s.bands.n_subchannels as u64
        );
    }
}
