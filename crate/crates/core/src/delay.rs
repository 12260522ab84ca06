//! Delay components, the weighted-sum objective and the algorithm-runtime
//! operation counts.
//!
//! `+inf` is the uniform sentinel for "unallocated / out of coverage"; it
//! propagates through sums so an unallocatable task carries an infinite
//! total delay rather than an error.

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Dest};
use crate::channel::CapacityTable;
use crate::scalar::{Float, SPEED_OF_LIGHT};
use crate::scenario::Scenario;

/// Additive decomposition of one task's total delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown<F> {
    /// Algorithm runtime charge `tau_op` (same for every task).
    pub runtime: F,
    /// Device -> UAV transmission delay.
    pub access: F,
    /// UAV -> remote transmission delay incl. LEO round-trip propagation;
    /// zero when computed locally.
    pub feeder: F,
    /// Computing delay at the assigned node.
    pub compute: F,
    pub total: F,
}

impl<F: Float> DelayBreakdown<F> {
    fn new(runtime: F, access: F, feeder: F, compute: F) -> Self {
        Self {
            runtime,
            access,
            feeder,
            compute,
            total: runtime + access + feeder + compute,
        }
    }
}

/// Device -> UAV transmission delay for a task with at most one assigned
/// subchannel; `+inf` when unassigned.
pub fn access_delay<F: Float>(bits: F, rho_row: &[bool], rates: &[F]) -> F {
    debug_assert!(rho_row.iter().filter(|&&r| r).count() <= 1);
    match rho_row.iter().position(|&r| r) {
        Some(b) if rates[b] > F::zero() => bits / rates[b],
        _ => F::infinity(),
    }
}

/// UAV -> remote transmission delay for an aggregated offload load, plus the
/// round-trip propagation term when `include_rtt` (LEO links only).
pub fn feeder_delay<F: Float>(load_bits: F, rate: F, distance: F, include_rtt: bool) -> F {
    let propagation = if include_rtt {
        F::cast(2.0) * distance / F::cast(SPEED_OF_LIGHT)
    } else {
        F::zero()
    };
    if load_bits == F::zero() {
        return propagation;
    }
    if rate > F::zero() {
        load_bits / rate + propagation
    } else {
        F::infinity()
    }
}

/// Computing delay `d c / f`; `+inf` for a zero share.
pub fn compute_delay<F: Float>(bits: F, cycles_per_bit: F, f: F) -> F {
    if f > F::zero() {
        bits * cycles_per_bit / f
    } else {
        F::infinity()
    }
}

/// Elementary-operation count of the joint offloading/subchannel stage:
/// `I (6 I^2 + 6 I B + 100 I + 3 B + 100)`.
pub fn op_count_qtcajosa(n_tasks: u64, n_subchannels: u64) -> u64 {
    n_tasks
        * (6 * n_tasks * n_tasks
            + 6 * n_tasks * n_subchannels
            + 100 * n_tasks
            + 3 * n_subchannels
            + 100)
}

/// Elementary-operation count of the computing-resource stage:
/// `(U + 2)(2 I_u^2 + 24 I_u + 15)`.
pub fn op_count_resource_alloc(n_uavs: u64, max_cluster: u64) -> u64 {
    (n_uavs + 2) * (2 * max_cluster * max_cluster + 24 * max_cluster + 15)
}

/// Algorithm runtime delay `o_op c_op / F_k^max + tau_RTT` for centralized
/// execution at a node with compute pool `f_max`.
pub fn runtime_delay<F: Float>(o_op: u64, cycles_per_op: F, f_max: F, rtt: F) -> F {
    if o_op == 0 {
        return rtt;
    }
    if f_max > F::zero() {
        F::cast(o_op as f64) * cycles_per_op / f_max + rtt
    } else {
        F::infinity()
    }
}

/// Maximum round-trip propagation time between the ground devices and the
/// executor node.
pub fn max_round_trip<F: Float>(scenario: &Scenario<F>) -> F {
    let exec = scenario.executor_position();
    let farthest = scenario
        .devices
        .iter()
        .map(|d| d.position.distance_to(&exec))
        .fold(F::zero(), F::max);
    F::cast(2.0) * farthest / F::cast(SPEED_OF_LIGHT)
}

/// The full runtime charge for a scenario: both algorithm stages executed at
/// the configured coordinator node.
pub fn scenario_runtime_delay<F: Float>(scenario: &Scenario<F>) -> F {
    let o_op = op_count_qtcajosa(
        scenario.tasks.len() as u64,
        scenario.bands.n_subchannels as u64,
    ) + op_count_resource_alloc(
        scenario.uavs.len() as u64,
        scenario.max_cluster_size() as u64,
    );
    runtime_delay(
        o_op,
        scenario.runtime.cycles_per_operation,
        scenario.executor_f_max(),
        max_round_trip(scenario),
    )
}

/// Per-task delay outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDelay<F> {
    pub breakdown: DelayBreakdown<F>,
    pub dest: Option<Dest>,
    /// Deadline met (with a 1e-9 relative boundary tolerance for shares
    /// pinned exactly at the minimum).
    pub feasible: bool,
}

/// Weighted-sum-delay evaluation of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport<F> {
    /// `sum_i tau_i / tau_i_max` over allocated tasks with finite delay;
    /// unallocated (or uncomputable) tasks are excluded and flagged.
    pub hat_tau: F,
    pub per_task: Vec<TaskDelay<F>>,
}

/// Evaluate every task's delay decomposition and the weighted sum objective.
///
/// The feeder term of a task offloaded to `k` uses the aggregate load of all
/// tasks its UAV offloads to `k`, so committing one more task slows every
/// co-offloaded one.
pub fn weighted_sum_delay<F: Float>(
    alloc: &Allocation<F>,
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
) -> DelayReport<F> {
    let tau_op = scenario_runtime_delay(scenario);
    let feasibility_slack = F::one() + F::cast(1e-9);

    // Aggregate feeder loads per (UAV, remote destination).
    let n_uavs = scenario.uavs.len();
    let mut load_haps = vec![F::zero(); n_uavs];
    let mut load_leo = vec![F::zero(); n_uavs];
    for (u, cluster) in scenario.clusters.iter().enumerate() {
        for &i in cluster {
            if let Some(a) = &alloc.assignments[i] {
                match a.dest {
                    Dest::Haps => load_haps[u] += scenario.tasks[i].bits,
                    Dest::Leo => load_leo[u] += scenario.tasks[i].bits,
                    Dest::Local => {}
                }
            }
        }
    }

    let mut per_task = vec![
        TaskDelay {
            breakdown: DelayBreakdown::new(tau_op, F::infinity(), F::zero(), F::infinity()),
            dest: None,
            feasible: false,
        };
        scenario.tasks.len()
    ];
    let mut hat_tau = F::zero();

    for (u, cluster) in scenario.clusters.iter().enumerate() {
        for (local, &i) in cluster.iter().enumerate() {
            let Some(a) = &alloc.assignments[i] else {
                continue;
            };
            let task = &scenario.tasks[i];
            let mut rho_row = vec![false; scenario.bands.n_subchannels];
            rho_row[a.subchannel] = true;
            let access = access_delay(task.bits, &rho_row, &caps.r_access[u][local]);
            let feeder = match a.dest {
                Dest::Local => F::zero(),
                Dest::Haps => feeder_delay(load_haps[u], caps.r_feeder_haps[u], F::zero(), false),
                Dest::Leo => feeder_delay(
                    load_leo[u],
                    caps.r_feeder_leo[u],
                    scenario.uavs[u].position.distance_to(&scenario.leo.position),
                    true,
                ),
            };
            let compute = compute_delay(task.bits, task.cycles_per_bit, a.share);
            let breakdown = DelayBreakdown::new(tau_op, access, feeder, compute);
            let feasible = breakdown.total <= task.deadline * feasibility_slack;
            if breakdown.total.is_finite() {
                hat_tau += breakdown.total / task.deadline;
            }
            per_task[i] = TaskDelay {
                breakdown,
                dest: Some(a.dest),
                feasible,
            };
        }
    }

    DelayReport { hat_tau, per_task }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::TaskAssignment;
    use approx::assert_relative_eq;

    #[test]
    fn access_delay_examples() {
        assert_eq!(access_delay(1.4e6, &[true, false], &[1.4e6, 2.8e6]), 1.0);
        assert!(access_delay(1.4e6f64, &[false, false], &[1.4e6, 2.8e6]).is_infinite());
        // Randomized check against a direct division.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let bits = rng.gen_range(1e5..1e7);
            let b = rng.gen_range(0..4usize);
            let rates: Vec<f64> = (0..4).map(|_| rng.gen_range(1e5..1e8)).collect();
            let mut row = [false; 4];
            row[b] = true;
            assert_relative_eq!(
                access_delay(bits, &row, &rates),
                bits / rates[b],
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn feeder_delay_examples() {
        // LEO overhead at 500 km with no load: pure round-trip propagation.
        assert_relative_eq!(
            feeder_delay(0.0, 1e8, 5e5, true),
            0.0033356409519815205,
            max_relative = 1e-12
        );
        // HAPS has no propagation term regardless of distance.
        assert_eq!(feeder_delay(0.0, 1e8, 19_880.0, false), 0.0);
        assert_relative_eq!(
            feeder_delay(1e7, 1e8, 5e5, true),
            0.1 + 0.0033356409519815205,
            max_relative = 1e-12
        );
        assert!(feeder_delay(1.0f64, 0.0, 5e5, true).is_infinite());
    }

    #[test]
    fn compute_delay_examples() {
        assert_relative_eq!(compute_delay(1e6, 100.0, 1e9), 0.1, max_relative = 1e-15);
        assert!(compute_delay(1e6f64, 100.0, 0.0).is_infinite());
        assert_relative_eq!(
            compute_delay(1e6, 100.0, 2e9),
            compute_delay(1e6, 100.0, 1e9) / 2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn op_count_formulas() {
        assert_eq!(op_count_qtcajosa(1, 1), 215);
        assert_eq!(op_count_qtcajosa(10, 14), 25_820);
        assert_eq!(op_count_qtcajosa(0, 14), 0);
        assert_eq!(op_count_resource_alloc(1, 1), 123);
        assert_eq!(op_count_resource_alloc(4, 10), 2_730);
        assert_eq!(op_count_resource_alloc(3, 0), 5 * 15);
    }

    #[test]
    fn runtime_delay_examples() {
        assert_relative_eq!(runtime_delay(1_000_000, 1.0, 1e9, 0.0), 1e-3, max_relative = 1e-12);
        // Executor at 20 km with the farthest device 20 km below.
        assert_relative_eq!(
            runtime_delay(0, 1.0, 1e9, 2.0 * 2e4 / SPEED_OF_LIGHT),
            1.3342563807926082e-4,
            max_relative = 1e-12
        );
        // Combined, against a hand-computed sum.
        let o = 25_820u64;
        let hand = 25_820.0 * 2.0 / 5e9 + 1.2e-4;
        assert_relative_eq!(runtime_delay(o, 2.0, 5e9, 1.2e-4), hand, max_relative = 1e-12);
        assert!(runtime_delay(5, 1.0f64, 0.0, 0.0).is_infinite());
    }

    fn two_task_scenario() -> Scenario<f64> {
        crate::scenario::load_scenario(
            r#"{
            "nodes": {
                "UAV": { "f_max": 1e9 },
                "devices": [{ "position": [100, 0, 0] }, { "position": [-100, 0, 0] }]
            },
            "clusters": [{ "members": [0, 1], "uav_position": [0, 0, 120] }],
            "tasks": [
                { "device": 0, "bits": 1e6, "cycles_per_bit": 100, "deadline": 20 },
                { "device": 1, "bits": 1e6, "cycles_per_bit": 100, "deadline": 20 }
            ]
        }"#,
        )
        .unwrap()
    }

    fn uniform_caps(scenario: &Scenario<f64>, r_access: f64) -> CapacityTable<f64> {
        CapacityTable {
            r_access: scenario
                .clusters
                .iter()
                .map(|c| vec![vec![r_access; scenario.bands.n_subchannels]; c.len()])
                .collect(),
            r_feeder_haps: vec![1e8; scenario.uavs.len()],
            r_feeder_leo: vec![2e8; scenario.uavs.len()],
        }
    }

    #[test]
    fn single_task_local_weighted_sum() {
        let mut scenario = two_task_scenario();
        scenario.tasks.truncate(1);
        scenario.devices.truncate(1);
        scenario.clusters[0].truncate(1);
        let caps = uniform_caps(&scenario, 2e6);
        let mut alloc = Allocation::empty(1);
        alloc.assignments[0] = Some(TaskAssignment {
            subchannel: 0,
            dest: Dest::Local,
            share: 1e9,
        });
        let report = weighted_sum_delay(&alloc, &scenario, &caps);
        let tau_op = scenario_runtime_delay(&scenario);
        let expected = (tau_op + 1e6 / 2e6 + 1e6 * 100.0 / 1e9) / 20.0;
        assert_relative_eq!(report.hat_tau, expected, max_relative = 1e-12);
        let b = &report.per_task[0].breakdown;
        assert_eq!(b.feeder, 0.0);
        assert_relative_eq!(b.total, b.runtime + b.access + b.feeder + b.compute);
    }

    #[test]
    fn two_identical_tasks_with_split_shares() {
        let scenario = two_task_scenario();
        let caps = uniform_caps(&scenario, 2e6);
        // Equal weights: the closed-form split gives each half the pool.
        let mut alloc = Allocation::empty(2);
        for (i, a) in alloc.assignments.iter_mut().enumerate() {
            *a = Some(TaskAssignment {
                subchannel: i,
                dest: Dest::Local,
                share: 5e8,
            });
        }
        let report = weighted_sum_delay(&alloc, &scenario, &caps);
        let tau_op = scenario_runtime_delay(&scenario);
        let single = (tau_op + 0.5 + 1e6 * 100.0 / 5e8) / 20.0;
        assert_relative_eq!(report.hat_tau, 2.0 * single, max_relative = 1e-12);
    }

    #[test]
    fn zero_tasks_zero_objective() {
        let mut scenario = two_task_scenario();
        scenario.tasks.clear();
        scenario.devices.clear();
        scenario.clusters[0].clear();
        let caps = uniform_caps(&scenario, 2e6);
        let report = weighted_sum_delay(&Allocation::empty(0), &scenario, &caps);
        assert_eq!(report.hat_tau, 0.0);
    }

    #[test]
    fn unallocated_task_flagged_infinite() {
        let scenario = two_task_scenario();
        let caps = uniform_caps(&scenario, 2e6);
        let mut alloc = Allocation::empty(2);
        alloc.assignments[0] = Some(TaskAssignment {
            subchannel: 0,
            dest: Dest::Local,
            share: 1e9,
        });
        let report = weighted_sum_delay(&alloc, &scenario, &caps);
        assert!(report.per_task[1].breakdown.total.is_infinite());
        assert!(!report.per_task[1].feasible);
        assert!(report.hat_tau.is_finite());
    }

    #[test]
    fn deadline_scaling_divides_weights() {
        let scenario = two_task_scenario();
        let caps = uniform_caps(&scenario, 2e6);
        let mut alloc = Allocation::empty(2);
        for (i, a) in alloc.assignments.iter_mut().enumerate() {
            *a = Some(TaskAssignment {
                subchannel: i,
                dest: Dest::Haps,
                share: 4e8,
            });
        }
        let before = weighted_sum_delay(&alloc, &scenario, &caps);
        let mut scaled = scenario.clone();
        let lambda = 3.0;
        for t in &mut scaled.tasks {
            t.deadline *= lambda;
        }
        let after = weighted_sum_delay(&alloc, &scaled, &caps);
        assert_relative_eq!(after.hat_tau, before.hat_tau / lambda, max_relative = 1e-12);
        // Physical delay components are unchanged by the reweighting.
        for (a, b) in before.per_task.iter().zip(&after.per_task) {
            assert_eq!(a.breakdown.access, b.breakdown.access);
            assert_eq!(a.breakdown.feeder, b.breakdown.feeder);
            assert_eq!(a.breakdown.compute, b.breakdown.compute);
        }
    }

    #[test]
    fn feeder_coupling_grows_with_offload_set() {
        let scenario = two_task_scenario();
        let caps = uniform_caps(&scenario, 2e6);
        let mut alloc = Allocation::empty(2);
        alloc.assignments[0] = Some(TaskAssignment {
            subchannel: 0,
            dest: Dest::Haps,
            share: 4e8,
        });
        let solo = weighted_sum_delay(&alloc, &scenario, &caps).per_task[0]
            .breakdown
            .feeder;
        alloc.assignments[1] = Some(TaskAssignment {
            subchannel: 1,
            dest: Dest::Haps,
            share: 4e8,
        });
        let shared = weighted_sum_delay(&alloc, &scenario, &caps).per_task[0]
            .breakdown
            .feeder;
        assert!(shared > solo);
    }

    #[test]
    fn leo_has_propagation_term_haps_does_not() {
        let scenario = two_task_scenario();
        let caps = uniform_caps(&scenario, 2e6);
        let mut alloc = Allocation::empty(2);
        alloc.assignments[0] = Some(TaskAssignment {
            subchannel: 0,
            dest: Dest::Haps,
            share: 4e8,
        });
        alloc.assignments[1] = Some(TaskAssignment {
            subchannel: 1,
            dest: Dest::Leo,
            share: 4e8,
        });
        let report = weighted_sum_delay(&alloc, &scenario, &caps);
        let haps_feeder = report.per_task[0].breakdown.feeder;
        let leo_feeder = report.per_task[1].breakdown.feeder;
        let rtt = 2.0 * scenario.uavs[0].position.distance_to(&scenario.leo.position)
            / SPEED_OF_LIGHT;
        assert_relative_eq!(haps_feeder, 1e6 / 1e8, max_relative = 1e-12);
        assert_relative_eq!(leo_feeder, 1e6 / 2e8 + rtt, max_relative = 1e-12);
    }

    #[test]
    fn runtime_charge_covers_both_stages() {
        let scenario = two_task_scenario();
        let o_op = op_count_qtcajosa(2, scenario.bands.n_subchannels as u64)
            + op_count_resource_alloc(1, 2);
        let expected = runtime_delay(
            o_op,
            scenario.runtime.cycles_per_operation,
            scenario.haps.f_max,
            max_round_trip(&scenario),
        );
        assert_relative_eq!(
            scenario_runtime_delay(&scenario),
            expected,
            max_relative = 1e-15
        );
    }
}
