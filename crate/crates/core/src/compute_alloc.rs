//! Per-node computing-resource allocation.
//!
//! Minimizing `sum_i (d_i c_i / tau_i_max) / f_i` under a sum budget has the
//! closed-form solution of distributing the pool proportionally to
//! `sqrt(d_i c_i / tau_i_max)`. Deadline feasibility turns into per-task
//! minimum shares; those are repaired by pinning violators to their minimum
//! and re-solving over the remainder (standard active-set treatment of lower
//! bounds for this separable convex objective). Tasks whose minimum cannot
//! fit are reported infeasible for the caller's fallback cascade.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scalar::Float;

/// One task's demand on a computing node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeRequest<F> {
    pub task_id: usize,
    /// CPU cycles required, `d_i c_i`.
    pub weight: F,
    /// Deadline `tau_i_max` (s).
    pub deadline: F,
    /// Delay for the task to arrive at this node (transmission plus runtime
    /// charge), consumed from the deadline budget.
    pub arrival: F,
}

impl<F: Float> ComputeRequest<F> {
    /// Minimum share meeting the deadline: `d c / (tau_max - tau_arrival)`;
    /// `+inf` when the task cannot arrive in time at all.
    pub fn f_min(&self) -> F {
        if self.arrival < self.deadline {
            self.weight / (self.deadline - self.arrival)
        } else {
            F::infinity()
        }
    }

    /// Objective coefficient `d c / tau_max`.
    fn sqrt_rate(&self) -> F {
        (self.weight / self.deadline).sqrt()
    }
}

/// Shares assigned by one node, keyed by task id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeAllocation<F> {
    pub shares: BTreeMap<usize, F>,
    /// Unassigned budget.
    pub residual: F,
    /// Tasks whose deadline cannot be met at this node.
    pub infeasible: BTreeSet<usize>,
}

/// Unconstrained optimum: `f_i = sqrt(d_i c_i / tau_i) / sum_j sqrt(..) * F`.
/// The shares saturate the budget exactly.
pub fn closed_form_shares<F: Float>(requests: &[ComputeRequest<F>], f_max: F) -> Vec<F> {
    let denom: F = requests.iter().map(|r| r.sqrt_rate()).sum();
    if denom == F::zero() {
        return vec![F::zero(); requests.len()];
    }
    requests
        .iter()
        .map(|r| r.sqrt_rate() / denom * f_max)
        .collect()
}

/// Closed form with minimum-share repair.
///
/// Starting from the unconstrained optimum, any task below its minimum is
/// pinned there and the closed form is recomputed over the remainder with
/// the reduced budget, iterating to a fixed point. When the minimums do not
/// all fit, the survivors are the longest feasible prefix in ascending
/// `f_min` order (ties by task id); the rest are reported infeasible.
pub fn allocate_with_minimums<F: Float>(
    requests: &[ComputeRequest<F>],
    f_max: F,
) -> ComputeAllocation<F> {
    let mut infeasible = BTreeSet::new();
    let mut shares = BTreeMap::new();

    // Tasks that cannot arrive before their deadline are infeasible here
    // regardless of the share.
    let mut pool: Vec<&ComputeRequest<F>> = Vec::with_capacity(requests.len());
    for r in requests {
        if r.f_min().is_finite() {
            pool.push(r);
        } else {
            infeasible.insert(r.task_id);
        }
    }

    // Evict by descending f_min until the minimums fit the budget.
    let total_min: F = pool.iter().map(|r| r.f_min()).sum();
    if total_min > f_max {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| {
            pool[a]
                .f_min()
                .partial_cmp(&pool[b].f_min())
                .unwrap()
                .then(pool[a].task_id.cmp(&pool[b].task_id))
        });
        let mut kept = Vec::new();
        let mut used = F::zero();
        for idx in order {
            let r = pool[idx];
            if used + r.f_min() <= f_max {
                used += r.f_min();
                kept.push(r);
            } else {
                infeasible.insert(r.task_id);
            }
        }
        kept.sort_by_key(|r| r.task_id);
        pool = kept;
    }

    // Pin-and-recompute loop; converges in at most |pool| rounds.
    let mut budget = f_max;
    let mut active = pool;
    loop {
        let proposal = closed_form_shares(
            &active.iter().map(|r| **r).collect::<Vec<_>>(),
            budget,
        );
        let mut violators = Vec::new();
        for (k, r) in active.iter().enumerate() {
            if proposal[k] < r.f_min() {
                violators.push(k);
            }
        }
        if violators.is_empty() {
            for (k, r) in active.iter().enumerate() {
                shares.insert(r.task_id, proposal[k]);
            }
            break;
        }
        for &k in violators.iter().rev() {
            let r = active.remove(k);
            shares.insert(r.task_id, r.f_min());
            budget -= r.f_min();
        }
        if active.is_empty() {
            break;
        }
    }

    let used: F = shares.values().copied().sum();
    ComputeAllocation {
        shares,
        residual: (f_max - used).max(F::zero()),
        infeasible,
    }
}

/// Local-UAV fallback: grant every task its minimum in ascending `f_min`
/// order until one no longer fits, then split the remaining budget equally
/// among the not-yet-served tasks. The served prefix meets its deadlines;
/// the best-effort tail is flagged infeasible.
pub fn best_effort_uav<F: Float>(requests: &[ComputeRequest<F>], f_max: F) -> ComputeAllocation<F> {
    let mut order: Vec<&ComputeRequest<F>> = requests.iter().collect();
    order.sort_by(|a, b| {
        a.f_min()
            .partial_cmp(&b.f_min())
            .unwrap()
            .then(a.task_id.cmp(&b.task_id))
    });

    let mut shares = BTreeMap::new();
    let mut infeasible = BTreeSet::new();
    let mut budget = f_max;
    let mut tail = Vec::new();
    let mut filling = true;
    for r in order {
        let f_min = r.f_min();
        if filling && f_min.is_finite() && f_min <= budget {
            shares.insert(r.task_id, f_min);
            budget -= f_min;
        } else {
            filling = false;
            tail.push(r.task_id);
        }
    }
    if !tail.is_empty() {
        let split = budget / F::cast(tail.len() as f64);
        for id in &tail {
            shares.insert(*id, split);
            infeasible.insert(*id);
        }
        budget = F::zero();
    }

    ComputeAllocation {
        shares,
        residual: budget,
        infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{convex_shares_oracle, shares_objective};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn req(task_id: usize, weight: f64, deadline: f64, arrival: f64) -> ComputeRequest<f64> {
        ComputeRequest {
            task_id,
            weight,
            deadline,
            arrival,
        }
    }

    fn random_requests(rng: &mut impl Rng, n: usize) -> Vec<ComputeRequest<f64>> {
        (0..n)
            .map(|i| {
                req(
                    i,
                    rng.gen_range(1e6..1e9),
                    rng.gen_range(1.0..60.0),
                    rng.gen_range(0.0..0.5),
                )
            })
            .collect()
    }

    #[test]
    fn identical_requests_split_evenly() {
        let reqs = vec![req(0, 1e8, 10.0, 0.0), req(1, 1e8, 10.0, 0.0)];
        let shares = closed_form_shares(&reqs, 1e9);
        assert_relative_eq!(shares[0], 5e8, max_relative = 1e-12);
        assert_relative_eq!(shares[1], 5e8, max_relative = 1e-12);
    }

    #[test]
    fn one_to_four_rate_ratio_splits_one_to_two() {
        // d c / tau ratio 1:4 means sqrt ratio 1:2, so F/3 and 2F/3.
        let reqs = vec![req(0, 1e8, 10.0, 0.0), req(1, 4e8, 10.0, 0.0)];
        let shares = closed_form_shares(&reqs, 9e8);
        assert_relative_eq!(shares[0], 3e8, max_relative = 1e-12);
        assert_relative_eq!(shares[1], 6e8, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_matches_numeric_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(1..=10);
            let reqs = random_requests(&mut rng, n);
            let f_max = rng.gen_range(1e8..1e10);
            let ours = closed_form_shares(&reqs, f_max);
            let oracle = convex_shares_oracle(&reqs, f_max, false).unwrap();
            let obj_ours = shares_objective(&reqs, &ours);
            let obj_oracle = shares_objective(&reqs, &oracle);
            assert_relative_eq!(obj_ours, obj_oracle, max_relative = 1e-9);
            assert!(obj_ours <= obj_oracle * (1.0 + 1e-9));
        }
    }

    #[test]
    fn budget_saturated_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..8);
            let reqs = random_requests(&mut rng, n);
            let f_max = rng.gen_range(1e8..1e10);
            let total: f64 = closed_form_shares(&reqs, f_max).iter().sum();
            assert_relative_eq!(total, f_max, max_relative = 1e-12);
        }
    }

    #[test]
    fn scale_invariance_of_proportions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let reqs = random_requests(&mut rng, 6);
        let base = closed_form_shares(&reqs, 1e9);
        let lambda = 7.5;
        let scaled_reqs: Vec<_> = reqs
            .iter()
            .map(|r| req(r.task_id, r.weight * lambda, r.deadline, r.arrival))
            .collect();
        let scaled = closed_form_shares(&scaled_reqs, 1e9 * lambda.sqrt());
        for i in 1..reqs.len() {
            assert_relative_eq!(
                base[i] / base[0],
                scaled[i] / scaled[0],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn optimality_against_random_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let reqs = random_requests(&mut rng, 5);
        let f_max = 2e9;
        let star = closed_form_shares(&reqs, f_max);
        let best = shares_objective(&reqs, &star);
        for _ in 0..1000 {
            // Random feasible share vector on the simplex.
            let raw: Vec<f64> = (0..reqs.len()).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let candidate: Vec<f64> = raw.iter().map(|x| x / total * f_max).collect();
            assert!(best <= shares_objective(&reqs, &candidate) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn minimums_inactive_reduces_to_closed_form() {
        let reqs = vec![req(0, 1e8, 100.0, 0.0), req(1, 2e8, 100.0, 0.0)];
        let plain = closed_form_shares(&reqs, 1e9);
        let alloc = allocate_with_minimums(&reqs, 1e9);
        assert!(alloc.infeasible.is_empty());
        assert_relative_eq!(alloc.shares[&0], plain[0], max_relative = 1e-12);
        assert_relative_eq!(alloc.shares[&1], plain[1], max_relative = 1e-12);
    }

    #[test]
    fn oversized_minimum_is_isolated() {
        // Task 2 needs more than the whole pool; the others get the plain
        // closed form.
        let reqs = vec![
            req(0, 1e8, 10.0, 0.0),
            req(1, 1e8, 10.0, 0.0),
            req(2, 1e9, 0.5, 0.0),
        ];
        let alloc = allocate_with_minimums(&reqs, 1e9);
        assert!(alloc.infeasible.contains(&2));
        let survivors = vec![reqs[0], reqs[1]];
        let plain = closed_form_shares(&survivors, 1e9);
        assert_relative_eq!(alloc.shares[&0], plain[0], max_relative = 1e-12);
        assert_relative_eq!(alloc.shares[&1], plain[1], max_relative = 1e-12);
        assert!(!alloc.shares.contains_key(&2));
    }

    #[test]
    fn late_arrival_immediately_infeasible() {
        let reqs = vec![req(0, 1e8, 1.0, 2.0), req(1, 1e8, 10.0, 0.0)];
        let alloc = allocate_with_minimums(&reqs, 1e9);
        assert!(alloc.infeasible.contains(&0));
        assert_relative_eq!(alloc.shares[&1], 1e9, max_relative = 1e-12);
    }

    #[test]
    fn bounded_allocation_matches_numeric_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let mut active_bound_seen = false;
        for _ in 0..200 {
            let n = rng.gen_range(1..=10);
            let reqs: Vec<_> = (0..n)
                .map(|i| {
                    req(
                        i,
                        rng.gen_range(1e6..1e9),
                        rng.gen_range(2.0..40.0),
                        rng.gen_range(0.0..1.9),
                    )
                })
                .collect();
            let total_min: f64 = reqs.iter().map(|r| r.f_min()).sum();
            let f_max = total_min * rng.gen_range(1.05..4.0);
            let alloc = allocate_with_minimums(&reqs, f_max);
            assert!(alloc.infeasible.is_empty());
            let ours: Vec<f64> = reqs.iter().map(|r| alloc.shares[&r.task_id]).collect();
            let oracle = convex_shares_oracle(&reqs, f_max, true).unwrap();
            if reqs
                .iter()
                .zip(&ours)
                .any(|(r, &f)| (f - r.f_min()).abs() < 1e-6 * r.f_min())
            {
                active_bound_seen = true;
            }
            assert_relative_eq!(
                shares_objective(&reqs, &ours),
                shares_objective(&reqs, &oracle),
                max_relative = 1e-7
            );
        }
        assert!(active_bound_seen, "test never exercised an active bound");
    }

    #[test]
    fn pinned_tasks_get_exactly_their_minimum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let n = rng.gen_range(2..=8);
            let reqs: Vec<_> = (0..n)
                .map(|i| {
                    req(
                        i,
                        rng.gen_range(1e6..1e9),
                        rng.gen_range(2.0..40.0),
                        rng.gen_range(0.0..1.9),
                    )
                })
                .collect();
            let total_min: f64 = reqs.iter().map(|r| r.f_min()).sum();
            let alloc = allocate_with_minimums(&reqs, total_min * 1.5);
            for r in &reqs {
                let f = alloc.shares[&r.task_id];
                let f_min = r.f_min();
                assert!(
                    f >= f_min * (1.0 - 1e-12),
                    "share below minimum: {f} < {f_min}"
                );
            }
        }
    }

    #[test]
    fn best_effort_worked_example() {
        // Pool 10, minimums [4, 5, 6]: the first two fit (9 used), the third
        // gets the残 residual 1 alone and misses its deadline.
        let reqs = vec![
            req(0, 4.0, 1.0, 0.0),
            req(1, 5.0, 1.0, 0.0),
            req(2, 6.0, 1.0, 0.0),
        ];
        let alloc = best_effort_uav(&reqs, 10.0);
        assert_eq!(alloc.shares[&0], 4.0);
        assert_eq!(alloc.shares[&1], 5.0);
        assert_eq!(alloc.shares[&2], 1.0);
        assert_eq!(alloc.infeasible.iter().copied().collect::<Vec<_>>(), [2]);
        assert_eq!(alloc.residual, 0.0);
    }

    #[test]
    fn best_effort_all_fit_leaves_minimums() {
        let reqs = vec![req(0, 2.0, 1.0, 0.0), req(1, 3.0, 1.0, 0.0)];
        let alloc = best_effort_uav(&reqs, 10.0);
        assert_eq!(alloc.shares[&0], 2.0);
        assert_eq!(alloc.shares[&1], 3.0);
        assert!(alloc.infeasible.is_empty());
        assert_eq!(alloc.residual, 5.0);
    }

    proptest! {
        #[test]
        fn best_effort_serves_longest_feasible_prefix(
            mins in proptest::collection::vec(0.1f64..10.0, 1..8),
            budget in 1.0f64..20.0,
        ) {
            let reqs: Vec<_> = mins
                .iter()
                .enumerate()
                .map(|(i, &m)| req(i, m, 1.0, 0.0))
                .collect();
            let alloc = best_effort_uav(&reqs, budget);
            // Exhaustive prefix check over the sorted order.
            let mut sorted = mins.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut used = 0.0;
            let mut prefix_len = 0;
            for &m in &sorted {
                if used + m <= budget {
                    used += m;
                    prefix_len += 1;
                } else {
                    break;
                }
            }
            let served = reqs.len() - alloc.infeasible.len();
            prop_assert_eq!(served, prefix_len);
            // Budget is never exceeded.
            let spent: f64 = alloc.shares.values().sum();
            prop_assert!(spent <= budget * (1.0 + 1e-12));
        }

        #[test]
        fn allocation_never_exceeds_budget(
            n in 1usize..8,
            seed in 0u64..500,
            slack in 0.3f64..3.0,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let reqs: Vec<_> = (0..n)
                .map(|i| req(i, rng.gen_range(1e6..1e9), rng.gen_range(1.0..30.0), rng.gen_range(0.0..0.9)))
                .collect();
            let total_min: f64 = reqs.iter().map(|r| r.f_min()).sum();
            let f_max = total_min * slack;
            let alloc = allocate_with_minimums(&reqs, f_max);
            let spent: f64 = alloc.shares.values().sum();
            prop_assert!(spent <= f_max * (1.0 + 1e-9));
            if alloc.infeasible.is_empty() && !reqs.is_empty() {
                // Sum-saturating when everything fits.
                prop_assert!((spent - f_max).abs() <= f_max * 1e-9);
            }
        }
    }

    #[test]
    fn generic_closed_form_in_f32() {
        let reqs = vec![
            ComputeRequest::<f32> {
                task_id: 0,
                weight: 1e6,
                deadline: 10.0,
                arrival: 0.0,
            },
            ComputeRequest::<f32> {
                task_id: 1,
                weight: 1e6,
                deadline: 10.0,
                arrival: 0.0,
            },
        ];
        let shares = closed_form_shares(&reqs, 1e8f32);
        assert!((shares[0] - 5e7).abs() < 1.0);
    }
}
