//! Greedy joint subchannel-allocation and offloading-decision solver.
//!
//! Each round re-advertises the remote compute pools to the not-yet-allocated
//! tasks (dynamic initialization), prices every (task, subchannel,
//! destination) triple with a per-task cost that charges the marginal feeder
//! slowdown imposed on already-offloaded tasks, and commits the global
//! cheapest candidate. Committed pairs are never revoked; infeasible
//! candidates are masked with `+inf`. After the loop the computing shares are
//! re-optimized per node, with an infeasible-at-remote fallback to the local
//! UAV and a best-effort split when even the UAV cannot serve every minimum.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Dest, TaskAssignment};
use crate::channel::CapacityTable;
use crate::compute_alloc::{
    allocate_with_minimums, best_effort_uav, closed_form_shares, ComputeAllocation, ComputeRequest,
};
use crate::delay::{compute_delay, feeder_delay, scenario_runtime_delay};
use crate::scalar::{Float, SPEED_OF_LIGHT};
use crate::scenario::Scenario;

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

/// Benchmark restriction of the available remote destinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DestRestriction {
    All,
    NoLeo,
    NoHaps,
}

/// Destinations a task may be priced against; local UAV compute is always
/// available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestinationSet {
    pub haps: bool,
    pub leo: bool,
}

/// Mask the excluded destination's costs at `+inf` for all tasks.
pub fn restrict_destinations(variant: DestRestriction) -> DestinationSet {
    match variant {
        DestRestriction::All => DestinationSet {
            haps: true,
            leo: true,
        },
        DestRestriction::NoLeo => DestinationSet {
            haps: true,
            leo: false,
        },
        DestRestriction::NoHaps => DestinationSet {
            haps: false,
            leo: true,
        },
    }
}

/// Computing-resource initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    /// Non-orthogonal pools, re-initialized over the unallocated tasks each
    /// round (UAV and LEO) or over the original task set (HAPS).
    Dynamic,
    /// One-shot orthogonal split `F_k / U` per UAV, never refreshed.
    NonAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub destinations: DestinationSet,
    pub init: InitMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            destinations: restrict_destinations(DestRestriction::All),
            init: InitMode::Dynamic,
        }
    }
}

// ---------------------------------------------------------------------------
// Decision state
// ---------------------------------------------------------------------------

/// Algorithm working state for one UAV: binary decisions plus the `+inf`
/// masks over candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState<F> {
    /// `rho[i][b]`: subchannel `b` assigned to cluster member `i`.
    pub rho: Vec<Vec<bool>>,
    pub beta_haps: Vec<bool>,
    pub beta_leo: Vec<bool>,
    /// `V_u`: 1 while the (task, subchannel) pair is selectable, else `+inf`.
    pub mask_matrix: Vec<Vec<F>>,
    /// `v_u^u`, `v_u^h`, `v_u^s`: per-destination task masks.
    pub mask_local: Vec<F>,
    pub mask_haps: Vec<F>,
    pub mask_leo: Vec<F>,
    /// Local indices of not-yet-allocated tasks.
    pub unallocated: BTreeSet<usize>,
}

impl<F: Float> UavState<F> {
    /// Fresh state: nothing allocated, every candidate unmasked (excluded
    /// destinations start masked).
    pub fn new(n_tasks: usize, n_subchannels: usize, destinations: DestinationSet) -> Self {
        let masked = |enabled: bool| {
            if enabled {
                F::one()
            } else {
                F::infinity()
            }
        };
        Self {
            rho: vec![vec![false; n_subchannels]; n_tasks],
            beta_haps: vec![false; n_tasks],
            beta_leo: vec![false; n_tasks],
            mask_matrix: vec![vec![F::one(); n_subchannels]; n_tasks],
            mask_local: vec![F::one(); n_tasks],
            mask_haps: vec![masked(destinations.haps); n_tasks],
            mask_leo: vec![masked(destinations.leo); n_tasks],
            unallocated: (0..n_tasks).collect(),
        }
    }

    fn dest_mask(&self, dest: Dest, i: usize) -> F {
        match dest {
            Dest::Local => self.mask_local[i],
            Dest::Haps => self.mask_haps[i],
            Dest::Leo => self.mask_leo[i],
        }
    }

    fn mask_dest(&mut self, dest: Dest, i: usize) {
        let m = match dest {
            Dest::Local => &mut self.mask_local,
            Dest::Haps => &mut self.mask_haps,
            Dest::Leo => &mut self.mask_leo,
        };
        m[i] = F::infinity();
    }
}

/// Full decision state: per-UAV working matrices plus the running compute
/// pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionState<F> {
    pub per_uav: Vec<UavState<F>>,
    /// Remaining pool per UAV.
    pub pool_uav: Vec<F>,
    pub pool_haps: F,
    pub pool_leo: F,
}

/// Final compute shares chosen by each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAllocations<F> {
    pub uav: Vec<ComputeAllocation<F>>,
    pub haps: ComputeAllocation<F>,
    pub leo: ComputeAllocation<F>,
}

/// Solver output: the working state at termination, the finalized
/// allocation after per-node share re-optimization, and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<F> {
    pub state: DecisionState<F>,
    pub allocation: Allocation<F>,
    pub node_allocations: NodeAllocations<F>,
    /// Largest surrogate-identity residual observed at committed states.
    pub qt_max_residual: F,
    pub rounds: usize,
}

// ---------------------------------------------------------------------------
// Per-task costs
// ---------------------------------------------------------------------------

/// Deadline-weighted cost of computing task `i` at its UAV through
/// subchannel `b`: `(d c / f + d / R_b) / tau_max`; `+inf` on a dead
/// subchannel.
pub fn local_cost<F: Float>(bits: F, cycles_per_bit: F, deadline: F, f_local: F, r_b: F) -> F {
    if r_b <= F::zero() {
        return F::infinity();
    }
    (compute_delay(bits, cycles_per_bit, f_local) + bits / r_b) / deadline
}

/// Deadline-weighted remote-cost increment for destination `k`: the task's
/// own extra delay of going remote plus the feeder slowdown it inflicts on
/// the tasks already offloaded there.
///
/// `prev_load` is `sum_{j != i} d_j beta_j`, `prev_weighted_load` is
/// `sum_{j != i} beta_j / tau_j_max`, both from the previous round's state;
/// `rtt` is the LEO round-trip propagation term (zero for HAPS).
#[allow(clippy::too_many_arguments)]
pub fn remote_cost_increment<F: Float>(
    bits: F,
    cycles_per_bit: F,
    deadline: F,
    f_remote: F,
    f_local: F,
    r_feeder: F,
    prev_load: F,
    prev_weighted_load: F,
    rtt: F,
) -> F {
    if r_feeder <= F::zero() {
        return F::infinity();
    }
    let upsilon_k = compute_delay(bits, cycles_per_bit, f_remote)
        - compute_delay(bits, cycles_per_bit, f_local)
        + rtt;
    (upsilon_k + (bits + prev_load) / r_feeder) / deadline + bits * prev_weighted_load / r_feeder
}

/// Per-UAV cost matrices of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrices<F> {
    /// Masked weighted local costs, `I_u x B`.
    pub local: Vec<Vec<F>>,
    /// Per-task remote increments (before masking), `I_u` each.
    pub haps_increment: Vec<F>,
    pub leo_increment: Vec<F>,
    /// Masked combined costs per remote destination, `I_u x B`.
    pub haps: Vec<Vec<F>>,
    pub leo: Vec<Vec<F>>,
}

/// Provisional shares advertised to one UAV's tasks at the start of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundShares<F> {
    /// Indexed by local task index; meaningful for unallocated tasks.
    pub local: Vec<F>,
    pub haps: Vec<F>,
    pub leo: Vec<F>,
}

/// Closed-form share initialization for one UAV against the current pools.
///
/// UAV and LEO pools are spread over the unallocated tasks only; the HAPS
/// spreads its remaining pool over the cluster's original task set so a
/// large shared pool is not depleted early.
pub fn dynamic_init<F: Float>(
    scenario: &Scenario<F>,
    u: usize,
    unallocated: &BTreeSet<usize>,
    pool_uav: F,
    pool_haps: F,
    pool_leo: F,
) -> RoundShares<F> {
    let cluster = &scenario.clusters[u];
    let request = |i_local: &usize| {
        let t = &scenario.tasks[cluster[*i_local]];
        ComputeRequest {
            task_id: *i_local,
            weight: t.cycles(),
            deadline: t.deadline,
            arrival: F::zero(),
        }
    };

    let pending: Vec<ComputeRequest<F>> = unallocated.iter().map(request).collect();
    let everyone: Vec<ComputeRequest<F>> = (0..cluster.len()).map(|i| request(&i)).collect();

    let spread = |reqs: &[ComputeRequest<F>], pool: F| {
        let mut out = vec![F::zero(); cluster.len()];
        for (r, share) in reqs.iter().zip(closed_form_shares(reqs, pool)) {
            out[r.task_id] = share;
        }
        out
    };

    RoundShares {
        local: spread(&pending, pool_uav),
        leo: spread(&pending, pool_leo),
        haps: spread(&everyone, pool_haps),
    }
}

/// One-shot non-adaptive initialization: orthogonal `F_k / U` views, spread
/// over the whole cluster.
fn nonadaptive_init<F: Float>(scenario: &Scenario<F>, u: usize) -> RoundShares<F> {
    let all: BTreeSet<usize> = (0..scenario.clusters[u].len()).collect();
    let n_uavs = F::cast(scenario.uavs.len() as f64);
    dynamic_init(
        scenario,
        u,
        &all,
        scenario.uavs[u].f_max,
        scenario.haps.f_max / n_uavs,
        scenario.leo.f_max / n_uavs,
    )
}

// ---------------------------------------------------------------------------
// Surrogate-identity check
// ---------------------------------------------------------------------------

/// Evaluate both sides of the difference-of-squares decoupling identity and
/// of its fixed-point expansion at the current point; returns the largest
/// absolute residual over tasks.
///
/// Task sizes are normalized by their maximum before evaluation - both
/// identities are scale-invariant and the squares are ill-conditioned at
/// raw bit counts.
pub fn qt_identity_check<F: Float>(betas: &[bool], bits: &[F], r_feeder: F) -> F {
    if betas.is_empty() || r_feeder <= F::zero() {
        return F::zero();
    }
    let scale = bits.iter().copied().fold(F::zero(), F::max);
    if scale == F::zero() {
        return F::zero();
    }
    let d: Vec<F> = bits.iter().map(|&x| x / scale).collect();
    let four = F::cast(4.0);
    let mut worst = F::zero();
    for i in 0..betas.len() {
        let beta_i = if betas[i] { F::one() } else { F::zero() };
        let cross: F = (0..betas.len())
            .filter(|&j| j != i && betas[j])
            .map(|j| d[j])
            .sum();
        // Difference-of-squares form.
        let lhs = beta_i * cross / r_feeder;
        let plus = cross + beta_i;
        let minus = cross - beta_i;
        let rhs = (plus * plus - minus * minus) / (four * r_feeder);
        worst = worst.max((lhs - rhs).abs());
        // Fixed-point expansion evaluated at the current point.
        let expansion = (beta_i / r_feeder) * cross + (cross / r_feeder) * beta_i
            - (beta_i * cross / (r_feeder * r_feeder)) * r_feeder;
        worst = worst.max((lhs - expansion).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct Working<'a, F: Float> {
    scenario: &'a Scenario<F>,
    caps: &'a CapacityTable<F>,
    options: SolveOptions,
    state: DecisionState<F>,
    /// Committed (subchannel, destination, provisional share) per global task.
    committed: Vec<Option<TaskAssignment<F>>>,
    /// Aggregated committed feeder loads per (UAV, destination).
    load_haps: Vec<F>,
    load_leo: Vec<F>,
    weighted_haps: Vec<F>,
    weighted_leo: Vec<F>,
    /// Non-adaptive orthogonal pool views, per UAV.
    orth_haps: Vec<F>,
    orth_leo: Vec<F>,
    fixed_shares: Vec<RoundShares<F>>,
    rtt_leo: Vec<F>,
    tau_op: F,
    qt_max_residual: F,
}

impl<'a, F: Float> Working<'a, F> {
    fn new(scenario: &'a Scenario<F>, caps: &'a CapacityTable<F>, options: SolveOptions) -> Self {
        let n_uavs = scenario.uavs.len();
        let b = scenario.bands.n_subchannels;
        let per_uav = scenario
            .clusters
            .iter()
            .map(|c| UavState::new(c.len(), b, options.destinations))
            .collect();
        let orth = |pool: F| match options.init {
            InitMode::Dynamic => vec![pool; n_uavs],
            InitMode::NonAdaptive => vec![pool / F::cast(n_uavs as f64); n_uavs],
        };
        let fixed_shares = match options.init {
            InitMode::Dynamic => Vec::new(),
            InitMode::NonAdaptive => (0..n_uavs).map(|u| nonadaptive_init(scenario, u)).collect(),
        };
        Self {
            scenario,
            caps,
            options,
            state: DecisionState {
                per_uav,
                pool_uav: scenario.uavs.iter().map(|u| u.f_max).collect(),
                pool_haps: scenario.haps.f_max,
                pool_leo: scenario.leo.f_max,
            },
            committed: vec![None; scenario.tasks.len()],
            load_haps: vec![F::zero(); n_uavs],
            load_leo: vec![F::zero(); n_uavs],
            weighted_haps: vec![F::zero(); n_uavs],
            weighted_leo: vec![F::zero(); n_uavs],
            orth_haps: orth(scenario.haps.f_max),
            orth_leo: orth(scenario.leo.f_max),
            fixed_shares,
            rtt_leo: scenario
                .uavs
                .iter()
                .map(|u| {
                    F::cast(2.0) * u.position.distance_to(&scenario.leo.position)
                        / F::cast(SPEED_OF_LIGHT)
                })
                .collect(),
            tau_op: scenario_runtime_delay(scenario),
            qt_max_residual: F::zero(),
        }
    }

    fn round_shares(&self, u: usize) -> RoundShares<F> {
        match self.options.init {
            InitMode::Dynamic => dynamic_init(
                self.scenario,
                u,
                &self.state.per_uav[u].unallocated,
                self.state.pool_uav[u],
                self.state.pool_haps,
                self.state.pool_leo,
            ),
            InitMode::NonAdaptive => self.fixed_shares[u].clone(),
        }
    }

    /// Build the masked cost matrices of one UAV for the current round.
    fn cost_matrices(&self, u: usize, shares: &RoundShares<F>) -> CostMatrices<F> {
        let uav_state = &self.state.per_uav[u];
        let cluster = &self.scenario.clusters[u];
        let n = cluster.len();
        let b = self.scenario.bands.n_subchannels;
        let inf = F::infinity();

        let mut m = CostMatrices {
            local: vec![vec![inf; b]; n],
            haps_increment: vec![inf; n],
            leo_increment: vec![inf; n],
            haps: vec![vec![inf; b]; n],
            leo: vec![vec![inf; b]; n],
        };

        for &i in &uav_state.unallocated {
            let task = &self.scenario.tasks[cluster[i]];
            for (dest, increment) in [
                (Dest::Haps, &mut m.haps_increment),
                (Dest::Leo, &mut m.leo_increment),
            ] {
                let (f_remote, r_feeder, prev_load, prev_weighted, rtt) = match dest {
                    Dest::Haps => (
                        shares.haps[i],
                        self.caps.r_feeder_haps[u],
                        self.load_haps[u],
                        self.weighted_haps[u],
                        F::zero(),
                    ),
                    Dest::Leo => (
                        shares.leo[i],
                        self.caps.r_feeder_leo[u],
                        self.load_leo[u],
                        self.weighted_leo[u],
                        self.rtt_leo[u],
                    ),
                    Dest::Local => unreachable!(),
                };
                increment[i] = remote_cost_increment(
                    task.bits,
                    task.cycles_per_bit,
                    task.deadline,
                    f_remote,
                    shares.local[i],
                    r_feeder,
                    prev_load,
                    prev_weighted,
                    rtt,
                );
            }

            for bi in 0..b {
                if uav_state.mask_matrix[i][bi].is_infinite() {
                    continue;
                }
                let r_b = self.caps.r_access[u][i][bi];
                if r_b <= F::zero() {
                    continue;
                }
                if uav_state.mask_local[i].is_finite() {
                    m.local[i][bi] = local_cost(
                        task.bits,
                        task.cycles_per_bit,
                        task.deadline,
                        shares.local[i],
                        r_b,
                    );
                }
                // Combined remote costs in cancellation-free form: the local
                // compute term of U_u and the -tau_i^u of upsilon_k cancel
                // algebraically, so the sum is evaluated directly.
                for (dest, combined) in [(Dest::Haps, &mut m.haps), (Dest::Leo, &mut m.leo)] {
                    if uav_state.dest_mask(dest, i).is_infinite() {
                        continue;
                    }
                    let (f_remote, r_feeder, prev_load, prev_weighted, rtt) = match dest {
                        Dest::Haps => (
                            shares.haps[i],
                            self.caps.r_feeder_haps[u],
                            self.load_haps[u],
                            self.weighted_haps[u],
                            F::zero(),
                        ),
                        Dest::Leo => (
                            shares.leo[i],
                            self.caps.r_feeder_leo[u],
                            self.load_leo[u],
                            self.weighted_leo[u],
                            self.rtt_leo[u],
                        ),
                        Dest::Local => unreachable!(),
                    };
                    if r_feeder <= F::zero() {
                        continue;
                    }
                    let tau_c_remote = compute_delay(task.bits, task.cycles_per_bit, f_remote);
                    combined[i][bi] = (task.bits / r_b
                        + tau_c_remote
                        + (task.bits + prev_load) / r_feeder
                        + rtt)
                        / task.deadline
                        + task.bits * prev_weighted / r_feeder;
                }
            }
        }
        m
    }

    /// Remaining pool of destination `dest` as seen by UAV `u`.
    fn pool_view(&self, u: usize, dest: Dest) -> F {
        match (self.options.init, dest) {
            (_, Dest::Local) => self.state.pool_uav[u],
            (InitMode::Dynamic, Dest::Haps) => self.state.pool_haps,
            (InitMode::Dynamic, Dest::Leo) => self.state.pool_leo,
            (InitMode::NonAdaptive, Dest::Haps) => self.orth_haps[u],
            (InitMode::NonAdaptive, Dest::Leo) => self.orth_leo[u],
        }
    }

    /// Full task delay of candidate `(u, i, b, dest)` at share `f`.
    fn candidate_delay(&self, u: usize, i: usize, b: usize, dest: Dest, f: F) -> F {
        let task = &self.scenario.tasks[self.scenario.clusters[u][i]];
        let access = task.bits / self.caps.r_access[u][i][b];
        let feeder = match dest {
            Dest::Local => F::zero(),
            Dest::Haps => feeder_delay(
                self.load_haps[u] + task.bits,
                self.caps.r_feeder_haps[u],
                F::zero(),
                false,
            ),
            Dest::Leo => feeder_delay(
                self.load_leo[u] + task.bits,
                self.caps.r_feeder_leo[u],
                self.scenario.uavs[u]
                    .position
                    .distance_to(&self.scenario.leo.position),
                true,
            ),
        };
        self.tau_op + access + feeder + compute_delay(task.bits, task.cycles_per_bit, f)
    }

    fn commit(&mut self, u: usize, i: usize, b: usize, dest: Dest, share: F) {
        let global = self.scenario.clusters[u][i];
        let bits_i = self.scenario.tasks[global].bits;
        let inv_deadline = F::one() / self.scenario.tasks[global].deadline;
        {
            let uav_state = &mut self.state.per_uav[u];
            uav_state.rho[i][b] = true;
            for row in uav_state.mask_matrix.iter_mut() {
                row[b] = F::infinity();
            }
            for cell in uav_state.mask_matrix[i].iter_mut() {
                *cell = F::infinity();
            }
            uav_state.mask_dest(dest, i);
            uav_state.unallocated.remove(&i);
            match dest {
                Dest::Local => {}
                Dest::Haps => uav_state.beta_haps[i] = true,
                Dest::Leo => uav_state.beta_leo[i] = true,
            }
        }
        match dest {
            Dest::Local => self.state.pool_uav[u] -= share,
            Dest::Haps => {
                self.state.pool_haps -= share;
                self.orth_haps[u] -= share;
                self.load_haps[u] += bits_i;
                self.weighted_haps[u] += inv_deadline;
            }
            Dest::Leo => {
                self.state.pool_leo -= share;
                self.orth_leo[u] -= share;
                self.load_leo[u] += bits_i;
                self.weighted_leo[u] += inv_deadline;
            }
        }
        self.committed[global] = Some(TaskAssignment {
            subchannel: b,
            dest,
            share,
        });

        // Surrogate tightness at the committed state.
        let bits: Vec<F> = self.scenario.clusters[u]
            .iter()
            .map(|&g| self.scenario.tasks[g].bits)
            .collect();
        let haps_residual = qt_identity_check(
            &self.state.per_uav[u].beta_haps,
            &bits,
            self.caps.r_feeder_haps[u],
        );
        let leo_residual = qt_identity_check(
            &self.state.per_uav[u].beta_leo,
            &bits,
            self.caps.r_feeder_leo[u],
        );
        self.qt_max_residual = self.qt_max_residual.max(haps_residual).max(leo_residual);
    }
}

/// Selected candidate of one greedy round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<F> {
    pub cost: F,
    pub uav: usize,
    pub task: usize,
    pub subchannel: usize,
    pub dest: Dest,
}

/// Global argmin over every UAV's cost matrices. Ties break on the lowest
/// (uav, task, subchannel, destination) tuple with local < HAPS < LEO, so
/// the selection is deterministic and invariant under positive cost scaling.
pub fn select_candidate<F: Float>(matrices: &[CostMatrices<F>]) -> Option<Candidate<F>> {
    let mut best: Option<Candidate<F>> = None;
    for (u, m) in matrices.iter().enumerate() {
        for i in 0..m.local.len() {
            for b in 0..m.local[i].len() {
                for (dest, cost) in [
                    (Dest::Local, m.local[i][b]),
                    (Dest::Haps, m.haps[i][b]),
                    (Dest::Leo, m.leo[i][b]),
                ] {
                    if cost.is_finite() && best.as_ref().map_or(true, |c| cost < c.cost) {
                        best = Some(Candidate {
                            cost,
                            uav: u,
                            task: i,
                            subchannel: b,
                            dest,
                        });
                    }
                }
            }
        }
    }
    best
}

/// Run the greedy loop and the final per-node share optimization.
pub fn solve<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    options: SolveOptions,
) -> Solution<F> {
    let mut w = Working::new(scenario, caps, options);
    let n_tasks = scenario.tasks.len();
    let max_rounds = 4 * n_tasks + 4;
    let mut rounds = 0;

    loop {
        rounds += 1;
        assert!(
            rounds <= max_rounds,
            "greedy loop exceeded its termination bound"
        );

        let matrices: Vec<CostMatrices<F>> = (0..scenario.uavs.len())
            .map(|u| {
                let shares = w.round_shares(u);
                w.cost_matrices(u, &shares)
            })
            .collect();
        let Some(Candidate {
            uav: u,
            task: i,
            subchannel: b,
            dest,
            ..
        }) = select_candidate(&matrices)
        else {
            break;
        };

        // Deadline check at the provisional share; retry once with the full
        // remaining pool, then mask this (task, destination).
        let shares = w.round_shares(u);
        let provisional = match dest {
            Dest::Local => shares.local[i],
            Dest::Haps => shares.haps[i],
            Dest::Leo => shares.leo[i],
        };
        let task = &scenario.tasks[scenario.clusters[u][i]];
        let mut share = provisional;
        if w.candidate_delay(u, i, b, dest, share) > task.deadline {
            share = w.pool_view(u, dest);
            if w.candidate_delay(u, i, b, dest, share) > task.deadline {
                w.state.per_uav[u].mask_dest(dest, i);
                continue;
            }
        }
        w.commit(u, i, b, dest, share);
    }

    let (allocation, node_allocations) = finalize(scenario, caps, &w.committed, w.tau_op);
    Solution {
        state: w.state,
        allocation,
        node_allocations,
        qt_max_residual: w.qt_max_residual,
        rounds,
    }
}

/// Adaptive solver (dynamic, non-orthogonal resource initialization).
pub fn qtcajosa<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    destinations: DestinationSet,
) -> Solution<F> {
    solve(
        scenario,
        caps,
        SolveOptions {
            destinations,
            init: InitMode::Dynamic,
        },
    )
}

/// Non-adaptive baseline: orthogonal one-shot initialization.
pub fn qtcajosa_nonadaptive<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    destinations: DestinationSet,
) -> Solution<F> {
    solve(
        scenario,
        caps,
        SolveOptions {
            destinations,
            init: InitMode::NonAdaptive,
        },
    )
}

// ---------------------------------------------------------------------------
// Final resource allocation
// ---------------------------------------------------------------------------

/// Re-optimize the computing shares per node over the committed assignment.
/// Remote-infeasible tasks fall back to their local UAV; a UAV that cannot
/// serve every minimum switches to the best-effort split.
fn finalize<F: Float>(
    scenario: &Scenario<F>,
    caps: &CapacityTable<F>,
    committed: &[Option<TaskAssignment<F>>],
    tau_op: F,
) -> (Allocation<F>, NodeAllocations<F>) {
    let n_uavs = scenario.uavs.len();
    let mut dest: Vec<Option<(usize, Dest)>> = committed
        .iter()
        .map(|c| c.as_ref().map(|a| (a.subchannel, a.dest)))
        .collect();
    let uav_of: Vec<usize> = (0..scenario.tasks.len())
        .map(|i| scenario.uav_of_device(i))
        .collect();
    let local_of = |i: usize| -> usize {
        scenario.clusters[uav_of[i]]
            .iter()
            .position(|&g| g == i)
            .expect("task in its own cluster")
    };
    let access = |i: usize, b: usize| -> F {
        scenario.tasks[i].bits / caps.r_access[uav_of[i]][local_of(i)][b]
    };

    let mut shares: Vec<F> = vec![F::zero(); scenario.tasks.len()];
    let mut haps_alloc = ComputeAllocation {
        shares: Default::default(),
        residual: scenario.haps.f_max,
        infeasible: Default::default(),
    };
    let mut leo_alloc = haps_alloc.clone();
    leo_alloc.residual = scenario.leo.f_max;

    for node in [Dest::Haps, Dest::Leo] {
        loop {
            let members: Vec<usize> = (0..scenario.tasks.len())
                .filter(|&i| matches!(dest[i], Some((_, d)) if d == node))
                .collect();
            if members.is_empty() {
                break;
            }
            let mut load = vec![F::zero(); n_uavs];
            for &i in &members {
                load[uav_of[i]] += scenario.tasks[i].bits;
            }
            let reqs: Vec<ComputeRequest<F>> = members
                .iter()
                .map(|&i| {
                    let u = uav_of[i];
                    let (b, _) = dest[i].unwrap();
                    let feeder = match node {
                        Dest::Haps => {
                            feeder_delay(load[u], caps.r_feeder_haps[u], F::zero(), false)
                        }
                        Dest::Leo => feeder_delay(
                            load[u],
                            caps.r_feeder_leo[u],
                            scenario.uavs[u].position.distance_to(&scenario.leo.position),
                            true,
                        ),
                        Dest::Local => unreachable!(),
                    };
                    ComputeRequest {
                        task_id: i,
                        weight: scenario.tasks[i].cycles(),
                        deadline: scenario.tasks[i].deadline,
                        arrival: tau_op + access(i, b) + feeder,
                    }
                })
                .collect();
            let pool = match node {
                Dest::Haps => scenario.haps.f_max,
                Dest::Leo => scenario.leo.f_max,
                Dest::Local => unreachable!(),
            };
            let alloc = allocate_with_minimums(&reqs, pool);
            if alloc.infeasible.is_empty() {
                for (&i, &f) in &alloc.shares {
                    shares[i] = f;
                }
                match node {
                    Dest::Haps => haps_alloc = alloc,
                    Dest::Leo => leo_alloc = alloc,
                    Dest::Local => unreachable!(),
                }
                break;
            }
            // The node cannot meet these deadlines: compute them at the UAV.
            for &i in &alloc.infeasible {
                let (b, _) = dest[i].unwrap();
                dest[i] = Some((b, Dest::Local));
            }
        }
    }

    let mut uav_allocs = Vec::with_capacity(n_uavs);
    for u in 0..n_uavs {
        let members: Vec<usize> = scenario.clusters[u]
            .iter()
            .copied()
            .filter(|&i| matches!(dest[i], Some((_, d)) if d == Dest::Local))
            .collect();
        let reqs: Vec<ComputeRequest<F>> = members
            .iter()
            .map(|&i| {
                let (b, _) = dest[i].unwrap();
                ComputeRequest {
                    task_id: i,
                    weight: scenario.tasks[i].cycles(),
                    deadline: scenario.tasks[i].deadline,
                    arrival: tau_op + access(i, b),
                }
            })
            .collect();
        let mut alloc = allocate_with_minimums(&reqs, scenario.uavs[u].f_max);
        if !alloc.infeasible.is_empty() {
            alloc = best_effort_uav(&reqs, scenario.uavs[u].f_max);
        }
        for (&i, &f) in &alloc.shares {
            shares[i] = f;
        }
        uav_allocs.push(alloc);
    }

    let allocation = Allocation {
        assignments: (0..scenario.tasks.len())
            .map(|i| {
                dest[i].map(|(b, d)| TaskAssignment {
                    subchannel: b,
                    dest: d,
                    share: shares[i],
                })
            })
            .collect(),
    };
    (
        allocation,
        NodeAllocations {
            uav: uav_allocs,
            haps: haps_alloc,
            leo: leo_alloc,
        },
    )
}
