//! World state: node geometry, clusters, tasks and radio/compute parameters.
//!
//! A [`Scenario`] is built either from an explicit JSON config (devices,
//! clusters and tasks spelled out) or from a generator section that places
//! devices uniformly at random in a disk and assigns them to the nearest
//! cluster center. Scenarios are immutable after construction and fully
//! reproducible from their seed.
//!
//! All config quantities are SI base units: Hz, W, m, s, bits.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Float;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("device {device} appears in clusters {first} and {second}")]
    OverlappingClusters {
        device: usize,
        first: usize,
        second: usize,
    },
    #[error("device {device} belongs to no cluster")]
    UnclusteredDevice { device: usize },
}

fn invalid(field: &str, reason: impl fmt::Display) -> ScenarioError {
    ScenarioError::InvalidField {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position<F> {
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Float> Position<F> {
    pub fn new(x: F, y: F, z: F) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(F::cast(a[0]), F::cast(a[1]), F::cast(a[2]))
    }

    pub fn distance_to(&self, other: &Self) -> F {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Horizontal (ground-plane) distance.
    pub fn ground_distance_to(&self, other: &Self) -> F {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Physical-environment presets
// ---------------------------------------------------------------------------

/// Sigmoid LoS-probability pathloss parameters for the air-to-ground model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2gParams<F> {
    /// Sigmoid shape parameter `a`.
    pub a: F,
    /// Sigmoid shape parameter `b`.
    pub b: F,
    /// Excess loss on LoS links (dB).
    pub eta_los_db: F,
    /// Excess loss on NLoS links (dB).
    pub eta_nlos_db: F,
}

impl<F: Float> A2gParams<F> {
    pub fn suburban() -> Self {
        Self {
            a: F::cast(4.88),
            b: F::cast(0.43),
            eta_los_db: F::cast(0.1),
            eta_nlos_db: F::cast(21.0),
        }
    }

    /// Open-terrain variant: same LoS-probability sigmoid as suburban with a
    /// milder NLoS excess.
    pub fn rural() -> Self {
        Self {
            a: F::cast(4.88),
            b: F::cast(0.43),
            eta_los_db: F::cast(0.1),
            eta_nlos_db: F::cast(12.0),
        }
    }
}

/// Named preset or inline parameters, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum A2gEnvironment {
    Preset(String),
    Custom {
        a: f64,
        b: f64,
        eta_los_db: f64,
        eta_nlos_db: f64,
    },
}

impl A2gEnvironment {
    fn resolve<F: Float>(&self) -> Result<A2gParams<F>, ScenarioError> {
        match self {
            A2gEnvironment::Preset(name) => match name.as_str() {
                "suburban" => Ok(A2gParams::suburban()),
                "rural" => Ok(A2gParams::rural()),
                other => Err(invalid(
                    "defaults.a2g_environment",
                    format!("unknown preset `{other}` (expected `suburban` or `rural`)"),
                )),
            },
            A2gEnvironment::Custom {
                a,
                b,
                eta_los_db,
                eta_nlos_db,
            } => Ok(A2gParams {
                a: F::cast(*a),
                b: F::cast(*b),
                eta_los_db: F::cast(*eta_los_db),
                eta_nlos_db: F::cast(*eta_nlos_db),
            }),
        }
    }
}

/// Normalized element radiation pattern of a remote node's array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ElementPattern<F> {
    /// `g(theta) = cos(theta)^exponent`, zero beyond +-90 deg.
    Cosine { exponent: F },
    /// `g(theta) = |2 J1(k sin theta) / (k sin theta)|` with aperture
    /// constant `k`, zero beyond +-90 deg.
    Bessel { aperture: F },
}

// ---------------------------------------------------------------------------
// Resolved world state
// ---------------------------------------------------------------------------

/// One compute task: `[d_i, c_i, tau_i_max]` plus its owner device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task<F> {
    pub device_id: usize,
    /// Task size in bits.
    pub bits: F,
    /// Computational density in CPU cycles per bit.
    pub cycles_per_bit: F,
    /// Maximum tolerable delay in seconds.
    pub deadline: F,
}

impl<F: Float> Task<F> {
    /// Total CPU cycles required: `d_i * c_i`.
    pub fn cycles(&self) -> F {
        self.bits * self.cycles_per_bit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device<F> {
    pub position: Position<F>,
    /// Uplink transmit power towards the UAV (W).
    pub tx_power: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uav<F> {
    pub position: Position<F>,
    /// Compute pool (CPU cycles/s).
    pub f_max: F,
    /// Downward-facing receive array size.
    pub n_antennas_ula: usize,
    /// Upward-facing feeder array size.
    pub n_antennas_upa: usize,
    /// Feeder-uplink transmit power (W).
    pub tx_power: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemoteNode<F> {
    pub position: Position<F>,
    /// Compute pool (CPU cycles/s).
    pub f_max: F,
    /// Downward-facing array size.
    pub n_antennas: usize,
    pub pattern: ElementPattern<F>,
}

/// Access- and feeder-band layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands<F> {
    /// Per-subchannel bandwidth `B_u` (Hz).
    pub subchannel_bandwidth: F,
    /// Number of orthogonal access subchannels `B`.
    pub n_subchannels: usize,
    /// UAV-HAPS feeder bandwidth `B_h` (Hz).
    pub haps_bandwidth: F,
    /// UAV-LEO feeder bandwidth `B_s` (Hz).
    pub leo_bandwidth: F,
    /// Access-link carrier frequency (Hz).
    pub access_carrier: F,
    /// Feeder-link carrier frequency (Hz).
    pub feeder_carrier: F,
}

/// Radio environment shared by all links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment<F> {
    /// Noise power spectral density `N_0` (W/Hz).
    pub noise_psd: F,
    /// Scalar atmospheric loss factor `G` on feeder links (1 = clear sky).
    pub atm_loss: F,
    pub a2g: A2gParams<F>,
    /// Rician K factor at zero elevation (linear).
    pub rician_k_min: F,
    /// Rician K factor at 90 deg elevation (linear).
    pub rician_k_max: F,
}

/// Node executing the allocation algorithm, for the runtime-delay charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Executor {
    Haps,
    Leo,
    Uav(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSpec<F> {
    pub executor: Executor,
    /// CPU cycles per elementary operation.
    pub cycles_per_operation: F,
}

/// Immutable world state consumed by all other modules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario<F> {
    pub devices: Vec<Device<F>>,
    pub uavs: Vec<Uav<F>>,
    pub haps: RemoteNode<F>,
    pub leo: RemoteNode<F>,
    /// Per-UAV member device indices, disjoint, covering all devices.
    pub clusters: Vec<Vec<usize>>,
    /// One task per device; `tasks[i].device_id == i`.
    pub tasks: Vec<Task<F>>,
    pub bands: Bands<F>,
    pub env: Environment<F>,
    pub runtime: RuntimeSpec<F>,
    pub seed: u64,
}

impl<F: Float> Scenario<F> {
    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// UAV serving a given device.
    pub fn uav_of_device(&self, device: usize) -> usize {
        self.clusters
            .iter()
            .position(|c| c.contains(&device))
            .expect("validated scenario: every device is clustered")
    }

    /// Largest cluster size, `max_u I_u`.
    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn executor_position(&self) -> Position<F> {
        match self.runtime.executor {
            Executor::Haps => self.haps.position,
            Executor::Leo => self.leo.position,
            Executor::Uav(u) => self.uavs[u].position,
        }
    }

    pub fn executor_f_max(&self) -> F {
        match self.runtime.executor {
            Executor::Haps => self.haps.f_max,
            Executor::Leo => self.leo.f_max,
            Executor::Uav(u) => self.uavs[u].f_max,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.bands.n_subchannels == 0 {
            return Err(invalid("bands.n_subchannels", "must be >= 1"));
        }
        for (name, v) in [
            ("bands.subchannel_bandwidth", self.bands.subchannel_bandwidth),
            ("bands.haps_bandwidth", self.bands.haps_bandwidth),
            ("bands.leo_bandwidth", self.bands.leo_bandwidth),
            ("bands.access_carrier", self.bands.access_carrier),
            ("bands.feeder_carrier", self.bands.feeder_carrier),
        ] {
            if !(v > F::zero()) {
                return Err(invalid(name, "must be > 0"));
            }
        }
        if !(self.env.noise_psd > F::zero()) {
            return Err(invalid("defaults.noise_psd", "must be > 0"));
        }
        if self.env.rician_k_min <= F::zero() || self.env.rician_k_max < self.env.rician_k_min {
            return Err(invalid(
                "defaults.rician_k_min",
                "need 0 < k_min <= k_max",
            ));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if d.position.z != F::zero() {
                return Err(invalid(
                    &format!("devices[{i}].position"),
                    "IoMT devices sit on the ground (z = 0)",
                ));
            }
        }
        for (u, uav) in self.uavs.iter().enumerate() {
            if uav.position.z < F::zero() {
                return Err(invalid(&format!("uavs[{u}].position"), "z must be >= 0"));
            }
            if uav.n_antennas_ula == 0 || uav.n_antennas_upa == 0 {
                return Err(invalid(&format!("uavs[{u}]"), "antenna counts must be >= 1"));
            }
            if uav.f_max < F::zero() {
                return Err(invalid(&format!("uavs[{u}].f_max"), "must be >= 0"));
            }
        }
        for (name, node) in [("HAPS", &self.haps), ("LEO", &self.leo)] {
            if node.position.z < F::zero() {
                return Err(invalid(&format!("nodes.{name}.position"), "z must be >= 0"));
            }
            if node.n_antennas == 0 {
                return Err(invalid(&format!("nodes.{name}.n_antennas"), "must be >= 1"));
            }
            if node.f_max < F::zero() {
                return Err(invalid(&format!("nodes.{name}.f_max"), "must be >= 0"));
            }
        }
        // Clusters partition the device set.
        let mut owner = vec![None; self.devices.len()];
        for (u, members) in self.clusters.iter().enumerate() {
            for &d in members {
                if d >= self.devices.len() {
                    return Err(invalid(
                        &format!("clusters[{u}]"),
                        format!("unknown device index {d}"),
                    ));
                }
                if let Some(first) = owner[d] {
                    return Err(ScenarioError::OverlappingClusters {
                        device: d,
                        first,
                        second: u,
                    });
                }
                owner[d] = Some(u);
            }
        }
        if let Some(device) = owner.iter().position(Option::is_none) {
            return Err(ScenarioError::UnclusteredDevice { device });
        }
        if self.tasks.len() != self.devices.len() {
            return Err(invalid(
                "tasks",
                format!(
                    "expected one task per device ({} devices, {} tasks)",
                    self.devices.len(),
                    self.tasks.len()
                ),
            ));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.device_id != i {
                return Err(invalid(
                    &format!("tasks[{i}].device"),
                    "tasks must cover each device exactly once, in device order",
                ));
            }
            if !(t.bits > F::zero()) {
                return Err(invalid(&format!("tasks[{i}].bits"), "must be > 0"));
            }
            if !(t.cycles_per_bit > F::zero()) {
                return Err(invalid(&format!("tasks[{i}].cycles_per_bit"), "must be > 0"));
            }
            if !(t.deadline > F::zero()) {
                return Err(invalid(&format!("tasks[{i}].deadline"), "must be > 0"));
            }
        }
        if let Executor::Uav(u) = self.runtime.executor {
            if u >= self.uavs.len() {
                return Err(invalid(
                    "defaults.runtime_executor",
                    format!("UAV{u} does not exist"),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

pub mod defaults {
    //! Documented default parameter values, used when a config omits a field.

    /// Thermal noise density at -174 dBm/Hz plus a 7 dB receiver noise figure.
    pub const NOISE_PSD: f64 = 1.995_262_314_968_88e-20;
    /// 23 dBm, LTE-M class device uplink.
    pub const DEVICE_TX_POWER: f64 = 0.199_526_231_496_887_97;
    /// 33 dBm UAV feeder uplink.
    pub const UAV_TX_POWER: f64 = 1.995_262_314_968_879_7;
    pub const ATMOSPHERIC_LOSS: f64 = 1.0;
    pub const RICIAN_K_MIN: f64 = 1.0;
    /// 15 dB.
    pub const RICIAN_K_MAX: f64 = 31.622_776_601_683_793;
    pub const CYCLES_PER_OPERATION: f64 = 1.0;

    pub const SUBCHANNEL_BANDWIDTH: f64 = 1.4e6;
    pub const N_SUBCHANNELS: usize = 14;
    pub const HAPS_BANDWIDTH: f64 = 1.0e8;
    pub const LEO_BANDWIDTH: f64 = 2.0e8;
    pub const ACCESS_CARRIER: f64 = 2.1e9;
    pub const FEEDER_CARRIER: f64 = 2.8e10;

    pub const UAV_ALTITUDE: f64 = 120.0;
    pub const HAPS_ALTITUDE: f64 = 20.0e3;
    pub const LEO_ALTITUDE: f64 = 500.0e3;
    pub const UAV_F_MAX: f64 = 1.0e9;
    pub const HAPS_F_MAX: f64 = 1.0e10;
    pub const LEO_F_MAX: f64 = 5.0e9;
    pub const UAV_N_ULA: usize = 8;
    pub const UAV_N_UPA: usize = 16;
    pub const HAPS_N_ANTENNAS: usize = 64;
    pub const LEO_N_ANTENNAS: usize = 64;
    pub const HAPS_COSINE_EXPONENT: f64 = 2.0;
    pub const LEO_HALF_BEAMWIDTH_DEG: f64 = 2.0;

    pub const TASK_BITS_LO: f64 = 1.0e5;
    pub const TASK_BITS_HI: f64 = 1.0e7;
    pub const CYCLES_PER_BIT: f64 = 100.0;
    pub const DEADLINE: f64 = 30.0;
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    pub subchannel_bandwidth: Option<f64>,
    pub n_subchannels: Option<usize>,
    pub haps_bandwidth: Option<f64>,
    pub leo_bandwidth: Option<f64>,
    pub access_carrier: Option<f64>,
    pub feeder_carrier: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsConfig {
    pub noise_psd: Option<f64>,
    pub device_tx_power: Option<f64>,
    pub uav_tx_power: Option<f64>,
    pub atmospheric_loss: Option<f64>,
    pub a2g_environment: Option<A2gEnvironment>,
    pub rician_k_min: Option<f64>,
    pub rician_k_max: Option<f64>,
    /// `"HAPS"`, `"LEO"` or `"UAV<k>"`.
    pub runtime_executor: Option<String>,
    pub cycles_per_operation: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HapsConfig {
    pub position: Option<[f64; 3]>,
    pub f_max: Option<f64>,
    pub n_antennas: Option<usize>,
    pub cosine_exponent: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeoConfig {
    pub position: Option<[f64; 3]>,
    pub f_max: Option<f64>,
    pub n_antennas: Option<usize>,
    /// Half-power half-beamwidth of the element pattern, degrees.
    pub half_beamwidth_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavTemplateConfig {
    pub altitude: Option<f64>,
    pub f_max: Option<f64>,
    pub n_antennas_ula: Option<usize>,
    pub n_antennas_upa: Option<usize>,
    pub tx_power: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub position: [f64; 3],
    pub tx_power: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesConfig {
    #[serde(rename = "HAPS", default)]
    pub haps: HapsConfig,
    #[serde(rename = "LEO", default)]
    pub leo: LeoConfig,
    #[serde(rename = "UAV", default)]
    pub uav: UavTemplateConfig,
    /// Explicit-mode IoMT devices, indexed by position in this list.
    #[serde(default)]
    pub devices: Vec<DeviceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub members: Vec<usize>,
    /// Explicit UAV position; default is the member centroid at the template
    /// altitude.
    pub uav_position: Option<[f64; 3]>,
    pub uav_f_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub device: usize,
    pub bits: f64,
    pub cycles_per_bit: Option<f64>,
    pub deadline: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_uavs: usize,
    /// Devices sampled per cluster; actual cluster sizes follow the
    /// nearest-center assignment and may differ.
    pub devices_per_cluster: usize,
    /// Maximum ground distance of a device from the origin (m).
    pub d_max: f64,
    /// Ground-plane cluster centers; must have `n_uavs` entries.
    pub cluster_centers: Vec<[f64; 2]>,
    /// Uniform task-size range `[lo, hi]` in bits.
    pub task_bits: Option<[f64; 2]>,
    pub cycles_per_bit: Option<f64>,
    pub deadline: Option<f64>,
}

/// Top-level scenario config document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub defaults: DefaultsConfig,
    #[serde(default)]
    pub nodes: NodesConfig,
    pub task_generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub clusters: Vec<ClusterConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_value(value: &serde_json::Value) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_value(value.clone())?)
    }

    fn parse_executor(&self, n_uavs: usize) -> Result<Executor, ScenarioError> {
        let raw = self
            .defaults
            .runtime_executor
            .as_deref()
            .unwrap_or("HAPS");
        match raw {
            "HAPS" => Ok(Executor::Haps),
            "LEO" => Ok(Executor::Leo),
            other => {
                let idx = other
                    .strip_prefix("UAV")
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| {
                        invalid(
                            "defaults.runtime_executor",
                            format!("`{other}` is not `HAPS`, `LEO` or `UAV<k>`"),
                        )
                    })?;
                if idx >= n_uavs {
                    return Err(invalid(
                        "defaults.runtime_executor",
                        format!("UAV{idx} does not exist (scenario has {n_uavs} UAVs)"),
                    ));
                }
                Ok(Executor::Uav(idx))
            }
        }
    }

    /// Resolve into an immutable [`Scenario`], generating geometry and tasks
    /// when a `task_generator` section is present.
    pub fn resolve<F: Float>(&self) -> Result<Scenario<F>, ScenarioError> {
        let bands = Bands {
            subchannel_bandwidth: F::cast(
                self.bands
                    .subchannel_bandwidth
                    .unwrap_or(defaults::SUBCHANNEL_BANDWIDTH),
            ),
            n_subchannels: self.bands.n_subchannels.unwrap_or(defaults::N_SUBCHANNELS),
            haps_bandwidth: F::cast(
                self.bands.haps_bandwidth.unwrap_or(defaults::HAPS_BANDWIDTH),
            ),
            leo_bandwidth: F::cast(self.bands.leo_bandwidth.unwrap_or(defaults::LEO_BANDWIDTH)),
            access_carrier: F::cast(self.bands.access_carrier.unwrap_or(defaults::ACCESS_CARRIER)),
            feeder_carrier: F::cast(self.bands.feeder_carrier.unwrap_or(defaults::FEEDER_CARRIER)),
        };
        let env = Environment {
            noise_psd: F::cast(self.defaults.noise_psd.unwrap_or(defaults::NOISE_PSD)),
            atm_loss: F::cast(
                self.defaults
                    .atmospheric_loss
                    .unwrap_or(defaults::ATMOSPHERIC_LOSS),
            ),
            a2g: self
                .defaults
                .a2g_environment
                .clone()
                .unwrap_or_else(|| A2gEnvironment::Preset("suburban".into()))
                .resolve()?,
            rician_k_min: F::cast(self.defaults.rician_k_min.unwrap_or(defaults::RICIAN_K_MIN)),
            rician_k_max: F::cast(self.defaults.rician_k_max.unwrap_or(defaults::RICIAN_K_MAX)),
        };
        let haps = RemoteNode {
            position: Position::from_array(
                self.nodes
                    .haps
                    .position
                    .unwrap_or([0.0, 0.0, defaults::HAPS_ALTITUDE]),
            ),
            f_max: F::cast(self.nodes.haps.f_max.unwrap_or(defaults::HAPS_F_MAX)),
            n_antennas: self
                .nodes
                .haps
                .n_antennas
                .unwrap_or(defaults::HAPS_N_ANTENNAS),
            pattern: ElementPattern::Cosine {
                exponent: F::cast(
                    self.nodes
                        .haps
                        .cosine_exponent
                        .unwrap_or(defaults::HAPS_COSINE_EXPONENT),
                ),
            },
        };
        let half_bw = self
            .nodes
            .leo
            .half_beamwidth_deg
            .unwrap_or(defaults::LEO_HALF_BEAMWIDTH_DEG);
        if !(half_bw > 0.0 && half_bw < 90.0) {
            return Err(invalid(
                "nodes.LEO.half_beamwidth_deg",
                "must be in (0, 90)",
            ));
        }
        let leo = RemoteNode {
            position: Position::from_array(
                self.nodes
                    .leo
                    .position
                    .unwrap_or([0.0, 0.0, defaults::LEO_ALTITUDE]),
            ),
            f_max: F::cast(self.nodes.leo.f_max.unwrap_or(defaults::LEO_F_MAX)),
            n_antennas: self
                .nodes
                .leo
                .n_antennas
                .unwrap_or(defaults::LEO_N_ANTENNAS),
            pattern: ElementPattern::Bessel {
                aperture: F::cast(crate::channel::bessel_aperture_for_half_beamwidth(half_bw)),
            },
        };

        let (devices, uavs, clusters, tasks) = if let Some(gen) = &self.task_generator {
            if !self.clusters.is_empty() || !self.tasks.is_empty() || !self.nodes.devices.is_empty()
            {
                return Err(invalid(
                    "task_generator",
                    "generator mode excludes explicit `clusters`, `tasks` and `nodes.devices`",
                ));
            }
            self.generate::<F>(gen)?
        } else {
            self.explicit::<F>()?
        };

        let runtime = RuntimeSpec {
            executor: self.parse_executor(uavs.len())?,
            cycles_per_operation: F::cast(
                self.defaults
                    .cycles_per_operation
                    .unwrap_or(defaults::CYCLES_PER_OPERATION),
            ),
        };
        let scenario = Scenario {
            devices,
            uavs,
            haps,
            leo,
            clusters,
            tasks,
            bands,
            env,
            runtime,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn uav_from_template<F: Float>(&self, position: Position<F>, f_max: Option<f64>) -> Uav<F> {
        Uav {
            position,
            f_max: F::cast(
                f_max
                    .or(self.nodes.uav.f_max)
                    .unwrap_or(defaults::UAV_F_MAX),
            ),
            n_antennas_ula: self.nodes.uav.n_antennas_ula.unwrap_or(defaults::UAV_N_ULA),
            n_antennas_upa: self.nodes.uav.n_antennas_upa.unwrap_or(defaults::UAV_N_UPA),
            tx_power: F::cast(
                self.nodes
                    .uav
                    .tx_power
                    .or(self.defaults.uav_tx_power)
                    .unwrap_or(defaults::UAV_TX_POWER),
            ),
        }
    }

    fn explicit<F: Float>(&self) -> Result<ResolvedWorld<F>, ScenarioError> {
        if self.tasks.is_empty() && self.nodes.devices.is_empty() {
            return Err(invalid(
                "tasks",
                "config needs either `task_generator` or explicit `nodes.devices`/`clusters`/`tasks`",
            ));
        }
        let device_power = F::cast(
            self.defaults
                .device_tx_power
                .unwrap_or(defaults::DEVICE_TX_POWER),
        );
        let devices: Vec<Device<F>> = self
            .nodes
            .devices
            .iter()
            .map(|d| Device {
                position: Position::from_array(d.position),
                tx_power: d.tx_power.map(F::cast).unwrap_or(device_power),
            })
            .collect();

        let altitude = self.nodes.uav.altitude.unwrap_or(defaults::UAV_ALTITUDE);
        let mut uavs = Vec::with_capacity(self.clusters.len());
        let mut clusters = Vec::with_capacity(self.clusters.len());
        for (u, c) in self.clusters.iter().enumerate() {
            let position = match c.uav_position {
                Some(p) => Position::from_array(p),
                None => {
                    if c.members.is_empty() {
                        return Err(invalid(
                            &format!("clusters[{u}]"),
                            "empty cluster needs an explicit `uav_position`",
                        ));
                    }
                    centroid_at_altitude(&devices, &c.members, F::cast(altitude))
                }
            };
            uavs.push(self.uav_from_template(position, c.uav_f_max));
            clusters.push(c.members.clone());
        }

        let mut tasks: Vec<Option<Task<F>>> = vec![None; devices.len()];
        for (k, t) in self.tasks.iter().enumerate() {
            if t.device >= devices.len() {
                return Err(invalid(
                    &format!("tasks[{k}].device"),
                    format!("unknown device index {}", t.device),
                ));
            }
            if tasks[t.device].is_some() {
                return Err(invalid(
                    &format!("tasks[{k}].device"),
                    format!("device {} already has a task", t.device),
                ));
            }
            tasks[t.device] = Some(Task {
                device_id: t.device,
                bits: F::cast(t.bits),
                cycles_per_bit: F::cast(t.cycles_per_bit.unwrap_or(defaults::CYCLES_PER_BIT)),
                deadline: F::cast(t.deadline.unwrap_or(defaults::DEADLINE)),
            });
        }
        let tasks: Vec<Task<F>> = tasks
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| invalid("tasks", format!("device {i} has no task"))))
            .collect::<Result<_, _>>()?;

        Ok((devices, uavs, clusters, tasks))
    }

    /// Place devices uniformly at random in a disk of radius `d_max` around
    /// the origin and assign each to the nearest cluster center; the UAV of a
    /// cluster hovers at the template altitude over its member centroid.
    fn generate<F: Float>(&self, gen: &GeneratorConfig) -> Result<ResolvedWorld<F>, ScenarioError> {
        if gen.n_uavs == 0 {
            return Err(invalid("task_generator.n_uavs", "must be >= 1"));
        }
        if !(gen.d_max > 0.0) {
            return Err(invalid("task_generator.d_max", "must be > 0"));
        }
        if gen.cluster_centers.len() != gen.n_uavs {
            return Err(invalid(
                "task_generator.cluster_centers",
                format!(
                    "expected {} centers, got {}",
                    gen.n_uavs,
                    gen.cluster_centers.len()
                ),
            ));
        }
        let [bits_lo, bits_hi] = gen
            .task_bits
            .unwrap_or([defaults::TASK_BITS_LO, defaults::TASK_BITS_HI]);
        if !(bits_lo > 0.0 && bits_hi >= bits_lo) {
            return Err(invalid("task_generator.task_bits", "need 0 < lo <= hi"));
        }
        let device_power = F::cast(
            self.defaults
                .device_tx_power
                .unwrap_or(defaults::DEVICE_TX_POWER),
        );

        let n_devices = gen.n_uavs * gen.devices_per_cluster;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut devices = Vec::with_capacity(n_devices);
        let mut tasks = Vec::with_capacity(n_devices);
        for i in 0..n_devices {
            let radius = gen.d_max * rng.gen::<f64>().sqrt();
            let angle = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let bits = if bits_hi > bits_lo {
                rng.gen_range(bits_lo..bits_hi)
            } else {
                bits_lo
            };
            devices.push(Device {
                position: Position::new(
                    F::cast(radius * angle.cos()),
                    F::cast(radius * angle.sin()),
                    F::zero(),
                ),
                tx_power: device_power,
            });
            tasks.push(Task {
                device_id: i,
                bits: F::cast(bits),
                cycles_per_bit: F::cast(gen.cycles_per_bit.unwrap_or(defaults::CYCLES_PER_BIT)),
                deadline: F::cast(gen.deadline.unwrap_or(defaults::DEADLINE)),
            });
        }

        let mut clusters = vec![Vec::new(); gen.n_uavs];
        for (i, d) in devices.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d2 = f64::INFINITY;
            for (u, c) in gen.cluster_centers.iter().enumerate() {
                let dx = d.position.x.as_f64() - c[0];
                let dy = d.position.y.as_f64() - c[1];
                let d2 = dx * dx + dy * dy;
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = u;
                }
            }
            clusters[best].push(i);
        }

        let altitude = F::cast(self.nodes.uav.altitude.unwrap_or(defaults::UAV_ALTITUDE));
        let uavs = clusters
            .iter()
            .enumerate()
            .map(|(u, members)| {
                let position = if members.is_empty() {
                    let c = gen.cluster_centers[u];
                    Position::new(F::cast(c[0]), F::cast(c[1]), altitude)
                } else {
                    centroid_at_altitude(&devices, members, altitude)
                };
                self.uav_from_template(position, None)
            })
            .collect();

        Ok((devices, uavs, clusters, tasks))
    }
}

type ResolvedWorld<F> = (Vec<Device<F>>, Vec<Uav<F>>, Vec<Vec<usize>>, Vec<Task<F>>);

fn centroid_at_altitude<F: Float>(
    devices: &[Device<F>],
    members: &[usize],
    altitude: F,
) -> Position<F> {
    let n = F::cast(members.len() as f64);
    let mut x = F::zero();
    let mut y = F::zero();
    for &d in members {
        x += devices[d].position.x;
        y += devices[d].position.y;
    }
    Position::new(x / n, y / n, altitude)
}

/// Parse, validate and resolve a JSON scenario config document.
pub fn load_scenario<F: Float>(config_text: &str) -> Result<Scenario<F>, ScenarioError> {
    ScenarioConfig::parse(config_text)?.resolve()
}

/// Resolve a scenario from an already-parsed JSON value (used by the sweep
/// harness after applying overrides).
pub fn scenario_from_value<F: Float>(
    value: &serde_json::Value,
) -> Result<Scenario<F>, ScenarioError> {
    ScenarioConfig::from_value(value)?.resolve()
}
