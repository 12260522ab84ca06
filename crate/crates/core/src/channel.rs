//! Per-link channel realizations and instantaneous capacities.
//!
//! Access links (IoMT -> UAV) combine a sigmoid LoS-probability pathloss
//! model with elevation-dependent Rician small-scale fading and
//! maximum-ratio combining at the UAV's ULA. Feeder links (UAV -> HAPS/LEO)
//! are rank-1 LoS-MIMO channels under free-space pathloss, so their capacity
//! follows from the single non-zero singular value in closed form.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Float, SPEED_OF_LIGHT};
use crate::scenario::{A2gParams, ElementPattern, Position, RemoteNode, Scenario, Uav};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("zero distance between transmitter and receiver")]
    ZeroDistance,
    #[error("elevation angle {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
}

// ---------------------------------------------------------------------------
// Air-to-ground access links
// ---------------------------------------------------------------------------

/// One access-link channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2gChannel<F> {
    /// Total pathloss `L` (dB).
    pub pathloss_db: F,
    /// Rician K factor (linear).
    pub rician_k: F,
    /// Channel vector at the UAV's ULA, pathloss included.
    pub channel_vector: Vec<Complex<F>>,
    /// Device-to-UAV elevation angle (degrees).
    pub elevation_deg: F,
}

impl<F: Float> A2gChannel<F> {
    /// Receive-combined channel gain `||h||^2`.
    pub fn gain(&self) -> F {
        self.channel_vector
            .iter()
            .map(|h| h.norm_sqr())
            .fold(F::zero(), |acc, x| acc + x)
    }
}

/// Elevation angle from a ground node towards an aerial node, degrees.
pub fn elevation_deg<F: Float>(ground: &Position<F>, aerial: &Position<F>) -> F {
    let d = ground.distance_to(aerial);
    let ratio = ((aerial.z - ground.z) / d).min(F::one()).max(-F::one());
    ratio.asin() * F::cast(180.0 / std::f64::consts::PI)
}

/// Free-space pathloss `20 log10(4 pi d f / c)` in dB.
pub fn free_space_pathloss_db<F: Float>(distance: F, f_carrier: F) -> F {
    let c = F::cast(SPEED_OF_LIGHT);
    let four_pi = F::cast(4.0 * std::f64::consts::PI);
    F::cast(20.0) * (four_pi * distance * f_carrier / c).log10()
}

/// Air-to-ground pathloss: FSPL plus the LoS-probability-weighted excess
/// losses of the chosen environment. The LoS probability is the sigmoid
/// `1 / (1 + a exp(-b (theta - a)))` with `theta` in degrees.
pub fn a2g_pathloss_db<F: Float>(
    dev: &Position<F>,
    uav: &Position<F>,
    env: &A2gParams<F>,
    f_carrier: F,
) -> Result<F, ChannelError> {
    let d = dev.distance_to(uav);
    if d == F::zero() {
        return Err(ChannelError::ZeroDistance);
    }
    let theta = elevation_deg(dev, uav);
    let p_los = F::one() / (F::one() + env.a * (-env.b * (theta - env.a)).exp());
    Ok(free_space_pathloss_db(d, f_carrier)
        + p_los * env.eta_los_db
        + (F::one() - p_los) * env.eta_nlos_db)
}

/// Elevation-dependent Rician K factor (linear):
/// `K(theta) = k_min exp(ln(k_max / k_min) (2 theta / pi)^2)` with `theta` in
/// radians, so `K(0) = k_min` and `K(90 deg) = k_max`.
pub fn rician_k_factor<F: Float>(
    elevation_deg: F,
    k_min: F,
    k_max: F,
) -> Result<F, ChannelError> {
    if elevation_deg < F::zero() || elevation_deg > F::cast(90.0) {
        return Err(ChannelError::ElevationOutOfRange(elevation_deg.as_f64()));
    }
    let theta = elevation_deg * F::cast(std::f64::consts::PI / 180.0);
    let x = F::cast(2.0) * theta / F::cast(std::f64::consts::PI);
    Ok(k_min * ((k_max / k_min).ln() * x * x).exp())
}

/// ULA steering vector (half-wavelength spacing, array along x) for a wave
/// arriving from direction `from -> to`.
pub fn ula_steering<F: Float>(n: usize, from: &Position<F>, to: &Position<F>) -> Vec<Complex<F>> {
    let d = from.distance_to(to);
    let ux = (to.x - from.x) / d;
    let pi = F::cast(std::f64::consts::PI);
    (0..n)
        .map(|k| Complex::new(F::zero(), pi * F::cast(k as f64) * ux).exp())
        .collect()
}

/// UPA steering vector: Kronecker composition of the two axis ULAs
/// (half-wavelength spacing, panel in the xy-plane). `n` is factored into
/// the most square grid.
pub fn upa_steering<F: Float>(n: usize, from: &Position<F>, to: &Position<F>) -> Vec<Complex<F>> {
    let (rows, cols) = upa_grid(n);
    let d = from.distance_to(to);
    let ux = (to.x - from.x) / d;
    let uy = (to.y - from.y) / d;
    let pi = F::cast(std::f64::consts::PI);
    let mut v = Vec::with_capacity(n);
    for p in 0..rows {
        for q in 0..cols {
            let phase = pi * (F::cast(p as f64) * ux + F::cast(q as f64) * uy);
            v.push(Complex::new(F::zero(), phase).exp());
        }
    }
    v
}

/// Factor an antenna count into the most square `rows x cols` grid.
pub fn upa_grid(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && n % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), n / rows.max(1))
}

/// Draw one Rician access channel. The small-scale component is
/// `sqrt(K/(K+1)) a + sqrt(1/(K+1)) w` with `w` circularly-symmetric complex
/// normal of unit per-entry variance; the vector is scaled by
/// `sqrt(1/L)`.
pub fn sample_a2g<F: Float, R: Rng>(
    dev: &Position<F>,
    uav: &Position<F>,
    n_ula: usize,
    env: &A2gParams<F>,
    k_min: F,
    k_max: F,
    f_carrier: F,
    rng: &mut R,
) -> Result<A2gChannel<F>, ChannelError> {
    let pathloss_db = a2g_pathloss_db(dev, uav, env, f_carrier)?;
    let elev = elevation_deg(dev, uav);
    let k = rician_k_factor(elev, k_min, k_max)?;
    let steering = ula_steering(n_ula, dev, uav);

    let los_scale = (k / (k + F::one())).sqrt();
    let nlos_scale = (F::one() / (k + F::one())).sqrt();
    let half = F::cast(0.5).sqrt();
    let amp = (F::one() / F::cast(10.0).powf(pathloss_db / F::cast(10.0))).sqrt();

    let channel_vector = steering
        .into_iter()
        .map(|a| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let w = Complex::new(F::cast(re) * half, F::cast(im) * half);
            (a * los_scale + w * nlos_scale) * amp
        })
        .collect();

    Ok(A2gChannel {
        pathloss_db,
        rician_k: k,
        channel_vector,
        elevation_deg: elev,
    })
}

/// Instantaneous access capacity with maximum-ratio combining:
/// `B_u log2(1 + ||h||^2 p / (B_u N_0))`.
pub fn access_capacity<F: Float>(a2g: &A2gChannel<F>, p: F, b_u: F, n0: F) -> F {
    b_u * (F::one() + a2g.gain() * p / (b_u * n0)).log2()
}

// ---------------------------------------------------------------------------
// Feeder links
// ---------------------------------------------------------------------------

/// Rank-1 LoS-MIMO feeder channel `H = amplitude * aoa * aod^H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederChannel<F> {
    /// Scalar link gain: `lambda g(theta) sqrt(G) / (4 pi d)`.
    pub amplitude: Complex<F>,
    /// Steering vector at the remote node's array (length `N_k`).
    pub aoa_steering: Vec<Complex<F>>,
    /// Steering vector at the UAV's UPA (length `N_u^UPA`).
    pub aod_steering: Vec<Complex<F>>,
    /// The single non-zero singular value of `H`.
    pub singular_value: F,
}

impl<F: Float> FeederChannel<F> {
    /// Materialize the full channel matrix, row-major `N_k x N_u^UPA`.
    pub fn matrix(&self) -> Vec<Vec<Complex<F>>> {
        self.aoa_steering
            .iter()
            .map(|a| {
                self.aod_steering
                    .iter()
                    .map(|b| self.amplitude * a * b.conj())
                    .collect()
            })
            .collect()
    }
}

fn bessel_pattern_gain(aperture: f64, sin_theta: f64) -> f64 {
    let x = aperture * sin_theta.abs();
    if x < 1e-9 {
        1.0
    } else {
        (2.0 * libm::j1(x) / x).abs()
    }
}

/// Normalized element amplitude gain `g_k(theta)` at off-boresight angle
/// `theta` (radians). Outside +-90 deg the node is out of coverage and the
/// gain is zero.
pub fn element_gain<F: Float>(pattern: &ElementPattern<F>, theta: F) -> F {
    let half_pi = F::cast(std::f64::consts::FRAC_PI_2);
    if theta.abs() > half_pi {
        return F::zero();
    }
    match *pattern {
        ElementPattern::Cosine { exponent } => theta.cos().max(F::zero()).powf(exponent),
        ElementPattern::Bessel { aperture } => F::cast(bessel_pattern_gain(
            aperture.as_f64(),
            theta.sin().as_f64(),
        )),
    }
}

/// Aperture constant for the Bessel pattern such that the power pattern is
/// 3 dB down at `half_beamwidth_deg` off boresight.
pub fn bessel_aperture_for_half_beamwidth(half_beamwidth_deg: f64) -> f64 {
    // Solve 2 J1(x)/x = 1/sqrt(2) on (0, first null).
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let mut lo = 1e-9;
    let mut hi = 3.8317;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * libm::j1(mid) / mid > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x3db = 0.5 * (lo + hi);
    x3db / half_beamwidth_deg.to_radians().sin()
}

/// Off-boresight angle (radians) seen by remote node `k`'s downward-facing
/// array towards a UAV.
pub fn off_boresight<F: Float>(remote: &Position<F>, uav: &Position<F>) -> F {
    let d = remote.distance_to(uav);
    let c = ((remote.z - uav.z) / d).min(F::one()).max(-F::one());
    c.acos()
}

/// Build the rank-1 feeder channel between a UAV and a remote node.
pub fn feeder_channel<F: Float>(
    uav: &Uav<F>,
    remote: &RemoteNode<F>,
    f_carrier: F,
    atm_loss: F,
) -> FeederChannel<F> {
    let d = uav.position.distance_to(&remote.position);
    let lambda = F::cast(SPEED_OF_LIGHT) / f_carrier;
    let theta = off_boresight(&remote.position, &uav.position);
    let g = element_gain(&remote.pattern, theta);
    let four_pi = F::cast(4.0 * std::f64::consts::PI);
    let amplitude = Complex::new(lambda * g * atm_loss.sqrt() / (four_pi * d), F::zero());

    let aoa_steering = upa_steering(remote.n_antennas, &remote.position, &uav.position);
    let aod_steering = upa_steering(uav.n_antennas_upa, &uav.position, &remote.position);
    // Unit-modulus entries make ||a|| = sqrt(N), so the rank-1 singular value
    // is |amplitude| sqrt(N_k N_u).
    let singular_value =
        amplitude.norm() * F::cast((remote.n_antennas * uav.n_antennas_upa) as f64).sqrt();
    FeederChannel {
        amplitude,
        aoa_steering,
        aod_steering,
        singular_value,
    }
}

/// Feeder capacity `B_k log2(1 + p sigma^2 / (B_k N_0))`.
pub fn feeder_capacity<F: Float>(channel: &FeederChannel<F>, p: F, band: F, n0: F) -> F {
    let sigma2 = channel.singular_value * channel.singular_value;
    band * (F::one() + p * sigma2 / (band * n0)).log2()
}

// ---------------------------------------------------------------------------
// Capacity table
// ---------------------------------------------------------------------------

/// Realized capacities for every link of a scenario snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable<F> {
    /// `r_access[u][i][b]`: capacity of cluster-member `i` of UAV `u` on
    /// subchannel `b` (bit/s). Member order follows the cluster list.
    pub r_access: Vec<Vec<Vec<F>>>,
    /// `R_{u,h}` per UAV (bit/s).
    pub r_feeder_haps: Vec<F>,
    /// `R_{u,s}` per UAV (bit/s).
    pub r_feeder_leo: Vec<F>,
}

/// Draw every access channel once per (device, subchannel) and build both
/// feeder links per UAV. Each UAV uses an independent, seed-derived rng
/// stream, so the table is deterministic given (scenario, seed).
pub fn build_capacity_table<F: Float>(
    scenario: &Scenario<F>,
    seed: u64,
) -> Result<CapacityTable<F>, ChannelError> {
    let bands = &scenario.bands;
    let env = &scenario.env;
    let mut r_access = Vec::with_capacity(scenario.uavs.len());
    let mut r_feeder_haps = Vec::with_capacity(scenario.uavs.len());
    let mut r_feeder_leo = Vec::with_capacity(scenario.uavs.len());

    for (u, uav) in scenario.uavs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + u as u64);

        let mut rows = Vec::with_capacity(scenario.clusters[u].len());
        for &dev_idx in &scenario.clusters[u] {
            let dev = &scenario.devices[dev_idx];
            let mut row = Vec::with_capacity(bands.n_subchannels);
            for _b in 0..bands.n_subchannels {
                let a2g = sample_a2g(
                    &dev.position,
                    &uav.position,
                    uav.n_antennas_ula,
                    &env.a2g,
                    env.rician_k_min,
                    env.rician_k_max,
                    bands.access_carrier,
                    &mut rng,
                )?;
                row.push(access_capacity(
                    &a2g,
                    dev.tx_power,
                    bands.subchannel_bandwidth,
                    env.noise_psd,
                ));
            }
            rows.push(row);
        }
        r_access.push(rows);

        let haps = feeder_channel(uav, &scenario.haps, bands.feeder_carrier, env.atm_loss);
        r_feeder_haps.push(feeder_capacity(
            &haps,
            uav.tx_power,
            bands.haps_bandwidth,
            env.noise_psd,
        ));
        let leo = feeder_channel(uav, &scenario.leo, bands.feeder_carrier, env.atm_loss);
        r_feeder_leo.push(feeder_capacity(
            &leo,
            uav.tx_power,
            bands.leo_bandwidth,
            env.noise_psd,
        ));
    }

    Ok(CapacityTable {
        r_access,
        r_feeder_haps,
        r_feeder_leo,
    })
}
