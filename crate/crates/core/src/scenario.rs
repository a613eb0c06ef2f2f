//! Problem instances: geometry, task profiles, radio and energy parameters,
//! and the fixed user to UAV association.
//!
//! All quantities are SI. Antenna gains and added losses stay in dB because
//! that is how they are quoted; the channel model converts them.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{dbm_to_watts, BITS_PER_MB};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    /// Input data size (bits).
    pub input_size_bits: f64,
    /// CPU cycles needed per input bit.
    pub cycles_per_bit: f64,
    /// Maximum tolerable latency (s). Reported, not enforced.
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNode {
    pub id: usize,
    pub position: Point2,
    /// Local CPU frequency (cycles/s).
    pub local_cpu: f64,
    /// Uplink transmit power (W).
    pub tx_power: f64,
    /// Energy budget (J).
    pub energy_budget: f64,
    /// Effective switched capacitance of the device chip.
    pub chip_constant: f64,
    pub task: TaskProfile,
    pub home_uav: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverParams {
    /// Thrust (N).
    pub thrust: f64,
    /// Power efficiency in (0, 1].
    pub power_efficiency: f64,
    pub rotor_count: u32,
    /// Rotor diameter (m).
    pub rotor_diameter: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
}

impl Default for HoverParams {
    fn default() -> Self {
        Self {
            thrust: 30.0,
            power_efficiency: 0.7,
            rotor_count: 4,
            rotor_diameter: 0.254,
            air_density: 1.225,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavNode {
    pub id: usize,
    pub position: Point2,
    /// Hover altitude (m).
    pub altitude: f64,
    /// MEC server capacity (cycles/s).
    pub cpu_capacity: f64,
    /// UAV to UAV transmit power (W).
    pub tx_power_a2a: f64,
    /// UAV to BS transmit power (W).
    pub tx_power_backhaul: f64,
    /// Energy budget (J).
    pub energy_budget: f64,
    pub chip_constant: f64,
    pub hover: HoverParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub position: Point3,
    /// MEC server capacity (cycles/s).
    pub cpu_capacity: f64,
    /// Receive antenna gain (dB).
    pub rx_antenna_gain_db: f64,
    /// Chip constant used to report compute energy at the BS.
    #[serde(default = "default_chip_constant")]
    pub chip_constant: f64,
}

fn default_chip_constant() -> f64 {
    5.0e-27
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// User to UAV bandwidth available at each UAV (Hz).
    pub a2g_bandwidth_per_uav: f64,
    /// UAV to UAV bandwidth (Hz).
    pub a2a_bandwidth: f64,
    /// mmWave backhaul bandwidth (Hz).
    pub mmwave_bandwidth: f64,
    /// Carrier of the user to UAV and UAV to UAV band (Hz).
    pub carrier_a2g: f64,
    /// mmWave backhaul carrier (Hz).
    pub carrier_mm: f64,
    /// Noise power (W).
    pub noise_power: f64,
    pub pathloss_exponent: f64,
    /// Environment constant C of the LoS probability model.
    pub env_c: f64,
    /// Environment constant D of the LoS probability model.
    pub env_d: f64,
    pub added_loss_los_db: f64,
    pub added_loss_nlos_db: f64,
    /// Additional UAV to UAV LoS attenuation (dB).
    pub a2a_attenuation_db: f64,
    pub uav_tx_antenna_gain_db: f64,
    /// Exponent of the free-space term in the backhaul received power.
    /// 2 is the Friis law; 1 reproduces the unsquared printed form.
    #[serde(default = "default_friis_exponent")]
    pub friis_exponent: u8,
}

fn default_friis_exponent() -> u8 {
    2
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            a2g_bandwidth_per_uav: 3.0e6,
            a2a_bandwidth: 1.7e6,
            mmwave_bandwidth: 1.8e6,
            carrier_a2g: 2.0e9,
            carrier_mm: 28.0e9,
            noise_power: dbm_to_watts(-174.0),
            pathloss_exponent: 2.0,
            env_c: 9.61,
            env_d: 0.16,
            added_loss_los_db: 1.0,
            added_loss_nlos_db: 20.0,
            a2a_attenuation_db: 1.0,
            uav_tx_antenna_gain_db: 0.0,
            friis_exponent: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub users: Vec<UserNode>,
    pub uavs: Vec<UavNode>,
    pub bs: BaseStation,
    pub radio: RadioParams,
    pub seed: u64,
    /// Side of the square deployment region (m), when declared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_side_m: Option<f64>,
}

/// Closed interval used for uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Parameter ranges and constants for the random generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub input_size_mb: Range,
    pub cycles_per_bit: Range,
    pub deadline_s: Range,
    pub user_cpu_hz: Range,
    pub uav_cpu_hz: Range,
    pub bs_cpu_hz: Range,
    pub user_tx_power_dbm: f64,
    pub uav_tx_power_dbm: f64,
    pub backhaul_tx_power_dbm: f64,
    pub user_energy_budget_j: f64,
    pub uav_energy_budget_j: f64,
    pub chip_constant: f64,
    pub altitude_m: f64,
    pub bs_rx_gain_db: f64,
    pub hover: HoverParams,
    pub radio: RadioParams,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            input_size_mb: Range::new(100.0, 500.0),
            cycles_per_bit: Range::new(10.0, 50.0),
            deadline_s: Range::new(30.0, 120.0),
            user_cpu_hz: Range::new(0.5e9, 3.0e9),
            uav_cpu_hz: Range::new(1.0e9, 3.5e9),
            bs_cpu_hz: Range::new(2.0e9, 4.0e9),
            user_tx_power_dbm: 23.0,
            uav_tx_power_dbm: 30.0,
            backhaul_tx_power_dbm: 30.0,
            user_energy_budget_j: 100.0e3,
            uav_energy_budget_j: 500.0e3,
            chip_constant: 5.0e-27,
            altitude_m: 50.0,
            bs_rx_gain_db: -50.0,
            hover: HoverParams::default(),
            radio: RadioParams::default(),
        }
    }
}

/// Distance from a ground user to a UAV.
pub fn user_uav_distance(user: &Point2, uav: &UavNode) -> f64 {
    let dx = uav.position.x - user.x;
    let dy = uav.position.y - user.y;
    (dx * dx + dy * dy + uav.altitude * uav.altitude).sqrt()
}

/// Index of the nearest UAV by 3-D distance; ties go to the lowest id.
pub fn nearest_uav(user: &Point2, uavs: &[UavNode]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, uav) in uavs.iter().enumerate() {
        let d = user_uav_distance(user, uav);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

impl NetworkScenario {
    /// Random instance inside a `region_side_m` square. Deterministic in `seed`.
    pub fn generate_random(
        num_uavs: usize,
        num_users: usize,
        region_side_m: f64,
        seed: u64,
        params: &GeneratorParams,
    ) -> Result<Self> {
        if num_uavs == 0 {
            return Err(Error::Validation("num_uavs must be at least 1".into()));
        }
        if num_users == 0 {
            return Err(Error::Validation("num_users must be at least 1".into()));
        }
        if !(region_side_m.is_finite() && region_side_m > 0.0) {
            return Err(Error::Validation(format!(
                "region side must be positive, got {region_side_m}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let region = Range::new(0.0, region_side_m);

        let uavs: Vec<UavNode> = (0..num_uavs)
            .map(|id| UavNode {
                id,
                position: Point2 {
                    x: region.sample(&mut rng),
                    y: region.sample(&mut rng),
                },
                altitude: params.altitude_m,
                cpu_capacity: params.uav_cpu_hz.sample(&mut rng),
                tx_power_a2a: dbm_to_watts(params.uav_tx_power_dbm),
                tx_power_backhaul: dbm_to_watts(params.backhaul_tx_power_dbm),
                energy_budget: params.uav_energy_budget_j,
                chip_constant: params.chip_constant,
                hover: params.hover.clone(),
            })
            .collect();

        let users = (0..num_users)
            .map(|id| {
                let position = Point2 {
                    x: region.sample(&mut rng),
                    y: region.sample(&mut rng),
                };
                let task = TaskProfile {
                    input_size_bits: params.input_size_mb.sample(&mut rng) * BITS_PER_MB,
                    cycles_per_bit: params.cycles_per_bit.sample(&mut rng),
                    deadline: params.deadline_s.sample(&mut rng),
                };
                let local_cpu = params.user_cpu_hz.sample(&mut rng);
                UserNode {
                    id,
                    home_uav: nearest_uav(&position, &uavs),
                    position,
                    local_cpu,
                    tx_power: dbm_to_watts(params.user_tx_power_dbm),
                    energy_budget: params.user_energy_budget_j,
                    chip_constant: params.chip_constant,
                    task,
                }
            })
            .collect();

        let bs = BaseStation {
            position: Point3 {
                x: 0.0,
                y: 0.0,
                z: 0.0,
            },
            cpu_capacity: params.bs_cpu_hz.sample(&mut rng),
            rx_antenna_gain_db: params.bs_rx_gain_db,
            chip_constant: params.chip_constant,
        };

        let scenario = Self {
            users,
            uavs,
            bs,
            radio: params.radio.clone(),
            seed,
            region_side_m: Some(region_side_m),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// Users associated with `uav`, ascending id.
    pub fn users_of(&self, uav: usize) -> Vec<usize> {
        self.users
            .iter()
            .filter(|u| u.home_uav == uav)
            .map(|u| u.id)
            .collect()
    }

    /// Per-UAV user sets, indexed by UAV id.
    pub fn association(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.uavs.len()];
        for u in &self.users {
            sets[u.home_uav].push(u.id);
        }
        sets
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.uavs.is_empty() {
            return bad("scenario has no UAVs".into());
        }
        if self.users.is_empty() {
            return bad("scenario has no users".into());
        }
        for (i, v) in self.uavs.iter().enumerate() {
            if v.id != i {
                return bad(format!("uav at index {i} has id {}; ids must be 0..n", v.id));
            }
            if !(v.altitude > 0.0) {
                return bad(format!("uav {i}: altitude must be positive"));
            }
            if !(v.cpu_capacity > 0.0) {
                return bad(format!("uav {i}: cpu_capacity must be positive"));
            }
            if !(v.energy_budget > 0.0) {
                return bad(format!("uav {i}: energy_budget must be positive"));
            }
            if !(v.tx_power_a2a >= 0.0 && v.tx_power_backhaul >= 0.0) {
                return bad(format!("uav {i}: transmit powers must be non-negative"));
            }
            if !(v.chip_constant >= 0.0) {
                return bad(format!("uav {i}: chip_constant must be non-negative"));
            }
            let h = &v.hover;
            if !(h.thrust > 0.0
                && h.rotor_count > 0
                && h.rotor_diameter > 0.0
                && h.air_density > 0.0
                && h.power_efficiency > 0.0
                && h.power_efficiency <= 1.0)
            {
                return bad(format!("uav {i}: hover parameters out of range"));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id != i {
                return bad(format!("user at index {i} has id {}; ids must be 0..n", u.id));
            }
            if u.home_uav >= self.uavs.len() {
                return bad(format!(
                    "user {}: home_uav {} does not exist",
                    u.id, u.home_uav
                ));
            }
            let t = &u.task;
            if !(t.input_size_bits > 0.0 && t.cycles_per_bit > 0.0 && t.deadline > 0.0) {
                return bad(format!("user {}: task profile entries must be positive", u.id));
            }
            if !(u.local_cpu > 0.0 && u.tx_power > 0.0 && u.energy_budget > 0.0) {
                return bad(format!(
                    "user {}: local_cpu, tx_power and energy_budget must be positive",
                    u.id
                ));
            }
            if !(u.chip_constant >= 0.0) {
                return bad(format!("user {}: chip_constant must be non-negative", u.id));
            }
        }
        if !(self.bs.cpu_capacity > 0.0) {
            return bad("bs: cpu_capacity must be positive".into());
        }
        let r = &self.radio;
        if !(r.a2g_bandwidth_per_uav > 0.0 && r.a2a_bandwidth > 0.0 && r.mmwave_bandwidth > 0.0) {
            return bad("radio: bandwidths must be positive".into());
        }
        if !(r.carrier_a2g > 0.0 && r.carrier_mm > 0.0) {
            return bad("radio: carriers must be positive".into());
        }
        if !(r.noise_power > 0.0) {
            return bad("radio: noise_power must be positive".into());
        }
        if !(r.pathloss_exponent >= 2.0) {
            return bad("radio: pathloss_exponent must be at least 2".into());
        }
        if !(r.friis_exponent == 1 || r.friis_exponent == 2) {
            return bad("radio: friis_exponent must be 1 or 2".into());
        }
        if let Some(side) = self.region_side_m {
            if !(side > 0.0) {
                return bad("region_side_m must be positive".into());
            }
            let inside = |p: &Point2| (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y);
            for v in &self.uavs {
                if !inside(&v.position) {
                    return bad(format!("uav {} lies outside the region", v.id));
                }
            }
            for u in &self.users {
                if !inside(&u.position) {
                    return bad(format!("user {} lies outside the region", u.id));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
