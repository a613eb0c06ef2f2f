//! Link models: air-to-ground (user to UAV), air-to-air (UAV to UAV) and
//! the mmWave backhaul (UAV to BS).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BaseStation, NetworkScenario, Point2, RadioParams, UavNode, UserNode};
use crate::units::{db_to_linear, SPEED_OF_LIGHT};

/// 3-D distance between a ground user and a UAV.
pub fn a2g_distance(user: &UserNode, uav: &UavNode) -> f64 {
    crate::scenario::user_uav_distance(&user.position, uav)
}

fn horizontal_distance(a: &Point2, b: &Point2) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Elevation angle (degrees) of a UAV at `altitude` seen from `d_horiz` away.
pub fn elevation_deg(altitude: f64, d_horiz: f64) -> f64 {
    // atan2 gives 90 degrees at d_horiz = 0 without a special case.
    altitude.atan2(d_horiz).to_degrees()
}

/// LoS probability from the elevation angle and the environment constants.
pub fn los_probability_at(elevation_deg: f64, env_c: f64, env_d: f64) -> f64 {
    1.0 / (1.0 + env_c * (-env_d * (elevation_deg - env_c)).exp())
}

pub fn los_probability(user: &UserNode, uav: &UavNode, radio: &RadioParams) -> f64 {
    let d_h = horizontal_distance(&user.position, &uav.position);
    los_probability_at(elevation_deg(uav.altitude, d_h), radio.env_c, radio.env_d)
}

/// Free-space part of the branch loss, `2n log10(4 pi d f / c)` in dB.
fn a2g_branch_base_db(d: f64, radio: &RadioParams) -> f64 {
    2.0 * radio.pathloss_exponent
        * (4.0 * std::f64::consts::PI * d * radio.carrier_a2g / SPEED_OF_LIGHT).log10()
}

/// Mean path loss (dB) at distance `d` with LoS probability `p_los`.
pub fn a2g_pathloss_at(d: f64, p_los: f64, radio: &RadioParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("air-to-ground distance must be positive, got {d}")));
    }
    let base = a2g_branch_base_db(d, radio);
    let los = base + radio.added_loss_los_db;
    let nlos = base + radio.added_loss_nlos_db;
    Ok(p_los * los + (1.0 - p_los) * nlos)
}

pub fn a2g_pathloss(user: &UserNode, uav: &UavNode, radio: &RadioParams) -> Result<f64> {
    a2g_pathloss_at(a2g_distance(user, uav), los_probability(user, uav, radio), radio)
}

/// Uplink rate for a bandwidth share `beta` of `bandwidth` at spectral efficiency `gamma`.
pub fn uplink_rate(beta: f64, bandwidth: f64, gamma: f64) -> f64 {
    beta * bandwidth * gamma
}

pub fn a2a_distance(v: &UavNode, w: &UavNode) -> f64 {
    let dh = horizontal_distance(&v.position, &w.position);
    (dh * dh + (v.altitude - w.altitude).powi(2)).sqrt()
}

/// UAV to UAV loss (dB) at distance `d`, attenuation included.
pub fn a2a_pathloss_at(d: f64, radio: &RadioParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("UAV to UAV distance must be positive, got {d}")));
    }
    let k = 2.0 * std::f64::consts::PI / SPEED_OF_LIGHT;
    Ok(20.0 * d.log10()
        + 20.0 * radio.carrier_a2g.log10()
        + 10.0 * (k * k).log10()
        + radio.a2a_attenuation_db)
}

pub fn a2a_rate_at(d: f64, tx_power: f64, radio: &RadioParams) -> Result<f64> {
    let gain = db_to_linear(-a2a_pathloss_at(d, radio)?);
    Ok(radio.a2a_bandwidth * (1.0 + tx_power * gain / radio.noise_power).log2())
}

pub fn a2a_rate(v: &UavNode, w: &UavNode, radio: &RadioParams) -> Result<f64> {
    a2a_rate_at(a2a_distance(v, w), v.tx_power_a2a, radio)
}

/// UAV to BS distance; only the UAV altitude enters the vertical term.
pub fn backhaul_distance(uav: &UavNode, bs: &BaseStation) -> f64 {
    let dx = uav.position.x - bs.position.x;
    let dy = uav.position.y - bs.position.y;
    (dx * dx + dy * dy + uav.altitude * uav.altitude).sqrt()
}

/// Received backhaul power at the BS.
pub fn backhaul_rx_power_at(d: f64, tx_power: f64, rx_gain_db: f64, radio: &RadioParams) -> f64 {
    let free_space = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d * radio.carrier_mm);
    tx_power
        * db_to_linear(radio.uav_tx_antenna_gain_db)
        * db_to_linear(rx_gain_db)
        * free_space.powi(radio.friis_exponent as i32)
}

pub fn backhaul_rate_from_power(rx_power: f64, radio: &RadioParams) -> f64 {
    let b = radio.mmwave_bandwidth;
    b * (1.0 + rx_power / (b * radio.noise_power)).log2()
}

pub fn backhaul_rate(uav: &UavNode, bs: &BaseStation, radio: &RadioParams) -> Result<f64> {
    let d = backhaul_distance(uav, bs);
    if !(d > 0.0) {
        return Err(Error::Domain(format!("uav {} sits on the BS", uav.id)));
    }
    let p = backhaul_rx_power_at(d, uav.tx_power_backhaul, bs.rx_antenna_gain_db, radio);
    Ok(backhaul_rate_from_power(p, radio))
}

/// Every link quantity of a scenario, computed once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// `[user][uav]` distance (m).
    pub a2g_distance: Vec<Vec<f64>>,
    /// `[user][uav]` LoS probability.
    pub los_probability: Vec<Vec<f64>>,
    /// `[user][uav]` linear channel gain.
    pub a2g_gain: Vec<Vec<f64>>,
    /// `[user][uav]` spectral efficiency (bits/s/Hz).
    pub spectral_efficiency: Vec<Vec<f64>>,
    /// `[v][w]` distance (m); zero on the diagonal.
    pub a2a_distance: Vec<Vec<f64>>,
    /// `[v][w]` linear gain; zero on the diagonal.
    pub a2a_gain: Vec<Vec<f64>>,
    /// `[v][w]` rate (bits/s); zero on the diagonal.
    pub a2a_rate: Vec<Vec<f64>>,
    /// Per UAV backhaul rate (bits/s).
    pub backhaul_rate: Vec<f64>,
    /// Per UAV received power at the BS (W).
    pub backhaul_rx_power: Vec<f64>,
}

impl ChannelState {
    pub fn compute(s: &NetworkScenario) -> Result<Self> {
        let r = &s.radio;
        let nv = s.uavs.len();
        let mut dist = Vec::with_capacity(s.users.len());
        let mut los = Vec::with_capacity(s.users.len());
        let mut gain = Vec::with_capacity(s.users.len());
        let mut gamma = Vec::with_capacity(s.users.len());
        for u in &s.users {
            let mut d_row = Vec::with_capacity(nv);
            let mut p_row = Vec::with_capacity(nv);
            let mut g_row = Vec::with_capacity(nv);
            let mut s_row = Vec::with_capacity(nv);
            for v in &s.uavs {
                let d = a2g_distance(u, v);
                let p = los_probability(u, v, r);
                let g = db_to_linear(-a2g_pathloss_at(d, p, r)?);
                d_row.push(d);
                p_row.push(p);
                g_row.push(g);
                s_row.push((1.0 + u.tx_power * g / r.noise_power).log2());
            }
            dist.push(d_row);
            los.push(p_row);
            gain.push(g_row);
            gamma.push(s_row);
        }

        let mut a2a_d = vec![vec![0.0; nv]; nv];
        let mut a2a_g = vec![vec![0.0; nv]; nv];
        let mut a2a_r = vec![vec![0.0; nv]; nv];
        for (i, v) in s.uavs.iter().enumerate() {
            for (j, w) in s.uavs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = a2a_distance(v, w);
                if !(d > 0.0) {
                    return Err(Error::Domain(format!("uavs {i} and {j} are co-located")));
                }
                a2a_d[i][j] = d;
                a2a_g[i][j] = db_to_linear(-a2a_pathloss_at(d, r)?);
                a2a_r[i][j] = a2a_rate_at(d, v.tx_power_a2a, r)?;
            }
        }

        let mut bh_rate = Vec::with_capacity(nv);
        let mut bh_power = Vec::with_capacity(nv);
        for v in &s.uavs {
            let d = backhaul_distance(v, &s.bs);
            let p = backhaul_rx_power_at(d, v.tx_power_backhaul, s.bs.rx_antenna_gain_db, r);
            bh_power.push(p);
            bh_rate.push(backhaul_rate(v, &s.bs, r)?);
        }

        Ok(Self {
            a2g_distance: dist,
            los_probability: los,
            a2g_gain: gain,
            spectral_efficiency: gamma,
            a2a_distance: a2a_d,
            a2a_gain: a2a_g,
            a2a_rate: a2a_r,
            backhaul_rate: bh_rate,
            backhaul_rx_power: bh_power,
        })
    }

    /// Spectral efficiency of a user towards its home UAV.
    pub fn home_gamma(&self, s: &NetworkScenario, user: usize) -> f64 {
        self.spectral_efficiency[user][s.users[user].home_uav]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{GeneratorParams, HoverParams, TaskProfile};
    use crate::units::dbm_to_watts;
    use proptest::prelude::*;

    fn user_at(x: f64, y: f64) -> UserNode {
        UserNode {
            id: 0,
            position: Point2 { x, y },
            local_cpu: 1e9,
            tx_power: dbm_to_watts(23.0),
            energy_budget: 1e5,
            chip_constant: 5e-27,
            task: TaskProfile {
                input_size_bits: 8e8,
                cycles_per_bit: 10.0,
                deadline: 60.0,
            },
            home_uav: 0,
        }
    }

    fn uav_at(id: usize, x: f64, y: f64, h: f64) -> UavNode {
        UavNode {
            id,
            position: Point2 { x, y },
            altitude: h,
            cpu_capacity: 2e9,
            tx_power_a2a: 1.0,
            tx_power_backhaul: 1.0,
            energy_budget: 5e5,
            chip_constant: 5e-27,
            hover: HoverParams::default(),
        }
    }

    const C: f64 = 299_792_458.0;

    #[test]
    fn a2g_distance_examples() {
        assert_eq!(a2g_distance(&user_at(5.0, 5.0), &uav_at(0, 5.0, 5.0, 50.0)), 50.0);
        assert!((a2g_distance(&user_at(0.0, 0.0), &uav_at(0, 30.0, 40.0, 0.0)) - 50.0).abs() < 1e-12);
        let hand = (90.0f64 * 90.0 + 180.0 * 180.0 + 50.0 * 50.0).sqrt();
        assert!((a2g_distance(&user_at(10.0, 20.0), &uav_at(0, 100.0, 200.0, 50.0)) - hand).abs() < 1e-12);
    }

    #[test]
    fn los_probability_overhead() {
        let r = RadioParams::default();
        let p = los_probability(&user_at(0.0, 0.0), &uav_at(0, 0.0, 0.0, 50.0), &r);
        let expected = 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp());
        assert!((p - expected).abs() < 1e-15);
        assert!(p > 0.99);
    }

    #[test]
    fn los_probability_non_increasing_with_horizontal_distance() {
        let r = RadioParams::default();
        let uav = uav_at(0, 0.0, 0.0, 50.0);
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let p = los_probability(&user_at(i as f64, 0.0), &uav, &r);
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn pathloss_collapses_when_added_losses_match() {
        let mut r = RadioParams::default();
        r.added_loss_los_db = 7.0;
        r.added_loss_nlos_db = 7.0;
        let d = 123.0;
        let direct = 4.0 * (4.0 * std::f64::consts::PI * d * 2e9 / C).log10() + 7.0;
        for p in [0.0, 0.3, 1.0] {
            assert!((a2g_pathloss_at(d, p, &r).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn pathloss_doubling_distance() {
        let r = RadioParams::default();
        let a = a2g_pathloss_at(80.0, 0.4, &r).unwrap();
        let b = a2g_pathloss_at(160.0, 0.4, &r).unwrap();
        assert!((b - a - 4.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn pathloss_full_value() {
        // Horizontal 80 m at 60 m altitude gives d = 100 m.
        let r = RadioParams::default();
        let user = user_at(0.0, 0.0);
        let uav = uav_at(0, 80.0, 0.0, 60.0);
        let elev = (60.0f64 / 80.0).atan() * 180.0 / std::f64::consts::PI;
        let pr = 1.0 / (1.0 + 9.61 * (-0.16 * (elev - 9.61)).exp());
        let fs = 2.0 * 2.0 * (4.0 * std::f64::consts::PI * 100.0 * 2.0e9 / C).log10();
        let expected = pr * (fs + 1.0) + (1.0 - pr) * (fs + 20.0);
        assert!((a2g_pathloss(&user, &uav, &r).unwrap() - expected).abs() < 1e-9);
        assert!(a2g_pathloss_at(0.0, 0.5, &r).is_err());
    }

    #[test]
    fn uplink_rate_examples() {
        assert_eq!(uplink_rate(0.0, 3e6, 2.0), 0.0);
        assert_eq!(uplink_rate(1.0, 3e6, 2.0), 6e6);
        let s = NetworkScenario::generate_random(2, 4, 400.0, 5, &GeneratorParams::default()).unwrap();
        let ch = ChannelState::compute(&s).unwrap();
        let g = ch.home_gamma(&s, 1);
        assert_eq!(uplink_rate(0.25, 3e6, g), 0.25 * 3e6 * g);
    }

    #[test]
    fn spectral_efficiency_is_exact_log() {
        let s = NetworkScenario::generate_random(3, 6, 400.0, 2, &GeneratorParams::default()).unwrap();
        let ch = ChannelState::compute(&s).unwrap();
        for (u, row) in ch.spectral_efficiency.iter().enumerate() {
            for (v, &g) in row.iter().enumerate() {
                let exact = (1.0 + s.users[u].tx_power * ch.a2g_gain[u][v] / s.radio.noise_power).log2();
                assert_eq!(g, exact);
            }
        }
    }

    #[test]
    fn a2a_rate_symmetric_and_decreasing() {
        let r = RadioParams::default();
        let a = uav_at(0, 10.0, 10.0, 50.0);
        let b = uav_at(1, 110.0, 10.0, 50.0);
        assert_eq!(a2a_rate(&a, &b, &r).unwrap(), a2a_rate(&b, &a, &r).unwrap());
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let rate = a2a_rate_at(i as f64 * 5.0, 1.0, &r).unwrap();
            assert!(rate < prev);
            prev = rate;
        }
        assert!(a2a_rate(&a, &a.clone(), &r).is_err());
    }

    #[test]
    fn a2a_rate_full_value() {
        let r = RadioParams::default();
        let theta = 20.0 * 100f64.log10()
            + 20.0 * 2e9f64.log10()
            + 10.0 * ((2.0 * std::f64::consts::PI / C).powi(2)).log10();
        let g = 10f64.powf(-(theta + 1.0) / 10.0);
        let p = 10f64.powf((30.0 - 30.0) / 10.0);
        let sigma2 = 10f64.powf((-174.0 - 30.0) / 10.0);
        let expected = 1.7e6 * (1.0 + p * g / sigma2).log2();
        let got = a2a_rate_at(100.0, dbm_to_watts(30.0), &r).unwrap();
        assert!((got - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn backhaul_zero_power_and_friis_ratio() {
        let mut r = RadioParams::default();
        assert_eq!(backhaul_rate_from_power(backhaul_rx_power_at(120.0, 0.0, -50.0, &r), &r), 0.0);
        for e in [1u8, 2] {
            r.friis_exponent = e;
            let far = backhaul_rx_power_at(200.0, 1.0, -50.0, &r);
            let near = backhaul_rx_power_at(100.0, 1.0, -50.0, &r);
            assert!((near / far - 2f64.powi(e as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn backhaul_full_value() {
        let r = RadioParams::default();
        let bs = BaseStation {
            position: crate::scenario::Point3 { x: 0.0, y: 0.0, z: 0.0 },
            cpu_capacity: 3e9,
            rx_antenna_gain_db: -50.0,
            chip_constant: 5e-27,
        };
        let uav = uav_at(0, 120.0, 90.0, 50.0);
        let d = (120.0f64 * 120.0 + 90.0 * 90.0 + 2500.0).sqrt();
        let p_bar = 1.0 * 1.0 * 1e-5 * (C / (4.0 * std::f64::consts::PI * d * 28e9)).powi(2);
        let noise = 1.8e6 * 10f64.powf(-20.4);
        let expected = 1.8e6 * (1.0 + p_bar / noise).log2();
        let got = backhaul_rate(&uav, &bs, &r).unwrap();
        assert!((got - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn channel_state_is_pure() {
        let s = NetworkScenario::generate_random(4, 12, 400.0, 9, &GeneratorParams::default()).unwrap();
        assert_eq!(ChannelState::compute(&s).unwrap(), ChannelState::compute(&s).unwrap());
    }

    proptest! {
        #[test]
        fn los_probability_normalized(h in 1.0f64..500.0, d in 0.0f64..2000.0) {
            let r = RadioParams::default();
            let p = los_probability_at(elevation_deg(h, d), r.env_c, r.env_d);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p + (1.0 - p) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn rates_non_negative(beta in 0.0f64..=1.0, d in 1.0f64..2000.0, p in 0.0f64..10.0) {
            let r = RadioParams::default();
            prop_assert!(uplink_rate(beta, r.a2g_bandwidth_per_uav, 50.0) >= 0.0);
            let a = a2a_rate_at(d, p, &r).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a == 0.0, p == 0.0);
            prop_assert!(backhaul_rate_from_power(backhaul_rx_power_at(d, p, -50.0, &r), &r) >= 0.0);
        }
    }
}
