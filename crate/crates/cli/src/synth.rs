//! Deterministic synthetic households and randomized stress scenarios.

use std::f64::consts::PI;

use hems_core::model::{
    BatteryParams, HouseholdScenario, Horizon, NonDynLoadParams, RegularizationParams, TclParams,
    Tariff,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::profiles::{ProfileRow, ProfileTable};

pub const OFF_PEAK: f64 = 0.15;
pub const SHOULDER: f64 = 0.25;
pub const PEAK: f64 = 0.50;
pub const FEED_IN: f64 = 0.08;

/// Hour of day at the middle of step `k` of a `steps`-step day.
pub fn hour_of(k: usize, steps: usize) -> f64 {
    24.0 * (k as f64 + 0.5) / steps as f64
}

/// Three-level time-of-use purchase price.
pub fn tou_price(hour: f64) -> f64 {
    match hour {
        h if (17.0..21.0).contains(&h) => PEAK,
        h if (7.0..17.0).contains(&h) || (21.0..22.0).contains(&h) => SHOULDER,
        _ => OFF_PEAK,
    }
}

/// Outdoor temperature: a daily sinusoid between 22 and 35 °C, warmest at 15:00.
pub fn outdoor_temperature(hour: f64) -> f64 {
    28.5 + 6.5 * (2.0 * PI * (hour - 9.0) / 24.0).sin()
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    (-(hour - centre).powi(2) / (2.0 * width * width)).exp()
}

/// One synthetic house. Each house draws from its own stream of the seeded
/// generator, so the output does not depend on generation order.
pub fn synth_house(seed: u64, house: usize, steps: usize) -> ProfileTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(house as u64);

    let base = rng.gen_range(0.25..0.5);
    let morning = rng.gen_range(0.5..1.5);
    let evening = rng.gen_range(1.0..2.2);
    let solar_peak = rng.gen_range(1.5..4.0);
    let rows = (0..steps)
        .map(|k| {
            let h = hour_of(k, steps);
            let noise = rng.gen_range(0.9..1.1);
            let d = (base + morning * bump(h, 7.5, 1.5) + evening * bump(h, 19.0, 2.0)) * noise;
            let cloud = rng.gen_range(0.8..=1.0);
            let sun = if h > 6.0 && h < 18.0 {
                (PI * (h - 6.0) / 12.0).sin().powf(1.5)
            } else {
                0.0
            };
            let theta = outdoor_temperature(h) + rng.gen_range(-0.5..0.5);
            ProfileRow {
                k,
                d_kw: round4(d.clamp(0.2, 3.0)),
                r_kw: round4((solar_peak * sun * cloud).clamp(0.0, 4.0)),
                p_buy: tou_price(h),
                p_sell: FEED_IN,
                theta_ex_c: round4(theta.clamp(22.0, 35.0)),
            }
        })
        .collect();
    ProfileTable {
        house_id: format!("house_{house:03}"),
        rows,
    }
}

pub fn synth_houses(seed: u64, houses: usize, steps: usize) -> Vec<ProfileTable> {
    (0..houses).map(|h| synth_house(seed, h, steps)).collect()
}

/// Ranges for [`random_scenario`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressSpec {
    pub min_steps: usize,
    pub max_steps: usize,
    /// Range of `eta_ch * eta_dch`.
    pub round_trip: (f64, f64),
    /// Upper end of every regularization coefficient.
    pub reg_max: f64,
    pub with_tcl: bool,
    pub with_nd_load: bool,
}

impl Default for StressSpec {
    fn default() -> Self {
        Self {
            min_steps: 4,
            max_steps: 24,
            round_trip: (0.5, 0.99),
            reg_max: 0.1,
            with_tcl: true,
            with_nd_load: true,
        }
    }
}

/// A random feasible scenario: idling the battery and the deferrable load at
/// a constant rate is always admissible, and the air conditioner can hold the
/// comfort band against the hottest outdoor temperature drawn.
pub fn random_scenario(rng: &mut impl Rng, spec: &StressSpec) -> HouseholdScenario<f64> {
    let steps = rng.gen_range(spec.min_steps..=spec.max_steps);
    let dt = if rng.gen_bool(0.8) { 1.0 } else { 0.5 };

    let buy: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.05..0.6)).collect();
    let sell = buy.iter().map(|p| p.min(rng.gen_range(0.02..0.2))).collect();
    let demand = (0..steps).map(|_| rng.gen_range(0.0..3.0)).collect();
    let renewable = (0..steps)
        .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.0..4.0) })
        .collect();

    let (lo, hi) = spec.round_trip;
    let rho = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let eta_ch = if rho < 1.0 { rng.gen_range(rho..=1.0) } else { 1.0 };
    let x_min = rng.gen_range(0.0..0.2);
    let x_max = rng.gen_range(0.8..=1.0);
    let battery = BatteryParams {
        u_ch_max: rng.gen_range(1.0..5.0),
        u_dch_max: rng.gen_range(1.0..5.0),
        eta_ch,
        eta_dch: rho / eta_ch,
        u_sd: if rng.gen_bool(0.3) { rng.gen_range(0.0..0.05) } else { 0.0 },
        capacity: rng.gen_range(5.0..15.0),
        x0: rng.gen_range(x_min..=x_max),
        x_min,
        x_max,
    };

    let tcl = (spec.with_tcl && rng.gen_bool(0.5)).then(|| {
        let theta_set = rng.gen_range(22.0..25.0);
        let dead_band = rng.gen_range(1.0..3.0);
        let resistance = rng.gen_range(1.5..3.0);
        let cop = rng.gen_range(2.5..4.0);
        let theta_max = theta_set + dead_band;
        let needed = (35.0 - (theta_set - dead_band)) / (resistance * cop);
        TclParams {
            capacitance: rng.gen_range(5.0..15.0),
            resistance,
            cop,
            theta_set,
            dead_band,
            theta0: theta_set,
            u_tcl_max: 1.5 * needed + 0.5,
            theta_ex: (0..steps)
                .map(|_| rng.gen_range(theta_max + 0.5..35.0))
                .collect(),
        }
    });

    let nd_load = (spec.with_nd_load && rng.gen_bool(0.5)).then(|| {
        let u_max = rng.gen_range(0.5..2.0);
        NonDynLoadParams {
            u_min: 0.0,
            u_max,
            total: rng.gen_range(0.2..0.8) * steps as f64 * u_max,
        }
    });

    let mut coef = || rng.gen_range(0.0..=spec.reg_max);
    let reg = RegularizationParams {
        alpha_ch: coef(),
        beta_ch: coef(),
        alpha_dch: coef(),
        beta_dch: coef(),
        alpha_nd: coef(),
        beta_nd: coef(),
        alpha_tcl: coef(),
        beta_tcl: coef(),
    };

    HouseholdScenario {
        horizon: Horizon { steps, dt },
        tariff: Tariff { buy, sell },
        battery: Some(battery),
        tcl,
        nd_load,
        reg,
        demand,
        renewable,
    }
}
