//! Fixtures shared by the unit tests.

use proptest::prelude::*;

use crate::model::{
    BatteryParams, HouseholdScenario, Horizon, NonDynLoadParams, RegularizationParams,
    TclParams, Tariff,
};

pub fn battery() -> BatteryParams<f64> {
    BatteryParams {
        u_ch_max: 3.0,
        u_dch_max: 3.0,
        eta_ch: 0.9,
        eta_dch: 0.9,
        u_sd: 0.0,
        capacity: 10.0,
        x0: 0.5,
        x_min: 0.1,
        x_max: 0.9,
    }
}

pub fn tcl(k: usize) -> TclParams<f64> {
    TclParams {
        capacitance: 10.0,
        resistance: 2.0,
        cop: 3.0,
        theta_set: 24.0,
        dead_band: 2.0,
        theta0: 24.0,
        u_tcl_max: 2.0,
        theta_ex: (0..k).map(|i| 28.0 + (i % 5) as f64).collect(),
    }
}

pub fn battery_only(p: Vec<f64>, s: Vec<f64>, d: Vec<f64>, r: Vec<f64>) -> HouseholdScenario<f64> {
    let k = p.len();
    HouseholdScenario {
        horizon: Horizon { steps: k, dt: 1.0 },
        tariff: Tariff { buy: p, sell: s },
        battery: Some(battery()),
        tcl: None,
        nd_load: None,
        reg: RegularizationParams::zero(),
        demand: d,
        renewable: r,
    }
}

/// Every component present, mild regularization.
pub fn full(k: usize) -> HouseholdScenario<f64> {
    let p: Vec<f64> = (0..k).map(|i| if (8..20).contains(&(i % 24)) { 0.5 } else { 0.15 }).collect();
    let s = vec![0.08; k];
    let d = (0..k).map(|i| 0.5 + 0.3 * ((i % 7) as f64)).collect();
    let r = (0..k).map(|i| if (9..16).contains(&(i % 24)) { 2.0 } else { 0.0 }).collect();
    let mut sc = battery_only(p, s, d, r);
    sc.tcl = Some(tcl(k));
    sc.nd_load = Some(NonDynLoadParams {
        u_min: 0.0,
        u_max: 1.0,
        total: 0.4 * k as f64,
    });
    sc.reg = RegularizationParams {
        alpha_ch: 0.01,
        beta_ch: 0.001,
        alpha_dch: 0.01,
        beta_dch: 0.001,
        alpha_nd: 0.01,
        beta_nd: 0.0,
        alpha_tcl: 0.005,
        beta_tcl: 0.0,
    };
    sc
}

/// Random well-formed scenarios with a battery, optional TCL and deferrable load.
pub fn arb_scenario(min_k: usize, max_k: usize) -> impl Strategy<Value = HouseholdScenario<f64>> {
    (min_k..=max_k).prop_flat_map(|k| {
        (
            proptest::collection::vec((0.05f64..0.6, 0.1f64..1.0, 0.0f64..3.0, 0.0f64..4.0), k),
            (0.7f64..1.0, 0.7f64..1.0, 0.5f64..4.0, 0.5f64..4.0, 0.1f64..0.9),
            (any::<bool>(), any::<bool>(), 0.0f64..0.05, 0.0f64..0.02),
        )
            .prop_map(move |(steps, (ec, ed, uc, ud, x0), (with_tcl, with_nd, alpha, beta))| {
                let p: Vec<f64> = steps.iter().map(|t| t.0).collect();
                let s: Vec<f64> = steps.iter().map(|t| t.0 * t.1).collect();
                let d = steps.iter().map(|t| t.2).collect();
                let r = steps.iter().map(|t| t.3).collect();
                let mut sc = battery_only(p, s, d, r);
                let b = sc.battery.as_mut().unwrap();
                b.eta_ch = ec;
                b.eta_dch = ed;
                b.u_ch_max = uc;
                b.u_dch_max = ud;
                b.x0 = x0.clamp(b.x_min, b.x_max);
                if with_tcl {
                    sc.tcl = Some(tcl(k));
                }
                if with_nd {
                    sc.nd_load = Some(NonDynLoadParams {
                        u_min: 0.0,
                        u_max: 1.5,
                        total: 0.5 * k as f64,
                    });
                }
                sc.reg.alpha_ch = alpha;
                sc.reg.alpha_dch = alpha;
                sc.reg.beta_ch = beta;
                sc.reg.beta_dch = beta;
                sc
            })
    })
}
