//! TOML scenario parameters. Time series come from a profile table.

use std::fs;
use std::path::Path;

use hems_core::model::{
    BatteryParams, HouseholdScenario, Horizon, NonDynLoadParams, RegularizationParams, TclParams,
    Tariff,
};
use serde::{Deserialize, Serialize};

use crate::error::InputError;
use crate::profiles::ProfileTable;

fn default_currency() -> String {
    "currency".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    /// Step length in hours.
    pub dt: f64,
}

/// Thermostatic load parameters; the outdoor temperature series comes from the profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TclConfig {
    pub capacitance: f64,
    pub resistance: f64,
    pub cop: f64,
    pub theta_set: f64,
    pub dead_band: f64,
    pub theta0: f64,
    pub u_tcl_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Unit of the tariff columns; echoed in reports.
    #[serde(default = "default_currency")]
    pub currency: String,
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub battery: Option<BatteryParams<f64>>,
    #[serde(default)]
    pub tcl: Option<TclConfig>,
    #[serde(default)]
    pub nd_load: Option<NonDynLoadParams<f64>>,
    #[serde(default)]
    pub reg: RegularizationParams<f64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, InputError> {
        toml::from_str(text).map_err(|e| InputError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Combines these parameters with one house's time series. The result is not validated.
    pub fn scenario(&self, table: &ProfileTable) -> HouseholdScenario<f64> {
        let steps = table.steps();
        HouseholdScenario {
            horizon: Horizon {
                steps,
                dt: self.horizon.dt,
            },
            tariff: Tariff {
                buy: table.buy(),
                sell: table.sell(),
            },
            battery: self.battery.clone(),
            tcl: self.tcl.as_ref().map(|t| TclParams {
                capacitance: t.capacitance,
                resistance: t.resistance,
                cop: t.cop,
                theta_set: t.theta_set,
                dead_band: t.dead_band,
                theta0: t.theta0,
                u_tcl_max: t.u_tcl_max,
                theta_ex: table.theta_ex(),
            }),
            nd_load: self.nd_load.clone(),
            reg: self.reg.clone(),
            demand: table.demand(),
            renewable: table.renewable(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ProfileRow;
    use hems_core::model::validate_scenario;

    const BATTERY: &str = include_str!("../configs/battery_only.toml");
    const FULL: &str = include_str!("../configs/full_house.toml");

    fn table(k: usize) -> ProfileTable {
        ProfileTable {
            house_id: "t".into(),
            rows: (0..k)
                .map(|k| ProfileRow {
                    k,
                    d_kw: 1.0,
                    r_kw: 0.5,
                    p_buy: 0.25,
                    p_sell: 0.08,
                    theta_ex_c: 30.0,
                })
                .collect(),
        }
    }

    #[test]
    fn shipped_configs_parse_and_validate() {
        for text in [BATTERY, FULL] {
            let cfg = ScenarioConfig::parse(text, Path::new("cfg.toml")).unwrap();
            let s = cfg.scenario(&table(24));
            assert!(validate_scenario(&s).passed(), "{}", validate_scenario(&s));
            assert_eq!(cfg.currency, "AUD");
        }
        let cfg = ScenarioConfig::parse(BATTERY, Path::new("p.toml")).unwrap();
        let b = cfg.battery.unwrap();
        assert_eq!((b.eta_ch, b.eta_dch, b.x_min, b.x_max), (0.9, 0.9, 0.1, 0.9));
        assert!(cfg.tcl.is_none() && cfg.nd_load.is_none());
        assert_eq!(cfg.reg, RegularizationParams::zero());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ScenarioConfig::parse("[horizon]\ndt = 1.0\nsteps = 3\n", Path::new("c.toml"))
            .unwrap_err();
        assert!(err.to_string().contains("steps"), "{err}");
    }
}
