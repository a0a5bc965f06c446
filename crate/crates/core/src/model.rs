//! Household domain types: horizon, tariff, battery, thermostatic load,
//! deferrable load and regularization weights, plus the two state updates.
//!
//! Units are fixed: kW, kWh, hours, °C and currency/kWh.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon<T> {
    /// Number of steps K.
    pub steps: usize,
    /// Step length in hours.
    pub dt: T,
}

/// Time-of-use buy and sell prices, one entry per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff<T> {
    pub buy: Vec<T>,
    pub sell: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams<T> {
    /// Maximum charging power, kW.
    pub u_ch_max: T,
    /// Maximum discharging power, kW.
    pub u_dch_max: T,
    pub eta_ch: T,
    pub eta_dch: T,
    /// Self-discharge power, kW.
    pub u_sd: T,
    /// Energy capacity, kWh.
    pub capacity: T,
    pub x0: T,
    pub x_min: T,
    pub x_max: T,
}

impl<T: Scalar> BatteryParams<T> {
    /// Round-trip efficiency `eta_ch * eta_dch`.
    pub fn round_trip(&self) -> T {
        self.eta_ch * self.eta_dch
    }

    pub fn max_power(&self) -> T {
        self.u_ch_max.max(self.u_dch_max)
    }
}

/// First-order cooling-only thermal model of a thermostatic load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TclParams<T> {
    /// Thermal capacitance, kWh/°C.
    pub capacitance: T,
    /// Thermal resistance, °C/kW.
    pub resistance: T,
    pub cop: T,
    pub theta_set: T,
    pub dead_band: T,
    pub theta0: T,
    /// Rated electrical power, kW.
    pub u_tcl_max: T,
    /// External temperature per step, °C.
    pub theta_ex: Vec<T>,
}

impl<T: Scalar> TclParams<T> {
    pub fn a(&self) -> T {
        T::one() / (self.resistance * self.capacitance)
    }

    pub fn a_tilde(&self, dt: T) -> T {
        T::one() - self.a() * dt
    }

    pub fn b(&self) -> T {
        self.cop / self.capacitance
    }

    pub fn theta_min(&self) -> T {
        self.theta_set - self.dead_band
    }

    pub fn theta_max(&self) -> T {
        self.theta_set + self.dead_band
    }
}

/// Deferrable load with per-step bounds and a fixed horizon total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonDynLoadParams<T> {
    pub u_min: T,
    pub u_max: T,
    pub total: T,
}

/// Quadratic and linear weights on each control. All must be nonnegative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizationParams<T> {
    pub alpha_ch: T,
    pub beta_ch: T,
    pub alpha_dch: T,
    pub beta_dch: T,
    pub alpha_nd: T,
    pub beta_nd: T,
    pub alpha_tcl: T,
    pub beta_tcl: T,
}

impl<T: Scalar> RegularizationParams<T> {
    pub fn zero() -> Self {
        Self {
            alpha_ch: T::zero(),
            beta_ch: T::zero(),
            alpha_dch: T::zero(),
            beta_dch: T::zero(),
            alpha_nd: T::zero(),
            beta_nd: T::zero(),
            alpha_tcl: T::zero(),
            beta_tcl: T::zero(),
        }
    }

    fn named(&self) -> [(&'static str, T); 8] {
        [
            ("alpha_ch", self.alpha_ch),
            ("beta_ch", self.beta_ch),
            ("alpha_dch", self.alpha_dch),
            ("beta_dch", self.beta_dch),
            ("alpha_nd", self.alpha_nd),
            ("beta_nd", self.beta_nd),
            ("alpha_tcl", self.alpha_tcl),
            ("beta_tcl", self.beta_tcl),
        ]
    }
}

/// Everything needed to schedule one house over one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct HouseholdScenario<T> {
    pub horizon: Horizon<T>,
    pub tariff: Tariff<T>,
    pub battery: Option<BatteryParams<T>>,
    pub tcl: Option<TclParams<T>>,
    pub nd_load: Option<NonDynLoadParams<T>>,
    pub reg: RegularizationParams<T>,
    /// Critical load per step, kW.
    pub demand: Vec<T>,
    /// Renewable generation per step, kW.
    pub renewable: Vec<T>,
}

impl<T: Scalar> HouseholdScenario<T> {
    pub fn steps(&self) -> usize {
        self.horizon.steps
    }

    pub fn dt(&self) -> T {
        self.horizon.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Parameters outside their admissible range.
    Malformed,
    /// Parameters are well formed but the constraint set is provably empty.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub component: &'static str,
    pub message: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.component, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when every violation is a feasibility witness rather than a malformed parameter.
    pub fn only_infeasibility(&self) -> bool {
        !self.passed()
            && self
                .violations
                .iter()
                .all(|v| v.kind == ViolationKind::Infeasible)
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }

    fn push(&mut self, component: &'static str, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            component,
            message: message.into(),
            kind,
        });
    }

    fn malformed(&mut self, component: &'static str, message: impl Into<String>) {
        self.push(component, ViolationKind::Malformed, message);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Checks every standing assumption on a scenario. Never panics; problems are
/// returned as named violations.
pub fn validate_scenario<T: Scalar>(s: &HouseholdScenario<T>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let k = s.horizon.steps;
    let dt = s.horizon.dt;
    let zero = T::zero();

    if k < 1 {
        rep.malformed("horizon", "K must be at least 1");
    }
    if !(dt > zero) || !dt.is_finite() {
        rep.malformed("horizon", "dt must be positive and finite");
    }

    let series: [(&'static str, &str, &[T]); 4] = [
        ("tariff", "p", &s.tariff.buy),
        ("tariff", "s", &s.tariff.sell),
        ("profile", "d", &s.demand),
        ("profile", "r", &s.renewable),
    ];
    for (component, name, v) in series {
        if v.len() != k {
            rep.malformed(component, format!("{name} has length {} but K={k}", v.len()));
        }
        if !all_finite(v) {
            rep.malformed(component, format!("{name} must be finite"));
        }
    }
    if s.tariff.sell.iter().any(|v| !(*v > zero)) {
        rep.malformed("tariff", "s must be strictly positive");
    }
    if s
        .tariff
        .buy
        .iter()
        .zip(&s.tariff.sell)
        .any(|(p, q)| !(*p >= *q))
    {
        rep.malformed("tariff", "p must be at least s at every step");
    }
    if s.demand.iter().any(|v| !(*v >= zero)) {
        rep.malformed("profile", "d must be nonnegative");
    }
    if s.renewable.iter().any(|v| !(*v >= zero)) {
        rep.malformed("profile", "r must be nonnegative");
    }

    if let Some(b) = &s.battery {
        validate_battery(b, &mut rep);
    }
    if let Some(t) = &s.tcl {
        validate_tcl(t, k, dt, &mut rep);
    }
    if let Some(nd) = &s.nd_load {
        let finite = nd.u_min.is_finite() && nd.u_max.is_finite() && nd.total.is_finite();
        if !finite {
            rep.malformed("nd_load", "parameters must be finite");
        } else if !(nd.u_min >= zero && nd.u_min <= nd.u_max) {
            rep.malformed("nd_load", "require 0 <= u_min <= u_max");
        } else {
            let kk = T::from_usize(k).unwrap_or(zero);
            if !(nd.total >= kk * nd.u_min && nd.total <= kk * nd.u_max) {
                rep.push(
                    "nd_load",
                    ViolationKind::Infeasible,
                    "total outside [K·u_min, K·u_max]",
                );
            }
        }
    }

    for (name, v) in s.reg.named() {
        if !(v >= zero) || !v.is_finite() {
            rep.malformed("reg", format!("{name} must be nonnegative and finite"));
        }
    }
    rep
}

fn validate_battery<T: Scalar>(b: &BatteryParams<T>, rep: &mut ValidationReport) {
    let zero = T::zero();
    let one = T::one();
    let fields = [
        b.u_ch_max,
        b.u_dch_max,
        b.eta_ch,
        b.eta_dch,
        b.u_sd,
        b.capacity,
        b.x0,
        b.x_min,
        b.x_max,
    ];
    if !all_finite(&fields) {
        rep.malformed("battery", "parameters must be finite");
        return;
    }
    if !(b.eta_ch > zero && b.eta_ch <= one) {
        rep.malformed("battery", "eta_ch must lie in (0, 1]");
    }
    if !(b.eta_dch > zero && b.eta_dch <= one) {
        rep.malformed("battery", "eta_dch must lie in (0, 1]");
    }
    if b.u_ch_max < zero || b.u_dch_max < zero {
        rep.malformed("battery", "power limits must be nonnegative");
    }
    if b.u_sd < zero {
        rep.malformed("battery", "u_sd must be nonnegative");
    }
    if !(b.capacity > zero) {
        rep.malformed("battery", "capacity must be positive");
    }
    if !(b.x_min >= zero && b.x_min < b.x_max && b.x_max <= one) {
        rep.malformed("battery", "require 0 <= x_min < x_max <= 1");
    } else if !(b.x0 >= b.x_min && b.x0 <= b.x_max) {
        rep.malformed("battery", "x0 outside [x_min, x_max]");
    }
}

fn validate_tcl<T: Scalar>(t: &TclParams<T>, k: usize, dt: T, rep: &mut ValidationReport) {
    let zero = T::zero();
    let fields = [
        t.capacitance,
        t.resistance,
        t.cop,
        t.theta_set,
        t.dead_band,
        t.theta0,
        t.u_tcl_max,
    ];
    if !all_finite(&fields) || !all_finite(&t.theta_ex) {
        rep.malformed("tcl", "parameters must be finite");
        return;
    }
    if t.theta_ex.len() != k {
        rep.malformed(
            "tcl",
            format!("theta_ex has length {} but K={k}", t.theta_ex.len()),
        );
    }
    if !(t.capacitance > zero && t.resistance > zero && t.cop > zero) {
        rep.malformed("tcl", "capacitance, resistance and cop must be positive");
        return;
    }
    if !(t.dead_band > zero) {
        rep.malformed("tcl", "dead_band must be positive");
    }
    if t.u_tcl_max < zero {
        rep.malformed("tcl", "u_tcl_max must be nonnegative");
    }
    if !(t.theta0 >= t.theta_min() && t.theta0 <= t.theta_max()) {
        rep.malformed("tcl", "theta0 outside the comfort band");
    }
    let at = t.a_tilde(dt);
    if !(at > zero && at < T::one()) {
        rep.malformed("tcl", "a_tilde = 1 - dt/(R·C) must lie in (0, 1); dt too large");
    }
}

/// Verdict on the sufficient condition `eta_ch * eta_dch < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<T> {
    pub holds: bool,
    /// `1 - eta_ch * eta_dch`.
    pub margin: T,
    pub round_trip: T,
    /// `beta_ch + eta_ch * eta_dch * beta_dch`. Reported only; never used as a guarantee.
    pub reg_witness: T,
}

pub fn theorem_condition<T: Scalar>(s: &HouseholdScenario<T>) -> Result<ConditionReport<T>> {
    let b = s.battery.as_ref().ok_or(Error::NoBattery)?;
    let rt = b.round_trip();
    let margin = T::one() - rt;
    Ok(ConditionReport {
        holds: margin > T::zero(),
        margin,
        round_trip: rt,
        reg_witness: s.reg.beta_ch + rt * s.reg.beta_dch,
    })
}

/// One step of the state-of-charge update.
#[inline]
pub fn step_soc<T: Scalar>(x: T, u_ch: T, u_dch: T, b: &BatteryParams<T>, dt: T) -> T {
    x + dt * (b.eta_ch * u_ch - u_dch / b.eta_dch - b.u_sd) / b.capacity
}

/// One step of the indoor temperature update (cooling).
#[inline]
pub fn step_temperature<T: Scalar>(theta: T, u_tcl: T, theta_ex: T, t: &TclParams<T>, dt: T) -> T {
    t.a_tilde(dt) * theta + dt * (t.a() * theta_ex - t.b() * u_tcl)
}

/// SoC trajectory of length `K + 1`, starting at `x0`.
pub fn soc_trajectory<T: Scalar>(b: &BatteryParams<T>, dt: T, u_ch: &[T], u_dch: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(u_ch.len() + 1);
    x.push(b.x0);
    for (c, d) in u_ch.iter().zip(u_dch) {
        let last = *x.last().unwrap();
        x.push(step_soc(last, *c, *d, b, dt));
    }
    x
}

/// Indoor temperature trajectory of length `K + 1`, starting at `theta0`.
pub fn temperature_trajectory<T: Scalar>(t: &TclParams<T>, dt: T, u_tcl: &[T]) -> Vec<T> {
    let mut th = Vec::with_capacity(u_tcl.len() + 1);
    th.push(t.theta0);
    for (u, ex) in u_tcl.iter().zip(&t.theta_ex) {
        let last = *th.last().unwrap();
        th.push(step_temperature(last, *u, *ex, t, dt));
    }
    th
}
