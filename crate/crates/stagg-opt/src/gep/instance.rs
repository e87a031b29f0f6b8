//! Planning-instance data for the joint power / natural-gas model.
//!
//! Power operations run at `hours_per_day` steps per day over the
//! representative days; gas operations run daily over the whole year.
//! Representative-day structure lives in [`RepStructure`]: medoid days,
//! their weights (how many days each stands for), and the day-to-medoid
//! mapping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use stagg_core::aggregate::TemporalAggregation;

#[derive(Debug, Error)]
pub enum GepError {
    #[error("instance error: {0}")]
    Instance(String),
    #[error("build error: {0}")]
    Build(String),
    #[error("missing table {0}")]
    MissingTable(String),
    #[error("table {table}: {detail}")]
    Table { table: String, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// One generation technology. `thermal` plants carry minimum stable
/// output and ramping limits; non-thermal plants are variable renewables
/// capped by their hourly capacity factor. Gas-fired plants (a subset of
/// the thermal ones) draw fuel from the gas network instead of paying
/// `c_fuel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantType {
    pub id: String,
    pub thermal: bool,
    pub gas_fired: bool,
    /// CAPEX per plant.
    pub c_inv: f64,
    /// Decommissioning cost per plant.
    pub c_dec: f64,
    /// Fixed O&M per operating plant and year.
    pub c_fix: f64,
    /// Variable O&M per MWh.
    pub c_var: f64,
    /// Fuel price per MMBtu (non-gas-fired plants).
    pub c_fuel: f64,
    /// Heat rate, MMBtu per MWh.
    pub heat_rate: f64,
    /// Carbon capture rate in [0, 1].
    pub capture_rate: f64,
    /// Nameplate capacity, MW.
    pub u_prod: f64,
    /// Minimum stable output as a fraction of nameplate, [0, 1].
    pub l_prod: f64,
    /// Ramping limit as a fraction of nameplate.
    pub u_ramp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageType {
    pub id: String,
    /// Energy-related CAPEX per MWh of storage level capacity.
    pub c_en_inv: f64,
    /// Power-related CAPEX per MW of charge/discharge capacity.
    pub c_p_inv: f64,
    pub c_en_fix: f64,
    pub c_p_fix: f64,
    /// Charge efficiency in (0, 1].
    pub gamma_ch: f64,
    /// Discharge efficiency in (0, 1].
    pub gamma_dis: f64,
}

/// A unidirectional gas pipeline. Existing pipelines carry up to
/// `capacity`; candidates carry up to `max_capacity` once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub existing: bool,
    pub capacity: f64,
    pub max_capacity: f64,
    pub cost: f64,
}

/// Representative-day structure: which days the power side models, how
/// many days each one stands for, and the day-to-representative map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepStructure {
    pub medoid_days: Vec<usize>,
    pub weights: Vec<f64>,
    pub phi: Vec<usize>,
}

impl RepStructure {
    /// Every day represents itself with weight one (the full problem).
    pub fn identity(days: usize) -> Self {
        RepStructure {
            medoid_days: (0..days).collect(),
            weights: vec![1.0; days],
            phi: (0..days).collect(),
        }
    }

    pub fn from_temporal(temporal: &TemporalAggregation) -> Self {
        RepStructure {
            medoid_days: temporal.medoids.clone(),
            weights: temporal.weights.iter().map(|&w| w as f64).collect(),
            phi: temporal.phi.clone(),
        }
    }

    pub fn validate(&self, days: usize) -> Result<(), GepError> {
        if self.medoid_days.is_empty() {
            return Err(GepError::Instance("no representative days".into()));
        }
        if self.medoid_days.len() != self.weights.len() {
            return Err(GepError::Instance(
                "representative weights do not match medoid days".into(),
            ));
        }
        if self.phi.len() != days {
            return Err(GepError::Instance(format!(
                "phi covers {} days, instance has {}",
                self.phi.len(),
                days
            )));
        }
        let mut sorted = self.medoid_days.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.medoid_days.len() {
            return Err(GepError::Instance("duplicate medoid days".into()));
        }
        for &m in &self.medoid_days {
            if m >= days {
                return Err(GepError::Instance(format!("medoid day {} out of range", m)));
            }
            if self.phi[m] != m {
                return Err(GepError::Instance(format!(
                    "medoid day {} does not represent itself",
                    m
                )));
            }
        }
        for (d, &rep) in self.phi.iter().enumerate() {
            if !self.medoid_days.contains(&rep) {
                return Err(GepError::Instance(format!(
                    "day {} maps to non-medoid day {}",
                    d, rep
                )));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - days as f64).abs() > 1e-6 {
            return Err(GepError::Instance(format!(
                "representative weights sum to {}, expected {}",
                total, days
            )));
        }
        Ok(())
    }
}

/// A complete planning instance. Demand and capacity-factor series cover
/// the whole horizon regardless of the representative structure, so the
/// same instance can be rebuilt under any temporal aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GepInstance {
    pub name: String,
    pub power_nodes: Vec<String>,
    pub ng_nodes: Vec<String>,
    pub days: usize,
    pub hours_per_day: usize,
    pub plants: Vec<PlantType>,
    pub storages: Vec<StorageType>,
    pub pipelines: Vec<Pipeline>,
    /// Bipartite gas-to-power adjacency as (gas node, power node) pairs.
    pub links: Vec<(usize, usize)>,
    /// Power demand per node per hour (`days * hours_per_day` entries).
    pub demand_power: Vec<Vec<f64>>,
    /// Gas demand per gas node per day.
    pub demand_gas: Vec<Vec<f64>>,
    /// Hourly capacity factors per (power node, VRE plant type).
    pub capacity_factor: BTreeMap<(usize, usize), Vec<f64>>,
    /// Initial plant counts per (power node, plant type).
    pub initial_plants: Vec<Vec<f64>>,
    /// Maximum new builds per (power node, plant type).
    pub max_new_plants: Vec<Vec<f64>>,
    pub injection_lower: Vec<f64>,
    pub injection_upper: Vec<f64>,
    pub cost_shed_power: f64,
    pub cost_ng: f64,
    pub cost_rng: f64,
    pub cost_shed_gas: f64,
    /// Emission factor of gas, ton CO2 per MMBtu.
    pub emission_factor_ng: f64,
    pub emission_cap_power: f64,
    pub emission_cap_gas: f64,
    /// Emission reduction goal in [0, 1].
    pub emission_reduction: f64,
    /// Renewable portfolio standard in [0, 1].
    pub rps: f64,
    pub rep: RepStructure,
}

impl GepInstance {
    pub fn hours(&self) -> usize {
        self.days * self.hours_per_day
    }

    pub fn hour_index(&self, day: usize, hour: usize) -> usize {
        day * self.hours_per_day + hour
    }

    /// Total system power demand of one day, by hour.
    pub fn system_demand_profile(&self, day: usize) -> Vec<f64> {
        (0..self.hours_per_day)
            .map(|h| {
                self.demand_power
                    .iter()
                    .map(|series| series[self.hour_index(day, h)])
                    .sum()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), GepError> {
        let err = |msg: String| Err(GepError::Instance(msg));
        if self.power_nodes.is_empty() || self.ng_nodes.is_empty() {
            return err("instance needs at least one power and one gas node".into());
        }
        if self.days == 0 || self.hours_per_day == 0 {
            return err("days and hours_per_day must be positive".into());
        }
        if self.plants.is_empty() {
            return err("no plant types".into());
        }
        let fraction = |v: f64| (0.0..=1.0).contains(&v);
        for p in &self.plants {
            if p.gas_fired && !p.thermal {
                return err(format!("gas-fired plant {:?} must be thermal", p.id));
            }
            if !fraction(p.l_prod) || !fraction(p.capture_rate) {
                return err(format!("plant {:?} fractions out of [0,1]", p.id));
            }
            for (what, v) in [
                ("c_inv", p.c_inv),
                ("c_dec", p.c_dec),
                ("c_fix", p.c_fix),
                ("c_var", p.c_var),
                ("c_fuel", p.c_fuel),
                ("heat_rate", p.heat_rate),
                ("u_prod", p.u_prod),
                ("u_ramp", p.u_ramp),
            ] {
                if v < 0.0 || !v.is_finite() {
                    return err(format!("plant {:?} has invalid {}", p.id, what));
                }
            }
        }
        for s in &self.storages {
            if !(s.gamma_ch > 0.0 && s.gamma_ch <= 1.0 && s.gamma_dis > 0.0 && s.gamma_dis <= 1.0)
            {
                return err(format!("storage {:?} efficiencies out of (0,1]", s.id));
            }
        }
        for pipe in &self.pipelines {
            if pipe.from >= self.ng_nodes.len() || pipe.to >= self.ng_nodes.len() {
                return err(format!("pipeline {:?} endpoint out of range", pipe.id));
            }
            if pipe.capacity < 0.0 || pipe.max_capacity < 0.0 || pipe.cost < 0.0 {
                return err(format!("pipeline {:?} has negative data", pipe.id));
            }
        }
        for &(k, n) in &self.links {
            if k >= self.ng_nodes.len() || n >= self.power_nodes.len() {
                return err(format!("link ({}, {}) out of range", k, n));
            }
        }
        if self.demand_power.len() != self.power_nodes.len() {
            return err("power demand rows do not match power nodes".into());
        }
        for (n, series) in self.demand_power.iter().enumerate() {
            if series.len() != self.hours() {
                return err(format!(
                    "power demand for node {} has {} entries, expected {}",
                    n,
                    series.len(),
                    self.hours()
                ));
            }
            if series.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return err(format!("negative power demand at node {}", n));
            }
        }
        if self.demand_gas.len() != self.ng_nodes.len() {
            return err("gas demand rows do not match gas nodes".into());
        }
        for (k, series) in self.demand_gas.iter().enumerate() {
            if series.len() != self.days {
                return err(format!(
                    "gas demand for node {} has {} entries, expected {}",
                    k,
                    series.len(),
                    self.days
                ));
            }
            if series.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return err(format!("negative gas demand at node {}", k));
            }
        }
        for (i, p) in self.plants.iter().enumerate() {
            if !p.thermal {
                for n in 0..self.power_nodes.len() {
                    let Some(series) = self.capacity_factor.get(&(n, i)) else {
                        return err(format!(
                            "missing capacity factors for VRE plant {:?} at node {}",
                            p.id, n
                        ));
                    };
                    if series.len() != self.hours() {
                        return err(format!(
                            "capacity factors for plant {:?} node {} have wrong length",
                            p.id, n
                        ));
                    }
                    if series.iter().any(|v| !fraction(*v)) {
                        return err(format!("capacity factor out of [0,1] for {:?}", p.id));
                    }
                }
            }
        }
        for (what, table) in [
            ("initial_plants", &self.initial_plants),
            ("max_new_plants", &self.max_new_plants),
        ] {
            if table.len() != self.power_nodes.len()
                || table.iter().any(|row| row.len() != self.plants.len())
            {
                return err(format!("{} table shape mismatch", what));
            }
            if table.iter().flatten().any(|v| *v < 0.0 || !v.is_finite()) {
                return err(format!("{} has negative entries", what));
            }
        }
        if self.injection_lower.len() != self.ng_nodes.len()
            || self.injection_upper.len() != self.ng_nodes.len()
        {
            return err("injection bounds do not match gas nodes".into());
        }
        for k in 0..self.ng_nodes.len() {
            if self.injection_lower[k] < 0.0 || self.injection_upper[k] < self.injection_lower[k] {
                return err(format!("injection bounds inconsistent at gas node {}", k));
            }
        }
        for (what, v) in [
            ("cost_shed_power", self.cost_shed_power),
            ("cost_ng", self.cost_ng),
            ("cost_rng", self.cost_rng),
            ("cost_shed_gas", self.cost_shed_gas),
            ("emission_factor_ng", self.emission_factor_ng),
            ("emission_cap_power", self.emission_cap_power),
            ("emission_cap_gas", self.emission_cap_gas),
        ] {
            if v < 0.0 || !v.is_finite() {
                return err(format!("{} must be nonnegative", what));
            }
        }
        if !fraction(self.emission_reduction) || !fraction(self.rps) {
            return err("emission_reduction and rps must lie in [0,1]".into());
        }
        self.rep.validate(self.days)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::testutil::small_instance;

    #[test]
    fn small_instance_validates() {
        small_instance().validate().unwrap();
    }

    #[test]
    fn rep_structure_validation() {
        let mut rep = RepStructure::identity(4);
        rep.validate(4).unwrap();
        rep.weights[0] = 2.0;
        assert!(rep.validate(4).is_err());

        let rep = RepStructure {
            medoid_days: vec![1],
            weights: vec![4.0],
            phi: vec![1, 1, 1, 1],
        };
        rep.validate(4).unwrap();
    }

    #[test]
    fn validation_catches_bad_data() {
        let mut inst = small_instance();
        inst.plants[0].l_prod = 1.5;
        assert!(inst.validate().is_err());

        let mut inst = small_instance();
        inst.rps = -0.1;
        assert!(inst.validate().is_err());

        let mut inst = small_instance();
        inst.demand_power[0][0] = -1.0;
        assert!(inst.validate().is_err());
    }
}
