//! Hand-sized instances for the unit tests.

use std::collections::BTreeMap;

use super::instance::{GepInstance, Pipeline, PlantType, RepStructure, StorageType};

pub fn gas_plant() -> PlantType {
    PlantType {
        id: "ccgt".into(),
        thermal: true,
        gas_fired: true,
        c_inv: 400.0,
        c_dec: 30.0,
        c_fix: 40.0,
        c_var: 2.0,
        c_fuel: 0.0,
        heat_rate: 7.0,
        capture_rate: 0.0,
        u_prod: 50.0,
        l_prod: 0.1,
        u_ramp: 0.5,
        }
}

pub fn solar_plant() -> PlantType {
    PlantType {
        id: "solar".into(),
        thermal: false,
        gas_fired: false,
        c_inv: 250.0,
        c_dec: 10.0,
        c_fix: 15.0,
        c_var: 0.0,
        c_fuel: 0.0,
        heat_rate: 0.0,
        capture_rate: 0.0,
        u_prod: 30.0,
        l_prod: 0.0,
        u_ramp: 1.0,
    }
}

pub fn battery() -> StorageType {
    StorageType {
        id: "battery".into(),
        c_en_inv: 3.0,
        c_p_inv: 5.0,
        c_en_fix: 1.0,
        c_p_fix: 1.0,
        gamma_ch: 0.95,
        gamma_dis: 0.9,
    }
}

/// 2 power nodes, 2 gas nodes, 2 days x 3 hours, gas + solar + battery,
/// one existing and one candidate pipeline.
pub fn small_instance() -> GepInstance {
    let days = 2;
    let hpd = 3;
    let hours = days * hpd;
    let demand_power = vec![
        vec![40.0, 65.0, 50.0, 42.0, 70.0, 48.0],
        vec![20.0, 32.0, 25.0, 21.0, 35.0, 24.0],
    ];
    let demand_gas = vec![vec![120.0, 140.0], vec![60.0, 70.0]];
    let mut capacity_factor = BTreeMap::new();
    for n in 0..2 {
        capacity_factor.insert((n, 1), vec![0.0, 0.8, 0.4, 0.0, 0.7, 0.5][..hours].to_vec());
    }
    GepInstance {
        name: "small".into(),
        power_nodes: vec!["p0".into(), "p1".into()],
        ng_nodes: vec!["k0".into(), "k1".into()],
        days,
        hours_per_day: hpd,
        plants: vec![gas_plant(), solar_plant()],
        storages: vec![battery()],
        pipelines: vec![
            Pipeline {
                id: "l0".into(),
                from: 0,
                to: 1,
                existing: true,
                capacity: 500.0,
                max_capacity: 500.0,
                cost: 0.0,
            },
            Pipeline {
                id: "l1".into(),
                from: 1,
                to: 0,
                existing: false,
                capacity: 0.0,
                max_capacity: 400.0,
                cost: 150.0,
            },
        ],
        links: vec![(0, 0), (1, 1)],
        demand_power,
        demand_gas,
        capacity_factor,
        initial_plants: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        max_new_plants: vec![vec![4.0, 6.0], vec![4.0, 6.0]],
        injection_lower: vec![0.0, 0.0],
        injection_upper: vec![5000.0, 2500.0],
        cost_shed_power: 1000.0,
        cost_ng: 4.0,
        cost_rng: 18.0,
        cost_shed_gas: 800.0,
        emission_factor_ng: 0.053,
        emission_cap_power: 4000.0,
        emission_cap_gas: 4000.0,
        emission_reduction: 0.2,
        rps: 0.1,
        rep: RepStructure::identity(days),
    }
}

/// All-zero demand variant of [`small_instance`] with no initial plants.
pub fn zero_demand_instance() -> GepInstance {
    let mut inst = small_instance();
    inst.name = "zero".into();
    for series in &mut inst.demand_power {
        series.iter_mut().for_each(|v| *v = 0.0);
    }
    for series in &mut inst.demand_gas {
        series.iter_mut().for_each(|v| *v = 0.0);
    }
    inst.initial_plants = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    inst.rps = 0.0;
    inst
}

/// One power node, one gas-fired plant type, a single day: peak demand 95
/// at nameplate 50 forces two operating plants when shedding is priced
/// out.
pub fn single_thermal_instance() -> GepInstance {
    GepInstance {
        name: "single".into(),
        power_nodes: vec!["p0".into()],
        ng_nodes: vec!["k0".into()],
        days: 1,
        hours_per_day: 3,
        plants: vec![PlantType {
            l_prod: 0.0,
            u_ramp: 1.0,
            ..gas_plant()
        }],
        storages: vec![],
        pipelines: vec![],
        links: vec![(0, 0)],
        demand_power: vec![vec![60.0, 95.0, 70.0]],
        demand_gas: vec![vec![50.0]],
        capacity_factor: BTreeMap::new(),
        initial_plants: vec![vec![0.0]],
        max_new_plants: vec![vec![5.0]],
        injection_lower: vec![0.0],
        injection_upper: vec![10000.0],
        cost_shed_power: 10000.0,
        cost_ng: 3.0,
        cost_rng: 15.0,
        cost_shed_gas: 500.0,
        emission_factor_ng: 0.053,
        emission_cap_power: 10000.0,
        emission_cap_gas: 10000.0,
        emission_reduction: 0.0,
        rps: 0.0,
        rep: RepStructure::identity(1),
    }
}
