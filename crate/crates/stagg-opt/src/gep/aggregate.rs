//! Reduce an instance under a spatial grouping and a temporal
//! aggregation.
//!
//! Demands, initial plant counts, build caps, and injection bounds sum
//! within groups. Capacity factors average within a group weighted by
//! initial nameplate capacity (unweighted when the group starts empty).
//! Pipelines with both ends in one group disappear; parallel inter-group
//! pipelines of the same kind merge with summed capacity and the cheapest
//! member's cost. Gas-power adjacency is the union over members. The
//! temporal aggregation installs the representative-day structure; the
//! full demand series stay at daily/hourly resolution so the reduced
//! instance can still be evaluated over the whole year.

use std::collections::BTreeMap;

use stagg_core::aggregate::{SpatialAggregation, TemporalAggregation};

use super::instance::{GepError, GepInstance, Pipeline, RepStructure};

/// Class-pure node grouping: dense group ids per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeGrouping {
    pub power: Vec<usize>,
    pub gas: Vec<usize>,
    pub power_groups: usize,
    pub gas_groups: usize,
}

impl NodeGrouping {
    pub fn identity(instance: &GepInstance) -> Self {
        NodeGrouping {
            power: (0..instance.power_nodes.len()).collect(),
            gas: (0..instance.ng_nodes.len()).collect(),
            power_groups: instance.power_nodes.len(),
            gas_groups: instance.ng_nodes.len(),
        }
    }

    /// Split a joint spatial aggregation (over power nodes followed by gas
    /// nodes) into per-class dense groupings. Errors when a group mixes
    /// classes.
    pub fn from_spatial(
        spatial: &SpatialAggregation,
        n_power: usize,
        n_gas: usize,
    ) -> Result<Self, GepError> {
        if spatial.node_to_group.len() != n_power + n_gas {
            return Err(GepError::Instance(format!(
                "spatial aggregation covers {} nodes, instance has {}",
                spatial.node_to_group.len(),
                n_power + n_gas
            )));
        }
        for g in 0..spatial.group_count {
            let members = spatial.members(g);
            let has_power = members.iter().any(|&n| n < n_power);
            let has_gas = members.iter().any(|&n| n >= n_power);
            if has_power && has_gas {
                return Err(GepError::Instance(format!(
                    "group {} mixes power and gas nodes",
                    g
                )));
            }
        }
        let dense = |raw: &[usize]| -> (Vec<usize>, usize) {
            let mut labels: Vec<usize> = raw.to_vec();
            labels.sort_unstable();
            labels.dedup();
            (
                raw.iter()
                    .map(|g| labels.binary_search(g).unwrap())
                    .collect(),
                labels.len(),
            )
        };
        let (power, power_groups) = dense(&spatial.node_to_group[..n_power]);
        let (gas, gas_groups) = dense(&spatial.node_to_group[n_power..]);
        Ok(NodeGrouping {
            power,
            gas,
            power_groups,
            gas_groups,
        })
    }

    fn validate(&self, instance: &GepInstance) -> Result<(), GepError> {
        if self.power.len() != instance.power_nodes.len()
            || self.gas.len() != instance.ng_nodes.len()
        {
            return Err(GepError::Instance(
                "grouping does not cover the instance nodes".into(),
            ));
        }
        for (raw, count) in [(&self.power, self.power_groups), (&self.gas, self.gas_groups)] {
            let mut seen = vec![false; count];
            for &g in raw.iter() {
                if g >= count {
                    return Err(GepError::Instance(format!("group id {} out of range", g)));
                }
                seen[g] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(GepError::Instance("empty group in grouping".into()));
            }
        }
        Ok(())
    }
}

/// Build the reduced instance induced by `grouping` and `temporal`.
pub fn aggregate_instance(
    instance: &GepInstance,
    grouping: &NodeGrouping,
    temporal: &TemporalAggregation,
) -> Result<GepInstance, GepError> {
    instance.validate()?;
    grouping.validate(instance)?;
    if temporal.periods() != instance.days {
        return Err(GepError::Instance(format!(
            "temporal aggregation covers {} days, instance has {}",
            temporal.periods(),
            instance.days
        )));
    }
    let ge = grouping.power_groups;
    let gg = grouping.gas_groups;
    let hours = instance.hours();
    let n_plants = instance.plants.len();

    let power_nodes: Vec<String> = (0..ge).map(|g| format!("pg{}", g)).collect();
    let ng_nodes: Vec<String> = (0..gg).map(|g| format!("gg{}", g)).collect();

    let mut demand_power = vec![vec![0.0; hours]; ge];
    for (n, series) in instance.demand_power.iter().enumerate() {
        let g = grouping.power[n];
        for (t, v) in series.iter().enumerate() {
            demand_power[g][t] += v;
        }
    }
    let mut demand_gas = vec![vec![0.0; instance.days]; gg];
    for (k, series) in instance.demand_gas.iter().enumerate() {
        let g = grouping.gas[k];
        for (d, v) in series.iter().enumerate() {
            demand_gas[g][d] += v;
        }
    }

    let mut initial_plants = vec![vec![0.0; n_plants]; ge];
    let mut max_new_plants = vec![vec![0.0; n_plants]; ge];
    for n in 0..instance.power_nodes.len() {
        let g = grouping.power[n];
        for i in 0..n_plants {
            initial_plants[g][i] += instance.initial_plants[n][i];
            max_new_plants[g][i] += instance.max_new_plants[n][i];
        }
    }

    // Capacity factors: nameplate-weighted group mean, falling back to the
    // plain mean when the group has no initial capacity of that type.
    let mut capacity_factor = BTreeMap::new();
    for (i, plant) in instance.plants.iter().enumerate() {
        if plant.thermal {
            continue;
        }
        for g in 0..ge {
            let members: Vec<usize> = (0..instance.power_nodes.len())
                .filter(|&n| grouping.power[n] == g)
                .collect();
            let weights: Vec<f64> = members
                .iter()
                .map(|&n| instance.initial_plants[n][i] * plant.u_prod)
                .collect();
            let total: f64 = weights.iter().sum();
            let mut series = vec![0.0; hours];
            for (pos, &n) in members.iter().enumerate() {
                let w = if total > 0.0 {
                    weights[pos] / total
                } else {
                    1.0 / members.len() as f64
                };
                let cf = &instance.capacity_factor[&(n, i)];
                for t in 0..hours {
                    series[t] += w * cf[t];
                }
            }
            capacity_factor.insert((g, i), series);
        }
    }

    let mut injection_lower = vec![0.0; gg];
    let mut injection_upper = vec![0.0; gg];
    for k in 0..instance.ng_nodes.len() {
        let g = grouping.gas[k];
        injection_lower[g] += instance.injection_lower[k];
        injection_upper[g] += instance.injection_upper[k];
    }

    // Pipelines: drop intra-group, merge parallel inter-group per kind.
    let mut merged: BTreeMap<(usize, usize, bool), Pipeline> = BTreeMap::new();
    for pipe in &instance.pipelines {
        let from = grouping.gas[pipe.from];
        let to = grouping.gas[pipe.to];
        if from == to {
            continue;
        }
        match merged.entry((from, to, pipe.existing)) {
            std::collections::btree_map::Entry::Vacant(entry) => {
                entry.insert(Pipeline {
                    id: pipe.id.clone(),
                    from,
                    to,
                    existing: pipe.existing,
                    capacity: pipe.capacity,
                    max_capacity: pipe.max_capacity,
                    cost: pipe.cost,
                });
            }
            std::collections::btree_map::Entry::Occupied(mut entry) => {
                let m = entry.get_mut();
                m.capacity += pipe.capacity;
                m.max_capacity += pipe.max_capacity;
                m.cost = m.cost.min(pipe.cost);
            }
        }
    }
    let pipelines: Vec<Pipeline> = merged
        .into_values()
        .enumerate()
        .map(|(l, mut pipe)| {
            pipe.id = format!("gl{}", l);
            pipe
        })
        .collect();

    let mut links: Vec<(usize, usize)> = instance
        .links
        .iter()
        .map(|&(k, n)| (grouping.gas[k], grouping.power[n]))
        .collect();
    links.sort_unstable();
    links.dedup();

    let reduced = GepInstance {
        name: format!("{}-agg", instance.name),
        power_nodes,
        ng_nodes,
        days: instance.days,
        hours_per_day: instance.hours_per_day,
        plants: instance.plants.clone(),
        storages: instance.storages.clone(),
        pipelines,
        links,
        demand_power,
        demand_gas,
        capacity_factor,
        initial_plants,
        max_new_plants,
        injection_lower,
        injection_upper,
        cost_shed_power: instance.cost_shed_power,
        cost_ng: instance.cost_ng,
        cost_rng: instance.cost_rng,
        cost_shed_gas: instance.cost_shed_gas,
        emission_factor_ng: instance.emission_factor_ng,
        emission_cap_power: instance.emission_cap_power,
        emission_cap_gas: instance.emission_cap_gas,
        emission_reduction: instance.emission_reduction,
        rps: instance.rps,
        rep: RepStructure::from_temporal(temporal),
    };
    reduced.validate()?;
    Ok(reduced)
}
