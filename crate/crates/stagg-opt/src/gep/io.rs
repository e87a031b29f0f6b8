//! Instance serialization: a directory of CSV tables plus a JSON
//! manifest.
//!
//! Layout (all paths relative to the instance directory):
//!
//! - `manifest.json` — name, horizon, scalar parameters, representative
//!   structure, and the table file names
//! - `power_nodes.csv`, `ng_nodes.csv` — `id`
//! - `plants.csv` — technology parameters, one row per type
//! - `storage.csv` — storage technology parameters
//! - `pipelines.csv` — `id,from,to,existing,capacity,max_capacity,cost`
//! - `links.csv` — `ng_node,power_node`
//! - `initial_plants.csv` — `node_id,plant_id,count,max_new`
//! - `injection.csv` — `node_id,l_inj,u_inj`
//! - `demand_power.csv` — `node_id,p1..pH` (hours)
//! - `demand_gas.csv` — `node_id,p1..pD` (days)
//! - `cf.csv` — `node_id,plant_id,p1..pH`, rows only for VRE types

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instance::{GepError, GepInstance, Pipeline, PlantType, RepStructure, StorageType};

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    days: usize,
    hours_per_day: usize,
    cost_shed_power: f64,
    cost_ng: f64,
    cost_rng: f64,
    cost_shed_gas: f64,
    emission_factor_ng: f64,
    emission_cap_power: f64,
    emission_cap_gas: f64,
    emission_reduction: f64,
    rps: f64,
    rep: RepStructure,
}

fn table_err(table: &str, detail: impl Into<String>) -> GepError {
    GepError::Table {
        table: table.into(),
        detail: detail.into(),
    }
}

fn write_csv(dir: &Path, name: &str, content: String) -> Result<(), GepError> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

/// Write `instance` as a directory of CSV tables plus `manifest.json`.
pub fn save_instance_dir(instance: &GepInstance, dir: &Path) -> Result<(), GepError> {
    instance.validate()?;
    std::fs::create_dir_all(dir)?;

    let manifest = Manifest {
        name: instance.name.clone(),
        days: instance.days,
        hours_per_day: instance.hours_per_day,
        cost_shed_power: instance.cost_shed_power,
        cost_ng: instance.cost_ng,
        cost_rng: instance.cost_rng,
        cost_shed_gas: instance.cost_shed_gas,
        emission_factor_ng: instance.emission_factor_ng,
        emission_cap_power: instance.emission_cap_power,
        emission_cap_gas: instance.emission_cap_gas,
        emission_reduction: instance.emission_reduction,
        rps: instance.rps,
        rep: instance.rep.clone(),
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let mut out = String::from("id\n");
    for id in &instance.power_nodes {
        writeln!(out, "{}", id).unwrap();
    }
    write_csv(dir, "power_nodes.csv", out)?;

    let mut out = String::from("id\n");
    for id in &instance.ng_nodes {
        writeln!(out, "{}", id).unwrap();
    }
    write_csv(dir, "ng_nodes.csv", out)?;

    let mut out = String::from(
        "id,thermal,gas_fired,c_inv,c_dec,c_fix,c_var,c_fuel,heat_rate,capture_rate,u_prod,l_prod,u_ramp\n",
    );
    for p in &instance.plants {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.id,
            p.thermal,
            p.gas_fired,
            p.c_inv,
            p.c_dec,
            p.c_fix,
            p.c_var,
            p.c_fuel,
            p.heat_rate,
            p.capture_rate,
            p.u_prod,
            p.l_prod,
            p.u_ramp
        )
        .unwrap();
    }
    write_csv(dir, "plants.csv", out)?;

    let mut out = String::from("id,c_en_inv,c_p_inv,c_en_fix,c_p_fix,gamma_ch,gamma_dis\n");
    for s in &instance.storages {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.id, s.c_en_inv, s.c_p_inv, s.c_en_fix, s.c_p_fix, s.gamma_ch, s.gamma_dis
        )
        .unwrap();
    }
    write_csv(dir, "storage.csv", out)?;

    let mut out = String::from("id,from,to,existing,capacity,max_capacity,cost\n");
    for p in &instance.pipelines {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.id,
            instance.ng_nodes[p.from],
            instance.ng_nodes[p.to],
            p.existing,
            p.capacity,
            p.max_capacity,
            p.cost
        )
        .unwrap();
    }
    write_csv(dir, "pipelines.csv", out)?;

    let mut out = String::from("ng_node,power_node\n");
    for &(k, n) in &instance.links {
        writeln!(out, "{},{}", instance.ng_nodes[k], instance.power_nodes[n]).unwrap();
    }
    write_csv(dir, "links.csv", out)?;

    let mut out = String::from("node_id,plant_id,count,max_new\n");
    for (n, node) in instance.power_nodes.iter().enumerate() {
        for (i, plant) in instance.plants.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                node, plant.id, instance.initial_plants[n][i], instance.max_new_plants[n][i]
            )
            .unwrap();
        }
    }
    write_csv(dir, "initial_plants.csv", out)?;

    let mut out = String::from("node_id,l_inj,u_inj\n");
    for (k, node) in instance.ng_nodes.iter().enumerate() {
        writeln!(
            out,
            "{},{},{}",
            node, instance.injection_lower[k], instance.injection_upper[k]
        )
        .unwrap();
    }
    write_csv(dir, "injection.csv", out)?;

    let series_csv = |ids: &[String], rows: &[Vec<f64>], cols: usize| {
        let mut out = String::from("node_id");
        for t in 1..=cols {
            write!(out, ",p{}", t).unwrap();
        }
        out.push('\n');
        for (id, series) in ids.iter().zip(rows) {
            write!(out, "{}", id).unwrap();
            for v in series {
                write!(out, ",{}", v).unwrap();
            }
            out.push('\n');
        }
        out
    };
    write_csv(
        dir,
        "demand_power.csv",
        series_csv(&instance.power_nodes, &instance.demand_power, instance.hours()),
    )?;
    write_csv(
        dir,
        "demand_gas.csv",
        series_csv(&instance.ng_nodes, &instance.demand_gas, instance.days),
    )?;

    let mut out = String::from("node_id,plant_id");
    for t in 1..=instance.hours() {
        write!(out, ",p{}", t).unwrap();
    }
    out.push('\n');
    for (&(n, i), series) in &instance.capacity_factor {
        write!(out, "{},{}", instance.power_nodes[n], instance.plants[i].id).unwrap();
        for v in series {
            write!(out, ",{}", v).unwrap();
        }
        out.push('\n');
    }
    write_csv(dir, "cf.csv", out)?;
    Ok(())
}

struct TableReader {
    table: String,
    headers: Vec<String>,
    records: Vec<Vec<String>>,
}

impl TableReader {
    fn open(dir: &Path, name: &str) -> Result<TableReader, GepError> {
        let path = dir.join(name);
        if !path.exists() {
            return Err(GepError::MissingTable(name.into()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(&path)
            .map_err(|e| table_err(name, e.to_string()))?;
        let headers = reader
            .headers()
            .map_err(|e| table_err(name, e.to_string()))?
            .iter()
            .map(|h| h.to_string())
            .collect();
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| table_err(name, e.to_string()))?;
            records.push(record.iter().map(|c| c.to_string()).collect());
        }
        Ok(TableReader {
            table: name.into(),
            headers,
            records,
        })
    }

    fn column(&self, name: &str) -> Result<usize, GepError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| table_err(&self.table, format!("missing column {:?}", name)))
    }

    fn number(&self, record: &[String], col: usize, row: usize) -> Result<f64, GepError> {
        record
            .get(col)
            .and_then(|c| c.parse::<f64>().ok())
            .ok_or_else(|| {
                table_err(
                    &self.table,
                    format!("row {}: column {} is not numeric", row + 2, col + 1),
                )
            })
    }

    fn flag(&self, record: &[String], col: usize, row: usize) -> Result<bool, GepError> {
        match record.get(col).map(|s| s.as_str()) {
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            _ => Err(table_err(
                &self.table,
                format!("row {}: column {} is not a boolean", row + 2, col + 1),
            )),
        }
    }
}

fn read_ids(dir: &Path, name: &str) -> Result<Vec<String>, GepError> {
    let table = TableReader::open(dir, name)?;
    let id = table.column("id")?;
    Ok(table
        .records
        .iter()
        .map(|r| r[id].clone())
        .collect())
}

fn read_series(
    dir: &Path,
    name: &str,
    ids: &[String],
    cols: usize,
) -> Result<Vec<Vec<f64>>, GepError> {
    let table = TableReader::open(dir, name)?;
    let id_col = table.column("node_id")?;
    if table.headers.len() != cols + 1 {
        return Err(table_err(
            name,
            format!("expected {} period columns, found {}", cols, table.headers.len() - 1),
        ));
    }
    let mut out = vec![None; ids.len()];
    for (row, record) in table.records.iter().enumerate() {
        let idx = ids
            .iter()
            .position(|i| *i == record[id_col])
            .ok_or_else(|| table_err(name, format!("unknown node id {:?}", record[id_col])))?;
        let mut series = Vec::with_capacity(cols);
        for c in 0..cols {
            series.push(table.number(record, c + 1, row)?);
        }
        out[idx] = Some(series);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| table_err(name, format!("missing series for {:?}", ids[i]))))
        .collect()
}

/// Load an instance directory written by [`save_instance_dir`].
pub fn load_instance_dir(dir: &Path) -> Result<GepInstance, GepError> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(GepError::MissingTable("manifest.json".into()));
    }
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;

    let power_nodes = read_ids(dir, "power_nodes.csv")?;
    let ng_nodes = read_ids(dir, "ng_nodes.csv")?;

    let plants_table = TableReader::open(dir, "plants.csv")?;
    let mut plants = Vec::new();
    {
        let cols: Result<Vec<usize>, GepError> = [
            "id",
            "thermal",
            "gas_fired",
            "c_inv",
            "c_dec",
            "c_fix",
            "c_var",
            "c_fuel",
            "heat_rate",
            "capture_rate",
            "u_prod",
            "l_prod",
            "u_ramp",
        ]
        .iter()
        .map(|c| plants_table.column(c))
        .collect();
        let cols = cols?;
        for (row, record) in plants_table.records.iter().enumerate() {
            plants.push(PlantType {
                id: record[cols[0]].clone(),
                thermal: plants_table.flag(record, cols[1], row)?,
                gas_fired: plants_table.flag(record, cols[2], row)?,
                c_inv: plants_table.number(record, cols[3], row)?,
                c_dec: plants_table.number(record, cols[4], row)?,
                c_fix: plants_table.number(record, cols[5], row)?,
                c_var: plants_table.number(record, cols[6], row)?,
                c_fuel: plants_table.number(record, cols[7], row)?,
                heat_rate: plants_table.number(record, cols[8], row)?,
                capture_rate: plants_table.number(record, cols[9], row)?,
                u_prod: plants_table.number(record, cols[10], row)?,
                l_prod: plants_table.number(record, cols[11], row)?,
                u_ramp: plants_table.number(record, cols[12], row)?,
            });
        }
    }

    let storage_table = TableReader::open(dir, "storage.csv")?;
    let mut storages = Vec::new();
    {
        let cols: Result<Vec<usize>, GepError> =
            ["id", "c_en_inv", "c_p_inv", "c_en_fix", "c_p_fix", "gamma_ch", "gamma_dis"]
                .iter()
                .map(|c| storage_table.column(c))
                .collect();
        let cols = cols?;
        for (row, record) in storage_table.records.iter().enumerate() {
            storages.push(StorageType {
                id: record[cols[0]].clone(),
                c_en_inv: storage_table.number(record, cols[1], row)?,
                c_p_inv: storage_table.number(record, cols[2], row)?,
                c_en_fix: storage_table.number(record, cols[3], row)?,
                c_p_fix: storage_table.number(record, cols[4], row)?,
                gamma_ch: storage_table.number(record, cols[5], row)?,
                gamma_dis: storage_table.number(record, cols[6], row)?,
            });
        }
    }

    let ng_index = |id: &str| -> Result<usize, GepError> {
        ng_nodes
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| table_err("pipelines.csv", format!("unknown gas node {:?}", id)))
    };
    let pipes_table = TableReader::open(dir, "pipelines.csv")?;
    let mut pipelines = Vec::new();
    {
        let cols: Result<Vec<usize>, GepError> =
            ["id", "from", "to", "existing", "capacity", "max_capacity", "cost"]
                .iter()
                .map(|c| pipes_table.column(c))
                .collect();
        let cols = cols?;
        for (row, record) in pipes_table.records.iter().enumerate() {
            pipelines.push(Pipeline {
                id: record[cols[0]].clone(),
                from: ng_index(&record[cols[1]])?,
                to: ng_index(&record[cols[2]])?,
                existing: pipes_table.flag(record, cols[3], row)?,
                capacity: pipes_table.number(record, cols[4], row)?,
                max_capacity: pipes_table.number(record, cols[5], row)?,
                cost: pipes_table.number(record, cols[6], row)?,
            });
        }
    }

    let links_table = TableReader::open(dir, "links.csv")?;
    let mut links = Vec::new();
    {
        let kc = links_table.column("ng_node")?;
        let nc = links_table.column("power_node")?;
        for record in &links_table.records {
            let k = ng_nodes
                .iter()
                .position(|n| *n == record[kc])
                .ok_or_else(|| table_err("links.csv", format!("unknown gas node {:?}", record[kc])))?;
            let n = power_nodes
                .iter()
                .position(|p| *p == record[nc])
                .ok_or_else(|| {
                    table_err("links.csv", format!("unknown power node {:?}", record[nc]))
                })?;
            links.push((k, n));
        }
    }

    let initial_table = TableReader::open(dir, "initial_plants.csv")?;
    let mut initial_plants = vec![vec![0.0; plants.len()]; power_nodes.len()];
    let mut max_new_plants = vec![vec![0.0; plants.len()]; power_nodes.len()];
    {
        let nc = initial_table.column("node_id")?;
        let pc = initial_table.column("plant_id")?;
        let cc = initial_table.column("count")?;
        let mc = initial_table.column("max_new")?;
        for (row, record) in initial_table.records.iter().enumerate() {
            let n = power_nodes
                .iter()
                .position(|p| *p == record[nc])
                .ok_or_else(|| {
                    table_err("initial_plants.csv", format!("unknown node {:?}", record[nc]))
                })?;
            let i = plants
                .iter()
                .position(|p| p.id == record[pc])
                .ok_or_else(|| {
                    table_err("initial_plants.csv", format!("unknown plant {:?}", record[pc]))
                })?;
            initial_plants[n][i] = initial_table.number(record, cc, row)?;
            max_new_plants[n][i] = initial_table.number(record, mc, row)?;
        }
    }

    let injection_table = TableReader::open(dir, "injection.csv")?;
    let mut injection_lower = vec![0.0; ng_nodes.len()];
    let mut injection_upper = vec![0.0; ng_nodes.len()];
    {
        let nc = injection_table.column("node_id")?;
        let lc = injection_table.column("l_inj")?;
        let uc = injection_table.column("u_inj")?;
        for (row, record) in injection_table.records.iter().enumerate() {
            let k = ng_nodes
                .iter()
                .position(|n| *n == record[nc])
                .ok_or_else(|| table_err("injection.csv", format!("unknown node {:?}", record[nc])))?;
            injection_lower[k] = injection_table.number(record, lc, row)?;
            injection_upper[k] = injection_table.number(record, uc, row)?;
        }
    }

    let hours = manifest.days * manifest.hours_per_day;
    let demand_power = read_series(dir, "demand_power.csv", &power_nodes, hours)?;
    let demand_gas = read_series(dir, "demand_gas.csv", &ng_nodes, manifest.days)?;

    let cf_table = TableReader::open(dir, "cf.csv")?;
    let mut capacity_factor = BTreeMap::new();
    {
        let nc = cf_table.column("node_id")?;
        let pc = cf_table.column("plant_id")?;
        for (row, record) in cf_table.records.iter().enumerate() {
            let n = power_nodes
                .iter()
                .position(|p| *p == record[nc])
                .ok_or_else(|| table_err("cf.csv", format!("unknown node {:?}", record[nc])))?;
            let i = plants
                .iter()
                .position(|p| p.id == record[pc])
                .ok_or_else(|| table_err("cf.csv", format!("unknown plant {:?}", record[pc])))?;
            if record.len() != hours + 2 {
                return Err(table_err(
                    "cf.csv",
                    format!("row {}: expected {} samples", row + 2, hours),
                ));
            }
            let mut series = Vec::with_capacity(hours);
            for c in 0..hours {
                series.push(cf_table.number(record, c + 2, row)?);
            }
            capacity_factor.insert((n, i), series);
        }
    }

    let instance = GepInstance {
        name: manifest.name,
        power_nodes,
        ng_nodes,
        days: manifest.days,
        hours_per_day: manifest.hours_per_day,
        plants,
        storages,
        pipelines,
        links,
        demand_power,
        demand_gas,
        capacity_factor,
        initial_plants,
        max_new_plants,
        injection_lower,
        injection_upper,
        cost_shed_power: manifest.cost_shed_power,
        cost_ng: manifest.cost_ng,
        cost_rng: manifest.cost_rng,
        cost_shed_gas: manifest.cost_shed_gas,
        emission_factor_ng: manifest.emission_factor_ng,
        emission_cap_power: manifest.emission_cap_power,
        emission_cap_gas: manifest.emission_cap_gas,
        emission_reduction: manifest.emission_reduction,
        rps: manifest.rps,
        rep: manifest.rep,
    };
    instance.validate()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::testutil::small_instance;

    #[test]
    fn instance_roundtrips_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance();
        save_instance_dir(&inst, dir.path()).unwrap();
        let loaded = load_instance_dir(dir.path()).unwrap();
        assert_eq!(inst, loaded);
    }

    #[test]
    fn missing_table_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance();
        save_instance_dir(&inst, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("injection.csv")).unwrap();
        match load_instance_dir(dir.path()) {
            Err(GepError::MissingTable(t)) => assert_eq!(t, "injection.csv"),
            other => panic!("expected missing table, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn bad_cell_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let inst = small_instance();
        save_instance_dir(&inst, dir.path()).unwrap();
        let path = dir.path().join("injection.csv");
        let text = std::fs::read_to_string(&path).unwrap().replace("5000", "oops");
        std::fs::write(&path, text).unwrap();
        match load_instance_dir(dir.path()) {
            Err(GepError::Table { table, detail }) => {
                assert_eq!(table, "injection.csv");
                assert!(detail.contains("row 2"), "{detail}");
            }
            other => panic!("expected table error, got {:?}", other.map(|_| ())),
        }
    }
}
