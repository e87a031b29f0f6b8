//! Build the planning MILP from an instance.
//!
//! Both systems are modeled on the representative days only, with every
//! operational objective term weighted by its representative weight, so
//! the aggregated objective equals the full one whenever the days inside
//! each cluster are identical. Power balance is system-wide per hour
//! (copper plate). Ramping and storage dynamics wrap within each
//! representative day: the predecessor of a day's first hour is its last
//! hour, so representative days stay self-contained.
//!
//! Variable and row names are `kind[indices]` with numeric indices in a
//! fixed order, so two builds of the same instance are identical and
//! builds of structurally-equal instances compare row-for-row.

use crate::milp::{MilpProblem, Sense};

use super::instance::{GepError, GepInstance};

/// Column handles for the variable blocks of a built model.
pub struct GepVariables {
    pub x_op: Vec<Vec<usize>>,
    pub x_est: Vec<Vec<usize>>,
    pub x_dec: Vec<Vec<usize>>,
    pub y_cd: Vec<Vec<usize>>,
    pub y_lev: Vec<Vec<usize>>,
    /// One binary per candidate pipeline, indexed like
    /// `instance.pipelines` (None for existing lines).
    pub z_pipe: Vec<Option<usize>>,
    /// p[(n, rep_pos, h, i)] in row-major n, rep, h, i order.
    pub production: Vec<usize>,
    pub shed_power: Vec<usize>,
    pub charge: Vec<usize>,
    pub discharge: Vec<usize>,
    pub level: Vec<usize>,
    pub flow_gas: Vec<usize>,
    pub supply: Vec<usize>,
    pub rng: Vec<usize>,
    pub shed_gas: Vec<usize>,
    pub flow_gas_power: Vec<usize>,
}

pub struct BuiltGep {
    pub problem: MilpProblem,
    pub vars: GepVariables,
}

struct Dims {
    n_plants: usize,
    n_storage: usize,
    n_rep: usize,
    hpd: usize,
}

impl GepVariables {
    fn dims(inst: &GepInstance) -> Dims {
        Dims {
            n_plants: inst.plants.len(),
            n_storage: inst.storages.len(),
            n_rep: inst.rep.medoid_days.len(),
            hpd: inst.hours_per_day,
        }
    }

    pub fn p(&self, d: &GepInstance, n: usize, rep: usize, h: usize, i: usize) -> usize {
        let dims = Self::dims(d);
        self.production
            [((n * dims.n_rep + rep) * dims.hpd + h) * dims.n_plants + i]
    }

    pub fn ae(&self, d: &GepInstance, n: usize, rep: usize, h: usize) -> usize {
        let dims = Self::dims(d);
        self.shed_power[(n * dims.n_rep + rep) * dims.hpd + h]
    }

    fn storage_idx(&self, d: &GepInstance, n: usize, rep: usize, h: usize, r: usize) -> usize {
        let dims = Self::dims(d);
        ((n * dims.n_rep + rep) * dims.hpd + h) * dims.n_storage + r
    }

    pub fn s_ch(&self, d: &GepInstance, n: usize, rep: usize, h: usize, r: usize) -> usize {
        self.charge[self.storage_idx(d, n, rep, h, r)]
    }

    pub fn s_dis(&self, d: &GepInstance, n: usize, rep: usize, h: usize, r: usize) -> usize {
        self.discharge[self.storage_idx(d, n, rep, h, r)]
    }

    pub fn s_lev(&self, d: &GepInstance, n: usize, rep: usize, h: usize, r: usize) -> usize {
        self.level[self.storage_idx(d, n, rep, h, r)]
    }

    pub fn fg(&self, d: &GepInstance, pipe: usize, rep: usize) -> usize {
        let dims = Self::dims(d);
        self.flow_gas[pipe * dims.n_rep + rep]
    }

    pub fn g(&self, d: &GepInstance, k: usize, rep: usize) -> usize {
        let dims = Self::dims(d);
        self.supply[k * dims.n_rep + rep]
    }

    pub fn a_rng(&self, d: &GepInstance, k: usize, rep: usize) -> usize {
        let dims = Self::dims(d);
        self.rng[k * dims.n_rep + rep]
    }

    pub fn a_gas(&self, d: &GepInstance, k: usize, rep: usize) -> usize {
        let dims = Self::dims(d);
        self.shed_gas[k * dims.n_rep + rep]
    }

    pub fn fge(&self, d: &GepInstance, link: usize, rep: usize) -> usize {
        let dims = Self::dims(d);
        self.flow_gas_power[link * dims.n_rep + rep]
    }
}

/// Build the full MILP for `instance` under its representative-day
/// structure. Thermal plant counts are integer; VRE counts, storage
/// sizing, and all operational variables are continuous; candidate
/// pipelines are binary.
pub fn build_gep(instance: &GepInstance) -> Result<BuiltGep, GepError> {
    instance.validate()?;
    let inst = instance;
    let mut p = MilpProblem::new(inst.name.clone());

    let n_power = inst.power_nodes.len();
    let n_gas = inst.ng_nodes.len();
    let n_plants = inst.plants.len();
    let n_storage = inst.storages.len();
    let reps = inst.rep.medoid_days.clone();
    let hpd = inst.hours_per_day;
    let days = inst.days;

    // --- investment variables ---
    let mut x_op = vec![vec![0usize; n_plants]; n_power];
    let mut x_est = vec![vec![0usize; n_plants]; n_power];
    let mut x_dec = vec![vec![0usize; n_plants]; n_power];
    for n in 0..n_power {
        for (i, plant) in inst.plants.iter().enumerate() {
            let cap = inst.initial_plants[n][i] + inst.max_new_plants[n][i];
            x_op[n][i] = p.add_var(
                format!("xop[{},{}]", n, i),
                0.0,
                cap,
                plant.thermal,
                plant.c_fix,
            );
        }
    }
    for n in 0..n_power {
        for (i, plant) in inst.plants.iter().enumerate() {
            x_est[n][i] = p.add_var(
                format!("xest[{},{}]", n, i),
                0.0,
                inst.max_new_plants[n][i],
                plant.thermal,
                plant.c_inv,
            );
        }
    }
    for n in 0..n_power {
        for (i, plant) in inst.plants.iter().enumerate() {
            x_dec[n][i] = p.add_var(
                format!("xdec[{},{}]", n, i),
                0.0,
                inst.initial_plants[n][i],
                plant.thermal,
                plant.c_dec,
            );
        }
    }
    let mut y_cd = vec![vec![0usize; n_storage]; n_power];
    let mut y_lev = vec![vec![0usize; n_storage]; n_power];
    for n in 0..n_power {
        for (r, storage) in inst.storages.iter().enumerate() {
            y_cd[n][r] = p.add_var(
                format!("ycd[{},{}]", n, r),
                0.0,
                f64::INFINITY,
                false,
                storage.c_p_inv + storage.c_p_fix,
            );
        }
    }
    for n in 0..n_power {
        for (r, storage) in inst.storages.iter().enumerate() {
            y_lev[n][r] = p.add_var(
                format!("ylev[{},{}]", n, r),
                0.0,
                f64::INFINITY,
                false,
                storage.c_en_inv + storage.c_en_fix,
            );
        }
    }
    let z_pipe: Vec<Option<usize>> = inst
        .pipelines
        .iter()
        .enumerate()
        .map(|(l, pipe)| {
            (!pipe.existing)
                .then(|| p.add_var(format!("zg[{}]", l), 0.0, 1.0, true, pipe.cost))
        })
        .collect();

    // --- operational variables: power side over representative days ---
    let mut production = Vec::with_capacity(n_power * reps.len() * hpd * n_plants);
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            let w = inst.rep.weights[rep];
            for h in 0..hpd {
                for (i, plant) in inst.plants.iter().enumerate() {
                    production.push(p.add_var(
                        format!("p[{},{},{},{}]", n, day, h, i),
                        0.0,
                        f64::INFINITY,
                        false,
                        w * (plant.c_var + plant.c_fuel * plant.heat_rate),
                    ));
                }
            }
        }
    }
    let mut shed_power = Vec::with_capacity(n_power * reps.len() * hpd);
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            let w = inst.rep.weights[rep];
            for h in 0..hpd {
                shed_power.push(p.add_var(
                    format!("ae[{},{},{}]", n, day, h),
                    0.0,
                    f64::INFINITY,
                    false,
                    w * inst.cost_shed_power,
                ));
            }
        }
    }
    let mut charge = Vec::new();
    let mut discharge = Vec::new();
    let mut level = Vec::new();
    for (kind, out) in [("sch", &mut charge), ("sdis", &mut discharge), ("slev", &mut level)] {
        for n in 0..n_power {
            for &day in &reps {
                for h in 0..hpd {
                    for r in 0..n_storage {
                        out.push(p.add_var(
                            format!("{}[{},{},{},{}]", kind, n, day, h, r),
                            0.0,
                            f64::INFINITY,
                            false,
                            0.0,
                        ));
                    }
                }
            }
        }
    }

    // --- operational variables: gas side over representative days ---
    let mut flow_gas = Vec::with_capacity(inst.pipelines.len() * reps.len());
    for l in 0..inst.pipelines.len() {
        for &day in &reps {
            flow_gas.push(p.add_var(format!("fg[{},{}]", l, day), 0.0, f64::INFINITY, false, 0.0));
        }
    }
    let mut supply = Vec::with_capacity(n_gas * reps.len());
    for k in 0..n_gas {
        for (rep, &day) in reps.iter().enumerate() {
            supply.push(p.add_var(
                format!("g[{},{}]", k, day),
                0.0,
                f64::INFINITY,
                false,
                inst.rep.weights[rep] * inst.cost_ng,
            ));
        }
    }
    let mut rng = Vec::with_capacity(n_gas * reps.len());
    for k in 0..n_gas {
        for (rep, &day) in reps.iter().enumerate() {
            rng.push(p.add_var(
                format!("arng[{},{}]", k, day),
                0.0,
                f64::INFINITY,
                false,
                inst.rep.weights[rep] * inst.cost_rng,
            ));
        }
    }
    let mut shed_gas = Vec::with_capacity(n_gas * reps.len());
    for k in 0..n_gas {
        for (rep, &day) in reps.iter().enumerate() {
            shed_gas.push(p.add_var(
                format!("ag[{},{}]", k, day),
                0.0,
                f64::INFINITY,
                false,
                inst.rep.weights[rep] * inst.cost_shed_gas,
            ));
        }
    }
    let mut flow_gas_power = Vec::with_capacity(inst.links.len() * reps.len());
    for &(k, n) in inst.links.iter() {
        for &day in &reps {
            flow_gas_power.push(p.add_var(
                format!("fge[{},{},{}]", k, n, day),
                0.0,
                f64::INFINITY,
                false,
                0.0,
            ));
        }
    }
    let _ = days;

    let vars = GepVariables {
        x_op,
        x_est,
        x_dec,
        y_cd,
        y_lev,
        z_pipe,
        production,
        shed_power,
        charge,
        discharge,
        level,
        flow_gas,
        supply,
        rng,
        shed_gas,
        flow_gas_power,
    };

    // --- rows ---
    // Investment balance: operating = initial - decommissioned + new.
    for n in 0..n_power {
        for i in 0..n_plants {
            p.add_row(
                format!("elec_c1[{},{}]", n, i),
                Sense::Eq,
                inst.initial_plants[n][i],
                vec![
                    (vars.x_op[n][i], 1.0),
                    (vars.x_est[n][i], -1.0),
                    (vars.x_dec[n][i], 1.0),
                ],
            );
        }
    }

    // Thermal generation limits.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                for (i, plant) in inst.plants.iter().enumerate() {
                    if !plant.thermal {
                        continue;
                    }
                    let pv = vars.p(inst, n, rep, h, i);
                    p.add_row(
                        format!("elec_c4_lo[{},{},{},{}]", n, day, h, i),
                        Sense::Ge,
                        0.0,
                        vec![(pv, 1.0), (vars.x_op[n][i], -plant.l_prod * plant.u_prod)],
                    );
                    p.add_row(
                        format!("elec_c4_up[{},{},{},{}]", n, day, h, i),
                        Sense::Le,
                        0.0,
                        vec![(pv, 1.0), (vars.x_op[n][i], -plant.u_prod)],
                    );
                }
            }
        }
    }

    // Ramping for thermal plants; the first hour wraps to the day's last.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                let prev_h = if h == 0 { hpd - 1 } else { h - 1 };
                for (i, plant) in inst.plants.iter().enumerate() {
                    if !plant.thermal {
                        continue;
                    }
                    let rate = (plant.u_ramp + plant.l_prod.max(plant.u_ramp)) * plant.u_prod;
                    let now = vars.p(inst, n, rep, h, i);
                    let prev = vars.p(inst, n, rep, prev_h, i);
                    // Single-hour days merge `now` and `prev` away.
                    p.add_row(
                        format!("elec_c5_up[{},{},{},{}]", n, day, h, i),
                        Sense::Le,
                        0.0,
                        vec![(now, 1.0), (prev, -1.0), (vars.x_op[n][i], -rate)],
                    );
                    p.add_row(
                        format!("elec_c5_lo[{},{},{},{}]", n, day, h, i),
                        Sense::Le,
                        0.0,
                        vec![(prev, 1.0), (now, -1.0), (vars.x_op[n][i], -rate)],
                    );
                }
            }
        }
    }

    // VRE output capped by the hourly capacity factor.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                for (i, plant) in inst.plants.iter().enumerate() {
                    if plant.thermal {
                        continue;
                    }
                    let cf = inst.capacity_factor[&(n, i)][inst.hour_index(day, h)];
                    p.add_row(
                        format!("elec_c6[{},{},{},{}]", n, day, h, i),
                        Sense::Le,
                        0.0,
                        vec![
                            (vars.p(inst, n, rep, h, i), 1.0),
                            (vars.x_op[n][i], -cf * plant.u_prod),
                        ],
                    );
                }
            }
        }
    }

    // Load shedding bounded by demand.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                p.add_row(
                    format!("elec_c7[{},{},{}]", n, day, h),
                    Sense::Le,
                    inst.demand_power[n][inst.hour_index(day, h)],
                    vec![(vars.ae(inst, n, rep, h), 1.0)],
                );
            }
        }
    }

    // System-wide balance per representative hour.
    for (rep, &day) in reps.iter().enumerate() {
        for h in 0..hpd {
            let mut coeffs = Vec::new();
            let mut rhs = 0.0;
            for n in 0..n_power {
                rhs += inst.demand_power[n][inst.hour_index(day, h)];
                for i in 0..n_plants {
                    coeffs.push((vars.p(inst, n, rep, h, i), 1.0));
                }
                for r in 0..n_storage {
                    coeffs.push((vars.s_dis(inst, n, rep, h, r), 1.0));
                    coeffs.push((vars.s_ch(inst, n, rep, h, r), -1.0));
                }
                coeffs.push((vars.ae(inst, n, rep, h), 1.0));
            }
            p.add_row(format!("elec_c8[{},{}]", day, h), Sense::Eq, rhs, coeffs);
        }
    }

    // Storage dynamics (cyclic within the day), power/energy caps, and
    // matching first/last levels.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                let prev_h = if h == 0 { hpd - 1 } else { h - 1 };
                for (r, storage) in inst.storages.iter().enumerate() {
                    let lev = vars.s_lev(inst, n, rep, h, r);
                    let prev = vars.s_lev(inst, n, rep, prev_h, r);
                    // Single-hour days cancel the level terms, pinning the
                    // net charge to zero.
                    p.add_row(
                        format!("elec_c15[{},{},{},{}]", n, day, h, r),
                        Sense::Eq,
                        0.0,
                        vec![
                            (lev, 1.0),
                            (prev, -1.0),
                            (vars.s_ch(inst, n, rep, h, r), -storage.gamma_ch),
                            (vars.s_dis(inst, n, rep, h, r), 1.0 / storage.gamma_dis),
                        ],
                    );
                }
            }
        }
    }
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for h in 0..hpd {
                for r in 0..n_storage {
                    p.add_row(
                        format!("elec_c16_dis[{},{},{},{}]", n, day, h, r),
                        Sense::Le,
                        0.0,
                        vec![(vars.s_dis(inst, n, rep, h, r), 1.0), (vars.y_cd[n][r], -1.0)],
                    );
                    p.add_row(
                        format!("elec_c16_ch[{},{},{},{}]", n, day, h, r),
                        Sense::Le,
                        0.0,
                        vec![(vars.s_ch(inst, n, rep, h, r), 1.0), (vars.y_cd[n][r], -1.0)],
                    );
                    p.add_row(
                        format!("elec_c17[{},{},{},{}]", n, day, h, r),
                        Sense::Le,
                        0.0,
                        vec![(vars.s_lev(inst, n, rep, h, r), 1.0), (vars.y_lev[n][r], -1.0)],
                    );
                }
            }
        }
    }
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            for r in 0..n_storage {
                let first = vars.s_lev(inst, n, rep, 0, r);
                let last = vars.s_lev(inst, n, rep, hpd - 1, r);
                let coeffs = if first == last {
                    vec![]
                } else {
                    vec![(first, 1.0), (last, -1.0)]
                };
                p.add_row(
                    format!("elec_c18_2[{},{},{}]", n, day, r),
                    Sense::Eq,
                    0.0,
                    coeffs,
                );
            }
        }
    }

    // Renewable portfolio standard over the representative hours.
    {
        let mut coeffs = Vec::new();
        let mut demand_total = 0.0;
        for n in 0..n_power {
            for (rep, &day) in reps.iter().enumerate() {
                for h in 0..hpd {
                    demand_total += inst.demand_power[n][inst.hour_index(day, h)];
                    for (i, plant) in inst.plants.iter().enumerate() {
                        if !plant.thermal {
                            coeffs.push((vars.p(inst, n, rep, h, i), 1.0));
                        }
                    }
                }
            }
        }
        p.add_row("elec_c18", Sense::Ge, inst.rps * demand_total, coeffs);
    }

    // Gas balance per node and representative day.
    for k in 0..n_gas {
        for (rep, &day) in reps.iter().enumerate() {
            let mut coeffs = vec![(vars.g(inst, k, rep), 1.0)];
            for (l, pipe) in inst.pipelines.iter().enumerate() {
                if pipe.from == k {
                    coeffs.push((vars.fg(inst, l, rep), -1.0));
                }
                if pipe.to == k {
                    coeffs.push((vars.fg(inst, l, rep), 1.0));
                }
            }
            for (link, &(lk, _)) in inst.links.iter().enumerate() {
                if lk == k {
                    coeffs.push((vars.fge(inst, link, rep), -1.0));
                }
            }
            coeffs.push((vars.a_rng(inst, k, rep), 1.0));
            coeffs.push((vars.a_gas(inst, k, rep), 1.0));
            p.add_row(
                format!("ng_c1[{},{}]", k, day),
                Sense::Eq,
                inst.demand_gas[k][day],
                coeffs,
            );
        }
    }

    // Supply limits, RNG/shed caps.
    for k in 0..n_gas {
        for (rep, &day) in reps.iter().enumerate() {
            p.add_row(
                format!("ng_c2_up[{},{}]", k, day),
                Sense::Le,
                inst.injection_upper[k],
                vec![(vars.g(inst, k, rep), 1.0)],
            );
            p.add_row(
                format!("ng_c2_lo[{},{}]", k, day),
                Sense::Ge,
                inst.injection_lower[k],
                vec![(vars.g(inst, k, rep), 1.0)],
            );
            p.add_row(
                format!("ng_c3[{},{}]", k, day),
                Sense::Le,
                inst.demand_gas[k][day],
                vec![(vars.a_rng(inst, k, rep), 1.0), (vars.a_gas(inst, k, rep), 1.0)],
            );
            p.add_row(
                format!("ng_c3_2[{},{}]", k, day),
                Sense::Le,
                inst.injection_upper[k],
                vec![(vars.a_rng(inst, k, rep), 1.0)],
            );
        }
    }

    // Pipeline flow limits: existing capacity or candidate build.
    for (l, pipe) in inst.pipelines.iter().enumerate() {
        for (rep, &day) in reps.iter().enumerate() {
            if pipe.existing {
                p.add_row(
                    format!("ng_c5[{},{}]", l, day),
                    Sense::Le,
                    pipe.capacity,
                    vec![(vars.fg(inst, l, rep), 1.0)],
                );
            } else {
                p.add_row(
                    format!("ng_c6[{},{}]", l, day),
                    Sense::Le,
                    0.0,
                    vec![
                        (vars.fg(inst, l, rep), 1.0),
                        (vars.z_pipe[l].unwrap(), -pipe.max_capacity),
                    ],
                );
            }
        }
    }

    // Gas drawn by gas-fired generation, per power node and medoid day.
    for n in 0..n_power {
        for (rep, &day) in reps.iter().enumerate() {
            let mut coeffs = Vec::new();
            for (link, &(_, ln)) in inst.links.iter().enumerate() {
                if ln == n {
                    coeffs.push((vars.fge(inst, link, rep), 1.0));
                }
            }
            for h in 0..hpd {
                for (i, plant) in inst.plants.iter().enumerate() {
                    if plant.gas_fired {
                        coeffs.push((vars.p(inst, n, rep, h, i), -plant.heat_rate));
                    }
                }
            }
            p.add_row(format!("coup_1[{},{}]", n, day), Sense::Eq, 0.0, coeffs);
        }
    }

    // System emissions cap: annualized power-side gas burn plus net gas-
    // side consumption (demand less RNG and shed), all weighted by the
    // representative weights.
    {
        let eta_g = inst.emission_factor_ng;
        let mut coeffs = Vec::new();
        for n in 0..n_power {
            for (rep, _) in reps.iter().enumerate() {
                let w = inst.rep.weights[rep];
                for h in 0..hpd {
                    for (i, plant) in inst.plants.iter().enumerate() {
                        if plant.gas_fired {
                            coeffs.push((
                                vars.p(inst, n, rep, h, i),
                                w * (1.0 - plant.capture_rate) * eta_g * plant.heat_rate,
                            ));
                        }
                    }
                }
            }
        }
        let mut gas_demand_total = 0.0;
        for k in 0..n_gas {
            for (rep, &day) in reps.iter().enumerate() {
                let w = inst.rep.weights[rep];
                gas_demand_total += w * inst.demand_gas[k][day];
                coeffs.push((vars.a_rng(inst, k, rep), -w * eta_g));
                coeffs.push((vars.a_gas(inst, k, rep), -w * eta_g));
            }
        }
        let cap = (1.0 - inst.emission_reduction)
            * (inst.emission_cap_power + inst.emission_cap_gas);
        p.add_row("coup_2", Sense::Le, cap - eta_g * gas_demand_total, coeffs);
    }

    Ok(BuiltGep { problem: p, vars })
}
