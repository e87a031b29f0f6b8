//! Decompose the planning MILP into the generic two-class block form:
//! per-class investment/operational variables and constraint blocks plus
//! the coupling rows that tie the classes together.

use crate::milp::{MilpProblem, Row, Sense};

use super::builder::build_gep;
use super::instance::{GepError, GepInstance};

/// A constraint row expressed over (class, local column) references;
/// coupling rows may span classes.
#[derive(Debug, Clone)]
pub struct GenericRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub terms: Vec<(usize, usize, f64)>,
}

/// One node class: its variables (investment first, then operational, in
/// build order) and its own constraint rows.
#[derive(Debug, Clone)]
pub struct ClassBlock {
    pub name: String,
    pub vars: Vec<crate::milp::Variable>,
    pub rows: Vec<GenericRow>,
    /// Integer investment dimensions (the `p^s` of the integrality split).
    pub integer_investment: usize,
    /// Continuous investment dimensions (`q^s`).
    pub continuous_investment: usize,
    /// Operational dimensions (`l^s`).
    pub operational: usize,
}

/// The generic heterogeneous-node structure: class blocks plus coupling.
#[derive(Debug, Clone)]
pub struct GenericCephn {
    pub classes: Vec<ClassBlock>,
    pub coupling: Vec<GenericRow>,
    name: String,
}

const POWER_INVESTMENT: &[&str] = &["xop", "xest", "xdec", "ycd", "ylev"];
const POWER_OPERATIONAL: &[&str] = &["p", "ae", "sch", "sdis", "slev"];
const GAS_INVESTMENT: &[&str] = &["zg"];
const GAS_OPERATIONAL: &[&str] = &["fg", "g", "arng", "ag", "fge"];

fn family(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

fn var_class(name: &str) -> Option<usize> {
    let fam = family(name);
    if POWER_INVESTMENT.contains(&fam) || POWER_OPERATIONAL.contains(&fam) {
        Some(0)
    } else if GAS_INVESTMENT.contains(&fam) || GAS_OPERATIONAL.contains(&fam) {
        Some(1)
    } else {
        None
    }
}

fn is_investment(name: &str) -> bool {
    let fam = family(name);
    POWER_INVESTMENT.contains(&fam) || GAS_INVESTMENT.contains(&fam)
}

fn row_class(name: &str) -> Option<usize> {
    if name.starts_with("coup_") {
        None
    } else if name.starts_with("elec_") {
        Some(0)
    } else if name.starts_with("ng_") {
        Some(1)
    } else {
        None
    }
}

/// Map an instance onto the generic form by building its MILP and
/// classifying variables and rows. Errors if a per-class row touches the
/// other class (the blocks would not be separable).
pub fn to_generic(instance: &GepInstance) -> Result<GenericCephn, GepError> {
    let built = build_gep(instance)?;
    from_milp(&built.problem)
}

fn from_milp(problem: &MilpProblem) -> Result<GenericCephn, GepError> {
    let mut classes = vec![
        ClassBlock {
            name: "power".into(),
            vars: Vec::new(),
            rows: Vec::new(),
            integer_investment: 0,
            continuous_investment: 0,
            operational: 0,
        },
        ClassBlock {
            name: "gas".into(),
            vars: Vec::new(),
            rows: Vec::new(),
            integer_investment: 0,
            continuous_investment: 0,
            operational: 0,
        },
    ];
    // (class, local index) per global column.
    let mut locator = Vec::with_capacity(problem.n_vars());
    for var in problem.vars() {
        let Some(class) = var_class(&var.name) else {
            return Err(GepError::Build(format!(
                "variable {:?} belongs to no class",
                var.name
            )));
        };
        let block = &mut classes[class];
        locator.push((class, block.vars.len()));
        if is_investment(&var.name) {
            if var.integer {
                block.integer_investment += 1;
            } else {
                block.continuous_investment += 1;
            }
        } else {
            block.operational += 1;
        }
        block.vars.push(var.clone());
    }

    let convert = |row: &Row| GenericRow {
        name: row.name.clone(),
        sense: row.sense,
        rhs: row.rhs,
        terms: row
            .coeffs
            .iter()
            .map(|&(j, a)| {
                let (class, local) = locator[j];
                (class, local, a)
            })
            .collect(),
    };

    let mut coupling = Vec::new();
    for row in problem.rows() {
        match row_class(&row.name) {
            None => coupling.push(convert(row)),
            Some(class) => {
                let generic = convert(row);
                if generic.terms.iter().any(|&(c, _, _)| c != class) {
                    return Err(GepError::Build(format!(
                        "row {:?} crosses class boundaries outside the coupling block",
                        row.name
                    )));
                }
                classes[class].rows.push(generic);
            }
        }
    }

    Ok(GenericCephn {
        classes,
        coupling,
        name: problem.name.clone(),
    })
}

impl GenericCephn {
    /// Reassemble the MILP: class variables in class order, then class
    /// rows, then coupling rows. Structurally identical (by names) to the
    /// MILP the decomposition came from.
    pub fn to_milp(&self) -> MilpProblem {
        let mut p = MilpProblem::new(self.name.clone());
        let mut global: Vec<Vec<usize>> = Vec::new();
        for block in &self.classes {
            let mut ids = Vec::with_capacity(block.vars.len());
            for var in &block.vars {
                ids.push(p.add_var(var.name.clone(), var.lb, var.ub, var.integer, var.obj));
            }
            global.push(ids);
        }
        for block in &self.classes {
            for row in &block.rows {
                let coeffs = row
                    .terms
                    .iter()
                    .map(|&(c, l, a)| (global[c][l], a))
                    .collect();
                p.add_row(row.name.clone(), row.sense, row.rhs, coeffs);
            }
        }
        for row in &self.coupling {
            let coeffs = row
                .terms
                .iter()
                .map(|&(c, l, a)| (global[c][l], a))
                .collect();
            p.add_row(row.name.clone(), row.sense, row.rhs, coeffs);
        }
        p
    }

    /// Investment-cost vector `f^s` of one class.
    pub fn investment_costs(&self, class: usize) -> Vec<f64> {
        self.classes[class]
            .vars
            .iter()
            .filter(|v| is_investment(&v.name))
            .map(|v| v.obj)
            .collect()
    }

    /// Operational-cost vector of one class.
    pub fn operational_costs(&self, class: usize) -> Vec<f64> {
        self.classes[class]
            .vars
            .iter()
            .filter(|v| !is_investment(&v.name))
            .map(|v| v.obj)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::testutil::{small_instance, zero_demand_instance};

    #[test]
    fn roundtrip_is_structurally_identical() {
        let inst = small_instance();
        let built = build_gep(&inst).unwrap();
        let generic = to_generic(&inst).unwrap();
        let rebuilt = generic.to_milp();
        built.problem.structurally_eq(&rebuilt, 0.0).unwrap();
    }

    #[test]
    fn class_blocks_never_mix_variables() {
        let generic = to_generic(&small_instance()).unwrap();
        assert_eq!(generic.classes.len(), 2);
        for (c, block) in generic.classes.iter().enumerate() {
            for row in &block.rows {
                assert!(row.terms.iter().all(|&(rc, _, _)| rc == c));
            }
        }
        // The integrality split is populated.
        assert!(generic.classes[0].integer_investment > 0);
        assert!(generic.classes[0].continuous_investment > 0);
        assert!(generic.classes[0].operational > 0);
        assert_eq!(generic.classes[1].integer_investment, 1); // one candidate line
    }

    #[test]
    fn coupling_contains_exactly_the_coupling_families() {
        let generic = to_generic(&small_instance()).unwrap();
        assert!(!generic.coupling.is_empty());
        for row in &generic.coupling {
            assert!(row.name.starts_with("coup_"));
        }
        // Gas burn and emissions tie both classes together: some coupling
        // row references each class.
        let touches = |class: usize| {
            generic
                .coupling
                .iter()
                .any(|row| row.terms.iter().any(|&(c, _, _)| c == class))
        };
        assert!(touches(0) && touches(1));
    }

    #[test]
    fn coupling_rows_exist_even_for_degenerate_instances() {
        // Zero demand still emits the structural coupling rows.
        let generic = to_generic(&zero_demand_instance()).unwrap();
        let n = generic.classes[0].rows.len() + generic.classes[1].rows.len();
        assert!(n > 0);
        assert!(generic.coupling.iter().any(|r| r.name == "coup_2"));
    }
}
