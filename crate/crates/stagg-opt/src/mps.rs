//! Fixed-format MPS files.
//!
//! Export mangles every name to an 8-character token (`R0000001`,
//! `C0000001`) and writes the reverse map to `<path>.names.csv`; import
//! restores the original names when that map sits next to the file, so
//! `import(export(m))` is structurally identical to `m`. Values use the
//! shortest round-trip decimal form. RANGES rows from foreign files are
//! split into explicit row pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::milp::{MilpProblem, Sense};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

fn parse_err(line: usize, detail: impl Into<String>) -> MpsError {
    MpsError::Parse {
        line,
        detail: detail.into(),
    }
}

const OBJ_ROW: &str = "COST";

fn mangle_col(i: usize) -> String {
    format!("C{:07}", i)
}

fn mangle_row(i: usize) -> String {
    format!("R{:07}", i)
}

fn fmt_value(v: f64) -> String {
    format!("{}", v)
}

/// Write `problem` in fixed-format MPS plus the name-mangling map.
pub fn export_mps(problem: &MilpProblem, path: &Path) -> Result<(), MpsError> {
    let mut out = String::new();
    writeln!(out, "NAME          {}", sanitize_name(&problem.name)).unwrap();

    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  {}", OBJ_ROW).unwrap();
    for (i, row) in problem.rows().iter().enumerate() {
        let kind = match row.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        writeln!(out, " {}  {}", kind, mangle_row(i)).unwrap();
    }

    // Column-major coefficient lists.
    let mut col_coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.n_vars()];
    for (r, row) in problem.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            col_coeffs[j].push((r, a));
        }
    }

    writeln!(out, "COLUMNS").unwrap();
    let mut in_integer_block = false;
    let mut marker_count = 0;
    for (j, var) in problem.vars().iter().enumerate() {
        if var.integer != in_integer_block {
            let kind = if var.integer { "'INTORG'" } else { "'INTEND'" };
            writeln!(
                out,
                "    MARKER{:04}                'MARKER'                 {}",
                marker_count, kind
            )
            .unwrap();
            marker_count += 1;
            in_integer_block = var.integer;
        }
        let col = mangle_col(j);
        if var.obj != 0.0 {
            writeln!(out, "    {:<8}  {:<8}  {}", col, OBJ_ROW, fmt_value(var.obj)).unwrap();
        }
        for &(r, a) in &col_coeffs[j] {
            writeln!(out, "    {:<8}  {:<8}  {}", col, mangle_row(r), fmt_value(a)).unwrap();
        }
    }
    if in_integer_block {
        writeln!(
            out,
            "    MARKER{:04}                'MARKER'                 'INTEND'",
            marker_count
        )
        .unwrap();
    }

    writeln!(out, "RHS").unwrap();
    for (i, row) in problem.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            writeln!(out, "    RHS       {:<8}  {}", mangle_row(i), fmt_value(row.rhs)).unwrap();
        }
    }

    writeln!(out, "BOUNDS").unwrap();
    for (j, var) in problem.vars().iter().enumerate() {
        let col = mangle_col(j);
        if var.lb == var.ub {
            writeln!(out, " FX BND       {:<8}  {}", col, fmt_value(var.lb)).unwrap();
            continue;
        }
        if var.lb.is_finite() {
            // The MPS default lower bound is 0; write others explicitly.
            if var.lb != 0.0 {
                writeln!(out, " LO BND       {:<8}  {}", col, fmt_value(var.lb)).unwrap();
            }
        } else {
            writeln!(out, " MI BND       {:<8}", col).unwrap();
        }
        if var.ub.is_finite() {
            writeln!(out, " UP BND       {:<8}  {}", col, fmt_value(var.ub)).unwrap();
        } else if var.integer {
            // Integer columns default to an upper bound of 1 in several
            // readers; make the intended infinity explicit.
            writeln!(out, " PL BND       {:<8}", col).unwrap();
        }
    }
    writeln!(out, "ENDATA").unwrap();

    std::fs::write(path, out)?;

    let mut map = std::fs::File::create(name_map_path(path))?;
    writeln!(map, "kind,mangled,original")?;
    writeln!(map, "problem,NAME,{}", problem.name)?;
    for (j, var) in problem.vars().iter().enumerate() {
        writeln!(map, "col,{},{}", mangle_col(j), var.name)?;
    }
    for (i, row) in problem.rows().iter().enumerate() {
        writeln!(map, "row,{},{}", mangle_row(i), row.name)?;
    }
    Ok(())
}

fn sanitize_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    cleaned.chars().take(8).collect()
}

fn name_map_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".names.csv");
    os.into()
}

struct PendingRow {
    name: String,
    sense: Sense,
    rhs: f64,
    range: Option<f64>,
    coeffs: Vec<(usize, f64)>,
}

/// Read a fixed-format MPS file. When `<path>.names.csv` exists (as
/// written by [`export_mps`]) the original names are restored.
pub fn import_mps(path: &Path) -> Result<MilpProblem, MpsError> {
    let text = std::fs::read_to_string(path)?;

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Ranges,
        Bounds,
        Done,
    }

    let mut name = String::from("imported");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<PendingRow> = Vec::new();
    let mut row_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut cols: Vec<(String, bool, f64, Option<f64>, Option<f64>)> = Vec::new(); // name, integer, obj, lb, ub
    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut integer_mode = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !indented {
            match tokens[0] {
                "NAME" => {
                    if let Some(n) = tokens.get(1) {
                        name = n.to_string();
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "RANGES" => {
                    section = Section::Ranges;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(parse_err(line, format!("unknown section {:?}", other))),
            }
        }
        match section {
            Section::None | Section::Done => {
                return Err(parse_err(line, "data before any section"))
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "ROWS lines need a type and a name"));
                }
                let row_name = tokens[1].to_string();
                match tokens[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(row_name);
                        }
                    }
                    kind => {
                        let sense = match kind {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            "E" => Sense::Eq,
                            other => {
                                return Err(parse_err(line, format!("unknown row type {:?}", other)))
                            }
                        };
                        if row_index.contains_key(&row_name) {
                            return Err(parse_err(line, format!("duplicate row {:?}", row_name)));
                        }
                        row_index.insert(row_name.clone(), rows.len());
                        rows.push(PendingRow {
                            name: row_name,
                            sense,
                            rhs: 0.0,
                            range: None,
                            coeffs: Vec::new(),
                        });
                    }
                }
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => integer_mode = true,
                        "'INTEND'" => integer_mode = false,
                        other => return Err(parse_err(line, format!("unknown marker {:?}", other))),
                    }
                    continue;
                }
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(parse_err(line, "COLUMNS lines need name then row/value pairs"));
                }
                let col_name = tokens[0].to_string();
                let j = *col_index.entry(col_name.clone()).or_insert_with(|| {
                    cols.push((col_name, integer_mode, 0.0, None, None));
                    cols.len() - 1
                });
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad number {:?}", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        cols[j].2 += value;
                    } else {
                        let Some(&r) = row_index.get(pair[0]) else {
                            return Err(parse_err(line, format!("unknown row {:?}", pair[0])));
                        };
                        rows[r].coeffs.push((j, value));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(parse_err(line, "RHS lines need a set name then row/value pairs"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad number {:?}", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue; // objective offset unsupported, ignore
                    }
                    let Some(&r) = row_index.get(pair[0]) else {
                        return Err(parse_err(line, format!("unknown row {:?}", pair[0])));
                    };
                    rows[r].rhs = value;
                }
            }
            Section::Ranges => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(parse_err(line, "RANGES lines need a set name then row/value pairs"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad number {:?}", pair[1])))?;
                    let Some(&r) = row_index.get(pair[0]) else {
                        return Err(parse_err(line, format!("unknown row {:?}", pair[0])));
                    };
                    rows[r].range = Some(value);
                }
            }
            Section::Bounds => {
                let kind = tokens[0];
                let needs_value = matches!(kind, "UP" | "LO" | "FX" | "UI" | "LI");
                let expected = if needs_value { 4 } else { 3 };
                if tokens.len() != expected {
                    return Err(parse_err(line, format!("bad {} bound line", kind)));
                }
                let Some(&j) = col_index.get(tokens[2]) else {
                    return Err(parse_err(line, format!("unknown column {:?}", tokens[2])));
                };
                let value = if needs_value {
                    tokens[3]
                        .parse::<f64>()
                        .map_err(|_| parse_err(line, format!("bad number {:?}", tokens[3])))?
                } else {
                    0.0
                };
                match kind {
                    "UP" | "UI" => cols[j].4 = Some(value),
                    "LO" | "LI" => cols[j].3 = Some(value),
                    "FX" => {
                        cols[j].3 = Some(value);
                        cols[j].4 = Some(value);
                    }
                    "MI" => cols[j].3 = Some(f64::NEG_INFINITY),
                    "PL" => cols[j].4 = Some(f64::INFINITY),
                    "BV" => {
                        cols[j].1 = true;
                        cols[j].3 = Some(0.0);
                        cols[j].4 = Some(1.0);
                    }
                    "FR" => {
                        cols[j].3 = Some(f64::NEG_INFINITY);
                        cols[j].4 = Some(f64::INFINITY);
                    }
                    other => return Err(parse_err(line, format!("unknown bound type {:?}", other))),
                }
            }
        }
    }
    if section != Section::Done {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }

    // Restore original names if the mangling map is present.
    let mut col_names: BTreeMap<String, String> = BTreeMap::new();
    let mut row_names: BTreeMap<String, String> = BTreeMap::new();
    let mut problem_name = name.clone();
    let map_path = name_map_path(path);
    if map_path.exists() {
        let map_text = std::fs::read_to_string(&map_path)?;
        for line in map_text.lines().skip(1) {
            let mut parts = line.splitn(3, ',');
            let (kind, mangled, original) = (
                parts.next().unwrap_or(""),
                parts.next().unwrap_or(""),
                parts.next().unwrap_or(""),
            );
            match kind {
                "col" => {
                    col_names.insert(mangled.to_string(), original.to_string());
                }
                "row" => {
                    row_names.insert(mangled.to_string(), original.to_string());
                }
                "problem" => problem_name = original.to_string(),
                _ => {}
            }
        }
    }

    let mut problem = MilpProblem::new(problem_name);
    for (col_name, integer, obj, lb, ub) in &cols {
        let lb = lb.unwrap_or(0.0);
        // MPS default: a UP bound with no LO keeps lb 0; missing UP is
        // +infinity.
        let ub = ub.unwrap_or(f64::INFINITY);
        let restored = col_names.get(col_name).cloned().unwrap_or_else(|| col_name.clone());
        problem.add_var(restored, lb, ub, *integer, *obj);
    }
    for row in &rows {
        let restored = row_names.get(&row.name).cloned().unwrap_or_else(|| row.name.clone());
        match (row.sense, row.range) {
            (sense, None) => {
                problem.add_row(restored, sense, row.rhs, row.coeffs.clone());
            }
            (Sense::Le, Some(r)) => {
                problem.add_row(restored.clone(), Sense::Le, row.rhs, row.coeffs.clone());
                problem.add_row(
                    format!("{}.rng", restored),
                    Sense::Ge,
                    row.rhs - r.abs(),
                    row.coeffs.clone(),
                );
            }
            (Sense::Ge, Some(r)) => {
                problem.add_row(restored.clone(), Sense::Ge, row.rhs, row.coeffs.clone());
                problem.add_row(
                    format!("{}.rng", restored),
                    Sense::Le,
                    row.rhs + r.abs(),
                    row.coeffs.clone(),
                );
            }
            (Sense::Eq, Some(r)) => {
                let (lo, hi) = if r >= 0.0 {
                    (row.rhs, row.rhs + r)
                } else {
                    (row.rhs + r, row.rhs)
                };
                problem.add_row(restored.clone(), Sense::Ge, lo, row.coeffs.clone());
                problem.add_row(format!("{}.rng", restored), Sense::Le, hi, row.coeffs.clone());
            }
        }
    }
    Ok(problem)
}

/// Write a `name,value` CSV for a solved variable assignment.
pub fn write_solution_csv(
    problem: &MilpProblem,
    values: &[f64],
    path: &Path,
) -> Result<(), MpsError> {
    let mut out = String::from("name,value\n");
    for (var, &v) in problem.vars().iter().zip(values) {
        writeln!(out, "{},{}", var.name, v).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch_bound::{solve_milp, SolverOptions};
    use crate::milp::SolveStatus;

    fn knapsack() -> MilpProblem {
        let mut p = MilpProblem::new("knapsack");
        let a = p.add_var("a", 0.0, 1.0, true, -10.0);
        let b = p.add_var("b", 0.0, 1.0, true, -6.0);
        let c = p.add_var("c", 0.0, 1.0, true, -4.0);
        p.add_row("cap[0]", Sense::Le, 2.0, vec![(a, 1.0), (b, 1.0), (c, 1.0)]);
        p
    }

    #[test]
    fn roundtrip_is_structurally_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mps");
        let p = knapsack();
        export_mps(&p, &path).unwrap();
        let q = import_mps(&path).unwrap();
        p.structurally_eq(&q, 0.0).unwrap();
        assert_eq!(q.name, "knapsack");
    }

    #[test]
    fn roundtrip_preserves_awkward_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mps");
        let mut p = MilpProblem::new("awkward");
        let x = p.add_var("x", -1.25e-7, f64::INFINITY, false, 0.1 + 0.2);
        let y = p.add_var("y", f64::NEG_INFINITY, 3.0_f64.sqrt(), true, 0.0);
        let z = p.add_var("z", 2.5, 2.5, false, -7.0);
        p.add_row(
            "r[0,1]",
            Sense::Eq,
            1.0 / 3.0,
            vec![(x, 0.123456789012345), (y, -9.87e11), (z, 1.0)],
        );
        export_mps(&p, &path).unwrap();
        let q = import_mps(&path).unwrap();
        p.structurally_eq(&q, 0.0).unwrap();
    }

    #[test]
    fn empty_model_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.mps");
        let p = MilpProblem::new("empty");
        export_mps(&p, &path).unwrap();
        let q = import_mps(&path).unwrap();
        p.structurally_eq(&q, 0.0).unwrap();
    }

    #[test]
    fn imported_model_solves_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mps");
        let p = knapsack();
        export_mps(&p, &path).unwrap();
        let q = import_mps(&path).unwrap();
        let sp = solve_milp(&p, &SolverOptions::with_gap(0.0));
        let sq = solve_milp(&q, &SolverOptions::with_gap(0.0));
        assert_eq!(sp.status, SolveStatus::Optimal);
        assert!((sp.objective - sq.objective).abs() < 1e-12);
    }

    #[test]
    fn malformed_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mps");
        std::fs::write(&path, "NAME x\nROWS\n L\nENDATA\n").unwrap();
        match import_mps(&path) {
            Err(MpsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn ranges_split_into_row_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranged.mps");
        std::fs::write(
            &path,
            "NAME ranged\nROWS\n N obj\n L lim\nCOLUMNS\n    x  obj  1.0\n    x  lim  1.0\nRHS\n    RHS  lim  5.0\nRANGES\n    RNG  lim  2.0\nBOUNDS\nENDATA\n",
        )
        .unwrap();
        let p = import_mps(&path).unwrap();
        assert_eq!(p.n_rows(), 2);
        assert_eq!(p.rows()[0].sense, Sense::Le);
        assert_eq!(p.rows()[0].rhs, 5.0);
        assert_eq!(p.rows()[1].sense, Sense::Ge);
        assert_eq!(p.rows()[1].rhs, 3.0);
    }
}
