//! Reader for MATPOWER version 2 `.m` case files.
//!
//! Only `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` and `mpc.gencost`
//! are read; every other assignment is skipped.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;

use super::{derive_admittances, Branch, Bus, BusType, Generator, PowerNetwork, QuadraticCost};
use crate::error::{Error, Result};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

struct Row {
    line: usize,
    values: Vec<f64>,
}

#[derive(Default)]
struct RawCase {
    base_mva: Option<f64>,
    matrices: HashMap<String, Vec<Row>>,
}

pub fn parse_matpower_file(path: impl AsRef<Path>) -> Result<PowerNetwork> {
    let text = fs::read_to_string(path)?;
    parse_matpower(&text)
}

/// Parses case-file text into a validated per-unit network.
pub fn parse_matpower(source: &str) -> Result<PowerNetwork> {
    let raw = scan(source)?;
    build(raw)
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn scan(source: &str) -> Result<RawCase> {
    let mut raw = RawCase::default();
    // (matrix name, rows, pending tokens, line the pending row started on)
    let mut current: Option<(String, Vec<Row>, Vec<f64>, usize)> = None;

    for (idx, full_line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let mut line = strip_comment(full_line).trim();

        if current.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else {
                continue;
            };
            let Some(eq) = rest.find('=') else {
                continue;
            };
            let name = rest[..eq].trim().to_string();
            let rhs = rest[eq + 1..].trim();
            if name == "baseMVA" {
                let value = rhs.trim_end_matches(';').trim();
                let parsed = value.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid baseMVA `{value}`"),
                })?;
                raw.base_mva = Some(parsed);
                continue;
            }
            let Some(body) = rhs.strip_prefix('[') else {
                continue;
            };
            current = Some((name, Vec::new(), Vec::new(), lineno));
            line = body;
        }

        let (name, rows, pending, start) = current.as_mut().expect("inside matrix");
        if pending.is_empty() {
            *start = lineno;
        }
        let (content, closes) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        for (k, segment) in content.split(';').enumerate() {
            if k > 0 && !pending.is_empty() {
                rows.push(Row { line: *start, values: std::mem::take(pending) });
                *start = lineno;
            }
            for token in segment.split(|c: char| c.is_whitespace() || c == ',') {
                if token.is_empty() || token == "..." {
                    continue;
                }
                let value = parse_number(token).ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("malformed value `{token}` in mpc.{name}"),
                })?;
                if pending.is_empty() {
                    *start = lineno;
                }
                pending.push(value);
            }
        }
        // A newline also terminates a row unless it is continued with `...`.
        if !pending.is_empty() && !strip_comment(full_line).trim_end().ends_with("...") {
            rows.push(Row { line: *start, values: std::mem::take(pending) });
        }
        if closes {
            let (name, rows, _, _) = current.take().expect("inside matrix");
            raw.matrices.insert(name, rows);
        }
    }
    if let Some((name, _, _, start)) = current {
        return Err(Error::Parse { line: start, msg: format!("unterminated matrix mpc.{name}") });
    }
    Ok(raw)
}

fn parse_number(token: &str) -> Option<f64> {
    match token {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => token.parse().ok(),
    }
}

fn take_matrix(raw: &mut RawCase, name: &'static str, min_cols: usize) -> Result<Vec<Row>> {
    let rows = raw.matrices.remove(name).ok_or(Error::MissingMatrix(name))?;
    for row in &rows {
        if row.values.len() < min_cols {
            return Err(Error::Parse {
                line: row.line,
                msg: format!(
                    "mpc.{name} row has {} columns, expected at least {min_cols}",
                    row.values.len()
                ),
            });
        }
    }
    Ok(rows)
}

fn bus_number(value: f64, line: usize) -> Result<i64> {
    if value.fract() != 0.0 || !value.is_finite() {
        return Err(Error::Parse { line, msg: format!("bus number `{value}` is not an integer") });
    }
    Ok(value as i64)
}

fn build(mut raw: RawCase) -> Result<PowerNetwork> {
    let base = raw.base_mva.ok_or(Error::MissingMatrix("baseMVA"))?;
    if !(base > 0.0) {
        return Err(Error::InvalidNetwork("baseMVA must be positive".into()));
    }
    let bus_rows = take_matrix(&mut raw, "bus", BUS_COLS)?;
    let gen_rows = take_matrix(&mut raw, "gen", GEN_COLS)?;
    let branch_rows = take_matrix(&mut raw, "branch", BRANCH_COLS)?;
    let cost_rows = take_matrix(&mut raw, "gencost", 4)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut bus_index = HashMap::new();
    let mut isolated = HashMap::new();
    for row in &bus_rows {
        let v = &row.values;
        let id = bus_number(v[0], row.line)?;
        let kind = match v[1] as i64 {
            1 => BusType::Pq,
            2 => BusType::Pv,
            3 => BusType::Ref,
            4 => {
                isolated.insert(id, ());
                continue;
            }
            t => {
                return Err(Error::Parse { line: row.line, msg: format!("unknown bus type {t}") })
            }
        };
        if bus_index.insert(id, buses.len()).is_some() {
            return Err(Error::Parse { line: row.line, msg: format!("duplicate bus number {id}") });
        }
        buses.push(Bus {
            id,
            kind,
            pd: v[2] / base,
            qd: v[3] / base,
            gs: v[4] / base,
            bs: v[5] / base,
            vmax: v[11],
            vmin: v[12],
            gens: Vec::new(),
            from_branches: Vec::new(),
            to_branches: Vec::new(),
        });
    }

    let lookup = |id: i64, kind: &'static str, row: usize| -> Result<Option<usize>> {
        if let Some(&i) = bus_index.get(&id) {
            Ok(Some(i))
        } else if isolated.contains_key(&id) {
            Ok(None)
        } else {
            Err(Error::UnknownBus { kind, row, bus: id })
        }
    };

    if cost_rows.len() < gen_rows.len() {
        return Err(Error::Parse {
            line: cost_rows.last().map_or(0, |r| r.line),
            msg: format!("{} gencost rows for {} generators", cost_rows.len(), gen_rows.len()),
        });
    }

    let mut generators = Vec::with_capacity(gen_rows.len());
    for (g, (row, cost_row)) in gen_rows.iter().zip(&cost_rows).enumerate() {
        let v = &row.values;
        let cost = parse_cost(g, cost_row, base)?;
        let bus_id = bus_number(v[0], row.line)?;
        let Some(bus) = lookup(bus_id, "gen", g)? else {
            warn!("generator {g} sits on isolated bus {bus_id}; dropped");
            continue;
        };
        if v[7] <= 0.0 {
            continue;
        }
        generators.push(Generator {
            bus,
            qmax: v[3] / base,
            qmin: v[4] / base,
            pmax: v[8] / base,
            pmin: v[9] / base,
            cost,
            in_service: true,
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (l, row) in branch_rows.iter().enumerate() {
        let v = &row.values;
        let from_id = bus_number(v[0], row.line)?;
        let to_id = bus_number(v[1], row.line)?;
        let from = lookup(from_id, "branch", l)?;
        let to = lookup(to_id, "branch", l)?;
        if v[10] <= 0.0 {
            continue;
        }
        let (Some(from), Some(to)) = (from, to) else {
            warn!("branch {l} touches an isolated bus; dropped");
            continue;
        };
        let tap = if v[8] == 0.0 { 1.0 } else { v[8] };
        let shift = v[9].to_radians();
        let y = derive_admittances(v[2], v[3], v[4], tap, shift)
            .map_err(|_| Error::ZeroImpedance { branch: l })?;
        branches.push(Branch {
            from,
            to,
            r: v[2],
            x: v[3],
            charging: v[4],
            tap,
            shift,
            rate: v[5] / base,
            y,
        });
    }

    PowerNetwork { base_mva: base, buses, generators, branches, bus_index }.finish()
}

fn parse_cost(gen: usize, row: &Row, base: f64) -> Result<QuadraticCost> {
    let v = &row.values;
    match v[0] as i64 {
        1 => return Err(Error::UnsupportedCost { gen }),
        2 => {}
        m => {
            return Err(Error::Parse { line: row.line, msg: format!("unknown cost model {m}") })
        }
    }
    let n = v[3] as usize;
    if n > 3 {
        return Err(Error::UnsupportedCostDegree { gen, degree: n - 1 });
    }
    if v.len() < 4 + n {
        return Err(Error::Parse {
            line: row.line,
            msg: format!("gencost row declares {n} coefficients but has {}", v.len() - 4),
        });
    }
    // Coefficients are listed highest degree first.
    let mut c = [0.0; 3];
    for (k, &coef) in v[4..4 + n].iter().enumerate() {
        c[n - 1 - k] = coef;
    }
    Ok(QuadraticCost { c2: c[2] * base * base, c1: c[1] * base, c0: c[0] })
}
