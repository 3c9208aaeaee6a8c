//! Time series CSV. The first line is `# vpcharge timeseries config_hash=…`,
//! the second the header:
//!
//! ```text
//! t,mass,energy,eta_norm,xi_norm,E_at_xi,E_at_xi_grid,min_charge_distance,
//! min_h,max_v_over_2sqrt_h,virial_E_integral,virial_inverse_sq,inverse_sq_now,
//! then for every moment order k: Ht_k,H_k,M_k,Msup_k,
//! then rho_L{p} for every density exponent and E_L{q} for every field exponent
//! ```
//!
//! Ht_k is the instantaneous Σ w h^{k/2}, H_k its running supremum, M_k the
//! velocity moment and Msup_k its supremum. Orders and values are written in
//! shortest round-trip form, so reading a file back is exact.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DiagnosticRecord, OrderMap};

const FIXED: [&str; 13] = [
    "t",
    "mass",
    "energy",
    "eta_norm",
    "xi_norm",
    "E_at_xi",
    "E_at_xi_grid",
    "min_charge_distance",
    "min_h",
    "max_v_over_2sqrt_h",
    "virial_E_integral",
    "virial_inverse_sq",
    "inverse_sq_now",
];

const PREFIX: &str = "# vpcharge timeseries config_hash=";

fn fixed_values(r: &DiagnosticRecord) -> [f64; 13] {
    [
        r.t,
        r.mass,
        r.energy,
        r.eta_norm,
        r.xi_norm,
        r.e_at_xi,
        r.e_at_xi_grid,
        r.min_charge_distance,
        r.min_h,
        r.max_v_over_2sqrt_h,
        r.virial_e_integral,
        r.virial_inverse_sq,
        r.inverse_sq_now,
    ]
}

fn set_fixed(r: &mut DiagnosticRecord, i: usize, v: f64) {
    match i {
        0 => r.t = v,
        1 => r.mass = v,
        2 => r.energy = v,
        3 => r.eta_norm = v,
        4 => r.xi_norm = v,
        5 => r.e_at_xi = v,
        6 => r.e_at_xi_grid = v,
        7 => r.min_charge_distance = v,
        8 => r.min_h = v,
        9 => r.max_v_over_2sqrt_h = v,
        10 => r.virial_e_integral = v,
        11 => r.virial_inverse_sq = v,
        _ => r.inverse_sq_now = v,
    }
}

/// Header columns for a set of records; the orders come from the first one.
pub fn header(first: &DiagnosticRecord) -> Vec<String> {
    let mut cols: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for k in first.hk.orders() {
        cols.extend([format!("Ht_{k}"), format!("H_{k}"), format!("M_{k}"), format!("Msup_{k}")]);
    }
    for p in first.lp_rho.orders() {
        cols.push(format!("rho_L{p}"));
    }
    for q in first.e_norms.orders() {
        cols.push(format!("E_L{q}"));
    }
    cols
}

pub(crate) fn row(r: &DiagnosticRecord, first: &DiagnosticRecord) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = fixed_values(r).to_vec();
    let get = |m: &OrderMap, k: f64, what: &str| {
        m.get(k).ok_or_else(|| Error::Series(format!("record at t = {} lacks {what} of order {k}", r.t)))
    };
    for k in first.hk.orders() {
        out.push(get(&r.hk, k, "Ht")?);
        out.push(get(&r.hk_sup, k, "H")?);
        out.push(get(&r.mk, k, "M")?);
        out.push(get(&r.mk_sup, k, "Msup")?);
    }
    for p in first.lp_rho.orders() {
        out.push(get(&r.lp_rho, p, "rho_L")?);
    }
    for q in first.e_norms.orders() {
        out.push(get(&r.e_norms, q, "E_L")?);
    }
    Ok(out)
}

pub fn write_timeseries_to(w: &mut impl Write, records: &[DiagnosticRecord], config_hash: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<timeseries>", e);
    writeln!(w, "{PREFIX}{config_hash}").map_err(io)?;
    let Some(first) = records.first() else {
        return Ok(());
    };
    let mut csv = csv::Writer::from_writer(w);
    let cols = header(first);
    csv.write_record(&cols).map_err(|e| Error::Series(e.to_string()))?;
    for r in records {
        let vals = row(r, first)?;
        csv.write_record(vals.iter().map(|v| v.to_string())).map_err(|e| Error::Series(e.to_string()))?;
    }
    csv.flush().map_err(io)?;
    Ok(())
}

pub fn write_timeseries(path: &Path, records: &[DiagnosticRecord], config_hash: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_timeseries_to(&mut w, records, config_hash)?;
    w.flush().map_err(|e| Error::io(path, e))
}

enum Column {
    Fixed(usize),
    Ht(f64),
    H(f64),
    M(f64),
    Msup(f64),
    Rho(f64),
    E(f64),
}

fn parse_column(name: &str) -> Result<Column> {
    if let Some(i) = FIXED.iter().position(|f| *f == name) {
        return Ok(Column::Fixed(i));
    }
    let order = |s: &str| s.parse::<f64>().map_err(|_| Error::Series(format!("bad column `{name}`")));
    let col = if let Some(s) = name.strip_prefix("Ht_") {
        Column::Ht(order(s)?)
    } else if let Some(s) = name.strip_prefix("Msup_") {
        Column::Msup(order(s)?)
    } else if let Some(s) = name.strip_prefix("H_") {
        Column::H(order(s)?)
    } else if let Some(s) = name.strip_prefix("M_") {
        Column::M(order(s)?)
    } else if let Some(s) = name.strip_prefix("rho_L") {
        Column::Rho(order(s)?)
    } else if let Some(s) = name.strip_prefix("E_L") {
        Column::E(order(s)?)
    } else {
        return Err(Error::Series(format!("unknown column `{name}`")));
    };
    Ok(col)
}

/// Records and config hash of a series written by [`write_timeseries`].
pub fn read_timeseries(path: &Path) -> Result<(Vec<DiagnosticRecord>, String)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let hash = first
        .trim_end()
        .strip_prefix(PREFIX)
        .ok_or_else(|| Error::Series(format!("{} does not start with the series banner", path.display())))?
        .to_string();
    let mut csv = csv::Reader::from_reader(reader);
    let cols: Vec<Column> =
        csv.headers().map_err(|e| Error::Series(e.to_string()))?.iter().map(parse_column).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(|e| Error::Series(e.to_string()))?;
        if rec.len() != cols.len() {
            return Err(Error::Series(format!("row has {} fields, header {}", rec.len(), cols.len())));
        }
        let mut r = DiagnosticRecord::default();
        for (c, field) in cols.iter().zip(rec.iter()) {
            let v: f64 = field.parse().map_err(|_| Error::Series(format!("bad number `{field}`")))?;
            match c {
                Column::Fixed(i) => set_fixed(&mut r, *i, v),
                Column::Ht(k) => r.hk.insert(*k, v),
                Column::H(k) => r.hk_sup.insert(*k, v),
                Column::M(k) => r.mk.insert(*k, v),
                Column::Msup(k) => r.mk_sup.insert(*k, v),
                Column::Rho(p) => r.lp_rho.insert(*p, v),
                Column::E(q) => r.e_norms.insert(*q, v),
            }
        }
        out.push(r);
    }
    Ok((out, hash))
}
