//! ADKF kernel-family files and CSV/JSON report writers.
//!
//! Layout (little endian): "ADKF", version u32, fiber_dim u32, nx u32,
//! nu u32, nt u32, x-grid, U-grid, t-grid as f64, then (re, im) pairs in
//! [t][x][U] row-major order.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dnc::GroupoidSpec;
use crate::error::{Error, Result};
use crate::family::{normal_coords, FamilyClass, KernelFamily, NormalGrid, Representation, SampledField};
use crate::operator::DiscreteOperator;

pub const MAGIC: &[u8; 4] = b"ADKF";
pub const VERSION: u32 = 1;
const HEADER: usize = 24;

pub fn encode(field: &SampledField, fiber_dim: u32) -> Vec<u8> {
    let (nx, nu, nt) = (field.xs.len(), field.us.len(), field.ts.len());
    let mut out = Vec::with_capacity(HEADER + 8 * (nx + nu + nt) + 16 * field.data.len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, fiber_dim, nx as u32, nu as u32, nt as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for g in [&field.xs, &field.us, &field.ts] {
        for v in g.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for c in &field.data {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes(b[i..i + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(b[i..i + 8].try_into().unwrap())
}

/// Parse an ADKF buffer; returns (fiber_dim, field).
pub fn decode(b: &[u8]) -> Result<(u32, SampledField)> {
    if b.len() < HEADER {
        return Err(Error::Format(format!("truncated header: {} bytes, need {HEADER}", b.len())));
    }
    if &b[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"ADKF\"", String::from_utf8_lossy(&b[..4]))));
    }
    let version = u32_at(b, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported ADKF version {version} (this reader handles version {VERSION})")));
    }
    let fiber_dim = u32_at(b, 8);
    let (nx, nu, nt) = (u32_at(b, 12) as usize, u32_at(b, 16) as usize, u32_at(b, 20) as usize);
    let ngrid = nx + nu + nt;
    let expected = nx
        .checked_mul(nu)
        .and_then(|v| v.checked_mul(nt))
        .and_then(|v| v.checked_mul(16))
        .and_then(|v| v.checked_add(HEADER + 8 * ngrid))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    if b.len() < expected {
        return Err(Error::Format(format!(
            "truncated payload: {} bytes, header nx={nx} nu={nu} nt={nt} implies {expected}",
            b.len()
        )));
    }
    if b.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after the payload", b.len() - expected)));
    }
    let mut at = HEADER;
    let mut grid = |n: usize| {
        let g: Vec<f64> = (0..n).map(|i| f64_at(b, at + 8 * i)).collect();
        at += 8 * n;
        g
    };
    let (xs, us, ts) = (grid(nx), grid(nu), grid(nt));
    let base = HEADER + 8 * ngrid;
    let data = (0..nx * nu * nt).map(|i| C64::new(f64_at(b, base + 16 * i), f64_at(b, base + 16 * i + 8))).collect();
    Ok((fiber_dim, SampledField::new(xs, us, ts, data)?))
}

/// Normal-coordinate samples of a family on a grid, ready to save.
pub fn sample_family(f: &KernelFamily, g: &NormalGrid) -> Result<KernelFamily> {
    if let Representation::Nodal(_) = f.repr {
        return Err(Error::Format("nodal families carry no normal-coordinate samples".into()));
    }
    Ok(KernelFamily::sampled(f.groupoid, normal_coords(f, g)?, f.claimed_class))
}

pub fn save_family(path: &Path, f: &KernelFamily) -> Result<()> {
    let Representation::Sampled(field) = &f.repr else {
        return Err(Error::Format("only sampled families can be saved; use sample_family first".into()));
    };
    fs::write(path, encode(field, f.groupoid.fiber_dim as u32))?;
    Ok(())
}

pub fn load_family(path: &Path, half_width: f64, class: Option<FamilyClass>) -> Result<KernelFamily> {
    let bytes = fs::read(path)?;
    let (dim, field) = decode(&bytes)?;
    if dim != 1 {
        return Err(Error::Format(format!("fiber_dim {dim} not supported (only 1)")));
    }
    Ok(KernelFamily::sampled(GroupoidSpec::pair_line(half_width)?, field, class))
}

/// Float formatting used in every report: 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// CSV table with RFC-4180 quoting.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Operator as rows (i, j, re, im) of its action matrix.
pub fn write_operator_csv(path: &Path, op: &DiscreteOperator) -> Result<()> {
    let a = op.action();
    let rows: Vec<Vec<String>> = a
        .indexed_iter()
        .map(|((i, j), v)| vec![i.to_string(), j.to_string(), fmt17(v.re), fmt17(v.im)])
        .collect();
    write_csv(path, &["i", "j", "re", "im"], &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// measured ≤ tolerance
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }

    /// measured ≥ tolerance
    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, pass: measured >= tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(scenario: impl Into<String>, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Summary { scenario: scenario.into(), pass, checks }
    }

    /// JSON with floats rendered to 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |v: f64| -> serde_json::Value {
            if v.is_finite() {
                serde_json::from_str(&fmt17(v)).unwrap_or(serde_json::Value::Null)
            } else {
                serde_json::Value::String(v.to_string())
            }
        };
        let checks: Vec<serde_json::Value> = self
            .checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "measured": num(c.measured),
                    "tolerance": num(c.tolerance),
                    "pass": c.pass,
                })
            })
            .collect();
        let v = serde_json::json!({ "scenario": self.scenario, "pass": self.pass, "checks": checks });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
