//! CSV artifacts written from run logs.
//!
//! Everything here is derived from session records only, and the session
//! log itself can be read back into a [`RunLog`], so regenerating reports
//! from `sessions.csv` reproduces the files of the original run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::calibration::{normalize, yearly_weighted_prices};
use crate::data::PreparedInputs;
use crate::scenario::{flow_matrices, write_network};
use crate::world::{RunLog, SessionRecord, StepReport};
use crate::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn row<I, S>(w: &mut csv::Writer<std::fs::File>, path: &Path, fields: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| Error::csv(path, e))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `prices.csv`: one row per session and month.
pub fn write_prices(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["year", "month", "session", "price", "quantity"])?;
    for step in &log.steps {
        for s in &step.sessions {
            row(
                &mut w,
                path,
                [
                    step.year.to_string(),
                    step.month.to_string(),
                    log.regions[s.region].clone(),
                    s.price.to_string(),
                    s.quantity.to_string(),
                ],
            )?;
        }
    }
    finish(w, path)
}

const SESSION_HEADER: [&str; 11] = [
    "step",
    "year",
    "month",
    "session",
    "buyer",
    "price",
    "quantity",
    "offered",
    "reservation_price",
    "producer_rationed",
    "buyers_rationed",
];

/// `sessions.csv`: a summary row per session (empty `buyer`) followed by
/// one row per participant with its allocated quantity.
pub fn write_sessions(log: &RunLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, SESSION_HEADER)?;
    for step in &log.steps {
        for s in &step.sessions {
            let head = [step.step.to_string(), step.year.to_string(), step.month.to_string()];
            let name = log.regions[s.region].clone();
            row(
                &mut w,
                path,
                head.iter().cloned().chain([
                    name.clone(),
                    String::new(),
                    s.price.to_string(),
                    s.quantity.to_string(),
                    s.offered.to_string(),
                    s.reservation_price.to_string(),
                    s.producer_rationed.to_string(),
                    s.buyers_rationed.to_string(),
                ]),
            )?;
            for &(b, q) in &s.allocations {
                row(
                    &mut w,
                    path,
                    head.iter().cloned().chain([
                        name.clone(),
                        log.regions[b].clone(),
                        s.price.to_string(),
                        q.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]),
                )?;
            }
        }
    }
    finish(w, path)
}

/// Rebuilds the session part of a run log from `sessions.csv`.
pub fn read_sessions(path: &Path, inputs: &PreparedInputs) -> Result<RunLog> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != SESSION_HEADER {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line: 1,
            field: "header".into(),
            message: format!("expected {}", SESSION_HEADER.join(",")),
        });
    }
    let regions = inputs.region_ids();
    let index: BTreeMap<&str, usize> = regions.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let session_regions: Vec<usize> = inputs
        .regions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.supplier)
        .map(|(i, _)| i)
        .collect();
    let mut log = RunLog {
        regions: regions.clone(),
        session_regions: session_regions.clone(),
        start_year: inputs.years[0],
        steps: Vec::new(),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i as u64 + 2;
        let err = |field: &str, message: String| Error::Parse {
            file: path.to_path_buf(),
            line,
            field: field.into(),
            message,
        };
        let get = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            get(k).parse().map_err(|_| err(SESSION_HEADER[k], format!("cannot parse `{}`", get(k))))
        };
        let flag = |k: usize| -> Result<bool> {
            get(k).parse().map_err(|_| err(SESSION_HEADER[k], format!("cannot parse `{}`", get(k))))
        };
        let region = |k: usize| -> Result<usize> {
            index
                .get(get(k))
                .copied()
                .ok_or_else(|| err(SESSION_HEADER[k], format!("unknown region `{}`", get(k))))
        };
        let step: usize = get(0).parse().map_err(|_| err("step", "not an integer".into()))?;
        let year: i32 = get(1).parse().map_err(|_| err("year", "not an integer".into()))?;
        let month: u32 = get(2).parse().map_err(|_| err("month", "not an integer".into()))?;
        let seller = region(3)?;
        if log.steps.last().map(|s| s.step) != Some(step) {
            log.steps.push(StepReport {
                step,
                year,
                month,
                ..StepReport::default()
            });
        }
        let current = log.steps.last_mut().expect("just pushed");
        if get(4).is_empty() {
            let session = session_regions
                .iter()
                .position(|&r| r == seller)
                .ok_or_else(|| err("session", format!("`{}` runs no session", get(3))))?;
            current.sessions.push(SessionRecord {
                session,
                region: seller,
                price: num(5)?,
                quantity: num(6)?,
                offered: num(7)?,
                reservation_price: num(8)?,
                producer_rationed: flag(9)?,
                buyers_rationed: flag(10)?,
                allocations: Vec::new(),
            });
        } else {
            let buyer = region(4)?;
            let s = current
                .sessions
                .last_mut()
                .filter(|s| s.region == seller)
                .ok_or_else(|| err("buyer", "allocation row before its session row".into()))?;
            s.allocations.push((buyer, num(6)?));
        }
    }
    Ok(log)
}

/// `yearly_weighted_price.csv`: raw and mean-normalized yearly prices.
pub fn write_yearly_prices(log: &RunLog, path: &Path) -> Result<()> {
    let yearly = yearly_weighted_prices(log);
    let present: Vec<f64> = yearly.iter().filter_map(|(_, p)| *p).collect();
    let normalized = normalize(&present).ok();
    let mut w = writer(path)?;
    row(&mut w, path, ["year", "raw", "normalized"])?;
    let mut k = 0;
    for (year, p) in yearly {
        let (raw, norm) = match p {
            Some(p) => {
                let n = normalized.as_ref().map(|n| n[k].to_string()).unwrap_or_default();
                k += 1;
                (p.to_string(), n)
            }
            None => (String::new(), String::new()),
        };
        row(&mut w, path, [year.to_string(), raw, norm])?;
    }
    finish(w, path)
}

/// `flows_<year>.csv` matrices plus the network edge lists.
pub fn write_flows(log: &RunLog, dir: &Path) -> Result<()> {
    for fm in flow_matrices(log).values() {
        let path = dir.join(format!("flows_{}.csv", fm.year));
        let mut w = writer(&path)?;
        row(
            &mut w,
            &path,
            std::iter::once("seller".to_string()).chain(log.regions.iter().cloned()),
        )?;
        for &s in &log.session_regions {
            row(
                &mut w,
                &path,
                std::iter::once(log.regions[s].clone()).chain(fm.matrix[s].iter().map(|v| v.to_string())),
            )?;
        }
        finish(w, &path)?;
        write_network(log, fm, dir)?;
    }
    Ok(())
}

/// Yearly purchases per buyer region.
pub fn yearly_bought(log: &RunLog) -> BTreeMap<i32, Vec<f64>> {
    let mut out: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for step in &log.steps {
        let year = out.entry(step.year).or_insert_with(|| vec![0.0; log.regions.len()]);
        for s in &step.sessions {
            for &(b, q) in &s.allocations {
                year[b] += q;
            }
        }
    }
    out
}

/// `used_quantities_<region>.csv` comparing balance use, simulated use and
/// the desired demand. Net buyers consume their own production outside the
/// market, so it is added to their purchases and their target.
pub fn write_used_quantities(log: &RunLog, inputs: &PreparedInputs, dir: &Path) -> Result<()> {
    let bought = yearly_bought(log);
    for (z, region) in inputs.regions.iter().enumerate() {
        let path = dir.join(format!("used_quantities_{}.csv", file_stem(&region.id)));
        let mut w = writer(&path)?;
        row(&mut w, &path, ["year", "fao_used", "simulated_bought", "target_demand"])?;
        for (t, &year) in inputs.years.iter().enumerate() {
            let Some(b) = bought.get(&year) else { continue };
            let own = if region.supplier { 0.0 } else { inputs.balance_production[z][t] };
            row(
                &mut w,
                &path,
                [
                    year.to_string(),
                    inputs.balance_demand[z][t].to_string(),
                    (b[z] + own).to_string(),
                    (inputs.desired_demand[z][t] + own).to_string(),
                ],
            )?;
        }
        finish(w, &path)?;
    }
    Ok(())
}

/// Region names as file-name fragments.
pub fn file_stem(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    let mut last_sep = true;
    for c in id.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_sep = false;
        } else if !last_sep {
            out.push('_');
            last_sep = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// All derived reports: prices, yearly prices, flows, networks and, with
/// inputs, used quantities.
pub fn write_reports(log: &RunLog, inputs: Option<&PreparedInputs>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_prices(log, &dir.join("prices.csv"))?;
    write_yearly_prices(log, &dir.join("yearly_weighted_price.csv"))?;
    write_flows(log, dir)?;
    if let Some(inputs) = inputs {
        write_used_quantities(log, inputs, dir)?;
    }
    Ok(())
}

/// The session log plus every derived report.
pub fn write_run(log: &RunLog, inputs: Option<&PreparedInputs>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_sessions(log, &dir.join("sessions.csv"))?;
    write_reports(log, inputs, dir)
}
