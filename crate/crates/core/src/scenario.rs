//! Policy scenarios, counterfactual pairs, projections and trade networks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibration::{weighted_world_price, yearly_weighted_prices};
use crate::config::GlobalConfig;
use crate::data::PreparedInputs;
use crate::par::{self, Parallelism};
use crate::world::{build_world, PolicyEvent, PolicyFlag, PolicySchedule, RunLog, World, YieldShock};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FlagName {
    ExportAllowed,
    ImportAllowed,
}

impl From<FlagName> for PolicyFlag {
    fn from(f: FlagName) -> Self {
        match f {
            FlagName::ExportAllowed => PolicyFlag::ExportAllowed,
            FlagName::ImportAllowed => PolicyFlag::ImportAllowed,
        }
    }
}

/// A flag window with calendar months written `YYYY-MM`, both ends included.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EventSpec {
    pub region: String,
    pub flag: FlagName,
    pub value: bool,
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ShockSpec {
    pub region: String,
    pub start: String,
    pub end: String,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Projection {
    pub freeze_year: i32,
    pub extra_months: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    pub events: Vec<EventSpec>,
    pub projection: Option<Projection>,
    pub yield_shocks: Vec<ShockSpec>,
    /// CSV with `region,start_month,end_month,multiplier`.
    pub yield_shock_file: Option<PathBuf>,
}

/// A scenario with regions and months mapped onto a world's indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedScenario {
    pub policy: PolicySchedule,
    pub shocks: Vec<YieldShock>,
    pub projection: Option<Projection>,
}

/// Parses `YYYY-MM`.
pub fn parse_month(text: &str) -> Result<(i32, u32)> {
    let bad = || Error::Scenario(format!("`{text}` is not a YYYY-MM month"));
    let (y, m) = text.trim().split_once('-').ok_or_else(bad)?;
    let year: i32 = y.parse().map_err(|_| bad())?;
    let month: u32 = m.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) {
        return Err(bad());
    }
    Ok((year, month))
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scenario: Scenario = toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })?;
        if let Some(file) = &scenario.yield_shock_file {
            let resolved = match path.parent() {
                Some(dir) if file.is_relative() => dir.join(file),
                _ => file.clone(),
            };
            scenario.yield_shocks.extend(read_yield_shocks(&resolved)?);
            scenario.yield_shock_file = Some(resolved);
        }
        Ok(scenario)
    }

    /// Checks the scenario against the inputs and converts it to step
    /// indices.
    pub fn resolve(&self, inputs: &PreparedInputs) -> Result<ResolvedScenario> {
        let start_year = *inputs
            .years
            .first()
            .ok_or_else(|| Error::Input("no simulation years".into()))?;
        let data_months = inputs.years.len() * 12;
        let horizon = data_months + self.projection.map_or(0, |p| p.extra_months);
        let step_of = |text: &str| -> Result<usize> {
            let (y, m) = parse_month(text)?;
            let offset = (y - start_year) as i64 * 12 + m as i64 - 1;
            match usize::try_from(offset) {
                Ok(s) if s < horizon => Ok(s),
                _ => Err(Error::Scenario(format!("month {text} outside the run horizon"))),
            }
        };
        let region_of = |id: &str| -> Result<usize> {
            inputs
                .region_index(id)
                .ok_or_else(|| Error::Scenario(format!("unknown region `{id}`")))
        };

        let mut events = Vec::with_capacity(self.events.len());
        for e in &self.events {
            let region = region_of(&e.region)?;
            let (start, end) = (step_of(&e.start)?, step_of(&e.end)?);
            if end < start {
                return Err(Error::Scenario(format!(
                    "event for `{}` ends ({}) before it starts ({})",
                    e.region, e.end, e.start
                )));
            }
            if e.flag == FlagName::ExportAllowed && !inputs.regions[region].supplier {
                return Err(Error::Scenario(format!(
                    "`{}` has no market session, so its exports cannot be restricted",
                    e.region
                )));
            }
            events.push(PolicyEvent {
                region,
                flag: e.flag.into(),
                value: e.value,
                start,
                end,
            });
        }
        for (i, a) in events.iter().enumerate() {
            for b in &events[i + 1..] {
                let overlap = a.start <= b.end && b.start <= a.end;
                if a.region == b.region && a.flag == b.flag && overlap && a.value != b.value {
                    return Err(Error::Scenario(format!(
                        "contradictory overlapping events for `{}`",
                        inputs.regions[a.region].id
                    )));
                }
            }
        }

        let mut shocks = Vec::with_capacity(self.yield_shocks.len());
        for s in &self.yield_shocks {
            let (start, end) = (step_of(&s.start)?, step_of(&s.end)?);
            if end < start {
                return Err(Error::Scenario(format!("yield shock for `{}` ends before it starts", s.region)));
            }
            if !(s.multiplier.is_finite() && s.multiplier >= 0.0) {
                return Err(Error::Scenario(format!("yield shock multiplier {} must be >= 0", s.multiplier)));
            }
            shocks.push(YieldShock {
                region: region_of(&s.region)?,
                start,
                end,
                multiplier: s.multiplier,
            });
        }

        if let Some(p) = self.projection {
            if !inputs.years.contains(&p.freeze_year) {
                return Err(Error::Scenario(format!("freeze year {} outside the input years", p.freeze_year)));
            }
        }
        Ok(ResolvedScenario {
            policy: PolicySchedule { events },
            shocks,
            projection: self.projection,
        })
    }
}

pub fn read_yield_shocks(path: &Path) -> Result<Vec<ShockSpec>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i as u64 + 2;
        let get = |k: usize, name: &str| -> Result<String> {
            rec.get(k).map(str::to_string).ok_or_else(|| Error::Parse {
                file: path.to_path_buf(),
                line,
                field: name.into(),
                message: "missing value".into(),
            })
        };
        let m = get(3, "multiplier")?;
        out.push(ShockSpec {
            region: get(0, "region")?,
            start: get(1, "start_month")?,
            end: get(2, "end_month")?,
            multiplier: m.parse().map_err(|_| Error::Parse {
                file: path.to_path_buf(),
                line,
                field: "multiplier".into(),
                message: format!("cannot parse `{m}`"),
            })?,
        });
    }
    Ok(out)
}

/// Installs a resolved scenario's flag windows and yield shocks; the world
/// applies them at the start of every step.
pub fn apply_policy_events(world: &mut World, scenario: &ResolvedScenario) {
    world.set_policy(scenario.policy.clone());
    world.set_yield_shocks(scenario.shocks.clone());
}

/// Extends a run by `extra_months` with production and desired demand
/// held at `freeze_year`; returns how many buying-strategy rules fired
/// during the extension.
pub fn project_constant_quantities(
    world: &mut World,
    log: &mut RunLog,
    freeze_year: i32,
    extra_months: usize,
) -> Result<usize> {
    world.set_freeze_year(Some(freeze_year))?;
    let before = log.steps.len();
    world.run_into(log, extra_months)?;
    Ok(log.steps[before..].iter().map(|s| s.gates.total()).sum())
}

/// Runs the inputs' full horizon, then the projection if any.
pub fn run_scenario(
    inputs: &PreparedInputs,
    config: &GlobalConfig,
    scenario: &ResolvedScenario,
) -> Result<RunLog> {
    let mut world = build_world(inputs, config)?;
    apply_policy_events(&mut world, scenario);
    let mut log = world.run(inputs.years.len() * config.production_cycle as usize)?;
    if let Some(p) = scenario.projection {
        project_constant_quantities(&mut world, &mut log, p.freeze_year, p.extra_months)?;
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearGap {
    pub year: i32,
    pub baseline: f64,
    pub counterfactual: f64,
    /// Both normalized by the baseline's mean.
    pub baseline_normalized: f64,
    pub counterfactual_normalized: f64,
    /// `(counterfactual - baseline) / baseline * 100`.
    pub gap_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualReport {
    pub baseline: RunLog,
    pub counterfactual: RunLog,
    pub gaps: Vec<YearGap>,
}

impl CounterfactualReport {
    pub fn write_gaps(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record([
            "year",
            "baseline",
            "counterfactual",
            "baseline_normalized",
            "counterfactual_normalized",
            "gap_percent",
        ])
        .map_err(|e| Error::csv(path, e))?;
        for g in &self.gaps {
            w.write_record([
                g.year.to_string(),
                g.baseline.to_string(),
                g.counterfactual.to_string(),
                g.baseline_normalized.to_string(),
                g.counterfactual_normalized.to_string(),
                g.gap_percent.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the scenario without its policy events (baseline) and with them
/// (counterfactual). Yield shocks and the projection apply to both.
pub fn run_counterfactual_pair(
    inputs: &PreparedInputs,
    config: &GlobalConfig,
    scenario: &ResolvedScenario,
    mode: Parallelism,
) -> Result<CounterfactualReport> {
    let baseline_scenario = ResolvedScenario {
        policy: PolicySchedule::default(),
        ..scenario.clone()
    };
    let (baseline, counterfactual) = par::join(
        mode,
        || run_scenario(inputs, config, &baseline_scenario),
        || run_scenario(inputs, config, scenario),
    );
    let (baseline, counterfactual) = (baseline?, counterfactual?);
    let gaps = price_gaps(&baseline, &counterfactual);
    Ok(CounterfactualReport {
        baseline,
        counterfactual,
        gaps,
    })
}

/// Yearly price gaps for the years where both runs traded.
pub fn price_gaps(baseline: &RunLog, counterfactual: &RunLog) -> Vec<YearGap> {
    let base: Vec<(i32, f64)> = yearly_weighted_prices(baseline)
        .into_iter()
        .filter_map(|(y, p)| p.map(|p| (y, p)))
        .collect();
    let mean = if base.is_empty() {
        1.0
    } else {
        base.iter().map(|(_, p)| p).sum::<f64>() / base.len() as f64
    };
    base.into_iter()
        .filter_map(|(year, b)| {
            let c = weighted_world_price(counterfactual, year)?;
            Some(YearGap {
                year,
                baseline: b,
                counterfactual: c,
                baseline_normalized: b / mean,
                counterfactual_normalized: c / mean,
                gap_percent: (c - b) / b * 100.0,
            })
        })
        .collect()
}

/// Yearly tonnes moved from each seller region to each buyer region.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    pub year: i32,
    /// `[seller region][buyer region]`
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub seller: usize,
    pub buyer: usize,
    pub tonnes: f64,
}

impl FlowMatrix {
    pub fn row_sum(&self, seller: usize) -> f64 {
        self.matrix[seller].iter().sum()
    }

    pub fn domestic(&self, region: usize) -> f64 {
        self.matrix[region][region]
    }

    /// Nonzero flows between different regions, by seller then buyer.
    pub fn foreign_edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (s, row) in self.matrix.iter().enumerate() {
            for (b, &tonnes) in row.iter().enumerate() {
                if s != b && tonnes > 0.0 {
                    out.push(Edge { seller: s, buyer: b, tonnes });
                }
            }
        }
        out
    }

    pub fn foreign_sales(&self, seller: usize) -> f64 {
        self.foreign_edges()
            .iter()
            .filter(|e| e.seller == seller)
            .fold(0.0, |acc, e| acc + e.tonnes)
    }
}

pub fn flow_matrices(log: &RunLog) -> BTreeMap<i32, FlowMatrix> {
    let n = log.regions.len();
    let mut out: BTreeMap<i32, FlowMatrix> = BTreeMap::new();
    for step in &log.steps {
        let fm = out.entry(step.year).or_insert_with(|| FlowMatrix {
            year: step.year,
            matrix: vec![vec![0.0; n]; n],
        });
        for s in &step.sessions {
            for &(b, q) in &s.allocations {
                fm.matrix[s.region][b] += q;
            }
        }
    }
    out
}

/// Writes `edges_<year>.csv` (foreign flows) and `domestic_<year>.csv`.
pub fn export_network(log: &RunLog, year: i32, dir: &Path) -> Result<Option<FlowMatrix>> {
    let Some(fm) = flow_matrices(log).remove(&year) else {
        return Ok(None);
    };
    write_network(log, &fm, dir)?;
    Ok(Some(fm))
}

pub(crate) fn write_network(log: &RunLog, fm: &FlowMatrix, dir: &Path) -> Result<()> {
    let path = dir.join(format!("edges_{}.csv", fm.year));
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["year", "seller", "buyer", "tonnes"])
        .map_err(|e| Error::csv(&path, e))?;
    for e in fm.foreign_edges() {
        w.write_record([
            fm.year.to_string(),
            log.regions[e.seller].clone(),
            log.regions[e.buyer].clone(),
            e.tonnes.to_string(),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(format!("domestic_{}.csv", fm.year));
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["year", "region", "tonnes"])
        .map_err(|e| Error::csv(&path, e))?;
    for &r in &log.session_regions {
        w.write_record([fm.year.to_string(), log.regions[r].clone(), fm.domestic(r).to_string()])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
