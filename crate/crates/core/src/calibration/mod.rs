//! Fitting simulated yearly world prices to an observed series.
//!
//! Five structural parameters are searched by differential evolution; the
//! yearly demand deviations are moved by a bounded sigmoid step towards
//! matching each year's normalized price. The two searches alternate.

pub mod de;

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::config::GlobalConfig;
use crate::data::{write_eta, BaseData};
use crate::par::Parallelism;
use crate::world::{build_world, RunLog};
use crate::{Error, Result};

pub use de::{differential_evolution, DeResult, DeSettings};

/// Quantity-weighted mean of session prices for one month of a step log.
fn monthly_weighted_price(step: &crate::world::StepReport) -> Option<f64> {
    let (value, quantity) = step
        .sessions
        .iter()
        .filter(|s| s.quantity > 0.0)
        .fold((0.0, 0.0), |(v, q), s| (v + s.price * s.quantity, q + s.quantity));
    (quantity > 0.0).then(|| value / quantity)
}

/// Yearly weighted world price: monthly weighted prices averaged over the
/// months of `year` that saw any trade.
pub fn weighted_world_price(log: &RunLog, year: i32) -> Option<f64> {
    let monthly: Vec<f64> = log
        .steps
        .iter()
        .filter(|s| s.year == year)
        .filter_map(monthly_weighted_price)
        .collect();
    (!monthly.is_empty()).then(|| monthly.iter().sum::<f64>() / monthly.len() as f64)
}

pub fn yearly_weighted_prices(log: &RunLog) -> Vec<(i32, Option<f64>)> {
    log.years()
        .into_iter()
        .map(|y| (y, weighted_world_price(log, y)))
        .collect()
}

/// Divides a series by its own mean.
pub fn normalize(series: &[f64]) -> Result<Vec<f64>> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Numeric(format!("cannot normalize a series with mean {mean}")));
    }
    Ok(series.iter().map(|v| v / mean).collect())
}

/// Sum of squared differences between the normalized series; infinite if
/// a simulated year is missing or the series cannot be normalized.
pub fn price_loss(simulated: &[Option<f64>], observed: &[f64]) -> f64 {
    if simulated.len() != observed.len() {
        return f64::INFINITY;
    }
    let Some(sim) = simulated.iter().copied().collect::<Option<Vec<f64>>>() else {
        return f64::INFINITY;
    };
    match (normalize(&sim), normalize(observed)) {
        (Ok(s), Ok(o)) => s.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum(),
        _ => f64::INFINITY,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `eta += sigmoid(beta * (simulated - observed)) * 0.02 - 0.01`, kept
/// inside (-1, 1). A simulated price above the observed one raises the
/// deviation, which lowers desired demand in that year.
///
/// The increment is evaluated as `0.01 * tanh(x / 2)`, the same quantity
/// without the cancellation, and capped just below 0.01 in magnitude so
/// that a saturated sigmoid cannot reach the bound after rounding.
pub fn eta_step(eta: f64, observed: f64, simulated: f64, beta: f64) -> f64 {
    let cap = 0.01 * (1.0 - 1e-9);
    let delta = (0.01 * (0.5 * beta * (simulated - observed)).tanh()).clamp(-cap, cap);
    let limit = 1.0 - 1e-9;
    (eta + delta).clamp(-limit, limit)
}

/// The five parameters searched by differential evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralParams {
    /// Transport fix cost per thousand km.
    pub transport_intercept: f64,
    pub share_moved: f64,
    pub markdown: f64,
    pub intercept_tuner: f64,
    pub slope_tuner: f64,
}

impl StructuralParams {
    pub const NAMES: [&'static str; 5] = [
        "transportCostsTunerIntercept",
        "shareOfDemandToBeMoved",
        "percentageOfPriceMarkDownInNewlyAccessibleMarkets",
        "demandFunctionInterceptTuner",
        "demandFunctionSlopeTuner",
    ];

    pub fn from_config(c: &GlobalConfig) -> Self {
        StructuralParams {
            transport_intercept: c.transport_costs_tuner_intercept,
            share_moved: c.share_of_demand_to_be_moved,
            markdown: c.percentage_of_price_mark_down_in_newly_accessible_markets,
            intercept_tuner: c.demand_function_intercept_tuner,
            slope_tuner: c.demand_function_slope_tuner,
        }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        StructuralParams {
            transport_intercept: x[0],
            share_moved: x[1],
            markdown: x[2],
            intercept_tuner: x[3],
            slope_tuner: x[4],
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.transport_intercept,
            self.share_moved,
            self.markdown,
            self.intercept_tuner,
            self.slope_tuner,
        ]
    }

    pub fn apply(self, config: &GlobalConfig) -> GlobalConfig {
        GlobalConfig {
            transport_costs_tuner_intercept: self.transport_intercept,
            share_of_demand_to_be_moved: self.share_moved,
            percentage_of_price_mark_down_in_newly_accessible_markets: self.markdown,
            demand_function_intercept_tuner: self.intercept_tuner,
            demand_function_slope_tuner: self.slope_tuner,
            ..config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct CalibrationSpec {
    /// Bounds in [`StructuralParams::NAMES`] order.
    pub bounds: [(f64, f64); 5],
    /// Observed yearly prices, one per simulated year.
    pub observed: Vec<f64>,
    /// CSV with `year,price`; used when `observed` is empty.
    pub observed_file: Option<PathBuf>,
    pub population: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub generations: usize,
    pub rounds: usize,
    /// Sigmoid steepness of the deviation update.
    pub beta: f64,
    /// Deviation sweeps per round.
    pub sweeps: usize,
    /// Sweeps stop once every yearly change is below this.
    pub sweep_tolerance: f64,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            bounds: [(0.0, 0.2), (0.01, 0.5), (0.0, 0.2), (0.2, 1.5), (0.05, 0.5)],
            observed: Vec::new(),
            observed_file: None,
            population: 30,
            differential_weight: 0.8,
            crossover_rate: 0.9,
            generations: 50,
            rounds: 3,
            beta: 1.0,
            sweeps: 20,
            sweep_tolerance: 1e-4,
            seed: 0,
        }
    }
}

impl CalibrationSpec {
    /// Reads a TOML spec; a relative `observedFile` is resolved against the
    /// spec's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: CalibrationSpec = toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })?;
        if spec.observed.is_empty() {
            if let Some(file) = &spec.observed_file {
                let resolved = match path.parent() {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                spec.observed = read_observed(&resolved)?.into_iter().map(|(_, p)| p).collect();
            }
        }
        Ok(spec)
    }

    pub fn validate(&self, years: usize) -> Result<()> {
        if self.observed.len() != years {
            return Err(Error::Config(format!(
                "{} observed prices for {years} simulated years",
                self.observed.len()
            )));
        }
        if self.observed.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("observed prices must be finite and >= 0".into()));
        }
        normalize(&self.observed)?;
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        for (name, (lo, hi)) in StructuralParams::NAMES.iter().zip(self.bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("bounds of {name} are invalid: [{lo}, {hi}]")));
            }
        }
        let (lo, hi) = self.bounds[1];
        if lo <= 0.0 || hi > 1.0 {
            return Err(Error::Config("shareOfDemandToBeMoved bounds must lie in (0, 1]".into()));
        }
        let (lo, hi) = self.bounds[4];
        if lo <= 0.0 || hi >= 1.0 {
            return Err(Error::Config("demandFunctionSlopeTuner bounds must lie in (0, 1)".into()));
        }
        let (lo, hi) = self.bounds[2];
        if lo < 0.0 || hi >= 1.0 {
            return Err(Error::Config("markdown bounds must lie in [0, 1)".into()));
        }
        if self.bounds[0].0 < 0.0 || self.bounds[3].0 < 0.0 {
            return Err(Error::Config("transport and intercept tuner bounds must be >= 0".into()));
        }
        Ok(())
    }

    fn de_settings(&self, stage: u64) -> DeSettings {
        DeSettings {
            population: self.population,
            weight: self.differential_weight,
            crossover: self.crossover_rate,
            generations: self.generations,
            seed: self.seed.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }
}

pub fn read_observed(path: &Path) -> Result<Vec<(i32, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i as u64 + 2;
        let get = |k: usize, name: &str| -> Result<&str> {
            rec.get(k).map(str::trim).ok_or_else(|| Error::Parse {
                file: path.to_path_buf(),
                line,
                field: name.into(),
                message: "missing value".into(),
            })
        };
        let bad = |name: &str, v: &str| Error::Parse {
            file: path.to_path_buf(),
            line,
            field: name.into(),
            message: format!("cannot parse `{v}`"),
        };
        let y = get(0, "year")?;
        let p = get(1, "price")?;
        out.push((y.parse().map_err(|_| bad("year", y))?, p.parse().map_err(|_| bad("price", p))?));
    }
    Ok(out)
}

/// Runs the model over all input years with the given parameters and
/// deviations and returns the yearly weighted prices.
pub fn simulate_prices(
    base: &BaseData,
    config: &GlobalConfig,
    params: StructuralParams,
    eta: &[f64],
) -> Result<Vec<Option<f64>>> {
    let inputs = base.prepare(eta)?;
    let mut world = build_world(&inputs, &params.apply(config))?;
    let log = world.run(base.years.len() * config.production_cycle as usize)?;
    Ok(base
        .years
        .iter()
        .map(|&y| weighted_world_price(&log, y))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Evolution,
    Deviation,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Evolution => "de",
            Stage::Deviation => "eta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub round: usize,
    pub stage: Stage,
    /// Generation or sweep number within the stage.
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub params: StructuralParams,
    pub eta: Vec<f64>,
    pub loss: f64,
    pub trace: Vec<TraceEntry>,
    pub years: Vec<i32>,
}

impl CalibrationResult {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("calibrated_params.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["parameter", "value"]).map_err(|e| Error::csv(&path, e))?;
        for (name, v) in StructuralParams::NAMES.iter().zip(self.params.to_vec()) {
            w.write_record([name.to_string(), v.to_string()])
                .map_err(|e| Error::csv(&path, e))?;
        }
        w.write_record(["loss".to_string(), self.loss.to_string()])
            .map_err(|e| Error::csv(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;

        write_eta(&dir.join("eta_d.csv"), &self.years, &self.eta)?;

        let path = dir.join("loss_trace.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["step", "round", "stage", "iteration", "loss"])
            .map_err(|e| Error::csv(&path, e))?;
        for (k, e) in self.trace.iter().enumerate() {
            w.write_record([
                k.to_string(),
                e.round.to_string(),
                e.stage.as_str().to_string(),
                e.iteration.to_string(),
                e.loss.to_string(),
            ])
            .map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Times a rejected deviation sweep is retried with half the steepness.
const SWEEP_HALVINGS: usize = 4;

/// Alternates differential evolution over the structural parameters with
/// sweeps of the yearly deviation update.
///
/// Round 0 is a plain DE search with all deviations at zero. Each further
/// round first runs up to `spec.sweeps` deviation sweeps, keeping a sweep
/// only if it does not raise the loss, then reruns DE warm-started from
/// the current best. The trace lists the best loss after every DE
/// generation and every accepted sweep, so it never increases.
pub fn nested_calibrate(
    spec: &CalibrationSpec,
    base: &BaseData,
    config: &GlobalConfig,
    mode: Parallelism,
) -> Result<CalibrationResult> {
    let ny = base.years.len();
    spec.validate(ny)?;
    let observed = &spec.observed;
    let observed_norm = normalize(observed)?;
    let loss_of = |params: StructuralParams, eta: &[f64]| -> f64 {
        match simulate_prices(base, config, params, eta) {
            Ok(sim) => price_loss(&sim, observed),
            Err(_) => f64::INFINITY,
        }
    };

    let mut eta = vec![0.0; ny];
    let mut trace = Vec::new();

    let evolve = |round: usize, eta: &[f64], warm: Option<StructuralParams>, trace: &mut Vec<TraceEntry>| {
        let seeds: Vec<Vec<f64>> = warm.map(|p| vec![p.to_vec()]).unwrap_or_default();
        let r = differential_evolution(
            |x| loss_of(StructuralParams::from_slice(x), eta),
            &spec.bounds,
            &spec.de_settings(round as u64),
            &seeds,
            mode,
        )?;
        trace.extend(r.history.iter().enumerate().map(|(g, &loss)| TraceEntry {
            round,
            stage: Stage::Evolution,
            iteration: g,
            loss,
        }));
        Ok::<_, Error>((StructuralParams::from_slice(&r.best), r.loss))
    };

    let (mut params, mut loss) = evolve(0, &eta, None, &mut trace)?;

    for round in 1..=spec.rounds {
        for sweep in 0..spec.sweeps {
            let Ok(sim) = simulate_prices(base, config, params, &eta) else {
                break;
            };
            let Some(sim) = sim.into_iter().collect::<Option<Vec<f64>>>() else {
                break;
            };
            let Ok(sim_norm) = normalize(&sim) else {
                break;
            };
            // a sweep that raises the loss is retried with a flatter sigmoid
            let mut accepted = None;
            let mut beta = spec.beta;
            for _ in 0..=SWEEP_HALVINGS {
                let candidate: Vec<f64> = eta
                    .iter()
                    .zip(observed_norm.iter().zip(&sim_norm))
                    .map(|(&e, (&p, &q))| eta_step(e, p, q, beta))
                    .collect();
                let candidate_loss = loss_of(params, &candidate);
                if candidate_loss <= loss {
                    accepted = Some((candidate, candidate_loss));
                    break;
                }
                beta *= 0.5;
            }
            let Some((candidate, candidate_loss)) = accepted else {
                break;
            };
            let largest = candidate
                .iter()
                .zip(&eta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            eta = candidate;
            loss = candidate_loss;
            trace.push(TraceEntry {
                round,
                stage: Stage::Deviation,
                iteration: sweep,
                loss,
            });
            if largest < spec.sweep_tolerance {
                break;
            }
        }
        let (p, l) = evolve(round, &eta, Some(params), &mut trace)?;
        if l <= loss {
            params = p;
            loss = l;
        }
    }

    Ok(CalibrationResult {
        params,
        eta,
        loss,
        trace,
        years: base.years.clone(),
    })
}
