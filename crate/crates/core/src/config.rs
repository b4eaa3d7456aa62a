//! Global model parameters.
//!
//! Config files are TOML with flat top-level keys. Parameter names follow
//! the original model code (`shareOfDemandToBeMoved`,
//! `toleranceInMovingDemand`, ...); unknown keys are rejected so typos do
//! not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum SupplyMode {
    /// Each harvest is spread evenly over the twelve following sessions;
    /// unsold stock rolls into the next session.
    #[default]
    Uniform,
    /// Remaining stock is divided equally among the sessions left before
    /// the next harvest.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum ProductionMode {
    /// Harvests come from the input production series.
    #[default]
    DataDriven,
    /// Harvests follow the price-driven target production rule.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct GlobalConfig {
    /// Steps per production cycle (tau).
    pub production_cycle: u32,
    /// iota: relative unit-cost gap needed before demand migrates.
    pub tolerance_in_moving_demand: f64,
    /// a_rp
    pub reservation_price_fix_cost: f64,
    /// b_rp
    pub reservation_price_slope: f64,
    /// b: oil needed to move one unit over a thousand kilometres.
    #[serde(alias = "transportCostsTuner slope")]
    pub transport_costs_tuner_slope: f64,
    /// a: fixed cost per thousand kilometres.
    #[serde(alias = "transportCostsTuner intercept")]
    pub transport_costs_tuner_intercept: f64,
    /// m
    pub share_of_demand_to_be_moved: f64,
    /// d
    pub percentage_of_price_mark_down_in_newly_accessible_markets: f64,
    /// Multiplies the initial quantity demanded at the average price.
    pub demand_function_intercept_tuner: f64,
    /// delta_D as a fraction: demand at price zero is (1 + delta_D) times
    /// the target.
    pub demand_function_slope_tuner: f64,
    pub min_price: f64,
    pub max_price: f64,
    pub average_price: f64,
    /// Price above which a buyer demands nothing (homogeneous across buyers).
    pub price_cap: f64,
    /// I_min: foreign curves demand zero below this quantity.
    pub minimum_importable_quantity: f64,
    /// c: share of the initial monthly demand treated as minimum consumption.
    pub minimum_consumption_share: f64,
    /// ppml
    pub producers_prices_memory_length: usize,
    /// p^h
    pub high_price_threshold: f64,
    /// p^l
    pub low_price_threshold: f64,
    /// delta Y^T; defaults to 0 for data-driven and 0.05 for adaptive production.
    pub percentage_change_of_target_production: Option<f64>,
    pub production_mode: ProductionMode,
    pub supply_mode: SupplyMode,
    pub export_policy_decision_interval: u32,
    pub import_policy_decision_interval: u32,
    /// Oil price used when no series is given or outside its range.
    pub oil_price: f64,
    /// CSV with `year,month,price` (or `year,price` for yearly values).
    pub oil_price_file: Option<PathBuf>,
    /// Steepness of the demand-deviation update.
    pub sigmoid_steepness: f64,
    pub seed: u64,
    #[serde(skip)]
    pub oil_series: Option<OilPrices>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            production_cycle: 12,
            tolerance_in_moving_demand: 0.0,
            reservation_price_fix_cost: 1.0,
            reservation_price_slope: 0.02,
            transport_costs_tuner_slope: 0.01,
            transport_costs_tuner_intercept: 0.05,
            share_of_demand_to_be_moved: 0.1,
            percentage_of_price_mark_down_in_newly_accessible_markets: 0.05,
            demand_function_intercept_tuner: 0.5,
            demand_function_slope_tuner: 0.15,
            min_price: 0.0,
            max_price: 10.0,
            average_price: 5.0,
            price_cap: 10.0,
            minimum_importable_quantity: 0.0,
            minimum_consumption_share: 0.5,
            producers_prices_memory_length: 12,
            high_price_threshold: 6.0,
            low_price_threshold: 4.0,
            percentage_change_of_target_production: None,
            production_mode: ProductionMode::DataDriven,
            supply_mode: SupplyMode::Uniform,
            export_policy_decision_interval: 1,
            import_policy_decision_interval: 1,
            oil_price: 20.0,
            oil_price_file: None,
            sigmoid_steepness: 1.0,
            seed: 0,
            oil_series: None,
        }
    }
}

impl GlobalConfig {
    /// Reads a TOML config; a relative `oilPriceFile` is resolved against
    /// the config file's directory and loaded eagerly.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: GlobalConfig = toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })?;
        if let Some(oil) = &config.oil_price_file {
            let resolved = match path.parent() {
                Some(dir) if oil.is_relative() => dir.join(oil),
                _ => oil.clone(),
            };
            config.oil_series = Some(OilPrices::from_csv(&resolved)?);
            config.oil_price_file = Some(resolved);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let m = self.share_of_demand_to_be_moved;
        if !(m > 0.0 && m <= 1.0) {
            return fail(format!("shareOfDemandToBeMoved must be in (0, 1], got {m}"));
        }
        if !(self.tolerance_in_moving_demand >= 0.0) {
            return fail("toleranceInMovingDemand must be >= 0".into());
        }
        let dd = self.demand_function_slope_tuner;
        if !(dd > 0.0 && dd < 1.0) {
            return fail(format!("demandFunctionSlopeTuner must be in (0, 1), got {dd}"));
        }
        if !(self.low_price_threshold < self.high_price_threshold) {
            return fail("lowPriceThreshold must be below highPriceThreshold".into());
        }
        if self.production_cycle == 0 {
            return fail("productionCycle must be >= 1".into());
        }
        if self.export_policy_decision_interval == 0 || self.import_policy_decision_interval == 0 {
            return fail("policy decision intervals must be >= 1".into());
        }
        if !(self.min_price <= self.average_price && self.average_price <= self.max_price) {
            return fail("averagePrice must lie within [minPrice, maxPrice]".into());
        }
        if !(self.price_cap > 0.0) {
            return fail("priceCap must be positive".into());
        }
        let d = self.percentage_of_price_mark_down_in_newly_accessible_markets;
        if !(0.0..1.0).contains(&d) {
            return fail(format!(
                "percentageOfPriceMarkDownInNewlyAccessibleMarkets must be in [0, 1), got {d}"
            ));
        }
        let nonneg = [
            ("reservationPriceFixCost", self.reservation_price_fix_cost),
            ("reservationPriceSlope", self.reservation_price_slope),
            ("transportCostsTunerSlope", self.transport_costs_tuner_slope),
            ("transportCostsTunerIntercept", self.transport_costs_tuner_intercept),
            ("demandFunctionInterceptTuner", self.demand_function_intercept_tuner),
            ("minimumImportableQuantity", self.minimum_importable_quantity),
            ("oilPrice", self.oil_price),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.minimum_consumption_share) {
            return fail("minimumConsumptionShare must be in [0, 1]".into());
        }
        if !(self.sigmoid_steepness > 0.0) {
            return fail("sigmoidSteepness must be positive".into());
        }
        if self.target_production_change() < 0.0 {
            return fail("percentageChangeOfTargetProduction must be >= 0".into());
        }
        Ok(())
    }

    pub fn target_production_change(&self) -> f64 {
        self.percentage_change_of_target_production
            .unwrap_or(match self.production_mode {
                ProductionMode::DataDriven => 0.0,
                ProductionMode::Adaptive => 0.05,
            })
    }

    /// Oil price for a calendar month (1-based).
    pub fn oil_price_at(&self, year: i32, month: u32) -> f64 {
        match &self.oil_series {
            Some(series) => series.at(year, month),
            None => self.oil_price,
        }
    }
}

/// Monthly oil price series keyed by calendar month.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OilPrices {
    monthly: BTreeMap<(i32, u32), f64>,
}

impl OilPrices {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, year: i32, month: u32, price: f64) {
        self.monthly.insert((year, month), price);
    }

    pub fn insert_year(&mut self, year: i32, price: f64) {
        for month in 1..=12 {
            self.insert(year, month, price);
        }
    }

    /// Nearest defined month: the first value before the series starts, the
    /// last one after it ends.
    pub fn at(&self, year: i32, month: u32) -> f64 {
        if let Some(v) = self.monthly.get(&(year, month)) {
            return *v;
        }
        self.monthly
            .range(..(year, month))
            .next_back()
            .or_else(|| self.monthly.iter().next())
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.monthly.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, u32, f64)> + '_ {
        self.monthly.iter().map(|(&(y, m), &p)| (y, m, p))
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (year_col, price_col) = match (col("year"), col("price")) {
            (Some(y), Some(p)) => (y, p),
            _ => {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line: 1,
                    field: "header".into(),
                    message: "expected `year` and `price` columns".into(),
                })
            }
        };
        let month_col = col("month");
        let mut series = OilPrices::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let line = i as u64 + 2;
            let field = |idx: usize, name: &str| -> Result<&str> {
                record.get(idx).map(str::trim).ok_or_else(|| Error::Parse {
                    file: path.to_path_buf(),
                    line,
                    field: name.into(),
                    message: "missing value".into(),
                })
            };
            let parse_err = |name: &str, v: &str| Error::Parse {
                file: path.to_path_buf(),
                line,
                field: name.into(),
                message: format!("cannot parse `{v}`"),
            };
            let y = field(year_col, "year")?;
            let year: i32 = y.parse().map_err(|_| parse_err("year", y))?;
            let p = field(price_col, "price")?;
            let price: f64 = p.parse().map_err(|_| parse_err("price", p))?;
            if !(price >= 0.0) {
                return Err(Error::Parse {
                    file: path.to_path_buf(),
                    line,
                    field: "price".into(),
                    message: "oil price must be >= 0".into(),
                });
            }
            match month_col {
                Some(mc) => {
                    let m = field(mc, "month")?;
                    let month: u32 = m.parse().map_err(|_| parse_err("month", m))?;
                    if !(1..=12).contains(&month) {
                        return Err(parse_err("month", m));
                    }
                    series.insert(year, month, price);
                }
                None => series.insert_year(year, price),
            }
        }
        Ok(series)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["year", "month", "price"])
            .map_err(|e| Error::csv(path, e))?;
        for (y, m, p) in self.iter() {
            w.write_record([y.to_string(), m.to_string(), p.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
