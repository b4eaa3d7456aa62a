//! Production events, offered quantities and the target-production rule.

use std::collections::VecDeque;

use crate::config::{ProductionMode, SupplyMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionPlan {
    pub mode: ProductionMode,
    /// Yearly production, indexed from the first simulated year.
    pub series: Vec<f64>,
    pub first_year: i32,
    /// delta Y^T
    pub target_change: f64,
    /// p^h
    pub high_price: f64,
    /// p^l
    pub low_price: f64,
}

/// Multiplies `target` by `1 + change` above `high`, by `1 - change` below
/// `low`, and leaves it alone in between.
pub fn target_production_rule(target: f64, mean_price: f64, change: f64, high: f64, low: f64) -> f64 {
    if mean_price > high {
        target * (1.0 + change)
    } else if mean_price < low {
        target * (1.0 - change)
    } else {
        target
    }
}

/// Number of sessions left before the next harvest, counting the current
/// one. Harvests happen after the session of the harvest month.
pub fn sessions_to_harvest(month: u32, harvest_month: u32) -> u32 {
    (harvest_month + 12 - month) % 12 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Producer {
    pub region: usize,
    pub name: String,
    pub harvest_month: u32,
    pub inventory: f64,
    pub export_allowed: bool,
    pub plan: ProductionPlan,
    /// Y^T
    pub target_production: f64,
    /// Quantity offered in the current (or latest) session.
    pub offered: f64,
    supply_mode: SupplyMode,
    cycle: u32,
    monthly_base: f64,
    rollover: f64,
    memory_len: usize,
    price_memory: VecDeque<f64>,
}

impl Producer {
    /// A producer whose stock holds `preload` and who offers
    /// `monthly_base` per session until its first harvest.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        region: usize,
        name: impl Into<String>,
        harvest_month: u32,
        plan: ProductionPlan,
        supply_mode: SupplyMode,
        cycle: u32,
        memory_len: usize,
        preload: f64,
        monthly_base: f64,
    ) -> Self {
        let target_production = plan.series.first().copied().unwrap_or(0.0);
        Producer {
            region,
            name: name.into(),
            harvest_month,
            inventory: preload,
            export_allowed: true,
            plan,
            target_production,
            offered: 0.0,
            supply_mode,
            cycle,
            monthly_base,
            rollover: 0.0,
            memory_len,
            price_memory: VecDeque::with_capacity(memory_len),
        }
    }

    /// Harvest for the given year offset, times `shock`.
    pub fn harvest_quantity(&self, year_index: usize, shock: f64) -> Result<f64> {
        let base = match self.plan.mode {
            ProductionMode::DataDriven => {
                *self
                    .plan
                    .series
                    .get(year_index)
                    .ok_or_else(|| Error::MissingYear {
                        producer: self.name.clone(),
                        year: self.plan.first_year + year_index as i32,
                    })?
            }
            ProductionMode::Adaptive => self.target_production,
        };
        Ok(base * shock)
    }

    /// Adds the harvest to the stock and resets the offer schedule; returns
    /// the harvested quantity.
    pub fn produce(&mut self, year_index: usize, shock: f64) -> Result<f64> {
        let harvest = self.harvest_quantity(year_index, shock)?;
        // whatever is still in stock is offered on top of the new monthly share
        self.rollover = self.inventory;
        self.monthly_base = harvest / self.cycle as f64;
        self.inventory += harvest;
        Ok(harvest)
    }

    /// Quantity offered in this session.
    pub fn allocate_monthly_supply(&mut self, sessions_to_harvest: u32) -> f64 {
        let offer = match self.supply_mode {
            SupplyMode::Uniform => self.monthly_base + self.rollover,
            SupplyMode::Generic => self.inventory / sessions_to_harvest.max(1) as f64,
        };
        self.offered = offer.min(self.inventory).max(0.0);
        self.offered
    }

    /// Part of the schedule for the current session that is new stock
    /// rather than unsold quantity carried over.
    pub fn monthly_base(&self) -> f64 {
        self.monthly_base
    }

    pub fn rollover(&self) -> f64 {
        self.rollover
    }

    pub fn record_session(&mut self, price: f64, sold: f64) {
        self.rollover = (self.offered - sold).max(0.0);
        if self.memory_len > 0 {
            if self.price_memory.len() == self.memory_len {
                self.price_memory.pop_front();
            }
            self.price_memory.push_back(price);
        }
    }

    pub fn price_memory(&self) -> impl Iterator<Item = f64> + '_ {
        self.price_memory.iter().copied()
    }

    /// Applies the target-production rule to the mean remembered price.
    pub fn update_target_production(&mut self) -> f64 {
        if self.price_memory.is_empty() {
            return self.target_production;
        }
        let mean = self.price_memory.iter().sum::<f64>() / self.price_memory.len() as f64;
        self.target_production = target_production_rule(
            self.target_production,
            mean,
            self.plan.target_change,
            self.plan.high_price,
            self.plan.low_price,
        );
        self.target_production
    }
}
