//! World construction and the monthly step sequencer.
//!
//! Every region hosts a buyer; supplier regions also host a producer, and
//! each producer runs one market session. A step is one month and runs
//! seven phases in a fixed order (see [`Phase`]).

use std::collections::{BTreeMap, BTreeSet};

use crate::config::GlobalConfig;
use crate::demand::{
    transport_cost_kkm, update_buying_strategy, DemandBook, DemandCurve, SessionId, SessionQuote,
    StrategyParams, UnitCostTable,
};
use crate::geo::GeoPoint;
use crate::market::{clear_session, reservation_price, settle, Bid, SessionOutcome, SupplyCurve};
use crate::supply::{sessions_to_harvest, ProductionPlan, Producer};
use crate::{Error, Result};

pub use crate::data::PreparedInputs;

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    pub location: GeoPoint,
    pub has_producer: bool,
    pub has_buyer: bool,
    pub harvest_month: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Buyer {
    pub region: usize,
    pub import_allowed: bool,
    /// Yearly desired demand D~.
    pub desired_demand: Vec<f64>,
    /// Current monthly target, D~ / 12.
    pub monthly_target: f64,
    /// Shared slope of all curves.
    pub slope: f64,
    pub min_consumption: f64,
    pub curves: DemandBook,
    pub last_bought: f64,
    pub last_consumed: f64,
    /// Bookkeeping only: consumption equals purchases every step.
    pub inventory: f64,
    /// Quantity bought in each session during the previous step.
    pub last_purchases: BTreeMap<SessionId, f64>,
    /// Sessions open when the world was built; scales the per-session slope.
    initial_sessions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSession {
    /// Index into the producer list; also the session id.
    pub producer: usize,
    pub region: usize,
    pub last_price: f64,
    pub last_quantity: f64,
}

/// Monthly calendar starting in January of the first input year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub step: usize,
    pub start_year: i32,
    pub months_per_year: u32,
}

impl Clock {
    pub fn year_index(&self) -> usize {
        self.step / self.months_per_year as usize
    }

    pub fn year(&self) -> i32 {
        self.start_year + self.year_index() as i32
    }

    /// 1-based month of the year.
    pub fn month(&self) -> u32 {
        (self.step % self.months_per_year as usize) as u32 + 1
    }

    /// Step index of a calendar month.
    pub fn step_of(&self, year: i32, month: u32) -> Option<usize> {
        let offset = (year - self.start_year) as i64 * self.months_per_year as i64 + month as i64 - 1;
        usize::try_from(offset).ok()
    }
}

/// The seven phases of a step, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    ExportPolicy,
    ImportPolicy,
    BuyingStrategy,
    Clearing,
    Consumption,
    Production,
    TargetProduction,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::ExportPolicy,
        Phase::ImportPolicy,
        Phase::BuyingStrategy,
        Phase::Clearing,
        Phase::Consumption,
        Phase::Production,
        Phase::TargetProduction,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PolicyFlag {
    ExportAllowed,
    ImportAllowed,
}

/// Sets `flag` of `region` to `value` for steps `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvent {
    pub region: usize,
    pub flag: PolicyFlag,
    pub value: bool,
    pub start: usize,
    pub end: usize,
}

/// Policy windows; outside every window flags are open.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicySchedule {
    pub events: Vec<PolicyEvent>,
}

impl PolicySchedule {
    pub fn flag(&self, region: usize, flag: PolicyFlag, step: usize) -> bool {
        self.events
            .iter()
            .filter(|e| e.region == region && e.flag == flag && (e.start..=e.end).contains(&step))
            .map(|e| e.value)
            .next_back()
            .unwrap_or(true)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// First step touched by any event.
    pub fn first_step(&self) -> Option<usize> {
        self.events.iter().map(|e| e.start).min()
    }
}

/// Multiplies harvests of `region` that fall in steps `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldShock {
    pub region: usize,
    pub start: usize,
    pub end: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session: SessionId,
    /// Region of the producer running the session.
    pub region: usize,
    pub price: f64,
    pub quantity: f64,
    pub offered: f64,
    pub reservation_price: f64,
    pub producer_rationed: bool,
    pub buyers_rationed: bool,
    /// `(buyer region, tonnes)` for every participant, zero included.
    pub allocations: Vec<(usize, f64)>,
}

impl SessionRecord {
    pub fn participants(&self) -> usize {
        self.allocations.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionEvent {
    pub session: SessionId,
    pub region: usize,
    pub quantity: f64,
}

/// How often each buying-strategy rule changed a curve during a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub reallocations: usize,
    pub migrations: usize,
    pub entries: usize,
    pub min_consumption_shifts: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.reallocations + self.migrations + self.entries + self.min_consumption_shifts
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub year: i32,
    pub month: u32,
    /// In clearing order.
    pub sessions: Vec<SessionRecord>,
    /// Per buyer region.
    pub bought: Vec<f64>,
    pub consumed: Vec<f64>,
    pub production: Vec<ProductionEvent>,
    pub gates: GateCounts,
    /// Per producer: harvest minus sales during the step.
    pub producer_inventory_delta: Vec<f64>,
    /// Per buyer region.
    pub buyer_inventory_delta: Vec<f64>,
    /// Per producer, after the step.
    pub producer_inventory: Vec<f64>,
}

/// Everything a run produced, in step order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub regions: Vec<String>,
    /// Region index of each session.
    pub session_regions: Vec<usize>,
    pub start_year: i32,
    pub steps: Vec<StepReport>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.steps.iter().map(|s| s.year).collect();
        set.into_iter().collect()
    }

    pub fn production_events(&self) -> usize {
        self.steps.iter().map(|s| s.production.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct World {
    config: GlobalConfig,
    regions: Vec<Region>,
    buyers: Vec<Buyer>,
    producers: Vec<Producer>,
    sessions: Vec<MarketSession>,
    /// Session ids in clearing order.
    order: Vec<SessionId>,
    /// Hub distance in thousands of km, `[session][buyer]`.
    distance: Vec<Vec<f64>>,
    /// First-year production share of each session's producer.
    producer_weight: Vec<f64>,
    clock: Clock,
    years: Vec<i32>,
    policy: PolicySchedule,
    shocks: Vec<YieldShock>,
    freeze_year: Option<usize>,
}

/// Builds a world from prepared inputs.
///
/// Buyers start with one curve per open session. The per-session slope is
/// `d~ * delta_D / (p_avg * k)` with `k` open sessions, and the intercepts
/// split `kappa * d~` over sessions by producer size, so that with
/// `kappa = 1` the buyer's total schedule demands `d~` at `p_avg` and
/// `d~ (1 +- delta_D)` at zero and at twice `p_avg`. Producers hold the
/// stock they need to supply until their first harvest.
pub fn build_world(inputs: &PreparedInputs, config: &GlobalConfig) -> Result<World> {
    config.validate()?;
    if config.production_cycle != 12 {
        return Err(Error::Config(format!(
            "productionCycle must be 12 for a monthly calendar, got {}",
            config.production_cycle
        )));
    }
    inputs.validate()?;
    let ny = inputs.years.len();

    let regions: Vec<Region> = inputs
        .regions
        .iter()
        .map(|r| Region {
            id: r.id.clone(),
            location: r.location,
            has_producer: r.supplier,
            has_buyer: true,
            harvest_month: r.harvest_month,
        })
        .collect();

    let tau = config.production_cycle;
    let target_change = config.target_production_change();
    let mut producers = Vec::new();
    for (z, r) in inputs.regions.iter().enumerate().filter(|(_, r)| r.supplier) {
        let series = inputs.production[z].clone();
        if series.is_empty() {
            return Err(Error::Input(format!("supplier `{}` has an empty production series", r.id)));
        }
        let first = series[0];
        let plan = ProductionPlan {
            mode: config.production_mode,
            series,
            first_year: inputs.years[0],
            target_change,
            high_price: config.high_price_threshold,
            low_price: config.low_price_threshold,
        };
        let base = first / tau as f64;
        producers.push(Producer::new(
            z,
            r.id.clone(),
            r.harvest_month,
            plan,
            config.supply_mode,
            tau,
            config.producers_prices_memory_length,
            base * r.harvest_month as f64,
            base,
        ));
    }
    if producers.is_empty() {
        return Err(Error::Input("no supplier regions".into()));
    }

    let sessions: Vec<MarketSession> = producers
        .iter()
        .enumerate()
        .map(|(i, p)| MarketSession {
            producer: i,
            region: p.region,
            last_price: config.average_price,
            last_quantity: 0.0,
        })
        .collect();
    let mut order: Vec<SessionId> = (0..sessions.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&regions[sessions[a].region], &regions[sessions[b].region]);
        rb.location
            .latitude()
            .total_cmp(&ra.location.latitude())
            .then_with(|| ra.id.cmp(&rb.id))
    });

    let distance: Vec<Vec<f64>> = sessions
        .iter()
        .map(|s| {
            regions
                .iter()
                .map(|b| regions[s.region].location.distance_kkm(&b.location))
                .collect()
        })
        .collect();

    let first_total: f64 = producers.iter().map(|p| p.plan.series[0]).sum();
    let producer_weight: Vec<f64> = producers
        .iter()
        .map(|p| {
            if first_total > 0.0 {
                p.plan.series[0] / first_total
            } else {
                1.0 / producers.len() as f64
            }
        })
        .collect();

    let world_production: f64 = inputs.production.iter().map(|row| row[0]).sum();
    let world_demand: f64 = inputs.desired_demand.iter().map(|row| row[0]).sum();
    let mut buyers = Vec::with_capacity(regions.len());
    for (z, _) in regions.iter().enumerate() {
        let desired = inputs.desired_demand[z].clone();
        debug_assert_eq!(desired.len(), ny);
        let share = if world_demand > 0.0 { desired[0] / world_demand } else { 0.0 };
        let mut buyer = Buyer {
            region: z,
            import_allowed: true,
            monthly_target: 0.0,
            slope: 0.0,
            min_consumption: crate::demand::minimum_consumption(
                config.minimum_consumption_share,
                share,
                world_production,
                tau,
            ),
            curves: DemandBook::new(),
            last_bought: 0.0,
            last_consumed: 0.0,
            inventory: 0.0,
            last_purchases: BTreeMap::new(),
            initial_sessions: sessions.len(),
            desired_demand: desired,
        };
        // no minimum-consumption shift before the first session
        buyer.last_consumed = buyer.min_consumption;
        buyers.push(buyer);
    }

    let mut world = World {
        config: config.clone(),
        regions,
        buyers,
        producers,
        sessions,
        order,
        distance,
        producer_weight,
        clock: Clock {
            step: 0,
            start_year: inputs.years[0],
            months_per_year: tau,
        },
        years: inputs.years.clone(),
        policy: PolicySchedule::default(),
        shocks: Vec::new(),
        freeze_year: None,
    };
    for b in 0..world.buyers.len() {
        world.init_curves(b);
    }
    Ok(world)
}

impl World {
    pub fn config(&self) -> &GlobalConfig {
        &self.config
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn buyers(&self) -> &[Buyer] {
        &self.buyers
    }

    pub fn producers(&self) -> &[Producer] {
        &self.producers
    }

    pub fn sessions(&self) -> &[MarketSession] {
        &self.sessions
    }

    /// Session ids in clearing order.
    pub fn clearing_order(&self) -> &[SessionId] {
        &self.order
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn session_of_region(&self, region: usize) -> Option<SessionId> {
        self.sessions.iter().position(|s| s.region == region)
    }

    pub fn set_policy(&mut self, schedule: PolicySchedule) {
        self.policy = schedule;
    }

    pub fn policy(&self) -> &PolicySchedule {
        &self.policy
    }

    pub fn set_yield_shocks(&mut self, shocks: Vec<YieldShock>) {
        self.shocks = shocks;
    }

    /// From `year` on, production and desired demand repeat that year's
    /// values. `None` removes the freeze.
    pub fn set_freeze_year(&mut self, year: Option<i32>) -> Result<()> {
        self.freeze_year = match year {
            None => None,
            Some(y) => Some(
                self.years
                    .iter()
                    .position(|v| *v == y)
                    .ok_or_else(|| Error::Scenario(format!("freeze year {y} outside the input years")))?,
            ),
        };
        Ok(())
    }

    /// Whether a session admits a buyer under the current flags.
    pub fn is_open(&self, session: SessionId, buyer: usize) -> bool {
        let s = &self.sessions[session];
        s.region == buyer || (self.producers[s.producer].export_allowed && self.buyers[buyer].import_allowed)
    }

    pub fn transport_cost(&self, session: SessionId, buyer: usize, oil_price: f64) -> f64 {
        transport_cost_kkm(
            self.distance[session][buyer],
            oil_price,
            self.config.transport_costs_tuner_intercept,
            self.config.transport_costs_tuner_slope,
        )
    }

    /// Empty log carrying this world's region and session layout.
    pub fn new_log(&self) -> RunLog {
        RunLog {
            regions: self.regions.iter().map(|r| r.id.clone()).collect(),
            session_regions: self.sessions.iter().map(|s| s.region).collect(),
            start_year: self.clock.start_year,
            steps: Vec::new(),
        }
    }

    pub fn run(&mut self, months: usize) -> Result<RunLog> {
        let mut log = self.new_log();
        self.run_into(&mut log, months)?;
        Ok(log)
    }

    pub fn run_into(&mut self, log: &mut RunLog, months: usize) -> Result<()> {
        log.steps.reserve(months);
        for _ in 0..months {
            log.steps.push(self.step()?);
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<StepReport> {
        self.step_observed(|_| {})
    }

    /// Runs one step, calling `observer` at the start of every phase.
    pub fn step_observed(&mut self, mut observer: impl FnMut(Phase)) -> Result<StepReport> {
        let t = self.clock.step;
        let (year, month) = (self.clock.year(), self.clock.month());
        let year_index = self.effective_year(self.clock.year_index());
        let oil = self.config.oil_price_at(year, month);
        let nb = self.buyers.len();
        let np = self.producers.len();
        let mut report = StepReport {
            step: t,
            year,
            month,
            bought: vec![0.0; nb],
            consumed: vec![0.0; nb],
            producer_inventory_delta: vec![0.0; np],
            buyer_inventory_delta: vec![0.0; nb],
            ..StepReport::default()
        };

        observer(Phase::ExportPolicy);
        if t.is_multiple_of(self.config.export_policy_decision_interval as usize) {
            for p in &mut self.producers {
                p.export_allowed = self.policy.flag(p.region, PolicyFlag::ExportAllowed, t);
            }
        }

        observer(Phase::ImportPolicy);
        if t.is_multiple_of(self.config.import_policy_decision_interval as usize) {
            for b in &mut self.buyers {
                b.import_allowed = self.policy.flag(b.region, PolicyFlag::ImportAllowed, t);
            }
        }

        observer(Phase::BuyingStrategy);
        if month == 1 && t > 0 {
            for b in 0..nb {
                self.reanchor(b, year_index)?;
            }
        }
        report.gates = self.update_strategies(oil);

        observer(Phase::Clearing);
        let rp = reservation_price(
            self.config.reservation_price_fix_cost,
            self.config.reservation_price_slope,
            oil,
        );
        for b in &mut self.buyers {
            b.last_purchases.clear();
        }
        for k in 0..self.order.len() {
            let s = self.order[k];
            let record = self.clear(s, month, rp);
            report.producer_inventory_delta[s] -= record.quantity;
            for &(b, q) in &record.allocations {
                report.bought[b] += q;
                report.buyer_inventory_delta[b] += q;
            }
            report.sessions.push(record);
        }

        observer(Phase::Consumption);
        for (b, buyer) in self.buyers.iter_mut().enumerate() {
            let bought = report.bought[b];
            buyer.last_bought = bought;
            buyer.last_consumed = bought;
            buyer.inventory -= bought;
            report.consumed[b] = bought;
            report.buyer_inventory_delta[b] -= bought;
        }

        observer(Phase::Production);
        let mut harvested = Vec::new();
        for (i, p) in self.producers.iter_mut().enumerate() {
            if p.harvest_month != month {
                continue;
            }
            let shock: f64 = self
                .shocks
                .iter()
                .filter(|s| s.region == p.region && (s.start..=s.end).contains(&t))
                .map(|s| s.multiplier)
                .product();
            let quantity = p.produce(year_index, shock)?;
            report.producer_inventory_delta[i] += quantity;
            report.production.push(ProductionEvent {
                session: i,
                region: p.region,
                quantity,
            });
            harvested.push(i);
        }

        observer(Phase::TargetProduction);
        for i in harvested {
            self.producers[i].update_target_production();
        }

        report.producer_inventory = self.producers.iter().map(|p| p.inventory).collect();
        self.clock.step += 1;
        Ok(report)
    }

    fn effective_year(&self, year_index: usize) -> usize {
        match self.freeze_year {
            Some(f) => year_index.min(f),
            None => year_index,
        }
    }

    fn desired(&self, buyer: usize, year_index: usize) -> Result<f64> {
        self.buyers[buyer]
            .desired_demand
            .get(year_index)
            .copied()
            .ok_or_else(|| Error::MissingYear {
                producer: self.regions[buyer].id.clone(),
                year: self.clock.start_year + year_index as i32,
            })
    }

    fn per_session_slope(&self, target: f64, sessions: usize) -> f64 {
        if target <= 0.0 || sessions == 0 {
            return 0.0;
        }
        target * self.config.demand_function_slope_tuner / (self.config.average_price * sessions as f64)
    }

    fn init_curves(&mut self, b: usize) {
        let target = self.buyers[b].desired_demand[0] / self.config.production_cycle as f64;
        let open: Vec<SessionId> = (0..self.sessions.len()).filter(|&s| self.is_open(s, b)).collect();
        let slope = self.per_session_slope(target, open.len());
        let weight_sum: f64 = open.iter().map(|&s| self.producer_weight[s]).sum();
        let kappa = self.config.demand_function_intercept_tuner;
        let p_avg = self.config.average_price;
        let mut book = DemandBook::new();
        for &s in &open {
            let w = if weight_sum > 0.0 {
                self.producer_weight[s] / weight_sum
            } else {
                1.0 / open.len() as f64
            };
            book.insert(s, self.curve(b, s, kappa * w * target + slope * p_avg, slope));
        }
        let buyer = &mut self.buyers[b];
        buyer.monthly_target = target;
        buyer.slope = slope;
        buyer.initial_sessions = open.len();
        buyer.curves = book;
    }

    fn curve(&self, buyer: usize, session: SessionId, intercept: f64, slope: f64) -> DemandCurve {
        let floor = if self.sessions[session].region == buyer {
            0.0
        } else {
            self.config.minimum_importable_quantity
        };
        DemandCurve::new(intercept, slope, self.config.price_cap, floor)
    }

    /// Re-targets a buyer's curves on the new year's desired demand while
    /// keeping the split across sessions it has learned.
    fn reanchor(&mut self, b: usize, year_index: usize) -> Result<()> {
        let target = self.desired(b, year_index)? / self.config.production_cycle as f64;
        let p_avg = self.config.average_price;
        let kappa = self.config.demand_function_intercept_tuner;
        let old_slope = self.buyers[b].slope;
        let slope = self.per_session_slope(target, self.buyers[b].initial_sessions);
        let at_average: Vec<(SessionId, f64)> = self.buyers[b]
            .curves
            .iter()
            .map(|(s, c)| (s, (c.intercept - old_slope * p_avg).max(0.0)))
            .collect();
        let mut total: f64 = at_average.iter().map(|(_, q)| q).sum();
        let weights: Vec<(SessionId, f64)> = if total > 0.0 {
            at_average
        } else {
            total = at_average.iter().map(|&(s, _)| self.producer_weight[s]).sum();
            at_average.iter().map(|&(s, _)| (s, self.producer_weight[s])).collect()
        };
        let mut book = DemandBook::new();
        for (s, w) in weights {
            let share = if total > 0.0 { w / total } else { 0.0 };
            book.insert(s, self.curve(b, s, kappa * share * target + slope * p_avg, slope));
        }
        let buyer = &mut self.buyers[b];
        buyer.monthly_target = target;
        buyer.slope = slope;
        buyer.curves = book;
        Ok(())
    }

    fn update_strategies(&mut self, oil: f64) -> GateCounts {
        let params = StrategyParams {
            tolerance: self.config.tolerance_in_moving_demand,
            share_moved: self.config.share_of_demand_to_be_moved,
            markdown: self.config.percentage_of_price_mark_down_in_newly_accessible_markets,
            price_cap: self.config.price_cap,
            min_importable: self.config.minimum_importable_quantity,
        };
        let mut gates = GateCounts::default();
        for b in 0..self.buyers.len() {
            let mut table = UnitCostTable::new();
            for s in self.buyers[b].curves.sessions() {
                let bought = self.buyers[b].last_purchases.get(&s).copied().unwrap_or(0.0);
                table.insert(s, self.sessions[s].last_price, self.transport_cost(s, b, oil), bought);
            }
            let open: Vec<SessionQuote> = (0..self.sessions.len())
                .filter(|&s| self.is_open(s, b))
                .map(|s| SessionQuote {
                    session: s,
                    last_price: self.sessions[s].last_price,
                    transport: self.transport_cost(s, b, oil),
                    domestic: self.sessions[s].region == b,
                })
                .collect();
            let buyer = &mut self.buyers[b];
            let r = update_buying_strategy(
                &mut buyer.curves,
                &table,
                &open,
                buyer.slope,
                buyer.last_consumed,
                buyer.min_consumption,
                &params,
            );
            gates.reallocations += r.reallocations.len();
            gates.migrations += usize::from(r.migration.is_some_and(|m| m.quantity > 0.0));
            gates.entries += r.entered.len();
            gates.min_consumption_shifts += usize::from(r.min_consumption_shift > 0.0);
        }
        gates
    }

    fn clear(&mut self, s: SessionId, month: u32, rp: f64) -> SessionRecord {
        let region = self.sessions[s].region;
        let producer = &mut self.producers[self.sessions[s].producer];
        let offered = producer.allocate_monthly_supply(sessions_to_harvest(month, producer.harvest_month));
        let bids: Vec<Bid> = self
            .buyers
            .iter()
            .filter_map(|b| b.curves.get(s).map(|c| Bid { buyer: b.region, curve: *c }))
            .collect();
        let outcome = if bids.is_empty() {
            SessionOutcome::no_trade(self.sessions[s].last_price, offered)
        } else {
            clear_session(
                SupplyCurve {
                    quantity: offered,
                    reservation_price: rp,
                },
                &bids,
            )
        };
        let buyers = &mut self.buyers;
        settle(&outcome, offered, &mut producer.inventory, |b, q| {
            buyers[b].inventory += q;
            *buyers[b].last_purchases.entry(s).or_insert(0.0) += q;
        });
        producer.record_session(outcome.price, outcome.quantity);
        let session = &mut self.sessions[s];
        session.last_price = outcome.price;
        session.last_quantity = outcome.quantity;
        SessionRecord {
            session: s,
            region,
            price: outcome.price,
            quantity: outcome.quantity,
            offered,
            reservation_price: rp,
            producer_rationed: outcome.producer_rationed,
            buyers_rationed: outcome.buyers_rationed,
            allocations: outcome.allocations,
        }
    }
}
