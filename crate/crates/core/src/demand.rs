//! Buying-strategy update and demand-curve geometry.
//!
//! Every buyer keeps one linear demand curve per market session it attends.
//! All curves of a buyer share the same slope; the strategy update only
//! moves intercepts (horizontal shifts at fixed slope).

use std::collections::BTreeMap;

use crate::geo::GeoPoint;

/// Sessions are identified by the index of the producer that runs them.
pub type SessionId = usize;

/// Linear schedule `max(0, intercept - slope * p)`, zero above `price_cap`.
///
/// A positive `floor` (the minimum importable quantity) zeroes any quantity
/// below it; domestic curves carry a zero floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandCurve {
    pub intercept: f64,
    pub slope: f64,
    pub price_cap: f64,
    pub floor: f64,
}

impl DemandCurve {
    pub fn new(intercept: f64, slope: f64, price_cap: f64, floor: f64) -> Self {
        DemandCurve {
            intercept: intercept.max(0.0),
            slope,
            price_cap,
            floor,
        }
    }

    /// Reference schedule of a buyer with monthly target `target`: it
    /// demands `target` at `average_price` and `target * (1 ± delta_d)` at
    /// price zero and at twice the average price.
    pub fn initial(target: f64, delta_d: f64, average_price: f64, price_cap: f64) -> Self {
        DemandCurve {
            intercept: target * (1.0 + delta_d),
            slope: target * delta_d / average_price,
            price_cap,
            floor: 0.0,
        }
    }

    /// Quantity before the minimum-importable floor is applied.
    pub fn raw_quantity(&self, price: f64) -> f64 {
        if price > self.price_cap {
            0.0
        } else {
            (self.intercept - self.slope * price).max(0.0)
        }
    }

    pub fn quantity(&self, price: f64) -> f64 {
        let q = self.raw_quantity(price);
        if self.floor > 0.0 && q < self.floor {
            0.0
        } else {
            q
        }
    }

    /// Highest price at which the curve still demands a positive quantity,
    /// or `None` if it never does.
    pub fn last_positive_price(&self) -> Option<f64> {
        let threshold = self.floor.max(0.0);
        if self.intercept <= 0.0 || self.intercept < threshold {
            return None;
        }
        if self.slope <= 0.0 {
            return Some(self.price_cap);
        }
        let p = (self.intercept - threshold) / self.slope;
        Some(p.min(self.price_cap))
    }

    fn shift(&mut self, delta: f64) {
        self.intercept = (self.intercept + delta).max(0.0);
    }
}

/// Delivered unit cost components for one (buyer, session) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCost {
    pub session: SessionId,
    /// Last cleared price of the session.
    pub price: f64,
    pub transport: f64,
    /// `price + transport`
    pub p_plus: f64,
    /// Quantity the buyer obtained there in the previous step.
    pub bought: f64,
}

/// Unit costs of the sessions a buyer attended in the previous step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitCostTable {
    entries: BTreeMap<SessionId, UnitCost>,
}

impl UnitCostTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, session: SessionId, price: f64, transport: f64, bought: f64) {
        self.entries.insert(
            session,
            UnitCost {
                session,
                price,
                transport,
                p_plus: price + transport,
                bought,
            },
        );
    }

    pub fn get(&self, session: SessionId) -> Option<&UnitCost> {
        self.entries.get(&session)
    }

    pub fn bought(&self, session: SessionId) -> f64 {
        self.entries.get(&session).map_or(0.0, |e| e.bought)
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnitCost> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lowest unit cost among sessions where something was actually bought.
    pub fn cheapest_purchase(&self) -> Option<f64> {
        self.entries
            .values()
            .filter(|e| e.bought > 0.0)
            .map(|e| e.p_plus)
            .min_by(f64::total_cmp)
    }
}

/// `a * kkm + b * oil * kkm`, with `kkm` the haversine distance in thousands of km.
pub fn transport_cost(from: &GeoPoint, to: &GeoPoint, oil_price: f64, a: f64, b: f64) -> f64 {
    transport_cost_kkm(from.distance_kkm(to), oil_price, a, b)
}

pub fn transport_cost_kkm(kkm: f64, oil_price: f64, a: f64, b: f64) -> f64 {
    a * kkm + b * oil_price * kkm
}

/// Sessions in `candidates` that appear in `table`, cheapest delivered cost
/// first; equal costs keep session-id order.
pub fn rank_sessions(table: &UnitCostTable, candidates: &[SessionId]) -> Vec<SessionId> {
    let mut ranked: Vec<&UnitCost> = candidates.iter().filter_map(|s| table.get(*s)).collect();
    ranked.sort_by(|a, b| a.p_plus.total_cmp(&b.p_plus).then(a.session.cmp(&b.session)));
    ranked.dedup_by_key(|e| e.session);
    ranked.into_iter().map(|e| e.session).collect()
}

/// Minimum monthly consumption `c * share * P0 / tau`.
pub fn minimum_consumption(share_of_min: f64, market_share: f64, world_production: f64, tau: u32) -> f64 {
    share_of_min * market_share * world_production / tau as f64
}

/// The curves a buyer sends to the sessions it attends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandBook {
    curves: BTreeMap<SessionId, DemandCurve>,
}

impl DemandBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, session: SessionId, curve: DemandCurve) {
        self.curves.insert(session, curve);
    }

    pub fn remove(&mut self, session: SessionId) -> Option<DemandCurve> {
        self.curves.remove(&session)
    }

    pub fn get(&self, session: SessionId) -> Option<&DemandCurve> {
        self.curves.get(&session)
    }

    pub fn get_mut(&mut self, session: SessionId) -> Option<&mut DemandCurve> {
        self.curves.get_mut(&session)
    }

    pub fn contains(&self, session: SessionId) -> bool {
        self.curves.contains_key(&session)
    }

    pub fn sessions(&self) -> Vec<SessionId> {
        self.curves.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SessionId, &DemandCurve)> {
        self.curves.iter().map(|(s, c)| (*s, c))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (SessionId, &mut DemandCurve)> {
        self.curves.iter_mut().map(|(s, c)| (*s, c))
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn total_intercept(&self) -> f64 {
        self.curves.values().map(|c| c.intercept).sum()
    }

    /// Total quantity demanded over all sessions at a common price.
    pub fn quantity_at(&self, price: f64) -> f64 {
        self.curves.values().map(|c| c.quantity(price)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reallocation {
    pub closed: SessionId,
    /// Session that absorbed the lost quantity, if any was open.
    pub to: Option<SessionId>,
    pub quantity: f64,
}

/// Drops the curves of sessions that are no longer open and adds the
/// quantity previously bought there to the cheapest session still attended.
pub fn reallocate_closed_sessions(
    book: &mut DemandBook,
    closed: &[SessionId],
    table: &UnitCostTable,
) -> Vec<Reallocation> {
    let mut out = Vec::with_capacity(closed.len());
    for &session in closed {
        if book.remove(session).is_none() {
            continue;
        }
        let lost = table.bought(session);
        let remaining = book.sessions();
        let to = rank_sessions(table, &remaining).first().copied();
        if let (Some(dest), true) = (to, lost > 0.0) {
            if let Some(curve) = book.get_mut(dest) {
                curve.shift(lost);
            }
        }
        out.push(Reallocation {
            closed: session,
            to,
            quantity: if to.is_some() { lost } else { 0.0 },
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Migration {
    pub from: SessionId,
    pub to: SessionId,
    pub quantity: f64,
}

/// Moves `share` of the quantity bought in the most expensive session to
/// the cheapest one when `(1 + tolerance) * p+_min < p+_max`.
///
/// Returns `None` when the gate stays closed. The source intercept never
/// goes below zero, so the moved quantity may be smaller than requested.
pub fn move_demand_to_cheapest(
    book: &mut DemandBook,
    table: &UnitCostTable,
    tolerance: f64,
    share: f64,
) -> Option<Migration> {
    let ranked = rank_sessions(table, &book.sessions());
    if ranked.len() < 2 {
        return None;
    }
    let (cheap, dear) = (ranked[0], ranked[ranked.len() - 1]);
    let (p_min, p_max) = (table.get(cheap)?.p_plus, table.get(dear)?.p_plus);
    if !((1.0 + tolerance) * p_min < p_max) {
        return None;
    }
    let wanted = share * table.bought(dear);
    let source = book.get_mut(dear)?;
    let moved = wanted.min(source.intercept).max(0.0);
    source.intercept -= moved;
    if let Some(dest) = book.get_mut(cheap) {
        dest.intercept += moved;
    }
    Some(Migration {
        from: dear,
        to: cheap,
        quantity: moved,
    })
}

/// Curve for a session that just became accessible.
///
/// With a purchase benchmark `p+_min` the curve reaches zero at
/// `(p+_min - transport) * (1 - markdown)`; without one it reaches zero at
/// the session's last observed price.
pub fn enter_new_session(
    slope: f64,
    cheapest_unit_cost: Option<f64>,
    transport: f64,
    last_price: f64,
    markdown: f64,
    price_cap: f64,
    floor: f64,
) -> DemandCurve {
    let zero_price = match cheapest_unit_cost {
        Some(p_plus) => (p_plus - transport) * (1.0 - markdown),
        None => last_price,
    };
    DemandCurve::new((slope * zero_price).max(0.0), slope, price_cap, floor)
}

/// Shifts every curve by `max(cmin - consumed, 0) / #sessions`; returns the
/// per-curve shift.
pub fn minimum_consumption_shift(book: &mut DemandBook, consumed: f64, cmin: f64) -> f64 {
    if book.is_empty() {
        return 0.0;
    }
    let shift = (cmin - consumed).max(0.0) / book.len() as f64;
    if shift > 0.0 {
        for (_, curve) in book.iter_mut() {
            curve.shift(shift);
        }
    }
    shift
}

/// What a buyer knows about a session open to it this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionQuote {
    pub session: SessionId,
    pub last_price: f64,
    pub transport: f64,
    /// The session belongs to the buyer's own producer.
    pub domestic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub tolerance: f64,
    pub share_moved: f64,
    pub markdown: f64,
    pub price_cap: f64,
    pub min_importable: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyReport {
    pub reallocations: Vec<Reallocation>,
    pub migration: Option<Migration>,
    pub entered: Vec<SessionId>,
    pub min_consumption_shift: f64,
}

impl StrategyReport {
    /// Whether any rule changed a curve or the set of attended sessions.
    pub fn any_gate_fired(&self) -> bool {
        !self.reallocations.is_empty()
            || self.migration.is_some_and(|m| m.quantity > 0.0)
            || !self.entered.is_empty()
            || self.min_consumption_shift > 0.0
    }
}

/// Full buying-strategy update: closed-session reallocation, migration
/// towards the cheapest session, entry into newly open sessions, then the
/// minimum-consumption shift.
///
/// `table` describes the sessions attended in the previous step; `open`
/// lists the sessions the buyer may attend now.
pub fn update_buying_strategy(
    book: &mut DemandBook,
    table: &UnitCostTable,
    open: &[SessionQuote],
    slope: f64,
    consumed: f64,
    cmin: f64,
    params: &StrategyParams,
) -> StrategyReport {
    let closed: Vec<SessionId> = book
        .sessions()
        .into_iter()
        .filter(|s| !open.iter().any(|q| q.session == *s))
        .collect();
    let reallocations = reallocate_closed_sessions(book, &closed, table);
    let migration = move_demand_to_cheapest(book, table, params.tolerance, params.share_moved);

    let benchmark = table.cheapest_purchase();
    let mut entered = Vec::new();
    let fresh: Vec<&SessionQuote> = open.iter().filter(|q| !book.contains(q.session)).collect();
    for quote in fresh {
        let floor = if quote.domestic { 0.0 } else { params.min_importable };
        let curve = enter_new_session(
            slope,
            benchmark,
            quote.transport,
            quote.last_price,
            params.markdown,
            params.price_cap,
            floor,
        );
        book.insert(quote.session, curve);
        entered.push(quote.session);
    }

    let min_consumption_shift = minimum_consumption_shift(book, consumed, cmin);
    StrategyReport {
        reallocations,
        migration,
        entered,
        min_consumption_shift,
    }
}
