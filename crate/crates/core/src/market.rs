//! Session clearing.
//!
//! A session has one seller with a vertical supply curve floored at the
//! reservation price, and any number of buyers with linear demand curves.
//! Buyer curves are summed horizontally into a piecewise-linear aggregate
//! which is intersected with the supply curve.

use crate::demand::DemandCurve;

/// Offered quantity `y` at or above the reservation price `rp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplyCurve {
    pub quantity: f64,
    pub reservation_price: f64,
}

/// `a_rp + b_rp * oil_price`
pub fn reservation_price(fix_cost: f64, slope: f64, oil_price: f64) -> f64 {
    fix_cost + slope * oil_price
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub buyer: usize,
    pub curve: DemandCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub price: f64,
    /// Sum of `allocations`.
    pub quantity: f64,
    /// Per-buyer quantities in bid order.
    pub allocations: Vec<(usize, f64)>,
    /// Part of the offer stayed unsold (clearing on the horizontal supply segment).
    pub producer_rationed: bool,
    /// Some buyer got less than its curve asks for at the cleared price.
    pub buyers_rationed: bool,
}

impl SessionOutcome {
    pub fn no_trade(price: f64, offered: f64) -> Self {
        SessionOutcome {
            price,
            quantity: 0.0,
            allocations: Vec::new(),
            producer_rationed: offered > 0.0,
            buyers_rationed: false,
        }
    }

    pub fn allocation(&self, buyer: usize) -> f64 {
        self.allocations
            .iter()
            .filter(|(b, _)| *b == buyer)
            .map(|(_, q)| q)
            .sum()
    }
}

/// Horizontal sum of demand curves.
#[derive(Debug, Clone)]
pub struct AggregateDemand<'a> {
    bids: &'a [Bid],
    /// Distinct prices where some curve stops demanding, ascending.
    breakpoints: Vec<f64>,
}

impl<'a> AggregateDemand<'a> {
    pub fn new(bids: &'a [Bid]) -> Self {
        let mut breakpoints: Vec<f64> = bids
            .iter()
            .filter_map(|b| b.curve.last_positive_price())
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        AggregateDemand { bids, breakpoints }
    }

    pub fn quantity(&self, price: f64) -> f64 {
        self.bids.iter().map(|b| b.curve.quantity(price)).sum()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Intercept and slope sums of the curves demanding a positive quantity
    /// on the open interval just above `price`.
    fn active_above(&self, price: f64) -> (f64, f64) {
        self.bids
            .iter()
            .filter(|b| b.curve.last_positive_price().is_some_and(|e| e > price))
            .fold((0.0, 0.0), |(i, s), b| (i + b.curve.intercept, s + b.curve.slope))
    }
}

enum Clearing {
    /// Demand at the reservation price does not exceed the offer.
    AtReservation,
    /// Aggregate demand crosses the offer on a linear piece.
    Crossing,
    /// Aggregate demand jumps over the offer at this price.
    Jump,
}

/// Clears one session at the lowest price where aggregate demand does not
/// exceed the offer.
///
/// When demand at the reservation price is below the offer the session
/// clears at the reservation price and the producer keeps the rest. When
/// aggregate demand drops discontinuously past the offer (a price cap or a
/// minimum-importable floor) the buyers whose curves stop at the clearing
/// price share what is left pro rata.
pub fn clear_session(supply: SupplyCurve, bids: &[Bid]) -> SessionOutcome {
    let offered = supply.quantity.max(0.0);
    let rp = supply.reservation_price;
    let aggregate = AggregateDemand::new(bids);

    let demand_at_rp = aggregate.quantity(rp);
    let (price, kind) = if demand_at_rp <= offered {
        (rp, Clearing::AtReservation)
    } else {
        find_crossing(&aggregate, rp, offered)
    };

    let mut allocations: Vec<(usize, f64)> =
        bids.iter().map(|b| (b.buyer, b.curve.quantity(price))).collect();
    let mut price = price;
    let mut buyers_rationed = false;
    match kind {
        Clearing::AtReservation => {}
        Clearing::Crossing => {
            // the closed-form crossing can overshoot the offer by rounding
            let mut total: f64 = allocations.iter().map(|(_, q)| q).sum();
            let mut tries = 0;
            while total > offered && tries < 64 {
                price = next_up(price);
                allocations = bids.iter().map(|b| (b.buyer, b.curve.quantity(price))).collect();
                total = allocations.iter().map(|(_, q)| q).sum();
                tries += 1;
            }
            if total > offered {
                scale_down(&mut allocations, offered);
            }
        }
        Clearing::Jump => {
            let continuing: f64 = bids
                .iter()
                .zip(&allocations)
                .filter(|(b, _)| b.curve.last_positive_price().is_some_and(|e| e > price))
                .map(|(_, (_, q))| q)
                .sum();
            let stopping: f64 = bids
                .iter()
                .zip(&allocations)
                .filter(|(b, _)| b.curve.last_positive_price() == Some(price))
                .map(|(_, (_, q))| q)
                .sum();
            let left = (offered - continuing).max(0.0);
            if stopping > 0.0 && left < stopping {
                for (bid, alloc) in bids.iter().zip(allocations.iter_mut()) {
                    if bid.curve.last_positive_price() == Some(price) {
                        alloc.1 *= left / stopping;
                    }
                }
                buyers_rationed = true;
            }
            let total: f64 = allocations.iter().map(|(_, q)| q).sum();
            if total > offered {
                scale_down(&mut allocations, offered);
            }
        }
    }

    let quantity: f64 = allocations.iter().map(|(_, q)| q).sum();
    SessionOutcome {
        price,
        quantity,
        allocations,
        producer_rationed: matches!(kind, Clearing::AtReservation) && quantity < offered,
        buyers_rationed,
    }
}

fn find_crossing(aggregate: &AggregateDemand<'_>, rp: f64, offered: f64) -> (f64, Clearing) {
    let mut lo = rp;
    let upper: Vec<f64> = aggregate
        .breakpoints()
        .iter()
        .copied()
        .filter(|&b| b > rp)
        .collect();
    for hi in upper {
        let (intercepts, slopes) = aggregate.active_above(lo);
        if intercepts - slopes * lo <= offered {
            return (lo, Clearing::Jump);
        }
        if intercepts - slopes * hi <= offered && slopes > 0.0 {
            let p = ((intercepts - offered) / slopes).clamp(lo, hi);
            return (p, Clearing::Crossing);
        }
        lo = hi;
    }
    // past the last breakpoint nobody demands anything
    (lo, Clearing::Jump)
}

/// Proportional trim so that allocations sum to at most `target`.
fn scale_down(allocations: &mut [(usize, f64)], target: f64) {
    let total: f64 = allocations.iter().map(|(_, q)| q).sum();
    if total <= 0.0 {
        return;
    }
    let factor = target / total;
    for a in allocations.iter_mut() {
        a.1 *= factor;
    }
    let total: f64 = allocations.iter().map(|(_, q)| q).sum();
    if total > target {
        if let Some(largest) = allocations
            .iter_mut()
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            largest.1 = (largest.1 - (total - target)).max(0.0);
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Inventory movements implied by a cleared session.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub producer_delta: f64,
    pub buyer_deltas: Vec<(usize, f64)>,
}

/// Moves the traded quantity from the producer's inventory to the buyers'.
///
/// Panics if the session sold more than was offered or held: that is an
/// accounting bug, not a market outcome.
pub fn settle(
    outcome: &SessionOutcome,
    offered: f64,
    producer_inventory: &mut f64,
    mut credit_buyer: impl FnMut(usize, f64),
) -> Settlement {
    assert!(
        outcome.quantity <= offered && outcome.quantity <= *producer_inventory,
        "session sold {} with {} offered and {} in stock",
        outcome.quantity,
        offered,
        producer_inventory
    );
    if outcome.quantity > 0.0 {
        *producer_inventory -= outcome.quantity;
    }
    let mut buyer_deltas = Vec::with_capacity(outcome.allocations.len());
    for &(buyer, q) in &outcome.allocations {
        if q > 0.0 {
            credit_buyer(buyer, q);
            buyer_deltas.push((buyer, q));
        }
    }
    Settlement {
        producer_delta: -outcome.quantity,
        buyer_deltas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bid(buyer: usize, intercept: f64, slope: f64) -> Bid {
        Bid {
            buyer,
            curve: DemandCurve::new(intercept, slope, 10.0, 0.0),
        }
    }

    fn supply(quantity: f64, reservation_price: f64) -> SupplyCurve {
        SupplyCurve {
            quantity,
            reservation_price,
        }
    }

    #[test]
    fn reservation_price_examples() {
        assert_eq!(reservation_price(1.0, 0.02, 0.0), 1.0);
        assert_eq!(reservation_price(1.0, 0.02, 50.0), 2.0);
        assert_eq!(reservation_price(1.0, 0.0, 50.0), reservation_price(1.0, 0.0, 90.0));
    }

    #[test]
    fn single_buyer_on_vertical_segment() {
        let o = clear_session(supply(4.0, 1.0), &[bid(0, 10.0, 1.0)]);
        assert_relative_eq!(o.price, 6.0, epsilon = 1e-12);
        assert_relative_eq!(o.quantity, 4.0, epsilon = 1e-12);
        assert!(!o.producer_rationed);
        assert!(o.quantity <= 4.0);
    }

    #[test]
    fn weak_demand_clears_at_reservation_price() {
        let o = clear_session(supply(4.0, 1.0), &[bid(0, 3.0, 1.0)]);
        assert_eq!(o.price, 1.0);
        assert_eq!(o.quantity, 2.0);
        assert!(o.producer_rationed);
    }

    #[test]
    fn three_buyers_split_the_offer() {
        let bids = [bid(1, 4.0, 1.0), bid(2, 6.0, 1.0), bid(3, 5.0, 1.0)];
        let o = clear_session(supply(6.0, 0.0), &bids);
        assert_relative_eq!(o.price, 3.0, epsilon = 1e-12);
        assert_relative_eq!(o.allocation(1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(o.allocation(2), 3.0, epsilon = 1e-12);
        assert_relative_eq!(o.allocation(3), 2.0, epsilon = 1e-12);
        assert_relative_eq!(o.quantity, 6.0, epsilon = 1e-12);
        let sum: f64 = o.allocations.iter().map(|a| a.1).sum();
        assert_eq!(sum, o.quantity);
    }

    #[test]
    fn no_bids_no_trade() {
        let o = clear_session(supply(4.0, 1.5), &[]);
        assert_eq!(o.price, 1.5);
        assert_eq!(o.quantity, 0.0);
        assert!(o.producer_rationed);
    }

    #[test]
    fn price_cap_rations_buyers() {
        // at the cap demand is still 9 > 4; above it nothing
        let o = clear_session(supply(4.0, 1.0), &[bid(0, 10.0, 0.05), bid(1, 10.0, 0.05)]);
        assert_eq!(o.price, 10.0);
        assert!(o.buyers_rationed);
        assert!(!o.producer_rationed);
        assert_relative_eq!(o.quantity, 4.0, epsilon = 1e-12);
        assert_relative_eq!(o.allocation(0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn import_floor_jump() {
        // foreign buyer demands 6 - p but nothing below 3, domestic 2 - 0.5p
        let foreign = Bid {
            buyer: 1,
            curve: DemandCurve::new(6.0, 1.0, 10.0, 3.0),
        };
        let domestic = bid(0, 2.0, 0.5);
        // at p = 3: foreign 3, domestic 0.5 -> 3.5 > 2; just above: 0.5 - eps
        let o = clear_session(supply(2.0, 0.0), &[domestic, foreign]);
        assert_eq!(o.price, 3.0);
        assert!(o.buyers_rationed);
        assert_relative_eq!(o.allocation(0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(o.allocation(1), 1.5, epsilon = 1e-12);
        assert!(o.quantity <= 2.0);
    }

    #[test]
    fn zero_offer_sells_nothing() {
        let o = clear_session(supply(0.0, 1.0), &[bid(0, 10.0, 1.0)]);
        assert_eq!(o.quantity, 0.0);
        assert!(o.price >= 1.0);
    }

    #[test]
    fn settle_moves_stock() {
        let o = SessionOutcome {
            price: 5.0,
            quantity: 4.0,
            allocations: vec![(0, 1.0), (1, 3.0)],
            producer_rationed: false,
            buyers_rationed: false,
        };
        let mut stock = 10.0;
        let mut inv = [0.0; 2];
        let s = settle(&o, 4.0, &mut stock, |b, q| inv[b] += q);
        assert_eq!(stock, 6.0);
        assert_eq!(inv, [1.0, 3.0]);
        assert_eq!(s.producer_delta, -4.0);

        let none = SessionOutcome::no_trade(2.0, 3.0);
        let s = settle(&none, 3.0, &mut stock, |_, _| panic!("no buyer should be credited"));
        assert_eq!(stock, 6.0);
        assert!(s.buyer_deltas.is_empty());
    }

    #[test]
    fn rationed_producer_keeps_unsold_stock() {
        let o = clear_session(supply(4.0, 1.0), &[bid(0, 3.0, 1.0)]);
        let mut stock = 4.0;
        settle(&o, 4.0, &mut stock, |_, _| {});
        assert_eq!(stock, 2.0);
    }

    #[test]
    #[should_panic]
    fn settle_rejects_overselling() {
        let o = SessionOutcome {
            price: 5.0,
            quantity: 5.0,
            allocations: vec![(0, 5.0)],
            producer_rationed: false,
            buyers_rationed: false,
        };
        let mut stock = 10.0;
        settle(&o, 4.0, &mut stock, |_, _| {});
    }

    #[test]
    fn higher_intercept_raises_price_and_squeezes_others() {
        let base = [bid(0, 8.0, 1.0), bid(1, 6.0, 0.5), bid(2, 7.0, 2.0)];
        let o0 = clear_session(supply(6.0, 1.0), &base);
        for k in 0..3 {
            let mut bumped = base;
            bumped[k].curve.intercept += 1.5;
            let o1 = clear_session(supply(6.0, 1.0), &bumped);
            assert!(o1.price >= o0.price);
            for j in (0..3).filter(|j| *j != k) {
                assert!(o1.allocation(j) <= o0.allocation(j) + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn aggregate_is_horizontal_sum_and_monotone(
            curves in prop::collection::vec((0.0..10.0f64, 0.1..3.0f64, 0.0..2.0f64), 0..6),
            p in 0.0..11.0f64, dp in 0.0..5.0f64,
        ) {
            let bids: Vec<Bid> = curves.iter().enumerate()
                .map(|(i, &(a, s, f))| Bid { buyer: i, curve: DemandCurve::new(a, s, 10.0, f) })
                .collect();
            let agg = AggregateDemand::new(&bids);
            let direct: f64 = bids.iter().map(|b| b.curve.quantity(p)).sum();
            prop_assert_eq!(agg.quantity(p), direct);
            prop_assert!(agg.quantity(p) >= agg.quantity(p + dp));
        }

        #[test]
        fn clearing_respects_offer_and_price_bounds(
            curves in prop::collection::vec((0.0..10.0f64, 0.1..3.0f64), 1..6),
            y in 0.0..30.0f64, rp in 0.0..4.0f64,
        ) {
            let bids: Vec<Bid> = curves.iter().enumerate().map(|(i, &(a, s))| bid(i, a, s)).collect();
            let o = clear_session(supply(y, rp), &bids);
            prop_assert!(o.quantity <= y);
            let sum: f64 = o.allocations.iter().map(|a| a.1).sum();
            prop_assert_eq!(sum, o.quantity);
            if o.quantity > 0.0 {
                prop_assert!(o.price >= rp && o.price <= 10.0);
            }
            // nobody would buy more at a strictly lower admissible price
            if o.price > rp + 1e-9 {
                let agg = AggregateDemand::new(&bids);
                prop_assert!(agg.quantity(o.price - 1e-7) >= y - 1e-6);
            }
        }
    }
}
