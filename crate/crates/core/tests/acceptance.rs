//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p cmsw-core --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmsw_core::calibration::{eta_step, nested_calibrate, simulate_prices, CalibrationSpec, StructuralParams};
use cmsw_core::data::{corrected_supply_demand, default_hubs, BaseData};
use cmsw_core::demand::{
    enter_new_session, minimum_consumption, minimum_consumption_shift, move_demand_to_cheapest,
    transport_cost_kkm, DemandBook, DemandCurve, UnitCostTable,
};
use cmsw_core::fixtures::{synthetic_base, synthetic_inputs, wheat_like_table, WHEAT_SUPPLIERS};
use cmsw_core::market::{clear_session, reservation_price, Bid, SupplyCurve};
use cmsw_core::par::Parallelism;
use cmsw_core::scenario::{flow_matrices, run_counterfactual_pair, EventSpec, FlagName, Scenario};
use cmsw_core::{build_world, report, GlobalConfig};

/// Outcome of one criterion: whether it held and a one-line summary.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let within = elapsed <= limit;
    Verdict::new(
        v.pass && within,
        format!("{}; {:.2?} (limit {:?})", v.detail, elapsed, limit),
    )
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// 1. Clearing against a brute-force price sweep.

const SWEEP_POINTS: usize = 100_000;
const PRICE_TOP: f64 = 10.0;

/// Lowest price on a uniform grid over [0, 10] at or above `rp` where
/// aggregate demand does not exceed the offer; the cap when none is.
fn sweep_price(bids: &[Bid], offered: f64, rp: f64) -> f64 {
    let demand = |p: f64| bids.iter().map(|b| b.curve.quantity(p)).sum::<f64>();
    if demand(rp) <= offered {
        return rp;
    }
    let step = PRICE_TOP / SWEEP_POINTS as f64;
    (0..=SWEEP_POINTS)
        .map(|k| k as f64 * step)
        .find(|&p| p > rp && demand(p) <= offered)
        .unwrap_or(PRICE_TOP)
}

fn clearing_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut mismatched, mut rationed) = (0.0f64, 0usize, 0usize);
    for _ in 0..500 {
        let n = rng.gen_range(1..=5);
        let bids: Vec<Bid> = (0..n)
            .map(|buyer| Bid {
                buyer,
                curve: DemandCurve::new(rng.gen_range(0.0..10.0), rng.gen_range(0.1..3.0), PRICE_TOP, 0.0),
            })
            .collect();
        let offered = rng.gen_range(0.0..30.0);
        let rp = rng.gen_range(0.0..8.0);
        let out = clear_session(SupplyCurve { quantity: offered, reservation_price: rp }, &bids);
        worst = worst.max((out.price - sweep_price(&bids, offered, rp)).abs());

        let total: f64 = out.allocations.iter().map(|(_, q)| q).sum();
        if out.buyers_rationed {
            rationed += 1;
            let fits = rel_close(total, offered, 1e-12)
                && bids.iter().zip(&out.allocations).all(|(b, (_, q))| *q <= b.curve.quantity(out.price));
            mismatched += usize::from(!fits);
        } else {
            let exact = bids
                .iter()
                .zip(&out.allocations)
                .all(|(b, (_, q))| *q == b.curve.quantity(out.price));
            mismatched += usize::from(!exact || total > offered);
        }
    }
    Verdict::new(
        worst <= 2e-4 && mismatched == 0,
        format!(
            "500 sessions, max |price - sweep| = {worst:.2e} (tol 2e-4), quantity mismatches {mismatched}, \
             {rationed} rationed at a jump"
        ),
    )
}

// 2. Conservation on the small world.

fn conservation() -> Verdict {
    let inputs = synthetic_inputs();
    let mut world = build_world(&inputs, &GlobalConfig::default()).expect("world builds");
    let initial: Vec<f64> = world.producers().iter().map(|p| p.inventory).collect();
    let log = world.run(120).expect("120 months run");

    let mut flow_breaks = 0;
    let mut negative = 0;
    for s in &log.steps {
        let bought: f64 = s.bought.iter().sum();
        let sold: f64 = s.sessions.iter().map(|r| r.quantity).sum();
        let harvest: f64 = s.production.iter().map(|e| e.quantity).sum();
        let stock_drop = harvest - s.producer_inventory_delta.iter().sum::<f64>();
        let allocated: f64 = s.sessions.iter().flat_map(|r| r.allocations.iter().map(|(_, q)| q)).sum();
        if !(rel_close(bought, sold, 1e-9) && rel_close(sold, stock_drop, 1e-9) && rel_close(sold, allocated, 1e-9)) {
            flow_breaks += 1;
        }
        if s.buyer_inventory_delta.iter().any(|d| *d != 0.0) {
            flow_breaks += 1;
        }
        negative += s.producer_inventory.iter().filter(|v| **v < 0.0).count();
    }

    // each offer window runs from just after one harvest to the next; the
    // last offer plus the earlier sales equals the stock the window opened with
    let mut windows = 0;
    let mut window_breaks = 0;
    for (p, &opening) in initial.iter().enumerate() {
        let record = |k: usize| log.steps[k].sessions.iter().find(|r| r.session == p).expect("session logged");
        let harvests: Vec<usize> = (0..log.len())
            .filter(|&k| log.steps[k].production.iter().any(|e| e.session == p))
            .collect();
        let mut open = (0usize, opening);
        for &h in &harvests {
            let (start, stock) = open;
            let sold: f64 = (start..h).map(|k| record(k).quantity).sum();
            if !rel_close(record(h).offered + sold, stock, 1e-9) {
                window_breaks += 1;
            }
            windows += 1;
            open = (h + 1, log.steps[h].producer_inventory[p]);
        }
    }

    Verdict::new(
        flow_breaks == 0 && window_breaks == 0 && negative == 0 && windows >= 3 * 9,
        format!(
            "{} steps, flow mismatches {flow_breaks}, offer windows {windows} with {window_breaks} mismatches, \
             negative inventories {negative} (rel tol 1e-9)",
            log.len()
        ),
    )
}

// 3. Demand-side rules.

fn book_with(curves: &[(usize, f64)]) -> DemandBook {
    let mut book = DemandBook::new();
    for &(s, intercept) in curves {
        book.insert(s, DemandCurve::new(intercept, 1.0, 10.0, 0.0));
    }
    book
}

fn demand_laws() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // migration gate over a grid of tolerances and unit costs
    let mut gate_cases = 0;
    for iota in [0.0, 0.05, 0.1, 0.25, 0.5] {
        for p_min in [1.0, 2.0, 3.0, 4.5] {
            for p_max in [1.0, 2.5, 3.0, 3.3, 4.0, 6.0] {
                let mut table = UnitCostTable::new();
                table.insert(0, p_min, 0.0, 4.0);
                table.insert(1, p_max, 0.0, 10.0);
                let mut book = book_with(&[(0, 20.0), (1, 20.0)]);
                let moved = move_demand_to_cheapest(&mut book, &table, iota, 0.1);
                let expected = (1.0 + iota) * p_min.min(p_max) < p_max.max(p_min);
                check(moved.is_some() == expected, "migration gate");
                gate_cases += 1;
            }
        }
    }
    let mut table = UnitCostTable::new();
    table.insert(0, 3.0, 0.0, 5.0);
    table.insert(1, 4.0, 0.0, 10.0);
    let mut book = book_with(&[(0, 20.0), (1, 20.0)]);
    let m = move_demand_to_cheapest(&mut book, &table, 0.0, 0.1).expect("gate open");
    check(
        m.from == 1 && m.to == 0 && (m.quantity - 1.0).abs() < 1e-12,
        "share of the dearest purchase moved",
    );
    check(
        book.get(0).unwrap().intercept == 20.0 + m.quantity && book.get(1).unwrap().intercept == 20.0 - m.quantity,
        "migration conserves intercepts",
    );

    // transport cost and reservation price at the default tuners
    check((transport_cost_kkm(2.0, 10.0, 0.05, 0.01) - 0.30).abs() < 1e-12, "transport cost");
    check(transport_cost_kkm(0.0, 80.0, 0.05, 0.01) == 0.0, "transport cost at zero distance");
    check((transport_cost_kkm(1.0, 0.0, 0.05, 0.01) - 0.05).abs() < 1e-12, "transport fix cost");
    check((reservation_price(1.0, 0.02, 20.0) - 1.4).abs() < 1e-12, "reservation price");

    // entry curve into a newly accessible session
    let c = enter_new_session(2.0, Some(5.0), 1.0, 4.0, 0.05, 10.0, 0.0);
    check((c.intercept - 7.6).abs() < 1e-12 && c.quantity(3.8 + 1e-12) == 0.0, "entry curve");

    // minimum consumption and its shift
    check((minimum_consumption(0.5, 0.1, 1200.0, 12) - 5.0).abs() < 1e-12, "minimum consumption");
    let mut book = book_with(&[(0, 4.0), (1, 6.0)]);
    let shift = minimum_consumption_shift(&mut book, 3.0, 5.0);
    check(
        shift == 1.0 && book.get(0).unwrap().intercept == 5.0 && book.get(1).unwrap().intercept == 7.0,
        "minimum consumption shift",
    );
    check(minimum_consumption_shift(&mut book, 5.0, 5.0) == 0.0, "no shift at the minimum");

    // initial geometry with a unit intercept tuner
    for target in [1.0, 12.5, 300.0] {
        let c = DemandCurve::initial(target, 0.15, 5.0, 10.0);
        check(
            rel_close(c.quantity(5.0), target, 1e-12)
                && rel_close(c.quantity(0.0), target * 1.15, 1e-12)
                && rel_close(c.quantity(10.0), target * 0.85, 1e-12),
            "initial curve geometry",
        );
    }
    let cfg = GlobalConfig {
        demand_function_intercept_tuner: 1.0,
        ..GlobalConfig::default()
    };
    let world = build_world(&synthetic_inputs(), &cfg).expect("world builds");
    for b in world.buyers() {
        let at = |p: f64| b.curves.quantity_at(p);
        check(
            rel_close(at(5.0), b.monthly_target, 1e-9)
                && rel_close(at(0.0), b.monthly_target * 1.15, 1e-9)
                && rel_close(at(10.0), b.monthly_target * 0.85, 1e-9),
            "initial world curves",
        );
    }

    let n = failures.len();
    failures.dedup();
    Verdict::new(
        n == 0,
        if n == 0 {
            format!("gate grid {gate_cases} cases, arithmetic and geometry checks hold (tol 1e-12)")
        } else {
            format!("{n} checks failed: {}", failures.join(", "))
        },
    )
}

// 4. Balance correction and the supplier partition.

fn data_identities() -> Verdict {
    let table = wheat_like_table();
    let mut worst = 0.0f64;
    for t in 0..table.years.len() {
        let w = table.world(t);
        let c = corrected_supply_demand(w).expect("positive totals");
        // supply mined to meet recorded use, or use mined to meet supply
        worst = worst.max((c.corrected_supply - w.demand).abs() / w.demand);
        worst = worst.max((w.supply - c.corrected_demand).abs() / w.supply);
    }
    let base = BaseData::from_table(&table, &default_hubs()).expect("hubs cover the table");
    let prepared = base.prepare(&vec![0.0; table.years.len()]).expect("prepare");
    let suppliers = prepared.supplier_count();
    let buyers = prepared.regions.len();
    let named = prepared
        .regions
        .iter()
        .filter(|r| r.supplier)
        .all(|r| WHEAT_SUPPLIERS.contains(&r.id.as_str()));
    Verdict::new(
        worst <= 1e-9 && suppliers == 12 && buyers == 24 && named,
        format!("max corrected imbalance {worst:.2e} (rel tol 1e-9), {suppliers} suppliers, {buyers} buyers"),
    )
}

// 5. Refitting prices generated from known parameters.

fn calibration_self_consistency() -> Verdict {
    let base = synthetic_base();
    let config = GlobalConfig::default();
    let truth = StructuralParams {
        transport_intercept: 0.06,
        share_moved: 0.12,
        markdown: 0.05,
        intercept_tuner: 1.0,
        slope_tuner: 0.2,
    };
    let eta_truth = [0.0, 0.03, -0.02, 0.04, -0.03, 0.01, -0.04, 0.02, 0.0, -0.01];
    let observed: Vec<f64> = simulate_prices(&base, &config, truth, &eta_truth)
        .expect("truth run")
        .into_iter()
        .map(|p| p.expect("every year trades"))
        .collect();
    let spec = CalibrationSpec {
        observed,
        population: 20,
        generations: 100,
        rounds: 3,
        beta: 50.0,
        ..CalibrationSpec::default()
    };
    let fit = nested_calibrate(&spec, &base, &config, Parallelism::default()).expect("calibration runs");
    let errors: Vec<f64> = fit.eta.iter().zip(eta_truth).map(|(a, b)| a - b).collect();
    let worst = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let monotone = fit.trace.windows(2).all(|w| w[1].loss <= w[0].loss);
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:+.3}")).collect();
    Verdict::new(
        fit.loss < 1e-3 && worst <= 0.02 && monotone,
        format!(
            "loss {:.2e} (tol 1e-3), max |eta - truth| {worst:.3} (tol 0.02), per-year error [{}], trace monotone {monotone}",
            fit.loss,
            shown.join(" ")
        ),
    )
}

// 6. Export ban of the largest exporter.

fn ban_counterfactual() -> Verdict {
    let inputs = synthetic_inputs();
    let config = GlobalConfig::default();
    let baseline = build_world(&inputs, &config)
        .and_then(|mut w| w.run(inputs.years.len() * 12))
        .expect("baseline run");
    let mut exports: BTreeMap<usize, f64> = BTreeMap::new();
    for m in flow_matrices(&baseline).values() {
        for s in 0..inputs.regions.len() {
            *exports.entry(s).or_default() += m.foreign_sales(s);
        }
    }
    let (&largest, _) = exports.iter().max_by(|a, b| a.1.total_cmp(b.1)).expect("some exports");
    let name = inputs.regions[largest].id.clone();

    let scenario = Scenario {
        name: "ban".into(),
        events: vec![EventSpec {
            region: name.clone(),
            flag: FlagName::ExportAllowed,
            value: false,
            start: "2004-01".into(),
            end: "2004-12".into(),
        }],
        ..Scenario::default()
    };
    let resolved = scenario.resolve(&inputs).expect("scenario resolves");
    let pair = run_counterfactual_pair(&inputs, &config, &resolved, Parallelism::default()).expect("pair runs");

    let gap = |y: i32| pair.gaps.iter().find(|g| g.year == y).copied();
    let mut lines = Vec::new();
    let mut directional = true;
    for year in [2004, 2005] {
        match gap(year) {
            Some(g) => {
                directional &= g.counterfactual >= g.baseline;
                lines.push(format!("{year}: {:.4} vs {:.4} ({:+.2}%)", g.counterfactual, g.baseline, g.gap_percent));
            }
            None => directional = false,
        }
    }
    let banned_flows = flow_matrices(&pair.counterfactual)
        .get(&2004)
        .map(|m| m.foreign_sales(largest))
        .unwrap_or(f64::NAN);
    let isolated = pair.baseline.steps[..48] == pair.counterfactual.steps[..48];
    Verdict::new(
        directional && banned_flows == 0.0 && isolated,
        format!(
            "banned {name}; {}; foreign sales in the ban year {banned_flows}; pre-ban logs identical {isolated}",
            lines.join(", ")
        ),
    )
}

// 7. Byte-identical outputs.

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let inputs = synthetic_inputs();
    let config = GlobalConfig::default();
    let scenario = Scenario {
        events: vec![EventSpec {
            region: inputs.regions[0].id.clone(),
            flag: FlagName::ExportAllowed,
            value: false,
            start: "2003-08".into(),
            end: "2004-07".into(),
        }],
        ..Scenario::default()
    }
    .resolve(&inputs)
    .expect("scenario resolves");

    let produce = |dir: &Path| {
        let mut world = build_world(&inputs, &config).expect("world builds");
        let log = world.run(inputs.years.len() * 12).expect("run");
        report::write_run(&log, Some(&inputs), &dir.join("run")).expect("write run");
        let pair = run_counterfactual_pair(&inputs, &config, &scenario, Parallelism::default()).expect("pair");
        report::write_run(&pair.counterfactual, Some(&inputs), &dir.join("counterfactual")).expect("write cf");
        pair.write_gaps(&dir.join("price_gaps.csv")).expect("write gaps");
        files_under(dir)
    };
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let (fa, fb) = (produce(a.path()), produce(b.path()));
    let differing = fa.iter().filter(|(k, v)| fb.get(*k) != Some(v)).count();
    Verdict::new(
        fa.len() == fb.len() && differing == 0 && !fa.is_empty(),
        format!("{} files per run, {differing} differ", fa.len()),
    )
}

// 8. Deviation update over a grid.

fn eta_step_grid() -> Verdict {
    let prices = [0.0, 0.1, 0.5, 0.99, 1.0, 1.01, 2.0, 5.0, 10.0, 1e3];
    let betas = [1e-3, 0.1, 1.0, 5.0, 40.0, 1e3];
    let etas = [-0.9, -0.3, 0.0, 0.25, 0.9];
    let (mut cases, mut bad) = (0usize, 0usize);
    for &eta in &etas {
        for &p in &prices {
            for &q in &prices {
                for &beta in &betas {
                    let d = eta_step(eta, p, q, beta) - eta;
                    let ok = d.abs() < 0.01
                        && (p != q || d == 0.0)
                        && (q <= p || d > 0.0)
                        && (q >= p || d < 0.0);
                    bad += usize::from(!ok);
                    cases += 1;
                }
            }
        }
    }
    Verdict::new(bad == 0, format!("{cases} grid points, {bad} violations"))
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("clearing oracle", Duration::from_secs(10), clearing_oracle),
        ("conservation", Duration::from_secs(5), conservation),
        ("demand rules", Duration::from_secs(10), demand_laws),
        ("balance identities", Duration::from_secs(10), data_identities),
        ("calibration self-consistency", Duration::from_secs(600), calibration_self_consistency),
        ("ban counterfactual", Duration::from_secs(60), ban_counterfactual),
        ("determinism", Duration::from_secs(60), determinism),
        ("eta step grid", Duration::from_secs(10), eta_step_grid),
    ];
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.into_iter().enumerate() {
        let v = timed(limit, f);
        println!("criterion {} [{name}]: {} - {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
