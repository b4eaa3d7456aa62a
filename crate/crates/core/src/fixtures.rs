//! Deterministic synthetic data sets.
//!
//! Two worlds ship with the crate: a small one with three producers and
//! five buyers used throughout the tests, and a 24-region, 22-year balance
//! table shaped like the wheat setup (twelve regions that export in some
//! year, twelve that never do). Neither is real data.

use std::path::{Path, PathBuf};

use crate::config::OilPrices;
use crate::data::{
    default_hubs, reduce_producers, write_matrix, BalanceRecord, BalanceTable, BaseData, Component,
    Matrix, RegionMeta,
};
use crate::geo::GeoPoint;
use crate::{Error, Result};

/// Regions of the small world: three suppliers, then two net buyers.
pub fn synthetic_regions() -> Vec<RegionMeta> {
    [
        ("Northland", 48.0, -95.0, 7),
        ("Southland", -34.0, -60.0, 12),
        ("Steppe", 50.0, 60.0, 8),
        ("Coastal", 30.0, 31.0, 5),
        ("Archipelago", -6.0, 107.0, 3),
    ]
    .into_iter()
    .map(|(id, lat, lon, hm)| RegionMeta {
        id: id.to_string(),
        location: GeoPoint::new(lat, lon).expect("fixture coordinates are valid"),
        harvest_month: hm,
    })
    .collect()
}

pub const SYNTHETIC_FIRST_YEAR: i32 = 2000;
pub const SYNTHETIC_YEARS: usize = 10;

/// Production and total use of the small world, `[region][year]`.
pub fn synthetic_base() -> BaseData {
    let years: Vec<i32> = (0..SYNTHETIC_YEARS as i32).map(|t| SYNTHETIC_FIRST_YEAR + t).collect();
    let wave = |t: usize, amp: f64, freq: f64, phase: f64| 1.0 + amp * (freq * t as f64 + phase).sin();
    let production: Matrix = vec![
        (0..SYNTHETIC_YEARS).map(|t| 1000.0 * wave(t, 0.08, 1.1, 0.0)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 600.0 * wave(t, 0.12, 0.7, 1.0)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 450.0 * wave(t, 0.15, 1.9, 2.0)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 150.0 * wave(t, 0.05, 0.5, 0.3)).collect(),
        vec![0.0; SYNTHETIC_YEARS],
    ];
    let growth = |t: usize| 1.0 + 0.01 * t as f64;
    let demand: Matrix = vec![
        (0..SYNTHETIC_YEARS).map(|t| 520.0 * growth(t)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 260.0 * growth(t)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 300.0 * growth(t)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 760.0 * growth(t)).collect(),
        (0..SYNTHETIC_YEARS).map(|t| 360.0 * growth(t)).collect(),
    ];
    BaseData {
        years,
        meta: synthetic_regions(),
        production,
        demand,
    }
}

/// The small world prepared with zero demand deviations.
pub fn synthetic_inputs() -> crate::data::PreparedInputs {
    let base = synthetic_base();
    reduce_producers(
        &base.years,
        &base.meta,
        &base.production,
        &base.demand,
        &vec![0.0; base.years.len()],
    )
    .expect("fixture is consistent")
}

pub const WHEAT_FIRST_YEAR: i32 = 1992;
pub const WHEAT_YEARS: usize = 22;

/// Regions of the 24-region table that export in at least one year.
pub const WHEAT_SUPPLIERS: [&str; 12] = [
    "Northern America - USA",
    "Northern America except USA",
    "South America",
    "Southern Asia - India",
    "Southern Asia - Pakistan",
    "Central Asia - Russian Federation",
    "Central Asia except Russian Federation",
    "Eastern Asia - China",
    "Eastern Europe",
    "Northern Europe",
    "Western Europe",
    "Oceania",
];

/// A 24-region, 22-year balance table in the layout of the wheat setup.
///
/// Supplier regions produce more than they use in at least one year; the
/// others never do. World use runs one to three percent above world
/// production so that the global net import is systematically positive,
/// as in real balance data. Regional balances close through imports and
/// exports, with stock variations that net out to zero in every year.
pub fn wheat_like_table() -> BalanceTable {
    let hubs = default_hubs();
    let years: Vec<i32> = (0..WHEAT_YEARS as i32).map(|t| WHEAT_FIRST_YEAR + t).collect();
    let supplier: Vec<bool> = hubs.iter().map(|h| WHEAT_SUPPLIERS.contains(&h.id.as_str())).collect();
    let size = |z: usize| 8.0 + 7.0 * ((z * 37 % 11) as f64);
    let cycle = |z: usize, t: usize| (0.9 * t as f64 + z as f64).sin();
    let trend = |t: usize| 1.0 + 0.012 * t as f64;

    // production and a first guess of use, then net buyers' use is scaled
    // so that world use exceeds world production by the target margin
    let mut production = vec![vec![0.0; WHEAT_YEARS]; hubs.len()];
    let mut demand = vec![vec![0.0; WHEAT_YEARS]; hubs.len()];
    for z in 0..hubs.len() {
        for t in 0..WHEAT_YEARS {
            let c = cycle(z, t);
            let (y, ratio) = if supplier[z] {
                (size(z) * 2.0 * trend(t) * (1.0 + 0.07 * c), 0.75 + 0.05 * c)
            } else {
                (size(z) * 0.6 * trend(t) * (1.0 + 0.05 * c), 1.35 + 0.1 * c)
            };
            production[z][t] = y;
            demand[z][t] = y * ratio;
        }
    }
    for t in 0..WHEAT_YEARS {
        let margin = 1.01 + 0.02 * (0.5 * t as f64).cos().abs();
        let world_y: f64 = production.iter().map(|r| r[t]).sum();
        let supplier_d: f64 = (0..hubs.len()).filter(|&z| supplier[z]).map(|z| demand[z][t]).sum();
        let buyer_d: f64 = (0..hubs.len()).filter(|&z| !supplier[z]).map(|z| demand[z][t]).sum();
        let k = (margin * world_y - supplier_d) / buyer_d;
        for z in (0..hubs.len()).filter(|&z| !supplier[z]) {
            demand[z][t] *= k;
        }
    }

    let records = (0..hubs.len())
        .map(|z| {
            (0..WHEAT_YEARS)
                .map(|t| {
                    let (y, d) = (production[z][t], demand[z][t]);
                    // stock draws in even regions, builds in odd ones; pairs cancel
                    let stock_variation = if z % 2 == 0 { 0.3 } else { -0.3 };
                    let net = d - y - stock_variation;
                    let (import, export) = if net >= 0.0 { (net, 0.0) } else { (0.0, -net) };
                    BalanceRecord {
                        production: y,
                        import,
                        export,
                        stock_variation,
                        food: d * 0.7,
                        feed: d * 0.2,
                        seed: d * 0.05,
                        other: d * 0.05,
                    }
                })
                .collect()
        })
        .collect();
    BalanceTable {
        regions: hubs.into_iter().map(|h| h.id).collect(),
        years,
        records,
    }
}

/// Monthly oil prices rising from about 20 to about 100 with a cycle.
pub fn synthetic_oil(first_year: i32, years: usize) -> OilPrices {
    let mut series = OilPrices::new();
    let months = years * 12;
    for k in 0..months {
        let trend = 20.0 + 80.0 * k as f64 / months.max(1) as f64;
        let price = trend * (1.0 + 0.15 * (k as f64 / 9.0).sin());
        series.insert(first_year + (k / 12) as i32, (k % 12) as u32 + 1, (price * 100.0).round() / 100.0);
    }
    series
}

/// Writes one CSV per balance component, the hub table, an oil series and
/// a manifest binding them; returns the manifest path.
pub fn write_balance_fixture(table: &BalanceTable, hubs: &[RegionMeta], oil: &OilPrices, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for c in Component::ALL {
        let values: Matrix = table
            .records
            .iter()
            .map(|row| row.iter().map(|r| component_value(r, c)).collect())
            .collect();
        let file = format!("{}.csv", c.key());
        write_matrix(&dir.join(&file), &table.regions, &table.years, &values)?;
        manifest.push_str(&format!("{} = \"{}\"\n", c.key(), file));
    }

    let path = dir.join("hubs.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["region", "lat", "lon", "harvest_month"])
        .map_err(|e| Error::csv(&path, e))?;
    for h in hubs {
        w.write_record([
            h.id.clone(),
            h.location.latitude().to_string(),
            h.location.longitude().to_string(),
            h.harvest_month.to_string(),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    manifest.push_str("hubs = \"hubs.csv\"\n");

    oil.write_csv(&dir.join("oil.csv"))?;
    manifest.push_str("oil = \"oil.csv\"\n");

    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn component_value(r: &BalanceRecord, c: Component) -> f64 {
    match c {
        Component::Production => r.production,
        Component::Import => r.import,
        Component::Export => r.export,
        Component::StockVariation => r.stock_variation,
        Component::Food => r.food,
        Component::Feed => r.feed,
        Component::Seed => r.seed,
        Component::Other => r.other,
    }
}

/// Balance table of the small world, with trade closing each region's
/// balance. Used to exercise `prepare` on a world whose simulation is fast.
pub fn synthetic_table() -> BalanceTable {
    let base = synthetic_base();
    let records = base
        .production
        .iter()
        .zip(&base.demand)
        .map(|(ys, ds)| {
            ys.iter()
                .zip(ds)
                .map(|(&y, &d)| {
                    let net = d - y;
                    BalanceRecord {
                        production: y,
                        import: net.max(0.0),
                        export: (-net).max(0.0),
                        stock_variation: 0.0,
                        food: d * 0.8,
                        feed: d * 0.1,
                        seed: d * 0.05,
                        other: d * 0.05,
                    }
                })
                .collect()
        })
        .collect();
    BalanceTable {
        regions: base.meta.iter().map(|m| m.id.clone()).collect(),
        years: base.years,
        records,
    }
}
