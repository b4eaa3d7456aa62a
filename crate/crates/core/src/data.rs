//! Balance-sheet ingestion and input preparation.
//!
//! Balance components come as one CSV per component: a `region` column
//! followed by one column per year, one row per region. A TOML manifest
//! binds component names to files. From the balances we derive world
//! totals, the global net import correction, desired demand and the
//! partition into international suppliers and net buyers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::geo::GeoPoint;
use crate::{Error, Result};

/// A `[region][year]` matrix.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    Production,
    Import,
    Export,
    StockVariation,
    Food,
    Feed,
    Seed,
    Other,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::Production,
        Component::Import,
        Component::Export,
        Component::StockVariation,
        Component::Food,
        Component::Feed,
        Component::Seed,
        Component::Other,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Component::Production => "production",
            Component::Import => "import",
            Component::Export => "export",
            Component::StockVariation => "stock_variation",
            Component::Food => "food",
            Component::Feed => "feed",
            Component::Seed => "seed",
            Component::Other => "other",
        }
    }
}

/// One region-year of the balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRecord {
    pub production: f64,
    pub import: f64,
    pub export: f64,
    /// Initial minus final stock: negative when stocks grow.
    pub stock_variation: f64,
    pub food: f64,
    pub feed: f64,
    pub seed: f64,
    /// Other uses, processing and waste.
    pub other: f64,
}

impl BalanceRecord {
    /// Total use: food + feed + seed + other.
    pub fn demand(&self) -> f64 {
        self.food + self.feed + self.seed + self.other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub regions: Vec<String>,
    pub years: Vec<i32>,
    pub records: Vec<Vec<BalanceRecord>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    production: PathBuf,
    import: PathBuf,
    export: PathBuf,
    stock_variation: PathBuf,
    food: PathBuf,
    feed: PathBuf,
    seed: PathBuf,
    other: PathBuf,
    hubs: Option<PathBuf>,
    oil: Option<PathBuf>,
}

/// Contents of a balance manifest: the table plus optional hub overrides
/// and oil price series.
#[derive(Debug, Clone)]
pub struct BalanceSource {
    pub table: BalanceTable,
    pub hubs: Option<Vec<RegionMeta>>,
    pub oil: Option<crate::config::OilPrices>,
}

pub fn load_manifest(manifest: &Path) -> Result<BalanceSource> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Toml {
        path: manifest.to_path_buf(),
        source: e,
    })?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let files: BTreeMap<Component, PathBuf> = [
        (Component::Production, m.production),
        (Component::Import, m.import),
        (Component::Export, m.export),
        (Component::StockVariation, m.stock_variation),
        (Component::Food, m.food),
        (Component::Feed, m.feed),
        (Component::Seed, m.seed),
        (Component::Other, m.other),
    ]
    .into_iter()
    .map(|(c, p)| (c, dir.join(p)))
    .collect();
    let table = load_balances(&files)?;
    let hubs = m.hubs.map(|h| read_hubs(&dir.join(h))).transpose()?;
    let oil = m
        .oil
        .map(|o| crate::config::OilPrices::from_csv(&dir.join(o)))
        .transpose()?;
    Ok(BalanceSource { table, hubs, oil })
}

/// Reads and cross-validates the component files.
pub fn load_balances(files: &BTreeMap<Component, PathBuf>) -> Result<BalanceTable> {
    let mut layout: Option<(PathBuf, Vec<String>, Vec<i32>)> = None;
    let mut matrices: BTreeMap<Component, Matrix> = BTreeMap::new();
    for component in Component::ALL {
        let path = files
            .get(&component)
            .ok_or_else(|| Error::Input(format!("no file for component `{}`", component.key())))?;
        let (regions, years, values) = read_matrix(path, component != Component::StockVariation)?;
        match &layout {
            None => layout = Some((path.clone(), regions, years)),
            Some((first, r, y)) => {
                if *r != regions {
                    return Err(Error::Input(format!(
                        "{}: regions differ from {}",
                        path.display(),
                        first.display()
                    )));
                }
                if *y != years {
                    return Err(Error::Input(format!(
                        "{}: years differ from {}",
                        path.display(),
                        first.display()
                    )));
                }
            }
        }
        matrices.insert(component, values);
    }
    let (_, regions, years) = layout.expect("at least one component");
    let get = |c: Component, r: usize, t: usize| matrices[&c][r][t];
    let records = (0..regions.len())
        .map(|r| {
            (0..years.len())
                .map(|t| BalanceRecord {
                    production: get(Component::Production, r, t),
                    import: get(Component::Import, r, t),
                    export: get(Component::Export, r, t),
                    stock_variation: get(Component::StockVariation, r, t),
                    food: get(Component::Food, r, t),
                    feed: get(Component::Feed, r, t),
                    seed: get(Component::Seed, r, t),
                    other: get(Component::Other, r, t),
                })
                .collect()
        })
        .collect();
    Ok(BalanceTable {
        regions,
        years,
        records,
    })
}

/// Reads a `region,<year>,<year>,...` matrix.
pub fn read_matrix(path: &Path, non_negative: bool) -> Result<(Vec<String>, Vec<i32>, Matrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let parse_err = |line: u64, field: &str, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        field: field.to_string(),
        message,
    };
    if headers.get(0) != Some("region") {
        return Err(parse_err(1, "region", "first column must be `region`".into()));
    }
    let years = headers
        .iter()
        .skip(1)
        .map(|h| h.parse::<i32>().map_err(|_| parse_err(1, h, "year column header is not an integer".into())))
        .collect::<Result<Vec<_>>>()?;
    if years.is_empty() {
        return Err(parse_err(1, "header", "no year columns".into()));
    }
    let mut regions = Vec::new();
    let mut values = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        let name = record.get(0).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(parse_err(line, "region", "missing region name".into()));
        }
        if !seen.insert(name.clone()) {
            return Err(parse_err(line, "region", format!("duplicate region `{name}`")));
        }
        let mut row = Vec::with_capacity(years.len());
        for (j, year) in years.iter().enumerate() {
            let field = year.to_string();
            let cell = record
                .get(j + 1)
                .filter(|c| !c.is_empty())
                .ok_or_else(|| parse_err(line, &field, format!("missing value for `{name}`")))?;
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, &field, format!("cannot parse `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, &field, "value is not finite".into()));
            }
            if non_negative && v < 0.0 {
                return Err(parse_err(line, &field, format!("negative value {v}")));
            }
            row.push(v);
        }
        regions.push(name);
        values.push(row);
    }
    Ok((regions, years, values))
}

pub fn write_matrix(path: &Path, regions: &[String], years: &[i32], values: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["region".to_string()];
    header.extend(years.iter().map(|y| y.to_string()));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (name, row) in regions.iter().zip(values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl BalanceTable {
    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.iter().position(|y| *y == year)
    }

    pub fn len(&self) -> usize {
        self.records.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn production(&self) -> Matrix {
        self.map(|r| r.production)
    }

    /// Right-hand side of the balance: food + feed + seed + other.
    pub fn demand(&self) -> Matrix {
        self.map(BalanceRecord::demand)
    }

    fn map(&self, f: impl Fn(&BalanceRecord) -> f64) -> Matrix {
        self.records
            .iter()
            .map(|row| row.iter().map(&f).collect())
            .collect()
    }

    pub fn world(&self, t: usize) -> WorldBalance {
        let (mut supply, mut demand, mut gni) = (0.0, 0.0, 0.0);
        for row in &self.records {
            let r = &row[t];
            supply += r.production;
            demand += r.demand();
            gni += r.import - r.export;
        }
        WorldBalance {
            supply,
            demand,
            gni,
        }
    }

    /// Regions ranked by mean production, with their share of world output.
    pub fn production_ranking(&self) -> Vec<(String, f64)> {
        let n = self.years.len().max(1) as f64;
        let means: Vec<f64> = self
            .records
            .iter()
            .map(|row| row.iter().map(|r| r.production).sum::<f64>() / n)
            .collect();
        let total: f64 = means.iter().sum();
        let mut ranked: Vec<(String, f64)> = self
            .regions
            .iter()
            .cloned()
            .zip(means.iter().map(|m| if total > 0.0 { m / total } else { 0.0 }))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    /// Share of world production held by the `k` largest producers.
    pub fn top_share(&self, k: usize) -> f64 {
        self.production_ranking().iter().take(k).map(|(_, s)| s).sum()
    }
}

/// World totals for one year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldBalance {
    /// Y_t
    pub supply: f64,
    /// D_t
    pub demand: f64,
    /// Global net import, sum of imports minus exports.
    pub gni: f64,
}

impl WorldBalance {
    /// `Y_t - D_t + GNI_t`; zero when the regional balances close.
    pub fn residual(&self) -> f64 {
        self.supply - self.demand + self.gni
    }
}

/// GNI_t for a year index.
pub fn compute_gni(table: &BalanceTable, t: usize) -> f64 {
    table.world(t).gni
}

/// Supply and demand corrected so that the world balance closes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub supply: f64,
    pub demand: f64,
    pub corrected_supply: f64,
    pub corrected_demand: f64,
    pub eta_y: f64,
    pub eta_d: f64,
}

pub fn corrected_supply_demand(world: WorldBalance) -> Result<Correction> {
    if !(world.supply > 0.0) || !(world.demand > 0.0) {
        return Err(Error::Numeric(format!(
            "world supply ({}) and demand ({}) must be positive",
            world.supply, world.demand
        )));
    }
    let eta_y = world.gni / world.supply;
    let eta_d = -world.gni / world.demand;
    Ok(Correction {
        supply: world.supply,
        demand: world.demand,
        corrected_supply: (1.0 + eta_y) * world.supply,
        corrected_demand: (1.0 + eta_d) * world.demand,
        eta_y,
        eta_d,
    })
}

/// `D~_{z,t} = (1 - eta_t) D_{z,t}`.
pub fn desired_demand(demand: &Matrix, eta_d: &[f64]) -> Result<Matrix> {
    if let Some(bad) = eta_d.iter().find(|e| !(**e > -1.0 && **e < 1.0)) {
        return Err(Error::Input(format!("demand deviation {bad} outside (-1, 1)")));
    }
    demand
        .iter()
        .map(|row| {
            if row.len() != eta_d.len() {
                return Err(Error::Input(format!(
                    "{} demand years but {} deviations",
                    row.len(),
                    eta_d.len()
                )));
            }
            Ok(row.iter().zip(eta_d).map(|(d, e)| (1.0 - e) * d).collect())
        })
        .collect()
}

/// Static per-region data: incoming hub position and harvest month.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMeta {
    pub id: String,
    pub location: GeoPoint,
    pub harvest_month: u32,
}

/// Region as the simulator sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionInput {
    pub id: String,
    pub location: GeoPoint,
    pub supplier: bool,
    pub harvest_month: u32,
}

/// Everything the world builder needs.
///
/// Suppliers keep their production and full desired demand; net buyers
/// carry zero production and their net demand `D~ - Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInputs {
    pub years: Vec<i32>,
    pub regions: Vec<RegionInput>,
    pub production: Matrix,
    pub desired_demand: Matrix,
    pub eta_d: Vec<f64>,
    /// Unreduced production and total use, kept for recalibration and
    /// quantity reports.
    pub balance_production: Matrix,
    pub balance_demand: Matrix,
}

/// Partitions regions into suppliers and net buyers.
///
/// A region is a net buyer when `D~ >= Y` in every year: it consumes its
/// production internally and only its net demand reaches the market.
pub fn reduce_producers(
    years: &[i32],
    meta: &[RegionMeta],
    production: &Matrix,
    demand: &Matrix,
    eta_d: &[f64],
) -> Result<PreparedInputs> {
    if meta.len() != production.len() || meta.len() != demand.len() {
        return Err(Error::Input(format!(
            "{} regions, {} production rows, {} demand rows",
            meta.len(),
            production.len(),
            demand.len()
        )));
    }
    let desired = desired_demand(demand, eta_d)?;
    let mut regions = Vec::with_capacity(meta.len());
    let mut prod_out = Vec::with_capacity(meta.len());
    let mut dem_out = Vec::with_capacity(meta.len());
    for ((m, y), d) in meta.iter().zip(production).zip(&desired) {
        if y.len() != years.len() {
            return Err(Error::Input(format!("region `{}`: production has {} years, expected {}", m.id, y.len(), years.len())));
        }
        let net_buyer = y.iter().zip(d).all(|(y, d)| d >= y);
        regions.push(RegionInput {
            id: m.id.clone(),
            location: m.location,
            supplier: !net_buyer,
            harvest_month: m.harvest_month,
        });
        if net_buyer {
            prod_out.push(vec![0.0; years.len()]);
            dem_out.push(d.iter().zip(y).map(|(d, y)| d - y).collect());
        } else {
            prod_out.push(y.clone());
            dem_out.push(d.clone());
        }
    }
    Ok(PreparedInputs {
        years: years.to_vec(),
        regions,
        production: prod_out,
        desired_demand: dem_out,
        eta_d: eta_d.to_vec(),
        balance_production: production.clone(),
        balance_demand: demand.clone(),
    })
}

/// Raw data from which prepared inputs can be regenerated for any demand
/// deviation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseData {
    pub years: Vec<i32>,
    pub meta: Vec<RegionMeta>,
    pub production: Matrix,
    pub demand: Matrix,
}

impl BaseData {
    pub fn from_table(table: &BalanceTable, hubs: &[RegionMeta]) -> Result<Self> {
        let meta = table
            .regions
            .iter()
            .map(|r| {
                hubs.iter()
                    .find(|h| h.id == *r)
                    .cloned()
                    .ok_or_else(|| Error::Input(format!("no hub coordinates for region `{r}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseData {
            years: table.years.clone(),
            meta,
            production: table.production(),
            demand: table.demand(),
        })
    }

    pub fn from_prepared(inputs: &PreparedInputs) -> Self {
        BaseData {
            years: inputs.years.clone(),
            meta: inputs
                .regions
                .iter()
                .map(|r| RegionMeta {
                    id: r.id.clone(),
                    location: r.location,
                    harvest_month: r.harvest_month,
                })
                .collect(),
            production: inputs.balance_production.clone(),
            demand: inputs.balance_demand.clone(),
        }
    }

    pub fn prepare(&self, eta_d: &[f64]) -> Result<PreparedInputs> {
        reduce_producers(&self.years, &self.meta, &self.production, &self.demand, eta_d)
    }
}

impl PreparedInputs {
    pub fn supplier_count(&self) -> usize {
        self.regions.iter().filter(|r| r.supplier).count()
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.regions.len();
        let ny = self.years.len();
        if ny == 0 {
            return Err(Error::Input("no simulation years".into()));
        }
        let mut ids = BTreeSet::new();
        for r in &self.regions {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Input(format!("duplicate region id `{}`", r.id)));
            }
            if !(1..=12).contains(&r.harvest_month) {
                return Err(Error::Input(format!("region `{}`: harvest month {} not in 1..=12", r.id, r.harvest_month)));
            }
        }
        for (name, m) in [
            ("production", &self.production),
            ("desired demand", &self.desired_demand),
            ("balance production", &self.balance_production),
            ("balance demand", &self.balance_demand),
        ] {
            if m.len() != n {
                return Err(Error::Input(format!("{name}: {} rows for {n} regions", m.len())));
            }
            for (r, row) in self.regions.iter().zip(m) {
                if row.len() != ny {
                    return Err(Error::Input(format!("{name}: region `{}` has {} years, expected {ny}", r.id, row.len())));
                }
                if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Input(format!("{name}: region `{}` has a negative or non-finite value", r.id)));
                }
            }
        }
        for (r, row) in self.regions.iter().zip(&self.production) {
            if r.supplier && row.iter().all(|v| *v == 0.0) {
                return Err(Error::Input(format!("supplier `{}` has an empty production series", r.id)));
            }
        }
        if self.eta_d.len() != ny {
            return Err(Error::Input(format!("{} demand deviations for {ny} years", self.eta_d.len())));
        }
        Ok(())
    }

    /// Writes the prepared-input directory.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ids = self.region_ids();
        write_matrix(&dir.join("production.csv"), &ids, &self.years, &self.production)?;
        write_matrix(&dir.join("desired_demand.csv"), &ids, &self.years, &self.desired_demand)?;
        write_matrix(&dir.join("balance_production.csv"), &ids, &self.years, &self.balance_production)?;
        write_matrix(&dir.join("balance_demand.csv"), &ids, &self.years, &self.balance_demand)?;

        let path = dir.join("regions.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["id", "lat", "lon", "supplier", "harvest_month"])
            .map_err(|e| Error::csv(&path, e))?;
        for r in &self.regions {
            w.write_record([
                r.id.clone(),
                r.location.latitude().to_string(),
                r.location.longitude().to_string(),
                r.supplier.to_string(),
                r.harvest_month.to_string(),
            ])
            .map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("eta_d.csv");
        write_eta(&path, &self.years, &self.eta_d)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let (ids, years, production) = read_matrix(&dir.join("production.csv"), true)?;
        let desired = read_aligned(&dir.join("desired_demand.csv"), &ids, &years)?;
        let balance_production = read_aligned(&dir.join("balance_production.csv"), &ids, &years)?;
        let balance_demand = read_aligned(&dir.join("balance_demand.csv"), &ids, &years)?;

        let path = dir.join("regions.csv");
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| Error::csv(&path, e))?;
        let mut by_id = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let line = i as u64 + 2;
            let field = |k: usize, name: &str| -> Result<String> {
                rec.get(k).map(str::to_string).ok_or_else(|| Error::Parse {
                    file: path.clone(),
                    line,
                    field: name.into(),
                    message: "missing value".into(),
                })
            };
            let bad = |name: &str, v: &str| Error::Parse {
                file: path.clone(),
                line,
                field: name.into(),
                message: format!("cannot parse `{v}`"),
            };
            let id = field(0, "id")?;
            let lat = field(1, "lat")?;
            let lon = field(2, "lon")?;
            let sup = field(3, "supplier")?;
            let hm = field(4, "harvest_month")?;
            let location = GeoPoint::new(
                lat.parse().map_err(|_| bad("lat", &lat))?,
                lon.parse().map_err(|_| bad("lon", &lon))?,
            )
            .map_err(|e| Error::Parse {
                file: path.clone(),
                line,
                field: "lat/lon".into(),
                message: e.to_string(),
            })?;
            let region = RegionInput {
                id: id.clone(),
                location,
                supplier: sup.parse().map_err(|_| bad("supplier", &sup))?,
                harvest_month: hm.parse().map_err(|_| bad("harvest_month", &hm))?,
            };
            if by_id.insert(id.clone(), region).is_some() {
                return Err(Error::Input(format!("{}: duplicate region `{id}`", path.display())));
            }
        }
        let regions = ids
            .iter()
            .map(|id| {
                by_id
                    .remove(id)
                    .ok_or_else(|| Error::Input(format!("{}: missing coordinates for `{id}`", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        let eta_d = read_eta(&dir.join("eta_d.csv"), &years)?;
        let inputs = PreparedInputs {
            years,
            regions,
            production,
            desired_demand: desired,
            eta_d,
            balance_production,
            balance_demand,
        };
        inputs.validate()?;
        Ok(inputs)
    }
}

fn read_aligned(path: &Path, ids: &[String], years: &[i32]) -> Result<Matrix> {
    let (r, y, m) = read_matrix(path, true)?;
    if r != ids || y != years {
        return Err(Error::Input(format!(
            "{}: regions or years differ from production.csv",
            path.display()
        )));
    }
    Ok(m)
}

pub fn write_eta(path: &Path, years: &[i32], eta: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["year", "eta_d"]).map_err(|e| Error::csv(path, e))?;
    for (y, e) in years.iter().zip(eta) {
        w.write_record([y.to_string(), e.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_eta(path: &Path, years: &[i32]) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut by_year = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i as u64 + 2;
        let parse = |k: usize, name: &str| -> Result<f64> {
            let v = rec.get(k).unwrap_or("").trim();
            v.parse().map_err(|_| Error::Parse {
                file: path.to_path_buf(),
                line,
                field: name.into(),
                message: format!("cannot parse `{v}`"),
            })
        };
        by_year.insert(parse(0, "year")? as i32, parse(1, "eta_d")?);
    }
    years
        .iter()
        .map(|y| {
            by_year
                .get(y)
                .copied()
                .ok_or_else(|| Error::Input(format!("{}: no value for {y}", path.display())))
        })
        .collect()
}

/// `region,lat,lon,harvest_month` overrides for hub positions.
pub fn read_hubs(path: &Path) -> Result<Vec<RegionMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i as u64 + 2;
        let err = |field: &str, message: String| Error::Parse {
            file: path.to_path_buf(),
            line,
            field: field.into(),
            message,
        };
        let get = |k: usize, name: &str| rec.get(k).ok_or_else(|| err(name, "missing value".into()));
        let id = get(0, "region")?.to_string();
        let lat: f64 = get(1, "lat")?.parse().map_err(|_| err("lat", "not a number".into()))?;
        let lon: f64 = get(2, "lon")?.parse().map_err(|_| err("lon", "not a number".into()))?;
        let hm: u32 = get(3, "harvest_month")?
            .parse()
            .map_err(|_| err("harvest_month", "not an integer".into()))?;
        let location = GeoPoint::new(lat, lon).map_err(|e| err("lat/lon", e.to_string()))?;
        out.push(RegionMeta {
            id,
            location,
            harvest_month: hm,
        });
    }
    Ok(out)
}

/// The 24 regions of the wheat setup, their incoming hubs and the month
/// their main market harvests.
pub fn default_hubs() -> Vec<RegionMeta> {
    const HUBS: [(&str, f64, f64, u32); 24] = [
        ("Eastern Africa", 9.03, 38.74, 11),
        ("Middle Africa", -8.84, 13.23, 10),
        ("Northern Africa", 30.04, 31.24, 5),
        ("Southern Africa", -26.20, 28.05, 11),
        ("Western Africa", 6.52, 3.38, 3),
        ("Northern America - USA", 41.88, -87.63, 6),
        ("Northern America except USA", 49.90, -97.14, 8),
        ("South America", -23.55, -46.63, 12),
        ("Central America", 19.43, -99.13, 5),
        ("Caribbean", 23.11, -82.37, 3),
        ("Southern Asia - India", 28.61, 77.21, 4),
        ("Southern Asia - Pakistan", 24.86, 67.00, 4),
        ("Southern Asia except India & Pakistan", 35.69, 51.39, 6),
        ("Central Asia - Russian Federation", 55.76, 37.62, 7),
        ("Central Asia except Russian Federation", 41.30, 69.24, 8),
        ("Eastern Asia - China", 39.90, 116.40, 6),
        ("Eastern Asia except China", 35.68, 139.69, 7),
        ("South-Eastern Asia", -6.20, 106.85, 3),
        ("Western Asia", 33.31, 44.36, 6),
        ("Eastern Europe", 52.23, 21.01, 7),
        ("Northern Europe", 51.51, -0.13, 8),
        ("Western Europe", 52.37, 4.90, 7),
        ("Southern Europe", 41.90, 12.50, 6),
        ("Oceania", -41.29, 174.78, 11),
    ];
    HUBS.iter()
        .map(|&(id, lat, lon, hm)| RegionMeta {
            id: id.to_string(),
            location: GeoPoint::new(lat, lon).expect("static hub coordinates are valid"),
            harvest_month: hm,
        })
        .collect()
}
