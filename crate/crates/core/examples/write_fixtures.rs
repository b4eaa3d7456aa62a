//! Writes the two synthetic balance data sets as CSV plus a manifest each.
//!
//! ```text
//! cargo run -p cmsw-core --example write_fixtures -- data/
//! ```
//!
//! produces `data/small/manifest.toml` (five regions, ten years) and
//! `data/wheat_like/manifest.toml` (24 regions, 22 years).

use std::path::PathBuf;

use cmsw_core::data::default_hubs;
use cmsw_core::fixtures::{
    synthetic_oil, synthetic_regions, synthetic_table, wheat_like_table, write_balance_fixture,
    SYNTHETIC_FIRST_YEAR, SYNTHETIC_YEARS, WHEAT_FIRST_YEAR, WHEAT_YEARS,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let small = write_balance_fixture(
        &synthetic_table(),
        &synthetic_regions(),
        &synthetic_oil(SYNTHETIC_FIRST_YEAR, SYNTHETIC_YEARS),
        &root.join("small"),
    )?;
    let wheat = write_balance_fixture(
        &wheat_like_table(),
        &default_hubs(),
        &synthetic_oil(WHEAT_FIRST_YEAR, WHEAT_YEARS),
        &root.join("wheat_like"),
    )?;
    println!("{}\n{}", small.display(), wheat.display());
    Ok(())
}
