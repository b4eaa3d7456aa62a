//! Hub positions and great-circle distances.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius used for every distance in the model.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

impl GeoPoint {
    /// Latitude must lie in [-90, 90] and longitude in [-180, 180]; a
    /// longitude of -180 is stored as 180.
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Input(format!("latitude {latitude} out of [-90, 90]")));
        }
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Input(format!(
                "longitude {longitude} out of (-180, 180]"
            )));
        }
        let longitude = if longitude == -180.0 { 180.0 } else { longitude };
        Ok(GeoPoint {
            latitude,
            longitude,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    /// Haversine great-circle distance in kilometres.
    pub fn distance_km(&self, other: &GeoPoint) -> f64 {
        let lat1 = self.latitude.to_radians();
        let lat2 = other.latitude.to_radians();
        let dlat = (other.latitude - self.latitude).to_radians() / 2.0;
        let dlon = (other.longitude - self.longitude).to_radians() / 2.0;
        let h = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
        2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
    }

    /// Distance in thousands of kilometres, the unit transport costs are quoted in.
    pub fn distance_kkm(&self, other: &GeoPoint) -> f64 {
        self.distance_km(other) / 1000.0
    }
}
