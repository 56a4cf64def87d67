//! Raw observation types and the fully matched record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EventId = u64;
pub type TileId = u32;
pub type SegmentCode = u32;

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub fn check_coordinates(latitude: f64, longitude: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&latitude) || !latitude.is_finite() {
        return Err(Error::InvalidInput(format!(
            "latitude {latitude} outside [-90, 90]"
        )));
    }
    if !(-180.0..=180.0).contains(&longitude) || !longitude.is_finite() {
        return Err(Error::InvalidInput(format!(
            "longitude {longitude} outside [-180, 180]"
        )));
    }
    Ok(())
}

/// One vehicle status message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Car2XEvent {
    pub event_id: EventId,
    pub latitude: f64,
    pub longitude: f64,
    pub timestamp: Timestamp,
    pub is_emergency_braking: bool,
}

/// Weather measured at the center of a fixed tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub tile_id: TileId,
    pub tile_latitude: f64,
    pub tile_longitude: f64,
    pub timestamp: Timestamp,
    /// °C
    pub air_temperature: f64,
    /// °C
    pub pavement_temperature: f64,
    /// hPa
    pub air_pressure: f64,
    /// mm/h
    pub precipitation: f64,
    /// meters
    pub visibility: f64,
}

impl WeatherObservation {
    pub fn validate(&self) -> Result<()> {
        check_coordinates(self.tile_latitude, self.tile_longitude)?;
        if !(self.visibility >= 0.0) {
            return Err(Error::Integrity(format!(
                "tile {}: negative visibility",
                self.tile_id
            )));
        }
        if !(self.precipitation >= 0.0) {
            return Err(Error::Integrity(format!(
                "tile {}: negative precipitation",
                self.tile_id
            )));
        }
        if !(850.0..=1100.0).contains(&self.air_pressure) {
            return Err(Error::Integrity(format!(
                "tile {}: air pressure {} outside [850, 1100]",
                self.tile_id, self.air_pressure
            )));
        }
        Ok(())
    }
}

/// Functional road class, 1 (highways) to 4 (neighbourhood streets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Frc(u8);

impl Frc {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=4).contains(&level) {
            Ok(Frc(level))
        } else {
            Err(Error::InvalidInput(format!("FRC level {level} outside 1..=4")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Frc {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Frc::new(v)
    }
}

impl From<Frc> for u8 {
    fn from(f: Frc) -> u8 {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub segment_code: SegmentCode,
    pub center_latitude: f64,
    pub center_longitude: f64,
    pub frc_level: Frc,
    pub name: String,
}

/// Speeds in km/h for one segment at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub segment_code: SegmentCode,
    pub timestamp: Timestamp,
    pub speed_current: f64,
    pub speed_monthly_avg: f64,
    pub speed_reference: f64,
}

impl TrafficRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_current >= 0.0 && self.speed_monthly_avg >= 0.0) {
            return Err(Error::Integrity(format!(
                "segment {}: negative speed",
                self.segment_code
            )));
        }
        if !(self.speed_reference > 0.0) {
            return Err(Error::Integrity(format!(
                "segment {}: reference speed must be positive",
                self.segment_code
            )));
        }
        Ok(())
    }
}

/// An event joined with its weather, traffic, road and temporal context.
///
/// Field order is the column order of the canonical dataset file; the label
/// comes last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub event_id: EventId,
    pub latitude: f64,
    pub longitude: f64,
    pub timestamp: Timestamp,
    pub segment_code: SegmentCode,
    pub tile_id: TileId,
    pub weather_timestamp: Timestamp,
    pub traffic_timestamp: Timestamp,
    pub air_temperature: f64,
    pub pavement_temperature: f64,
    pub air_pressure: f64,
    pub precipitation: f64,
    pub visibility: f64,
    pub speed_current: f64,
    pub speed_monthly_avg: f64,
    pub speed_reference: f64,
    pub frc_level: Frc,
    /// Seconds since local solar midnight.
    pub time_of_day: f64,
    /// 0 = Monday.
    pub day_of_week: u8,
    /// 1-based ordinal day in the local calendar year.
    pub day_of_year: u16,
    pub daylight: bool,
    pub label: bool,
}

impl FeatureRecord {
    pub fn continuous_fields(&self) -> [(&'static str, f64); 9] {
        [
            ("air_temperature", self.air_temperature),
            ("pavement_temperature", self.pavement_temperature),
            ("air_pressure", self.air_pressure),
            ("precipitation", self.precipitation),
            ("visibility", self.visibility),
            ("speed_current", self.speed_current),
            ("speed_monthly_avg", self.speed_monthly_avg),
            ("speed_reference", self.speed_reference),
            ("time_of_day", self.time_of_day),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frc_rejects_out_of_range() {
        assert!(Frc::new(0).is_err());
        assert!(Frc::new(5).is_err());
        assert_eq!(Frc::new(3).unwrap().level(), 3);
        assert!(serde_json::from_str::<Frc>("7").is_err());
    }

    #[test]
    fn coordinate_ranges() {
        assert!(check_coordinates(90.0, -180.0).is_ok());
        assert!(check_coordinates(95.0, 0.0).is_err());
        assert!(check_coordinates(0.0, 180.5).is_err());
        assert!(check_coordinates(f64::NAN, 0.0).is_err());
    }
}
