use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hotspot::HotspotCell;
use super::index::SpatialIndex;
use crate::domain::{
    check_coordinates, Car2XEvent, FeatureRecord, RoadSegment, SegmentCode, TileId, Timestamp,
    TrafficRecord, WeatherObservation,
};
use crate::error::{Error, Result};
use crate::features::temporal_encode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniqueTile {
    pub tile_id: TileId,
    pub latitude: f64,
    pub longitude: f64,
}

/// One entry per distinct tile, ordered by id.
pub fn extract_unique_tiles(weather: &[WeatherObservation]) -> Result<Vec<UniqueTile>> {
    let mut tiles: BTreeMap<TileId, (f64, f64)> = BTreeMap::new();
    for obs in weather {
        let loc = (obs.tile_latitude, obs.tile_longitude);
        match tiles.get(&obs.tile_id) {
            Some(&prev) if prev != loc => {
                return Err(Error::Integrity(format!(
                    "weather tile {} reported at ({}, {}) and ({}, {})",
                    obs.tile_id, prev.0, prev.1, loc.0, loc.1
                )))
            }
            Some(_) => {}
            None => {
                tiles.insert(obs.tile_id, loc);
            }
        }
    }
    Ok(tiles
        .into_iter()
        .map(|(tile_id, (latitude, longitude))| UniqueTile {
            tile_id,
            latitude,
            longitude,
        })
        .collect())
}

/// Maximum age of the condition data joined onto an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCaps {
    pub weather_staleness_s: i64,
    pub traffic_staleness_s: i64,
}

impl Default for MatchCaps {
    fn default() -> Self {
        MatchCaps {
            weather_staleness_s: 3 * 3600,
            traffic_staleness_s: 3600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Hotspot,
    InvalidPosition,
    NoRoad,
    NoTraffic,
    NoWeather,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Hotspot => "hotspot",
            DropReason::InvalidPosition => "invalid_position",
            DropReason::NoRoad => "no_road",
            DropReason::NoTraffic => "no_traffic",
            DropReason::NoWeather => "no_weather",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropCounts {
    pub input_events: usize,
    pub matched: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl DropCounts {
    pub fn get(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }
}

/// Read-only join state: spatial indexes plus time-sorted condition series.
#[derive(Debug, Clone)]
pub struct Matcher {
    roads: HashMap<SegmentCode, RoadSegment>,
    road_index: SpatialIndex<SegmentCode>,
    tile_index: SpatialIndex<TileId>,
    weather: HashMap<TileId, Vec<WeatherObservation>>,
    traffic: HashMap<SegmentCode, Vec<TrafficRecord>>,
    caps: MatchCaps,
}

/// Latest entry at or before `t`; entries must be sorted by time.
fn latest_at_or_before<T>(series: &[T], t: Timestamp, time: impl Fn(&T) -> Timestamp) -> Option<&T> {
    let n = series.partition_point(|x| time(x) <= t);
    n.checked_sub(1).map(|i| &series[i])
}

impl Matcher {
    pub fn new(
        weather: &[WeatherObservation],
        roads: &[RoadSegment],
        traffic: &[TrafficRecord],
        caps: MatchCaps,
    ) -> Result<Self> {
        let tiles = extract_unique_tiles(weather)?;
        let tile_index = SpatialIndex::build(tiles.iter().map(|t| (t.tile_id, t.latitude, t.longitude)));
        let road_index = SpatialIndex::build(
            roads
                .iter()
                .map(|r| (r.segment_code, r.center_latitude, r.center_longitude)),
        );
        let mut by_tile: HashMap<TileId, Vec<WeatherObservation>> = HashMap::new();
        for w in weather {
            by_tile.entry(w.tile_id).or_default().push(w.clone());
        }
        for series in by_tile.values_mut() {
            series.sort_by_key(|w| w.timestamp);
        }
        let mut by_segment: HashMap<SegmentCode, Vec<TrafficRecord>> = HashMap::new();
        for t in traffic {
            by_segment.entry(t.segment_code).or_default().push(t.clone());
        }
        for series in by_segment.values_mut() {
            series.sort_by_key(|t| t.timestamp);
        }
        Ok(Matcher {
            roads: roads.iter().map(|r| (r.segment_code, r.clone())).collect(),
            road_index,
            tile_index,
            weather: by_tile,
            traffic: by_segment,
            caps,
        })
    }

    pub fn caps(&self) -> MatchCaps {
        self.caps
    }

    /// Most recent weather and traffic timestamps held.
    pub fn freshness(&self) -> (Option<Timestamp>, Option<Timestamp>) {
        let w = self.weather.values().filter_map(|s| s.last()).map(|o| o.timestamp).max();
        let t = self.traffic.values().filter_map(|s| s.last()).map(|o| o.timestamp).max();
        (w, t)
    }

    /// Joins one event with its nearest segment's traffic and nearest tile's
    /// weather, both the latest at or before the event and within the caps.
    pub fn match_event(&self, event: &Car2XEvent) -> std::result::Result<FeatureRecord, DropReason> {
        if check_coordinates(event.latitude, event.longitude).is_err() {
            return Err(DropReason::InvalidPosition);
        }
        let (lat, lon, t) = (event.latitude, event.longitude, event.timestamp);
        let segment = self
            .road_index
            .nearest_one(lat, lon)
            .map_err(|_| DropReason::NoRoad)?
            .id;
        let road = &self.roads[&segment];
        let traffic = self
            .traffic
            .get(&segment)
            .and_then(|s| latest_at_or_before(s, t, |r| r.timestamp))
            .filter(|r| t - r.timestamp <= self.caps.traffic_staleness_s)
            .ok_or(DropReason::NoTraffic)?;
        let tile = self
            .tile_index
            .nearest_one(lat, lon)
            .map_err(|_| DropReason::NoWeather)?
            .id;
        let weather = self
            .weather
            .get(&tile)
            .and_then(|s| latest_at_or_before(s, t, |w| w.timestamp))
            .filter(|w| t - w.timestamp <= self.caps.weather_staleness_s)
            .ok_or(DropReason::NoWeather)?;
        let temporal = temporal_encode(t, lon, lat);
        Ok(FeatureRecord {
            event_id: event.event_id,
            latitude: lat,
            longitude: lon,
            timestamp: t,
            segment_code: segment,
            tile_id: tile,
            weather_timestamp: weather.timestamp,
            traffic_timestamp: traffic.timestamp,
            air_temperature: weather.air_temperature,
            pavement_temperature: weather.pavement_temperature,
            air_pressure: weather.air_pressure,
            precipitation: weather.precipitation,
            visibility: weather.visibility,
            speed_current: traffic.speed_current,
            speed_monthly_avg: traffic.speed_monthly_avg,
            speed_reference: traffic.speed_reference,
            frc_level: road.frc_level,
            time_of_day: temporal.time_of_day,
            day_of_week: temporal.day_of_week,
            day_of_year: temporal.day_of_year,
            daylight: temporal.daylight,
            label: event.is_emergency_braking,
        })
    }
}

/// Drops hotspot events, joins the rest and returns records ordered by
/// event id together with per-reason drop counts.
pub fn assemble(
    events: &[Car2XEvent],
    matcher: &Matcher,
    hotspots: &[HotspotCell],
) -> (Vec<FeatureRecord>, DropCounts) {
    let mut ordered: Vec<&Car2XEvent> = events.iter().collect();
    ordered.sort_by_key(|e| e.event_id);
    let outcomes: Vec<std::result::Result<FeatureRecord, DropReason>> = ordered
        .par_iter()
        .map(|e| {
            if hotspots.iter().any(|h| h.contains(e.latitude, e.longitude)) {
                Err(DropReason::Hotspot)
            } else {
                matcher.match_event(e)
            }
        })
        .collect();
    let mut counts = DropCounts {
        input_events: events.len(),
        ..DropCounts::default()
    };
    let mut records = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(reason) => *counts.dropped.entry(reason).or_insert(0) += 1,
        }
    }
    counts.matched = records.len();
    (records, counts)
}
