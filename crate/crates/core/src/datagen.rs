//! Synthetic stand-in for the event, weather, road and traffic feeds.
//!
//! Weather follows a regional hourly process (temperature and pressure
//! drifts shared by all tiles, a diurnal cycle, per-tile offsets). Traffic is
//! emitted at the top of every hour in which a segment carries an event.
//! Labels are drawn from `ceiling * sigmoid(offset + risk)`, where `risk` sums
//! bounded terms over the matched record and `offset` is found by bisection
//! so the expected positive fraction equals the configured one.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    check_coordinates, Car2XEvent, FeatureRecord, Frc, RoadSegment, SegmentCode, Timestamp, TrafficRecord,
    WeatherObservation,
};
use crate::error::{Error, Result};
use crate::geomatch::{MatchCaps, Matcher, SpatialIndex};
use crate::models::sigmoid;
use crate::rng::{stream, DetRng};

/// Version of the raw line-delimited store format.
pub const RAW_FORMAT_VERSION: u32 = 1;

const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotspotSpec {
    pub latitude: f64,
    pub longitude: f64,
    pub extra_events: usize,
}

/// Weights of the label model's risk terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalStrengths {
    /// Smooth step in air temperature around 21 °C.
    pub temperature: f64,
    /// Pressure anomaly, clipped.
    pub pressure: f64,
    /// Major roads carry more risk than residential ones.
    pub road_class: f64,
    /// Afternoon and night peaks, quieter mornings.
    pub time_of_day: f64,
    /// Rain on fast roads.
    pub wet_fast_road: f64,
    /// Current speed well below reference.
    pub congestion: f64,
    pub low_visibility: f64,
    /// Heat on highways and arterials.
    pub hot_major_road: f64,
    /// Upper bound on any event's probability.
    pub ceiling: f64,
}

impl Default for SignalStrengths {
    fn default() -> Self {
        SignalStrengths {
            temperature: 2.2,
            pressure: 1.3,
            road_class: 1.2,
            time_of_day: 1.5,
            wet_fast_road: 3.0,
            congestion: 3.0,
            low_visibility: 3.0,
            hot_major_road: 1.2,
            ceiling: 0.45,
        }
    }
}

impl SignalStrengths {
    pub fn risk(&self, r: &FeatureRecord) -> f64 {
        let frc = r.frc_level.level();
        let hour = r.time_of_day / 3600.0;
        let period = if (14.0..18.0).contains(&hour) {
            1.0
        } else if (5.0..14.0).contains(&hour) {
            -0.3
        } else if hour >= 22.0 || hour < 5.0 {
            1.0
        } else {
            0.0
        };
        let road = [0.6, 0.4, -0.2, -0.8][usize::from(frc) - 1];
        let ratio = r.speed_current / r.speed_reference;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        self.temperature * sigmoid((r.air_temperature - 21.0) / 2.5)
            + self.pressure * ((r.air_pressure - 1013.0) / 8.0).clamp(-1.5, 1.5)
            + self.road_class * road
            + self.time_of_day * period
            + self.wet_fast_road * 1.8 * flag(r.precipitation > 0.2 && r.speed_reference >= 100.0)
            + self.congestion * flag(ratio > 0.35 && ratio < 0.6)
            + self.low_visibility * flag(r.visibility < 3000.0)
            + self.hot_major_road * flag(r.air_temperature > 24.0 && frc <= 2)
    }

    pub fn probability(&self, risk: f64, offset: f64) -> f64 {
        self.ceiling * sigmoid(offset + risk)
    }

    /// Offset whose mean probability over `risks` equals `target`.
    pub fn calibrate(&self, risks: &[f64], target: f64) -> f64 {
        let mean = |b: f64| risks.iter().map(|&r| self.probability(r, b)).sum::<f64>() / risks.len() as f64;
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mean(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Ordinary events; hotspot events come on top.
    pub n_events: usize,
    pub positive_fraction: f64,
    pub region: BoundingBox,
    pub start_timestamp: Timestamp,
    pub n_days: u32,
    pub n_road_segments: usize,
    pub n_weather_tiles: usize,
    pub hotspots: Vec<HotspotSpec>,
    pub signal: SignalStrengths,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            n_events: 110_000,
            positive_fraction: 0.10,
            region: BoundingBox {
                lat_min: 47.8,
                lat_max: 49.0,
                lon_min: 9.0,
                lon_max: 11.8,
            },
            // 2018-05-01T00:00:00Z
            start_timestamp: 1_525_132_800,
            n_days: 92,
            n_road_segments: 2000,
            n_weather_tiles: 48,
            hotspots: vec![
                HotspotSpec {
                    latitude: 48.7066,
                    longitude: 9.0030,
                    extra_events: 1500,
                },
                HotspotSpec {
                    latitude: 48.1774,
                    longitude: 11.5560,
                    extra_events: 1000,
                },
            ],
            signal: SignalStrengths::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.region;
        check_coordinates(b.lat_min, b.lon_min)
            .and_then(|_| check_coordinates(b.lat_max, b.lon_max))
            .map_err(|e| Error::Config(format!("region: {e}")))?;
        if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max) {
            return Err(Error::Config(format!(
                "degenerate region: latitude [{}, {}], longitude [{}, {}]",
                b.lat_min, b.lat_max, b.lon_min, b.lon_max
            )));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::Config(format!(
                "positive_fraction {} outside (0, 1)",
                self.positive_fraction
            )));
        }
        if !(self.signal.ceiling > self.positive_fraction && self.signal.ceiling <= 1.0) {
            return Err(Error::Config(format!(
                "signal ceiling {} must lie in (positive_fraction, 1]",
                self.signal.ceiling
            )));
        }
        for (name, n) in [
            ("n_events", self.n_events),
            ("n_road_segments", self.n_road_segments),
            ("n_weather_tiles", self.n_weather_tiles),
            ("n_days", self.n_days as usize),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for h in &self.hotspots {
            check_coordinates(h.latitude, h.longitude).map_err(|e| Error::Config(format!("hotspot: {e}")))?;
        }
        if DateTime::from_timestamp(self.start_timestamp, 0).is_none() {
            return Err(Error::Config(format!("start_timestamp {} out of range", self.start_timestamp)));
        }
        Ok(())
    }

    fn hours(&self) -> usize {
        self.n_days as usize * 24
    }
}

/// The four raw stores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stores {
    pub events: Vec<Car2XEvent>,
    pub weather: Vec<WeatherObservation>,
    pub roads: Vec<RoadSegment>,
    pub traffic: Vec<TrafficRecord>,
}

/// Tile grid dimensions: rows is the largest divisor of `n` not above its
/// square root.
pub fn tile_grid(n: usize) -> (usize, usize) {
    let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n % r == 0).last().unwrap_or(1);
    (rows, n / rows)
}

fn local_hour(utc: Timestamp, longitude: f64) -> f64 {
    ((utc.rem_euclid(86_400) as f64 / 3600.0) + longitude / 15.0).rem_euclid(24.0)
}

struct RoadPlan {
    roads: Vec<RoadSegment>,
    reference: Vec<f64>,
    /// Monthly average as a fraction of reference, per segment and month.
    monthly: Vec<Vec<f64>>,
}

fn month_index(t: Timestamp, first: (i32, u32)) -> usize {
    let d = DateTime::from_timestamp(t, 0).expect("validated timestamp");
    ((d.year() - first.0) * 12 + d.month() as i32 - first.1 as i32) as usize
}

fn generate_roads(config: &GeneratorConfig, n_months: usize) -> RoadPlan {
    const KINDS: [&str; 4] = ["Highway", "Arterial", "Collector", "Residential"];
    const REFERENCE: [f64; 4] = [130.0, 100.0, 70.0, 50.0];
    let mut rng = DetRng::new(config.seed, stream::ROADS);
    let b = config.region;
    let mut plan = RoadPlan {
        roads: Vec::with_capacity(config.n_road_segments),
        reference: Vec::new(),
        monthly: Vec::new(),
    };
    for i in 0..config.n_road_segments {
        let lat = rng.uniform_in(b.lat_min, b.lat_max);
        let lon = rng.uniform_in(b.lon_min, b.lon_max);
        let class = rng.weighted(&[0.3, 0.3, 0.25, 0.15]);
        let slow = rng.index(3) == 0;
        let code = i as SegmentCode + 1;
        plan.roads.push(RoadSegment {
            segment_code: code,
            center_latitude: lat,
            center_longitude: lon,
            frc_level: Frc::new(class as u8 + 1).expect("class in 0..4"),
            name: format!("{} {code}", KINDS[class]),
        });
        plan.reference.push(REFERENCE[class] * if slow { 0.8 } else { 1.0 });
        plan.monthly.push((0..n_months).map(|_| rng.uniform_in(0.75, 0.92)).collect());
    }
    plan
}

fn generate_weather(config: &GeneratorConfig) -> Vec<WeatherObservation> {
    let mut rng = DetRng::new(config.seed, stream::WEATHER);
    let hours = config.hours();
    let phi: f64 = 0.97;
    let innovation = (1.0 - phi * phi).sqrt();
    let (mut synoptic, mut pressure) = (vec![0.0; hours], vec![0.0; hours]);
    for h in 1..hours {
        synoptic[h] = phi * synoptic[h - 1] + 4.0 * innovation * rng.normal();
        pressure[h] = phi * pressure[h - 1] + 7.0 * innovation * rng.normal();
    }
    let (rows, cols) = tile_grid(config.n_weather_tiles);
    let b = config.region;
    let (dlat, dlon) = ((b.lat_max - b.lat_min) / rows as f64, (b.lon_max - b.lon_min) / cols as f64);
    let mut out = Vec::with_capacity(config.n_weather_tiles * hours);
    for r in 0..rows {
        for c in 0..cols {
            let tile_id = (r * cols + c) as u32 + 1;
            let lat = b.lat_min + (r as f64 + 0.5) * dlat;
            let lon = b.lon_min + (c as f64 + 0.5) * dlon;
            let offset = 1.5 * rng.normal();
            for h in 0..hours {
                let t = config.start_timestamp + h as i64 * 3600;
                let hour = local_hour(t, lon);
                let air = 15.0
                    + 6.0 * h as f64 / hours as f64
                    + 6.0 * (2.0 * PI * (hour - 15.0) / 24.0).cos()
                    + synoptic[h]
                    + offset
                    + 0.7 * rng.normal();
                let sun = (PI * (hour - 5.0) / 16.0).sin().max(0.0);
                let pavement = air + 8.0 * sun + 1.5 * rng.normal();
                let air_pressure =
                    (1013.0 + pressure[h] + 0.5 * synoptic[h] + 0.5 * rng.normal()).clamp(850.0, 1100.0);
                let wet = rng.bernoulli(0.4 * sigmoid(-(air_pressure - 1005.0) / 4.0));
                let rain = rng.exponential(2.0);
                let precipitation = if wet { rain } else { 0.0 };
                let clear = if wet { 20_000.0 * (-precipitation / 2.0).exp() } else { 20_000.0 };
                let visibility = clear * rng.uniform_in(0.6, 1.0);
                out.push(WeatherObservation {
                    tile_id,
                    tile_latitude: lat,
                    tile_longitude: lon,
                    timestamp: t,
                    air_temperature: air,
                    pavement_temperature: pavement,
                    air_pressure,
                    precipitation,
                    visibility,
                });
            }
        }
    }
    out
}

/// Events without labels: ordinary ones jittered around segment centers,
/// then hotspot extras at their exact coordinates.
fn generate_events(config: &GeneratorConfig, roads: &[RoadSegment]) -> Vec<Car2XEvent> {
    let mut rng = DetRng::new(config.seed, stream::EVENTS);
    let hours = config.hours() as u64;
    let mut events = Vec::with_capacity(config.n_events);
    let mut next_id = 1u64;
    for _ in 0..config.n_events {
        let road = &roads[rng.index(roads.len())];
        let t = config.start_timestamp + rng.below(hours * 3600) as i64;
        let north = 100.0 * rng.normal();
        let east = 100.0 * rng.normal();
        let lat = road.center_latitude + north / METERS_PER_DEGREE;
        let lon = road.center_longitude + east / (METERS_PER_DEGREE * lat.to_radians().cos());
        events.push(Car2XEvent {
            event_id: next_id,
            latitude: lat,
            longitude: lon,
            timestamp: t,
            is_emergency_braking: false,
        });
        next_id += 1;
    }
    let mut rng = DetRng::new(config.seed, stream::HOTSPOTS);
    for h in &config.hotspots {
        for _ in 0..h.extra_events {
            events.push(Car2XEvent {
                event_id: next_id,
                latitude: h.latitude,
                longitude: h.longitude,
                timestamp: config.start_timestamp + rng.below(hours * 3600) as i64,
                is_emergency_braking: rng.bernoulli(config.positive_fraction),
            });
            next_id += 1;
        }
    }
    events
}

fn generate_traffic(
    config: &GeneratorConfig,
    plan: &RoadPlan,
    events: &[Car2XEvent],
    first_month: (i32, u32),
) -> Vec<TrafficRecord> {
    let index = SpatialIndex::build(
        plan.roads
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.center_latitude, r.center_longitude)),
    );
    let needed: BTreeSet<(usize, i64)> = events
        .par_iter()
        .filter_map(|e| {
            let seg = index.nearest_one(e.latitude, e.longitude).ok()?.id;
            Some((seg, e.timestamp.div_euclid(3600) * 3600))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let mut rng = DetRng::new(config.seed, stream::TRAFFIC);
    needed
        .into_iter()
        .map(|(seg, t)| {
            let road = &plan.roads[seg];
            let hour = local_hour(t, road.center_longitude);
            let rush = (-((hour - 8.0) / 1.5).powi(2)).exp() + (-((hour - 17.0) / 1.5).powi(2)).exp();
            let reference = plan.reference[seg];
            let avg = reference * plan.monthly[seg][month_index(t, first_month)];
            let current = avg * (1.0 - 0.5 * rush * rng.uniform()) * rng.uniform_in(0.85, 1.1);
            TrafficRecord {
                segment_code: road.segment_code,
                timestamp: t,
                speed_current: current,
                speed_monthly_avg: avg,
                speed_reference: reference,
            }
        })
        .collect()
}

/// Generates all four stores from `config`; identical configs give identical
/// stores.
pub fn generate(config: &GeneratorConfig) -> Result<Stores> {
    config.validate()?;
    let start = DateTime::from_timestamp(config.start_timestamp, 0).expect("validated");
    let first_month = (start.year(), start.month());
    let last = config.start_timestamp + config.hours() as i64 * 3600 - 1;
    let n_months = month_index(last, first_month) + 1;

    let plan = generate_roads(config, n_months);
    let weather = generate_weather(config);
    let mut events = generate_events(config, &plan.roads);
    let traffic = generate_traffic(config, &plan, &events, first_month);

    let matcher = Matcher::new(&weather, &plan.roads, &traffic, MatchCaps::default())?;
    let risks: Vec<Option<f64>> = events[..config.n_events]
        .par_iter()
        .map(|e| matcher.match_event(e).ok().map(|r| config.signal.risk(&r)))
        .collect();
    let known: Vec<f64> = risks.iter().flatten().copied().collect();
    let offset = if known.is_empty() {
        0.0
    } else {
        config.signal.calibrate(&known, config.positive_fraction)
    };
    let mut rng = DetRng::new(config.seed, stream::LABELS);
    for (event, risk) in events.iter_mut().zip(&risks) {
        let p = match risk {
            Some(r) => config.signal.probability(*r, offset),
            None => config.positive_fraction,
        };
        event.is_emergency_braking = rng.uniform() < p;
    }
    Ok(Stores {
        events,
        weather,
        roads: plan.roads,
        traffic,
    })
}

/// First line of every raw store file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub store: String,
    pub format_version: u32,
    pub records: usize,
}

pub const EVENTS_FILE: &str = "events.jsonl";
pub const WEATHER_FILE: &str = "weather.jsonl";
pub const ROADS_FILE: &str = "roads.jsonl";
pub const TRAFFIC_FILE: &str = "traffic.jsonl";

fn write_store<T: Serialize>(path: &Path, store: &str, records: &[T]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let header = RawHeader {
        store: store.to_string(),
        format_version: RAW_FORMAT_VERSION,
        records: records.len(),
    };
    let mut line = |value: String| writeln!(w, "{value}").map_err(io);
    line(serde_json::to_string(&header).expect("header serializes"))?;
    for r in records {
        line(serde_json::to_string(r).expect("record serializes"))?;
    }
    w.flush().map_err(io)
}

fn read_store<T: DeserializeOwned>(path: &Path, store: &str) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::corrupt(path, "missing header line"))?
        .map_err(|e| Error::io(path, e))?;
    let header: RawHeader =
        serde_json::from_str(&first).map_err(|e| Error::corrupt(path, format!("header: {e}")))?;
    if header.format_version != RAW_FORMAT_VERSION {
        return Err(Error::Version {
            found: header.format_version,
            supported: RAW_FORMAT_VERSION,
        });
    }
    if header.store != store {
        return Err(Error::corrupt(
            path,
            format!("holds store {:?}, expected {store:?}", header.store),
        ));
    }
    let mut records = Vec::with_capacity(header.records);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::corrupt(path, format!("line {}: {e}", i + 2)))?);
    }
    if records.len() != header.records {
        return Err(Error::corrupt(
            path,
            format!("header announces {} records, found {}", header.records, records.len()),
        ));
    }
    Ok(records)
}

/// Writes one line-delimited JSON file per store: a [`RawHeader`] line
/// followed by one record per line.
pub fn emit_raw_files(stores: &Stores, directory: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
    let paths: Vec<PathBuf> = [EVENTS_FILE, WEATHER_FILE, ROADS_FILE, TRAFFIC_FILE]
        .iter()
        .map(|f| directory.join(f))
        .collect();
    write_store(&paths[0], "events", &stores.events)?;
    write_store(&paths[1], "weather", &stores.weather)?;
    write_store(&paths[2], "roads", &stores.roads)?;
    write_store(&paths[3], "traffic", &stores.traffic)?;
    Ok(paths)
}

/// Reads the files written by [`emit_raw_files`], validating record
/// invariants of weather and traffic observations.
pub fn ingest_raw_files(directory: &Path) -> Result<Stores> {
    let stores = Stores {
        events: read_store(&directory.join(EVENTS_FILE), "events")?,
        weather: read_store(&directory.join(WEATHER_FILE), "weather")?,
        roads: read_store(&directory.join(ROADS_FILE), "roads")?,
        traffic: read_store(&directory.join(TRAFFIC_FILE), "traffic")?,
    };
    for w in &stores.weather {
        w.validate()?;
    }
    for t in &stores.traffic {
        t.validate()?;
    }
    Ok(stores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Frc;
    use crate::features::FeatureSchema;

    fn small(seed: u64, n_events: usize) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            n_events,
            n_days: 30,
            n_road_segments: 300,
            n_weather_tiles: 12,
            hotspots: vec![HotspotSpec {
                latitude: 48.5,
                longitude: 10.0,
                extra_events: 50,
            }],
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn tile_grid_factors() {
        assert_eq!(tile_grid(48), (6, 8));
        assert_eq!(tile_grid(12), (3, 4));
        assert_eq!(tile_grid(7), (1, 7));
        assert_eq!(tile_grid(1), (1, 1));
        assert_eq!(tile_grid(16), (4, 4));
    }

    #[test]
    fn same_seed_same_stores() {
        let a = generate(&small(3, 2000)).unwrap();
        let b = generate(&small(3, 2000)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(4, 2000)).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn store_sizes_and_hotspots() {
        let cfg = small(5, 3000);
        let s = generate(&cfg).unwrap();
        assert_eq!(s.events.len(), 3050);
        assert_eq!(s.roads.len(), 300);
        assert_eq!(s.weather.len(), 12 * 30 * 24);
        let at_spot = s
            .events
            .iter()
            .filter(|e| e.latitude == 48.5 && e.longitude == 10.0)
            .count();
        assert!(at_spot >= 50);
        let ids: BTreeSet<u64> = s.events.iter().map(|e| e.event_id).collect();
        assert_eq!(ids.len(), s.events.len());
        for w in &s.weather {
            w.validate().unwrap();
        }
        for t in &s.traffic {
            t.validate().unwrap();
        }
    }

    #[test]
    fn ordinary_events_all_match() {
        let cfg = small(6, 3000);
        let s = generate(&cfg).unwrap();
        let m = Matcher::new(&s.weather, &s.roads, &s.traffic, MatchCaps::default()).unwrap();
        let matched = s.events[..cfg.n_events]
            .iter()
            .filter(|e| m.match_event(e).is_ok())
            .count();
        assert_eq!(matched, cfg.n_events);
    }

    #[test]
    fn positive_fraction_is_hit() {
        let cfg = small(7, 20_000);
        let s = generate(&cfg).unwrap();
        let pos = s.events.iter().filter(|e| e.is_emergency_braking).count() as f64;
        let frac = pos / s.events.len() as f64;
        assert!((0.09..=0.11).contains(&frac), "{frac}");
    }

    #[test]
    fn calibration_hits_target() {
        let signal = SignalStrengths::default();
        let risks: Vec<f64> = (0..1000).map(|i| (i % 17) as f64 * 0.5 - 3.0).collect();
        for target in [0.01, 0.1, 0.3] {
            let b = signal.calibrate(&risks, target);
            let mean = risks.iter().map(|&r| signal.probability(r, b)).sum::<f64>() / 1000.0;
            assert!((mean - target).abs() < 1e-9);
        }
    }

    #[test]
    fn risk_terms() {
        let base = FeatureRecord {
            event_id: 1,
            latitude: 48.0,
            longitude: 9.0,
            timestamp: 0,
            segment_code: 1,
            tile_id: 1,
            weather_timestamp: 0,
            traffic_timestamp: 0,
            air_temperature: 21.0,
            pavement_temperature: 25.0,
            air_pressure: 1013.0,
            precipitation: 0.0,
            visibility: 10_000.0,
            speed_current: 100.0,
            speed_monthly_avg: 100.0,
            speed_reference: 100.0,
            frc_level: Frc::new(3).unwrap(),
            time_of_day: 20.0 * 3600.0,
            day_of_week: 0,
            day_of_year: 150,
            daylight: true,
            label: false,
        };
        let s = SignalStrengths::default();
        // only the temperature midpoint and the collector road term remain
        assert!((s.risk(&base) - (0.5 * s.temperature - 0.2 * s.road_class)).abs() < 1e-12);
        let congested = FeatureRecord {
            speed_current: 50.0,
            ..base.clone()
        };
        assert!((s.risk(&congested) - s.risk(&base) - s.congestion).abs() < 1e-12);
        let foggy = FeatureRecord {
            visibility: 500.0,
            ..base
        };
        assert!((s.risk(&foggy) - s.risk(&congested) + s.congestion - s.low_visibility).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let mut c = GeneratorConfig::default();
        c.region.lat_max = c.region.lat_min;
        assert!(matches!(generate(&c), Err(Error::Config(_))));
        let c = GeneratorConfig {
            positive_fraction: 1.0,
            ..GeneratorConfig::default()
        };
        assert!(c.validate().is_err());
        let c = GeneratorConfig {
            n_weather_tiles: 0,
            ..GeneratorConfig::default()
        };
        assert!(c.validate().is_err());
        GeneratorConfig::default().validate().unwrap();
    }

    #[test]
    fn raw_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(&small(8, 1500)).unwrap();
        let paths = emit_raw_files(&s, dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().count(), s.events.len() + 1);
        assert_eq!(ingest_raw_files(dir.path()).unwrap(), s);
    }

    #[test]
    fn empty_store_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let s = Stores::default();
        emit_raw_files(&s, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(ingest_raw_files(dir.path()).unwrap(), s);
    }

    #[test]
    fn damaged_raw_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(&small(9, 500)).unwrap();
        emit_raw_files(&s, dir.path()).unwrap();
        let path = dir.path().join(TRAFFIC_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(3).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        assert!(matches!(ingest_raw_files(dir.path()), Err(Error::Corrupt { .. })));
        std::fs::remove_file(&path).unwrap();
        assert!(matches!(ingest_raw_files(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn schema_encodes_generated_records() {
        let s = generate(&small(10, 500)).unwrap();
        let m = Matcher::new(&s.weather, &s.roads, &s.traffic, MatchCaps::default()).unwrap();
        let schema = FeatureSchema::incident(false);
        for e in &s.events {
            let r = m.match_event(e).unwrap();
            assert_eq!(schema.encode(&r).unwrap().values.len(), 23);
        }
    }
}
