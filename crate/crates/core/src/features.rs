//! Temporal derivations, the fixed 23-slot model input and z-score scaling.

use std::f64::consts::TAU;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{FeatureRecord, Timestamp};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const N_FEATURES: usize = 23;

/// Slot of the first FRC one-hot position (0-based).
pub const FRC_SLOT: usize = 9;
/// Slot of the first day-of-week one-hot position (0-based).
pub const DOW_SLOT: usize = 15;
pub const DAYLIGHT_SLOT: usize = 22;
/// Slot holding the speed ratio, or the day-of-year cosine when enabled.
pub const RATIO_SLOT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFeatures {
    pub time_of_day: f64,
    pub tod_sin: f64,
    pub tod_cos: f64,
    pub day_of_week: u8,
    pub day_of_year: u16,
    pub doy_cos: f64,
    pub daylight: bool,
}

/// Local solar time is UTC shifted by longitude/15 hours.
pub fn temporal_encode(timestamp: Timestamp, longitude: f64, latitude: f64) -> TemporalFeatures {
    let local = timestamp as f64 + longitude / 15.0 * 3600.0;
    let day = (local / SECONDS_PER_DAY).floor();
    let time_of_day = local - day * SECONDS_PER_DAY;
    let phase = TAU * time_of_day / SECONDS_PER_DAY;
    let day = day as i64;
    // 1970-01-01 was a Thursday.
    let day_of_week = (day + 3).rem_euclid(7) as u8;
    let day_of_year = NaiveDate::from_num_days_from_ce_opt((day + 719_163) as i32)
        .map(|d| d.ordinal() as u16)
        .unwrap_or(1);
    TemporalFeatures {
        time_of_day,
        tod_sin: phase.sin(),
        tod_cos: phase.cos(),
        day_of_week,
        day_of_year,
        doy_cos: (TAU * day_of_year as f64 / 365.25).cos(),
        daylight: solar_elevation_deg(day_of_year, time_of_day, latitude) > 0.0,
    }
}

/// Sun elevation above the horizon from the cosine declination approximation.
pub fn solar_elevation_deg(day_of_year: u16, local_seconds: f64, latitude: f64) -> f64 {
    let declination =
        (-23.44f64).to_radians() * (TAU / 365.0 * (day_of_year as f64 + 10.0)).cos();
    let hour_angle = (15.0 * (local_seconds / 3600.0 - 12.0)).to_radians();
    let lat = latitude.to_radians();
    let sin_elev =
        lat.sin() * declination.sin() + lat.cos() * declination.cos() * hour_angle.cos();
    sin_elev.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Short hash of the ordered slot names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaId(pub u64);

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Ordered slot layout of a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    continuous: Vec<bool>,
}

impl FeatureSchema {
    /// The default 23-slot layout. With `include_day_of_year` the day-of-year
    /// cosine takes the speed-ratio slot.
    pub fn incident(include_day_of_year: bool) -> Self {
        let mut names: Vec<String> = [
            "air_temperature",
            "pavement_temperature",
            "air_pressure",
            "precipitation",
            "visibility",
            "speed_current",
            "speed_monthly_avg",
            "speed_reference",
            if include_day_of_year { "doy_cos" } else { "speed_ratio" },
            "frc_1",
            "frc_2",
            "frc_3",
            "frc_4",
            "tod_sin",
            "tod_cos",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for d in ["mon", "tue", "wed", "thu", "fri", "sat", "sun"] {
            names.push(format!("dow_{d}"));
        }
        names.push("daylight".into());
        let continuous = (0..N_FEATURES)
            .map(|i| i < FRC_SLOT || i == 13 || i == 14)
            .collect();
        FeatureSchema { names, continuous }
    }

    /// Generic continuous layout `x0..x{n-1}`, for models trained outside the
    /// incident pipeline.
    pub fn anonymous(n: usize) -> Self {
        FeatureSchema {
            names: (0..n).map(|i| format!("x{i}")).collect(),
            continuous: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_continuous(&self, slot: usize) -> bool {
        self.continuous[slot]
    }

    pub fn id(&self) -> SchemaId {
        let mut h = Sha256::new();
        for (name, cont) in self.names.iter().zip(&self.continuous) {
            h.update(name.as_bytes());
            h.update([if *cont { 1u8 } else { 0u8 }, b';']);
        }
        let digest = h.finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        SchemaId(u64::from_be_bytes(first))
    }

    pub fn uses_day_of_year(&self) -> bool {
        self.names.get(RATIO_SLOT).is_some_and(|n| n == "doy_cos")
    }

    /// Raw (unscaled) encoding of a matched record.
    pub fn encode(&self, record: &FeatureRecord) -> Result<FeatureVector> {
        let fields = record.continuous_fields();
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "event {}: non-finite {name}",
                record.event_id
            )));
        }
        if record.speed_reference == 0.0 {
            return Err(Error::InvalidInput(format!(
                "event {}: reference speed is zero",
                record.event_id
            )));
        }
        if record.day_of_week > 6 {
            return Err(Error::InvalidInput(format!(
                "event {}: day of week {}",
                record.event_id, record.day_of_week
            )));
        }
        let phase = TAU * record.time_of_day / SECONDS_PER_DAY;
        let mut v = vec![0.0; N_FEATURES];
        v[0] = record.air_temperature;
        v[1] = record.pavement_temperature;
        v[2] = record.air_pressure;
        v[3] = record.precipitation;
        v[4] = record.visibility;
        v[5] = record.speed_current;
        v[6] = record.speed_monthly_avg;
        v[7] = record.speed_reference;
        v[RATIO_SLOT] = if self.uses_day_of_year() {
            (TAU * record.day_of_year as f64 / 365.25).cos()
        } else {
            record.speed_current / record.speed_reference
        };
        v[FRC_SLOT + record.frc_level.level() as usize - 1] = 1.0;
        v[13] = phase.sin();
        v[14] = phase.cos();
        v[DOW_SLOT + record.day_of_week as usize] = 1.0;
        v[DAYLIGHT_SLOT] = if record.daylight { 1.0 } else { 0.0 };
        Ok(FeatureVector {
            schema: self.id(),
            values: v,
        })
    }
}

/// Model input tagged with the schema that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema: SchemaId,
    pub values: Vec<f64>,
}

/// Per-slot z-score parameters; slots that are not continuous pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of the continuous slots.
    pub fn fit(data: &Dataset, schema: &FeatureSchema) -> Self {
        let d = data.n_features();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in (0..d).filter(|&j| schema.is_continuous(j)) {
            let m = data.rows().map(|r| r[j]).sum::<f64>() / n;
            let var = data.rows().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for (j, (x, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = (x - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut values = vec![0.0; data.values.len()];
        let d = data.n_features();
        for (row, out) in data.rows().zip(values.chunks_exact_mut(d.max(1))) {
            self.apply(row, out);
        }
        Dataset {
            schema: data.schema,
            n_features: d,
            values,
            labels: data.labels.clone(),
        }
    }
}

/// Row-major labelled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: SchemaId,
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(schema: SchemaId, n_features: usize, values: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if n_features == 0 || values.len() != n_features * labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} values do not form {} rows of {} features",
                values.len(),
                labels.len(),
                n_features
            )));
        }
        Ok(Dataset {
            schema,
            n_features,
            values,
            labels,
        })
    }

    pub fn from_rows(schema: SchemaId, rows: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows or label count mismatch".into()));
        }
        Dataset::new(schema, d, rows.concat(), labels.to_vec())
    }

    pub fn from_records(schema: &FeatureSchema, records: &[FeatureRecord]) -> Result<Self> {
        let mut values = Vec::with_capacity(records.len() * schema.len());
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            values.extend(schema.encode(r)?.values);
            labels.push(r.label);
        }
        Dataset::new(schema.id(), schema.len(), values, labels)
    }

    pub fn schema(&self) -> SchemaId {
        self.schema
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            schema: self.schema,
            values: self.row(i).to_vec(),
        }
    }

    /// Rows at `indices`, in that order; repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema,
            n_features: self.n_features,
            values,
            labels,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Frc;
    use proptest::prelude::*;

    pub(crate) fn record(frc: u8, dow: u8) -> FeatureRecord {
        FeatureRecord {
            event_id: 1,
            latitude: 48.7,
            longitude: 9.1,
            timestamp: 1_529_582_400,
            segment_code: 3,
            tile_id: 2,
            weather_timestamp: 1_529_580_000,
            traffic_timestamp: 1_529_581_000,
            air_temperature: 24.0,
            pavement_temperature: 31.0,
            air_pressure: 1018.0,
            precipitation: 0.0,
            visibility: 20_000.0,
            speed_current: 80.0,
            speed_monthly_avg: 90.0,
            speed_reference: 100.0,
            frc_level: Frc::new(frc).unwrap(),
            time_of_day: 43_200.0,
            day_of_week: dow,
            day_of_year: 172,
            daylight: true,
            label: true,
        }
    }

    /// Declination from Spencer's Fourier series; independent of the
    /// implementation's cosine approximation.
    fn spencer_elevation(day_of_year: u16, local_hours: f64, lat_deg: f64) -> f64 {
        let g = TAU / 365.0 * (day_of_year as f64 - 1.0);
        let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin()
            - 0.006758 * (2.0 * g).cos()
            + 0.000907 * (2.0 * g).sin()
            - 0.002697 * (3.0 * g).cos()
            + 0.00148 * (3.0 * g).sin();
        let h = ((local_hours - 12.0) * 15.0).to_radians();
        let lat = lat_deg.to_radians();
        (lat.sin() * decl.sin() + lat.cos() * decl.cos() * h.cos())
            .asin()
            .to_degrees()
    }

    fn local_time(date: (i32, u32, u32), hour: u32, lon: f64) -> Timestamp {
        let utc = NaiveDate::from_ymd_opt(date.0, date.1, date.2)
            .unwrap()
            .and_hms_opt(hour, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        utc - (lon / 15.0 * 3600.0).round() as i64
    }

    #[test]
    fn midnight_and_noon_phases() {
        let t = temporal_encode(0, 0.0, 0.0);
        assert_eq!(t.tod_sin, 0.0);
        assert_eq!(t.tod_cos, 1.0);
        let t = temporal_encode(43_200, 0.0, 0.0);
        assert!(t.tod_sin.abs() < 1e-12);
        assert_eq!(t.tod_cos, -1.0);
        // 1970-01-01 was a Thursday
        assert_eq!(t.day_of_week, 3);
        assert_eq!(t.day_of_year, 1);
    }

    #[test]
    fn longitude_shifts_local_time() {
        // 15°E is one hour ahead of UTC
        let t = temporal_encode(23 * 3600, 15.0, 0.0);
        assert_eq!(t.time_of_day, 0.0);
        assert_eq!(t.day_of_week, 4);
        let t = temporal_encode(0, -15.0, 0.0);
        assert_eq!(t.time_of_day, 23.0 * 3600.0);
        assert_eq!(t.day_of_week, 2);
    }

    #[test]
    fn summer_noon_in_stuttgart_is_daylight() {
        let ts = local_time((2018, 6, 21), 12, 9.1);
        let t = temporal_encode(ts, 9.1, 48.7);
        assert_eq!(t.day_of_year, 172);
        let oracle = spencer_elevation(t.day_of_year, t.time_of_day / 3600.0, 48.7);
        assert!(oracle > 60.0, "oracle elevation {oracle}");
        assert!(t.daylight);
        let ours = solar_elevation_deg(t.day_of_year, t.time_of_day, 48.7);
        assert!((ours - oracle).abs() < 1.0, "{ours} vs {oracle}");
    }

    #[test]
    fn winter_midnight_is_dark() {
        let ts = local_time((2018, 12, 21), 0, 9.1);
        let t = temporal_encode(ts, 9.1, 48.7);
        assert!(spencer_elevation(t.day_of_year, t.time_of_day / 3600.0, 48.7) < 0.0);
        assert!(!t.daylight);
    }

    #[test]
    fn daylight_agrees_with_spencer_away_from_the_horizon() {
        for day in (1..=365).step_by(7) {
            for hour in 0..24 {
                let secs = hour as f64 * 3600.0 + 1800.0;
                let oracle = spencer_elevation(day, secs / 3600.0, 48.7);
                if oracle.abs() > 2.0 {
                    assert_eq!(solar_elevation_deg(day, secs, 48.7) > 0.0, oracle > 0.0);
                }
            }
        }
    }

    #[test]
    fn frc_one_hot_slots() {
        let schema = FeatureSchema::incident(false);
        let v = schema.encode(&record(1, 0)).unwrap().values;
        assert_eq!(&v[FRC_SLOT..FRC_SLOT + 4], &[1.0, 0.0, 0.0, 0.0]);
        let v = schema.encode(&record(4, 6)).unwrap().values;
        assert_eq!(&v[FRC_SLOT..FRC_SLOT + 4], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v[DOW_SLOT + 6], 1.0);
    }

    #[test]
    fn speed_ratio_identity_and_width() {
        let schema = FeatureSchema::incident(false);
        let mut r = record(2, 1);
        r.speed_current = r.speed_reference;
        let v = schema.encode(&r).unwrap().values;
        assert_eq!(v.len(), 23);
        assert_eq!(v[RATIO_SLOT], 1.0);
        assert_eq!(schema.names()[RATIO_SLOT], "speed_ratio");
    }

    #[test]
    fn day_of_year_variant_replaces_ratio() {
        let schema = FeatureSchema::incident(true);
        assert_ne!(schema.id(), FeatureSchema::incident(false).id());
        let v = schema.encode(&record(2, 1)).unwrap().values;
        assert_eq!(v.len(), 23);
        assert!((v[RATIO_SLOT] - (TAU * 172.0 / 365.25).cos()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_records() {
        let schema = FeatureSchema::incident(false);
        let mut r = record(2, 1);
        r.speed_reference = 0.0;
        assert!(schema.encode(&r).is_err());
        let mut r = record(2, 1);
        r.air_pressure = f64::NAN;
        assert!(schema.encode(&r).is_err());
        let mut r = record(2, 1);
        r.visibility = f64::INFINITY;
        assert!(schema.encode(&r).is_err());
    }

    #[test]
    fn standardized_training_split_has_unit_moments() {
        let schema = FeatureSchema::incident(false);
        let records: Vec<FeatureRecord> = (0..500)
            .map(|i| {
                let mut r = record((i % 4 + 1) as u8, (i % 7) as u8);
                r.event_id = i;
                r.air_temperature = 10.0 + (i as f64 * 0.37).sin() * 8.0;
                r.speed_current = 40.0 + (i % 13) as f64 * 3.0;
                r.time_of_day = (i as f64 * 977.0) % SECONDS_PER_DAY;
                r.precipitation = (i % 5) as f64 * 0.3;
                r
            })
            .collect();
        let data = Dataset::from_records(&schema, &records).unwrap();
        let st = Standardizer::fit(&data, &schema);
        let z = st.transform(&data);
        for j in 0..N_FEATURES {
            let col = z.column(j);
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            if schema.is_continuous(j) {
                assert!(m.abs() < 1e-9, "slot {j} mean {m}");
                // constant slots (pavement, pressure, ...) keep zero variance
                if st.scale[j] != 1.0 || var != 0.0 {
                    assert!((var - 1.0).abs() < 1e-6, "slot {j} var {var}");
                }
            } else {
                assert_eq!(col, data.column(j), "slot {j} must pass through");
            }
        }
    }

    proptest! {
        #[test]
        fn tod_is_on_the_unit_circle(ts in -4_000_000_000i64..4_000_000_000, lon in -180.0f64..180.0, lat in -90.0f64..90.0) {
            let t = temporal_encode(ts, lon, lat);
            prop_assert!((t.tod_sin.powi(2) + t.tod_cos.powi(2) - 1.0).abs() < 1e-12);
            prop_assert!(t.day_of_week < 7);
            prop_assert!((0.0..SECONDS_PER_DAY).contains(&t.time_of_day));
        }

        #[test]
        fn exactly_one_hot_per_group(frc in 1u8..=4, dow in 0u8..7, daylight: bool) {
            let mut r = record(frc, dow);
            r.daylight = daylight;
            let v = FeatureSchema::incident(false).encode(&r).unwrap().values;
            prop_assert_eq!(v[FRC_SLOT..FRC_SLOT + 4].iter().sum::<f64>(), 1.0);
            prop_assert_eq!(v[DOW_SLOT..DOW_SLOT + 7].iter().sum::<f64>(), 1.0);
            prop_assert_eq!(v[FRC_SLOT + frc as usize - 1], 1.0);
            prop_assert_eq!(v[DOW_SLOT + dow as usize], 1.0);
            prop_assert!(v[DAYLIGHT_SLOT] == 0.0 || v[DAYLIGHT_SLOT] == 1.0);
        }
    }
}
