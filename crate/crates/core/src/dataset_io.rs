//! Canonical dataset file: comma-separated, one header row, one
//! [`FeatureRecord`] per row in field order, label column last.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::domain::FeatureRecord;
use crate::error::{Error, Result};

pub fn write_records<W: Write>(writer: W, records: &[FeatureRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(HEADER)?;
    }
    w.flush()?;
    Ok(())
}

const HEADER: [&str; 22] = [
    "event_id",
    "latitude",
    "longitude",
    "timestamp",
    "segment_code",
    "tile_id",
    "weather_timestamp",
    "traffic_timestamp",
    "air_temperature",
    "pavement_temperature",
    "air_pressure",
    "precipitation",
    "visibility",
    "speed_current",
    "speed_monthly_avg",
    "speed_reference",
    "frc_level",
    "time_of_day",
    "day_of_week",
    "day_of_year",
    "daylight",
    "label",
];

pub fn read_records<R: Read>(reader: R) -> csv::Result<Vec<FeatureRecord>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

pub fn save_dataset(path: &Path, records: &[FeatureRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(BufWriter::new(file), records).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::corrupt(path, format!("{other:?}")),
    })
}

pub fn load_dataset(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = reader.headers().map_err(|e| Error::corrupt(path, e))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::corrupt(path, "unexpected header row"));
    }
    reader
        .deserialize()
        .collect::<csv::Result<Vec<FeatureRecord>>>()
        .map_err(|e| Error::corrupt(path, e))
}
