use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Car2XEvent;
use crate::error::{Error, Result};

/// Grid cell anchored at (0°, 0°): row = ⌊lat/size⌋, col = ⌊lon/size⌋.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub row: i64,
    pub col: i64,
}

impl CellKey {
    pub fn of(latitude: f64, longitude: f64, cell_size_deg: f64) -> Self {
        CellKey {
            row: (latitude / cell_size_deg).floor() as i64,
            col: (longitude / cell_size_deg).floor() as i64,
        }
    }

    pub fn center(self, cell_size_deg: f64) -> (f64, f64) {
        (
            (self.row as f64 + 0.5) * cell_size_deg,
            (self.col as f64 + 0.5) * cell_size_deg,
        )
    }
}

/// A cell with implausibly many events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotCell {
    pub cell: CellKey,
    pub cell_size_deg: f64,
    pub count: usize,
    /// The count that had to be exceeded.
    pub threshold: f64,
    pub reason: String,
}

impl HotspotCell {
    pub fn contains(&self, latitude: f64, longitude: f64) -> bool {
        CellKey::of(latitude, longitude, self.cell_size_deg) == self.cell
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub cell_lat: f64,
    pub cell_lon: f64,
    pub count: usize,
}

fn bin(events: &[Car2XEvent], cell_size_deg: f64) -> Result<BTreeMap<CellKey, usize>> {
    if !(cell_size_deg > 0.0) || !cell_size_deg.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cell size must be positive, got {cell_size_deg}"
        )));
    }
    let mut counts = BTreeMap::new();
    for e in events {
        *counts
            .entry(CellKey::of(e.latitude, e.longitude, cell_size_deg))
            .or_insert(0) += 1;
    }
    Ok(counts)
}

/// Event counts per non-empty cell, ordered by cell.
pub fn heatmap(events: &[Car2XEvent], cell_size_deg: f64) -> Result<Vec<HeatmapCell>> {
    Ok(bin(events, cell_size_deg)?
        .into_iter()
        .map(|(cell, count)| {
            let (cell_lat, cell_lon) = cell.center(cell_size_deg);
            HeatmapCell {
                cell_lat,
                cell_lon,
                count,
            }
        })
        .collect())
}

/// Flags cells whose count exceeds mean + z·σ over the non-empty cells
/// (population σ).
pub fn detect_hotspots(
    events: &[Car2XEvent],
    cell_size_deg: f64,
    z_threshold: f64,
) -> Result<Vec<HotspotCell>> {
    let counts = bin(events, cell_size_deg)?;
    if counts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "hotspot statistics need at least 2 non-empty cells, found {}",
            counts.len()
        )));
    }
    let n = counts.len() as f64;
    let mean = counts.values().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .values()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let threshold = mean + z_threshold * var.sqrt();
    Ok(counts
        .into_iter()
        .filter(|&(_, c)| c as f64 > threshold)
        .map(|(cell, count)| HotspotCell {
            cell,
            cell_size_deg,
            count,
            threshold,
            reason: format!(
                "count {count} exceeds mean {mean:.2} + {z_threshold}·sd {:.2}",
                var.sqrt()
            ),
        })
        .collect())
}
