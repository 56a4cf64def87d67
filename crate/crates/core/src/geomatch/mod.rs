//! Spatial matching of events to road segments and weather tiles.

mod assemble;
mod hotspot;
mod index;
mod split;

pub use assemble::{
    assemble, extract_unique_tiles, DropCounts, DropReason, MatchCaps, Matcher, UniqueTile,
};
pub use hotspot::{detect_hotspots, heatmap, CellKey, HeatmapCell, HotspotCell};
pub use index::{haversine_m, Neighbor, SpatialIndex, EARTH_RADIUS_M};
pub use split::{split, Splits, TrainSplit};
