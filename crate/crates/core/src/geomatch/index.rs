use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters between two (lat, lon) points in degrees.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lat2) = (a.0.to_radians(), b.0.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.1 - a.1).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor<K> {
    pub id: K,
    pub distance_m: f64,
}

/// Immutable nearest-neighbour index over (id, lat, lon) points.
///
/// Points are bucketed into a uniform lat/lon grid. A query scans rings of
/// cells around its own cell and stops once the k-th best distance is below
/// a lower bound on the distance to every unscanned cell, so results equal a
/// brute-force scan. Ties on distance go to the smaller id.
#[derive(Debug, Clone)]
pub struct SpatialIndex<K> {
    points: Vec<(K, f64, f64)>,
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    lat0: f64,
    lon0: f64,
    lon_max: f64,
    cell_lat: f64,
    cell_lon: f64,
    rows: usize,
    cols: usize,
    /// Start offsets into `order`, one per cell plus a sentinel.
    starts: Vec<usize>,
    order: Vec<usize>,
}

const BRUTE_FORCE_BELOW: usize = 256;
const POINTS_PER_CELL: f64 = 4.0;

impl<K: Ord + Clone> SpatialIndex<K> {
    pub fn build(points: impl IntoIterator<Item = (K, f64, f64)>) -> Self {
        let points: Vec<(K, f64, f64)> = points.into_iter().collect();
        let grid = (points.len() >= BRUTE_FORCE_BELOW).then(|| Grid::build(&points));
        SpatialIndex { points, grid }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(K, f64, f64)] {
        &self.points
    }

    /// The `k` nearest points ordered by (distance, id).
    pub fn nearest(&self, lat: f64, lon: f64, k: usize) -> Result<Vec<Neighbor<K>>> {
        if self.points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let mut best = Best::new(k);
        match &self.grid {
            None => {
                for i in 0..self.points.len() {
                    self.offer(&mut best, i, lat, lon);
                }
            }
            Some(grid) => grid.search(lat, lon, &mut best, |b, i| self.offer(b, i, lat, lon)),
        }
        Ok(best
            .items
            .into_iter()
            .map(|(d, i)| Neighbor {
                id: self.points[i].0.clone(),
                distance_m: d,
            })
            .collect())
    }

    /// Nearest single point.
    pub fn nearest_one(&self, lat: f64, lon: f64) -> Result<Neighbor<K>> {
        Ok(self.nearest(lat, lon, 1)?.remove(0))
    }

    fn offer(&self, best: &mut Best, i: usize, lat: f64, lon: f64) {
        let (_, plat, plon) = &self.points[i];
        let d = haversine_m((lat, lon), (*plat, *plon));
        best.offer(d, i, |a, b| self.points[a].0 < self.points[b].0);
    }
}

/// Bounded sorted candidate list.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, d: f64, i: usize, id_less: impl Fn(usize, usize) -> bool) {
        let before = |(bd, bi): &(f64, usize)| d < *bd || (d == *bd && id_less(i, *bi));
        if self.items.len() == self.k && !before(self.items.last().unwrap()) {
            return;
        }
        let pos = self.items.iter().position(before).unwrap_or(self.items.len());
        self.items.insert(pos, (d, i));
        self.items.truncate(self.k);
    }

    fn worst(&self) -> Option<f64> {
        (self.items.len() == self.k).then(|| self.items.last().unwrap().0)
    }
}

impl Grid {
    fn build<K>(points: &[(K, f64, f64)]) -> Self {
        let (mut lat0, mut lat_max, mut lon0, mut lon_max) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (_, lat, lon) in points {
            lat0 = lat0.min(*lat);
            lat_max = lat_max.max(*lat);
            lon0 = lon0.min(*lon);
            lon_max = lon_max.max(*lon);
        }
        let span_lat = (lat_max - lat0).max(1e-9);
        let span_lon = (lon_max - lon0).max(1e-9);
        let n_cells = (points.len() as f64 / POINTS_PER_CELL).max(1.0);
        let side = (span_lat * span_lon / n_cells).sqrt();
        let rows = ((span_lat / side).ceil() as usize).clamp(1, 4096);
        let cols = ((span_lon / side).ceil() as usize).clamp(1, 4096);
        let mut grid = Grid {
            lat0,
            lon0,
            lon_max,
            cell_lat: span_lat / rows as f64,
            cell_lon: span_lon / cols as f64,
            rows,
            cols,
            starts: vec![0; rows * cols + 1],
            order: Vec::with_capacity(points.len()),
        };
        let cells: Vec<usize> = points
            .iter()
            .map(|(_, lat, lon)| {
                let (r, c) = grid.cell_of(*lat, *lon);
                r * cols + c
            })
            .collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for c in 0..rows * cols {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        grid.order = vec![0; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            grid.order[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (usize, usize) {
        let r = ((lat - self.lat0) / self.cell_lat).floor();
        let c = ((lon - self.lon0) / self.cell_lon).floor();
        (
            (r.max(0.0) as usize).min(self.rows - 1),
            (c.max(0.0) as usize).min(self.cols - 1),
        )
    }

    fn search(&self, lat: f64, lon: f64, best: &mut Best, mut visit: impl FnMut(&mut Best, usize)) {
        let (qr, qc) = self.cell_of(lat, lon);
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        for ring in 0..=self.rows.max(self.cols) as isize {
            let (r_lo, r_hi) = (qr as isize - ring, qr as isize + ring);
            let (c_lo, c_hi) = (qc as isize - ring, qc as isize + ring);
            for r in r_lo.max(0)..=r_hi.min(rows - 1) {
                let edge_row = r == r_lo || r == r_hi;
                let row_cells: Vec<isize> = if edge_row {
                    (c_lo.max(0)..=c_hi.min(cols - 1)).collect()
                } else {
                    [c_lo, c_hi].into_iter().filter(|c| (0..cols).contains(c)).collect()
                };
                for c in row_cells {
                    let cell = r as usize * self.cols + c as usize;
                    for &i in &self.order[self.starts[cell]..self.starts[cell + 1]] {
                        visit(best, i);
                    }
                }
            }
            if r_lo <= 0 && r_hi >= rows - 1 && c_lo <= 0 && c_hi >= cols - 1 {
                return;
            }
            if let Some(worst) = best.worst() {
                if worst < self.outside_bound(lat, lon, r_lo, r_hi, c_lo, c_hi) {
                    return;
                }
            }
        }
    }

    /// Lower bound on the distance from the query to any point outside the
    /// scanned block of cells.
    fn outside_bound(&self, lat: f64, lon: f64, r_lo: isize, r_hi: isize, c_lo: isize, c_hi: isize) -> f64 {
        let mut bound = f64::INFINITY;
        let rad = |deg: f64| deg.to_radians() * EARTH_RADIUS_M;
        if r_lo > 0 {
            let edge = self.lat0 + r_lo as f64 * self.cell_lat;
            bound = bound.min(rad((lat - edge).max(0.0)));
        }
        if r_hi < self.rows as isize - 1 {
            let edge = self.lat0 + (r_hi + 1) as f64 * self.cell_lat;
            bound = bound.min(rad((edge - lat).max(0.0)));
        }
        let cos_lat = lat.to_radians().cos();
        let meridian = |dlon_deg: f64| {
            let d = dlon_deg.clamp(0.0, 90.0).to_radians();
            EARTH_RADIUS_M * (cos_lat * d.sin()).clamp(0.0, 1.0).asin()
        };
        if c_lo > 0 {
            let edge = self.lon0 + c_lo as f64 * self.cell_lon;
            let dlon = (lon - edge).min(360.0 - (lon - self.lon0).abs());
            bound = bound.min(meridian(dlon));
        }
        if c_hi < self.cols as isize - 1 {
            let edge = self.lon0 + (c_hi + 1) as f64 * self.cell_lon;
            let dlon = (edge - lon).min(360.0 - (self.lon_max - lon).abs());
            bound = bound.min(meridian(dlon));
        }
        bound * (1.0 - 1e-9) - 1e-6
    }
}
