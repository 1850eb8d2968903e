use super::vec3::{self, Vec3};

/// Bucket index of unit vectors on a latitude-longitude cell lattice, used
/// for fixed-radius chord queries.
#[derive(Debug, Clone)]
pub struct LatLonIndex {
    n_bands: usize,
    n_cols: usize,
    band_height: f64,
    col_width: f64,
    offsets: Vec<u32>,
    members: Vec<u32>,
    points: Vec<Vec3>,
}

const MARGIN_DEG: f64 = 1e-6;

impl LatLonIndex {
    /// Build the index with cells roughly `cell_deg` degrees on a side.
    pub fn new(points: &[Vec3], cell_deg: f64) -> Self {
        let cell_deg = cell_deg.clamp(1e-3, 180.0);
        let n_bands = ((180.0 / cell_deg).floor() as usize).max(1);
        let n_cols = ((360.0 / cell_deg).floor() as usize).max(1);
        let band_height = 180.0 / n_bands as f64;
        let col_width = 360.0 / n_cols as f64;
        let mut index = Self {
            n_bands,
            n_cols,
            band_height,
            col_width,
            offsets: Vec::new(),
            members: Vec::new(),
            points: points.to_vec(),
        };
        let cells: Vec<usize> = points
            .iter()
            .map(|p| {
                let (lat, lon) = vec3::to_lat_lon_deg(p);
                index.band(lat) * n_cols + index.col(lon)
            })
            .collect();
        let mut counts = vec![0u32; n_bands * n_cols + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut cursor = counts.clone();
        let mut members = vec![0u32; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            members[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        index.offsets = counts;
        index.members = members;
        index
    }

    fn band(&self, lat: f64) -> usize {
        (((lat + 90.0) / self.band_height).floor().max(0.0) as usize).min(self.n_bands - 1)
    }

    fn col(&self, lon: f64) -> usize {
        let c = ((lon + 180.0) / self.col_width).floor() as i64;
        c.rem_euclid(self.n_cols as i64) as usize
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.points[i]
    }

    /// Indices (ascending) of all points within chord distance `radius` of `p`.
    pub fn within(&self, p: &Vec3, radius: f64, out: &mut Vec<u32>) {
        out.clear();
        let theta = 2.0 * (radius / 2.0).min(1.0).asin().to_degrees() + MARGIN_DEG;
        let (lat, lon) = vec3::to_lat_lon_deg(p);
        let b_lo = self.band(lat - theta);
        let b_hi = self.band(lat + theta);
        let all_cols = lat.abs() + theta >= 90.0 - MARGIN_DEG;
        let (c_lo, c_hi) = if all_cols {
            (0i64, self.n_cols as i64 - 1)
        } else {
            let s = theta.to_radians().sin() / lat.to_radians().cos();
            let dlon = s.min(1.0).asin().to_degrees() + MARGIN_DEG;
            let lo = ((lon - dlon + 180.0) / self.col_width).floor() as i64;
            let hi = ((lon + dlon + 180.0) / self.col_width).floor() as i64;
            if hi - lo + 1 >= self.n_cols as i64 {
                (0, self.n_cols as i64 - 1)
            } else {
                (lo, hi)
            }
        };
        for b in b_lo..=b_hi {
            for c in c_lo..=c_hi {
                let cell = b * self.n_cols + c.rem_euclid(self.n_cols as i64) as usize;
                let range = self.offsets[cell] as usize..self.offsets[cell + 1] as usize;
                for &m in &self.members[range] {
                    if vec3::distance(&self.points[m as usize], p) <= radius {
                        out.push(m);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Nearest point within `radius`, ties broken by lowest index.
    pub fn nearest_within(&self, p: &Vec3, radius: f64, scratch: &mut Vec<u32>) -> Option<u32> {
        self.within(p, radius, scratch);
        let mut best: Option<(f64, u32)> = None;
        for &m in scratch.iter() {
            let d = vec3::distance(&self.points[m as usize], p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, m));
            }
        }
        best.map(|(_, m)| m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::vec3::from_lat_lon_deg;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| from_lat_lon_deg(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0)))
            .collect();
        let index = LatLonIndex::new(&pts, 7.0);
        let mut out = Vec::new();
        for q in 0..300 {
            let p = if q < 4 {
                from_lat_lon_deg([90.0, -90.0, 89.0, 0.0][q], 180.0)
            } else {
                from_lat_lon_deg(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0))
            };
            let r = rng.gen_range(0.01..0.4);
            index.within(&p, r, &mut out);
            let expect: Vec<u32> = (0..pts.len() as u32)
                .filter(|&i| vec3::distance(&pts[i as usize], &p) <= r)
                .collect();
            assert_eq!(out, expect);
        }
    }
}
