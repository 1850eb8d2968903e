use rayon::prelude::*;

use super::features::edge_features;
use super::grid::GridSpec;
use super::index::LatLonIndex;
use super::multimesh::MultiMesh;
use super::vec3::{self, Vec3};
use super::{GeodesyError, CONTAINMENT_TOLERANCE, GRID2MESH_RADIUS_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDirection {
    GridToMesh,
    MeshToGrid,
}

/// Directed edges between grid and mesh nodes, sorted by receiver and then
/// sender, with one 4-component feature row per edge.
#[derive(Debug, Clone)]
pub struct BipartiteEdges {
    pub direction: EdgeDirection,
    pub senders: Vec<u32>,
    pub receivers: Vec<u32>,
    pub features: Vec<[f32; 4]>,
}

impl BipartiteEdges {
    pub fn len(&self) -> usize {
        self.senders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senders.is_empty()
    }

    /// Incoming edge count of every receiver in `0..n_receivers`.
    pub fn receiver_degrees(&self, n_receivers: usize) -> Vec<usize> {
        let mut d = vec![0; n_receivers];
        for &r in &self.receivers {
            d[r as usize] += 1;
        }
        d
    }

    /// Outgoing edge count of every sender in `0..n_senders`.
    pub fn sender_degrees(&self, n_senders: usize) -> Vec<usize> {
        let mut d = vec![0; n_senders];
        for &s in &self.senders {
            d[s as usize] += 1;
        }
        d
    }
}

fn feature_rows(
    senders: &[u32],
    receivers: &[u32],
    sender_pos: &(dyn Fn(u32) -> Vec3 + Sync),
    receiver_pos: &(dyn Fn(u32) -> Vec3 + Sync),
    scale: f64,
) -> Vec<[f32; 4]> {
    senders
        .par_iter()
        .zip(receivers.par_iter())
        .map(|(&s, &r)| {
            let f = edge_features(&sender_pos(s), &receiver_pos(r), scale);
            [f[0] as f32, f[1] as f32, f[2] as f32, f[3] as f32]
        })
        .collect()
}

/// Connect every grid node to every mesh node within `0.6 x` the longest
/// finest-level mesh edge (chord distance).
pub fn build_grid2mesh(grid: &GridSpec, mesh: &MultiMesh) -> Result<BipartiteEdges, GeodesyError> {
    let radius = GRID2MESH_RADIUS_FRACTION * mesh.max_edge_length;
    let cell_deg = 2.0 * (radius / 2.0).asin().to_degrees();
    let index = LatLonIndex::new(&mesh.positions, cell_deg);
    let per_grid: Vec<Vec<u32>> = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| {
            index.within(&grid.position(i), radius, scratch);
            scratch.clone()
        })
        .collect();
    if let Some(i) = per_grid.iter().position(Vec::is_empty) {
        let (lat, lon) = grid.lat_lon(i);
        return Err(GeodesyError::IsolatedGridNode { index: i, lat, lon });
    }

    // Counting sort by mesh receiver; grid senders stay ascending within a bucket.
    let n_mesh = mesh.positions.len();
    let mut offsets = vec![0usize; n_mesh + 1];
    for list in &per_grid {
        for &m in list {
            offsets[m as usize + 1] += 1;
        }
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let total = offsets[n_mesh];
    let mut senders = vec![0u32; total];
    let mut receivers = vec![0u32; total];
    let mut cursor = offsets;
    for (g, list) in per_grid.iter().enumerate() {
        for &m in list {
            let slot = cursor[m as usize];
            senders[slot] = g as u32;
            receivers[slot] = m;
            cursor[m as usize] += 1;
        }
    }
    let features = feature_rows(
        &senders,
        &receivers,
        &|s| grid.position(s as usize),
        &|r| mesh.positions[r as usize],
        mesh.max_edge_length,
    );
    Ok(BipartiteEdges {
        direction: EdgeDirection::GridToMesh,
        senders,
        receivers,
        features,
    })
}

fn face_contains(mesh: &MultiMesh, face: u32, p: &Vec3) -> bool {
    let [a, b, c] = mesh.faces[face as usize].map(|v| &mesh.positions[v as usize]);
    let centroid = vec3::add(&vec3::add(a, b), c);
    vec3::dot(&centroid, p) > 0.0
        && vec3::triple(p, a, b) >= -CONTAINMENT_TOLERANCE
        && vec3::triple(p, b, c) >= -CONTAINMENT_TOLERANCE
        && vec3::triple(p, c, a) >= -CONTAINMENT_TOLERANCE
}

/// Walk across finest-level faces towards `p`, starting at `start`.
fn walk_to(mesh: &MultiMesh, start: u32, p: &Vec3) -> Option<u32> {
    let mut face = start;
    for _ in 0..mesh.faces.len() {
        let tri = mesh.faces[face as usize];
        let mut worst = (0usize, f64::INFINITY);
        for k in 0..3 {
            let a = &mesh.positions[tri[k] as usize];
            let b = &mesh.positions[tri[(k + 1) % 3] as usize];
            let d = vec3::triple(p, a, b);
            if d < worst.1 {
                worst = (k, d);
            }
        }
        if worst.1 >= -CONTAINMENT_TOLERANCE {
            return face_contains(mesh, face, p).then_some(face);
        }
        face = mesh.face_neighbors[face as usize][worst.0];
    }
    None
}

/// Lowest-indexed finest-level face containing `p`, located by walking from
/// the faces around the nearest mesh node.
pub(crate) fn containing_face(mesh: &MultiMesh, index: &LatLonIndex, p: &Vec3, scratch: &mut Vec<u32>) -> Option<u32> {
    let nearest = index.nearest_within(p, mesh.max_edge_length, scratch)?;
    let start = mesh.faces_of(nearest)[0];
    let found = walk_to(mesh, start, p)?;
    let mut best = found;
    for &v in &mesh.faces[found as usize] {
        for &f in mesh.faces_of(v) {
            if f < best && face_contains(mesh, f, p) {
                best = f;
            }
        }
    }
    Some(best)
}

/// Connect the three corners of each grid node's containing mesh face to it.
pub fn build_mesh2grid(grid: &GridSpec, mesh: &MultiMesh) -> Result<BipartiteEdges, GeodesyError> {
    let cell_deg = 2.0 * (mesh.max_edge_length / 2.0).min(1.0).asin().to_degrees();
    let index = LatLonIndex::new(&mesh.positions, cell_deg);
    let located: Vec<Option<u32>> = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| {
            containing_face(mesh, &index, &grid.position(i), scratch)
        })
        .collect();
    let mut senders = Vec::with_capacity(3 * grid.len());
    let mut receivers = Vec::with_capacity(3 * grid.len());
    for (i, face) in located.iter().enumerate() {
        let face = face.ok_or_else(|| {
            let (lat, lon) = grid.lat_lon(i);
            GeodesyError::ContainmentFailed { index: i, lat, lon }
        })?;
        let mut corners = mesh.faces[face as usize];
        corners.sort_unstable();
        for c in corners {
            senders.push(c);
            receivers.push(i as u32);
        }
    }
    let features = feature_rows(
        &senders,
        &receivers,
        &|s| mesh.positions[s as usize],
        &|r| grid.position(r as usize),
        mesh.max_edge_length,
    );
    Ok(BipartiteEdges {
        direction: EdgeDirection::MeshToGrid,
        senders,
        receivers,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::build_multimesh;

    #[test]
    fn mesh_node_on_grid_point_is_connected() {
        // The first mesh node lies on the prime meridian; a grid point placed
        // exactly there must connect to it.
        let mesh = build_multimesh(1);
        let grid = GridSpec::new(90.0).unwrap();
        let g2m = build_grid2mesh(&grid, &mesh).unwrap();
        let radius = GRID2MESH_RADIUS_FRACTION * mesh.max_edge_length;
        let index = LatLonIndex::new(&mesh.positions, 10.0);
        let mut out = Vec::new();
        index.within(&mesh.positions[0], radius, &mut out);
        assert!(out.contains(&0));
        assert!(g2m.sender_degrees(grid.len()).iter().all(|&d| d >= 1));
    }

    #[test]
    fn mesh2grid_has_three_edges_per_grid_node() {
        let mesh = build_multimesh(2);
        let grid = GridSpec::new(10.0).unwrap();
        let m2g = build_mesh2grid(&grid, &mesh).unwrap();
        assert_eq!(m2g.len(), 3 * grid.len());
        assert!(m2g.receiver_degrees(grid.len()).iter().all(|&d| d == 3));
    }

    #[test]
    fn grid2mesh_ordering_is_receiver_major() {
        let mesh = build_multimesh(1);
        let grid = GridSpec::new(15.0).unwrap();
        let g2m = build_grid2mesh(&grid, &mesh).unwrap();
        let keys: Vec<(u32, u32)> = g2m.receivers.iter().copied().zip(g2m.senders.iter().copied()).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let total: usize = g2m.receiver_degrees(mesh.positions.len()).iter().sum();
        assert_eq!(total, g2m.len());
    }
}
