use std::collections::HashMap;

use super::icosahedron::mesh_hierarchy;
use super::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshEdge {
    pub sender: u32,
    pub receiver: u32,
    /// Refinement level the edge comes from.
    pub level: u8,
}

/// Nodes of the finest mesh `M^R` together with the directed edges of every
/// level `M^0 ..= M^R`.
#[derive(Debug, Clone)]
pub struct MultiMesh {
    pub finest_level: usize,
    pub positions: Vec<Vec3>,
    /// Concatenation of each level's directed edges, coarsest level first.
    pub edges: Vec<MeshEdge>,
    /// Per node `(cos lat, sin lon, cos lon)`.
    pub node_features: Vec<[f32; 3]>,
    /// Faces of the finest mesh.
    pub faces: Vec<[u32; 3]>,
    /// `face_neighbors[f][k]` shares the edge `faces[f][k] -> faces[f][(k + 1) % 3]`.
    pub face_neighbors: Vec<[u32; 3]>,
    vertex_face_offsets: Vec<u32>,
    vertex_faces: Vec<u32>,
    /// Longest finest-level edge chord.
    pub max_edge_length: f64,
    /// Node and face counts of each level, coarsest first.
    pub level_sizes: Vec<(usize, usize)>,
}

pub fn build_multimesh(refinement: usize) -> MultiMesh {
    let meshes = mesh_hierarchy(refinement);
    let finest = meshes.last().unwrap();
    let edges = meshes
        .iter()
        .flat_map(|m| {
            let level = m.level as u8;
            m.directed_edges()
                .into_iter()
                .map(move |(sender, receiver)| MeshEdge {
                    sender,
                    receiver,
                    level,
                })
        })
        .collect();
    let node_features = finest
        .positions
        .iter()
        .map(|p| {
            let (lat, lon) = vec3::to_lat_lon_deg(p);
            let (so, co) = lon.to_radians().sin_cos();
            [lat.to_radians().cos() as f32, so as f32, co as f32]
        })
        .collect();

    let faces = finest.faces.clone();
    let mut by_edge: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3);
    for (f, tri) in faces.iter().enumerate() {
        for k in 0..3 {
            by_edge.insert((tri[k], tri[(k + 1) % 3]), f as u32);
        }
    }
    let face_neighbors = faces
        .iter()
        .map(|tri| {
            let mut n = [0u32; 3];
            for k in 0..3 {
                n[k] = by_edge[&(tri[(k + 1) % 3], tri[k])];
            }
            n
        })
        .collect();

    let n_nodes = finest.positions.len();
    let mut offsets = vec![0u32; n_nodes + 1];
    for tri in &faces {
        for &v in tri {
            offsets[v as usize + 1] += 1;
        }
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let mut cursor = offsets.clone();
    let mut vertex_faces = vec![0u32; faces.len() * 3];
    for (f, tri) in faces.iter().enumerate() {
        for &v in tri {
            vertex_faces[cursor[v as usize] as usize] = f as u32;
            cursor[v as usize] += 1;
        }
    }

    MultiMesh {
        finest_level: refinement,
        positions: finest.positions.clone(),
        edges,
        node_features,
        max_edge_length: finest.max_edge_length(),
        faces,
        face_neighbors,
        vertex_face_offsets: offsets,
        vertex_faces,
        level_sizes: meshes
            .iter()
            .map(|m| (m.positions.len(), m.faces.len()))
            .collect(),
    }
}

impl MultiMesh {
    /// Faces of the finest mesh incident to `node`, ascending.
    pub fn faces_of(&self, node: u32) -> &[u32] {
        let lo = self.vertex_face_offsets[node as usize] as usize;
        let hi = self.vertex_face_offsets[node as usize + 1] as usize;
        &self.vertex_faces[lo..hi]
    }

    /// Number of directed edges contributed by each level.
    pub fn edges_per_level(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.finest_level + 1];
        for e in &self.edges {
            counts[e.level as usize] += 1;
        }
        counts
    }

    /// Undirected-adjacency lists (receivers per sender) over all levels.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.positions.len()];
        for e in &self.edges {
            adj[e.sender as usize].push(e.receiver);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Graph diameter (longest shortest path, in hops) of the directed edge set.
    ///
    /// Runs a breadth-first search from every node, 64 sources at a time
    /// using bit-parallel frontiers.
    pub fn hop_diameter(&self) -> usize {
        let n = self.positions.len();
        let adj = self.adjacency();
        // incoming lists: frontier of a node grows from its senders
        let mut incoming = vec![Vec::new(); n];
        for (s, list) in adj.iter().enumerate() {
            for &r in list {
                incoming[r as usize].push(s as u32);
            }
        }
        let mut diameter = 0;
        let mut seen = vec![0u64; n];
        let mut frontier = vec![0u64; n];
        let mut next = vec![0u64; n];
        for base in (0..n).step_by(64) {
            let width = (n - base).min(64);
            let full = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            seen.iter_mut().for_each(|s| *s = 0);
            frontier.iter_mut().for_each(|s| *s = 0);
            for k in 0..width {
                seen[base + k] |= 1 << k;
                frontier[base + k] |= 1 << k;
            }
            let mut depth = 0;
            loop {
                let mut grew = false;
                for v in 0..n {
                    let mut acc = 0u64;
                    for &u in &incoming[v] {
                        acc |= frontier[u as usize];
                    }
                    let fresh = acc & !seen[v];
                    next[v] = fresh;
                    if fresh != 0 {
                        seen[v] |= fresh;
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
                depth += 1;
                std::mem::swap(&mut frontier, &mut next);
            }
            if seen.iter().any(|&s| s & full != full) {
                return usize::MAX;
            }
            diameter = diameter.max(depth);
        }
        diameter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::MESH_TABLE;
    use std::collections::VecDeque;

    #[test]
    fn level_zero_multimesh_is_the_icosahedron() {
        let m = build_multimesh(0);
        assert_eq!(m.edges.len(), 60);
        assert_eq!(m.positions.len(), 12);
    }

    #[test]
    fn level_three_edge_sum() {
        let m = build_multimesh(3);
        assert_eq!(m.edges_per_level(), vec![60, 240, 960, 3_840]);
        assert_eq!(m.edges.len(), 5_100);
        assert_eq!(m.edges.len(), MESH_TABLE[3].3);
        let unique: std::collections::HashSet<(u32, u32)> =
            m.edges.iter().map(|e| (e.sender, e.receiver)).collect();
        assert_eq!(unique.len(), 5_100);
    }

    #[test]
    fn node_features_are_unit_circle_pairs() {
        let m = build_multimesh(2);
        for f in &m.node_features {
            assert!(f[0] >= 0.0);
            assert!(((f[1] * f[1] + f[2] * f[2]) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn face_neighbors_are_mutual() {
        let m = build_multimesh(2);
        for (f, nb) in m.face_neighbors.iter().enumerate() {
            for &g in nb {
                assert!(m.face_neighbors[g as usize].contains(&(f as u32)));
            }
        }
        for v in 0..m.positions.len() as u32 {
            let faces = m.faces_of(v);
            assert!(faces.len() == 5 || faces.len() == 6);
            assert!(faces.iter().all(|&f| m.faces[f as usize].contains(&v)));
        }
    }

    #[test]
    fn bit_parallel_diameter_matches_plain_bfs() {
        for r in 0..=3 {
            let m = build_multimesh(r);
            let adj = m.adjacency();
            let mut diameter = 0;
            for s in 0..adj.len() {
                let mut dist = vec![usize::MAX; adj.len()];
                dist[s] = 0;
                let mut q = VecDeque::from([s]);
                while let Some(u) = q.pop_front() {
                    for &v in &adj[u] {
                        if dist[v as usize] == usize::MAX {
                            dist[v as usize] = dist[u] + 1;
                            q.push_back(v as usize);
                        }
                    }
                }
                diameter = diameter.max(*dist.iter().max().unwrap());
            }
            assert_eq!(m.hop_diameter(), diameter, "level {r}");
        }
    }
}
