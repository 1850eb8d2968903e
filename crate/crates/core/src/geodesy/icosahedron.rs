use std::collections::HashMap;

use super::vec3::{self, Vec3};

/// A triangulated unit sphere at one refinement level.
///
/// Faces are counterclockwise when viewed from outside the sphere. Nodes of
/// level `r - 1` keep their indices at level `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IcosahedralMesh {
    pub level: usize,
    pub positions: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl IcosahedralMesh {
    /// Directed edges `(sender, receiver)`, two per undirected edge, sorted by
    /// receiver and then sender.
    pub fn directed_edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .collect();
        edges.sort_unstable_by_key(|&(s, r)| (r, s));
        edges
    }

    /// Longest chord length over all edges.
    pub fn max_edge_length(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(s, r)| vec3::distance(&self.positions[s as usize], &self.positions[r as usize]))
            .fold(0.0, f64::max)
    }
}

/// The level-0 icosahedron with one face normal to the polar axis.
///
/// Vertices start from the golden-ratio construction. The mesh is then rotated
/// so that the face with the highest centroid sits flat on top (normal along
/// +z) and the lowest-indexed vertex of that face lies at longitude 0.
pub fn base_icosahedron() -> IcosahedralMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut raw: Vec<Vec3> = Vec::with_capacity(12);
    for &s1 in &[1.0, -1.0] {
        for &s2 in &[1.0, -1.0] {
            raw.push([0.0, s1, s2 * phi]);
            raw.push([s1, s2 * phi, 0.0]);
            raw.push([s2 * phi, 0.0, s1]);
        }
    }
    let positions: Vec<Vec3> = raw.iter().map(vec3::normalize).collect();

    // Neighbouring vertices of the golden-ratio icosahedron are exactly 2 apart
    // before normalisation.
    let adjacent = |i: usize, j: usize| (vec3::distance(&raw[i], &raw[j]) - 2.0).abs() < 1e-9;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            if !adjacent(i, j) {
                continue;
            }
            for k in j + 1..12 {
                if adjacent(i, k) && adjacent(j, k) {
                    let (a, b, c) = (&positions[i], &positions[j], &positions[k]);
                    if vec3::triple(a, b, c) > 0.0 {
                        faces.push([i as u32, j as u32, k as u32]);
                    } else {
                        faces.push([i as u32, k as u32, j as u32]);
                    }
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);

    let centroid = |f: &[u32; 3]| {
        let s = f
            .iter()
            .fold([0.0; 3], |acc, &v| vec3::add(&acc, &positions[v as usize]));
        vec3::normalize(&s)
    };
    let top = faces
        .iter()
        .copied()
        .max_by(|a, b| {
            centroid(a)[2]
                .partial_cmp(&centroid(b)[2])
                .unwrap()
                // prefer the lexicographically smallest face on ties
                .then_with(|| {
                    let (mut x, mut y) = (*a, *b);
                    x.sort_unstable();
                    y.sort_unstable();
                    y.cmp(&x)
                })
        })
        .unwrap();
    let tilt = vec3::rotation_between(&centroid(&top), &[0.0, 0.0, 1.0]);
    let anchor = *top.iter().min().unwrap() as usize;
    let anchored = vec3::mat_vec(&tilt, &positions[anchor]);
    let spin = vec3::rot_z(-anchored[1].atan2(anchored[0]));
    let rotation = vec3::mat_mul(&spin, &tilt);
    let positions = positions
        .iter()
        .map(|p| vec3::normalize(&vec3::mat_vec(&rotation, p)))
        .collect();
    IcosahedralMesh {
        level: 0,
        positions,
        faces,
    }
}

/// Split every face into four, adding one re-projected node per edge.
pub fn refine_mesh(mesh: &IcosahedralMesh) -> IcosahedralMesh {
    let mut positions = mesh.positions.clone();
    let mut midpoints: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.faces.len() * 3 / 2);
    let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let p = vec3::add(&positions[a as usize], &positions[b as usize]);
            positions.push(vec3::normalize(&p));
            (positions.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let ab = midpoint(a, b, &mut positions);
        let bc = midpoint(b, c, &mut positions);
        let ca = midpoint(c, a, &mut positions);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    IcosahedralMesh {
        level: mesh.level + 1,
        positions,
        faces,
    }
}

/// Meshes `M^0 ..= M^levels`.
pub fn mesh_hierarchy(levels: usize) -> Vec<IcosahedralMesh> {
    let mut meshes = vec![base_icosahedron()];
    for _ in 0..levels {
        let next = refine_mesh(meshes.last().unwrap());
        meshes.push(next);
    }
    meshes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::MESH_TABLE;

    #[test]
    fn base_counts_and_norms() {
        let m = base_icosahedron();
        assert_eq!(m.positions.len(), 12);
        assert_eq!(m.faces.len(), 20);
        assert_eq!(m.directed_edges().len(), 60);
        for p in &m.positions {
            assert!((vec3::norm(p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_base_vertex_has_five_faces() {
        let m = base_icosahedron();
        for v in 0..12u32 {
            let n = m.faces.iter().filter(|f| f.contains(&v)).count();
            assert_eq!(n, 5, "vertex {v}");
        }
    }

    #[test]
    fn top_face_is_flat_with_vertex_on_prime_meridian() {
        let m = base_icosahedron();
        let top: Vec<&Vec3> = m.positions.iter().filter(|p| p[2] > 0.7).collect();
        assert_eq!(top.len(), 3);
        let z0 = top[0][2];
        assert!(top.iter().all(|p| (p[2] - z0).abs() < 1e-12));
        assert!(top.iter().any(|p| p[1].abs() < 1e-12 && p[0] > 0.0));
    }

    #[test]
    fn faces_are_counterclockwise() {
        for m in mesh_hierarchy(3) {
            for f in &m.faces {
                let [a, b, c] = f.map(|i| m.positions[i as usize]);
                let n = vec3::cross(&vec3::sub(&b, &a), &vec3::sub(&c, &a));
                assert!(vec3::dot(&n, &a) > 0.0);
            }
        }
    }

    #[test]
    fn refinement_keeps_parent_prefix() {
        let m0 = base_icosahedron();
        let m1 = refine_mesh(&m0);
        assert_eq!(&m1.positions[..12], &m0.positions[..]);
        assert_eq!((m1.positions.len(), m1.faces.len()), (42, 80));
        assert_eq!(m1.directed_edges().len(), 240);
    }

    #[test]
    fn counts_match_table_through_level_five() {
        for (r, m) in mesh_hierarchy(5).iter().enumerate() {
            let (nodes, faces, edges, _) = MESH_TABLE[r];
            assert_eq!(m.positions.len(), nodes);
            assert_eq!(m.faces.len(), faces);
            assert_eq!(m.directed_edges().len(), edges);
        }
    }

    #[test]
    fn directed_edges_are_paired() {
        let m = refine_mesh(&base_icosahedron());
        let edges = m.directed_edges();
        let set: std::collections::HashSet<_> = edges.iter().copied().collect();
        assert_eq!(set.len(), edges.len());
        assert!(edges.iter().all(|&(s, r)| set.contains(&(r, s))));
        assert!(edges.windows(2).all(|w| (w[0].1, w[0].0) < (w[1].1, w[1].0)));
    }
}
