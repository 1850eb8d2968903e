//! Spherical geometry: the latitude-longitude grid, the refined icosahedral
//! mesh hierarchy, the multi-mesh and the grid/mesh bipartite edge sets.

mod bipartite;
mod features;
mod grid;
mod icosahedron;
mod index;
mod multimesh;
pub mod vec3;

pub use bipartite::{build_grid2mesh, build_mesh2grid, BipartiteEdges, EdgeDirection};
pub use features::{edge_features, receiver_frame};
pub use grid::GridSpec;
pub use icosahedron::{base_icosahedron, mesh_hierarchy, refine_mesh, IcosahedralMesh};
pub use index::LatLonIndex;
pub use multimesh::{build_multimesh, MeshEdge, MultiMesh};

use std::collections::BTreeMap;

use serde_json::json;
use thiserror::Error;

use crate::datastore::{ArrayInfo, Container, Manifest};

/// Fraction of the longest finest-level mesh edge used as the Grid2Mesh radius.
pub const GRID2MESH_RADIUS_FRACTION: f64 = 0.6;

/// Tolerance on spherical triple products when testing triangle containment.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-12;

/// Published multi-mesh statistics for refinement levels 0..=6:
/// (nodes, faces, directed edges, multilevel directed edges).
pub const MESH_TABLE: [(usize, usize, usize, usize); 7] = [
    (12, 20, 60, 60),
    (42, 80, 240, 300),
    (162, 320, 960, 1_260),
    (642, 1_280, 3_840, 5_100),
    (2_562, 5_120, 15_360, 20_460),
    (10_242, 20_480, 61_440, 81_900),
    (40_962, 81_920, 245_760, 327_660),
];

#[derive(Debug, Error)]
pub enum GeodesyError {
    #[error("grid resolution {0}° does not divide 180° evenly")]
    BadResolution(f64),
    #[error("grid node {index} (lat {lat}, lon {lon}) has no mesh node within the Grid2Mesh radius")]
    IsolatedGridNode { index: usize, lat: f64, lon: f64 },
    #[error("no containing mesh face found for grid node {index} (lat {lat}, lon {lon})")]
    ContainmentFailed { index: usize, lat: f64, lon: f64 },
}

/// Geometry shared by every forward pass of a model: grid, multi-mesh, both
/// bipartite edge sets and the mesh edge features.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub grid: GridSpec,
    pub mesh: MultiMesh,
    pub grid2mesh: BipartiteEdges,
    pub mesh2grid: BipartiteEdges,
    /// Per multi-mesh edge feature rows, aligned with `mesh.edges`.
    pub mesh_edge_features: Vec<[f32; 4]>,
}

impl Geometry {
    pub fn build(resolution_deg: f64, refinement: usize) -> Result<Self, GeodesyError> {
        let grid = GridSpec::new(resolution_deg)?;
        let mesh = build_multimesh(refinement);
        let grid2mesh = build_grid2mesh(&grid, &mesh)?;
        let mesh2grid = build_mesh2grid(&grid, &mesh)?;
        let scale = mesh.max_edge_length;
        let mesh_edge_features = mesh
            .edges
            .iter()
            .map(|e| {
                let f = edge_features(
                    &mesh.positions[e.sender as usize],
                    &mesh.positions[e.receiver as usize],
                    scale,
                );
                [f[0] as f32, f[1] as f32, f[2] as f32, f[3] as f32]
            })
            .collect();
        Ok(Self {
            grid,
            mesh,
            grid2mesh,
            mesh2grid,
            mesh_edge_features,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.grid.len()
    }

    pub fn n_mesh(&self) -> usize {
        self.mesh.positions.len()
    }

    /// Mesh nodes and all three edge sets as container arrays. Indices are
    /// stored as f32, which is exact below 2^24.
    pub fn to_container(&self) -> Container {
        assert!(self.n_grid().max(self.n_mesh()) < 1 << 24);
        let mut m = Manifest::new("edges");
        m.grid_resolution_deg = Some(self.grid.resolution_deg);
        m.attributes.insert("refinement".into(), json!(self.mesh.finest_level));
        m.attributes.insert("n_grid".into(), json!(self.n_grid()));
        m.attributes.insert("n_mesh".into(), json!(self.n_mesh()));
        let mut arrays = BTreeMap::new();
        let mut put = |name: &str, cols: usize, values: Vec<f32>| {
            m.arrays.push(ArrayInfo {
                name: name.into(),
                dims: vec![values.len() / cols, cols],
                channels: Vec::new(),
            });
            arrays.insert(name.to_string(), values);
        };
        put(
            "mesh_positions",
            3,
            self.mesh.positions.iter().flat_map(|p| p.map(|v| v as f32)).collect(),
        );
        put(
            "mesh_edges",
            3,
            self.mesh
                .edges
                .iter()
                .flat_map(|e| [e.sender as f32, e.receiver as f32, e.level as f32])
                .collect(),
        );
        put("mesh_edge_features", 4, self.mesh_edge_features.concat());
        for (name, e) in [("grid2mesh", &self.grid2mesh), ("mesh2grid", &self.mesh2grid)] {
            put(
                name,
                2,
                e.senders.iter().zip(&e.receivers).flat_map(|(&s, &r)| [s as f32, r as f32]).collect(),
            );
            put(&format!("{name}_features"), 4, e.features.concat());
        }
        Container { manifest: m, arrays }
    }
}
