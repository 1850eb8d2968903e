use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelLayout, GraphNetError};
use crate::datastore::{ArrayInfo, Container, Manifest};
use crate::diffcore::{MlpParams, MlpVars, Real, Tape, Tensor, Var};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub resolution_deg: f64,
    pub refinement: usize,
    pub latent: usize,
    pub processor_layers: usize,
    pub layout: ChannelLayout,
}

impl ModelConfig {
    pub fn full() -> Self {
        Self {
            resolution_deg: 0.25,
            refinement: 6,
            latent: 512,
            processor_layers: 16,
            layout: ChannelLayout::full(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessorLayer<T> {
    pub edge: MlpParams<T>,
    pub node: MlpParams<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNetParams<T> {
    pub grid_embed: MlpParams<T>,
    pub mesh_embed: MlpParams<T>,
    pub mesh_edge_embed: MlpParams<T>,
    pub g2m_edge_embed: MlpParams<T>,
    pub m2g_edge_embed: MlpParams<T>,
    pub g2m_edge: MlpParams<T>,
    pub g2m_mesh: MlpParams<T>,
    pub g2m_grid: MlpParams<T>,
    pub processor: Vec<ProcessorLayer<T>>,
    pub m2g_edge: MlpParams<T>,
    pub m2g_grid: MlpParams<T>,
    pub output: MlpParams<T>,
}

/// Tape handles mirroring [`GraphNetParams`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub grid_embed: MlpVars,
    pub mesh_embed: MlpVars,
    pub mesh_edge_embed: MlpVars,
    pub g2m_edge_embed: MlpVars,
    pub m2g_edge_embed: MlpVars,
    pub g2m_edge: MlpVars,
    pub g2m_mesh: MlpVars,
    pub g2m_grid: MlpVars,
    pub processor: Vec<(MlpVars, MlpVars)>,
    pub m2g_edge: MlpVars,
    pub m2g_grid: MlpVars,
    pub output: MlpVars,
}

impl ParamVars {
    /// All handles in [`GraphNetParams::named_tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        self.mlps().iter().flat_map(|m| m.vars()).collect()
    }

    fn mlps(&self) -> Vec<&MlpVars> {
        let mut v = vec![
            &self.grid_embed,
            &self.mesh_embed,
            &self.mesh_edge_embed,
            &self.g2m_edge_embed,
            &self.m2g_edge_embed,
            &self.g2m_edge,
            &self.g2m_mesh,
            &self.g2m_grid,
        ];
        for (e, n) in &self.processor {
            v.push(e);
            v.push(n);
        }
        v.extend([&self.m2g_edge, &self.m2g_grid, &self.output]);
        v
    }
}

const MLP_FIELDS: [&str; 6] = ["w1", "b1", "w2", "b2", "gamma", "beta"];

impl<T: Real> GraphNetParams<T> {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = cfg.latent;
        let mut mlp = |d_in: usize, d_out: usize, ln: bool| MlpParams::init(&mut rng, d_in, w, d_out, ln);
        Self {
            grid_embed: mlp(cfg.layout.input_width(), w, true),
            mesh_embed: mlp(3, w, true),
            mesh_edge_embed: mlp(4, w, true),
            g2m_edge_embed: mlp(4, w, true),
            m2g_edge_embed: mlp(4, w, true),
            g2m_edge: mlp(3 * w, w, true),
            g2m_mesh: mlp(2 * w, w, true),
            g2m_grid: mlp(w, w, true),
            processor: (0..cfg.processor_layers)
                .map(|_| ProcessorLayer {
                    edge: mlp(3 * w, w, true),
                    node: mlp(2 * w, w, true),
                })
                .collect(),
            m2g_edge: mlp(3 * w, w, true),
            m2g_grid: mlp(2 * w, w, true),
            output: mlp(w, cfg.layout.n_predicted(), false),
        }
    }

    fn mlps(&self) -> Vec<(String, &MlpParams<T>)> {
        let mut v = vec![
            ("grid_embed".to_string(), &self.grid_embed),
            ("mesh_embed".to_string(), &self.mesh_embed),
            ("mesh_edge_embed".to_string(), &self.mesh_edge_embed),
            ("g2m_edge_embed".to_string(), &self.g2m_edge_embed),
            ("m2g_edge_embed".to_string(), &self.m2g_edge_embed),
            ("g2m_edge".to_string(), &self.g2m_edge),
            ("g2m_mesh".to_string(), &self.g2m_mesh),
            ("g2m_grid".to_string(), &self.g2m_grid),
        ];
        for (i, l) in self.processor.iter().enumerate() {
            v.push((format!("processor.{i:02}.edge"), &l.edge));
            v.push((format!("processor.{i:02}.node"), &l.node));
        }
        v.push(("m2g_edge".to_string(), &self.m2g_edge));
        v.push(("m2g_grid".to_string(), &self.m2g_grid));
        v.push(("output".to_string(), &self.output));
        v
    }

    fn mlps_mut(&mut self) -> Vec<&mut MlpParams<T>> {
        let mut v = vec![
            &mut self.grid_embed,
            &mut self.mesh_embed,
            &mut self.mesh_edge_embed,
            &mut self.g2m_edge_embed,
            &mut self.m2g_edge_embed,
            &mut self.g2m_edge,
            &mut self.g2m_mesh,
            &mut self.g2m_grid,
        ];
        for l in self.processor.iter_mut() {
            v.push(&mut l.edge);
            v.push(&mut l.node);
        }
        v.push(&mut self.m2g_edge);
        v.push(&mut self.m2g_grid);
        v.push(&mut self.output);
        v
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (name, m) in self.mlps() {
            for (k, t) in m.tensors().into_iter().enumerate() {
                out.push((format!("{name}.{}", MLP_FIELDS[k]), t));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.mlps_mut().into_iter().flat_map(|m| m.tensors_mut()).collect()
    }

    /// True for weight matrices, which receive weight decay.
    pub fn matrix_mask(&self) -> Vec<bool> {
        self.mlps().iter().flat_map(|(_, m)| m.matrix_mask()).collect()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.named_tensors().iter().map(|(_, t)| t.shape().to_vec()).collect()
    }

    pub fn n_values(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> GraphNetParams<U> {
        GraphNetParams {
            grid_embed: self.grid_embed.cast(),
            mesh_embed: self.mesh_embed.cast(),
            mesh_edge_embed: self.mesh_edge_embed.cast(),
            g2m_edge_embed: self.g2m_edge_embed.cast(),
            m2g_edge_embed: self.m2g_edge_embed.cast(),
            g2m_edge: self.g2m_edge.cast(),
            g2m_mesh: self.g2m_mesh.cast(),
            g2m_grid: self.g2m_grid.cast(),
            processor: self
                .processor
                .iter()
                .map(|l| ProcessorLayer {
                    edge: l.edge.cast(),
                    node: l.node.cast(),
                })
                .collect(),
            m2g_edge: self.m2g_edge.cast(),
            m2g_grid: self.m2g_grid.cast(),
            output: self.output.cast(),
        }
    }

    pub fn record(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars {
            grid_embed: self.grid_embed.record(tape),
            mesh_embed: self.mesh_embed.record(tape),
            mesh_edge_embed: self.mesh_edge_embed.record(tape),
            g2m_edge_embed: self.g2m_edge_embed.record(tape),
            m2g_edge_embed: self.m2g_edge_embed.record(tape),
            g2m_edge: self.g2m_edge.record(tape),
            g2m_mesh: self.g2m_mesh.record(tape),
            g2m_grid: self.g2m_grid.record(tape),
            processor: self
                .processor
                .iter()
                .map(|l| (l.edge.record(tape), l.node.record(tape)))
                .collect(),
            m2g_edge: self.m2g_edge.record(tape),
            m2g_grid: self.m2g_grid.record(tape),
            output: self.output.record(tape),
        }
    }
}

impl GraphNetParams<f32> {
    /// Checkpoint container: one array per tensor plus the model config.
    pub fn to_container(&self, cfg: &ModelConfig, attributes: BTreeMap<String, serde_json::Value>) -> Container {
        let mut manifest = Manifest::new("checkpoint");
        manifest.grid_resolution_deg = Some(cfg.resolution_deg);
        manifest.attributes = attributes;
        manifest
            .attributes
            .insert("model".into(), serde_json::to_value(cfg).expect("config serializes"));
        let mut arrays = BTreeMap::new();
        for (name, t) in self.named_tensors() {
            manifest.arrays.push(ArrayInfo {
                name: name.clone(),
                dims: t.shape().to_vec(),
                channels: Vec::new(),
            });
            arrays.insert(name, t.data().to_vec());
        }
        Container { manifest, arrays }
    }

    pub fn from_container(c: &Container) -> Result<(Self, ModelConfig), GraphNetError> {
        let cfg: ModelConfig = c
            .manifest
            .attributes
            .get("model")
            .cloned()
            .ok_or_else(|| GraphNetError::Layout("checkpoint has no model config".into()))
            .and_then(|v| serde_json::from_value(v).map_err(|e| GraphNetError::Layout(e.to_string())))?;
        let mut params = Self::init(&cfg, 0);
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.iter().zip(params.tensors_mut()) {
            let values = c
                .arrays
                .get(name)
                .ok_or_else(|| GraphNetError::Layout(format!("checkpoint lacks tensor {name}")))?;
            *t = Tensor::from_vec(t.shape(), values.clone())?;
        }
        Ok((params, cfg))
    }
}
