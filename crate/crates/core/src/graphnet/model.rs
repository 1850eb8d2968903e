use std::sync::Arc;

use super::{ChannelLayout, GraphNetError, GraphNetParams, ParamVars};
use crate::diffcore::{mlp_forward, mlp_tail, MlpVars, Real, Tape, Tensor, Var};
use crate::geodesy::Geometry;
use crate::normstats::NormStats;

/// Index lists and static features of the three edge sets.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n_grid: usize,
    pub n_mesh: usize,
    pub g2m_senders: Arc<[u32]>,
    pub g2m_receivers: Arc<[u32]>,
    pub mesh_senders: Arc<[u32]>,
    pub mesh_receivers: Arc<[u32]>,
    pub m2g_senders: Arc<[u32]>,
    pub m2g_receivers: Arc<[u32]>,
    pub mesh_nodes: Tensor<f32>,
    pub mesh_edges: Tensor<f32>,
    pub g2m_edges: Tensor<f32>,
    pub m2g_edges: Tensor<f32>,
}

impl Graph {
    pub fn from_geometry(g: &Geometry) -> Self {
        Self {
            n_grid: g.n_grid(),
            n_mesh: g.n_mesh(),
            g2m_senders: g.grid2mesh.senders.clone().into(),
            g2m_receivers: g.grid2mesh.receivers.clone().into(),
            mesh_senders: g.mesh.edges.iter().map(|e| e.sender).collect(),
            mesh_receivers: g.mesh.edges.iter().map(|e| e.receiver).collect(),
            m2g_senders: g.mesh2grid.senders.clone().into(),
            m2g_receivers: g.mesh2grid.receivers.clone().into(),
            mesh_nodes: Tensor::from_rows(&g.mesh.node_features),
            mesh_edges: Tensor::from_rows(&g.mesh_edge_features),
            g2m_edges: Tensor::from_rows(&g.grid2mesh.features),
            m2g_edges: Tensor::from_rows(&g.mesh2grid.features),
        }
    }
}

/// Per-channel affine maps for the predicted channels: inputs to unit
/// scale, network outputs to physical one-step differences.
#[derive(Debug, Clone)]
pub struct ModelNorm<T> {
    pub in_scale: Arc<[T]>,
    pub in_shift: Vec<T>,
    pub out_scale: Arc<[T]>,
    pub out_shift: Vec<T>,
}

impl<T: Real> ModelNorm<T> {
    pub fn from_stats(stats: &NormStats, layout: &ChannelLayout) -> Result<Self, GraphNetError> {
        let idx = stats_indices(stats, layout)?;
        Ok(Self {
            in_scale: idx.iter().map(|&i| T::of(1.0 / stats.std[i])).collect(),
            in_shift: idx.iter().map(|&i| T::of(-stats.mean[i] / stats.std[i])).collect(),
            out_scale: idx.iter().map(|&i| T::of(stats.diff_std[i])).collect(),
            out_shift: idx.iter().map(|&i| T::of(stats.diff_mean[i])).collect(),
        })
    }

    /// Identity input scaling and unit output scaling, for tests.
    pub fn identity(n: usize) -> Self {
        Self {
            in_scale: vec![T::one(); n].into(),
            in_shift: vec![T::zero(); n],
            out_scale: vec![T::one(); n].into(),
            out_shift: vec![T::zero(); n],
        }
    }
}

/// Positions of the layout's predicted channels in a stats table.
pub fn stats_indices(stats: &NormStats, layout: &ChannelLayout) -> Result<Vec<usize>, GraphNetError> {
    layout
        .channel_names()
        .iter()
        .map(|n| {
            stats
                .index_of(n)
                .ok_or_else(|| GraphNetError::Layout(format!("no statistics for channel {n}")))
        })
        .collect()
}

/// Model inputs: the two most recent states, forcings starting at the
/// earlier state's time (at least three frames, one more per extra rollout
/// step) and per-node constants. All tensors are node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair<T> {
    pub x_prev: Tensor<T>,
    pub x_curr: Tensor<T>,
    pub forcings: Vec<Tensor<T>>,
    pub constants: Tensor<T>,
}

impl<T: Real> StatePair<T> {
    pub fn validate(&self, layout: &ChannelLayout, n_grid: usize, steps: usize) -> Result<(), GraphNetError> {
        let p = layout.n_predicted();
        let check = |what: &str, t: &Tensor<T>, cols: usize| {
            if t.shape() != [n_grid, cols] {
                Err(GraphNetError::Layout(format!(
                    "{what} has shape {:?}, expected [{n_grid}, {cols}]",
                    t.shape()
                )))
            } else {
                Ok(())
            }
        };
        check("x_prev", &self.x_prev, p)?;
        check("x_curr", &self.x_curr, p)?;
        check("constants", &self.constants, layout.n_constants)?;
        if self.forcings.len() < steps + 2 {
            return Err(GraphNetError::Layout(format!(
                "{} forcing frames supplied, {steps} steps need {}",
                self.forcings.len(),
                steps + 2
            )));
        }
        for f in &self.forcings {
            check("forcing", f, layout.n_forcings)?;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> StatePair<U> {
        StatePair {
            x_prev: self.x_prev.cast(),
            x_curr: self.x_curr.cast(),
            forcings: self.forcings.iter().map(|f| f.cast()).collect(),
            constants: self.constants.cast(),
        }
    }
}

/// Latent vectors of every node and edge set.
#[derive(Debug, Clone, Copy)]
pub struct Latents {
    pub grid: Var,
    pub mesh: Var,
    pub mesh_edges: Var,
    pub g2m_edges: Var,
    pub m2g_edges: Var,
}

/// Embeddings that depend only on parameters and geometry.
#[derive(Debug, Clone, Copy)]
pub struct StaticLatents {
    pub mesh: Var,
    pub mesh_edges: Var,
    pub g2m_edges: Var,
    pub m2g_edges: Var,
}

fn feature<T: Real>(tape: &mut Tape<T>, t: &Tensor<f32>) -> Var {
    tape.constant(t.cast())
}

pub fn embed_static<T: Real>(tape: &mut Tape<T>, p: &ParamVars, g: &Graph) -> Result<StaticLatents, GraphNetError> {
    let f = feature(tape, &g.mesh_nodes);
    let mesh = mlp_forward(tape, &p.mesh_embed, f)?;
    let f = feature(tape, &g.mesh_edges);
    let mesh_edges = mlp_forward(tape, &p.mesh_edge_embed, f)?;
    let f = feature(tape, &g.g2m_edges);
    let g2m_edges = mlp_forward(tape, &p.g2m_edge_embed, f)?;
    let f = feature(tape, &g.m2g_edges);
    let m2g_edges = mlp_forward(tape, &p.m2g_edge_embed, f)?;
    Ok(StaticLatents {
        mesh,
        mesh_edges,
        g2m_edges,
        m2g_edges,
    })
}

pub fn embed_grid<T: Real>(tape: &mut Tape<T>, p: &ParamVars, grid_input: Var, s: &StaticLatents) -> Result<Latents, GraphNetError> {
    Ok(Latents {
        grid: mlp_forward(tape, &p.grid_embed, grid_input)?,
        mesh: s.mesh,
        mesh_edges: s.mesh_edges,
        g2m_edges: s.g2m_edges,
        m2g_edges: s.m2g_edges,
    })
}

/// MLP([e, v_send[s], v_recv[r]]) with the first layer split by input block
/// so node terms are multiplied once per node rather than once per edge.
fn edge_mlp<T: Real>(
    tape: &mut Tape<T>,
    m: &MlpVars,
    e: Var,
    v_send: Var,
    v_recv: Var,
    senders: &Arc<[u32]>,
    receivers: &Arc<[u32]>,
) -> Result<Var, GraphNetError> {
    let w = tape.value(e).cols();
    let (we, ws, wr) = (
        tape.row_block(m.w1, 0, w)?,
        tape.row_block(m.w1, w, 2 * w)?,
        tape.row_block(m.w1, 2 * w, 3 * w)?,
    );
    let pe = tape.matmul(e, we)?;
    let ps = tape.matmul(v_send, ws)?;
    let ps = tape.gather_rows(ps, senders.clone())?;
    let pr = tape.matmul(v_recv, wr)?;
    let pr = tape.gather_rows(pr, receivers.clone())?;
    let pre = tape.sum_all(&[pe, ps, pr])?;
    Ok(mlp_tail(tape, m, pre)?)
}

/// MLP([v, Σ incoming e]).
fn node_mlp<T: Real>(
    tape: &mut Tape<T>,
    m: &MlpVars,
    v: Var,
    e: Var,
    receivers: &Arc<[u32]>,
) -> Result<Var, GraphNetError> {
    let (n, w) = (tape.value(v).rows(), tape.value(v).cols());
    let agg = tape.segment_sum(e, receivers.clone(), n)?;
    let wv = tape.row_block(m.w1, 0, w)?;
    let wa = tape.row_block(m.w1, w, 2 * w)?;
    let pv = tape.matmul(v, wv)?;
    let pa = tape.matmul(agg, wa)?;
    let pre = tape.add(pv, pa)?;
    Ok(mlp_tail(tape, m, pre)?)
}

/// One message-passing step from grid to mesh; residuals on edges, mesh and grid.
pub fn grid2mesh<T: Real>(tape: &mut Tape<T>, p: &ParamVars, g: &Graph, l: Latents) -> Result<Latents, GraphNetError> {
    let de = edge_mlp(tape, &p.g2m_edge, l.g2m_edges, l.grid, l.mesh, &g.g2m_senders, &g.g2m_receivers)?;
    let dm = node_mlp(tape, &p.g2m_mesh, l.mesh, de, &g.g2m_receivers)?;
    let dg = mlp_forward(tape, &p.g2m_grid, l.grid)?;
    Ok(Latents {
        g2m_edges: tape.add(l.g2m_edges, de)?,
        mesh: tape.add(l.mesh, dm)?,
        grid: tape.add(l.grid, dg)?,
        ..l
    })
}

/// Interaction-network layers on the multi-mesh with unshared weights.
pub fn processor<T: Real>(tape: &mut Tape<T>, p: &ParamVars, g: &Graph, mut l: Latents) -> Result<Latents, GraphNetError> {
    for (em, nm) in &p.processor {
        let de = edge_mlp(tape, em, l.mesh_edges, l.mesh, l.mesh, &g.mesh_senders, &g.mesh_receivers)?;
        let dv = node_mlp(tape, nm, l.mesh, de, &g.mesh_receivers)?;
        l.mesh_edges = tape.add(l.mesh_edges, de)?;
        l.mesh = tape.add(l.mesh, dv)?;
    }
    Ok(l)
}

/// One message-passing step from mesh to grid; returns the updated grid latents.
pub fn mesh2grid<T: Real>(tape: &mut Tape<T>, p: &ParamVars, g: &Graph, l: Latents) -> Result<Var, GraphNetError> {
    let de = edge_mlp(tape, &p.m2g_edge, l.m2g_edges, l.mesh, l.grid, &g.m2g_senders, &g.m2g_receivers)?;
    let dg = node_mlp(tape, &p.m2g_grid, l.grid, de, &g.m2g_receivers)?;
    Ok(tape.add(l.grid, dg)?)
}

/// Normalized state pair, forcing frames and constants for one step.
struct StepInputs {
    prev_n: Var,
    curr_n: Var,
    curr: Var,
    forcings: [Var; 3],
    constants: Var,
}

fn step<T: Real>(
    tape: &mut Tape<T>,
    p: &ParamVars,
    g: &Graph,
    norm: &ModelNorm<T>,
    s: &StaticLatents,
    i: &StepInputs,
) -> Result<Var, GraphNetError> {
    let x = tape.concat_cols(&[i.prev_n, i.curr_n, i.forcings[0], i.forcings[1], i.forcings[2], i.constants])?;
    let l = embed_grid(tape, p, x, s)?;
    let l = grid2mesh(tape, p, g, l)?;
    let l = processor(tape, p, g, l)?;
    let grid = mesh2grid(tape, p, g, l)?;
    let y = mlp_forward(tape, &p.output, grid)?;
    let delta = tape.col_affine(y, norm.out_scale.clone(), &norm.out_shift)?;
    Ok(tape.add(i.curr, delta)?)
}

/// Records an autoregressive rollout; returns the predicted states
/// X̂^{t+1}..X̂^{t+steps}, each [n_grid, n_predicted].
#[allow(clippy::too_many_arguments)]
pub fn rollout_on_tape<T: Real>(
    tape: &mut Tape<T>,
    p: &ParamVars,
    g: &Graph,
    norm: &ModelNorm<T>,
    layout: &ChannelLayout,
    input: &StatePair<T>,
    steps: usize,
    statics: Option<StaticLatents>,
) -> Result<Vec<Var>, GraphNetError> {
    input.validate(layout, g.n_grid, steps)?;
    let s = match statics {
        Some(s) => s,
        None => embed_static(tape, p, g)?,
    };
    let prev = tape.constant(input.x_prev.clone());
    let mut curr = tape.constant(input.x_curr.clone());
    let mut prev_n = tape.col_affine(prev, norm.in_scale.clone(), &norm.in_shift)?;
    let mut curr_n = tape.col_affine(curr, norm.in_scale.clone(), &norm.in_shift)?;
    let forcings: Vec<Var> = input.forcings[..steps + 2].iter().map(|f| tape.constant(f.clone())).collect();
    let constants = tape.constant(input.constants.clone());
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let inputs = StepInputs {
            prev_n,
            curr_n,
            curr,
            forcings: [forcings[k], forcings[k + 1], forcings[k + 2]],
            constants,
        };
        let next = step(tape, p, g, norm, &s, &inputs)?;
        out.push(next);
        prev_n = curr_n;
        curr = next;
        curr_n = tape.col_affine(next, norm.in_scale.clone(), &norm.in_shift)?;
    }
    Ok(out)
}

fn check_finite<T: Real>(t: &Tensor<T>, step: usize) -> Result<(), GraphNetError> {
    if let Some(k) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(GraphNetError::NonFinite {
            channel: k % t.cols(),
            step,
        });
    }
    Ok(())
}

/// X̂^{t+1} from one state pair, without recording gradients.
pub fn predict_step<T: Real>(
    params: &GraphNetParams<T>,
    g: &Graph,
    norm: &ModelNorm<T>,
    layout: &ChannelLayout,
    input: &StatePair<T>,
) -> Result<Tensor<T>, GraphNetError> {
    Ok(rollout(params, g, norm, layout, input, 1)?.remove(0))
}

/// Autoregressive inference. Static embeddings are computed once; every step
/// uses a fresh tape so memory does not grow with the horizon.
pub fn rollout<T: Real>(
    params: &GraphNetParams<T>,
    g: &Graph,
    norm: &ModelNorm<T>,
    layout: &ChannelLayout,
    input: &StatePair<T>,
    steps: usize,
) -> Result<Vec<Tensor<T>>, GraphNetError> {
    input.validate(layout, g.n_grid, steps)?;
    let statics = {
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let s = embed_static(&mut tape, &p, g)?;
        [s.mesh, s.mesh_edges, s.g2m_edges, s.m2g_edges].map(|v| tape.value(v).clone())
    };
    let mut frames = Vec::with_capacity(steps);
    let (mut prev, mut curr) = (input.x_prev.clone(), input.x_curr.clone());
    for k in 0..steps {
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let [mesh, mesh_edges, g2m_edges, m2g_edges] = statics.clone().map(|t| tape.constant(t));
        let s = StaticLatents {
            mesh,
            mesh_edges,
            g2m_edges,
            m2g_edges,
        };
        let sub = StatePair {
            x_prev: prev,
            x_curr: curr.clone(),
            forcings: input.forcings[k..k + 3].to_vec(),
            constants: input.constants.clone(),
        };
        let next = rollout_on_tape(&mut tape, &p, g, norm, layout, &sub, 1, Some(s))?;
        let next = tape.value(next[0]).clone();
        check_finite(&next, k + 1)?;
        frames.push(next.clone());
        prev = curr;
        curr = next;
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{mlp_apply, MlpParams};
    use crate::graphnet::ModelConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn config(latent: usize, layers: usize) -> ModelConfig {
        ModelConfig {
            resolution_deg: 90.0,
            refinement: 0,
            latent,
            processor_layers: layers,
            layout: ChannelLayout::toy(&[500, 850, 1000]),
        }
    }

    /// Multi-mesh of the base icosahedron with no grid attached.
    fn mesh_only_graph() -> Graph {
        let mesh = crate::geodesy::build_multimesh(0);
        let empty: Arc<[u32]> = Vec::new().into();
        Graph {
            n_grid: 0,
            n_mesh: mesh.positions.len(),
            g2m_senders: empty.clone(),
            g2m_receivers: empty.clone(),
            mesh_senders: mesh.edges.iter().map(|e| e.sender).collect(),
            mesh_receivers: mesh.edges.iter().map(|e| e.receiver).collect(),
            m2g_senders: empty.clone(),
            m2g_receivers: empty,
            mesh_nodes: Tensor::from_rows(&mesh.node_features),
            mesh_edges: Tensor::zeros(&[mesh.edges.len(), 4]),
            g2m_edges: Tensor::zeros(&[0, 4]),
            m2g_edges: Tensor::zeros(&[0, 4]),
        }
    }

    fn rows(t: &Tensor<f64>, i: usize) -> Vec<f64> {
        t.row(i).to_vec()
    }

    fn apply_row(m: &MlpParams<f64>, parts: &[Vec<f64>]) -> Vec<f64> {
        let x: Vec<f64> = parts.concat();
        mlp_apply(m, &Tensor::from_vec(&[1, x.len()], x).unwrap()).unwrap().into_data()
    }

    #[test]
    fn processor_layer_matches_hand_loop() {
        let g = mesh_only_graph();
        let cfg = config(6, 1);
        let params = GraphNetParams::<f64>::init(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v0 = random(&mut rng, &[g.n_mesh, 6]);
        let e0 = random(&mut rng, &[g.mesh_senders.len(), 6]);

        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let (mesh, mesh_edges) = (tape.constant(v0.clone()), tape.constant(e0.clone()));
        let dummy = tape.constant(Tensor::zeros(&[1, 6]));
        let l = Latents {
            grid: dummy,
            mesh,
            mesh_edges,
            g2m_edges: dummy,
            m2g_edges: dummy,
        };
        let out = processor(&mut tape, &p, &g, l).unwrap();

        let layer = &params.processor[0];
        let de: Vec<Vec<f64>> = (0..e0.rows())
            .map(|k| {
                let (s, r) = (g.mesh_senders[k] as usize, g.mesh_receivers[k] as usize);
                apply_row(&layer.edge, &[rows(&e0, k), rows(&v0, s), rows(&v0, r)])
            })
            .collect();
        for n in 0..g.n_mesh {
            let mut agg = vec![0.0; 6];
            for k in 0..de.len() {
                if g.mesh_receivers[k] as usize == n {
                    agg.iter_mut().zip(&de[k]).for_each(|(a, d)| *a += d);
                }
            }
            let dv = apply_row(&layer.node, &[rows(&v0, n), agg]);
            for j in 0..6 {
                let expect = v0.row(n)[j] + dv[j];
                assert!((tape.value(out.mesh).row(n)[j] - expect).abs() < 1e-12);
            }
        }
        for k in 0..de.len() {
            for j in 0..6 {
                assert!((tape.value(out.mesh_edges).row(k)[j] - e0.row(k)[j] - de[k][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_layers_is_identity() {
        let g = mesh_only_graph();
        let params = GraphNetParams::<f64>::init(&config(4, 0), 1);
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let s = embed_static(&mut tape, &p, &g).unwrap();
        let grid = tape.constant(Tensor::zeros(&[g.n_grid, 4]));
        let l = Latents {
            grid,
            mesh: s.mesh,
            mesh_edges: s.mesh_edges,
            g2m_edges: s.g2m_edges,
            m2g_edges: s.m2g_edges,
        };
        let out = processor(&mut tape, &p, &g, l).unwrap();
        assert_eq!(out.mesh, l.mesh);
        assert_eq!(out.mesh_edges, l.mesh_edges);
    }

    #[test]
    fn zero_embedders_give_beta() {
        let geo = Geometry::build(30.0, 1).unwrap();
        let g = Graph::from_geometry(&geo);
        let mut params = GraphNetParams::<f64>::init(&config(4, 1), 1);
        for m in [&mut params.grid_embed, &mut params.mesh_embed] {
            *m = MlpParams::zeros(m.d_in(), 4, 4, true);
            m.norm.as_mut().unwrap().1 = Tensor::from_vec(&[4], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        }
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let s = embed_static(&mut tape, &p, &g).unwrap();
        let x = tape.constant(Tensor::zeros(&[g.n_grid, 30]));
        let l = embed_grid(&mut tape, &p, x, &s).unwrap();
        for v in [l.grid, l.mesh] {
            for row in tape.value(v).data().chunks(4) {
                assert_eq!(row, &[0.5, -1.0, 2.0, 0.0]);
            }
        }
    }

    fn toy_input(rng: &mut ChaCha8Rng, n_grid: usize, steps: usize) -> StatePair<f64> {
        StatePair {
            x_prev: random(rng, &[n_grid, 5]),
            x_curr: random(rng, &[n_grid, 5]),
            forcings: (0..steps + 2).map(|_| random(rng, &[n_grid, 5])).collect(),
            constants: random(rng, &[n_grid, 5]),
        }
    }

    #[test]
    fn zero_head_leaves_residual_skeleton() {
        let geo = Geometry::build(30.0, 1).unwrap();
        let g = Graph::from_geometry(&geo);
        let cfg = config(8, 2);
        let mut params = GraphNetParams::<f64>::init(&cfg, 5);
        params.output.w2 = Tensor::zeros(params.output.w2.shape());
        let mut norm = ModelNorm::<f64>::identity(5);
        norm.out_shift = vec![0.5, -1.0, 0.25, 2.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let input = toy_input(&mut rng, g.n_grid, 4);
        let frames = rollout(&params, &g, &norm, &cfg.layout, &input, 4).unwrap();
        for (k, f) in frames.iter().enumerate() {
            for (i, (&v, &x)) in f.data().iter().zip(input.x_curr.data()).enumerate() {
                let expect = x + (k + 1) as f64 * norm.out_shift[i % 5];
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inference_matches_recorded_rollout() {
        let geo = Geometry::build(30.0, 1).unwrap();
        let g = Graph::from_geometry(&geo);
        let cfg = config(8, 2);
        let params = GraphNetParams::<f32>::init(&cfg, 6);
        let norm = ModelNorm::<f32>::identity(5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = toy_input(&mut rng, g.n_grid, 3).cast::<f32>();
        let frames = rollout(&params, &g, &norm, &cfg.layout, &input, 3).unwrap();
        let one = predict_step(&params, &g, &norm, &cfg.layout, &input).unwrap();
        assert_eq!(one, frames[0]);
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let vars = rollout_on_tape(&mut tape, &p, &g, &norm, &cfg.layout, &input, 3, None).unwrap();
        for (v, f) in vars.iter().zip(&frames) {
            assert_eq!(tape.value(*v), f);
        }
    }

    #[test]
    fn non_finite_output_names_channel() {
        let geo = Geometry::build(30.0, 1).unwrap();
        let g = Graph::from_geometry(&geo);
        let cfg = config(4, 1);
        let params = GraphNetParams::<f32>::init(&cfg, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = toy_input(&mut rng, g.n_grid, 1).cast::<f32>();
        let mut norm = ModelNorm::identity(5);
        norm.out_shift[2] = f32::INFINITY;
        let err = predict_step(&params, &g, &norm, &cfg.layout, &input).unwrap_err();
        assert!(matches!(err, GraphNetError::NonFinite { channel: 2, step: 1 }), "{err}");
    }
}
