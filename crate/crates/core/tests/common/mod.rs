//! Fixtures and naive reference implementations shared by the integration
//! tests.
#![allow(dead_code)]

use std::ops::RangeInclusive;

use chrono::{DateTime, Datelike, Utc};
use meshcast::datastore::{
    generate_synthetic, write_container, year_view, ContainerReader, Split, SplitSpec, SyntheticConfig, YearRange,
    FIELDS_ARRAY,
};
use meshcast::diffcore::{Tape, Tensor};
use meshcast::evaluation::{acc, climatology_fit, rmse, ForecastArray, PointWeights};
use meshcast::geodesy::{Geometry, GridSpec};
use meshcast::graphnet::{rollout_on_tape, ChannelLayout, Graph, GraphNetParams, ModelConfig, ModelNorm, StatePair};
use meshcast::training::{loss, loss_on_tape, LossWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

pub struct Toy {
    pub dir: TempDir,
    pub reader: ContainerReader,
    pub config: SyntheticConfig,
}

/// Synthetic dataset starting 2016-01-01 written to a fresh directory.
pub fn toy_dataset(resolution_deg: f64, n_levels: usize, n_steps: usize, seed: u64) -> Toy {
    toy_dataset_with(SyntheticConfig::new(resolution_deg, n_levels, n_steps, seed))
}

pub fn toy_dataset_with(config: SyntheticConfig) -> Toy {
    let c = generate_synthetic(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_container(dir.path(), &c).unwrap();
    let reader = ContainerReader::open(dir.path()).unwrap();
    Toy { dir, reader, config }
}

/// Six-hourly steps covering 2016 through 2018.
pub const THREE_YEARS: usize = 4384;

pub fn three_year_split() -> SplitSpec {
    SplitSpec {
        train: YearRange::new(2016, 2016),
        validation: YearRange::new(2017, 2017),
        test: YearRange::new(2018, 2018),
    }
}

/// Per-point area weights from exact spherical band areas: each latitude row
/// owns the band between its neighbours' midpoints, clipped at the poles.
pub fn band_area_weights(resolution_deg: f64) -> Vec<f64> {
    let n_lat = (180.0 / resolution_deg).round() as usize + 1;
    let n_lon = (360.0 / resolution_deg).round() as usize;
    let mut w = Vec::with_capacity(n_lat * n_lon);
    for r in 0..n_lat {
        let lat = -90.0 + r as f64 * resolution_deg;
        let lo = (lat - resolution_deg / 2.0).max(-90.0).to_radians();
        let hi = (lat + resolution_deg / 2.0).min(90.0).to_radians();
        let area = hi.sin() - lo.sin();
        w.extend(std::iter::repeat(area).take(n_lon));
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|a| a / mean).collect()
}

pub fn naive_rmse(f: &ForecastArray, t: &ForecastArray, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.n_channel * f.n_lead];
    for j in 0..f.n_channel {
        for tau in 0..f.n_lead {
            let mut mean = 0.0;
            for d in 0..f.n_init {
                let mut s = 0.0;
                for i in 0..f.n_point {
                    let k = ((d * f.n_lead + tau) * f.n_channel + j) * f.n_point + i;
                    let e = f.data[k] as f64 - t.data[k] as f64;
                    s += a[i] * e * e;
                }
                mean += (s / f.n_point as f64).sqrt();
            }
            out[j * f.n_lead + tau] = mean / f.n_init as f64;
        }
    }
    out
}

pub fn naive_acc(f: &ForecastArray, t: &ForecastArray, c: &ForecastArray, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.n_channel * f.n_lead];
    for j in 0..f.n_channel {
        for tau in 0..f.n_lead {
            let mut mean = 0.0;
            for d in 0..f.n_init {
                let (mut num, mut ff, mut tt) = (0.0, 0.0, 0.0);
                for i in 0..f.n_point {
                    let k = ((d * f.n_lead + tau) * f.n_channel + j) * f.n_point + i;
                    let fa = f.data[k] as f64 - c.data[k] as f64;
                    let ta = t.data[k] as f64 - c.data[k] as f64;
                    num += a[i] * fa * ta;
                    ff += a[i] * fa * fa;
                    tt += a[i] * ta * ta;
                }
                mean += num / (ff * tt).sqrt();
            }
            out[j * f.n_lead + tau] = mean / f.n_init as f64;
        }
    }
    out
}

/// Channel weights from a layout description: the 2 m temperature surface
/// variable weighs 1, other surface variables 0.1, and each atmospheric
/// variable spreads a total of 1 over its levels in proportion to pressure.
pub fn layout_weights(surface: &[String], n_atmo: usize, levels: &[u32]) -> Vec<f64> {
    let mut w: Vec<f64> = surface.iter().map(|s| if s == "2t" { 1.0 } else { 0.1 }).collect();
    let total: f64 = levels.iter().map(|&p| p as f64).sum();
    for _ in 0..n_atmo {
        for &p in levels {
            w.push(p as f64 / total);
        }
    }
    w
}

/// The training objective as nested loops over batch, step, latitude,
/// longitude and channel. Tensors are [n_point, n_channel] row-major.
pub fn naive_loss(
    preds: &[Vec<Vec<f64>>],
    targets: &[Vec<Vec<f64>>],
    resolution_deg: f64,
    channel_w: &[f64],
    inv_var: &[f64],
) -> f64 {
    let a = band_area_weights(resolution_deg);
    let n_lon = (360.0 / resolution_deg).round() as usize;
    let n_lat = a.len() / n_lon;
    let c = channel_w.len();
    let mut total = 0.0;
    for (pb, tb) in preds.iter().zip(targets) {
        let steps = pb.len();
        for (p, t) in pb.iter().zip(tb) {
            for r in 0..n_lat {
                for l in 0..n_lon {
                    let i = r * n_lon + l;
                    for j in 0..c {
                        let e = p[i * c + j] - t[i * c + j];
                        total += a[i] * channel_w[j] * inv_var[j] * e * e / (steps * a.len()) as f64;
                    }
                }
            }
        }
    }
    total / preds.len() as f64
}

/// Max of |a − b| / max(1, |b|) over paired values.
pub fn max_scaled_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// Worst directional-derivative error of a `steps`-long rollout loss over
/// every parameter tensor, computed in f64 with random inputs and targets.
/// Each tensor is probed along one random unit direction; the tape
/// derivative is compared with a fourth-order central difference and the
/// error is relative to that tensor's gradient norm.
pub fn rollout_gradient_error(cfg: &ModelConfig, steps: usize, seed: u64) -> (String, f64) {
    let h = 1e-4;
    let geo = Geometry::build(cfg.resolution_deg, cfg.refinement).unwrap();
    let graph = Graph::from_geometry(&geo);
    let layout = &cfg.layout;
    let n = geo.n_grid();
    let p = layout.n_predicted();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_tensor = |rows: usize, cols: usize| {
        Tensor::from_vec(&[rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    };
    let input = StatePair {
        x_prev: rand_tensor(n, p),
        x_curr: rand_tensor(n, p),
        forcings: (0..steps + 2).map(|_| rand_tensor(n, layout.n_forcings)).collect(),
        constants: rand_tensor(n, layout.n_constants),
    };
    let targets: Vec<Tensor<f64>> = (0..steps).map(|_| rand_tensor(n, p)).collect();
    let inv_var: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..2.0)).collect();
    let weights = LossWeights::new(&geo.grid, layout, inv_var);
    let norm = ModelNorm::<f64>::identity(p);
    let params: GraphNetParams<f64> = GraphNetParams::<f32>::init(cfg, seed).cast();

    let eval = |params: &GraphNetParams<f64>, grads: bool| {
        let mut tape = Tape::new();
        let vars = params.record(&mut tape);
        let preds = rollout_on_tape(&mut tape, &vars, &graph, &norm, layout, &input, steps, None).unwrap();
        let l = loss_on_tape(&mut tape, &preds, &targets, &weights, 1).unwrap();
        let value = tape.value(l).data()[0];
        let g = grads.then(|| {
            let mut g = tape.backward(l);
            vars.vars().into_iter().zip(params.shapes()).map(|(v, s)| g.take(v, &s)).collect::<Vec<_>>()
        });
        (value, g)
    };
    let (_, grads) = eval(&params, true);
    let grads = grads.unwrap();
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut worst = (String::new(), 0.0);
    for (k, g) in grads.iter().enumerate() {
        let mut d: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm_d = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= norm_d);
        let analytic: f64 = g.data().iter().zip(&d).map(|(a, b)| a * b).sum();
        let shifted = |c: f64| {
            let mut q = params.clone();
            let t = &mut q.tensors_mut()[k];
            for (x, dx) in t.data_mut().iter_mut().zip(&d) {
                *x += c * dx;
            }
            eval(&q, false).0
        };
        let fd = (-shifted(2.0 * h) + 8.0 * shifted(h) - 8.0 * shifted(-h) + shifted(-2.0 * h)) / (12.0 * h);
        let scale = g.sum_sq().sqrt().max(1e-12);
        let err = (analytic - fd).abs() / scale;
        if err > worst.1 {
            worst = (names[k].clone(), err);
        }
    }
    worst
}

/// Tolerance of every naive-loop oracle comparison.
pub const ORACLE_TOL: f64 = 1e-6;

pub fn random_fields(rng: &mut ChaCha8Rng, dims: [usize; 4], scale: f32) -> ForecastArray {
    let n = dims.iter().product();
    ForecastArray::from_vec(dims, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Scaled deviations of RMSE and ACC from their loop oracles on one random
/// instance.
pub fn metric_case(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let res = [30.0, 45.0, 60.0, 90.0][rng.gen_range(0..4)];
    let grid = GridSpec::new(res).unwrap();
    let dims = [rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..3), grid.len()];
    let f = random_fields(rng, dims, 3.0);
    let t = random_fields(rng, dims, 3.0);
    let c = random_fields(rng, dims, 1.0);
    let w = PointWeights::global(&grid);
    let a = band_area_weights(res);
    let r = max_scaled_diff(&rmse(&f, &t, &w).unwrap().values, &naive_rmse(&f, &t, &a));
    let q = max_scaled_diff(&acc(&f, &t, &c, &w).unwrap().values, &naive_acc(&f, &t, &c, &a));
    (r, q)
}

/// Scaled deviation of the training objective from its loop oracle on one
/// random instance.
pub fn loss_case(rng: &mut ChaCha8Rng) -> f64 {
    const LEVELS: [u32; 6] = [50, 250, 500, 700, 850, 1000];
    let res = [15.0, 20.0, 30.0, 45.0][rng.gen_range(0..4)];
    let grid = GridSpec::new(res).unwrap();
    let levels = &LEVELS[..rng.gen_range(1..=LEVELS.len())];
    let layout = ChannelLayout::toy(levels);
    let c = layout.n_predicted();
    let inv_var: Vec<f64> = (0..c).map(|_| rng.gen_range(0.1..10.0)).collect();
    let (batch, steps) = (rng.gen_range(1..4), rng.gen_range(1..4));
    let mut draw = || -> Vec<Vec<Vec<f64>>> {
        (0..batch)
            .map(|_| (0..steps).map(|_| (0..grid.len() * c).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect())
            .collect()
    };
    let (p, t) = (draw(), draw());
    let tensors = |x: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<Tensor<f64>>> {
        x.iter()
            .map(|b| b.iter().map(|s| Tensor::from_vec(&[grid.len(), c], s.clone()).unwrap()).collect())
            .collect()
    };
    let w = LossWeights::new(&grid, &layout, inv_var.clone());
    let got = loss(&tensors(&p), &tensors(&t), &w).unwrap();
    let channel_w = layout_weights(&layout.surface, layout.n_atmo(), levels);
    max_scaled_diff(&[got], &[naive_loss(&p, &t, res, &channel_w, &inv_var)])
}

/// Per-slot mean of the frames whose year lies in `years`, in a 366-slot
/// calendar: 29 February has slot 59 and later dates of common years move
/// up by one. Returns the means and sample counts.
pub fn naive_climatology(
    frames: &[f32],
    frame_len: usize,
    time_at: impl Fn(usize) -> DateTime<Utc>,
    years: RangeInclusive<i32>,
) -> (Vec<f64>, Vec<u64>) {
    let mut mean = vec![0f64; 366 * frame_len];
    let mut count = vec![0u64; 366];
    for (k, frame) in frames.chunks_exact(frame_len).enumerate() {
        let t = time_at(k);
        if !years.contains(&t.year()) {
            continue;
        }
        let leap = chrono::NaiveDate::from_ymd_opt(t.year(), 2, 29).is_some();
        let d = if !leap && t.month() > 2 { t.ordinal() as usize } else { t.ordinal() as usize - 1 };
        count[d] += 1;
        for (m, &v) in mean[d * frame_len..(d + 1) * frame_len].iter_mut().zip(frame) {
            *m += (v as f64 - *m) / count[d] as f64;
        }
    }
    (mean, count)
}

/// Worst scaled deviation of a fitted climatology from the loop oracle on a
/// random coarse dataset starting in 2015, 2016 or 2017 and covering one
/// or two whole reference years. Slots without samples must be rejected.
pub fn climatology_case(rng: &mut ChaCha8Rng) -> f64 {
    let first = rng.gen_range(2015..=2017);
    let days = |y: i32| if chrono::NaiveDate::from_ymd_opt(y, 2, 29).is_some() { 366 } else { 365 };
    let two = rng.gen_bool(0.5);
    let last = if two { first + 1 } else { first };
    let n_steps = (first..=last).map(|y| 4 * days(y)).sum::<usize>() + rng.gen_range(0..40);
    let mut cfg = SyntheticConfig::new([45.0, 90.0][rng.gen_range(0..2)], rng.gen_range(1..3), n_steps, rng.gen());
    cfg.start = DateTime::parse_from_rfc3339(&format!("{first}-01-01T00:00:00Z")).unwrap().with_timezone(&Utc);
    let toy = toy_dataset_with(cfg);
    let view = year_view(&toy.reader, Split::Train, YearRange::new(first, last)).unwrap();
    let clim = climatology_fit(&view, YearRange::new(first, last)).unwrap();
    let info = toy.reader.manifest().array(FIELDS_ARRAY).unwrap().clone();
    let frame_len = info.channels.len() * info.dims[2] * info.dims[3];
    let frames = toy.reader.read_array(FIELDS_ARRAY).unwrap();
    let (mean, count) = naive_climatology(&frames, frame_len, |k| toy.config.time_at(k), first..=last);
    let mut worst = 0.0f64;
    for d in 0..366 {
        match (clim.day(d), count[d]) {
            (Err(_), 0) => {}
            (Ok(got), n) if n > 0 => worst = worst.max(max_scaled_diff(got, &mean[d * frame_len..(d + 1) * frame_len])),
            _ => return f64::INFINITY,
        }
    }
    worst
}
