use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Timelike, Utc};
use log::info;

use meshcast::datastore::{
    format_time, generate_synthetic, split, write_container, year_view, ArrayInfo, Container, ContainerReader,
    Manifest, Split, SyntheticConfig, TimeAxis, DIM_ORDER, FIELDS_ARRAY, STATIC_ARRAY,
};
use meshcast::evaluation::{
    climatology_fit, evaluate, scorecard, skill_scores, ChannelKey, Climatology, EvalReport, ForecastArray, LatLonBox,
    PointWeights, ReportMeta,
};
use meshcast::geodesy::{build_multimesh, Geometry, GridSpec, MESH_TABLE};
use meshcast::graphnet::{predict_step, ChannelLayout, Graph, GraphNetParams, InputBuilder, ModelConfig, ModelNorm, StatePair};
use meshcast::normstats::{fit_stats, NormStats};
use meshcast::training::{SplitData, TrainConfig, Trainer};

use crate::config::{parse_years, RunConfig};
use crate::failure::Failure;
use crate::Command;

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::MeshStats { refinement, csv } => mesh_stats(refinement, csv.as_deref()),
        Command::BuildEdges { grid, refinement, out } => {
            let g = Geometry::build(grid, refinement)?;
            info!("{} grid nodes, {} mesh nodes, {} grid2mesh and {} mesh2grid edges", g.n_grid(), g.n_mesh(), g.grid2mesh.len(), g.mesh2grid.len());
            write_container(&out, &g.to_container())?;
            Ok(())
        }
        Command::GenData { grid, levels, steps, seed, start, out } => gen_data(grid, levels, steps, seed, &start, &out),
        Command::Train { config, data, out, seed, schedule_scale, refinement, latent, processor_layers, batch_size } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            cfg.data = data.or(cfg.data);
            cfg.out = out.or(cfg.out);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.schedule_scale = schedule_scale.unwrap_or(cfg.schedule_scale);
            cfg.refinement = refinement.unwrap_or(cfg.refinement);
            cfg.latent = latent.unwrap_or(cfg.latent);
            cfg.processor_layers = processor_layers.unwrap_or(cfg.processor_layers);
            cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
            train(&cfg)
        }
        Command::Forecast { checkpoint, data, steps, init, inits_in, out } => {
            forecast(&checkpoint, &data, steps, init.as_deref(), inits_in.as_deref(), &out)
        }
        Command::Climatology { data, years, out } => {
            let years = parse_years(&years)?;
            let reader = ContainerReader::open(&data)?;
            let view = year_view(&reader, Split::Train, years)?;
            let clim = climatology_fit(&view, years)?;
            write_container(&out, &clim.to_container(reader.manifest())?)?;
            Ok(())
        }
        Command::Evaluate { forecasts, truth, clim, region, label, out } => {
            let report = evaluate_dirs(&forecasts, &truth, clim.as_deref(), region.as_deref(), label)?;
            report.write(&out)?;
            Ok(())
        }
        Command::Scorecard { a, b, out } => scorecard_cmd(&a, &b, &out),
    }
}

fn group(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn mesh_stats(refinement: usize, csv_path: Option<&Path>) -> Result<(), Failure> {
    let mesh = build_multimesh(refinement);
    let per_level = mesh.edges_per_level();
    let mut rows = Vec::new();
    let mut cumulative = 0;
    for (r, (&(nodes, faces), &edges)) in mesh.level_sizes.iter().zip(&per_level).enumerate() {
        cumulative += edges;
        rows.push((r, nodes, faces, edges, cumulative));
    }
    let mut mismatches = Vec::new();
    println!("{:>5} {:>10} {:>10} {:>10} {:>17}  check", "level", "nodes", "faces", "edges", "multilevel_edges");
    for &(r, n, f, e, m) in &rows {
        let check = match MESH_TABLE.get(r) {
            Some(&expect) if expect == (n, f, e, m) => "ok",
            Some(&expect) => {
                mismatches.push(format!("level {r}: expected {expect:?}, built {:?}", (n, f, e, m)));
                "MISMATCH"
            }
            None => "-",
        };
        println!("{r:>5} {:>10} {:>10} {:>10} {:>17}  {check}", group(n), group(f), group(e), group(m));
    }
    let mut csv = String::from("level,nodes,faces,edges,multilevel_edges\n");
    for &(r, n, f, e, m) in &rows {
        csv.push_str(&format!("{r},{n},{f},{e},{m}\n"));
    }
    println!();
    print!("{csv}");
    if let Some(p) = csv_path {
        fs::write(p, &csv).map_err(Failure::io(p.display()))?;
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("{m}");
        }
        Err(Failure::Validation(format!("{} level(s) differ from the reference table", mismatches.len())))
    }
}

fn gen_data(grid: f64, levels: usize, steps: usize, seed: u64, start: &str, out: &Path) -> Result<(), Failure> {
    if steps < 2 {
        return Err(Failure::Validation(format!("--steps must be at least 2, got {steps}")));
    }
    if levels == 0 || levels > 8 {
        return Err(Failure::Validation(format!("--levels must be in 1..=8, got {levels}")));
    }
    GridSpec::new(grid)?;
    let mut cfg = SyntheticConfig::new(grid, levels, steps, seed);
    cfg.start = DateTime::parse_from_rfc3339(start)
        .map_err(|e| Failure::Validation(format!("--start {start:?}: {e}")))?
        .with_timezone(&Utc);
    let c = generate_synthetic(&cfg)?;
    write_container(out, &c)?;
    info!("wrote {steps} frames to {}", out.display());
    Ok(())
}

fn grid_of(m: &Manifest) -> Result<GridSpec, Failure> {
    let res = m
        .grid_resolution_deg
        .ok_or_else(|| Failure::Validation("container has no grid resolution".into()))?;
    Ok(GridSpec::new(res)?)
}

fn required(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    p.clone()
        .ok_or_else(|| Failure::Validation(format!("--{what} is required (flag or config)")))
}

fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let reader = ContainerReader::open(&data)?;
    let manifest = reader.manifest();
    cfg.validate(manifest)?;
    let spec = cfg.split_spec(manifest)?;
    let layout = ChannelLayout::from_manifest(manifest)?;
    let grid = grid_of(manifest)?;
    let model = ModelConfig {
        resolution_deg: grid.resolution_deg,
        refinement: cfg.refinement,
        latent: cfg.latent,
        processor_layers: cfg.processor_layers,
        layout: layout.clone(),
    };
    let views = split(&reader, &spec)?;
    let stats = fit_stats(&views.train)?;
    let train_data = SplitData::load(&views.train, &stats, &layout)?;
    let geo = Geometry::build(grid.resolution_deg, cfg.refinement)?;
    let mut tc = TrainConfig::new(model, cfg.curriculum(), cfg.seed);
    tc.batch_size = cfg.batch_size;
    let mut trainer = Trainer::new(tc, Graph::from_geometry(&geo), &stats, &geo.grid)?;
    fs::create_dir_all(&out).map_err(Failure::io(out.display()))?;
    fs::write(out.join("config.json"), cfg.to_text()).map_err(Failure::io("config.json"))?;
    let log_path = out.join("metrics.csv");
    let mut log = BufWriter::new(File::create(&log_path).map_err(Failure::io(log_path.display()))?);
    let started = Instant::now();
    trainer.run(&train_data, &mut log, Some(&out))?;
    log.flush().map_err(Failure::io(log_path.display()))?;
    info!("{} steps in {:.1?}", trainer.step, started.elapsed());
    Ok(())
}

/// Parameters, model config and normalization statistics of a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(GraphNetParams<f32>, ModelConfig, NormStats), Failure> {
    let c = Container::read(path)?;
    let (params, cfg) = GraphNetParams::from_container(&c)?;
    let stats: NormStats = c
        .manifest
        .attributes
        .get("normalization")
        .cloned()
        .ok_or_else(|| Failure::Validation("checkpoint has no normalization statistics".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Failure::Validation(e.to_string())))?;
    Ok((params, cfg, stats))
}

fn forecast(
    checkpoint: &Path,
    data: &Path,
    steps: usize,
    init: Option<&str>,
    inits_in: Option<&str>,
    out: &Path,
) -> Result<(), Failure> {
    if steps == 0 {
        return Err(Failure::Validation("--steps must be positive".into()));
    }
    let (params, cfg, stats) = load_checkpoint(checkpoint)?;
    let reader = ContainerReader::open(data)?;
    let manifest = reader.manifest();
    let layout = ChannelLayout::from_manifest(manifest)?;
    if layout != cfg.layout || manifest.grid_resolution_deg != Some(cfg.resolution_deg) {
        return Err(Failure::Validation(format!(
            "checkpoint expects {:?} on a {}° grid, dataset provides {:?} on {:?}",
            cfg.layout.channel_names(),
            cfg.resolution_deg,
            layout.channel_names(),
            manifest.grid_resolution_deg
        )));
    }
    let statics = reader.read_array(STATIC_ARRAY)?;
    let builder = InputBuilder::new(manifest, &statics, &stats, &layout)?;
    let norm = ModelNorm::from_stats(&stats, &layout)?;
    let axis = builder.time.clone();
    let inits: Vec<usize> = match (init, inits_in) {
        (Some(s), None) => {
            let t = DateTime::parse_from_rfc3339(s)
                .map_err(|e| Failure::Validation(format!("--init {s:?}: {e}")))?
                .with_timezone(&Utc);
            vec![time_index(&axis, t)?]
        }
        (None, Some(y)) => {
            let years = parse_years(y)?;
            let mut v = Vec::new();
            for t in 1..axis.count {
                let time = axis.time_at(t)?;
                use chrono::Datelike;
                if (years.first..=years.last).contains(&time.year())
                    && time.minute() == 0
                    && time.second() == 0
                    && time.hour() % 12 == 0
                    && t + steps < axis.count
                {
                    v.push(t);
                }
            }
            v
        }
        _ => return Err(Failure::Validation("give exactly one of --init or --inits-in".into())),
    };
    if inits.is_empty() {
        return Err(Failure::Validation("no initialization times with a full horizon in the dataset".into()));
    }
    let geo = Geometry::build(cfg.resolution_deg, cfg.refinement)?;
    let graph = Graph::from_geometry(&geo);
    let many = init.is_none();
    for &t in &inits {
        if t == 0 || t + steps >= axis.count {
            return Err(Failure::Validation(format!(
                "init index {t} with {steps} steps does not fit the dataset time axis"
            )));
        }
        let range = t - 1..t + steps + 1;
        let frames = reader.read_window(FIELDS_ARRAY, range.clone())?;
        let window = SplitData::from_frames(builder.clone(), frames, range)?;
        let input = builder.pair(window.window(t, steps)?, t - 1, steps)?;
        let states = timed_rollout(&params, &graph, &norm, &layout, &input, steps)?;
        let c = forecast_container(&builder, manifest, &states, axis.time_at(t)?, &axis)?;
        let dest = if many {
            out.join(axis.time_at(t)?.format("%Y%m%dT%H").to_string())
        } else {
            out.to_path_buf()
        };
        write_container(&dest, &c)?;
    }
    info!("wrote {} forecast(s)", inits.len());
    Ok(())
}

fn time_index(axis: &TimeAxis, t: DateTime<Utc>) -> Result<usize, Failure> {
    let start = axis.start_time()?;
    let secs = (t - start).num_seconds();
    if secs < 0 || secs % axis.step_seconds != 0 || (secs / axis.step_seconds) as usize >= axis.count {
        return Err(Failure::Validation(format!("{} is not on the dataset time axis", format_time(t))));
    }
    Ok((secs / axis.step_seconds) as usize)
}

/// Step-by-step rollout that logs the wall-clock time of every step.
fn timed_rollout(
    params: &GraphNetParams<f32>,
    graph: &Graph,
    norm: &ModelNorm<f32>,
    layout: &ChannelLayout,
    input: &StatePair<f32>,
    steps: usize,
) -> Result<Vec<meshcast::diffcore::Tensor<f32>>, Failure> {
    let mut out = Vec::with_capacity(steps);
    let (mut prev, mut curr) = (input.x_prev.clone(), input.x_curr.clone());
    for k in 0..steps {
        let started = Instant::now();
        let pair = StatePair {
            x_prev: prev,
            x_curr: curr.clone(),
            forcings: input.forcings[k..k + 3].to_vec(),
            constants: input.constants.clone(),
        };
        let next = predict_step(params, graph, norm, layout, &pair).map_err(|e| match e {
            meshcast::graphnet::GraphNetError::NonFinite { channel, .. } => Failure::Numerical(format!(
                "non-finite prediction in channel {} at step {}",
                layout.channel_names()[channel],
                k + 1
            )),
            e => e.into(),
        })?;
        info!("step {} in {:.1?}", k + 1, started.elapsed());
        out.push(next.clone());
        prev = curr;
        curr = next;
    }
    Ok(out)
}

fn forecast_container(
    builder: &InputBuilder,
    data: &Manifest,
    states: &[meshcast::diffcore::Tensor<f32>],
    init: DateTime<Utc>,
    axis: &TimeAxis,
) -> Result<Container, Failure> {
    let names = builder.layout.channel_names();
    let mut m = Manifest::new("forecast");
    m.grid_resolution_deg = Some(builder.grid.resolution_deg);
    m.dim_order = Some(DIM_ORDER.iter().map(|s| s.to_string()).collect());
    m.time = Some(TimeAxis {
        start: format_time(init + chrono::Duration::seconds(axis.step_seconds)),
        step_seconds: axis.step_seconds,
        count: states.len(),
    });
    m.channels = names.iter().filter_map(|n| data.channel(n).cloned()).collect();
    m.arrays.push(ArrayInfo {
        name: FIELDS_ARRAY.into(),
        dims: vec![states.len(), names.len(), builder.grid.n_lat, builder.grid.n_lon],
        channels: names,
    });
    m.attributes.insert("init".into(), serde_json::json!(format_time(init)));
    let values: Vec<f32> = states.iter().flat_map(|s| builder.unstate(s)).collect();
    let mut arrays = std::collections::BTreeMap::new();
    arrays.insert(FIELDS_ARRAY.to_string(), values);
    Ok(Container { manifest: m, arrays })
}

fn forecast_dirs(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.join("manifest.json").is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(Failure::io(path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Validation(format!("no forecast containers under {}", path.display())));
    }
    Ok(dirs)
}

fn parse_box(s: &str) -> Result<LatLonBox, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Validation(format!("--region expects four numbers, got {s:?}")))?;
    let [lat_min, lat_max, lon_min, lon_max] = v[..] else {
        return Err(Failure::Validation(format!("--region expects four numbers, got {s:?}")));
    };
    Ok(LatLonBox { lat_min, lat_max, lon_min, lon_max })
}

fn evaluate_dirs(
    forecasts: &Path,
    truth: &Path,
    clim: Option<&Path>,
    region: Option<&str>,
    label: String,
) -> Result<EvalReport, Failure> {
    let truth_reader = ContainerReader::open(truth)?;
    let tm = truth_reader.manifest();
    let grid = grid_of(tm)?;
    let truth_axis = tm
        .time
        .clone()
        .ok_or_else(|| Failure::Validation("truth has no time axis".into()))?;
    let truth_fields = tm
        .array(FIELDS_ARRAY)
        .ok_or_else(|| Failure::Validation("truth has no fields array".into()))?
        .channels
        .clone();
    let dirs = forecast_dirs(forecasts)?;
    let np = grid.len();
    let mut names: Option<Vec<String>> = None;
    let mut n_lead = 0;
    let (mut fvals, mut tvals, mut valid, mut inits) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for d in &dirs {
        let r = ContainerReader::open(d)?;
        let m = r.manifest();
        if m.grid_resolution_deg != Some(grid.resolution_deg) {
            return Err(Failure::Validation(format!("{} is on a different grid", d.display())));
        }
        let info = m
            .array(FIELDS_ARRAY)
            .ok_or_else(|| Failure::Validation(format!("{} has no fields array", d.display())))?;
        let axis = m
            .time
            .clone()
            .ok_or_else(|| Failure::Validation(format!("{} has no time axis", d.display())))?;
        match &names {
            None => {
                names = Some(info.channels.clone());
                n_lead = axis.count;
            }
            Some(n) if *n != info.channels || n_lead != axis.count => {
                return Err(Failure::Validation(format!("{} differs in channels or length", d.display())));
            }
            _ => {}
        }
        if axis.step_seconds != truth_axis.step_seconds {
            return Err(Failure::Validation(format!("{} has a different step length", d.display())));
        }
        let first = time_index(&truth_axis, axis.start_time()?)?;
        if first + axis.count > truth_axis.count {
            return Err(Failure::Validation(format!("{} runs past the end of the truth", d.display())));
        }
        fvals.extend(r.read_array(FIELDS_ARRAY)?);
        let frames = truth_reader.read_window(FIELDS_ARRAY, first..first + axis.count)?;
        let fl = truth_fields.len() * np;
        for k in 0..axis.count {
            for name in &info.channels {
                let c = truth_fields
                    .iter()
                    .position(|x| x == name)
                    .ok_or_else(|| Failure::Validation(format!("truth lacks channel {name}")))?;
                tvals.extend_from_slice(&frames[k * fl + c * np..k * fl + (c + 1) * np]);
            }
        }
        valid.push((0..axis.count).map(|k| axis.time_at(k)).collect::<Result<Vec<_>, _>>()?);
        let init = m
            .attributes
            .get("init")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| axis.start.clone());
        inits.push(init);
    }
    let names = names.unwrap();
    let dims = [dirs.len(), n_lead, names.len(), np];
    let f = ForecastArray::from_vec(dims, fvals)?;
    let t = ForecastArray::from_vec(dims, tvals)?;
    let c = match clim {
        Some(p) => {
            let clim = Climatology::from_container(&Container::read(p)?)?;
            let idx = names
                .iter()
                .map(|n| clim.channel_index(n).ok_or_else(|| Failure::Validation(format!("climatology lacks {n}"))))
                .collect::<Result<Vec<_>, _>>()?;
            Some(clim.at_times(&valid, &idx)?)
        }
        None => None,
    };
    let channels = names
        .iter()
        .map(|n| {
            let info = tm.channel(n).ok_or_else(|| Failure::Validation(format!("truth lacks channel {n}")))?;
            Ok(ChannelKey { name: n.clone(), variable: info.variable.clone(), level: info.level })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let meta = ReportMeta { channels, step_seconds: truth_axis.step_seconds as u64, inits, split: label };
    let weights = match region {
        Some(s) => PointWeights::region(&grid, &parse_box(s)?)?,
        None => PointWeights::global(&grid),
    };
    Ok(evaluate(&f, &t, c.as_ref(), &weights, meta)?)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("scorecard");
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn scorecard_cmd(a: &Path, b: &Path, out: &Path) -> Result<(), Failure> {
    let (ra, rb) = (EvalReport::read(a)?, EvalReport::read(b)?);
    let scores = skill_scores(&ra, &rb)?;
    let card = scorecard(&scores);
    let write = |p: &Path, text: String| fs::write(p, text).map_err(Failure::io(p.display()));
    write(out, card.to_csv())?;
    write(&sibling(out, "plot"), card.plot_data_csv())?;
    write(&sibling(out, "summary"), meshcast::evaluation::Scorecard::summary_csv(&card.summary()))?;
    write(
        &sibling(out, "days"),
        meshcast::evaluation::Scorecard::summary_csv(&card.summary_at_days(&[1, 3, 5])),
    )?;
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
    println!("rmse win fraction: {}", fmt(scores.rmse_win_fraction));
    println!("acc win fraction: {}", fmt(scores.acc_win_fraction));
    Ok(())
}
