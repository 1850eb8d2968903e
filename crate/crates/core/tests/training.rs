mod common;

use std::path::Path;
use std::sync::OnceLock;

use common::*;
use meshcast::datastore::{split, year_view, Container, Split, SyntheticConfig, YearRange};
use meshcast::geodesy::Geometry;
use meshcast::graphnet::{ChannelLayout, Graph, GraphNetParams, ModelConfig};
use meshcast::normstats::{fit_stats, NormStats};
use meshcast::training::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RES: f64 = 10.0;

struct Fixture {
    geo: Geometry,
    layout: ChannelLayout,
    stats: NormStats,
    train: SplitData,
    validation: SplitData,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let toy = toy_dataset(RES, 3, THREE_YEARS, 11);
        let s = split(&toy.reader, &three_year_split()).unwrap();
        let stats = fit_stats(&s.train).unwrap();
        let layout = ChannelLayout::toy(&toy.config.levels);
        Fixture {
            geo: Geometry::build(RES, 2).unwrap(),
            train: SplitData::load(&s.train, &stats, &layout).unwrap(),
            validation: SplitData::load(&s.validation, &stats, &layout).unwrap(),
            layout,
            stats,
        }
    })
}

fn model(f: &Fixture, latent: usize) -> ModelConfig {
    ModelConfig {
        resolution_deg: RES,
        refinement: 2,
        latent,
        processor_layers: 2,
        layout: f.layout.clone(),
    }
}

fn short_curriculum() -> Curriculum {
    Curriculum {
        phase1_steps: 2,
        phase2_steps: 3,
        phase3_steps: 2,
        t_max: 3,
        t_increment_every: 1,
        ..Curriculum::default()
    }
}

fn trainer(curriculum: Curriculum, latent: usize, seed: u64) -> Trainer {
    let f = fixture();
    let cfg = TrainConfig::new(model(f, latent), curriculum, seed);
    Trainer::new(cfg, Graph::from_geometry(&f.geo), &f.stats, &f.geo.grid).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn zero_learning_rate_leaves_parameters_bit_identical() {
    let f = fixture();
    let mut tr = trainer(Curriculum::default(), 16, 3);
    let before = tr.params.clone();
    for t in [1, 2] {
        let rec = tr.train_step(&f.train, 0.0, t).unwrap();
        assert!(rec.loss.is_finite() && rec.grad_norm > 0.0);
    }
    assert_eq!(tr.params, before);
    assert_eq!(tr.step, 2);
}

#[test]
fn runs_are_bit_reproducible_and_checkpoints_round_trip() {
    let f = fixture();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut logs = Vec::new();
    let mut trainers = Vec::new();
    for d in &dirs {
        let mut tr = trainer(short_curriculum(), 16, 5);
        let mut log = Vec::new();
        tr.run(&f.train, &mut log, Some(d.path())).unwrap();
        logs.push(log);
        trainers.push(tr);
    }
    assert_eq!(logs[0], logs[1]);
    let files = dir_bytes(dirs[0].path());
    assert_eq!(files, dir_bytes(dirs[1].path()));
    for phase in ["phase1", "phase2", "phase3"] {
        assert!(files.iter().any(|(n, _)| n.starts_with(phase)), "{phase} checkpoint missing");
    }

    let c = Container::read(&dirs[0].path().join("phase3")).unwrap();
    let (params, cfg) = GraphNetParams::<f32>::from_container(&c).unwrap();
    assert_eq!(params, trainers[0].params);
    assert_eq!(cfg, trainers[0].config.model);
    let stats: NormStats = serde_json::from_value(c.manifest.attributes["normalization"].clone()).unwrap();
    assert_eq!(stats, f.stats);
    assert_eq!(c.manifest.attributes["step"], serde_json::json!(short_curriculum().total_steps()));

    let mut other = trainer(short_curriculum(), 16, 6);
    other.run(&f.train, &mut Vec::new(), None).unwrap();
    assert_ne!(other.params, trainers[0].params);
}

#[test]
fn metrics_log_follows_the_schedule() {
    let f = fixture();
    let c = short_curriculum();
    let mut tr = trainer(c, 16, 2);
    let mut log = Vec::new();
    let records = tr.run(&f.train, &mut log, None).unwrap();
    let text = String::from_utf8(log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,lr,t_train,loss,grad_norm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), c.total_steps());
    for (k, (row, rec)) in rows.iter().zip(&records).enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0].parse::<usize>().unwrap(), k);
        let s = c.at(k);
        assert_eq!(fields[1].parse::<f64>().unwrap(), s.lr);
        assert_eq!(fields[2].parse::<usize>().unwrap(), s.t_train);
        assert_eq!(fields[3].parse::<f64>().unwrap(), rec.loss);
        assert!(fields[4].parse::<f64>().unwrap() > 0.0);
    }
    let ts: Vec<usize> = records.iter().map(|r| r.t_train).collect();
    assert_eq!(ts, vec![1, 1, 1, 1, 1, 2, 3]);
}

#[test]
fn non_finite_parameters_halt_training() {
    let f = fixture();
    let mut tr = trainer(short_curriculum(), 16, 1);
    tr.params.output.w1.data_mut()[0] = f32::NAN;
    match tr.train_step(&f.train, 1e-3, 1) {
        Err(TrainError::NonFiniteLoss { step: 0, loss }) => assert!(loss.is_nan()),
        other => panic!("expected a non-finite loss error, got {other:?}"),
    }
    assert_eq!(tr.step, 0);
    assert!(tr.params.output.w1.data()[0].is_nan());
    let mut log = Vec::new();
    assert!(matches!(tr.run(&f.train, &mut log, None), Err(TrainError::NonFiniteLoss { step: 0, .. })));
    assert_eq!(String::from_utf8(log).unwrap().lines().count(), 1);
}

#[test]
fn training_reads_only_the_training_years() {
    let cfg = SyntheticConfig::new(30.0, 2, THREE_YEARS, 4);
    let toy = toy_dataset_with(cfg);
    let s = split(&toy.reader, &three_year_split()).unwrap();
    let stats = fit_stats(&s.train).unwrap();
    let layout = ChannelLayout::toy(&toy.config.levels);
    let data = SplitData::load(&s.train, &stats, &layout).unwrap();
    let geo = Geometry::build(30.0, 3).unwrap();
    let model = ModelConfig {
        resolution_deg: 30.0,
        refinement: 3,
        latent: 8,
        processor_layers: 1,
        layout,
    };
    let mut tr = Trainer::new(TrainConfig::new(model, short_curriculum(), 0), Graph::from_geometry(&geo), &stats, &geo.grid).unwrap();
    tr.run(&data, &mut Vec::new(), None).unwrap();

    assert!(s.validation.accessed().is_empty());
    assert!(s.test.accessed().is_empty());
    let train = s.train.range();
    let log = toy.reader.access_log();
    assert!(!log.is_empty());
    for (array, r) in log {
        assert!(r.start >= train.start && r.end <= train.end, "{array} window {r:?} outside {train:?}");
    }
    for init in data.valid_inits(3) {
        assert!(init > train.start && init + 3 < train.end);
    }
    assert!(data.batch(&[train.end - 1], 1).is_err());
}

#[test]
fn two_step_rollout_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        resolution_deg: 30.0,
        refinement: 1,
        latent: 8,
        processor_layers: 1,
        layout: ChannelLayout::toy(&[500, 850, 1000]),
    };
    let (name, err) = rollout_gradient_error(&cfg, 2, 9);
    assert!(err < 1e-3, "{name}: relative error {err:e}");
}

#[test]
fn short_schedule_overfits_toy_data() {
    let toy = toy_dataset(RES, 3, 64, 11);
    let view = year_view(&toy.reader, Split::Train, YearRange::new(2016, 2016)).unwrap();
    let stats = fit_stats(&view).unwrap();
    let f = fixture();
    let data = SplitData::load(&view, &stats, &f.layout).unwrap();
    let c = Curriculum {
        phase1_steps: 10,
        phase2_steps: 290,
        phase3_steps: 110,
        t_increment_every: 10,
        ..Curriculum::default()
    };
    let cfg = TrainConfig::new(model(f, 32), c, 1);
    let mut tr = Trainer::new(cfg, Graph::from_geometry(&f.geo), &stats, &f.geo.grid).unwrap();
    let probe = data.batch(&data.valid_inits(1), 1).unwrap();
    let initial = tr.batch_gradients(&probe).unwrap().0;
    for k in 0..=c.phase_ends()[1] {
        let s = c.at(k);
        tr.train_step(&data, s.lr, s.t_train).unwrap();
    }
    let last = tr.batch_gradients(&probe).unwrap().0;
    assert!(last < 0.2 * initial, "loss {initial:.4} -> {last:.4}");
}

#[test]
fn unit_sweep_length_is_the_base_model() {
    let f = fixture();
    let mut tr = trainer(Curriculum::default(), 16, 8);
    for _ in 0..5 {
        tr.train_step(&f.train, 1e-3, 1).unwrap();
    }
    let before = tr.params.clone();
    let inits: Vec<usize> = f.validation.valid_inits(3).into_iter().step_by(200).collect();
    let cfg = SweepConfig {
        t_list: vec![1, 2],
        finetune_steps: 2,
        lr: 1e-4,
        horizon: 3,
    };
    let curves = ar_sweep(&tr, &f.train, &f.validation, &inits, &cfg).unwrap();
    assert_eq!(tr.params, before);
    assert_eq!(curves[0].t_train, 1);
    assert_eq!(curves[0].rmse, rmse_curve(&tr, &f.validation, &inits, 3).unwrap());
    assert_eq!(curves[1].t_train, 2);
    assert_ne!(curves[1].rmse, curves[0].rmse);
    assert!(curves.iter().all(|c| c.rmse.len() == 3 && c.rmse.iter().all(|v| v.is_finite() && *v > 0.0)));
}

#[test]
fn objective_matches_nested_loop_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..40 {
        let e = loss_case(&mut rng);
        assert!(e < ORACLE_TOL, "case {case}: {e:e}");
    }
}
