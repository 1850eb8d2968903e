mod common;

use common::{band_area_weights, layout_weights};
use meshcast::diffcore::Tensor;
use meshcast::geodesy::GridSpec;
use meshcast::graphnet::ChannelLayout;
use meshcast::training::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIVISORS: [f64; 10] = [2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 45.0, 90.0];
const LEVELS: [u32; 8] = [1, 10, 50, 250, 500, 700, 850, 1000];

fn trajectories(rng: &mut ChaCha8Rng, batch: usize, steps: usize, rows: usize, cols: usize) -> Vec<Vec<Tensor<f64>>> {
    (0..batch)
        .map(|_| {
            (0..steps)
                .map(|_| Tensor::from_vec(&[rows, cols], (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap())
                .collect()
        })
        .collect()
}

fn permute_rows(t: &Tensor<f64>, perm: &[usize]) -> Tensor<f64> {
    let c = t.cols();
    let data = perm.iter().flat_map(|&i| t.row(i).to_vec()).collect();
    Tensor::from_vec(&[t.rows(), c], data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_invariant_under_batch_and_point_permutation(seed in any::<u64>(), batch in 1usize..4, steps in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(45.0).unwrap();
        let layout = ChannelLayout::toy(&LEVELS[..rng.gen_range(1..4)]);
        let c = layout.n_predicted();
        let inv_var: Vec<f64> = (0..c).map(|_| rng.gen_range(0.1..5.0)).collect();
        let w = LossWeights::new(&grid, &layout, inv_var);
        let p = trajectories(&mut rng, batch, steps, grid.len(), c);
        let t = trajectories(&mut rng, batch, steps, grid.len(), c);
        let base = loss(&p, &t, &w).unwrap();

        let mut order: Vec<usize> = (0..batch).collect();
        order.shuffle(&mut rng);
        let pick = |x: &Vec<Vec<Tensor<f64>>>| order.iter().map(|&b| x[b].clone()).collect::<Vec<_>>();
        let reordered = loss(&pick(&p), &pick(&t), &w).unwrap();
        prop_assert!((reordered - base).abs() <= 1e-12 * base);

        let mut perm: Vec<usize> = (0..grid.len()).collect();
        perm.shuffle(&mut rng);
        let shuffle = |x: &Vec<Vec<Tensor<f64>>>| {
            x.iter().map(|b| b.iter().map(|s| permute_rows(s, &perm)).collect()).collect::<Vec<_>>()
        };
        let mut wp = w.clone();
        wp.area = perm.iter().map(|&i| w.area[i]).collect();
        let shuffled = loss(&shuffle(&p), &shuffle(&t), &wp).unwrap();
        prop_assert!((shuffled - base).abs() <= 1e-12 * base);
    }

    #[test]
    fn curriculum_is_contiguous_and_monotone(p1 in 1usize..40, p2 in 1usize..80, p3 in 0usize..60, every in 1usize..10, t_max in 2usize..14) {
        let c = Curriculum { phase1_steps: p1, phase2_steps: p2, phase3_steps: p3, t_max, t_increment_every: every, ..Curriculum::default() };
        let ends = c.phase_ends();
        prop_assert_eq!(ends[0] + 1, p1);
        prop_assert_eq!(ends[1] + 1, p1 + p2);
        prop_assert_eq!(ends[2] + 1, c.total_steps());
        let sched: Vec<ScheduleStep> = (0..c.total_steps()).map(|k| c.at(k)).collect();
        for (k, s) in sched.iter().enumerate() {
            let want = if k < p1 { Phase::Warmup } else if k < p1 + p2 { Phase::Decay } else { Phase::Rollout };
            prop_assert_eq!(s.phase, want);
            prop_assert!(s.lr > 0.0 || s.phase == Phase::Decay);
            prop_assert!(s.lr <= c.peak_lr * (1.0 + 1e-12));
            prop_assert!(s.t_train >= 1 && s.t_train <= t_max);
            if s.phase == Phase::Rollout {
                prop_assert_eq!(s.lr, c.phase3_lr);
                prop_assert!(s.t_train >= c.t_start.min(t_max));
            } else {
                prop_assert_eq!(s.t_train, 1);
            }
        }
        prop_assert_eq!(sched[p1 - 1].lr, c.peak_lr);
        prop_assert_eq!(sched[p1].lr, c.peak_lr);
        for w in sched.windows(2) {
            prop_assert!(w[1].t_train >= w[0].t_train);
            match (w[0].phase, w[1].phase) {
                (Phase::Warmup, Phase::Warmup) => prop_assert!(w[1].lr > w[0].lr),
                (Phase::Decay, Phase::Decay) => prop_assert!(w[1].lr <= w[0].lr),
                _ => {}
            }
        }
    }

    #[test]
    fn area_weights_have_unit_mean_and_match_band_areas(ri in 0usize..DIVISORS.len()) {
        let grid = GridSpec::new(DIVISORS[ri]).unwrap();
        let lat = latitude_weights(&grid);
        prop_assert!(lat.iter().all(|&w| w > 0.0));
        for (a, b) in lat.iter().zip(lat.iter().rev()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let w = point_weights(&grid);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12);
        let oracle = band_area_weights(DIVISORS[ri]);
        for (a, b) in w.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn channel_weights_total_one_per_atmospheric_variable(mask in 1u8.., n_surface in 0usize..4, n_atmo in 0usize..4) {
        let levels: Vec<u32> = LEVELS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &p)| p).collect();
        let surface: Vec<&str> = ["2t", "msl", "10u", "tp"][..n_surface].to_vec();
        let atmo: Vec<&str> = ["z", "q", "t", "u"][..n_atmo].to_vec();
        let layout = ChannelLayout::new(&surface, &atmo, &levels);
        let lw = level_weights(&levels);
        prop_assert!((lw.iter().sum::<f64>() / lw.len() as f64 - 1.0).abs() < 1e-12);
        let w = channel_weights(&layout);
        let want = layout_weights(&layout.surface, n_atmo, &levels);
        prop_assert_eq!(w.len(), want.len());
        for (a, b) in w.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let surface_total: f64 = surface.iter().map(|s| surface_weight(s)).sum();
        prop_assert!((w.iter().sum::<f64>() - surface_total - n_atmo as f64).abs() < 1e-12);
    }
}
