use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::calendar::local_time_fraction;
use super::manifest::format_time;
use super::{ArrayInfo, ChannelInfo, ChannelRole, Container, Manifest, TimeAxis, DIM_ORDER, FIELDS_ARRAY, STATIC_ARRAY};
use crate::geodesy::GridSpec;

const SOLAR_CONSTANT: f64 = 1361.0;
const TISR_ACCUMULATION: u64 = 3600;
const LEVEL_CHOICES: [u32; 8] = [1000, 850, 500, 250, 100, 50, 10, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub resolution_deg: f64,
    /// Pressure levels (hPa) of the atmospheric temperature channel.
    pub levels: Vec<u32>,
    pub n_steps: usize,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub step_seconds: i64,
    /// Spherical-harmonic band limit of the advected patterns.
    pub max_degree: usize,
    /// Multiplies every channel's angular velocity.
    pub rotation_scale: f64,
    /// Multiplies the diurnal term; at zero the sun is also held at its
    /// initial position so the radiation channel is constant.
    pub forcing_scale: f64,
}

impl SyntheticConfig {
    pub fn new(resolution_deg: f64, n_levels: usize, n_steps: usize, seed: u64) -> Self {
        let mut levels: Vec<u32> = LEVEL_CHOICES.iter().copied().cycle().take(n_levels).collect();
        levels.sort_unstable();
        levels.dedup();
        Self {
            resolution_deg,
            levels,
            n_steps,
            seed,
            start: DateTime::parse_from_rfc3339("2016-01-01T00:00:00Z").unwrap().with_timezone(&Utc),
            step_seconds: 21600,
            max_degree: 6,
            rotation_scale: 1.0,
            forcing_scale: 1.0,
        }
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.step_seconds * index as i64)
    }
}

/// Top-of-atmosphere incident solar energy (J/m²) accumulated over the
/// `accumulation_seconds` ending at `t`.
pub fn solar_irradiance(t: DateTime<Utc>, lat_deg: f64, lon_deg: f64, accumulation_seconds: u64) -> f64 {
    const SUBSTEPS: usize = 12;
    let dt = accumulation_seconds as f64 / SUBSTEPS as f64;
    let phi = lat_deg.to_radians();
    let mut total = 0.0;
    for k in 0..SUBSTEPS {
        let s = t - Duration::milliseconds(((k as f64 + 0.5) * dt * 1000.0) as i64);
        let doy = super::calendar::year_fraction(s) * 365.25;
        let decl = (-23.44f64).to_radians() * (2.0 * PI * (doy + 10.0) / 365.25).cos();
        let hour_angle = 2.0 * PI * (local_time_fraction(s, lon_deg) - 0.5);
        let cos_z = phi.sin() * decl.sin() + phi.cos() * decl.cos() * hour_angle.cos();
        total += SOLAR_CONSTANT * cos_z.max(0.0) * dt;
    }
    total
}

/// Band-limited real spherical-harmonic pattern, scaled to unit RMS on the
/// generating grid.
struct Pattern {
    max_degree: usize,
    /// (l, m, cos coefficient, sin coefficient)
    coeffs: Vec<(usize, usize, f64, f64)>,
}

/// Schmidt semi-normalized associated Legendre values P_l^m(x), indexed [l][m].
fn legendre(max_degree: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut p = vec![vec![0.0; max_degree + 1]; max_degree + 1];
    let mut pmm = 1.0;
    for m in 0..=max_degree {
        if m > 0 {
            pmm *= -((2 * m - 1) as f64) * s;
        }
        p[m][m] = pmm;
        if m < max_degree {
            p[m + 1][m] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in m + 2..=max_degree {
            p[l][m] = ((2 * l - 1) as f64 * x * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m]) / (l - m) as f64;
        }
    }
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    for (l, row) in p.iter_mut().enumerate() {
        for (m, v) in row.iter_mut().enumerate().take(l + 1) {
            let k = if m == 0 { 1.0 } else { 2.0 };
            *v *= (k * fact(l - m) / fact(l + m)).sqrt();
        }
    }
    p
}

impl Pattern {
    fn random(rng: &mut ChaCha8Rng, max_degree: usize) -> Self {
        let mut coeffs = Vec::new();
        for l in 1..=max_degree {
            let amp = 1.0 / (l as f64);
            for m in 0..=l {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = if m == 0 { 0.0 } else { rng.sample(StandardNormal) };
                coeffs.push((l, m, a * amp, b * amp));
            }
        }
        Self { max_degree, coeffs }
    }

    /// Evaluates the pattern for every grid point with longitudes shifted by
    /// `-shift_rad`.
    fn eval(&self, legendre_rows: &[Vec<Vec<f64>>], lons_rad: &[f64], shift_rad: f64, out: &mut [f64]) {
        let n_lon = lons_rad.len();
        let mut cs = vec![(0.0, 0.0); self.max_degree + 1];
        for (j, &lon) in lons_rad.iter().enumerate() {
            let th = lon - shift_rad;
            for (m, c) in cs.iter_mut().enumerate() {
                *c = ((m as f64 * th).cos(), (m as f64 * th).sin());
            }
            for (i, p) in legendre_rows.iter().enumerate() {
                let mut v = 0.0;
                for &(l, m, a, b) in &self.coeffs {
                    v += p[l][m] * (a * cs[m].0 + b * cs[m].1);
                }
                out[i * n_lon + j] = v;
            }
        }
    }
}

struct ChannelModel {
    pattern: Pattern,
    /// Angular velocity in radians per second.
    omega: f64,
    base: f64,
    amplitude: f64,
    /// Subtracted as gradient·sin²(lat).
    meridional: f64,
    diurnal: f64,
}

/// Deterministic toy atmosphere: advected random patterns plus a diurnal
/// cycle, an accumulated precipitation-like channel, and solar radiation.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Container, crate::geodesy::GeodesyError> {
    let grid = GridSpec::new(cfg.resolution_deg)?;
    let (n_lat, n_lon) = (grid.n_lat, grid.n_lon);
    let npts = n_lat * n_lon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dt = cfg.step_seconds as f64;
    let deg_per_step_to_rad_s = |d: f64| d.to_radians() / dt * cfg.rotation_scale;
    let omega = |rng: &mut ChaCha8Rng| {
        let mag: f64 = rng.gen_range(2.5..7.5);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        deg_per_step_to_rad_s(sign * mag)
    };

    let mut models = Vec::new();
    let mut channels = Vec::new();
    channels.push(ChannelInfo::new("2t", None, ChannelRole::PredictedInput));
    models.push(ChannelModel {
        pattern: Pattern::random(&mut rng, cfg.max_degree),
        omega: omega(&mut rng),
        base: 300.0,
        amplitude: 8.0,
        meridional: 40.0,
        diurnal: 4.0,
    });
    let mut tp = ChannelInfo::new("tp", None, ChannelRole::PredictedInput);
    tp.accumulation_seconds = Some(cfg.step_seconds as u64);
    channels.push(tp);
    let rain = Pattern::random(&mut rng, cfg.max_degree);
    let rain_omega = omega(&mut rng);
    for &p in &cfg.levels {
        channels.push(ChannelInfo::new("t", Some(p), ChannelRole::PredictedInput));
        let frac = p as f64 / 1000.0;
        models.push(ChannelModel {
            pattern: Pattern::random(&mut rng, cfg.max_degree),
            omega: omega(&mut rng),
            base: 210.0 + 80.0 * frac,
            amplitude: 3.0 + 4.0 * frac,
            meridional: 10.0 + 30.0 * frac,
            diurnal: 2.0 * frac,
        });
    }
    let mut tisr = ChannelInfo::new("tisr", None, ChannelRole::InputOnly);
    tisr.accumulation_seconds = Some(TISR_ACCUMULATION);
    channels.push(tisr);
    let statics = Pattern::random(&mut rng, cfg.max_degree);

    let lat_rad: Vec<f64> = grid.latitudes.iter().map(|l| l.to_radians()).collect();
    let lon_rad: Vec<f64> = grid.longitudes.iter().map(|l| l.to_radians()).collect();
    let leg: Vec<_> = lat_rad.iter().map(|p| legendre(cfg.max_degree, p.sin())).collect();

    // Scale every pattern to unit RMS at rest.
    let mut scratch = vec![0.0; npts];
    let mut rms = |p: &Pattern| {
        p.eval(&leg, &lon_rad, 0.0, &mut scratch);
        (scratch.iter().map(|v| v * v).sum::<f64>() / npts as f64).sqrt()
    };
    let norms: Vec<f64> = models.iter().map(|m| rms(&m.pattern)).collect();
    let rain_norm = rms(&rain);
    let static_norm = rms(&statics);

    let n_ch = channels.len();
    let n_pred = n_ch - 1;
    let frame_len = n_ch * npts;
    let mut fields = vec![0f32; cfg.n_steps * frame_len];
    fields.par_chunks_mut(frame_len).enumerate().for_each(|(k, frame)| {
        let t = k as f64 * dt;
        let now = cfg.time_at(k);
        let sun_time = if cfg.forcing_scale == 0.0 { cfg.start } else { now };
        let mut buf = vec![0.0; npts];
        let mut model_iter = models.iter().zip(&norms);
        for c in 0..n_pred {
            let out = &mut frame[c * npts..(c + 1) * npts];
            if c == 1 {
                let quarter = dt / 4.0;
                let mut acc = vec![0.0; npts];
                for q in 0..4 {
                    let s = t - q as f64 * quarter;
                    rain.eval(&leg, &lon_rad, rain_omega * s, &mut buf);
                    for (a, v) in acc.iter_mut().zip(&buf) {
                        *a += (v / rain_norm - 0.3).max(0.0) * quarter / 3600.0;
                    }
                }
                for (o, a) in out.iter_mut().zip(&acc) {
                    *o = *a as f32;
                }
                continue;
            }
            let (m, norm) = model_iter.next().unwrap();
            m.pattern.eval(&leg, &lon_rad, m.omega * t, &mut buf);
            for i in 0..n_lat {
                let (sl, cl) = lat_rad[i].sin_cos();
                for j in 0..n_lon {
                    let local = local_time_fraction(now, grid.longitudes[j]);
                    let diurnal = cfg.forcing_scale * m.diurnal * cl * (2.0 * PI * local).cos();
                    let v = m.base - m.meridional * sl * sl + m.amplitude * buf[i * n_lon + j] / norm + diurnal;
                    out[i * n_lon + j] = v as f32;
                }
            }
        }
        let out = &mut frame[n_pred * npts..];
        for i in 0..n_lat {
            for j in 0..n_lon {
                let v = solar_irradiance(sun_time, grid.latitudes[i], grid.longitudes[j], TISR_ACCUMULATION);
                out[i * n_lon + j] = v as f32;
            }
        }
    });

    statics.eval(&leg, &lon_rad, 0.0, &mut scratch);
    let mut static_values = vec![0f32; 2 * npts];
    for (k, v) in scratch.iter().enumerate() {
        let s = v / static_norm;
        static_values[k] = if s > 0.2 { 1.0 } else { 0.0 };
        static_values[npts + k] = (9.81 * 1500.0 * (s - 0.2).max(0.0)) as f32;
    }
    let static_channels = vec![
        ChannelInfo::new("lsm", None, ChannelRole::Static),
        ChannelInfo::new("z_sfc", None, ChannelRole::Static),
    ];

    let mut manifest = Manifest::new("dataset");
    manifest.grid_resolution_deg = Some(cfg.resolution_deg);
    manifest.dim_order = Some(DIM_ORDER.iter().map(|s| s.to_string()).collect());
    manifest.time = Some(TimeAxis {
        start: format_time(cfg.start),
        step_seconds: cfg.step_seconds,
        count: cfg.n_steps,
    });
    manifest.arrays = vec![
        ArrayInfo {
            name: FIELDS_ARRAY.into(),
            dims: vec![cfg.n_steps, n_ch, n_lat, n_lon],
            channels: channels.iter().map(|c| c.name.clone()).collect(),
        },
        ArrayInfo {
            name: STATIC_ARRAY.into(),
            dims: vec![1, 2, n_lat, n_lon],
            channels: static_channels.iter().map(|c| c.name.clone()).collect(),
        },
    ];
    manifest.channels = channels.into_iter().chain(static_channels).collect();
    manifest.attributes.insert("generator".into(), "synthetic".into());
    manifest.attributes.insert("seed".into(), cfg.seed.into());
    manifest.attributes.insert("max_degree".into(), cfg.max_degree.into());
    let arrays = BTreeMap::from([(FIELDS_ARRAY.to_string(), fields), (STATIC_ARRAY.to_string(), static_values)]);
    Ok(Container { manifest, arrays })
}
