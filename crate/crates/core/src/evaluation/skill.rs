use std::fmt::Write as _;

use super::{EvalError, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Rmse,
    Acc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Acc => "acc",
        }
    }
}

/// Skill of model A relative to baseline B at one (channel, lead). `None`
/// marks an undefined score.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillCell {
    pub variable: String,
    pub level: Option<u32>,
    pub lead_step: usize,
    pub rmse: Option<f64>,
    pub acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillScores {
    pub step_seconds: u64,
    pub lead_steps: Vec<usize>,
    pub cells: Vec<SkillCell>,
    /// Share of defined cells where A beats B; ties are not wins.
    pub rmse_win_fraction: Option<f64>,
    pub acc_win_fraction: Option<f64>,
}

impl SkillScores {
    pub fn score(&self, metric: Metric, cell: &SkillCell) -> Option<f64> {
        match metric {
            Metric::Rmse => cell.rmse,
            Metric::Acc => cell.acc,
        }
    }
}

fn win_fraction(scores: impl Iterator<Item = Option<f64>>, wins: impl Fn(f64) -> bool) -> Option<f64> {
    let defined: Vec<f64> = scores.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().filter(|&&s| wins(s)).count() as f64 / defined.len() as f64)
}

/// RMSE score (A−B)/B and ACC score (A−B)/(1−B) per cell.
pub fn skill_scores(a: &EvalReport, b: &EvalReport) -> Result<SkillScores, EvalError> {
    if a.channels != b.channels || a.lead_steps != b.lead_steps || a.step_seconds != b.step_seconds {
        return Err(EvalError::Coverage(
            "reports differ in channels, lead times or step duration".into(),
        ));
    }
    let with_acc = a.acc.is_some() && b.acc.is_some();
    let mut cells = Vec::new();
    for (j, ch) in a.channels.iter().enumerate() {
        for (k, &lead) in a.lead_steps.iter().enumerate() {
            let (ra, rb) = (a.rmse.get(j, k), b.rmse.get(j, k));
            let rmse = (rb != 0.0).then(|| (ra - rb) / rb);
            let acc = if with_acc {
                let (xa, xb) = (a.acc.as_ref().unwrap().get(j, k), b.acc.as_ref().unwrap().get(j, k));
                (xb != 1.0).then(|| (xa - xb) / (1.0 - xb))
            } else {
                None
            };
            cells.push(SkillCell {
                variable: ch.variable.clone(),
                level: ch.level,
                lead_step: lead,
                rmse,
                acc,
            });
        }
    }
    Ok(SkillScores {
        step_seconds: a.step_seconds,
        lead_steps: a.lead_steps.clone(),
        rmse_win_fraction: win_fraction(cells.iter().map(|c| c.rmse), |s| s < 0.0),
        acc_win_fraction: if with_acc {
            win_fraction(cells.iter().map(|c| c.acc), |s| s > 0.0)
        } else {
            None
        },
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorecardCell {
    pub raw: Option<f64>,
    /// Raw value clipped to [−1, 1].
    pub clipped: Option<f64>,
    /// Set where clipping changed the value.
    pub overlay: bool,
}

impl ScorecardCell {
    fn new(raw: Option<f64>) -> Self {
        let clipped = raw.map(|v| v.clamp(-1.0, 1.0));
        Self {
            raw,
            clipped,
            overlay: raw != clipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorecardRow {
    pub metric: Metric,
    pub variable: String,
    pub level: Option<u32>,
    pub cells: Vec<ScorecardCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scorecard {
    pub step_seconds: u64,
    pub lead_steps: Vec<usize>,
    pub rows: Vec<ScorecardRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: Metric,
    pub lead_step: usize,
    pub lead_hours: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub count: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn level_str(l: Option<u32>) -> String {
    l.map_or_else(String::new, |l| l.to_string())
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// One row per (metric, variable, level) with one cell per lead time. ACC
/// rows appear only when the scores include ACC.
pub fn scorecard(scores: &SkillScores) -> Scorecard {
    let mut rows = Vec::new();
    let metrics: &[Metric] = if scores.acc_win_fraction.is_some() || scores.cells.iter().any(|c| c.acc.is_some()) {
        &[Metric::Rmse, Metric::Acc]
    } else {
        &[Metric::Rmse]
    };
    for &metric in metrics {
        for chunk in scores.cells.chunks(scores.lead_steps.len().max(1)) {
            rows.push(ScorecardRow {
                metric,
                variable: chunk[0].variable.clone(),
                level: chunk[0].level,
                cells: chunk.iter().map(|c| ScorecardCell::new(scores.score(metric, c))).collect(),
            });
        }
    }
    Scorecard {
        step_seconds: scores.step_seconds,
        lead_steps: scores.lead_steps.clone(),
        rows,
    }
}

impl Scorecard {
    pub fn header(&self) -> String {
        let mut h = String::from("metric,variable,level");
        for l in &self.lead_steps {
            write!(h, ",raw_{l},clipped_{l}").unwrap();
        }
        h
    }

    /// Header `metric,variable,level,raw_<L>,clipped_<L>,...` over lead
    /// steps L; undefined cells read `undefined`.
    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{},{}", r.metric.name(), r.variable, level_str(r.level)).unwrap();
            for c in &r.cells {
                write!(out, ",{},{}", fmt_opt(c.raw), fmt_opt(c.clipped)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Long format for plotting: one line per cell.
    pub fn plot_data_csv(&self) -> String {
        let mut out = String::from("metric,variable,level,lead_step,lead_hours,raw,color,overlay\n");
        for r in &self.rows {
            for (c, &l) in r.cells.iter().zip(&self.lead_steps) {
                writeln!(
                    out,
                    "{},{},{},{l},{},{},{},{}",
                    r.metric.name(),
                    r.variable,
                    level_str(r.level),
                    self.lead_hours(l),
                    fmt_opt(c.raw),
                    fmt_opt(c.clipped),
                    u8::from(c.overlay)
                )
                .unwrap();
            }
        }
        out
    }

    pub fn lead_hours(&self, lead: usize) -> f64 {
        (lead as u64 * self.step_seconds) as f64 / 3600.0
    }

    /// Mean and median of the defined raw scores per (metric, lead).
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        let mut metrics: Vec<Metric> = self.rows.iter().map(|r| r.metric).collect();
        metrics.dedup();
        for m in metrics {
            for (k, &l) in self.lead_steps.iter().enumerate() {
                let mut v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.metric == m)
                    .filter_map(|r| r.cells[k].raw)
                    .collect();
                let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
                out.push(SummaryRow {
                    metric: m,
                    lead_step: l,
                    lead_hours: self.lead_hours(l),
                    mean,
                    median: median(&mut v),
                    count: v.len(),
                });
            }
        }
        out
    }

    /// Summary rows at lead times of whole `days`, where those leads exist.
    pub fn summary_at_days(&self, days: &[u64]) -> Vec<SummaryRow> {
        let leads: Vec<usize> = days
            .iter()
            .filter(|&&d| (d * 86_400) % self.step_seconds == 0)
            .map(|&d| (d * 86_400 / self.step_seconds) as usize)
            .collect();
        self.summary().into_iter().filter(|r| leads.contains(&r.lead_step)).collect()
    }

    pub fn summary_csv(rows: &[SummaryRow]) -> String {
        let mut out = String::from("metric,lead_step,lead_hours,mean,median,count\n");
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.metric.name(),
                r.lead_step,
                r.lead_hours,
                fmt_opt(r.mean),
                fmt_opt(r.median),
                r.count
            )
            .unwrap();
        }
        out
    }
}
