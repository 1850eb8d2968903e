use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{acc, rmse, EvalError, ForecastArray, MetricTable, PointWeights};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelKey {
    pub name: String,
    pub variable: String,
    pub level: Option<u32>,
}

/// Per-(channel, lead) RMSE and ACC with the metadata needed to compare
/// reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub channels: Vec<ChannelKey>,
    /// Lead times in units of `step_seconds`.
    pub lead_steps: Vec<usize>,
    pub step_seconds: u64,
    pub rmse: MetricTable,
    pub acc: Option<MetricTable>,
    pub inits: Vec<String>,
    pub split: String,
}

/// Everything about an evaluation except the metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub channels: Vec<ChannelKey>,
    pub step_seconds: u64,
    pub inits: Vec<String>,
    pub split: String,
}

/// RMSE and, when a climatology is supplied, ACC of `forecast` against
/// `truth` under the given spatial weights. Leads are 1..=n_lead steps.
pub fn evaluate(
    forecast: &ForecastArray,
    truth: &ForecastArray,
    clim: Option<&ForecastArray>,
    weights: &PointWeights,
    meta: ReportMeta,
) -> Result<EvalReport, EvalError> {
    if meta.channels.len() != forecast.n_channel {
        return Err(EvalError::Shape(format!(
            "{} channel names for {} forecast channels",
            meta.channels.len(),
            forecast.n_channel
        )));
    }
    Ok(EvalReport {
        lead_steps: (1..=forecast.n_lead).collect(),
        rmse: rmse(forecast, truth, weights)?,
        acc: clim.map(|c| acc(forecast, truth, c, weights)).transpose()?,
        channels: meta.channels,
        step_seconds: meta.step_seconds,
        inits: meta.inits,
        split: meta.split,
    })
}

pub const REPORT_HEADER: &str = "channel,variable,level,lead_step,lead_hours,rmse,acc";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    channel: String,
    variable: String,
    level: Option<u32>,
    lead_step: usize,
    lead_hours: f64,
    rmse: f64,
    acc: Option<f64>,
}

impl EvalReport {
    pub fn lead_hours(&self, lead: usize) -> f64 {
        (lead as u64 * self.step_seconds) as f64 / 3600.0
    }

    /// `#`-prefixed metadata lines followed by one CSV row per (channel, lead).
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# split={}\n# step_seconds={}\n# inits={}\n",
            self.split,
            self.step_seconds,
            self.inits.join(";")
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        for (j, ch) in self.channels.iter().enumerate() {
            for (k, &lead) in self.lead_steps.iter().enumerate() {
                w.serialize(Row {
                    channel: ch.name.clone(),
                    variable: ch.variable.clone(),
                    level: ch.level,
                    lead_step: lead,
                    lead_hours: self.lead_hours(lead),
                    rmse: self.rmse.get(j, k),
                    acc: self.acc.as_ref().map(|a| a.get(j, k)),
                })
                .unwrap();
            }
        }
        if self.channels.is_empty() {
            out.push_str(REPORT_HEADER);
            out.push('\n');
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut split = String::new();
        let mut step_seconds = None;
        let mut inits = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let (k, v) = line[1..]
                .trim()
                .split_once('=')
                .ok_or_else(|| EvalError::Format(format!("bad metadata line {line:?}")))?;
            match k {
                "split" => split = v.to_string(),
                "step_seconds" => step_seconds = v.parse().ok(),
                "inits" => inits = v.split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
                _ => {}
            }
        }
        let step_seconds = step_seconds.ok_or_else(|| EvalError::Format("report lacks step_seconds".into()))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| EvalError::Format(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>().join(",") != REPORT_HEADER {
            return Err(EvalError::Format(format!("unexpected report header {header:?}")));
        }
        let rows: Vec<Row> = r
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| EvalError::Format(e.to_string()))?;
        let mut channels: Vec<ChannelKey> = Vec::new();
        let mut lead_steps: Vec<usize> = Vec::new();
        for row in &rows {
            if !channels.iter().any(|c| c.name == row.channel) {
                channels.push(ChannelKey {
                    name: row.channel.clone(),
                    variable: row.variable.clone(),
                    level: row.level,
                });
            }
            if !lead_steps.contains(&row.lead_step) {
                lead_steps.push(row.lead_step);
            }
        }
        let (nc, nl) = (channels.len(), lead_steps.len());
        if rows.len() != nc * nl {
            return Err(EvalError::Format(format!("{} rows for {nc} channels × {nl} leads", rows.len())));
        }
        let mut rmse = vec![f64::NAN; nc * nl];
        let mut accv = vec![None; nc * nl];
        for row in &rows {
            let j = channels.iter().position(|c| c.name == row.channel).unwrap();
            let k = lead_steps.iter().position(|&l| l == row.lead_step).unwrap();
            rmse[j * nl + k] = row.rmse;
            accv[j * nl + k] = row.acc;
        }
        let acc = if accv.iter().all(Option::is_some) && !accv.is_empty() {
            Some(MetricTable {
                n_channel: nc,
                n_lead: nl,
                values: accv.into_iter().map(Option::unwrap).collect(),
            })
        } else {
            None
        };
        Ok(Self {
            channels,
            lead_steps,
            step_seconds,
            rmse: MetricTable {
                n_channel: nc,
                n_lead: nl,
                values: rmse,
            },
            acc,
            inits,
            split,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_csv()).map_err(|e| EvalError::Io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(path.display().to_string(), e))?;
        Self::from_csv(&text)
    }
}
