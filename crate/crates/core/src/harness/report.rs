use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::attack::{CampaignStats, OuterRecord};
use crate::error::Result;
use crate::netmodel::NetworkCase;
use crate::smallsignal::Analysis;

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub bus: usize,
    pub v_mag_pu: f64,
    pub v_angle_deg: f64,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointSummary {
    pub iterations: usize,
    pub mismatch_pu: f64,
    pub slack_p_mw: f64,
    pub slack_q_mvar: f64,
    pub bounds_ok: bool,
    pub buses: Vec<BusVoltage>,
}

/// One mode. `re` and `im` carry the solver's values unchanged; the
/// `*_display` fields are the same numbers rounded to six decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub re_display: String,
    pub im_display: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub epsilon: f64,
    pub spectral_abscissa: f64,
    pub verdict: String,
    pub condition_estimate: f64,
    pub eigenvalues: Vec<EigenRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAttack {
    pub label: String,
    pub bus: usize,
    pub dp_mw: f64,
    pub dq_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDeviation {
    pub bus: usize,
    pub dp_mw: f64,
    pub dv_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mask: String,
    pub feasible: bool,
    pub objective: f64,
    /// Abscissa of the returned attack, or the best reached when infeasible.
    pub spectral_abscissa: f64,
    pub loads: Vec<LoadAttack>,
    pub generators: Vec<GeneratorDeviation>,
    pub trace: Vec<OuterRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub channel: String,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub stats: CampaignStats,
    pub histograms: Vec<Histogram>,
}

/// A self-contained run record: rerunning the tool with `config` reproduces
/// every byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub case: NetworkCase,
    /// The falsified case an attack produces; analyzing it replays the attack.
    pub attacked_case: Option<NetworkCase>,
    pub operating_point: Option<OperatingPointSummary>,
    pub stability: Option<StabilitySummary>,
    pub attack: Option<AttackReport>,
    pub campaign: Option<CampaignReport>,
}

impl Report {
    pub fn new(
        command: impl Into<String>,
        config: serde_json::Value,
        seed: Option<u64>,
        case: NetworkCase,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            config,
            seed,
            case,
            attacked_case: None,
            operating_point: None,
            stability: None,
            attack: None,
            campaign: None,
        }
    }

    pub fn with_analysis(mut self, case: &NetworkCase, analysis: &Analysis) -> Self {
        self.operating_point = Some(summarize_operating_point(case, analysis));
        self.stability = Some(summarize_stability(analysis));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(st) = &self.stability {
            out.push_str("# eigenvalues\nindex,re,im,verdict\n");
            for r in &st.eigenvalues {
                let _ = writeln!(out, "{},{},{},{}", r.index, r.re, r.im, r.verdict);
            }
        }
        if let Some(op) = &self.operating_point {
            out.push_str("\n# voltages\nbus,v_mag_pu,v_angle_deg,within_bounds\n");
            for b in &op.buses {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    b.bus, b.v_mag_pu, b.v_angle_deg, b.within_bounds
                );
            }
        }
        if let Some(at) = &self.attack {
            out.push_str("\n# load_attack\nlabel,bus,dp_mw,dq_mvar\n");
            for l in &at.loads {
                let _ = writeln!(out, "{},{},{},{}", l.label, l.bus, l.dp_mw, l.dq_mvar);
            }
            out.push_str("\n# setpoint_deviation\nbus,dp_mw,dv_pu\n");
            for g in &at.generators {
                let _ = writeln!(out, "{},{},{}", g.bus, g.dp_mw, g.dv_pu);
            }
        }
        if let Some(c) = &self.campaign {
            out.push_str("\n# campaign\ntrials,successes,stables,divergences,success_rate\n");
            let s = &c.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.trials, s.successes, s.stables, s.divergences, s.success_rate
            );
            out.push_str("\n# successful_attacks\ntrial,label,dp_mw,dq_mvar,spectral_abscissa\n");
            for t in &s.successful {
                for (k, (dp, dq)) in t.attack.channels.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        t.trial,
                        NetworkCase::load_label(k),
                        dp,
                        dq,
                        t.spectral_abscissa
                    );
                }
            }
            out.push_str("\n# histograms\nchannel,bin_lo,bin_hi,count\n");
            for h in &c.histograms {
                for (i, count) in h.counts.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        h.channel,
                        h.edges[i],
                        h.edges[i + 1],
                        count
                    );
                }
            }
        }
        out
    }
}

pub fn summarize_operating_point(case: &NetworkCase, a: &Analysis) -> OperatingPointSummary {
    OperatingPointSummary {
        iterations: a.op.iterations,
        mismatch_pu: a.op.mismatch,
        slack_p_mw: case.from_pu(a.op.slack_p),
        slack_q_mvar: case.from_pu(a.op.slack_q),
        bounds_ok: a.bounds_ok(),
        buses: a
            .bounds
            .iter()
            .zip(&a.op.v)
            .map(|(b, v)| BusVoltage {
                bus: b.bus,
                v_mag_pu: b.v_mag,
                v_angle_deg: v.arg().to_degrees(),
                within_bounds: b.ok,
            })
            .collect(),
    }
}

fn verdict(unstable: bool) -> String {
    if unstable { "unstable" } else { "stable" }.to_string()
}

pub fn summarize_stability(a: &Analysis) -> StabilitySummary {
    let epsilon = crate::smallsignal::ANALYSIS_EPSILON;
    StabilitySummary {
        epsilon,
        spectral_abscissa: a.eigen.spectral_abscissa,
        verdict: verdict(a.unstable),
        condition_estimate: a.linearized.state.condition,
        eigenvalues: a
            .eigen
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(index, l)| EigenRow {
                index,
                re: l.re,
                im: l.im,
                re_display: format!("{:.6}", l.re),
                im_display: format!("{:.6}", l.im),
                verdict: verdict(l.re > epsilon),
            })
            .collect(),
    }
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed.
pub fn histogram(
    channel: impl Into<String>,
    values: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
) -> Histogram {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &x in values {
        let i = if width > 0.0 {
            (((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize
        } else {
            0
        };
        counts[i] += 1;
    }
    Histogram {
        channel: channel.into(),
        edges,
        counts,
    }
}

/// Writes the report in `format` to `sink`.
pub fn emit_report(report: &Report, format: Format, sink: &mut dyn Write) -> Result<()> {
    let text = match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}
