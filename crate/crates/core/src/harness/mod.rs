//! Case-study orchestration and report emission.

mod report;

pub use report::{
    emit_report, histogram, summarize_operating_point, summarize_stability, AttackReport,
    BusVoltage, CampaignReport, EigenRow, Format, GeneratorDeviation, Histogram, LoadAttack,
    OperatingPointSummary, Report, StabilitySummary,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attack::{
    falsified_case, masked_scenarios, monte_carlo_campaign, synthesize_attack, trial_attack,
    AccessMask, AttackDistribution, CampaignConfig, SynthesisOptions, SynthesisResult,
};
use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;
use crate::smallsignal::{analyze_case, AnalysisOptions};

/// Process exit codes.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    /// Malformed case file, specification string or option.
    pub const PARSE: i32 = 3;
    pub const DIVERGED: i32 = 4;
    pub const INFEASIBLE: i32 = 5;
}

/// Exit code for a failed run.
pub fn error_exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Syntax { .. }
        | Error::Semantic { .. }
        | Error::SingularBranch { .. }
        | Error::InvalidSpec { .. }
        | Error::MissingLoad(_) => exit_code::PARSE,
        Error::PowerFlowDiverged { .. }
        | Error::SingularJacobian { .. }
        | Error::ZeroVoltage { .. } => exit_code::DIVERGED,
        Error::Infeasible { .. } => exit_code::INFEASIBLE,
        _ => exit_code::OTHER,
    }
}

/// Exit code for a completed run: nonzero only when synthesis failed.
pub fn report_exit_code(report: &Report) -> i32 {
    match &report.attack {
        Some(a) if !a.feasible => exit_code::INFEASIBLE,
        _ => exit_code::OK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseStudyId {
    C1,
    C2,
    C3,
    #[serde(rename = "C4.1")]
    C41,
    #[serde(rename = "C4.2")]
    C42,
    #[serde(rename = "C4.3")]
    C43,
}

impl CaseStudyId {
    pub const ALL: [CaseStudyId; 6] = [
        Self::C1,
        Self::C2,
        Self::C3,
        Self::C41,
        Self::C42,
        Self::C43,
    ];
}

impl fmt::Display for CaseStudyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C41 => "C4.1",
            Self::C42 => "C4.2",
            Self::C43 => "C4.3",
        })
    }
}

impl FromStr for CaseStudyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec {
                input: s.to_string(),
                message: "expected one of C1, C2, C3, C4.1, C4.2, C4.3".into(),
            })
    }
}

/// Every knob a run depends on. Echoed verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Case file; `None` selects the embedded WSCC 9-bus case.
    pub case: Option<PathBuf>,
    pub trials: u64,
    pub seed: u64,
    pub distribution: AttackDistribution,
    /// Mask specification; `None` means the case study's own mask.
    pub mask: Option<String>,
    pub jobs: usize,
    pub synthesis: SynthesisOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: None,
            trials: 7500,
            seed: 0,
            distribution: AttackDistribution::default(),
            mask: None,
            jobs: std::thread::available_parallelism()
                .map_or(1, |n| n.get())
                .max(4),
            synthesis: SynthesisOptions::default(),
        }
    }
}

impl RunConfig {
    /// Echo without fields that cannot change the outcome (worker counts).
    fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("jobs");
            if let Some(s) = obj.get_mut("synthesis").and_then(|s| s.as_object_mut()) {
                s.remove("jobs");
            }
        }
        v
    }
}

/// Reads the configured case file, or the embedded WSCC case.
pub fn load_case(cfg: &RunConfig) -> Result<NetworkCase> {
    match &cfg.case {
        None => Ok(NetworkCase::wscc9()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            NetworkCase::parse(&text)
                .map_err(|e| e.context(format!("case file {}", path.display())))
        }
    }
}

/// Power flow and small-signal analysis of the configured case.
pub fn analyze(cfg: &RunConfig) -> Result<Report> {
    let case = load_case(cfg)?;
    let analysis =
        analyze_case(&case, &AnalysisOptions::default()).map_err(|e| e.context("analysis"))?;
    Ok(Report::new("analyze", cfg.echo(), None, case.clone()).with_analysis(&case, &analysis))
}

fn attack_report(case: &NetworkCase, mask: &AccessMask, r: &SynthesisResult) -> AttackReport {
    let slack = case.slack_generator();
    let mut dp = r.deviation.dp_mw.iter();
    AttackReport {
        mask: mask.to_string(),
        feasible: r.feasible,
        objective: r.objective,
        spectral_abscissa: r.spectral_abscissa,
        loads: case
            .loads
            .iter()
            .zip(&r.attack.channels)
            .enumerate()
            .map(|(k, (l, &(dp, dq)))| LoadAttack {
                label: NetworkCase::load_label(k),
                bus: l.bus,
                dp_mw: dp,
                dq_mvar: dq,
            })
            .collect(),
        generators: case
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| GeneratorDeviation {
                bus: gen.bus,
                dp_mw: if g == slack {
                    0.0
                } else {
                    dp.next().copied().unwrap_or(0.0)
                },
                dv_pu: r.deviation.dv_pu.get(g).copied().unwrap_or(0.0),
            })
            .collect(),
        trace: r.trace.clone(),
    }
}

/// Minimal destabilizing attack under `mask`.
pub fn synthesize(cfg: &RunConfig, command: &str, mask: &AccessMask) -> Result<Report> {
    let case = load_case(cfg)?;
    let mut opts = cfg.synthesis.clone();
    opts.seed = cfg.seed;
    opts.jobs = cfg.jobs;
    let result = synthesize_attack(&case, mask, &opts)
        .map_err(|e| e.context(format!("{command} synthesis")))?;
    let mut report = Report::new(command, cfg.echo(), Some(cfg.seed), case.clone());
    if let Some(a) = &result.analysis {
        report = report.with_analysis(&falsified_case(&case, &result.attack, &result.deviation), a);
    }
    report.attacked_case = Some(falsified_case(&case, &result.attack, &result.deviation));
    report.attack = Some(attack_report(&case, mask, &result));
    Ok(report)
}

const HISTOGRAM_BINS: usize = 30;

/// Blind random campaign with per-channel histograms of every draw.
pub fn campaign(cfg: &RunConfig, command: &str, mask: &AccessMask) -> Result<Report> {
    let case = load_case(cfg)?;
    let ccfg = CampaignConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        distribution: cfg.distribution,
        mask: mask.clone(),
        jobs: cfg.jobs,
    };
    let stats =
        monte_carlo_campaign(&case, &ccfg).map_err(|e| e.context(format!("{command} campaign")))?;

    let ranges = cfg.distribution.ranges(&case);
    let draws: Vec<_> = (0..cfg.trials)
        .map(|k| trial_attack(cfg.seed, k, &ranges, mask))
        .collect();
    let mut histograms = Vec::new();
    for (k, r) in ranges.iter().enumerate() {
        let label = NetworkCase::load_label(k);
        let p: Vec<f64> = draws.iter().map(|a| a.channels[k].0).collect();
        let q: Vec<f64> = draws.iter().map(|a| a.channels[k].1).collect();
        histograms.push(histogram(
            format!("{label}.p"),
            &p,
            r.p.0,
            r.p.1,
            HISTOGRAM_BINS,
        ));
        histograms.push(histogram(
            format!("{label}.q"),
            &q,
            r.q.0,
            r.q.1,
            HISTOGRAM_BINS,
        ));
    }

    let mut report = Report::new(command, cfg.echo(), Some(cfg.seed), case.clone());
    let base =
        analyze_case(&case, &AnalysisOptions::default()).map_err(|e| e.context("base case"))?;
    report = report.with_analysis(&case, &base);
    report.campaign = Some(CampaignReport { stats, histograms });
    Ok(report)
}

fn resolve_mask(cfg: &RunConfig, case: &NetworkCase, default: AccessMask) -> Result<AccessMask> {
    match &cfg.mask {
        Some(spec) => AccessMask::parse(spec, case),
        None => Ok(default),
    }
}

/// Runs one of the paper's case studies.
pub fn run_case_study(id: CaseStudyId, cfg: &RunConfig) -> Result<Report> {
    let command = format!("casestudy {id}");
    let wrap = |e: Error| e.context(format!("case study {id}"));
    let case = load_case(cfg).map_err(wrap)?;
    let full = AccessMask::full(case.loads.len());
    match id {
        CaseStudyId::C1 => {
            let mut r = analyze(cfg).map_err(wrap)?;
            r.command = command;
            Ok(r)
        }
        CaseStudyId::C2 => {
            let mask = resolve_mask(cfg, &case, full).map_err(wrap)?;
            campaign(cfg, &command, &mask).map_err(wrap)
        }
        CaseStudyId::C3 => {
            let mask = resolve_mask(cfg, &case, full).map_err(wrap)?;
            synthesize(cfg, &command, &mask).map_err(wrap)
        }
        CaseStudyId::C41 | CaseStudyId::C42 | CaseStudyId::C43 => {
            let masks = masked_scenarios(&case).map_err(wrap)?;
            let default = match id {
                CaseStudyId::C41 => masks[0].clone(),
                CaseStudyId::C42 => masks[1].clone(),
                _ => masks[2].clone(),
            };
            let mask = resolve_mask(cfg, &case, default).map_err(wrap)?;
            synthesize(cfg, &command, &mask).map_err(wrap)
        }
    }
}
