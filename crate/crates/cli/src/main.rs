use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use destab::attack::{AccessMask, AttackDistribution};
use destab::harness::{
    self, emit_report, error_exit_code, exit_code, load_case, report_exit_code, CaseStudyId,
    Format, Report, RunConfig,
};

/// Small-signal stability analysis and false-data-injection attack synthesis.
#[derive(Parser)]
#[command(name = "destab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power flow and eigenvalue analysis of a case.
    Analyze(Common),
    /// Random campaigns and optimized attacks.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Run one of the case studies C1, C2, C3, C4.1, C4.2, C4.3.
    Casestudy {
        id: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        campaign: CampaignArgs,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Blind uniform random attacks with fixed dispatch.
    Random {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Minimal destabilizing attack under an access mask.
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Case file (JSON). Defaults to the embedded WSCC 9-bus case.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Report destination. Defaults to a file in DESTAB_OUT_DIR when that
    /// is set, else standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for reports when --out is absent.
    #[arg(long, env = "DESTAB_OUT_DIR", hide_env_values = true)]
    out_dir: Option<PathBuf>,
    /// Access mask, e.g. `L1:pq,L3:pq` or `*:p`.
    #[arg(long)]
    mask: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0: one per core, at least four).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long, default_value_t = 7500)]
    trials: u64,
    /// `uniform:p=[lo,hi],q=[lo,hi]` (MW, MVAr) or `scaled:F`.
    #[arg(long, default_value = "scaled:2.5")]
    dist: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Required spectral abscissa (1/s).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
}

fn config(
    common: &Common,
    campaign: Option<&CampaignArgs>,
    synth: Option<&SynthArgs>,
) -> destab::Result<RunConfig> {
    let mut cfg = RunConfig {
        case: common.case.clone(),
        seed: common.seed,
        mask: common.mask.clone(),
        ..RunConfig::default()
    };
    if common.jobs > 0 {
        cfg.jobs = common.jobs;
    }
    if let Some(c) = campaign {
        cfg.trials = c.trials;
        cfg.distribution = AttackDistribution::parse(&c.dist)?;
    }
    if let Some(s) = synth {
        if let Some(e) = s.epsilon {
            cfg.synthesis.epsilon_unstable = e;
        }
        if let Some(n) = s.starts {
            cfg.synthesis.starts = n;
        }
    }
    Ok(cfg)
}

fn mask_for(cfg: &RunConfig) -> destab::Result<AccessMask> {
    let case = load_case(cfg)?;
    match &cfg.mask {
        Some(spec) => AccessMask::parse(spec, &case),
        None => Ok(AccessMask::full(case.loads.len())),
    }
}

fn run(cli: &Cli) -> destab::Result<(Report, &Common, String)> {
    Ok(match &cli.command {
        Command::Analyze(common) => {
            let cfg = config(common, None, None)?;
            (harness::analyze(&cfg)?, common, "analyze".into())
        }
        Command::Attack(AttackCommand::Random { common, campaign }) => {
            let cfg = config(common, Some(campaign), None)?;
            let mask = mask_for(&cfg)?;
            (
                harness::campaign(&cfg, "attack random", &mask)?,
                common,
                "attack-random".into(),
            )
        }
        Command::Attack(AttackCommand::Synth { common, synth }) => {
            let cfg = config(common, None, Some(synth))?;
            let mask = mask_for(&cfg)?;
            (
                harness::synthesize(&cfg, "attack synth", &mask)?,
                common,
                "attack-synth".into(),
            )
        }
        Command::Casestudy {
            id,
            common,
            campaign,
            synth,
        } => {
            let id: CaseStudyId = id.parse()?;
            let cfg = config(common, Some(campaign), Some(synth))?;
            (
                harness::run_case_study(id, &cfg)?,
                common,
                format!("casestudy-{id}"),
            )
        }
    })
}

fn write(report: &Report, common: &Common, stem: &str) -> anyhow::Result<()> {
    let (format, ext) = match common.format {
        FormatArg::Json => (Format::Json, "json"),
        FormatArg::Csv => (Format::Csv, "csv"),
    };
    let path = common.out.clone().or_else(|| {
        common
            .out_dir
            .as_ref()
            .map(|d| d.join(format!("{stem}.{ext}")))
    });
    match path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            let file =
                File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut sink = BufWriter::new(file);
            emit_report(report, format, &mut sink)?;
            eprintln!("report written to {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut sink = stdout.lock();
            emit_report(report, format, &mut sink)?;
            sink.flush()?;
        }
    }
    Ok(())
}

fn summary(report: &Report) -> String {
    let mut parts = vec![report.command.clone()];
    if let Some(st) = &report.stability {
        parts.push(format!(
            "{} (abscissa {:.6})",
            st.verdict, st.spectral_abscissa
        ));
    }
    if let Some(a) = &report.attack {
        parts.push(if a.feasible {
            format!("attack feasible, objective {:.6}", a.objective)
        } else {
            format!(
                "attack infeasible, best abscissa {:.6}",
                a.spectral_abscissa
            )
        });
    }
    if let Some(c) = &report.campaign {
        let s = &c.stats;
        parts.push(format!(
            "{} successes, {} stable, {} infeasible of {} trials",
            s.successes, s.stables, s.divergences, s.trials
        ));
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, common, stem)) => {
            if let Err(e) = write(&report, common, &stem) {
                eprintln!("error: {e:#}");
                return ExitCode::from(exit_code::OTHER as u8);
            }
            eprintln!("{}", summary(&report));
            ExitCode::from(report_exit_code(&report) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
