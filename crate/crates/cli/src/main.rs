use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use idd_core::harness::{
    complexity_report, consistency_test, measure_exit, pda_convergence_probe, report, run_ber_experiment,
    ExperimentConfig, HarnessError,
};
use idd_core::idd::DetectorKind;

#[derive(Parser, Debug)]
#[command(
    name = "idd-sim",
    version,
    about = "Monte-Carlo experiments for PDA and MAP based MIMO IDD receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    fields: Fields,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// BER/FER per Eb/N0 point and outer iteration; writes ber.csv.
    Ber,
    /// Detector EXIT characteristic over the I_A grid; writes exit.csv.
    Exit {
        /// Comma-separated detectors to measure.
        #[arg(long, default_value = "ab-log-pda,exact-log-map", value_delimiter = ',')]
        detectors: Vec<DetectorKind>,
    },
    /// Binned LLR consistency of the configured detector; writes consistency.csv.
    Consistency {
        /// A-priori mutual information fed to the detector.
        #[arg(long, default_value_t = 0.0)]
        apriori_mi: f64,
    },
    /// Uncoded PDA inner-iteration probe; writes probe.csv.
    PdaProbe,
    /// Counted vs analytic operations; writes complexity.csv.
    Complexity {
        /// `N:M` pairs with N_t = N_r = N.
        #[arg(long, default_value = "2:4,2:16,4:4,4:16", value_delimiter = ',')]
        grid: Vec<String>,
    },
}

/// Every configuration key as a flag; flags override `--config`.
#[derive(Args, Debug, Default)]
struct Fields {
    /// Flat `key=value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    nt: Option<String>,
    #[arg(long, global = true)]
    nr: Option<String>,
    #[arg(long, global = true)]
    modulation: Option<String>,
    #[arg(long, global = true)]
    order: Option<String>,
    /// Nakagami fading parameter.
    #[arg(long = "m", global = true)]
    m: Option<String>,
    #[arg(long, global = true)]
    omega: Option<String>,
    /// Channel-estimation accuracy.
    #[arg(long, global = true)]
    rho: Option<String>,
    #[arg(long, global = true)]
    fading: Option<String>,
    /// Comma-separated Eb/N0 list in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    ebn0: Option<String>,
    #[arg(long = "it-o", global = true)]
    it_o: Option<String>,
    #[arg(long = "it-i", global = true)]
    it_i: Option<String>,
    #[arg(long = "it-tc", global = true)]
    it_tc: Option<String>,
    #[arg(long, global = true)]
    info_len: Option<String>,
    #[arg(long, global = true)]
    decoder_log_sum: Option<String>,
    #[arg(long, global = true)]
    detector: Option<String>,
    #[arg(long, global = true)]
    schedule: Option<String>,
    #[arg(long, global = true)]
    pda_rule: Option<String>,
    #[arg(long, global = true)]
    pda_log_sum: Option<String>,
    #[arg(long, global = true)]
    downdate: Option<String>,
    #[arg(long, global = true)]
    min_frame_errors: Option<String>,
    #[arg(long, global = true)]
    max_frames: Option<String>,
    #[arg(long, global = true)]
    batch: Option<String>,
    /// Comma-separated I_A grid.
    #[arg(long, global = true)]
    ia: Option<String>,
    #[arg(long, global = true)]
    uses: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
}

impl Fields {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
            ("nt", &self.nt),
            ("nr", &self.nr),
            ("modulation", &self.modulation),
            ("order", &self.order),
            ("m", &self.m),
            ("omega", &self.omega),
            ("rho", &self.rho),
            ("fading", &self.fading),
            ("ebn0", &self.ebn0),
            ("it_o", &self.it_o),
            ("it_i", &self.it_i),
            ("it_tc", &self.it_tc),
            ("info_len", &self.info_len),
            ("decoder_log_sum", &self.decoder_log_sum),
            ("detector", &self.detector),
            ("schedule", &self.schedule),
            ("pda_rule", &self.pda_rule),
            ("pda_log_sum", &self.pda_log_sum),
            ("downdate", &self.downdate),
            ("min_frame_errors", &self.min_frame_errors),
            ("max_frames", &self.max_frames),
            ("batch", &self.batch),
            ("ia", &self.ia),
            ("uses", &self.uses),
            ("epsilon", &self.epsilon),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_grid(items: &[String]) -> Result<Vec<(usize, usize)>, HarnessError> {
    items
        .iter()
        .map(|s| {
            let bad = || HarnessError::Config(format!("grid entry `{s}` is not N:M"));
            let (n, m) = s.split_once(':').ok_or_else(bad)?;
            Ok((
                n.trim().parse().map_err(|_| bad())?,
                m.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn run(cli: Cli, cfg: ExperimentConfig) -> Result<()> {
    match cli.command {
        Command::Ber => {
            let rep = run_ber_experiment(&cfg)?;
            for p in &rep.points {
                let iters: Vec<String> = p.iterations.iter().map(|c| format!("{:.3e}", c.ber())).collect();
                println!(
                    "Eb/N0 {:>5.2} dB  frames {:>6}  frame errors {:>4}  ({})  BER per it_o: {}",
                    p.ebn0_db,
                    p.frames,
                    p.frame_errors(),
                    p.stop,
                    iters.join(" ")
                );
            }
            let path = report::write_file(&cfg.out, "ber.csv", &report::ber_csv(&rep))?;
            println!("wrote {}", path.display());
        }
        Command::Exit { detectors } => {
            let mut points = Vec::new();
            for d in detectors {
                let pts = measure_exit(&cfg, d)?;
                for p in &pts {
                    println!(
                        "{:<14} Eb/N0 {:>5.2} dB  I_A {:.3}  I_E {:.4}",
                        p.detector, p.ebn0_db, p.ia, p.ie
                    );
                }
                points.extend(pts);
            }
            let path = report::write_file(&cfg.out, "exit.csv", &report::exit_csv(&cfg, &points))?;
            println!("wrote {}", path.display());
        }
        Command::Consistency { apriori_mi } => {
            let rep = consistency_test(&cfg, cfg.detector, apriori_mi)?;
            println!(
                "{} it_i={}: slope {:.4} [{:.4}, {:.4}]  intercept {:.4} [{:.4}, {:.4}]  ({} LLRs)",
                cfg.detector,
                cfg.inner_iterations,
                rep.slope,
                rep.slope_ci.0,
                rep.slope_ci.1,
                rep.intercept,
                rep.intercept_ci.0,
                rep.intercept_ci.1,
                rep.samples
            );
            let path = report::write_file(&cfg.out, "consistency.csv", &report::consistency_csv(&cfg, &rep))?;
            println!("wrote {}", path.display());
        }
        Command::PdaProbe => {
            let rep = pda_convergence_probe(&cfg)?;
            for r in &rep.rows {
                match r.mean_abs_delta {
                    None => println!("it_i {}  BER {:.4e}  ΔP undefined", r.it_i, r.ber()),
                    Some(d) => println!(
                        "it_i {}  BER {:.4e}  mean |ΔP| {:.2e}  ΔP>0 {}  ΔP<0 {}  |ΔP|<ε {}",
                        r.it_i,
                        r.ber(),
                        d,
                        r.positive,
                        r.negative,
                        r.below_epsilon
                    ),
                }
            }
            println!(
                "symbols with sign changes in ΔP: {:.2}%",
                100.0 * rep.fluctuating_fraction
            );
            let path = report::write_file(&cfg.out, "probe.csv", &report::probe_csv(&cfg, &rep))?;
            println!("wrote {}", path.display());
        }
        Command::Complexity { grid } => {
            let rows = complexity_report(&parse_grid(&grid)?, cfg.pda_config(), cfg.seed)?;
            for r in &rows {
                println!(
                    "{}x{} M={:<3} {:<14} counted {:>9}  analytic {:>9}  ratio {:.2}",
                    r.n_t,
                    r.n_r,
                    r.order,
                    r.detector,
                    r.counted_ops,
                    r.analytic_ops,
                    r.ratio()
                );
            }
            let path = report::write_file(&cfg.out, "complexity.csv", &report::complexity_csv(&cfg, &rows))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.fields.config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli, cfg).context("experiment failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "idd-sim", "ber", "--nt", "4", "--nr", "4", "--ebn0", "-1,0.5", "--it-o", "5",
        ])
        .unwrap();
        let cfg = cli.fields.config().unwrap();
        assert_eq!((cfg.n_t, cfg.n_r, cfg.outer_iterations), (4, 4, 5));
        assert_eq!(cfg.ebn0_db, vec![-1.0, 0.5]);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cli = Cli::try_parse_from(["idd-sim", "ber", "--rho", "2"]).unwrap();
        assert!(matches!(cli.fields.config(), Err(HarnessError::Config(_))));
        let cli = Cli::try_parse_from(["idd-sim", "ber", "--set", "nonsense"]).unwrap();
        assert!(cli.fields.config().is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid(&["2:4".into(), " 4 : 16".into()]).unwrap(),
            vec![(2, 4), (4, 16)]
        );
        assert!(parse_grid(&["2x4".into()]).is_err());
    }
}
