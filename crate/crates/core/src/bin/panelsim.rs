use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use panelsim::config::SimConfig;
use panelsim::engine::{run, sweep};
use panelsim::geometry::{build_hex_layout, layout_csv};
use panelsim::radio::{grip_mask, mask_to_csv, rx_pattern_csv, tx_pattern_csv, Grip};
use panelsim::report::{panel_stay_csv, summary_csv, write_run};

#[derive(Parser)]
#[command(name = "panelsim", version, about = "Multi-panel UE mobility simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the Cartesian product of grips, offsets and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values = ["FREE", "RHB", "DHS", "DHG"])]
        grips: Vec<Grip>,
        #[arg(long = "op-db", value_delimiter = ',', default_values = ["0", "3", "6"])]
        op_db: Vec<f64>,
        #[arg(long = "ob-db", value_delimiter = ',', default_values = ["0", "3", "6"])]
        ob_db: Vec<f64>,
        /// Number of seeds, counted up from the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a grip mask or a beam pattern as CSV.
    ExportMask {
        #[arg(long, default_value = "FREE")]
        grip: Grip,
        #[arg(long, value_enum, default_value_t = Pattern::Mask)]
        pattern: Pattern,
        /// Zenith cut for beam patterns, degrees.
        #[arg(long, default_value_t = 90.0)]
        zenith: f64,
        /// Optional config supplying blockage levels and antenna settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the cell layout as CSV.
    ExportLayout {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Mask,
    Tx,
    Rx,
}

fn load(config: Option<&Path>) -> panelsim::Result<SimConfig> {
    match config {
        Some(p) => SimConfig::from_file(p),
        None => Ok(SimConfig::default()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> panelsim::Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> panelsim::Result<()> {
    match cli.cmd {
        Cmd::Run { config, seed, out } => {
            let mut cfg = SimConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            let res = run(&cfg)?;
            let files = write_run(&res, &out)?;
            print!("{}", summary_csv(std::slice::from_ref(&res.summary)));
            eprintln!("wrote {} files to {}", files.len(), out.display());
        }
        Cmd::Sweep {
            config,
            grips,
            op_db,
            ob_db,
            seeds,
            out,
            jobs,
        } => {
            let cfg = SimConfig::from_file(&config)?;
            let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.simulation.seed + k).collect();
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = sweep(&cfg, &grips, &op_db, &ob_db, &seed_list, jobs)?;
            std::fs::create_dir_all(&out)?;
            let summary = summary_csv(&rows);
            std::fs::write(out.join("summary.csv"), &summary)?;
            std::fs::write(out.join("panel_stay.csv"), panel_stay_csv(&rows))?;
            std::fs::write(out.join("manifest.toml"), panelsim::engine::sweep_manifest(&cfg, &grips, &op_db, &ob_db, &seed_list))?;
            print!("{summary}");
        }
        Cmd::ExportMask {
            grip,
            pattern,
            zenith,
            config,
            out,
        } => {
            let cfg = load(config.as_deref())?;
            let mask = grip_mask(grip, &cfg.radio.blockage);
            let text = match pattern {
                Pattern::Mask => mask_to_csv(&mask),
                Pattern::Tx => tx_pattern_csv(&cfg.radio.tx_grid, zenith),
                Pattern::Rx => rx_pattern_csv(&cfg.radio.panels, &mask, zenith),
            };
            emit(&text, out.as_deref())?;
        }
        Cmd::ExportLayout { config, out } => {
            let cfg = load(config.as_deref())?;
            let layout = build_hex_layout(cfg.geometry.isd_m)?;
            emit(&layout_csv(&layout), out.as_deref())?;
        }
    }
    Ok(())
}
