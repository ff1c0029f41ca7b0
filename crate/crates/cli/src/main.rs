use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparse_doa::config::ExperimentConfig;
use sparse_doa::experiments::{run_overloaded_demo, run_sweep, run_sweep_with_threads};
use sparse_doa::plot::{pseudospectrum_plot, render_plot, rmse_plot};
use sparse_doa::results::write_results;
use sparse_doa::{
    difference_coarray, is_perfect, ArrayGeometry, ElementPattern, Error, PatternKind,
};

#[derive(Parser)]
#[command(
    name = "sparse-doa",
    version,
    about = "Direction finding with sparse arrays of directive elements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results.csv and rmse.svg.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a single realization and write its pseudospectrum and estimates.
    Demo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print positions, aperture and difference coarray of a geometry.
    Geometry {
        /// `ula<N>`, `mra<N>` or a position list such as `0,1,4,6`.
        #[arg(long)]
        name: String,
    },
    /// Export a built-in element pattern as a table.
    Pattern {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        export: PathBuf,
        /// Table spacing in degrees.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Sweep {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
                cfg.validate()?;
            }
            create_dir(&out)?;
            let result = match threads {
                Some(k) => run_sweep_with_threads(&cfg, k)?,
                None => run_sweep(&cfg)?,
            };
            let csv = out.join("results.csv");
            write_results(&result, &csv)?;
            let x_label = match cfg.scenario.family {
                sparse_doa::config::ScenarioFamily::SymmetricPair => "Source half-angle (deg)",
                _ => "Element-level isotropic SNR (dB)",
            };
            let label = cfg.geometry()?.name().to_string();
            let spec = rmse_plot("RMSE", x_label, &[(label.as_str(), &result)]);
            render_plot(&spec, &out.join("rmse.svg"))?;
            for p in &result.points {
                println!("{},{},{},{}", p.param, p.rmse_deg, p.trials, p.fill_count);
            }
            println!("wrote {}", csv.display());
        }
        Command::Demo { config, out } => {
            let cfg = load_config(&config)?;
            create_dir(&out)?;
            let demo = run_overloaded_demo(&cfg)?;
            let label = cfg.geometry()?.name().to_string();
            let spec =
                pseudospectrum_plot("MUSIC pseudospectrum", &[(label.as_str(), &demo.spectrum)]);
            render_plot(&spec, &out.join("pseudospectrum.svg"))?;

            let mut text = String::from("azimuth_deg,normalized_db\n");
            for (az, db) in demo.spectrum.grid.iter().zip(demo.spectrum.normalized_db()) {
                text.push_str(&format!("{az},{db}\n"));
            }
            let path = out.join("pseudospectrum.csv");
            std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;

            let mut truth = demo.truth.clone();
            truth.sort_by(f64::total_cmp);
            let mut text = format!("# seed={}\nestimate_deg,filled,truth_deg\n", cfg.run.seed);
            for ((est, filled), t) in demo
                .estimates
                .angles
                .iter()
                .zip(&demo.estimates.filled)
                .zip(&truth)
            {
                text.push_str(&format!("{est},{filled},{t}\n"));
                println!(
                    "{est:9.3} (true {t:7.2}){}",
                    if *filled { " fill-in" } else { "" }
                );
            }
            let path = out.join("estimates.csv");
            std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
        }
        Command::Geometry { name } => {
            let g = ArrayGeometry::from_name(&name)?;
            let c = difference_coarray(&g);
            println!("name: {}", g.name());
            println!("positions: {:?}", g.positions());
            println!("elements: {}", g.element_count());
            println!("aperture: {} (half wavelengths)", g.aperture());
            let weights: Vec<String> = c
                .weights()
                .iter()
                .map(|(m, w)| format!("{m}:{w}"))
                .collect();
            println!("coarray weights: {}", weights.join(" "));
            println!("holes: {:?}", c.holes(g.aperture() as i64));
            println!("perfect: {}", is_perfect(&g));
        }
        Command::Pattern { kind, export, step } => {
            let kind = PatternKind::parse(&kind)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown pattern kind `{kind}`")))?;
            let table = ElementPattern::builtin(kind)?.to_table(step)?;
            table.write(&export)?;
            println!(
                "wrote {} ({} rows)",
                export.display(),
                table.samples().len()
            );
        }
    }
    Ok(())
}
