use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use kdeconv::config::ScenarioConfig;
use kdeconv::estimator::{admissibility_warnings, Sample};
use kdeconv::report::{emit_report, read_sample, write_sample};
use kdeconv::selftest::run_selftest;
use kdeconv::study::{
    band_for_sample, generate_sample, run_coverage_study, run_efficiency_study, run_rate_study, sup_seed,
    StudyContext, StudyReport,
};
use kdeconv::{Error, Result};

#[derive(Parser)]
#[command(name = "kdeconv", version, about = "Deconvolution estimates of linear functionals with uniform bands")]
struct Cli {
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "kdeconv-out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one sample Y = X + ε from the scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Estimate the functional curve from data (or a simulated sample).
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// One-column sample file.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Estimate with a simultaneous confidence band.
    Band {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Monte Carlo coverage of the uniform band.
    Coverage {
        #[arg(long)]
        config: PathBuf,
    },
    /// RMSE against sample size at t*.
    Rate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated sample sizes; defaults to `n_list` in the config.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    /// Variance of the estimate at t* against the efficiency bound.
    Efficiency {
        #[arg(long)]
        config: PathBuf,
    },
    /// Built-in numerical checks.
    Selftest,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut c = ScenarioConfig::from_path(path)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn load_data(c: &ScenarioConfig, data: &Option<PathBuf>) -> Result<Sample> {
    match data {
        Some(p) => read_sample(fs::File::open(p)?),
        None => Ok(generate_sample(c, 0)),
    }
}

fn finish_study(r: &StudyReport, out: &Path) -> Result<()> {
    for p in emit_report(r, out)? {
        println!("wrote {}", p.display());
    }
    let s = &r.summary;
    let show = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            println!("{name}: {v:.4}");
        }
    };
    show("coverage", s.coverage);
    show("coverage se", s.coverage_se);
    show("slope", s.slope);
    show("bound", s.bound);
    show("efficiency ratio", s.efficiency_ratio);
    for note in &r.metadata.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidConfig("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let out = cli.out.as_path();
    match &cli.command {
        Command::Simulate { config, rep } => {
            let c = load_config(config, cli.seed)?;
            let s = generate_sample(&c, *rep);
            fs::create_dir_all(out)?;
            let path = out.join("sample.csv");
            write_sample(&s, fs::File::create(&path)?)?;
            println!("wrote {}", path.display());
        }
        Command::Estimate { config, data } => {
            let c = load_config(config, cli.seed)?;
            let s = load_data(&c, data)?;
            let ctx = StudyContext::new(&c)?;
            let t = c.t_points_for_sample(&s);
            let curve = ctx.estimate(&s, c.bandwidth_for(s.n())?, &t)?;
            fs::create_dir_all(out)?;
            let path = out.join("estimate.csv");
            curve.write_csv(fs::File::create(&path)?)?;
            println!("h = {:.5}, {} points", curve.h, curve.len());
            println!("wrote {}", path.display());
        }
        Command::Band { config, data } => {
            let c = load_config(config, cli.seed)?;
            let s = load_data(&c, data)?;
            let ctx = StudyContext::new(&c)?;
            let t = c.t_points_for_sample(&s);
            let warnings = admissibility_warnings(c.smoothness_index(), c.error.beta(), c.functional.gamma_s());
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let inf = ctx.influence_over(s.min(), s.max(), &t)?;
            let (curve, cov, band) = band_for_sample(&ctx, &inf, &s, &t, sup_seed(c.seed, 0))?;
            fs::create_dir_all(out)?;
            let path = out.join("band.csv");
            curve.write_csv(fs::File::create(&path)?)?;
            let meta = json!({
                "h": curve.h,
                "n": s.n(),
                "band": band,
                "covariance_repair_shift": cov.repair_shift,
                "influence_analytic": inf.is_analytic(),
                "warnings": warnings,
            });
            let jpath = out.join("band.json");
            fs::write(&jpath, serde_json::to_string_pretty(&meta)? + "\n")?;
            println!("q = {:.4}, half-width = {:.5}", band.q, band.band_halfwidth);
            println!("wrote {}", path.display());
            println!("wrote {}", jpath.display());
        }
        Command::Coverage { config } => {
            let c = load_config(config, cli.seed)?;
            finish_study(&run_coverage_study(&c)?, out)?;
        }
        Command::Rate { config, n_list } => {
            let c = load_config(config, cli.seed)?;
            let ns = n_list.clone().or_else(|| c.n_list.clone()).ok_or_else(|| {
                Error::InvalidConfig("the rate study needs --n-list or n_list in the config".into())
            })?;
            finish_study(&run_rate_study(&c, &ns)?, out)?;
        }
        Command::Efficiency { config } => {
            let c = load_config(config, cli.seed)?;
            finish_study(&run_efficiency_study(&c)?, out)?;
        }
        Command::Selftest => {
            let r = run_selftest(cli.seed.unwrap_or(0))?;
            for c in &r.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: {:.3e} (tol {:.1e}) {}", c.name, c.value, c.tolerance, c.detail);
            }
            fs::create_dir_all(out)?;
            let path = out.join("selftest.json");
            fs::write(&path, serde_json::to_string_pretty(&r)? + "\n")?;
            if !r.passed() {
                return Err(Error::Numerical("selftest failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
