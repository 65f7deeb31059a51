use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use spde_drift::config::RunConfig;
use spde_drift::error::{Error, Result};
use spde_drift::estimate::{estimate_theta, standardize, AccumulatorBuilder, EstimatorAccumulator};
use spde_drift::fields::NonlinearitySpec;
use spde_drift::mc::{self, EstimateRecord, StudySpec, SummaryOptions};
use spde_drift::output;
use spde_drift::simulate::{simulate, Trajectory};
use spde_drift::theory::{advise, asymptotic_constants, AdvisorQuery, Advice, Example};

/// Galerkin simulation and drift estimation for stochastic reaction-diffusion equations.
#[derive(Parser)]
#[command(name = "spde-drift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path; writes trajectory.csv and estimates.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate θ from a trajectory CSV written by `simulate`.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// Second component for FitzHugh–Nagumo models.
        #[arg(long)]
        w_trajectory: Option<PathBuf>,
        /// Estimates CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo study; writes estimates.csv, summary.json and SVG panels.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, env = "SPDE_DRIFT_THREADS", default_value_t = 0)]
        threads: usize,
        /// Skip the SVG panels.
        #[arg(long)]
        no_plots: bool,
    },
    /// Which estimators are consistent or asymptotically normal for an example.
    Advise {
        #[arg(long)]
        example: Example,
        /// Spatial dimension.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Degree of the polynomial reaction term.
        #[arg(long)]
        mf: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        /// The degree is odd.
        #[arg(long)]
        odd: bool,
        /// The leading coefficient is negative.
        #[arg(long)]
        neg_leading: bool,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_final: f64,
        #[arg(long = "Lambda", default_value_t = std::f64::consts::PI * std::f64::consts::PI)]
        lambda: f64,
    },
    /// Asymptotic mean and variance constants of the estimator.
    Theory {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long = "T", allow_negative_numbers = true)]
        t_final: f64,
        #[arg(long = "Lambda", allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Estimate {
            config,
            trajectory,
            w_trajectory,
            out,
        } => cmd_estimate(&config, &trajectory, w_trajectory.as_deref(), &out),
        Command::Mc {
            config,
            out_dir,
            threads,
            no_plots,
        } => cmd_mc(&config, &out_dir, threads, !no_plots),
        Command::Advise {
            example,
            n,
            mf,
            gamma,
            alpha,
            odd,
            neg_leading,
            theta,
            t_final,
            lambda,
        } => {
            let q = AdvisorQuery {
                n,
                m_f: mf,
                m_f_odd: odd,
                leading_coeff_negative: neg_leading,
                theta,
                t_final,
                lambda_scale: lambda,
                ..AdvisorQuery::new(example, gamma, alpha)
            };
            cmd_advise(&q)
        }
        Command::Theory {
            theta,
            t_final,
            lambda,
            beta,
            gamma,
            alpha,
        } => {
            let c = asymptotic_constants(theta, t_final, lambda, beta, gamma, alpha)?;
            print_json(&c)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    println!("{s}");
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

/// Every requested `(variant, N)` estimate of one path, as trial 0.
fn single_run_records(spec: &StudySpec, acc: &EstimatorAccumulator) -> Result<Vec<EstimateRecord>> {
    let v = spec.asymptotic_variance();
    let beta = spec.model.operator.beta();
    let mut records = Vec::new();
    for &variant in &spec.est_req.variants {
        for &n in &spec.est_req.n_list {
            let e = estimate_theta(acc, &spec.est_req, variant, n)?;
            let z = match v {
                Some(v) => Some(standardize(e.theta_hat, spec.model.theta_true, v, beta, n)?),
                None => None,
            };
            records.push(EstimateRecord {
                trial: 0,
                variant,
                n,
                alpha: e.alpha,
                theta_hat: e.theta_hat,
                z,
            });
        }
    }
    Ok(records)
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let spec = cfg.study_spec()?;
    let mut scheme = spec.scheme;
    if scheme.snapshot_stride.is_none() {
        scheme.snapshot_stride = Some((scheme.n_steps()? / 1000).max(1));
    }
    spec.est_req
        .warn_if_inadmissible(spec.model.gamma, spec.model.operator.beta());
    let sim = simulate(&spec.model, &scheme, &spec.est_req)?;
    let records = single_run_records(&spec, &sim.accumulators)?;
    ensure_dir(out)?;
    if let Some(t) = &sim.trajectory {
        output::write_trajectory_csv(&out.join("trajectory.csv"), t)?;
    }
    if let Some(t) = &sim.w_trajectory {
        output::write_trajectory_csv(&out.join("trajectory_w.csv"), t)?;
    }
    output::write_estimates_csv(&out.join("estimates.csv"), &records)
}

fn cmd_estimate(config: &Path, trajectory: &Path, w_trajectory: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let spec = cfg.study_spec()?;
    let traj = output::read_trajectory_csv(trajectory)?;
    let w = w_trajectory.map(output::read_trajectory_csv).transpose()?;
    let coupled = matches!(spec.est_req.bias_model, NonlinearitySpec::Fhn(_));
    if coupled && w.is_none() {
        return Err(Error::Config(
            "--w-trajectory is required for a FitzHugh–Nagumo bias model".into(),
        ));
    }
    let acc = accumulate(&spec, &traj, w.as_ref())?;
    let records = single_run_records(&spec, &acc)?;
    output::write_estimates_csv(out, &records)
}

/// Rebuilds the estimator integrals from snapshots with left-endpoint sums.
fn accumulate(spec: &StudySpec, traj: &Trajectory, w: Option<&Trajectory>) -> Result<EstimatorAccumulator> {
    if traj.times.len() < 2 {
        return Err(Error::Config("trajectory needs at least two snapshots".into()));
    }
    if let Some(w) = w {
        if w.times != traj.times {
            return Err(Error::Config(
                "w-trajectory snapshot times differ from the trajectory".into(),
            ));
        }
    }
    let modes = traj.states[0].modes();
    let mut builder = AccumulatorBuilder::new(
        spec.model.operator,
        modes,
        &spec.est_req,
        None,
        spec.model.gamma,
        spec.model.sigma,
    )?;
    for i in 0..traj.times.len() - 1 {
        let dt = traj.times[i + 1] - traj.times[i];
        let wi = w.map(|w| &w.states[i][..]);
        builder.record(&traj.states[i], wi, dt, None)?;
        builder.record_increment(&traj.states[i], &traj.states[i + 1]);
    }
    let t_final = traj.times[traj.times.len() - 1] - traj.times[0];
    Ok(builder.finish(
        traj.states[0].clone(),
        traj.states[traj.states.len() - 1].clone(),
        t_final,
    ))
}

fn cmd_mc(config: &Path, out_dir: &Path, threads: usize, plots: bool) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let spec = cfg.study_spec()?;
    ensure_dir(out_dir)?;
    let (estimates, failures) = mc::collect(mc::run_trials(&spec, threads)?);
    output::write_estimates_csv(&out_dir.join("estimates.csv"), &estimates)?;
    mc::check_failures(spec.n_trials, &failures)?;
    let v = spec.asymptotic_variance();
    let opts = SummaryOptions {
        histogram_n: spec.histogram_n,
        bin_width: spec.histogram_bin_width,
        range: spec.histogram_range,
    };
    let mut report = mc::summarize(
        &estimates,
        spec.model.theta_true,
        &|_| v,
        spec.model.operator.beta(),
        &opts,
    )?;
    report.n_trials = spec.n_trials;
    report.n_failed = failures.len();
    report.failures = failures;
    output::write_json(&out_dir.join("summary.json"), &report)?;
    if plots {
        output::write_plots(out_dir, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AdviceOutput<'a> {
    query: &'a AdvisorQuery,
    #[serde(flatten)]
    advice: Advice,
}

fn cmd_advise(q: &AdvisorQuery) -> Result<()> {
    let advice = advise(q)?;
    print_json(&AdviceOutput { query: q, advice })
}
