//! Command-line front end: run convergence studies from JSON configs, emit
//! integration weights for a point cloud, or sample surface clouds to CSV.

use clap::{Parser, Subcommand};
use surfquad::fourier::{BoxDomain, FourierBasis, WeightMode};
use surfquad::geometry::{builtin_surface, sample_surface, SamplingMode};
use surfquad::harness::{run_convergence, ExperimentConfig};
use surfquad::integrators::method1_ratio;
use surfquad::operators::LbVariant;
use surfquad::{Parallelism, PointCloud, Vec3};

#[derive(Parser)]
#[command(name = "surfquad", about = "meshfree surface integration studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study from a JSON config.
    Run {
        #[arg(long)]
        config: String,
        /// directory the results CSV is redirected into (overrides the
        /// directory part of the config's output_path)
        #[arg(long)]
        out: Option<String>,
        /// worker threads for assembly; defaults to all cores
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Integration weights for an existing cloud: one weight per point,
    /// normalized so the weighted sum of g = 1 matches --g-integral.
    Weights {
        #[arg(long)]
        surface: String,
        /// point-cloud CSV (x,y,z,nx,ny,nz[,kappa])
        #[arg(long)]
        cloud: String,
        /// the known integral of g = 1, i.e. the surface measure
        #[arg(long)]
        g_integral: f64,
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 25)]
        modes: usize,
        #[arg(long, default_value_t = 10.0 / 3.0)]
        q: f64,
        #[arg(long, default_value_t = 12.0)]
        t_period: f64,
        #[arg(long, default_value_t = 10.0)]
        box_side: f64,
    },
    /// Sample a named surface into a point-cloud CSV.
    Sample {
        #[arg(long)]
        surface: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "farthest_point")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
}

fn parse_mode(s: &str) -> Result<SamplingMode, String> {
    match s {
        "farthest_point" => Ok(SamplingMode::FarthestPoint),
        "random" => Ok(SamplingMode::Random),
        "irregular" => Ok(SamplingMode::Irregular),
        _ => Err(format!("unknown sampling mode: {s}")),
    }
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some() {
        log::warn!("built without the parallel feature; --threads ignored");
    }
}

fn cmd_run(config: &str, out: Option<&str>, threads: Option<usize>) -> i32 {
    let mut cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Some(dir) = out {
        let name = std::path::Path::new(&cfg.output_path)
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "results.csv".into());
        cfg.output_path = std::path::Path::new(dir)
            .join(name)
            .to_string_lossy()
            .into_owned();
    }
    configure_threads(threads);
    match run_convergence(&cfg) {
        Ok(rows) => {
            let mut failed = false;
            for r in &rows {
                match &r.error {
                    None => log::info!(
                        "{} n={} estimate {:.12e} rel_error {:.3e}",
                        r.experiment,
                        r.n_points,
                        r.estimate,
                        r.rel_error
                    ),
                    Some(e) => {
                        failed = true;
                        eprintln!("{} n={} failed: {e}", r.experiment, r.n_points);
                    }
                }
            }
            println!("wrote {} rows to {}", rows.len(), cfg.output_path);
            if failed {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            1
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_weights(
    surface: &str,
    cloud_path: &str,
    g_integral: f64,
    out: &str,
    modes: usize,
    q: f64,
    t_period: f64,
    box_side: f64,
) -> i32 {
    let inner = || -> surfquad::Result<()> {
        let surface = builtin_surface(surface)?;
        let file = std::fs::File::open(cloud_path)?;
        let mut cloud = PointCloud::read_csv(std::io::BufReader::new(file), 0)?;
        // fill curvature from the level set when the CSV lacks a kappa column
        for p in &mut cloud.points {
            if p.curvature_sum.is_none() {
                let (_, kappa) = surface.normal_and_curvature(p.position)?;
                p.curvature_sum = Some(kappa);
            }
        }
        let basis = FourierBasis::new(
            BoxDomain::cube(Vec3::zeros(), box_side, 3),
            modes,
            q,
            t_period,
            WeightMode::Separable,
        );
        let f_values = vec![0.0; cloud.points.len()];
        let g_values = vec![1.0; cloud.points.len()];
        let result = method1_ratio(
            &cloud.points,
            &f_values,
            &g_values,
            LbVariant::NeumannPair,
            &basis,
            Some(g_integral),
            None,
            Parallelism::auto(),
        )?;
        let weights = result.weights.expect("g integral was supplied");
        let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
        use std::io::Write as _;
        writeln!(w, "x,y,z,weight")?;
        for (p, wk) in cloud.points.iter().zip(&weights) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.position.x, p.position.y, p.position.z, wk
            )?;
        }
        Ok(())
    };
    match inner() {
        Ok(()) => 0,
        Err(surfquad::Error::Config(e)) => {
            eprintln!("config error: {e}");
            2
        }
        Err(e) => {
            eprintln!("weights failed: {e}");
            1
        }
    }
}

fn cmd_sample(surface: &str, n: usize, mode: &str, seed: u64, out: &str) -> i32 {
    let mode = match parse_mode(mode) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let inner = || -> surfquad::Result<()> {
        let surface = builtin_surface(surface)?;
        let candidates = if mode == SamplingMode::FarthestPoint { 10 } else { 1 };
        let cloud = sample_surface(&surface, n, mode, candidates, seed)?;
        cloud.write_csv(std::io::BufWriter::new(std::fs::File::create(out)?))
    };
    match inner() {
        Ok(()) => 0,
        Err(surfquad::Error::Config(e)) => {
            eprintln!("config error: {e}");
            2
        }
        Err(e) => {
            eprintln!("sample failed: {e}");
            1
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => cmd_run(&config, out.as_deref(), threads),
        Command::Weights {
            surface,
            cloud,
            g_integral,
            out,
            modes,
            q,
            t_period,
            box_side,
        } => cmd_weights(&surface, &cloud, g_integral, &out, modes, q, t_period, box_side),
        Command::Sample {
            surface,
            n,
            mode,
            seed,
            out,
        } => cmd_sample(&surface, n, &mode, seed, &out),
    };
    std::process::exit(code);
}
