use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};

use lgeo::divergence::l_divergence;
use lgeo::finance::{fernholz_decompose, rebalance_compare, MarketPath};
use lgeo::generator::{check_regularity, Builtin, Generator};
use lgeo::geodesic::{dual_flow, primal_flow, primal_geodesic, dual_geodesic, pythagorean_sign, uniform_grid, Curve};
use lgeo::region::region_sample;
use lgeo::transport::{displacement_family, gaussian_example_check, market_interpolation};
use lgeo::{Error, SimplexPoint};

#[derive(Parser, Debug)]
#[command(name = "lgeo", version, about = "Geometry of exponentially concave portfolio generators")]
struct Cli {
    /// Digits after the decimal point for printed scalars.
    #[arg(long, global = true, default_value_t = 6)]
    precision: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    /// Generator spec: eqN, market, cw:w1,..  dw:lambda  gdw:lambda:w1,..  mix:c1*spec1+c2*spec2
    #[arg(long = "gen", conflicts_with = "config", required_unless_present = "config")]
    spec: Option<String>,
    /// JSON generator config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl GenArgs {
    fn load(&self) -> Result<Builtin, Error> {
        match (&self.spec, &self.config) {
            (Some(s), _) => s.parse(),
            (None, Some(path)) => Builtin::from_json(&std::fs::read_to_string(path)?),
            (None, None) => Err(Error::InvalidParameter("a generator is required".into())),
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Primal,
    Dual,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Coords {
    /// Primal or dual coordinates.
    Native,
    /// Euclidean (primal curves) or dual Euclidean (dual curves) simplex coordinates.
    Simplex,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Family {
    Displacement,
    Market,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the L-divergence T(q|p).
    Divergence {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_parser = parse_point)]
        p: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        q: SimplexPoint,
    },
    /// Sample the closed-form primal or dual geodesic as CSV.
    Geodesic {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_parser = parse_point)]
        from: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        to: SimplexPoint,
        #[arg(long, value_enum, default_value_t = Kind::Primal)]
        kind: Kind,
        #[arg(long, default_value_t = 129)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Coords::Native)]
        coords: Coords,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the primal or dual gradient flow toward a target as CSV.
    Flow {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_parser = parse_point)]
        from: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        to: SimplexPoint,
        #[arg(long, value_enum, default_value_t = Kind::Primal)]
        kind: Kind,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Coords::Native)]
        coords: Coords,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the Pythagorean gap, inner product and angle at q.
    Pyth {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_parser = parse_point)]
        p: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        q: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        r: SimplexPoint,
    },
    /// Sample the region T(q|p) + T(r|q) <= T(r|p) on the 2-simplex.
    Region {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_parser = parse_point)]
        p: SimplexPoint,
        #[arg(long, value_parser = parse_point)]
        r: SimplexPoint,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
        /// Output format; inferred from the file extension when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Decompose the relative value of a rebalanced portfolio along a market path.
    Backtest {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two rebalancing schedules (time indices starting at 0).
    Compare {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule_a: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule_b: Vec<usize>,
    },
    /// Trace t -> phi^(t)(theta) of an interpolation family as CSV.
    Interpolate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_enum, default_value_t = Family::Displacement)]
        family: Family,
        /// Market weights whose primal coordinate is followed.
        #[arg(long, value_parser = parse_point)]
        at: SimplexPoint,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Coords::Native)]
        coords: Coords,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of the Gaussian product transport example.
    TransportCheck {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        b: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        sigma: Vec<f64>,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check regularity of a generator at random points.
    Regularity {
        #[command(flatten)]
        gen: GenArgs,
        /// Number of assets; taken from the generator when it fixes one.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}")))
        .collect()
}

fn parse_point(s: &str) -> Result<SimplexPoint, String> {
    SimplexPoint::new(parse_list(s)?).map_err(|e| e.to_string())
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_curve(curve: Curve, coords: Coords, out: &Option<PathBuf>) -> Result<(), Error> {
    let curve = match coords {
        Coords::Native => curve,
        Coords::Simplex => curve.to_simplex()?,
    };
    let mut w = output(out)?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn random_points(n: usize, count: usize, seed: u64) -> Result<Vec<SimplexPoint>, Error> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
            SimplexPoint::from_positive(&x)
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let prec = cli.precision;
    let fmt = |x: f64| format!("{x:.prec$}");
    match cli.command {
        Command::Divergence { gen, p, q } => {
            let g = gen.load()?;
            println!("{}", fmt(l_divergence(&g, &q, &p)?.value));
        }
        Command::Geodesic { gen, from, to, kind, grid, coords, out } => {
            let g = gen.load()?;
            let grid = uniform_grid(grid);
            let curve = match kind {
                Kind::Primal => primal_geodesic(&g, &from, &to, &grid)?,
                Kind::Dual => dual_geodesic(&g, &from, &to, &grid)?,
            };
            write_curve(curve, coords, &out)?;
        }
        Command::Flow { gen, from, to, kind, horizon, steps, coords, out } => {
            let g = gen.load()?;
            let curve = match kind {
                Kind::Primal => primal_flow(&g, &from, &to, horizon, steps)?,
                Kind::Dual => dual_flow(&g, &from, &to, horizon, steps)?,
            };
            write_curve(curve, coords, &out)?;
        }
        Command::Pyth { gen, p, q, r } => {
            let g = gen.load()?;
            let res = pythagorean_sign(&g, &p, &q, &r)?;
            println!("gap {}", fmt(res.gap));
            println!("inner {}", fmt(res.inner));
            println!("sign_quantity {}", fmt(res.sign_quantity));
            match res.angle_deg {
                Some(a) => println!("angle_deg {}", fmt(a)),
                None => println!("angle_deg undefined"),
            }
        }
        Command::Region { gen, p, r, resolution, out, format } => {
            let g = gen.load()?;
            let sample = region_sample(&g, &p, &r, resolution)?;
            let format = format.unwrap_or_else(|| infer_format(&out));
            let mut w = BufWriter::new(File::create(&out)?);
            match format {
                Format::Csv => sample.write_csv(&mut w)?,
                Format::Svg => sample.write_svg(&mut w)?,
            }
            w.flush()?;
        }
        Command::Backtest { gen, data, out } => {
            let g = gen.load()?;
            let path = MarketPath::ingest_csv(&data)?;
            let report = fernholz_decompose(&g, &path)?;
            let mut w = output(&out)?;
            report.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Compare { gen, data, schedule_a, schedule_b } => {
            let g = gen.load()?;
            let path = MarketPath::ingest_csv(&data)?;
            let c = rebalance_compare(&g, &path, &schedule_a, &schedule_b)?;
            println!("log_value_a {}", fmt(c.a.log_value));
            println!("log_value_b {}", fmt(c.b.log_value));
            println!("difference {}", fmt(c.difference));
            if let Some(gap) = c.pythagorean_gap {
                println!("pythagorean_gap {}", fmt(gap));
            }
        }
        Command::Interpolate { gen, family, at, grid, coords, out } => {
            let g = gen.load()?;
            let fam = match family {
                Family::Displacement => displacement_family(&g, at.dim())?,
                Family::Market => market_interpolation(&g, at.dim())?,
            };
            let curve = fam.trajectory(&at.to_primal(), &uniform_grid(grid))?;
            write_curve(curve, coords, &out)?;
        }
        Command::TransportCheck { a, b, sigma, lambda, samples, seed, out } => {
            let report = gaussian_example_check(&a, &b, &sigma, lambda, samples, seed)?;
            let mut w = output(&out)?;
            report.write_csv(&mut w)?;
            w.flush()?;
            if !report.affine() {
                eprintln!("dual map is not affine (residual {:e})", report.affinity_residual);
                return Ok(ExitCode::from(2));
            }
        }
        Command::Regularity { gen, n, samples, seed } => {
            let g = gen.load()?;
            let n = match (n, g.dim()) {
                (Some(n), Some(d)) if n != d => {
                    return Err(Error::DimensionMismatch { expected: d, found: n })
                }
                (Some(n), _) | (None, Some(n)) => n,
                (None, None) => {
                    return Err(Error::InvalidParameter(format!("{} needs --n", g.label())))
                }
            };
            let points = random_points(n, samples, seed)?;
            let report = check_regularity(&g, &points)?;
            println!("checked {}", report.checked);
            println!("failures {}", report.failures.len());
            for f in &report.failures {
                let p = points[f.index].as_slice().iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(",");
                println!("{p}: {}", f.reason);
            }
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("svg") => Format::Svg,
        _ => Format::Csv,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("LGEO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
