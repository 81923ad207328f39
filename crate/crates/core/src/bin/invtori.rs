use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use invtori::config::{BaseMapSpec, Operation, RunConfig};
use invtori::green::Side;
use invtori::report::Summary;
use invtori::run::{exit_code, run};

#[derive(Parser)]
#[command(name = "invtori", version, about = "Invariant submanifolds of Tonelli flows on T*T^d")]
struct Cli {
    /// TOML run configuration; command-line values override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also settable through INVTORI_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every expected property of a fixture.
    Analyze { fixture: String },
    /// Integrate one orbit.
    Flow {
        fixture: String,
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        start: Start,
    },
    /// Estimate a Green bundle along one orbit.
    Green {
        fixture: String,
        #[command(flatten)]
        start: Start,
        #[arg(long, value_enum)]
        side: Option<SideArg>,
    },
    /// Scan one orbit for conjugate points.
    Conjugate {
        fixture: String,
        #[command(flatten)]
        start: Start,
        /// Scan horizon (negative scans backwards).
        #[arg(long = "T", allow_negative_numbers = true)]
        horizon: Option<f64>,
    },
    /// Follow the characteristic field from a parameter.
    Characteristic {
        fixture: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta0: Option<Vec<f64>>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
    },
    /// Extend a base map to the cotangent bundle and check the extension.
    Extend {
        /// `identity`, `translation(c1,...)`, `sine-EPS` or `sine(EPS)`.
        basemap: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Iterate an SL(2,Z) action on a homology class.
    Homology {
        /// Row-major entries `a,b,c,d`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        matrix: Option<Vec<i64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        v0: Option<Vec<i64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Print a summary written by an earlier run.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Execute the configuration file as written.
    Run,
}

#[derive(Args)]
struct Start {
    /// Phase point `q1,...,qd,p1,...,pd`; defaults to a point of the fixture.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Minus,
    Plus,
}

fn configure(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    if let Some(dir) = &cli.output_dir {
        cfg.run.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let set_start = |cfg: &mut RunConfig, start: &Start| {
        if let Some(x0) = &start.x0 {
            cfg.points.x0 = x0.clone();
        }
    };
    match &cli.command {
        Command::Analyze { fixture } => {
            cfg.run.operation = Operation::Analyze;
            cfg.run.target = fixture.clone();
        }
        Command::Flow { fixture, t, start } => {
            cfg.run.operation = Operation::Flow;
            cfg.run.target = fixture.clone();
            set_start(&mut cfg, start);
            if let Some(t) = t {
                cfg.points.t = *t;
            }
        }
        Command::Green { fixture, start, side } => {
            cfg.run.operation = Operation::Green;
            cfg.run.target = fixture.clone();
            set_start(&mut cfg, start);
            if let Some(side) = side {
                cfg.points.side = match side {
                    SideArg::Minus => Side::Minus,
                    SideArg::Plus => Side::Plus,
                };
            }
        }
        Command::Conjugate { fixture, start, horizon } => {
            cfg.run.operation = Operation::Conjugate;
            cfg.run.target = fixture.clone();
            set_start(&mut cfg, start);
            if horizon.is_some() {
                cfg.horizons.conjugate = *horizon;
            }
        }
        Command::Characteristic { fixture, theta0, t } => {
            cfg.run.operation = Operation::Characteristic;
            cfg.run.target = fixture.clone();
            if let Some(th) = theta0 {
                cfg.points.theta0 = th.clone();
            }
            if let Some(t) = t {
                cfg.points.t = *t;
            }
        }
        Command::Extend { basemap, dim, samples } => {
            cfg.run.operation = Operation::Extend;
            cfg.run.target = basemap.clone();
            cfg.extend.basemap = Some(BaseMapSpec::Named(basemap.clone()));
            if let Some(d) = dim {
                cfg.extend.dim = *d;
            }
            if let Some(n) = samples {
                cfg.extend.samples = *n;
            }
        }
        Command::Homology { matrix, v0, n } => {
            cfg.run.operation = Operation::Homology;
            cfg.run.target = "sl2z".into();
            if let Some(m) = matrix {
                let [a, b, c, d] = m[..] else { return Err(format!("--matrix needs 4 entries, got {}", m.len())) };
                cfg.homology.matrix = [[a, b], [c, d]];
            }
            if let Some(v) = v0 {
                let [x, y] = v[..] else { return Err(format!("--v0 needs 2 entries, got {}", v.len())) };
                cfg.homology.v0 = [x, y];
            }
            if let Some(n) = n {
                cfg.homology.n = *n;
            }
        }
        Command::Report { .. } | Command::Run => {}
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Report { dir } = &cli.command {
        return match Summary::read(dir) {
            Ok(s) => {
                print!("{}", s.render());
                ExitCode::from(if s.passed { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("invtori: {e}");
                ExitCode::from(2)
            }
        };
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invtori: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(&cfg);
    match &result {
        Ok(s) => {
            print!("{}", s.render());
            println!("wrote {}", cfg.run.output_dir.display());
        }
        Err(e) => eprintln!("invtori: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
