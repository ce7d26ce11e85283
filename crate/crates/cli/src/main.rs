mod config;
mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::{Common, Resolved};
use plot::LogLogPlot;
use slowbond::acceptance::{run_suite, Status, Suite};
use slowbond::bl_metric::two_point_demo;
use slowbond::diffusion::SignedReal;
use slowbond::exec::{map_replicas, replica_rng, set_threads};
use slowbond::experiments::{moment_condition_check, rate_experiment, rate_point, two_time_check};
use slowbond::lattice_walk::{exact_marginal, lump_distribution, sample_endpoint, Walk};
use slowbond::semigroups::{bl_suite, robin_pde_solve, snob_semigroup_mc, Limit, NamedFn};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SLOWBOND_THREADS";

#[derive(Parser)]
#[command(name = "slowbond", version, about = "Random walk with a slow bond: exact laws, limits and convergence rates")]
struct Cli {
    /// JSON config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample endpoints X_{t n^2} of the walk from floor(u n).
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Exact law of X_{t n^2} from floor(u n) at the first n.
    Marginal {
        #[command(flatten)]
        common: Common,
        /// Fold sites -1-x onto x.
        #[arg(long)]
        lumped: bool,
    },
    /// A limit semigroup applied to a named test function.
    Semigroup {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = LimitKind::Snob)]
        limit: LimitKind,
        /// Interface parameter; defaults to 2 alpha.
        #[arg(long)]
        kappa: Option<f64>,
        /// Test function name; an unknown name lists the choices.
        #[arg(long = "f", default_value = "gaussian_bump")]
        f: String,
        /// Also estimate by sampling and assert agreement within 3 stderr.
        #[arg(long)]
        mc: bool,
        /// Also solve the Robin PDE with this step and assert a 1e-3 gap.
        #[arg(long)]
        robin_dx: Option<f64>,
    },
    /// Bounded Lipschitz distance.
    Dbl {
        #[command(flatten)]
        common: Common,
        /// Closed-form demonstration instead of the lattice-vs-limit distance.
        #[arg(long, value_enum)]
        demo: Option<Demo>,
        /// Distance between the two points of the demo.
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        d: f64,
        /// Grid spacing of the demo.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// d_BL between the lattice law and its limit for every n, with the fitted slope.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Also assert the slope lies in LO,HI.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        band: Option<Vec<f64>>,
    },
    /// E[f(X_{t1}) g(X_{t2} - X_{t1})] for the scaled walk at the first n against the limit.
    TwoTime {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        t1: f64,
        #[arg(long, default_value_t = 1.0)]
        t2: f64,
        #[arg(long = "f", default_value = "clamped_identity")]
        f: String,
        /// Function of the increment: a test function name, `bump` or `one`.
        #[arg(long = "g", default_value = "bump")]
        g: String,
    },
    /// Increment second moments over a time grid and the constant C per n.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        times: Vec<f64>,
    },
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, default_value = "full")]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LimitKind {
    Bm,
    Reflected,
    Snob,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    TwoPoint,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let k: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}=`{v}` is not a thread count"))?;
        set_threads(k).with_context(|| format!("{THREADS_VAR}={v}"))?;
    }
    Ok(())
}

fn resolve(config: &Option<PathBuf>, common: &Common) -> Result<Resolved> {
    let file = config.as_deref().map(config::load).transpose()?;
    config::resolve(file, common)
}

/// CSV sink: the `out` path or stdout.
fn write_csv(out: &Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match f(&mut lock) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn write_plot(path: &Path, plot: LogLogPlot<'_>) -> Result<()> {
    std::fs::write(path, plot.to_svg()).with_context(|| format!("writing {}", path.display()))
}

fn named(name: &str) -> Result<NamedFn> {
    let suite = bl_suite();
    let names: Vec<&str> = suite.iter().map(|f| f.name).collect();
    let joined = names.join(", ");
    suite
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| anyhow::anyhow!("unknown test function `{name}`; choose one of {joined}"))
}

fn increment_fn(name: &str) -> Result<Box<dyn Fn(f64) -> f64 + Sync>> {
    Ok(match name {
        "bump" => Box::new(|x: f64| (-x * x).exp()),
        "one" => Box::new(|_: f64| 1.0),
        other => {
            let f = named(other)?.f;
            Box::new(move |x: f64| f.at(x))
        }
    })
}

fn start_site(u: f64, n: u32) -> i64 {
    (u * n as f64).floor() as i64
}

fn run(cli: Cli) -> Result<bool> {
    threads_from_env()?;
    let config = cli.config;
    match cli.command {
        Command::Simulate { common } => {
            let r = resolve(&config, &common)?;
            let c = &r.experiment;
            let n = c.n_list[0];
            let walk = Walk::SlowBond(c.params(n)?);
            let start = start_site(c.u, n);
            let horizon = c.t * (n as f64).powi(2);
            let sites = map_replicas(c.replicas, |i| sample_endpoint(&walk, start, horizon, &mut replica_rng(c.seed, i as u64)).position);
            write_csv(&r.out, |w| {
                writeln!(w, "replica,site,x")?;
                for (i, s) in sites.iter().enumerate() {
                    writeln!(w, "{i},{s},{}", *s as f64 / n as f64)?;
                }
                Ok(())
            })?;
            Ok(true)
        }
        Command::Marginal { common, lumped } => {
            let r = resolve(&config, &common)?;
            let c = &r.experiment;
            let n = c.n_list[0];
            let mut law = exact_marginal(&c.params(n)?, start_site(c.u, n), c.t * (n as f64).powi(2), c.tail_tol)?;
            if lumped {
                law = lump_distribution(&law);
            }
            write_csv(&r.out, |w| law.write_csv(w))?;
            eprintln!("deficit {:e}", law.deficit);
            Ok(true)
        }
        Command::Semigroup { common, limit, kappa, f, mc, robin_dx } => {
            let r = resolve(&config, &common)?;
            let c = &r.experiment;
            let f = named(&f)?;
            let f = f.f.as_ref();
            let kappa = kappa.unwrap_or(2.0 * c.alpha);
            let lim = match limit {
                LimitKind::Bm => Limit::Bm,
                LimitKind::Reflected => Limit::Reflected,
                LimitKind::Snob => Limit::Snob { kappa },
            };
            let u = SignedReal::from_real(c.u);
            let value = lim.expectation(f, u, c.t, 1e-10)?;
            println!("quadrature,{value}");
            let mut ok = true;
            if mc {
                let Limit::Snob { kappa } = lim else { bail!("--mc needs --limit snob") };
                let e = snob_semigroup_mc(f, u, c.t, kappa, c.replicas, c.seed)?;
                let agree = e.agrees(value, 3.0, 0.0);
                println!("mc,{},{},{}", e.mean, e.stderr, if agree { "agree" } else { "DISAGREE" });
                ok &= agree;
            }
            if let Some(dx) = robin_dx {
                let Limit::Snob { kappa } = lim else { bail!("--robin-dx needs --limit snob") };
                let sol = robin_pde_solve(f, c.t, kappa, dx, None)?;
                let v = sol.value(u);
                let agree = (v - value).abs() <= 1e-3;
                println!("robin,{v},{}", if agree { "agree" } else { "DISAGREE" });
                ok &= agree;
            }
            Ok(ok)
        }
        Command::Dbl { common, demo, d, h } => {
            if let Some(Demo::TwoPoint) = demo {
                println!("{:.6}", two_point_demo(d, h)?);
                return Ok(true);
            }
            let r = resolve(&config, &common)?;
            let c = &r.experiment;
            println!("n,dbl,seconds");
            for &n in &c.n_list {
                let row = rate_point(c, n)?;
                println!("{},{:e},{:.3}", row.n, row.dbl, row.seconds);
            }
            Ok(true)
        }
        Command::Rates { common, band } => {
            let r = resolve(&config, &common)?;
            let tab = rate_experiment(&r.experiment)?;
            write_csv(&r.out, |w| tab.write_csv(w))?;
            println!(
                "# slope={:.4} intercept={:.4} predicted={} limit={}",
                tab.slope, tab.intercept, tab.predicted, tab.limit
            );
            if let Some(p) = &r.plot {
                let pts: Vec<(f64, f64)> = tab.rows.iter().map(|r| (r.n as f64, r.dbl)).collect();
                let title = format!("d_BL to the {} limit", tab.limit);
                let fit = tab.slope.is_finite().then_some((tab.slope, tab.intercept));
                write_plot(p, LogLogPlot { title: &title, x_label: "n", y_label: "d_BL", points: &pts, fit })?;
            }
            let mut ok = true;
            let checks = [("nonincreasing in n", tab.nonincreasing()), ("calibrated bound C n^(rate+0.1)", tab.one_sided_bound_holds())];
            for (name, pass) in checks {
                if !pass {
                    eprintln!("FAIL {name}");
                }
                ok &= pass;
            }
            if let Some(b) = band {
                if b.len() != 2 {
                    bail!("--band takes LO,HI, got {} values", b.len());
                }
                let pass = tab.slope_in(b[0], b[1]);
                if !pass {
                    eprintln!("FAIL slope {:.4} outside [{}, {}]", tab.slope, b[0], b[1]);
                }
                ok &= pass;
            }
            Ok(ok)
        }
        Command::TwoTime { common, t1, t2, f, g } => {
            let r = resolve(&config, &common)?;
            let c = &r.experiment;
            let n = c.n_list[0];
            let f = named(&f)?;
            let g = increment_fn(&g)?;
            let res = two_time_check(c, n, t1, t2, f.f.as_ref(), g.as_ref(), c.replicas, c.seed)?;
            println!("source,mean,stderr");
            println!("lattice,{},{}", res.lattice.mean, res.lattice.stderr);
            println!("limit,{},{}", res.limit.mean, res.limit.stderr);
            if !res.agree {
                eprintln!("FAIL lattice and limit differ by more than 3 stderr");
            }
            Ok(res.agree)
        }
        Command::Moments { common, times } => {
            let r = resolve(&config, &common)?;
            let tab = moment_condition_check(&r.experiment, &times)?;
            write_csv(&r.out, |w| tab.write_csv(w))?;
            let cs: Vec<String> = tab.constants.iter().map(|(n, c)| format!("{n}:{c:.4}")).collect();
            println!("# C {} spread={:.4}", cs.join(" "), tab.spread());
            if !tab.stable() {
                eprintln!("FAIL constants spread more than 2x across n");
            }
            Ok(tab.stable())
        }
        Command::Verify { suite } => {
            let outcomes = run_suite(suite, |o| println!("{o}"));
            Ok(outcomes.iter().all(|o| o.status != Status::Fail))
        }
    }
}
