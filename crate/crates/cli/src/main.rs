use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fracgrad::acceptance;
use fracgrad::analysis::inequality_sweep;
use fracgrad::config::{self, GammaConfig, InequalityConfig};
use fracgrad::constants::{c_ns, c_ns_defining_form, c_ns_over_one_minus_s, unit_ball_volume, Dimension};
use fracgrad::grid::{lp_norm, relative_l2, Grid};
use fracgrad::io::save_field;
use fracgrad::minors::{default_weak_tests, weak_pairing_sweep};
use fracgrad::path;
use fracgrad::spectral;
use fracgrad::table::SweepTable;
use fracgrad::testfn::{self, sample_gradient, sample_scalar, sample_vector, TestFunction};
use fracgrad::variational::gamma_sweep;
use fracgrad::Error;

#[derive(Parser, Debug)]
#[command(name = "fracgrad", version, about = "Fractional gradient experiments on periodic grids")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the table to this CSV path (plus a `.json` sidecar) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate c_{n,s} and its normalized limit over an order grid.
    Constants {
        #[arg(long)]
        n: usize,
        /// `start:stop:count`, inclusive.
        #[arg(long = "s-grid")]
        s_grid: String,
    },
    /// Distance between D^s u and Du for a test function.
    Localize {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Comma-separated orders.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.7,0.9,0.99")]
        s: Vec<f64>,
    },
    /// Compare operator paths against the spectral one.
    Crosscheck {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Comma-separated registered path names.
        #[arg(long, value_delimiter = ',', default_value = "spectral,direct,direct-naive")]
        paths: Vec<String>,
    },
    /// Poincaré, embedding and order-comparison ratios from a JSON config.
    Inequalities {
        #[arg(long)]
        config: PathBuf,
    },
    /// Weak pairings of det and cof of D^s u against fixed bumps (n = 2).
    Minors {
        #[arg(long = "N", default_value_t = 128)]
        points: usize,
        #[arg(long = "L", default_value_t = 16.0)]
        length: f64,
        /// Radius of the bump-affine map u.
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.7,0.9,0.99")]
        s: Vec<f64>,
    },
    /// Minimize fractional energies over an order grid from a JSON config.
    Gamma {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the acceptance suite; exit 0 iff every criterion passes.
    Selftest,
}

#[derive(Args, Debug, Clone)]
struct FieldArgs {
    /// Registered test function name.
    #[arg(long, default_value = "gaussian")]
    spec: String,
    /// Extra test-function parameters as a JSON object.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long = "N", default_value_t = 128)]
    points: usize,
    #[arg(long = "L", default_value_t = 16.0)]
    length: f64,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

const USAGE: u8 = 2;
const CONFIG: u8 = 3;
const EXPERIMENT: u8 = 4;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: USAGE, error: e.into() }
}

fn config_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: CONFIG, error: e.into() }
}

/// Numerical failures map to 4, argument-like ones to `bad_input`.
fn classify(e: Error, bad_input: u8) -> Failure {
    let code = match e {
        Error::Budget { .. }
        | Error::Divergence(_)
        | Error::Identity(_)
        | Error::NotAGradient(_)
        | Error::NonFinite(_)
        | Error::ZeroDenominator(_)
        | Error::NonZeroMean(_)
        | Error::Constraint(_)
        | Error::Io(_) => EXPERIMENT,
        _ => bad_input,
    };
    Failure { code, error: e.into() }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(usage(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(usage)?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Constants { n, s_grid } => constants(*n, s_grid, out),
        Command::Localize { field, p, s } => localize(field, *p, s, out),
        Command::Crosscheck { field, s, paths } => crosscheck(field, *s, paths, out),
        Command::Inequalities { config } => inequalities(config, out),
        Command::Minors {
            points,
            length,
            radius,
            s,
        } => minors(*points, *length, *radius, s, out),
        Command::Gamma { config } => gamma(config, out),
        Command::Selftest => selftest(cli.seed, out),
    }
}

fn emit(table: &SweepTable, out: Option<&Path>, config: &Value) -> Outcome {
    let mut table = table.clone();
    table.set_config(config);
    match out {
        Some(path) => {
            table
                .write(path, Some(config))
                .with_context(|| format!("writing {}", path.display()))
                .map_err(|e| Failure { code: EXPERIMENT, error: e })?;
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn parse_range(text: &str) -> Outcome<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || usage(anyhow!("expected start:stop:count, got `{text}`"));
    let [a, b, c] = parts.as_slice() else { return Err(bad()) };
    let start: f64 = a.trim().parse().map_err(|_| bad())?;
    let stop: f64 = b.trim().parse().map_err(|_| bad())?;
    let count: usize = c.trim().parse().map_err(|_| bad())?;
    match count {
        0 => Err(bad()),
        1 => Ok(vec![start]),
        _ => Ok((0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()),
    }
}

fn constants(n: usize, s_grid: &str, out: Option<&Path>) -> Outcome {
    let dim = Dimension::new(n).map_err(usage)?;
    let inv_omega = 1.0 / unit_ball_volume(dim);
    let mut table = SweepTable::new(["s", "c_ns", "c_ns_defining", "c_ns_over_one_minus_s", "inv_omega_n"]);
    for s in parse_range(s_grid)? {
        table
            .push(vec![
                s.into(),
                c_ns(dim, s).map_err(usage)?.into(),
                c_ns_defining_form(dim, s).map_err(usage)?.into(),
                c_ns_over_one_minus_s(dim, s).map_err(usage)?.into(),
                inv_omega.into(),
            ])
            .map_err(|e| classify(e, EXPERIMENT))?;
    }
    emit(&table, out, &json!({"command": "constants", "n": n, "s_grid": s_grid}))
}

impl FieldArgs {
    fn spec_json(&self) -> Outcome<Value> {
        let mut spec = testfn::default_params(&self.spec, self.n);
        if let Some(extra) = &self.params {
            let extra: Value = serde_json::from_str(extra).context("--params is not valid JSON").map_err(usage)?;
            let Value::Object(extra) = extra else {
                return Err(usage(anyhow!("--params must be a JSON object")));
            };
            if let Value::Object(base) = &mut spec {
                base.extend(extra);
            }
        }
        spec["spec"] = json!(self.spec);
        Ok(spec)
    }

    fn build(&self) -> Outcome<(Grid, Box<dyn TestFunction>, Value)> {
        let grid = Grid::new(self.n, self.length, self.points).map_err(usage)?;
        let spec = self.spec_json()?;
        let f = testfn::registry()
            .create_from_spec("spec", &spec, &grid)
            .map_err(usage)?;
        if f.is_vector() {
            return Err(usage(anyhow!("`{}` is vector valued; this command needs a scalar test function", self.spec)));
        }
        Ok((grid, f, spec))
    }

    fn echo(&self, spec: &Value) -> Value {
        json!({"spec": spec, "n": self.n, "N": self.points, "L": self.length})
    }
}

fn localize(field: &FieldArgs, p: f64, orders: &[f64], out: Option<&Path>) -> Outcome {
    let (grid, f, spec) = field.build()?;
    let u = sample_scalar(f.as_ref(), &grid).map_err(usage)?;
    let du = sample_gradient(f.as_ref(), &grid).map_err(usage)?;
    let exp = fracgrad::analysis::Exponent::new(p).map_err(usage)?;
    let base = lp_norm(&du, exp.get()).map_err(|e| classify(e, EXPERIMENT))?;
    let mut table = SweepTable::new(["s", "err_rel", "norm_Dsu"]);
    for &s in orders {
        let ds = spectral::fractional_gradient(&u, s).map_err(usage)?;
        let diff = fracgrad::grid::linear_combination(1.0, &ds, -1.0, &du).map_err(|e| classify(e, EXPERIMENT))?;
        let err = lp_norm(&diff, exp.get()).map_err(|e| classify(e, EXPERIMENT))? / base;
        let norm = lp_norm(&ds, exp.get()).map_err(|e| classify(e, EXPERIMENT))?;
        table.push(vec![s.into(), err.into(), norm.into()]).map_err(|e| classify(e, EXPERIMENT))?;
    }
    let mut echo = field.echo(&spec);
    echo["command"] = json!("localize");
    echo["p"] = json!(p);
    echo["s"] = json!(orders);
    emit(&table, out, &echo)
}

fn crosscheck(field: &FieldArgs, s: f64, names: &[String], out: Option<&Path>) -> Outcome {
    let (grid, f, spec) = field.build()?;
    let u = sample_scalar(f.as_ref(), &grid).map_err(usage)?;
    let registry = path::registry();
    let paths = names
        .iter()
        .map(|name| registry.create(name, &Value::Null, &()).map_err(usage))
        .collect::<Outcome<Vec<_>>>()?;
    let oracle = spectral::fractional_gradient(&u, s).map_err(usage)?;
    let mut table = SweepTable::new(["path", "err_rel", "seconds"]);
    for p in &paths {
        let start = Instant::now();
        let d = p.gradient(&u, s).map_err(|e| classify(e, USAGE))?;
        let seconds = start.elapsed().as_secs_f64();
        let err = relative_l2(&d, &oracle).map_err(|e| classify(e, EXPERIMENT))?;
        table.push(vec![p.name().into(), err.into(), seconds.into()]).map_err(|e| classify(e, EXPERIMENT))?;
    }
    let mut echo = field.echo(&spec);
    echo["command"] = json!("crosscheck");
    echo["s"] = json!(s);
    echo["paths"] = json!(names);
    emit(&table, out, &echo)
}

fn config_context(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| config_failure(anyhow::Error::from(e).context(format!("reading config {}", path.display())))
}

fn inequalities(path: &Path, out: Option<&Path>) -> Outcome {
    let (cfg, raw): (InequalityConfig, Value) = config::load(path).map_err(config_context(path))?;
    let mask = cfg.mask().map_err(config_failure)?;
    let p = cfg.exponent().map_err(config_failure)?;
    let table = inequality_sweep(&cfg.specs, &cfg.s_grid, p, &mask).map_err(|e| classify(e, CONFIG))?;
    emit(&table, out, &raw)
}

fn minors(points: usize, length: f64, radius: f64, orders: &[f64], out: Option<&Path>) -> Outcome {
    let grid = Grid::new(2, length, points).map_err(usage)?;
    let spec = json!({"spec": "bump-affine", "radius": radius});
    let map = testfn::registry().create_from_spec("spec", &spec, &grid).map_err(usage)?;
    let u = sample_vector(map.as_ref(), &grid).map_err(usage)?;
    let tests = default_weak_tests(&grid).map_err(usage)?;
    let table = weak_pairing_sweep(&u, orders, &tests).map_err(|e| classify(e, USAGE))?;
    emit(
        &table,
        out,
        &json!({"command": "minors", "n": 2, "N": points, "L": length, "u": spec, "s": orders}),
    )
}

/// `out.csv` → `out.<suffix>`, next to the main artifact.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn gamma(path: &Path, out: Option<&Path>) -> Outcome {
    let (cfg, raw): (GammaConfig, Value) = config::load(path).map_err(config_context(path))?;
    let (prob, orders, opts) = cfg.build().map_err(config_failure)?;
    let sweep = gamma_sweep(&prob, &orders, &opts).map_err(|e| classify(e, CONFIG))?;
    match out {
        Some(out) => {
            emit(&sweep.table, Some(out), &raw)?;
            emit(&sweep.recovery, Some(&sibling(out, "recovery.csv")), &raw)?;
            for (s, report) in &sweep.reports {
                let file = sibling(out, &format!("minimizer-s{s}.bin"));
                save_field(&report.minimizer, &file)
                    .with_context(|| format!("writing {}", file.display()))
                    .map_err(|e| Failure { code: EXPERIMENT, error: e })?;
            }
        }
        None => {
            emit(&sweep.table, None, &raw)?;
            println!();
            emit(&sweep.recovery, None, &raw)?;
        }
    }
    let stalled: Vec<String> = sweep
        .reports
        .iter()
        .filter(|(_, r)| !r.converged)
        .map(|(s, _)| s.to_string())
        .collect();
    if stalled.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXPERIMENT,
            error: anyhow!("solves did not converge for s = {}", stalled.join(", ")),
        })
    }
}

fn selftest(seed: u64, out: Option<&Path>) -> Outcome {
    let mut outcomes = Vec::new();
    for c in acceptance::criteria() {
        let o = c.run(seed);
        eprintln!("{}", o.line());
        outcomes.push(o);
    }
    let table = acceptance::outcome_table(&outcomes, seed).map_err(|e| classify(e, EXPERIMENT))?;
    emit(&table, out, &json!({"command": "selftest", "seed": seed}))?;
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass()).map(|o| o.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXPERIMENT,
            error: anyhow!("criteria failed: {}", failed.join(", ")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0.5:1:3").unwrap(), vec![0.5, 0.75, 1.0]);
        assert_eq!(parse_range("0.2:0.9:1").unwrap(), vec![0.2]);
        assert!(parse_range("0.5:1").is_err());
        assert!(parse_range("a:1:2").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/tmp/run.csv"), "recovery.csv"), PathBuf::from("/tmp/run.recovery.csv"));
    }
}
