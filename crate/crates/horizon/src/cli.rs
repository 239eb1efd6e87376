//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use horizon_core::balance;
use horizon_core::flow::{self, FlowOptions};
use horizon_core::system::{validate_qh, validate_res};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::export;
use crate::report::{AnalysisRecord, Cx, FlowRecord, RootRecord};
use crate::run::{Pipeline, RunConfig};
use crate::sysfile;

#[derive(Debug, Parser)]
#[command(name = "horizon", version, about = "Blow-up analysis through dynamics at infinity")]
pub struct Cli {
    /// Seed for the random Newton starts of the balance-law search.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// RK4 step in the desingularized time.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long = "tau-max", global = true, default_value_t = 2000.0)]
    pub tau_max: f64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Spaces of JSON indentation; 0 for compact output.
    #[arg(long = "json-indent", global = true, default_value_t = 2)]
    pub json_indent: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SystemArg {
    /// System file, or the name of a bundled system
    /// (painleve1, selfsimilar, wwl_k2, wwl_k1).
    pub system: String,
    /// Override a parameter, e.g. `--param m=-2`.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
pub struct StartArg {
    #[arg(long, allow_negative_numbers = true)]
    pub t0: f64,
    /// Initial point in embedded coordinates.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "y0", required_unless_present = "y0")]
    pub x0: Option<Vec<f64>>,
    /// Initial point in original coordinates.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the quasi-homogeneous split and the decay of the residual.
    Validate {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Balance-law roots and their horizon equilibria at time `t`; with
    /// `--trace`, follow each root family along the file's `t_grid`.
    Balance {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long)]
        trace: bool,
    },
    /// Spectra of A^ext and Dg^ext at every balance root.
    Spectrum {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Full eigenstructure correspondence at every balance root.
    Correspond {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Integrate the desingularized field and write the trajectory as CSV.
    Flow {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        start: StartArg,
        /// Keep every n-th step.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Blow-up time of the trajectory from the given start.
    Tmax {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        start: StartArg,
    },
    /// End-to-end analysis as a JSON report.
    Report {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        start: StartArg,
    },
    /// Blow-up time, sign of x1 x3 and driver value for a list of t0.
    Sweep {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long = "t0-list", value_delimiter = ',', allow_negative_numbers = true, num_args = 0..)]
        t0_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Vec<f64>,
    },
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{v}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Cli {
    fn flow_options(&self) -> Result<FlowOptions> {
        if !(self.h > 0.0) || !(self.tau_max > 0.0) {
            return Err(Error::Usage("--h and --tau-max must be positive".into()));
        }
        Ok(FlowOptions { h: self.h, tau_max: self.tau_max, ..FlowOptions::default() })
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| Error::Io { path: p.clone(), source })?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut out = self.sink()?;
        let text = if self.json_indent == 0 {
            serde_json::to_string(value)
        } else {
            let indent = vec![b' '; self.json_indent];
            let mut buf = Vec::new();
            let fmt = serde_json::ser::PrettyFormatter::with_indent(&indent);
            let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
            value.serialize(&mut ser).map(|_| String::from_utf8(buf).expect("serde_json writes UTF-8"))
        }
        .expect("report values serialize");
        let io_err = |source| Error::Io { path: self.out.clone().unwrap_or_else(|| "<stdout>".into()), source };
        writeln!(out, "{text}").map_err(io_err)?;
        out.flush().map_err(io_err)
    }
}

fn pipeline(sys: &SystemArg) -> Result<Pipeline> {
    Ok(Pipeline::new(sysfile::load(&sys.system, &sys.params)?))
}

fn run_config(cli: &Cli, p: &Pipeline, start: &StartArg) -> Result<RunConfig> {
    let x0 = p.initial_point(start.x0.as_deref(), start.y0.as_deref())?;
    Ok(RunConfig { t0: start.t0, x0, y0: start.y0.clone(), seed: cli.seed, flow: cli.flow_options()? })
}

/// Exit code of a successful dispatch: 0, or 1 when a check failed.
fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Validate { sys, samples } => {
            let p = pipeline(sys)?;
            let qh = validate_qh(&p.loaded.sys, *samples, &[0.5, 2.0, 7.0], cli.seed)?;
            let res = validate_res(&p.loaded.sys, (*samples / 10).max(5), cli.seed)?;
            let names = &p.loaded.sys.states;
            let pass = qh.pass && res.pass;
            cli.emit_json(&json!({
                "system": p.loaded.sys.name,
                "seed": cli.seed,
                "pass": pass,
                "qh": {
                    "pass": qh.pass,
                    "euler_identity_worst": qh.euler_worst,
                    "resampled": qh.resampled,
                    "components": qh.components.iter().map(|c| json!({
                        "state": names[c.index], "worst_scaling_residual": c.worst, "pass": c.pass,
                    })).collect::<Vec<_>>(),
                },
                "res": {
                    "pass": res.pass,
                    "resampled": res.resampled,
                    "components": res.components.iter().map(|c| json!({
                        "state": names[c.index], "decay_exponent": c.worst, "pass": c.pass,
                    })).collect::<Vec<_>>(),
                },
            }))?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Balance { sys, t, trace } => {
            let p = pipeline(sys)?;
            let roots = p.bl.find_roots(*t, &p.search(cli.seed));
            let grid = p.loaded.t_grid();
            let items: Vec<_> = roots
                .iter()
                .map(|r| {
                    let eq = balance::root_to_equilibrium(&p.df, r);
                    let family = trace.then(|| {
                        balance::continue_family(&p.bl, r, &grid)
                            .into_iter()
                            .zip(&grid)
                            .map(|(f, t)| json!({ "t": t, "y0": f.map(|r| r.y0) }))
                            .collect::<Vec<_>>()
                    });
                    json!({
                        "root": RootRecord::from(r),
                        "equilibrium": match &eq {
                            Ok(e) => json!({ "x_star": e.x_star, "c_star": e.c_star, "r": e.r }),
                            Err(e) => json!({ "error": e.to_string() }),
                        },
                        "family": family,
                    })
                })
                .collect();
            cli.emit_json(&json!({ "system": p.loaded.sys.name, "t": t, "seed": cli.seed, "roots": items }))?;
            Ok(0)
        }
        Command::Spectrum { sys, t } => {
            let p = pipeline(sys)?;
            let mut failed = false;
            let items: Vec<_> = p
                .correspond(*t, cli.seed)
                .into_iter()
                .map(|(r, a)| match a {
                    Ok(rep) => json!({
                        "root": RootRecord::from(&r),
                        "spec_a_ext": rep.power.spec_ext.iter().map(|&z| Cx::from(z)).collect::<Vec<_>>(),
                        "spec_dg": rep.spec_dg.iter().map(|&z| Cx::from(z)).collect::<Vec<_>>(),
                        "spec_dg_predicted": rep.predicted_dg.iter().map(|&z| Cx::from(z)).collect::<Vec<_>>(),
                        "c_star": rep.eq.c_star,
                        "r": rep.eq.r,
                    }),
                    Err(e) => {
                        failed = true;
                        json!({ "root": RootRecord::from(&r), "error": e.to_string() })
                    }
                })
                .collect();
            cli.emit_json(&json!({ "system": p.loaded.sys.name, "t": t, "seed": cli.seed, "roots": items }))?;
            Ok(if failed { 2 } else { 0 })
        }
        Command::Correspond { sys, t } => {
            let p = pipeline(sys)?;
            let mut code = 0;
            let items: Vec<_> = p
                .correspond(*t, cli.seed)
                .into_iter()
                .map(|(r, a)| match a {
                    Ok(rep) => {
                        let rec = AnalysisRecord::new(&p.loaded.sys, &rep);
                        if rec.spectrum_mismatch > crate::run::SPECTRUM_TOL
                            || rec.max_vector_residual > crate::run::VECTOR_TOL
                            || !rec.verdict.stability_gap
                        {
                            code = code.max(1);
                        }
                        serde_json::to_value(rec).expect("record serializes")
                    }
                    Err(e) => {
                        code = 2;
                        json!({ "root": RootRecord::from(&r), "error": e.to_string() })
                    }
                })
                .collect();
            cli.emit_json(&json!({ "system": p.loaded.sys.name, "t": t, "seed": cli.seed, "roots": items }))?;
            Ok(code)
        }
        Command::Flow { sys, start, every } => {
            let p = pipeline(sys)?;
            let cfg = run_config(cli, &p, start)?;
            let opts = FlowOptions { record_every: *every, ..cfg.flow };
            let traj = p.integrate(cfg.t0, &cfg.x0, &opts);
            export::write_trajectory(&traj, cli.sink()?)?;
            if traj.converged() {
                Ok(0)
            } else {
                eprintln!("trajectory did not converge: {}", crate::report::status_label(&traj.status));
                Ok(2)
            }
        }
        Command::Tmax { sys, start } => {
            let p = pipeline(sys)?;
            let cfg = run_config(cli, &p, start)?;
            let traj = p.integrate(cfg.t0, &cfg.x0, &FlowOptions { record_every: 1000, ..cfg.flow });
            let tm = flow::t_max(&p.df, &traj).ok();
            cli.emit_json(&json!({
                "system": p.loaded.sys.name,
                "t0": cfg.t0,
                "x0": cfg.x0,
                "flow": FlowRecord::new(&traj, tm.as_ref()),
            }))?;
            Ok(if tm.is_some() { 0 } else { 2 })
        }
        Command::Report { sys, start } => {
            let p = pipeline(sys)?;
            let cfg = run_config(cli, &p, start)?;
            let rep = p.report(&cfg);
            cli.emit_json(&rep)?;
            Ok(if rep.error.is_some() {
                2
            } else if rep.passed() {
                0
            } else {
                1
            })
        }
        Command::Sweep { sys, t0_list, x0 } => {
            let p = pipeline(sys)?;
            let opts = cli.flow_options()?;
            let x0 = p.initial_point(Some(x0), None)?;
            let rows = p.sweep(t0_list, &x0, &opts);
            export::write_sweep(&rows, cli.sink()?)?;
            Ok(0)
        }
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
