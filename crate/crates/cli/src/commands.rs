use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use bar_core::bounds::{
    fano_lower_bound, mixing_bound, rw_analysis, sample_complexity_selection, sample_complexity_trimming,
    stationary_floors,
};
use bar_core::exactchain::{identifiability_margin, write_tv_csv, ExactChain};
use bar_core::harness::{parse_rules, random_andor_network, run_sweep, sample_boolean_trajectory, BooleanNetwork, SweepConfig};
use bar_core::infer::{metrics, observe, ObserverMode};
use bar_core::model::{random_degrees, random_model, BarModel, GeneratorParams, GraphTruth};
use bar_core::rng::derive_seed;
use bar_core::simulate::{sample_rw_trajectory, sample_trajectory, Init, StateVector, Trajectory};
use log::{info, warn};
use serde_json::json;

use crate::error::CliError;
use crate::{BoundsArgs, DynamicsArg, ExactArgs, GenerateArgs, InferArgs, InitArg, ModeArg, RulesArgs, SimulateArgs, SweepArgs};

/// Reads an argument that is either inline JSON or a path to a file.
fn read_json_arg(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Io(format!("{arg}: {e}")))
    }
}

fn load_model(arg: &str) -> Result<BarModel, CliError> {
    Ok(BarModel::from_json(&read_json_arg(arg)?)?)
}

fn load_rules(path: &Path) -> Result<BooleanNetwork, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_rules(&text)?)
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = open_output(out)?;
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn generate(args: &GenerateArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let degrees = match (args.d, args.max_degree) {
        (Some(d), _) => vec![d; args.p],
        (None, Some(d_max)) => random_degrees(args.p, d_max, derive_seed(seed, &[1])),
        (None, None) => return Err(CliError::Config("one of --d or --max-degree is required".into())),
    };
    let params = GeneratorParams {
        p: args.p,
        degrees,
        a_min: args.a_min,
        b_min: args.b_min,
        b_max: args.b_max,
        rho_w: args.rho_w,
        sign_prob: args.sign_prob,
        weight_cap: args.weight_cap,
    };
    let (model, _) = random_model(&params, seed)?;
    info!("generated model {} with {} nodes", model.model_id(), model.p());
    emit(out, |w| writeln!(w, "{}", model.to_json()))
}

pub fn simulate(args: &SimulateArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let p = model.p();
    let traj = match args.dynamics {
        DynamicsArg::Bar => {
            let init = match args.init {
                InitArg::BurnIn => Init::BurnIn,
                InitArg::Stationary => Init::ExactStationary,
                InitArg::Zeros => Init::Explicit(StateVector::zeros(p)),
                InitArg::Ones => Init::Explicit(StateVector::ones(p)),
            };
            sample_trajectory(&model, args.n, &init, seed)?
        }
        DynamicsArg::Rw | DynamicsArg::LazyRw => {
            let x0 = match args.init {
                InitArg::Zeros => StateVector::zeros(p),
                InitArg::Ones => StateVector::ones(p),
                _ => return Err(CliError::Config("walks start from --init zeros or --init ones".into())),
            };
            let lazy = if args.dynamics == DynamicsArg::LazyRw { args.lazy_prob } else { 0.0 };
            sample_rw_trajectory(&model, args.n, &x0, lazy, seed)?
        }
    };
    emit(out, |w| traj.write_csv(w))
}

pub fn exact(args: &ExactArgs, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let chain = ExactChain::build(&model)?;
    if args.stationary {
        return emit(out, |w| chain.write_stationary_csv(w));
    }
    if let Some(n_max) = args.tv_curve {
        let curve = chain.tv_curve(n_max);
        return emit(out, |w| write_tv_csv(&curve, w));
    }
    let mut mixing = Vec::new();
    for &theta in &args.theta {
        let exact = chain.exact_mixing_time(theta, args.max_steps)?;
        let bound = mixing_bound(&model, theta)?;
        mixing.push(json!({
            "theta": theta,
            "exact": exact,
            "bound_primary": bound.primary,
            "bound_loose": bound.loose,
        }));
    }
    let margin = identifiability_margin(&chain, &model.truth())?;
    let report = json!({
        "model_id": model.model_id(),
        "p": model.p(),
        "stationary_residual": chain.stationary_residual(),
        "marginals": chain.marginals(),
        "mixing": mixing,
        "margin": {
            "identifiable": margin.identifiable,
            "min_chi": margin.min_chi(),
            "chi": margin.chi,
            "sign_consistent": margin.sign_consistent,
        },
    });
    emit_json(out, &report)
}

pub fn bounds(args: &BoundsArgs, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let d = args.d.unwrap_or_else(|| model.max_degree());
    let floors = stationary_floors(&model, d, args.theta, args.refine)?;
    let t_mix = floors.mixing_bound_primary as f64;
    let eps_tilde = args.eps_tilde.unwrap_or(model.a_min() / 4.0);
    let selection = sample_complexity_selection(model.p(), args.gamma, args.theta, args.eps, floors.beta_tilde, t_mix, args.c)?;
    let trimming = sample_complexity_trimming(model.p(), d, args.gamma, eps_tilde, floors.beta_bar, t_mix, args.c)?;
    let fano = fano_lower_bound(model.p(), &model.degrees(), args.gamma)?;
    let walk = rw_analysis(&model, args.theta, args.lazy_prob)?;
    let report = json!({
        "model_id": model.model_id(),
        "floors": floors,
        "samples_selection": selection,
        "samples_trimming": trimming,
        "fano_lower_bound": fano,
        "walk": walk,
    });
    emit_json(out, &report)
}

pub fn infer(args: &InferArgs, out: Option<&Path>) -> Result<(), CliError> {
    let traj = Trajectory::load_csv(&args.trajectory)?;
    let mode = match args.mode {
        ModeArg::Selection => ObserverMode::SelectionOnly,
        ModeArg::KnownDegrees => {
            if args.degrees.len() != traj.p() {
                return Err(CliError::Config(format!(
                    "known-degrees mode needs --degrees with {} entries, got {}",
                    traj.p(),
                    args.degrees.len()
                )));
            }
            ObserverMode::KnownDegrees(args.degrees.clone())
        }
        ModeArg::Full => ObserverMode::Full { tau: args.tau },
    };
    let truth: Option<GraphTruth> = match (&args.model, &args.rules) {
        (Some(model), _) => {
            let model = load_model(model)?;
            if args.mode == ModeArg::Full && bar_core::infer::check_threshold(args.tau, model.a_min()).is_err() {
                warn!("tau = {} exceeds a_min / 4 = {}", args.tau, model.a_min() / 4.0);
            }
            if !traj.model_id.is_empty() && traj.model_id != model.model_id() {
                warn!("trajectory was simulated from model {}, scoring against {}", traj.model_id, model.model_id());
            }
            Some(model.truth())
        }
        (None, Some(path)) => Some(load_rules(path)?.truth()),
        (None, None) => None,
    };
    if let Some(t) = &truth {
        if t.p() != traj.p() {
            return Err(CliError::Config(format!("truth has {} nodes, trajectory has {}", t.p(), traj.p())));
        }
    }
    let estimate = observe(&traj, args.d, &mode)?;
    for w in &estimate.warnings {
        warn!("{w}");
    }
    let mut report = serde_json::to_value(estimate.to_file())?;
    if let Some(t) = &truth {
        report["metrics"] = serde_json::to_value(metrics(&estimate, t))?;
    }
    emit_json(out, &report)
}

pub fn sweep(args: &SweepArgs, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let mut config = SweepConfig::from_json(&read_json_arg(&args.config)?)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.record_wall_time |= args.wall_time;
    config.validate()?;
    let report = run_sweep(&config)?;
    for row in report.errors() {
        warn!("n = {} trial {} failed: {}", row.n, row.trial, row.error.as_deref().unwrap_or("?"));
    }
    let target = out.or(config.output.as_deref());
    emit(target, |w| report.write_csv(w))
}

pub fn rules(args: &RulesArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let mut net = match (&args.rules, args.random) {
        (Some(path), _) => load_rules(path)?,
        (None, Some(p)) => random_andor_network(p, args.fan_in, args.noise.unwrap_or(0.1), derive_seed(seed, &[2]))?,
        (None, None) => return Err(CliError::Config("one of --rules or --random is required".into())),
    };
    if let Some(noise) = args.noise {
        net = net.with_noise(noise)?;
    }
    if args.print {
        return emit(out, |w| write!(w, "{net}"));
    }
    let traj = sample_boolean_trajectory(&net, args.n, args.burn_in, seed);
    emit(out, |w| traj.write_csv(w))
}
