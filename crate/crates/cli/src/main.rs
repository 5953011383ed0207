mod commands;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{RunConfig, Scope, KEYS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gsdeform::Error),
    #[error("{0}")]
    Usage(String),
}

fn config_args(cmd: Command, scopes: &[Scope]) -> Command {
    let mut cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("flat key=value configuration file"),
    );
    for (key, scope, help) in KEYS {
        if scopes.contains(scope) {
            cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").help(*help));
        }
    }
    cmd
}

fn output_arg() -> Arg {
    Arg::new("output").short('o').long("output").value_name("PATH").required(true)
}

fn cli() -> Command {
    Command::new("gsdeform")
        .about("Cage construction and cage-based deformation for Gaussian splatting scenes")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(config_args(
            Command::new("build-cage")
                .about("Build a closed cage around a Gaussian scene")
                .arg(Arg::new("input").required(true).value_name("SCENE.ply"))
                .arg(output_arg().help("cage mesh (.obj or .ply)"))
                .arg(Arg::new("json").long("json").value_name("PATH").help("write the metrics report as JSON"))
                .arg(Arg::new("dump-dir").long("dump-dir").value_name("DIR").help("write depth maps, volumes and the raw mesh")),
            &[Scope::Cage, Scope::Common],
        ))
        .subcommand(config_args(
            Command::new("deform")
                .about("Deform a scene by moving its cage")
                .arg(Arg::new("input").required(true).value_name("SCENE.ply"))
                .arg(Arg::new("cage-source").long("cage-source").value_name("MESH").required(true).help("rest cage (also -cs)"))
                .arg(Arg::new("cage-target").long("cage-target").value_name("MESH").required(true).help("deformed cage (also -cd)"))
                .arg(output_arg().help("deformed scene PLY"))
                .arg(Arg::new("cache").long("cache").value_name("PATH").help("reuse or create a precompute cache"))
                .arg(Arg::new("report").long("report").action(ArgAction::SetTrue).help("print split count and timings")),
            &[Scope::Deform, Scope::Common],
        ))
        .subcommand(config_args(
            Command::new("metrics")
                .about("Report cage quality, optionally against a scene")
                .arg(Arg::new("input").required(true).value_name("MESH"))
                .arg(Arg::new("scene").long("scene").value_name("SCENE.ply").help("points for enclosure and MVC statistics"))
                .arg(Arg::new("json").long("json").value_name("PATH").help("write the report as JSON")),
            &[Scope::Cage, Scope::Common],
        ))
        .subcommand(
            Command::new("convert")
                .about("Convert a 2D Gaussian (surfel) PLY into a 3D Gaussian PLY")
                .arg(Arg::new("input").required(true).value_name("SURFELS.ply"))
                .arg(output_arg().help("3D Gaussian PLY")),
        )
}

/// Accepts the short two-letter cage options `-cs` and `-cd`.
fn normalize_args(args: impl IntoIterator<Item = OsString>) -> Vec<OsString> {
    args.into_iter()
        .map(|a| match a.to_str() {
            Some("-cs") => OsString::from("--cage-source"),
            Some("-cd") => OsString::from("--cage-target"),
            _ => a,
        })
        .collect()
}

fn run_config(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(path.as_ref())?;
    }
    for (key, _, _) in KEYS {
        if let Ok(Some(v)) = m.try_get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            // Keep the message and any listed arguments, drop usage and tips.
            let text = e.to_string();
            let parts: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("tip:"))
                .collect();
            return Err(CliError::Usage(parts.join(" ").trim_start_matches("error: ").to_string()));
        }
    };
    match matches.subcommand() {
        Some(("build-cage", m)) => {
            let cfg = run_config(m)?;
            init_threads(cfg.threads)?;
            commands::build_cage(m, &cfg)
        }
        Some(("deform", m)) => {
            let cfg = run_config(m)?;
            init_threads(cfg.threads)?;
            commands::deform(m, &cfg)
        }
        Some(("metrics", m)) => {
            let cfg = run_config(m)?;
            init_threads(cfg.threads)?;
            commands::metrics(m)
        }
        Some(("convert", m)) => commands::convert(m),
        _ => unreachable!("a subcommand is required"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(normalize_args(std::env::args_os())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
