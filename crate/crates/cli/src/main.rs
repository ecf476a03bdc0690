mod config;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};

use config::{Command, RunConfig, UsageError};

fn cli() -> clap::Command {
    let common = |c: clap::Command| {
        c.arg(Arg::new("config").long("config").value_name("FILE").help("flat 'key = value' file; flags override it"))
            .arg(Arg::new("out").long("out").value_name("DIR").default_value("wgflow-out").help("output directory"))
    };
    let mut app = clap::Command::new("wgflow")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Particle Wasserstein gradient flows: discrete flows, certified proximal steps and inequality sweeps")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name()).about(cmd.about());
        for (key, default, help) in cmd.keys() {
            sub = sub.arg(
                Arg::new(*key)
                    .long(*key)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .action(ArgAction::Set)
                    .help(format!("{help} [default: {default}]")),
            );
        }
        app = app.subcommand(common(sub));
    }
    app.subcommand(
        clap::Command::new("rerun")
            .about("Re-run a saved manifest and compare output hashes")
            .arg(Arg::new("manifest").required(true).value_name("MANIFEST"))
            .arg(Arg::new("out").long("out").value_name("DIR").help("output directory [default: <manifest dir>/rerun]")),
    )
}

fn resolve(cmd: Command, m: &ArgMatches) -> Result<RunConfig, UsageError> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => RunConfig::load(cmd, path.as_ref())?,
        None => RunConfig::defaults(cmd),
    };
    let flags: BTreeMap<String, String> = cmd
        .keys()
        .iter()
        .filter_map(|(k, _, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    cfg.apply(&flags)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = if name == "rerun" {
        let manifest = PathBuf::from(sub.get_one::<String>("manifest").expect("required"));
        let out = sub.get_one::<String>("out").map(PathBuf::from);
        run::rerun(&manifest, out)
    } else {
        let cmd: Command = name.parse().expect("registered subcommand");
        let out = PathBuf::from(sub.get_one::<String>("out").expect("has default"));
        resolve(cmd, sub).map_err(run::Failure::Usage).and_then(|cfg| run::execute(&cfg, &out))
    };
    match result {
        Ok(status) => status.exit_code(),
        Err(f) => {
            eprintln!("wgflow: {f}");
            f.exit_code()
        }
    }
}
