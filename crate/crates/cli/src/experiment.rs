use std::path::PathBuf;

use ghostfield::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

use crate::manifest::RunTimer;
use crate::{create_dir, decode, read_table, seed_from_table, Cli, CliError, CliResult};

pub fn parse_kind(name: &str) -> CliResult<ExperimentKind> {
    name.parse().map_err(|_| {
        let known: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("unknown experiment `{name}`; expected one of {}", known.join(", ")))
    })
}

/// Resolves the configuration: defaults for `kind`, then the file's keys,
/// then flags. The seed must come from the file or `--seed`.
pub fn resolve_config(kind: ExperimentKind, cli: &Cli) -> CliResult<(ExperimentConfig, PathBuf)> {
    let defaults = ExperimentConfig::defaults(kind);
    let mut table = toml::Table::try_from(&defaults)
        .map_err(|e| CliError::Config(format!("default config: {e}")))?;
    let mut seed = None;
    if let Some(path) = &cli.config {
        let file = read_table(path)?;
        seed = seed_from_table(&file)?;
        table.extend(file);
    }
    // Seeds above i64::MAX cannot live in a TOML table; set it after decoding.
    table.insert("seed".into(), toml::Value::Integer(0));
    let mut cfg: ExperimentConfig = decode(table, kind.name())?;
    if cfg.kind != kind {
        return Err(CliError::Config(format!(
            "config is for `{}` but `{}` was requested",
            cfg.kind, kind
        )));
    }
    cfg.seed = cli.seed.or(seed).ok_or_else(|| {
        CliError::Config("a master seed is required: set `seed` in the config or pass --seed".into())
    })?;
    if let Some(scale) = cli.budget_scale {
        cfg = cfg.scaled(scale)?;
    }
    let out = cli
        .out
        .clone()
        .or(cfg.out.take())
        .unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
    cfg.validate()?;
    Ok((cfg, out))
}

pub fn cmd_experiment(name: &str, cli: &Cli, command: &[String]) -> CliResult<()> {
    let timer = RunTimer::start();
    let kind = parse_kind(name)?;
    let (cfg, dir) = resolve_config(kind, cli)?;
    create_dir(&dir)?;
    let output = run_experiment(&cfg)?;
    let files = output
        .write(&dir)
        .map_err(|e| CliError::from_core(e, &dir.display().to_string()))?;
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::io(&dir, e))?;
    timer
        .finish(command, &format!("experiment {}", kind.name()), config, Some(cfg.seed), &dir, &files)
        .write(&dir)?;
    for (flag, ok) in &output.summary.flags {
        println!("{flag}: {ok}");
    }
    println!("wrote {} files to {}", files.len() + 1, dir.display());
    Ok(())
}
