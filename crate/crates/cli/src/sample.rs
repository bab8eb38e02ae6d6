use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use ghostfield::samplers::dump::{DumpHeader, DumpWriter};
use ghostfield::samplers::{FkChain, RngStream, TraceChain};
use ghostfield::{BondConfig, BoundaryCondition, GhostGraph, Rect};
use serde::{Deserialize, Serialize};

use crate::manifest::RunTimer;
use crate::{create_dir, decode, read_table, seed_from_table, Cli, CliError, CliResult};

pub const DUMP_FILE: &str = "samples.bin";
pub const INDEX_FILE: &str = "samples.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Random-cluster bonds from the composite chain.
    Fk,
    /// Sourceless current traces, FREE boundary only.
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Wired,
}

/// `sample` configuration: a `width × height` box in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
    pub measure: Measure,
    pub boundary: Boundary,
    pub spacing: f64,
    pub field: f64,
    pub width: f64,
    pub height: f64,
    pub samples: u64,
    pub burn_in: u64,
    /// Sweeps between recorded samples.
    pub thin: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: 0,
            measure: Measure::Fk,
            boundary: Boundary::Free,
            spacing: 1.0,
            field: 0.0,
            width: 16.0,
            height: 16.0,
            samples: 100,
            burn_in: 200,
            thin: 1,
        }
    }
}

pub fn resolve_sample_config(cli: &Cli) -> CliResult<SampleConfig> {
    let mut table = toml::Table::new();
    let mut seed = None;
    if let Some(path) = &cli.config {
        table = read_table(path)?;
        seed = seed_from_table(&table)?;
        table.remove("seed");
    }
    let mut cfg: SampleConfig = decode(table, "sample")?;
    cfg.seed = cli.seed.or(seed).ok_or_else(|| {
        CliError::Config("a master seed is required: set `seed` in the config or pass --seed".into())
    })?;
    if let Some(scale) = cli.budget_scale {
        cfg.samples = ((cfg.samples as f64 * scale).round() as u64).max(1);
        cfg.burn_in = (cfg.burn_in as f64 * scale).round() as u64;
    }
    if cfg.samples == 0 || cfg.thin == 0 {
        return Err(CliError::Config("samples and thin must be positive".into()));
    }
    if cfg.measure == Measure::Trace && cfg.boundary == Boundary::Wired {
        return Err(CliError::Config("current traces are drawn with FREE boundary only".into()));
    }
    Ok(cfg)
}

/// Runs the chain and writes the bond dump plus a per-sample index.
pub fn draw_samples(cfg: &SampleConfig, dir: &std::path::Path) -> CliResult<Vec<PathBuf>> {
    let domain = Rect::closed(0.0, cfg.width, 0.0, cfg.height);
    let g = GhostGraph::build_domain_graph(domain, cfg.spacing, cfg.field)?;
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let dump_path = dir.join(DUMP_FILE);
    let index_path = dir.join(INDEX_FILE);
    let file = File::create(&dump_path).map_err(|e| CliError::io(&dump_path, e))?;
    let header = DumpHeader {
        graph_hash: g.content_hash(),
        seed: cfg.seed,
        stream: 0,
        num_edges: g.num_edges() as u64,
    };
    let mut dump = DumpWriter::new(BufWriter::new(file), &header)?;
    let index = File::create(&index_path).map_err(|e| CliError::io(&index_path, e))?;
    let mut index = BufWriter::new(index);
    let io = |e| CliError::io(&index_path, e);
    writeln!(index, "sample,sweep,open_internal,open_external").map_err(io)?;
    let mut record = |k: u64, sweep: u64, bonds: &BondConfig| -> CliResult<()> {
        dump.write(sweep, bonds)?;
        let internal = bonds.iter_open().filter(|&e| !g.is_external(e)).count();
        let external = bonds.count_open() - internal;
        writeln!(index, "{k},{sweep},{internal},{external}").map_err(io)
    };
    match cfg.measure {
        Measure::Fk => {
            let bc = match cfg.boundary {
                Boundary::Free => BoundaryCondition::Free,
                Boundary::Wired => BoundaryCondition::Wired,
            };
            let mut chain = FkChain::new(&g, &bc)?;
            chain.run(cfg.burn_in, &mut rng);
            for k in 0..cfg.samples {
                chain.run(cfg.thin, &mut rng);
                record(k, cfg.burn_in + (k + 1) * cfg.thin, chain.bonds())?;
            }
        }
        Measure::Trace => {
            let mut chain = TraceChain::new(&g)?;
            chain.burn(cfg.burn_in, &mut rng);
            for k in 0..cfg.samples {
                chain.burn(cfg.thin - 1, &mut rng);
                let trace = chain.sweep(&mut rng).trace.clone();
                record(k, cfg.burn_in + (k + 1) * cfg.thin, &trace)?;
            }
        }
    }
    dump.finish()?;
    index.flush().map_err(io)?;
    Ok(vec![dump_path, index_path])
}

pub fn cmd_sample(cli: &Cli, command: &[String]) -> CliResult<()> {
    let timer = RunTimer::start();
    let cfg = resolve_sample_config(cli)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results/sample"));
    create_dir(&dir)?;
    let files = draw_samples(&cfg, &dir)?;
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::io(&dir, e))?;
    timer
        .finish(command, "sample", config, Some(cfg.seed), &dir, &files)
        .write(&dir)?;
    println!("wrote {} samples to {}", cfg.samples, dir.display());
    Ok(())
}
