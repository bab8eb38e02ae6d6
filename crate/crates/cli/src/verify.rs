use std::collections::BTreeMap;

use ghostfield::oracle::{
    default_corpus, reference::parity_collapse_deviation, Caps, CorpusEntry, ExactOracle, Identity,
    CORPUS_FIELDS, CORPUS_SPACINGS,
};
use serde::{Deserialize, Serialize};

use crate::manifest::RunTimer;
use crate::{create_dir, decode, read_table, Cli, CliError, CliResult};

pub const REPORT_FILE: &str = "verify.json";
pub const PARITY: &str = "PARITY";
pub const COUPLINGS: &str = "COUPLINGS";

/// `verify` configuration. Omitting `graphs` selects the built-in corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub spacings: Vec<f64>,
    pub fields: Vec<f64>,
    pub tolerance: f64,
    pub graphs: Option<Vec<CorpusEntry>>,
    /// Replaces `β_c` on every internal edge. Only useful as a negative
    /// control: the coupling check then fails.
    pub internal_coupling: Option<f64>,
    pub caps: Caps,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            spacings: CORPUS_SPACINGS.to_vec(),
            fields: CORPUS_FIELDS.to_vec(),
            tolerance: 1e-10,
            graphs: None,
            internal_coupling: None,
            caps: Caps::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub graph: String,
    pub spacing: f64,
    pub field: f64,
    pub check: String,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub tolerance: f64,
    pub graphs: usize,
    /// Worst row for each check.
    pub worst: BTreeMap<String, CheckRow>,
    pub rows: Vec<CheckRow>,
}

pub fn check_names() -> Vec<&'static str> {
    let mut names: Vec<&str> = Identity::ALL.iter().map(|i| i.name()).collect();
    names.push(PARITY);
    names.push(COUPLINGS);
    names
}

/// Runs every identity, the parity-collapse comparison and the coupling
/// check on every corpus graph at every `(a, h)`.
pub fn run_verify(cfg: &VerifyConfig) -> CliResult<VerifyReport> {
    let corpus = cfg.graphs.clone().unwrap_or_else(default_corpus);
    if corpus.is_empty() || cfg.spacings.is_empty() || cfg.fields.is_empty() {
        return Err(CliError::Config("no graphs to verify: the corpus or its (a, h) grid is empty".into()));
    }
    if !(cfg.tolerance >= 0.0) {
        return Err(CliError::Config(format!("tolerance {} must be nonnegative", cfg.tolerance)));
    }
    let oracle = ExactOracle::with_caps(cfg.caps);
    let mut rows = Vec::new();
    for entry in &corpus {
        for &a in &cfg.spacings {
            for &h in &cfg.fields {
                let label = format!("graph `{}` at a={a}, h={h}", entry.name);
                let wrap = |e| CliError::from_core(e, &label);
                let mut g = entry.build(a, h).map_err(wrap)?;
                if let Some(j) = cfg.internal_coupling {
                    g = g.with_internal_coupling(j).map_err(wrap)?;
                }
                let mut push = |check: &str, deviation: f64| {
                    rows.push(CheckRow {
                        graph: entry.name.clone(),
                        spacing: a,
                        field: h,
                        check: check.into(),
                        deviation,
                    })
                };
                for id in Identity::ALL {
                    push(id.name(), oracle.verify_identity(&g, id).map_err(wrap)?);
                }
                let last = g.num_sites() - 1;
                let mut parity: f64 = 0.0;
                for sources in [vec![], vec![0, last]] {
                    if sources.len() == 2 && last == 0 {
                        continue;
                    }
                    parity = parity.max(parity_collapse_deviation(&oracle, &g, &sources).map_err(wrap)?);
                }
                push(PARITY, parity);
                push(COUPLINGS, g.coupling_deviation());
            }
        }
    }
    let mut worst: BTreeMap<String, CheckRow> = BTreeMap::new();
    for r in &rows {
        let keep = match worst.get(&r.check) {
            Some(w) => r.deviation.is_nan() || r.deviation > w.deviation,
            None => true,
        };
        if keep {
            worst.insert(r.check.clone(), r.clone());
        }
    }
    let passed = rows.iter().all(|r| r.deviation <= cfg.tolerance);
    Ok(VerifyReport {
        passed,
        tolerance: cfg.tolerance,
        graphs: corpus.len(),
        worst,
        rows,
    })
}

pub fn load_verify_config(cli: &Cli) -> CliResult<VerifyConfig> {
    match &cli.config {
        Some(path) => decode(read_table(path)?, "verify"),
        None => Ok(VerifyConfig::default()),
    }
}

pub fn cmd_verify(cli: &Cli, command: &[String]) -> CliResult<()> {
    let timer = RunTimer::start();
    let cfg = load_verify_config(cli)?;
    let report = run_verify(&cfg)?;
    for (check, w) in &report.worst {
        println!(
            "{check:<14} worst {:.3e} on `{}` (a={}, h={})",
            w.deviation, w.graph, w.spacing, w.field
        );
    }
    if let Some(dir) = &cli.out {
        create_dir(dir)?;
        let path = dir.join(REPORT_FILE);
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::io(&path, e))? + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        let config = serde_json::to_value(&cfg).map_err(|e| CliError::io(&path, e))?;
        timer
            .finish(command, "verify", config, None, dir, &[path])
            .write(dir)?;
    }
    if report.passed {
        println!("all checks within {:e}", report.tolerance);
        Ok(())
    } else {
        let bad: Vec<&str> = report
            .worst
            .iter()
            .filter(|(_, w)| !(w.deviation <= report.tolerance))
            .map(|(c, _)| c.as_str())
            .collect();
        Err(CliError::Failed(format!(
            "{} above tolerance {:e}",
            bad.join(", "),
            report.tolerance
        )))
    }
}
