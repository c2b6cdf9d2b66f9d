use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use serde::{Deserialize, Serialize};
use tss_core::noise::NoiseSpec;
use tss_core::tss::{PacingKind, TssConfig};
use tss_core::PprMatrix;

use super::experiment::{aggregate, run_seed, tss_config, Aggregate, Experiment, RunResult};
use super::train::noise_template;
use super::{hash_inputs, load};
use crate::args::{Method, SweepArgs};
use crate::cache::ppr_cached;
use crate::error::CliResult;
use crate::manifest::{write_json, write_text, Manifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Cell {
    method: Method,
    noise_rate: Option<f64>,
    alpha: Option<f64>,
    lambda0: Option<f64>,
    pacing: Option<PacingKind>,
}

impl Cell {
    fn key(&self) -> String {
        let mut key = self.method.as_str().to_string();
        if let Some(r) = self.noise_rate {
            write!(key, "_noise{r}").unwrap();
        }
        if let (Some(a), Some(l), Some(p)) = (self.alpha, self.lambda0, self.pacing) {
            write!(key, "_alpha{a}_lambda{l}_{p}").unwrap();
        }
        key
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CellReport {
    cell: Cell,
    config: TssConfig,
    noise: Option<NoiseSpec>,
    runs: Vec<RunResult>,
    aggregate: Aggregate,
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    base: TssConfig,
    cells: &'a [Cell],
    noise: Option<NoiseSpec>,
    root_seed: u64,
    runs: usize,
}

fn grid(a: &SweepArgs) -> Vec<Cell> {
    let rates: Vec<Option<f64>> = if a.noise_rate.is_empty() {
        vec![None]
    } else {
        a.noise_rate.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for &method in &a.methods {
        for &noise_rate in &rates {
            match method {
                Method::Plain => cells.push(Cell {
                    method,
                    noise_rate,
                    alpha: None,
                    lambda0: None,
                    pacing: None,
                }),
                Method::Tss => {
                    for &alpha in &a.alpha {
                        for &lambda0 in &a.lambda0 {
                            for &pacing in &a.pacing {
                                cells.push(Cell {
                                    method,
                                    noise_rate,
                                    alpha: Some(alpha),
                                    lambda0: Some(lambda0),
                                    pacing: Some(pacing),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells.dedup();
    cells
}

pub fn run(a: SweepArgs) -> CliResult<()> {
    let base = tss_config(&a.knobs, a.alpha[0], a.lambda0[0], a.pacing[0]);
    let template = match a.noise_rate.first() {
        Some(&r) => Some(noise_template(&a.noise, r)?),
        None => None,
    };
    let cells = grid(&a);
    for cell in &cells {
        cell_config(&base, cell).validate()?;
        if let Some(r) = cell.noise_rate {
            noise_template(&a.noise, r)?;
        }
    }
    let config = SweepConfig {
        base: base.clone(),
        cells: &cells,
        noise: template.clone(),
        root_seed: a.knobs.seed,
        runs: a.knobs.seeds,
    };
    let mut manifest = Manifest::new("sweep", &config);
    manifest.seeds = (0..a.knobs.seeds).map(|k| run_seed(a.knobs.seed, k)).collect();
    let digest = hash_inputs(&a.graph, &mut manifest)?;
    let loaded = load(&a.graph, digest)?;
    manifest.write(&a.out)?;
    let cell_dir = a.out.join("cells");
    fs::create_dir_all(&cell_dir)?;

    let mut pprs: BTreeMap<u64, PprMatrix> = BTreeMap::new();
    let mut reports = Vec::with_capacity(cells.len());
    for cell in &cells {
        let cfg = cell_config(&base, cell);
        let noise = cell.noise_rate.map(|r| noise_template(&a.noise, r)).transpose()?;
        let path = cell_dir.join(format!("{}.json", cell.key()));
        if let Some(done) = completed(&path, cell, &cfg, &noise, a.knobs.seeds) {
            log::info!("cell {} already complete", cell.key());
            reports.push(done);
            continue;
        }
        let ppr = match cell.alpha {
            Some(alpha) => {
                if !pprs.contains_key(&alpha.to_bits()) {
                    pprs.insert(alpha.to_bits(), ppr_cached(&loaded.graph, &loaded.edges_digest, alpha)?);
                }
                pprs.get(&alpha.to_bits())
            }
            None => None,
        };
        let experiment = Experiment {
            graph: &loaded.graph,
            labels: &loaded.labels,
            method: cell.method,
            config: cfg.clone(),
            noise: noise.clone(),
            ppr,
        };
        let runs: Vec<RunResult> = experiment.run(a.knobs.seed, a.knobs.seeds)?.into_iter().map(|(r, _)| r).collect();
        let report = CellReport {
            cell: cell.clone(),
            config: cfg,
            noise,
            aggregate: aggregate(&runs),
            runs,
        };
        let tmp = path.with_extension("json.partial");
        write_json(&tmp, &report)?;
        fs::rename(&tmp, &path)?;
        log::info!("cell {} done", cell.key());
        reports.push(report);
    }

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::from("method,noise_rate,alpha,lambda0,pacing,mean,std,runs\n");
    for r in &reports {
        let c = &r.cell;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            c.method.as_str(),
            opt(c.noise_rate),
            opt(c.alpha),
            opt(c.lambda0),
            c.pacing.map(|p| p.to_string()).unwrap_or_default(),
            opt(r.aggregate.mean),
            opt(r.aggregate.std),
            r.aggregate.runs
        )
        .unwrap();
    }
    write_text(&a.out.join("sweep.csv"), &csv)?;
    println!("{} cell(s) written to {}", reports.len(), a.out.join("sweep.csv").display());
    Ok(())
}

fn cell_config(base: &TssConfig, cell: &Cell) -> TssConfig {
    TssConfig {
        alpha: cell.alpha.unwrap_or(base.alpha),
        lambda0: cell.lambda0.unwrap_or(base.lambda0),
        pacing: cell.pacing.unwrap_or(base.pacing),
        ..base.clone()
    }
}

/// A previously written cell with the same configuration, if any.
fn completed(
    path: &std::path::Path,
    cell: &Cell,
    cfg: &TssConfig,
    noise: &Option<NoiseSpec>,
    runs: usize,
) -> Option<CellReport> {
    let text = fs::read_to_string(path).ok()?;
    let report: CellReport = serde_json::from_str(&text).ok()?;
    (report.cell == *cell && report.config == *cfg && report.noise == *noise && report.runs.len() == runs)
        .then_some(report)
}

