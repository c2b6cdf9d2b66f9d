use std::fs;

use serde::Serialize;
use tss_core::noise::NoiseSpec;
use tss_core::tss::TssConfig;

use super::experiment::{aggregate, run_seed, tss_config, Aggregate, Artifact, Experiment, RunResult};
use super::{hash_inputs, load};
use crate::args::{Method, NoiseArgs, TrainArgs};
use crate::cache::ppr_cached;
use crate::error::CliResult;
use crate::manifest::{write_json, write_text, Manifest};

#[derive(Serialize)]
struct TrainRunConfig {
    method: Method,
    tss: TssConfig,
    noise: Option<NoiseSpec>,
    root_seed: u64,
    runs: usize,
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    method: Method,
    runs: &'a [RunResult],
    aggregate: Aggregate,
}

pub fn noise_template(noise: &NoiseArgs, rate: f64) -> CliResult<NoiseSpec> {
    let spec = NoiseSpec {
        scope: noise.noise_scope,
        instance_std: noise.instance_std,
        ..NoiseSpec::new(noise.noise_kind, rate, 0)
    };
    spec.validate()?;
    Ok(spec)
}

pub fn run(a: TrainArgs) -> CliResult<()> {
    let config = TrainRunConfig {
        method: a.method,
        tss: tss_config(&a.knobs, a.alpha, a.lambda0, a.pacing),
        noise: a.noise_rate.map(|r| noise_template(&a.noise, r)).transpose()?,
        root_seed: a.knobs.seed,
        runs: a.knobs.seeds,
    };
    config.tss.validate()?;
    let mut manifest = Manifest::new("train", &config);
    manifest.seeds = (0..a.knobs.seeds).map(|k| run_seed(a.knobs.seed, k)).collect();
    let digest = hash_inputs(&a.graph, &mut manifest)?;
    let loaded = load(&a.graph, digest)?;
    manifest.write(&a.out)?;

    let ppr = match a.method {
        Method::Tss => Some(ppr_cached(&loaded.graph, &loaded.edges_digest, a.alpha)?),
        Method::Plain => None,
    };
    let experiment = Experiment {
        graph: &loaded.graph,
        labels: &loaded.labels,
        method: a.method,
        config: config.tss.clone(),
        noise: config.noise.clone(),
        ppr: ppr.as_ref(),
    };
    let outcomes = experiment.run(a.knobs.seed, a.knobs.seeds)?;
    for (result, artifact) in &outcomes {
        let dir = a.out.join("runs").join(format!("run_{:03}", result.index));
        fs::create_dir_all(&dir)?;
        match artifact {
            Artifact::History(csv) => write_text(&dir.join("history.csv"), csv)?,
            Artifact::Trace(lines) => write_text(&dir.join("trace.jsonl"), lines)?,
        }
        write_json(&dir.join("summary.json"), result)?;
    }
    let results: Vec<RunResult> = outcomes.into_iter().map(|(r, _)| r).collect();
    let report = MetricsReport {
        method: a.method,
        aggregate: aggregate(&results),
        runs: &results,
    };
    write_json(&a.out.join("metrics.json"), &report)?;
    match (report.aggregate.mean, report.aggregate.std) {
        (Some(m), Some(s)) => println!("{} test accuracy {:.4} ± {:.4} over {} run(s)", a.method.as_str(), m, s, results.len()),
        _ => println!("{} finished {} run(s); no clean test labels", a.method.as_str(), results.len()),
    }
    Ok(())
}
