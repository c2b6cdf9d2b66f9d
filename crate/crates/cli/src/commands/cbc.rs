use std::fmt::Write as _;

use serde::Serialize;
use tss_core::centrality::{betweenness_centrality, cbc_scores, CbcConfig, BETWEENNESS_NODE_LIMIT};
use tss_core::graph::{classify_boundary, BoundaryTag, Split};

use super::{hash_inputs, load};
use crate::args::{CbcArgs, NodeSet};
use crate::cache::ppr_cached;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_json, write_text, Manifest};

#[derive(Serialize)]
struct CbcRunConfig {
    alpha: f64,
    cbc: CbcConfig,
    node_set: &'static str,
}

#[derive(Serialize)]
struct Summary {
    nodes_scored: usize,
    eligible_pairs: usize,
    pair_count: usize,
    skipped_pairs: usize,
    sampled_pairs: Option<usize>,
    near: usize,
    far: usize,
    near_mean: Option<f64>,
    far_mean: Option<f64>,
    /// `null` when either group is empty.
    separated: Option<bool>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn run(a: CbcArgs) -> CliResult<()> {
    let config = CbcRunConfig {
        alpha: a.alpha,
        cbc: CbcConfig {
            epsilon: a.eps,
            pair_budget: (a.pair_budget > 0).then_some(a.pair_budget),
            seed: a.seed,
        },
        node_set: match a.node_set {
            NodeSet::Train => "train",
            NodeSet::All => "all",
        },
    };
    let mut manifest = Manifest::new("cbc", &config);
    manifest.seeds.push(a.seed);
    let digest = hash_inputs(&a.graph, &mut manifest)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::input(format!("alpha {} outside (0, 1)", a.alpha)));
    }
    let loaded = load(&a.graph, digest)?;
    manifest.write(&a.out)?;

    let g = &loaded.graph;
    let n = g.node_count();
    let node_set: Vec<usize> = match a.node_set {
        NodeSet::Train => g.ids(Split::Train),
        NodeSet::All => (0..n).collect(),
    };
    let ppr = ppr_cached(g, &loaded.edges_digest, a.alpha)?;
    let scores = cbc_scores(&ppr, &loaded.labels, &node_set, &config.cbc)?;
    let clean = g.clean_labels().expect("loaded graphs carry labels");
    let tags = classify_boundary(g.adjacency(), clean)?;
    let bc = if n <= BETWEENNESS_NODE_LIMIT {
        Some(betweenness_centrality::<f64>(g.adjacency())?)
    } else {
        None
    };

    let mut csv = String::from("node_id,cbc,bc,boundary_tag,noisy_label,clean_label\n");
    for i in 0..n {
        let bc_field = bc.as_ref().map(|b| b[i].to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{i},{},{bc_field},{},{},{}",
            scores.scores[i],
            tags[i].as_str(),
            loaded.labels[i],
            clean[i]
        )
        .unwrap();
    }
    let (near, far): (Vec<f64>, Vec<f64>) = {
        let mut near = Vec::new();
        let mut far = Vec::new();
        for &i in &node_set {
            match tags[i] {
                BoundaryTag::Near => near.push(scores.scores[i]),
                BoundaryTag::Far => far.push(scores.scores[i]),
            }
        }
        (near, far)
    };
    let (near_mean, far_mean) = (mean(&near), mean(&far));
    let summary = Summary {
        nodes_scored: node_set.len(),
        eligible_pairs: scores.eligible_pairs,
        pair_count: scores.pair_count,
        skipped_pairs: scores.skipped_pairs,
        sampled_pairs: scores.sampled_pairs,
        near: near.len(),
        far: far.len(),
        separated: near_mean.zip(far_mean).map(|(a, b)| a > b),
        near_mean,
        far_mean,
    };
    write_text(&a.out.join("cbc.csv"), &csv)?;
    write_json(&a.out.join("summary.json"), &summary)?;

    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    let verdict = match summary.separated {
        Some(true) => "true",
        Some(false) => "false",
        None => "undefined",
    };
    println!(
        "near_mean={} far_mean={} near={} far={} separated={verdict}",
        show(near_mean),
        show(far_mean),
        summary.near,
        summary.far
    );
    if a.check_separation && summary.separated != Some(true) {
        return Err(CliError::Internal(anyhow::anyhow!(
            "near-boundary nodes do not outscore far nodes (separated={verdict})"
        )));
    }
    Ok(())
}
