use serde::Serialize;
use tss_core::graph::{edge_homophily, generate_sbm, write_graph, GraphPaths, SbmConfig};
use tss_core::Graph;

use crate::args::GenArgs;
use crate::error::CliResult;
use crate::manifest::Manifest;

#[derive(Serialize)]
struct GenConfig {
    sbm: SbmConfig,
    /// Fraction of edges joining same-class nodes; `null` without edges.
    homophily: Option<f64>,
    nodes: usize,
    edges: usize,
}

pub fn run(a: GenArgs) -> CliResult<()> {
    let sbm = SbmConfig {
        train_fraction: a.train_fraction,
        val_fraction: a.val_fraction,
        ..SbmConfig::new(a.n, a.classes, a.p_in, a.p_out, a.dim, a.shift, a.seed)
    };
    let graph: Graph = generate_sbm(&sbm)?;
    let labels = graph.clean_labels().expect("generated graphs are labeled");
    let config = GenConfig {
        homophily: edge_homophily(graph.adjacency(), labels).ok(),
        nodes: graph.node_count(),
        edges: graph.adjacency().edge_count(),
        sbm,
    };
    let mut manifest = Manifest::new("gen", &config);
    manifest.seeds.push(a.seed);
    manifest.write(&a.out)?;
    write_graph(&graph, &GraphPaths::in_dir(&a.out))?;
    println!(
        "wrote {} nodes, {} edges, homophily {}",
        config.nodes,
        config.edges,
        config.homophily.map_or("n/a".to_string(), |h| format!("{h:.4}"))
    );
    Ok(())
}
