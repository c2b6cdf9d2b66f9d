use serde::Serialize;
use tss_core::graph::write_labels;
use tss_core::noise::{corrupt_labels, noise_audit, transition_matrix, NoiseAudit, NoiseKind, NoiseSpec};

use super::{hash_inputs, load};
use crate::args::CorruptArgs;
use crate::error::CliResult;
use crate::manifest::{write_json, Manifest};

pub const NOISY_LABELS_FILE: &str = "noisy_labels.txt";

#[derive(Serialize)]
struct Audit {
    spec: NoiseSpec,
    /// Nodes eligible for corruption.
    scope_size: usize,
    /// Target transition matrix for class-conditional kinds.
    design: Option<Vec<Vec<f64>>>,
    /// Largest entrywise gap between design and empirical matrices.
    max_deviation: Option<f64>,
    empirical: NoiseAudit,
}

pub fn run(a: CorruptArgs) -> CliResult<()> {
    let spec = NoiseSpec {
        scope: a.noise.noise_scope,
        instance_std: a.noise.instance_std,
        ..NoiseSpec::new(a.noise.noise_kind, a.noise_rate, a.seed)
    };
    let mut manifest = Manifest::new("corrupt", &spec);
    manifest.seeds.push(a.seed);
    let digest = hash_inputs(&a.graph, &mut manifest)?;
    spec.validate()?;
    let loaded = load(&a.graph, digest)?;
    manifest.write(&a.out)?;

    let g = &loaded.graph;
    let noisy = corrupt_labels(g, &loaded.labels, &spec)?;
    let scope = spec.scope.mask(g.splits());
    let pick = |v: &[usize]| -> Vec<usize> { (0..v.len()).filter(|&i| scope[i]).map(|i| v[i]).collect() };
    let empirical = noise_audit(&pick(&loaded.labels), &pick(&noisy), g.num_classes())?;
    let design = match spec.kind {
        NoiseKind::Instance => None,
        kind => Some(transition_matrix(kind, spec.rate, g.num_classes())?),
    };
    let audit = Audit {
        scope_size: scope.iter().filter(|&&s| s).count(),
        max_deviation: design.as_ref().map(|t| empirical.max_deviation(t)),
        design: design.map(|t| (0..t.num_classes()).map(|a| t.row(a).to_vec()).collect()),
        spec,
        empirical,
    };
    write_labels(a.out.join(NOISY_LABELS_FILE), &noisy)?;
    write_json(&a.out.join("audit.json"), &audit)?;
    println!(
        "flip rate {:.4} over {} nodes",
        audit.empirical.flip_rate, audit.scope_size
    );
    Ok(())
}
