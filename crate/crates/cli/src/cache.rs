//! On-disk cache of random-walk matrices keyed by graph content and solver settings.

use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use tss_core::graph::normalized_adjacency;
use tss_core::ppr::{ppr_matrix, read_ppr, write_ppr, PprConfig};
use tss_core::{Graph, PprMatrix};

use crate::error::CliResult;

pub const CACHE_ENV: &str = "TSS_CACHE_DIR";

fn cache_path(edges_digest: &str, n: usize, cfg: &PprConfig) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    let mut h = Sha256::new();
    h.update(b"ppr/v1");
    h.update(edges_digest.as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update(cfg.alpha.to_le_bytes());
    h.update(cfg.tol.to_le_bytes());
    h.update((cfg.dense_threshold as u64).to_le_bytes());
    Some(PathBuf::from(dir).join(format!("{}.ppr", hex::encode(h.finalize()))))
}

/// Loads the matrix from the cache when present, otherwise solves and stores it.
pub fn ppr_cached(graph: &Graph, edges_digest: &str, alpha: f64) -> CliResult<PprMatrix> {
    let cfg = PprConfig {
        alpha,
        ..Default::default()
    };
    let path = cache_path(edges_digest, graph.node_count(), &cfg);
    if let Some(path) = &path {
        if path.exists() {
            match read_ppr::<f64>(path) {
                Ok(p) if p.node_count() == graph.node_count() => {
                    log::info!("random-walk matrix from cache {}", path.display());
                    return Ok(p);
                }
                _ => log::warn!("ignoring unreadable cache entry {}", path.display()),
            }
        }
    }
    let adj = normalized_adjacency(graph.adjacency(), false);
    let ppr = ppr_matrix(&adj, &cfg)?;
    if let Some(path) = &path {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        write_ppr(&tmp, &ppr)?;
        fs::rename(&tmp, path)?;
    }
    Ok(ppr)
}
