use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::centrality::{pearson, Pearson};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Precision of `extracted` against the clean flags and recall of the clean
/// members of `pool`. Undefined when nothing was extracted or the pool has
/// no clean node.
pub fn extraction_fscore(extracted: &[usize], pool: &[usize], clean: &[bool]) -> Result<FScore> {
    if extracted.is_empty() {
        return Err(Error::Undefined("precision of an empty extraction".into()));
    }
    let clean_in_pool = pool.iter().filter(|&&i| clean[i]).count();
    if clean_in_pool == 0 {
        return Err(Error::Undefined("recall over a pool without clean nodes".into()));
    }
    let hits = extracted.iter().filter(|&&i| clean[i]).count() as f64;
    let precision = hits / extracted.len() as f64;
    let recall = hits / clean_in_pool as f64;
    let fscore = if hits == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(FScore {
        precision,
        recall,
        fscore,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub index: usize,
    pub size: usize,
    pub mean_cbc: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: Pearson,
    pub subsets: Vec<SubsetRow>,
}

/// Draws `num_subsets` uniform subsets of `train`, each of `subset_size`
/// nodes, and correlates their mean centrality with the F-score of the
/// agreement-based extraction inside the subset.
#[allow(clippy::too_many_arguments)]
pub fn cbc_fscore_correlation(
    cbc: &[f64],
    predicted: &[usize],
    noisy: &[usize],
    clean: &[usize],
    train: &[usize],
    num_subsets: usize,
    subset_size: usize,
    seed: u64,
) -> Result<CorrelationReport> {
    if subset_size == 0 || subset_size > train.len() {
        return Err(Error::InvalidParameter(format!(
            "subset size {subset_size} for {} training nodes",
            train.len()
        )));
    }
    if num_subsets < 3 {
        return Err(Error::InvalidParameter("need at least 3 subsets".into()));
    }
    let flags: Vec<bool> = noisy.iter().zip(clean).map(|(a, b)| a == b).collect();
    let mut rng = rng_for(seed, "tss/subsets");
    let mut subsets = Vec::with_capacity(num_subsets);
    for index in 0..num_subsets {
        let mut members: Vec<usize> = sample(&mut rng, train.len(), subset_size)
            .into_iter()
            .map(|k| train[k])
            .collect();
        members.sort_unstable();
        let mean_cbc = members.iter().map(|&i| cbc[i]).sum::<f64>() / subset_size as f64;
        let extracted: Vec<usize> = members.iter().copied().filter(|&i| predicted[i] == noisy[i]).collect();
        let f = extraction_fscore(&extracted, &members, &flags)?;
        subsets.push(SubsetRow {
            index,
            size: subset_size,
            mean_cbc,
            precision: f.precision,
            recall: f.recall,
            fscore: f.fscore,
        });
    }
    let xs: Vec<f64> = subsets.iter().map(|s| s.mean_cbc).collect();
    let ys: Vec<f64> = subsets.iter().map(|s| s.fscore).collect();
    Ok(CorrelationReport {
        pearson: pearson(&xs, &ys)?,
        subsets,
    })
}
