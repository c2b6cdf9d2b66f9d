use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            out[k] = avg;
        }
        start = end;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided p-value of the t-test for zero correlation.
    pub p_value: f64,
    pub n: usize,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 observations".into()));
    }
    Ok(())
}

fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("correlation of a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<Pearson> {
    check_pair(a, b)?;
    let r = correlation(a, b)?;
    let df = (a.len() - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Pearson {
        r,
        p_value,
        n: a.len(),
    })
}

/// Spearman rank correlation with average-rank ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    correlation(&ranks(a), &ranks(b))
}
