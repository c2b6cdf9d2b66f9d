use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacingKind {
    Linear,
    Root,
    Geometric,
}

impl PacingKind {
    pub const ALL: [PacingKind; 3] = [PacingKind::Linear, PacingKind::Root, PacingKind::Geometric];
}

impl fmt::Display for PacingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacingKind::Linear => "linear",
            PacingKind::Root => "root",
            PacingKind::Geometric => "geometric",
        })
    }
}

impl FromStr for PacingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(PacingKind::Linear),
            "root" => Ok(PacingKind::Root),
            "geometric" | "geom" => Ok(PacingKind::Geometric),
            other => Err(Error::InvalidParameter(format!(
                "unknown pacing '{other}' (expected linear, root or geometric)"
            ))),
        }
    }
}

/// Fraction of the sorted training set available at epoch `t` of `total`.
///
/// Linear and root update the previous value; geometric depends on `t`
/// only. The result always lies in `[lambda0, 1]` and equals 1 at `t == total`.
pub fn pacing(kind: PacingKind, lambda_prev: f64, lambda0: f64, t: usize, total: usize) -> Result<f64> {
    if !(lambda0 > 0.0 && lambda0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda0 {lambda0} outside (0, 1]")));
    }
    if total == 0 || t == 0 || t > total {
        return Err(Error::InvalidParameter(format!("epoch {t} outside 1..={total}")));
    }
    if t == total {
        return Ok(1.0);
    }
    let frac = t as f64 / total as f64;
    let prev = lambda_prev.clamp(lambda0, 1.0);
    let raw = match kind {
        PacingKind::Linear => prev + (1.0 - prev) * frac,
        PacingKind::Root => (prev * prev + (1.0 - prev * prev) * frac).sqrt(),
        PacingKind::Geometric => lambda0.powf(1.0 - frac),
    };
    Ok(raw.clamp(lambda0, 1.0))
}

/// The whole schedule `lambda_1 ..= lambda_total` starting from `lambda0`.
pub fn schedule(kind: PacingKind, lambda0: f64, total: usize) -> Result<Vec<f64>> {
    let mut prev = lambda0;
    (1..=total)
        .map(|t| {
            prev = pacing(kind, prev, lambda0, t, total)?;
            Ok(prev)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_steps() {
        let lin = pacing(PacingKind::Linear, 0.5, 0.5, 1, 10).unwrap();
        assert!((lin - 0.55).abs() < 1e-15);
        let root = pacing(PacingKind::Root, 0.5, 0.5, 1, 10).unwrap();
        assert!((root - 0.325f64.sqrt()).abs() < 1e-15);
        let geo = pacing(PacingKind::Geometric, 0.5, 0.5, 1, 10).unwrap();
        assert!((geo - 0.5f64.powf(0.9)).abs() < 1e-15);
        for kind in PacingKind::ALL {
            assert_eq!(pacing(kind, 0.7, 0.5, 10, 10).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_bad_epochs() {
        assert!(pacing(PacingKind::Linear, 0.5, 0.5, 0, 10).is_err());
        assert!(pacing(PacingKind::Linear, 0.5, 0.5, 11, 10).is_err());
        assert!(pacing(PacingKind::Linear, 0.5, 0.0, 1, 10).is_err());
        assert!("cosine".parse::<PacingKind>().is_err());
        assert_eq!("Root".parse::<PacingKind>().unwrap(), PacingKind::Root);
    }

    proptest! {
        #[test]
        fn schedules_rise_to_one(lambda0 in 0.01f64..=1.0, total in 1usize..400, k in 0usize..3) {
            let s = schedule(PacingKind::ALL[k], lambda0, total).unwrap();
            prop_assert_eq!(s.len(), total);
            prop_assert_eq!(*s.last().unwrap(), 1.0);
            prop_assert!(s[0] >= lambda0);
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
