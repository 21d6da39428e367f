//! Synthetic sequential crash data with planted lagged causes.
//!
//! Continuous features are AR(1) with persistence 0.5, binary features flip
//! with probability 0.2 per step. A latent score
//! `s_t = sum_j b_j x_{j,t-lag} + 0.3 s_{t-1} + noise` is cut at two
//! quantiles so the class counts hit the requested proportions exactly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CrashDataset, FeatureKind, FeatureSchema, FeatureSpec, SeverityClass};

pub const AR_PERSISTENCE: f64 = 0.5;
pub const FLIP_PROBABILITY: f64 = 0.2;
pub const SCORE_PERSISTENCE: f64 = 0.3;
const BURN_IN: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub planted: Vec<usize>,
    /// One coefficient per planted feature; empty means all ones.
    pub coefficients: Vec<f64>,
    pub lag: usize,
    pub noise_sd: f64,
    /// PDO, BC, KA.
    pub proportions: [f64; 3],
    pub binary_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 20_000,
            d: 20,
            planted: vec![0, 1, 2, 3, 4],
            coefficients: Vec::new(),
            lag: 2,
            noise_sd: 0.5,
            proportions: [0.69, 0.28, 0.03],
            binary_fraction: 0.25,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn coefficient_vector(&self) -> Vec<f64> {
        if self.coefficients.is_empty() {
            vec![1.0; self.planted.len()]
        } else {
            self.coefficients.clone()
        }
    }

    /// Indices of the Bernoulli features, spread evenly over `0..d`.
    pub fn binary_indices(&self) -> Vec<usize> {
        let nb = (self.binary_fraction * self.d as f64).round() as usize;
        let nb = nb.min(self.d);
        (0..nb).map(|i| i * self.d / nb).collect()
    }

    /// Class sizes realized by the quantile cut.
    pub fn class_counts(&self) -> [usize; 3] {
        let c0 = (self.proportions[0] * self.n as f64).round() as usize;
        let c2 = (self.proportions[2] * self.n as f64).round() as usize;
        [c0, self.n.saturating_sub(c0 + c2), c2]
    }

    pub fn feature_names(&self) -> Vec<String> {
        let width = self.d.saturating_sub(1).to_string().len();
        (0..self.d).map(|j| format!("x{j:0width$}")).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 {
            return bad("d must be >= 1".into());
        }
        if self.n <= 10 * self.lag || self.n < 3 {
            return bad(format!("n = {} too small for lag {}", self.n, self.lag));
        }
        if self.planted.is_empty() {
            return bad("at least one planted feature is required".into());
        }
        let mut seen = vec![false; self.d];
        for &j in &self.planted {
            if j >= self.d {
                return bad(format!("planted index {j} out of range for d = {}", self.d));
            }
            if std::mem::replace(&mut seen[j], true) {
                return bad(format!("planted index {j} repeated"));
            }
        }
        if !self.coefficients.is_empty() && self.coefficients.len() != self.planted.len() {
            return bad(format!(
                "{} coefficients for {} planted features",
                self.coefficients.len(),
                self.planted.len()
            ));
        }
        if self.coefficients.iter().any(|b| !b.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be a non-negative number".into());
        }
        if !(0.0..=1.0).contains(&self.binary_fraction) {
            return bad("binary_fraction must lie in [0, 1]".into());
        }
        let p = self.proportions;
        if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("proportions {p:?} must be non-negative and sum to 1"));
        }
        let counts = self.class_counts();
        if counts.iter().any(|&c| c == 0) || counts[0] + counts[2] > self.n {
            return bad(format!("proportions {p:?} leave a class empty at n = {}", self.n));
        }
        Ok(())
    }
}

/// Ground truth recorded alongside a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthTruth {
    pub planted: Vec<usize>,
    pub planted_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub lag: usize,
    /// Highest PDO score and lowest KA score.
    pub thresholds: [f64; 2],
    pub class_counts: [usize; 3],
    pub binary: Vec<usize>,
    pub seed: u64,
}

impl SynthTruth {
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "planted={}", join(&self.planted));
        let _ = writeln!(s, "planted_names={}", self.planted_names.join(","));
        let b: Vec<String> = self.coefficients.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "coefficients={}", b.join(","));
        let _ = writeln!(s, "lag={}", self.lag);
        let _ = writeln!(s, "threshold_low={}", self.thresholds[0]);
        let _ = writeln!(s, "threshold_high={}", self.thresholds[1]);
        let _ = writeln!(s, "class_counts={}", join(&self.class_counts));
        let _ = writeln!(s, "binary={}", join(&self.binary));
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}

pub fn generate(spec: &SynthSpec) -> Result<CrashDataset> {
    generate_with_truth(spec).map(|(ds, _)| ds)
}

pub fn generate_with_truth(spec: &SynthSpec) -> Result<(CrashDataset, SynthTruth)> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let total = n + BURN_IN + spec.lag;
    let binary = spec.binary_indices();
    let mut is_binary = vec![false; d];
    for &j in &binary {
        is_binary[j] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut raw = Array2::<f64>::zeros((total, d));
    for j in 0..d {
        let mut prev = if is_binary[j] {
            f64::from(rng.gen_bool(0.5) as u8)
        } else {
            rng.sample::<f64, _>(StandardNormal) / (1.0 - AR_PERSISTENCE * AR_PERSISTENCE).sqrt()
        };
        for t in 0..total {
            let v = if t == 0 {
                prev
            } else if is_binary[j] {
                if rng.gen_bool(FLIP_PROBABILITY) {
                    1.0 - prev
                } else {
                    prev
                }
            } else {
                AR_PERSISTENCE * prev + rng.sample::<f64, _>(StandardNormal)
            };
            raw[[t, j]] = v;
            prev = v;
        }
    }

    let b = spec.coefficient_vector();
    let mut score = vec![0.0; total];
    for t in spec.lag..total {
        let drive: f64 = spec.planted.iter().zip(&b).map(|(&j, &bj)| bj * raw[[t - spec.lag, j]]).sum();
        let prev = if t > 0 { score[t - 1] } else { 0.0 };
        let eps: f64 = rng.sample(StandardNormal);
        score[t] = drive + SCORE_PERSISTENCE * prev + spec.noise_sd * eps;
    }

    let start = total - n;
    let x = raw.slice(ndarray::s![start.., ..]).to_owned();
    let s = &score[start..];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let counts = spec.class_counts();
    let mut y = vec![SeverityClass::Bc; n];
    for (rank, &i) in order.iter().enumerate() {
        y[i] = if rank < counts[0] {
            SeverityClass::Pdo
        } else if rank >= n - counts[2] {
            SeverityClass::Ka
        } else {
            SeverityClass::Bc
        };
    }
    let thresholds = [s[order[counts[0] - 1]], s[order[n - counts[2]]]];

    let names = spec.feature_names();
    let schema = FeatureSchema::new(
        names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let kind = if is_binary[j] {
                    FeatureKind::Binary
                } else {
                    FeatureKind::Continuous
                };
                FeatureSpec::new(name.clone(), kind, "")
            })
            .collect(),
    )?;
    let ds = CrashDataset::new(schema, x, y, (0..n as u64).collect())?;
    let truth = SynthTruth {
        planted: spec.planted.clone(),
        planted_names: spec.planted.iter().map(|&j| names[j].clone()).collect(),
        coefficients: b,
        lag: spec.lag,
        thresholds,
        class_counts: counts,
        binary,
        seed: spec.seed,
    };
    Ok((ds, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_class_counts() {
        let spec = SynthSpec {
            n: 10_000,
            seed: 4,
            ..Default::default()
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.class_counts(), [6900, 2800, 300]);
    }

    #[test]
    fn same_spec_same_data() {
        let spec = SynthSpec {
            n: 500,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        let c = generate(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.x(), c.x());
    }

    #[test]
    fn binary_columns_are_binary() {
        let spec = SynthSpec {
            n: 300,
            d: 8,
            planted: vec![1],
            binary_fraction: 0.5,
            ..Default::default()
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(spec.binary_indices(), vec![0, 2, 4, 6]);
        for j in spec.binary_indices() {
            assert_eq!(ds.schema().kind(j), FeatureKind::Binary);
            assert!(ds.x().column(j).iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let base = SynthSpec {
            n: 1000,
            ..Default::default()
        };
        let cases = [
            SynthSpec { planted: vec![], ..base.clone() },
            SynthSpec { planted: vec![20], ..base.clone() },
            SynthSpec { planted: vec![1, 1], ..base.clone() },
            SynthSpec { proportions: [0.7, 0.3, 0.0], ..base.clone() },
            SynthSpec { proportions: [0.5, 0.3, 0.3], ..base.clone() },
            SynthSpec { n: 20, lag: 2, ..base.clone() },
            SynthSpec { coefficients: vec![1.0], ..base.clone() },
        ];
        for spec in cases {
            assert!(generate(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn toml_spec() {
        let spec = SynthSpec::from_toml_str("n = 100\nd = 4\nplanted = [2]\nlag = 1\nseed = 7\n").unwrap();
        assert_eq!(spec.n, 100);
        assert_eq!(spec.proportions, [0.69, 0.28, 0.03]);
        assert!(SynthSpec::from_toml_str("bogus = 1").is_err());
        let (_, truth) = generate_with_truth(&spec).unwrap();
        assert_eq!(truth.planted_names, vec!["x2"]);
        assert!(truth.thresholds[0] <= truth.thresholds[1]);
    }
}
