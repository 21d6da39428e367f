//! Training-set class balancing: random under-sampling of over-represented
//! classes and SMOTE interpolation for under-represented ones.

use ndarray::{Array2, Axis};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{CrashDataset, FeatureKind, Lineage, SeverityClass};

pub const DEFAULT_K_NEIGHBORS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceOptions {
    pub k_neighbors: usize,
    pub seed: u64,
    /// Round interpolated binary features to {0,1}.
    pub round_binary: bool,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            k_neighbors: DEFAULT_K_NEIGHBORS,
            seed: 0,
            round_binary: false,
        }
    }
}

/// Where a synthetic row came from. Row indices refer to the dataset that was
/// passed to the oversampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SyntheticOrigin {
    pub class: SeverityClass,
    pub base_row: usize,
    pub neighbor_row: usize,
    /// Interpolation weight `u` in `x_base + u (x_neighbor - x_base)`.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceReport {
    pub before: [usize; 3],
    pub after: [usize; 3],
    pub target_count: usize,
    pub k_neighbors: usize,
    pub seed: u64,
    pub synthetic_rows: usize,
    /// Binary-kind cells of synthetic rows holding a value strictly inside (0,1).
    pub fractional_binary_cells: usize,
    /// Classes with a single sample, oversampled by duplication.
    pub duplicated_classes: Vec<SeverityClass>,
    pub origins: Vec<SyntheticOrigin>,
}

impl BalanceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let counts = |c: &[usize; 3]| {
            SeverityClass::ALL
                .iter()
                .map(|k| format!("{}={}", k.label(), c[k.index()]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        s.push_str(&format!("before: {}\n", counts(&self.before)));
        s.push_str(&format!("after: {}\n", counts(&self.after)));
        s.push_str(&format!("target_count={}\n", self.target_count));
        s.push_str(&format!("k_neighbors={}\n", self.k_neighbors));
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!("synthetic_rows={}\n", self.synthetic_rows));
        s.push_str(&format!("fractional_binary_cells={}\n", self.fractional_binary_cells));
        if !self.duplicated_classes.is_empty() {
            let names: Vec<_> = self.duplicated_classes.iter().map(|c| c.label()).collect();
            s.push_str(&format!("duplicated_classes={}\n", names.join(",")));
        }
        s
    }
}

fn class_rng(seed: u64, cls: SeverityClass, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream * 8 + cls.index() as u64);
    rng
}

const UNDERSAMPLE_STREAM: u64 = 1;
const SMOTE_STREAM: u64 = 2;

fn class_rows(ds: &CrashDataset, cls: SeverityClass) -> Vec<usize> {
    ds.y()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == cls)
        .map(|(i, _)| i)
        .collect()
}

/// Positions of the class-`cls` rows that survive under-sampling.
fn undersample_keep(ds: &CrashDataset, cls: SeverityClass, target: usize, seed: u64) -> Result<Vec<usize>> {
    let rows = class_rows(ds, cls);
    if target > rows.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot under-sample class {cls} from {} to {target} rows; oversample instead",
            rows.len()
        )));
    }
    let mut rng = class_rng(seed, cls, UNDERSAMPLE_STREAM);
    let mut keep: Vec<usize> = rand::seq::index::sample(&mut rng, rows.len(), target)
        .into_iter()
        .map(|i| rows[i])
        .collect();
    keep.sort_unstable();
    Ok(keep)
}

/// Keeps a uniform random subset of `target` rows of class `cls`; other
/// classes are untouched and row order is preserved.
pub fn undersample(ds: &CrashDataset, cls: SeverityClass, target: usize, seed: u64) -> Result<CrashDataset> {
    let keep = undersample_keep(ds, cls, target, seed)?;
    let mut mask: Vec<bool> = ds.y().iter().map(|&c| c != cls).collect();
    for i in keep {
        mask[i] = true;
    }
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| mask[i]).collect();
    Ok(ds.select_rows(&rows)?.relabel(Lineage::Balanced))
}

/// Per-feature z-score parameters. Zero-variance columns keep unit scale.
#[derive(Clone, Debug)]
struct Standardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
        let sd = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(c, m)| {
                let v = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, sd }
    }
}

struct SmoteDraws {
    rows: Vec<Vec<f64>>,
    origins: Vec<SyntheticOrigin>,
    duplicated: bool,
    k_used: usize,
}

fn smote_draws(
    ds: &CrashDataset,
    cls: SeverityClass,
    n_new: usize,
    k: usize,
    seed: u64,
    scaler: &Standardizer,
    round_binary: bool,
) -> Result<SmoteDraws> {
    let members = class_rows(ds, cls);
    let m = members.len();
    if m == 0 {
        return Err(Error::InvalidArgument(format!("class {cls} has no rows to oversample")));
    }
    let x = ds.x();
    let d = ds.n_features();
    let mut rng = class_rng(seed, cls, SMOTE_STREAM);
    let mut draws = SmoteDraws {
        rows: Vec::with_capacity(n_new),
        origins: Vec::with_capacity(n_new),
        duplicated: false,
        k_used: 0,
    };
    if n_new == 0 {
        return Ok(draws);
    }
    if m == 1 {
        log::warn!("class {cls} has a single sample; oversampling by duplication");
        let base = members[0];
        for _ in 0..n_new {
            draws.rows.push(x.row(base).to_vec());
            draws.origins.push(SyntheticOrigin {
                class: cls,
                base_row: base,
                neighbor_row: base,
                weight: 0.0,
            });
        }
        draws.duplicated = true;
        return Ok(draws);
    }
    let k = k.min(m - 1).max(1);
    draws.k_used = k;

    let z: Vec<Vec<f64>> = members
        .iter()
        .map(|&r| (0..d).map(|j| (x[[r, j]] - scaler.mean[j]) / scaler.sd[j]).collect())
        .collect();
    let mut neighbors: Vec<Option<Vec<usize>>> = vec![None; m];
    let binary: Vec<bool> = (0..d).map(|j| ds.schema().kind(j) == FeatureKind::Binary).collect();

    for _ in 0..n_new {
        let i = rng.gen_range(0..m);
        let nn = neighbors[i].get_or_insert_with(|| {
            let mut dist: Vec<(f64, usize)> = (0..m)
                .filter(|&o| o != i)
                .map(|o| {
                    let d2: f64 = z[i].iter().zip(&z[o]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, o)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
            dist.into_iter().map(|(_, o)| o).collect()
        });
        let j = nn[rng.gen_range(0..k)];
        let u: f64 = rng.sample(Open01);
        let (base, neighbor) = (members[i], members[j]);
        let row: Vec<f64> = (0..d)
            .map(|c| {
                let a = x[[base, c]];
                let v = a + u * (x[[neighbor, c]] - a);
                if round_binary && binary[c] {
                    v.round()
                } else {
                    v
                }
            })
            .collect();
        draws.rows.push(row);
        draws.origins.push(SyntheticOrigin {
            class: cls,
            base_row: base,
            neighbor_row: neighbor,
            weight: u,
        });
    }
    Ok(draws)
}

/// `ds` followed by the synthetic rows, which get fresh trailing order keys.
fn append_synthetic(ds: &CrashDataset, keep: &[usize], synth: Vec<(SeverityClass, Vec<f64>)>) -> Result<CrashDataset> {
    let d = ds.n_features();
    let n = keep.len() + synth.len();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for (out, &r) in keep.iter().enumerate() {
        x.row_mut(out).assign(&ds.x().row(r));
        y.push(ds.y()[r]);
        keys.push(ds.order_key()[r]);
        flags.push(ds.synthetic()[r]);
    }
    let mut next_key = ds.order_key().last().map_or(0, |k| k + 1);
    for (i, (cls, row)) in synth.into_iter().enumerate() {
        let out = keep.len() + i;
        for (c, v) in row.into_iter().enumerate() {
            x[[out, c]] = v;
        }
        y.push(cls);
        keys.push(next_key);
        next_key += 1;
        flags.push(true);
    }
    CrashDataset::with_flags(ds.schema().clone(), x, y, keys, flags, Lineage::Balanced)
}

fn count_fractional_binary(ds: &CrashDataset) -> usize {
    let binary: Vec<usize> = (0..ds.n_features())
        .filter(|&j| ds.schema().kind(j) == FeatureKind::Binary)
        .collect();
    ds.x()
        .outer_iter()
        .zip(ds.synthetic())
        .filter(|(_, &s)| s)
        .map(|(row, _)| binary.iter().filter(|&&j| row[j] > 0.0 && row[j] < 1.0).count())
        .sum()
}

/// Appends `target - count(cls)` SMOTE rows of class `cls`. Neighbours are
/// found in z-scored feature space fitted on `ds`; interpolation happens in
/// the original units.
pub fn smote_oversample(ds: &CrashDataset, cls: SeverityClass, target: usize, k: usize, seed: u64) -> Result<CrashDataset> {
    let (out, _) = smote_oversample_traced(ds, cls, target, k, seed, false)?;
    Ok(out)
}

/// [`smote_oversample`] that also returns each synthetic row's origin.
pub fn smote_oversample_traced(
    ds: &CrashDataset,
    cls: SeverityClass,
    target: usize,
    k: usize,
    seed: u64,
    round_binary: bool,
) -> Result<(CrashDataset, Vec<SyntheticOrigin>)> {
    let count = ds.class_counts()[cls.index()];
    if count == 0 {
        return Err(Error::InvalidArgument(format!("class {cls} has no rows to oversample")));
    }
    if target < count {
        return Err(Error::InvalidArgument(format!(
            "SMOTE target {target} below current count {count} for class {cls}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be >= 1".into()));
    }
    let scaler = Standardizer::fit(ds.x());
    let draws = smote_draws(ds, cls, target - count, k, seed, &scaler, round_binary)?;
    let keep: Vec<usize> = (0..ds.n_rows()).collect();
    let synth = draws.rows.into_iter().map(|r| (cls, r)).collect();
    Ok((append_synthetic(ds, &keep, synth)?, draws.origins))
}

/// Median of the three class counts.
pub fn median_count(counts: [usize; 3]) -> usize {
    let mut c = counts;
    c.sort_unstable();
    c[1]
}

/// Brings every class to the median class count.
pub fn balance_classes(train: &CrashDataset, k: usize, seed: u64) -> Result<(CrashDataset, BalanceReport)> {
    balance_classes_with(
        train,
        &BalanceOptions {
            k_neighbors: k,
            seed,
            round_binary: false,
        },
    )
}

pub fn balance_classes_with(train: &CrashDataset, opts: &BalanceOptions) -> Result<(CrashDataset, BalanceReport)> {
    let before = train.class_counts();
    if let Some(c) = SeverityClass::ALL.iter().find(|c| before[c.index()] == 0) {
        return Err(Error::InvalidArgument(format!("class {c} is empty; cannot balance")));
    }
    if opts.k_neighbors == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be >= 1".into()));
    }
    let target = median_count(before);
    let scaler = Standardizer::fit(train.x());

    let mut keep_mask = vec![true; train.n_rows()];
    let mut synth = Vec::new();
    let mut origins = Vec::new();
    let mut duplicated = Vec::new();
    let mut k_used = opts.k_neighbors;
    for cls in SeverityClass::ALL {
        let count = before[cls.index()];
        if count > target {
            let keep = undersample_keep(train, cls, target, opts.seed)?;
            for i in class_rows(train, cls) {
                keep_mask[i] = false;
            }
            for i in keep {
                keep_mask[i] = true;
            }
        } else if count < target {
            let draws = smote_draws(train, cls, target - count, opts.k_neighbors, opts.seed, &scaler, opts.round_binary)?;
            if draws.duplicated {
                duplicated.push(cls);
            } else {
                k_used = k_used.min(draws.k_used);
            }
            synth.extend(draws.rows.into_iter().map(|r| (cls, r)));
            origins.extend(draws.origins);
        }
    }
    let keep: Vec<usize> = (0..train.n_rows()).filter(|&i| keep_mask[i]).collect();
    let balanced = append_synthetic(train, &keep, synth)?;
    let report = BalanceReport {
        before,
        after: balanced.class_counts(),
        target_count: target,
        k_neighbors: k_used,
        seed: opts.seed,
        synthetic_rows: balanced.n_synthetic() - train.n_synthetic(),
        fractional_binary_cells: count_fractional_binary(&balanced),
        duplicated_classes: duplicated,
        origins,
    };
    Ok((balanced, report))
}
