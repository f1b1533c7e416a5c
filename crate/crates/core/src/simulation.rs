//! Synthetic incomplete multi-view data, missingness injection and
//! train/test splits.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabelMatrix, MultiViewDataset, ViewBlock};
use crate::error::{AslslError, Result};

const LABEL_RETRIES: usize = 10;
const MISSINGNESS_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Label dimensions.
    pub k: usize,
    /// Feature count per view; its length is the view count.
    pub dims: Vec<usize>,
    pub informative_per_view: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_views(&self) -> usize {
        self.dims.len()
    }

    /// `views` views of `dim` features each.
    pub fn uniform(n: usize, views: usize, dim: usize, k: usize, informative: usize, noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            k,
            dims: vec![dim; views],
            informative_per_view: informative,
            noise_level: noise,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(AslslError::Infeasible(m));
        if self.n < 2 {
            return fail(format!("need at least 2 instances, got {}", self.n));
        }
        if self.k == 0 || self.dims.is_empty() {
            return fail("need at least one label and one view".into());
        }
        let min_dim = self.dims.iter().copied().min().unwrap_or(0);
        if self.informative_per_view > min_dim {
            return fail(format!(
                "{} informative features per view exceeds the smallest view ({min_dim})",
                self.informative_per_view
            ));
        }
        if !self.noise_level.is_finite() || self.noise_level < 0.0 {
            return fail(format!("noise level must be non-negative, got {}", self.noise_level));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: MultiViewDataset,
    /// Planted informative feature rows per view, ascending.
    pub informative: Vec<Vec<usize>>,
    /// The latent structure that generated labels and informative rows.
    pub latent: Array2<f64>,
}

/// Draws a latent `U*` (`n × k`, uniform on [0, 1)) and labels by
/// thresholding each row of `M* U*ᵀ` at its median. Informative rows are
/// `w_i · u*_j + noise_level · e_ij` with `w_i, e_ij` uniform on [0, 1);
/// every other row is uniform noise on [0, 1). Label draws with a constant
/// row are retried.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, k) = (spec.n, spec.k);

    let mut attempt = 0;
    let (latent, labels) = loop {
        attempt += 1;
        let latent = Array2::from_shape_simple_fn((n, k), || rng.gen::<f64>());
        let mixing = Array2::from_shape_fn((k, k), |(a, b)| if a == b { 1.0 } else { 0.5 * rng.gen::<f64>() });
        let scores = mixing.dot(&latent.t());
        let mut labels = Array2::<f64>::zeros((k, n));
        for (j, row) in scores.rows().into_iter().enumerate() {
            let mut sorted = row.to_vec();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[n / 2];
            for (i, &v) in row.iter().enumerate() {
                labels[[j, i]] = if v >= median { 1.0 } else { 0.0 };
            }
        }
        let constant = labels.rows().into_iter().any(|r| r.iter().all(|&v| v == r[0]));
        if !constant {
            break (latent, labels);
        }
        if attempt >= LABEL_RETRIES {
            return Err(AslslError::Infeasible(format!(
                "could not draw non-constant label rows in {LABEL_RETRIES} attempts"
            )));
        }
    };

    let mut views = Vec::with_capacity(spec.n_views());
    let mut informative = Vec::with_capacity(spec.n_views());
    for (v, &d) in spec.dims.iter().enumerate() {
        let mut rows: Vec<usize> = rand::seq::index::sample(&mut rng, d, spec.informative_per_view).into_vec();
        rows.sort_unstable();
        let mut x = Array2::<f64>::zeros((d, n));
        for i in 0..d {
            if rows.binary_search(&i).is_ok() {
                let w: Array1<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                let clean = latent.dot(&w);
                for j in 0..n {
                    x[[i, j]] = clean[j] + spec.noise_level * rng.gen::<f64>();
                }
            } else {
                for j in 0..n {
                    x[[i, j]] = rng.gen::<f64>();
                }
            }
        }
        views.push(ViewBlock::new(v, x, vec![true; n])?);
        informative.push(rows);
    }
    let dataset = MultiViewDataset::new("synthetic", views, LabelMatrix::new(labels)?)?;
    Ok(SyntheticData {
        dataset,
        informative,
        latent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub ratio: f64,
    pub seed: u64,
}

/// `⌊ratio · n⌋`, ignoring floating-point dust just below an integer.
pub fn missing_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + 1e-9).floor().max(0.0) as usize).min(n)
}

/// Marks `⌊ratio · n⌋` instances absent in each view and zeroes them.
///
/// Views are processed in order; an instance is only eligible for removal
/// from a view if it stays present in some other view, so every instance
/// keeps at least one view. Within the eligible set the choice is uniform.
/// If a view runs out of eligible instances the whole draw is repeated.
pub fn inject_missingness(dataset: &MultiViewDataset, spec: MissingnessSpec) -> Result<MultiViewDataset> {
    if !(0.0..1.0).contains(&spec.ratio) {
        return Err(AslslError::InvalidParameter(format!(
            "missing ratio must lie in [0, 1), got {}",
            spec.ratio
        )));
    }
    let n = dataset.n_instances();
    let m = dataset.n_views();
    let count = missing_count(spec.ratio, n);
    if count == 0 {
        return Ok(dataset.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    'attempt: for _ in 0..MISSINGNESS_RETRIES {
        let mut presence: Vec<Vec<bool>> = dataset.views().iter().map(|v| v.presence().to_vec()).collect();
        for v in 0..m {
            let mut eligible: Vec<usize> = (0..n)
                .filter(|&j| presence[v][j] && (0..m).any(|w| w != v && presence[w][j]))
                .collect();
            if eligible.len() < count {
                continue 'attempt;
            }
            let (chosen, _) = eligible.partial_shuffle(&mut rng, count);
            for &j in chosen.iter() {
                presence[v][j] = false;
            }
        }
        let views = dataset
            .views()
            .iter()
            .zip(presence)
            .map(|(view, p)| view.with_presence(p))
            .collect();
        return Ok(dataset.with_views(views));
    }
    Err(AslslError::Infeasible(format!(
        "cannot remove {count} of {n} instances from each of {m} views while keeping every instance in some view"
    )))
}

/// Splits instances into train and test sets. When the dataset carries
/// groups, whole groups are assigned to one side. Both sides keep the
/// original instance order.
pub fn split_subjects(
    dataset: &MultiViewDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(AslslError::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.n_instances();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: Vec<usize>;
    match dataset.groups() {
        Some(groups) => {
            let unique: Vec<&String> = groups.iter().collect::<BTreeSet<_>>().into_iter().collect();
            let n_groups = unique.len();
            let take = (train_fraction * n_groups as f64).round() as usize;
            if take == 0 || take == n_groups {
                return Err(AslslError::InvalidParameter(format!(
                    "split of {n_groups} groups at fraction {train_fraction} leaves one side empty"
                )));
            }
            let mut shuffled = unique;
            shuffled.shuffle(&mut rng);
            let chosen: BTreeSet<&String> = shuffled.into_iter().take(take).collect();
            train = (0..n).filter(|&j| chosen.contains(&groups[j])).collect();
        }
        None => {
            let take = (train_fraction * n as f64).round() as usize;
            if take == 0 || take == n {
                return Err(AslslError::InvalidParameter(format!(
                    "split of {n} instances at fraction {train_fraction} leaves one side empty"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            train = idx.into_iter().take(take).collect();
        }
    }
    train.sort_unstable();
    let test: Vec<usize> = (0..n).filter(|j| train.binary_search(j).is_err()).collect();
    Ok((dataset.select_instances(&train), dataset.select_instances(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec::uniform(60, 3, 12, 3, 4, 0.1, seed)
    }

    #[test]
    fn generation_is_seed_deterministic() {
        assert_eq!(
            generate_synthetic(&spec(4)).unwrap(),
            generate_synthetic(&spec(4)).unwrap()
        );
        assert_ne!(
            generate_synthetic(&spec(4)).unwrap().dataset,
            generate_synthetic(&spec(5)).unwrap().dataset
        );
    }

    #[test]
    fn noiseless_informative_rows_are_latent_images() {
        let mut s = spec(1);
        s.noise_level = 0.0;
        let data = generate_synthetic(&s).unwrap();
        // Each informative row lies in the row space of U*ᵀ: solve least
        // squares via the normal equations and check the residual.
        let u = &data.latent;
        let gram = u.t().dot(u);
        for (view, rows) in data.dataset.views().iter().zip(&data.informative) {
            for &i in rows {
                let x = view.features().row(i).to_owned();
                let rhs = u.t().dot(&x);
                let w = solve3(&gram, &rhs);
                let resid = (&x - &u.dot(&w)).mapv(|v| v * v).sum();
                assert!(resid < 1e-18, "residual {resid}");
            }
        }
    }

    fn solve3(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
        // Gaussian elimination for the small normal system.
        let n = b.len();
        let mut m = a.clone();
        let mut r = b.clone();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs()))
                .unwrap();
            for k in 0..n {
                m.swap([c, k], [p, k]);
            }
            r.swap(c, p);
            for i in (c + 1)..n {
                let f = m[[i, c]] / m[[c, c]];
                for k in c..n {
                    m[[i, k]] -= f * m[[c, k]];
                }
                r[i] -= f * r[c];
            }
        }
        let mut x = Array1::zeros(n);
        for c in (0..n).rev() {
            let s: f64 = ((c + 1)..n).map(|k| m[[c, k]] * x[k]).sum();
            x[c] = (r[c] - s) / m[[c, c]];
        }
        x
    }

    #[test]
    fn labels_are_binary_and_not_constant() {
        for seed in 0..20 {
            let data = generate_synthetic(&spec(seed)).unwrap();
            let y = data.dataset.labels();
            assert!(y.constant_rows().is_empty());
            assert!(y.as_array().iter().all(|&v| v == 0.0 || v == 1.0));
            assert_eq!(data.informative.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 4]);
        }
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let mut s = spec(0);
        s.informative_per_view = 13;
        assert!(matches!(generate_synthetic(&s), Err(AslslError::Infeasible(_))));
    }

    #[test]
    fn zero_ratio_leaves_dataset_unchanged() {
        let ds = generate_synthetic(&spec(2)).unwrap().dataset;
        let out = inject_missingness(&ds, MissingnessSpec { ratio: 0.0, seed: 3 }).unwrap();
        assert_eq!(out, ds);
        assert!(out.views().iter().all(|v| v.n_present() == 60));
    }

    #[test]
    fn injection_removes_exact_counts_and_keeps_coverage() {
        let ds = generate_synthetic(&SyntheticSpec::uniform(100, 3, 5, 2, 2, 0.1, 8))
            .unwrap()
            .dataset;
        let out = inject_missingness(&ds, MissingnessSpec { ratio: 0.3, seed: 1 }).unwrap();
        for (orig, view) in ds.views().iter().zip(out.views()) {
            assert_eq!(view.n_instances() - view.n_present(), 30);
            for (j, &p) in view.presence().iter().enumerate() {
                let col = view.features().column(j);
                if p {
                    assert_eq!(col, orig.features().column(j));
                } else {
                    assert!(col.iter().all(|&v| v == 0.0));
                }
            }
        }
        for j in 0..100 {
            assert!(out.views().iter().any(|v| v.presence()[j]));
        }
        let again = inject_missingness(&ds, MissingnessSpec { ratio: 0.3, seed: 1 }).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn injection_too_aggressive_for_one_view_fails() {
        let ds = generate_synthetic(&SyntheticSpec::uniform(10, 1, 3, 1, 1, 0.1, 8))
            .unwrap()
            .dataset;
        assert!(inject_missingness(&ds, MissingnessSpec { ratio: 0.3, seed: 1 }).is_err());
        assert!(inject_missingness(&ds, MissingnessSpec { ratio: 1.0, seed: 1 }).is_err());
    }

    #[test]
    fn split_is_seventy_thirty_and_deterministic() {
        let ds = generate_synthetic(&SyntheticSpec::uniform(100, 2, 4, 2, 1, 0.1, 3))
            .unwrap()
            .dataset;
        let (tr, te) = split_subjects(&ds, 0.7, 5).unwrap();
        assert_eq!((tr.n_instances(), te.n_instances()), (70, 30));
        let (tr2, te2) = split_subjects(&ds, 0.7, 5).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        assert!(split_subjects(&ds, 1.0, 5).is_err());
        assert!(split_subjects(&ds, 0.001, 5).is_err());
    }

    #[test]
    fn group_split_keeps_groups_whole() {
        let ds = generate_synthetic(&SyntheticSpec::uniform(40, 2, 4, 2, 1, 0.1, 3))
            .unwrap()
            .dataset;
        let groups: Vec<String> = (0..40).map(|j| format!("s{}", j % 10)).collect();
        let ds = ds.with_groups(groups).unwrap();
        let (tr, te) = split_subjects(&ds, 0.7, 9).unwrap();
        let a: BTreeSet<&String> = tr.groups().unwrap().iter().collect();
        let b: BTreeSet<&String> = te.groups().unwrap().iter().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len(), 7);
        assert_eq!(tr.n_instances(), 28);
    }
}
