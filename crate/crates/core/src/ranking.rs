//! Feature scores from fitted projections and top-p selection.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::error::{AslslError, Result};
use crate::optimizer::AslslModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub view: usize,
    pub feature: usize,
    /// Row 2-norm of the view's projection matrix.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Top fraction of all features pooled across views.
    #[default]
    Pooled,
    /// Top fraction within each view separately.
    PerView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    scores: Vec<FeatureScore>,
    /// Indices into `scores`, best first.
    order: Vec<usize>,
    dims: Vec<usize>,
}

impl FeatureRanking {
    /// Builds a ranking from raw per-view score vectors.
    pub fn from_scores(per_view: &[Vec<f64>]) -> FeatureRanking {
        let scores: Vec<FeatureScore> = per_view
            .iter()
            .enumerate()
            .flat_map(|(view, s)| {
                s.iter()
                    .enumerate()
                    .map(move |(feature, &score)| FeatureScore { view, feature, score })
            })
            .collect();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // Scores were flattened view-major, so the index is the (view, feature) tie-break.
        order.sort_by(|&a, &b| scores[b].score.total_cmp(&scores[a].score).then(a.cmp(&b)));
        FeatureRanking {
            scores,
            order,
            dims: per_view.iter().map(Vec::len).collect(),
        }
    }

    pub fn scores(&self) -> &[FeatureScore] {
        &self.scores
    }

    /// Features from best to worst.
    pub fn ordered(&self) -> impl Iterator<Item = &FeatureScore> + '_ {
        self.order.iter().map(move |&i| &self.scores[i])
    }

    pub fn total_features(&self) -> usize {
        self.scores.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Selected feature rows per view, each sorted ascending.
    pub fn selected(&self, fraction: f64, mode: SelectionMode) -> Result<Vec<Vec<usize>>> {
        check_fraction(fraction)?;
        let mut per_view = vec![Vec::new(); self.dims.len()];
        match mode {
            SelectionMode::Pooled => {
                let count = selection_count(fraction, self.total_features());
                for s in self.ordered().take(count) {
                    per_view[s.view].push(s.feature);
                }
            }
            SelectionMode::PerView => {
                let mut quota: Vec<usize> = self.dims.iter().map(|&d| selection_count(fraction, d)).collect();
                for s in self.ordered() {
                    if quota[s.view] > 0 {
                        quota[s.view] -= 1;
                        per_view[s.view].push(s.feature);
                    }
                }
            }
        }
        for rows in &mut per_view {
            rows.sort_unstable();
        }
        Ok(per_view)
    }

    /// CSV with columns `rank,view,feature_index,score`, rank starting at 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| AslslError::io(path, e))?;
        let mut out = String::from("rank,view,feature_index,score\n");
        for (rank, s) in self.ordered().enumerate() {
            out.push_str(&format!("{},{},{},{:?}\n", rank + 1, s.view, s.feature, s.score));
        }
        file.write_all(out.as_bytes()).map_err(|e| AslslError::io(path, e))
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(AslslError::InvalidParameter(format!(
            "selection fraction must lie in (0, 1], got {fraction}"
        )))
    }
}

/// `⌈fraction · total⌉`, ignoring floating-point dust above an integer.
pub fn selection_count(fraction: f64, total: usize) -> usize {
    let exact = fraction * total as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(total)
}

pub fn rank_features(model: &AslslModel) -> FeatureRanking {
    let per_view: Vec<Vec<f64>> = model
        .q
        .iter()
        .map(|q| {
            q.rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect()
        })
        .collect();
    FeatureRanking::from_scores(&per_view)
}

/// The dataset restricted to the selected feature rows; views and masks
/// are preserved.
pub fn select_subset(
    dataset: &MultiViewDataset,
    ranking: &FeatureRanking,
    fraction: f64,
    mode: SelectionMode,
) -> Result<MultiViewDataset> {
    if ranking.dims() != dataset.dims().as_slice() {
        return Err(AslslError::Shape(format!(
            "ranking covers view sizes {:?}, dataset has {:?}",
            ranking.dims(),
            dataset.dims()
        )));
    }
    Ok(dataset.select_features(&ranking.selected(fraction, mode)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Hyperparams;
    use ndarray::{array, Array1};

    fn model_with(q: Vec<ndarray::Array2<f64>>) -> AslslModel {
        let views = q.len();
        AslslModel {
            q,
            u: array![[1.0, 1.0]],
            m: ndarray::Array2::eye(2),
            alpha: Array1::from_elem(views, 1.0 / views as f64),
            hyper: Hyperparams::default(),
        }
    }

    #[test]
    fn scores_are_row_norms() {
        let r = rank_features(&model_with(vec![array![[3.0, 4.0], [0.0, 0.0]]]));
        let scores: Vec<f64> = r.scores().iter().map(|s| s.score).collect();
        assert_eq!(scores, vec![5.0, 0.0]);
        let last = r.ordered().last().unwrap();
        assert_eq!((last.view, last.feature), (0, 1));
    }

    #[test]
    fn ties_go_to_lower_view_then_index() {
        let r = rank_features(&model_with(vec![
            array![[1.0, 0.0], [0.0, 2.0]],
            array![[2.0, 0.0], [0.0, 1.0]],
        ]));
        let order: Vec<(usize, usize)> = r.ordered().map(|s| (s.view, s.feature)).collect();
        assert_eq!(order, vec![(0, 1), (1, 0), (0, 0), (1, 1)]);
    }

    #[test]
    fn selection_counts_round_up() {
        assert_eq!(selection_count(0.1, 676), 68);
        assert_eq!(selection_count(0.1, 1764), 177);
        assert_eq!(selection_count(0.1, 150), 15);
        assert_eq!(selection_count(1.0, 7), 7);
        assert_eq!(selection_count(0.01, 7), 1);
    }

    #[test]
    fn fraction_must_be_in_unit_interval() {
        let r = FeatureRanking::from_scores(&[vec![1.0, 2.0]]);
        assert!(r.selected(0.0, SelectionMode::Pooled).is_err());
        assert!(r.selected(1.5, SelectionMode::Pooled).is_err());
        assert_eq!(r.selected(1.0, SelectionMode::Pooled).unwrap(), vec![vec![0, 1]]);
    }

    #[test]
    fn per_view_mode_fills_each_quota() {
        let r = FeatureRanking::from_scores(&[vec![9.0, 8.0, 7.0, 6.0], vec![1.0, 2.0]]);
        assert_eq!(
            r.selected(0.5, SelectionMode::Pooled).unwrap(),
            vec![vec![0, 1, 2], vec![]]
        );
        assert_eq!(
            r.selected(0.5, SelectionMode::PerView).unwrap(),
            vec![vec![0, 1], vec![1]]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn order_is_scale_invariant_and_selection_nested(
                a in proptest::collection::vec(0.0f64..10.0, 1..12),
                b in proptest::collection::vec(0.0f64..10.0, 1..12),
                scale in 0.01f64..100.0,
                f1 in 0.01f64..1.0,
                f2 in 0.01f64..1.0,
            ) {
                let r = FeatureRanking::from_scores(&[a.clone(), b.clone()]);
                let scaled = FeatureRanking::from_scores(&[
                    a.iter().map(|v| v * scale).collect(),
                    b.iter().map(|v| v * scale).collect(),
                ]);
                // Scaling can merge near-ties through rounding; compare only
                // where the unscaled scores are distinct after scaling too.
                let distinct = |r: &FeatureRanking| {
                    let s: Vec<f64> = r.ordered().map(|s| s.score).collect();
                    s.windows(2).all(|w| w[0] != w[1])
                };
                if distinct(&r) && distinct(&scaled) {
                    prop_assert_eq!(&r.order, &scaled.order);
                }
                let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
                let small = r.selected(lo, SelectionMode::Pooled).unwrap();
                let large = r.selected(hi, SelectionMode::Pooled).unwrap();
                for (s, l) in small.iter().zip(&large) {
                    prop_assert!(s.iter().all(|x| l.contains(x)));
                }
            }
        }
    }
}
