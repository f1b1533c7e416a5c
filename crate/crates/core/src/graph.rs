//! Heat-kernel kNN graph over label columns and its Laplacian.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::LabelMatrix;
use crate::error::{AslslError, Result};

pub const DEFAULT_NEIGHBORS: usize = 5;
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGraph {
    affinity: Array2<f64>,
    degree: Array1<f64>,
    laplacian: Array2<f64>,
    neighbors_q: usize,
    sigma: f64,
}

impl LabelGraph {
    pub fn affinity(&self) -> &Array2<f64> {
        &self.affinity
    }

    pub fn degree(&self) -> &Array1<f64> {
        &self.degree
    }

    pub fn laplacian(&self) -> &Array2<f64> {
        &self.laplacian
    }

    pub fn neighbors_q(&self) -> usize {
        self.neighbors_q
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_instances(&self) -> usize {
        self.degree.len()
    }

    /// A graph with no edges over `n` instances.
    pub fn empty(n: usize) -> LabelGraph {
        LabelGraph {
            affinity: Array2::zeros((n, n)),
            degree: Array1::zeros(n),
            laplacian: Array2::zeros((n, n)),
            neighbors_q: 0,
            sigma: DEFAULT_SIGMA,
        }
    }
}

/// Builds the symmetrized q-nearest-neighbor heat-kernel graph over the
/// columns of `labels`.
///
/// A column is never its own neighbor. Distance ties are broken by the
/// lower instance index. An edge exists when either endpoint is among the
/// other's `q` nearest neighbors.
pub fn build_label_graph(labels: &LabelMatrix, q: usize, sigma: f64) -> Result<LabelGraph> {
    let y = labels.as_array();
    let n = y.ncols();
    if q >= n {
        return Err(AslslError::InvalidParameter(format!(
            "neighbor count q = {q} must be below the instance count {n}"
        )));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(AslslError::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }

    let mut sq_dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = y
                .column(i)
                .iter()
                .zip(y.column(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq_dist[[i, j]] = d;
            sq_dist[[j, i]] = d;
        }
    }

    let mut is_edge = Array2::from_elem((n, n), false);
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for j in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&i| i != j));
        candidates.sort_by(|&a, &b| sq_dist[[a, j]].total_cmp(&sq_dist[[b, j]]).then(a.cmp(&b)));
        for &i in candidates.iter().take(q) {
            is_edge[[i, j]] = true;
            is_edge[[j, i]] = true;
        }
    }

    let sigma2 = sigma * sigma;
    let affinity = Array2::from_shape_fn((n, n), |(i, j)| {
        if is_edge[[i, j]] {
            (-sq_dist[[i, j]] / sigma2).exp()
        } else {
            0.0
        }
    });
    let degree = affinity.sum_axis(ndarray::Axis(1));
    let laplacian = Array2::from_diag(&degree) - &affinity;
    Ok(LabelGraph {
        affinity,
        degree,
        laplacian,
        neighbors_q: q,
        sigma,
    })
}

/// `Tr(Uᵀ L U)` for an `n × k` matrix `u`, evaluated as
/// `½ Σ_ij S_ij ‖u_i − u_j‖²` so the result is never negative.
pub fn laplacian_quadratic(u: &Array2<f64>, graph: &LabelGraph) -> Result<f64> {
    let n = graph.n_instances();
    if u.nrows() != n {
        return Err(AslslError::Shape(format!(
            "U has {} rows, graph has {n} nodes",
            u.nrows()
        )));
    }
    let s = &graph.affinity;
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = s[[i, j]];
            if w != 0.0 {
                let d: f64 = u.row(i).iter().zip(u.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                total += w * d;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn labels(a: Array2<f64>) -> LabelMatrix {
        LabelMatrix::new(a).unwrap()
    }

    #[test]
    fn identical_columns_get_unit_affinity() {
        let y = labels(array![[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let g = build_label_graph(&y, 1, 1.0).unwrap();
        assert_eq!(g.affinity()[[0, 1]], 1.0);
        assert_eq!(g.affinity()[[1, 0]], 1.0);
    }

    #[test]
    fn orthogonal_columns_use_heat_kernel() {
        let y = labels(array![[1.0, 0.0], [0.0, 1.0]]);
        let g = build_label_graph(&y, 1, 1.0).unwrap();
        let expected = (-2.0f64).exp();
        assert!((g.affinity()[[0, 1]] - expected).abs() < 1e-15);
        assert!((g.affinity()[[0, 1]] - 0.1353).abs() < 1e-4);
        assert_eq!(g.affinity()[[0, 0]], 0.0);
    }

    #[test]
    fn tie_break_prefers_lower_index() {
        // Column 3 is equidistant from 0, 1 and 2 once they coincide.
        let y = labels(array![[1.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0]]);
        let g = build_label_graph(&y, 1, 1.0).unwrap();
        // Nearest for 3 is 0 (tie over 0,1,2 broken by index).
        assert!(g.affinity()[[3, 0]] > 0.0);
        assert_eq!(g.affinity()[[3, 1]], 0.0);
        assert_eq!(g.affinity()[[3, 2]], 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let y = labels(array![[1.0, 0.0, 1.0]]);
        assert!(build_label_graph(&y, 3, 1.0).is_err());
        assert!(build_label_graph(&y, 1, 0.0).is_err());
        assert!(build_label_graph(&y, 1, -1.0).is_err());
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let y = labels(array![
            [1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0, 0.0, 1.0, 0.0]
        ]);
        let g = build_label_graph(&y, 2, 1.0).unwrap();
        for row in g.laplacian().rows() {
            assert!(row.sum().abs() < 1e-10);
        }
        assert_eq!(g.affinity(), &g.affinity().t());
        for (i, d) in g.degree().iter().enumerate() {
            assert_eq!(*d, g.affinity().row(i).sum());
        }
    }

    #[test]
    fn quadratic_of_constant_rows_is_zero() {
        let y = labels(array![[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 1.0, 0.0]]);
        let g = build_label_graph(&y, 2, 1.0).unwrap();
        let u = Array2::from_elem((4, 3), 0.7);
        assert_eq!(laplacian_quadratic(&u, &g).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_matches_pairwise_oracle_and_trace() {
        let y = labels(array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]);
        let g = build_label_graph(&y, 1, 1.0).unwrap();
        let u: Array2<f64> = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        // Brute force ½ ΣΣ S_ij ‖u_i − u_j‖² over ordered pairs.
        let s = g.affinity();
        let mut oracle = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|c| (u[[i, c]] - u[[j, c]]).powi(2)).sum();
                oracle += 0.5 * s[[i, j]] * d;
            }
        }
        let value = laplacian_quadratic(&u, &g).unwrap();
        assert!((value - oracle).abs() < 1e-14);
        let trace = u.t().dot(g.laplacian()).dot(&u).diag().sum();
        assert!((value - trace).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_gives_zero() {
        let y = labels(array![[1.0, 0.0, 1.0]]);
        let g = build_label_graph(&y, 0, 1.0).unwrap();
        assert!(g.affinity().iter().all(|&v| v == 0.0));
        let u = array![[1.0], [5.0], [2.0]];
        assert_eq!(laplacian_quadratic(&u, &g).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_rejects_shape_mismatch() {
        let g = LabelGraph::empty(3);
        assert!(laplacian_quadratic(&Array2::zeros((2, 1)), &g).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quadratic_is_psd_and_affinity_symmetric(
                bits in proptest::collection::vec(0u8..2, 3 * 8),
                uvals in proptest::collection::vec(0.0f64..5.0, 8 * 2),
                q in 1usize..7,
            ) {
                let y = Array2::from_shape_vec((3, 8), bits.iter().map(|&b| b as f64).collect()).unwrap();
                let g = build_label_graph(&LabelMatrix::new(y).unwrap(), q, 1.0).unwrap();
                let s = g.affinity();
                for i in 0..8 {
                    for j in 0..8 {
                        prop_assert_eq!(s[[i, j]].to_bits(), s[[j, i]].to_bits());
                        prop_assert!((0.0..=1.0).contains(&s[[i, j]]));
                    }
                }
                let u = Array2::from_shape_vec((8, 2), uvals).unwrap();
                prop_assert!(laplacian_quadratic(&u, &g).unwrap() >= 0.0);
            }
        }
    }
}
