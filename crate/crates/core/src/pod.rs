//! Snapshot collection and proper orthogonal decomposition.

use crate::error::{Error, Result};
use crate::linalg::{left_singular_vectors, DenseMatrix};
use crate::scalar::Scalar;
use crate::stepper::StepObserver;

/// States stored column by column in observation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix<T> {
    matrix: DenseMatrix<T>,
    times: Vec<T>,
}

impl<T: Scalar> SnapshotMatrix<T> {
    /// `times` may be empty when they are unknown (e.g. a matrix read from disk).
    pub fn new(matrix: DenseMatrix<T>, times: Vec<T>) -> Result<Self> {
        if matrix.cols() == 0 || matrix.rows() == 0 {
            return Err(Error::InvalidArgument("snapshot matrix is empty".into()));
        }
        if !times.is_empty() && times.len() != matrix.cols() {
            return Err(Error::dims("snapshot times", matrix.cols(), times.len()));
        }
        Ok(Self { matrix, times })
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.matrix
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn len(&self) -> usize {
        self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.cols() == 0
    }
}

/// Observer that appends every observed state as a snapshot column.
#[derive(Debug, Clone, Default)]
pub struct SnapshotCollector<T> {
    dim: Option<usize>,
    data: Vec<T>,
    times: Vec<T>,
}

impl<T: Scalar> SnapshotCollector<T> {
    pub fn new() -> Self {
        Self {
            dim: None,
            data: Vec::new(),
            times: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn finish(self) -> Result<SnapshotMatrix<T>> {
        let Some(n) = self.dim else {
            return Err(Error::InvalidArgument("no snapshots were observed".into()));
        };
        let m = self.times.len();
        SnapshotMatrix::new(DenseMatrix::from_column_major(n, m, self.data)?, self.times)
    }
}

impl<T: Scalar> StepObserver<T> for SnapshotCollector<T> {
    fn observe(&mut self, _step: usize, t: T, state: &[T]) -> Result<()> {
        match self.dim {
            None if state.is_empty() => return Err(Error::InvalidArgument("empty snapshot".into())),
            None => self.dim = Some(state.len()),
            Some(n) if n != state.len() => return Err(Error::dims("snapshot length", n, state.len())),
            Some(_) => {}
        }
        self.data.extend_from_slice(state);
        self.times.push(t);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PodBasis<T> {
    /// N×p, orthonormal columns.
    pub basis: DenseMatrix<T>,
    /// All singular values of the centred snapshot matrix, descending.
    pub singular_values: Vec<T>,
    /// Number of singular values above the rank tolerance.
    pub numerical_rank: usize,
}

/// What to do when more modes are requested than the snapshots support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Fail with [`Error::InsufficientRank`].
    #[default]
    Strict,
    /// Fill the remaining columns with left singular vectors of (numerically)
    /// zero singular values. They are orthonormal to the energetic modes but
    /// carry no snapshot information. Still limited by `min(N, m)`.
    CompleteWithNullModes,
}

/// Singular values at or below this fraction of the largest count as zero.
pub const POD_RANK_TOLERANCE: f64 = 1e-12;

/// Leading `p` left singular vectors of `S − x_ref·1ᵀ`.
///
/// Each column is sign-normalized so its first non-negligible entry is
/// positive, which makes the result independent of the SVD backend's signs.
pub fn compute_pod_basis<T: Scalar>(snapshots: &SnapshotMatrix<T>, x_ref: &[T], p: usize) -> Result<PodBasis<T>> {
    compute_pod_basis_with(snapshots, x_ref, p, RankPolicy::Strict)
}

/// [`compute_pod_basis`] with an explicit policy for rank-deficient snapshots.
pub fn compute_pod_basis_with<T: Scalar>(
    snapshots: &SnapshotMatrix<T>,
    x_ref: &[T],
    p: usize,
    policy: RankPolicy,
) -> Result<PodBasis<T>> {
    let s = snapshots.matrix();
    let (n, m) = s.shape();
    if x_ref.len() != n {
        return Err(Error::dims("POD reference state", n, x_ref.len()));
    }
    if p == 0 || p > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "POD size p={p} must lie in 1..={}",
            n.min(m)
        )));
    }
    let centred = DenseMatrix::from_fn(n, m, |i, j| s[(i, j)] - x_ref[i]);
    let svd = left_singular_vectors(&centred)?;
    let sv = svd.singular_values;
    let cutoff = sv[0] * T::lit(POD_RANK_TOLERANCE);
    let attainable = if sv[0] > T::zero() {
        sv.iter().take_while(|&&v| v > cutoff).count()
    } else {
        0
    };
    if attainable < p && (policy == RankPolicy::Strict || attainable == 0) {
        return Err(Error::InsufficientRank {
            requested: p,
            attainable,
        });
    }
    let mut basis = svd.u.leading_columns(p);
    for j in 0..p {
        let col = basis.column_mut(j);
        let scale = col.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let tiny = scale * T::lit(1e-8);
        if let Some(&lead) = col.iter().find(|v| v.abs() > tiny) {
            if lead < T::zero() {
                col.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
    Ok(PodBasis {
        basis,
        singular_values: sv,
        numerical_rank: attainable,
    })
}

/// Fraction of snapshot energy `Σ_{i<p} σᵢ² / Σ σᵢ²` captured by `p` modes.
pub fn pod_energy_report<T: Scalar>(singular_values: &[T], p: usize) -> Result<T> {
    if p == 0 || p > singular_values.len() {
        return Err(Error::InvalidArgument(format!(
            "energy report needs 1 ≤ p ≤ {}, got {p}",
            singular_values.len()
        )));
    }
    let total: T = singular_values.iter().map(|&s| s * s).sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument("all singular values are zero".into()));
    }
    let kept: T = singular_values[..p].iter().map(|&s| s * s).sum();
    Ok((kept / total).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::orthonormality_defect;

    #[test]
    fn collector_rejects_empty_and_drift() {
        assert!(SnapshotCollector::<f64>::new().finish().is_err());
        let mut c = SnapshotCollector::new();
        c.observe(0, 0.0, &[1.0, 2.0]).unwrap();
        assert!(c.observe(1, 0.1, &[1.0]).is_err());
        c.observe(1, 0.1, &[3.0, 4.0]).unwrap();
        let s = c.finish().unwrap();
        assert_eq!(s.matrix().column(1), &[3.0, 4.0]);
        assert_eq!(s.times(), &[0.0, 0.1]);
    }

    #[test]
    fn rank_one_snapshot() {
        let s = SnapshotMatrix::new(DenseMatrix::column_vector(vec![3.0f64, -4.0]), vec![]).unwrap();
        let pod = compute_pod_basis(&s, &[0.0, 0.0], 1).unwrap();
        assert!((pod.basis[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((pod.basis[(1, 0)] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn constant_snapshots_have_no_rank() {
        let s = SnapshotMatrix::new(DenseMatrix::from_fn(3, 4, |_, _| 1.0), vec![]).unwrap();
        let err = compute_pod_basis(&s, &[1.0; 3], 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientRank {
                requested: 1,
                attainable: 0
            }
        ));
    }

    #[test]
    fn basis_is_orthonormal_and_canonical() {
        let s = DenseMatrix::from_fn(20, 9, |i, j| {
            ((i * j) as f64 * 0.17).sin() + (i as f64) * 0.01 * j as f64
        });
        let s = SnapshotMatrix::new(s, vec![]).unwrap();
        let pod = compute_pod_basis(&s, &[0.0; 20], 5).unwrap();
        assert!(orthonormality_defect(&pod.basis) <= 1e-12);
        for col in pod.basis.columns() {
            let first = col.iter().find(|v| v.abs() > 1e-8).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn null_mode_completion() {
        let s = SnapshotMatrix::new(
            DenseMatrix::from_fn(6, 3, |i, j| if i == 0 { (j + 1) as f64 } else { 0.0 }),
            vec![],
        )
        .unwrap();
        assert!(compute_pod_basis(&s, &[0.0; 6], 2).is_err());
        let pod = compute_pod_basis_with(&s, &[0.0; 6], 3, RankPolicy::CompleteWithNullModes).unwrap();
        assert_eq!(pod.numerical_rank, 1);
        assert!(orthonormality_defect(&pod.basis) <= 1e-12);
        assert!(compute_pod_basis_with(&s, &[0.0; 6], 4, RankPolicy::CompleteWithNullModes).is_err());
    }

    #[test]
    fn energy_hand_cases() {
        assert_eq!(pod_energy_report(&[1.0, 1.0], 1).unwrap(), 0.5);
        assert_eq!(pod_energy_report(&[3.0, 2.0, 1.0], 3).unwrap(), 1.0);
        assert!(pod_energy_report(&[1.0], 0).is_err());
    }
}
