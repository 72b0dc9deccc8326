//! Hyper-reduction: weighting operators `A`, seeded sample selection and
//! sample-mesh topology for evaluating residual rows on a subset of cells.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Sorted, duplicate-free cell indices in `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndices {
    num_cells: usize,
    indices: Vec<usize>,
    seed: Option<u64>,
    forced: Vec<usize>,
}

impl SampleIndices {
    /// Wraps an explicit index list; it is sorted and deduplicated.
    pub fn from_indices(num_cells: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= num_cells) {
            return Err(Error::InvalidArgument(format!(
                "sample index {bad} out of range for {num_cells} cells"
            )));
        }
        Ok(Self {
            num_cells,
            indices,
            seed: None,
            forced: Vec::new(),
        })
    }

    /// Every cell, `0..N`.
    pub fn all(num_cells: usize) -> Self {
        Self {
            num_cells,
            indices: (0..num_cells).collect(),
            seed: None,
            forced: Vec::new(),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn forced(&self) -> &[usize] {
        &self.forced
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// One index per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.indices.len() * 6);
        for i in &self.indices {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the one-index-per-line text list; blank lines and `#` comments are skipped.
    pub fn from_text(num_cells: usize, text: &str) -> Result<Self> {
        let mut idx = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v = line
                .parse::<usize>()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
            idx.push(v);
        }
        Self::from_indices(num_cells, idx)
    }
}

/// Number of samples `ceil(fraction·N)`.
pub fn sample_count(num_cells: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction {fraction} not in (0, 1]"
        )));
    }
    Ok(((fraction * num_cells as f64).ceil() as usize).min(num_cells))
}

/// Draws `ceil(fraction·N)` cells: every forced cell plus a uniform sample
/// without replacement from the rest, by partial Fisher–Yates on a ChaCha8
/// stream seeded with `seed`.
pub fn select_sample_indices(num_cells: usize, fraction: f64, seed: u64, forced: &[usize]) -> Result<SampleIndices> {
    let z = sample_count(num_cells, fraction)?;
    select_sample_count(num_cells, z, seed, forced)
}

/// As [`select_sample_indices`] with an explicit sample count.
pub fn select_sample_count(num_cells: usize, count: usize, seed: u64, forced: &[usize]) -> Result<SampleIndices> {
    if count == 0 || count > num_cells {
        return Err(Error::InvalidArgument(format!(
            "sample count {count} not in 1..={num_cells}"
        )));
    }
    let mut forced = forced.to_vec();
    forced.sort_unstable();
    forced.dedup();
    if let Some(&bad) = forced.iter().find(|&&i| i >= num_cells) {
        return Err(Error::InvalidArgument(format!(
            "forced index {bad} out of range for {num_cells} cells"
        )));
    }
    if forced.len() > count {
        return Err(Error::InvalidArgument(format!(
            "{} forced cells exceed the sample size {count}",
            forced.len()
        )));
    }
    let mut pool: Vec<usize> = (0..num_cells).filter(|i| forced.binary_search(i).is_err()).collect();
    let need = count - forced.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..need {
        // u64 ranges keep the stream identical across pointer widths.
        let j = rng.random_range(i as u64..pool.len() as u64) as usize;
        pool.swap(i, j);
    }
    let mut indices = forced.clone();
    indices.extend_from_slice(&pool[..need]);
    indices.sort_unstable();
    Ok(SampleIndices {
        num_cells,
        indices,
        seed: Some(seed),
        forced,
    })
}

/// The weighting matrix `A` applied to residuals and Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingOperator<T> {
    Identity,
    /// `diag(d)`, entries positive.
    Diagonal(Vec<T>),
    /// `P`: selected rows of the identity.
    Collocation(SampleIndices),
    /// `P·D`: selected rows, each scaled by `d[index]` (`d` has length N).
    ScaledCollocation {
        indices: SampleIndices,
        weights: Vec<T>,
    },
}

impl<T: Scalar> WeightingOperator<T> {
    pub fn diagonal(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal weights must be positive and finite".into(),
            ));
        }
        Ok(Self::Diagonal(weights))
    }

    pub fn scaled_collocation(indices: SampleIndices, weights: Vec<T>) -> Result<Self> {
        check_len("ScaledCollocation weights", indices.num_cells(), weights.len())?;
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal weights must be positive and finite".into(),
            ));
        }
        Ok(Self::ScaledCollocation { indices, weights })
    }

    /// Required input length, if fixed by the operator.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Diagonal(d) => Some(d.len()),
            Self::Collocation(idx) | Self::ScaledCollocation { indices: idx, .. } => Some(idx.num_cells()),
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Self::Identity | Self::Diagonal(_) => input_dim,
            Self::Collocation(idx) | Self::ScaledCollocation { indices: idx, .. } => idx.len(),
        }
    }

    /// Sampled rows, if this operator samples.
    pub fn sample_indices(&self) -> Option<&SampleIndices> {
        match self {
            Self::Collocation(idx) | Self::ScaledCollocation { indices: idx, .. } => Some(idx),
            _ => None,
        }
    }

    /// Row weights aligned with the output, if any (`d_i` or `d[indices_j]`).
    pub fn output_row_weights(&self) -> Option<Vec<T>> {
        match self {
            Self::Identity | Self::Collocation(_) => None,
            Self::Diagonal(d) => Some(d.clone()),
            Self::ScaledCollocation { indices, weights } => {
                Some(indices.as_slice().iter().map(|&i| weights[i]).collect())
            }
        }
    }

    fn check_input(&self, n: usize) -> Result<()> {
        match self.input_dim() {
            Some(expected) => check_len("weighting operator input", expected, n),
            None => Ok(()),
        }
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_input(v.len())?;
        Ok(match self {
            Self::Identity => v.to_vec(),
            Self::Diagonal(d) => v.iter().zip(d).map(|(&x, &w)| w * x).collect(),
            Self::Collocation(idx) => idx.as_slice().iter().map(|&i| v[i]).collect(),
            Self::ScaledCollocation { indices, weights } => {
                indices.as_slice().iter().map(|&i| weights[i] * v[i]).collect()
            }
        })
    }

    /// Applies the operator to each column.
    pub fn apply_matrix(&self, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_input(m.rows())?;
        Ok(match self {
            Self::Identity => m.clone(),
            Self::Diagonal(d) => {
                let mut out = m.clone();
                for j in 0..out.cols() {
                    for (x, &w) in out.column_mut(j).iter_mut().zip(d) {
                        *x *= w;
                    }
                }
                out
            }
            Self::Collocation(idx) => m.select_rows(idx.as_slice()),
            Self::ScaledCollocation { indices, weights } => {
                let mut out = m.select_rows(indices.as_slice());
                for j in 0..out.cols() {
                    for (x, &i) in out.column_mut(j).iter_mut().zip(indices.as_slice()) {
                        *x *= weights[i];
                    }
                }
                out
            }
        })
    }
}

/// Free-function form of [`WeightingOperator::apply`].
pub fn apply_weighting<T: Scalar>(w: &WeightingOperator<T>, v: &[T]) -> Result<Vec<T>> {
    w.apply(v)
}

/// Free-function form of [`WeightingOperator::apply_matrix`].
pub fn apply_weighting_matrix<T: Scalar>(w: &WeightingOperator<T>, m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    w.apply_matrix(m)
}

/// Control-volume sizes over the time step, `(L/N)/Δt` on a uniform grid.
pub fn control_volume_weights<T: Scalar>(num_cells: usize, domain_length: T, dt: T) -> Result<Vec<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    if num_cells == 0 || !(domain_length > T::zero()) {
        return Err(Error::InvalidArgument(
            "grid must be nonempty with positive length".into(),
        ));
    }
    let w = domain_length / T::from_usize(num_cells).expect("cell count representable") / dt;
    Ok(vec![w; num_cells])
}

/// Stencil reach of a residual evaluation in a 1D cell ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StencilWidths {
    pub left: usize,
    pub right: usize,
}

impl StencilWidths {
    pub const fn new(left: usize, right: usize) -> Self {
        Self { left, right }
    }
}

/// Residual cells plus the state cells needed to evaluate them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeshTopology {
    residual_cells: SampleIndices,
    state_cells: Vec<usize>,
    residual_positions: Vec<usize>,
}

impl SampleMeshTopology {
    pub fn residual_cells(&self) -> &SampleIndices {
        &self.residual_cells
    }

    pub fn state_cells(&self) -> &[usize] {
        &self.state_cells
    }

    pub fn num_cells(&self) -> usize {
        self.residual_cells.num_cells()
    }

    /// Position of each residual cell inside `state_cells`.
    pub fn residual_positions(&self) -> &[usize] {
        &self.residual_positions
    }

    /// Position of a global cell inside `state_cells`.
    pub fn state_position(&self, cell: usize) -> Option<usize> {
        self.state_cells.binary_search(&cell).ok()
    }

    /// Gathers a full-length vector at the state cells.
    pub fn gather_state<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.state_cells.iter().map(|&i| full[i]).collect()
    }

    /// Gathers a full-length vector at the residual cells.
    pub fn gather_residual<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.residual_cells.as_slice().iter().map(|&i| full[i]).collect()
    }
}

/// State cells = union over residual cells `i` of `[i − left, i + right]`, clamped to the grid.
pub fn build_stencil_closure(residual_cells: SampleIndices, widths: StencilWidths) -> SampleMeshTopology {
    let n = residual_cells.num_cells();
    let mut state = Vec::with_capacity(residual_cells.len() * (1 + widths.left + widths.right));
    for &i in residual_cells.as_slice() {
        let lo = i.saturating_sub(widths.left);
        let hi = (i + widths.right).min(n.saturating_sub(1));
        state.extend(lo..=hi);
    }
    state.sort_unstable();
    state.dedup();
    let residual_positions = residual_cells
        .as_slice()
        .iter()
        .map(|c| state.binary_search(c).expect("residual cell in closure"))
        .collect();
    SampleMeshTopology {
        residual_cells,
        state_cells: state,
        residual_positions,
    }
}
