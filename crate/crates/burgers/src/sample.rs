use romkit::{DenseMatrix, Error, Result, SampleMeshSystem, SampleMeshTopology, Scalar};

use crate::{godunov_flux, BurgersParams};

/// Neighbour lookup for one residual cell, as positions in the gathered state.
#[derive(Debug, Clone, Copy)]
struct RowStencil {
    center: usize,
    /// `None` on the inflow boundary.
    left: Option<usize>,
    /// `None` when the right neighbour is outside the sample mesh or the grid.
    right: Option<usize>,
}

/// Burgers velocity and Jacobian rows evaluated on a sample mesh.
///
/// Each residual cell needs its left neighbour, so the closure must have a
/// left width of at least 1. When the right neighbour is not in the mesh the
/// outflow face is evaluated as `F(u_i, u_i)`. That matches the full model on
/// the last cell always, and on interior cells whenever both `u_i` and
/// `u_{i+1}` are nonnegative (the upwind regime this model runs in).
#[derive(Debug, Clone)]
pub struct BurgersSampleMesh<T> {
    params: BurgersParams<T>,
    topology: SampleMeshTopology,
    rows: Vec<RowStencil>,
    source: Vec<T>,
    inv_dx: T,
}

impl<T: Scalar> BurgersSampleMesh<T> {
    pub fn new(params: BurgersParams<T>, topology: SampleMeshTopology) -> Result<Self> {
        params.validate()?;
        if topology.num_cells() != params.num_cells {
            return Err(Error::Topology(format!(
                "topology covers {} cells, model has {}",
                topology.num_cells(),
                params.num_cells
            )));
        }
        let n = params.num_cells;
        let mut rows = Vec::with_capacity(topology.residual_cells().len());
        for (&cell, &center) in topology
            .residual_cells()
            .as_slice()
            .iter()
            .zip(topology.residual_positions())
        {
            let left = if cell == 0 {
                None
            } else {
                Some(topology.state_position(cell - 1).ok_or_else(|| {
                    Error::Topology(format!(
                        "cell {cell} needs its left neighbour {} in the sample mesh",
                        cell - 1
                    ))
                })?)
            };
            let right = if cell + 1 < n {
                topology.state_position(cell + 1)
            } else {
                None
            };
            rows.push(RowStencil { center, left, right });
        }
        let source = topology
            .residual_cells()
            .as_slice()
            .iter()
            .map(|&i| params.source(i))
            .collect();
        Ok(Self {
            inv_dx: params.dx().recip(),
            params,
            topology,
            rows,
            source,
        })
    }

    pub fn params(&self) -> &BurgersParams<T> {
        &self.params
    }

    fn check_gathered(&self, len: usize, context: &'static str) -> Result<()> {
        let expected = self.topology.state_cells().len();
        if len != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found: len,
            });
        }
        Ok(())
    }
}

impl<T: Scalar> SampleMeshSystem<T> for BurgersSampleMesh<T> {
    fn topology(&self) -> &SampleMeshTopology {
        &self.topology
    }

    fn sample_velocity(&self, u: &[T], _t: T) -> Result<Vec<T>> {
        self.check_gathered(u.len(), "sample-mesh state")?;
        Ok(self
            .rows
            .iter()
            .zip(&self.source)
            .map(|(row, &s)| {
                let ui = u[row.center];
                let ul = row.left.map_or(self.params.gamma, |p| u[p]);
                let ur = row.right.map_or(ui, |p| u[p]);
                s - (godunov_flux(ui, ur) - godunov_flux(ul, ui)) * self.inv_dx
            })
            .collect())
    }

    fn sample_apply_jacobian(&self, u: &[T], _t: T, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_gathered(u.len(), "sample-mesh state")?;
        self.check_gathered(b.rows(), "sample-mesh Jacobian operand")?;
        let mut out = DenseMatrix::zeros(self.rows.len(), b.cols());
        for j in 0..b.cols() {
            let src = b.column(j);
            let dst = out.column_mut(j);
            for (d, row) in dst.iter_mut().zip(&self.rows) {
                let mut v = -u[row.center] * src[row.center];
                if let Some(p) = row.left {
                    v += u[p] * src[p];
                }
                *d = v * self.inv_dx;
            }
        }
        Ok(out)
    }
}
