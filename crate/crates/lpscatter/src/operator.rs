//! Dense operators acting on weighted samples `sqrt(w_i) * psi(E_i)`.
//!
//! In this representation the discrete inner product is Euclidean, so a
//! self-adjoint operator is a Hermitian matrix and no weight adjustment enters
//! the structural checks.

use std::ops::BitOr;
use std::sync::Arc;

use faer::{c64, Col, Mat, Side};

use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, StateVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags(u8);

impl Flags {
    pub const NONE: Flags = Flags(0);
    pub const SELF_ADJOINT: Flags = Flags(1);
    pub const POSITIVE: Flags = Flags(2);
    pub const CONTRACTION: Flags = Flags(4);
    pub const UNITARY: Flags = Flags(8);

    pub const fn union(self, other: Flags) -> Flags {
        Flags(self.0 | other.0)
    }

    pub fn contains(self, other: Flags) -> bool {
        self.0 & other.0 == other.0
    }
}

impl BitOr for Flags {
    type Output = Flags;
    fn bitor(self, rhs: Flags) -> Flags {
        Flags(self.0 | rhs.0)
    }
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    grid: Arc<EnergyGrid>,
    entries: Mat<c64>,
    flags: Flags,
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl Spectral {
    pub fn of(h: &Mat<c64>) -> Result<Spectral> {
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("eigendecomposition failed: {e:?}")))?;
        let values = (0..h.nrows()).map(|i| eig.S().column_vector()[i].re).collect();
        Ok(Spectral { values, vectors: eig.U().to_owned() })
    }

    /// `V diag(f(lambda)) V*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &scaled * self.vectors.adjoint()
    }

    /// Coefficients `V* x`.
    pub fn coefficients(&self, x: &[c64]) -> Vec<c64> {
        let col = Col::from_fn(x.len(), |i| x[i]);
        let c = self.vectors.adjoint() * &col;
        (0..x.len()).map(|i| c[i]).collect()
    }

    /// `V c`.
    pub fn synthesize(&self, c: &[c64]) -> Vec<c64> {
        let col = Col::from_fn(c.len(), |i| c[i]);
        let x = &self.vectors * &col;
        (0..c.len()).map(|i| x[i]).collect()
    }
}

/// Structural measurements of an operator.
#[derive(Clone, Copy, Debug)]
pub struct StructureReport {
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub operator_norm: f64,
}

pub fn mat_vec(m: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    let col = Col::from_fn(x.len(), |i| x[i]);
    let y = m * &col;
    (0..m.nrows()).map(|i| y[i]).collect()
}

pub fn vec_norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat<c64>) -> Result<f64> {
    let s = m
        .singular_values()
        .map_err(|e| Error::LinearAlgebra(format!("singular values failed: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Largest eigenvalue magnitude of a Hermitian matrix.
pub fn hermitian_norm(m: &Mat<c64>) -> Result<f64> {
    let ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("eigenvalues failed: {e:?}")))?;
    Ok(ev.iter().fold(0.0_f64, |m, l| m.max(l.abs())))
}

pub fn hermiticity_defect(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

impl OperatorMatrix {
    pub fn new(grid: Arc<EnergyGrid>, entries: Mat<c64>, flags: Flags) -> Result<Self> {
        if entries.nrows() != grid.n() || entries.ncols() != grid.n() {
            return Err(Error::Usage(format!(
                "operator is {}x{} but grid has {} nodes",
                entries.nrows(),
                entries.ncols(),
                grid.n()
            )));
        }
        Ok(OperatorMatrix { grid, entries, flags })
    }

    pub fn identity(grid: Arc<EnergyGrid>) -> Self {
        let n = grid.n();
        let entries = Mat::from_fn(n, n, |i, j| c64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        let flags = Flags::SELF_ADJOINT | Flags::POSITIVE | Flags::CONTRACTION | Flags::UNITARY;
        OperatorMatrix { grid, entries, flags }
    }

    pub fn diagonal(grid: Arc<EnergyGrid>, d: &[c64], flags: Flags) -> Result<Self> {
        let n = grid.n();
        if d.len() != n {
            return Err(Error::Usage("diagonal length does not match grid".into()));
        }
        let entries = Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { c64::new(0.0, 0.0) });
        Ok(OperatorMatrix { grid, entries, flags })
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        &self.grid
    }

    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<c64> {
        self.entries
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn with_flags(mut self, flags: Flags) -> Self {
        self.flags = flags;
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    fn check_grid(&self, grid: &Arc<EnergyGrid>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, grid) || *self.grid == **grid {
            Ok(())
        } else {
            Err(Error::Usage("operator and state live on different grids".into()))
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_grid(psi.grid())?;
        let y = self.apply_weighted(&psi.weighted());
        StateVector::from_weighted(psi.grid().clone(), &y, psi.rep())
    }

    pub fn apply_weighted(&self, x: &[c64]) -> Vec<c64> {
        mat_vec(&self.entries, x)
    }

    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_grid(&rhs.grid)?;
        let entries = &self.entries * &rhs.entries;
        let mut flags = Flags::NONE;
        if self.flags.contains(Flags::CONTRACTION) && rhs.flags.contains(Flags::CONTRACTION) {
            flags = flags | Flags::CONTRACTION;
        }
        if self.flags.contains(Flags::UNITARY) && rhs.flags.contains(Flags::UNITARY) {
            flags = flags | Flags::UNITARY;
        }
        Ok(OperatorMatrix { grid: self.grid.clone(), entries, flags })
    }

    /// `a * self + b * rhs`.
    pub fn combine(&self, a: f64, rhs: &OperatorMatrix, b: f64) -> Result<OperatorMatrix> {
        self.check_grid(&rhs.grid)?;
        let n = self.dim();
        let entries = Mat::from_fn(n, n, |i, j| self.entries[(i, j)] * a + rhs.entries[(i, j)] * b);
        Ok(OperatorMatrix { grid: self.grid.clone(), entries, flags: Flags::NONE })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    pub fn symmetrized(&self) -> OperatorMatrix {
        OperatorMatrix {
            grid: self.grid.clone(),
            entries: symmetrize(&self.entries),
            flags: self.flags | Flags::SELF_ADJOINT,
        }
    }

    pub fn spectral(&self) -> Result<Spectral> {
        if !self.flags.contains(Flags::SELF_ADJOINT) {
            return Err(Error::Usage("spectral decomposition needs a self-adjoint operator".into()));
        }
        Spectral::of(&self.entries)
    }

    /// Operator norm; exact largest singular value.
    pub fn norm(&self) -> Result<f64> {
        if self.flags.contains(Flags::SELF_ADJOINT) {
            hermitian_norm(&self.entries)
        } else {
            spectral_norm(&self.entries)
        }
    }

    /// Operator norm of `self - rhs`.
    pub fn distance(&self, rhs: &OperatorMatrix) -> Result<f64> {
        let d = self.combine(1.0, rhs, -1.0)?;
        if self.flags.contains(Flags::SELF_ADJOINT) && rhs.flags.contains(Flags::SELF_ADJOINT) {
            hermitian_norm(&symmetrize(d.entries()))
        } else {
            spectral_norm(d.entries())
        }
    }

    /// Operator norm of `A^2 - A`.
    pub fn idempotence_defect(&self) -> Result<f64> {
        let sq = OperatorMatrix {
            grid: self.grid.clone(),
            entries: &self.entries * &self.entries,
            flags: self.flags,
        };
        sq.distance(self)
    }

    pub fn structure(&self) -> Result<StructureReport> {
        let hermiticity_defect = self.hermiticity_defect();
        let (min_eigenvalue, max_eigenvalue) = if self.flags.contains(Flags::SELF_ADJOINT) {
            let ev = symmetrize(&self.entries)
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::LinearAlgebra(format!("eigenvalues failed: {e:?}")))?;
            (ev[0], ev[ev.len() - 1])
        } else {
            (f64::NAN, f64::NAN)
        };
        let operator_norm = if self.flags.contains(Flags::SELF_ADJOINT) {
            min_eigenvalue.abs().max(max_eigenvalue.abs())
        } else {
            spectral_norm(&self.entries)?
        };
        Ok(StructureReport { hermiticity_defect, min_eigenvalue, max_eigenvalue, operator_norm })
    }

    /// Checks every declared flag against measured structure.
    pub fn verify(&self, tol: f64) -> Result<StructureReport> {
        let r = self.structure()?;
        let f = self.flags;
        if f.contains(Flags::SELF_ADJOINT) && r.hermiticity_defect > tol {
            return Err(Error::Precondition(format!("hermiticity defect {:e}", r.hermiticity_defect)));
        }
        if f.contains(Flags::POSITIVE) && r.min_eigenvalue < -tol {
            return Err(Error::Precondition(format!("negative eigenvalue {:e}", r.min_eigenvalue)));
        }
        if f.contains(Flags::CONTRACTION) && r.operator_norm > 1.0 + tol {
            return Err(Error::Precondition(format!("operator norm {} exceeds one", r.operator_norm)));
        }
        Ok(r)
    }
}
