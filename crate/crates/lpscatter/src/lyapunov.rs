//! Forward and backward Lyapunov operators and their square roots.

use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::evolution::evolve;
use crate::grid::{DomainKind, EnergyGrid, StateVector};
use crate::hardy::HardyProjector;
use crate::operator::{self, Flags, OperatorMatrix, Spectral};

/// Support of the absolutely continuous spectrum.
#[derive(Clone, Debug)]
pub enum Sigma {
    HalfLine(Arc<EnergyGrid>),
    FullLine,
}

/// Discretization noise removed when a compressed projection is made
/// self-adjoint and its spectrum clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildDefects {
    pub hermiticity_f: f64,
    pub hermiticity_b: f64,
    pub clipped_f: f64,
    pub clipped_b: f64,
}

#[derive(Clone, Debug)]
pub struct LyapunovPair {
    pub full: Arc<EnergyGrid>,
    /// Grid carrying the operators: the half-line child, or the full line in
    /// the Lax-Phillips limit.
    pub grid_half: Arc<EnergyGrid>,
    pub m_f: OperatorMatrix,
    pub m_b: OperatorMatrix,
    pub lambda_f: OperatorMatrix,
    pub lambda_b: OperatorMatrix,
    pub spectral_f: Spectral,
    pub spectral_b: Spectral,
    /// Smallest eigenvalue of `m_f` after clipping.
    pub eigen_floor: f64,
    pub defects: BuildDefects,
}

fn block(p: &OperatorMatrix, offset: usize) -> Mat<c64> {
    let n = p.dim() - offset;
    let e = p.entries();
    Mat::from_fn(n, n, |i, j| e[(i + offset, j + offset)])
}

fn support_grid(hp: &HardyProjector, sigma: &Sigma) -> Result<Arc<EnergyGrid>> {
    match sigma {
        Sigma::FullLine => Ok(hp.grid.clone()),
        Sigma::HalfLine(half) => {
            if half.is_child_of(&hp.grid) {
                Ok(half.clone())
            } else {
                Err(Error::Usage("half-line grid is not the child of the projector grid".into()))
            }
        }
    }
}

struct Compressed {
    raw_hermiticity: f64,
    clipped: f64,
    spectral: Spectral,
}

fn compress(p: &OperatorMatrix, grid: &Arc<EnergyGrid>) -> Result<Compressed> {
    let raw = block(p, grid.offset());
    let raw_hermiticity = operator::hermiticity_defect(&raw);
    let mut spectral = Spectral::of(&operator::symmetrize(&raw))?;
    let clipped = spectral.values.iter().fold(0.0_f64, |m, &l| m.max(-l).max(l - 1.0));
    for l in spectral.values.iter_mut() {
        *l = l.clamp(0.0, 1.0);
    }
    Ok(Compressed { raw_hermiticity, clipped, spectral })
}

const LYAPUNOV_FLAGS: Flags = Flags::SELF_ADJOINT.union(Flags::POSITIVE).union(Flags::CONTRACTION);

/// `P_R+ P_plus P_R+` on the half line, made self-adjoint with spectrum in `[0, 1]`.
pub fn build_m_f(hp: &HardyProjector, half: &Arc<EnergyGrid>) -> Result<OperatorMatrix> {
    let grid = support_grid(hp, &Sigma::HalfLine(half.clone()))?;
    let c = compress(&hp.p_plus, &grid)?;
    OperatorMatrix::new(grid, c.spectral.apply_fn(|l| l), LYAPUNOV_FLAGS)
}

/// `P_R+ P_minus P_R+` on the half line, built from `P_minus` directly.
pub fn build_m_b(hp: &HardyProjector, half: &Arc<EnergyGrid>) -> Result<OperatorMatrix> {
    let grid = support_grid(hp, &Sigma::HalfLine(half.clone()))?;
    let c = compress(&hp.p_minus, &grid)?;
    OperatorMatrix::new(grid, c.spectral.apply_fn(|l| l), LYAPUNOV_FLAGS)
}

/// `(M_plus, M_minus)` for a given spectral support. On the full line these are
/// the projections themselves.
pub fn build_m_general(hp: &HardyProjector, sigma: &Sigma) -> Result<(OperatorMatrix, OperatorMatrix)> {
    match sigma {
        Sigma::FullLine => Ok((hp.p_plus.clone(), hp.p_minus.clone())),
        Sigma::HalfLine(half) => Ok((build_m_f(hp, half)?, build_m_b(hp, half)?)),
    }
}

/// Spectral square root with eigenvalues clipped to `[0, 1]`.
pub fn sqrt_operator(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let f = m.flags();
    if !(f.contains(Flags::SELF_ADJOINT) && f.contains(Flags::POSITIVE)) {
        return Err(Error::Usage("square root needs a self-adjoint positive operator".into()));
    }
    let sp = Spectral::of(&operator::symmetrize(m.entries()))?;
    let root = sp.apply_fn(|l| l.clamp(0.0, 1.0).sqrt());
    OperatorMatrix::new(m.grid().clone(), root, LYAPUNOV_FLAGS)
}

/// `tau(t) = (psi(t), M psi(t))` with `psi(t) = exp(-iEt) psi`.
pub fn lyapunov_trace(m: &OperatorMatrix, psi: &StateVector, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Parameter("times must be sorted ascending".into()));
    }
    if !(Arc::ptr_eq(m.grid(), psi.grid()) || **m.grid() == **psi.grid()) {
        return Err(Error::Usage("operator and state live on different grids".into()));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let x = evolve(psi, t).weighted();
            let y = m.apply_weighted(&x);
            x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
        })
        .collect())
}

impl LyapunovPair {
    /// Builds both operators and both square roots with one eigendecomposition each.
    pub fn build(hp: &HardyProjector, sigma: &Sigma) -> Result<LyapunovPair> {
        let grid = support_grid(hp, sigma)?;
        let f = compress(&hp.p_plus, &grid)?;
        let b = compress(&hp.p_minus, &grid)?;
        let m_f = OperatorMatrix::new(grid.clone(), f.spectral.apply_fn(|l| l), LYAPUNOV_FLAGS)?;
        let m_b = OperatorMatrix::new(grid.clone(), b.spectral.apply_fn(|l| l), LYAPUNOV_FLAGS)?;
        let lambda_f = OperatorMatrix::new(grid.clone(), f.spectral.apply_fn(f64::sqrt), LYAPUNOV_FLAGS)?;
        let lambda_b = OperatorMatrix::new(grid.clone(), b.spectral.apply_fn(f64::sqrt), LYAPUNOV_FLAGS)?;
        let eigen_floor = f.spectral.values.first().copied().unwrap_or(0.0);
        let defects = BuildDefects {
            hermiticity_f: f.raw_hermiticity,
            hermiticity_b: b.raw_hermiticity,
            clipped_f: f.clipped,
            clipped_b: b.clipped,
        };
        Ok(LyapunovPair {
            full: hp.grid.clone(),
            grid_half: grid,
            m_f,
            m_b,
            lambda_f,
            lambda_b,
            spectral_f: f.spectral,
            spectral_b: b.spectral,
            eigen_floor,
            defects,
        })
    }

    pub fn is_full_line(&self) -> bool {
        self.grid_half.kind() == DomainKind::FullLine
    }

    /// Operator norm of `[I - Lambda_B, Lambda_F]`.
    pub fn commutator_defect(&self) -> Result<f64> {
        let ab = self.lambda_f.compose(&self.lambda_b)?;
        let ba = self.lambda_b.compose(&self.lambda_f)?;
        operator::spectral_norm(ab.combine(1.0, &ba, -1.0)?.entries())
    }

    /// Operator norm of `M_F + M_B - I`.
    pub fn complement_defect(&self) -> Result<f64> {
        let sum = self.m_f.combine(1.0, &self.m_b, 1.0)?.with_flags(Flags::SELF_ADJOINT);
        sum.distance(&OperatorMatrix::identity(self.grid_half.clone()))
    }

    /// Condition number of `Lambda_F`.
    pub fn lambda_f_condition(&self) -> f64 {
        let max = self.spectral_f.values.last().copied().unwrap_or(0.0);
        (max / self.eigen_floor).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Rep, Scheme};
    use crate::hardy::{build_hardy_projectors, PvScheme};

    fn setup(n: usize, scale: f64) -> (HardyProjector, Arc<EnergyGrid>) {
        let scheme = Scheme::Rational { center: 0.0, scale: Some(scale) };
        let full = Arc::new(make_grid(DomainKind::FullLine, n, 1.0, scheme).unwrap());
        let hp = build_hardy_projectors(&full, PvScheme::Auto).unwrap();
        (hp, Arc::new(full.half_line()))
    }

    #[test]
    fn forward_operator_is_positive_contractive_injective() {
        let (hp, half) = setup(512, 1.0);
        let m = build_m_f(&hp, &half).unwrap();
        let r = m.verify(1e-8).unwrap();
        assert!(r.min_eigenvalue > 0.0 && r.max_eigenvalue <= 1.0 + 1e-8);
    }

    #[test]
    fn forward_and_backward_sum_to_identity() {
        let (hp, half) = setup(512, 1.0);
        let pair = LyapunovPair::build(&hp, &Sigma::HalfLine(half)).unwrap();
        assert!(pair.complement_defect().unwrap() < 1e-6);
        assert!(pair.commutator_defect().unwrap() < 1e-8);
    }

    #[test]
    fn full_line_support_gives_projections() {
        let (hp, _) = setup(256, 1.0);
        let (mp, mm) = build_m_general(&hp, &Sigma::FullLine).unwrap();
        assert_eq!(mp.entries(), hp.p_plus.entries());
        assert_eq!(mm.entries(), hp.p_minus.entries());
        let pair = LyapunovPair::build(&hp, &Sigma::FullLine).unwrap();
        assert!(pair.m_f.idempotence_defect().unwrap() < 1e-6);
        let d = pair.lambda_f.distance(&hp.p_plus).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn general_half_line_matches_dedicated_builders() {
        let (hp, half) = setup(128, 1.0);
        let (mp, mm) = build_m_general(&hp, &Sigma::HalfLine(half.clone())).unwrap();
        assert_eq!(mp.entries(), build_m_f(&hp, &half).unwrap().entries());
        assert_eq!(mm.entries(), build_m_b(&hp, &half).unwrap().entries());
    }

    #[test]
    fn square_root_reconstructs() {
        let (hp, half) = setup(1024, 1.0);
        let m = build_m_f(&hp, &half).unwrap();
        let l = sqrt_operator(&m).unwrap();
        let sq = l.compose(&l).unwrap().with_flags(Flags::SELF_ADJOINT);
        assert!(sq.distance(&m).unwrap() < 1e-8);
        let id = OperatorMatrix::identity(half);
        assert!(sqrt_operator(&id).unwrap().distance(&id).unwrap() < 1e-12);
    }

    #[test]
    fn square_root_of_projection_is_itself() {
        let (hp, _) = setup(128, 1.0);
        let root = sqrt_operator(&hp.p_plus).unwrap();
        assert!(root.distance(&hp.p_plus).unwrap() < 1e-6);
    }

    #[test]
    fn sqrt_rejects_unflagged_input() {
        let (hp, half) = setup(64, 1.0);
        let m = build_m_f(&hp, &half).unwrap().with_flags(Flags::NONE);
        assert!(matches!(sqrt_operator(&m), Err(Error::Usage(_))));
    }

    #[test]
    fn identity_trace_is_constant() {
        let (_, half) = setup(128, 1.0);
        let psi = StateVector::from_fn(half.clone(), Rep::Outgoing, |e| c64::new((-(e - 1.0).powi(2)).exp(), 0.0));
        let id = OperatorMatrix::identity(half);
        let tr = lyapunov_trace(&id, &psi, &[0.0, 1.0, 5.0, 20.0]).unwrap();
        for v in &tr {
            assert!((v - psi.norm_sqr()).abs() < 1e-12);
        }
        assert!(lyapunov_trace(&id, &psi, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn mismatched_half_grid_is_rejected() {
        let (hp, _) = setup(64, 1.0);
        let other = Arc::new(make_grid(DomainKind::HalfLine, 32, 5.0, Scheme::Uniform).unwrap());
        assert!(matches!(build_m_f(&hp, &other), Err(Error::Usage(_))));
    }
}
