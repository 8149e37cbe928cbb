//! Free evolution, the forward and backward Lyapunov semigroups, and the
//! approximate Lax-Phillips semigroup.

use std::sync::Arc;

use faer::{c64, Col, Mat};

use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, StateVector};
use crate::hardy::HardyProjector;
use crate::lyapunov::LyapunovPair;
use crate::operator::{self, mat_vec, vec_norm, Flags, OperatorMatrix};
use crate::smatrix::SMatrixModel;

fn phase(e: f64, t: f64) -> c64 {
    c64::from_polar(1.0, -e * t)
}

/// `psi(E) -> exp(-iEt) psi(E)`.
pub fn evolve(psi: &StateVector, t: f64) -> StateVector {
    psi.map_nodes(|e| phase(e, t))
}

fn evolve_weighted(grid: &EnergyGrid, x: &[c64], t: f64) -> Vec<c64> {
    x.iter().zip(grid.nodes()).map(|(v, &e)| *v * phase(e, t)).collect()
}

fn check_on(pair_grid: &Arc<EnergyGrid>, psi: &StateVector) -> Result<()> {
    if Arc::ptr_eq(pair_grid, psi.grid()) || **pair_grid == **psi.grid() {
        Ok(())
    } else {
        Err(Error::Usage("state does not live on the operator grid".into()))
    }
}

/// `Z_F(t)(Lambda_F phi) = Lambda_F exp(-iEt) phi`, `t >= 0`.
pub fn z_forward(pair: &LyapunovPair, phi: &StateVector, t: f64) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("forward semigroup needs t >= 0, got {t}")));
    }
    check_on(&pair.grid_half, phi)?;
    pair.lambda_f.apply(&evolve(phi, t))
}

/// `Z_B(t)(Lambda_B phi) = Lambda_B exp(-iEt) phi`, `t <= 0`.
pub fn z_backward(pair: &LyapunovPair, phi: &StateVector, t: f64) -> Result<StateVector> {
    if !(t <= 0.0) {
        return Err(Error::Parameter(format!("backward semigroup needs t <= 0, got {t}")));
    }
    check_on(&pair.grid_half, phi)?;
    pair.lambda_b.apply(&evolve(phi, t))
}

/// Matrix-free `Lambda_F S exp(-iEt) Lambda_B S*` in the outgoing representation.
#[derive(Clone, Debug)]
pub struct ZApp<'a> {
    pair: &'a LyapunovPair,
    s: Vec<c64>,
}

impl<'a> ZApp<'a> {
    pub fn new(pair: &'a LyapunovPair, model: &SMatrixModel) -> Self {
        ZApp { pair, s: model.diagonal(&pair.grid_half, false) }
    }

    pub fn apply_weighted(&self, x: &[c64], t: f64) -> Vec<c64> {
        let sx: Vec<c64> = x.iter().zip(&self.s).map(|(v, s)| *v * s.conj()).collect();
        let b = self.pair.lambda_b.apply_weighted(&sx);
        let u: Vec<c64> = b
            .iter()
            .zip(&self.s)
            .zip(self.pair.grid_half.nodes())
            .map(|((v, s), &e)| *v * *s * phase(e, t))
            .collect();
        self.pair.lambda_f.apply_weighted(&u)
    }

    pub fn apply(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!("approximate semigroup needs t >= 0, got {t}")));
        }
        check_on(&self.pair.grid_half, psi)?;
        let y = self.apply_weighted(&psi.weighted(), t);
        StateVector::from_weighted(psi.grid().clone(), &y, psi.rep())
    }
}

/// Dense `Lambda_F S exp(-iEt) Lambda_B S*`.
pub fn build_z_app(pair: &LyapunovPair, s: &SMatrixModel, t: f64) -> Result<OperatorMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("approximate semigroup needs t >= 0, got {t}")));
    }
    let grid = &pair.grid_half;
    let sd = s.diagonal(grid, false);
    let nodes = grid.nodes();
    let lb = pair.lambda_b.entries();
    let n = grid.n();
    let mid = Mat::from_fn(n, n, |i, j| sd[i] * phase(nodes[i], t) * lb[(i, j)] * sd[j].conj());
    let entries = pair.lambda_f.entries() * &mid;
    OperatorMatrix::new(grid.clone(), entries, Flags::CONTRACTION)
}

#[derive(Clone, Copy, Debug)]
pub struct SemigroupDefectReport {
    pub t1: f64,
    pub t2: f64,
    pub defect: f64,
    pub contraction_ok: bool,
}

/// `|Z_app(t1) Z_app(t2) psi - Z_app(t1 + t2) psi|` relative to `|psi|`.
pub fn z_app_defect(z: &ZApp<'_>, psi: &StateVector, t1: f64, t2: f64) -> Result<SemigroupDefectReport> {
    let a = z.apply(psi, t2)?;
    let ab = z.apply(&a, t1)?;
    let c = z.apply(psi, t1 + t2)?;
    let norm = psi.norm();
    let slack = 1.0 + 1e-9;
    let contraction_ok = a.norm() <= norm * slack && ab.norm() <= norm * slack && c.norm() <= norm * slack;
    Ok(SemigroupDefectReport { t1, t2, defect: ab.sub(&c)?.norm() / norm, contraction_ok })
}

/// `max |Z_F(t1) Z_F(t2) Lambda_F phi - Z_F(t1 + t2) Lambda_F phi| / |phi|` over all pairs.
pub fn z_forward_composition_defect(pair: &LyapunovPair, phi: &StateVector, times: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t1 in times {
        for &t2 in times {
            let inner = evolve(phi, t2);
            let composed = z_forward(pair, &evolve(&inner, t1), 0.0)?;
            let direct = z_forward(pair, phi, t1 + t2)?;
            worst = worst.max(composed.sub(&direct)?.norm());
        }
    }
    Ok(worst / phi.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Splits `psi(t)` into `(backward, forward)` components.
///
/// Forward uses `(Lambda_F psi(t), (I - Lambda_F) psi(t))`, backward uses
/// `((I - Lambda_B) psi(t), Lambda_B psi(t))`.
pub fn transition_decompose(
    pair: &LyapunovPair,
    psi: &StateVector,
    t: f64,
    direction: Direction,
) -> Result<(StateVector, StateVector)> {
    check_on(&pair.grid_half, psi)?;
    let pt = evolve(psi, t);
    match direction {
        Direction::Forward => {
            let b = pair.lambda_f.apply(&pt)?;
            let f = pt.sub(&b)?;
            Ok((b, f))
        }
        Direction::Backward => {
            let f = pair.lambda_b.apply(&pt)?;
            let b = pt.sub(&f)?;
            Ok((b, f))
        }
    }
}

/// `Z_F(t) = V* P_plus U(t) V` with `V` the isometric factor in the polar
/// decomposition `P_plus P_R+ = V Lambda_F`.
///
/// This realizes the forward semigroup on all of the half line without
/// inverting `Lambda_F`.
#[derive(Clone, Debug)]
pub struct PolarForward {
    full: Arc<EnergyGrid>,
    half: Arc<EnergyGrid>,
    v: Mat<c64>,
    p_plus: Mat<c64>,
}

impl PolarForward {
    pub fn build(hp: &HardyProjector, pair: &LyapunovPair) -> Result<PolarForward> {
        if pair.is_full_line() {
            return Err(Error::Usage("polar factor needs a half-line pair".into()));
        }
        let half = pair.grid_half.clone();
        let off = half.offset();
        let p = hp.p_plus.entries();
        let t = Mat::from_fn(p.nrows(), half.n(), |i, j| p[(i, j + off)]);
        let svd = t
            .thin_svd()
            .map_err(|e| Error::LinearAlgebra(format!("singular value decomposition failed: {e:?}")))?;
        let v = svd.U() * svd.V().adjoint();
        Ok(PolarForward { full: hp.grid.clone(), half, v, p_plus: p.to_owned() })
    }

    pub fn apply_weighted(&self, x: &[c64], t: f64) -> Vec<c64> {
        let up = mat_vec(&self.v, x);
        let evolved = evolve_weighted(&self.full, &up, t);
        let projected = mat_vec(&self.p_plus, &evolved);
        let col = Col::from_fn(projected.len(), |i| projected[i]);
        let y = self.v.adjoint() * &col;
        (0..self.v.ncols()).map(|i| y[i]).collect()
    }

    pub fn apply(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!("forward semigroup needs t >= 0, got {t}")));
        }
        check_on(&self.half, psi)?;
        let y = self.apply_weighted(&psi.weighted(), t);
        StateVector::from_weighted(self.half.clone(), &y, psi.rep())
    }

    /// `|Z_F(t) Lambda_F phi - Lambda_F U(t) phi| / |phi|`.
    pub fn intertwining_residual(&self, pair: &LyapunovPair, phi: &StateVector, t: f64) -> Result<f64> {
        let lhs = self.apply(&pair.lambda_f.apply(phi)?, t)?;
        let rhs = z_forward(pair, phi, t)?;
        Ok(lhs.sub(&rhs)?.norm() / phi.norm())
    }
}

/// `Lambda_F U(t) Lambda_F^{-1}`, inverting only eigenvalues above `floor`.
pub fn z_forward_matrix(pair: &LyapunovPair, t: f64, floor: f64) -> Result<OperatorMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("forward semigroup needs t >= 0, got {t}")));
    }
    let sp = &pair.spectral_f;
    let inv = sp.apply_fn(|l| if l > floor { 1.0 / l.sqrt() } else { 0.0 });
    let grid = &pair.grid_half;
    let nodes = grid.nodes();
    let n = grid.n();
    let u_inv = Mat::from_fn(n, n, |i, j| phase(nodes[i], t) * inv[(i, j)]);
    OperatorMatrix::new(grid.clone(), pair.lambda_f.entries() * &u_inv, Flags::NONE)
}

/// `|Lambda_F U(t) - Z_mat(t) Lambda_F|` in operator norm.
pub fn matrix_intertwining_residual(pair: &LyapunovPair, t: f64, floor: f64) -> Result<f64> {
    let z = z_forward_matrix(pair, t, floor)?;
    let grid = &pair.grid_half;
    let nodes = grid.nodes();
    let lf = pair.lambda_f.entries();
    let lu = Mat::from_fn(grid.n(), grid.n(), |i, j| lf[(i, j)] * phase(nodes[j], t));
    let zl = z.entries() * lf;
    let d = Mat::from_fn(grid.n(), grid.n(), |i, j| lu[(i, j)] - zl[(i, j)]);
    operator::spectral_norm(&d)
}

/// Lax-Phillips limit on the full line: `Z(t)(P_plus phi) = P_plus U(t) phi`.
pub fn lp_z(hp: &HardyProjector, phi: &StateVector, t: f64) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("semigroup needs t >= 0, got {t}")));
    }
    hp.p_plus.apply(&evolve(phi, t))
}

/// Composition law of `Z(t) = P_plus U(t)` on `ran P_plus` over all time pairs,
/// relative to `|phi|`.
pub fn lp_composition_defect(hp: &HardyProjector, phi: &StateVector, times: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t1 in times {
        for &t2 in times {
            let composed = lp_z(hp, &evolve(&evolve(phi, t2), t1), 0.0)?;
            let direct = lp_z(hp, phi, t1 + t2)?;
            worst = worst.max(composed.sub(&direct)?.norm());
        }
    }
    Ok(worst / phi.norm())
}

/// `|P_plus U(t1) P_plus U(t2) P_plus phi - P_plus U(t1 + t2) P_plus phi| / |phi|`
/// evaluated with dense matrices; nonzero only through aliasing.
pub fn lp_matrix_defect(hp: &HardyProjector, phi: &StateVector, t1: f64, t2: f64) -> Result<f64> {
    let grid = hp.grid.clone();
    let x = hp.p_plus.apply_weighted(&phi.weighted());
    let a = hp.p_plus.apply_weighted(&evolve_weighted(&grid, &x, t2));
    let ab = hp.p_plus.apply_weighted(&evolve_weighted(&grid, &a, t1));
    let c = hp.p_plus.apply_weighted(&evolve_weighted(&grid, &x, t1 + t2));
    let d: Vec<c64> = ab.iter().zip(&c).map(|(p, q)| p - q).collect();
    Ok(vec_norm(&d) / phi.norm())
}

/// `P_plus S U(t) P_minus S*`, the Lax-Phillips semigroup in the outgoing representation.
pub fn lp_semigroup_matrix(hp: &HardyProjector, s: &SMatrixModel, t: f64) -> Result<OperatorMatrix> {
    let grid = &hp.grid;
    let sd = s.diagonal(grid, false);
    let su: Vec<c64> = sd.iter().zip(grid.nodes()).map(|(v, &e)| *v * phase(e, t)).collect();
    let sc: Vec<c64> = sd.iter().map(|v| v.conj()).collect();
    let left = OperatorMatrix::diagonal(grid.clone(), &su, Flags::UNITARY)?;
    let right = OperatorMatrix::diagonal(grid.clone(), &sc, Flags::UNITARY)?;
    hp.p_plus.compose(&left)?.compose(&hp.p_minus)?.compose(&right)
}

/// Geometric samples in `(0, t_max]` merged with a linear grid on `[0, t_max]`.
pub fn time_grid(t_max: f64, n_geometric: usize, n_linear: usize) -> Result<Vec<f64>> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
    }
    let mut ts = linear_times(0.0, t_max, n_linear.max(2));
    if n_geometric > 0 {
        let t0 = t_max * 1e-4;
        let ratio = if n_geometric > 1 { (t_max / t0).powf(1.0 / (n_geometric - 1) as f64) } else { 1.0 };
        ts.extend((0..n_geometric).map(|k| t0 * ratio.powi(k as i32)));
    }
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_max);
    Ok(ts)
}

/// `n` equally spaced samples from `a` to `b` inclusive.
pub fn linear_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainKind, Rep, Scheme};
    use crate::hardy::{build_hardy_projectors, PvScheme};
    use crate::lyapunov::Sigma;
    use crate::smatrix::ResonanceParams;

    fn setup(n: usize, scale: f64) -> (HardyProjector, LyapunovPair) {
        let scheme = Scheme::Rational { center: 0.0, scale: Some(scale) };
        let full = Arc::new(make_grid(DomainKind::FullLine, n, 1.0, scheme).unwrap());
        let hp = build_hardy_projectors(&full, PvScheme::Auto).unwrap();
        let half = Arc::new(full.half_line());
        let pair = LyapunovPair::build(&hp, &Sigma::HalfLine(half)).unwrap();
        (hp, pair)
    }

    fn packet(grid: &Arc<EnergyGrid>) -> StateVector {
        StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| c64::new((-(e - 2.0).powi(2) / 0.5).exp(), 0.0))
    }

    #[test]
    fn evolution_is_unitary_group() {
        let g = Arc::new(make_grid(DomainKind::HalfLine, 64, 10.0, Scheme::Uniform).unwrap());
        let psi = packet(&g);
        assert_eq!(evolve(&psi, 0.0).values(), psi.values());
        let a = evolve(&evolve(&psi, 1.3), 2.1);
        let b = evolve(&psi, 3.4);
        assert!(a.sub(&b).unwrap().norm() < 1e-13);
        assert!((evolve(&psi, 17.0).norm() - psi.norm()).abs() < 1e-13);
    }

    #[test]
    fn forward_semigroup_is_exact_and_contractive() {
        let (_, pair) = setup(256, 2.0);
        let phi = packet(&pair.grid_half);
        let times = linear_times(0.0, 20.0, 6);
        assert!(z_forward_composition_defect(&pair, &phi, &times).unwrap() < 1e-12);
        let norms: Vec<f64> = times.iter().map(|&t| z_forward(&pair, &phi, t).unwrap().norm()).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
        let at0 = z_forward(&pair, &phi, 0.0).unwrap();
        assert!(at0.sub(&pair.lambda_f.apply(&phi).unwrap()).unwrap().norm() < 1e-14);
    }

    #[test]
    fn time_direction_is_enforced() {
        let (hp, pair) = setup(64, 1.0);
        let phi = packet(&pair.grid_half);
        assert!(matches!(z_forward(&pair, &phi, -1.0), Err(Error::Parameter(_))));
        assert!(matches!(z_backward(&pair, &phi, 1.0), Err(Error::Parameter(_))));
        let s = SMatrixModel::pure(ResonanceParams::new(1.0, 0.1).unwrap());
        assert!(matches!(build_z_app(&pair, &s, -0.5), Err(Error::Parameter(_))));
        assert!(lp_z(&hp, &packet(&hp.grid), -1.0).is_err());
    }

    #[test]
    fn backward_semigroup_contracts_toward_the_past() {
        let (_, pair) = setup(256, 2.0);
        let phi = packet(&pair.grid_half);
        let norms: Vec<f64> = linear_times(0.0, -20.0, 6)
            .iter()
            .map(|&t| z_backward(&pair, &phi, t).unwrap().norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }

    #[test]
    fn dense_and_matrix_free_z_app_agree() {
        let (_, pair) = setup(128, 1.0);
        let s = SMatrixModel::perturbed(ResonanceParams::new(1.0, 0.1).unwrap());
        let z = ZApp::new(&pair, &s);
        let phi = packet(&pair.grid_half);
        for t in [0.0, 0.7, 5.0] {
            let dense = build_z_app(&pair, &s, t).unwrap().apply(&phi).unwrap();
            let free = z.apply(&phi, t).unwrap();
            assert!(dense.sub(&free).unwrap().norm() < 1e-12);
        }
        let m = build_z_app(&pair, &s, 3.0).unwrap();
        assert!(m.norm().unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn transition_components_sum_to_evolved_state() {
        let (_, pair) = setup(128, 1.0);
        let psi = packet(&pair.grid_half);
        for dir in [Direction::Forward, Direction::Backward] {
            let (b, f) = transition_decompose(&pair, &psi, 2.5, dir).unwrap();
            let sum = b.add(&f).unwrap();
            assert!(sum.sub(&evolve(&psi, 2.5)).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn polar_factor_intertwines() {
        let (hp, pair) = setup(256, 2.0);
        let polar = PolarForward::build(&hp, &pair).unwrap();
        let phi = packet(&pair.grid_half);
        assert!(polar.intertwining_residual(&pair, &phi, 0.0).unwrap() < 1e-6);
        let lphi = pair.lambda_f.apply(&phi).unwrap();
        let at0 = polar.apply(&lphi, 0.0).unwrap();
        assert!(at0.sub(&lphi).unwrap().norm() < 1e-6 * phi.norm());
        assert!(polar.apply(&phi, 5.0).unwrap().norm() <= phi.norm() * (1.0 + 1e-9));
    }

    #[test]
    fn regularized_matrix_form_is_exact_at_zero() {
        let (_, pair) = setup(64, 1.0);
        let r = matrix_intertwining_residual(&pair, 0.0, 0.0).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn lax_phillips_z_is_exact() {
        let (hp, _) = setup(256, 1.0);
        let phi = packet(&hp.grid);
        let times = linear_times(0.0, 10.0, 5);
        assert!(lp_composition_defect(&hp, &phi, &times).unwrap() < 1e-12);
    }

    #[test]
    fn time_grid_is_sorted_and_bounded() {
        let ts = time_grid(400.0, 16, 32).unwrap();
        assert_eq!(ts[0], 0.0);
        assert!((ts[ts.len() - 1] - 400.0).abs() < 1e-9);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(time_grid(-1.0, 4, 4).is_err());
    }
}
