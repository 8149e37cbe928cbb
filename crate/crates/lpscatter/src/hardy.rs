//! Hardy-space projections on full-line grids.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::grid::{DomainKind, EnergyGrid, Rep, Scheme, StateVector};
use crate::operator::{Flags, OperatorMatrix};

/// Discretization of the principal-value integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PvScheme {
    /// `Exact` on rational grids, `Kernel` otherwise.
    Auto,
    /// Truncated Fourier series in the angle variable of a rational grid. The
    /// result is an orthogonal projection up to rounding.
    Exact,
    /// Cauchy kernel `1/(E_i - E_j)` off the diagonal; the diagonal makes the
    /// transform of a constant vanish.
    Kernel,
    /// Cauchy kernel shifted off the axis by `eta_factor` local spacings.
    Regularized { eta_factor: f64 },
}

impl PvScheme {
    pub fn name(&self) -> &'static str {
        match self {
            PvScheme::Auto => "auto",
            PvScheme::Exact => "exact",
            PvScheme::Kernel => "kernel",
            PvScheme::Regularized { .. } => "regularized",
        }
    }
}

#[derive(Clone, Debug)]
pub struct HardyProjector {
    pub grid: Arc<EnergyGrid>,
    pub p_plus: OperatorMatrix,
    pub p_minus: OperatorMatrix,
    pub oracle_residual: f64,
    pub scheme: PvScheme,
}

/// One entry of the rational oracle suite.
#[derive(Clone, Copy, Debug)]
pub struct OracleCase {
    pub pole: c64,
    /// True when `1/(E - pole)` lies in the range of `P_plus`.
    pub upper_class: bool,
    pub residual: f64,
}

pub const ORACLE_POLES: [(f64, f64); 8] = [
    (1.0, -0.1),
    (1.0, 0.1),
    (-1.0, -0.1),
    (-1.0, 0.1),
    (3.0, -0.5),
    (3.0, 0.5),
    (-3.0, -0.5),
    (-3.0, 0.5),
];

/// Fraction of `e_max` excluded at each end in oracle comparisons.
pub const BOUNDARY_BAND: f64 = 0.05;

pub fn build_hardy_projectors(grid: &Arc<EnergyGrid>, pv: PvScheme) -> Result<HardyProjector> {
    if grid.kind() != DomainKind::FullLine {
        return Err(Error::Usage("Hardy projections need a full-line grid".into()));
    }
    let resolved = match (pv, grid.scheme()) {
        (PvScheme::Auto, Scheme::Rational { .. }) => PvScheme::Exact,
        (PvScheme::Auto, _) => PvScheme::Kernel,
        (PvScheme::Exact, Scheme::Rational { .. }) => PvScheme::Exact,
        (PvScheme::Exact, _) => {
            return Err(Error::Usage("the exact projection needs a rational grid".into()));
        }
        (other, _) => other,
    };
    let (plus, minus, flags) = match resolved {
        PvScheme::Exact => {
            let (center, scale) = match grid.scheme() {
                Scheme::Rational { center, scale: Some(c) } => (center, c),
                _ => unreachable!("rational grids always carry a resolved scale"),
            };
            let plus = fourier_projection(grid, center, scale, true);
            let minus = fourier_projection(grid, center, scale, false);
            (plus, minus, Flags::SELF_ADJOINT | Flags::POSITIVE | Flags::CONTRACTION)
        }
        PvScheme::Kernel => {
            let h = hilbert_kernel(grid);
            (half_sum(&h, 1.0), half_sum(&h, -1.0), Flags::NONE)
        }
        PvScheme::Regularized { eta_factor } => {
            if !(eta_factor > 0.0) {
                return Err(Error::Parameter("regularization factor must be positive".into()));
            }
            let plus = cauchy_regularized(grid, eta_factor);
            let n = grid.n();
            let minus = Mat::from_fn(n, n, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                c64::new(id, 0.0) - plus[(i, j)]
            });
            (plus, minus, Flags::NONE)
        }
        PvScheme::Auto => unreachable!(),
    };
    let p_plus = OperatorMatrix::new(grid.clone(), plus, flags)?;
    let p_minus = OperatorMatrix::new(grid.clone(), minus, flags)?;
    let mut hp = HardyProjector { grid: grid.clone(), p_plus, p_minus, oracle_residual: 0.0, scheme: resolved };
    hp.oracle_residual = oracle_suite(&hp).iter().fold(0.0_f64, |m, c| m.max(c.residual));
    Ok(hp)
}

/// Projection onto the nonnegative (`upper`) or negative Fourier modes in the
/// angle variable, written in the weighted-sample basis.
fn fourier_projection(grid: &EnergyGrid, center: f64, scale: f64, upper: bool) -> Mat<c64> {
    let n = grid.n();
    let u: Vec<c64> = grid
        .nodes()
        .iter()
        .map(|&e| {
            let z = c64::new(e - center, scale);
            z / z.norm()
        })
        .collect();
    let sign = if upper { 1.0 } else { -1.0 };
    let odd: Vec<c64> = (0..n)
        .map(|d| {
            let delta = 2.0 * PI * d as f64 / n as f64;
            let denom = c64::new(1.0 - delta.cos(), -delta.sin());
            c64::new(2.0 / n as f64, 0.0) / denom * sign
        })
        .collect();
    Mat::from_fn(n, n, |j, l| {
        if j == l {
            return c64::new(0.5, 0.0);
        }
        let d = (j + n - l) % n;
        if d % 2 == 0 {
            c64::new(0.0, 0.0)
        } else {
            u[j].conj() * odd[d] * u[l]
        }
    })
}

/// Discrete Hilbert transform `(1/pi) PV int f(E') / (E - E') dE'`.
fn hilbert_kernel(grid: &EnergyGrid) -> Mat<c64> {
    let (e, w) = (grid.nodes(), grid.weights());
    let n = grid.n();
    let diag: Vec<f64> = (0..n)
        .map(|i| -(0..n).filter(|&j| j != i).map(|j| w[j] / (PI * (e[i] - e[j]))).sum::<f64>())
        .collect();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(diag[i], 0.0)
        } else {
            c64::new((w[i] * w[j]).sqrt() / (PI * (e[i] - e[j])), 0.0)
        }
    })
}

/// `(I + s i H) / 2`.
fn half_sum(h: &Mat<c64>, s: f64) -> Mat<c64> {
    let n = h.nrows();
    Mat::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        (c64::new(id, 0.0) + c64::new(0.0, s) * h[(i, j)]) * 0.5
    })
}

/// `(1/(2 pi i)) int f(E') / (E' - E - i eta) dE'`.
fn cauchy_regularized(grid: &EnergyGrid, eta_factor: f64) -> Mat<c64> {
    let (e, w) = (grid.nodes(), grid.weights());
    Mat::from_fn(grid.n(), grid.n(), |i, j| {
        let eta = eta_factor * w[i];
        let denom = c64::new(0.0, 2.0 * PI) * c64::new(e[j] - e[i], -eta);
        c64::new((w[i] * w[j]).sqrt(), 0.0) / denom
    })
}

pub fn apply_projector(p: &OperatorMatrix, psi: &StateVector) -> Result<StateVector> {
    p.apply(psi)
}

/// `H = -i (2 P_plus - I)`.
pub fn hilbert_transform(hp: &HardyProjector, psi: &StateVector) -> Result<StateVector> {
    let p = hp.p_plus.apply(psi)?;
    let two_p_minus = p.scaled(c64::new(2.0, 0.0)).sub(psi)?;
    Ok(two_p_minus.scaled(c64::new(0.0, -1.0)))
}

/// Runs the rational oracle suite. Poles closer to the axis than four local
/// spacings are skipped.
pub fn oracle_suite(hp: &HardyProjector) -> Vec<OracleCase> {
    let grid = &hp.grid;
    let band = (1.0 - BOUNDARY_BAND) * grid.e_max();
    let inside: Vec<bool> = grid.nodes().iter().map(|e| e.abs() <= band).collect();
    let w = grid.weights();
    ORACLE_POLES
        .iter()
        .filter(|(re, im)| im.abs() >= 4.0 * grid.local_spacing(*re))
        .map(|&(re, im)| {
            let pole = c64::new(re, im);
            let f = StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| (c64::new(e, 0.0) - pole).inv());
            let pf = hp.p_plus.apply(&f).expect("grid matches by construction");
            let upper_class = im < 0.0;
            let mut err = 0.0;
            let mut nrm = 0.0;
            for i in 0..grid.n() {
                if !inside[i] {
                    continue;
                }
                let target = if upper_class { f.values()[i] } else { c64::new(0.0, 0.0) };
                err += w[i] * (pf.values()[i] - target).norm_sqr();
                nrm += w[i] * f.values()[i].norm_sqr();
            }
            OracleCase { pole, upper_class, residual: (err / nrm).sqrt() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn rational(n: usize, e_max: f64) -> Arc<EnergyGrid> {
        Arc::new(make_grid(DomainKind::FullLine, n, e_max, Scheme::rational()).unwrap())
    }

    #[test]
    fn exact_projection_is_an_orthogonal_projection() {
        let hp = build_hardy_projectors(&rational(256, 50.0), PvScheme::Auto).unwrap();
        assert_eq!(hp.scheme, PvScheme::Exact);
        assert!(hp.p_plus.hermiticity_defect() < 1e-13);
        assert!(hp.p_plus.idempotence_defect().unwrap() < 1e-12);
        let sum = hp.p_plus.combine(1.0, &hp.p_minus, 1.0).unwrap();
        let id = OperatorMatrix::identity(hp.grid.clone());
        assert!(sum.with_flags(Flags::SELF_ADJOINT).distance(&id).unwrap() < 1e-12);
    }

    #[test]
    fn oracle_suite_passes_on_rational_grid() {
        let hp = build_hardy_projectors(&rational(1024, 200.0), PvScheme::Auto).unwrap();
        let cases = oracle_suite(&hp);
        assert_eq!(cases.len(), 8);
        assert!(hp.oracle_residual < 1e-3, "{}", hp.oracle_residual);
    }

    #[test]
    fn hilbert_pair_of_lorentzian() {
        let grid = rational(2048, 200.0);
        let hp = build_hardy_projectors(&grid, PvScheme::Auto).unwrap();
        let (e0, g) = (1.0, 0.1);
        let f = StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| c64::new(g / ((e - e0).powi(2) + g * g), 0.0));
        let hf = hilbert_transform(&hp, &f).unwrap();
        let mut worst = 0.0_f64;
        for (i, &e) in grid.nodes().iter().enumerate() {
            if e.abs() > 0.95 * grid.e_max() {
                continue;
            }
            let exact = (e - e0) / ((e - e0).powi(2) + g * g);
            worst = worst.max((hf.values()[i] - c64::new(exact, 0.0)).norm());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn kernel_scheme_on_uniform_grid_is_complementary() {
        let grid = Arc::new(make_grid(DomainKind::FullLine, 128, 20.0, Scheme::Uniform).unwrap());
        let hp = build_hardy_projectors(&grid, PvScheme::Auto).unwrap();
        assert_eq!(hp.scheme, PvScheme::Kernel);
        let sum = hp.p_plus.combine(1.0, &hp.p_minus, 1.0).unwrap();
        let id = OperatorMatrix::identity(grid);
        assert!(sum.distance(&id).unwrap() < 1e-12);
    }

    #[test]
    fn half_line_grid_is_rejected() {
        let half = Arc::new(rational(64, 10.0).half_line());
        assert!(matches!(build_hardy_projectors(&half, PvScheme::Auto), Err(Error::Usage(_))));
        let uni = Arc::new(make_grid(DomainKind::FullLine, 64, 10.0, Scheme::Uniform).unwrap());
        assert!(matches!(build_hardy_projectors(&uni, PvScheme::Exact), Err(Error::Usage(_))));
    }

    #[test]
    fn commutes_with_real_scalars() {
        let grid = rational(128, 20.0);
        let hp = build_hardy_projectors(&grid, PvScheme::Auto).unwrap();
        let f = StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| c64::new((-e * e).exp(), e.sin()));
        let a = hp.p_plus.apply(&f.scaled(c64::new(2.0, 0.0))).unwrap();
        let b = hp.p_plus.apply(&f).unwrap().scaled(c64::new(2.0, 0.0));
        assert_eq!(a.values(), b.values());
    }
}
