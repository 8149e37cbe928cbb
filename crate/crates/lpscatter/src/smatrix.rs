//! Scalar S-matrix models with one resonance pole.

use std::sync::Arc;

use faer::c64;

use crate::error::{Error, Result};
use crate::grid::EnergyGrid;
use crate::operator::{Flags, OperatorMatrix};

/// A pole `mu = e0 - i gamma` in the lower half plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceParams {
    pub e0: f64,
    pub gamma: f64,
}

impl ResonanceParams {
    pub fn new(e0: f64, gamma: f64) -> Result<Self> {
        if !(e0.is_finite() && e0 > 0.0 && gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Parameter(format!("resonance needs e0 > 0 and gamma > 0, got ({e0}, {gamma})")));
        }
        Ok(ResonanceParams { e0, gamma })
    }

    pub fn mu(&self) -> c64 {
        c64::new(self.e0, -self.gamma)
    }

    pub fn sharpness(&self) -> f64 {
        self.gamma / self.e0
    }
}

/// `S(E) = ((E - conj mu)/(E - mu)) * prod_k ((E - conj mu_k)/(E - mu_k)) * exp(i a E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SMatrixModel {
    pub pole: ResonanceParams,
    pub extra_poles: Vec<ResonanceParams>,
    pub phase_a: f64,
}

fn blaschke(e: f64, mu: c64) -> c64 {
    (c64::new(e, 0.0) - mu.conj()) / (c64::new(e, 0.0) - mu)
}

impl SMatrixModel {
    pub fn pure(pole: ResonanceParams) -> Self {
        SMatrixModel { pole, extra_poles: Vec::new(), phase_a: 0.0 }
    }

    /// Default perturbation: one distant extra pole at `4 - 0.8i` and `a = 0.05`.
    pub fn perturbed(pole: ResonanceParams) -> Self {
        SMatrixModel {
            pole,
            extra_poles: vec![ResonanceParams { e0: 4.0, gamma: 0.8 }],
            phase_a: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ResonanceParams::new(self.pole.e0, self.pole.gamma)?;
        for p in &self.extra_poles {
            ResonanceParams::new(p.e0, p.gamma)?;
            if *p == self.pole {
                return Err(Error::Parameter("extra pole coincides with the resonance pole".into()));
            }
        }
        if !(self.phase_a.is_finite() && self.phase_a >= 0.0) {
            return Err(Error::Parameter("phase_a must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Inner factor with the resonance pole removed.
    pub fn inner_factor(&self, e: f64) -> c64 {
        let mut s = c64::from_polar(1.0, self.phase_a * e);
        for p in &self.extra_poles {
            s *= blaschke(e, p.mu());
        }
        s
    }

    pub fn is_pure(&self) -> bool {
        self.extra_poles.is_empty() && self.phase_a == 0.0
    }

    pub fn eval(&self, e: f64) -> c64 {
        blaschke(e, self.pole.mu()) * self.inner_factor(e)
    }

    /// Values on every node, conjugated on request.
    pub fn diagonal(&self, grid: &EnergyGrid, conjugate: bool) -> Vec<c64> {
        grid.nodes()
            .iter()
            .map(|&e| {
                let s = self.eval(e);
                if conjugate { s.conj() } else { s }
            })
            .collect()
    }

    /// `|1 - ((E - mu)/(E - conj mu)) S(E)|`, which vanishes for the pure model.
    pub fn deviation(&self, e: f64) -> f64 {
        if self.is_pure() {
            return 0.0;
        }
        (c64::new(1.0, 0.0) - self.inner_factor(e)).norm()
    }
}

pub fn eval_smatrix(model: &SMatrixModel, e: f64) -> c64 {
    model.eval(e)
}

pub fn multiplication_operator(model: &SMatrixModel, grid: &Arc<EnergyGrid>, conjugate: bool) -> Result<OperatorMatrix> {
    let d = model.diagonal(grid, conjugate);
    OperatorMatrix::diagonal(grid.clone(), &d, Flags::UNITARY | Flags::CONTRACTION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainKind, Scheme};

    fn mu() -> ResonanceParams {
        ResonanceParams::new(1.0, 0.1).unwrap()
    }

    #[test]
    fn pure_pole_value_at_resonance() {
        let s = eval_smatrix(&SMatrixModel::pure(mu()), 1.0);
        assert!((s - c64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pure_inner_factor_is_one() {
        let m = SMatrixModel::pure(mu());
        for e in [0.01, 0.5, 1.0, 7.0, 1e4] {
            assert_eq!(m.inner_factor(e), c64::new(1.0, 0.0));
            assert_eq!(m.deviation(e), 0.0);
        }
    }

    #[test]
    fn high_energy_limit_is_one() {
        let s = SMatrixModel::pure(mu()).eval(1e12);
        assert!((s - c64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn multiplication_operator_is_unitary() {
        let g = Arc::new(make_grid(DomainKind::HalfLine, 64, 10.0, Scheme::rational()).unwrap());
        let m = SMatrixModel::perturbed(mu());
        let s = multiplication_operator(&m, &g, false).unwrap();
        let sc = multiplication_operator(&m, &g, true).unwrap();
        let id = OperatorMatrix::identity(g.clone());
        let prod = s.compose(&sc).unwrap();
        assert!(prod.distance(&id).unwrap() < 1e-12);
        assert!((s.norm().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_factor_at_resonance_is_finite() {
        let m = SMatrixModel::perturbed(mu());
        let s1 = m.inner_factor(1.0);
        let expected = blaschke(1.0, c64::new(4.0, -0.8)) * c64::from_polar(1.0, 0.05);
        assert!((s1 - expected).norm() < 1e-15);
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(ResonanceParams::new(1.0, -0.1).is_err());
        let mut m = SMatrixModel::pure(mu());
        m.extra_poles.push(mu());
        assert!(m.validate().is_err());
    }
}
