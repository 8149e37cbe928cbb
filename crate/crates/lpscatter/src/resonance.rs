//! Resonance states, the survival-amplitude decomposition, and inequality verifiers.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::Arc;

use faer::c64;

use crate::closed_form::{CHAIN_CONSTANT, BOUND_CONSTANT};
use crate::error::{Error, Result};
use crate::evolution::{PolarForward, ZApp};
use crate::grid::{embed_halfline, inner, EnergyGrid, Rep, StateVector};
use crate::hardy::{build_hardy_projectors, HardyProjector, PvScheme};
use crate::lyapunov::{LyapunovPair, Sigma};
use crate::operator::vec_norm;
use crate::smatrix::{ResonanceParams, SMatrixModel};

pub const DEFAULT_REPORT_TOL: f64 = 1e-3;
pub const DEFAULT_INVERSE_FLOOR: f64 = 1e-12;

/// Builds the Hardy projectors on `full` and the Lyapunov pair on its half line.
pub fn half_line_setup(full: &Arc<EnergyGrid>, pv: PvScheme) -> Result<(HardyProjector, LyapunovPair)> {
    let hp = build_hardy_projectors(full, pv)?;
    let half = Arc::new(full.half_line());
    let pair = LyapunovPair::build(&hp, &Sigma::HalfLine(half))?;
    Ok((hp, pair))
}

/// Rejects poles the grid cannot resolve or that sit near the truncation edge.
pub fn check_preconditions(grid: &EnergyGrid, params: &ResonanceParams) -> Result<()> {
    let ResonanceParams { e0, gamma } = *params;
    if e0 + 10.0 * gamma >= grid.e_max() {
        return Err(Error::Precondition(format!(
            "pole too close to the truncation edge: e0 + 10 gamma = {} but e_max = {}; raise e_max",
            e0 + 10.0 * gamma,
            grid.e_max()
        )));
    }
    let h = grid.local_spacing(e0);
    if gamma <= 4.0 * h {
        return Err(Error::Precondition(format!(
            "pole not resolved: gamma = {gamma} but 4 x local spacing at e0 is {}; refine the grid near e0",
            4.0 * h
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ResonanceStates {
    pub params: ResonanceParams,
    /// `1/(E - mu)` on the half line.
    pub psi_app: StateVector,
    /// Regularized solution of `Lambda_F x = psi_app`.
    pub psi_res: StateVector,
    pub norm_app_sqr: f64,
    pub norm_res_sqr: f64,
    /// `norm_app_sqr / norm_res_sqr`.
    pub ratio: f64,
    /// Eigenvalue floor below which components were discarded.
    pub floor: f64,
    pub discarded: usize,
    /// Condition number of `Lambda_F` on the retained components.
    pub conditioning: f64,
}

pub fn build_resonance_states(pair: &LyapunovPair, params: ResonanceParams) -> Result<ResonanceStates> {
    build_resonance_states_with_floor(pair, params, DEFAULT_INVERSE_FLOOR)
}

pub fn build_resonance_states_with_floor(
    pair: &LyapunovPair,
    params: ResonanceParams,
    floor: f64,
) -> Result<ResonanceStates> {
    if pair.is_full_line() {
        return Err(Error::Usage("resonance states need a half-line pair".into()));
    }
    if !(floor >= 0.0) {
        return Err(Error::Parameter(format!("inverse floor must be nonnegative, got {floor}")));
    }
    let grid = pair.grid_half.clone();
    check_preconditions(&grid, &params)?;
    let mu = params.mu();
    let psi_app = StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| (c64::new(e, 0.0) - mu).inv());
    let sp = &pair.spectral_f;
    let coeff = sp.coefficients(&psi_app.weighted());
    let mut discarded = 0;
    let mut smallest = f64::INFINITY;
    let scaled: Vec<c64> = coeff
        .iter()
        .zip(&sp.values)
        .map(|(c, &l)| {
            if l > floor {
                smallest = smallest.min(l);
                c / l.sqrt()
            } else {
                discarded += 1;
                c64::new(0.0, 0.0)
            }
        })
        .collect();
    let psi_res = StateVector::from_weighted(grid, &sp.synthesize(&scaled), Rep::Outgoing)?;
    let largest = sp.values.last().copied().unwrap_or(0.0);
    let norm_app_sqr = psi_app.norm_sqr();
    let norm_res_sqr = psi_res.norm_sqr();
    Ok(ResonanceStates {
        params,
        psi_app,
        psi_res,
        norm_app_sqr,
        norm_res_sqr,
        ratio: norm_app_sqr / norm_res_sqr,
        floor,
        discarded,
        conditioning: (largest / smallest).sqrt(),
    })
}

impl ResonanceStates {
    pub fn psi_res_normalized(&self) -> StateVector {
        self.psi_res.normalized()
    }

    /// `|1 - ((E - mu)/(E - conj mu)) S(E)|^2 |psi_app(E)|^2` integrated over the half line.
    pub fn deviation_integral(&self, s: &SMatrixModel) -> f64 {
        let g = self.psi_app.grid();
        g.nodes()
            .iter()
            .zip(g.weights())
            .zip(self.psi_app.values())
            .map(|((&e, &w), v)| w * s.deviation(e).powi(2) * v.norm_sqr())
            .sum()
    }

    fn check_model(&self, s: &SMatrixModel) -> Result<()> {
        if s.pole != self.params {
            return Err(Error::Usage("S-matrix pole differs from the resonance pole".into()));
        }
        Ok(())
    }
}

/// `Lambda_F psi = b + coeff psi_res` with `coeff = (psi_app, psi) / |psi_res|^2`.
pub fn decompose_lambda_plus(
    states: &ResonanceStates,
    pair: &LyapunovPair,
    psi: &StateVector,
) -> Result<(StateVector, c64)> {
    let coeff = inner(&states.psi_app, psi)? / states.norm_res_sqr;
    let lp = pair.lambda_f.apply(psi)?;
    let b = lp.sub(&states.psi_res.scaled(coeff))?;
    Ok((b, coeff))
}

#[derive(Clone, Copy, Debug)]
pub struct SurvivalRecord {
    pub t: f64,
    pub amplitude: c64,
    pub pole_term: c64,
    pub background: c64,
}

/// `(psi_app, U(t) psi_app) / |psi_app|^2 = B(t) + exp(-i mu t)`.
pub fn survival_decomposition(states: &ResonanceStates, times: &[f64]) -> Result<Vec<SurvivalRecord>> {
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Parameter("survival times must be nonnegative".into()));
    }
    let g = states.psi_app.grid();
    let density: Vec<(f64, f64)> = g
        .nodes()
        .iter()
        .zip(g.weights())
        .zip(states.psi_app.values())
        .map(|((&e, &w), v)| (e, w * v.norm_sqr() / states.norm_app_sqr))
        .collect();
    let mu = states.params.mu();
    Ok(times
        .iter()
        .map(|&t| {
            let amplitude: c64 = density.iter().map(|&(e, p)| c64::from_polar(p, -e * t)).sum();
            let pole_term = (c64::new(0.0, -t) * mu).exp();
            SurvivalRecord { t, amplitude, pole_term, background: amplitude - pole_term }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMeta {
    pub n: usize,
    pub e_max: f64,
}

impl GridMeta {
    pub fn of(grid: &EnergyGrid) -> Self {
        GridMeta { n: grid.n(), e_max: grid.e_max() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    Equal,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Equal => "==",
        }
    }
}

/// One inequality or identity evaluated numerically.
///
/// `AtMost` passes when `lhs <= rhs_total * (1 + tol)`; `Equal` passes when
/// `|lhs - rhs_total| <= tol * |rhs_total|`.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs_terms: Vec<(String, f64)>,
    pub rhs_total: f64,
    pub constant_c: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub grid_meta: GridMeta,
}

impl BoundReport {
    pub fn new(
        name: &str,
        relation: Relation,
        lhs: f64,
        rhs_terms: Vec<(String, f64)>,
        constant_c: Option<f64>,
        tol: f64,
        grid_meta: GridMeta,
    ) -> Self {
        let rhs_total: f64 = rhs_terms.iter().map(|(_, v)| v).sum();
        let pass = match relation {
            Relation::AtMost => lhs <= rhs_total * (1.0 + tol),
            Relation::Equal => (lhs - rhs_total).abs() <= tol * rhs_total.abs(),
        };
        BoundReport { name: name.to_string(), relation, lhs, rhs_terms, rhs_total, constant_c, tol, pass, grid_meta }
    }

    pub fn slack(&self) -> f64 {
        self.rhs_total - self.lhs
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.rhs_terms.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn terms_string(&self) -> String {
        self.rhs_terms.iter().map(|(n, v)| format!("{n}={v:.16e}")).collect::<Vec<_>>().join(";")
    }
}

fn terms(items: &[(&str, f64)]) -> Vec<(String, f64)> {
    items.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// `Lambda_F S Lambda_B S* x` on weighted samples.
fn lambda_plus_lambda_minus(pair: &LyapunovPair, s: &SMatrixModel, x: &StateVector) -> Result<StateVector> {
    ZApp::new(pair, s).apply(x, 0.0)
}

/// `|Z_app(t) psi~ - exp(-i mu t) psi~| <= |psi~ - Lambda_+ Lambda_- psi~|` for each `t`.
pub fn eigenvector_deviation(
    states: &ResonanceStates,
    pair: &LyapunovPair,
    s: &SMatrixModel,
    times: &[f64],
    tol: f64,
) -> Result<Vec<BoundReport>> {
    states.check_model(s)?;
    let z = ZApp::new(pair, s);
    let rt = states.psi_res_normalized();
    let rhs = rt.sub(&z.apply(&rt, 0.0)?)?.norm();
    let mu = states.params.mu();
    let meta = GridMeta::of(rt.grid());
    times
        .iter()
        .map(|&t| {
            let zt = z.apply(&rt, t)?;
            let lhs = zt.sub(&rt.scaled((c64::new(0.0, -t) * mu).exp()))?.norm();
            Ok(BoundReport::new(
                &format!("eigenvector-deviation@t={t}"),
                Relation::AtMost,
                lhs,
                terms(&[("projection_defect", rhs)]),
                None,
                tol,
                meta,
            ))
        })
        .collect()
}

/// `|Z_F(t) psi_res - exp(-i mu t) psi_res| / |psi_res|` with `Z_F` from the polar factor.
pub fn eigen_relation_residual(states: &ResonanceStates, polar: &PolarForward, times: &[f64]) -> Result<Vec<f64>> {
    let mu = states.params.mu();
    let norm = states.psi_res.norm();
    times
        .iter()
        .map(|&t| {
            let zt = polar.apply(&states.psi_res, t)?;
            Ok(zt.sub(&states.psi_res.scaled((c64::new(0.0, -t) * mu).exp()))?.norm() / norm)
        })
        .collect()
}

/// `|psi~ - Lambda_+ Lambda_- psi~| <= C (1 - r)^{1/2} + (deviation integral / |psi_app|^2)^{1/2}`.
pub fn projection_bound_report(
    states: &ResonanceStates,
    pair: &LyapunovPair,
    s: &SMatrixModel,
    tol: f64,
) -> Result<BoundReport> {
    states.check_model(s)?;
    let rt = states.psi_res_normalized();
    let lhs = rt.sub(&lambda_plus_lambda_minus(pair, s, &rt)?)?.norm();
    let root = (1.0 - states.ratio).max(0.0).sqrt();
    let term1 = BOUND_CONSTANT * root;
    let term2 = (states.deviation_integral(s) / states.norm_app_sqr).sqrt();
    Ok(BoundReport::new(
        "projection-bound",
        Relation::AtMost,
        lhs,
        terms(&[("term1", term1), ("term2", term2)]),
        Some(BOUND_CONSTANT),
        tol,
        GridMeta::of(rt.grid()),
    ))
}

/// Every intermediate step from `|(I - Lambda_B) S* psi_res|` to the final estimate.
pub fn proof_chain_report(
    states: &ResonanceStates,
    pair: &LyapunovPair,
    hp: &HardyProjector,
    s: &SMatrixModel,
    tol: f64,
) -> Result<Vec<BoundReport>> {
    states.check_model(s)?;
    let grid = pair.grid_half.clone();
    let meta = GridMeta::of(&grid);
    let res = &states.psi_res;
    let app = &states.psi_app;
    let norm_res = res.norm();
    let norm_app = app.norm();
    let root = (1.0 - states.ratio).max(0.0).sqrt();

    let s_diag = s.diagonal(&grid, false);
    let s_star_res = res.map_nodes(|e| s.eval(e).conj());

    let one_minus_lb = s_star_res.sub(&pair.lambda_b.apply(&s_star_res)?)?;
    let a_lhs = one_minus_lb.norm_sqr();
    let a_rhs = inner(&s_star_res, &pair.m_f.apply(&s_star_res)?)?.re;

    let embedded = embed_halfline(&s_star_res, &hp.grid)?;
    let projected = hp.p_plus.apply(&embedded)?;
    let p_norm = projected.norm();

    let conj_mu = states.params.mu().conj();
    let app_bar = StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| (c64::new(e, 0.0) - conj_mu).inv());
    let p_app_bar = hp.p_plus.apply(&embed_halfline(&app_bar, &hp.grid)?)?.norm();

    let res_minus_app = res.sub(app)?.norm();
    let s_app_bar: Vec<c64> = app_bar.values().iter().zip(&s_diag).map(|(v, sv)| v * sv).collect();
    let c_lhs = app.sub(&StateVector::new(grid.clone(), s_app_bar, Rep::Outgoing)?)?.norm();
    let c_rhs = states.deviation_integral(s).sqrt();

    let b_rhs = (1.0 + SQRT_2) * root * norm_res;
    let d_rhs = FRAC_1_SQRT_2 * root * norm_app;

    let lplm = lambda_plus_lambda_minus(pair, s, res)?;
    let final_lhs = res.sub(&lplm)?.norm();
    let lf_part = {
        let lb_minus_one = one_minus_lb.scaled(c64::new(-1.0, 0.0));
        let x: Vec<c64> = lb_minus_one.weighted().iter().zip(&s_diag).map(|(v, sv)| v * sv).collect();
        vec_norm(&pair.lambda_f.apply_weighted(&x))
    };

    Ok(vec![
        BoundReport::new(
            "complement-root-bound",
            Relation::AtMost,
            a_lhs,
            terms(&[("forward_expectation", a_rhs)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "forward-expectation-identity",
            Relation::Equal,
            a_rhs,
            terms(&[("projected_norm_sqr", p_norm * p_norm)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "three-term-split",
            Relation::AtMost,
            p_norm,
            terms(&[("res_minus_app", res_minus_app), ("inner_factor_deviation", c_lhs), ("projected_conjugate", p_app_bar)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "res-app-difference",
            Relation::AtMost,
            res_minus_app,
            terms(&[("bound", b_rhs)]),
            Some(1.0 + SQRT_2),
            tol,
            meta,
        ),
        BoundReport::new(
            "inner-factor-deviation",
            Relation::Equal,
            c_lhs,
            terms(&[("integral", c_rhs)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "projected-conjugate-state",
            Relation::Equal,
            p_app_bar,
            terms(&[("closed_form", d_rhs)]),
            Some(FRAC_1_SQRT_2),
            tol,
            meta,
        ),
        BoundReport::new(
            "collected-complement-bound",
            Relation::AtMost,
            one_minus_lb.norm(),
            terms(&[("res_app_bound", b_rhs), ("integral", c_rhs), ("closed_form", d_rhs)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "final-triangle",
            Relation::AtMost,
            final_lhs,
            terms(&[("lambda_f_part", lf_part), ("res_minus_app", res_minus_app)]),
            None,
            tol,
            meta,
        ),
        BoundReport::new(
            "final-collected",
            Relation::AtMost,
            final_lhs,
            terms(&[("chain_term", CHAIN_CONSTANT * root * norm_res), ("integral", c_rhs)]),
            Some(CHAIN_CONSTANT),
            tol,
            meta,
        ),
    ])
}
