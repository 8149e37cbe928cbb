//! Quadrature grids on the energy axis and sampled states.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::c64;

use crate::error::{Error, Result};

/// Points per panel of the composite Gauss-Legendre rule.
pub const GL_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    FullLine,
    HalfLine,
}

/// Node placement rule.
///
/// `Rational` maps an equispaced angle `theta` in `(-pi, pi)` to
/// `E = center + scale * tan(theta / 2)`. On such a grid the Hardy projections
/// are exact truncations of a discrete Fourier series in `theta`. When `scale`
/// is `None` it is chosen so the outermost nodes sit at `center +- e_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Uniform,
    GaussLegendre,
    Rational { center: f64, scale: Option<f64> },
}

impl Scheme {
    pub fn rational() -> Self {
        Scheme::Rational { center: 0.0, scale: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::GaussLegendre => "gauss-legendre",
            Scheme::Rational { .. } => "rational",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnergyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: DomainKind,
    e_max: f64,
    scheme: Scheme,
    parent_len: usize,
    offset: usize,
}

impl PartialEq for EnergyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.offset == other.offset
            && self.parent_len == other.parent_len
            && self.nodes == other.nodes
            && self.weights == other.weights
    }
}

/// Builds a grid. For `HalfLine`, `n` counts the half-line nodes and the grid
/// is cut from a full-line parent with `2n` nodes.
pub fn make_grid(kind: DomainKind, n: usize, e_max: f64, scheme: Scheme) -> Result<EnergyGrid> {
    if n < 8 {
        return Err(Error::Parameter(format!("node count {n} is below the minimum of 8")));
    }
    if !(e_max.is_finite() && e_max > 0.0) {
        return Err(Error::Parameter(format!("e_max must be positive and finite, got {e_max}")));
    }
    match kind {
        DomainKind::FullLine => full_line(n, e_max, scheme),
        DomainKind::HalfLine => Ok(full_line(2 * n, e_max, scheme)?.half_line()),
    }
}

fn full_line(n: usize, e_max: f64, scheme: Scheme) -> Result<EnergyGrid> {
    if n % 2 != 0 {
        return Err(Error::Parameter(format!("full-line node count must be even, got {n}")));
    }
    let (nodes, weights, scheme) = match scheme {
        Scheme::Uniform => {
            let h = 2.0 * e_max / n as f64;
            let nodes = (0..n).map(|k| (k as f64 + 0.5) * h - e_max).collect();
            (nodes, vec![h; n], scheme)
        }
        Scheme::GaussLegendre => {
            if n % (2 * GL_ORDER) != 0 {
                return Err(Error::Parameter(format!(
                    "gauss-legendre grids need a multiple of {} nodes, got {n}",
                    2 * GL_ORDER
                )));
            }
            let panels = n / GL_ORDER;
            let width = 2.0 * e_max / panels as f64;
            let (x, w) = gauss_legendre(GL_ORDER);
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for p in 0..panels {
                let mid = -e_max + (p as f64 + 0.5) * width;
                for (xi, wi) in x.iter().zip(&w) {
                    nodes.push(mid + 0.5 * width * xi);
                    weights.push(0.5 * width * wi);
                }
            }
            (nodes, weights, scheme)
        }
        Scheme::Rational { center, scale } => {
            let c = scale.unwrap_or(e_max * (PI / (2.0 * n as f64)).tan());
            if !(c.is_finite() && c > 0.0) || !center.is_finite() {
                return Err(Error::Parameter(format!("rational grid needs a positive scale, got {c}")));
            }
            let dtheta = 2.0 * PI / n as f64;
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for j in 0..n {
                let theta = -PI + (j as f64 + 0.5) * dtheta;
                let x = c * (0.5 * theta).tan();
                nodes.push(center + x);
                weights.push(dtheta * (c * c + x * x) / (2.0 * c));
            }
            (nodes, weights, Scheme::Rational { center, scale: Some(c) })
        }
    };
    let e_max = match scheme {
        Scheme::Rational { .. } => nodes.iter().fold(0.0_f64, |m, e: &f64| m.max(e.abs())),
        _ => e_max,
    };
    Ok(EnergyGrid { nodes, weights, kind: DomainKind::FullLine, e_max, scheme, parent_len: n, offset: 0 })
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, z);
        x[m - 1 - i] = z;
        w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

impl EnergyGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Largest node magnitude for rational grids, the truncation energy otherwise.
    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// Scheme with all defaults resolved.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Index of the first node inside the full-line parent.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// The half-line child: exactly the positive nodes of this full-line grid.
    pub fn half_line(&self) -> EnergyGrid {
        let start = self.nodes.partition_point(|&e| e <= 0.0);
        EnergyGrid {
            nodes: self.nodes[start..].to_vec(),
            weights: self.weights[start..].to_vec(),
            kind: DomainKind::HalfLine,
            e_max: self.e_max,
            scheme: self.scheme,
            parent_len: self.n(),
            offset: start,
        }
    }

    pub fn is_child_of(&self, parent: &EnergyGrid) -> bool {
        self.kind == DomainKind::HalfLine
            && parent.kind == DomainKind::FullLine
            && self.parent_len == parent.n()
            && parent.nodes.get(self.offset..) == Some(&self.nodes[..])
            && parent.weights.get(self.offset..) == Some(&self.weights[..])
            && (self.offset == 0 || parent.nodes[self.offset - 1] <= 0.0)
    }

    /// Local resolution near `e`: the weight of the closest node.
    pub fn local_spacing(&self, e: f64) -> f64 {
        let k = self.nodes.partition_point(|&x| x < e);
        let candidates = [k.saturating_sub(1), k.min(self.n() - 1)];
        let best = candidates
            .into_iter()
            .min_by(|&a, &b| (self.nodes[a] - e).abs().total_cmp(&(self.nodes[b] - e).abs()))
            .unwrap_or(0);
        self.weights[best]
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// Checks the structural invariants of the grid.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.weights.len() || self.nodes.is_empty() {
            return Err(Error::Usage("grid has mismatched nodes and weights".into()));
        }
        if self.nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Usage("grid nodes are not strictly increasing".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Usage("grid has a non-positive weight".into()));
        }
        match self.kind {
            DomainKind::HalfLine if self.nodes[0] <= 0.0 => {
                Err(Error::Usage("half-line grid has a non-positive node".into()))
            }
            DomainKind::FullLine if self.is_centered() && !self.is_symmetric() => {
                Err(Error::Usage("centred full-line grid is not symmetric".into()))
            }
            _ => Ok(()),
        }
    }

    /// True unless the grid is a rational grid with a shifted center.
    pub fn is_centered(&self) -> bool {
        !matches!(self.scheme, Scheme::Rational { center, .. } if center != 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| {
            let (a, b) = (self.nodes[i], self.nodes[n - 1 - i]);
            (a + b).abs() <= 1e-12 * a.abs().max(1.0)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Outgoing,
    Incoming,
}

/// Samples `psi(E_i)` of a state on a grid.
#[derive(Clone, Debug)]
pub struct StateVector {
    grid: Arc<EnergyGrid>,
    values: Vec<c64>,
    rep: Rep,
}

impl StateVector {
    pub fn new(grid: Arc<EnergyGrid>, values: Vec<c64>, rep: Rep) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Usage(format!(
                "state has {} samples but grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(StateVector { grid, values, rep })
    }

    pub fn zeros(grid: Arc<EnergyGrid>, rep: Rep) -> Self {
        let values = vec![c64::new(0.0, 0.0); grid.n()];
        StateVector { grid, values, rep }
    }

    pub fn from_fn(grid: Arc<EnergyGrid>, rep: Rep, f: impl Fn(f64) -> c64) -> Self {
        let values = grid.nodes().iter().map(|&e| f(e)).collect();
        StateVector { grid, values, rep }
    }

    /// Builds a state from weighted samples `sqrt(w_i) * psi(E_i)`.
    pub fn from_weighted(grid: Arc<EnergyGrid>, weighted: &[c64], rep: Rep) -> Result<Self> {
        if weighted.len() != grid.n() {
            return Err(Error::Usage("weighted sample count does not match grid".into()));
        }
        let values = weighted.iter().zip(grid.weights()).map(|(x, w)| *x / w.sqrt()).collect();
        Ok(StateVector { grid, values, rep })
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn rep(&self) -> Rep {
        self.rep
    }

    pub fn with_rep(mut self, rep: Rep) -> Self {
        self.rep = rep;
        self
    }

    pub fn weighted(&self) -> Vec<c64> {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| *v * w.sqrt()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| w * v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: c64) -> Self {
        let values = self.values.iter().map(|v| *v * s).collect();
        StateVector { grid: self.grid.clone(), values, rep: self.rep }
    }

    /// Pointwise multiplication by `f(E_i)`.
    pub fn map_nodes(&self, f: impl Fn(f64) -> c64) -> Self {
        let values = self.values.iter().zip(self.grid.nodes()).map(|(v, &e)| *v * f(e)).collect();
        StateVector { grid: self.grid.clone(), values, rep: self.rep }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        check_compatible(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(StateVector { grid: self.grid.clone(), values, rep: self.rep })
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        check_compatible(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(StateVector { grid: self.grid.clone(), values, rep: self.rep })
    }

    pub fn normalized(&self) -> Self {
        self.scaled(c64::new(1.0 / self.norm(), 0.0))
    }
}

fn check_compatible(a: &StateVector, b: &StateVector) -> Result<()> {
    if !(Arc::ptr_eq(&a.grid, &b.grid) || a.grid == b.grid) {
        return Err(Error::Usage("states live on different grids".into()));
    }
    if a.rep != b.rep {
        return Err(Error::Usage("states live in different energy representations".into()));
    }
    Ok(())
}

/// `sum_i w_i conj(phi_i) psi_i`.
pub fn inner(phi: &StateVector, psi: &StateVector) -> Result<c64> {
    check_compatible(phi, psi)?;
    Ok(phi
        .values
        .iter()
        .zip(&psi.values)
        .zip(phi.grid.weights())
        .map(|((a, b), w)| a.conj() * b * *w)
        .sum())
}

/// Zero extension of a half-line state onto its full-line parent.
pub fn embed_halfline(psi: &StateVector, parent: &Arc<EnergyGrid>) -> Result<StateVector> {
    if !psi.grid.is_child_of(parent) {
        return Err(Error::Usage("state grid is not the half-line child of the parent".into()));
    }
    let mut values = vec![c64::new(0.0, 0.0); parent.n()];
    values[psi.grid.offset..].copy_from_slice(&psi.values);
    Ok(StateVector { grid: parent.clone(), values, rep: psi.rep })
}

/// Restriction of a full-line state to the half-line child.
pub fn restrict(psi: &StateVector, child: &Arc<EnergyGrid>) -> Result<StateVector> {
    if !child.is_child_of(&psi.grid) {
        return Err(Error::Usage("target grid is not a half-line child of the state grid".into()));
    }
    let values = psi.values[child.offset..].to_vec();
    Ok(StateVector { grid: child.clone(), values, rep: psi.rep })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn uniform_full_line_has_unit_spacing() {
        let g = make_grid(DomainKind::FullLine, 16, 8.0, Scheme::Uniform).unwrap();
        assert_eq!(g.n(), 16);
        assert!(g.weights().iter().all(|&w| w == 1.0));
        assert!(g.nodes().windows(2).all(|p| (p[1] - p[0] - 1.0).abs() < 1e-15));
        assert!(g.is_symmetric());
        g.validate().unwrap();
    }

    #[test]
    fn half_line_is_positive_part_of_parent() {
        let full = make_grid(DomainKind::FullLine, 16, 8.0, Scheme::Uniform).unwrap();
        let half = make_grid(DomainKind::HalfLine, 8, 8.0, Scheme::Uniform).unwrap();
        assert_eq!(half.nodes(), &full.nodes()[8..]);
        assert!(half.is_child_of(&full));
        half.validate().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_grid(DomainKind::FullLine, 4, 8.0, Scheme::Uniform), Err(Error::Parameter(_))));
        assert!(matches!(make_grid(DomainKind::FullLine, 16, -1.0, Scheme::Uniform), Err(Error::Parameter(_))));
        assert!(matches!(make_grid(DomainKind::FullLine, 24, 8.0, Scheme::GaussLegendre), Err(Error::Parameter(_))));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(GL_ORDER);
        for k in 0..(2 * GL_ORDER) {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "degree {k}: {q} vs {exact}");
        }
    }

    #[test]
    fn all_schemes_satisfy_invariants() {
        for scheme in [Scheme::Uniform, Scheme::GaussLegendre, Scheme::rational()] {
            let g = make_grid(DomainKind::FullLine, 64, 10.0, scheme).unwrap();
            g.validate().unwrap();
            assert!(g.is_symmetric());
            let h = g.half_line();
            h.validate().unwrap();
            assert_eq!(h.n(), 32);
        }
    }

    #[test]
    fn rational_default_scale_reaches_e_max() {
        let g = make_grid(DomainKind::FullLine, 256, 50.0, Scheme::rational()).unwrap();
        assert!((g.nodes()[255] - 50.0).abs() < 1e-9);
        assert!((g.e_max() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn lorentzian_half_line_integral() {
        let g = Arc::new(make_grid(DomainKind::HalfLine, 4096, 200.0, Scheme::Uniform).unwrap());
        let (e0, gamma) = (1.0_f64, 0.1_f64);
        let f = StateVector::from_fn(g.clone(), Rep::Outgoing, |e| c64::new(e - e0, gamma).inv());
        let exact = (0.5 * PI + (e0 / gamma).atan()) / gamma;
        let got = inner(&f, &f).unwrap().re;
        assert!((got / exact - 1.0).abs() < 5e-3, "{got} vs {exact}");
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let g = Arc::new(make_grid(DomainKind::FullLine, 32, 4.0, Scheme::Uniform).unwrap());
        let a = StateVector::from_fn(g.clone(), Rep::Outgoing, |e| c(e.sin(), e.cos()));
        let b = StateVector::from_fn(g.clone(), Rep::Outgoing, |e| c(1.0 / (1.0 + e * e), e));
        let ab = inner(&a, &b).unwrap();
        let ba = inner(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-13);
        let aa = inner(&a, &a).unwrap();
        assert!(aa.re >= 0.0 && aa.im.abs() < 1e-14);
    }

    #[test]
    fn mismatched_inputs_are_usage_errors() {
        let g1 = Arc::new(make_grid(DomainKind::FullLine, 16, 8.0, Scheme::Uniform).unwrap());
        let g2 = Arc::new(make_grid(DomainKind::FullLine, 32, 8.0, Scheme::Uniform).unwrap());
        let a = StateVector::zeros(g1.clone(), Rep::Outgoing);
        let b = StateVector::zeros(g2, Rep::Outgoing);
        assert!(matches!(inner(&a, &b), Err(Error::Usage(_))));
        let c_in = StateVector::zeros(g1, Rep::Incoming);
        assert!(matches!(inner(&a, &c_in), Err(Error::Usage(_))));
    }

    #[test]
    fn embedding_round_trip_is_exact() {
        let full = Arc::new(make_grid(DomainKind::FullLine, 64, 8.0, Scheme::rational()).unwrap());
        let half = Arc::new(full.half_line());
        let psi = StateVector::from_fn(half.clone(), Rep::Outgoing, |e| c(e.cos(), 1.0 / e));
        let up = embed_halfline(&psi, &full).unwrap();
        assert_eq!(up.norm_sqr(), psi.norm_sqr());
        let back = restrict(&up, &half).unwrap();
        assert_eq!(back.values(), psi.values());
        let zero = embed_halfline(&StateVector::zeros(half, Rep::Outgoing), &full).unwrap();
        assert!(zero.values().iter().all(|v| *v == c(0.0, 0.0)));
    }
}
