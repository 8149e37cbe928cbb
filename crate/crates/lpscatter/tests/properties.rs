use std::sync::{Arc, OnceLock};

use faer::c64;
use proptest::prelude::*;

use lpscatter::evolution::{evolve, transition_decompose, Direction};
use lpscatter::grid::{embed_halfline, inner, make_grid, restrict, DomainKind, EnergyGrid, Rep, Scheme, StateVector};
use lpscatter::hardy::{build_hardy_projectors, HardyProjector, PvScheme};
use lpscatter::lyapunov::{lyapunov_trace, LyapunovPair, Sigma};
use lpscatter::smatrix::{ResonanceParams, SMatrixModel};

struct Fixture {
    hp: HardyProjector,
    pair: LyapunovPair,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let scheme = Scheme::Rational { center: 0.0, scale: Some(3.0) };
        let full = Arc::new(make_grid(DomainKind::FullLine, 512, 1.0, scheme).unwrap());
        let hp = build_hardy_projectors(&full, PvScheme::Auto).unwrap();
        let half = Arc::new(full.half_line());
        let pair = LyapunovPair::build(&hp, &Sigma::HalfLine(half)).unwrap();
        Fixture { hp, pair }
    })
}

fn state(grid: &Arc<EnergyGrid>, coeffs: &[(f64, f64, f64, f64)]) -> StateVector {
    StateVector::from_fn(grid.clone(), Rep::Outgoing, |e| {
        coeffs
            .iter()
            .map(|&(re, im, center, shift)| {
                let a = (-(e - center).powi(2) / 0.5).exp();
                c64::new(re, im) * c64::from_polar(a, e * shift)
            })
            .fold(c64::new(0.0, 0.0), |s, v| s + v)
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 0.5..3.0f64, -5.0..5.0f64), 1..4)
}

fn nonzero(psi: &StateVector) -> bool {
    psi.norm() > 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inner_product_is_hermitian(a in coeffs(), b in coeffs()) {
        let g = &fixture().hp.grid;
        let (x, y) = (state(g, &a), state(g, &b));
        let xy = inner(&x, &y).unwrap();
        let yx = inner(&y, &x).unwrap();
        prop_assert!((xy - yx.conj()).norm() <= 1e-12 * (1.0 + x.norm() * y.norm()));
        prop_assert!((inner(&x, &x).unwrap().re - x.norm_sqr()).abs() <= 1e-12 * (1.0 + x.norm_sqr()));
    }

    #[test]
    fn embedding_is_isometric(a in coeffs()) {
        let f = fixture();
        let psi = state(&f.pair.grid_half, &a);
        let up = embed_halfline(&psi, &f.hp.grid).unwrap();
        prop_assert!((up.norm() - psi.norm()).abs() <= 1e-12 * (1.0 + psi.norm()));
        let back = restrict(&up, &f.pair.grid_half).unwrap();
        prop_assert_eq!(back.values(), psi.values());
    }

    #[test]
    fn hardy_projections_are_complementary_and_idempotent(a in coeffs()) {
        let f = fixture();
        let psi = state(&f.hp.grid, &a);
        prop_assume!(nonzero(&psi));
        let p = f.hp.p_plus.apply(&psi).unwrap();
        let m = f.hp.p_minus.apply(&psi).unwrap();
        let scale = psi.norm();
        prop_assert!(p.add(&m).unwrap().sub(&psi).unwrap().norm() <= 1e-10 * scale);
        prop_assert!(f.hp.p_plus.apply(&p).unwrap().sub(&p).unwrap().norm() <= 1e-10 * scale);
        prop_assert!(inner(&p, &m).unwrap().norm() <= 1e-10 * scale * scale);
    }

    #[test]
    fn evolution_is_unitary(a in coeffs(), t in -50.0..50.0f64) {
        let psi = state(&fixture().hp.grid, &a);
        let moved = evolve(&psi, t);
        prop_assert!((moved.norm() - psi.norm()).abs() <= 1e-12 * (1.0 + psi.norm()));
        prop_assert!(evolve(&moved, -t).sub(&psi).unwrap().norm() <= 1e-12 * (1.0 + psi.norm()));
    }

    #[test]
    fn s_matrix_is_unimodular(e0 in 0.1..10.0f64, gamma in 0.01..2.0f64, e in -1e3..1e3f64) {
        let p = ResonanceParams::new(e0, gamma).unwrap();
        for m in [SMatrixModel::pure(p), SMatrixModel::perturbed(p)] {
            prop_assert!((m.eval(e).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn lyapunov_traces_are_monotone(a in coeffs()) {
        let f = fixture();
        let psi = state(&f.pair.grid_half, &a);
        prop_assume!(nonzero(&psi));
        let psi = psi.normalized();
        let ts: Vec<f64> = (0..21).map(|k| k as f64).collect();
        let tau = lyapunov_trace(&f.pair.m_f, &psi, &ts).unwrap();
        prop_assert!(tau.windows(2).all(|w| w[1] <= w[0] + 1e-5));
        prop_assert!(tau.iter().all(|&v| (-1e-8..=1.0 + 1e-8).contains(&v)));
    }

    #[test]
    fn transition_split_is_exhaustive(a in coeffs(), t in -30.0..30.0f64) {
        let f = fixture();
        let psi = state(&f.pair.grid_half, &a);
        for dir in [Direction::Forward, Direction::Backward] {
            let (b, fw) = transition_decompose(&f.pair, &psi, t, dir).unwrap();
            let total = b.add(&fw).unwrap();
            prop_assert!(total.sub(&evolve(&psi, t)).unwrap().norm() <= 1e-12 * (1.0 + psi.norm()));
        }
    }

    #[test]
    fn lyapunov_operators_are_contractions(a in coeffs()) {
        let f = fixture();
        let psi = state(&f.pair.grid_half, &a);
        for op in [&f.pair.m_f, &f.pair.m_b, &f.pair.lambda_f, &f.pair.lambda_b] {
            let y = op.apply(&psi).unwrap();
            prop_assert!(y.norm() <= psi.norm() * (1.0 + 1e-10) + 1e-14);
            prop_assert!(inner(&psi, &y).unwrap().re >= -1e-10 * psi.norm_sqr());
        }
    }
}

