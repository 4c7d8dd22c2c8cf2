mod common;

use common::{simpson, synthetic_cum};
use hhmo::degenerate::{verify_degeneracy, DegenerateConstruction, TemplateSolution};
use hhmo::kernel::{Kernel, Ratio, SyntheticKernel};
use hhmo::rings::{solve_pattern, Classification, RingLimits, RingTols};
use hhmo::Error;

fn construction() -> DegenerateConstruction<SyntheticKernel> {
    DegenerateConstruction::build(SyntheticKernel::new(0.5, 1.0).unwrap()).unwrap()
}

/// ∫ f over [a, b] split at the given interior points.
fn piecewise<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cuts: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
    pts.push(b);
    pts.windows(2).map(|w| simpson(f, w[0], w[1], 1e-13)).sum()
}

#[test]
fn bridge_has_tangential_zero() {
    let c = construction();
    let bridge = &c.kernel.partial.bridge;
    assert!(bridge.omega(c.x_break()).abs() < 1e-12);
    assert!(bridge.omega_prime(c.x_break()).abs() < 1e-10);
    assert!(bridge.omega(c.x_break() - 0.5 * c.epsilon) < 0.0);
    assert!(bridge.omega(c.x_break() + 0.5 * c.epsilon) > 0.0);
}

#[test]
fn kernel_unchanged_above_theta_c() {
    let c = construction();
    let tpl = SyntheticKernel::new(0.5, 1.0).unwrap();
    let theta_c = c.x1 / (c.x2 - c.epsilon);
    for i in 0..=50 {
        let t = theta_c + (1.0 - theta_c) * i as f64 / 50.0;
        assert!((c.kernel.eval(t) - tpl.eval(t)).abs() < 1e-10);
    }
}

#[test]
fn kernel_reproduces_bridge_derivative() {
    let c = construction();
    let bridge = &c.kernel.partial.bridge;
    let gamma = bridge.base.gamma;
    let q = |x: f64| (bridge.omega(x) - gamma) / (x * x);
    let breaks = [bridge.xb, bridge.z];
    let h = 1e-6;
    for i in 1..40 {
        let x = c.x2 - c.epsilon + 3.0 * c.epsilon * i as f64 / 40.0;
        if breaks.iter().any(|b| (x - b).abs() < 10.0 * h) {
            continue;
        }
        let fd = x * x / c.x1 * (q(x + h) - q(x - h)) / (2.0 * h);
        let k = c.kernel.eval(c.x1 / x);
        assert!((fd - k).abs() < 1e-6 * k.max(1e-3), "x={x}: {fd} vs {k}");
    }
}

#[test]
fn template_head_inequality() {
    let c = construction();
    let t = c.x1 / c.x2;
    let num = synthetic_cum(0.0, t);
    let den = simpson(&|s: f64| (1.0 - s).sqrt(), 0.0, t, 1e-14);
    assert!(num / den < t * t);
    let (hn, hd) = c.kernel.partial.head_masses().unwrap();
    assert!(hn / hd < c.r * c.r);
}

#[test]
fn mass_identities_by_independent_quadrature() {
    let c = construction();
    let cuts = c.kernel.breakpoints();
    let k = |t: f64| c.kernel.eval(t);
    let g = |t: f64| if t == 0.0 { 0.0 } else { c.kernel.eval(t) / (t * t) };
    assert!((piecewise(&k, 0.0, 1.0, &cuts) - 16.0 / 105.0).abs() < 1e-8);
    assert!((piecewise(&g, 0.0, 1.0, &cuts) - 2.0 / 3.0).abs() < 1e-8);
    assert!((c.kernel.total() - 16.0 / 105.0).abs() < 1e-8);
}

#[test]
fn lambda_bracket() {
    let c = construction();
    let (r, rs) = (c.r, c.r_star);
    let b1 = |t: f64| (t * (rs - t)).powi(4);
    let b2 = |t: f64| ((r - t) * (t - rs)).powi(4);
    let ratio1 = simpson(&|t| t * t * b1(t), 0.0, rs, 1e-20) / simpson(&b1, 0.0, rs, 1e-20);
    let ratio2 = simpson(&|t| t * t * b2(t), rs, r, 1e-20) / simpson(&b2, rs, r, 1e-20);
    assert!(ratio2 > rs * rs && ratio1 < rs * rs);
    assert!(c.lambda_star > 0.0 && c.lambda_star < 1.0);
}

#[test]
fn zeros_and_candidates() {
    let c = construction();
    let rep = verify_degeneracy(&c).unwrap();
    assert_eq!(rep.pattern.classification, Classification::Degenerate);
    assert!((rep.pattern.zeros[1] - c.x1).abs() < 1e-9);
    assert!((rep.pattern.zeros[2] - c.x_break()).abs() < 1e-7);
    assert!(rep.on_candidate < 0.0 && rep.off_candidate > 0.0);
    let expected = c.kernel.partial.bridge.omega(rep.probe_x);
    assert!((rep.off_candidate - expected).abs() < 1e-9 * expected.abs().max(1e-6));
    assert!(!rep.verdict.positive_consistent && !rep.verdict.negative_consistent);
}

#[test]
fn exported_table_keeps_the_classification() {
    let c = construction();
    let table = c.kernel.to_table(20_000).unwrap();
    let tols = RingTols { scan_step: (c.epsilon / 8.0).min(1e-2), ..RingTols::default() };
    let p = solve_pattern(&table, &RingLimits::default(), &tols).unwrap();
    assert_eq!(p.classification, Classification::Degenerate);
    assert!((table.tail(Ratio::ZERO) - 16.0 / 105.0).abs() < 1e-6);
}

#[test]
fn oversized_epsilon_is_rejected() {
    let base = TemplateSolution::new(SyntheticKernel::new(0.5, 1.0).unwrap()).unwrap();
    let eps = base.x2;
    assert!(matches!(
        DegenerateConstruction::with_epsilon(base, eps),
        Err(Error::BridgeInfeasible(_) | Error::PositivityViolation { .. })
    ));
}
