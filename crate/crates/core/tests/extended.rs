mod common;

use common::synthetic_cum;
use hhmo::extended::{extended_solve, mollified_solve, regular_extension_solve, residual_profile, Mollifier};
use hhmo::kernel::SyntheticKernel;
use hhmo::rings::{omega_eval, solve_pattern, RingLimits, RingPattern, RingTols};
use hhmo::Error;
use proptest::prelude::*;

fn half() -> SyntheticKernel {
    SyntheticKernel::new(0.5, 1.0).unwrap()
}

fn pattern() -> RingPattern {
    solve_pattern(&half(), &RingLimits::default(), &RingTols::default()).unwrap()
}

#[test]
fn mollified_solution_vanishes_near_first_zero() {
    let k = half();
    let x1 = 70f64.sqrt() / 4.0;
    let (eps, h) = (1e-3, 2.5e-4);
    let sol = mollified_solve(&k, Mollifier::new(eps).unwrap(), x1 + 0.3, h).unwrap();
    let i = (x1 / h).round() as usize;
    let at_x1 = sol.omega[i] + (x1 - sol.x(i)) * (sol.omega[i + 1] - sol.omega[i]) / h;
    assert!(at_x1.abs() < 5.0 * (eps + h.sqrt()), "omega(x1) = {at_x1}");
    assert!((omega_eval(&k, &[0.0], x1)).abs() < 1e-14);
}

#[test]
fn relay_values_inside_bands() {
    let k = half();
    let p = pattern();
    let (h, eps) = (1e-3, 4e-3);
    let sol = extended_solve(&k, 3.2, h, &[1.6e-2, 8e-3, eps]).unwrap();
    for (i, &x) in sol.x.iter().enumerate() {
        let band = p.zeros.iter().filter(|&&z| z < x).count().saturating_sub(1);
        let dist = p.zeros.iter().map(|z| (z - x).abs()).fold(f64::INFINITY, f64::min);
        if dist > 0.05 && x < p.zeros[3] {
            let want = if band % 2 == 0 { 1.0 } else { 0.0 };
            assert!((sol.rho[i] - want).abs() < 1e-6, "x={x}: rho {}", sol.rho[i]);
        }
    }
    assert!(sol.rho.iter().all(|r| (0.0..=1.0).contains(r)));
}

#[test]
fn residual_does_not_grow_along_epsilon_sequence() {
    let k = half();
    let h = 1e-3;
    let res: Vec<f64> = [1.6e-2, 8e-3, 4e-3]
        .iter()
        .map(|&e| {
            let s = mollified_solve(&k, Mollifier::new(e).unwrap(), 3.0, h).unwrap();
            residual_profile(&k, &s).into_iter().fold(0.0, f64::max)
        })
        .collect();
    for w in res.windows(2) {
        assert!(w[1] <= 1.5 * w[0], "{res:?}");
    }
}

#[test]
fn regular_extension_residual_by_closed_form() {
    let p = pattern();
    let k = half();
    let h = 1e-3;
    let b = 1.5 * p.x_star;
    let reg = regular_extension_solve(&k, &p, b, h).unwrap();
    let n = p.zeros.len() - 1;
    for (i, &x) in reg.x.iter().enumerate() {
        let mut s = 0.0;
        for j in (0..n).step_by(2) {
            s += synthetic_cum(p.zeros[j] / x, p.zeros[j + 1] / x);
        }
        s += reg.tail_fraction * synthetic_cum(p.zeros[n] / x, p.x_star / x);
        for (l, r) in reg.rho[..=i].iter().enumerate() {
            let a = p.x_star + l as f64 * h;
            let e = if l == i { x } else { a + h };
            s += r * synthetic_cum(a / x, e / x);
        }
        let res = (2.0 / 3.0 - x * x * s).abs();
        assert!(res < 1e-6, "x={x}: {res}");
    }
    assert!(reg.flagged.is_empty());
    assert!(reg.rho.iter().all(|r| (0.0..=1.0).contains(r)));
}

#[test]
fn invalid_sequences_rejected() {
    let k = half();
    assert!(matches!(extended_solve(&k, 3.0, 1e-3, &[4e-3, 8e-3]), Err(Error::InvalidParameter(_))));
    assert!(matches!(extended_solve(&k, 3.0, 1e-3, &[1e-2, 2e-3]), Err(Error::InvalidParameter(_))));
    assert!(matches!(extended_solve(&k, 3.0, 1e-3, &[]), Err(Error::InvalidParameter(_))));
}

proptest! {
    #[test]
    fn mollifier_is_monotone_ramp(eps in 1e-4f64..1.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let m = Mollifier::new(eps).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(m.eval(lo) <= m.eval(hi));
        prop_assert!((0.0..=1.0).contains(&m.eval(a)));
        prop_assert!((m.eval(a) + m.eval(-a) - 1.0).abs() < 1e-12);
    }
}
