//! Oracles shared by the integration tests. None of them call into the
//! library's numerics.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// erfc(x) = 1 − (2/√π)∫₀ˣ e^{−t²} dt for moderate x.
pub fn erfc_oracle(x: f64) -> f64 {
    let g = |t: f64| (-t * t).exp();
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * simpson(&g, 0.0, x, 1e-15)
}

/// Gauss rule for the Jacobi weight (1−x)^a (1+x)^b on [−1, 1] by the
/// Golub–Welsch eigenvalue method. a = b = 0 gives Gauss–Legendre.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut m = DMatrix::<f64>::zeros(n, n);
    let ab = a + b;
    for k in 0..n {
        let kf = k as f64;
        let den = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        m[(k, k)] = if den == 0.0 { (b - a) / (ab + 2.0) } else { (b * b - a * a) / den };
        if k + 1 < n {
            let j = kf + 1.0;
            let t = 2.0 * j + ab;
            let beta = 4.0 * j * (j + a) * (j + b) * (j + ab) / (t * t * (t + 1.0) * (t - 1.0));
            m[(k, k + 1)] = beta.sqrt();
            m[(k + 1, k)] = beta.sqrt();
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma_fn(a + 1.0) * gamma_fn(b + 1.0) / gamma_fn(ab + 2.0);
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// Γ(x) for x > 0 by the Lanczos approximation (g = 7, n = 9).
pub fn gamma_fn(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    let t = x + 7.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * s
}

/// ∫_a^b f with composite Gauss–Legendre on n equal panels.
pub fn gl_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(lo + 0.5 * h * (1.0 + x));
        }
    }
    0.5 * h * s
}

/// Antiderivative-based ∫_a^b θ²√(1−θ) dθ, the synthetic kernel with σ = ½, scale 1.
pub fn synthetic_cum(a: f64, b: f64) -> f64 {
    let f = |t: f64| {
        let u = 1.0 - t;
        -(2.0 / 3.0 * u.powf(1.5) - 4.0 / 5.0 * u.powf(2.5) + 2.0 / 7.0 * u.powf(3.5))
    };
    f(b) - f(a)
}

/// Zeros of the ring solution for the σ = ½ synthetic kernel by marching
/// in x with a fixed step and linear interpolation of sign changes.
pub fn marching_zeros(step: f64, count: usize) -> Vec<f64> {
    let gamma = 2.0 / 3.0;
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut run_start = 0.0;
    let mut on = true;
    let mut zeros = Vec::new();
    let omega = |x: f64, runs: &[(f64, f64)], open: Option<f64>| {
        let mut s = 0.0;
        for &(a, b) in runs {
            s += synthetic_cum(a / x, b / x);
        }
        if let Some(a) = open {
            s += synthetic_cum(a / x, 1.0);
        }
        gamma - x * x * s
    };
    let mut x = step;
    let mut prev = gamma;
    while zeros.len() < count {
        let w = omega(x, &runs, if on { Some(run_start) } else { None });
        let crossed = if on { w < 0.0 } else { w > 0.0 };
        if crossed {
            let z = x - step * w / (w - prev);
            zeros.push(z);
            if on {
                runs.push((run_start, z));
            } else {
                run_start = z;
            }
            on = !on;
            prev = omega(x, &runs, if on { Some(run_start) } else { None });
        } else {
            prev = w;
        }
        x += step;
    }
    zeros
}
