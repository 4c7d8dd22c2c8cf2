use super::hhmo::{g_eval, gamma_const};
use super::{sigma_max, Kernel, Ratio};
use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::quad::GaussLegendre;
use std::fmt::Write as _;
use std::sync::OnceLock;

fn gl6() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(6))
}

/// Kernel given by samples, interpolated in s = √(1−θ).
///
/// The interpolated quantity is f(s) = K/(1−θ)^σ, a smooth function of s
/// for the kernels of interest, with f(0) = k. Between nodes f is a cubic
/// Hermite polynomial with five-point slope estimates; integrals use
/// ∫K dθ = ∫ 2 s^{2σ+1} f(s) ds cell by cell.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    s: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
    /// prefix[i] = ∫_0^{s_i} 2t^{2σ+1} f(t) dt = ∫_{θ_i}^1 K.
    prefix: Vec<f64>,
    sigma: f64,
    k_coeff: f64,
    gamma: f64,
}

impl TabulatedKernel {
    /// Builds the interpolant from samples (θᵢ, K(θᵢ)). The value at θ = 1
    /// is replaced by the asymptotic coefficient.
    pub fn from_samples(thetas: &[f64], ks: &[f64], sigma: f64, k_coeff: f64, gamma: f64) -> Result<Self> {
        if thetas.len() != ks.len() || thetas.len() < 4 {
            return Err(Error::Format("need at least four (theta, K) samples of equal length".into()));
        }
        if !(sigma > 0.0 && sigma < sigma_max()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} outside (0, log2(3) - 1)")));
        }
        if !(k_coeff > 0.0 && gamma > 0.0) {
            return Err(Error::InvalidParameter("k_coeff and gamma must be positive".into()));
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(thetas.len() + 2);
        for (&t, &k) in thetas.iter().zip(ks) {
            if !(0.0..=1.0).contains(&t) || !k.is_finite() {
                return Err(Error::Format(format!("bad sample ({t}, {k})")));
            }
            if t < 1.0 {
                let u = 1.0 - t;
                pts.push((u.sqrt(), k / u.powf(sigma)));
            }
        }
        pts.push((0.0, k_coeff));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts[pts.len() - 1].0 < 1.0 {
            // Tables must reach θ = 0, where K vanishes.
            pts.push((1.0, 0.0));
        }
        let s: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let f: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let d = hermite_slopes(&s, &f);
        let mut tk = TabulatedKernel { s, f, d, prefix: Vec::new(), sigma, k_coeff, gamma };
        let mut prefix = vec![0.0; tk.s.len()];
        for i in 0..tk.s.len() - 1 {
            prefix[i + 1] = prefix[i] + tk.cell_integral(i, tk.s[i], tk.s[i + 1]);
        }
        tk.prefix = prefix;
        Ok(tk)
    }

    fn cell(&self, s: f64) -> usize {
        let n = self.s.len();
        match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn interp(&self, i: usize, s: f64) -> f64 {
        let h = self.s[i + 1] - self.s[i];
        let t = (s - self.s[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[i] + h10 * h * self.d[i] + h01 * self.f[i + 1] + h11 * h * self.d[i + 1]
    }

    fn density(&self, i: usize, s: f64) -> f64 {
        2.0 * s.powf(2.0 * self.sigma + 1.0) * self.interp(i, s)
    }

    /// ∫_{lo}^{hi} 2 s^{2σ+1} f(s) ds with [lo, hi] inside cell i.
    fn cell_integral(&self, i: usize, lo: f64, hi: f64) -> f64 {
        self.cell_integral_len(i, lo, hi - lo)
    }

    /// ∫ over [lo, lo + len] inside cell i, with the length given exactly.
    fn cell_integral_len(&self, i: usize, lo: f64, len: f64) -> f64 {
        if len <= 0.0 {
            return 0.0;
        }
        let rule = gl6();
        let h = 0.5 * len;
        let mut acc = 0.0;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * self.density(i, lo + h * (1.0 + t));
        }
        acc * h
    }

    /// ∫ over s ∈ [lo, lo + ds], walking across cells.
    fn span_integral(&self, lo: f64, ds: f64) -> f64 {
        let mut i = self.cell(lo);
        let mut a = lo;
        let mut left = ds;
        let mut total = 0.0;
        loop {
            let room = if i + 2 < self.s.len() { self.s[i + 1] - a } else { f64::INFINITY };
            if left <= room {
                return total + self.cell_integral_len(i, a, left);
            }
            total += self.cell_integral_len(i, a, room);
            left -= room;
            a = self.s[i + 1];
            i += 1;
        }
    }

    /// Sample nodes as (θ, K) pairs.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .s
            .iter()
            .zip(&self.f)
            .map(|(&s, &f)| (1.0 - s * s, f * (s * s).powf(self.sigma)))
            .collect();
        out.reverse();
        out
    }

    /// Writes the kernel in the tabulated-kernel CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kernel=tabulated");
        let _ = writeln!(out, "# sigma={}", self.sigma);
        let _ = writeln!(out, "# k_coeff={}", self.k_coeff);
        let _ = writeln!(out, "# gamma={}", self.gamma);
        let _ = writeln!(out, "theta,K");
        for (t, k) in self.nodes() {
            let _ = writeln!(out, "{t:.17e},{k:.17e}");
        }
        out
    }

    /// Parses the tabulated-kernel CSV format: `#`-prefixed `key=value`
    /// lines (sigma, k_coeff and gamma are required), an optional
    /// `theta,K` header, then numeric rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut sigma = None;
        let mut k_coeff = None;
        let mut gamma = None;
        let mut thetas = Vec::new();
        let mut ks = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for item in meta.split([',', ' ']) {
                    if let Some((k, v)) = item.trim().split_once('=') {
                        let parse = |v: &str| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Format(format!("line {}: bad value for {k}", lineno + 1)))
                        };
                        match k.trim() {
                            "sigma" => sigma = Some(parse(v)?),
                            "k_coeff" => k_coeff = Some(parse(v)?),
                            "gamma" => gamma = Some(parse(v)?),
                            _ => {}
                        }
                    }
                }
                continue;
            }
            let mut cols = line.split(',');
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Format(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(t), Ok(k)) => {
                    thetas.push(t);
                    ks.push(k);
                }
                _ if thetas.is_empty() => continue,
                _ => return Err(Error::Format(format!("line {}: non-numeric row", lineno + 1))),
            }
        }
        let missing = |name: &str| Error::Format(format!("missing header key {name}"));
        TabulatedKernel::from_samples(
            &thetas,
            &ks,
            sigma.ok_or_else(|| missing("sigma"))?,
            k_coeff.ok_or_else(|| missing("k_coeff"))?,
            gamma.ok_or_else(|| missing("gamma"))?,
        )
    }
}

fn hermite_slopes(s: &[f64], f: &[f64]) -> Vec<f64> {
    // Derivative of the interpolating polynomial through the (up to) five
    // nearest nodes, which makes the Hermite interpolant fourth-order accurate.
    let n = s.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2).min(n.saturating_sub(5));
            let hi = (lo + 5).min(n);
            lagrange_derivative(&s[lo..hi], &f[lo..hi], i - lo)
        })
        .collect()
}

fn lagrange_derivative(x: &[f64], y: &[f64], i: usize) -> f64 {
    let xi = x[i];
    let mut d = 0.0;
    for j in 0..x.len() {
        let w = if j == i {
            (0..x.len()).filter(|&m| m != i).map(|m| 1.0 / (xi - x[m])).sum::<f64>()
        } else {
            let mut num = 1.0;
            let mut den = 1.0;
            for m in 0..x.len() {
                if m != j {
                    den *= x[j] - x[m];
                    if m != i {
                        num *= xi - x[m];
                    }
                }
            }
            num / den
        };
        d += w * y[j];
    }
    d
}

impl Kernel for TabulatedKernel {
    fn value(&self, r: Ratio) -> f64 {
        if r.comp <= 0.0 || r.theta <= 0.0 {
            return 0.0;
        }
        let s = r.comp.sqrt();
        let i = self.cell(s);
        (self.interp(i, s) * r.comp.powf(self.sigma)).max(0.0)
    }

    fn tail(&self, r: Ratio) -> f64 {
        let u = r.comp.clamp(0.0, 1.0);
        if u == 0.0 {
            return 0.0;
        }
        let s = u.sqrt();
        let i = self.cell(s);
        self.prefix[i] + self.cell_integral(i, self.s[i], s)
    }

    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        if len <= 0.0 {
            return 0.0;
        }
        let sa = a.comp.clamp(0.0, 1.0).sqrt();
        let sb = b.comp.clamp(0.0, 1.0).sqrt();
        let ia = self.cell(sa);
        let ib = self.cell(sb);
        if ia.saturating_sub(ib) <= 4 && sa + sb > 0.0 {
            self.span_integral(sb, len / (sa + sb))
        } else {
            self.tail(a) - self.tail(b)
        }
    }

    fn gamma_const(&self) -> f64 {
        self.gamma
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn k_coeff(&self) -> f64 {
        self.k_coeff
    }
}

/// Cached samples of the kernel on a Chebyshev grid together with the
/// interpolating kernel.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub thetas: Vec<f64>,
    pub g_plus: Vec<f64>,
    pub g_minus: Vec<f64>,
    pub k_vals: Vec<f64>,
    /// ∫_0^{θᵢ} K of the interpolant.
    pub cum_prefix: Vec<f64>,
    pub kernel: TabulatedKernel,
    /// Largest deviation from direct quadrature seen at the off-grid probes.
    pub probe_error: f64,
}

/// Tabulates K on θᵢ = (1 − cos(πi/n))/2 and checks the interpolant at
/// off-grid probes against direct quadrature.
pub fn build_kernel_table(profile: &Profile, n_points: usize, quad_tol: f64) -> Result<KernelTable> {
    if n_points < 256 {
        return Err(Error::InvalidParameter(format!("n_points = {n_points} must be at least 256")));
    }
    if !(quad_tol > 0.0 && quad_tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!("quad_tol = {quad_tol} must lie in (0, 1e-6]")));
    }
    let n = n_points;
    let mut thetas = Vec::with_capacity(n + 1);
    let mut g_plus = Vec::with_capacity(n + 1);
    let mut g_minus = Vec::with_capacity(n + 1);
    let mut k_vals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = if i == n { 1.0 } else { 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos()) };
        let (gp, gm) = if i == 0 || i == n {
            (0.0, 0.0)
        } else {
            (g_eval(profile, t, quad_tol)?, g_eval(profile, -t, quad_tol)?)
        };
        thetas.push(t);
        g_plus.push(gp);
        g_minus.push(gm);
        k_vals.push(t * t * (gp + gm));
    }
    let gamma = gamma_const(profile, quad_tol.max(1e-12))?;
    let kernel = TabulatedKernel::from_samples(&thetas, &k_vals, 0.5, profile.k_coeff(), gamma)?;
    let total = kernel.total();
    let cum_prefix = thetas.iter().map(|&t| total - kernel.tail(Ratio::new(t))).collect();

    let mut probe_error: f64 = 0.0;
    let mut probes: Vec<f64> = (0..48).map(|j| (j as f64 + 0.5) / 48.0).collect();
    probes.push(1.0 / 3.0);
    probes.extend([1.0 - 1e-3, 1.0 - 1e-4, 1e-3]);
    for t in probes {
        let direct = super::hhmo::k_eval(profile, t, quad_tol)?;
        probe_error = probe_error.max((kernel.eval(t) - direct).abs());
    }
    if probe_error > 10.0 * quad_tol {
        return Err(Error::VerificationFailed(format!(
            "kernel table interpolation error {probe_error:.3e} exceeds {:.3e}; increase n_points",
            10.0 * quad_tol
        )));
    }
    Ok(KernelTable { thetas, g_plus, g_minus, k_vals, cum_prefix, kernel, probe_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SyntheticKernel;

    fn sampled(n: usize) -> TabulatedKernel {
        let syn = SyntheticKernel::new(0.5, 1.0).unwrap();
        let thetas: Vec<f64> =
            (0..=n).map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos())).collect();
        let ks: Vec<f64> = thetas.iter().map(|&t| syn.eval(t)).collect();
        TabulatedKernel::from_samples(&thetas, &ks, 0.5, 1.0, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn reproduces_polynomial_in_s() {
        // θ²√(1−θ) has f(s) = (1 − s²)², a quartic; cubic Hermite error is O(h³).
        let tk = sampled(512);
        assert!((tk.total() - 16.0 / 105.0).abs() < 1e-9);
        for t in [0.1, 0.37, 0.9, 0.999] {
            let exact = t * t * (1.0 - t as f64).sqrt();
            assert!((tk.eval(t) - exact).abs() < 1e-9, "t={t} err={}", tk.eval(t) - exact);
        }
    }

    #[test]
    fn csv_round_trip() {
        let tk = sampled(300);
        let back = TabulatedKernel::from_csv(&tk.to_csv()).unwrap();
        for t in [0.2, 0.5, 0.95] {
            assert!((back.eval(t) - tk.eval(t)).abs() < 1e-14);
        }
        assert_eq!(back.gamma_const(), tk.gamma_const());
    }

    #[test]
    fn csv_requires_header_keys() {
        let err = TabulatedKernel::from_csv("theta,K\n0,0\n0.5,0.1\n0.7,0.1\n1,0\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
