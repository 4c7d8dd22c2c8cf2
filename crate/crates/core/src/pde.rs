//! Finite-difference solver for the difference field w = u − Φ in
//! similarity variables η = x/√t, s = √t on [0, 6α].
//!
//! Each step solves A^j w^j = b^{j−1} (implicit upwind advection and
//! centred diffusion, explicit source) and then updates the precipitation
//! field: the source cell i = N (η = α) switches by the threshold rule and
//! cells i < N receive values transported along the characteristics
//! ηs = const.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::profile::{psi_eval, solve_kappa, ModelParams, Profile};
use crate::rings::{omega_eval, RingPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeModel {
    Full,
    Simplified,
}

impl std::fmt::Display for PdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PdeModel::Full => "full",
            PdeModel::Simplified => "simplified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub params: ModelParams,
    /// Cells up to η = α; Δη = α/N, 6N cells in total.
    pub n: usize,
    pub ds: f64,
    pub s_max: f64,
    pub model: PdeModel,
    /// Keep the 2γΦ/η² source term (disabled only to test the homogeneous scheme).
    pub gamma_forcing: bool,
    /// Store (w, p) every this many steps; `None` stores no snapshots.
    pub snapshot_every: Option<usize>,
}

impl PdeConfig {
    pub fn new(params: ModelParams, n: usize, ds: f64, s_max: f64, model: PdeModel) -> Result<Self> {
        let c = PdeConfig { params, n, ds, s_max, model, gamma_forcing: true, snapshot_every: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 16 {
            return Err(Error::InvalidParameter(format!("N = {} must be at least 16", self.n)));
        }
        if !(self.ds > 0.0 && self.s_max > self.ds) {
            return Err(Error::InvalidParameter(format!("need ds > 0 and s_max > ds (ds = {}, s_max = {})", self.ds, self.s_max)));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidParameter("snapshot interval must be positive".into()));
        }
        Ok(())
    }

    pub fn d_eta(&self) -> f64 {
        self.params.alpha / self.n as f64
    }

    pub fn n_full(&self) -> usize {
        6 * self.n
    }

    pub fn steps(&self) -> usize {
        (self.s_max / self.ds).round() as usize
    }

    /// Default snapshot cadence ⌈s_max/(100·Δs)⌉.
    pub fn default_snapshot_every(&self) -> usize {
        (self.s_max / (100.0 * self.ds)).ceil().max(1.0) as usize
    }
}

/// Coefficients (a_{i,i−1}, a_{i,i}, a_{i,i+1}) of row i of A^j; the
/// outer entries are zero where they fall outside the matrix.
pub fn matrix_row(i: usize, j: usize, d_eta: f64, n_full: usize) -> (f64, f64, f64) {
    let c = 2.0 / (d_eta * d_eta);
    let diag = j as f64 + i as f64 + 2.0 * c;
    let lower = if i == 0 { 0.0 } else { -c };
    let upper = if i == 0 {
        -2.0 * c
    } else if i + 1 < n_full {
        -(i as f64) - c
    } else {
        0.0
    };
    (lower, diag, upper)
}

/// ⌊i·j/N⌋, the past time index whose source value reaches cell i at step j.
pub fn jc(i: usize, j: usize, n: usize) -> usize {
    i * j / n
}

/// ⌈k·N/j⌉, the cell reached at step j by the source value of step k.
pub fn ic(k: usize, j: usize, n: usize) -> usize {
    (k * n).div_ceil(j)
}

/// Fills the cells i < N at step j ≥ 1 from the running sums
/// `running[k]` = P_k = Σ_{l≤k} p_N^l, k = 0..=j.
///
/// For j ≤ N cell i carries the source value of step ⌊ij/N⌋; for j > N
/// cell i receives the average (N/j)(P_{⌊(i+1)j/N⌋} − P_{⌊ij/N⌋}) of the
/// source values of all steps mapped into it.
pub fn transport(running: &[f64], j: usize, n: usize, cells: &mut [f64]) {
    debug_assert!(running.len() > j && cells.len() == n);
    if j <= n {
        for (i, c) in cells.iter_mut().enumerate() {
            let k = jc(i, j, n);
            *c = running[k] - if k == 0 { 0.0 } else { running[k - 1] };
        }
    } else {
        let scale = n as f64 / j as f64;
        for (i, c) in cells.iter_mut().enumerate() {
            *c = scale * (running[jc(i + 1, j, n)] - running[jc(i, j, n)]);
        }
    }
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and
/// `upper[n−1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solver state after step j.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub j: usize,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    /// P_k = Σ_{l≤k} p_N^l for k = 0..=j.
    pub p_running: Vec<f64>,
    /// Largest precipitating index (full model).
    pub frontier: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub s: f64,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
}

/// Diagnostics of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub config: PdeConfig,
    pub s: Vec<f64>,
    pub sup_w: Vec<f64>,
    /// w_N^j, the trace on the parabola.
    pub w_n: Vec<f64>,
    pub p_n: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Largest ‖Aw − b‖∞/‖b‖∞ over all steps.
    pub max_solve_residual: f64,
    /// Largest |(j/N)Σ_{i<N} p_i^j − P_j| / max(1, P_j) over steps j > N.
    pub max_conservation_error: f64,
}

impl PdeRun {
    /// ‖w‖∞ at the step closest to similarity time s.
    pub fn sup_at(&self, s: f64) -> f64 {
        let j = ((s / self.config.ds).round() as usize).min(self.sup_w.len() - 1);
        self.sup_w[j]
    }
}

#[derive(Debug, Clone)]
pub struct PdeSolver {
    pub config: PdeConfig,
    pub profile: Profile,
    /// Φ(η_i).
    pub phi: Vec<f64>,
    forcing: Vec<f64>,
    pub state: PdeState,
}

impl PdeSolver {
    /// Initial data w⁰ = Ψ − Φ, p ≡ 0.
    pub fn new(config: PdeConfig) -> Result<Self> {
        config.validate()?;
        let profile = solve_kappa(&config.params, 1e-12)?;
        let de = config.d_eta();
        let w0: Vec<f64> = (0..config.n_full())
            .map(|i| {
                let eta = i as f64 * de;
                psi_eval(&config.params, eta) - profile.phi(eta)
            })
            .collect();
        Self::with_initial(config, profile, w0)
    }

    /// Starts from given initial data.
    pub fn with_initial(config: PdeConfig, profile: Profile, w0: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let nf = config.n_full();
        if w0.len() != nf {
            return Err(Error::InvalidParameter(format!("initial data has {} values, expected {nf}", w0.len())));
        }
        let de = config.d_eta();
        let phi: Vec<f64> = (0..nf).map(|i| profile.phi(i as f64 * de)).collect();
        let forcing: Vec<f64> = (0..nf)
            .map(|i| {
                if i == 0 || i > config.n || !config.gamma_forcing {
                    0.0
                } else {
                    let eta = i as f64 * de;
                    2.0 * profile.gamma / (eta * eta) * phi[i]
                }
            })
            .collect();
        let state = PdeState { j: 0, w: w0, p: vec![0.0; nf], p_running: vec![0.0], frontier: None };
        Ok(PdeSolver { config, profile, phi, forcing, state })
    }

    /// Advances one step; returns ‖Aw − b‖∞/‖b‖∞.
    pub fn step(&mut self) -> f64 {
        let nf = self.config.n_full();
        let j = self.state.j + 1;
        let jf = j as f64;
        let s = jf * self.config.ds;
        let de = self.config.d_eta();
        let full = self.config.model == PdeModel::Full;
        let mut lower = vec![0.0; nf];
        let mut diag = vec![0.0; nf];
        let mut upper = vec![0.0; nf];
        let mut rhs = vec![0.0; nf];
        for i in 0..nf {
            let (l, d, u) = matrix_row(i, j, de, nf);
            lower[i] = l;
            diag[i] = d;
            upper[i] = u;
            let w = self.state.w[i];
            let sink = if full { self.phi[i] + w } else { self.phi[i] };
            rhs[i] = self.forcing[i] + jf * w - 2.0 * s * s * self.state.p[i] * sink;
        }
        rhs[0] = rhs[1];
        let w = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut res: f64 = 0.0;
        let mut bmax: f64 = 0.0;
        for i in 0..nf {
            let mut aw = diag[i] * w[i];
            if i > 0 {
                aw += lower[i] * w[i - 1];
            }
            if i + 1 < nf {
                aw += upper[i] * w[i + 1];
            }
            res = res.max((aw - rhs[i]).abs());
            bmax = bmax.max(rhs[i].abs());
        }
        self.state.w = w;
        self.state.j = j;
        self.update_precipitation();
        if bmax > 0.0 {
            res / bmax
        } else {
            res
        }
    }

    fn update_precipitation(&mut self) {
        let n = self.config.n;
        let nf = self.config.n_full();
        let j = self.state.j;
        let u_star = self.config.params.u_star;
        let mut p = vec![0.0; nf];
        match self.config.model {
            PdeModel::Simplified => {
                if self.state.w[n] >= u_star - self.phi[n] {
                    p[n] = 1.0;
                }
            }
            PdeModel::Full => {
                let crossing = (n..nf).rev().find(|&k| self.state.w[k] > u_star - self.phi[k]);
                let carried = self.state.frontier.map(|f| f * (j - 1) / j);
                let frontier = match (crossing, carried) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                self.state.frontier = frontier;
                if let Some(f) = frontier {
                    for v in p.iter_mut().take(f.min(nf - 1) + 1).skip(n) {
                        *v = 1.0;
                    }
                }
            }
        }
        let prev = *self.state.p_running.last().unwrap();
        self.state.p_running.push(prev + p[n]);
        transport(&self.state.p_running, j, n, &mut p[..n]);
        self.state.p = p;
    }

    /// |(j/N)·Σ_{i<N} p_i^j − P_j| / max(1, P_j) for the current step.
    pub fn conservation_error(&self) -> f64 {
        let n = self.config.n;
        let j = self.state.j;
        let sum: f64 = self.state.p[..n].iter().sum();
        let total = self.state.p_running[j];
        (j as f64 / n as f64 * sum - total).abs() / total.max(1.0)
    }

    /// Runs to s_max, recording the diagnostics.
    pub fn run(mut self) -> PdeRun {
        let steps = self.config.steps();
        let n = self.config.n;
        let sup = |w: &[f64]| w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = PdeRun {
            config: self.config.clone(),
            s: vec![0.0],
            sup_w: vec![sup(&self.state.w)],
            w_n: vec![self.state.w[n]],
            p_n: vec![self.state.p[n]],
            snapshots: Vec::new(),
            max_solve_residual: 0.0,
            max_conservation_error: 0.0,
        };
        let every = self.config.snapshot_every;
        if every.is_some() {
            out.snapshots.push(Snapshot { s: 0.0, w: self.state.w.clone(), p: self.state.p.clone() });
        }
        for _ in 0..steps {
            let r = self.step();
            out.max_solve_residual = out.max_solve_residual.max(r);
            let j = self.state.j;
            if j > n {
                out.max_conservation_error = out.max_conservation_error.max(self.conservation_error());
            }
            let s = j as f64 * self.config.ds;
            out.s.push(s);
            out.sup_w.push(sup(&self.state.w));
            out.w_n.push(self.state.w[n]);
            out.p_n.push(self.state.p[n]);
            if let Some(e) = every {
                if j.is_multiple_of(e) {
                    out.snapshots.push(Snapshot { s, w: self.state.w.clone(), p: self.state.p.clone() });
                }
            }
        }
        out
    }
}

/// Convenience wrapper: initialize and run.
pub fn run(config: PdeConfig) -> Result<PdeRun> {
    Ok(PdeSolver::new(config)?.run())
}

/// Largest defect of the discrete stationary equation
/// i(Φ_{i+1} − Φ_i) + 2(Φ_{i+1} − 2Φ_i + Φ_{i−1})/Δη² − 2γΦ_i/η_i²·[i ≤ N]
/// over cells away from η = 0 and the kink at η = α.
pub fn stationary_defect(profile: &Profile, n: usize) -> f64 {
    let alpha = profile.params.alpha;
    let de = alpha / n as f64;
    let nf = 6 * n;
    let phi: Vec<f64> = (0..=nf).map(|i| profile.phi(i as f64 * de)).collect();
    let mut worst: f64 = 0.0;
    for i in (n / 4)..nf - 1 {
        if i + 2 > n && i < n + 2 {
            continue;
        }
        let eta = i as f64 * de;
        let adv = i as f64 * (phi[i + 1] - phi[i]);
        let lap = 2.0 * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (de * de);
        let src = if i <= n { 2.0 * profile.gamma * phi[i] / (eta * eta) } else { 0.0 };
        worst = worst.max((adv + lap - src).abs());
    }
    worst
}

/// Comparison of the parabola trace w_N with the ring solution ω(α·s).
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaReport {
    /// sup_j |w_N^j − ω(α s_j)| over the compared steps.
    pub sup_error: f64,
    /// Similarity times at which p_N changes, excluding the initial switch-on.
    pub switches: Vec<f64>,
    /// Pattern zeros xₙ/α, n ≥ 1.
    pub zero_times: Vec<f64>,
    /// |switchₙ − xₙ/α| in units of Δs, for matched pairs.
    pub onset_offsets_steps: Vec<f64>,
    /// |α·switchₙ − xₙ| in units of the physical cell width s·Δη at the switch.
    pub onset_offsets_cells: Vec<f64>,
}

/// Compares a simplified-model run with the ring solution of the same
/// parameters up to `s_limit`.
pub fn parabola_compare<K: Kernel + ?Sized>(run: &PdeRun, kern: &K, pattern: &RingPattern, s_limit: f64) -> ParabolaReport {
    let alpha = run.config.params.alpha;
    let ds = run.config.ds;
    let mut sup_error: f64 = 0.0;
    for (j, &s) in run.s.iter().enumerate() {
        if s > s_limit {
            break;
        }
        let om = omega_eval(kern, &pattern.zeros, alpha * s);
        sup_error = sup_error.max((run.w_n[j] - om).abs());
    }
    let mut switches = Vec::new();
    for j in 2..run.p_n.len() {
        if run.p_n[j] != run.p_n[j - 1] {
            switches.push(run.s[j]);
        }
    }
    let zero_times: Vec<f64> = pattern.zeros[1..].iter().map(|z| z / alpha).collect();
    let d_eta = run.config.d_eta();
    let onset_offsets_steps = switches.iter().zip(&zero_times).map(|(s, z)| (s - z).abs() / ds).collect();
    let onset_offsets_cells = switches.iter().zip(&zero_times).map(|(s, z)| alpha * (s - z).abs() / (s * d_eta)).collect();
    ParabolaReport { sup_error, switches, zero_times, onset_offsets_steps, onset_offsets_cells }
}
