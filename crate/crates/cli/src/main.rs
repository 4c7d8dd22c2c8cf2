mod csv;
mod source;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csv::CsvDoc;
use hhmo::degenerate::{verify_degeneracy, DegenerateConstruction, TemplateSolution};
use hhmo::extended::{extended_solve, regular_extension_solve};
use hhmo::kernel::{build_kernel_table, Kernel};
use hhmo::pde::{self, PdeConfig, PdeModel};
use hhmo::profile::{check_solvability, psi_eval, solve_kappa};
use hhmo::rings::{estimate_accumulation_window, solve_pattern, Classification, RingLimits, RingTols};
use hhmo::{Error, ModelParams};
use source::{AnyKernel, KernelOptions, KernelSpec, LoadError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "hhmo", version, about = "Fast-reaction precipitation model: profiles, kernels, ring patterns and PDE runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    ustar: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, Error> {
        ModelParams::new(self.alpha, self.beta, self.ustar)
    }
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// synthetic, hhmo or file:PATH (a table written by `degenerate` or `kernel --table-out`).
    #[arg(long, default_value = "synthetic")]
    kernel: KernelSpec,
    /// Degeneracy exponent of the synthetic kernel.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    sigma: f64,
    /// Scale of the synthetic kernel.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    scale: f64,
    /// Chebyshev nodes of the HHMO kernel table.
    #[arg(long, default_value_t = 1024)]
    table_points: usize,
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// CSV destination; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Full,
    Simplified,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExtMode {
    Mollified,
    Regular,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-similar profile Φ and Ψ on a grid in η.
    Profile {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid points on [0, eta_max].
        #[arg(long, default_value_t = 601)]
        points: usize,
        /// Right end of the grid; defaults to 6·alpha.
        #[arg(long)]
        eta_max: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tabulated HHMO kernel: theta, G_plus, G_minus, K, cumK.
    Kernel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
        /// Also write the kernel in the importable two-column table format.
        #[arg(long)]
        table_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Zeros, widths and ratios of the ring solution.
    Rings {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        kern: KernelArgs,
        #[arg(long, default_value_t = 200)]
        max_zeros: usize,
        /// Stop once a width drops below this; defaults to 1e-9·x₁.
        #[arg(long)]
        min_width: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        /// Ratios averaged by the accumulation estimate.
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Kernel with a degenerate ring solution, built from a template.
    Degenerate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        kern: KernelArgs,
        /// Gap extension ε; chosen automatically when omitted.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Points of the exported table.
        #[arg(long, default_value_t = 20000)]
        points: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Extended solution (mollified relay) or regular extension past x*.
    Extended {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        kern: KernelArgs,
        #[arg(long, value_enum, default_value_t = ExtMode::Mollified)]
        mode: ExtMode,
        /// Right end of the interval; defaults to 1.5·x*.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Smallest mollifier width; defaults to 4h.
        #[arg(long)]
        eps_last: Option<f64>,
        /// Number of mollifier widths, each half the previous one.
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Finite-difference run in similarity variables.
    Pde {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "model", value_enum, default_value_t = ModelKind::Simplified)]
        scheme: ModelKind,
        #[arg(long = "N", default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1e-2)]
        ds: f64,
        #[arg(long, default_value_t = 40.0)]
        smax: f64,
        /// Write (s, eta, w, p) snapshots to this file.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Steps between snapshots; defaults to ⌈smax/(100·ds)⌉.
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simplified PDE parabola trace against the ring solution ω(α s).
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "N", default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        ds: f64,
        /// Defaults to 1.25·x₁/alpha.
        #[arg(long)]
        smax: Option<f64>,
        #[arg(long, default_value_t = 1024)]
        table_points: usize,
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Core(e) => Failure::Core(e),
            LoadError::Io(p, e) => Failure::Io(p, e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e:?}: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
        Err(Failure::Io(p, e)) => {
            eprintln!("error: I/O on {}: {e}", p.display());
            ExitCode::from(4)
        }
    }
}

fn emit(doc: CsvDoc, out: &OutArgs, summary: &str) -> Outcome {
    match &out.output {
        Some(p) => {
            write_file(p, &doc.into_string())?;
            println!("{summary}");
        }
        None => {
            print!("{}", doc.into_string());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn write_file(p: &Path, text: &str) -> Outcome {
    std::fs::write(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e))
}

fn echo_model(doc: &mut CsvDoc, m: &ModelArgs) {
    doc.meta("alpha", m.alpha);
    doc.meta("beta", m.beta);
    doc.meta("ustar", m.ustar);
}

fn echo_kernel(doc: &mut CsvDoc, k: &KernelArgs) {
    doc.meta("kernel", &k.kernel);
    match k.kernel {
        KernelSpec::Synthetic => {
            doc.meta("sigma", k.sigma);
            doc.meta("scale", k.scale);
        }
        KernelSpec::Hhmo => {
            doc.meta("table_points", k.table_points);
            doc.meta("quad_tol", k.quad_tol);
        }
        KernelSpec::File(_) => {}
    }
}

fn load_kernel(model: &ModelArgs, k: &KernelArgs) -> Result<AnyKernel, Failure> {
    let params = if k.kernel == KernelSpec::Hhmo { model.params()? } else { ModelParams::default() };
    let opts = KernelOptions { sigma: k.sigma, scale: k.scale, params, table_points: k.table_points, quad_tol: k.quad_tol };
    Ok(source::load(&k.kernel, &opts)?)
}

fn positive(name: &str, v: f64) -> Result<f64, Error> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")))
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Profile { model, points, eta_max, out } => {
            let params = model.params()?;
            if points < 2 {
                return Err(Error::InvalidParameter("points must be at least 2".into()).into());
            }
            let eta_max = positive("eta_max", eta_max.unwrap_or(6.0 * params.alpha))?;
            let solv = check_solvability(&params);
            let prof = solve_kappa(&params, 1e-12)?;
            let mut doc = CsvDoc::new("profile");
            echo_model(&mut doc, &model);
            doc.meta("kappa", prof.kappa);
            doc.meta("gamma", prof.gamma);
            doc.meta("residual", prof.residual()?);
            doc.meta("ustar_threshold_kappa0", solv.u0_kappa0);
            doc.meta("ustar_threshold_kappa1", solv.u0_kappa1);
            doc.header(&["eta", "Phi", "Psi"]);
            for i in 0..points {
                let eta = eta_max * i as f64 / (points - 1) as f64;
                doc.row(&[eta, prof.phi(eta), psi_eval(&params, eta)]);
            }
            emit(doc, &out, &format!("profile: kappa={} gamma={}", prof.kappa, prof.gamma))
        }
        Command::Kernel { model, points, quad_tol, table_out, out } => {
            let params = model.params()?;
            let prof = solve_kappa(&params, 1e-12)?;
            let table = build_kernel_table(&prof, points, quad_tol)?;
            let mut doc = CsvDoc::new("kernel");
            echo_model(&mut doc, &model);
            doc.meta("points", points);
            doc.meta("quad_tol", quad_tol);
            doc.meta("kappa", prof.kappa);
            doc.meta("gamma", table.kernel.gamma_const());
            doc.meta("k_coeff", table.kernel.k_coeff());
            doc.meta("probe_error", table.probe_error);
            doc.header(&["theta", "G_plus", "G_minus", "K", "cumK"]);
            for i in 0..table.thetas.len() {
                doc.row(&[table.thetas[i], table.g_plus[i], table.g_minus[i], table.k_vals[i], table.cum_prefix[i]]);
            }
            if let Some(p) = &table_out {
                write_file(p, &table.kernel.to_csv())?;
            }
            emit(doc, &out, &format!("kernel: Gamma={} probe_error={:e}", table.kernel.gamma_const(), table.probe_error))
        }
        Command::Rings { model, kern, max_zeros, min_width, horizon, window, out } => {
            let k = load_kernel(&model, &kern)?;
            if let Some(w) = min_width {
                positive("min_width", w)?;
            }
            let limits = RingLimits { max_zeros, min_width, horizon: positive("horizon", horizon)? };
            let pattern = solve_pattern(&k, &limits, &RingTols::default())?;
            let x_star = if pattern.classification == Classification::NonDegenerateAccumulation {
                estimate_accumulation_window(&pattern, window).unwrap_or(pattern.x_star)
            } else {
                pattern.x_star
            };
            let mut doc = CsvDoc::new("rings");
            if kern.kernel == KernelSpec::Hhmo {
                echo_model(&mut doc, &model);
            }
            echo_kernel(&mut doc, &kern);
            doc.meta("max_zeros", max_zeros);
            doc.meta("min_width", min_width.map_or("auto".to_string(), |w| w.to_string()));
            doc.meta("horizon", horizon);
            doc.meta("window", window);
            doc.header(&["n", "x_n", "d_n", "q_n"]);
            for n in 1..pattern.zeros.len() {
                let d = pattern.widths.get(n).copied().unwrap_or(f64::NAN);
                let q = if n >= 2 { pattern.ratios.get(n - 1).copied().unwrap_or(f64::NAN) } else { f64::NAN };
                doc.row(&[n as f64, pattern.zeros[n], d, q]);
            }
            doc.raw(&format!(
                "# classification={},x_star={},q_star_bound={}\n",
                pattern.classification,
                csv::fmt_num(x_star),
                csv::fmt_num(pattern.q_star_bound)
            ));
            emit(
                doc,
                &out,
                &format!("rings: {} zeros, {}, x*={}", pattern.zeros.len() - 1, pattern.classification, x_star),
            )
        }
        Command::Degenerate { model, kern, epsilon, points, out } => {
            let template = load_kernel(&model, &kern)?;
            let c = match epsilon {
                None => DegenerateConstruction::build(template)?,
                Some(e) => DegenerateConstruction::with_epsilon(TemplateSolution::new(template)?, positive("epsilon", e)?)?,
            };
            let verdict = verify_degeneracy(&c);
            let table = c.kernel.to_table(points)?;
            let mut doc = CsvDoc::new("degenerate");
            echo_kernel(&mut doc, &kern);
            doc.meta("points", points);
            doc.meta("x1", c.x1);
            doc.meta("x2", c.x2);
            doc.meta("epsilon", c.epsilon);
            doc.meta("r", c.r);
            doc.meta("r_star", c.r_star);
            doc.meta("lambda_star", c.lambda_star);
            doc.meta("n_power", c.n_power);
            doc.meta("verification", verdict.is_ok());
            if let Ok(rep) = &verdict {
                doc.meta("mass_error", rep.mass_error);
                doc.meta("gamma_error", rep.gamma_error);
            }
            doc.raw(&table.to_csv());
            emit(
                doc,
                &out,
                &format!(
                    "degenerate: x2+eps={} r*={} n={} lambda*={} verified={}",
                    c.x_break(),
                    c.r_star,
                    c.n_power,
                    c.lambda_star,
                    verdict.is_ok()
                ),
            )?;
            verdict.map(|_| ()).map_err(Failure::from)
        }
        Command::Extended { model, kern, mode, b, h, eps_last, levels, out } => {
            let k = load_kernel(&model, &kern)?;
            let h = positive("h", h)?;
            let pattern = solve_pattern(&k, &RingLimits::default(), &RingTols::default())?;
            let b = positive("b", b.unwrap_or(1.5 * pattern.x_star))?;
            let mut doc = CsvDoc::new("extended");
            echo_kernel(&mut doc, &kern);
            doc.meta("b", b);
            doc.meta("h", h);
            doc.meta("x_star", pattern.x_star);
            match mode {
                ExtMode::Mollified => {
                    let last = positive("eps_last", eps_last.unwrap_or(4.0 * h))?;
                    if levels == 0 {
                        return Err(Error::InvalidParameter("levels must be positive".into()).into());
                    }
                    let eps: Vec<f64> = (0..levels).map(|i| last * 2f64.powi((levels - 1 - i) as i32)).collect();
                    let sol = extended_solve(&k, b, h, &eps)?;
                    doc.meta("mode", "mollified");
                    doc.meta("epsilons", eps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "));
                    doc.meta("residual", sol.residual);
                    doc.header(&["x", "omega", "rho", "residual_local"]);
                    for i in 0..sol.x.len() {
                        doc.row(&[sol.x[i], sol.omega[i], sol.rho[i], sol.residual_local[i]]);
                    }
                    emit(doc, &out, &format!("extended: {} points, residual={:e}", sol.x.len(), sol.residual))
                }
                ExtMode::Regular => {
                    let reg = regular_extension_solve(&k, &pattern, b, h)?;
                    let worst = reg.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    doc.meta("mode", "regular");
                    doc.meta("tail_fraction", reg.tail_fraction);
                    doc.meta("flagged_panels", reg.flagged.len());
                    doc.header(&["x", "omega", "rho", "residual_local"]);
                    for i in 0..reg.x.len() {
                        doc.row(&[reg.x[i], 0.0, reg.rho[i], reg.residual[i]]);
                    }
                    emit(doc, &out, &format!("extended (regular): {} panels, residual={worst:e}", reg.x.len()))
                }
            }
        }
        Command::Pde { model, scheme, n, ds, smax, snapshots, snapshot_every, out } => {
            let params = model.params()?;
            let kind = match scheme {
                ModelKind::Full => PdeModel::Full,
                ModelKind::Simplified => PdeModel::Simplified,
            };
            let mut cfg = PdeConfig::new(params, n, ds, smax, kind)?;
            if snapshots.is_some() {
                cfg.snapshot_every = Some(snapshot_every.unwrap_or(cfg.default_snapshot_every()));
            }
            let d_eta = cfg.d_eta();
            let run = pde::run(cfg.clone())?;
            let mut doc = CsvDoc::new("pde");
            echo_model(&mut doc, &model);
            doc.meta("model", kind);
            doc.meta("N", n);
            doc.meta("ds", ds);
            doc.meta("smax", smax);
            doc.meta("max_solve_residual", run.max_solve_residual);
            doc.meta("max_conservation_error", run.max_conservation_error);
            doc.header(&["s", "sup_w", "w_N", "p_N"]);
            for j in 0..run.s.len() {
                doc.row(&[run.s[j], run.sup_w[j], run.w_n[j], run.p_n[j]]);
            }
            if let Some(p) = &snapshots {
                let mut snap = CsvDoc::new("pde-snapshots");
                echo_model(&mut snap, &model);
                snap.meta("model", kind);
                snap.meta("N", n);
                snap.meta("ds", ds);
                snap.header(&["s", "eta", "w", "p"]);
                for sn in &run.snapshots {
                    for i in 0..sn.w.len() {
                        snap.row(&[sn.s, i as f64 * d_eta, sn.w[i], sn.p[i]]);
                    }
                }
                write_file(p, &snap.into_string())?;
            }
            let summary = format!(
                "pde ({kind}): {} steps, sup|w| {} -> {}",
                run.s.len() - 1,
                run.sup_w[0],
                run.sup_w[run.sup_w.len() - 1]
            );
            emit(doc, &out, &summary)
        }
        Command::Compare { model, n, ds, smax, table_points, quad_tol, out } => {
            let params = model.params()?;
            let prof = solve_kappa(&params, 1e-12)?;
            let kern = build_kernel_table(&prof, table_points, quad_tol)?.kernel;
            let pattern = solve_pattern(&kern, &RingLimits::default(), &RingTols::default())?;
            let smax = positive("smax", smax.unwrap_or(1.25 * pattern.zeros[1] / params.alpha))?;
            let run = pde::run(PdeConfig::new(params, n, ds, smax, PdeModel::Simplified)?)?;
            let rep = pde::parabola_compare(&run, &kern, &pattern, smax);
            let mut doc = CsvDoc::new("compare");
            echo_model(&mut doc, &model);
            doc.meta("N", n);
            doc.meta("ds", ds);
            doc.meta("smax", smax);
            doc.meta("sup_error", rep.sup_error);
            let join = |v: &[f64]| v.iter().map(|x| csv::fmt_num(*x)).collect::<Vec<_>>().join(" ");
            doc.meta("switches", join(&rep.switches));
            doc.meta("zero_times", join(&rep.zero_times[..rep.zero_times.len().min(rep.switches.len().max(1))]));
            doc.meta("onset_offsets_steps", join(&rep.onset_offsets_steps));
            doc.meta("onset_offsets_cells", join(&rep.onset_offsets_cells));
            doc.header(&["s", "w_N", "omega", "p_N"]);
            for j in 0..run.s.len() {
                let om = hhmo::rings::omega_eval(&kern, &pattern.zeros, params.alpha * run.s[j]);
                doc.row(&[run.s[j], run.w_n[j], om, run.p_n[j]]);
            }
            let first = rep.onset_offsets_cells.first().copied().unwrap_or(f64::NAN);
            emit(doc, &out, &format!("compare: sup|w_N - omega|={:e}, first onset offset {first} cells", rep.sup_error))
        }
    }
}
