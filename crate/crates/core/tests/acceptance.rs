//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantities and the wall-clock time of each check.

mod common;

use common::{erfc_oracle, marching_zeros};
use hhmo::degenerate::{verify_degeneracy, DegenerateConstruction};
use hhmo::extended::{extended_solve, regular_extension_solve};
use hhmo::kernel::{build_kernel_table, k_eval, kernel_second_difference_sign_changes, SyntheticKernel};
use hhmo::pde::{matrix_row, parabola_compare, run, transport, PdeConfig, PdeModel};
use hhmo::profile::{check_solvability, solve_kappa};
use hhmo::rings::{estimate_accumulation_window, q_star, solve_pattern, Classification, RingLimits, RingTols};
use hhmo::specfun::{erfc, kummer_m, SeriesAccuracy};
use hhmo::ModelParams;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Result<Outcome, hhmo::Error>;

fn crit1() -> Result<Outcome, hhmo::Error> {
    let acc = SeriesAccuracy::default();
    let m12 = (kummer_m(1.0, 2.0, 1.0, acc)? - (1f64.exp() - 1.0)).abs();
    let mut maa: f64 = 0.0;
    for (a, z) in [(0.5, -3.0), (1.7, 2.0), (3.0, -0.25), (2.5, 5.0)] {
        let v = kummer_m(a, a, z, acc)?;
        maa = maa.max((v / z.exp() - 1.0).abs());
    }
    let e = (erfc(0.5) - erfc_oracle(0.5)).abs();
    let pass = m12 < 1e-11 && maa < 1e-11 && e < 1e-11;
    Ok(outcome(pass, format!("|M(1,2,1)-(e-1)|={m12:.1e} max rel M(a,a,z)={maa:.1e} |erfc(0.5)-oracle|={e:.1e}")))
}

fn crit2() -> Result<Outcome, hhmo::Error> {
    let params = ModelParams::default();
    let prof = solve_kappa(&params, 1e-13)?;
    let res = prof.residual()?.abs();
    let exact_gamma = prof.gamma == prof.kappa * (prof.kappa - 1.0);
    let closed = PI.sqrt() / 2.0 * 0.25f64.exp() * erfc_oracle(0.5);
    let cand = (check_solvability(&params).u0_kappa0 - closed).abs();
    let pass = res < 1e-10 && exact_gamma && cand < 1e-9;
    Ok(outcome(
        pass,
        format!("kappa={:.10} residual={res:.1e} gamma exact={exact_gamma} |u0(kappa=0)-closed|={cand:.1e}", prof.kappa),
    ))
}

fn crit3() -> Result<Outcome, hhmo::Error> {
    let prof = solve_kappa(&ModelParams::default(), 1e-12)?;
    let k0 = k_eval(&prof, 0.0, 1e-12)?;
    let h = 1e-5;
    let slope = (k_eval(&prof, h, 1e-12)? / h).abs();
    let limit = (2.0 / PI).sqrt() * 0.2;
    let u = 1e-4;
    let tail = ((k_eval(&prof, 1.0 - u, 1e-12)? / u.sqrt()) / limit - 1.0).abs();
    let mut counts = Vec::new();
    for us in [0.1, 0.15, 0.2] {
        let p = solve_kappa(&ModelParams::new(1.0, 1.0, us)?, 1e-12)?;
        counts.push(kernel_second_difference_sign_changes(&p, 10_000, 1e-10)?.len());
    }
    let pass = k0 == 0.0 && slope < 1e-4 && tail < 0.01 && counts.iter().all(|&c| c == 1);
    Ok(outcome(
        pass,
        format!("K(0)={k0} |K(h)/h|={slope:.3e} (bound 1e-4) tail rel err={tail:.1e} K'' sign changes={counts:?}"),
    ))
}

fn crit4() -> Result<Outcome, hhmo::Error> {
    let k = SyntheticKernel::new(0.5, 1.0)?;
    let p = solve_pattern(&k, &RingLimits { max_zeros: 3, ..RingLimits::default() }, &RingTols::default())?;
    let e1 = (p.zeros[1] - 70f64.sqrt() / 4.0).abs();
    let oracle = marching_zeros(1e-5, 3);
    let em = (0..3).map(|i| (p.zeros[i + 1] - oracle[i]).abs()).fold(0.0, f64::max);
    Ok(outcome(e1 < 1e-8 && em < 1e-4, format!("|x1-sqrt(70)/4|={e1:.1e} max marching diff={em:.1e}")))
}

fn crit5() -> Result<Outcome, hhmo::Error> {
    let k = SyntheticKernel::new(0.5, 1.0)?;
    let limits = RingLimits { min_width: Some(1e-9), ..RingLimits::default() };
    let p = solve_pattern(&k, &limits, &RingTols::default())?;
    let q = q_star(0.5, 1e-15)?;
    let g = (1.0 + q).powf(1.5) - q.powf(1.5) - q - 1.0;
    // ratios[k] = d_{k+1}/d_k, so n ≥ 10 starts at index 9.
    let worst = p.ratios.iter().skip(9).cloned().fold(0.0, f64::max);
    let xs: Vec<f64> = [2, 3, 4, 5].iter().map(|&w| estimate_accumulation_window(&p, w)).collect::<Result<_, _>>()?;
    let spread = xs.iter().map(|x| (x / xs[0] - 1.0).abs()).fold(0.0, f64::max);
    let pass = worst <= q + 0.05 && g.abs() <= 1e-12 && spread < 5e-4 && p.ratios.len() > 9;
    Ok(outcome(
        pass,
        format!(
            "zeros={} max q_n(n>=10)={worst:.4} q*={q:.6} |G(q*)|={:.1e} x* windows {:?} spread={spread:.1e}",
            p.zeros.len() - 1,
            g.abs(),
            xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>()
        ),
    ))
}

fn hhmo_setup() -> Result<(hhmo::kernel::TabulatedKernel, hhmo::rings::RingPattern), hhmo::Error> {
    let prof = solve_kappa(&ModelParams::default(), 1e-12)?;
    let kern = build_kernel_table(&prof, 1024, 1e-10)?.kernel;
    let pattern = solve_pattern(&kern, &RingLimits::default(), &RingTols::default())?;
    Ok((kern, pattern))
}

fn crit6() -> Result<Outcome, hhmo::Error> {
    let (_, p) = hhmo_setup()?;
    let bands = p.widths.len();
    let rings = (0..bands).filter(|&n| n % 2 == 0).count();
    let gaps = bands - rings;
    let ring_widths: Vec<f64> = p.widths.iter().step_by(2).cloned().collect();
    let decreasing = ring_widths.iter().skip(1).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0]);
    let pass = rings >= 2 && gaps >= 2 && decreasing;
    Ok(outcome(
        pass,
        format!(
            "{} rings={rings} gaps={gaps} x1={:.6} x2={:.6} x*={:.6} ring widths decreasing from 2nd={decreasing}",
            p.classification, p.zeros[1], p.zeros[2], p.x_star
        ),
    ))
}

fn crit7() -> Result<Outcome, hhmo::Error> {
    let c = DegenerateConstruction::build(SyntheticKernel::new(0.5, 1.0)?)?;
    let rep = verify_degeneracy(&c)?;
    let both_inconsistent = !rep.verdict.positive_consistent && !rep.verdict.negative_consistent;
    let pass = rep.mass_error.abs() <= 1e-8
        && rep.gamma_error.abs() <= 1e-8
        && both_inconsistent
        && rep.pattern.classification == Classification::Degenerate;
    Ok(outcome(
        pass,
        format!(
            "eps={:.5} mass err={:.1e} Gamma err={:.1e} both hypotheses inconsistent={both_inconsistent}",
            c.epsilon, rep.mass_error, rep.gamma_error
        ),
    ))
}

fn crit8() -> Result<Outcome, hhmo::Error> {
    let k = SyntheticKernel::new(0.5, 1.0)?;
    let p = solve_pattern(&k, &RingLimits::default(), &RingTols::default())?;
    let b = 1.5 * p.x_star;
    let coarse = extended_solve(&k, b, 1e-3, &[1.6e-2, 8e-3, 4e-3])?;
    let fine = extended_solve(&k, b, 5e-4, &[1.6e-2, 8e-3, 4e-3, 2e-3])?;
    let relay = coarse.relay_violation(4e-3).max(fine.relay_violation(2e-3));
    let reg = regular_extension_solve(&k, &p, b, 1e-3)?;
    let reg_res = reg.residual.iter().cloned().fold(0.0, f64::max);
    let pass = coarse.residual <= 5e-3 && fine.residual < coarse.residual && relay < 1e-9 && reg_res < 1e-6;
    Ok(outcome(
        pass,
        format!(
            "residual h=1e-3: {:.2e}, h=5e-4: {:.2e} relay violation={relay:.1e} regular extension residual={reg_res:.1e}",
            coarse.residual, fine.residual
        ),
    ))
}

fn crit9() -> Result<Outcome, hhmo::Error> {
    let mut parts = Vec::new();
    let mut pass = true;
    for model in [PdeModel::Simplified, PdeModel::Full] {
        let r = run(PdeConfig::new(ModelParams::default(), 100, 1e-2, 40.0, model)?)?;
        let (a, b) = (r.sup_at(5.0), r.sup_at(40.0));
        pass &= b < a && r.max_conservation_error <= 1e-12;
        parts.push(format!("{model}: sup|w| s=5 {a:.4}, s=40 {b:.4}, conservation {:.1e}", r.max_conservation_error));
    }
    // Conservation of a hand-made precipitation history.
    let bits: Vec<f64> = (0..731).map(|k| ((k * 7919) % 13 < 5) as u8 as f64).collect();
    let mut running = vec![0.0];
    for b in &bits {
        running.push(running.last().unwrap() + b);
    }
    let (n, j) = (200, bits.len());
    let mut cells = vec![0.0; n];
    transport(&running, j, n, &mut cells);
    let mass_err = (cells.iter().sum::<f64>() * j as f64 / n as f64 - running[j]).abs();
    let (l, d, u) = matrix_row(3, 7, 0.1, 60);
    let (_, d0, u0) = matrix_row(0, 7, 0.1, 60);
    let coeff = [(l, -200.0), (d, 410.0), (u, -203.0), (d0, 407.0), (u0, -400.0)]
        .iter()
        .all(|(g, w)| (g - w).abs() < 1e-9);
    pass &= mass_err <= 1e-12 * running[j] && coeff;
    parts.push(format!("transport mass err={mass_err:.1e} coefficients ok={coeff}"));
    Ok(outcome(pass, parts.join("; ")))
}

fn crit10() -> Result<Outcome, hhmo::Error> {
    let (kern, pattern) = hhmo_setup()?;
    let x1 = pattern.zeros[1];
    let r = run(PdeConfig::new(ModelParams::default(), 1000, 1e-3, 1.05 * x1, PdeModel::Simplified)?)?;
    let rep = parabola_compare(&r, &kern, &pattern, 1.05 * x1);
    let Some(&switch) = rep.switches.first() else {
        return Ok(outcome(false, "no precipitation onset on the parabola".into()));
    };
    let steps = rep.onset_offsets_steps[0];
    let cells = rep.onset_offsets_cells[0];
    // Δs = Δη, so 3 cells of width Δη·α correspond to 3 time steps.
    Ok(outcome(
        steps <= 3.0,
        format!(
            "first onset s={switch:.4} vs x1/alpha={:.6}: offset {steps:.2} steps (bound 3); physical cells {cells:.2}; sup|w_N-omega|={:.1e}",
            x1, rep.sup_error
        ),
    ))
}

fn main() {
    let checks: [(u32, Check, Duration); 10] = [
        (1, crit1, Duration::from_secs(1)),
        (2, crit2, Duration::from_secs(1)),
        (3, crit3, Duration::from_secs(60)),
        (4, crit4, Duration::from_secs(30)),
        (5, crit5, Duration::from_secs(60)),
        (6, crit6, Duration::from_secs(300)),
        (7, crit7, Duration::from_secs(120)),
        (8, crit8, Duration::from_secs(300)),
        (9, crit9, Duration::from_secs(300)),
        (10, crit10, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (id, check, budget) in checks {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2}: {} ({:.2} s, budget {} s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
}
