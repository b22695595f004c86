//! Named verification suites. Each fills a report bundle; hard checks decide
//! the exit status.

use clap::ValueEnum;
use fracdiff_core::diagnostics::{
    aleksandrov_check, benilan_crandall_defect, concentration_compare, eps_monotonicity, l1_contraction_check,
    shifting_compare, smoothing_fit, ReportBundle,
};
use fracdiff_core::evolve::{Evolution, StepperConfig, TailPolicy};
use fracdiff_core::experiments::{BarenblattSetup, DataSpec};
use fracdiff_core::frlap::{log_constant, power_constant, vss_constant};
use fracdiff_core::limits::{build_ladder, LadderSetup};
use fracdiff_core::loghalf::{explicit_identity_defect, run_loghalf, LogHalfConfig};
use fracdiff_core::oracle::{C_LOG, K_PV};
use fracdiff_core::selfsim::{profile_equation_residual, vss_profile, ScalingExponents};
use fracdiff_core::{build_operator, Field, FracOrder, Grid1D, Nonlinearity, Result, TailModel};
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Operator,
    Comparison,
    Scaling,
    Loghalf,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Operator => "operator",
            Suite::Comparison => "comparison",
            Suite::Scaling => "scaling",
            Suite::Loghalf => "loghalf",
            Suite::All => "all",
        }
    }
}

fn order(s: f64) -> FracOrder {
    FracOrder::new(s).expect("fixed orders are valid")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn run_suite(suite: Suite) -> Result<ReportBundle> {
    let mut bundle = ReportBundle::new(suite.name());
    match suite {
        Suite::Operator => operator(&mut bundle)?,
        Suite::Comparison => comparison(&mut bundle)?,
        Suite::Scaling => scaling(&mut bundle)?,
        Suite::Loghalf => loghalf(&mut bundle)?,
        Suite::All => {
            operator(&mut bundle)?;
            comparison(&mut bundle)?;
            scaling(&mut bundle)?;
            loghalf(&mut bundle)?;
        }
    }
    Ok(bundle)
}

/// Constants against the frozen tables, and the operator on exact powers.
fn operator(bundle: &mut ReportBundle) -> Result<()> {
    let k_err = K_PV.iter().map(|&(a, s, k)| power_constant(a, order(s)).map(|v| rel(v, k))).collect::<Result<Vec<_>>>()?;
    let worst = k_err.iter().copied().fold(0.0, f64::max);
    bundle.push("power_constant", true, worst < 1e-4, &json!({ "pairs": K_PV.len(), "max_rel_err": worst, "tol": 1e-4 }))?;
    let worst = C_LOG.iter().map(|&(s, c)| rel(log_constant(order(s)), c)).fold(0.0, f64::max);
    bundle.push("log_constant", true, worst < 1e-10, &json!({ "max_rel_err": worst, "tol": 1e-10 }))?;

    let l = 10.0;
    let g = Grid1D::new(l, 4097)?;
    for (s, n) in [(0.8, 0.2), (0.9, 0.5), (0.75, 0.0)] {
        let op = build_operator(g, order(s));
        let a = 2.0 * s * n / (1.0 + n);
        let (f, k) = if n > 0.0 {
            let v = g.nodes().iter().map(|x| x.abs().powf(a)).collect();
            (Field::signed(g, v, Some(TailModel::power(1.0, 1.0, -a, l)))?, power_constant(a, order(s))?)
        } else {
            let mut v: Vec<f64> = g.nodes().iter().map(|x| x.abs().ln()).collect();
            // cell average of log|x| over [−h/2, h/2]
            v[g.center()] = (g.spacing() / 2.0).ln() - 1.0;
            (Field::signed(g, v, Some(TailModel::Log { left: 0.0, right: 0.0, slope: 1.0, radius: l }))?, log_constant(order(s)))
        };
        let r = op.apply(&f)?;
        let worst = g
            .nodes()
            .iter()
            .zip(&r.values)
            .filter(|(x, _)| x.abs() >= 0.5 && x.abs() <= l / 4.0)
            .map(|(x, v)| rel(*v, k * x.abs().powf(a - 2.0 * s)))
            .fold(0.0, f64::max);
        bundle.push(&format!("apply_power_s{s}_n{n}"), true, worst < 0.01, &json!({ "max_rel_err": worst, "tol": 0.01 }))?;
    }
    Ok(())
}

/// The standard bump pair at (0.8, 0.2).
fn comparison(bundle: &mut ReportBundle) -> Result<()> {
    let tol = 1e-3;
    let g = Grid1D::new(20.0, 401)?;
    let op = build_operator(g, order(0.8));
    let nl = Nonlinearity::new(0.2)?;
    let mut cfg = StepperConfig::for_grid(g, 0.8);
    cfg.dt = cfg.dt.min(cfg.dt_max);
    let out: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    let bump = |c: f64, w: f64| DataSpec::Bump { mass: 1.0, center: c, width: w }.build(g, 0.8, 0.2);
    let (narrow, wide, shifted) = (bump(0.0, 1.0)?, bump(0.0, 2.0)?, bump(1.0, 1.0)?);
    let ev = Evolution::new(&op, nl.regularized(1e-4)?).with_tail_policy(TailPolicy::universal(0.8, 0.2));
    let a = ev.run(&narrow, 2.0, &out, &cfg)?;
    let b = ev.run(&wide, 2.0, &out, &cfg)?;
    let c = ev.run(&shifted, 2.0, &out, &cfg)?;
    let conc = (0..a.len()).map(|k| concentration_compare(&b.u(k), &a.u(k), tol)).collect::<Result<Vec<_>>>()?;
    let worst = conc.into_iter().max_by(|x, y| x.max_violation.total_cmp(&y.max_violation)).expect("nonempty");
    bundle.push_comparison("concentration", &worst)?;
    let shift = (0..a.len()).map(|k| shifting_compare(&c.states[k], &a.states[k], tol)).collect::<Result<Vec<_>>>()?;
    let worst = shift.into_iter().max_by(|x, y| x.max_violation.total_cmp(&y.max_violation)).expect("nonempty");
    bundle.push_comparison("shift", &worst)?;
    bundle.push_comparison("contraction", &l1_contraction_check(&a, &b, tol)?)?;
    bundle.push_comparison("aleksandrov", &aleksandrov_check(&a, 1.5, tol)?)?;
    bundle.push_comparison("benilan_crandall", &benilan_crandall_defect(&a, nl, tol)?)?;
    let ladder = build_ladder(&op, nl, &narrow, &[1e-2, 1e-3, 1e-4], 2.0, &out, &LadderSetup::new(0.8, 0.2, cfg))?;
    bundle.push_comparison("eps_monotone", &eps_monotonicity(&ladder, tol))?;
    Ok(())
}

/// Scaling identities, the VSS profile equation and the smoothing exponent.
fn scaling(bundle: &mut ReportBundle) -> Result<()> {
    for (s, n) in [(0.8, 0.2), (0.9, 0.5), (0.75, 0.0)] {
        let e = ScalingExponents::new(order(s), n)?;
        let v = vss_constant(order(s), n)?;
        let defect = rel(v.c.powf(1.0 + n), (1.0 + n) * v.k);
        bundle.push(&format!("vss_constant_s{s}_n{n}"), true, defect < 1e-12, &json!({ "K": v.k, "C": v.c, "defect": defect }))?;
        let g = Grid1D::new(10.0, 1001)?;
        let p = vss_profile(&e, g)?;
        let r = profile_equation_residual(&p, &build_operator(g, order(s)), Nonlinearity::new(n)?, &e, 1.0)?;
        bundle.push(&format!("vss_residual_s{s}_n{n}"), true, r < 0.02, &json!({ "residual": r, "tol": 0.02, "xi_min": 1.0 }))?;
    }
    let mut b = BarenblattSetup::new(0.8, 0.2, 0.061);
    b.t_ref = 0.02;
    let fit = smoothing_fit(&b.run()?, (0.5, 20.0))?;
    let alpha = b.exponents()?.alpha;
    let err = rel(fit.fitted_exponent, -alpha);
    bundle.push("smoothing_exponent", true, err < 0.05, &json!({ "fit": fit, "target": -alpha, "rel_err": err, "tol": 0.05 }))?;
    Ok(())
}

/// Explicit-solution identity (hard) and the ladder's mass rate (reported).
fn loghalf(bundle: &mut ReportBundle) -> Result<()> {
    let g = Grid1D::new(200.0, 4097)?;
    let defect = explicit_identity_defect(1.0, 2.0, g, 1.0)?;
    bundle.push("half_laplacian_identity", true, defect < 0.01, &json!({ "defect": defect, "tol": 0.01 }))?;
    let g = Grid1D::new(50.0, 501)?;
    let (_, report) = run_loghalf(1.0, 1.0, g, &LogHalfConfig::for_grid(g))?;
    let detail = json!({
        "mass_decay_slope": report.mass_decay_slope,
        "explicit_slope": -2.0 * std::f64::consts::PI,
        "t_exact": report.t_exact,
        "t_observed": report.t_observed,
        "l1_error_half": report.l1_error_half,
    });
    bundle.push("mass_rate", false, true, &detail)?;
    Ok(())
}
