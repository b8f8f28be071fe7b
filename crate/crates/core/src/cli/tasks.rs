use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{builtin, CfdSweepTask, ScenarioConfig, StateSpec, TaskSpec};
use super::manifest::Recorder;
use super::runner::run_in_dir;
use crate::epm::{mean_energy_residual, Protocol};
use crate::error::{Error, Result};
use crate::ftheorems::{applicable_reports, entropy_table_for, integral_ft_check, jarzynski_lhs, jarzynski_operator_form, EntropyMode, SupportFlag};
use crate::measures::{
    bound_chain_slack, cfd_for, cfd_sweep, efd_estimate, monotonicity_violation, phase_covariance_check, write_cfd_sweep_csv,
    write_cfd_trace_log, CfdSweepPoint,
};
use crate::qstate::{DensityMatrix, EnergyBasis};
use crate::resources::{bsa_decompose, concurrence, correlation_split_with, triple_decompose, weight_of_athermality, weight_of_coherence};

/// Slack allowed in the orderings of fluctuation-distance bound chains.
pub const CHAIN_TOL: f64 = 1e-9;
/// Curves of a coherence sweep must vanish at γ = 0 within this.
pub const ENDPOINT_TOL: f64 = 1e-10;
/// Allowed decrease of the CFD between consecutive |γ|.
pub const MONOTONE_TOL: f64 = 1e-10;
/// ⟨Δs_tot⟩ may fall below zero by this much.
pub const SECOND_LAW_TOL: f64 = 1e-10;
/// Slack allowed in C(ρ) ≤ λ for the best separable approximation.
pub const CONCURRENCE_TOL: f64 = 5e-3;
/// Spread of EFD estimates across seeds.
pub const EFD_SEED_TOL: f64 = 1e-4;
/// Decompositions may leave a negative eigenvalue this small.
pub const STATE_NEGATIVITY_TOL: f64 = 1e-10;

/// Shared inputs of every task in a run.
pub struct Context<'a> {
    pub cfg: &'a ScenarioConfig,
    pub protocol: &'a Protocol,
    pub rho: &'a DensityMatrix,
    pub rho_tilde: &'a DensityMatrix,
}

pub fn run_task(task: &TaskSpec, ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    match task {
        TaskSpec::Decompose => decompose(ctx, rec),
        TaskSpec::Jarzynski => jarzynski(ctx, rec),
        TaskSpec::Crooks => crooks(ctx, rec),
        TaskSpec::IntegralFt => integral_ft(ctx, rec),
        TaskSpec::Cfd => cfd_task(ctx, rec),
        TaskSpec::CfdSweep(p) => cfd_sweep_task(ctx, p, rec),
        TaskSpec::Efd { seeds } => efd_task(ctx, seeds.as_deref(), rec),
        TaskSpec::Fig2 => figure(task.name(), rec),
        TaskSpec::Fig3 => figure(task.name(), rec),
    }
}

fn skipped(e: &Error) -> bool {
    matches!(e, Error::DecompositionInapplicable(_) | Error::MarginalsNotThermal(_))
}

fn decompose(ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    let (p, rho) = (ctx.protocol, ctx.rho);
    let tol = ctx.cfg.tolerances.decomposition;
    let mut out = serde_json::Map::new();

    let ath = weight_of_athermality(rho, &p.gamma_i)?;
    rec.report("athermality_weight", ath.a);
    rec.at_most("athermality_residual", ath.residual(rho), 0.0, tol);
    rec.at_least("athermality_tau_min_eigenvalue", ath.tau.min_eigenvalue(), 0.0, STATE_NEGATIVITY_TOL);
    out.insert("athermality".into(), serde_json::to_value(&ath)?);

    let coh = weight_of_coherence(rho, &p.basis_i)?;
    rec.report("coherence_weight", coh.c);
    rec.at_most("coherence_residual", coh.residual(rho), 0.0, tol);
    out.insert("coherence".into(), serde_json::to_value(&coh)?);

    let triple = triple_decompose(rho, &p.gamma_i, &p.basis_i)?;
    rec.at_most("triple_residual", triple.residual(rho), 0.0, tol);
    out.insert("triple".into(), json!({ "weights": triple.weights(), "decomposition": triple }));

    if let Some(local) = &p.local {
        match correlation_split_with(rho, &local.gamma_a_i, &local.gamma_b_i) {
            Ok(split) => {
                rec.report("correlation_marginal_defect", split.marginal_defect());
                out.insert("correlation".into(), serde_json::to_value(&split)?);
            }
            Err(e) if skipped(&e) => {
                out.insert("correlation".into(), json!({ "skipped": e.to_string() }));
            }
            Err(e) => return Err(e),
        }
        if local.dims == (2, 2) {
            let bsa = bsa_decompose(rho)?;
            let c = concurrence(rho)?;
            rec.report("bsa_lambda", bsa.lambda);
            rec.report("concurrence", c);
            rec.report("bsa_lambda_minus_concurrence", bsa.lambda - c);
            rec.at_most("concurrence_within_bsa_lambda", c, bsa.lambda, CONCURRENCE_TOL);
            rec.at_most("bsa_residual", bsa.residual(rho), 0.0, tol);
            rec.at_most("bsa_separable_residual", bsa.separable_residual(), 0.0, tol);
            rec.at_least("bsa_separable_ppt_min_eigenvalue", bsa.ppt_min_eigenvalue, 0.0, STATE_NEGATIVITY_TOL);
            out.insert("bsa".into(), json!({ "concurrence": c, "decomposition": bsa }));
        }
    }
    rec.write_json("decomposition.json", &out)
}

fn jarzynski(ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    let (p, rho) = (ctx.protocol, ctx.rho);
    let tol = ctx.cfg.tolerances.identity;
    let dist = p.forward(rho)?;
    let lhs = jarzynski_lhs(&dist, p.beta, p.delta_f);
    let operator_form = jarzynski_operator_form(p, rho)?;
    let energy = mean_energy_residual(&dist, rho, &p.channel, &p.h_i, &p.h_f);
    let reports = applicable_reports(p, rho)?;

    rec.report("lhs", lhs);
    rec.report("delta_f", p.delta_f);
    rec.close_to("operator_form", operator_form / lhs.abs().max(1.0), lhs / lhs.abs().max(1.0), tol);
    rec.at_most("mean_energy_residual", energy, 0.0, ctx.cfg.tolerances.mean_energy);
    let mut worst: f64 = (operator_form - lhs).abs() / lhs.abs().max(1.0);
    for r in &reports {
        rec.at_most(&format!("form.{}", r.form.name()), r.relative_gap(), 0.0, tol);
        worst = worst.max(r.relative_gap());
    }
    rec.report("forms_checked", reports.len() as f64);
    rec.report("max_relative_gap", worst);

    let mut csv = String::from("l,k,delta_E,probability\n");
    for e in dist.entries() {
        csv.push_str(&crate::fmt::row(&[e.l.to_string(), e.k.to_string(), crate::fmt::num(e.delta_e), crate::fmt::num(e.probability)]));
        csv.push('\n');
    }
    rec.write("epm_distribution.csv", csv.as_bytes())?;
    rec.write_json(
        "jarzynski.json",
        &json!({
            "beta": p.beta,
            "delta_f": p.delta_f,
            "lhs": lhs,
            "operator_form": operator_form,
            "mean_energy_residual": energy,
            "reports": reports,
        }),
    )
}

fn modes(protocol: &Protocol) -> Vec<EntropyMode> {
    let mut m = vec![EntropyMode::SingleTriple];
    if protocol.is_bipartite() {
        m.extend([EntropyMode::BipartiteCorrelation, EntropyMode::BipartiteBsa]);
    }
    m
}

fn multiplicity(basis: &EnergyBasis, l: usize) -> f64 {
    basis.projector(l).trace().re.round()
}

fn crooks(ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    let p = ctx.protocol;
    let tol = ctx.cfg.tolerances.row;
    let mut summary = serde_json::Map::new();
    for mode in modes(p) {
        let (table, _) = match entropy_table_for(p, ctx.rho, ctx.rho_tilde, mode) {
            Ok(t) => t,
            Err(e) if skipped(&e) => {
                summary.insert(mode.name().into(), json!({ "skipped": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e),
        };
        let name = mode.name();
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        rec.write(&format!("entropy_{name}.csv"), &buf)?;

        let tpm_defect = table
            .rows
            .iter()
            .map(|r| (r.tpm_gap - (multiplicity(&p.basis_i, r.l) / multiplicity(&p.basis_f, r.k)).ln()).abs())
            .fold(0.0, f64::max);
        rec.at_most(&format!("{name}.max_row_residual"), table.max_residual(), 0.0, tol);
        rec.at_most(&format!("{name}.tpm_identity"), tpm_defect, 0.0, tol);
        if mode == EntropyMode::BipartiteBsa {
            rec.at_most(&format!("{name}.psi_split"), table.max_psi_gap(), 0.0, tol);
        }
        rec.report(&format!("{name}.max_row_residual"), table.max_residual());
        let flags = json!({
            "ok": table.count(SupportFlag::Ok),
            "forward_zero": table.count(SupportFlag::ForwardZero),
            "backward_zero": table.count(SupportFlag::BackwardZero),
            "singular_term": table.count(SupportFlag::SingularTerm),
        });
        summary.insert(name.into(), json!({ "max_row_residual": table.max_residual(), "tpm_identity_defect": tpm_defect, "support": flags }));
    }
    rec.write_json("crooks.json", &summary)
}

fn integral_ft(ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    let p = ctx.protocol;
    let tol = ctx.cfg.tolerances.identity;
    let mut out = serde_json::Map::new();
    for mode in modes(p) {
        let (table, forward) = match entropy_table_for(p, ctx.rho, ctx.rho_tilde, mode) {
            Ok(t) => t,
            Err(e) if skipped(&e) => {
                out.insert(mode.name().into(), json!({ "skipped": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e),
        };
        let name = mode.name();
        let r = integral_ft_check(&table, &forward);
        for (k, v) in r.to_map() {
            rec.report(&format!("{name}.{k}"), v);
        }
        if r.valid {
            rec.close_to(&format!("{name}.exp_minus_ds_tot"), r.exp_minus_ds_tot, 1.0, tol);
            rec.at_least(&format!("{name}.mean_ds_tot"), r.mean_ds_tot, 0.0, SECOND_LAW_TOL);
            rec.close_to(&format!("{name}.second_law_budget"), r.second_law_budget, r.mean_ds_tot, tol);
            if ctx.cfg.expect_sigma_ift && mode == EntropyMode::SingleTriple {
                rec.close_to(&format!("{name}.exp_minus_d_sigma_coh"), r.exp_minus_d_sigma_coh, 1.0, tol);
            }
        }
        out.insert(name.into(), serde_json::to_value(&r)?);
    }
    rec.write_json("integral_ft.json", &out)
}

fn cfd_task(ctx: &Context<'_>, rec: &mut Recorder) -> Result<()> {
    let r = cfd_for(ctx.protocol, ctx.rho)?;
    rec.report("cfd", r.cfd);
    rec.report("bound_dephased", r.bound_dephased);
    rec.report("bound_cre", r.bound_cre);
    rec.report("converged", r.converged as u8 as f64);
    rec.at_least("cfd_nonnegative", r.cfd, 0.0, CHAIN_TOL);
    rec.at_most("cfd_below_bound_dephased", r.cfd, r.bound_dephased, CHAIN_TOL);
    rec.at_most("bound_dephased_below_bound_cre", r.bound_dephased, r.bound_cre, CHAIN_TOL);
    rec.write_json("cfd.json", &r)
}

/// γ ∈ {0, 0.01, …, 0.30}.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=30).map(|k| k as f64 / 100.0).collect()
}

#[derive(Serialize)]
struct SweepSummary {
    a: f64,
    points: usize,
    bound_chain_slack: f64,
    monotonicity_violation: f64,
    converged: bool,
    phase_covariance_deviation: Option<f64>,
}

fn cfd_sweep_task(ctx: &Context<'_>, params: &CfdSweepTask, rec: &mut Recorder) -> Result<()> {
    let a = match (params.a, &ctx.cfg.initial_state) {
        (Some(a), _) => a,
        (None, StateSpec::IniCoh { a, .. }) => *a,
        _ => return Err(Error::Config("cfd_sweep needs `a`".into())),
    };
    let gammas = params.gammas.clone().unwrap_or_else(default_gamma_grid);
    let covariance = phase_covariance_check(&ctx.protocol.channel, &ctx.protocol.basis_i).ok().map(|c| c.deviation);
    if let Some(dev) = covariance {
        rec.report("phase_covariance_deviation", dev);
    }
    let mut sides = vec![("", gammas.clone())];
    if params.both_signs {
        sides.push(("_negative", gammas.iter().map(|g| -g).collect()));
    }
    let mut summaries = serde_json::Map::new();
    for (suffix, grid) in sides {
        let points = cfd_sweep(ctx.protocol, a, &grid)?;
        let mut buf = Vec::new();
        write_cfd_sweep_csv(&points, &mut buf)?;
        rec.write(&format!("cfd_sweep{suffix}.csv"), &buf)?;
        let mut log = Vec::new();
        write_cfd_trace_log(&points, &mut log)?;
        rec.write(&format!("cfd_sweep{suffix}_traces.log"), &log)?;
        check_sweep(&points, suffix, params.expect_monotone, rec);
        let s = SweepSummary {
            a,
            points: points.len(),
            bound_chain_slack: bound_chain_slack(&points),
            monotonicity_violation: monotonicity_violation(&points),
            converged: points.iter().all(|p| p.converged),
            phase_covariance_deviation: covariance,
        };
        let side = if suffix.is_empty() { "positive" } else { "negative" };
        summaries.insert(side.into(), serde_json::to_value(s)?);
    }
    rec.write_json("cfd_sweep.json", &summaries)
}

fn check_sweep(points: &[CfdSweepPoint], suffix: &str, expect_monotone: bool, rec: &mut Recorder) {
    let slack = bound_chain_slack(points);
    rec.at_least(&format!("bound_chain_slack{suffix}"), slack, 0.0, CHAIN_TOL);
    rec.report(&format!("bound_chain_slack{suffix}"), slack);
    rec.report(&format!("max_cfd{suffix}"), points.iter().map(|p| p.cfd).fold(0.0, f64::max));
    if let Some(z) = points.iter().find(|p| p.gamma == 0.0) {
        let worst = z.cfd.abs().max(z.bound_dephased.abs()).max(z.bound_cre.abs());
        rec.at_most(&format!("vanishes_at_zero{suffix}"), worst, 0.0, ENDPOINT_TOL);
    }
    let mono = monotonicity_violation(points);
    rec.report(&format!("monotonicity_violation{suffix}"), mono);
    if expect_monotone {
        rec.at_most(&format!("monotone_in_abs_gamma{suffix}"), mono, 0.0, MONOTONE_TOL);
    }
}

fn efd_task(ctx: &Context<'_>, seeds: Option<&[u64]>, rec: &mut Recorder) -> Result<()> {
    let seeds = seeds.map(<[u64]>::to_vec).unwrap_or_else(|| vec![ctx.cfg.seed]);
    let reports = seeds.par_iter().map(|&s| efd_estimate(ctx.protocol, ctx.rho, s)).collect::<Result<Vec<_>>>()?;
    for (s, r) in seeds.iter().zip(&reports) {
        rec.at_least(&format!("seed_{s}.estimate_nonnegative"), r.efd_upper_estimate, 0.0, CHAIN_TOL);
        rec.at_most(&format!("seed_{s}.estimate_below_bound_bsa"), r.efd_upper_estimate, r.bound_bsa, CHAIN_TOL);
        rec.at_most(&format!("seed_{s}.bound_bsa_below_bound_bsa_relent"), r.bound_bsa, r.bound_bsa_relent, CHAIN_TOL);
    }
    let values: Vec<f64> = reports.iter().map(|r| r.efd_upper_estimate).collect();
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if seeds.len() > 1 {
        rec.at_most("seed_spread", spread, 0.0, EFD_SEED_TOL);
    }
    let first = &reports[0];
    rec.report("efd_upper_estimate", values.iter().cloned().fold(f64::INFINITY, f64::min));
    rec.report("bound_bsa", first.bound_bsa);
    rec.report("bound_bsa_relent", first.bound_bsa_relent);
    rec.report("bound_relent_table", first.bound_relent_table);
    rec.report("bound_relent_ent", first.bound_relent_ent);
    rec.report("seed_spread", spread);
    let runs: Vec<_> = seeds.iter().zip(&reports).map(|(s, r)| json!({ "seed": s, "report": r })).collect();
    rec.write_json("efd.json", &json!({ "seed_spread": spread, "runs": runs }))
}

/// Runs a canonical figure scenario in a subdirectory and adopts its results.
fn figure(name: &str, rec: &mut Recorder) -> Result<()> {
    let cfg = builtin(name).expect("registered figure");
    let sub = rec.dir().join(name);
    let m = run_in_dir(&cfg, Path::new("."), &sub)?;
    for mut a in m.assertions {
        a.name = format!("{}.{}", a.task, a.name);
        a.task = name.into();
        rec.assertions.push(a);
    }
    for (k, v) in m.summary {
        rec.summary.insert(format!("{name}.{k}"), v);
    }
    rec.artifacts.extend(m.artifacts.into_iter().map(|p| format!("{name}/{p}")));
    rec.artifacts.push(format!("{name}/manifest.json"));
    Ok(())
}
