use std::f64::consts::PI;

use anyhow::Context;
use serde::Serialize;

use selfrepel::bounds::{comparison_bound, comparison_bound_minimized, BoundsReport, SumConvention};
use selfrepel::galerkin::{
    build_operator, collapse_matrix, quadrature_cross_check, refine_until_converged, spectral_abscissa,
    verify_bochner, verify_drift_lemma, verify_lift_conditions, verify_lstar_l, ConvergedTrel, Truncation,
    TrelOptions,
};
use selfrepel::simulate::{
    autocorrelation, integrated_autocorr_time, ks_circular_and_gaussian, ks_critical_1pct, ks_gaussian,
    kuiper_critical_1pct, kuiper_uniform, run, sample_invariant, stationary_endpoints, trajectory_rng,
    EnsembleStats, IntegratorConfig,
};
use selfrepel::tensors::{
    audit_selection_rule, compare_single_frequency_aggregate, compute_chi, compute_chi_exact, AggregateComparison,
    SelectionAudit,
};
use selfrepel::{Error, SpectralModel64};

use crate::config::ExperimentConfig;
use crate::output::{num, OutputDir};
use crate::ConvergenceFailure;

const TOL: f64 = 1e-10;

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn bounds_report(model: &SpectralModel64) -> anyhow::Result<BoundsReport<f64>> {
    Ok(BoundsReport::new(model, &compute_chi(model)?)?)
}

// ---------------------------------------------------------------- tensors

#[derive(Serialize)]
struct PrintedEntries {
    cos4: f64,
    cos4_closed_form: f64,
    cos2_sin2: f64,
    cos2_sin2_closed_form: f64,
}

#[derive(Serialize)]
struct TensorSummary {
    circumference_param: f64,
    frequencies: Vec<u32>,
    chi_norm: f64,
    chi_tilde_norm: f64,
    chi_norm_exact: f64,
    chi_tilde_norm_exact: f64,
    max_entry_gap: f64,
    selection_rule: SelectionAudit,
    printed_entries: Option<PrintedEntries>,
    aggregate: Option<AggregateComparison<f64>>,
}

pub fn tensors(cfg: &ExperimentConfig, out: &OutputDir) -> anyhow::Result<()> {
    let m = cfg.model();
    let q = compute_chi(&m)?;
    let e = compute_chi_exact(&m);
    let unit = 1.0 / (4.0 * PI * m.circumference_param);
    let threshold = 1e-12 * unit;
    let audit = audit_selection_rule(&m, &q, threshold);
    let d = m.dim();
    let label = |i: usize| format!("{}{}", m.basis[i].kind.label(), m.basis[i].frequency);
    let mut rows = Vec::new();
    let mut gap = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let f = q.flat_index(i, j, k, l);
                    gap = gap
                        .max((q.chi_entries[f] - e.chi_entries[f]).abs())
                        .max((q.chi_tilde_entries[f] - e.chi_tilde_entries[f]).abs());
                    if q.chi_entries[f].abs() < threshold && q.chi_tilde_entries[f].abs() < threshold {
                        continue;
                    }
                    rows.push(vec![
                        i.to_string(),
                        j.to_string(),
                        k.to_string(),
                        l.to_string(),
                        format!("{} {} {} {}", label(i), label(j), label(k), label(l)),
                        num(q.chi_entries[f]),
                        num(q.chi_tilde_entries[f]),
                        num(e.chi_entries[f]),
                        num(e.chi_tilde_entries[f]),
                    ]);
                }
            }
        }
    }
    if cfg.wants("csv") {
        out.write_csv(
            "chi_entries.csv",
            &["i", "j", "k", "l", "members", "chi", "chi_tilde", "chi_exact", "chi_tilde_exact"],
            &rows,
        )?;
    }
    let single = m.n_frequencies() == 1;
    let summary = TensorSummary {
        circumference_param: m.circumference_param,
        frequencies: m.frequencies.clone(),
        chi_norm: q.chi,
        chi_tilde_norm: q.chi_tilde,
        chi_norm_exact: e.chi,
        chi_tilde_norm_exact: e.chi_tilde,
        max_entry_gap: gap,
        selection_rule: audit,
        printed_entries: single.then(|| PrintedEntries {
            cos4: q.chi_at(0, 0, 0, 0),
            cos4_closed_form: 3.0 * unit,
            cos2_sin2: q.chi_at(0, 0, 1, 1),
            cos2_sin2_closed_form: unit,
        }),
        aggregate: if single {
            Some(compare_single_frequency_aggregate(&m, &q)?)
        } else {
            None
        },
    };
    if cfg.wants("json") {
        out.write_json("chi_summary.json", &summary)?;
    }
    out.log(&format!("tensors: {} entries written, max entry gap {gap:.3e}", rows.len()))?;
    Ok(())
}

// ---------------------------------------------------------------- bounds

#[derive(Serialize)]
struct SweepPoint {
    sigma: f64,
    nu_per_frequency: f64,
    nu_per_basis_member: f64,
    upper_bound_trel: f64,
    upper_shape: f64,
    comparison_bound: f64,
}

#[derive(Serialize)]
struct ProxyPoint {
    circumference_param: f64,
    /// `sqrt((L + L³)/min a)`
    proxy: f64,
    upper_shape_at_sigma_star: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct BoundsFile {
    report: BoundsReport<f64>,
    horizon: f64,
    c_universal: f64,
    sigma_sweep: Vec<SweepPoint>,
    comparison_minimized: f64,
    comparison_minimizing_sigma: f64,
    proxy_trend: Vec<ProxyPoint>,
}

fn sigmas_with_star(cfg: &ExperimentConfig, report: &BoundsReport<f64>) -> Vec<f64> {
    let mut s = cfg.sigma_grid.clone();
    if cfg.include_sigma_star {
        s.push(report.sigma_star(SumConvention::PerFrequency));
    }
    s
}

pub fn bounds(cfg: &ExperimentConfig, out: &OutputDir) -> anyhow::Result<()> {
    let m = cfg.model();
    let report = bounds_report(&m)?;
    let c = cfg.c_universal;
    let horizon = report.default_horizon();
    let nu = |conv, s: f64| report.rate_nu(conv, s, horizon, c).unwrap_or(f64::NAN);
    let sigma_sweep = sigmas_with_star(cfg, &report)
        .into_iter()
        .map(|s| SweepPoint {
            sigma: s,
            nu_per_frequency: nu(SumConvention::PerFrequency, s),
            nu_per_basis_member: nu(SumConvention::PerBasisMember, s),
            upper_bound_trel: report
                .upper_bound_trel(SumConvention::PerFrequency, s, horizon, c)
                .unwrap_or(f64::INFINITY),
            upper_shape: report.upper_bound_shape(SumConvention::PerFrequency, s),
            comparison_bound: comparison_bound(&m, s, c).unwrap_or(f64::NAN),
        })
        .collect();
    let (cmin, cs2) = comparison_bound_minimized(&m, c).unwrap_or((f64::NAN, f64::NAN));
    let a_min = m.frequency_coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    let mut proxy_trend = Vec::new();
    for i in -2..=4 {
        let l = 2f64.powi(i);
        let r = bounds_report(&cfg.model_at(l))?;
        let shape = r.convention(SumConvention::PerFrequency).upper_shape_at_sigma_star;
        let proxy = ((l + l.powi(3)) / a_min).sqrt();
        proxy_trend.push(ProxyPoint {
            circumference_param: l,
            proxy,
            upper_shape_at_sigma_star: shape,
            ratio: shape / proxy,
        });
    }
    let file = BoundsFile {
        report,
        horizon,
        c_universal: c,
        sigma_sweep,
        comparison_minimized: cmin,
        comparison_minimizing_sigma: cs2.sqrt(),
        proxy_trend,
    };
    if cfg.wants("json") {
        out.write_json("bounds.json", &file)?;
    }
    if cfg.wants("csv") {
        let rows: Vec<Vec<String>> = file
            .sigma_sweep
            .iter()
            .map(|p| {
                vec![
                    num(p.sigma),
                    num(p.nu_per_frequency),
                    num(p.nu_per_basis_member),
                    num(p.upper_bound_trel),
                    num(p.upper_shape),
                    num(p.comparison_bound),
                ]
            })
            .collect();
        out.write_csv(
            "bounds_sweep.csv",
            &[
                "sigma",
                "nu_per_frequency",
                "nu_per_basis_member",
                "upper_bound_trel",
                "upper_shape",
                "comparison_bound",
            ],
            &rows,
        )?;
    }
    out.log("bounds: written")?;
    Ok(())
}

// ---------------------------------------------------------------- simulate

fn simulate_one(cfg: &ExperimentConfig, model: &SpectralModel64, sigma: f64) -> anyhow::Result<Vec<Vec<String>>> {
    let icfg = IntegratorConfig {
        dt: cfg.integrator.dt,
        scheme: cfg.integrator.scheme,
        seed: cfg.integrator.seed,
        sigma,
    };
    let law = model.invariant_law()?;
    let n = cfg.integrator.n_trajectories;
    let ends = stationary_endpoints(model, &icfg, n, cfg.integrator.n_steps)?;
    let bins = 32;
    let mut stats = EnsembleStats::new(model.dim(), bins, law.uniform_mass);
    for s in &ends {
        stats.push(s);
    }
    // endpoints of independent runs are independent draws
    let n_eff = n as f64;
    let (ks_u, kuiper_x, ks_crit, kuiper_crit, status) = match ks_circular_and_gaussian(&ends, &law, n_eff) {
        Ok(r) => (r.ks_u, r.kuiper_x, r.ks_critical, r.kuiper_critical, 1.0),
        Err(Error::InsufficientSamples { got, required }) => {
            eprintln!(
                "warning: σ={sigma}: {got:.0} effective samples < {required:.0}; distances reported but not judged"
            );
            let ks: Vec<f64> = (0..model.dim())
                .map(|j| {
                    let col: Vec<f64> = ends.iter().map(|s| s.u[j]).collect();
                    ks_gaussian(&col, law.gaussian_variances[j])
                })
                .collect();
            let xs: Vec<f64> = ends.iter().map(|s| s.x).collect();
            (ks, kuiper_uniform(&xs, law.uniform_mass), ks_critical_1pct(n), kuiper_critical_1pct(n), 0.0)
        }
        Err(e) => return Err(e.into()),
    };

    // one separate stationary run for the autocorrelation of u_1
    let mut rng = trajectory_rng(icfg.seed, u64::MAX);
    let start = sample_invariant(model, &mut rng)?;
    let mut series = Vec::with_capacity(cfg.integrator.n_steps);
    run(model, start, &icfg, cfg.integrator.n_steps, &mut rng, |_, s| series.push(s.u[0]));
    let lags = [1usize, 10, 100, 1000];
    let rho = autocorrelation(&series, *lags.iter().max().unwrap());
    let iat = integrated_autocorr_time(&series) * icfg.dt;

    let s = num(sigma);
    let row = |q: &str, c: String, v: f64, r: Option<f64>| {
        vec![s.clone(), q.to_string(), c, num(v), r.map(num).unwrap_or_default()]
    };
    let mut rows = vec![
        row("n_samples", String::new(), n as f64, None),
        row("n_effective", String::new(), n_eff, Some(selfrepel::simulate::MIN_EFFECTIVE_SAMPLES)),
        row("distance_judged", String::new(), status, None),
    ];
    let var = stats.variances();
    for j in 0..model.dim() {
        rows.push(row("mean_u", j.to_string(), stats.mean[j], Some(0.0)));
        rows.push(row("var_u", j.to_string(), var[j], Some(law.gaussian_variances[j])));
        rows.push(row("ks_u", j.to_string(), ks_u[j], Some(ks_crit)));
    }
    rows.push(row("kuiper_x", String::new(), kuiper_x, Some(kuiper_crit)));
    for (b, mass) in stats.histogram_mass().iter().enumerate() {
        rows.push(row("hist_x", b.to_string(), *mass, Some(1.0 / bins as f64)));
    }
    for &lag in &lags {
        if let Some(r) = rho.get(lag) {
            rows.push(row("autocorr_u0", num(lag as f64 * icfg.dt), *r, None));
        }
    }
    rows.push(row("iat_u0_time", String::new(), iat, None));
    Ok(rows)
}

pub fn simulate(cfg: &ExperimentConfig, out: &OutputDir) -> anyhow::Result<()> {
    let m = cfg.model();
    for &sigma in &cfg.sigma_grid {
        let icfg = IntegratorConfig {
            dt: cfg.integrator.dt,
            scheme: cfg.integrator.scheme,
            seed: cfg.integrator.seed,
            sigma,
        };
        for w in icfg.validate(&m)? {
            eprintln!("warning: σ={sigma}: {w}");
            out.log(&format!("simulate warning σ={sigma}: {w}"))?;
        }
        if sigma == 0.0 {
            let w = "σ = 0: the invariant law is possibly not unique; stationarity is tested, ergodicity is not";
            eprintln!("warning: {w}");
            out.log(&format!("simulate warning: {w}"))?;
        }
    }
    let per_sigma: Vec<anyhow::Result<Vec<Vec<String>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .sigma_grid
            .iter()
            .map(|&sigma| {
                let m = &m;
                s.spawn(move || simulate_one(cfg, m, sigma))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut rows = Vec::new();
    for r in per_sigma {
        rows.extend(r?);
    }
    out.write_csv("stats.csv", &["sigma", "quantity", "component", "value", "reference"], &rows)?;
    out.log(&format!("simulate: {} σ values", cfg.sigma_grid.len()))?;
    Ok(())
}

// ---------------------------------------------------------------- galerkin

struct Measured {
    l: f64,
    sigma: f64,
    sigma_is_star: bool,
    result: Result<ConvergedTrel, Error>,
    abscissa: f64,
    bounds: BoundsReport<f64>,
}

impl Measured {
    fn converged(&self) -> bool {
        matches!(&self.result, Ok(r) if r.converged)
    }

    fn t_rel(&self) -> f64 {
        self.result.as_ref().map(|r| r.t_rel()).unwrap_or(f64::INFINITY)
    }
}

fn measure_grid(cfg: &ExperimentConfig, with_abscissa: bool) -> anyhow::Result<Vec<Measured>> {
    let mut points = Vec::new();
    for l in cfg.l_values() {
        let model = cfg.model_at(l);
        let bounds = bounds_report(&model)?;
        for &s in &cfg.sigma_grid {
            points.push((l, s, false, bounds.clone()));
        }
        if cfg.include_sigma_star {
            points.push((l, bounds.sigma_star(SumConvention::PerFrequency), true, bounds.clone()));
        }
    }
    let opts = TrelOptions::default();
    let start = cfg.truncation();
    let limit = cfg.truncation.refine_limit;
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .into_iter()
            .map(|(l, sigma, star, bounds)| {
                s.spawn(move || {
                    let model = cfg.model_at(l);
                    let result = refine_until_converged(&model, start, limit, sigma, &opts);
                    let abscissa = match (&result, with_abscissa) {
                        (Ok(r), true) => build_operator(&model, r.fine.truncation, sigma)
                            .and_then(|op| spectral_abscissa(&model, &op))
                            .unwrap_or(f64::NAN),
                        _ => f64::NAN,
                    };
                    Measured {
                        l,
                        sigma,
                        sigma_is_star: star,
                        result,
                        abscissa,
                        bounds,
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    Ok(rows)
}

#[derive(Serialize)]
struct Check {
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn check(value: f64, tolerance: f64) -> Check {
    Check {
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

#[derive(Serialize)]
struct VerificationReport {
    truncation: Truncation,
    antisymmetry: Check,
    constant_leak: Check,
    quadrature_assembly: Check,
    lift_first_sigma0: Check,
    lift_second_sigma0: Check,
    lift_first_sigma1: Check,
    lift_second_sigma1: Check,
    bochner: Check,
    drift_lemma_violations: usize,
    drift_lemma_min_slack: f64,
    lstar_l: Check,
    collapse_spectrum: Check,
    all_pass: bool,
    scaling_slope_at_sigma_star: Option<f64>,
}

fn verification(cfg: &ExperimentConfig, rows: &[Measured]) -> anyhow::Result<VerificationReport> {
    let m = cfg.model();
    let kmax = m.max_frequency();
    let trunc = Truncation::new(6, 2 * kmax);
    let op0 = build_operator(&m, trunc, 0.0)?;
    let op1 = op0.with_sigma(1.0);
    let lift0 = verify_lift_conditions(&m, &op0)?;
    let lift1 = verify_lift_conditions(&m, &op1)?;
    let bochner = verify_bochner(&m, 4, 100, cfg.integrator.seed)?;
    let drift = verify_drift_lemma(&m, 4, 100, cfg.integrator.seed)?;
    let lstar = verify_lstar_l(&m, &op0, 3, 100, cfg.integrator.seed)?;
    let collapse = {
        let c = collapse_matrix(&build_operator(&m, Truncation::new(1, kmax), 0.0)?);
        // degree-1 rows are 1..=d in the multi-index ordering
        let d = m.dim();
        let block = c.view((1, 1), (d, d)).into_owned();
        let mut got: Vec<f64> = block.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = (0..d).map(|j| -m.stiffness(j) / (2.0 * m.total_volume())).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let stars: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sigma_is_star && r.converged())
        .map(|r| (r.l.ln(), r.t_rel().ln()))
        .collect();
    let slope = (stars.len() >= 2).then(|| {
        let n = stars.len() as f64;
        let mx = stars.iter().map(|p| p.0).sum::<f64>() / n;
        let my = stars.iter().map(|p| p.1).sum::<f64>() / n;
        stars.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / stars.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    });
    let mut r = VerificationReport {
        truncation: trunc,
        antisymmetry: check(op1.antisymmetry_defect(), TOL),
        constant_leak: check(op1.constant_leak(), TOL),
        quadrature_assembly: check(quadrature_cross_check(&m, &op1)?, TOL),
        lift_first_sigma0: check(lift0.first_residual, TOL),
        lift_second_sigma0: check(lift0.second_residual, TOL),
        lift_first_sigma1: check(lift1.first_residual, TOL),
        lift_second_sigma1: check(lift1.second_residual, TOL),
        bochner: check(bochner.max_residual, TOL),
        drift_lemma_violations: drift.violations,
        drift_lemma_min_slack: drift.min_slack,
        lstar_l: check(lstar.max_residual, TOL),
        collapse_spectrum: check(collapse, TOL),
        all_pass: false,
        scaling_slope_at_sigma_star: slope,
    };
    r.all_pass = [
        &r.antisymmetry,
        &r.constant_leak,
        &r.quadrature_assembly,
        &r.lift_first_sigma0,
        &r.lift_second_sigma0,
        &r.lift_first_sigma1,
        &r.lift_second_sigma1,
        &r.bochner,
        &r.lstar_l,
        &r.collapse_spectrum,
    ]
    .iter()
    .all(|c| c.pass)
        && r.drift_lemma_violations == 0;
    Ok(r)
}

fn convergence_outcome(rows: &[Measured]) -> anyhow::Result<()> {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged())
        .map(|r| match &r.result {
            Ok(c) => format!("L={} σ={}: Δ={:.4}", r.l, r.sigma, c.rel_delta),
            Err(e) => format!("L={} σ={}: {e}", r.l, r.sigma),
        })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(ConvergenceFailure(format!("truncation not converged at {}", bad.join(", "))).into())
    }
}

pub fn galerkin(cfg: &ExperimentConfig, out: &OutputDir) -> anyhow::Result<()> {
    let rows = measure_grid(cfg, true)?;
    let conv = SumConvention::PerFrequency;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (d, j, size, delta) = match &r.result {
                Ok(c) => (
                    c.fine.truncation.max_degree.to_string(),
                    c.fine.truncation.max_fourier.to_string(),
                    c.fine.basis_size.to_string(),
                    num(c.rel_delta),
                ),
                Err(_) => (String::new(), String::new(), String::new(), String::new()),
            };
            let horizon = r.bounds.default_horizon();
            let nu = r.bounds.rate_nu(conv, r.sigma, horizon, cfg.c_universal).unwrap_or(0.0);
            vec![
                num(r.l),
                join(&cfg.model.coefficients),
                join(&cfg.model.frequencies),
                num(r.sigma),
                (r.sigma_is_star as u8).to_string(),
                d,
                j,
                size,
                num(r.t_rel()),
                num(r.abscissa),
                num(r.bounds.t_rel_lower),
                num(1.0 / nu),
                delta,
                (r.converged() as u8).to_string(),
                ((r.t_rel() >= r.bounds.t_rel_lower) as u8).to_string(),
            ]
        })
        .collect();
    if cfg.wants("csv") {
        out.write_csv(
            "trel_sweep.csv",
            &[
                "L",
                "a",
                "k",
                "sigma",
                "sigma_is_star",
                "D",
                "J",
                "basis_size",
                "t_rel",
                "abscissa",
                "lower_bound",
                "nu_inverse",
                "rel_delta",
                "converged",
                "above_lower_bound",
            ],
            &csv_rows,
        )?;
    }
    let report = verification(cfg, &rows)?;
    let all_pass = report.all_pass;
    if cfg.wants("json") {
        out.write_json("verification.json", &report)?;
    }
    out.log(&format!("galerkin: {} grid points, verification all_pass={all_pass}", rows.len()))?;
    if !all_pass {
        anyhow::bail!("structural verification failed; see verification.json");
    }
    convergence_outcome(&rows)
}

// ---------------------------------------------------------------- compare

pub fn compare(cfg: &ExperimentConfig, out: &OutputDir) -> anyhow::Result<()> {
    let rows = measure_grid(cfg, false)?;
    let conv = SumConvention::PerFrequency;
    let c = cfg.c_universal;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let model = cfg.model_at(r.l);
            let horizon = r.bounds.default_horizon();
            let shape = r.bounds.upper_bound_shape(conv, r.sigma);
            let t = r.t_rel();
            vec![
                num(r.l),
                num(r.sigma),
                (r.sigma_is_star as u8).to_string(),
                num(r.bounds.t_rel_lower),
                num(t),
                (r.converged() as u8).to_string(),
                num(shape),
                num(r.bounds.upper_bound_trel(conv, r.sigma, horizon, c).unwrap_or(f64::INFINITY)),
                num(comparison_bound(&model, r.sigma, c).unwrap_or(f64::NAN)),
                num(t / shape),
            ]
        })
        .collect();
    out.write_csv(
        "compare.csv",
        &[
            "L",
            "sigma",
            "sigma_is_star",
            "t_rel_lower",
            "t_rel_measured",
            "converged",
            "upper_shape",
            "upper_bound_trel",
            "comparison_bound",
            "measured_over_shape",
        ],
        &csv_rows,
    )
    .context("writing compare.csv")?;
    out.log(&format!("compare: {} grid points", rows.len()))?;
    convergence_outcome(&rows)
}
