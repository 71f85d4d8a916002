//! One function per subcommand. Each writes its artifacts and returns the
//! summary lines printed to stdout.

use serde::Serialize;
use std::f64::consts::PI;
use transportlab::conditions::{self, Generators};
use transportlab::fields::{covariance_closed_form, structural_checks, ModelKind, VelocityModel};
use transportlab::lyapunov::{self, Lambda1Params, LyapunovEstimate, MomentParams};
use transportlab::mixing::{self, CorrelationParams, Observable, PairingParams, ScalarInit, TwoPointParams};
use transportlab::noise::derive_seed;
use transportlab::spectral::{self, SpdeParams, SpectralField, SweepParams};
use transportlab::stats::{DecaySeries, Moments};
use transportlab::fmt_f64 as f;

use crate::config::ExperimentConfig;
use crate::{Artifacts, CliError, Command};

pub fn dispatch(cmd: Command, cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let model = cfg.field.build()?;
    match cmd {
        Command::FieldsCheck => fields_check(cfg, &model, art),
        Command::Conditions => conditions_cmd(cfg, &model, art),
        Command::Lyapunov => lyapunov_cmd(cfg, &model, art),
        Command::MomentLyapunov => moment_lyapunov(cfg, &model, art),
        Command::TwoPoint => two_point(cfg, &model, art),
        Command::Correlation => correlation(cfg, &model, art),
        Command::Mixing => mixing_cmd(cfg, &model, art),
        Command::Spde => spde(cfg, &model, art),
        Command::Sweep => sweep(cfg, &model, art),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Fit result in time units.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub rate: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    pub rate_se: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub note: Option<String>,
}

impl FitSummary {
    pub fn of(s: &DecaySeries) -> Self {
        match &s.fit {
            Some(fit) => FitSummary {
                rate: Some(fit.rate),
                intercept: Some(fit.intercept),
                r2: Some(fit.r2),
                rate_se: fit.rate_se,
                window: Some([s.times[fit.window.0], s.times[fit.window.1 - 1]]),
                note: s.note.clone(),
            },
            None => FitSummary {
                rate: None,
                intercept: None,
                r2: None,
                rate_se: None,
                window: None,
                note: s.note.clone(),
            },
        }
    }

    fn line(&self, label: &str) -> String {
        match (self.rate, self.r2, self.window) {
            (Some(r), Some(r2), Some([a, b])) => {
                format!("{label}: rate {r:.6} R² {r2:.4} window [{a}, {b}]")
            }
            _ => format!("{label}: no fit ({})", self.note.as_deref().unwrap_or("unknown")),
        }
    }
}

fn fit(cfg: &ExperimentConfig, s: DecaySeries) -> DecaySeries {
    match cfg.diagnostics.fit_window {
        Some([a, b]) => s.fit_time_window(a, b),
        None => s.fit_auto(cfg.diagnostics.fit_t_min, cfg.diagnostics.noise_factor),
    }
}

fn coords(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| f(x)).collect()
}

fn numbered(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Serialize)]
struct CheckSummary {
    check: String,
    n: usize,
    min: f64,
    max: f64,
    threshold: f64,
    pass: bool,
}

const COVARIANCE_TOLERANCE: f64 = 1e-12;
const COVARIANCE_PAIRS: u64 = 100;

fn fields_check(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let d = model.dim();
    let report = structural_checks(model, cfg.diagnostics.samples, cfg.seed());
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for r in [&report.divergence, &report.self_advection] {
        for (i, rec) in r.records.iter().enumerate() {
            let mut row = vec![r.check.clone(), i.to_string()];
            row.extend(coords(&rec.points[0]));
            row.extend(std::iter::repeat(String::new()).take(d));
            row.extend([f(rec.value), f(rec.threshold), rec.ok.to_string()]);
            rows.push(row);
        }
        summaries.push(CheckSummary {
            check: r.check.clone(),
            n: r.records.len(),
            min: r.min,
            max: r.max,
            threshold: transportlab::fields::IDENTITY_TOLERANCE,
            pass: r.pass,
        });
    }
    if let ModelKind::KraichnanTorus { d, alpha, zmax } = model.kind() {
        let seed = derive_seed(cfg.seed(), 0xC0F, 0);
        let mut worst: f64 = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..COVARIANCE_PAIRS {
            let x = conditions::sample_point(seed, 2 * i, *d);
            let y = conditions::sample_point(seed, 2 * i + 1, *d);
            let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let gap = (model.covariance(&x, &y) - covariance_closed_form(*d, *alpha, *zmax, &r)).amax();
            worst = worst.max(gap);
            best = best.min(gap);
            let mut row = vec!["covariance".to_string(), i.to_string()];
            row.extend(coords(&x));
            row.extend(coords(&y));
            row.extend([f(gap), f(COVARIANCE_TOLERANCE), (gap <= COVARIANCE_TOLERANCE).to_string()]);
            rows.push(row);
        }
        summaries.push(CheckSummary {
            check: "covariance".into(),
            n: COVARIANCE_PAIRS as usize,
            min: best,
            max: worst,
            threshold: COVARIANCE_TOLERANCE,
            pass: worst <= COVARIANCE_TOLERANCE,
        });
    }
    let mut header = vec!["check".to_string(), "index".to_string()];
    header.extend(numbered("x", d));
    header.extend(numbered("y", d));
    header.extend(["value", "threshold", "ok"].map(String::from));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    art.csv("fields-check.csv", &header, &rows)?;
    let pass = summaries.iter().all(|s| s.pass);
    art.json(
        "fields-check.json",
        &serde_json::json!({
            "pass": pass,
            "checks": summaries,
            "shells": report.shells,
            "shell_slope": report.shell_slope,
            "tail_bound": report.tail_bound,
        }),
    )?;
    let mut lines: Vec<String> = summaries
        .iter()
        .map(|s| format!("{} {} (max {:.3e}, threshold {:.0e}, {} samples)", verdict(s.pass), s.check, s.max, s.threshold, s.n))
        .collect();
    lines.push(format!("{} fields-check", verdict(pass)));
    Ok(lines)
}

/// Ellipticity values at or below this count as degenerate.
pub const ELLIPTICITY_FLOOR: f64 = 1e-10;

struct ConditionRow {
    condition: &'static str,
    x: Vec<f64>,
    y: Vec<f64>,
    value: f64,
    threshold: f64,
    ok: bool,
}

fn conditions_cmd(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let d = model.dim();
    let n = cfg.diagnostics.samples as u64;
    let seed = cfg.seed();
    let pts = derive_seed(seed, 0xC04D, 0);
    let dirs = derive_seed(seed, 0xC04D, 1);
    let mut recs: Vec<ConditionRow> = Vec::new();
    for i in 0..n {
        let x = conditions::sample_point(pts, 2 * i, d);
        let y = conditions::sample_point(pts, 2 * i + 1, d);
        let v = conditions::sample_direction(dirs, i, d);
        let a = conditions::check_span_a(model, &x)?;
        recs.push(ConditionRow {
            condition: "span",
            x: x.clone(),
            y: vec![],
            value: a.rank as f64,
            threshold: d as f64,
            ok: a.rank == d,
        });
        let e = conditions::two_point_ellipticity(model, &x, &y)?;
        recs.push(ConditionRow {
            condition: "two-point-ellipticity",
            x: x.clone(),
            y: y.clone(),
            value: e,
            threshold: ELLIPTICITY_FLOOR,
            ok: e > ELLIPTICITY_FLOOR,
        });
        let t = conditions::tangent_ellipticity(model, &x, &v)?;
        recs.push(ConditionRow {
            condition: "tangent-ellipticity",
            x: x.clone(),
            y: v,
            value: t,
            threshold: ELLIPTICITY_FLOOR,
            ok: t > ELLIPTICITY_FLOOR,
        });
        let h = conditions::two_point_span(model, &x, &y, Generators::FieldsAndBrackets)?;
        recs.push(ConditionRow {
            condition: "two-point-hormander",
            x,
            y,
            value: h.rank as f64,
            threshold: (2 * d) as f64,
            ok: h.rank == 2 * d,
        });
    }
    if matches!(model.kind(), ModelKind::BaxendaleRozovskii) {
        // the raw fields lose rank where x - y ∈ πZ²; the brackets restore it off the diagonal
        let x = vec![0.0, 0.0];
        let y = vec![PI, PI];
        let raw = conditions::two_point_span(model, &x, &y, Generators::RawFields)?;
        recs.push(ConditionRow {
            condition: "raw-span-at-degenerate-pair",
            x: x.clone(),
            y: y.clone(),
            value: raw.rank as f64,
            threshold: 2.0,
            ok: raw.rank == 2,
        });
        let diag = conditions::two_point_span(model, &x, &x, Generators::FieldsAndBrackets)?;
        recs.push(ConditionRow {
            condition: "bracket-span-on-diagonal",
            x: x.clone(),
            y: x,
            value: diag.rank as f64,
            threshold: 4.0,
            ok: diag.rank < 4,
        });
    }
    let mut header = vec!["condition".to_string(), "index".to_string()];
    header.extend(numbered("x", d));
    header.extend(numbered("y", d));
    header.extend(["value", "threshold", "ok"].map(String::from));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut counters: Vec<(&'static str, usize)> = Vec::new();
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            let idx = match counters.iter_mut().find(|(c, _)| *c == r.condition) {
                Some((_, k)) => {
                    *k += 1;
                    *k - 1
                }
                None => {
                    counters.push((r.condition, 1));
                    0
                }
            };
            let mut row = vec![r.condition.to_string(), idx.to_string()];
            row.extend(coords(&r.x));
            let mut y = coords(&r.y);
            y.resize(d, String::new());
            row.extend(y);
            row.extend([f(r.value), f(r.threshold), r.ok.to_string()]);
            row
        })
        .collect();
    art.csv("conditions.csv", &header, &rows)?;
    let mut summaries = Vec::new();
    for (name, _) in &counters {
        let group: Vec<&ConditionRow> = recs.iter().filter(|r| r.condition == *name).collect();
        summaries.push(CheckSummary {
            check: name.to_string(),
            n: group.len(),
            min: group.iter().map(|r| r.value).fold(f64::INFINITY, f64::min),
            max: group.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max),
            threshold: group[0].threshold,
            pass: group.iter().all(|r| r.ok),
        });
    }
    art.json("conditions.json", &serde_json::json!({ "conditions": summaries }))?;
    Ok(summaries
        .iter()
        .map(|s| format!("{} {} (min {:.3e}, max {:.3e}, {} records)", verdict(s.pass), s.check, s.min, s.max, s.n))
        .collect())
}

fn lyapunov_cmd(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let mut p = Lambda1Params::new(
        cfg.dynamics.amplitude,
        cfg.t_end(),
        cfg.dt(),
        cfg.ensemble.realizations,
        cfg.seed(),
    );
    p.qr_every = cfg.diagnostics.qr_every;
    let est = lyapunov::estimate_lambda1(model, &p)?;
    let rows: Vec<Vec<String>> = est
        .finite_time
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), f(*v)])
        .collect();
    art.csv("lyapunov.csv", &["realization", "rate"], &rows)?;
    let (lo, hi) = est.ci95();
    art.json(
        "lyapunov.json",
        &serde_json::json!({
            "lambda1": est.lambda1_hat,
            "std_error": est.std_error,
            "ci95": [lo, hi],
            "excludes_zero": est.excludes_zero(),
            "burn_in_drift": est.burn_in_drift,
            "t_end": est.t_end,
            "dt": est.dt,
            "realizations": est.n_realizations,
        }),
    )?;
    Ok(vec![format!(
        "{} lambda1 > 0: {:.6} ± {:.6} (95% CI [{lo:.6}, {hi:.6}])",
        verdict(est.excludes_zero() && est.lambda1_hat > 0.0),
        est.lambda1_hat,
        est.std_error
    )])
}

/// `λ̂₁` from the same tangent samples as a moment curve.
pub fn lambda1_from_samples(curve: &lyapunov::MomentLyapunovCurve, dt: f64) -> LyapunovEstimate {
    let rates: Vec<f64> = curve.log_growth.iter().map(|g| g / curve.t_end).collect();
    let m = Moments::from_slice(&rates);
    LyapunovEstimate {
        lambda1_hat: m.mean,
        std_error: m.std_error(),
        t_end: curve.t_end,
        dt,
        n_realizations: rates.len() as u64,
        finite_time: rates,
        burn_in_drift: 0.0,
    }
}

fn moment_lyapunov(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let params = MomentParams {
        amplitude: cfg.dynamics.amplitude,
        p_grid: cfg.diagnostics.p_grid.clone(),
        t_end: cfg.t_end(),
        dt: cfg.dt(),
        n_samples: cfg.ensemble.particles,
        seed: cfg.seed(),
    };
    let curve = lyapunov::estimate_moment_lyapunov(model, &params)?;
    let rows: Vec<Vec<String>> = (0..curve.p.len())
        .map(|i| {
            vec![
                f(curve.p[i]),
                f(curve.lambda[i]),
                f(curve.std_error[i]),
                f(curve.lambda_half[i]),
                f(curve.max_weight_fraction[i]),
                curve.reliable[i].to_string(),
            ]
        })
        .collect();
    art.csv(
        "moment-lyapunov.csv",
        &["p", "lambda", "stderr", "lambda_half", "max_weight_fraction", "reliable"],
        &rows,
    )?;
    let l1 = lambda1_from_samples(&curve, cfg.dt());
    let p_small = curve
        .p
        .iter()
        .copied()
        .filter(|&p| p > 0.0 && curve.p.iter().any(|&q| q == -p))
        .fold(f64::INFINITY, f64::min);
    let slope = if p_small.is_finite() {
        Some(lyapunov::check_slope_at_zero(&curve, &l1, p_small)?)
    } else {
        None
    };
    let concavity = lyapunov::check_concavity(&curve);
    let jensen = lyapunov::check_jensen(&curve, &l1);
    art.json(
        "moment-lyapunov.json",
        &serde_json::json!({
            "p": curve.p,
            "lambda": curve.lambda,
            "std_error": curve.std_error,
            "reliable": curve.reliable,
            "lambda1_same_samples": l1.lambda1_hat,
            "lambda1_std_error": l1.std_error,
            "slope_at_zero": slope,
            "concavity": concavity,
            "jensen": jensen,
        }),
    )?;
    let mut lines = vec![format!(
        "{} concavity ({} triples)",
        verdict(concavity.iter().all(|c| c.ok)),
        concavity.len()
    )];
    lines.push(format!("{} jensen bound ({} points)", verdict(jensen.iter().all(|j| j.ok)), jensen.len()));
    if let Some(s) = slope {
        lines.push(format!(
            "{} slope at 0: {:.6} vs lambda1 {:.6}",
            verdict(s.pass),
            s.slope,
            s.lambda1
        ));
    }
    Ok(lines)
}

#[derive(Serialize)]
struct SeriesFit {
    p: f64,
    #[serde(flatten)]
    fit: FitSummary,
}

fn two_point(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let d = model.dim();
    if let Some(p) = cfg.diagnostics.p_grid.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(CliError::Config(format!("`diagnostics.p_grid`: two-point moments need p in (0, 1], got {p}")));
    }
    let params = TwoPointParams {
        amplitude: cfg.dynamics.amplitude,
        kappa: cfg.dynamics.kappa,
        x: cfg.require_point("x", &cfg.diagnostics.x, d)?,
        y: cfg.require_point("y", &cfg.diagnostics.y, d)?,
        p_list: cfg.diagnostics.p_grid.clone(),
        t_grid: cfg.t_grid(),
        dt: cfg.dt(),
        n_realizations: cfg.ensemble.realizations,
        seed: cfg.seed(),
        coupling: cfg.diagnostics.coupling,
    };
    let series = mixing::two_point_moments(model, &params)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (p, s) in params.p_list.iter().zip(series) {
        for i in 0..s.times.len() {
            rows.push(vec![f(*p), f(s.times[i]), f(s.values[i]), f(s.std_errors[i])]);
        }
        fits.push(SeriesFit {
            p: *p,
            fit: FitSummary::of(&fit(cfg, s)),
        });
    }
    art.csv("two-point.csv", &["p", "t", "value", "stderr"], &rows)?;
    art.json("two-point.json", &serde_json::json!({ "fits": fits }))?;
    Ok(fits.iter().map(|s| s.fit.line(&format!("p = {}", s.p))).collect())
}

fn series_rows(s: &DecaySeries) -> Vec<Vec<String>> {
    (0..s.times.len())
        .map(|i| vec![f(s.times[i]), f(s.values[i]), f(s.std_errors[i])])
        .collect()
}

fn correlation(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let d = model.dim();
    let params = CorrelationParams {
        amplitude: cfg.dynamics.amplitude,
        kappa: cfg.dynamics.kappa,
        observable: cfg.diagnostics.observable.clone().unwrap_or_else(|| Observable::cos_cos(d)),
        x: cfg.require_point("x", &cfg.diagnostics.x, d)?,
        y: cfg.require_point("y", &cfg.diagnostics.y, d)?,
        t_grid: cfg.t_grid(),
        dt: cfg.dt(),
        n_realizations: cfg.ensemble.realizations,
        seed: cfg.seed(),
    };
    let mut s = mixing::correlation_decay(model, &params, cfg.diagnostics.fit_t_min, cfg.diagnostics.noise_factor)?;
    if let Some([a, b]) = cfg.diagnostics.fit_window {
        s = s.fit_time_window(a, b);
    }
    art.csv("correlation.csv", &["t", "value", "stderr"], &series_rows(&s))?;
    let summary = FitSummary::of(&s);
    art.json("correlation.json", &serde_json::json!({ "fit": summary }))?;
    Ok(vec![summary.line("correlation")])
}

#[derive(Serialize)]
struct SobolevFit {
    s: f64,
    #[serde(flatten)]
    fit: FitSummary,
}

fn mixing_cmd(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let d = model.dim();
    let params = PairingParams {
        amplitude: cfg.dynamics.amplitude,
        kappa: cfg.dynamics.kappa,
        initial: cfg.diagnostics.initial.clone(),
        z_cut: cfg.diagnostics.z_cut,
        t_grid: cfg.t_grid(),
        dt: cfg.dt(),
        quadrature: cfg.diagnostics.quadrature,
        inner_samples: cfg.ensemble.inner_samples,
        realizations: cfg.ensemble.realizations,
        seed: cfg.seed(),
        require_mean_zero: true,
    };
    let series = mixing::mixing_pairing(model, &params)?;
    let mut rows = Vec::new();
    for (r, ps) in series.iter().enumerate() {
        for (ti, t) in ps.times.iter().enumerate() {
            for (z, c) in ps.wavevectors.iter().zip(&ps.coefficients[ti]) {
                let mut row = vec![r.to_string(), f(*t)];
                row.extend(z.iter().map(|v| v.to_string()));
                row.extend([f(c.re), f(c.im)]);
                rows.push(row);
            }
        }
    }
    let mut header = vec!["realization".to_string(), "t".to_string()];
    header.extend(numbered("z", d));
    header.extend(["re", "im"].map(String::from));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    art.csv("mixing_pairings.csv", &header, &rows)?;
    let mut norm_rows = Vec::new();
    let mut fits = Vec::new();
    for &s in &cfg.diagnostics.s_values {
        let dec = fit(cfg, mixing::hminus_decay(&series, s));
        for row in series_rows(&dec) {
            let mut r = vec![f(s)];
            r.extend(row);
            norm_rows.push(r);
        }
        fits.push(SobolevFit {
            s,
            fit: FitSummary::of(&dec),
        });
    }
    art.csv("mixing.csv", &["s", "t", "value", "stderr"], &norm_rows)?;
    let defect = series.iter().map(|p| p.conjugate_defect()).fold(0.0, f64::max);
    art.json(
        "mixing.json",
        &serde_json::json!({ "fits": fits, "conjugate_defect": defect }),
    )?;
    Ok(fits.iter().map(|s| s.fit.line(&format!("H^-{}", s.s))).collect())
}

/// Grid field for the Eulerian solver from a closed-form initial datum.
pub fn initial_field(init: &ScalarInit, n: usize) -> Result<SpectralField, CliError> {
    match init {
        ScalarInit::Modes { terms } => {
            if terms.iter().any(|(_, t)| t.wavevector.len() != 2) {
                return Err(CliError::Invalid("the Eulerian solver needs 2-D initial modes".into()));
            }
            Ok(SpectralField::from_fn(n, |x, y| {
                terms.iter().map(|(c, t)| c * t.eval(&[x, y])).sum()
            })?)
        }
        ScalarInit::Grid { .. } => Err(CliError::Invalid(
            "grid initial data is only accepted by `mixing`; use modes for the Eulerian solver".into(),
        )),
    }
}

fn spde(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let u0 = initial_field(&cfg.diagnostics.initial, cfg.diagnostics.grid)?;
    let params = SpdeParams {
        amplitude: cfg.dynamics.amplitude,
        kappa: cfg.dynamics.kappa,
        c: cfg.dynamics.c,
        dt: cfg.dt(),
        scheme: cfg.dynamics.spde_scheme,
    };
    let run = spectral::run_spde(model, &u0, &params, cfg.t_end(), cfg.seed())?;
    let balance = spectral::energy_balance(&run.history, params.kappa, params.c);
    let every = cfg.steps_every() as usize;
    let last = run.history.len() - 1;
    let rows: Vec<Vec<String>> = run
        .history
        .iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i == last)
        .map(|(i, h)| vec![f(h.t), f(h.l2), f(h.h1), f(h.hminus1), f(balance.relative_residual[i])])
        .collect();
    art.csv("spde.csv", &["t", "L2", "H1", "Hminus1", "residual"], &rows)?;
    let l0 = run.history[0].l2;
    let drift = run
        .history
        .iter()
        .map(|h| (h.l2 / l0 - 1.0).abs())
        .fold(0.0, f64::max);
    art.json(
        "spde.json",
        &serde_json::json!({
            "grid": cfg.diagnostics.grid,
            "steps": last,
            "final_l2": run.history[last].l2,
            "l2_ratio": run.history[last].l2 / l0,
            "max_relative_residual": balance.max_relative,
            "max_l2_drift": drift,
            "mean_abs": run.field.mean().norm(),
            "conjugate_defect": run.field.conjugate_defect(),
        }),
    )?;
    Ok(vec![format!(
        "spde: L2 ratio {:.9}, max relative residual {:.3e}",
        run.history[last].l2 / l0,
        balance.max_relative
    )])
}

#[derive(Serialize)]
struct SweepRow {
    amplitude: f64,
    #[serde(flatten)]
    fit: FitSummary,
}

fn sweep(cfg: &ExperimentConfig, model: &VelocityModel, art: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let u0 = initial_field(&cfg.diagnostics.initial, cfg.diagnostics.grid)?;
    let params = SweepParams {
        amplitudes: cfg.diagnostics.amplitudes.clone(),
        kappa: cfg.dynamics.kappa,
        c: cfg.dynamics.c,
        t_end: cfg.t_end(),
        dt: cfg.dt(),
        n_realizations: cfg.ensemble.realizations,
        seed: cfg.seed(),
        scheme: cfg.dynamics.spde_scheme,
        fit_from: cfg.diagnostics.fit_from.unwrap_or(cfg.t_end() / 2.0),
        record_every: cfg.steps_every(),
    };
    let summary = spectral::enhanced_dissipation_sweep(model, &u0, &params)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for e in &summary.entries {
        for row in series_rows(&e.series) {
            let mut r = vec![f(e.amplitude)];
            r.extend(row);
            rows.push(r);
        }
        entries.push(SweepRow {
            amplitude: e.amplitude,
            fit: FitSummary::of(&e.series),
        });
    }
    art.csv("sweep.csv", &["amplitude", "t", "median_l2", "stderr"], &rows)?;
    art.json(
        "sweep.json",
        &serde_json::json!({
            "entries": entries,
            "monotone": summary.monotone,
            "exponent": summary.exponent,
        }),
    )?;
    let mut lines: Vec<String> = entries.iter().map(|e| e.fit.line(&format!("A = {}", e.amplitude))).collect();
    lines.push(format!(
        "{} monotone in A; exponent {}",
        verdict(summary.monotone),
        summary.exponent.map_or("n/a".into(), |q| format!("{q:.3}"))
    ));
    Ok(lines)
}
