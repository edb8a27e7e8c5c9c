//! The subcommands. Each returns a JSON report and prints a human summary.

use crate::json::{self, complex, real};
use crate::spec::{self, ProblemSpec};
use crate::CliError;
use pencil_transit::oracle::ConvergenceStudy;
use pencil_transit::pcf::{pcf_d, Ray};
use pencil_transit::transition::{reflection_transmission, TPropertyReport};
use pencil_transit::{Analysis, TransitionMatrix2, C64};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

fn checks(report: &TPropertyReport) -> Value {
    let mut m = Map::new();
    for c in &report.checks {
        m.insert(
            c.name.to_string(),
            json!({"passed": c.passed, "value": real(c.value), "tolerance": real(c.tolerance)}),
        );
    }
    Value::Object(m)
}

fn print_matrix(label: &str, t: &TransitionMatrix2) {
    println!("{label} ({}):", t.convention.as_str());
    for row in &t.t {
        println!("  [{:>+.10e} {:>+.10e}i   {:>+.10e} {:>+.10e}i]", row[0].re, row[0].im, row[1].re, row[1].im);
    }
}

fn print_checks(report: &TPropertyReport) {
    for c in &report.checks {
        println!(
            "  {:<12} {}  value {:.3e}  tol {:.1e}",
            c.name,
            if c.passed { "ok  " } else { "FAIL" },
            c.value,
            c.tolerance
        );
    }
}

fn analysis(spec: &ProblemSpec) -> Result<Analysis, CliError> {
    Ok(Analysis::new(&spec.model, spec.options.analysis())?)
}

/// `analyze`: crossing parameters and structural checks.
pub fn analyze(spec: &ProblemSpec) -> Result<(Value, bool), CliError> {
    let a = analysis(spec)?;
    let d = &a.data;
    let (lo, hi) = a.problem.domain();
    println!("model          {}", a.name);
    println!("dimension      {}", a.problem.dim());
    println!("domain         [{lo}, {hi}]");
    println!("scenario       {}", a.scenario().describe());
    println!("x0             {:.12}", d.x0);
    println!("beta0          {:.12}", d.beta0);
    println!("Q              {:.12}", d.q);
    println!("b              {:.12}", d.b);
    println!("p              {:.12}", d.p);
    println!("nu             {:.12}i", d.nu.im);
    println!("sigma          {:.12}", d.sigma);
    println!("theta_a        {:.12}", d.theta_a);
    println!("w              {:+}", d.w);
    println!("N1, N2         {:+.6}, {:+.6}", d.n1, d.n2);
    println!("kappa (tau)    {:.9}, {:.9}", d.kappa_plus, d.kappa_minus);
    let mut kappa_x = Vec::new();
    for &h in &spec.hbar {
        let (kp, km) = a.kappa_x(h);
        println!("kappa (hbar={h:e})  {kp:.9}, {km:.9}");
        kappa_x.push(json!({"hbar": h, "kappa_plus": complex(kp), "kappa_minus": complex(km)}));
    }
    println!("pencil properties:");
    let mut props = Map::new();
    for c in &a.properties.checks {
        println!(
            "  {:<22} {}  value {:.3e}  tol {:.1e}",
            c.name,
            if c.passed { "ok  " } else { "FAIL" },
            c.value,
            c.tolerance
        );
        props.insert(
            c.name.to_string(),
            json!({"passed": c.passed, "value": real(c.value), "tolerance": real(c.tolerance)}),
        );
    }
    let e = &a.elements;
    let tol = 1e-6 * e.kp_scale.max(1e-300);
    println!("matrix elements at x0:");
    println!("  slope identity         {}  residual {:.3e}", if e.slope_residual <= tol { "ok  " } else { "FAIL" }, e.slope_residual);
    println!("  coupling identity      {}  residual {:.3e}", if e.coupling_residual <= tol { "ok  " } else { "FAIL" }, e.coupling_residual);
    println!("  K'_12                  {:.3e}", e.kp[0][1].norm());
    let all = a.properties.all_passed() && e.consistent();
    let report = json!({
        "command": "analyze",
        "model": a.name,
        "dimension": a.problem.dim(),
        "domain": [lo, hi],
        "scenario": a.scenario().describe(),
        "x0": d.x0,
        "beta0": d.beta0,
        "Q": d.q,
        "b": d.b,
        "p": d.p,
        "nu": complex(d.nu),
        "sigma": complex(d.sigma),
        "theta_a": d.theta_a,
        "w": d.w,
        "N": [d.n1, d.n2],
        "kappa_tau": {"plus": complex(d.kappa_plus), "minus": complex(d.kappa_minus)},
        "kappa_x": kappa_x,
        "properties": props,
        "matrix_elements": {
            "slope_residual": real(e.slope_residual),
            "coupling_residual": real(e.coupling_residual),
            "kp12": complex(e.kp[0][1]),
            "kp21": complex(e.kp[1][0]),
            "consistent": e.consistent(),
        },
        "all_passed": all,
    });
    Ok((report, all))
}

/// Flags of `transition`.
#[derive(Debug, Clone)]
pub struct TransitionFlags {
    pub flux_numbering: bool,
    pub general: bool,
    pub x_ref: Option<(f64, f64)>,
    pub hbar: Option<f64>,
}

/// `transition`: canonical, general and renumbered matrices.
pub fn transition(spec: &ProblemSpec, flags: &TransitionFlags) -> Result<Value, CliError> {
    let a = analysis(spec)?;
    let t = a.canonical_T()?;
    let mut report = Map::new();
    report.insert("command".into(), json!("transition"));
    report.insert("model".into(), json!(a.name));
    report.insert("scenario".into(), json!(a.scenario().describe()));
    if a.data.p == 0.0 {
        println!("note: trivial transition (nu = 0)");
        report.insert("note".into(), json!("trivial transition"));
    }
    print_matrix("canonical T", &t);
    let tc = a.check(&t, None);
    print_checks(&tc);
    report.insert("canonical".into(), json::matrix(&t));
    report.insert("canonical_checks".into(), checks(&tc));
    if flags.flux_numbering {
        let r = a.renumbered_T()?;
        print_matrix("renumbered T", &r);
        report.insert("renumbered".into(), json::matrix(&r));
    }
    if flags.general {
        let h = flags
            .hbar
            .or_else(|| spec.hbar.first().copied())
            .ok_or_else(|| CliError::Usage("--modes general needs --hbar or an hbar in the spec".into()))?;
        let (lo, hi) = a.problem.domain();
        let x0 = a.data.x0;
        let xr = flags.x_ref.unwrap_or((0.5 * (lo + x0), 0.5 * (hi + x0)));
        let g = a.general_T(h, xr)?;
        print_matrix(&format!("general T (hbar = {h:e}, x_ref = {}, {})", xr.0, xr.1), &g);
        let gc = a.check(&g, Some(h));
        print_checks(&gc);
        report.insert(
            "general".into(),
            json!({"hbar": h, "x_ref": [xr.0, xr.1], "matrix": json::matrix(&g), "checks": checks(&gc)}),
        );
    }
    if a.data.w == -1 {
        let (r, tr) = reflection_transmission(&t)?;
        println!("R = {r:.12}  |R| = {:.12}", r.norm());
        println!("T = {tr:.12}  |T| = {:.12}", tr.norm());
        report.insert(
            "reflection_transmission".into(),
            json!({"R": complex(r), "T": complex(tr), "abs_R": r.norm(), "abs_T": tr.norm()}),
        );
    } else {
        let c = conversion(&t);
        println!("retained |t11|^2 = {:.12}  converted |t21|^2 = {:.12}", c.0, c.1);
        report.insert("mode_conversion".into(), json!({"retained": c.0, "converted": c.1}));
    }
    report.insert("numbering".into(), json!(if flags.flux_numbering { "flux" } else { "smooth" }));
    Ok(Value::Object(report))
}

/// Flags of `oracle`.
#[derive(Debug, Clone, Default)]
pub struct OracleFlags {
    pub hbar: Vec<f64>,
    pub x0: Option<f64>,
    pub tol: Option<f64>,
    pub csv: Option<PathBuf>,
    pub traces: Option<PathBuf>,
}

/// `(|t11|², |t21|²)`: probabilities of staying on and leaving branch 1.
fn conversion(t: &TransitionMatrix2) -> (f64, f64) {
    (t.t[0][0].norm_sqr(), t.t[1][0].norm_sqr())
}

fn empirical_rt(t: &TransitionMatrix2) -> Option<(C64, C64)> {
    if t.w != -1 || t.t[1][1].norm() == 0.0 {
        return None;
    }
    // measured determinant, not the closed-form value 1
    let g = TransitionMatrix2::new(t.t, pencil_transit::Convention::General, t.nu, t.w);
    reflection_transmission(&g).ok()
}

fn write_table(path: &Path, study: &ConvergenceStudy) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let io = |e| CliError::Io(path.display().to_string(), e);
    writeln!(f, "hbar,x0,abs_t11,abs_t12,abs_t21,abs_t22,d11,d12,d21,d22,diff_norm,flux_drift,residual_1,residual_2").map_err(io)?;
    for r in &study.rows {
        let e = &r.empirical;
        let a = e.matrix.abs();
        let d = r.entry_diff;
        writeln!(
            f,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            e.hbar,
            e.match_distance,
            a[0][0],
            a[0][1],
            a[1][0],
            a[1][1],
            d[0][0],
            d[0][1],
            d[1][0],
            d[1][1],
            r.diff_norm,
            e.max_flux_drift(),
            e.residuals[0],
            e.residuals[1]
        )
        .map_err(io)?;
    }
    Ok(())
}

/// `oracle`: empirical matrices from the direct solver.
pub fn oracle(spec: &ProblemSpec, flags: &OracleFlags) -> Result<Value, CliError> {
    let a = analysis(spec)?;
    let hbars = if flags.hbar.is_empty() { spec.hbar.clone() } else { flags.hbar.clone() };
    if hbars.is_empty() {
        return Err(CliError::Usage("no hbar values (use --hbar or the spec's hbar)".into()));
    }
    let mut opts = spec.options.oracle();
    if let Some(x) = flags.x0 {
        opts.match_distance = Some(x);
    }
    if let Some(t) = flags.tol {
        opts.tol = t;
    }
    opts.keep_traces = flags.traces.is_some();
    let study = a.convergence_study(&hbars, &opts)?;
    let t = a.canonical_T()?;
    print_matrix("asymptotic T", &t);
    println!(
        "{:>10} {:>7} {:>12} {:>12} {:>12} {:>12} {:>11} {:>10} {:>10}",
        "hbar", "X0", "|t11|", "|t12|", "|t21|", "|t22|", "|dT|", "flux", "residual"
    );
    let mut rows = Vec::new();
    for r in &study.rows {
        let e = &r.empirical;
        let m = e.matrix.abs();
        println!(
            "{:>10.3e} {:>7.4} {:>12.9} {:>12.9} {:>12.9} {:>12.9} {:>11.4e} {:>10.2e} {:>10.2e}",
            e.hbar,
            e.match_distance,
            m[0][0],
            m[0][1],
            m[1][0],
            m[1][1],
            r.diff_norm,
            e.max_flux_drift(),
            e.residuals[0].max(e.residuals[1])
        );
        let check = a.check(&e.matrix, Some(e.hbar));
        let mut row = json!({
            "hbar": e.hbar,
            "x0": e.match_distance,
            "empirical": json::matrix(&e.matrix),
            "entry_diff": r.entry_diff,
            "diff_norm": r.diff_norm,
            "flux_drift": e.flux_drift,
            "residuals": e.residuals,
            "steps": [e.stats[0].steps, e.stats[1].steps],
            "rejected": [e.stats[0].rejected, e.stats[1].rejected],
            "checks": checks(&check),
        });
        if let Some((rr, tt)) = empirical_rt(&e.matrix) {
            row["reflection_transmission"] = json!({"R": complex(rr), "T": complex(tt), "abs_R": rr.norm(), "abs_T": tt.norm()});
        } else {
            let c = conversion(&e.matrix);
            row["mode_conversion"] = json!({"retained": c.0, "converted": c.1});
        }
        rows.push(row);
        if let (Some(dir), Some(traces)) = (&flags.traces, &e.traces) {
            std::fs::create_dir_all(dir).map_err(|err| CliError::Io(dir.display().to_string(), err))?;
            for (j, tr) in traces.iter().enumerate() {
                let p = dir.join(format!("trace_hbar{:e}_col{}.csv", e.hbar, j + 1));
                let f = std::fs::File::create(&p).map_err(|err| CliError::Io(p.display().to_string(), err))?;
                tr.write_csv(std::io::BufWriter::new(f)).map_err(|err| CliError::Io(p.display().to_string(), err))?;
            }
        }
    }
    if a.data.w == -1 {
        let (rr, tt) = reflection_transmission(&t)?;
        println!("asymptotic |R| = {:.9}, |T| = {:.9}", rr.norm(), tt.norm());
        for r in &study.rows {
            if let Some((er, et)) = empirical_rt(&r.empirical.matrix) {
                println!("  hbar {:.3e}: empirical |R| = {:.9}, |T| = {:.9}", r.empirical.hbar, er.norm(), et.norm());
            }
        }
    } else {
        let c = conversion(&t);
        println!("asymptotic retained {:.9}, converted {:.9}", c.0, c.1);
        for r in &study.rows {
            let e = conversion(&r.empirical.matrix);
            println!("  hbar {:.3e}: empirical retained {:.9}, converted {:.9}", r.empirical.hbar, e.0, e.1);
        }
    }
    let fit = if hbars.len() >= 3 { study.fitted_order } else { None };
    match fit {
        Some(o) => println!("fitted order {o:.3}{}", if study.monotone { "" } else { " (errors not monotone)" }),
        None => println!("no order fit (needs at least three hbar values above the round-off floor)"),
    }
    if let Some(p) = &flags.csv {
        write_table(p, &study)?;
    }
    let mut report = json!({
        "command": "oracle",
        "model": a.name,
        "asymptotic": json::matrix(&t),
        "rows": rows,
        "monotone": study.monotone,
        "fitted_order": fit.map_or(Value::Null, real),
    });
    if a.data.w == -1 {
        let (rr, tt) = reflection_transmission(&t)?;
        report["asymptotic_reflection_transmission"] = json!({"abs_R": rr.norm(), "abs_T": tt.norm()});
    } else {
        let c = conversion(&t);
        report["asymptotic_mode_conversion"] = json!({"retained": c.0, "converted": c.1});
    }
    Ok(report)
}

/// Parses `0`, `i`, `0.5i`, `-2i`, `0.5j`.
pub fn parse_nu(s: &str) -> Result<C64, CliError> {
    let t = s.trim();
    let err = || CliError::Usage(format!("cannot parse nu = '{s}' (expected a purely imaginary number such as 0.5i)"));
    if t.is_empty() {
        return Err(err());
    }
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        let im = match body {
            "" | "+" => 1.0,
            "-" => -1.0,
            b => b.parse::<f64>().map_err(|_| err())?,
        };
        return if im.is_finite() { Ok(C64::new(0.0, im)) } else { Err(err()) };
    }
    match t.parse::<f64>() {
        Ok(0.0) => Ok(C64::new(0.0, 0.0)),
        _ => Err(err()),
    }
}

pub fn parse_ray(s: &str) -> Result<Ray, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "-45deg" | "-45" | "-pi/4" | "lower" => Ok(Ray::Lower),
        "135deg" | "135" | "3pi/4" | "upper" => Ok(Ray::Upper),
        _ => Err(CliError::Usage(format!("unsupported ray '{s}' (expected -45deg or 135deg)"))),
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let err = || CliError::Usage(format!("cannot parse range '{s}' (expected R or R0:R1 with 0 <= R0 < R1)"));
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.trim().parse::<f64>().map_err(|_| err())?, b.trim().parse::<f64>().map_err(|_| err())?),
        None => (0.0, s.trim().parse::<f64>().map_err(|_| err())?),
    };
    if !(a >= 0.0 && b > a && b.is_finite()) {
        return Err(err());
    }
    Ok((a, b))
}

/// `pcf`: `D_ν` along a ray as CSV.
pub fn pcf<W: Write>(nu: C64, ray: Ray, range: (f64, f64), points: usize, mut out: W) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let io = |e| CliError::Io("output".into(), e);
    writeln!(out, "abs_z,re_d,im_d,regime,est_error").map_err(io)?;
    for k in 0..points {
        let r = range.0 + (range.1 - range.0) * k as f64 / (points - 1) as f64;
        let d = pcf_d(nu, ray.point(r))?;
        writeln!(out, "{r:.17e},{:.17e},{:.17e},{},{:.3e}", d.value.re, d.value.im, d.regime.as_str(), d.est_error).map_err(io)?;
    }
    Ok(())
}

/// `example`: a spec document.
pub fn example(name: &str) -> Result<Value, CliError> {
    spec::example(name).ok_or_else(|| {
        CliError::Usage(format!("unknown example '{name}' (expected one of {})", spec::EXAMPLE_NAMES.join(", ")))
    })
}
