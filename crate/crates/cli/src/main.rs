//! Batch front-end: parse group specs, run inspection, exact identity,
//! simulation, bound-constant and structured-frame workflows, and emit
//! machine-readable reports.
//!
//! Exit codes: 0 all checks pass, 1 check failures, 2 usage or parse errors.

mod spec;

use carnot::bounds::{
    c2_upper_bound, c_nq, estimate_cp, moment_diagnostics, part_b_bound_check, GaussianKernel,
    HeatKernelProvider, HeisenbergKernel,
};
use carnot::connection::{canonical_connection, flat_connection};
use carnot::curvature::{
    conditions_report_points, psi_horizontal_max, psi_map, structured_ricci_row,
    su2su2r_reference,
};
use carnot::diffusion::{Engine, SimSettings};
use carnot::expr::{bounded_suite_dim3, TestFunction};
use carnot::identities::{
    commutation_residual, incompatible_test_connection, metric_torsion_residual,
    weitzenbock_residual,
};
use carnot::poly::{compose_with_dilation, left_invariant_fields, sum_of_squares, Poly};
use carnot::scalar::{rat, Rational};
use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use spec::{parse_spec, BuiltSpec, GroupSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "carnot",
    version,
    about = "Connection calculus and Monte Carlo semigroup checks on sub-Riemannian Lie groups"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a group spec and report the geometric condition checks.
    Inspect {
        spec: PathBuf,
        /// structured frames: base grid start
        #[arg(long, default_value_t = -10.0)]
        grid_lo: f64,
        /// structured frames: base grid end
        #[arg(long, default_value_t = 10.0)]
        grid_hi: f64,
        /// structured frames: number of grid points
        #[arg(long, default_value_t = 81)]
        grid_n: usize,
    },
    /// Run the exact operator-identity suite over random polynomials.
    Identities {
        spec: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// also run a deliberately incompatible connection (expected nonzero)
        #[arg(long)]
        incompatible: bool,
    },
    /// Estimate P_t f and every applicable gradient representation.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        f: String,
        /// base point coordinates, comma separated
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// direction vector, comma separated
        #[arg(long, value_delimiter = ',')]
        v: Option<Vec<f64>>,
        #[arg(long, default_value_t = 200_000)]
        paths: usize,
        #[arg(long, default_value_t = 1.0 / 256.0)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// dump per-path endpoints to CSV
        #[arg(long)]
        dump_csv: Option<PathBuf>,
    },
    /// Estimate the gradient-bound constants and run the bound checks.
    Bounds {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// times for the dilation-invariance cross-check
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        times: Vec<f64>,
        /// write the constants table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate the structured-frame Ricci table against its closed forms.
    Counterexample {
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,-0.5,1,-1,2,-2")]
        c: Vec<f64>,
        #[arg(long, default_value = "arctan")]
        profile: String,
    },
}

fn manifest(
    command: &str,
    spec_path: Option<&PathBuf>,
    spec_text: Option<&str>,
    seed: Option<u64>,
    settings: Value,
) -> Value {
    let hash = spec_text.map(|t| {
        let mut h = Sha256::new();
        h.update(t.as_bytes());
        format!("{:x}", h.finalize())
    });
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "command": command,
        "spec_path": spec_path.map(|p| p.display().to_string()),
        "spec_sha256": hash,
        "seed": seed,
        "settings": settings,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
    })
}

fn load_spec(path: &PathBuf) -> Result<(GroupSpec, String), u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        2u8
    })?;
    match parse_spec(&text) {
        Ok(s) => Ok((s, text)),
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            Err(2)
        }
    }
}

fn emit(report: &Value) {
    println!("{}", serde_json::to_string_pretty(report).expect("serializable"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.cmd {
        Command::Inspect { spec, grid_lo, grid_hi, grid_n } => {
            let (parsed, text) = match load_spec(&spec) {
                Ok(v) => v,
                Err(code) => return Ok(code),
            };
            cmd_inspect(&spec, &parsed, &text, grid_lo, grid_hi, grid_n)
        }
        Command::Identities { spec, trials, degree, seed, incompatible } => {
            let (parsed, text) = match load_spec(&spec) {
                Ok(v) => v,
                Err(code) => return Ok(code),
            };
            cmd_identities(&spec, &parsed, &text, trials, degree, seed, incompatible)
        }
        Command::Simulate { spec, f, x, t, v, paths, step, seed, eps, dump_csv } => {
            let (parsed, text) = match load_spec(&spec) {
                Ok(v) => v,
                Err(code) => return Ok(code),
            };
            cmd_simulate(&spec, &parsed, &text, &f, x, t, v, paths, step, seed, eps, dump_csv)
        }
        Command::Bounds { spec, p, paths, seed, times, csv } => {
            let (parsed, text) = match load_spec(&spec) {
                Ok(v) => v,
                Err(code) => return Ok(code),
            };
            cmd_bounds(&spec, &parsed, &text, &p, paths, seed, &times, csv)
        }
        Command::Counterexample { c, profile } => cmd_counterexample(&c, &profile),
    }
}

fn cmd_inspect(
    path: &PathBuf,
    parsed: &GroupSpec,
    text: &str,
    grid_lo: f64,
    grid_hi: f64,
    grid_n: usize,
) -> Result<u8, Box<dyn std::error::Error>> {
    let settings = json!({"grid_lo": grid_lo, "grid_hi": grid_hi, "grid_n": grid_n});
    let man = manifest("inspect", Some(path), Some(text), None, settings);
    match parsed.build()? {
        BuiltSpec::Invariant { structure, stratification } => {
            let violations = structure.algebra.validate();
            let strat_info = stratification.as_ref().map(|s| {
                let v = s.verify(&structure.algebra);
                json!({
                    "valid": v.is_empty(),
                    "violations": v,
                    "homogeneous_dimension": s.homogeneous_dimension(),
                    "step": s.step(),
                })
            });
            let fp = structure.ortho_frame()?.point;
            let psi = psi_map(&fp);
            let psi_h = psi_horizontal_max(&psi, &fp);
            let report = conditions_report_points(&[fp.clone()], vec![], Some(psi_h), 1e-12);
            let nilpotency = structure.algebra.nilpotency_step().ok();
            let strat_ok = strat_info
                .as_ref()
                .map(|s| s["valid"].as_bool().unwrap_or(false))
                .unwrap_or(true);
            let pass = violations.is_empty() && strat_ok;
            let results = json!({
                "kind": "left-invariant",
                "dim": structure.algebra.dim,
                "rank_h": structure.rank_h(),
                "algebra_valid": violations.is_empty(),
                "algebra_violations": violations,
                "nilpotency_step": nilpotency,
                "stratification": strat_info,
                "conditions": report,
            });
            emit(&json!({"manifest": man, "results": results}));
            Ok(if pass { 0 } else { 1 })
        }
        BuiltSpec::Structured { frame, .. } => {
            let n = grid_n.max(2);
            let grid: Vec<Vec<f64>> = (0..n)
                .map(|i| vec![grid_lo + (grid_hi - grid_lo) * i as f64 / (n - 1) as f64])
                .collect();
            let points: Vec<_> = grid.iter().map(|u| frame.point(u)).collect();
            let jacobi = points.iter().map(|p| p.jacobi_residual()).fold(0.0, f64::max);
            let report = conditions_report_points(&points, grid, None, 1e-9);
            let pass = jacobi < 1e-9;
            let results = json!({
                "kind": "structured",
                "dim": frame.n,
                "frame_jacobi_residual": jacobi,
                "cocurvature_nonzero": report.cocurvature_max > 1e-6,
                "conditions": report,
            });
            emit(&json!({"manifest": man, "results": results}));
            Ok(if pass { 0 } else { 1 })
        }
    }
}

fn random_poly(rng: &mut StdRng, nvars: usize, max_deg: usize) -> Poly<Rational> {
    let mut p = Poly::zero(nvars);
    for _ in 0..8 {
        let mut m = vec![0u16; nvars];
        let mut budget = max_deg;
        for e in m.iter_mut() {
            let d = rng.gen_range(0..=budget.min(3));
            *e = d as u16;
            budget -= d;
        }
        p = p + Poly::monomial(nvars, &m, rat(rng.gen_range(-5..=5), rng.gen_range(1..=3)));
    }
    p
}

fn cmd_identities(
    path: &PathBuf,
    parsed: &GroupSpec,
    text: &str,
    trials: usize,
    degree: usize,
    seed: u64,
    incompatible: bool,
) -> Result<u8, Box<dyn std::error::Error>> {
    let settings = json!({"trials": trials, "degree": degree, "incompatible": incompatible});
    let man = manifest("identities", Some(path), Some(text), Some(seed), settings);
    let BuiltSpec::Invariant { structure, stratification } = parsed.build()? else {
        eprintln!("error: the identity suite needs a left-invariant spec");
        return Ok(2);
    };
    let frame = structure.invariant_frame()?;
    let fp = frame.point().clone();
    let nvars = structure.algebra.dim;
    let mut rng = StdRng::seed_from_u64(seed);
    let polys: Vec<Poly<Rational>> =
        (0..trials.max(1)).map(|_| random_poly(&mut rng, nvars, degree)).collect();

    let mut rows: Vec<Value> = Vec::new();
    let mut all_pass = true;
    let push_row = |rows: &mut Vec<Value>,
                        all_pass: &mut bool,
                        name: &str,
                        conn: &str,
                        max: f64,
                        expect_zero: bool,
                        note: Option<String>| {
        let pass = if expect_zero { max == 0.0 } else { max > 0.0 };
        *all_pass &= pass;
        rows.push(json!({
            "identity": name,
            "connection": conn,
            "trials": trials,
            "max_residual": max,
            "expect_zero": expect_zero,
            "pass": pass,
            "note": note,
        }));
    };

    let mut conns = vec![("flat", flat_connection(&fp))];
    match canonical_connection(&fp, 1e-12) {
        Ok(c) => conns.push(("canonical", c)),
        Err(e) => rows.push(json!({
            "identity": "canonical connection",
            "connection": "canonical",
            "note": format!("not constructible: {e}"),
            "pass": Value::Null,
        })),
    }
    for (name, conn) in &conns {
        let mut worst = 0.0f64;
        for f in &polys {
            worst = worst.max(weitzenbock_residual(&frame, conn, f)?.max_coeff_abs());
        }
        push_row(&mut rows, &mut all_pass, "weitzenbock", name, worst, true, None);
        let mut worst = 0.0f64;
        for f in &polys {
            worst = worst.max(metric_torsion_residual(&frame, conn, f)?.max_coeff_abs());
        }
        push_row(&mut rows, &mut all_pass, "metric-torsion", name, worst, true, None);
    }

    // commutation: run where the hypotheses hold, report the refusal otherwise
    match commutation_residual(&frame, &polys[0]) {
        Ok(_) => {
            let mut worst = 0.0f64;
            for f in &polys {
                worst = worst.max(commutation_residual(&frame, f)?.max_coeff_abs());
            }
            push_row(&mut rows, &mut all_pass, "laplacian-commutation", "-", worst, true, None);
        }
        Err(e) => rows.push(json!({
            "identity": "laplacian-commutation",
            "connection": "-",
            "note": format!("hypotheses not satisfied: {e}"),
            "pass": Value::Null,
        })),
    }

    if let Some(strat) = &stratification {
        let fields = left_invariant_fields(&structure.algebra)?;
        let h_fields: Vec<_> = structure.horizontal.iter().map(|&i| fields[i].clone()).collect();
        let weights = strat.weights(nvars);
        let mut worst_scaling = 0.0f64;
        let mut worst_homog = 0.0f64;
        for f in &polys {
            let s = rat(rng.gen_range(1..=5), rng.gen_range(1..=4));
            let lhs = sum_of_squares(&h_fields, &compose_with_dilation(f, strat, &s))?;
            let rhs = compose_with_dilation(&sum_of_squares(&h_fields, f)?, strat, &s)
                .scale(&(s.clone() * s.clone()));
            worst_scaling = worst_scaling.max((lhs - rhs).max_coeff_abs());
            for (i, field) in fields.iter().enumerate() {
                let mut sj = rat(1, 1);
                for _ in 0..weights[i] {
                    sj = sj * s.clone();
                }
                let lhs = field.apply(&compose_with_dilation(f, strat, &s))?;
                let rhs = compose_with_dilation(&field.apply(f)?, strat, &s).scale(&sj);
                worst_homog = worst_homog.max((lhs - rhs).max_coeff_abs());
            }
        }
        push_row(&mut rows, &mut all_pass, "dilation-scaling", "-", worst_scaling, true, None);
        push_row(&mut rows, &mut all_pass, "layer-homogeneity", "-", worst_homog, true, None);
    }

    if incompatible {
        let bad = incompatible_test_connection(&fp);
        let mut worst = 0.0f64;
        for f in &polys {
            worst = worst.max(weitzenbock_residual(&frame, &bad, f)?.max_coeff_abs());
        }
        push_row(
            &mut rows,
            &mut all_pass,
            "weitzenbock",
            "incompatible (negative control)",
            worst,
            false,
            Some("a nonzero residual is the expected outcome".into()),
        );
    }

    emit(&json!({"manifest": man, "results": {"rows": rows, "all_pass": all_pass}}));
    Ok(if all_pass { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &PathBuf,
    parsed: &GroupSpec,
    text: &str,
    f_src: &str,
    x: Option<Vec<f64>>,
    t: f64,
    v: Option<Vec<f64>>,
    paths: usize,
    step: f64,
    seed: u64,
    eps: f64,
    dump_csv: Option<PathBuf>,
) -> Result<u8, Box<dyn std::error::Error>> {
    let BuiltSpec::Invariant { structure, .. } = parsed.build()? else {
        eprintln!("error: simulation needs a left-invariant spec");
        return Ok(2);
    };
    let engine = Engine::new(structure.to_f64())?;
    let dim = engine.dim();
    let f = TestFunction::parse(f_src, dim)?;
    let x = x.unwrap_or_else(|| vec![0.0; dim]);
    let v = v.unwrap_or_else(|| {
        let mut v = vec![0.0; dim];
        v[engine.structure.horizontal[0]] = 1.0;
        v
    });
    if x.len() != dim || v.len() != dim {
        eprintln!("error: --x and --v need {dim} components");
        return Ok(2);
    }
    let settings_json = json!({
        "f": f_src, "x": x, "t": t, "v": v, "paths": paths, "step": step, "eps": eps,
    });
    let man = manifest("simulate", Some(path), Some(text), Some(seed), settings_json);

    if t == 0.0 {
        // degenerate run: P_0 f = f and dP_0 f = df, evaluated exactly
        let value = f.eval(&x);
        let dfc = engine.frame_differential(&f, &x);
        let vf = engine.frame.ortho.vector_to_frame(&v);
        let dfv: f64 = dfc.iter().zip(&vf).map(|(a, b)| a * b).sum();
        emit(&json!({
            "manifest": man,
            "results": {"ptf": {"value": value, "stderr": 0.0}, "df_v": dfv, "degenerate": true}
        }));
        return Ok(0);
    }

    let settings = SimSettings { t, step, n_paths: paths, seed, x0: x.clone() };
    let batch = engine.simulate_paths(&settings)?;
    let ptf = engine.estimate_ptf(&f, &batch);

    if let Some(csv) = &dump_csv {
        let mut out = String::from("path");
        for i in 0..dim {
            out.push_str(&format!(",x{}", i + 1));
        }
        out.push('\n');
        for (p, y) in batch.endpoints.iter().enumerate() {
            out.push_str(&p.to_string());
            for c in y {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        std::fs::write(csv, out)?;
    }

    let fd = engine.finite_difference_gradient(&f, &x, &v, &settings, eps)?;
    let mut reps = serde_json::Map::new();
    let mut estimates = vec![("finite-difference".to_string(), fd)];
    reps.insert("finite-difference".into(), serde_json::to_value(fd)?);
    match engine.gradient_rep_carnot(&f, &x, &v, &settings) {
        Ok(e) => {
            estimates.push(("stratified".into(), e));
            reps.insert("stratified".into(), serde_json::to_value(e)?);
        }
        Err(e) => {
            reps.insert("stratified".into(), json!({"inapplicable": e.to_string()}));
        }
    }
    match engine.gradient_rep_polygrowth(&f, &x, &v, &settings) {
        Ok(e) => {
            estimates.push(("polynomial-growth".into(), e));
            reps.insert("polynomial-growth".into(), serde_json::to_value(e)?);
        }
        Err(e) => {
            reps.insert("polynomial-growth".into(), json!({"inapplicable": e.to_string()}));
        }
    }
    match engine.gradient_rep_adjoint(&f, &x, &v, &settings) {
        Ok(e) => {
            estimates.push(("adjoint-transport".into(), e));
            reps.insert("adjoint-transport".into(), serde_json::to_value(e)?);
        }
        Err(e) => {
            reps.insert("adjoint-transport".into(), json!({"inapplicable": e.to_string()}));
        }
    }

    let mut verdicts = Vec::new();
    let mut all_agree = true;
    for i in 0..estimates.len() {
        for j in (i + 1)..estimates.len() {
            let (na, ea) = &estimates[i];
            let (nb, eb) = &estimates[j];
            let agree = ea.agrees_with(eb, 3.0);
            all_agree &= agree;
            verdicts.push(json!({
                "pair": format!("{na} vs {nb}"),
                "difference": ea.value - eb.value,
                "combined_stderr": (ea.stderr.powi(2) + eb.stderr.powi(2)).sqrt(),
                "agree_3_sigma": agree,
            }));
        }
    }

    emit(&json!({
        "manifest": man,
        "results": {
            "ptf": ptf,
            "representations": Value::Object(reps),
            "agreement": verdicts,
            "all_agree": all_agree,
        }
    }));
    Ok(if all_agree { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds(
    path: &PathBuf,
    parsed: &GroupSpec,
    text: &str,
    ps: &[f64],
    paths: usize,
    seed: u64,
    times: &[f64],
    csv: Option<PathBuf>,
) -> Result<u8, Box<dyn std::error::Error>> {
    let BuiltSpec::Invariant { structure, stratification } = parsed.build()? else {
        eprintln!("error: bound constants need a left-invariant spec");
        return Ok(2);
    };
    let Some(strat) = stratification else {
        eprintln!("error: bound constants need a stratified (Carnot) spec");
        return Ok(2);
    };
    let engine = Engine::new(structure.to_f64())?;
    let fp = engine.frame.point().clone();
    let psi_h = psi_horizontal_max(&psi_map(&fp), &fp);
    if psi_h > 1e-12 {
        eprintln!("error: the gradient-bound theory needs psi|h = 0 (measured {psi_h:.3e})");
        return Ok(2);
    }
    let provider = select_provider(&engine)?;
    let q_hom = strat.homogeneous_dimension();
    let man = manifest(
        "bounds",
        Some(path),
        Some(text),
        Some(seed),
        json!({"p": ps, "paths": paths, "times": times}),
    );

    let dim = engine.dim();
    let settings1 =
        SimSettings { t: 1.0, step: 1.0 / 128.0, n_paths: paths, seed, x0: vec![0.0; dim] };
    let batch1 = engine.simulate_paths(&settings1)?;
    let n_rank = engine.rank_h() as f64;

    let mut all_pass = true;
    let mut rows = Vec::new();
    let mut csv_rows = vec!["p,q,C_p,stderr,upper_bound,pass".to_string()];
    let c2 = c2_upper_bound(&engine, provider.as_ref(), q_hom, &batch1)?;
    for &p in ps {
        let cp = estimate_cp(&engine, provider.as_ref(), p, &batch1)?;
        let mut pass = cp.value >= n_rank - 3.0 * cp.stderr && cp.certified;
        let mut bound = f64::NAN;
        if (p - 2.0).abs() < 1e-12 {
            bound = c2.bound;
            pass &= cp.value <= c2.bound + 3.0 * cp.stderr;
        }
        all_pass &= pass;
        csv_rows.push(format!("{p},{},{:.6},{:.6},{:.6},{}", cp.q, cp.value, cp.stderr, bound, pass));
        rows.push(json!({
            "estimate": cp,
            "upper_bound_c2": if bound.is_nan() { Value::Null } else { json!(bound) },
            "pass": pass,
        }));
    }

    // dilation invariance of the p = 2 constant across times
    let mut invariance = Vec::new();
    let mut base: Option<carnot::bounds::CpEstimate> = None;
    for &t in times {
        let settings = SimSettings {
            t,
            step: t / 128.0,
            n_paths: paths,
            seed: seed ^ t.to_bits().rotate_left(17),
            x0: vec![0.0; dim],
        };
        let b = engine.simulate_paths(&settings)?;
        let cp = estimate_cp(&engine, provider.as_ref(), 2.0, &b)?;
        if let Some(b0) = &base {
            let diff = (cp.value - b0.value).abs();
            let tol = 3.0 * (cp.stderr.powi(2) + b0.stderr.powi(2)).sqrt();
            let agree = diff <= tol;
            all_pass &= agree;
            invariance.push(json!({"t": t, "estimate": cp, "agrees_with_first": agree}));
        } else {
            invariance.push(json!({"t": t, "estimate": cp, "agrees_with_first": Value::Null}));
            base = Some(cp);
        }
    }

    let moments = moment_diagnostics(&engine, provider.as_ref(), 2.0, q_hom, &batch1)?;

    // inequality checks on the shipped suite (3-coordinate groups)
    let mut checks = Vec::new();
    if dim == 3 {
        let settings =
            SimSettings { t: 0.5, step: 1.0 / 128.0, n_paths: paths, seed, x0: vec![0.0; dim] };
        let cp2 = estimate_cp(&engine, provider.as_ref(), 2.0, &batch1)?;
        for f in bounded_suite_dim3() {
            let g = engine.gradient_bound_check(&f, &settings.x0, 2.0, cp2.value, &settings)?;
            all_pass &= g.pass;
            checks.push(json!({"f": f.to_string(), "check": g}));
            let vck = engine.variance_bound_check(&f, &settings.x0, cp2.value, &settings)?;
            all_pass &= vck.pass;
            checks.push(json!({"f": f.to_string(), "check": vck}));
        }
        for &p in ps.iter().filter(|&&p| p > 2.0) {
            for f in bounded_suite_dim3() {
                let b = part_b_bound_check(&engine, &f, &settings.x0, p, q_hom, &settings)?;
                all_pass &= b.pass;
                checks.push(json!({"f": f.to_string(), "check": b}));
            }
        }
    }

    if let Some(csv_path) = csv {
        std::fs::write(csv_path, csv_rows.join("\n") + "\n")?;
    }
    emit(&json!({
        "manifest": man,
        "results": {
            "homogeneous_dimension": q_hom,
            "rank_h": n_rank,
            "c2_upper_bound": c2,
            "cp_estimates": rows,
            "dilation_invariance": invariance,
            "moment_diagnostics": moments,
            "c_nq_2_4": c_nq(2, 4.0)?,
            "suite_checks": checks,
            "all_pass": all_pass,
        }
    }));
    Ok(if all_pass { 0 } else { 1 })
}

fn select_provider(
    engine: &Engine,
) -> Result<Box<dyn HeatKernelProvider>, Box<dyn std::error::Error>> {
    let alg = &engine.structure.algebra;
    let heis = carnot::algebra::heisenberg::<f64>();
    let is_heis = alg.dim == 3
        && engine.structure.horizontal == vec![0, 1]
        && (0..3).all(|i| {
            (0..3).all(|j| {
                (0..3).all(|k| {
                    (alg.structure_constant(i, j, k) - heis.structure_constant(i, j, k)).abs()
                        < 1e-14
                })
            })
        });
    if is_heis {
        return Ok(Box::new(HeisenbergKernel));
    }
    let is_abelian = alg.constants().max_abs() == 0.0 && engine.rank_h() == alg.dim;
    if is_abelian {
        return Ok(Box::new(GaussianKernel { dim: alg.dim }));
    }
    Err("no heat kernel provider for this group; shipped providers cover the Heisenberg group and abelian spaces".into())
}

fn cmd_counterexample(cs: &[f64], profile_name: &str) -> Result<u8, Box<dyn std::error::Error>> {
    let profile = carnot::frame::profile_by_name(profile_name)?;
    let frame = carnot::frame::su2su2r_frame(profile.clone());
    let man = manifest(
        "counterexample",
        None,
        None,
        None,
        json!({"c": cs, "profile": profile_name}),
    );
    let mut rows = Vec::new();
    eprintln!(
        "{:>7}  {:>52}  {:>52}  {:>12}",
        "c", "computed (Z1, Z2, Z3, dc; Ric_g)", "reference closed forms", "max |dev|"
    );
    for &c in cs {
        let reference = su2su2r_reference(&profile, c);
        let row = structured_ricci_row(&frame, c, reference)?;
        eprintln!(
            "{c:>7.3}  {:>52}  {:>52}  {:>12.3e}",
            fmt5(&row.computed),
            fmt5(&row.reference),
            row.max_deviation
        );
        rows.push(serde_json::to_value(&row)?);
    }
    emit(&json!({"manifest": man, "results": {"rows": rows}}));
    Ok(0)
}

fn fmt5(v: &[f64; 5]) -> String {
    format!("({:+.4}, {:+.4}, {:+.4}, {:+.4}; {:+.4})", v[0], v[1], v[2], v[3], v[4])
}
