//! Command-line front end. Every command writes one JSON report; the exit
//! code is 0 when the requested checks pass, 1 when one fails and 2 on
//! usage or input errors.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::catalog::{catalog_entries, normalize_munzner_detailed, reconcile_u5, FormSelector};
use crate::cubic::CubicForm;
use crate::f5::{scale_search, ScaleSearch};
use crate::gallery::{hopf_map, lawson_osserman, lawson_osserman_prefactor, mazya_exponent, MazyaParams};
use crate::hessian::RayFunction;
use crate::hsiang::hsiang_fit;
use crate::hyperbolic::{gap_scan, hyperbolic_set_estimate, CSV_HEADER};
use crate::idempotent::{genericity_report, newton_search, variational_search_with, VariationalOptions};
use crate::linalg::{gaussian_vector, random_unit, substream};
use crate::peirce::{
    clifford_check, dimension_check, eiconal_residuals, fusion_table, munzner_residuals, peirce_decompose,
    FusionProfile, Scaling, FUSION_TOL,
};
use crate::report::{to_value, write_bytes, write_csv, AnalysisReport};

/// Seed used by every command unless `--seed` is given.
pub const DEFAULT_SEED: u64 = 20_240_229;

#[derive(Debug, Parser)]
#[command(name = "cubic-lab", version, about = "Algebras of cubic forms: idempotents, Peirce spectra, Hessian evidence")]
struct Cli {
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write sampled data as CSV (hyperbolicity samples, f5 scale trace).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FormArgs {
    /// Form selector, e.g. cartan:1, u5, u9, random:5:7, file:form.json.
    #[arg(long)]
    form: String,
    /// Rescale to |grad u|² = 9|x|⁴ before anything else.
    #[arg(long)]
    normalize: bool,
    /// Relative spread tolerated by the Münzner normalizer.
    #[arg(long, default_value_t = 1e-9)]
    normalize_tol: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the named forms.
    Catalog,
    /// Idempotents, Peirce decompositions, fusion laws and genericity.
    Analyze {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// raw, or eiconal (product divided by 6).
        #[arg(long, default_value = "raw")]
        scaling: Scaling,
        /// eiconal, jordan or free; defaults to eiconal under eiconal scaling.
        #[arg(long)]
        profile: Option<FusionProfile>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = FUSION_TOL)]
        fusion_tol: f64,
        /// Variational ascents from seeded unit starts.
        #[arg(long, default_value_t = 4)]
        variational: usize,
        #[arg(long, default_value_t = 1e-8)]
        genericity_tol: f64,
    },
    /// Identity checks.
    Verify {
        #[command(flatten)]
        form: FormArgs,
        /// Comma-separated: munzner, eiconal, harmonic, fusion, clifford, dimension.
        #[arg(long, value_delimiter = ',', default_value = "munzner,harmonic")]
        checks: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1e-12)]
        harmonic_tol: f64,
    },
    /// M-hyperbolicity of Hessian differences of w = <x², x>/|x|^α.
    Hyperbolicity {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 100_000)]
        pairs: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        orbit: bool,
        /// Absolute zero tolerance; default is relative to the Hessians.
        #[arg(long)]
        zero_tol: Option<f64>,
    },
    /// Gap ratios of ½L_d over random and idempotent directions.
    GapScan {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 1000)]
        dirs: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Quintic Hessian invariant for w = s u/|x| on a Münzner-normalized form.
    F5 {
        #[arg(long, default_value = "u5")]
        form: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        scale_search: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Hsiang trace identities.
    Hsiang {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Closed-form counterexamples.
    Gallery {
        #[command(subcommand)]
        which: GalleryCommand,
    },
}

#[derive(Debug, Subcommand)]
enum GalleryCommand {
    /// Exponent of Maz'ya's radial solution |x|^a.
    Mazya {
        #[arg(long)]
        n: usize,
        #[arg(long, requires_all = ["mu", "nu"], conflicts_with = "eps")]
        kappa: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        /// Use kappa = n(n-2), mu = n², nu = (n-2)² + eps.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
    },
    /// Lawson–Osserman cone map and the Hopf identity |eta(x)| = |x|².
    LawsonOsserman {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

struct Output {
    report: AnalysisReport,
    csv: Option<(Vec<&'static str>, Vec<Vec<f64>>)>,
}

/// Parses `argv` (including the program name), runs the command and writes
/// the report to `--out` or `stdout`. Returns the exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let start = Instant::now();
    let mut output = match execute(&cli.command) {
        Ok(o) => o,
        Err(InputError(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return 2;
        }
    };
    output.report.duration_seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &cli.csv {
        if let Some((header, rows)) = &output.csv {
            if let Err(e) = write_csv(path, header, rows) {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
        }
    }
    let bytes = output.report.serialize();
    match &cli.out {
        Some(path) => {
            if let Err(e) = write_bytes(path, &bytes) {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
        }
        None => {
            let _ = stdout.write_all(&bytes);
        }
    }
    if output.report.passed {
        0
    } else {
        1
    }
}

fn load_form(args: &FormArgs, report: &mut AnalysisReport) -> Result<CubicForm, InputError> {
    let selector: FormSelector = args.form.parse()?;
    let u = selector.build()?;
    report.param("normalize", args.normalize);
    if !args.normalize {
        return Ok(u);
    }
    report.param("normalize_tol", args.normalize_tol);
    let (form, info) = normalize_munzner_detailed(&u, args.normalize_tol)?;
    report.param("munzner_normalization", to_value(&info));
    Ok(form)
}

fn execute(command: &Command) -> Result<Output, InputError> {
    let plain = |report| Ok(Output { report, csv: None });
    match command {
        Command::Catalog => {
            let mut report = AnalysisReport::new("catalog", None);
            report.results = json!({ "forms": to_value(&catalog_entries()) });
            plain(report)
        }
        Command::Analyze {
            form,
            seed,
            starts,
            tol,
            max_iter,
            scaling,
            profile,
            samples,
            fusion_tol,
            variational,
            genericity_tol,
        } => {
            let mut report = AnalysisReport::new("analyze", Some(form.form.clone()));
            let u = scaling.apply(&load_form(form, &mut report)?);
            let profile = profile.unwrap_or(match scaling {
                Scaling::Eiconal => FusionProfile::Eiconal,
                Scaling::Raw => FusionProfile::Free,
            });
            report
                .param("seed", seed)
                .param("starts", starts)
                .param("tol", tol)
                .param("max_iter", max_iter)
                .param("scaling", scaling)
                .param("profile", profile)
                .param("samples", samples)
                .param("fusion_tol", fusion_tol)
                .param("variational", variational)
                .param("genericity_tol", genericity_tol)
                .param("peirce_cluster_tol", "1e-6 * |L_c|");
            let search = newton_search(&u, *starts, *seed, *tol, *max_iter);
            let opts = VariationalOptions { tol: *tol, ..VariationalOptions::default() };
            let mut rng = substream(*seed, u64::MAX);
            let variational_records: Vec<Value> = (0..*variational)
                .map(|_| {
                    let x0 = random_unit(&mut rng, u.dim());
                    match variational_search_with(&u, &x0, &opts) {
                        Ok(o) => json!({
                            "record": to_value(&o.record),
                            "iterations": o.iterations,
                            "objective_final": o.objective.last().copied(),
                        }),
                        Err(e) => json!({ "error": e.to_string() }),
                    }
                })
                .collect();
            let mut all_pass = true;
            let mut peirce = Vec::new();
            for rec in &search.records {
                let decomp = peirce_decompose(&u, &rec.c, None)?;
                let fusion = fusion_table(&u, &decomp, profile, *samples, *seed, *fusion_tol);
                all_pass &= fusion.pass;
                peirce.push(json!({
                    "multiplicities": decomp.multiplicities(),
                    "fusion": to_value(&fusion),
                }));
            }
            let genericity = genericity_report(&u, &search.records, *genericity_tol);
            all_pass &= genericity.all_consistent;
            report.passed = all_pass;
            report.results = json!({
                "newton": to_value(&search),
                "variational": variational_records,
                "peirce": peirce,
                "genericity": to_value(&genericity),
            });
            plain(report)
        }
        Command::Verify { form, checks, seed, samples, tol, harmonic_tol } => {
            let mut report = AnalysisReport::new("verify", Some(form.form.clone()));
            let mut u = load_form(form, &mut report)?;
            let mut results = serde_json::Map::new();
            if form.form == "u5" && form.normalize {
                let (rec, _) = reconcile_u5(form.normalize_tol);
                results.insert("u5_reconciliation".into(), to_value(&rec));
            }
            report.param("checks", checks).param("seed", seed).param("samples", samples).param("tol", tol).param("harmonic_tol", harmonic_tol);
            let mut passed = true;
            let needs_idempotents = checks.iter().any(|c| matches!(c.as_str(), "fusion" | "clifford" | "dimension"));
            let eiconal = u.scaled(1.0 / 6.0);
            let decomps = if needs_idempotents {
                let search = newton_search(&eiconal, 64, *seed, 1e-12, 200);
                if search.records.is_empty() {
                    passed = false;
                }
                search.records.iter().map(|r| peirce_decompose(&eiconal, &r.c, None)).collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            let harmonic = u.basis_traces().iter().all(|t| t.abs() <= *harmonic_tol);
            for check in checks {
                let (ok, value) = match check.as_str() {
                    "munzner" => {
                        let r = munzner_residuals(&u, *samples, *seed);
                        (r.munzner <= *tol, to_value(&r))
                    }
                    "harmonic" => {
                        let traces = u.basis_traces();
                        let worst = traces.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
                        (harmonic, json!({ "max_basis_trace": worst, "basis_traces": traces }))
                    }
                    "eiconal" => {
                        let r = eiconal_residuals(&u, Scaling::Eiconal, *samples, *seed);
                        (r.max() <= *tol, to_value(&r))
                    }
                    "fusion" => {
                        let reps: Vec<_> = decomps
                            .iter()
                            .map(|d| fusion_table(&eiconal, d, FusionProfile::Eiconal, 100, *seed, *tol))
                            .collect();
                        (reps.iter().all(|r| r.pass), to_value(&reps))
                    }
                    "clifford" => {
                        let mut ok = true;
                        let mut out = Vec::new();
                        for d in &decomps {
                            match clifford_check(&eiconal, d, 100, *seed) {
                                Ok(r) => {
                                    ok &= r.clifford <= *tol && r.lccc <= *tol && r.dim_half_even;
                                    out.push(to_value(&r));
                                }
                                Err(e) => {
                                    ok = false;
                                    out.push(json!({ "error": e.to_string() }));
                                }
                            }
                        }
                        (ok, Value::Array(out))
                    }
                    "dimension" => {
                        let mut ok = true;
                        let mut out = Vec::new();
                        for d in &decomps {
                            match dimension_check(d, harmonic) {
                                Ok(v) => {
                                    ok &= v.pass;
                                    out.push(to_value(&v));
                                }
                                Err(e) => {
                                    ok = false;
                                    out.push(json!({ "error": e.to_string() }));
                                }
                            }
                        }
                        (ok, Value::Array(out))
                    }
                    other => return Err(InputError(format!("unknown check '{other}'"))),
                };
                passed &= ok;
                results.insert(check.clone(), json!({ "pass": ok, "result": value }));
            }
            u = u.with_label(form.form.clone());
            results.insert("dim".into(), json!(u.dim()));
            report.passed = passed;
            report.results = Value::Object(results);
            plain(report)
        }
        Command::Hyperbolicity { form, alpha, pairs, seed, orbit, zero_tol } => {
            let mut report = AnalysisReport::new("hyperbolicity", Some(form.form.clone()));
            let u = load_form(form, &mut report)?;
            report
                .param("alpha", alpha)
                .param("pairs", pairs)
                .param("seed", seed)
                .param("orbit", orbit)
                .param("zero_tol", zero_tol)
                .param("refined_pairs", crate::hyperbolic::REFINED_PAIRS)
                .param("refine_sweeps", crate::hyperbolic::REFINE_SWEEPS);
            let r = RayFunction::new(u, *alpha)?;
            let rep = hyperbolic_set_estimate(&r, *pairs, *seed, *orbit, *zero_tol);
            report.passed = rep.hyperbolic_evidence;
            report.results = to_value(&rep);
            Ok(Output { report, csv: Some((CSV_HEADER.to_vec(), rep.csv_rows())) })
        }
        Command::GapScan { form, dirs, delta, seed } => {
            let mut report = AnalysisReport::new("gap-scan", Some(form.form.clone()));
            let u = load_form(form, &mut report)?;
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(InputError(format!("delta must lie in (0, 1), got {delta}")));
            }
            report.param("dirs", dirs).param("delta", delta).param("seed", seed).param("extremal_threshold", 2.0 - 1e-8);
            let rep = gap_scan(&u, *dirs, *seed, *delta);
            report.passed = rep.idempotents.iter().any(|g| g.extremal) && rep.min_extremal_ratio >= 2.0 - 1e-8;
            report.results = to_value(&rep);
            plain(report)
        }
        Command::F5 { form, points, scale_search: search, seed, tol } => {
            let mut report = AnalysisReport::new("f5", Some(form.clone()));
            let u = form.parse::<FormSelector>()?.build()?;
            let (u, info) = normalize_munzner_detailed(&u, 1e-9)?;
            report
                .param("points", points)
                .param("scale_search", search)
                .param("seed", seed)
                .param("tol", tol)
                .param("scale_range", [crate::f5::SCALE_MIN, crate::f5::SCALE_MAX])
                .param("munzner_normalization", to_value(&info));
            let s: ScaleSearch = scale_search(&u, *points, *seed, *tol)?;
            let rows = s.trace.iter().map(|p| vec![p.s, p.residual]).collect();
            report.passed = s.found;
            report.results = if *search {
                to_value(&s)
            } else {
                let at_one = s.trace.iter().find(|p| p.s == 1.0).map(|p| p.residual);
                json!({ "residual_at_unit_scale": at_one, "fit": to_value(&s.fit), "found": s.found })
            };
            Ok(Output { report, csv: Some((vec!["s", "residual"], rows)) })
        }
        Command::Hsiang { form, samples, seed } => {
            let mut report = AnalysisReport::new("hsiang", Some(form.form.clone()));
            let u = load_form(form, &mut report)?;
            report.param("samples", samples).param("seed", seed).param("tol", crate::hsiang::HSIANG_TOL);
            let fit = hsiang_fit(&u, *samples, *seed)?;
            report.passed = fit.pass;
            report.results = to_value(&fit);
            plain(report)
        }
        Command::Gallery { which } => match which {
            GalleryCommand::Mazya { n, kappa, mu, nu, eps } => {
                let mut report = AnalysisReport::new("gallery-mazya", None);
                let params = match (kappa, mu, nu, eps) {
                    (Some(k), Some(m), Some(v), None) => MazyaParams { n: *n, kappa: *k, mu: *m, nu: *v },
                    (None, None, None, Some(e)) => MazyaParams::from_epsilon(*n, *e),
                    _ => return Err(InputError("give either --kappa --mu --nu or --eps".into())),
                };
                report.param("n", n).param("kappa", params.kappa).param("mu", params.mu).param("nu", params.nu).param("eps", eps);
                match mazya_exponent(&params) {
                    Ok(a) => {
                        report.results = json!({ "a": a, "ellipticity": to_value(&params.ellipticity()) });
                    }
                    Err(e) => {
                        report.passed = false;
                        report.results = json!({ "error": e.to_string(), "ellipticity": to_value(&params.ellipticity()) });
                    }
                }
                plain(report)
            }
            GalleryCommand::LawsonOsserman { d, points, seed, tol } => {
                let mut report = AnalysisReport::new("gallery-lawson-osserman", None);
                report.param("d", d).param("points", points).param("seed", seed).param("tol", tol);
                let mut rng = substream(*seed, 0);
                let mut hopf = 0.0_f64;
                let mut homogeneity = 0.0_f64;
                for _ in 0..*points {
                    let x = gaussian_vector(&mut rng, 2 * d);
                    let eta = hopf_map(x.as_slice(), *d)?;
                    let en = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                    hopf = hopf.max((en - x.norm_squared()).abs() / x.norm_squared().max(1.0));
                    let w = lawson_osserman(x.as_slice(), *d)?;
                    let w2 = lawson_osserman((&x * 2.0).as_slice(), *d)?;
                    let dev = w.iter().zip(&w2).map(|(a, b)| (2.0 * a - b).abs()).fold(0.0, f64::max);
                    homogeneity = homogeneity.max(dev / (1.0 + x.norm()));
                }
                report.passed = hopf <= *tol && homogeneity <= *tol;
                report.results = json!({
                    "prefactor": lawson_osserman_prefactor(*d),
                    "hopf_residual": hopf,
                    "homogeneity_residual": homogeneity,
                });
                plain(report)
            }
        },
    }
}
