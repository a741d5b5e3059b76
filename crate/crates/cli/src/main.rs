//! Batch front end for the continuity diagnostics library.
//!
//! Subcommands: `validate` (schema + invariants), `analyze` (gap series,
//! verdicts, and the semi-uniform Feller conclusion for one document),
//! `kr` (certified Kantorovich-Rubinshtein distance between two named
//! measures), `generate` (seeded instance documents), and `verify`
//! (theorem-check suites).
//!
//! Exit codes: 0 success, 1 domain failure (invariant violations, failed
//! suite properties, unresolved domain references), 2 usage or parse
//! errors. `SUFELLER_EPSILON` and `SUFELLER_WINDOW` set default verdict
//! parameters; flags take precedence, then document config, then the
//! environment.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use sufeller::analysis::{analyze, AnalyzeConfig, Condition};
use sufeller::document::{self, LoadError};
use sufeller::harness::{
    self, indicator_example_fixture, Construction, InstanceRecipe, SuiteConfig,
};
use sufeller::kr::kr_distance;
use sufeller::report;
use sufeller::series::VerdictParams;

const EXIT_OK: i32 = 0;
const EXIT_DOMAIN: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "sufeller",
    version,
    about = "Continuity diagnostics for stochastic kernels on finite metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a document and check every invariant; exit 0 iff clean.
    Validate {
        /// Instance document (JSON).
        path: PathBuf,
    },
    /// Run the continuity analysis of a document and print the verdicts.
    Analyze {
        /// Instance document (JSON).
        path: PathBuf,
        /// Comma-separated subset of conditions a,b,c,d,e (default: all).
        #[arg(long)]
        conditions: Option<String>,
        /// Verdict threshold (default: flag > document > SUFELLER_EPSILON > 1e-6).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Trailing-window length (default: flag > document > SUFELLER_WINDOW > 3).
        #[arg(long)]
        window: Option<usize>,
        /// "on" re-derives every extremum by exhaustive subset enumeration
        /// and fails on any disagreement; refused for |S2| > 16.
        #[arg(long, default_value = "off")]
        oracle: String,
        /// Write the report JSON here (CSV companion alongside, extension .csv).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Certified Kantorovich-Rubinshtein distance between two named measures.
    Kr {
        /// Instance document (JSON) with a `measures` section.
        path: PathBuf,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
    },
    /// Write a seeded instance document for a named recipe.
    Generate {
        /// One of tv_converging_mixture, marginal_tv_only, indicator_example,
        /// product_mixture.
        #[arg(long)]
        recipe: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        s1: usize,
        #[arg(long, default_value_t = 4)]
        s2: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Run a theorem-check suite; exit 0 iff every property holds.
    Verify {
        /// One of equivalence, asskern, integration, equicontinuity, all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the structured suite reports here (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for failure artifacts (re-runnable instance documents).
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Analyze {
            path,
            conditions,
            epsilon,
            window,
            oracle,
            report,
        } => cmd_analyze(
            &path,
            conditions.as_deref(),
            epsilon,
            window,
            &oracle,
            report.as_deref(),
        ),
        Command::Kr { path, mu, nu } => cmd_kr(&path, &mu, &nu),
        Command::Generate {
            recipe,
            seed,
            out,
            s1,
            s2,
            steps,
        } => cmd_generate(&recipe, seed, &out, s1, s2, steps),
        Command::Verify {
            suite,
            trials,
            seed,
            report,
            artifacts,
        } => cmd_verify(
            &suite,
            trials,
            seed,
            report.as_deref(),
            artifacts.as_deref(),
        ),
    };
    std::process::exit(code);
}

fn load_document(path: &Path) -> Result<document::InstanceDocument, i32> {
    match document::load(path) {
        Ok(doc) => Ok(doc),
        Err(LoadError::Io(e)) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            Err(EXIT_USAGE)
        }
        Err(LoadError::Parse(e)) => {
            eprintln!("error: cannot parse {}: {e}", path.display());
            Err(EXIT_USAGE)
        }
    }
}

fn cmd_validate(path: &Path) -> i32 {
    let doc = match load_document(path) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let report = document::validate(&doc);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    if report.is_clean() {
        println!("ok: document is valid");
        EXIT_OK
    } else {
        for v in &report.violations {
            println!("violation: {v}");
        }
        EXIT_DOMAIN
    }
}

fn env_f64(name: &str) -> Option<f64> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

fn env_usize(name: &str) -> Option<usize> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

fn cmd_analyze(
    path: &Path,
    conditions: Option<&str>,
    epsilon: Option<f64>,
    window: Option<usize>,
    oracle: &str,
    report_path: Option<&Path>,
) -> i32 {
    let oracle = match oracle {
        "on" => true,
        "off" => false,
        other => {
            eprintln!("error: --oracle expects on|off, got {other:?}");
            return EXIT_USAGE;
        }
    };
    let doc = match load_document(path) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let resolved = match document::resolve(&doc) {
        Ok(r) => r,
        Err(report) => {
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            return EXIT_DOMAIN;
        }
    };
    let target = match document::analysis_target(&doc, &resolved) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };
    if oracle && target.family.s2_space().len() > 16 {
        eprintln!(
            "error: --oracle on refused: |S2| = {} exceeds 16 (2^|S2| subsets per gap)",
            target.family.s2_space().len()
        );
        return EXIT_USAGE;
    }

    let params = VerdictParams::new(
        epsilon
            .or(target.epsilon)
            .or_else(|| env_f64("SUFELLER_EPSILON"))
            .unwrap_or(sufeller::series::DEFAULT_EPSILON),
        window
            .or(target.window)
            .or_else(|| env_usize("SUFELLER_WINDOW"))
            .unwrap_or(sufeller::series::DEFAULT_WINDOW),
    );
    let condition_set: BTreeSet<Condition> = match conditions {
        Some(list) => {
            let mut set = BTreeSet::new();
            for item in list.split(',') {
                match item.parse::<Condition>() {
                    Ok(c) => {
                        set.insert(c);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_USAGE;
                    }
                }
            }
            set
        }
        None => Condition::ALL.into_iter().collect(),
    };
    let config = AnalyzeConfig {
        params,
        conditions: condition_set,
        oracle,
        asskern_depth: None,
    };
    let analysis = match analyze(&target.family, &target.witnesses, &config) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };

    println!(
        "family of length {} on |S1| = {}, |S2| = {} (epsilon = {}, window = {})",
        analysis.family_len,
        target.family.s1_space().len(),
        target.family.s2_space().len(),
        analysis.epsilon,
        analysis.window
    );
    println!("marginal TV: {}", analysis.marginal_tv.verdict);
    println!("full TV:     {}", analysis.full_tv.verdict);
    for (c, v) in &analysis.condition_verdicts {
        println!("condition {c}: {v}");
    }
    if let Some(a) = &analysis.asskern {
        println!("countable-base gap: {}", a.verdict);
    }
    match analysis.semi_uniform_feller {
        Some(v) => println!("semi-uniform Feller: {v}"),
        None => println!("semi-uniform Feller: (not concluded; run conditions b,c,d,e)"),
    }
    for r in &analysis.rejections {
        println!(
            "rejected continuity set {}: boundary carries limit mass {}",
            r.witness, r.boundary_mass
        );
    }
    for w in &analysis.warnings {
        println!("warning: {w}");
    }

    if let Some(path) = report_path {
        if let Err(e) = report::write_report(&analysis, path) {
            eprintln!("error: cannot write report: {e}");
            return EXIT_DOMAIN;
        }
        let csv_path = path.with_extension("csv");
        if let Err(e) = report::write_csv(&analysis, &csv_path) {
            eprintln!("error: cannot write CSV: {e}");
            return EXIT_DOMAIN;
        }
        println!(
            "report written to {} (CSV at {})",
            path.display(),
            csv_path.display()
        );
    }
    EXIT_OK
}

fn cmd_kr(path: &Path, mu: &str, nu: &str) -> i32 {
    let doc = match load_document(path) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let resolved = match document::resolve(&doc) {
        Ok(r) => r,
        Err(report) => {
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            return EXIT_DOMAIN;
        }
    };
    let (Some(mu_m), Some(nu_m)) = (resolved.measures.get(mu), resolved.measures.get(nu)) else {
        eprintln!("error: measures {mu:?} and {nu:?} must both exist in the document");
        return EXIT_DOMAIN;
    };
    match kr_distance(mu_m, nu_m) {
        Ok(out) => {
            println!("kr_distance({mu}, {nu}) = {}", out.value);
            println!("  dual bound      = {}", out.certificate.dual_bound);
            println!("  duality gap     = {:.3e}", out.certificate.duality_gap);
            println!("  witness values  = {:?}", out.witness.values());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn cmd_generate(recipe: &str, seed: u64, out: &Path, s1: usize, s2: usize, steps: usize) -> i32 {
    let construction = match Construction::from_name(recipe) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let doc = if construction == Construction::IndicatorExample {
        document::indicator_fixture_document(&indicator_example_fixture(steps))
    } else {
        let inst = harness::gen_instance(InstanceRecipe::new(seed, s1, s2, steps, construction));
        document::instance_document(&inst)
    };
    match document::save(&doc, out) {
        Ok(()) => {
            println!("wrote {recipe} instance (seed {seed}) to {}", out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", out.display());
            EXIT_DOMAIN
        }
    }
}

fn cmd_verify(
    suite: &str,
    trials: usize,
    seed: u64,
    report_path: Option<&Path>,
    artifacts: Option<&Path>,
) -> i32 {
    let config = SuiteConfig::new(trials, seed);
    let reports = match suite {
        "equivalence" => vec![harness::equivalence_suite(&config)],
        "asskern" => vec![harness::asskern_suite(&config)],
        "integration" => vec![harness::integration_suite(&config)],
        "equicontinuity" => vec![harness::equicontinuity_suite(&config)],
        "all" => harness::run_all_suites(trials, seed),
        other => {
            eprintln!("error: unknown suite {other:?}");
            return EXIT_USAGE;
        }
    };
    print!("{}", harness::summary_table(&reports));
    for r in &reports {
        for note in &r.notes {
            println!("note [{}]: {note}", r.suite);
        }
        for f in &r.failures {
            println!("FAIL [{} trial {}]: {}", r.suite, f.trial, f.reason);
        }
    }
    if let Some(dir) = artifacts {
        for r in &reports {
            for f in &r.failures {
                if let Some(doc) = &f.artifact {
                    if std::fs::create_dir_all(dir).is_ok() {
                        let p = dir.join(format!("{}_trial{}.json", r.suite, f.trial));
                        if std::fs::write(&p, doc).is_ok() {
                            println!("artifact written to {}", p.display());
                        }
                    }
                }
            }
        }
    }
    if let Some(path) = report_path {
        match serde_json::to_string_pretty(&reports) {
            Ok(json) => {
                if let Err(e) = std::fs::write(path, json) {
                    eprintln!("error: cannot write report: {e}");
                    return EXIT_DOMAIN;
                }
            }
            Err(e) => {
                eprintln!("error: cannot serialize report: {e}");
                return EXIT_DOMAIN;
            }
        }
    }
    if reports.iter().all(harness::SuiteReport::ok) {
        EXIT_OK
    } else {
        EXIT_DOMAIN
    }
}
