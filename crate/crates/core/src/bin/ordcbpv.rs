use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ordcbpv::affine::{check_affine, AffineMode, ExceptionConfig};
use ordcbpv::elaborate::affine_program;
use ordcbpv::harness::{
    bundled_corpus, declared_type, load_corpus_dir, verify_properties, verify_run,
    with_deep_stack, Lane, Program, Verdict,
};
use ordcbpv::machine::{run, DEFAULT_FUEL};
use ordcbpv::surface::{parse_program, parse_type, pretty_print, Dialect};
use ordcbpv::syntax::{erase_all, erase_polarities, polarity, Expr, Type};
use ordcbpv::typecheck::{check_core, Mode};

#[derive(Parser)]
#[command(name = "ordcbpv", version, about = "Ordered/linear CBPV checker, machine and affine elaborator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ordered,
    Linear,
    Nomove,
    Withmove,
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Core,
    Affine,
}

#[derive(clap::Args)]
struct Source {
    file: PathBuf,
    /// ordered|linear for core files, nomove|withmove for affine ones
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    dialect: Option<DialectArg>,
    /// Program type; defaults to a `-- type:` header or 1
    #[arg(long = "type")]
    ty: Option<String>,
    #[arg(long, requires = "new_fail")]
    exc_type: Option<String>,
    #[arg(long, requires = "exc_type")]
    new_fail: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Typecheck a program
    Check(Source),
    /// Run a program on the abstract machine
    Run {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value = "")]
        freelist: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        /// Write the trace as JSON
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-step checks: typing, resources
        #[arg(long, value_delimiter = ',')]
        verify: Vec<String>,
    },
    /// Translate an affine program into the core calculus
    Elaborate {
        #[command(flatten)]
        src: Source,
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Sweep the metatheory checks over a corpus and generated programs
    Verify {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Generated programs per lane
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 8)]
        max_freelist: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

enum Failure {
    Check(String),
    Usage(String),
}

type Res<T> = Result<T, Failure>;

fn usage<E: ToString>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

struct Loaded {
    lane: Lane,
    expr: Expr,
    ty: Type,
    cfg: ExceptionConfig,
}

fn load(src: &Source) -> Res<Loaded> {
    let path = src.file.to_string_lossy().into_owned();
    let text = std::fs::read_to_string(&src.file).map_err(|e| usage(format!("{path}: {e}")))?;
    let dialect = match src.dialect {
        Some(DialectArg::Core) => Dialect::Core,
        Some(DialectArg::Affine) => Dialect::Affine,
        None => Dialect::from_path(&path).unwrap_or(Dialect::Core),
    };
    let lane = match (dialect, src.mode) {
        (Dialect::Core, None | Some(ModeArg::Ordered)) => Lane::Core(Mode::Ordered),
        (Dialect::Core, Some(ModeArg::Linear)) => Lane::Core(Mode::Linear),
        (Dialect::Affine, None | Some(ModeArg::Nomove)) => Lane::Affine(AffineMode::NoMove),
        (Dialect::Affine, Some(ModeArg::Withmove)) => Lane::Affine(AffineMode::WithMove),
        _ => return Err(usage("--mode does not match the dialect")),
    };
    let expr = parse_program(&text, dialect).map_err(|e| Failure::Check(format!("parse error: {e}")))?;
    let ty = match &src.ty {
        Some(t) => parse_type(t).map_err(usage)?,
        None => declared_type(&text).map_err(usage)?,
    };
    let cfg = match (&src.exc_type, &src.new_fail) {
        (Some(t), Some(v)) => {
            let t = parse_type(t).map_err(usage)?;
            let v = parse_program(v, Dialect::Core).map_err(usage)?;
            ExceptionConfig::new(t, v).map_err(usage)?
        }
        _ => ExceptionConfig::default(),
    };
    Ok(Loaded { lane, expr, ty, cfg })
}

fn check(l: &Loaded) -> Res<()> {
    let r = match l.lane {
        Lane::Core(m) => check_core(&vec![], &l.expr, &l.ty, m).map(|_| ()),
        Lane::Affine(m) => check_affine(&vec![], &l.expr, &l.ty, m, &l.cfg).map(|_| ()),
    };
    r.map_err(|e| Failure::Check(e.to_string()))
}

/// Closed target term, its type and structural mode.
fn target(l: &Loaded) -> Res<(Expr, Type, Mode)> {
    match l.lane {
        Lane::Core(m) => {
            let d = check_core(&vec![], &l.expr, &l.ty, m).map_err(|e| Failure::Check(e.to_string()))?;
            Ok((d.to_expr(), l.ty.clone(), m))
        }
        Lane::Affine(m) => {
            let d = check_affine(&vec![], &l.expr, &l.ty, m, &l.cfg)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let (e, ty) = affine_program(&d, m, &l.cfg).map_err(|e| Failure::Check(e.to_string()))?;
            Ok((e, ty, ordcbpv::elaborate::target_mode(m)))
        }
    }
}

fn parse_freelist(s: &str) -> Res<Vec<u32>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<u32>().map_err(|e| usage(format!("freelist entry `{x}`: {e}"))))
        .collect()
}

fn show_list(l: &[u32]) -> String {
    let items: Vec<String> = l.iter().map(u32::to_string).collect();
    format!("[{}]", items.join(","))
}

fn write_out(path: &PathBuf, text: &str) -> Res<()> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn main_inner(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Check(src) => {
            let l = load(&src)?;
            check(&l)?;
            println!("ok: {} ({})", l.ty, l.lane.mode_name());
            Ok(())
        }
        Cmd::Run {
            src,
            freelist,
            fuel,
            trace,
            verify,
        } => {
            let l = load(&src)?;
            let fl = parse_freelist(&freelist)?;
            for v in &verify {
                if v != "typing" && v != "resources" {
                    return Err(usage(format!("unknown check `{v}`")));
                }
            }
            let (e, ty, mode) = target(&l)?;
            let (outcome, tr) = run(&e, polarity(&ty), fl.clone(), fuel, None).map_err(|e| Failure::Check(e.to_string()))?;
            if let Some(p) = &trace {
                let text = serde_json::to_string_pretty(&tr.to_json()).expect("json");
                write_out(p, &text)?;
            }
            match &outcome {
                ordcbpv::machine::Outcome::Final { value, freelist } => {
                    println!("final: {} freelist: {}", pretty_print(&erase_all(value)), show_list(freelist));
                }
                ordcbpv::machine::Outcome::Stuck { reason, .. } => {
                    return Err(Failure::Check(format!("stuck: {reason}")));
                }
                ordcbpv::machine::Outcome::FuelExhausted(_) => {
                    return Err(Failure::Check(format!("fuel exhausted after {fuel} steps")));
                }
            }
            if !verify.is_empty() {
                let rec = verify_run(&e, &ty, mode, fl, fuel);
                let typing = !verify.iter().any(|v| v == "typing") || rec.subject_reduction_ok;
                let res = !verify.iter().any(|v| v == "resources") || rec.resource_list_preserved;
                println!("steps: {} typing: {} resources: {}", rec.steps, ok_str(typing), ok_str(res));
                if !(typing && res) {
                    for f in &rec.failures {
                        eprintln!("{f}");
                    }
                    return Err(Failure::Check("per-step verification failed".into()));
                }
            }
            Ok(())
        }
        Cmd::Elaborate { src, out } => {
            let mut l = load(&src)?;
            if let Lane::Core(_) = l.lane {
                l.lane = Lane::Affine(match src.mode {
                    Some(ModeArg::Withmove) => AffineMode::WithMove,
                    _ => AffineMode::NoMove,
                });
                l.expr = parse_program(&std::fs::read_to_string(&src.file).map_err(usage)?, Dialect::Affine)
                    .map_err(|e| Failure::Check(format!("parse error: {e}")))?;
            }
            let (e, ty, _) = target(&l)?;
            let text = format!("-- type: {ty}\n{}\n", pretty_print(&erase_polarities(&e)));
            match out {
                Some(p) => write_out(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Cmd::Verify {
            corpus,
            seeds,
            max_freelist,
            report,
        } => {
            let programs: Vec<Program> = match corpus {
                Some(dir) => load_corpus_dir(&dir, &ExceptionConfig::default()).map_err(|e| Failure::Check(e.to_string()))?,
                None => bundled_corpus(),
            };
            let r = verify_properties(&programs, seeds, max_freelist);
            for p in &r.programs {
                if !p.ok() {
                    eprintln!("FAIL {} [{}]: {}", p.name, p.mode, p.error.clone().unwrap_or_default());
                    for run in p.runs.iter().filter(|r| !r.ok()) {
                        for f in &run.failures {
                            eprintln!("  {}: {f}", show_list(&run.freelist));
                        }
                    }
                }
            }
            let count = |v: Verdict| r.programs.iter().filter(|p| p.final_freelist_verdict == v).count();
            println!(
                "programs: {} runs: {} steps: {} identical: {} permutation: {} violation: {} result: {}",
                r.programs.len(),
                r.total_runs,
                r.total_steps,
                count(Verdict::Identical),
                count(Verdict::Permutation),
                count(Verdict::Violation),
                if r.all_pass { "PASS" } else { "FAIL" }
            );
            if let Some(p) = report {
                write_out(&p, &serde_json::to_string_pretty(&r).expect("json"))?;
            }
            if r.all_pass {
                Ok(())
            } else {
                Err(Failure::Check("verification failed".into()))
            }
        }
    }
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_deep_stack(|| main_inner(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
    }
}

