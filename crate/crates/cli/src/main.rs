use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wsq_core::harness::{self, BRUTE_MAX_ATOMS, BRUTE_MAX_STATES};
use wsq_core::io::{self, verdicts, CertificateFile, CertificateKind, Instance, WitnessJson};
use wsq_core::linalg;
use wsq_core::minimality::{self, BetaMode};
use wsq_core::petz::{self, PetzInstance, PetzOptions};
use wsq_core::phases::{self, ORACLE_MAX_LABELS};
use wsq_core::sufficiency::{self, Existence};
use wsq_core::{DiscreteStatistic, Tolerances};

mod selftest;

#[derive(Debug, Parser)]
#[command(name = "wsq", version = wsq_core::TOOL_VERSION)]
#[command(about = "Weak sufficiency, minimality and Petz sufficiency for discrete statistics")]
struct Args {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatisticSource {
    /// Use the statistic stored in the instance file.
    FromFile,
    /// Build one from the family and check it.
    Constructed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide weak sufficiency of a statistic.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "from-file")]
        statistic: StatisticSource,
        /// Witness residual tolerance.
        #[arg(long, env = "WSQ_TOL")]
        tol: Option<f64>,
        /// Also write the witness to this file.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Construct a weakly sufficient statistic or prove none exists.
    Construct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "WSQ_TOL")]
        tol: Option<f64>,
    },
    /// Minimal weakly sufficient statistic below the given one.
    Minimal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "WSQ_TOL")]
        tol: Option<f64>,
        /// Only real proportionality factors relate atoms.
        #[arg(long)]
        strict_real: bool,
    },
    /// Decide Petz sufficiency.
    Petz {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        non_unital: bool,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Constraint residual tolerance.
        #[arg(long, env = "WSQ_TOL")]
        tol: Option<f64>,
    },
    /// Cross-check the solvers against brute-force search.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 360)]
        phase_steps: usize,
    },
    /// Run the bundled examples and the property suite.
    Selftest {
        #[arg(long, default_value_t = harness::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Re-check a certificate against its instance.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
}

struct Emitted {
    json: String,
    affirmative: bool,
}

impl Emitted {
    fn certificate(cert: CertificateFile) -> Self {
        Self {
            affirmative: verdicts::affirmative(&cert.verdict),
            json: cert.to_json(),
        }
    }
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    io::parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn stored_statistic(inst: &Instance) -> anyhow::Result<&DiscreteStatistic> {
    inst.statistic
        .as_ref()
        .context("the instance file has no statistic")
}

fn tolerances(tol: Option<f64>) -> anyhow::Result<Tolerances> {
    let mut t = Tolerances::default();
    if let Some(x) = tol {
        if !(x.is_finite() && x > 0.0) {
            bail!("tolerance must be a positive number, got {x}");
        }
        t.witness = x;
    }
    Ok(t)
}

fn check(
    input: &Path,
    source: StatisticSource,
    tol: Option<f64>,
    witness_out: Option<&Path>,
) -> anyhow::Result<Emitted> {
    let inst = read_instance(input)?;
    let tol = tolerances(tol)?;
    let t = match source {
        StatisticSource::FromFile => stored_statistic(&inst)?.clone(),
        StatisticSource::Constructed => {
            let e = sufficiency::exists_weakly_sufficient(&inst.family, &tol)?;
            match e {
                Existence::Constructed { statistic, .. } => statistic,
                Existence::NonExistence { defect, .. } => {
                    eprintln!("no weakly sufficient statistic exists (cycle defect {defect:.6})");
                    return Ok(Emitted::certificate(io::existence_certificate(&e, &tol)));
                }
            }
        }
    };
    let verdict = sufficiency::check_weak_sufficiency(&t, &inst.family, &tol)?;
    if let Some(w) = &verdict.witness {
        let residual = sufficiency::verify_witness(&t, &inst.family, w, tol.witness)?;
        eprintln!("witness residual {:.3e}", residual.max_residual);
        if let Some(path) = witness_out {
            let text = serde_json::to_string_pretty(&WitnessJson::from_witness(w))?;
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    for v in &verdict.violations {
        eprintln!("violation: {v:?}");
    }
    Ok(Emitted::certificate(io::weak_certificate(
        &t, &verdict, &tol,
    )))
}

fn construct(input: &Path, tol: Option<f64>) -> anyhow::Result<Emitted> {
    let inst = read_instance(input)?;
    let tol = tolerances(tol)?;
    let e = sufficiency::exists_weakly_sufficient(&inst.family, &tol)?;
    Ok(Emitted::certificate(io::existence_certificate(&e, &tol)))
}

fn minimal(input: &Path, tol: Option<f64>, strict_real: bool) -> anyhow::Result<Emitted> {
    let inst = read_instance(input)?;
    let tol = tolerances(tol)?;
    let t = stored_statistic(&inst)?;
    let mode = if strict_real {
        BetaMode::StrictReal
    } else {
        BetaMode::Complex
    };
    let result = minimality::minimal_statistic(t, &inst.family, &tol, mode)?;
    Ok(Emitted::certificate(io::minimality_certificate(
        t,
        &inst.family,
        &result,
        &tol,
        mode,
    )?))
}

fn petz_cmd(
    input: &Path,
    non_unital: bool,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> anyhow::Result<Emitted> {
    let inst = read_instance(input)?;
    let t = stored_statistic(&inst)?.clone();
    let mut opts = PetzOptions::default();
    if let Some(n) = max_iters {
        opts.max_iters = n;
    }
    if let Some(x) = tol {
        if !(x.is_finite() && x > 0.0) {
            bail!("tolerance must be a positive number, got {x}");
        }
        opts.tol = x;
    }
    let pi = PetzInstance::new(t, inst.family, !non_unital)?;
    let cert = petz::petz_feasibility(&pi, &opts)?;
    if let Some(Err(v)) = cert
        .rhos()
        .map(|rhos| petz::structural_check(&pi, rhos, opts.structural_tol))
    {
        eprintln!("structure check: {v:?}");
    }
    Ok(Emitted::certificate(io::petz_certificate_file(
        &pi,
        &cert,
        &opts,
        &Tolerances::default(),
    )))
}

#[derive(Debug, Serialize)]
struct WeakComparison {
    checker: bool,
    brute_force: bool,
}

#[derive(Debug, Serialize)]
struct ExistenceComparison {
    constructed: bool,
    phase_search: bool,
    grid_residual: f64,
}

#[derive(Debug, Serialize)]
struct OraclePayload {
    phase_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    weak: Option<WeakComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    existence: Option<ExistenceComparison>,
}

fn oracle(input: &Path, phase_steps: usize) -> anyhow::Result<Emitted> {
    if phase_steps < 2 {
        bail!("--phase-steps must be at least 2");
    }
    let inst = read_instance(input)?;
    let tol = Tolerances::default();
    let f = &inst.family;
    let weak = match &inst.statistic {
        Some(t) if f.len() <= BRUTE_MAX_STATES && t.atom_count() <= BRUTE_MAX_ATOMS => {
            Some(WeakComparison {
                checker: sufficiency::check_weak_sufficiency(t, f, &tol)?.sufficient(),
                brute_force: harness::brute_force_weak_sufficiency(t, f, phase_steps)?,
            })
        }
        Some(_) => {
            eprintln!("statistic too large for brute force; skipped");
            None
        }
        None => None,
    };
    let existence = if f.len() <= ORACLE_MAX_LABELS {
        let g = linalg::gram_matrix(f.vectors())?;
        let cons = phases::gram_constraints(f.labels(), &g);
        let grid = phases::oracle_align(&cons, f.labels(), phase_steps)?;
        Some(ExistenceComparison {
            constructed: matches!(
                sufficiency::exists_weakly_sufficient(f, &tol)?,
                Existence::Constructed { .. }
            ),
            phase_search: harness::phases_feasible_by_search(&cons, f.labels(), phase_steps)?,
            grid_residual: grid.max_residual,
        })
    } else {
        eprintln!("family too large for the phase grid; skipped");
        None
    };
    if weak.is_none() && existence.is_none() {
        bail!("instance exceeds every oracle size limit");
    }
    let agree = weak.as_ref().is_none_or(|w| w.checker == w.brute_force)
        && existence
            .as_ref()
            .is_none_or(|e| e.constructed == e.phase_search);
    let payload = OraclePayload {
        phase_steps,
        weak,
        existence,
    };
    let verdict = if agree {
        verdicts::AGREE
    } else {
        verdicts::DISAGREE
    };
    Ok(Emitted::certificate(CertificateFile::new(
        CertificateKind::Oracle,
        verdict,
        tol,
        payload,
    )))
}

fn verify(input: &Path, certificate: &Path) -> anyhow::Result<Emitted> {
    let inst = read_instance(input)?;
    let text = fs::read_to_string(certificate)
        .with_context(|| format!("reading {}", certificate.display()))?;
    let cert = io::parse_certificate(&text)
        .with_context(|| format!("parsing {}", certificate.display()))?;
    let v = io::verify_certificate(&inst, &cert)?;
    Ok(Emitted {
        affirmative: v.valid,
        json: serde_json::to_string_pretty(&v)?,
    })
}

fn run(args: Args) -> anyhow::Result<Emitted> {
    match args.cmd {
        Command::Check {
            input,
            statistic,
            tol,
            witness_out,
        } => check(&input, statistic, tol, witness_out.as_deref()),
        Command::Construct { input, tol } => construct(&input, tol),
        Command::Minimal {
            input,
            tol,
            strict_real,
        } => minimal(&input, tol, strict_real),
        Command::Petz {
            input,
            non_unital,
            max_iters,
            tol,
        } => petz_cmd(&input, non_unital, max_iters, tol),
        Command::Oracle { input, phase_steps } => oracle(&input, phase_steps),
        Command::Selftest { seed, count } => {
            let cert = selftest::run(seed, count);
            Ok(Emitted::certificate(cert))
        }
        Command::Verify { input, certificate } => verify(&input, &certificate),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", out.json) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: writing output: {e}");
                    return ExitCode::from(2);
                }
                _ => {}
            }
            if out.affirmative {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
