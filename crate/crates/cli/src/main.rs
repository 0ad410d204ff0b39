mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchfill::grouping::{build_groups, reference_image};
use patchfill::theory_lab::{
    golfing_certificate, phase_to_csv, phase_transition, verify_lemma_bounds, generate_synthetic,
};
use patchfill::{
    admm_inpaint_from, apply_mask, audit_assumptions, psnr, read_pgm, sample_uniform, write_pgm,
    Error, Image, PatchConfig, PatchGroups, PatchLayout, Psnr, Result, SampleSet, SolveReport,
};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "patchfill", version, about = "Patch-based low-rank image inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling fraction in (0, 1] when no mask is given.
    #[arg(long)]
    fraction: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Reference image, grouping and ADMM recovery of a PGM image.
    Inpaint {
        #[command(flatten)]
        common: Common,
        /// Input PGM (overrides the config).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Coordinate mask file (overrides the config).
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Laplacian reference image only.
    Reference {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Sampling-basis audit, incoherence bounds and golfing certificates on a
    /// synthetic instance.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Recovery success rate against the sample count.
    PhaseTransition {
        #[command(flatten)]
        common: Common,
    },
    /// PSNR of `test` against `reference`.
    Psnr { reference: PathBuf, test: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::Numerical(_) | Error::UndefinedIncoherence => 4,
        _ => 2,
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = patchfill::RngSeed(s);
    }
    if let Some(f) = common.fraction {
        cfg.fraction = f;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn prepare(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let echo = cfg.to_json();
    println!("effective configuration:\n{echo}");
    write_text(&dir.join("effective_config.json"), &(echo + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads the input and its mask, drawing and saving a mask if none was given.
fn observe(cfg: &RunConfig) -> Result<(Image, SampleSet)> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["no input image given (`input` or --input)".into()]))?;
    let z = read_pgm(input)?;
    let s = match &cfg.mask {
        Some(path) => SampleSet::read_mask(z.side(), path)?,
        None => {
            let m = (cfg.fraction * z.len() as f64).round().max(1.0) as usize;
            let s = sample_uniform(z.side(), m, cfg.seed)?;
            s.write_mask(cfg.output_dir.join("mask.txt"))?;
            s
        }
    };
    Ok((z, s))
}

#[derive(Serialize)]
struct InpaintReport {
    psnr_reference: Psnr,
    psnr_recovered: Psnr,
    observed_pixels: usize,
    draws: usize,
    warning: bool,
    solve_report: SolveReport,
}

fn cmd_inpaint(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let dir = &cfg.output_dir;
    let (z, s) = observe(cfg)?;
    let y = apply_mask(&z, &s)?;
    let reference = reference_image(&y, &s, &cfg.reference)?;
    write_pgm(dir.join("reference.pgm"), &reference)?;
    let pcfg = PatchConfig::new(z.side(), cfg.patch.patch_n, cfg.patch.boundary)?;
    let groups = build_groups(&reference, &cfg.grouping, &pcfg)?;
    write_text(&dir.join("groups.json"), &groups.to_json(&pcfg))?;
    let layout = PatchLayout::new(pcfg, groups)?;
    let (recovered, solve) = admm_inpaint_from(&y, &s, &layout, &cfg.admm, &reference)?;
    write_pgm(dir.join("recovered.pgm"), &recovered)?;
    write_text(&dir.join("solve_trace.csv"), &solve.to_csv())?;
    let report = InpaintReport {
        psnr_reference: psnr(&z, &reference)?,
        psnr_recovered: psnr(&z, &recovered)?,
        observed_pixels: s.distinct().len(),
        draws: s.len(),
        warning: solve.warning.is_some(),
        solve_report: solve,
    };
    write_text(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(&report).expect("serializable") + "\n"),
    )?;
    println!("psnr_reference: {}", report.psnr_reference);
    println!("psnr_recovered: {}", report.psnr_recovered);
    if let Some(w) = &report.solve_report.warning {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_reference(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let (z, s) = observe(cfg)?;
    let reference = reference_image(&apply_mask(&z, &s)?, &s, &cfg.reference)?;
    write_pgm(cfg.output_dir.join("reference.pgm"), &reference)?;
    println!("psnr_reference: {}", psnr(&z, &reference)?);
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn cmd_verify(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let v = &cfg.verify;
    let z = generate_synthetic(&v.synthetic)?;
    let pcfg = PatchConfig::new(z.side(), v.patch_n, cfg.patch.boundary)?;
    let layout = PatchLayout::new(pcfg, PatchGroups::single_full(&pcfg))?;
    let mut checks = Vec::new();

    let audit = audit_assumptions(&layout);
    checks.push(Check {
        name: "lifted-operator sparsity".into(),
        pass: audit.nnz_within_bound,
        detail: format!(
            "max nnz per row {}, per column {}, M = {}",
            audit.max_row_nnz, audit.max_col_nnz, audit.m_ratio
        ),
    });

    let lemma = verify_lemma_bounds(&z, &layout)?;
    checks.push(Check {
        name: "tangent incoherence (Frobenius)".into(),
        pass: lemma.frobenius_holds,
        detail: format!("max lhs / bound = {:.3e}", lemma.frobenius_slack),
    });
    checks.push(Check {
        name: "tangent incoherence (B-norm)".into(),
        pass: lemma.b_norm_holds,
        detail: format!("max lhs / bound = {:.3e}", lemma.b_norm_slack),
    });

    let n2 = z.len() as f64;
    let m = (v.sample_fraction * n2).ceil() as usize;
    let runs = (0..v.runs)
        .map(|i| golfing_certificate(&z, &layout, m, cfg.seed.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let worst_cond1 = runs
        .iter()
        .map(|r| r.cond1_residual / (1.0 + r.y_norm))
        .fold(0.0, f64::max);
    let worst_tele = runs.iter().map(|r| r.telescoping_residual).fold(0.0, f64::max);
    checks.push(Check {
        name: "certificate range condition".into(),
        pass: worst_cond1 <= 1e-10,
        detail: format!("max ||(B - B'_L)Y|| / (1 + ||Y||) = {worst_cond1:.2e} over {} runs", runs.len()),
    });
    checks.push(Check {
        name: "certificate telescoping identity".into(),
        pass: worst_tele <= 1e-10,
        detail: format!("max residual = {worst_tele:.2e}"),
    });
    let good = runs.iter().filter(|r| r.cond2_norm <= v.cond2_threshold).count();
    let freq = good as f64 / runs.len() as f64;
    checks.push(Check {
        name: "certificate off-tangent norm (probabilistic)".into(),
        pass: freq >= v.pass_fraction,
        detail: format!(
            "||P_T_perp Y|| <= {} in {good}/{} runs (required fraction {}), m = {m}",
            v.cond2_threshold,
            runs.len(),
            v.pass_fraction
        ),
    });

    for c in &checks {
        println!("{:<5} {:<45} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    #[derive(Serialize)]
    struct VerifyReport<'a> {
        checks: &'a [Check],
        lemma: patchfill::theory_lab::LemmaReport,
        certificates: Vec<patchfill::theory_lab::CertificateReport>,
    }
    let report = VerifyReport {
        checks: &checks,
        lemma,
        certificates: runs,
    };
    write_text(
        &cfg.output_dir.join("verify.json"),
        &(serde_json::to_string_pretty(&report).expect("serializable") + "\n"),
    )
}

fn cmd_phase(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let p = &cfg.phase;
    let pcfg = PatchConfig::new(p.synthetic.n_side, p.patch_n, cfg.patch.boundary)?;
    let layout = PatchLayout::new(pcfg, PatchGroups::single_full(&pcfg))?;
    let points = phase_transition(&p.synthetic, &layout, &p.sweep, &cfg.admm, cfg.seed)?;
    let csv = phase_to_csv(&points);
    print!("{csv}");
    write_text(&cfg.output_dir.join("phase.csv"), &csv)
}

fn cmd_psnr(a: &Path, b: &Path) -> Result<()> {
    println!("{}", psnr(&read_pgm(a)?, &read_pgm(b)?)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Inpaint {
            common,
            input,
            mask,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.input = input.or(cfg.input);
            cfg.mask = mask.or(cfg.mask);
            cmd_inpaint(&cfg)
        }
        Command::Reference {
            common,
            input,
            mask,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.input = input.or(cfg.input);
            cfg.mask = mask.or(cfg.mask);
            cmd_reference(&cfg)
        }
        Command::Verify { common } => cmd_verify(&load_config(&common)?),
        Command::PhaseTransition { common } => cmd_phase(&load_config(&common)?),
        Command::Psnr { reference, test } => cmd_psnr(&reference, &test),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config(msgs) => {
                    eprintln!("configuration error:");
                    for m in msgs {
                        eprintln!("  - {m}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
