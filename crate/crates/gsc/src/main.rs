use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsc::pipeline::{
    dehn_against_config, exit_code_for, run_pipeline_upto, to_json, PipelineConfig, RelatorSource,
};

#[derive(Parser)]
#[command(name = "gsc", version, about = "graded small cancellation toolkit")]
struct Cli {
    /// pipeline configuration (JSON)
    #[arg(long, global = true, default_value = "configs/reference.json")]
    config: PathBuf,
    /// override every stage generator seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// artifact output directory
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// accepted for interface stability; phases run single-threaded
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// override the config's validation mode ("paper" or "scaled")
    #[arg(long, global = true)]
    mode: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// validate the graded schedule
    Validate,
    /// check C(ε, μ, ρ) and the classical metric condition per stage
    CheckSc,
    /// build the forbidden set and run the census
    Forbidden,
    /// count avoiding words (writes counts.csv)
    Count,
    /// certify exponential growth of the avoiding language
    Certify,
    /// build, scan and export the pruned tree
    Tree,
    /// Dehn-reduce a word against the stage-1 presentation
    Dehn { word: String },
    /// tree-side verification: convexity, relator overlap, survey
    VerifyTree,
    /// thinness survey only (runs the verify phase)
    Survey,
    /// full pipeline
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, gsc::GscError> {
    let mut cfg = PipelineConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        for stage in &mut cfg.stages {
            if let RelatorSource::Generator(spec) = &mut stage.relators {
                spec.seed = seed;
            }
        }
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = mode.clone();
    }

    if let Cmd::Dehn { word } = &cli.cmd {
        let (reduced, trace) = dehn_against_config(&cfg, word)?;
        let out = serde_json::json!({
            "input": word,
            "reduced": reduced.to_string(),
            "trivial": reduced.is_empty(),
            "trace": trace,
        });
        println!("{}", to_json(&out));
        return Ok(0);
    }

    let last_phase = match cli.cmd {
        Cmd::Validate => "validate",
        Cmd::CheckSc => "check-sc",
        Cmd::Forbidden => "forbidden",
        Cmd::Count => "count",
        Cmd::Certify => "certify",
        Cmd::Tree => "tree",
        Cmd::VerifyTree | Cmd::Survey | Cmd::Run => "verify",
        Cmd::Dehn { .. } => unreachable!(),
    };
    let report = run_pipeline_upto(&cfg, &cli.out_dir, last_phase)?;
    match cli.cmd {
        Cmd::Validate => println!("{}", to_json(&report.violations)),
        Cmd::CheckSc => println!("{}", to_json(&report.conditions)),
        Cmd::Forbidden => println!("{}", to_json(&report.census)),
        Cmd::Count => println!("{}", to_json(&report.artifacts)),
        Cmd::Certify => println!("{}", to_json(&report.certificate)),
        Cmd::Tree => println!("{}", to_json(&report.scan)),
        Cmd::VerifyTree => println!(
            "{}",
            to_json(&serde_json::json!({
                "convexity": report.convexity,
                "overlap": report.overlap,
            }))
        ),
        Cmd::Survey => println!("{}", to_json(&report.survey)),
        Cmd::Run => println!("{}", to_json(&report)),
        Cmd::Dehn { .. } => unreachable!(),
    }
    Ok(report.exit_code)
}
