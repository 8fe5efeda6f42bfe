//! Pipeline orchestration: configuration parsing, seeded relator
//! generation, phase wiring (validate → check-sc → forbidden → count /
//! certify → tree → verify) and report aggregation.
//!
//! All structured artifacts are JSON (counts are CSV, trees are DOT) and
//! every phase is deterministic in (config, seed), so a run is
//! reproducible byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::avoidance::{
    build_automaton, certify_growth, count_table, export_counts, verify_recursion,
    AvoidanceAutomaton, GrowthCertificate, Profile,
};
use crate::cancellation::{
    check_classical_metric, check_condition_c, ConditionReport, FreeOracle, DEFAULT_EPS_CAP,
};
use crate::error::GscError;
use crate::forbidden::{build_forbidden_set, census, verify_sources, CensusReport, StageRelators};
use crate::quotient::{
    check_tree_relator_overlap, dehn_reduce, thinness_survey, verify_tree_convexity,
    ConvexityReport, DehnTrace, OverlapReport, StagePresentation, SurveyReport,
};
use crate::schedule::{
    parse_rational, validate_schedule, GradedSchedule, Mode, Rat, StageParams, Violation,
};
use crate::tree::{build_pruned_tree, export_dot, scan_paths, ChildPolicy, ScanReport};
use crate::words::{random_reduced_word, seeded_rng, symmetrize, ReducedWord, SymmetrizedSet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// "paper" or "scaled"
    pub mode: String,
    pub alpha: String,
    #[serde(rename = "K")]
    pub k: String,
    /// required in scaled mode
    #[serde(default)]
    pub scaled_bounds: Option<ScaledBounds>,
    pub stages: Vec<StageConfig>,
    pub tree: TreeConfig,
    pub counts: CountsConfig,
    pub verify: VerifyConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledBounds {
    pub eps_rho_bound: String,
    pub rho_growth: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub epsilon: String,
    pub mu: String,
    pub rho: String,
    pub sigma: String,
    pub relators: RelatorSource,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelatorSource {
    /// literal relator words
    Explicit { words: Vec<String> },
    /// one relator word per line
    File { path: String },
    /// seeded rejection sampling against the stage checkers
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub length: usize,
    pub count: usize,
    pub seed: u64,
    pub max_tries: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub depth: usize,
    /// depth of the exhaustive path scan run inside the pipeline
    pub scan_depth: usize,
    pub export_depth: usize,
    /// "lex", "drop_most_constrained" or "seeded"
    pub policy: String,
    #[serde(default)]
    pub policy_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    pub max_n: usize,
    /// growth base b and certified ratio λ for the certificate phase
    pub base: u64,
    pub lambda: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub max_len: usize,
    /// enumeration cap for exact geodesic checks; GSC_BUDGET overrides
    pub geodesic_cap: u64,
    pub survey_samples: usize,
    pub survey_seed: u64,
    pub apex_len: usize,
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<PipelineConfig, GscError> {
        let text = fs::read_to_string(path)?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.validate_shape()?;
        Ok(cfg)
    }

    fn validate_shape(&self) -> Result<(), GscError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(GscError::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        match self.mode.as_str() {
            "paper" => {}
            "scaled" => {
                if self.scaled_bounds.is_none() {
                    return Err(GscError::Config(
                        "scaled mode requires scaled_bounds".into(),
                    ));
                }
            }
            other => {
                return Err(GscError::Config(format!(
                    "unknown mode {other:?}, expected \"paper\" or \"scaled\""
                )))
            }
        }
        if self.stages.is_empty() {
            return Err(GscError::Config("at least one stage required".into()));
        }
        if self.tree.export_depth > self.tree.depth || self.tree.scan_depth > self.tree.depth {
            return Err(GscError::Config(
                "export_depth and scan_depth must not exceed tree depth".into(),
            ));
        }
        if self.verify.geodesic_cap == 0 || self.counts.max_n == 0 {
            return Err(GscError::Config("caps must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<GradedSchedule, GscError> {
        Ok(GradedSchedule {
            alpha: parse_rational(&self.alpha)?,
            k: parse_rational(&self.k)?,
            stages: self
                .stages
                .iter()
                .map(|s| {
                    Ok(StageParams {
                        epsilon: parse_rational(&s.epsilon)?,
                        mu: parse_rational(&s.mu)?,
                        rho: parse_rational(&s.rho)?,
                        sigma: parse_rational(&s.sigma)?,
                    })
                })
                .collect::<Result<_, GscError>>()?,
        })
    }

    pub fn validation_mode(&self) -> Result<Mode, GscError> {
        match self.mode.as_str() {
            "paper" => Ok(Mode::Paper),
            _ => {
                let b = self.scaled_bounds.as_ref().unwrap();
                Ok(Mode::Scaled {
                    eps_rho_bound: parse_rational(&b.eps_rho_bound)?,
                    rho_growth: parse_rational(&b.rho_growth)?,
                })
            }
        }
    }

    fn policy(&self) -> Result<ChildPolicy, GscError> {
        match self.tree.policy.as_str() {
            "lex" => Ok(ChildPolicy::Lex),
            "drop_most_constrained" => Ok(ChildPolicy::DropMostConstrained),
            "seeded" => Ok(ChildPolicy::Seeded(self.tree.policy_seed)),
            other => Err(GscError::Config(format!("unknown tree policy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenStats {
    pub tries: u64,
    pub accepted: usize,
    /// accepted / tries, as "p/q"
    pub acceptance_rate: String,
}

/// Rejection-samples cyclically reduced relators of the requested length
/// until the symmetrized set passes the classical C′(1/6) check and
/// C(ε, μ, ρ) with the stage parameters. Deterministic in the seed.
pub fn generate_relators(
    spec: &GeneratorSpec,
    epsilon: usize,
    mu: &Rat,
    rho: usize,
) -> Result<(SymmetrizedSet, GenStats), GscError> {
    if spec.length < 7 {
        return Err(GscError::Config(format!(
            "relator length {} below 7, where C'(1/6) is unsatisfiable for nontrivial sets",
            spec.length
        )));
    }
    let sixth = parse_rational("1/6")?;
    let mut rng = seeded_rng(spec.seed);
    let mut accepted: Vec<ReducedWord> = Vec::new();
    let mut tries: u64 = 0;
    while accepted.len() < spec.count {
        if tries >= spec.max_tries {
            return Err(GscError::Generation(format!(
                "relator generation exhausted {} tries with {} of {} accepted (rate {}/{})",
                spec.max_tries,
                accepted.len(),
                spec.count,
                accepted.len(),
                tries
            )));
        }
        tries += 1;
        let cand = random_reduced_word(spec.length, &mut rng);
        let mut trial = accepted.clone();
        trial.push(cand.clone());
        let Ok(set) = symmetrize(&trial) else { continue };
        // the candidate must survive cyclic reduction at full length, and
        // no rotation/inverse collision may collapse the symmetrized set
        if set.min_len() != spec.length
            || set.max_len() != spec.length
            || set.words().len() != trial.len() * 2 * spec.length
        {
            continue;
        }
        if !check_classical_metric(&set, &sixth)?.passed {
            continue;
        }
        if !check_condition_c(&set, epsilon, mu, rho, &FreeOracle, DEFAULT_EPS_CAP.max(epsilon))?
            .passed
        {
            continue;
        }
        accepted.push(cand);
    }
    let set = symmetrize(&accepted)?;
    let stats = GenStats {
        tries,
        accepted: accepted.len(),
        acceptance_rate: format!("{}/{}", accepted.len(), tries),
    };
    Ok((set, stats))
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseReport {
    pub name: String,
    /// "passed", "failed" or "skipped"
    pub status: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: String,
    pub phases: Vec<PhaseReport>,
    pub artifacts: BTreeMap<String, String>,
    pub violations: Vec<Violation>,
    pub conditions: Vec<ConditionReport>,
    pub generation: Vec<Option<GenStats>>,
    pub census: Option<CensusReport>,
    pub certificate: Option<GrowthCertificate>,
    pub scan: Option<ScanReport>,
    pub overlap: Option<OverlapReport>,
    pub convexity: Option<ConvexityReport>,
    pub survey: Option<SurveyReport>,
    /// 0 success, 2 check failure, 3 configuration error, 4 budget
    pub exit_code: i32,
}

/// Phases in execution order; a subcommand runs the prefix ending at its
/// phase.
pub const PHASES: [&str; 8] = [
    "validate", "relators", "check-sc", "forbidden", "count", "certify", "tree", "verify",
];

fn rat_to_usize(r: &Rat, what: &str) -> Result<usize, GscError> {
    if !r.is_integer() {
        return Err(GscError::Config(format!("{what} must be an integer, got {r}")));
    }
    r.to_integer()
        .to_usize()
        .ok_or_else(|| GscError::Config(format!("{what} out of range: {r}")))
}

fn floor_usize(r: &Rat) -> usize {
    (r.numer() / r.denom()).to_usize().unwrap_or(0)
}

/// Enumeration cap for exact geodesic checks, overridable via GSC_BUDGET.
pub fn effective_budget(configured: u64) -> u64 {
    match std::env::var("GSC_BUDGET") {
        Ok(v) => v.parse().unwrap_or(configured),
        Err(_) => configured,
    }
}

pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunReport, GscError> {
    run_pipeline_upto(cfg, out_dir, "verify")
}

/// Runs the phase prefix ending at `last_phase` and writes every artifact
/// the executed phases produce, plus report.json.
pub fn run_pipeline_upto(
    cfg: &PipelineConfig,
    out_dir: &Path,
    last_phase: &str,
) -> Result<RunReport, GscError> {
    if !PHASES.contains(&last_phase) {
        return Err(GscError::Config(format!("unknown phase {last_phase:?}")));
    }
    cfg.validate_shape()?;
    fs::create_dir_all(out_dir)?;
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode.clone(),
        phases: Vec::new(),
        artifacts: BTreeMap::new(),
        violations: Vec::new(),
        conditions: Vec::new(),
        generation: Vec::new(),
        census: None,
        certificate: None,
        scan: None,
        overlap: None,
        convexity: None,
        survey: None,
        exit_code: 0,
    };
    let wanted = |name: &str| {
        PHASES.iter().position(|p| *p == name).unwrap()
            <= PHASES.iter().position(|p| *p == last_phase).unwrap()
    };
    let mut halted = false;
    let pass =
        |report: &mut RunReport, name: &str, ok: bool, hard: bool, detail: String| {
            report.phases.push(PhaseReport {
                name: name.into(),
                status: if ok { "passed" } else { "failed" }.into(),
                detail,
            });
            if !ok {
                report.exit_code = 2;
            }
            ok || !hard
        };
    let skip = |report: &mut RunReport, name: &str| {
        report.phases.push(PhaseReport {
            name: name.into(),
            status: "skipped".into(),
            detail: "prerequisite failed".into(),
        });
    };

    // validate
    let schedule = cfg.schedule()?;
    let mode = cfg.validation_mode()?;
    let violations = validate_schedule(&schedule, &mode)?;
    let ok = violations.is_empty();
    let detail = if ok {
        format!("{} stage(s), no violations", schedule.stages.len())
    } else {
        format!("{} violation(s)", violations.len())
    };
    report.violations = violations;
    halted = !pass(&mut report, "validate", ok, true, detail) || halted;

    // relators
    let mut stage_sets: Vec<SymmetrizedSet> = Vec::new();
    if halted || !wanted("relators") {
        if wanted("relators") {
            skip(&mut report, "relators");
            halted = true;
        }
    } else {
        let mut detail = Vec::new();
        for (i, stage) in cfg.stages.iter().enumerate() {
            let params = &schedule.stages[i];
            let (set, stats): (SymmetrizedSet, Option<GenStats>) = match &stage.relators {
                RelatorSource::Explicit { words } => {
                    let ws = words
                        .iter()
                        .map(|w| ReducedWord::parse(w, false))
                        .collect::<Result<Vec<_>, _>>()?;
                    (symmetrize(&ws)?, None)
                }
                RelatorSource::File { path } => {
                    let text = fs::read_to_string(path)?;
                    let ws = text
                        .lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(|l| ReducedWord::parse(l.trim(), false))
                        .collect::<Result<Vec<_>, _>>()?;
                    (symmetrize(&ws)?, None)
                }
                RelatorSource::Generator(spec) => {
                    let (set, stats) = generate_relators(
                        spec,
                        floor_usize(&params.epsilon),
                        &params.mu,
                        rat_to_usize(&params.rho, "rho")?,
                    )?;
                    (set, Some(stats))
                }
            };
            detail.push(format!("stage {i}: {} symmetrized words", set.len()));
            report.generation.push(stats);
            stage_sets.push(set);
        }
        let artifact: Vec<BTreeMap<&str, serde_json::Value>> = stage_sets
            .iter()
            .zip(&report.generation)
            .enumerate()
            .map(|(i, (set, stats))| {
                let mut m = BTreeMap::new();
                m.insert("stage", serde_json::json!(i));
                m.insert(
                    "words",
                    serde_json::json!(set
                        .words()
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>()),
                );
                m.insert("generation", serde_json::to_value(stats).unwrap());
                m
            })
            .collect();
        write_artifact(out_dir, &mut report, "relators.json", &to_json(&artifact))?;
        pass(&mut report, "relators", true, true, detail.join("; "));
    }

    // check-sc
    if halted || !wanted("check-sc") {
        if wanted("check-sc") && halted {
            skip(&mut report, "check-sc");
        }
    } else {
        let mut all_ok = true;
        for (i, set) in stage_sets.iter().enumerate() {
            if set.is_empty() {
                // C(ε, μ, ρ) is vacuous for a stage with no relators
                continue;
            }
            let params = &schedule.stages[i];
            let eps = floor_usize(&params.epsilon);
            let rep = check_condition_c(
                set,
                eps,
                &params.mu,
                rat_to_usize(&params.rho, "rho")?,
                &FreeOracle,
                DEFAULT_EPS_CAP.max(eps),
            )?;
            all_ok &= rep.passed;
            report.conditions.push(rep);
        }
        let detail = format!("{} stage condition report(s)", report.conditions.len());
        halted = !pass(&mut report, "check-sc", all_ok, true, detail) || halted;
    }

    // forbidden + census
    let mut forbidden_words: Vec<ReducedWord> = Vec::new();
    let mut stage_relators: Vec<StageRelators> = Vec::new();
    if halted || !wanted("forbidden") {
        if wanted("forbidden") && halted {
            skip(&mut report, "forbidden");
        }
    } else {
        for (i, set) in stage_sets.iter().enumerate() {
            let params = &schedule.stages[i];
            stage_relators.push(StageRelators {
                relators: set.clone(),
                mu: params.mu.clone(),
                rho: params.rho.clone(),
                sigma: rat_to_usize(&params.sigma, "sigma")?,
            });
        }
        let fs_set = build_forbidden_set(&stage_relators)?;
        verify_sources(&fs_set)?;
        forbidden_words = fs_set.word_list();
        let census_report = census(&stage_relators, &fs_set);
        let ok = census_report.passed;
        report.census = Some(census_report);
        write_artifact(out_dir, &mut report, "forbidden.json", &to_json(&fs_set))?;
        pass(
            &mut report,
            "forbidden",
            ok,
            false,
            format!("{} forbidden word(s)", forbidden_words.len()),
        );
    }

    // count
    let mut automaton: Option<AvoidanceAutomaton> = None;
    if halted || !wanted("count") {
        if wanted("count") && halted {
            skip(&mut report, "count");
        }
    } else {
        let a = build_automaton(&forbidden_words);
        let ct = count_table(&a, cfg.counts.max_n);
        let recursion_violation = verify_recursion(&ct, &forbidden_words);
        write_artifact(out_dir, &mut report, "counts.csv", &export_counts(&ct))?;
        let ok = recursion_violation.is_none();
        pass(
            &mut report,
            "count",
            ok,
            false,
            match recursion_violation {
                None => format!("counts up to n = {} satisfy the recursion", cfg.counts.max_n),
                Some(n) => format!("recursion violated at n = {n}"),
            },
        );
        automaton = Some(a);
    }

    // certify
    if halted || !wanted("certify") {
        if wanted("certify") && halted {
            skip(&mut report, "certify");
        }
    } else {
        let mut by_len: BTreeMap<usize, num::BigUint> = BTreeMap::new();
        for w in &forbidden_words {
            *by_len.entry(w.len()).or_default() += 1u32;
        }
        let min_len = by_len.keys().next().copied().unwrap_or(1);
        let lambda = parse_rational(&cfg.counts.lambda)?;
        let cert = certify_growth(cfg.counts.base, &lambda, &Profile::Explicit(by_len), min_len);
        let ok = cert.certified;
        let detail = format!(
            "b = {}, lambda = {}, margin = {}",
            cert.b, cert.lambda, cert.margin
        );
        report.certificate = Some(cert);
        pass(&mut report, "certify", ok, false, detail);
    }

    // tree
    let mut tree_ok = false;
    if halted || !wanted("tree") {
        if wanted("tree") && halted {
            skip(&mut report, "tree");
        }
    } else {
        let a = automaton
            .take()
            .unwrap_or_else(|| build_automaton(&forbidden_words));
        // keep the automaton alive for the verify phase below
        automaton = Some(a);
        let a = automaton.as_ref().unwrap();
        match build_pruned_tree(a, cfg.tree.depth, cfg.policy()?) {
            Ok(t) => {
                let scan = scan_paths(&t, cfg.tree.scan_depth);
                let ok = scan.all_paths_avoid
                    && scan.all_reduced
                    && scan.all_states_safe
                    && scan.child_count_ok;
                write_artifact(
                    out_dir,
                    &mut report,
                    "tree.dot",
                    &export_dot(&t, cfg.tree.export_depth),
                )?;
                let detail = format!(
                    "depth {}, scanned {} node(s) at depth {}",
                    cfg.tree.depth, scan.nodes, cfg.tree.scan_depth
                );
                report.scan = Some(scan);
                tree_ok = pass(&mut report, "tree", ok, true, detail) && ok;
                halted = halted || !ok;
            }
            Err(e) => {
                pass(&mut report, "tree", false, true, e.to_string());
                halted = true;
            }
        }
    }

    // verify
    if !tree_ok || !wanted("verify") {
        if wanted("verify") && halted {
            skip(&mut report, "verify");
        }
    } else {
        let a = automaton.as_ref().unwrap();
        let t = build_pruned_tree(a, cfg.tree.depth, cfg.policy()?)?;
        let params = &schedule.stages[0];
        let p = StagePresentation::new(
            stage_sets[0].clone(),
            floor_usize(&params.epsilon),
            params.mu.clone(),
            params.rho.clone(),
        );
        let cap = effective_budget(cfg.verify.geodesic_cap);
        let convexity = verify_tree_convexity(&t, &p, cfg.verify.max_len, cap);
        let overlap = check_tree_relator_overlap(&t, &p);
        let survey = thinness_survey(
            &t,
            &p,
            cfg.verify.survey_samples,
            cfg.verify.survey_seed,
            cfg.verify.apex_len,
        );
        let ok = convexity.passed && overlap.passed;
        let detail = format!(
            "{} segment(s) checked, overlap ratio {}",
            convexity.segments_checked, overlap.max_ratio
        );
        report.convexity = Some(convexity);
        report.overlap = Some(overlap);
        report.survey = Some(survey);
        pass(&mut report, "verify", ok, false, detail);
    }

    write_artifact_report(out_dir, &mut report)?;
    Ok(report)
}

/// Dehn-reduces a word against the stage-1 presentation of a config,
/// without running the tree phases. Used by the `dehn` subcommand.
pub fn dehn_against_config(
    cfg: &PipelineConfig,
    word: &str,
) -> Result<(ReducedWord, DehnTrace), GscError> {
    let schedule = cfg.schedule()?;
    let set = stage1_relators(cfg)?;
    let params = &schedule.stages[0];
    let p = StagePresentation::new(
        set,
        floor_usize(&params.epsilon),
        params.mu.clone(),
        params.rho.clone(),
    );
    let w = ReducedWord::parse(word, true)?;
    Ok(dehn_reduce(&w, &p))
}

/// Stage-1 relator set of a config without touching the filesystem for
/// artifacts.
fn stage1_relators(cfg: &PipelineConfig) -> Result<SymmetrizedSet, GscError> {
    let schedule = cfg.schedule()?;
    let stage = &cfg.stages[0];
    let params = &schedule.stages[0];
    match &stage.relators {
        RelatorSource::Explicit { words } => {
            let ws = words
                .iter()
                .map(|w| ReducedWord::parse(w, false))
                .collect::<Result<Vec<_>, _>>()?;
            symmetrize(&ws)
        }
        RelatorSource::File { path } => {
            let text = fs::read_to_string(path)?;
            let ws = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| ReducedWord::parse(l.trim(), false))
                .collect::<Result<Vec<_>, _>>()?;
            symmetrize(&ws)
        }
        RelatorSource::Generator(spec) => Ok(generate_relators(
            spec,
            floor_usize(&params.epsilon),
            &params.mu,
            rat_to_usize(&params.rho, "rho")?,
        )?
        .0),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

fn write_artifact(
    out_dir: &Path,
    report: &mut RunReport,
    name: &str,
    content: &str,
) -> Result<(), GscError> {
    let path = out_dir.join(name);
    fs::write(&path, content)?;
    report
        .artifacts
        .insert(name.to_string(), path.display().to_string());
    Ok(())
}

fn write_artifact_report(out_dir: &Path, report: &mut RunReport) -> Result<(), GscError> {
    let path = out_dir.join("report.json");
    report
        .artifacts
        .insert("report.json".into(), path.display().to_string());
    fs::write(&path, to_json(report))?;
    Ok(())
}

/// Exit code for errors surfaced outside phase bookkeeping.
pub fn exit_code_for(err: &GscError) -> i32 {
    match err {
        GscError::BudgetExhausted(_) => 4,
        GscError::Config(_)
        | GscError::BadRational(_)
        | GscError::EmptySchedule
        | GscError::BadStage { .. }
        | GscError::Json(_)
        | GscError::BadLetter(_)
        | GscError::NotReduced(_)
        | GscError::Io(_) => 3,
        _ => 2,
    }
}
