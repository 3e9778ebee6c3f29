//! One handler per subcommand. JSON goes to `--out` or stdout; tables go to
//! CSV files.

use std::path::Path;

use gfisher::dependence::{cov_matrix, gen_structure, SeriesConfig};
use gfisher::glm::{joint_ls_with, load_design, marginal_ls_with, marginal_score, ZKind};
use gfisher::harness::survival::default_quantile_grid;
use gfisher::harness::{
    empirical_tie, survival_compare, ConfigEcho, GFisherReplicate, NullModel, ReplicateTest, SimConfig, SurvivalTable, TieMode,
    TieReport, DEFAULT_MOMENT_REPS,
};
use gfisher::linalg::matrix_to_csv;
use gfisher::methods::DEFAULT_MOMENT_SEED;
use gfisher::omnibus::{omnibus as run_omnibus, MvnConfig, OmnibusKind, OmnibusOptions, OmnibusPanel, OmnibusReplicate};
use gfisher::stat::evaluate_detailed;
use gfisher::{
    to_pvalues, CorrMatrix, Error, GFisherDef, InputKind, InputPanel, MethodRegistry, MomentStrategy, NullSetting, PValueResult,
    PreparedPValue, Result, Side,
};
use serde::Serialize;

use crate::inputs::{
    build_defs, declared_n, load_def_specs, load_sigma, parse_alphas, parse_list, parse_model, read_panel, resolve_side, DefSpec,
};
use crate::{CovArgs, GlmArgs, MethodArgs, OmnibusArgs, PvalueArgs, SigmaArgs, StructureArgs, SurvivalArgs, TieArgs};

fn write_out(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("serializing output: {e}")))?;
    text.push('\n');
    write_out(&text, out)
}

fn moment_strategy(num: &MethodArgs, model: NullModel) -> MomentStrategy {
    let seed = num.moment_seed.unwrap_or(DEFAULT_MOMENT_SEED);
    match (num.moment_reps, num.moment_seed, model) {
        (None, None, NullModel::Gmm) => MomentStrategy::Auto,
        (reps, _, model) => MomentStrategy::Empirical { nreps: reps.unwrap_or(DEFAULT_MOMENT_REPS), seed, model },
    }
}

fn null_setting(def: GFisherDef, sigma: CorrMatrix, num: &MethodArgs, model: NullModel) -> Result<NullSetting> {
    Ok(NullSetting::new(def, sigma)?
        .with_series(SeriesConfig::with_kstar(num.kstar))
        .with_moments(moment_strategy(num, model))
        .with_cdf_acc(num.cdf_acc))
}

/// Definitions, sidedness and Σ for a command, sized from whichever of the
/// input panel, the definitions, an explicit n, or the matrix file fixes it.
struct Problem {
    defs: Vec<GFisherDef>,
    side: Side,
    sigma: CorrMatrix,
}

fn settle(specs: &[DefSpec], side: Option<Side>, sigma: &SigmaArgs, hints: &[Option<usize>]) -> Result<Problem> {
    let side = resolve_side(specs, side)?;
    let mut n = declared_n(specs)?;
    for &h in hints {
        match (n, h) {
            (Some(a), Some(b)) if a != b => return Err(Error::Dimension(format!("{b} inputs given for a statistic of length {a}"))),
            (None, Some(b)) => n = Some(b),
            _ => {}
        }
    }
    let loaded = load_sigma(sigma.sigma.as_deref(), sigma.structure.as_deref(), n)?;
    let n = match (n, &loaded) {
        (Some(a), Some(s)) if a != s.n() => return Err(Error::Dimension(format!("{a} inputs but correlation matrix is {0}x{0}", s.n()))),
        (Some(a), _) => a,
        (None, Some(s)) => s.n(),
        (None, None) => return Err(Error::InvalidInput("cannot tell the number of inputs; give --n or list the weights".into())),
    };
    let sigma = loaded.unwrap_or_else(|| CorrMatrix::identity(n));
    Ok(Problem { defs: build_defs(specs, n, side)?, side, sigma })
}

fn require_panel(z: Option<&Path>, p: Option<&Path>) -> Result<InputPanel> {
    read_panel(z, p)?.ok_or_else(|| Error::InvalidInput("give input z-scores with --z or p-values with --p".into()))
}

#[derive(Serialize)]
struct Settings {
    kstar: usize,
    cdf_acc: f64,
    moments: MomentStrategy,
}

#[derive(Serialize)]
struct PvalueOutput {
    command: &'static str,
    method: String,
    side: Side,
    n: usize,
    input_kind: InputKind,
    statistic: f64,
    pvalue: f64,
    /// Indices of input p-values clamped before the transform.
    clamped_inputs: Vec<usize>,
    diagnostics: gfisher::Diagnostics,
    settings: Settings,
}

pub fn pvalue(a: &PvalueArgs) -> Result<()> {
    let specs = load_def_specs(&a.def, false)?;
    let panel = require_panel(a.z.as_deref(), a.p.as_deref())?;
    let pb = settle(&specs, a.num.side, &a.sigma, &[Some(panel.values.len())])?;
    let def = pb.defs.into_iter().next().expect("one definition");
    let (t, tr) = evaluate_detailed(&def, &to_pvalues(&panel, pb.side)?)?;
    let setting = null_setting(def, pb.sigma, &a.num, NullModel::Gmm)?;
    let prepared = MethodRegistry::default().prepare(&a.method, &setting)?;
    let r = prepared.pvalue(t)?;
    let out = PvalueOutput {
        command: "pvalue",
        method: r.method,
        side: pb.side,
        n: setting.def.n(),
        input_kind: panel.kind,
        statistic: t,
        pvalue: r.pvalue,
        clamped_inputs: tr.clamped,
        diagnostics: r.diagnostics,
        settings: Settings { kstar: a.num.kstar, cdf_acc: a.num.cdf_acc, moments: setting.moments.clone() },
    };
    emit_json(&out, a.out.as_deref())
}

#[derive(Serialize)]
struct OmnibusOutput {
    command: &'static str,
    side: Side,
    n: usize,
    m: usize,
    methods: Vec<String>,
    statistics: Vec<f64>,
    components: Vec<PValueResult>,
    minp: PValueResult,
    cc: PValueResult,
}

fn omnibus_options(method: Option<&str>, m: usize, num: &MethodArgs, model: NullModel, mvn: MvnConfig) -> OmnibusOptions {
    OmnibusOptions {
        methods: method.map(|s| vec![s.to_ascii_lowercase(); m]),
        series: SeriesConfig::with_kstar(num.kstar),
        moments: moment_strategy(num, model),
        cdf_acc: num.cdf_acc,
        mvn,
    }
}

pub fn omnibus(a: &OmnibusArgs) -> Result<()> {
    let specs = load_def_specs(&a.defs, true)?;
    let panel = require_panel(a.z.as_deref(), a.p.as_deref())?;
    let pb = settle(&specs, a.num.side, &a.sigma, &[Some(panel.values.len())])?;
    let m = pb.defs.len();
    let mut mvn = MvnConfig { tol: a.minp_tol, ..MvnConfig::default() };
    if let Some(seed) = a.seed {
        mvn.seed = seed;
    }
    let opts = omnibus_options(a.method.as_deref(), m, &a.num, NullModel::Gmm, mvn);
    let om = OmnibusPanel::new(pb.defs, &pb.sigma, &opts)?;
    let r = run_omnibus(&om, &panel)?;
    let out = OmnibusOutput {
        command: "omnibus",
        side: pb.side,
        n: om.n(),
        m,
        methods: om.methods.clone(),
        statistics: r.statistics,
        components: r.components,
        minp: r.minp,
        cc: r.cc,
    };
    emit_json(&out, a.out.as_deref())
}

pub fn cov(a: &CovArgs) -> Result<()> {
    let specs = load_def_specs(&a.def, false)?;
    let pb = settle(&specs, a.side, &a.sigma, &[a.n])?;
    let c = cov_matrix(&pb.defs[0], &pb.sigma, &SeriesConfig::with_kstar(a.kstar))?;
    write_out(&matrix_to_csv(&c.cov), a.out.as_deref())
}

#[derive(Serialize)]
struct TieOutput {
    command: &'static str,
    reports: Vec<TieReport>,
}

fn tie_csv(reports: &[TieReport]) -> String {
    let mut out = String::new();
    for (k, r) in reports.iter().enumerate() {
        for (i, line) in r.to_csv().lines().enumerate() {
            if i == 0 {
                if k == 0 {
                    out.push_str("method,");
                    out.push_str(line);
                    out.push('\n');
                }
                continue;
            }
            out.push_str(&r.method);
            out.push(',');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn parse_mode(s: &str) -> Result<TieMode> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "threshold" => Ok(TieMode::Threshold),
        "per-replicate" | "replicate" => Ok(TieMode::PerReplicate),
        _ => Err(Error::Parse(format!("unknown mode {s:?}; expected threshold or per-replicate"))),
    }
}

pub fn simulate_tie(a: &TieArgs) -> Result<()> {
    let model = parse_model(&a.sim.model)?;
    let alphas = parse_alphas(&a.alphas)?;
    let mode = parse_mode(&a.mode)?;
    let methods = parse_list(&a.method);
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods given".into()));
    }
    let (specs, is_omnibus) = match (&a.def, &a.defs) {
        (Some(p), None) => (load_def_specs(p, false)?, false),
        (None, Some(p)) => (load_def_specs(p, true)?, true),
        _ => return Err(Error::InvalidInput("give --def or --defs".into())),
    };
    let pb = settle(&specs, a.num.side, &a.sigma, &[a.sim.n])?;
    let cfg = SimConfig::new(pb.sigma.clone(), a.sim.reps, a.sim.seed, model, pb.side)?;
    let mut tests: Vec<Box<dyn ReplicateTest>> = Vec::new();
    for m in &methods {
        if is_omnibus {
            let kind = match a.omnibus.to_ascii_lowercase().as_str() {
                "cc" | "ccp" => OmnibusKind::Cc,
                "minp" => OmnibusKind::MinP,
                other => return Err(Error::Parse(format!("unknown omnibus kind {other:?}; expected cc or minp"))),
            };
            let opts = omnibus_options(Some(m), pb.defs.len(), &a.num, model, MvnConfig::default());
            let panel = OmnibusPanel::new(pb.defs.clone(), &pb.sigma, &opts)?;
            tests.push(Box::new(OmnibusReplicate { panel, kind }));
        } else {
            let setting = null_setting(pb.defs[0].clone(), pb.sigma.clone(), &a.num, model)?;
            let method = MethodRegistry::default().prepare(m, &setting)?;
            tests.push(Box::new(GFisherReplicate { def: pb.defs[0].clone(), method }));
        }
    }
    let mut reports = Vec::new();
    for (t, m) in tests.iter().zip(&methods) {
        let mut r = empirical_tie(t.as_ref(), &cfg, &alphas, mode)?;
        if is_omnibus {
            r.method = format!("{}-{m}", r.method);
        }
        reports.push(r);
    }
    if let Some(path) = &a.out {
        std::fs::write(path, tie_csv(&reports))?;
    }
    emit_json(&TieOutput { command: "simulate-tie", reports }, None)
}

#[derive(Serialize)]
struct SurvivalOutput {
    command: &'static str,
    config: ConfigEcho,
    table: SurvivalTable,
}

pub fn survival(a: &SurvivalArgs) -> Result<()> {
    let model = parse_model(&a.sim.model)?;
    let specs = load_def_specs(&a.def, false)?;
    let pb = settle(&specs, a.num.side, &a.sigma, &[a.sim.n])?;
    let def = pb.defs[0].clone();
    let cfg = SimConfig::new(pb.sigma.clone(), a.sim.reps, a.sim.seed, model, pb.side)?;
    let setting = null_setting(def.clone(), pb.sigma, &a.num, model)?;
    let prepared = parse_list(&a.method)
        .iter()
        .map(|m| MethodRegistry::default().prepare(m, &setting))
        .collect::<Result<Vec<Box<dyn PreparedPValue>>>>()?;
    let refs: Vec<&dyn PreparedPValue> = prepared.iter().map(|b| b.as_ref()).collect();
    let table = survival_compare(&def, &refs, &cfg, &default_quantile_grid())?;
    if let Some(path) = &a.out {
        std::fs::write(path, table.to_csv())?;
    }
    emit_json(&SurvivalOutput { command: "survival", config: cfg.echo(), table }, None)
}

#[derive(Serialize)]
struct GlmOutput {
    command: &'static str,
    kind: ZKind,
    family: gfisher::glm::Family,
    n_obs: usize,
    n: usize,
    side: Side,
    z: Vec<f64>,
    pvalues: Vec<f64>,
    scale: f64,
    sigma_hat: Vec<Vec<f64>>,
}

pub fn glm_z(a: &GlmArgs) -> Result<()> {
    let data = load_design(&a.design)?;
    let panel = match a.kind.to_ascii_lowercase().as_str() {
        "score" if a.known_sigma.is_some() => {
            return Err(Error::InvalidInput("--known-sigma applies to the least-squares kinds only".into()));
        }
        "score" => marginal_score(&data)?,
        "marginal" => marginal_ls_with(&data, a.known_sigma)?,
        "joint" => joint_ls_with(&data, a.known_sigma)?,
        other => return Err(Error::Parse(format!("unknown kind {other:?}; expected score, marginal or joint"))),
    };
    if let Some(path) = &a.sigma_out {
        panel.sigma_hat.write_csv(path)?;
    }
    let pvalues = to_pvalues(&InputPanel::zscores(panel.z.clone()), a.side)?;
    let out = GlmOutput {
        command: "glm-z",
        kind: panel.kind,
        family: data.family,
        n_obs: data.n_obs(),
        n: panel.z.len(),
        side: a.side,
        z: panel.z,
        pvalues,
        scale: panel.scale,
        sigma_hat: panel.sigma_hat.rows(),
    };
    emit_json(&out, a.out.as_deref())
}

pub fn structure(a: &StructureArgs) -> Result<()> {
    let s = gen_structure(a.kind.parse()?, a.layout.parse()?, a.n, a.param)?;
    if s.repaired {
        eprintln!("note: base matrix was not positive semidefinite and was repaired to the nearest correlation matrix");
    }
    write_out(&s.sigma.to_csv_string(), a.out.as_deref())
}
