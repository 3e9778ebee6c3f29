use std::path::{Path, PathBuf};
use std::process::Command;

use gfisher::dependence::{gen_structure, BlockLayout, StructureKind};
use gfisher::omnibus::{omnibus, OmnibusOptions, OmnibusPanel};
use gfisher::{CorrMatrix, GFisherDef, InputPanel, Side};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    json: Value,
}

fn gfisher(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_gfisher")).args(args).current_dir(dir).env_remove("GFISHER_THREADS").output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    Run { code: out.status.code().unwrap_or(-1), stdout, json }
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"))
}

fn assert_schema(name: &str, value: &Value) {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path(name)).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name} schema violations: {errors:#?}");
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn setup() -> TempDir {
    let d = tempfile::tempdir().unwrap();
    let e = (-1.0f64).exp();
    write(d.path(), "fisher_one.json", r#"{"degrees": 2, "side": "one"}"#);
    write(d.path(), "fisher.json", r#"{"degrees": 2}"#);
    write(d.path(), "p3.csv", &format!("{e},{e},{e}\n"));
    write(d.path(), "z5.csv", "1.1\n-2.0\n0.3\n2.5\n-0.7\n");
    write(d.path(), "defs.json", r#"[{"degrees": 1}, {"degrees": 2}, {"degrees": 3}]"#);
    d
}

#[test]
fn fisher_pvalue_with_moment_ratio() {
    let d = setup();
    let r = gfisher(d.path(), &["pvalue", "--def", "fisher_one.json", "--p", "p3.csv", "--method", "mr"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("pvalue", &r.json);
    assert!((r.json["statistic"].as_f64().unwrap() - 6.0).abs() < 1e-12);
    // scipy.stats.chi2.sf(6, 6)
    assert!((r.json["pvalue"].as_f64().unwrap() - 0.42319008112684364).abs() < 1e-10);
}

#[test]
fn two_sided_only_method_rejects_one_sided_input() {
    let d = setup();
    let r = gfisher(d.path(), &["pvalue", "--def", "fisher_one.json", "--p", "p3.csv", "--method", "q"]);
    assert_eq!(r.code, 2);
    assert_schema("error", &r.json);
    assert_eq!(r.json["error"]["kind"], "requires_two_sided");
    assert!(r.json["error"]["message"].as_str().unwrap().contains("requires two-sided"));
}

#[test]
fn moment_ratio_and_brown_agree_under_independence() {
    let d = setup();
    let mr = gfisher(d.path(), &["pvalue", "--def", "fisher.json", "--z", "z5.csv", "--method", "mr"]);
    let gb = gfisher(d.path(), &["pvalue", "--def", "fisher.json", "--z", "z5.csv", "--method", "gb"]);
    let (a, b) = (mr.json["pvalue"].as_f64().unwrap(), gb.json["pvalue"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn default_method_is_hybrid_two_sided() {
    let d = setup();
    let r = gfisher(d.path(), &["pvalue", "--def", "fisher.json", "--z", "z5.csv"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.json["method"], "hyb");
    assert_eq!(r.json["side"], "two");
}

#[test]
fn single_definition_omnibus_reduces_to_component() {
    let d = setup();
    write(d.path(), "one.json", r#"[{"degrees": 2}]"#);
    let r = gfisher(d.path(), &["omnibus", "--defs", "one.json", "--z", "z5.csv", "--structure", "equal:III:0.3"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("omnibus", &r.json);
    let comp = r.json["components"][0]["pvalue"].as_f64().unwrap();
    for key in ["minp", "cc"] {
        assert!((r.json[key]["pvalue"].as_f64().unwrap() - comp).abs() < 1e-6, "{key}");
    }
}

#[test]
fn omnibus_matches_library_exactly() {
    let d = setup();
    let r = gfisher(d.path(), &["omnibus", "--defs", "defs.json", "--z", "z5.csv", "--structure", "equal:III:0.5"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("omnibus", &r.json);
    let sigma = gen_structure(StructureKind::Equal, BlockLayout::III, 5, 0.5).unwrap().sigma;
    let defs = [1.0, 2.0, 3.0].iter().map(|&k| GFisherDef::uniform(5, k, Side::TwoSided).unwrap()).collect();
    let panel = OmnibusPanel::new(defs, &sigma, &OmnibusOptions::default()).unwrap();
    let lib = omnibus(&panel, &InputPanel::zscores(vec![1.1, -2.0, 0.3, 2.5, -0.7])).unwrap();
    for (j, c) in lib.components.iter().enumerate() {
        assert_eq!(r.json["components"][j]["pvalue"].as_f64().unwrap().to_bits(), c.pvalue.to_bits());
        assert_eq!(r.json["statistics"][j].as_f64().unwrap().to_bits(), lib.statistics[j].to_bits());
    }
    assert_eq!(r.json["minp"]["pvalue"].as_f64().unwrap().to_bits(), lib.minp.pvalue.to_bits());
    assert_eq!(r.json["cc"]["pvalue"].as_f64().unwrap().to_bits(), lib.cc.pvalue.to_bits());
}

#[test]
fn malformed_definitions_exit_two() {
    let d = setup();
    write(d.path(), "bad.json", r#"[{"degrees": 2}, {"degree": 3}"#);
    let r = gfisher(d.path(), &["omnibus", "--defs", "bad.json", "--z", "z5.csv"]);
    assert_eq!(r.code, 2);
    assert_schema("error", &r.json);
    write(d.path(), "neg.json", r#"{"degrees": -1}"#);
    assert_eq!(gfisher(d.path(), &["pvalue", "--def", "neg.json", "--z", "z5.csv"]).code, 2);
    assert_eq!(gfisher(d.path(), &["pvalue", "--def", "missing.json", "--z", "z5.csv"]).code, 2);
}

#[test]
fn identity_covariance_is_diagonal() {
    let d = setup();
    let r = gfisher(d.path(), &["cov", "--def", "fisher.json", "--n", "4"]);
    assert_eq!(r.code, 0);
    for (i, line) in r.stdout.lines().enumerate() {
        for (j, v) in line.split(',').enumerate() {
            let v: f64 = v.parse().unwrap();
            assert_eq!(v, if i == j { 4.0 } else { 0.0 });
        }
    }
}

#[test]
fn structure_flag_round_trips() {
    let d = setup();
    let r = gfisher(d.path(), &["structure", "--kind", "inv-poly", "--layout", "II", "--n", "8", "--param", "1", "--out", "s.csv"]);
    assert_eq!(r.code, 0);
    let written = CorrMatrix::read_csv(d.path().join("s.csv")).unwrap();
    let direct = gen_structure(StructureKind::InvPoly, BlockLayout::II, 8, 1.0).unwrap().sigma;
    assert_eq!(written, direct);
    let a = gfisher(d.path(), &["cov", "--def", "fisher.json", "--sigma", "s.csv"]);
    let b = gfisher(d.path(), &["cov", "--def", "fisher.json", "--structure", "inv-poly:II:1", "--n", "8"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulation_is_reproducible_across_runs_and_threads() {
    let d = setup();
    write(d.path(), "f10.json", r#"{"degrees": 2, "n": 10}"#);
    let args = |out: &'static str, threads: &'static str| {
        vec![
            "--threads", threads, "simulate-tie", "--def", "f10.json", "--structure", "equal:III:0.5", "--method", "gb,mr",
            "--reps", "30000", "--seed", "11", "--alphas", "0.05,0.01", "--out", out,
        ]
    };
    let a = gfisher(d.path(), &args("a.csv", "1"));
    let b = gfisher(d.path(), &args("b.csv", "1"));
    let c = gfisher(d.path(), &args("c.csv", "3"));
    assert_eq!(a.code, 0, "{}", a.stdout);
    assert_schema("simulate-tie", &a.json);
    let read = |f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert!(String::from_utf8(read("a.csv")).unwrap().starts_with("method,alpha,rejections,rate,ratio,se,ratio_se\n"));
}

#[test]
fn omnibus_simulation_and_t_model() {
    let d = setup();
    let r = gfisher(
        d.path(),
        &["simulate-tie", "--defs", "defs.json", "--n", "5", "--structure", "equal:III:0.5", "--method", "mr", "--reps", "20000", "--model", "t:10", "--alphas", "0.05"],
    );
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("simulate-tie", &r.json);
    assert_eq!(r.json["reports"][0]["method"], "ccp-mr");
    assert_eq!(r.json["reports"][0]["config"]["model"]["kind"], "multivariate_t");
}

#[test]
fn survival_output_is_valid_and_deterministic() {
    let d = setup();
    write(d.path(), "f6.json", r#"{"degrees": 2, "n": 6}"#);
    let args = ["survival", "--def", "f6.json", "--structure", "poly:III:1", "--method", "mr,hyb", "--reps", "20000", "--seed", "5", "--out", "s.csv"];
    let a = gfisher(d.path(), &args);
    assert_eq!(a.code, 0, "{}", a.stdout);
    assert_schema("survival", &a.json);
    let first = std::fs::read(d.path().join("s.csv")).unwrap();
    let b = gfisher(d.path(), &args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(first, std::fs::read(d.path().join("s.csv")).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("quantile,statistic,empirical,band_lo,band_hi,mr,hyb\n"));
}

#[test]
fn glm_scores_from_a_design_manifest() {
    let d = setup();
    let mut csv = String::from("y,c1,c2,s1,s2,s3\n");
    for k in 0..120 {
        let c1 = (k % 2) as f64;
        let c2 = ((k * 37 % 17) as f64 - 8.0) / 5.0;
        let s = [(k % 3) as f64, (k * 7 % 3) as f64, ((k / 2) % 3) as f64];
        let y = if (k * 13 + 5) % 7 < 3 { 1 } else { 0 };
        csv.push_str(&format!("{y},{c1},{c2},{},{},{}\n", s[0], s[1], s[2]));
    }
    write(d.path(), "data.csv", &csv);
    write(d.path(), "design.json", r#"{"data": "data.csv", "response": "y", "inquiry": ["s1", "s2", "s3"], "controls": ["c1", "c2"], "family": "binomial"}"#);
    let r = gfisher(d.path(), &["glm-z", "--design", "design.json", "--sigma-out", "sh.csv"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("glm-z", &r.json);
    let sh = CorrMatrix::read_csv(d.path().join("sh.csv")).unwrap();
    assert_eq!(sh.n(), 3);
    // The estimated matrix feeds straight back in as --sigma.
    write(d.path(), "z.csv", &r.json["z"].as_array().unwrap().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    let p = gfisher(d.path(), &["pvalue", "--def", "fisher.json", "--z", "z.csv", "--sigma", "sh.csv", "--method", "mr"]);
    assert_eq!(p.code, 0, "{}", p.stdout);
    write(d.path(), "bad_design.json", r#"{"data": "data.csv", "response": "y", "inquiry": ["nope"], "family": "binomial"}"#);
    assert_eq!(gfisher(d.path(), &["glm-z", "--design", "bad_design.json"]).code, 2);
}

#[test]
fn generalized_gamma_without_solution_exits_three() {
    let d = setup();
    write(d.path(), "f20.json", r#"{"degrees": 2, "n": 20}"#);
    let z: Vec<String> = (0..20).map(|i| format!("{}", (i as f64 - 10.0) / 4.0)).collect();
    write(d.path(), "z20.csv", &z.join(","));
    let r = gfisher(d.path(), &["pvalue", "--def", "f20.json", "--z", "z20.csv", "--structure", "equal:I:0.9", "--method", "ggdmr"]);
    assert_eq!(r.code, 3, "{}", r.stdout);
    assert_schema("error", &r.json);
    assert_eq!(r.json["error"]["kind"], "no_solution");
}
