use std::path::PathBuf;

use serde_json::{json, Value};

use super::output::{RunReport, Table};
use super::scenario::*;
use super::*;
use crate::gaussian::ChannelParams;
use crate::pipeline::AcquisitionSetup;
use crate::raman::{MemoryParams, Retrieval};
use crate::tomography::MleConfig;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn schema() -> Value {
    let text = std::fs::read_to_string(crate_dir().join("schema/scenario.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Scenario with every optional field set.
fn full_scenario() -> Scenario {
    let pulse = PulseSpec {
        center: 0.5,
        fwhm: 0.15,
        peak: 6.0,
    };
    Scenario {
        name: "full".into(),
        seed: 1,
        state: Some(StateSection {
            squeeze_db: 1.6,
            antisqueeze_db: 2.0,
            angle: 0.1,
        }),
        channel: Some(ChannelSection {
            eta: 0.642,
            delta: 0.025,
            compare_eta: vec![0.8],
        }),
        memory: Some(MemorySection {
            params: MemoryParams {
                g_s: 1.0,
                g_a: 0.1,
                delta_k: 5.0,
                length: 1.0,
                n_z: 32,
                n_t: 64,
                retrieval: Retrieval::Backward,
            },
            write: pulse,
            read: pulse,
            input_mode: ModeSpec { center: 0.5, fwhm: 0.15 },
            optimizer: Some(OptimizerSection {
                bounds: vec![(0.2, 0.8), (0.05, 0.6)],
                population: 20,
                mutation: 0.8,
                crossover: 0.9,
                generations: 100,
                tolerance: 1e-4,
                window: 10,
            }),
            read_powers: vec![1.0, 2.0],
            convergence_tolerance: Some(0.01),
        }),
        homodyne: Some(AcquisitionSetup::new(1000, 227.2e-9)),
        tomography: Some(TomographySection {
            mle: MleConfig {
                damping: Some(0.5),
                ..MleConfig::default()
            },
            wigner_points: 41,
            wigner_extent: 3.0,
        }),
        bandwidth_sweep: Some(BandwidthSweepSection {
            rows: vec![BandwidthRow {
                bandwidth_mhz: 4.4,
                eta: 0.642,
                delta: 0.025,
                input_squeeze_db: 1.6,
            }],
            antisqueeze_db: vec![1.0, 3.0],
            monte_carlo_seeds: 2,
        }),
        outputs: OutputsSection {
            directory: Some("runs/x".into()),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        },
    }
}

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => {
            let name = r.strip_prefix("#/$defs/").expect("local reference");
            &root["$defs"][name]
        }
        None => node,
    }
}

/// Every object the schema describes has exactly the keys of `value`, and
/// required keys are a subset of them.
fn check_keys(root: &Value, node: &Value, value: &Value, path: &str) {
    let node = resolve(root, node);
    match value {
        Value::Object(map) => {
            let props = node["properties"].as_object().unwrap_or_else(|| panic!("{path}: no properties"));
            assert_eq!(node["additionalProperties"], json!(false), "{path}");
            let mut a: Vec<&String> = props.keys().collect();
            let mut b: Vec<&String> = map.keys().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "schema keys at {path}");
            for r in node["required"].as_array().into_iter().flatten() {
                assert!(map.contains_key(r.as_str().unwrap()), "{path}: required {r}");
            }
            for (k, v) in map {
                check_keys(root, &props[k], v, &format!("{path}.{k}"));
            }
        }
        Value::Array(items) => {
            if let Some(item_schema) = node.get("items") {
                for v in items {
                    check_keys(root, item_schema, v, &format!("{path}[]"));
                }
            }
        }
        _ => {}
    }
}

#[test]
fn published_schema_matches_scenario_types() {
    let root = schema();
    let value = serde_json::to_value(full_scenario()).unwrap();
    check_keys(&root, &root, &value, "scenario");
}

#[test]
fn full_scenario_round_trips() {
    let s = full_scenario();
    s.validate().unwrap();
    let text = serde_json::to_string(&s).unwrap();
    assert_eq!(Scenario::from_json(&text).unwrap(), s);
}

#[test]
fn example_scenarios_are_valid() {
    let root = schema();
    let mut n = 0;
    for entry in std::fs::read_dir(crate_dir().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let sc = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        check_subset(&root, &root, &v, &path.display().to_string());
        assert!(!sc.name.is_empty());
        n += 1;
    }
    assert!(n >= 6);
}

/// Keys of `value` are all described by the schema.
fn check_subset(root: &Value, node: &Value, value: &Value, path: &str) {
    let node = resolve(root, node);
    match value {
        Value::Object(map) => {
            let props = node["properties"].as_object().unwrap();
            for (k, v) in map {
                let sub = props.get(k).unwrap_or_else(|| panic!("{path}: key {k} not in schema"));
                check_subset(root, sub, v, &format!("{path}.{k}"));
            }
        }
        Value::Array(items) => {
            if let Some(s) = node.get("items") {
                for v in items {
                    check_subset(root, s, v, path);
                }
            }
        }
        _ => {}
    }
}

fn schema_error(text: &str) -> String {
    match Scenario::from_json(text) {
        Err(Error::Scenario(m)) => m,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_and_missing_seed_are_schema_errors() {
    assert!(schema_error(r#"{"name": "a", "seed": 1, "extra": 2}"#).contains("extra"));
    assert!(schema_error(r#"{"name": "a"}"#).contains("seed"));
    schema_error(r#"{"name": "a", "seed": 1, "state": {"squeeze_db": 1, "antisqueeze_db": 1, "angel": 0}}"#);
    schema_error(r#"{"name": "a", "seed": 1, "tomography": {"mle": {"cutof": 10}}}"#);
    schema_error(r#"{"name": "a", "seed": 1, "homodyne": {"acquisition": {"n_trials": 10, "x": 1}, "pulse_fwhm_s": 1e-7}}"#);
    schema_error(r#"{"name": "a", "seed": -1}"#);
    schema_error("not json");
}

#[test]
fn section_values_are_validated() {
    schema_error(r#"{"name": "a", "seed": 1, "channel": {"eta": 1.5, "delta": 0}}"#);
    schema_error(r#"{"name": "a", "seed": 1, "state": {"squeeze_db": 2, "antisqueeze_db": 1}}"#);
    schema_error(r#"{"name": "a/b", "seed": 1}"#);
    schema_error(r#"{"name": "a", "seed": 1, "outputs": {"formats": ["svg"]}}"#);
    schema_error(r#"{"name": "a", "seed": 1, "tomography": {"mle": {"cutoff": 0}}}"#);
    schema_error(r#"{"name": "a", "seed": 1, "bandwidth_sweep": {"rows": [], "antisqueeze_db": [1]}}"#);
    schema_error(
        r#"{"name": "a", "seed": 1, "bandwidth_sweep": {"rows": [{"bandwidth_mhz": 4.4, "eta": 0.6, "delta": 0.02, "input_squeeze_db": 1.6}], "antisqueeze_db": [1], "monte_carlo_seeds": 3}}"#,
    );
}

#[test]
fn commands_require_their_sections() {
    let bare = Scenario::from_json(r#"{"name": "a", "seed": 1}"#).unwrap();
    for cmd in [
        Command::SimulateMemory,
        Command::OptimizeWrite,
        Command::SimulateHomodyne,
        Command::Tomography,
        Command::EstimateChannel,
        Command::FullPipeline,
        Command::SweepBandwidth,
        Command::SweepReadPower,
    ] {
        let e = check_sections(cmd, &bare).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_SCHEMA, "{}", cmd.name());
        assert!(e.to_string().contains(cmd.name()));
    }
    let full = full_scenario();
    for cmd in [Command::SimulateMemory, Command::FullPipeline, Command::SweepBandwidth] {
        check_sections(cmd, &full).unwrap();
    }
}

#[test]
fn exit_codes_follow_error_categories() {
    assert_eq!(exit_code(&Error::Scenario("x".into())), EXIT_SCHEMA);
    assert_eq!(exit_code(&Error::SolverAccuracy("x".into())), EXIT_SOLVER);
    assert_eq!(exit_code(&Error::Empty("x".into())), EXIT_ESTIMATION);
    assert_eq!(exit_code(&Error::Locked("x".into())), EXIT_LOCKED);
    assert_eq!(exit_code(&Error::MissingArtifact("x".into())), EXIT_OTHER);
    let codes = [EXIT_OK, EXIT_OTHER, EXIT_SCHEMA, EXIT_SOLVER, EXIT_ESTIMATION, EXIT_LOCKED];
    let mut sorted = codes.to_vec();
    sorted.dedup();
    assert_eq!(sorted.len(), codes.len());
}

#[test]
fn default_output_directory() {
    let mut sc = Scenario::from_json(r#"{"name": "a", "seed": 1}"#).unwrap();
    assert_eq!(default_out(&sc, Command::Tomography, None), PathBuf::from("runs/a-tomography"));
    assert_eq!(
        default_out(&sc, Command::Tomography, Some(Path::new("/tmp/r"))),
        PathBuf::from("/tmp/r/a-tomography")
    );
    sc.outputs.directory = Some("here".into());
    assert_eq!(default_out(&sc, Command::Tomography, Some(Path::new("/tmp/r"))), PathBuf::from("here"));
}

fn bandwidth_scenario(seed: u64, mc: usize) -> Scenario {
    let mut s = full_scenario();
    s.seed = seed;
    s.state = None;
    s.memory = None;
    s.tomography = None;
    s.channel = None;
    s.outputs.directory = None;
    let b = s.bandwidth_sweep.as_mut().unwrap();
    b.monte_carlo_seeds = mc;
    b.rows.push(BandwidthRow {
        bandwidth_mhz: 24.0,
        eta: 0.757,
        delta: 0.021,
        input_squeeze_db: 0.9,
    });
    s
}

#[test]
fn run_writes_report_with_traceable_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let sc = bandwidth_scenario(4, 2);
    run_scenario(&sc, Command::SweepBandwidth, &out).unwrap();
    let report = RunReport::load(&out).unwrap();
    assert_eq!(report.command, "sweep-bandwidth");
    assert_eq!(report.seed, 4);
    assert!(report.seeds.contains_key("monte_carlo"));
    for (name, m) in &report.metrics {
        assert!(report.manifest.iter().any(|e| e.path == m.source), "{name} from {}", m.source);
    }
    for f in [
        "scenario.json",
        "bandwidth_sweep.csv",
        "fidelity_scan.csv",
        "delta_monte_carlo.csv",
        "delta_monte_carlo_summary.csv",
        "squeezing_vs_bandwidth.svg",
        "fidelity_vs_bandwidth.svg",
    ] {
        assert!(report.manifest.iter().any(|e| e.path == f), "{f}");
    }
    let t = Table::from_csv(&std::fs::read(out.join("bandwidth_sweep.csv")).unwrap(), "b").unwrap();
    let outsq = t.column("output_squeeze_db").unwrap();
    let expected = ChannelParams::new(0.757, 0.021).unwrap().map_variance(10f64.powf(-0.09));
    assert!((outsq[1] + 10.0 * expected.log10()).abs() < 1e-12);
    let resolved: Scenario =
        serde_json::from_str(&std::fs::read_to_string(out.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(resolved, sc);
}

#[test]
fn run_failure_leaves_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut sc = full_scenario();
    sc.memory.as_mut().unwrap().params.g_s = -1.0;
    assert!(run_scenario(&sc, Command::SimulateMemory, &out).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn svg_format_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut sc = bandwidth_scenario(1, 0);
    sc.outputs.formats = vec![Format::Csv, Format::Json];
    run_scenario(&sc, Command::SweepBandwidth, &out).unwrap();
    let report = RunReport::load(&out).unwrap();
    assert!(report.manifest.iter().all(|e| !e.path.ends_with(".svg")));
    replot(&out).unwrap();
    let report = RunReport::load(&out).unwrap();
    assert!(report.manifest.iter().any(|e| e.path == "fidelity_vs_bandwidth.svg"));
}
