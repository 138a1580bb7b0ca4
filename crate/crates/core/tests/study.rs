use lincov_fidelity::metrics::CSV_COLUMNS;
use lincov_fidelity::study::{
    default_config, evaluate_study, metrics_csv, run_study, sample_dump_name, StudyConfig, MANIFEST_FILE, METRICS_FILE,
};

fn small_config(dir: &std::path::Path) -> StudyConfig {
    let mut c = default_config();
    c.grid.t_end = 0.4;
    c.grid.count = 5;
    c.monte_carlo.samples = 300;
    c.output.dir = dir.to_path_buf();
    c
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn outputs_have_the_fixed_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.output.dump_samples = vec![0.21];
    let run = run_study(&cfg).unwrap();

    let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
    }
    assert_eq!(column(&csv, "t")[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(column(&csv, "t")[4].parse::<f64>().unwrap(), 0.4);
    for flag in column(&csv, "wussos_converged") {
        assert!(flag == "true" || flag == "false");
    }

    // nearest node to 0.21 is t = 0.2
    assert_eq!(run.dump_paths.len(), 1);
    assert_eq!(run.dump_paths[0], dir.path().join(sample_dump_name(0.2)));
    let dump = std::fs::read_to_string(&run.dump_paths[0]).unwrap();
    assert_eq!(dump.lines().next().unwrap(), "x,y,z,vx,vy,vz");
    assert_eq!(dump.lines().count(), 301);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], cfg.monte_carlo.seed);
    assert_eq!(manifest["grid_count"], 5);
    assert_eq!(manifest["samples"], 300);
    assert!(manifest["files"].as_array().unwrap().len() == 2);
    assert!(manifest["wall_seconds"]["total"].as_f64().unwrap() >= 0.0);
}

#[test]
fn variants_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let full = metrics_csv(&evaluate_study(&small_config(dir.path())).unwrap().reports);
    let mut cfg = small_config(dir.path());
    cfg.variants.monte_carlo = false;
    cfg.variants.unscented = false;
    let second_only = metrics_csv(&evaluate_study(&cfg).unwrap().reports);
    for name in ["smdm_2", "esmd_2", "esmdole_2", "mcr_2", "wussos", "wussolc", "max_skew_2", "max_kurt_2"] {
        assert_eq!(column(&full, name), column(&second_only, name), "{name}");
    }
    for name in ["smdm_mc", "esmd_mc", "smdm_ut", "wussadl", "max_skew_mc"] {
        assert!(column(&second_only, name).iter().all(|c| c.is_empty()), "{name}");
    }
    let mut cfg = small_config(dir.path());
    cfg.variants.second_order = false;
    let no_second = metrics_csv(&evaluate_study(&cfg).unwrap().reports);
    for name in ["smdm_mc", "esmd_mc", "mcr_mc", "smdm_ut", "wussadl", "sadl"] {
        assert_eq!(column(&full, name), column(&no_second, name), "{name}");
    }
    assert!(column(&no_second, "esmd_2").iter().all(|c| c.is_empty()));
}

#[test]
fn repeated_evaluation_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = metrics_csv(&evaluate_study(&cfg).unwrap().reports);
    let b = metrics_csv(&evaluate_study(&cfg).unwrap().reports);
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.monte_carlo.seed += 1;
    let c = metrics_csv(&evaluate_study(&other).unwrap().reports);
    assert_ne!(column(&a, "smdm_mc"), column(&c, "smdm_mc"));
    assert_eq!(column(&a, "esmd_2"), column(&c, "esmd_2"));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path());

    let mut c = base.clone();
    c.monte_carlo.samples = 1;
    assert!(evaluate_study(&c).unwrap_err().to_string().contains("at least 2"));

    let mut c = base.clone();
    c.grid.count = 1;
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.initial.covariance[3][3] = -1.0;
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.initial.mean.pop();
    assert!(c.validate().is_err());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = dir.path().join("study.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(StudyConfig::from_file(&path).unwrap(), cfg);
}
