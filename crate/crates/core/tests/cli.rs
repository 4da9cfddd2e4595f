use std::path::Path;
use std::process::{Command, Output};

fn ptc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PTC_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
packets = 40
packet_bits = 32
seed = 5

[sweep]
values = [2.0, 6.0, 10.0]
"#;

#[test]
fn ber_sim_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = ptc(&["ber-sim", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ber_sim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("scheme,H,x_value,ber,ber_ci_lo,ber_ci_hi,throughput,packets,seed"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ber_sim.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["packets"], 40);
}

#[test]
fn malformed_config_exits_with_2_and_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "packets = 10\nseed = \"x\n");
    let out = ptc(&["ber-sim", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));

    let unknown = write_config(dir.path(), "packets = 10\nbogus = 1\n");
    assert_eq!(ptc(&["ber-sim", "--config", &unknown], dir.path()).status.code(), Some(2));
    assert_eq!(ptc(&["ber-sim", "--config", "/nonexistent.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(ptc(&["no-such-command"], dir.path()).status.code(), Some(2));
}

#[test]
fn sinr_guard_failure_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL}\n[link]\nsinr_min = 1e30\n"));
    let out = ptc(&["ber-sim", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let forced = ptc(&["ber-sim", "--config", &config, "--override-sinr-guard"], dir.path());
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = write_config(a.path(), SMALL);
    assert!(ptc(&["ber-sim", "--config", &config, "--workers", "1"], a.path()).status.success());
    assert!(ptc(&["ber-sim", "--config", &config, "--workers", "3"], b.path()).status.success());
    assert_eq!(
        std::fs::read(a.path().join("ber_sim.csv")).unwrap(),
        std::fs::read(b.path().join("ber_sim.csv")).unwrap()
    );
}

#[test]
fn ber_approx_emits_one_column_per_depth() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptc(&["ber-approx", "--z-max", "4"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("ber_approx.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "H,x_value,ber_z0,ber_z1,ber_z2,ber_z3,ber_z4");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ber_approx.manifest.json")).unwrap()).unwrap();
    let coefficients: Vec<(u64, u64)> = manifest["results"]["transfer_function"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["d"].as_u64().unwrap(), c["a_d"].as_u64().unwrap()))
        .collect();
    assert_eq!(&coefficients[..4], &[(16, 1), (20, 2), (24, 4), (28, 8)]);
    assert!(manifest["results"]["approximation_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn throughput_reports_all_schemes_and_crossovers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
packets = 30
packet_bits = 64

[link]
h = 4

[sweep]
axis = "p_on"
values = [0.0, 0.5, 1.0]
snr_db = 12.0
"#,
    );
    let out = ptc(&["throughput", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let wide = std::fs::read_to_string(dir.path().join("throughput_wide.csv")).unwrap();
    assert_eq!(wide.lines().next().unwrap(), "x_value,hfsk,opportunistic_mfsk,coded_bpsk_ofdm,hfsk_analytic");
    assert_eq!(wide.lines().count(), 4);
    let long = std::fs::read_to_string(dir.path().join("throughput.csv")).unwrap();
    assert_eq!(long.lines().count(), 10);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("throughput.manifest.json")).unwrap()).unwrap();
    assert!(manifest["results"].get("p1_star").is_some());
    assert!(manifest["results"].get("p2_star").is_some());
}

#[test]
fn enumerate_paths_lists_the_anchor_event() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptc(&["enumerate-paths", "--h", "3", "--z", "1"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("enumerate_paths.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "16,1 0 0,1,123 132 123");
}

#[test]
fn validate_passes_and_names_injected_faults() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let clean = ptc(&["validate", "--level", "quick"], dir.path());
    assert!(start.elapsed().as_secs() < 60);
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stdout));
    let broken = ptc(&["validate", "--inject-fault", "likelihood"], dir.path());
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stdout).contains("FAIL likelihood_quadrature"));
}
