use std::path::Path;
use std::process::{Command, Output};

const QUADRATIC: &str = r#"
name = "quadratic-small"

[potential]
terms = [{ kind = "enveloped_quadratic_well", A = 0.0, L = 50.0, lambda1 = 1.0, lambda2 = 1.0 }]

[params]
B = 1.0
h = [0.2]

[surgery]
region = { shape = "disc", cx = 0.0, cy = 0.0, radius = 2.2 }
ramp = 0.5

[grid]
x_min = -3.6
x_max = 3.6
y_min = -3.6
y_max = 3.6
spacing = 0.1

[window]
a = 0.0
b = 1.0

[experiment]
seed = 11

[experiment.bottom]
levels = 6
c_max = 5.0

[experiment.volume]
mc_samples = 20000
"#;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("scenario.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_magstark"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

#[test]
fn volume_writes_every_format() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["volume"], QUADRATIC);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    assert!(out.join("volume.json").is_file());
    assert!(out.join("volume_volumes.csv").is_file());
    let svg = std::fs::read_to_string(out.join("volume.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS monte_carlo_volume"));
}

#[test]
fn emit_selects_formats() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["bottom", "--emit", "json", "--threads", "1"], QUADRATIC);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> =
        std::fs::read_dir(d.path().join("out")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["bottom.json".to_string()]);
    let json = std::fs::read_to_string(d.path().join("out/bottom.json")).unwrap();
    assert!(json.contains("\"schema_version\": 1"));
}

#[test]
fn failing_check_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["bottom", "--emit", "json"], &QUADRATIC.replace("c_max = 5.0", "c_max = 0.0"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL fitted_C"));
}

#[test]
fn bad_input_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["bottom"], &QUADRATIC.replace("seed = 11", "seed = 11\nunknown = true"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = run(d.path(), &["bottom", "--emit", "pdf"], QUADRATIC);
    assert_eq!(o.status.code(), Some(2));
}
