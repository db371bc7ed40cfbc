use std::path::Path;
use std::process::{Command, Output};

fn qudit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qudit"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[odmr]
grid = { start = 20.0, stop = 34.0, step = 0.1 }
dist = { n_packets = 11 }
"#;

#[test]
fn beff_reproduces_reference_fringes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qudit(&["beff"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("B_eff = 223.7"), "{}", stdout(&o));
    let o = qudit(&["beff", "--f-r", "3.92"], dir.path());
    assert!(stdout(&o).contains("B_eff = 242.0"), "{}", stdout(&o));
}

#[test]
fn csv_files_are_rectangular_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    for sub in ["levels", "holeburn", "invert-field"] {
        let o = qudit(&["--config", cfg.to_str().unwrap(), sub], dir.path());
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
    }
    let mut seen = 0;
    for e in std::fs::read_dir(dir.path()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_none_or(|x| x != "csv") {
            continue;
        }
        seen += 1;
        let mut r = csv::Reader::from_path(&p).unwrap();
        let width = r.headers().unwrap().len();
        for rec in r.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), width, "{}", p.display());
            for field in rec.iter() {
                if let Ok(v) = field.parse::<f64>() {
                    assert!(v.is_finite(), "{}: {field}", p.display());
                }
            }
        }
    }
    assert!(seen >= 5, "only {seen} CSV files");
}

#[test]
fn sidecar_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = qudit(&["--config", cfg.to_str().unwrap(), "--seed", "42", "odmr"], &a);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = a.join("odmr.meta.json");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["subcommand"], "odmr");
    let o = qudit(&["--config", side.to_str().unwrap(), "odmr"], &b);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["odmr.csv", "odmr.dat"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_config_key_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[odmr]\nprobe_dbn = -20.0\n").unwrap();
    let o = qudit(&["--config", cfg.to_str().unwrap(), "odmr"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("probe_dbn"), "{}", stderr(&o));
}

#[test]
fn invalid_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[ramsey]\ntau = { start = 0.0, stop = 100.0, step = -1.0 }\n").unwrap();
    let o = qudit(&["--config", cfg.to_str().unwrap(), "ramsey"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ramsey.tau"), "{}", stderr(&o));
    let o = qudit(&["levels", "--bz", "NaN"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("field.bz"), "{}", stderr(&o));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qudit(&["selftest"], dir.path());
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);
}
