use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn kdvist(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvist"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    // test data never contains quoted commas in the columns inspected
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const DELTA: &str = "[profile]\nkind = \"delta\"\nparams = [1.0]\n";
const ZERO: &str = "[profile]\nkind = \"zero\"\n";

#[test]
fn reflection_table_for_delta() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "r.toml", &format!("{DELTA}[reflection]\nh = 1.0\nnodes = 16\n"));
    let o = kdvist(dir.path(), &["reflection", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["lambda", "h", "re_R", "im_R", "abs_R"]);
    assert_eq!(rows.len(), 16);
    for r in &rows {
        let abs: f64 = r[4].parse().unwrap();
        assert!(abs <= 1.0);
        let (lambda, re, im): (f64, f64, f64) = (r[0].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        let k = num_complex::Complex64::new(lambda, 1.0);
        let want = 1.0 / (2.0 * num_complex::Complex64::i() * k - 1.0);
        assert!((want.re - re).abs() < 1e-10 && (want.im - im).abs() < 1e-10);
    }
}

#[test]
fn reflection_of_zero_profile_is_zero_and_table_file_loads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", &format!("{ZERO}[reflection]\nnodes = 8\n[output]\ntable = \"r.tab\"\n"));
    let o = kdvist(dir.path(), &["reflection", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert_eq!(r[2..], ["0.0000000000000000e0"; 3]);
    }
    let tab = fs::read_to_string(dir.path().join("r.tab")).unwrap();
    assert!(tab.contains("n 8"));
}

#[test]
fn unknown_key_exits_with_status_two_and_names_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", &format!("{DELTA}[grid]\nx_maximum = 3.0\n"));
    let o = kdvist(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x_maximum"), "{}", stderr(&o));
}

#[test]
fn invalid_values_and_conflicts_are_configuration_errors() {
    let dir = TempDir::new().unwrap();
    for (i, text) in [
        format!("{DELTA}[grid]\nt = [-0.1]\n"),
        format!("command = \"certify\"\n{DELTA}"),
        "[profile]\nkind = \"no_such_profile\"\n".to_string(),
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(&dir, &format!("c{i}.toml"), text);
        let o = kdvist(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        if i == 1 {
            assert!(stderr(&o).contains("conflicts"), "{}", stderr(&o));
        }
    }
    let o = kdvist(dir.path(), &["solve", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_zero_profile_gives_zero_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", &format!("{ZERO}[grid]\npoints = 11\nt = [0.1, 1.0]\n"));
    let o = kdvist(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        ["x", "t", "q", "logdet", "norm_bound", "fd_crosscheck_error", "nodes_used", "error"]
    );
    assert_eq!(rows.len(), 22);
    assert!(rows.iter().all(|r| r[2] == "0.0000000000000000e0" && r[7].is_empty()));
}

#[test]
fn solve_delta_grid_in_input_order_with_gnuplot_companion() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "d.toml",
        &format!("{DELTA}[grid]\nx_min = -4.0\nx_max = 4.0\npoints = 101\nt = [0.1]\n[output]\npath = \"q.csv\"\ngnuplot = \"q.dat\"\n"),
    );
    let o = kdvist(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&fs::read_to_string(dir.path().join("q.csv")).unwrap());
    assert_eq!(rows.len(), 101);
    let xs: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
    assert_eq!((xs[0], xs[100]), (-4.0, 4.0));
    for r in &rows {
        assert!(r[7].is_empty());
        let fd: f64 = r[5].parse().unwrap();
        assert!(fd < 1e-6);
        assert!(r[2].parse::<f64>().unwrap().is_finite());
    }
    let plot = fs::read_to_string(dir.path().join("q.dat")).unwrap();
    assert!(plot.starts_with("# t = 1.0000000000000001e-1"));
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 101);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let text = format!("{DELTA}[grid]\npoints = 9\nt = [0.5]\n");
    let cfg = write_config(&dir, "d.toml", &text);
    let c = cfg.to_str().unwrap();
    for (fmt, workers) in [("csv", "1"), ("json", "1"), ("csv", "2")] {
        let a = kdvist(dir.path(), &["solve", "--config", c, "--format", fmt, "--workers", workers, "--out", "a.out"]);
        let b = kdvist(dir.path(), &["solve", "--config", c, "--format", fmt, "--workers", workers, "--out", "b.out"]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(b.status.code(), Some(0));
        let (fa, fb) = (fs::read(dir.path().join("a.out")).unwrap(), fs::read(dir.path().join("b.out")).unwrap());
        assert_eq!(fa, fb, "{fmt} with {workers} workers");
        if fmt == "json" {
            let v: serde_json::Value = serde_json::from_slice(&fa).unwrap();
            assert_eq!(v["rows"].as_array().unwrap().len(), 9);
        }
    }
}

#[test]
fn refused_time_is_recorded_per_point_and_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "d.toml", &format!("{DELTA}[grid]\npoints = 3\nt = [1e-6]\n"));
    let o = kdvist(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(!text.contains("NaN"));
    let (_, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2].is_empty() && !r[7].is_empty()));
}

const SMALL_CERTIFY: &str = "[grid]\npoints = 9\n[certify]\nsamples = 30\nt = [0.1, 1.0]\n";

#[test]
fn certify_delta_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "d.toml", &format!("{DELTA}{SMALL_CERTIFY}"));
    let o = kdvist(dir.path(), &["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["invariant", "value", "limit", "margin", "status", "note"]);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        names,
        [
            "unit_bound",
            "reflection_symmetry",
            "transfer_determinant",
            "herglotz",
            "spectral_radius",
            "singular_value_decay",
            "determinant_consistency",
            "pole_free"
        ]
    );
    assert!(rows.iter().all(|r| r[4] == "PASS"));
}

#[test]
fn certify_zero_profile_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", &format!("{ZERO}{SMALL_CERTIFY}"));
    let o = kdvist(dir.path(), &["certify", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["summary"]["failed"], serde_json::json!([]));
}

#[test]
fn certify_flags_a_corrupted_table() {
    let dir = TempDir::new().unwrap();
    let table = "# profile corrupted\nh 1.0\nn 3\n-1.0 0.2 0.1 0.5\n0.0 1.25 0.0 1.0\n1.0 0.2 -0.1 0.5\n";
    fs::write(dir.path().join("bad.tab"), table).unwrap();
    let cfg = write_config(&dir, "d.toml", &format!("{DELTA}{SMALL_CERTIFY}table = \"bad.tab\"\n"));
    let o = kdvist(dir.path(), &["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let (_, rows) = csv_rows(&stdout(&o));
    let bound = rows.iter().find(|r| r[0] == "unit_bound").unwrap();
    assert_eq!(bound[4], "FAIL");
    assert_eq!(bound[1], "1.2500000000000000e0");
    assert!(stderr(&o).contains("unit_bound"));
}

#[test]
fn validate_zero_profile_reports_zero_discrepancy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", &format!("{ZERO}[validate]\nmode = \"mollify\"\npoints = 5\n"));
    let o = kdvist(dir.path(), &["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["n", "sup_discrepancy", "fd_crosscheck_error"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1] == "0.0000000000000000e0"));

    let cfg = write_config(&dir, "z2.toml", ZERO);
    let o = kdvist(dir.path(), &["validate", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["summary"]["discrepancy"], serde_json::json!(0.0));
}

#[test]
fn validate_mollified_delta_decreases() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "d.toml", &format!("{DELTA}[validate]\npoints = 7\nn = [4, 8, 16]\n"));
    let o = kdvist(dir.path(), &["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    let sups: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(sups.len(), 3);
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn command_can_come_from_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "z.toml", &format!("command = \"reflection\"\n{ZERO}[reflection]\nnodes = 4\n"));
    let o = kdvist(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_rows(&stdout(&o)).1.len(), 4);
}
