use std::fs;
use std::path::Path;
use std::process::Command;

fn anisorib() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anisorib"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p
}

const SQUARE: &str = r#"
[domain]
outer = [[0, 0], [1, 0], [1, 1], [0, 1]]

[field]
type = "constant"
a11 = 1.0
a12 = 0.0
a22 = 4.0
"#;

#[test]
fn solver_convergence_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "kind = \"solver-convergence\"\nseed = 1\nout = \"out\"\ndump_eigenvector = true\n{SQUARE}\n[mesh]\ncells_per_gap = 8\nn = [16, 32]\n"
        ),
    );
    let out = anisorib().arg("run").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("out/solver_convergence.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "n,h,lambda1,residual,iterations,relative_change");
    assert_eq!(lines.count(), 2);
    assert!(dir.path().join("out/eigenvector_n32.csv").exists());
}

#[test]
fn density_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("kind = \"density\"\nlengths = [40, 80]\ns = 0.5\nseed = 2\nout = \"out\"\n{SQUARE}\n[mesh]\ncells_per_gap = 8\n");
    let cfg = write_config(dir.path(), &body);
    let first = anisorib().arg("run").arg(&cfg).output().unwrap();
    assert!(first.status.code().is_some(), "terminated by signal");
    let a = fs::read(dir.path().join("out/density.csv")).unwrap();
    anisorib().arg("run").arg(&cfg).output().unwrap();
    let b = fs::read(dir.path().join("out/density.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("l,square,i,j,length_share,target_share,share_deviation,angle_tv"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn check_reports_infeasible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("kind = \"asymptotics\"\nlengths = [10, 40]\ns = 0.5\nseed = 2\nout = \"out\"\n{SQUARE}\n[mesh]\ncells_per_gap = 8\n");
    let cfg = write_config(dir.path(), &body);
    let out = anisorib().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rows = fs::read_to_string(dir.path().join("out/feasibility.csv")).unwrap();
    assert!(rows.lines().nth(1).unwrap().contains("error"));
    assert!(rows.lines().nth(2).unwrap().ends_with(",ok"));
}

#[test]
fn bad_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"density\"\n");
    let out = anisorib().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn render_segments() {
    let dir = tempfile::tempdir().unwrap();
    let segs = dir.path().join("s.csv");
    fs::write(&segs, "x1,y1,x2,y2\n0,0,1,0\n1,0,1,1\n1,1,0,1\n0,1,0,0\n0.5,0,0.5,1\n").unwrap();
    let dom = dir.path().join("d.toml");
    fs::write(&dom, "outer = [[0,0],[1,0],[1,1],[0,1]]\n").unwrap();
    let svg = dir.path().join("o.svg");
    let out = anisorib().arg("render").arg(&segs).arg(&dom).arg(&svg).output().unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<line ").count(), 5);

    fs::write(&segs, "x1,y1,x2,y2\n").unwrap();
    let out = anisorib().arg("render").arg(&segs).arg(&dom).arg(&svg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
