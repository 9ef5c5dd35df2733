use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = "model=gpt3-13b\ngpu=h100\nfiber=smf\ntotal_gpus=256\ninter_distance_km=50\n";
const GRID: &str = "model=gpt3-13b\ngpu=a100,h100\nfiber=hcf,smf\ntotal_gpus=256\ninter_distance_km=0.3:1000:4\n";

fn fibersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibersim")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_header_and_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", SCENARIO);
    let out = fibersim(&["run", "--config", arg(&cfg), "--trace", "--out", arg(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("model,gpu,fiber,"));
    assert!(lines[1].starts_with("gpt3-13b,h100,smf,256,"));
    let trace = fs::read_to_string(tmp.path().join("trace.tsv")).unwrap();
    assert!(trace.lines().last().unwrap().ends_with("\titeration_done\t-"));
}

#[test]
fn sweep_writes_tables_and_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "g.cfg", GRID);
    let out_dir = tmp.path().join("out");
    let out = fibersim(&["sweep", "--grid", arg(&grid), "--out", arg(&out_dir), "--plots", "--trace"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 16);
    assert!(results.contains("\r\n"));
    let delta = fs::read_to_string(out_dir.join("delta.csv")).unwrap();
    assert_eq!(delta.lines().count(), 1 + 8);
    for f in ["eta_vs_distance.svg", "delta_eta_vs_distance.svg", "multiplier_vs_distance.svg"] {
        let svg = fs::read_to_string(out_dir.join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
    assert_eq!(fs::read_dir(out_dir.join("traces")).unwrap().count(), 16);
}

#[test]
fn sweep_refuses_to_clobber_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "g.cfg", GRID);
    let out_dir = tmp.path().join("out");
    let dir = arg(&out_dir);
    assert_eq!(code(&fibersim(&["sweep", "--grid", arg(&grid), "--out", dir, "--jobs", "1"])), 0);
    let first = fs::read(out_dir.join("results.csv")).unwrap();

    let again = fibersim(&["sweep", "--grid", arg(&grid), "--out", dir]);
    assert_eq!(code(&again), 6);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));

    assert_eq!(code(&fibersim(&["sweep", "--grid", arg(&grid), "--out", dir, "--overwrite", "--jobs", "4"])), 0);
    assert_eq!(fs::read(out_dir.join("results.csv")).unwrap(), first);
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.cfg");
    assert_eq!(code(&fibersim(&["run", "--config", arg(&missing)])), 3);

    let bad = write(tmp.path(), "bad.cfg", &SCENARIO.replace("h100", "v100"));
    let out = fibersim(&["run", "--config", arg(&bad)]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("v100"));

    let range = write(tmp.path(), "range.cfg", &format!("{SCENARIO}bucket_mbytes=500\n"));
    let out = fibersim(&["run", "--config", arg(&range)]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bucket_bytes"));

    assert_eq!(code(&fibersim(&["run"])), 2);
    assert_eq!(code(&fibersim(&["frobnicate"])), 2);
}

#[test]
fn ablation_reports_and_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "g.cfg", GRID);
    let out = fibersim(&["ablate-bandwidth", "--grid", arg(&grid), "--out", arg(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("points: 16"));
    assert!(text.contains("max η improvement"));
    let table = fs::read_to_string(tmp.path().join("ablation.csv")).unwrap();
    assert!(table.starts_with("model,gpu,fiber,total_gpus,distance_m,"));
    assert_eq!(table.lines().count(), 17);
}

#[test]
fn report_regenerates_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = write(tmp.path(), "g.cfg", GRID);
    let out_dir = tmp.path().join("out");
    assert_eq!(code(&fibersim(&["sweep", "--grid", arg(&grid), "--out", arg(&out_dir)])), 0);
    let figs = tmp.path().join("figs");
    let out = fibersim(&["report", "--out", arg(&figs), "--csv", arg(&out_dir.join("results.csv"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
    assert!(figs.join("multiplier_vs_distance.svg").exists());

    let empty = tmp.path().join("empty");
    assert_eq!(code(&fibersim(&["report", "--out", arg(&empty)])), 3);
}
