use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

const SPEC: &str = r#"{"sequence": [
    {"activity": "a"},
    {"choice": [{"weight": 1, "block": {"activity": "b"}}, {"weight": 1, "block": {"parallel": [{"activity": "c"}, {"activity": "d"}]}}]},
    {"activity": "e"}
]}"#;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_streamhm"));
    cmd.env_remove("STREAMHM_OUT_DIR");
    cmd
}

fn ok(mut cmd: Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn generate_log(dir: &Path, name: &str, cases: usize, seed: u64) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    fs::write(&spec, SPEC).unwrap();
    let log = dir.join(name);
    let mut cmd = bin();
    cmd.args(["generate", "--spec"]).arg(&spec);
    cmd.args(["--cases", &cases.to_string(), "--seed", &seed.to_string(), "--out"]).arg(&log);
    ok(cmd);
    log
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn mine_is_reproducible_and_rows_follow_the_trigger() {
    let dir = tempfile::tempdir().unwrap();
    let log = generate_log(dir.path(), "s.log", 120, 3);
    let events = line_count(&log);
    for run in ["r1", "r2"] {
        let mut cmd = bin();
        cmd.args(["mine", "--miner", "online", "--no-timing", "--input"]).arg(&log);
        cmd.arg("--out-dir").arg(dir.path().join(run));
        ok(cmd);
    }
    let rows = line_count(&dir.path().join("r1/metrics.csv")) - 1;
    assert_eq!(rows, events / 50);
    for name in ["metrics.csv", "model.json", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("r1").join(name)).unwrap(),
            fs::read(dir.path().join("r2").join(name)).unwrap()
        );
    }
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = bin()
        .args(["mine", "--miner", "aging", "--connect", &format!("127.0.0.1:{port}")])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = bin().args(["mine", "--miner", "nope", "--input", "x"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["mine", "--miner", "online"]).output().unwrap();
    assert!(!out.status.success());
    let log = generate_log(dir.path(), "s.log", 5, 0);
    let out = bin().args(["mine", "--miner", "aging", "--alpha", "1.5", "--input"]).arg(&log).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn flags_override_the_config_file_and_env_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let log = generate_log(dir.path(), "s.log", 100, 4);
    let events = line_count(&log);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("miner = \"aging\"\nmine_every = 10\nalpha = 0.9985\ninput = {:?}\n", log.display().to_string()),
    )
    .unwrap();
    let out_dir = dir.path().join("from-env");
    let mut cmd = bin();
    cmd.env("STREAMHM_OUT_DIR", &out_dir);
    cmd.args(["mine", "--no-timing", "--mine-every", "25", "--config"]).arg(&config);
    ok(cmd);
    assert_eq!(line_count(&out_dir.join("metrics.csv")) - 1, events / 25);
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"miner\": \"aging\""), "{summary}");
}

#[test]
fn merge_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_log(dir.path(), "a.log", 30, 1);
    let b = generate_log(dir.path(), "b.log", 30, 2);
    let merged = dir.path().join("m.log");
    let mut cmd = bin();
    cmd.arg("merge").arg(&a).arg(&b).args(["--overlap", "0.25", "--out"]).arg(&merged);
    ok(cmd);
    assert_eq!(line_count(&merged), line_count(&a) + line_count(&b));

    for run in ["x", "y"] {
        let mut cmd = bin();
        cmd.args(["mine", "--miner", "lossy", "--no-timing", "--input"]).arg(&merged);
        cmd.arg("--out-dir").arg(dir.path().join(run));
        ok(cmd);
    }
    let mut cmd = bin();
    cmd.arg("compare").arg(dir.path().join("x")).arg(dir.path().join("y"));
    let out = String::from_utf8(ok(cmd).stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "miner,seq_no,runs,fitness_mean,fitness_var,precision_mean,precision_var"
    );
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!((cols[0], cols[2], cols[4], cols[6]), ("lossy", "2", "0.0", "0.0"));
    }
}

#[test]
fn bounds_subcommand() {
    let out = String::from_utf8(ok({
        let mut c = bin();
        c.args(["bounds", "--range", "2", "--nc", "1000"]);
        c
    })
    .stdout)
    .unwrap();
    assert_eq!(out.trim(), "epsilon=0.085894");

    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, SPEC).unwrap();
    let mut c = bin();
    c.args(["bounds", "--nc", "5000", "--spec"]).arg(&spec).args(["--pair", "c", "d", "--and", "a"]);
    let out = String::from_utf8(ok(c).stdout).unwrap();
    assert!(out.starts_with("dependency c=>d: limit=0.000000"), "{out}");
    assert!(out.contains("and c=>(d^a)"), "{out}");
}

#[test]
fn serve_feeds_mine() {
    let dir = tempfile::tempdir().unwrap();
    let log = generate_log(dir.path(), "s.log", 60, 5);
    let mut server = bin()
        .args(["serve", "--addr", "127.0.0.1:0", "--codec", "xes", "--max-clients", "1"])
        .arg(&log)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut banner).unwrap();
    let addr = banner.trim().rsplit(' ').next().unwrap().to_string();

    let mut cmd = bin();
    cmd.args(["mine", "--miner", "self_adapting", "--codec", "xes", "--no-timing", "--connect", &addr]);
    cmd.arg("--out-dir").arg(dir.path().join("net"));
    ok(cmd);
    assert!(server.wait().unwrap().success());
    let summary = fs::read_to_string(dir.path().join("net/summary.json")).unwrap();
    assert!(summary.contains(&format!("\"events\": {}", line_count(&log))), "{summary}");
}
