//! The `asq-lab` binary: output layout, determinism, exit codes, and the
//! external two-party flow.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use asq_lab::backends::io::save_vector;
use asq_lab::numeric::seeded_rng;
use asq_lab::pauli::states::{low_magic_pair, t_state};

const BIN: &str = env!("CARGO_BIN_EXE_asq-lab");

fn asq(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("asq-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn csv_layout_and_summary() {
    let o = asq(&["tvd-sweep", "--seed", "6", "--trials", "5", "--dim", "16"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# asq-lab v1");
    assert_eq!(lines[1], "trial,estimate,truth,abs_error,within_bound,samples,sample_failures,queries,norms");
    assert_eq!(lines.len(), 2 + 5 + 1);
    assert!(lines[7].starts_with("# success_fraction=1.0000"));
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    for path in [&a, &b] {
        let o = asq(&["inprod-sym", "--seed", "3", "--trials", "12", "--dim", "32", "--epsilon", "0.3", "--output", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("success_fraction="));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let threaded = asq(&["inprod-sym", "--seed", "3", "--trials", "12", "--dim", "32", "--epsilon", "0.3", "--threads", "1"]);
    assert!(stdout(&threaded).starts_with(std::str::from_utf8(&x).unwrap()));
}

#[test]
fn json_output() {
    let o = asq(&["relative", "--seed", "1", "--trials", "3", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).expect("valid JSON");
    assert_eq!(v["rows"].as_array().map(Vec::len), Some(9));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("success_fraction="));
}

#[test]
fn exit_codes() {
    assert_eq!(asq(&["--help"]).status.code(), Some(0));
    assert_eq!(asq(&["relative"]).status.code(), Some(1));
    assert_eq!(asq(&["no-such-experiment", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(asq(&["inprod-asym", "--seed", "1", "--epsilon", "2"]).status.code(), Some(1));
    assert_eq!(asq(&["relative", "--seed", "1", "--trials", "1", "--values", "0"]).status.code(), Some(2));
}

#[test]
fn magic_report_of_a_state_file() {
    let path = scratch("t_state.json");
    save_vector(&path, &t_state()).unwrap();
    let o = asq(&["magic-report", "--seed", "0", "--state", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let summary = text.lines().last().unwrap();
    let stab: f64 = summary.split_whitespace().find_map(|kv| kv.strip_prefix("stab_norm=")).unwrap().parse().unwrap();
    assert!((stab - 1.207107).abs() < 1e-6, "{summary}");
}

struct Party(Child);

impl Drop for Party {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts a party on an ephemeral port and returns it with its address.
fn party(role: &str, state: &Path, seed: &str, sessions: &str) -> (Party, String) {
    let mut child = Command::new(BIN)
        .args(["party", "--role", role, "--listen", "127.0.0.1:0", "--state", state.to_str().unwrap(), "--seed", seed, "--sessions", sessions])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("party starts");
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    assert!(line.contains("listening on"), "{line}");
    (Party(child), addr)
}

#[test]
fn external_parties_match_in_process_run() {
    let mut rng = seeded_rng(21);
    let (psi, phi) = low_magic_pair(3, &mut rng);
    let (ps, qs) = (scratch("psi.json"), scratch("phi.json"));
    save_vector(&ps, &psi).unwrap();
    save_vector(&qs, &phi).unwrap();
    let trials = "4";
    let (mut alice, a_addr) = party("alice", &ps, "9", trials);
    let (mut bob, b_addr) = party("bob", &qs, "9", trials);
    let common = ["pauli-dist", "--seed", "9", "--trials", trials, "--epsilon", "0.3", "--psi", ps.to_str().unwrap(), "--phi-state", qs.to_str().unwrap()];
    let mut remote_args = common.to_vec();
    remote_args.extend(["--transport", "tcp", "--alice", &a_addr, "--bob", &b_addr]);
    let remote = asq(&remote_args);
    assert!(remote.status.success(), "{}", String::from_utf8_lossy(&remote.stderr));
    let local = asq(&common);
    assert!(local.status.success());
    assert_eq!(stdout(&remote), stdout(&local));
    for p in [&mut alice, &mut bob] {
        let status = p.0.wait().unwrap();
        assert!(status.success());
        let mut out = String::new();
        BufReader::new(p.0.stdout.take().unwrap()).read_line(&mut out).unwrap();
        assert!(out.starts_with(&format!("sessions={trials} ")), "{out}");
        assert!(out.trim_end().ends_with("errors=0"), "{out}");
    }
}
