use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_socsim");

fn socsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn socsim")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("sim.toml");
    std::fs::write(
        &path,
        r#"
schema_version = 1
seed = 11
initial_agents = 20
max_agents = 400
max_events = 3000

[[add_rate]]
start = 0.0
rate = 0.5

[[agent_types]]
name = "standard"
follow_rate = 0.05
tweet_rate = 0.02
followback_probability = 0.4

[follow_model]
model = "random"

[alpha]
political = 0.2
humorous = 0.2
musical = 0.2

[omega]
form = "exponential"
t_min = 0.0
t_max = 30.0

[output]
checkpoint = true
"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn summary_field(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("summary.dat")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("summary.dat is missing {key}"))
        .to_string()
}

#[test]
fn run_writes_outputs_and_same_seed_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");

    for out in [&a, &b] {
        let res = socsim(&["run", &config, "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(summary_field(&a, "stop"), "EventLimitReached");
    assert_eq!(summary_field(&a, "events"), "3000");

    for file in ["summary.dat", "network.edges", "degree_cum.dat", "tweets.dat"] {
        let left = std::fs::read(a.join(file)).unwrap();
        let right = std::fs::read(b.join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical runs");
    }
}

#[test]
fn seed_fanout_writes_one_directory_per_replica() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = tmp.path().join("multi");

    let res = socsim(&["run", &config, "--out", out.to_str().unwrap(), "--seeds", "2"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(summary_field(&out.join("seed-11"), "seed"), "11");
    assert_eq!(summary_field(&out.join("seed-12"), "seed"), "12");
    let left = std::fs::read(out.join("seed-11/network.edges")).unwrap();
    let right = std::fs::read(out.join("seed-12/network.edges")).unwrap();
    assert_ne!(left, right, "different seeds produced identical networks");
}

#[test]
fn resume_extends_a_checkpointed_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");

    let res = socsim(&["run", &config, "--out", first.to_str().unwrap()]);
    assert!(res.status.success());
    let checkpoint = first.join("checkpoint.bin");

    let res = socsim(&[
        "resume",
        checkpoint.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--events",
        "5000",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(summary_field(&second, "events"), "5000");
    let t0: f64 = summary_field(&first, "sim_time").parse().unwrap();
    let t1: f64 = summary_field(&second, "sim_time").parse().unwrap();
    assert!(t1 > t0, "resume did not advance time: {t0} -> {t1}");
}

#[test]
fn viral_prints_a_csv_grid() {
    let res = socsim(&[
        "viral", "--alphas", "0.01", "--follows", "800", "--replicas", "1", "--seed", "9",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "alpha,follows,mean_rebroadcasts,stddev,replicas");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0.01,800,"));
}

#[test]
fn missing_config_fails_and_names_the_path() {
    let res = socsim(&["run", "/no/such/config.toml"]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("/no/such/config.toml"), "stderr: {stderr}");
}
