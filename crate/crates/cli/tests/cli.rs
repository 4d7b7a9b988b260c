use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tvadmm");

fn tvadmm(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TVADMM_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

// Small network with a loose warm start so every command finishes quickly.
const SMALL: &str = "n_nodes = 5\nedge_prob = 0.6\ndim_p = 2\nrows_per_node = 3\nepsilon_ar = 0.05\nrho = 2\n\
track_len = 24\nnum_tracks = 4\nwarm_start_eps = 1e-4\ndecay_window = 8\n";

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_exits_zero() {
    let o = tvadmm(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verify-lemma1"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tvadmm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tvadmm(&["simulate", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(tvadmm(&["--config", "/nonexistent/x.cfg", "graph-info"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rho = -1\n");
    let o = tvadmm(&["--config", &cfg, "graph-info"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));

    let cfg = write_config(dir.path(), "n_nodes = 4\ncolour = blue\n");
    let o = tvadmm(&["--config", &cfg, "graph-info"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn graph_info_on_two_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_nodes = 2\nedge_prob = 1\n");
    let o = tvadmm(&["--config", &cfg, "graph-info"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("n = 2\n"));
    assert!(text.contains("m_arcs = 2\n"));
    for key in ["gamma_L", "Gamma_L"] {
        let value: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap();
        assert!((value - 2.0).abs() < 1e-12, "{key} = {value}");
    }
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |sub: &str, extra: &[&str]| {
        let out = dir.path().join(sub);
        let mut args = vec!["--config", cfg.as_str(), "--out-dir", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.push("simulate");
        let o = tvadmm(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(out.join("curves.csv")).unwrap(),
            std::fs::read(out.join("moments.csv")).unwrap(),
        )
    };
    let a = run("a", &[]);
    let b = run("b", &["--threads", "2"]);
    assert_eq!(a, b);
    let c = run("c", &["--seed", "77"]);
    assert_ne!(a.0, c.0);

    let curves = String::from_utf8(a.0).unwrap();
    let mut lines = curves.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,mse_primal_mean,mse_primal_sem,mse_dual_mean,mse_dual_sem,mse_uG_mean,mse_uG_sem"
    );
    assert_eq!(lines.count(), 24);
    let moments = String::from_utf8(a.1).unwrap();
    assert!(moments.starts_with("B_x4_hat,B_x4_sem,B_lambda4_hat,B_lambda4_sem,samples\n"));
    assert!(moments.trim_end().ends_with(",96"));
}

#[test]
fn trace_flag_writes_per_round_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("t");
    let o = tvadmm(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "--trace", "simulate"]);
    assert_eq!(o.status.code(), Some(0));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,node,x0,x1");
    // Warm-started state plus 24 rounds, 5 nodes each.
    assert_eq!(lines.clone().count(), 25 * 5);
    assert!(lines.next().unwrap().starts_with("0,0,"));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let o = Command::new(BIN)
            .args(["--config", &cfg, "--out-dir", out.to_str().unwrap(), "simulate"])
            .env("TVADMM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("curves.csv")).unwrap()
    };
    assert_eq!(run("one", "1"), run("three", "3"));
    let o = Command::new(BIN)
        .args(["--config", &cfg, "graph-info"])
        .env("TVADMM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_lemma1_passes_and_dumps_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("v");
    let o = tvadmm(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "verify-lemma1", "--contraction-csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("violations = 0"));
    let csv = std::fs::read_to_string(out.join("contraction.csv")).unwrap();
    assert!(csv.starts_with("track,k,delta,q,g,dx_star,dgrad_star,"));
    assert_eq!(csv.lines().count(), 1 + 4 * 24);
}

#[test]
fn bound_and_decay_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("b");
    let o = tvadmm(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "bound"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bound = std::fs::read_to_string(out.join("bound.csv")).unwrap();
    let mut lines = bound.lines();
    assert_eq!(
        lines.next().unwrap(),
        "B1,B2,C_hat,gamma_hat,theorem1_rhs,observed_plateau,bound_satisfied"
    );
    assert!(lines.next().unwrap().ends_with(",true"));

    let o = tvadmm(&["--config", &cfg, "--out-dir", out.to_str().unwrap(), "decay"]);
    assert_eq!(o.status.code(), Some(0));
    let decay = std::fs::read_to_string(out.join("decay.csv")).unwrap();
    assert!(decay.starts_with("window,mean_product,sem\n1,"));
    assert_eq!(decay.lines().count(), 1 + 8);
    // No temporary files are left behind.
    let names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.iter().all(|n| n.to_str().unwrap().ends_with(".csv")), "{names:?}");
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("warm_start_eps = 1e-4\n", "warm_start_eps = 1e-12\nwarm_start_max_iters = 1\n");
    let cfg = write_config(dir.path(), &body);
    let o = tvadmm(&["--config", &cfg, "--out-dir", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warm start"));

    let cfg = write_config(dir.path(), "n_nodes = 4\ndim_p = 3\nrows_per_node = 2\ntrack_len = 30\nnum_tracks = 3\n");
    let o = tvadmm(&["--config", &cfg, "--out-dir", dir.path().to_str().unwrap(), "decay"]);
    assert_eq!(o.status.code(), Some(2));
}
