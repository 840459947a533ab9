use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gdprox(args: &[&str], dir: &Path, config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gdprox"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("GDPROX_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn files_section(dir: &Path) -> String {
    let m = fs::read_to_string(dir.join("out/manifest.txt")).unwrap();
    m[m.find("[files]").unwrap()..].to_string()
}

#[test]
fn single_atom_proximity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["proximity"],
        dir.path(),
        "preset = single-atom\nn_list = 8, 16\nreplicates = 20\nstability_replicates = 5\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/proximity_n8.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "replicate,t,distance,bound_exp,bound_hp,exceeded"
    );
    for line in lines {
        let d: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(d, 0.0);
    }
    let manifest = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("experiment = proximity"));
    assert!(manifest.contains("result = pass"));
    assert!(manifest.contains("proximity_n16.csv"));
}

#[test]
fn hinge_proximity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["proximity"],
        dir.path(),
        "n_list = 64\nreplicates = 100\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "preset = hinge\nn_list = 32\nreplicates = 30\nseed = 9\n";
    assert_eq!(code(&gdprox(&["proximity"], a.path(), cfg)), 0);
    assert_eq!(
        code(&gdprox(&["proximity", "--workers", "1"], b.path(), cfg)),
        0
    );
    assert_eq!(files_section(a.path()), files_section(b.path()));
    let c = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&gdprox(&["proximity", "--seed", "10"], c.path(), cfg)),
        0
    );
    assert_ne!(files_section(a.path()), files_section(c.path()));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&gdprox(&["proximity"], dir.path(), "replicatez = 3\n")),
        2
    );
    assert_eq!(
        code(&gdprox(
            &["proximity"],
            dir.path(),
            "this is not a config\n"
        )),
        2
    );
    assert_eq!(
        code(&gdprox(&["proximity"], dir.path(), "delta = 1.5\n")),
        2
    );
    assert_eq!(
        code(&gdprox(&["proximity"], dir.path(), "preset = nope\n")),
        2
    );
    assert_eq!(
        code(&gdprox(&["lowerbound"], dir.path(), "replicates = 10\n")),
        2
    );
    assert_eq!(code(&gdprox(&["rates"], dir.path(), "y_column = v\n")), 2);
}

#[test]
fn overflow_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["proximity"],
        dir.path(),
        "preset = rademacher\nn_list = 3\nreplicates = 4\neta_rule = explicit\neta = 1e308\nt_rule = explicit\nsteps = 20\n",
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lowerbound_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["lowerbound"],
        dir.path(),
        "n_list = 4, 100\nreplicates = 10000\nnonsmooth_replicates = 400\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("out/lowerbound_linear.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let exact: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(exact, 186.0 / 256.0);
}

#[test]
fn gn_rate_and_rates_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["gn"],
        dir.path(),
        "gtilde_n_list = 64, 128, 256\ngtilde_replicates = 20\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let gn_csv = dir.path().join("out/gn.csv");
    let rates_dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "input = {}\ny_column = g_estimate\nexponent_lo = -0.30\nexponent_hi = -0.20\n",
        gn_csv.display()
    );
    assert_eq!(code(&gdprox(&["rates"], rates_dir.path(), &cfg)), 0);
    let cfg = format!(
        "input = {}\ny_column = g_estimate\nexponent_lo = -0.6\nexponent_hi = -0.4\n",
        gn_csv.display()
    );
    assert_eq!(code(&gdprox(&["rates"], rates_dir.path(), &cfg)), 3);
}

#[test]
fn gn_single_n_skips_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(&["gn"], dir.path(), "n_list = 1000\ngtilde_n_list =\n");
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fit skipped"));
}

#[test]
fn generalize_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["generalize"],
        dir.path(),
        "n_list = 32, 128, 512\nreplicates = 60\noracle_budget = 20000\nhp_n_list = 256\nhp_replicates = 200\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let q = fs::read_to_string(dir.path().join("out/hp_quantiles.csv")).unwrap();
    assert_eq!(q.lines().count(), 3);
    let bad = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&gdprox(&["generalize"], bad.path(), "preset = appc2\n")),
        2
    );
}

#[test]
fn inline_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdprox(
        &["proximity"],
        dir.path(),
        "atoms = 1 0 : 0\nprobs = 1\nloss = absolute\nn_list = 8\nreplicates = 10\nstability_replicates = 5\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/proximity_n8.csv")).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() == 0.0));

    let o = gdprox(
        &["proximity"],
        dir.path(),
        "atoms = 0.6 0 : 1; 0 0.6 : -1\nprobs = 0.7, 0.3\nn_list = 64\nreplicates = 50\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    for bad in [
        "atoms = 1 0 : 0\nprobs = 0.5, 0.5\n",
        "atoms = 1 0 : 0; 1 : 1\nprobs = 0.5, 0.5\n",
        "atoms = 1 0\nprobs = 1\n",
        "atoms = 1 0 : 0\nprobs = 1\npreset = hinge\n",
        "atoms = 1 0 : 0\nprobs = 1\nloss = squared\n",
    ] {
        assert_eq!(code(&gdprox(&["proximity"], dir.path(), bad)), 2, "{bad}");
    }
}
