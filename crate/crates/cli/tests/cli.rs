use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ekp_cli::fieldseries::FieldSeries;
use ekp_cli::output::csv_body;
use serde_json::Value;

fn ekp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ekp"));
    cmd.env_remove("EKP_THREADS");
    cmd
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(scenario: &str, config: &Path, out: &Path) -> Output {
    ekp().arg(scenario).arg("--config").arg(config).arg("--out").arg(out).output().expect("spawn ekp")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(out: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv_body(&text).lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn steady_state_keeps_energy_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &scenarios().join("steady.cfg"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(text.starts_with("# ekp simulate version="));
    let (header, rows) = csv_rows(dir.path());
    assert_eq!(header, ["step", "t", "mass", "energy", "dissipation", "balance_residual", "min_density"]);
    let e = header.iter().position(|c| c == "energy").unwrap();
    assert!(rows.len() > 2);
    assert!(rows.iter().all(|r| r[e] == rows[0][e]));
    let rep = report(dir.path());
    assert_eq!(rep["status"], "ok");
    assert_eq!(rep["scenario"], "simulate");
}

#[test]
fn whitney_report_lists_cubes_that_pass_the_retest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.cfg", "whitney.set = unit-square\nwhitney.max_generation = 6\nwhitney.samples = 2000\n");
    let out = dir.path().join("out");
    let o = run("whitney", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &report(&out)["result"];
    let cubes = r["cubes"].as_array().unwrap();
    assert!(!cubes.is_empty());
    assert!(cubes.iter().all(|c| c["predicate"] == true));
    for c in cubes {
        let (diam, dist) = (c["diam"].as_f64().unwrap(), c["dist"].as_f64().unwrap());
        assert!(diam <= dist && dist <= 4.0 * diam);
    }
    assert_eq!(r["all_predicates"], true);
    assert_eq!(r["disjoint"], true);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["generation", "side", "diam", "dist", "predicate"]);
    assert_eq!(rows.len(), cubes.len());
}

#[test]
fn unknown_scenario_and_bad_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("smiulate", &scenarios().join("steady.cfg"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));

    let cfg = write(dir.path(), "bad.cfg", "grid.dim = 1\ngrid.n = 32\npressure.kind = quadratic\ncapillarity.kind = constant-k\ncapillarity.k = 1\ntime.t_final = 0.1\ninitial.density.kind = constant\ninitial.density.value = 1\ngrid.colour = red\n");
    let out = dir.path().join("bad");
    let o = run("simulate", &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.colour"), "{}", stderr(&o));
    let rep = report(&out);
    assert_eq!(rep["status"], "invalid");
    assert!(rep["error"].as_str().unwrap().contains("grid.colour"));

    let cfg = write(dir.path(), "odd.cfg", "grid.dim = 1\ngrid.n = 31\npressure.kind = quadratic\ncapillarity.kind = constant-k\ncapillarity.k = 1\ntime.t_final = 0.1\ninitial.density.kind = constant\ninitial.density.value = 1\n");
    assert_eq!(run("simulate", &cfg, &dir.path().join("odd")).status.code(), Some(2));
}

#[test]
fn vacuum_initial_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // the trough starts at 1e-4 and the converging flow empties it
    let cfg = write(
        dir.path(),
        "v.cfg",
        "grid.dim = 1\ngrid.n = 32\ntime.t_final = 1\nalpha = 0\npressure.kind = zero\ncapillarity.kind = constant-k\ncapillarity.k = 1e-4\n\
         initial.density.kind = cosine\ninitial.density.mean = 1\ninitial.density.amplitude = 0.9999\ninitial.density.mode = 1\n\
         initial.momentum.kind = wave\ninitial.momentum.amplitude = 2\ninitial.momentum.mode = 1\ninitial.momentum.axis = 0\n",
    );
    let o = run("simulate", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(report(dir.path())["status"], "aborted");
}

#[test]
fn identical_seed_gives_identical_csv_body() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("random-2d.cfg");
    let bodies: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = ekp().args(["simulate", "--seed", "9", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            csv_body(&std::fs::read_to_string(out.join("diagnostics.csv")).unwrap()).to_string()
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
    let other = dir.path().join("c");
    let o = ekp().args(["simulate", "--seed", "10", "--config"]).arg(&cfg).arg("--out").arg(&other).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(csv_body(&std::fs::read_to_string(other.join("diagnostics.csv")).unwrap()), bodies[0]);
    assert_eq!(report(&other)["seed"], 10);
}

#[test]
fn extension_file_feeds_the_subsolution_check() {
    let dir = tempfile::tempdir().unwrap();
    let ext_out = dir.path().join("extend");
    let o = run("extend", &scenarios().join("extend.cfg"), &ext_out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let series = FieldSeries::read(&ext_out.join("extension.ekpf")).unwrap();
    assert_eq!((series.dim, series.n), (2, 32));
    let times = series.times().unwrap();
    assert_eq!(times.len(), 21);
    assert!((times[20] - 0.2).abs() < 1e-12);

    let cfg = write(
        dir.path(),
        "sub.cfg",
        "extend.series = extend/extension.ekpf\npressure.kind = quadratic\ncapillarity.kind = constant-k\ncapillarity.k = 0.5\nomega.kind = auto\n",
    );
    let sub_out = dir.path().join("sub");
    let o = run("subsolution-check", &cfg, &sub_out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &report(&sub_out)["result"];
    assert_eq!(r["admissible"], true);
    assert!(r["min_margin"].as_f64().unwrap() > 0.0);
    assert!(r["i_functional"].as_f64().unwrap() <= 0.0);
    assert!(r["constraints"]["constraint_residual"].as_f64().unwrap() < 1e-8);

    // truncating the file is reported with the byte offset of the short read
    let bytes = std::fs::read(ext_out.join("extension.ekpf")).unwrap();
    std::fs::write(ext_out.join("extension.ekpf"), &bytes[..bytes.len() - 5]).unwrap();
    let o = run("subsolution-check", &cfg, &dir.path().join("sub2"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("byte "), "{}", stderr(&o));
}

#[test]
fn simulation_restarts_from_its_own_series() {
    let dir = tempfile::tempdir().unwrap();
    let base = "grid.dim = 1\ngrid.n = 32\npressure.kind = quadratic\ncapillarity.kind = constant-k\ncapillarity.k = 1\nalpha = 1\n\
                time.t_final = 0.004\ntime.dt = 0.0002\n";
    let cfg = write(
        dir.path(),
        "first.cfg",
        &format!(
            "{base}time.store_every = 10\noutput.series = run.ekpf\ninitial.density.kind = cosine\ninitial.density.mean = 1\n\
             initial.density.amplitude = 0.3\ninitial.density.mode = 1\ninitial.momentum.kind = wave\ninitial.momentum.amplitude = 0.2\n\
             initial.momentum.mode = 1\ninitial.momentum.axis = 0\n"
        ),
    );
    let first = dir.path().join("first");
    let o = run("simulate", &cfg, &first);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let series = FieldSeries::read(&first.join("run.ekpf")).unwrap();
    let frames = series.times().unwrap();
    assert_eq!(frames.len(), 3);

    let cfg = write(dir.path(), "second.cfg", &format!("{base}initial.file = first/run.ekpf\ninitial.frame = 2\n"));
    let second = dir.path().join("second");
    let o = run("simulate", &cfg, &second);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, a) = csv_rows(&first);
    let (_, b) = csv_rows(&second);
    let mass = header.iter().position(|c| c == "mass").unwrap();
    let m1: f64 = a.last().unwrap()[mass].parse().unwrap();
    let m2: f64 = b[0][mass].parse().unwrap();
    assert!((m1 - m2).abs() < 1e-12);

    let cfg = write(dir.path(), "bad-frame.cfg", &format!("{base}initial.file = first/run.ekpf\ninitial.frame = 7\n"));
    assert_eq!(run("simulate", &cfg, &dir.path().join("bad")).status.code(), Some(2));
}

#[test]
fn sweep_runs_every_line_and_reports_the_worst_code() {
    let dir = tempfile::tempdir().unwrap();
    let steady = scenarios().join("steady.cfg");
    let manifest = write(
        dir.path(),
        "m.txt",
        &format!(
            "# two good runs, one bad scenario\nsimulate {0} out/a\nsimulate {0} out/b 5\nnot-a-scenario {0} out/c\n",
            steady.display()
        ),
    );
    let o = ekp().args(["sweep", "--config"]).arg(&manifest).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(dir.path().join("out/a/diagnostics.csv").exists());
    assert_eq!(report(&dir.path().join("out/b"))["seed"], 5);
    let listing = String::from_utf8_lossy(&o.stdout);
    assert_eq!(listing.lines().count(), 3);
    assert!(listing.lines().next().unwrap().starts_with("0 simulate"));
}

#[test]
fn thread_count_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let steady = scenarios().join("steady.cfg");
    let o = ekp().env("EKP_THREADS", "lots").arg("simulate").arg("--config").arg(&steady).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("EKP_THREADS"));
    let o = ekp().env("EKP_THREADS", "1").arg("simulate").arg("--config").arg(&steady).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
