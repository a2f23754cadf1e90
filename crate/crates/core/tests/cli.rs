mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rotrates::aggregate::{
    effective_rates, thermal_rates, ExpectedFinals, MissingFinalPolicy, MissingInitialPolicy,
    ThermalOptions,
};
use rotrates::compare::scaling_ratios;
use rotrates::dataio::*;
use rotrates::ratecalc::rate_table;
use rotrates::states::{population_table, PopulationMode, Symmetry};
use rotrates::xsec::{CrossSectionTable, EnergyGrid, TransitionKey};

use common::*;

fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_rotrates"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(table: &CrossSectionTable) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_rates_inputs(dir.path(), table);
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn rates_args(&self, out: &str) -> Vec<PathBuf> {
        [
            "rates",
            "--xsec",
            self.path("xsec.dat").to_str().unwrap(),
            "--levels-target",
            self.path("target.lev").to_str().unwrap(),
            "--levels-projectile",
            self.path("h2.lev").to_str().unwrap(),
            "--out",
            self.path(out).to_str().unwrap(),
        ]
        .iter()
        .map(PathBuf::from)
        .collect()
    }
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}

#[test]
fn temps_flag_is_echoed_and_runs_repeat_exactly() {
    let fx = Fixture::new(&synthetic_xsec(3, 30));
    let mut outputs = Vec::new();
    for name in ["a.dat", "b.dat"] {
        let mut args = fx.rates_args(name);
        args.extend(["--temps", "100,500,1000,1500", "--jobs", "3"].map(PathBuf::from));
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(std::fs::read_to_string(fx.path(name)).unwrap());
    }
    assert!(outputs[0].contains("# T_grid_K: 100 500 1000 1500\n"));
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(load_rates(&fx.path("a.dat")).unwrap().temps(), [100.0, 500.0, 1000.0, 1500.0]);
}

fn one_sided_table() -> CrossSectionTable {
    let mut t = CrossSectionTable::new(EnergyGrid::ten_point(), target_levels(4), para_h2());
    let sigma = vec![Some(1.0); 10];
    t.insert(TransitionKey::new(1, 0, 0, 0), sigma.clone()).unwrap();
    t.insert(TransitionKey::new(2, 0, 0, 0), sigma.clone()).unwrap();
    t.insert(TransitionKey::new(0, 0, 2, 0), sigma.clone()).unwrap();
    t.insert(TransitionKey::new(3, 1, 1, 0), sigma).unwrap();
    t
}

#[test]
fn require_both_names_the_incomplete_pairs() {
    let fx = Fixture::new(&one_sided_table());
    let mut args = fx.rates_args("r.dat");
    args.extend(["--reverse-policy", "require-both"].map(PathBuf::from));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("1:0->0:0") || err.contains("0:0->1:0"), "{err}");
    assert!(err.contains("1:0->3:1") || err.contains("3:1->1:0"), "{err}");
    assert!(!err.contains("2:0"), "complete pair reported: {err}");
    assert!(!fx.path("r.dat").exists());

    let o = run(fx.rates_args("r.dat"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(load_rates(&fx.path("r.dat")).unwrap().len(), 6);
}

#[test]
fn numerical_failures_exit_3_only_when_strict() {
    let mut t = one_sided_table();
    let mut sparse = vec![None; 10];
    sparse[9] = Some(2.0);
    t.insert(TransitionKey::new(3, 0, 1, 1), sparse).unwrap();
    let fx = Fixture::new(&t);
    let o = run(fx.rates_args("r.dat"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    assert_eq!(load_rates(&fx.path("r.dat")).unwrap().len(), 6);

    let mut args = fx.rates_args("s.dat");
    args.push("--strict".into());
    assert_eq!(run(&args).status.code(), Some(3));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let fx = Fixture::new(&one_sided_table());
    let mut args = fx.rates_args("r.dat");
    args.extend(["--temps", "500,100"].map(PathBuf::from));
    assert_eq!(run(&args).status.code(), Some(2));

    let mut args = fx.rates_args("r.dat");
    args.push("--no-such-flag".into());
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--no-such-flag"));

    std::fs::write(fx.path("bad.cfg"), "# format: config v1\nquad_rtol = 0.1\nspeed = 3\n").unwrap();
    let mut args = fx.rates_args("r.dat");
    args.extend([PathBuf::from("--config"), fx.path("bad.cfg")]);
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn malformed_input_is_a_data_error() {
    let fx = Fixture::new(&one_sided_table());
    std::fs::write(fx.path("xsec.dat"), "# format: xsec v1\n# U_grid_cm1: 10 20\n0 0 1 0 1.0 oops\n").unwrap();
    let o = run(fx.rates_args("r.dat"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("rates", &["--xsec", "--levels-target", "--levels-projectile", "--config", "--temps", "--out", "--jobs", "--report", "--strict", "--reverse-policy"]),
        ("effective", &["--rates", "--out", "--levels-projectile", "--policy"]),
        ("thermal", &["--effective", "--levels-projectile", "--symmetry", "--policy", "--out", "--config", "--weights"]),
        ("populations", &["--levels", "--temps", "--mode", "--out", "--config"]),
        ("compare", &["--tables", "--map", "--factor", "--threshold", "--out-prefix"]),
        ("scaling", &["--effective", "--reference-j2", "--out", "--levels-projectile"]),
    ];
    for (cmd, flags) in expected {
        let o = run([cmd, &"--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = String::from_utf8_lossy(&o.stdout);
        for f in *flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

/// rates → effective → thermal → scaling through files, against the same
/// steps in process on the same inputs.
#[test]
fn file_pipeline_matches_in_process_pipeline() {
    let fx = Fixture::new(&synthetic_xsec(11, 80));
    let p = |n: &str| fx.path(n).to_str().unwrap().to_string();
    let mut args = fx.rates_args("rates.dat");
    args.extend([PathBuf::from("--report"), fx.path("smooth.txt")]);
    assert_eq!(run(&args).status.code(), Some(0));
    let o = run(["effective", "--rates", &p("rates.dat"), "--out", &p("eff.dat"), "--levels-projectile", &p("h2.lev")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run([
        "thermal", "--effective", &p("eff.dat"), "--levels-projectile", &p("h2.lev"),
        "--symmetry", "para", "--policy", "renormalize", "--out", &p("thermal.dat"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(["scaling", "--effective", &p("eff.dat"), "--reference-j2", "0", "--out", &p("scaling.csv"), "--levels-projectile", &p("h2.lev")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let target = load_levels(&fx.path("target.lev")).unwrap();
    let h2 = load_levels(&fx.path("h2.lev")).unwrap();
    let xs = load_xsec(&fx.path("xsec.dat"), &target, &h2).unwrap();
    let cfg = PipelineConfig::default();
    let rates = rate_table(&xs, &cfg.temperatures, &cfg).unwrap().table;
    let eff = effective_rates(&rates, ExpectedFinals::Levels(&h2), MissingFinalPolicy::Flag).unwrap();
    let opts = ThermalOptions { policy: MissingInitialPolicy::Renormalize, ..Default::default() };
    let th = thermal_rates(&eff, &h2, Symmetry::Para, &opts, &cfg.constants).unwrap();
    let sc = scaling_ratios(&eff, Some(&h2), 0).unwrap();

    assert_eq!(std::fs::read_to_string(fx.path("rates.dat")).unwrap(), write_rates(&rates));
    let eff_file = load_effective(&fx.path("eff.dat")).unwrap();
    assert_eq!(eff_file.len(), eff.len());
    for (k, e) in eff.entries() {
        let f = eff_file.get(k).unwrap();
        assert_eq!(f.completeness, e.completeness);
        assert!(e.rates.iter().zip(&f.rates).all(|(a, b)| close(*a, *b, 1e-7)), "{k}");
    }
    let th_file = load_thermal(&fx.path("thermal.dat")).unwrap();
    assert_eq!(th_file.len(), th.len());
    for (k, v) in th.entries() {
        let w = th_file.get(k).unwrap();
        assert!(v.iter().zip(w).all(|(a, b)| close(*a, *b, 1e-7)), "{k}");
    }
    let csv = std::fs::read_to_string(fx.path("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), sc.rows.len() + 1);
    for (line, row) in csv.lines().skip(1).zip(&sc.rows) {
        let r: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(close(r, row.ratio, 1e-6), "{line}");
    }
    let report = std::fs::read_to_string(fx.path("smooth.txt")).unwrap();
    assert!(report.starts_with("# format: smoothness v1\n"));
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 80);
}

#[test]
fn thermal_policies_and_custom_weights() {
    let fx = Fixture::new(&synthetic_xsec(12, 40));
    let p = |n: &str| fx.path(n).to_str().unwrap().to_string();
    assert_eq!(run(fx.rates_args("rates.dat")).status.code(), Some(0));
    assert_eq!(run(["effective", "--rates", &p("rates.dat"), "--out", &p("eff.dat")]).status.code(), Some(0));

    // a wider projectile list whose j2 = 4 state has no effective rates
    let wide = rotrates::states::linear_rotor_levels(H2_B, 0.0, 5).unwrap().with_filter(Symmetry::Para);
    save_levels(&fx.path("wide.lev"), &wide).unwrap();
    std::fs::write(fx.path("hot.cfg"), "# format: config v1\ntemperatures_k = 2000\n").unwrap();
    let thermal = |policy: &str, out: &str| {
        run([
            "thermal", "--effective", &p("eff.dat"), "--levels-projectile", &p("wide.lev"),
            "--symmetry", "para", "--policy", policy, "--out", &p(out),
        ])
    };
    let o = thermal("error", "t_err.dat");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no effective rate for initial projectile state"), "{}", stderr(&o));
    assert_eq!(thermal("zero", "t_zero.dat").status.code(), Some(0));
    assert_eq!(thermal("substitute-highest", "t_sub.dat").status.code(), Some(0));
    let (z, s) = (load_thermal(&fx.path("t_zero.dat")).unwrap(), load_thermal(&fx.path("t_sub.dat")).unwrap());
    for (k, kz) in z.entries() {
        assert!(kz.iter().zip(s.get(k).unwrap()).all(|(a, b)| a <= b));
    }

    let eff = load_effective(&fx.path("eff.dat")).unwrap();
    let mut w = rotrates::aggregate::WeightsTable::new(eff.temps().to_vec());
    w.insert(0, vec![1.0; eff.temps().len()]).unwrap();
    save_weights(&fx.path("w.dat"), &w).unwrap();
    let o = run([
        "thermal", "--effective", &p("eff.dat"), "--levels-projectile", &p("h2.lev"),
        "--symmetry", "para", "--weights", &p("w.dat"), "--policy", "zero", "--out", &p("t_w.dat"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tw = load_thermal(&fx.path("t_w.dat")).unwrap();
    for (k, v) in tw.entries() {
        match eff.get(&rotrates::aggregate::EffectiveKey { n1: k.n1, n1p: k.n1p, n2: 0 }) {
            Some(direct) => assert!(v.iter().zip(&direct.rates).all(|(a, b)| close(*a, *b, 1e-7))),
            None => assert!(v.iter().all(|x| *x == 0.0)),
        }
    }
}

#[test]
fn effective_strict_policy_rejects_missing_finals() {
    let fx = Fixture::new(&one_sided_table());
    let p = |n: &str| fx.path(n).to_str().unwrap().to_string();
    assert_eq!(run(fx.rates_args("rates.dat")).status.code(), Some(0));
    let base = ["effective", "--rates", &p("rates.dat"), "--out", &p("eff.dat"), "--levels-projectile", &p("h2.lev")];
    let o = run(base.iter().chain(&["--policy", "flag"]));
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(fx.path("eff.dat")).unwrap().contains("partial:"));
    assert_eq!(run(base.iter().chain(&["--policy", "strict"])).status.code(), Some(1));
}

#[test]
fn populations_command() {
    let dir = tempfile::tempdir().unwrap();
    let lev = rotrates::states::linear_rotor_levels(H2_B, 0.0, 10).unwrap();
    let lp = dir.path().join("h2.lev");
    save_levels(&lp, &lev).unwrap();
    let out = dir.path().join("pop.dat");
    let o = run([
        "populations", "--levels", lp.to_str().unwrap(), "--temps", "100,1000,2000",
        "--mode", "combined", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let file = load_populations(&out).unwrap();
    let exact = population_table(&lev, &[100.0, 1000.0, 2000.0], PopulationMode::Combined, &PhysicalConstants::default()).unwrap();
    assert_eq!(file.mode, PopulationMode::Combined);
    for (x, y) in file.rows.iter().zip(&exact.rows) {
        assert!(x.weights.iter().zip(&y.weights).all(|(a, b)| close(*a, *b, 1e-7)));
    }
    let ratio = file.rows[1].weights[0] / file.rows[0].weights[0];
    assert!((0.5..=0.6).contains(&ratio), "{ratio}");
}

fn write_keyed_rates(path: &Path, rows: &[(TransitionKey, f64)]) {
    let mut t = rotrates::ratecalc::RateTable::new(vec![100.0, 500.0]);
    for &(k, v) in rows {
        t.insert(k, vec![v, 2.0 * v]).unwrap();
    }
    save_rates(path, &t).unwrap();
}

#[test]
fn compare_command_writes_all_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    let k = |a, b| TransitionKey::new(a, 0, b, 0);
    write_keyed_rates(&path("a.dat"), &[(k(1, 0), 2e-11), (k(2, 0), 1e-11), (k(3, 0), 5e-12)]);
    write_keyed_rates(&path("b.dat"), &[(k(1, 0), 1e-11), (k(2, 0), 1e-11), (k(4, 0), 1e-12)]);
    // table C numbers states differently: its 7 is everyone else's 1
    write_keyed_rates(&path("c.dat"), &[(k(7, 0), 1e-11), (k(2, 0), 3e-11), (k(0, 0), 1.0)]);
    std::fs::write(path("map.dat"), "# format: mapping v1\nC 7 1\nC 2 2\nC 0 0\n").unwrap();
    let tables = format!(
        "{},{},{}",
        path("a.dat").display(),
        path("b.dat").display(),
        path("c.dat").display()
    );
    let prefix = format!("{}/cmp_", dir.path().display());
    let o = run([
        "compare", "--tables", &tables, "--map", path("map.dat").to_str().unwrap(),
        "--threshold", "none", "--out-prefix", &prefix,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let dalitz = std::fs::read_to_string(path("cmp_dalitz.csv")).unwrap();
    let lines: Vec<&str> = dalitz.lines().collect();
    assert_eq!(lines[0], "key,T,zeta_a,zeta_b,zeta_c");
    assert_eq!(lines.len(), 1 + 2 * 2, "{dalitz}");
    assert!(lines[1].starts_with("1:0->0:0,100,5.0000000e-1,2.5000000e-1,2.5000000e-1"), "{}", lines[1]);

    let agreement = std::fs::read_to_string(path("cmp_agreement.csv")).unwrap();
    let lines: Vec<&str> = agreement.lines().collect();
    assert_eq!(lines[0], "T,F,within,total,mean_pct_diff,excluded");
    assert_eq!(lines[1], "100,2,2,2,5.0000000e1,0");

    let pairs = std::fs::read_to_string(path("cmp_pairs.csv")).unwrap();
    assert!(pairs.contains("1:0->0:0,100,1.0000000e-11,2.0000000e-11"), "{pairs}");

    let o = run(["compare", "--tables", path("a.dat").to_str().unwrap(), "--out-prefix", &prefix]);
    assert_eq!(o.status.code(), Some(2));
}
