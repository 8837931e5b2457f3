use adcalc::error::Error;
use adcalc::family::FamilyClass;
use adcalc::scenario::{fitted_order, run_scenario, FamilySpec, ScenarioConfig, ScenarioKind};
use std::path::Path;

fn parse(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(text, Path::new(".")).expect("parses")
}

fn config_path(text: &str) -> String {
    match parse(text).validate() {
        Err(Error::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn validation_names_the_offending_field() {
    assert_eq!(config_path("scenario = 'classify'\n[quadrature]\nt_min = -1.0\n"), "quadrature.t_min");
    assert_eq!(config_path("scenario = 'classify'\n[grid]\nn = 100\n"), "grid.n");
    assert_eq!(config_path("scenario = 'classify'\n[grid]\nrealization = 'wavelet'\n"), "grid.realization");
    assert_eq!(config_path("scenario = 'classify'\n[tolerances]\nscale = 0.0\n"), "tolerances.scale");
    assert_eq!(config_path("scenario = 'classify'\n[family]\ncorpus = 'nope'\n"), "family.corpus");
    assert_eq!(config_path("scenario = 'classify'\n[family]\npath = 'missing.adkf'\n"), "family.path");
    assert_eq!(
        config_path("scenario = 'classify'\n[family]\ngenerator = 'hermite'\norder = 0\nscale = 1.0\n"),
        "family.order"
    );
    assert_eq!(config_path("scenario = 'symbol-roundtrip'\nm = 2\n"), "m");
    assert_eq!(config_path("[grid]\nn = 64\n"), "scenario");
}

#[test]
fn unknown_keys_are_rejected() {
    let e = ScenarioConfig::from_toml("scenario = 'classify'\n[grid]\nsize = 64\n", Path::new(".")).unwrap_err();
    assert!(e.to_string().contains("size"), "{e}");
}

#[test]
fn sweeps_reject_empty_and_unsorted_ranges() {
    let base = "scenario = 'sweep'\n[sweep]\nbase = 'quantize-compare'\n";
    assert_eq!(config_path(&format!("{base}grid_n = []\n")), "sweep.grid_n");
    assert_eq!(config_path(&format!("{base}grid_n = [256, 128]\n")), "sweep.grid_n");
    assert_eq!(config_path(&format!("{base}grid_n = [64]\nt_nodes = [1]\n")), "sweep.t_nodes");
    assert_eq!(config_path("scenario = 'sweep'\n[sweep]\nbase = 'corner'\n"), "sweep.base");
    assert_eq!(config_path("scenario = 'sweep'\n"), "sweep");
}

#[test]
fn family_specs_parse_in_all_three_forms() {
    let c = parse("scenario = 'classify'\n[family]\ncorpus = 'hermite-4'\n");
    assert_eq!(c.family, Some(FamilySpec::Corpus { corpus: "hermite-4".into() }));
    let c = parse("scenario = 'classify'\n[family]\npath = 'a.adkf'\nclass = 'J0'\n");
    assert!(matches!(c.family, Some(FamilySpec::File { class: Some(FamilyClass::J0), .. })));
    let c = parse("scenario = 'classify'\n[family]\ngenerator = 'zero'\n");
    assert!(matches!(c.family, Some(FamilySpec::Recipe(_))));
}

#[test]
fn module_kinds_default_to_the_small_spectral_grid() {
    let c = ScenarioConfig::for_kind(ScenarioKind::GaugeCheck);
    assert_eq!(c.grid_n().unwrap(), 128);
    assert!(c.realization().unwrap().is_periodic());
    let c = ScenarioConfig::for_kind(ScenarioKind::QuantizeCompare);
    assert_eq!(c.grid_n().unwrap(), 512);
    assert_eq!(c.realization().unwrap(), adcalc::realize::Realization::Galerkin(adcalc::realize::Basis::Keys));
}

#[test]
fn kind_names_round_trip() {
    for k in ScenarioKind::ALL {
        assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
    }
    assert!("quantise".parse::<ScenarioKind>().is_err());
}

#[test]
fn zero_family_classifies_as_j0() {
    let c = parse("scenario = 'classify'\nexpect = 'J0'\n[family]\ngenerator = 'zero'\n");
    let r = run_scenario(&c).unwrap();
    assert!(r.pass(), "{:?}", r.summary);
}

#[test]
fn wrong_expectation_fails_without_erroring() {
    let c = parse("scenario = 'classify'\nexpect = 'S_c'\n[family]\ncorpus = 'hermite-4'\n");
    let r = run_scenario(&c).unwrap();
    assert!(!r.pass());
}

#[test]
fn classify_reports_are_deterministic() {
    let c = parse("scenario = 'classify'\n[family]\ncorpus = 'hermite-4-cos'\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_scenario(&c).unwrap().write(a.path()).unwrap();
    run_scenario(&c).unwrap().write(b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "summary.json"));
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn single_point_sweep_is_the_base_run() {
    let base = "[grid]\nn = 64\n[quadrature]\nn_nodes = 33\n[probes]\ncount = 2\nband = 3.0\n";
    let sweep = parse(&format!("scenario = 'sweep'\n{base}[sweep]\nbase = 'quantize-compare'\ngrid_n = [64]\n"));
    let single = parse(&format!("scenario = 'quantize-compare'\n{base}"));
    let (a, b) = (run_scenario(&sweep).unwrap(), run_scenario(&single).unwrap());
    assert_eq!(a.summary.to_json(), b.summary.to_json());
    assert_eq!(a.tables, b.tables);
}

#[test]
fn tolerance_scale_loosens_upper_bounds_only() {
    let base = "scenario = 'quantize-compare'\n[grid]\nn = 32\n[quadrature]\nn_nodes = 33\n[probes]\ncount = 1\nband = 2.0\n";
    let tight = run_scenario(&parse(base)).unwrap();
    let loose = run_scenario(&parse(&format!("{base}[tolerances]\nscale = 1e6\n"))).unwrap();
    for (t, l) in tight.summary.checks.iter().zip(&loose.summary.checks) {
        assert_eq!(t.measured, l.measured);
        assert!((l.tolerance / t.tolerance - 1e6).abs() < 1e-3);
    }
    let o = run_scenario(&parse(&format!("{base}[tolerances.overrides]\nrel_l2 = 0.5\n"))).unwrap();
    assert_eq!(o.summary.checks.iter().find(|c| c.name == "rel_l2").unwrap().tolerance, 0.5);
}

#[test]
fn fitted_order_recovers_a_power_law() {
    let ns = [128, 256, 512, 1024];
    let errs: Vec<f64> = ns.iter().map(|n| 3.0 * (*n as f64).powf(-4.0)).collect();
    assert!((fitted_order(&ns, &errs) - 4.0).abs() < 1e-12);
}
