use aphom_lab::emit::{csv_header, from_json, render_svg, to_json, write_csv_to};
use aphom_lab::report::{CheckStatus, FitStatus, RowStatus};
use aphom_lab::{run, ExperimentSpec};

const CONSTANT: &str = r#"
[[fields]]
name = "const"
d = 1
m = 1
mu = 0.4
constant = 2.5
"#;

const PERIODIC: &str = r#"
[[fields]]
name = "periodic"
d = 1
m = 1
mu = 0.3333333333333333
constant = 2.0
modes = [{ cycles = [1.0], amplitude = 1.0 }]
"#;

fn spec(head: &str, fields: &str) -> ExperimentSpec {
    ExperimentSpec::from_toml_str(&format!("{head}\n{fields}")).unwrap()
}

fn csv_bytes(r: &aphom_lab::ExperimentReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_to(r, &mut buf).unwrap();
    buf
}

#[test]
fn constant_field_converge_is_degenerate() {
    let s = spec("kind = \"converge\"\n[params]\nt_ref = 8.0\n", CONSTANT);
    let r = run(&s).unwrap();
    assert_eq!(r.rows.len(), 4);
    assert!(r.rows.iter().all(|row| row.status == RowStatus::Ok));
    assert!(r.values("const", "diff_hm1").iter().all(|v| *v <= 1e-8));
    assert_eq!(r.fit("slope", "const").unwrap().status, FitStatus::Degenerate);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn every_row_reports_its_numerics() {
    let s = spec("kind = \"corrector_growth\"\n[params]\nt = [2.0, 4.0, 8.0, 16.0]\nh = 0.0625\n", PERIODIC);
    let r = run(&s).unwrap();
    for row in &r.rows {
        assert!(row.h > 0.0 && row.extent > 0.0 && row.rel_tol > 0.0, "{row:?}");
    }
}

#[test]
fn growth_report_has_one_series_per_level_and_bounded_periodic_norms() {
    let s = spec("kind = \"corrector_growth\"\n[params]\nt = [4.0, 8.0, 16.0, 32.0]\nh = 0.0625\n", PERIODIC);
    let r = run(&s).unwrap();
    let levels: Vec<_> = r.series.iter().filter(|s| s.name.starts_with("l=")).collect();
    assert_eq!(levels.len(), 2);
    let svg = render_svg(&r);
    assert!(svg.contains("periodic / l=0") && svg.contains("periodic / l=1"));
    for l in 0..=1 {
        let c = r.checks.iter().find(|c| c.name == format!("growth_l{l}")).unwrap();
        assert_eq!(c.status, CheckStatus::Pass, "{c:?}");
    }
}

#[test]
fn constant_field_growth_and_holder_are_zero() {
    let g = run(&spec("kind = \"corrector_growth\"\n[params]\nt = [2.0, 4.0, 8.0, 16.0]\n", CONSTANT)).unwrap();
    assert!(g.values("const", "grad_l1").iter().all(|v| *v == 0.0));
    assert_eq!(g.exit_code(), 0);
    let h = run(&spec("kind = \"holder_profile\"\n[params]\nt = [4.0]\n", CONSTANT)).unwrap();
    assert!(h.values("const", "profile").iter().all(|v| *v == 0.0));
    assert_eq!(h.exit_code(), 0);
}

#[test]
fn constant_field_flux_residual_vanishes() {
    let r = run(&spec("kind = \"flux_identity\"\n[params]\nt = [4.0]\n", CONSTANT)).unwrap();
    assert!(r.values("const", "residual").iter().all(|v| *v == 0.0));
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn synthetic_rho_is_recovered_and_periodic_rho_vanishes() {
    let head = "kind = \"rho_decay\"\nseed = 3\n[params]\nl = [1.0, 2.0, 4.0]\n[synthetic]\nc = 0.5\ntheta = 2.25\n[sampler]\nwindow = 16.0\ncenter_samples = 8\ny_samples = 4\n";
    let r = run(&spec(head, PERIODIC)).unwrap();
    let rec = r.checks.iter().find(|c| c.name == "synthetic_recovery").unwrap();
    assert_eq!(rec.status, CheckStatus::Pass);
    assert!(rec.value.unwrap() < 1e-10);
    let zero = r.checks.iter().find(|c| c.name == "rho_vanishes").unwrap();
    assert_eq!(zero.field, "periodic");
}

#[test]
fn rho_window_must_exceed_the_shift_radius() {
    let head = "kind = \"rho_decay\"\n[params]\nl = [1.0, 2.0, 4.0, 8.0]\n[sampler]\nwindow = 16.0\n";
    assert!(ExperimentSpec::from_toml_str(&format!("{head}\n{PERIODIC}")).is_err());
}

#[test]
fn zero_perturbation_gives_identical_slopes() {
    let head = "kind = \"perturb\"\n[params]\nt_ref = 16.0\ntwo_grid = false\n[perturbation]\ncycles = [1.7320508075688772]\namplitude = 0.0\n";
    let r = run(&spec(head, PERIODIC)).unwrap();
    let a = r.fit("base_slope", "periodic").unwrap().exponent.unwrap();
    let b = r.fit("perturbed_slope", "periodic+decaying").unwrap().exponent.unwrap();
    assert_eq!(a, b);
    assert_eq!(r.fit("decay_table", "periodic+decaying").unwrap().status, FitStatus::Degenerate);
}

#[test]
fn solver_failures_become_failed_rows() {
    let head = "kind = \"converge\"\n[params]\nt_ref = 8.0\ntwo_grid = false\n[solver]\nmax_iter = 1\n";
    let r = run(&spec(head, PERIODIC)).unwrap();
    assert!(!r.rows.is_empty());
    assert!(r.rows.iter().all(|row| row.status == RowStatus::Failed && row.error.is_some()));
    assert_eq!(r.exit_code(), 1);
}

#[test]
fn identical_spec_and_seed_give_identical_outputs() {
    let s = spec("kind = \"flux_identity\"\nseed = 5\n[params]\nt = [4.0, 8.0]\n", PERIODIC);
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
}

#[test]
fn json_roundtrip_is_identical() {
    let s = spec("kind = \"corrector_growth\"\n[params]\nt = [2.0, 4.0, 8.0, 16.0]\nh = 0.0625\n", PERIODIC);
    let r = run(&s).unwrap();
    let text = to_json(&r).unwrap();
    let back = from_json(&text).unwrap();
    assert_eq!(back, r);
    assert_eq!(to_json(&back).unwrap(), text);
}

#[test]
fn csv_header_is_versioned() {
    let s = spec("kind = \"flux_identity\"\n[params]\nt = [4.0]\n", CONSTANT);
    let r = run(&s).unwrap();
    let header = csv_header(&r);
    assert_eq!(header[0], "schema_version");
    assert_eq!(header.last().unwrap(), "error");
    let text = String::from_utf8(csv_bytes(&r)).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("1,flux_identity,")));
}
