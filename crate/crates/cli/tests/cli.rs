//! End-to-end runs of the `shintani` binary.

use std::process::{Command, Output};

fn shintani(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shintani")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn compare_main_on_the_half_line_passes() {
    let o = shintani(&["compare-main", "--n", "1", "--degree", "6", "-f", r#"{"base": ["1/3"], "moduli": 2}"#, "-g", "[[1]]"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("compare-main: PASS"));
}

#[test]
fn compare_main_json_report() {
    let o = shintani(&["compare-main", "--json", "-f", "chi 1/2,1/3 2", "-g", "[[[1,0],[0,1]],[[0,1],[1,0]]]"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["check"], "compare-main");
    assert_eq!(v["pass"], true);
    assert!(v.get("runtime").is_none());
}

#[test]
fn reversed_orientation_reports_the_discrepancy() {
    let o = shintani(&["compare-main", "--json", "-f", "chi Z", "-g", "[[-1]]"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cases"][0]["discrepancy"]["degree"], 0);
    let o = shintani(&["compare-main", "--det-twist", "-f", "chi Z", "-g", "[[-1]]"]);
    assert!(o.status.success());
}

#[test]
fn cone_suite_passes() {
    let o = shintani(&["suite-cone", "--n", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"probe_points\":25"));
}

#[test]
fn fourier_of_the_integers_is_itself() {
    let o = shintani(&["fourier", "-f", "chi Z"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "period 1, support denominator 1\n(0) -> 1\n\n");
}

#[test]
fn suites_are_deterministic() {
    let args = ["suite-reciprocity", "--json", "--n", "2", "--trials", "2", "--degree", "5", "--seed", "4"];
    let (a, b) = (shintani(&args), shintani(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_inputs_exit_with_a_diagnostic() {
    for args in [
        vec!["fourier", "-f", "{bad"],
        vec!["compare-main", "-f", "chi Z", "--n", "2", "-g", "[[[1,0],[0,1]],[[1,0],[0,1]]]"],
        vec!["eval-nsh", "-f", "chi Z", "-g", "[[0]]"],
    ] {
        let o = shintani(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn evaluations_print() {
    for sub in ["eval-nsh", "eval-sh", "eval-st", "eval-st-dlog"] {
        let o = shintani(&[sub, "--degree", "3", "-f", "chi 1/3 2", "-g", "[[1]]"]);
        assert!(o.status.success(), "{sub}");
        assert!(!stdout(&o).is_empty());
    }
}
