//! Regression against objectives recorded from an external solver on the
//! archived problem dumps in tests/fixtures.

use certds::sdp::{solve, SdpProblem, SolveStatus, SolverOptions};
use serde_json::Value;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn external(name: &str) -> Value {
    let v: Value = serde_json::from_str(&fixture("external_results.json")).unwrap();
    v["results"][name].clone()
}

fn solve_fixture(name: &str) -> certds::sdp::SdpSolution {
    let p = SdpProblem::from_json(&fixture(&format!("{name}.json"))).unwrap();
    solve(&p, &SolverOptions::default()).unwrap()
}

#[test]
fn gram_lower_bound_matches_external_solver() {
    let sol = solve_fixture("gram_lower_bound");
    let ext = external("gram_lower_bound");
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(ext["status"], "optimal");
    let expected = ext["objective"].as_f64().unwrap();
    assert!(
        (sol.objective - expected).abs() < 1e-6,
        "{} vs {expected}",
        sol.objective
    );
    assert!((sol.objective - 1.25).abs() < 1e-6);
}

#[test]
fn gram_feasibility_outcomes_match_external_solver() {
    let sol = solve_fixture("gram_quartic_plus_one");
    assert_eq!(external("gram_quartic_plus_one")["status"], "optimal");
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.min_eigenvalue() >= -1e-8);

    let sol = solve_fixture("gram_motzkin");
    assert_eq!(external("gram_motzkin")["status"], "infeasible");
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn dumps_round_trip() {
    for name in ["gram_lower_bound", "gram_quartic_plus_one", "gram_motzkin"] {
        let text = fixture(&format!("{name}.json"));
        assert_eq!(SdpProblem::from_json(&text).unwrap().to_json(), text);
    }
}
