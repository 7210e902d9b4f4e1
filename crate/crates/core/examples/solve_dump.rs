//! Solves an SDP problem stored as JSON and prints the outcome.

use certds::sdp::{solve, SdpProblem, SolverOptions};

fn main() {
    env_logger::init();
    let path = std::env::args()
        .nth(1)
        .expect("usage: solve_dump <problem.json> [primal.json]");
    let text = std::fs::read_to_string(path).expect("readable problem file");
    let problem = SdpProblem::from_json(&text).expect("valid problem");
    let sol = solve(&problem, &SolverOptions::default()).expect("solver ran");
    if let Some(out) = std::env::args().nth(2) {
        std::fs::write(out, serde_json::to_string(&sol.primal).unwrap()).expect("writable output");
    }
    println!(
        "{:?} objective {:.9e} iterations {} min eigenvalue {:.3e} equality residual {:.3e}",
        sol.status,
        sol.objective,
        sol.iterations,
        sol.min_eigenvalue(),
        sol.equality_residual
    );
}
