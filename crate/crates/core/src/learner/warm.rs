//! Linear warm start: `f(x) = A x` with `V = |x|^2`.

use nalgebra::DMatrix;

use super::data::TrajectoryDataset;
use super::program::{finish, warm_state, Ctx};
use super::{LearnConfig, LearnError, LearnResult};
use crate::sdp::{self, LeastSquares, LmiBlock, SdpProblem, SolveStatus};

/// Least-squares `A` subject to `-(A + A^T) - 2 eps3 I` PSD.
pub(super) fn solve_warm(ctx: &mut Ctx) -> Result<DMatrix<f64>, LearnError> {
    let n = ctx.n;
    let eps3 = ctx.cfg.eps3;
    let mut problem = SdpProblem::new(n * n);
    let var = |k: usize, j: usize| k * n + j;
    let mut block = LmiBlock::new(n);
    for k in 0..n {
        block.add_constant(k, k, -2.0 * eps3);
        for j in 0..n {
            block.add_coeff(var(k, j), k, j, if k == j { -2.0 } else { -1.0 });
        }
    }
    problem.blocks.push(block);
    let mut ls = LeastSquares::default();
    for (x, v) in ctx.xs.iter().zip(&ctx.vs) {
        for k in 0..n {
            ls.rows.push(((0..n).map(|j| (var(k, j), x[j])).collect(), v[k]));
        }
    }
    sdp::reduce_least_squares(&mut problem, &ls)?;
    let sol = sdp::solve(&problem, &ctx.opts)?;
    ctx.diag.phases.push(super::PhaseRecord {
        round: 0,
        phase: "warm_start".into(),
        status: sol.status,
        objective: sol.objective,
        iterations: sol.iterations,
    });
    if sol.status != SolveStatus::Optimal {
        return Err(LearnError::Infeasible {
            phase: "warm_start".into(),
            status: sol.status,
            suggestion: super::DegreeSuggestion {
                deg_f: ctx.cfg.deg_f,
                deg_v: ctx.cfg.deg_v,
                deg_b: ctx.cfg.deg_b,
            },
            last_feasible: None,
        });
    }
    Ok(DMatrix::from_fn(n, n, |k, j| sol.primal[var(k, j)]))
}

/// Linear stable fit with the quadratic Lyapunov function `|x|^2`, certified
/// at `eps3`.
pub fn warm_start(ds: &TrajectoryDataset, eps3: f64) -> Result<LearnResult, LearnError> {
    let cfg = LearnConfig {
        deg_f: 1,
        eps3,
        ..LearnConfig::default()
    };
    let mut ctx = Ctx::new(ds, &cfg, None, &[])?;
    let a = solve_warm(&mut ctx)?;
    finish(&mut ctx, warm_state(ds.dim(), &a))
}
