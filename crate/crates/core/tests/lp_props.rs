use cacheopt::lp::{solve, DenseSimplex, LpProblem, LpSolver, LpStatus};
use proptest::prelude::*;

/// Feasible by construction through `x0`; bounded because costs are positive
/// on nonnegative variables and free variables are boxed by rows.
fn feasible_lp(
    n: usize,
    n_free: usize,
    eq: &[Vec<i8>],
    le: &[Vec<i8>],
    slack: &[u8],
    cost: &[u8],
    x0: &[u8],
) -> (LpProblem, Vec<f64>) {
    let mut p = LpProblem::new(0);
    let x0: Vec<f64> = x0.iter().take(n).map(|&v| v as f64 / 4.0).collect();
    for j in 0..n {
        let lb = if j < n_free { None } else { Some(0.0) };
        p.add_variable(format!("x{j}"), 1.0 + cost[j] as f64, lb);
    }
    let row = |coef: &Vec<i8>| coef.iter().take(n).enumerate().map(|(j, &c)| (j, c as f64)).collect::<Vec<_>>();
    for coef in eq {
        let r = row(coef);
        let rhs = r.iter().map(|&(j, c)| c * x0[j]).sum();
        p.add_eq(r, rhs);
    }
    for (coef, &s) in le.iter().zip(slack) {
        let r = row(coef);
        let rhs: f64 = r.iter().map(|&(j, c)| c * x0[j]).sum::<f64>() + s as f64 / 2.0;
        p.add_le(r, rhs);
    }
    for j in 0..n_free {
        p.add_ge([(j, 1.0)], x0[j] - 3.0);
        p.add_le([(j, 1.0)], x0[j] + 3.0);
    }
    (p, x0)
}

fn lp_strategy() -> impl Strategy<Value = (LpProblem, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| {
        (
            Just(n),
            0..=n / 2,
            prop::collection::vec(prop::collection::vec(-3i8..=3, n), 0..n),
            prop::collection::vec(prop::collection::vec(-3i8..=3, n), 0..6),
            prop::collection::vec(0u8..4, 6),
            prop::collection::vec(0u8..5, n),
            prop::collection::vec(0u8..9, n),
        )
            .prop_map(|(n, f, eq, le, s, c, x0)| feasible_lp(n, f, &eq, &le, &s, &c, &x0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn optimum_is_certified_by_duals((p, x0) in lp_strategy()) {
        let sol = solve(&p);
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(p.eq_residual(&sol.x) <= 1e-7);
        prop_assert!(p.le_violation(&sol.x) <= 1e-7);
        prop_assert!(p.bound_violation(&sol.x) <= 1e-9);
        prop_assert!((p.objective_value(&sol.x) - sol.value).abs() <= 1e-7);
        prop_assert!(sol.value <= p.objective_value(&x0) + 1e-7);
        let dual = sol.dual_bound(&p, 1e-7);
        prop_assert!(dual.is_some());
        prop_assert!((dual.unwrap() - sol.value).abs() <= 1e-6 * (1.0 + sol.value.abs()));
    }

    #[test]
    fn repeated_solves_are_identical((p, _x0) in lp_strategy()) {
        let a = solve(&p);
        let b = DenseSimplex::default().solve(&p);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn infeasible_system_is_reported() {
    let mut p = LpProblem::new(2);
    p.add_le([(0, 1.0), (1, 1.0)], 1.0);
    p.add_ge([(0, 1.0)], 2.0);
    assert_eq!(solve(&p).status, LpStatus::Infeasible);
}

#[test]
fn unbounded_direction_is_reported() {
    let mut p = LpProblem::new(0);
    p.add_variable("x", -1.0, Some(0.0));
    p.add_variable("y", 0.0, None);
    p.add_le([(0, 1.0), (1, -1.0)], 1.0);
    assert_eq!(solve(&p).status, LpStatus::Unbounded);
}

#[test]
fn iteration_cap_is_reported() {
    let mut p = LpProblem::new(3);
    p.objective = vec![-1.0, -1.0, -1.0];
    for j in 0..3 {
        p.add_le([(j, 1.0)], 1.0);
    }
    let s = DenseSimplex { max_iterations: Some(1), ..Default::default() };
    assert_eq!(s.solve(&p).status, LpStatus::IterationLimit);
}
