//! Closed-form solutions of linear constant-coefficient ODE systems and
//! boundary-time computation.
//!
//! Supported class: `x' = A·x + b` where `A` is a rational matrix and `b`
//! mentions no ODE variable. Solutions are produced exactly when `A` is
//! nilpotent, which makes every component a polynomial in `t`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{BExpr, BoundKind, BoundVar, CmpOp, Expr, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OdeError {
    #[error("unsupported ODE: right-hand side of `{var}` is not linear with constant coefficients in {{{}}}", .vars.join(", "))]
    Nonlinear { var: String, vars: Vec<String> },
    #[error("unsupported ODE: coefficient matrix over {{{}}} is not nilpotent", .0.join(", "))]
    NotNilpotent(Vec<String>),
    #[error("duplicate ODE variable `{0}`")]
    Duplicate(String),
}

/// Closed-form solution: each ODE variable as an expression over the starting
/// state (program variables) and path time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdeSolution {
    pub vars: Vec<String>,
    pub solution: BTreeMap<String, Expr>,
    pub lipschitz: bool,
}

impl OdeSolution {
    /// `p(s0, e)`: the solution with `t` replaced by `e`.
    pub fn at(&self, e: &Expr) -> BTreeMap<String, Expr> {
        let sigma = BTreeMap::from([(BoundVar::TIME, e.clone())]);
        self.solution.iter().map(|(x, p)| (x.clone(), p.subst_bound(&sigma).simplify())).collect()
    }
}

/// Time until the solution leaves the domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundary {
    /// Domain is `true`.
    Infinite,
    /// Single linear comparison with decreasing margin: the crossing time is
    /// `time` (non-positive when the domain fails initially).
    Explicit { time: Expr },
    /// Single linear comparison with non-decreasing margin: zero when
    /// `holds_initially` is false, infinite otherwise.
    ZeroOrInfinite { holds_initially: BExpr },
    /// Anything else: `param` is characterised by `constraint`, and
    /// `least_hyp → least_goal` (over a free `tau`) states that the domain
    /// holds before `param`.
    Implicit { param: String, constraint: BExpr, least_hyp: BExpr, least_goal: BExpr },
}

type Matrix = Vec<Vec<Rat>>;

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

fn is_zero_matrix(a: &Matrix) -> bool {
    a.iter().all(|row| row.iter().all(Zero::is_zero))
}

/// Splits each right-hand side into its coefficient row and constant part.
fn linear_form(eqs: &[(String, Expr)]) -> Result<(Matrix, Vec<Expr>), OdeError> {
    let names: Vec<String> = eqs.iter().map(|(x, _)| x.clone()).collect();
    let mut seen = BTreeSet::new();
    for x in &names {
        if !seen.insert(x.clone()) {
            return Err(OdeError::Duplicate(x.clone()));
        }
    }
    let slots: Vec<BoundVar> = names.iter().map(|_| BoundVar::fresh(BoundKind::Value)).collect();
    let sigma: BTreeMap<String, Expr> = names.iter().zip(&slots).map(|(x, b)| (x.clone(), Expr::Bound(*b))).collect();
    let zeros: BTreeMap<BoundVar, Expr> = slots.iter().map(|b| (*b, Expr::zero())).collect();
    let nonlinear = |var: &str| OdeError::Nonlinear { var: var.to_string(), vars: names.clone() };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (x, rhs) in eqs {
        let f = rhs.subst_vars(&sigma);
        let mut row = Vec::new();
        for slot in &slots {
            let c = f.diff(*slot);
            match c.as_const() {
                Some(c) => row.push(c.clone()),
                None => return Err(nonlinear(x)),
            }
        }
        let rest = f.subst_bound(&zeros).simplify();
        if !rest.bounds().is_empty() {
            return Err(nonlinear(x));
        }
        a.push(row);
        b.push(rest);
    }
    Ok((a, b))
}

/// True when the system belongs to the linear constant-coefficient class
/// (globally Lipschitz).
pub fn check_lipschitz(eqs: &[(String, Expr)]) -> bool {
    linear_form(eqs).is_ok()
}

fn factorial(k: usize) -> Rat {
    (1..=k).fold(Rat::one(), |acc, i| acc * Rat::from_integer((i as i64).into()))
}

/// Solves `eqs` in closed form.
pub fn solve(eqs: &[(String, Expr)]) -> Result<OdeSolution, OdeError> {
    let (a, b) = linear_form(eqs)?;
    let n = a.len();
    let names: Vec<String> = eqs.iter().map(|(x, _)| x.clone()).collect();
    // powers[k] = A^k
    let mut identity = vec![vec![Rat::zero(); n]; n];
    for (i, row) in identity.iter_mut().enumerate() {
        row[i] = Rat::one();
    }
    let mut powers = vec![identity];
    while !is_zero_matrix(powers.last().expect("nonempty")) {
        if powers.len() > n {
            return Err(OdeError::NotNilpotent(names));
        }
        let next = mat_mul(powers.last().expect("nonempty"), &a);
        powers.push(next);
    }
    let t = Expr::time();
    let x0: Vec<Expr> = names.iter().map(|x| Expr::var(x)).collect();
    let mut solution = BTreeMap::new();
    for i in 0..n {
        let mut acc = Expr::zero();
        for (k, ak) in powers.iter().enumerate() {
            let scale = Expr::constant(Rat::one() / factorial(k)) * t.clone().pow(k as u32);
            let mut term = Expr::zero();
            for j in 0..n {
                if !ak[i][j].is_zero() {
                    term = term + Expr::constant(ak[i][j].clone()) * x0[j].clone();
                }
            }
            acc = acc + scale * term;
            // Constant input integrates to t^(k+1)/(k+1)! A^k b.
            let scale_b = Expr::constant(Rat::one() / factorial(k + 1)) * t.clone().pow(k as u32 + 1);
            let mut term_b = Expr::zero();
            for j in 0..n {
                if !ak[i][j].is_zero() {
                    term_b = term_b + Expr::constant(ak[i][j].clone()) * b[j].clone();
                }
            }
            acc = acc + scale_b * term_b;
        }
        solution.insert(names[i].clone(), acc.simplify());
    }
    Ok(OdeSolution { vars: names, solution, lipschitz: true })
}

/// Domain `b` along the solution path, as a formula over `s0` and `t`.
pub fn domain_along(sol: &OdeSolution, b: &BExpr) -> BExpr {
    b.subst_vars(&sol.solution).simplify()
}

/// Computes the boundary of `domain` along `sol`. `fresh` supplies the name of
/// a new time parameter for the implicit case.
pub fn boundary(sol: &OdeSolution, domain: &BExpr, fresh: &mut dyn FnMut() -> String) -> Boundary {
    if *domain == BExpr::True {
        return Boundary::Infinite;
    }
    let along = domain_along(sol, domain);
    if let BExpr::Cmp(op, l, r) = &along {
        let margin = match op {
            CmpOp::Lt | CmpOp::Le => Some(r.clone() - l.clone()),
            CmpOp::Gt | CmpOp::Ge => Some(l.clone() - r.clone()),
            CmpOp::Eq => None,
        };
        if let Some(g) = margin {
            let g = g.simplify();
            let slope = g.diff(BoundVar::TIME);
            if slope.diff(BoundVar::TIME).simplify() == Expr::zero() {
                if let Some(k) = slope.as_const() {
                    let zero = BTreeMap::from([(BoundVar::TIME, Expr::zero())]);
                    let g0 = g.subst_bound(&zero).simplify();
                    if k.is_negative() {
                        let time = (g0 / Expr::constant(-k.clone())).simplify();
                        return Boundary::Explicit { time };
                    }
                    return Boundary::ZeroOrInfinite { holds_initially: domain.clone() };
                }
            }
        }
    }
    let param = fresh();
    let at_param = BTreeMap::from([(BoundVar::TIME, Expr::param(&param))]);
    let constraint = BExpr::and(BExpr::ge(Expr::param(&param), Expr::zero()), BExpr::not(along.subst_bound(&at_param)));
    let tau = fresh_tau(&param);
    let at_tau = BTreeMap::from([(BoundVar::TIME, Expr::param(&tau))]);
    let least_hyp = BExpr::conj([
        constraint.clone(),
        BExpr::le(Expr::zero(), Expr::param(&tau)),
        BExpr::lt(Expr::param(&tau), Expr::param(&param)),
    ]);
    let least_goal = along.subst_bound(&at_tau);
    Boundary::Implicit { param, constraint, least_hyp, least_goal }
}

fn fresh_tau(param: &str) -> String {
    format!("{param}#tau")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_bexpr, parse_expr};

    fn eqs(src: &[(&str, &str)]) -> Vec<(String, Expr)> {
        src.iter().map(|(x, e)| (x.to_string(), parse_expr(e).unwrap())).collect()
    }

    #[test]
    fn unit_rate() {
        let sol = solve(&eqs(&[("x", "1")])).unwrap();
        assert_eq!(sol.solution["x"].to_string(), "x+t");
        let mut n = 0;
        let b = boundary(&sol, &parse_bexpr("x < 5").unwrap(), &mut || {
            n += 1;
            format!("t{n}")
        });
        assert_eq!(b, Boundary::Explicit { time: parse_expr("5-x").unwrap().simplify() });
    }

    #[test]
    fn double_integrator() {
        let sol = solve(&eqs(&[("p", "v"), ("v", "a")])).unwrap();
        assert_eq!(sol.solution["p"].to_string(), "p+v*t+0.5*a*t^2");
        assert_eq!(sol.solution["v"].to_string(), "v+a*t");
        let b = boundary(&sol, &BExpr::True, &mut || unreachable!());
        assert_eq!(b, Boundary::Infinite);
    }

    #[test]
    fn derivative_matches_rhs_and_initial_value() {
        let system = eqs(&[("x", "y + 2"), ("y", "z - 1"), ("z", "c")]);
        let sol = solve(&system).unwrap();
        for (x, rhs) in &system {
            let lhs = sol.solution[x].diff(BoundVar::TIME);
            let rhs = rhs.subst_vars(&sol.solution);
            assert!(lhs.equiv(&rhs), "{x}: {lhs} vs {rhs}");
            let at0 = &sol.at(&Expr::zero())[x];
            assert!(at0.equiv(&Expr::var(x)));
        }
    }

    #[test]
    fn unsupported_classes() {
        assert!(matches!(solve(&eqs(&[("x", "x^2")])), Err(OdeError::Nonlinear { .. })));
        assert!(!check_lipschitz(&eqs(&[("x", "x^2")])));
        assert!(check_lipschitz(&eqs(&[("x", "x")])));
        assert!(matches!(solve(&eqs(&[("x", "x")])), Err(OdeError::NotNilpotent(_))));
        assert!(matches!(solve(&eqs(&[("x", "y*x")])), Err(OdeError::Nonlinear { .. })));
    }

    #[test]
    fn non_decreasing_margin_and_implicit() {
        let sol = solve(&eqs(&[("x", "0")])).unwrap();
        let b = boundary(&sol, &parse_bexpr("x < 5").unwrap(), &mut || unreachable!());
        assert!(matches!(b, Boundary::ZeroOrInfinite { .. }));
        let sol = solve(&eqs(&[("p", "v"), ("v", "a")])).unwrap();
        let dom = parse_bexpr("2*am*(op-p) > v^2").unwrap();
        let b = boundary(&sol, &dom, &mut || "t1".to_string());
        let Boundary::Implicit { param, constraint, .. } = b else { panic!() };
        assert_eq!(param, "t1");
        assert!(constraint.params().contains("t1"));
    }
}
