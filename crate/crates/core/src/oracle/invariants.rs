//! Per-iteration checks of threshold decay against an exact solution.

use serde::Serialize;

use super::ExactSolution;
use crate::decay::IterationView;
use crate::distance::Scale;
use crate::solve::SolveObserver;

/// First violation of one invariant: `(component, t, global vertex)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InvariantWitness {
    pub component: usize,
    pub t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantCount {
    pub violations: usize,
    pub witness: Option<InvariantWitness>,
}

impl InvariantCount {
    fn hit(&mut self, w: InvariantWitness) {
        self.violations += 1;
        self.witness.get_or_insert(w);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub iterations: usize,
    /// `||b̂^{(t+1)}||_1 <= ||b̂^{(t)}||_1 / nU`.
    pub norm_decay: InvariantCount,
    /// Solved entries within `e^{±eps (t+1) / 4T}` of the exact value.
    pub accuracy: InvariantCount,
    /// Survivors satisfy `x̄_i < ||b̂^{(t)}||_1 / (nU)^2`.
    pub survivors: InvariantCount,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.norm_decay.violations + self.accuracy.violations + self.survivors.violations == 0
    }
}

/// A [`SolveObserver`] that checks every iteration of a solve.
///
/// Tracked norms carry a relative error of a few ulps per summand; norms are
/// compared with slack `4 ceil(log2 n) ε_mach`, which is that budget.
pub struct InvariantChecker<'a> {
    exact: &'a ExactSolution,
    scale: Scale,
    eps: f64,
    iterations: Option<usize>,
    pub report: InvariantReport,
}

impl<'a> InvariantChecker<'a> {
    /// `iterations` is the nominal budget `T`; `None` means `max(n_c, 10)`.
    pub fn new(exact: &'a ExactSolution, scale: Scale, eps: f64, iterations: Option<usize>) -> Self {
        InvariantChecker { exact, scale, eps, iterations, report: InvariantReport::default() }
    }
}

impl SolveObserver for InvariantChecker<'_> {
    fn on_iteration(&mut self, component: usize, members: &[usize], view: &IterationView<'_>) {
        let nu = self.scale.nu();
        let t_budget = self.iterations.unwrap_or(members.len().max(10)) as f64;
        let tau = 4.0 * (members.len() as f64).log2().ceil().max(1.0) * f64::EPSILON;
        let at = |vertex| InvariantWitness { component, t: view.t, vertex };
        let r = &mut self.report;
        r.iterations += 1;
        if view.bhat_next_l1 > view.bhat_l1 / nu * (1.0 + tau) {
            r.norm_decay.hit(at(None));
        }
        let bound = self.eps * (view.t + 1) as f64 / (4.0 * t_budget);
        let cap = view.bhat_l1.log2() - 2.0 * self.scale.log2_nu() + (1.0 + tau).log2();
        for (k, &g) in members.iter().enumerate() {
            let exact = self.exact.log2(g);
            if view.solved[k] {
                let ok = match exact {
                    None => view.xtilde[k] == 0.0,
                    Some(le) => {
                        view.xtilde[k] > 0.0 && ((view.xtilde[k].log2() - le) * std::f64::consts::LN_2).abs() <= bound
                    }
                };
                if !ok {
                    r.accuracy.hit(at(Some(g)));
                }
            } else if view.s_after[k] {
                if let Some(le) = exact {
                    if view.bhat_l1 == 0.0 || le >= cap {
                        r.survivors.hit(at(Some(g)));
                    }
                }
            }
        }
    }
}
