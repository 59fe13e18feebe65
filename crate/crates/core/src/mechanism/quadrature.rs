//! Integration of schedule-dependent integrands against the cost density.
//!
//! Schedules are linear on each grid cell and demand curves are
//! piecewise linear, so `V*(q(θ))` is piecewise quadratic in `θ` once a cell
//! is split where `q` crosses a kink of the curve. Three-point Gauss rules on
//! the resulting pieces are then exact for the uniform and
//! piecewise-linear-density families and highly accurate for power costs.

use crate::grid::ThetaGrid;
use crate::model::cost::CostModel;
use crate::model::curve::PiecewiseLinearCurve;

const GAUSS_S: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    /// Local coordinate in the cell, `(θ − θᵢ)/h`.
    pub s: f64,
    /// `weight · f(θ)`.
    pub mass: f64,
    /// `weight · (θ f(θ) + F(θ))`, i.e. `z(θ)·mass` without dividing by `f`.
    pub vmass: f64,
}

#[derive(Debug, Clone)]
struct CellRule {
    nodes: Vec<Node>,
    /// Density kinks strictly inside the cell, in local coordinates.
    breaks: Vec<f64>,
}

/// Precomputed quadrature for one cost model on one grid.
#[derive(Debug, Clone)]
pub struct WelfareQuadrature {
    grid: ThetaGrid,
    cost: CostModel,
    cells: Vec<CellRule>,
}

fn push_nodes(cost: &CostModel, theta0: f64, h: f64, sa: f64, sb: f64, out: &mut Vec<Node>) {
    let len = (sb - sa) * h;
    if len <= 0.0 {
        return;
    }
    for k in 0..3 {
        let s = sa + (sb - sa) * GAUSS_S[k];
        let theta = theta0 + s * h;
        let f = cost.density(theta);
        let w = len * GAUSS_W[k];
        out.push(Node {
            s,
            mass: w * f,
            vmass: w * (theta * f + cost.cdf(theta)),
        });
    }
}

fn push_split(cost: &CostModel, theta0: f64, h: f64, cuts: &[f64], out: &mut Vec<Node>) {
    let mut prev = 0.0;
    for &c in cuts.iter().chain(std::iter::once(&1.0)) {
        push_nodes(cost, theta0, h, prev, c, out);
        prev = c;
    }
}

impl WelfareQuadrature {
    pub fn new(cost: &CostModel, grid: ThetaGrid) -> Self {
        let h = grid.step();
        let kinks = cost.breakpoints();
        let cells = (0..grid.len() - 1)
            .map(|i| {
                let t0 = grid.point(i);
                let t1 = grid.point(i + 1);
                let breaks: Vec<f64> = kinks
                    .iter()
                    .filter(|&&k| k > t0 && k < t1)
                    .map(|&k| (k - t0) / h)
                    .collect();
                let mut nodes = Vec::with_capacity(3 * (breaks.len() + 1));
                push_split(cost, t0, h, &breaks, &mut nodes);
                CellRule { nodes, breaks }
            })
            .collect();
        Self {
            grid,
            cost: cost.clone(),
            cells,
        }
    }

    pub fn grid(&self) -> ThetaGrid {
        self.grid
    }

    /// Nodes for cell `i` given a sub-division of local coordinates; falls
    /// back to the static rule when `cuts` is empty.
    fn nodes<'a>(&'a self, i: usize, cuts: &[f64], scratch: &'a mut Vec<Node>) -> &'a [Node] {
        let rule = &self.cells[i];
        if cuts.is_empty() {
            return &rule.nodes;
        }
        let mut all: Vec<f64> = cuts.iter().chain(rule.breaks.iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        scratch.clear();
        push_split(
            &self.cost,
            self.grid.point(i),
            self.grid.step(),
            &all,
            scratch,
        );
        scratch
    }

    fn quantity_cuts(curve: &PiecewiseLinearCurve, q0: f64, q1: f64, cuts: &mut Vec<f64>) {
        cuts.clear();
        if q0 != q1 {
            cuts.extend(
                curve
                    .quantity_breaks_between(q0, q1)
                    .map(|k| (k - q0) / (q1 - q0))
                    .filter(|&s| s > 0.0 && s < 1.0),
            );
            cuts.sort_by(f64::total_cmp);
        }
    }

    /// `∫ [V(q(θ)) − z(θ) q(θ)] dF(θ)` for the piecewise-linear schedule
    /// with grid values `values`.
    pub fn virtual_surplus(&self, curve: &PiecewiseLinearCurve, values: &[f64]) -> f64 {
        let mut scratch = Vec::new();
        let mut cuts = Vec::new();
        let mut total = 0.0;
        for i in 0..self.cells.len() {
            let (q0, q1) = (values[i], values[i + 1]);
            Self::quantity_cuts(curve, q0, q1, &mut cuts);
            for n in self.nodes(i, &cuts, &mut scratch) {
                let q = q0 + n.s * (q1 - q0);
                total += curve.gross_value(q) * n.mass - q * n.vmass;
            }
        }
        total
    }

    /// Value and exact gradient of [`Self::virtual_surplus`] with respect to
    /// the grid values: `∂/∂qᵢ = ∫ (P(q(θ)) − z(θ)) φᵢ(θ) dF(θ)` for the hat
    /// function `φᵢ`.
    pub fn virtual_surplus_gradient(
        &self,
        curve: &PiecewiseLinearCurve,
        values: &[f64],
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut scratch = Vec::new();
        let mut cuts = Vec::new();
        let mut total = 0.0;
        for i in 0..self.cells.len() {
            let (q0, q1) = (values[i], values[i + 1]);
            Self::quantity_cuts(curve, q0, q1, &mut cuts);
            for n in self.nodes(i, &cuts, &mut scratch) {
                let q = q0 + n.s * (q1 - q0);
                total += curve.gross_value(q) * n.mass - q * n.vmass;
                let g = curve.inverse_demand(q) * n.mass - n.vmass;
                grad[i] += g * (1.0 - n.s);
                grad[i + 1] += g * n.s;
            }
        }
        total
    }

    /// `∫ φᵢ dF` for every grid point, normalised to sum to one.
    pub fn hat_masses(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.len()];
        for (i, cell) in self.cells.iter().enumerate() {
            for n in &cell.nodes {
                w[i] += n.mass * (1.0 - n.s);
                w[i + 1] += n.mass * n.s;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// Integrates `g(θ, s)` over cell `i` split at the given local cuts.
    pub(crate) fn integrate_cell(
        &self,
        i: usize,
        cuts: &[f64],
        mut g: impl FnMut(&Node) -> f64,
    ) -> f64 {
        let mut scratch = Vec::new();
        self.nodes(i, cuts, &mut scratch).iter().map(&mut g).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_masses_are_trapezoid() {
        let grid = ThetaGrid::new(1.0, 2.0, 11);
        let q = WelfareQuadrature::new(&CostModel::uniform(1.0, 2.0).unwrap(), grid);
        let w = q.hat_masses();
        assert_abs_diff_eq!(w[0], 0.05, epsilon = 1e-14);
        assert_abs_diff_eq!(w[5], 0.1, epsilon = 1e-14);
    }

    #[test]
    fn constant_schedule_closed_form() {
        // ∫₁² [V(1) − (2θ − 1)] dθ with V(1) = 2.5 is 0.5.
        let grid = ThetaGrid::new(1.0, 2.0, 101);
        let quad = WelfareQuadrature::new(&CostModel::uniform(1.0, 2.0).unwrap(), grid);
        let d = PiecewiseLinearCurve::linear(3.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            quad.virtual_surplus(&d, &vec![1.0; 101]),
            0.5,
            epsilon = 1e-13
        );
    }
}
