//! Price regulations `M̃ = (p, t)`: a weakly increasing price schedule plus
//! one top-rent constant per stored demand.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::MechanismError;
use crate::grid::ThetaGrid;
use crate::mechanism::quadrature::WelfareQuadrature;
use crate::mechanism::quantity::check_weights;
use crate::model::curve::PiecewiseLinearCurve;
use crate::model::environment::{Environment, CONJECTURED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRegulation {
    grid: ThetaGrid,
    prices: Vec<f64>,
    /// `ũ(θ̄, D)` keyed by demand index; absent entries are zero.
    #[serde(default)]
    top_rents: BTreeMap<usize, f64>,
}

impl PriceRegulation {
    pub fn new(
        grid: ThetaGrid,
        prices: Vec<f64>,
        top_rents: BTreeMap<usize, f64>,
    ) -> Result<Self, MechanismError> {
        if prices.len() != grid.len() {
            return Err(MechanismError::LengthMismatch {
                values: prices.len(),
                grid: grid.len(),
            });
        }
        if let Some(i) = prices.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(MechanismError::PricesNotIncreasing { at: grid.point(i) });
        }
        if let Some(&bad) = top_rents.values().find(|&&u| !(u >= 0.0)) {
            return Err(MechanismError::NegativeTopRent(bad));
        }
        Ok(Self {
            grid,
            prices,
            top_rents,
        })
    }

    pub fn with_top_rent(mut self, demand_index: usize, rent: f64) -> Result<Self, MechanismError> {
        if !(rent >= 0.0) {
            return Err(MechanismError::NegativeTopRent(rent));
        }
        self.top_rents.insert(demand_index, rent);
        Ok(self)
    }

    pub fn grid(&self) -> ThetaGrid {
        self.grid
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn top_rent(&self, demand_index: usize) -> f64 {
        self.top_rents.get(&demand_index).copied().unwrap_or(0.0)
    }

    pub fn top_rents(&self) -> &BTreeMap<usize, f64> {
        &self.top_rents
    }

    /// `D(p(θᵢ))` at every grid point.
    pub fn quantities(&self, demand: &PiecewiseLinearCurve) -> Vec<f64> {
        self.prices.iter().map(|&p| demand.demand(p)).collect()
    }

    /// `ũ(θᵢ, D) = ũ(θ̄, D) + ∫_{θᵢ}^{θ̄} D(p(y)) dy`, exact for linear
    /// interpolation of prices.
    pub fn rents(&self, demand: &PiecewiseLinearCurve, demand_index: usize) -> Vec<f64> {
        let n = self.prices.len();
        let mut u = vec![0.0; n];
        u[n - 1] = self.top_rent(demand_index);
        for i in (0..n - 1).rev() {
            u[i] = u[i + 1]
                + cell_integral(
                    demand,
                    self.grid.point(i),
                    self.grid.point(i + 1),
                    self.prices[i],
                    self.prices[i + 1],
                );
        }
        u
    }

    /// `V_D(D(p(θᵢ))) − θᵢ D(p(θᵢ)) − ũ(θᵢ, D)` at every grid point.
    pub fn ex_post_welfare(&self, demand: &PiecewiseLinearCurve, demand_index: usize) -> Vec<f64> {
        let rents = self.rents(demand, demand_index);
        self.grid
            .points()
            .into_iter()
            .zip(&self.prices)
            .zip(rents)
            .map(|((t, &p), u)| {
                let q = demand.demand(p);
                demand.gross_value(q) - t * q - u
            })
            .collect()
    }
}

/// `∫_{t0}^{t1} D(p(y)) dy` for `p` linear from `p0` to `p1`; split at the
/// curve's knots so that every piece is integrated exactly.
pub(crate) fn cell_integral(d: &PiecewiseLinearCurve, t0: f64, t1: f64, p0: f64, p1: f64) -> f64 {
    let h = t1 - t0;
    if p0 == p1 {
        return d.demand(p0) * h;
    }
    let mut cuts: Vec<f64> = d
        .price_breaks_between(p0, p1)
        .map(|k| (k - p0) / (p1 - p0))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut prev = 0.0;
    for s in cuts.into_iter().chain(std::iter::once(1.0)) {
        let a = d.demand(p0 + prev * (p1 - p0));
        let b = d.demand(p0 + s * (p1 - p0));
        total += 0.5 * (s - prev) * h * (a + b);
        prev = s;
    }
    total
}

/// `Σᵢ wᵢ [V_D(D(p(θᵢ))) − θᵢ D(p(θᵢ)) − ũ(θᵢ, D)]`.
pub fn price_welfare(
    reg: &PriceRegulation,
    env: &Environment,
    demand_index: usize,
    weights: &[f64],
) -> Result<f64, MechanismError> {
    let demand = env.demand(demand_index)?;
    check_weights(weights, reg.prices.len())?;
    Ok(reg
        .ex_post_welfare(demand, demand_index)
        .iter()
        .zip(weights)
        .map(|(w, p)| w * p)
        .sum())
}

/// Welfare under `(D*, F*)` integrated exactly:
/// `∫ [V*(D*(p)) − z* D*(p)] dF* − ũ(θ̄, D*)`.
pub fn conjectured_price_welfare(reg: &PriceRegulation, env: &Environment) -> f64 {
    let quad = WelfareQuadrature::new(env.cost(), reg.grid);
    let d = env.conjectured();
    let mut total = 0.0;
    for i in 0..reg.prices.len() - 1 {
        let (p0, p1) = (reg.prices[i], reg.prices[i + 1]);
        let mut cuts: Vec<f64> = if p0 == p1 {
            Vec::new()
        } else {
            d.price_breaks_between(p0, p1)
                .map(|k| (k - p0) / (p1 - p0))
                .collect()
        };
        cuts.sort_by(f64::total_cmp);
        total += quad.integrate_cell(i, &cuts, |n| {
            let q = d.demand(p0 + n.s * (p1 - p0));
            d.gross_value(q) * n.mass - q * n.vmass
        });
    }
    total - reg.top_rent(CONJECTURED)
}
