//! Knot-based demand curves.
//!
//! A [`PiecewiseLinearCurve`] stores the direct demand `D(p)` as a list of
//! `(price, quantity)` knots. Quantity is linearly interpolated between
//! knots, held at the first knot's quantity to the left of the first knot,
//! and is zero to the right of the last knot (which must carry zero
//! quantity). The inverse demand `P(q)` and gross value `V(q) = ∫₀^q P`
//! are derived from the same knots and evaluated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// One linear piece of the inverse demand, ordered by ascending quantity.
#[derive(Debug, Clone, PartialEq)]
struct InversePiece {
    q_start: f64,
    q_end: f64,
    p_start: f64,
    p_end: f64,
    value_start: f64,
}

impl InversePiece {
    fn price_at(&self, q: f64) -> f64 {
        let t = (q - self.q_start) / (self.q_end - self.q_start);
        self.p_start + t * (self.p_end - self.p_start)
    }

    fn slope(&self) -> f64 {
        (self.p_end - self.p_start) / (self.q_end - self.q_start)
    }
}

/// A weakly decreasing, piecewise-linear demand curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PiecewiseLinearCurve {
    knots: Vec<(f64, f64)>,
    /// `∫₀^{xᵢ} D(p) dp` at every knot.
    area: Vec<f64>,
    /// Inverse-demand pieces in ascending quantity.
    inverse: Vec<InversePiece>,
    total_value: f64,
}

impl PartialEq for PiecewiseLinearCurve {
    fn eq(&self, other: &Self) -> bool {
        self.knots == other.knots
    }
}

impl TryFrom<Vec<[f64; 2]>> for PiecewiseLinearCurve {
    type Error = ModelError;

    fn try_from(knots: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(knots.into_iter().map(|[x, y]| (x, y)).collect())
    }
}

impl From<PiecewiseLinearCurve> for Vec<[f64; 2]> {
    fn from(curve: PiecewiseLinearCurve) -> Self {
        curve.knots.iter().map(|&(x, y)| [x, y]).collect()
    }
}

impl PiecewiseLinearCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if knots.len() < 2 {
            return Err(ModelError::InvalidCurve(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        for (i, &(x, y)) in knots.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() || x < 0.0 || y < 0.0 {
                return Err(ModelError::InvalidCurve(format!(
                    "knot {i} = ({x}, {y}) must be finite and nonnegative"
                )));
            }
        }
        for (i, w) in knots.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(ModelError::InvalidCurve(format!(
                    "knot prices must be strictly increasing (knots {i} and {})",
                    i + 1
                )));
            }
            if w[1].1 > w[0].1 {
                return Err(ModelError::InvalidCurve(format!(
                    "knot quantities must be weakly decreasing (knots {i} and {})",
                    i + 1
                )));
            }
        }
        if knots[knots.len() - 1].1 != 0.0 {
            return Err(ModelError::InvalidCurve(
                "the last knot must carry zero quantity".into(),
            ));
        }

        let mut area = Vec::with_capacity(knots.len());
        // Constant extension left of the first knot.
        area.push(knots[0].0 * knots[0].1);
        for w in knots.windows(2) {
            let prev = *area.last().unwrap();
            area.push(prev + 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1));
        }

        let mut inverse = Vec::new();
        let mut value = 0.0;
        for i in (0..knots.len() - 1).rev() {
            let (x0, y0) = knots[i];
            let (x1, y1) = knots[i + 1];
            if y0 > y1 {
                let piece = InversePiece {
                    q_start: y1,
                    q_end: y0,
                    p_start: x1,
                    p_end: x0,
                    value_start: value,
                };
                value += 0.5 * (y0 - y1) * (x0 + x1);
                inverse.push(piece);
            }
        }

        Ok(Self {
            knots,
            area,
            inverse,
            total_value: value,
        })
    }

    /// Linear demand `D(p) = intercept − slope·p`, truncated at zero.
    pub fn linear(intercept: f64, slope: f64) -> Result<Self, ModelError> {
        if !(slope > 0.0) || !(intercept > 0.0) {
            return Err(ModelError::InvalidCurve(
                "linear demand needs a positive intercept and slope".into(),
            ));
        }
        Self::new(vec![(0.0, intercept), (intercept / slope, 0.0)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Quantity demanded at price `p`.
    pub fn demand(&self, p: f64) -> f64 {
        let k = &self.knots;
        if p <= k[0].0 {
            return k[0].1;
        }
        let last = k.len() - 1;
        if p >= k[last].0 {
            return 0.0;
        }
        let i = k.partition_point(|&(x, _)| x <= p) - 1;
        let (x0, y0) = k[i];
        let (x1, y1) = k[i + 1];
        y0 + (p - x0) / (x1 - x0) * (y1 - y0)
    }

    /// Inverse demand `P(q) = sup{p : D(p) > q}`, and 0 once `q ≥ D(0)`.
    pub fn inverse_demand(&self, q: f64) -> f64 {
        match self.piece_for(q) {
            Some(piece) => piece.price_at(q),
            None => 0.0,
        }
    }

    /// Slope `P'(q)` of the inverse demand at `q` (right derivative; 0 where
    /// the curve is saturated).
    pub fn inverse_demand_slope(&self, q: f64) -> f64 {
        self.piece_for(q).map_or(0.0, InversePiece::slope)
    }

    /// Gross value `V(q) = ∫₀^q P(s) ds`.
    pub fn gross_value(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        match self.piece_for(q) {
            Some(piece) => {
                piece.value_start + 0.5 * (q - piece.q_start) * (piece.p_start + piece.price_at(q))
            }
            None => self.total_value,
        }
    }

    /// The price at which demand reaches zero.
    pub fn choke_price(&self) -> f64 {
        self.inverse_demand(0.0)
    }

    /// `D(0)`, the saturation quantity.
    pub fn saturation(&self) -> f64 {
        self.knots[0].1
    }

    /// `∫₀^p D(y) dy`.
    pub fn cumulative(&self, p: f64) -> f64 {
        let k = &self.knots;
        if p <= k[0].0 {
            return p.max(0.0) * k[0].1;
        }
        let last = k.len() - 1;
        if p >= k[last].0 {
            return self.area[last];
        }
        let i = k.partition_point(|&(x, _)| x <= p) - 1;
        let (x0, y0) = k[i];
        self.area[i] + 0.5 * (p - x0) * (y0 + self.demand(p))
    }

    /// `∫ₐᵇ D(y) dy` with signed limits.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }

    /// Knot prices strictly inside `(a, b)`.
    pub fn price_breaks_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.knots
            .iter()
            .map(|&(x, _)| x)
            .filter(move |&x| x > lo && x < hi)
    }

    /// Knot quantities strictly inside `(a, b)`, where `P` or `V` has a kink.
    pub fn quantity_breaks_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.knots
            .iter()
            .map(|&(_, y)| y)
            .filter(move |&y| y > lo && y < hi)
    }

    /// Indices of knot pairs with equal quantity (flat demand segments).
    pub fn flat_segments(&self) -> Vec<usize> {
        self.knots
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].1 == w[1].1 && w[0].1 > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Pointwise minimum `D(p) − other(p)` over `p ≥ 0`, with the price that
    /// attains it. Exact: both curves are linear between the union of knots.
    pub fn min_gap_over(&self, other: &Self) -> (f64, f64) {
        let mut prices: Vec<f64> = std::iter::once(0.0)
            .chain(self.knots.iter().map(|k| k.0))
            .chain(other.knots.iter().map(|k| k.0))
            .collect();
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        prices
            .into_iter()
            .map(|p| (self.demand(p) - other.demand(p), p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    }

    fn piece_for(&self, q: f64) -> Option<&InversePiece> {
        let q = q.max(0.0);
        self.inverse
            .iter()
            .find(|piece| q >= piece.q_start && q < piece.q_end)
    }
}
