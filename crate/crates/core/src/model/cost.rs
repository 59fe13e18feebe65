//! Conjectured cost distributions `F*` on `[θ̲, θ̄]`.

use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub enum CostFamily {
    Uniform,
    /// `F(θ) = ((θ − θ̲)/(θ̄ − θ̲))^exponent`.
    Power {
        exponent: f64,
    },
    /// Density linear between `(θ, density)` knots spanning the support;
    /// rescaled to integrate to one.
    PiecewiseLinearDensity {
        knots: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    low: f64,
    high: f64,
    family: CostFamily,
    /// Normalised density knots and the cdf at each (piecewise-linear family).
    density_knots: Vec<(f64, f64)>,
    cdf_at_knots: Vec<f64>,
}

impl CostModel {
    pub fn new(low: f64, high: f64, family: CostFamily) -> Result<Self, ModelError> {
        if !low.is_finite() || !high.is_finite() || !(high > low) {
            return Err(ModelError::InvalidCost(format!(
                "support [{low}, {high}] must be a finite interval with theta_high > theta_low"
            )));
        }
        let mut model = Self {
            low,
            high,
            family: family.clone(),
            density_knots: Vec::new(),
            cdf_at_knots: Vec::new(),
        };
        match family {
            CostFamily::Uniform => {}
            CostFamily::Power { exponent } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(ModelError::InvalidCost(format!(
                        "power exponent must be positive, got {exponent}"
                    )));
                }
            }
            CostFamily::PiecewiseLinearDensity { knots } => {
                model.init_density(knots)?;
            }
        }
        Ok(model)
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, ModelError> {
        Self::new(low, high, CostFamily::Uniform)
    }

    fn init_density(&mut self, knots: Vec<(f64, f64)>) -> Result<(), ModelError> {
        if knots.len() < 2 {
            return Err(ModelError::InvalidCost(
                "density needs at least 2 knots".into(),
            ));
        }
        let first = knots[0].0;
        let last = knots[knots.len() - 1].0;
        if first != self.low || last != self.high {
            return Err(ModelError::InvalidCost(format!(
                "density knots must span the support exactly, got [{first}, {last}]"
            )));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ModelError::InvalidCost(
                "density knot costs must be strictly increasing".into(),
            ));
        }
        if knots.iter().any(|&(_, d)| !(d.is_finite() && d >= 0.0)) {
            return Err(ModelError::InvalidCost(
                "density values must be nonnegative".into(),
            ));
        }
        let mass: f64 = knots
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum();
        if !(mass > 0.0) {
            return Err(ModelError::InvalidCost("density has zero mass".into()));
        }
        self.density_knots = knots.iter().map(|&(t, d)| (t, d / mass)).collect();
        let mut cdf = vec![0.0];
        for w in self.density_knots.windows(2) {
            let prev = *cdf.last().unwrap();
            cdf.push(prev + 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1));
        }
        *cdf.last_mut().unwrap() = 1.0;
        self.cdf_at_knots = cdf;
        Ok(())
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn family(&self) -> &CostFamily {
        &self.family
    }

    fn width(&self) -> f64 {
        self.high - self.low
    }

    fn unit(&self, theta: f64) -> f64 {
        ((theta - self.low) / self.width()).clamp(0.0, 1.0)
    }

    fn density_segment(&self, theta: f64) -> usize {
        let k = &self.density_knots;
        (k.partition_point(|&(t, _)| t <= theta).max(1) - 1).min(k.len() - 2)
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= self.low {
            return 0.0;
        }
        if theta >= self.high {
            return 1.0;
        }
        match &self.family {
            CostFamily::Uniform => self.unit(theta),
            CostFamily::Power { exponent } => self.unit(theta).powf(*exponent),
            CostFamily::PiecewiseLinearDensity { .. } => {
                let i = self.density_segment(theta);
                let (t0, d0) = self.density_knots[i];
                let (t1, d1) = self.density_knots[i + 1];
                let s = theta - t0;
                self.cdf_at_knots[i] + d0 * s + 0.5 * (d1 - d0) / (t1 - t0) * s * s
            }
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        if theta < self.low || theta > self.high {
            return 0.0;
        }
        match &self.family {
            CostFamily::Uniform => 1.0 / self.width(),
            CostFamily::Power { exponent } => {
                let u = self.unit(theta);
                if *exponent == 1.0 {
                    1.0 / self.width()
                } else {
                    exponent * u.powf(exponent - 1.0) / self.width()
                }
            }
            CostFamily::PiecewiseLinearDensity { .. } => {
                let i = self.density_segment(theta);
                let (t0, d0) = self.density_knots[i];
                let (t1, d1) = self.density_knots[i + 1];
                d0 + (theta - t0) / (t1 - t0) * (d1 - d0)
            }
        }
    }

    /// Inverse hazard rate `F(θ)/f(θ)`, using the family's closed form where
    /// one exists. `None` where the density vanishes with positive mass below.
    pub fn inverse_hazard(&self, theta: f64) -> Option<f64> {
        match &self.family {
            CostFamily::Uniform => Some(theta.clamp(self.low, self.high) - self.low),
            CostFamily::Power { exponent } => {
                Some((theta.clamp(self.low, self.high) - self.low) / exponent)
            }
            CostFamily::PiecewiseLinearDensity { .. } => {
                let cdf = self.cdf(theta);
                if cdf == 0.0 {
                    return Some(0.0);
                }
                let f = self.density(theta);
                (f > 0.0).then(|| cdf / f)
            }
        }
    }

    /// Virtual cost `z(θ) = θ + F(θ)/f(θ)`.
    pub fn virtual_cost(&self, theta: f64) -> Result<f64, ModelError> {
        self.inverse_hazard(theta)
            .map(|h| theta + h)
            .ok_or(ModelError::UndefinedDensity { theta })
    }

    /// Virtual cost with `+∞` standing in for an undefined ratio.
    pub(crate) fn virtual_cost_or_inf(&self, theta: f64) -> f64 {
        self.virtual_cost(theta).unwrap_or(f64::INFINITY)
    }

    /// Interior points where the density has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        if self.density_knots.len() <= 2 {
            return Vec::new();
        }
        self.density_knots[1..self.density_knots.len() - 1]
            .iter()
            .map(|&(t, _)| t)
            .collect()
    }
}
