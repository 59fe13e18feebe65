//! Uniform evaluation grid over the cost support.

use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    low: f64,
    high: f64,
    points: usize,
}

impl ThetaGrid {
    /// # Panics
    /// If `points < 2` or the interval is empty.
    pub fn new(low: f64, high: f64, points: usize) -> Self {
        assert!(points >= 2, "a grid needs at least two points");
        assert!(high > low, "grid interval must be nonempty");
        Self { low, high, points }
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn step(&self) -> f64 {
        (self.high - self.low) / (self.points - 1) as f64
    }

    /// The `i`-th grid point; the last one is exactly `high`.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.high
        } else {
            self.low + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.point(i)).collect()
    }

    /// Index of the cell `[θᵢ, θᵢ₊₁]` containing `theta` (clamped).
    pub fn cell_of(&self, theta: f64) -> usize {
        let raw = ((theta - self.low) / self.step()).floor();
        (raw.max(0.0) as usize).min(self.points - 2)
    }

    /// Lebesgue mass of each grid point's hat function (trapezoid weights).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }
}
