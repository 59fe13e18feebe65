//! Three reference environments on `Θ = [1, 2]` with uniform costs and
//! conjectured demand `D*(p) = 3 − p`.
//!
//! * `s1`: no demand uncertainty, `D̲ = D*`.
//! * `s2`: `D̲(p) = min{3 − p, 3.5 − 1.5p}`; the floor mechanism is optimal
//!   and `D*(θ̄) > D̲(θ̄)`.
//! * `s3`: `D̲(p) = min{3 − p, 1.4 − 0.2p}`; the floor mechanism is not
//!   optimal and `D*(θ̄) = D̲(θ̄)`.

use crate::model::cost::CostModel;
use crate::model::curve::PiecewiseLinearCurve;
use crate::model::environment::Environment;

pub const QUANTITY_CAP: f64 = 10.0;

fn base(lowest: Vec<(f64, f64)>) -> Environment {
    Environment::new(
        CostModel::uniform(1.0, 2.0).expect("valid support"),
        PiecewiseLinearCurve::linear(3.0, 1.0).expect("valid curve"),
        PiecewiseLinearCurve::new(lowest).expect("valid curve"),
        Vec::new(),
        QUANTITY_CAP,
    )
    .expect("valid environment")
}

pub fn s1() -> Environment {
    base(vec![(0.0, 3.0), (3.0, 0.0)])
}

pub fn s2() -> Environment {
    base(vec![(0.0, 3.0), (1.0, 2.0), (7.0 / 3.0, 0.0)])
}

pub fn s3() -> Environment {
    base(vec![(0.0, 1.4), (2.0, 1.0), (3.0, 0.0)])
}

pub fn by_name(name: &str) -> Option<Environment> {
    match name.to_ascii_lowercase().as_str() {
        "s1" => Some(s1()),
        "s2" => Some(s2()),
        "s3" => Some(s3()),
        _ => None,
    }
}
