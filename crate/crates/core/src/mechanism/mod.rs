pub mod price;
pub mod quadrature;
pub mod quantity;

pub use price::{conjectured_price_welfare, price_welfare, PriceRegulation};
pub use quadrature::WelfareQuadrature;
pub use quantity::{
    check_weights, conjectured_welfare, constant_mechanism, cost_weights, dirac_weights,
    MechanismRow, QuantityMechanism, QuantitySchedule,
};
