//! Shared fixtures for the benchmark targets.

use sobscale::lattice::{LatticeBox, LatticeFunction};
use sobscale::pdo::Symbol;
use sobscale::rng::{random_lattice_function, trial_rng};

/// The order-1 forward-difference symbol e^{2 pi i x} - 1 in one dimension.
pub fn difference_symbol() -> Symbol {
    Symbol::from_json(
        r#"{"m":1,"terms":[{"k_factor":{"family":"bracket_power","s":0},
            "x_modes":[{"q":[1],"coeff":[1,0]},{"q":[0],"coeff":[-1,0]}]}]}"#,
    )
    .expect("fixture symbol parses")
}

/// The order-1 symbol <k> (1 + 0.2 cos(2 pi x)) in one dimension.
pub fn modulated_symbol() -> Symbol {
    Symbol::from_json(
        r#"{"m":1,"terms":[
            {"k_factor":{"family":"bracket_power","s":1},"x_modes":[{"q":[0],"coeff":[1,0]}]},
            {"k_factor":{"family":"bracket_power","s":1},
             "x_modes":[{"q":[1],"coeff":[0.1,0]},{"q":[-1],"coeff":[0.1,0]}]}]}"#,
    )
    .expect("fixture symbol parses")
}

/// A deterministic random function on the 1-d box of the given radius.
pub fn seeded_function(radius: i64) -> LatticeFunction {
    let domain = LatticeBox::new(1, radius).expect("fixture box");
    random_lattice_function(domain, &mut trial_rng(99, 0))
}
