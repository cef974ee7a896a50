//! Closed-form and exact state counts, and the solver's complexity bounds.

use edgescale::model::{state_space_size, CountFormula};
use edgescale::presets;
use edgescale::solver::{complexity_bounds, uniformization_rate};

fn main() -> edgescale::Result<()> {
    for name in presets::NAMES {
        let cfg = presets::resolve(name)?;
        let paper = state_space_size(&cfg, CountFormula::PaperFormula)?;
        let exact = state_space_size(&cfg, CountFormula::ExactEnumeration)?;
        let rho = uniformization_rate(&cfg);
        let gamma = rho / (rho + cfg.discount);
        let b = complexity_bounds(&cfg, gamma)?;
        println!("{name:>14}: closed form {paper:>28}  exact {exact:>28}  time bound {:.3e}", b.time);
    }
    Ok(())
}
