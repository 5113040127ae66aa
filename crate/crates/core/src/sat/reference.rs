//! Truth-table satisfiability, for checking the CDCL solver on small formulas.

use super::Cnf;

/// The first model in lexicographic order (variable 1 most significant,
/// false before true), or `None`.
///
/// # Panics
/// If the formula has more than 24 variables.
pub fn solve(cnf: &Cnf) -> Option<Vec<bool>> {
    let n = cnf.num_vars as usize;
    assert!(n <= 24, "truth table over {n} variables");
    let mut model = vec![false; n];
    for bits in 0u32..(1 << n) {
        for (i, m) in model.iter_mut().enumerate() {
            *m = bits >> (n - 1 - i) & 1 == 1;
        }
        if cnf.is_satisfied_by(&model) {
            return Some(model);
        }
    }
    None
}

/// Number of models over all `num_vars` variables.
pub fn count_models(cnf: &Cnf) -> u64 {
    let n = cnf.num_vars as usize;
    assert!(n <= 24, "truth table over {n} variables");
    let mut model = vec![false; n];
    (0u32..(1 << n))
        .filter(|bits| {
            for (i, m) in model.iter_mut().enumerate() {
                *m = bits >> i & 1 == 1;
            }
            cnf.is_satisfied_by(&model)
        })
        .count() as u64
}
