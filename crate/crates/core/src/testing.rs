//! Small fixed instances shared by unit tests, integration tests and benches.

use crate::datalog::{parse_database, parse_program, Database, FactScope, Program};

pub const PATH_ACCESSIBILITY: &str = "A(x) :- S(x).\nA(x) :- A(y), A(z), T(y, z, x).\n";

pub const EXAMPLE_2_2_FACTS: &str = "S(a)\nT(a,a,b)\nT(a,a,c)\nT(a,a,d)\nT(b,c,a)\n";

pub const EXAMPLE_5_1_FACTS: &str = "S(a)\nS(b)\nT(a,a,c)\nT(b,b,c)\nT(c,c,d)\n";

pub fn path_accessibility() -> Program {
    parse_program(PATH_ACCESSIBILITY).expect("fixed program parses")
}

pub fn example_2_2() -> (Program, Database) {
    let p = path_accessibility();
    let d = parse_database(EXAMPLE_2_2_FACTS, &p, FactScope::Input).expect("fixed facts parse");
    (p, d)
}

pub fn example_5_1() -> (Program, Database) {
    let p = path_accessibility();
    let d = parse_database(EXAMPLE_5_1_FACTS, &p, FactScope::Input).expect("fixed facts parse");
    (p, d)
}
