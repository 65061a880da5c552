use std::path::Path;

use anyhow::Context;
use shapemeans::constraints::{check_irreducible, ConstraintMatrix, ConstraintSpec, Irreducibility};

use crate::args::CheckArgs;
use crate::read_input;

/// Parses and builds a constraint specification without certifying it.
pub fn load_constraints(path: &Path) -> anyhow::Result<ConstraintMatrix> {
    let text = read_input(path)?;
    let spec = ConstraintSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    spec.build().with_context(|| format!("building constraints from {}", path.display()))
}

/// Verdict line, e.g. `irreducible, 7 constraints, 6 domains`.
pub fn verdict_line(a: &ConstraintMatrix, verdict: &Irreducibility) -> String {
    let word = if verdict.is_irreducible() { "irreducible" } else { "reducible" };
    format!("{word}, {} constraints, {} domains", a.n_constraints(), a.n_domains())
}

pub fn run(args: &CheckArgs) -> anyhow::Result<()> {
    let a = load_constraints(&args.constraints)?;
    let verdict = check_irreducible(&a);
    println!("{}", verdict_line(&a, &verdict));
    println!("rows sum to zero: {}", if a.rows_sum_to_zero() { "yes" } else { "no" });
    match verdict {
        Irreducibility::Irreducible => Ok(()),
        Irreducibility::Reducible(w) => {
            println!("witness: {w}");
            Err(shapemeans::Error::Reducible(w).into())
        }
    }
}
