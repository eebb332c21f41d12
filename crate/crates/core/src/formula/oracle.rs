//! Exhaustive exact-MaxSAT oracle for small instances.
//!
//! Walks all `2^N` assignments in Gray-code order, updating the energy
//! incrementally through the occurrence index, so each step costs only the
//! flipped variable's occurrence list.

use thiserror::Error;

use super::{Assignment, Formula};

/// Default cap on N for the exhaustive sweep (`2^28` assignments).
pub const DEFAULT_ORACLE_VAR_LIMIT: usize = 28;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("formula has {num_vars} variables, above the exhaustive limit {limit}")]
    TooManyVariables { num_vars: usize, limit: usize },
}

/// True iff assignment mask `a` precedes `b` lexicographically in variable
/// order (bit v = x_{v+1}, false < true).
fn lex_less(a: u32, b: u32, n: usize) -> bool {
    for v in 0..n {
        let (ba, bb) = (a >> v & 1, b >> v & 1);
        if ba != bb {
            return ba < bb;
        }
    }
    false
}

/// Exact minimum energy over all assignments, with the lexicographically
/// smallest witness as deterministic tie-break.
pub fn exhaustive_min_energy(
    f: &Formula,
    var_limit: usize,
) -> Result<(i64, Assignment), OracleError> {
    let n = f.num_vars();
    if n > var_limit || n > 31 {
        return Err(OracleError::TooManyVariables {
            num_vars: n,
            limit: var_limit.min(31),
        });
    }
    let m = f.num_clauses();

    // Satisfied-literal count per clause under the all-false start.
    let mut sat = vec![0u16; m];
    for (idx, clause) in f.clauses().enumerate() {
        sat[idx] = clause.iter().filter(|l| l.is_negated()).count() as u16;
    }
    let mut energy: i64 = sat.iter().filter(|&&c| c == 0).count() as i64;

    let mut bits: u32 = 0;
    let mut best_energy = energy;
    let mut best_bits = bits;

    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        let was_true = bits >> v & 1 == 1;
        bits ^= 1 << v;
        for occ in f.occurrences(v) {
            let was_sat = was_true != occ.negated;
            let c = &mut sat[occ.clause as usize];
            if was_sat {
                *c -= 1;
                if *c == 0 {
                    energy += 1;
                }
            } else {
                if *c == 0 {
                    energy -= 1;
                }
                *c += 1;
            }
        }
        if energy < best_energy || (energy == best_energy && lex_less(bits, best_bits, n)) {
            best_energy = energy;
            best_bits = bits;
        }
    }

    let witness = Assignment::new((0..n).map(|v| best_bits >> v & 1 == 1).collect());
    Ok((best_energy, witness))
}
