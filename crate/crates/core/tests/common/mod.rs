//! Shared instance generators for the integration and acceptance suites.
#![allow(dead_code)] // each test binary uses its own subset

use analog_maxsat::formula::{Assignment, Formula, TautologyPolicy};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform random 3-SAT: each clause draws 3 distinct variables and random
/// signs; duplicate clauses are allowed, as in the usual random ensembles.
pub fn random_3sat(n: usize, m: usize, seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses: Vec<Vec<i32>> = (0..m)
        .map(|_| {
            let mut vars: Vec<i32> = Vec::with_capacity(3);
            while vars.len() < 3 {
                let v = rng.random_range(1..=n as i32);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter()
                .map(|v| if rng.random_range(0..2) == 0 { v } else { -v })
                .collect()
        })
        .collect();
    Formula::from_clauses(n, clauses, TautologyPolicy::Reject)
        .unwrap()
        .0
}

/// Random 3-SAT with a planted satisfying assignment: any clause drawn
/// unsatisfied under the plant gets one literal flipped to match.
pub fn planted_3sat(n: usize, m: usize, seed: u64) -> (Formula, Assignment) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant: Vec<bool> = (0..n).map(|_| rng.random_range(0..2) == 1).collect();
    let clauses: Vec<Vec<i32>> = (0..m)
        .map(|_| {
            let mut vars: Vec<usize> = Vec::with_capacity(3);
            while vars.len() < 3 {
                let v = rng.random_range(0..n);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            let mut lits: Vec<i32> = vars
                .iter()
                .map(|&v| {
                    let code = v as i32 + 1;
                    if rng.random_range(0..2) == 0 {
                        code
                    } else {
                        -code
                    }
                })
                .collect();
            let satisfied = lits
                .iter()
                .any(|&l| plant[(l.unsigned_abs() - 1) as usize] == (l > 0));
            if !satisfied {
                let k = rng.random_range(0..3);
                lits[k] = -lits[k];
            }
            lits
        })
        .collect();
    let formula = Formula::from_clauses(n, clauses, TautologyPolicy::Reject)
        .unwrap()
        .0;
    (formula, Assignment::new(plant))
}

/// Max-2-SAT encoding of a 3x3x3 +-J spin glass on a periodic lattice:
/// 27 spins, 81 couplings, 162 clauses. A ferromagnetic coupling turns into
/// `(i | !j) & (!i | j)` (one violation iff the spins differ), an
/// antiferromagnetic one into `(i | j) & (!i | !j)`.
pub fn spin_glass_torus3(seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let site = |x: usize, y: usize, z: usize| (x % 3 + 3 * (y % 3) + 9 * (z % 3)) as i32 + 1;
    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(162);
    for z in 0..3 {
        for y in 0..3 {
            for x in 0..3 {
                let i = site(x, y, z);
                for j in [site(x + 1, y, z), site(x, y + 1, z), site(x, y, z + 1)] {
                    let ferro = rng.random_range(0..2) == 0;
                    if ferro {
                        clauses.push(vec![i, -j]);
                        clauses.push(vec![-i, j]);
                    } else {
                        clauses.push(vec![i, j]);
                        clauses.push(vec![-i, -j]);
                    }
                }
            }
        }
    }
    assert_eq!(clauses.len(), 162);
    Formula::from_clauses(27, clauses, TautologyPolicy::Reject)
        .unwrap()
        .0
}
