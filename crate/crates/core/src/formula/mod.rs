//! CNF data model: immutable clause storage, occurrence index, discrete
//! energy evaluation and the exhaustive verification oracle.

mod dimacs;
mod oracle;

pub use dimacs::{parse_dimacs, parse_dimacs_file, write_dimacs, DimacsError, ParseOptions};
pub use oracle::{exhaustive_min_energy, OracleError, DEFAULT_ORACLE_VAR_LIMIT};

/// What to do with a clause containing both `x` and `!x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TautologyPolicy {
    /// Fail (default): tautological clauses are degenerate for the analog
    /// clause functions and never occur in the benchmark instances.
    #[default]
    Reject,
    /// Drop the clause and count it in [`BuildStats`].
    Drop,
}

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// A DIMACS-style literal: nonzero `i32`, positive for the plain variable,
/// negative for its negation. Variable indices are 1-based externally and
/// 0-based through [`Lit::var`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn new(code: i32) -> Self {
        assert!(code != 0, "literal code must be nonzero");
        Lit(code)
    }

    /// 0-based variable index.
    #[inline]
    pub fn var(self) -> usize {
        (self.0.unsigned_abs() as usize) - 1
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 < 0
    }

    /// The coupling coefficient: +1 for a plain literal, -1 for a negated one.
    #[inline]
    pub fn coeff(self) -> i8 {
        if self.0 < 0 {
            -1
        } else {
            1
        }
    }

    /// Raw signed DIMACS code.
    #[inline]
    pub fn code(self) -> i32 {
        self.0
    }

    /// Whether the literal evaluates true under `value` of its variable.
    #[inline]
    pub fn satisfied_by(self, value: bool) -> bool {
        value != self.is_negated()
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One entry of the per-variable occurrence index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occurrence {
    /// Clause index the variable appears in.
    pub clause: u32,
    /// True when the variable occurs negated there.
    pub negated: bool,
}

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("clause {index} is empty")]
    EmptyClause { index: usize },
    #[error("literal {lit} in clause {index} is out of range 1..={num_vars}")]
    LiteralOutOfRange {
        lit: i32,
        index: usize,
        num_vars: usize,
    },
    #[error("clause {index} is tautological (contains {var} and -{var})")]
    Tautology { index: usize, var: i32 },
    #[error("formula has no variables")]
    NoVariables,
}

/// Counters produced while normalizing raw clauses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub duplicate_literals_removed: usize,
    pub tautologies_dropped: usize,
}

/// Immutable CNF instance.
///
/// Clauses are stored in a flat literal buffer with offsets, and the
/// occurrence index is the exact transpose of the clause list. Both stay
/// fixed after construction, so a `Formula` is safe to share across threads.
#[derive(Clone, PartialEq, Eq)]
pub struct Formula {
    num_vars: usize,
    lits: Vec<Lit>,
    clause_off: Vec<u32>,
    occ: Vec<Occurrence>,
    occ_off: Vec<u32>,
}

impl Formula {
    /// Builds a formula from raw signed-integer clauses.
    ///
    /// Duplicate literals within a clause are removed; tautological clauses
    /// are rejected or dropped according to `policy`.
    pub fn from_clauses(
        num_vars: usize,
        clauses: impl IntoIterator<Item = Vec<i32>>,
        policy: TautologyPolicy,
    ) -> Result<(Self, BuildStats), FormulaError> {
        if num_vars == 0 {
            return Err(FormulaError::NoVariables);
        }
        let mut stats = BuildStats::default();
        let mut lits: Vec<Lit> = Vec::new();
        let mut clause_off: Vec<u32> = vec![0];
        let mut seen: Vec<i8> = vec![0; num_vars + 1];

        'clauses: for (index, raw) in clauses.into_iter().enumerate() {
            if raw.is_empty() {
                return Err(FormulaError::EmptyClause { index });
            }
            let start = lits.len();
            for &code in &raw {
                if code == 0 || code.unsigned_abs() as usize > num_vars {
                    return Err(FormulaError::LiteralOutOfRange {
                        lit: code,
                        index,
                        num_vars,
                    });
                }
                let v = code.unsigned_abs() as usize;
                let s: i8 = if code < 0 { -1 } else { 1 };
                match seen[v] {
                    0 => {
                        seen[v] = s;
                        lits.push(Lit(code));
                    }
                    prev if prev == s => stats.duplicate_literals_removed += 1,
                    _ => {
                        // x and !x in the same clause
                        for l in &lits[start..] {
                            seen[l.var() + 1] = 0;
                        }
                        match policy {
                            TautologyPolicy::Reject => {
                                return Err(FormulaError::Tautology {
                                    index,
                                    var: code.abs(),
                                })
                            }
                            TautologyPolicy::Drop => {
                                lits.truncate(start);
                                stats.tautologies_dropped += 1;
                                continue 'clauses;
                            }
                        }
                    }
                }
            }
            for l in &lits[start..] {
                seen[l.var() + 1] = 0;
            }
            clause_off.push(lits.len() as u32);
        }

        let mut f = Formula {
            num_vars,
            lits,
            clause_off,
            occ: Vec::new(),
            occ_off: Vec::new(),
        };
        f.build_occurrence_index();
        Ok((f, stats))
    }

    fn build_occurrence_index(&mut self) {
        let mut counts = vec![0u32; self.num_vars + 1];
        for l in &self.lits {
            counts[l.var() + 1] += 1;
        }
        for v in 0..self.num_vars {
            counts[v + 1] += counts[v];
        }
        self.occ_off = counts.clone();
        let mut occ = vec![
            Occurrence {
                clause: 0,
                negated: false
            };
            self.lits.len()
        ];
        let mut cursor = counts;
        for m in 0..self.num_clauses() {
            for l in self.clause(m) {
                let slot = &mut cursor[l.var()];
                occ[*slot as usize] = Occurrence {
                    clause: m as u32,
                    negated: l.is_negated(),
                };
                *slot += 1;
            }
        }
        self.occ = occ;
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn num_clauses(&self) -> usize {
        self.clause_off.len() - 1
    }

    /// Literals of clause `m`.
    #[inline]
    pub fn clause(&self, m: usize) -> &[Lit] {
        &self.lits[self.clause_off[m] as usize..self.clause_off[m + 1] as usize]
    }

    #[inline]
    pub fn clause_len(&self, m: usize) -> usize {
        (self.clause_off[m + 1] - self.clause_off[m]) as usize
    }

    pub fn clauses(&self) -> impl Iterator<Item = &[Lit]> + '_ {
        (0..self.num_clauses()).map(move |m| self.clause(m))
    }

    /// All (clause, sign) pairs in which variable `v` (0-based) appears.
    #[inline]
    pub fn occurrences(&self, v: usize) -> &[Occurrence] {
        &self.occ[self.occ_off[v] as usize..self.occ_off[v + 1] as usize]
    }

    /// Constraint density M/N.
    pub fn constraint_density(&self) -> f64 {
        self.num_clauses() as f64 / self.num_vars as f64
    }

    #[inline]
    pub fn clause_satisfied(&self, m: usize, x: &Assignment) -> bool {
        self.clause(m).iter().any(|l| l.satisfied_by(x.bits[l.var()]))
    }

    /// Number of clauses unsatisfied by `x`.
    pub fn energy(&self, x: &Assignment) -> i64 {
        assert_eq!(
            x.len(),
            self.num_vars,
            "assignment length {} does not match variable count {}",
            x.len(),
            self.num_vars
        );
        self.energy_bits(&x.bits)
    }

    /// Like [`Formula::energy`] but on a raw bit slice.
    pub fn energy_bits(&self, bits: &[bool]) -> i64 {
        let mut e = 0i64;
        for clause in self.clauses() {
            if !clause.iter().any(|l| l.satisfied_by(bits[l.var()])) {
                e += 1;
            }
        }
        e
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Formula {{ num_vars: {}, num_clauses: {} }}",
            self.num_vars,
            self.num_clauses()
        )
    }
}

/// Boolean truth assignment, one bit per variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn all_false(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    /// Orthant discretization of a continuous state: `x_i = 1` iff `s_i >= 0`.
    pub fn from_signs<F: crate::Real>(s: &[F]) -> Self {
        Assignment {
            bits: s.iter().map(|&v| v >= F::zero()).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> bool {
        self.bits[v]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Whitespace-separated 0/1 values, wrapped at 50 per line to match the
    /// usual solution-listing layout.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, &b) in self.bits.iter().enumerate() {
            if i > 0 {
                if i % 50 == 0 {
                    writeln!(w)?;
                } else {
                    write!(w, " ")?;
                }
            }
            write!(w, "{}", b as u8)?;
        }
        writeln!(w)
    }

    /// Reads whitespace-separated 0/1 values; the count must match `n`.
    pub fn read_text<R: BufRead>(r: R, n: usize) -> io::Result<Self> {
        let mut bits = Vec::with_capacity(n);
        for line in r.lines() {
            for tok in line?.split_whitespace() {
                match tok {
                    "0" => bits.push(false),
                    "1" => bits.push(true),
                    other => {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("expected 0 or 1, found {other:?}"),
                        ))
                    }
                }
            }
        }
        if bits.len() != n {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("expected {n} values, found {}", bits.len()),
            ));
        }
        Ok(Assignment { bits })
    }

    pub fn to_compact_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Assignment({})", self.to_compact_string())
    }
}
