//! DIMACS CNF reading and writing.
//!
//! Accepts the standard grammar: `c` comment lines, a `p cnf N M` header and
//! 0-terminated clauses of signed integers. A trailing `%` (used by some
//! benchmark archives) ends the clause section.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{Formula, FormulaError, TautologyPolicy};

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    pub tautologies: TautologyPolicy,
}

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header line: {0:?}")]
    MalformedHeader(String),
    #[error("unexpected token {0:?}")]
    BadToken(String),
    #[error("clause count mismatch: header declares {declared}, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("file ends inside a clause")]
    UnterminatedClause,
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses a DIMACS CNF stream into a [`Formula`].
pub fn parse_dimacs<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Formula, DimacsError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut done = false;

    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::MalformedHeader(trimmed.to_string()));
            }
            let mut it = trimmed.split_whitespace();
            it.next(); // "p"
            let kind = it.next();
            let n = it.next().and_then(|t| t.parse::<usize>().ok());
            let m = it.next().and_then(|t| t.parse::<usize>().ok());
            match (kind, n, m, it.next()) {
                (Some("cnf"), Some(n), Some(m), None) => header = Some((n, m)),
                _ => return Err(DimacsError::MalformedHeader(trimmed.to_string())),
            }
            continue;
        }
        if header.is_none() {
            return Err(DimacsError::MissingHeader);
        }
        if done {
            // anything after `%` is padding by convention
            continue;
        }
        for tok in trimmed.split_whitespace() {
            if tok == "%" {
                done = true;
                break;
            }
            let code: i32 = tok
                .parse()
                .map_err(|_| DimacsError::BadToken(tok.to_string()))?;
            if code == 0 {
                if current.is_empty() {
                    return Err(DimacsError::Formula(FormulaError::EmptyClause {
                        index: clauses.len(),
                    }));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(code);
            }
        }
    }

    let (num_vars, declared) = header.ok_or(DimacsError::MissingHeader)?;
    if !current.is_empty() {
        return Err(DimacsError::UnterminatedClause);
    }
    if clauses.len() != declared {
        return Err(DimacsError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    let (formula, _stats) = Formula::from_clauses(num_vars, clauses, opts.tautologies)?;
    Ok(formula)
}

pub fn parse_dimacs_file<P: AsRef<Path>>(
    path: P,
    opts: ParseOptions,
) -> Result<Formula, DimacsError> {
    parse_dimacs(BufReader::new(File::open(path)?), opts)
}

/// Serializes a formula in DIMACS CNF form, one clause per line.
pub fn write_dimacs<W: Write>(f: &Formula, mut w: W) -> io::Result<()> {
    writeln!(w, "p cnf {} {}", f.num_vars(), f.num_clauses())?;
    for clause in f.clauses() {
        for l in clause {
            write!(w, "{} ", l.code())?;
        }
        writeln!(w, "0")?;
    }
    Ok(())
}
