//! Two-color Ramsey problems as CNF.
//!
//! Each edge of `K_n` is a Boolean variable (1 = blue, 0 = red); every
//! `m`-vertex clique contributes two clauses — all its edge variables plain
//! and all negated — so an assignment violates exactly one clause per
//! monochromatic `m`-clique. The circulant reduction substitutes each edge
//! `{i, j}` by the distance variable `min(|i-j|, n-|i-j|)`, shrinking the
//! search to `floor(n/2)` variables (adjacency symmetry forces
//! `x_d = x_{n-d}`, so the count is `floor(n/2)` rather than `n - 1`);
//! duplicate clauses collapse with multiplicities so reduced-space energies
//! map back to full colorings. The two-phase search harvests low-energy
//! circulant seeds first, then releases full-space trajectories from those
//! corners.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::dynamics::{choose_b, integrate, SolverParams};
use crate::ensemble::{compute_range, make_pool};
use crate::formula::{Assignment, Formula, TautologyPolicy};
use crate::scalar::{fl, Real};

#[derive(Debug, Error)]
pub enum RamseyError {
    #[error("clique order m = {m} must satisfy 3 <= m <= n = {n}")]
    InvalidCliqueOrder { m: usize, n: usize },
    #[error("distance vector has {got} entries, expected floor({n}/2) = {want}")]
    DistanceLengthMismatch { got: usize, n: usize, want: usize },
    #[error("coloring matrix is not a symmetric 0/1 matrix with zero diagonal")]
    InvalidColoring,
}

/// Edge-variable bijection for `K_n`: unordered pairs in lexicographic
/// order map to variables `1..=n(n-1)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RamseyInstance {
    pub m: usize,
    pub n: usize,
}

impl RamseyInstance {
    pub fn num_edge_vars(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// 0-based variable index of edge `{i, j}`, vertices 0-based.
    pub fn edge_var(&self, i: usize, j: usize) -> usize {
        let (u, v) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(v < self.n && u != v);
        u * self.n - u * (u + 1) / 2 + (v - u - 1)
    }
}

fn check_orders(m: usize, n: usize) -> Result<(), RamseyError> {
    if m < 3 || m > n {
        return Err(RamseyError::InvalidCliqueOrder { m, n });
    }
    Ok(())
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the next combination
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for later in pos + 1..k {
                    idx[later] = idx[later - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
    }
}

/// Full clique encoding: `2 * C(n, m)` clauses of length `m(m-1)/2` over
/// `n(n-1)/2` edge variables, lexicographic subsets, positive clause before
/// its negative twin.
pub fn encode(m: usize, n: usize) -> Result<(Formula, RamseyInstance), RamseyError> {
    check_orders(m, n)?;
    let inst = RamseyInstance { m, n };
    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(2 * binomial(n, m));
    for_each_combination(n, m, |verts| {
        let mut pos = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                pos.push(inst.edge_var(verts[i], verts[j]) as i32 + 1);
            }
        }
        let neg: Vec<i32> = pos.iter().map(|&v| -v).collect();
        clauses.push(pos);
        clauses.push(neg);
    });
    let (formula, _) = Formula::from_clauses(inst.num_edge_vars(), clauses, TautologyPolicy::Reject)
        .expect("clique clauses are well-formed");
    Ok((formula, inst))
}

fn binomial(n: usize, k: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Distance-variable reduction of the clique encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CirculantEncoding {
    pub m: usize,
    pub n: usize,
    /// How many identical full-space clauses each reduced clause stands for;
    /// parallel to the reduced formula's clause list.
    pub multiplicities: Vec<u64>,
}

impl CirculantEncoding {
    pub fn num_distance_vars(&self) -> usize {
        self.n / 2
    }

    /// Energy of the expanded circulant coloring, computed as the
    /// multiplicity-weighted count of violated reduced clauses.
    pub fn expanded_energy(&self, reduced: &Formula, x: &Assignment) -> i64 {
        assert_eq!(x.len(), self.num_distance_vars());
        let mut e = 0i64;
        for (idx, &mult) in self.multiplicities.iter().enumerate() {
            if !reduced.clause_satisfied(idx, x) {
                e += mult as i64;
            }
        }
        e
    }
}

/// Encodes with the circulant substitution: edge `{i, j}` becomes distance
/// variable `min(|i-j|, n-|i-j|)`; duplicate literals collapse and
/// byte-identical clauses dedupe with recorded multiplicities.
pub fn encode_circulant(m: usize, n: usize) -> Result<(Formula, CirculantEncoding), RamseyError> {
    check_orders(m, n)?;
    let num_vars = n / 2;
    // canonical positive clause (sorted distance set) -> multiplicity
    let mut counts: std::collections::BTreeMap<Vec<i32>, u64> = std::collections::BTreeMap::new();
    for_each_combination(n, m, |verts| {
        let mut dists: Vec<i32> = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                let d = verts[j] - verts[i];
                let d = d.min(n - d);
                dists.push(d as i32);
            }
        }
        dists.sort_unstable();
        dists.dedup();
        *counts.entry(dists).or_insert(0) += 1;
    });
    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(2 * counts.len());
    let mut multiplicities: Vec<u64> = Vec::with_capacity(2 * counts.len());
    for (dists, count) in &counts {
        clauses.push(dists.clone());
        clauses.push(dists.iter().map(|&d| -d).collect());
        multiplicities.push(*count);
        multiplicities.push(*count);
    }
    let (formula, _) = Formula::from_clauses(num_vars, clauses, TautologyPolicy::Reject)
        .expect("distance clauses are well-formed");
    Ok((
        formula,
        CirculantEncoding {
            m,
            n,
            multiplicities,
        },
    ))
}

/// A two-coloring of `K_n` as a symmetric 0/1 adjacency matrix (1 = blue).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    n: usize,
    adj: Vec<bool>,
}

impl Coloring {
    pub fn new(n: usize) -> Self {
        Coloring {
            n,
            adj: vec![false; n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, blue: bool) {
        assert_ne!(i, j);
        self.adj[i * self.n + j] = blue;
        self.adj[j * self.n + i] = blue;
    }

    pub fn complement(&self) -> Coloring {
        let mut out = Coloring::new(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    out.adj[i * self.n + j] = !self.adj[i * self.n + j];
                }
            }
        }
        out
    }

    /// Edge variables in lexicographic pair order.
    pub fn to_assignment(&self) -> Assignment {
        let mut bits = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                bits.push(self.get(i, j));
            }
        }
        Assignment::new(bits)
    }

    pub fn from_assignment(x: &Assignment, n: usize) -> Coloring {
        assert_eq!(x.len(), n * (n - 1) / 2);
        let mut col = Coloring::new(n);
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                col.set_edge(i, j, x.get(idx));
                idx += 1;
            }
        }
        col
    }

    /// `n` lines of `n` space-separated 0/1 values.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| (self.get(i, j) as u8).to_string())
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Parses the `write_text` layout, checking symmetry and zero diagonal.
    pub fn parse_text<R: BufRead>(r: R) -> Result<Coloring, RamseyError> {
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|_| RamseyError::InvalidColoring)?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<bool>, RamseyError> = line
                .split_whitespace()
                .map(|tok| match tok {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(RamseyError::InvalidColoring),
                })
                .collect();
            rows.push(row?);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(RamseyError::InvalidColoring);
        }
        let mut col = Coloring::new(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j && v {
                    return Err(RamseyError::InvalidColoring);
                }
                col.adj[i * n + j] = v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if col.adj[i * n + j] != col.adj[j * n + i] {
                    return Err(RamseyError::InvalidColoring);
                }
            }
        }
        Ok(col)
    }
}

/// Expands a distance vector into the circulant coloring
/// `a_{i,j} = x[min(|i-j|, n-|i-j|)]`.
pub fn expand_circulant(x: &[bool], n: usize) -> Result<Coloring, RamseyError> {
    if x.len() != n / 2 {
        return Err(RamseyError::DistanceLengthMismatch {
            got: x.len(),
            n,
            want: n / 2,
        });
    }
    let mut col = Coloring::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = (j - i).min(n - (j - i));
            col.set_edge(i, j, x[d - 1]);
        }
    }
    Ok(col)
}

/// Number of monochromatic `m`-cliques; equals the energy of the clique
/// encoding under the corresponding assignment.
pub fn count_mono_cliques(col: &Coloring, m: usize) -> u64 {
    let mut count = 0u64;
    for_each_combination(col.n(), m, |verts| {
        if clique_is_mono(col, verts) {
            count += 1;
        }
    });
    count
}

fn clique_is_mono(col: &Coloring, verts: &[usize]) -> bool {
    let color = col.get(verts[0], verts[1]);
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            if col.get(verts[i], verts[j]) != color {
                return false;
            }
        }
    }
    true
}

/// Vertex sets of monochromatic `m`-cliques, up to `cap` of them.
pub fn mono_clique_sets(col: &Coloring, m: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut sets = Vec::new();
    for_each_combination(col.n(), m, |verts| {
        if sets.len() < cap && clique_is_mono(col, verts) {
            sets.push(verts.to_vec());
        }
    });
    sets
}

/// Knobs of the two-phase search.
#[derive(Clone, Debug)]
pub struct TwoPhaseConfig<F> {
    pub m: usize,
    pub n: usize,
    /// Circulant-space trajectories.
    pub phase1_gamma: u64,
    /// Full-space trajectories, one per kept seed (best seeds first).
    pub phase2_budget: u64,
    pub master_seed: u64,
    /// Shared integration parameters; `b` is set per phase.
    pub params: SolverParams<F>,
    /// Hat strengths; `None` runs the probe rule on the respective formula.
    pub b_phase1: Option<F>,
    pub b_phase2: Option<F>,
    /// Keep seeds whose expanded energy is within best-seen plus this slack.
    pub seed_slack: i64,
    /// Inward corner offset for phase-2 starts.
    pub corner_epsilon: F,
    pub workers: usize,
}

impl<F: Real> TwoPhaseConfig<F> {
    pub fn new(m: usize, n: usize) -> Self {
        TwoPhaseConfig {
            m,
            n,
            phase1_gamma: 200,
            phase2_budget: 50,
            master_seed: 0,
            params: SolverParams::default(),
            b_phase1: None,
            b_phase2: None,
            seed_slack: 20,
            corner_epsilon: fl(1e-3),
            workers: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwoPhaseResult<F> {
    pub best_coloring: Coloring,
    /// Monochromatic `m`-cliques of the best coloring.
    pub best_energy: i64,
    pub mono_cliques: Vec<Vec<usize>>,
    pub phase1_seeds_kept: usize,
    /// Best expanded energy among phase-1 seeds.
    pub phase1_best_energy: Option<i64>,
    /// Set when phase 1 produced no seeds and phase 2 fell back to random
    /// full-space starts.
    pub phase1_pool_empty: bool,
    pub b_phase1: F,
    pub b_phase2: F,
}

/// Phase 1 searches the circulant-reduced space and keeps distinct
/// low-energy distance vectors (energy measured on the full formula through
/// the clause multiplicities); phase 2 releases full-space trajectories
/// from those corners, nudged inward by `corner_epsilon`.
pub fn two_phase_search<F: Real>(cfg: &TwoPhaseConfig<F>) -> Result<TwoPhaseResult<F>, RamseyError> {
    let (full, _inst) = encode(cfg.m, cfg.n)?;
    let (reduced, circ) = encode_circulant(cfg.m, cfg.n)?;
    let pool = make_pool(cfg.workers);

    let b1 = cfg.b_phase1.unwrap_or_else(|| {
        choose_b(
            &reduced,
            &SolverParams::probe_defaults(),
            cfg.master_seed,
        )
    });
    let params1 = SolverParams { b: b1, ..cfg.params };

    // phase 1: harvest distinct circulant seeds by expanded energy
    let mut seeds: std::collections::BTreeMap<Assignment, i64> = std::collections::BTreeMap::new();
    let mut best_seed_energy: Option<i64> = None;
    let mut start = 0u64;
    while start < cfg.phase1_gamma {
        let end = (start + 512).min(cfg.phase1_gamma);
        for result in compute_range(&reduced, &params1, cfg.master_seed, start, end, pool.as_ref())
        {
            let outcome = match result {
                Ok(out) => out,
                Err(fail) => match fail.partial {
                    Some(partial) => partial,
                    None => continue,
                },
            };
            let energy = circ.expanded_energy(&reduced, &outcome.best_assignment);
            let keep = best_seed_energy.is_none_or(|b| energy <= b + cfg.seed_slack);
            if keep {
                seeds.insert(outcome.best_assignment, energy);
            }
            if best_seed_energy.is_none_or(|b| energy < b) {
                best_seed_energy = Some(energy);
                let cutoff = energy + cfg.seed_slack;
                seeds.retain(|_, &mut e| e <= cutoff);
            }
        }
        start = end;
    }

    let b2 = cfg
        .b_phase2
        .unwrap_or_else(|| choose_b(&full, &SolverParams::probe_defaults(), cfg.master_seed));
    let params2 = SolverParams { b: b2, ..cfg.params };

    let mut ranked: Vec<(i64, Assignment)> =
        seeds.iter().map(|(a, &e)| (e, a.clone())).collect();
    ranked.sort();

    let mut best: Option<(i64, Assignment)> = None;
    let mut track = |energy: i64, assignment: Assignment| {
        if best.as_ref().is_none_or(|(b, _)| energy < *b) {
            best = Some((energy, assignment));
        }
    };

    let phase1_pool_empty = ranked.is_empty();
    if phase1_pool_empty {
        // no seeds: fall back to random full-space starts
        let results = compute_range(
            &full,
            &params2,
            cfg.master_seed,
            0,
            cfg.phase2_budget,
            pool.as_ref(),
        );
        for out in results.into_iter().flatten() {
            track(out.best_energy, out.best_assignment);
            if out.terminated_early {
                break;
            }
        }
    } else {
        let one = F::one();
        for (_, seed) in ranked.iter().take(cfg.phase2_budget as usize) {
            let coloring = expand_circulant(seed.bits(), cfg.n)?;
            let corner = coloring.to_assignment();
            let s0: Vec<F> = corner
                .bits()
                .iter()
                .map(|&b| {
                    if b {
                        one - cfg.corner_epsilon
                    } else {
                        cfg.corner_epsilon - one
                    }
                })
                .collect();
            match integrate(&full, &params2, s0) {
                Ok(out) => {
                    let early = out.terminated_early;
                    track(out.best_energy, out.best_assignment);
                    if early {
                        break;
                    }
                }
                Err(fail) => {
                    if let Some(partial) = fail.partial {
                        track(partial.best_energy, partial.best_assignment);
                    }
                }
            }
        }
    }

    let (best_energy, best_assignment) = best.expect("phase 2 ran at least one trajectory");
    let best_coloring = Coloring::from_assignment(&best_assignment, cfg.n);
    debug_assert_eq!(count_mono_cliques(&best_coloring, cfg.m) as i64, best_energy);
    Ok(TwoPhaseResult {
        mono_cliques: mono_clique_sets(&best_coloring, cfg.m, 1000),
        best_coloring,
        best_energy,
        phase1_seeds_kept: ranked.len(),
        phase1_best_energy: best_seed_energy,
        phase1_pool_empty,
        b_phase1: b1,
        b_phase2: b2,
    })
}
