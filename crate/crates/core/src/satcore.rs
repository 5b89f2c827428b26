//! Classical k-SAT: formulas, DIMACS I/O, brute-force oracle, random
//! instance generation and a Schöning random-walk baseline.
//!
//! Boolean convention: `true` is written as bit `0` and `false` as bit `1`
//! in bitstrings. On the quantum register a `true` variable ends up in the
//! computational state `|1⟩` once the encoding angle reaches π/2, so the
//! basis index of an assignment has bit value 1 wherever the variable is
//! true. [`Assignment::to_bitstring`] and [`Assignment::basis_index`] are
//! the only two places that translate between these views.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

/// Largest register the brute-force oracle will enumerate.
pub const MAX_ENUMERATION_VARS: usize = 24;

/// Default rejection-sampling cap for unique-solution instances.
pub const DEFAULT_UNIQUE_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SatError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header on line {line}: {text:?}")]
    MalformedHeader { line: usize, text: String },
    #[error("invalid token {token:?} on line {line}")]
    InvalidToken { line: usize, token: String },
    #[error("variable {var} out of range 1..={num_vars}")]
    VariableOutOfRange { var: i64, num_vars: usize },
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("clause {clause} repeats variable {var}")]
    DuplicateVariable { clause: usize, var: usize },
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("formula needs at least one variable and one clause")]
    EmptyFormula,
    #[error("assignment has {got} variables, formula has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("{num_vars} variables exceeds the enumeration cap of {MAX_ENUMERATION_VARS}")]
    TooManyVariables { num_vars: usize },
    #[error("clause width {k} is invalid for {n} variables")]
    InvalidWidth { k: usize, n: usize },
    #[error("alpha={alpha} with n={n} yields no clauses")]
    NoClauses { alpha: f64, n: usize },
    #[error("no unique-solution instance found in {attempts} attempts")]
    AttemptsExhausted { attempts: usize },
}

/// A possibly negated variable. Variables are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn positive(var: usize) -> Self {
        Self { var, negated: false }
    }

    pub fn negative(var: usize) -> Self {
        Self { var, negated: true }
    }

    /// Signed DIMACS integer.
    pub fn from_dimacs(v: i64) -> Self {
        Self { var: v.unsigned_abs() as usize, negated: v < 0 }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    /// +1 for a plain variable, -1 for its negation.
    pub fn sign(self) -> i8 {
        if self.negated {
            -1
        } else {
            1
        }
    }

    pub fn is_satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Self(literals)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        self.0.iter().any(|l| l.is_satisfied_by(a.value(l.var)))
    }
}

impl From<&[i64]> for Clause {
    fn from(lits: &[i64]) -> Self {
        Self(lits.iter().copied().map(Literal::from_dimacs).collect())
    }
}

/// A CNF formula over `num_vars` variables.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, SatError> {
        if num_vars == 0 || clauses.is_empty() {
            return Err(SatError::EmptyFormula);
        }
        for (i, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(SatError::EmptyClause { clause: i + 1 });
            }
            let mut seen = vec![false; num_vars + 1];
            for lit in clause.literals() {
                if lit.var == 0 || lit.var > num_vars {
                    return Err(SatError::VariableOutOfRange {
                        var: lit.to_dimacs(),
                        num_vars,
                    });
                }
                if seen[lit.var] {
                    return Err(SatError::DuplicateVariable { clause: i + 1, var: lit.var });
                }
                seen[lit.var] = true;
            }
        }
        Ok(Self { num_vars, clauses })
    }

    /// Convenience constructor from DIMACS-style signed integers.
    pub fn from_signed(num_vars: usize, clauses: &[&[i64]]) -> Result<Self, SatError> {
        Self::new(num_vars, clauses.iter().map(|c| Clause::from(*c)).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Common clause width, if every clause has the same length.
    pub fn width(&self) -> Option<usize> {
        let k = self.clauses[0].len();
        self.clauses.iter().all(|c| c.len() == k).then_some(k)
    }

    pub fn clause_density(&self) -> f64 {
        self.num_clauses() as f64 / self.num_vars as f64
    }

    /// Violation masks in basis-index form: clause `i` is violated by the
    /// basis state `idx` iff `idx & mask == pattern`.
    pub(crate) fn violation_masks(&self) -> Vec<(u64, u64)> {
        let n = self.num_vars;
        self.clauses
            .iter()
            .map(|c| {
                c.literals().iter().fold((0u64, 0u64), |(mask, pat), l| {
                    let bit = 1u64 << (n - l.var);
                    // a positive literal is violated by a false variable (bit 0)
                    (mask | bit, if l.negated { pat | bit } else { pat })
                })
            })
            .collect()
    }

    /// Canonical DIMACS text.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c.literals() {
                out.push_str(&l.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let lits: Vec<String> = c
                    .literals()
                    .iter()
                    .map(|l| format!("{}b{}", if l.negated { "¬" } else { "" }, l.var))
                    .collect();
                format!("({})", lits.join(" ∨ "))
            })
            .collect();
        write!(f, "{}", parts.join(" ∧ "))
    }
}

/// Truth values for variables 1..=n, stored at positions 0..n.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    /// Value of variable `var` (1-based).
    pub fn value(&self, var: usize) -> bool {
        self.0[var - 1]
    }

    pub fn flip(&mut self, var: usize) {
        self.0[var - 1] = !self.0[var - 1];
    }

    /// Qubit-1-most-significant basis index; true variables contribute a 1.
    pub fn basis_index(&self) -> usize {
        self.0.iter().fold(0usize, |acc, &v| (acc << 1) | usize::from(v))
    }

    pub fn from_basis_index(n: usize, idx: usize) -> Self {
        Self((1..=n).map(|j| (idx >> (n - j)) & 1 == 1).collect())
    }

    /// ±1 signs, +1 for true.
    pub fn signs(&self) -> Vec<i8> {
        self.0.iter().map(|&v| if v { 1 } else { -1 }).collect()
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        Self(signs.iter().map(|&s| s > 0).collect())
    }

    /// Bitstring with `0` for true and `1` for false.
    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|&v| if v { '0' } else { '1' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(true),
                '1' => Some(false),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    /// `T`/`F` rendering, e.g. `TF`.
    pub fn to_tf(&self) -> String {
        self.0.iter().map(|&v| if v { 'T' } else { 'F' }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolutionSet {
    solutions: Vec<Assignment>,
}

impl SolutionSet {
    pub fn count(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn solutions(&self) -> &[Assignment] {
        &self.solutions
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.solutions.contains(a)
    }

    pub fn unique(&self) -> Option<&Assignment> {
        (self.solutions.len() == 1).then(|| &self.solutions[0])
    }
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<i64> = Vec::new();

    'lines: for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            // SATLIB end marker
            break;
        }
        if trimmed.starts_with('p') {
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let malformed = || SatError::MalformedHeader {
                line: line_no,
                text: trimmed.to_string(),
            };
            if header.is_some() || parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(malformed());
            }
            let n = parts[2].parse::<usize>().map_err(|_| malformed())?;
            let m = parts[3].parse::<usize>().map_err(|_| malformed())?;
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(SatError::MissingHeader);
        };
        for tok in trimmed.split_whitespace() {
            if tok.starts_with('%') {
                break 'lines;
            }
            let v: i64 = tok.parse().map_err(|_| SatError::InvalidToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if v == 0 {
                if current.is_empty() {
                    return Err(SatError::EmptyClause { clause: clauses.len() + 1 });
                }
                clauses.push(Clause::from(current.as_slice()));
                current.clear();
            } else {
                if v.unsigned_abs() as usize > n {
                    return Err(SatError::VariableOutOfRange { var: v, num_vars: n });
                }
                current.push(v);
            }
        }
    }

    let (n, m) = header.ok_or(SatError::MissingHeader)?;
    if !current.is_empty() {
        return Err(SatError::UnterminatedClause);
    }
    if clauses.len() != m {
        return Err(SatError::ClauseCountMismatch { declared: m, found: clauses.len() });
    }
    CnfFormula::new(n, clauses)
}

pub fn evaluate(f: &CnfFormula, a: &Assignment) -> Result<bool, SatError> {
    if a.len() != f.num_vars() {
        return Err(SatError::SizeMismatch { expected: f.num_vars(), got: a.len() });
    }
    Ok(f.clauses().iter().all(|c| c.is_satisfied_by(a)))
}

/// All satisfying assignments, in ascending basis-index order.
pub fn enumerate_solutions(f: &CnfFormula) -> Result<SolutionSet, SatError> {
    let n = f.num_vars();
    if n > MAX_ENUMERATION_VARS {
        return Err(SatError::TooManyVariables { num_vars: n });
    }
    let masks = f.violation_masks();
    let solutions = (0..1u64 << n)
        .filter(|&idx| masks.iter().all(|&(mask, pat)| idx & mask != pat))
        .map(|idx| Assignment::from_basis_index(n, idx as usize))
        .collect();
    Ok(SolutionSet { solutions })
}

/// `m = round(alpha * n)` with halves rounded up.
pub fn clause_count(n: usize, alpha: f64) -> usize {
    (alpha * n as f64 + 0.5).floor().max(0.0) as usize
}

/// Uniform random k-SAT: each clause picks k distinct variables and negates
/// each with probability 1/2. Duplicate clauses are allowed.
pub fn random_instance<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    k: usize,
    rng: &mut R,
) -> Result<CnfFormula, SatError> {
    if k == 0 || k > n {
        return Err(SatError::InvalidWidth { k, n });
    }
    let m = clause_count(n, alpha);
    if m == 0 {
        return Err(SatError::NoClauses { alpha, n });
    }
    let clauses = (0..m)
        .map(|_| {
            let mut vars: Vec<usize> = sample(rng, n, k).into_iter().map(|v| v + 1).collect();
            vars.sort_unstable();
            Clause::new(
                vars.into_iter()
                    .map(|var| Literal { var, negated: rng.random_bool(0.5) })
                    .collect(),
            )
        })
        .collect();
    CnfFormula::new(n, clauses)
}

pub fn random_unique_solution_instance<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    k: usize,
    rng: &mut R,
) -> Result<CnfFormula, SatError> {
    random_unique_solution_instance_capped(n, alpha, k, rng, DEFAULT_UNIQUE_ATTEMPTS)
}

pub fn random_unique_solution_instance_capped<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    k: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<CnfFormula, SatError> {
    for _ in 0..max_attempts {
        let f = random_instance(n, alpha, k, rng)?;
        if enumerate_solutions(&f)?.count() == 1 {
            return Ok(f);
        }
    }
    Err(SatError::AttemptsExhausted { attempts: max_attempts })
}

/// Schöning's random walk: random start, then repeatedly flip a random
/// variable of a random violated clause. Returns only verified solutions.
pub fn schoening_solve<R: Rng + ?Sized>(
    f: &CnfFormula,
    max_flips: usize,
    max_restarts: usize,
    rng: &mut R,
) -> Option<Assignment> {
    let n = f.num_vars();
    for _ in 0..max_restarts.max(1) {
        let mut a = Assignment::new((0..n).map(|_| rng.random_bool(0.5)).collect());
        for _ in 0..=max_flips {
            let violated: Vec<&Clause> =
                f.clauses().iter().filter(|c| !c.is_satisfied_by(&a)).collect();
            if violated.is_empty() {
                return Some(a);
            }
            let clause = violated[rng.random_range(0..violated.len())];
            let lit = clause.literals()[rng.random_range(0..clause.len())];
            a.flip(lit.var);
        }
    }
    None
}

/// The three-clause 2-variable formula with unique solution (T, F).
pub fn two_qubit_unique() -> CnfFormula {
    CnfFormula::from_signed(2, &[&[1, 2], &[1, -2], &[-1, -2]]).expect("valid formula")
}

/// Two-solution variant: (b1 ∨ b2) ∧ (¬b1 ∨ ¬b2).
pub fn two_qubit_two_solutions() -> CnfFormula {
    CnfFormula::from_signed(2, &[&[1, 2], &[-1, -2]]).expect("valid formula")
}

/// Unsatisfiable variant with all four 2-clauses.
pub fn two_qubit_unsat() -> CnfFormula {
    CnfFormula::from_signed(2, &[&[1, 2], &[1, -2], &[-1, -2], &[-1, 2]]).expect("valid formula")
}
