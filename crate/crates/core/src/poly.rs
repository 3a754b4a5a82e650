//! Sparse multivariate polynomials with real coefficients.
//!
//! These hold generating functions and everything derived from them by
//! symbolic differentiation: gradients, Hessians, third-derivative tensors,
//! and the critical function of the sweep construction. Terms are kept in
//! graded-lexicographic order with like terms collected and exact zeros
//! dropped, so structural equality is polynomial equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One monomial: a coefficient times a product of variable powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    exponents: Vec<u32>,
    coefficient: f64,
}

impl Term {
    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// Graded-lex order: total degree first, then lexicographic on exponents.
fn graded_lex(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

/// Sparse polynomial in `nvars` real variables.
///
/// Invariants: every exponent tuple has length `nvars`, no tuple repeats,
/// no coefficient is exactly zero, and terms are sorted graded-lex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyLiteral", into = "PolyLiteral")]
pub struct SparsePolynomial {
    nvars: usize,
    terms: Vec<Term>,
}

impl SparsePolynomial {
    /// Builds a polynomial from raw (exponents, coefficient) pairs,
    /// collecting like terms and dropping exact zeros.
    pub fn new(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::invalid("polynomial needs at least one variable"));
        }
        let mut raw: Vec<(Vec<u32>, f64)> = Vec::new();
        for (exps, coeff) in terms {
            if exps.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    got: exps.len(),
                });
            }
            if !coeff.is_finite() {
                return Err(Error::invalid("coefficients must be finite"));
            }
            raw.push((exps, coeff));
        }
        raw.sort_by(|a, b| graded_lex(&a.0, &b.0));
        let mut collected: Vec<Term> = Vec::with_capacity(raw.len());
        for (exps, coeff) in raw {
            match collected.last_mut() {
                Some(last) if last.exponents == exps => last.coefficient += coeff,
                _ => collected.push(Term {
                    exponents: exps,
                    coefficient: coeff,
                }),
            }
        }
        collected.retain(|t| t.coefficient != 0.0);
        Ok(SparsePolynomial {
            nvars,
            terms: collected,
        })
    }

    pub fn zero(nvars: usize) -> Self {
        SparsePolynomial {
            nvars: nvars.max(1),
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c != 0.0 {
            p.terms.push(Term {
                exponents: vec![0; p.nvars],
                coefficient: c,
            });
        }
        p
    }

    /// Single monomial `c · q^exps`.
    pub fn monomial(nvars: usize, exps: Vec<u32>, c: f64) -> Result<Self> {
        Self::new(nvars, [(exps, c)])
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.last().map(Term::degree)
    }

    /// Coefficient of the given exponent tuple, zero if absent.
    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|t| t.exponents == exps)
            .map_or(0.0, |t| t.coefficient)
    }

    /// Evaluates at a point in double precision.
    pub fn eval(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: q.len(),
            });
        }
        let mut acc = 0.0;
        for t in &self.terms {
            let mut m = t.coefficient;
            for (e, qi) in t.exponents.iter().zip(q) {
                if *e > 0 {
                    m *= qi.powi(*e as i32);
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Exact symbolic partial derivative with respect to variable `var`
    /// (zero-based).
    pub fn partial(&self, var: usize) -> Result<Self> {
        if var >= self.nvars {
            return Err(Error::IndexOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let terms = self.terms.iter().filter(|t| t.exponents[var] > 0).map(|t| {
            let mut exps = t.exponents.clone();
            let e = exps[var];
            exps[var] = e - 1;
            (exps, t.coefficient * f64::from(e))
        });
        // Differentiation maps distinct tuples (with e[var] > 0) to distinct
        // tuples, so new() only re-sorts; it never merges here.
        Self::new(self.nvars, terms.collect::<Vec<_>>())
    }

    /// All first partials, in variable order.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars)
            .map(|i| self.partial(i).expect("index in range"))
            .collect()
    }

    /// Symmetric matrix of second partials.
    pub fn hessian(&self) -> Vec<Vec<Self>> {
        let grad = self.gradient();
        (0..self.nvars)
            .map(|i| {
                (0..self.nvars)
                    .map(|j| grad[i].partial(j).expect("index in range"))
                    .collect()
            })
            .collect()
    }

    /// Fully symmetric 3-index array of third partials.
    pub fn third_tensor(&self) -> Vec<Vec<Vec<Self>>> {
        let hess = self.hessian();
        (0..self.nvars)
            .map(|i| {
                (0..self.nvars)
                    .map(|j| {
                        (0..self.nvars)
                            .map(|k| hess[i][j].partial(k).expect("index in range"))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Splits into homogeneous components, keyed by total degree.
    /// Summing the components recovers the polynomial; degrees with no
    /// terms are absent.
    pub fn split_by_degree(&self) -> BTreeMap<u32, Self> {
        let mut parts: BTreeMap<u32, Self> = BTreeMap::new();
        for t in &self.terms {
            parts
                .entry(t.degree())
                .or_insert_with(|| Self::zero(self.nvars))
                .terms
                .push(t.clone());
        }
        parts
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.nvars != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: other.nvars,
            });
        }
        let all = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| (t.exponents.clone(), t.coefficient));
        Self::new(self.nvars, all.collect::<Vec<_>>())
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| (t.exponents.clone(), t.coefficient * c));
        Self::new(self.nvars, terms.collect::<Vec<_>>()).expect("scaling preserves shape")
    }

    /// Multiplies by the variable `var` (raises one exponent).
    pub fn mul_var(&self, var: usize) -> Result<Self> {
        if var >= self.nvars {
            return Err(Error::IndexOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let terms = self.terms.iter().map(|t| {
            let mut exps = t.exponents.clone();
            exps[var] += 1;
            (exps, t.coefficient)
        });
        Self::new(self.nvars, terms.collect::<Vec<_>>())
    }
}

/// Wire format: `{"nvars": n, "terms": [{"e": [...], "c": ...}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyLiteral {
    pub nvars: usize,
    pub terms: Vec<TermLiteral>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermLiteral {
    pub e: Vec<u32>,
    pub c: f64,
}

impl TryFrom<PolyLiteral> for SparsePolynomial {
    type Error = Error;

    fn try_from(lit: PolyLiteral) -> Result<Self> {
        SparsePolynomial::new(lit.nvars, lit.terms.into_iter().map(|t| (t.e, t.c)))
    }
}

impl From<SparsePolynomial> for PolyLiteral {
    fn from(p: SparsePolynomial) -> Self {
        PolyLiteral {
            nvars: p.nvars,
            terms: p
                .terms
                .into_iter()
                .map(|t| TermLiteral {
                    e: t.exponents,
                    c: t.coefficient,
                })
                .collect(),
        }
    }
}
