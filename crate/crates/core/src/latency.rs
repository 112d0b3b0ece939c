//! Edge latency functions.
//!
//! Two representations are supported: polynomials with non-negative
//! coefficients and explicit tables over the congestion range `0..=n`.
//! Both are non-decreasing on the integers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatencyFunction {
    /// `a_0 + a_1 x + ... + a_d x^d`, all `a_i >= 0`.
    Polynomial(Vec<f64>),
    /// `values[k]` is the latency at congestion `k`.
    Table(Vec<f64>),
}

impl LatencyFunction {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidLatency("polynomial without coefficients".into()));
        }
        if let Some(c) = coefficients.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidLatency(format!(
                "coefficient {c} is negative or not finite"
            )));
        }
        Ok(LatencyFunction::Polynomial(coefficients))
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidLatency("empty table".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidLatency(format!(
                "table value {v} is negative or not finite"
            )));
        }
        if let Some(w) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidLatency(format!(
                "table decreases between congestion {w} and {}",
                w + 1
            )));
        }
        Ok(LatencyFunction::Table(values))
    }

    /// `a * x^d`.
    pub fn monomial(a: f64, degree: usize) -> Result<Self> {
        let mut c = vec![0.0; degree + 1];
        c[degree] = a;
        Self::polynomial(c)
    }

    pub fn linear(a: f64) -> Result<Self> {
        Self::polynomial(vec![0.0, a])
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::polynomial(vec![c])
    }

    /// Largest admissible argument, if the function has a bounded domain.
    pub fn domain_max(&self) -> Option<usize> {
        match self {
            LatencyFunction::Polynomial(_) => None,
            LatencyFunction::Table(v) => Some(v.len() - 1),
        }
    }

    /// Latency at congestion `k`, checked against the table domain.
    pub fn eval(&self, k: usize) -> Result<f64> {
        match self.domain_max() {
            Some(max) if k > max => Err(Error::Domain { arg: k, max }),
            _ => Ok(self.eval_unchecked(k)),
        }
    }

    /// Latency at congestion `k`. Tables are extended past their last entry
    /// with the final increment so the result stays non-decreasing.
    pub fn eval_unchecked(&self, k: usize) -> f64 {
        match self {
            LatencyFunction::Polynomial(c) => {
                let x = k as f64;
                c.iter().rev().fold(0.0, |acc, a| acc * x + a)
            }
            LatencyFunction::Table(v) => {
                let last = v.len() - 1;
                if k <= last {
                    v[k]
                } else {
                    let step = if last == 0 { 0.0 } else { v[last] - v[last - 1] };
                    v[last] + step * (k - last) as f64
                }
            }
        }
    }

    /// Highest power with a non-zero coefficient (polynomials only).
    pub fn degree(&self) -> Option<usize> {
        match self {
            LatencyFunction::Polynomial(c) => Some(c.iter().rposition(|a| *a != 0.0).unwrap_or(0)),
            LatencyFunction::Table(_) => None,
        }
    }

    /// Upper bound on the elasticity `l'(x) x / l(x)` over `(0, n]`, clamped to
    /// at least one. Tables use the backward difference quotient on integers.
    pub fn elasticity_bound(&self, n: usize) -> f64 {
        let raw = match self {
            LatencyFunction::Polynomial(_) => self.degree().unwrap_or(0) as f64,
            LatencyFunction::Table(_) => (1..=n)
                .filter_map(|x| {
                    let hi = self.eval_unchecked(x);
                    (hi > 0.0).then(|| (hi - self.eval_unchecked(x - 1)) * x as f64 / hi)
                })
                .fold(0.0, f64::max),
        };
        raw.max(1.0)
    }

    /// `max_{x in 1..=upto} l(x) - l(x-1)`.
    pub fn max_increment(&self, upto: usize) -> f64 {
        (1..=upto)
            .map(|x| self.eval_unchecked(x) - self.eval_unchecked(x - 1))
            .fold(0.0, f64::max)
    }

    /// Maximum slope over `1..=n`. Polynomials with non-negative coefficients
    /// are convex, so the last increment is the largest.
    pub fn max_slope(&self, n: usize) -> f64 {
        match self {
            LatencyFunction::Polynomial(_) if n >= 1 => {
                self.eval_unchecked(n) - self.eval_unchecked(n - 1)
            }
            _ => self.max_increment(n),
        }
    }
}
