//! Hoeffding error intervals for the dependency and AND measures computed by
//! the online miner on a stationary stream.
//!
//! A measure of the form `X̄ / (Ȳ + 1/nc)` is bracketed by substituting the
//! Hoeffding deviations of the per-trace means `X̄` and `Ȳ`:
//!
//! ```text
//! (E[X] - ε_X) / (E[Y] + ε_Y + 1/nc)  <=  measure  <=  (E[X] + ε_X) / (E[Y] - ε_Y + 1/nc)
//! ```
//!
//! Each side holds with probability `1 - δ`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::PairMap;

/// Half-width of the Hoeffding interval for the mean of `nc` independent
/// variables whose range has width `range`.
pub fn hoeffding_epsilon(range: f64, delta: f64, nc: f64) -> f64 {
    (range * range * (2.0 / delta).ln() / (2.0 * nc)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Brackets `X̄ / (Ȳ + 1/nc)` given expectations and deviations.
pub fn ratio_bounds(
    expected_x: f64,
    expected_y: f64,
    eps_x: f64,
    eps_y: f64,
    nc: f64,
) -> Result<Interval> {
    let upper_den = expected_y - eps_y + 1.0 / nc;
    if upper_den <= 0.0 {
        return Err(Error::VacuousBound {
            denominator: upper_den,
            nc,
        });
    }
    Ok(Interval {
        lower: (expected_x - eps_x) / (expected_y + eps_y + 1.0 / nc),
        upper: (expected_x + eps_x) / upper_den,
    })
}

/// Distribution facts about a stationary stream plus the observed case count.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    /// Confidence parameter δ.
    pub delta: f64,
    /// Cases observed so far, `nc(t)`.
    pub nc: f64,
    /// `ξ_ab`: most successions `a > b` a single trace can hold.
    pub xi: PairMap<f64>,
    /// `E[ρ_ab]`: expected successions `a > b` per trace.
    pub expected: PairMap<f64>,
}

impl BoundQuery {
    pub fn new(delta: f64, nc: f64) -> Result<Self> {
        let q = BoundQuery {
            delta,
            nc,
            xi: PairMap::new(),
            expected: PairMap::new(),
        };
        q.validate()?;
        Ok(q)
    }

    /// Fills `ξ` and `E[ρ]` from an exact distribution over traces.
    pub fn from_traces(delta: f64, nc: f64, traces: &BTreeMap<Vec<String>, f64>) -> Result<Self> {
        let mut q = BoundQuery::new(delta, nc)?;
        for (trace, p) in traces {
            let mut local: PairMap<f64> = PairMap::new();
            for w in trace.windows(2) {
                local.add(&w[0], &w[1], 1.0);
            }
            for (a, b, count) in local.iter() {
                q.expected.add(a, b, p * count);
                let xi = q.xi.entry_mut(a, b);
                *xi = xi.max(*count);
            }
        }
        Ok(q)
    }

    pub fn with_nc(&self, nc: f64) -> Result<Self> {
        let q = BoundQuery { nc, ..self.clone() };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.nc.is_nan() || self.nc < 1.0 {
            return Err(Error::InvalidConfig(format!("nc must be at least 1, got {}", self.nc)));
        }
        if self.xi.iter().any(|(_, _, v)| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidConfig("xi ranges must be non-negative".into()));
        }
        Ok(())
    }

    fn xi(&self, a: &str, b: &str) -> f64 {
        self.xi.value(a, b)
    }

    fn mean(&self, a: &str, b: &str) -> f64 {
        self.expected.value(a, b)
    }

    /// `ε_ab(t)` with range `ξ_ab + ξ_ba`.
    pub fn epsilon_pair(&self, a: &str, b: &str) -> f64 {
        hoeffding_epsilon(self.xi(a, b) + self.xi(b, a), self.delta, self.nc)
    }

    /// `ε_abc(t)` with range `ξ_ab + ξ_ac`.
    pub fn epsilon_triple(&self, a: &str, b: &str, c: &str) -> f64 {
        hoeffding_epsilon(self.xi(a, b) + self.xi(a, c), self.delta, self.nc)
    }

    /// Limit value `E[ρ_ab - ρ_ba] / E[ρ_ab + ρ_ba]` of the dependency measure.
    pub fn dependency_limit(&self, a: &str, b: &str) -> f64 {
        let y = self.mean(a, b) + self.mean(b, a);
        if y == 0.0 {
            0.0
        } else {
            (self.mean(a, b) - self.mean(b, a)) / y
        }
    }

    /// Limit value of the AND measure of `a` over `b` and `c`.
    pub fn and_limit(&self, a: &str, b: &str, c: &str) -> f64 {
        let y = self.mean(a, b) + self.mean(a, c);
        if y == 0.0 {
            0.0
        } else {
            (self.mean(b, c) + self.mean(c, b)) / y
        }
    }

    pub fn dependency_bounds(&self, a: &str, b: &str) -> Result<Interval> {
        self.validate()?;
        let eps = self.epsilon_pair(a, b);
        ratio_bounds(
            self.mean(a, b) - self.mean(b, a),
            self.mean(a, b) + self.mean(b, a),
            eps,
            eps,
            self.nc,
        )
    }

    pub fn and_bounds(&self, a: &str, b: &str, c: &str) -> Result<Interval> {
        self.validate()?;
        ratio_bounds(
            self.mean(b, c) + self.mean(c, b),
            self.mean(a, b) + self.mean(a, c),
            self.epsilon_pair(b, c),
            self.epsilon_triple(a, b, c),
            self.nc,
        )
    }
}
