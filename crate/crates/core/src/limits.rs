use crate::error::{Error, Result};

/// Caps on combinatorial enumerations. Overridable through environment
/// variables so the CLI can run larger problems without a rebuild.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationLimits {
    /// Maximum number of basis assignments in an input state.
    pub max_state_terms: usize,
    /// Maximum number of output patterns in a marginal table.
    pub max_patterns: usize,
    /// Maximum number of output multisets enumerated by the brute-force oracle.
    pub max_oracle_patterns: usize,
}

pub const ENV_MAX_STATE_TERMS: &str = "BOSON_MAX_STATE_TERMS";
pub const ENV_MAX_PATTERNS: &str = "BOSON_MAX_PATTERNS";
pub const ENV_MAX_ORACLE_PATTERNS: &str = "BOSON_MAX_ORACLE_PATTERNS";

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_state_terms: 100_000,
            max_patterns: 1_000_000,
            max_oracle_patterns: 100_000,
        }
    }
}

impl EnumerationLimits {
    /// Defaults, overridden by any of the `BOSON_MAX_*` variables that are set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        for (var, slot) in [
            (ENV_MAX_STATE_TERMS, &mut limits.max_state_terms),
            (ENV_MAX_PATTERNS, &mut limits.max_patterns),
            (ENV_MAX_ORACLE_PATTERNS, &mut limits.max_oracle_patterns),
        ] {
            if let Ok(raw) = std::env::var(var) {
                *slot = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("{var}={raw:?} is not a count")))?;
            }
        }
        Ok(limits)
    }

    pub(crate) fn check(what: &'static str, needed: u128, limit: usize) -> Result<()> {
        if needed > limit as u128 {
            Err(Error::EnumerationLimit {
                what,
                needed,
                limit: limit as u128,
            })
        } else {
            Ok(())
        }
    }
}

/// Binomial coefficient in u128; saturates instead of overflowing.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
