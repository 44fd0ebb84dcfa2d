use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// 2×2 table `[[a, b], [c, d]]`.
pub type Table2 = [[u64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
}

/// Cohen's kappa for two raters. Rows are rater A's labels, columns rater B's.
pub fn cohen_kappa(table: &Table2) -> Result<AgreementReport, EvalError> {
    let [[a, b], [c, d]] = table.map(|r| r.map(|x| x as f64));
    let n = a + b + c + d;
    if n == 0.0 {
        return Err(EvalError::InvalidInput("empty agreement table".into()));
    }
    let po = (a + d) / n;
    let pe = ((a + b) * (a + c) + (c + d) * (b + d)) / (n * n);
    if pe == 1.0 {
        return Err(EvalError::Degenerate("expected agreement is 1; kappa is undefined".into()));
    }
    Ok(AgreementReport { kappa: (po - pe) / (1.0 - pe), observed_agreement: po, expected_agreement: pe })
}

const TABLE_LEN: usize = 1024;

static LN_FACT: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let mut t = vec![0.0; TABLE_LEN];
    for i in 1..TABLE_LEN {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
});

/// ln(n!), exact summation below 1024 and a Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        return LN_FACT[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// ln of the hypergeometric probability of a table with top-left cell `x`
/// given row sum `r1`, column sum `c1` and total `n`.
pub fn ln_hypergeometric(x: u64, r1: u64, c1: u64, n: u64) -> f64 {
    ln_factorial(r1) + ln_factorial(n - r1) + ln_factorial(c1) + ln_factorial(n - c1)
        - ln_factorial(n)
        - ln_factorial(x)
        - ln_factorial(r1 - x)
        - ln_factorial(c1 - x)
        - ln_factorial(n + x - r1 - c1)
}

/// Two-sided Fisher exact p-value: the total probability of all tables with
/// the observed margins that are no more likely than the observed one
/// (relative tolerance 1e-12). Works in log space throughout.
pub fn fisher_exact_two_sided(table: &Table2) -> Result<f64, EvalError> {
    let [[a, b], [c, d]] = *table;
    let n = a + b + c + d;
    if n == 0 {
        return Err(EvalError::InvalidInput("empty contingency table".into()));
    }
    let (r1, c1) = (a + b, a + c);
    let lo = (r1 + c1).saturating_sub(n);
    let hi = r1.min(c1);
    let observed = ln_hypergeometric(a, r1, c1, n);
    let cutoff = observed + 1e-12_f64.ln_1p();
    let logs: Vec<f64> = (lo..=hi).map(|x| ln_hypergeometric(x, r1, c1, n)).filter(|&l| l <= cutoff).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((max + sum.ln()).exp().min(1.0))
}
