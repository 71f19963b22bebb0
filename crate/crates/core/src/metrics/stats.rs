//! Paired Wilcoxon signed-rank tests with Benjamini–Hochberg correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size given an exact null distribution.
pub const EXACT_MAX_N: usize = 20;
/// Fewest non-zero differences a column needs to be tested.
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// B tends to exceed A.
    Greater,
    /// B tends to fall below A.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences used.
    pub n: usize,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Average ranks of `values` (1-based), ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Signed-rank test on differences `b - a`. Zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).filter(|&d| d != 0.0).collect();
    wilcoxon_differences(&diffs, alternative)
}

/// Signed-rank test on paired differences. Zero differences are dropped.
pub fn wilcoxon_differences(diffs: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::PairedTable("non-finite difference".into()));
    }
    let n = d.len();
    if n < MIN_PAIRS {
        return Err(Error::TooFewSamples { needed: MIN_PAIRS, found: n });
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus, alternative), true)
    } else {
        (normal_p(&ranks, w_plus, alternative), false)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        p_value,
        exact,
    })
}

/// Null distribution of the doubled positive-rank sum: `counts[s]` sign
/// assignments give a doubled sum of `s`. Doubling keeps midranks integral.
fn doubled_rank_sum_counts(ranks: &[f64]) -> Vec<f64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let counts = doubled_rank_sum_counts(ranks);
    let total = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let lower = counts[..=w].iter().sum::<f64>() / total;
    let upper = counts[w..].iter().sum::<f64>() / total;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

fn normal_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut start = 0;
    while start < sorted.len() {
        let end = sorted[start..].iter().take_while(|&&r| r == sorted[start]).count() + start;
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean) / var.sqrt();
    let std = Normal::standard();
    match alternative {
        Alternative::Greater => std.sf(z),
        Alternative::Less => std.cdf(z),
        Alternative::TwoSided => (2.0 * std.sf(z.abs())).min(1.0),
    }
}

/// Benjamini–Hochberg step-up. Returns adjusted p-values and rejection flags
/// at level `q`, both in input order.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> (Vec<f64>, Vec<bool>) {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let cutoff = (0..m).rev().find(|&r| p_values[order[r]] <= (r + 1) as f64 * q / m as f64);
    let mut significant = vec![false; m];
    if let Some(last) = cutoff {
        for &i in &order[..=last] {
            significant[i] = true;
        }
    }
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for r in (0..m).rev() {
        let i = order[r];
        running = running.min(p_values[i] * m as f64 / (r + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    (adjusted, significant)
}

/// One metric column measured per subject under two methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedColumn {
    pub name: String,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Per-subject values for methods A and B, one entry per subject in every
/// column. Non-finite values mark undefined metrics and drop that pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedSampleTable {
    pub subjects: Vec<String>,
    pub columns: Vec<PairedColumn>,
}

impl PairedSampleTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.subjects.len();
        for c in &self.columns {
            if c.a.len() != n || c.b.len() != n {
                return Err(Error::PairedTable(format!(
                    "column {} has {}/{} values for {} subjects",
                    c.name,
                    c.a.len(),
                    c.b.len(),
                    n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTest {
    pub column: String,
    /// Mean of B − A over the defined pairs.
    pub mean_difference: f64,
    /// `None` when the column had too few non-zero pairs to test.
    pub result: Option<WilcoxonResult>,
    pub adjusted_p: Option<f64>,
    pub significant: bool,
}

/// Test every column and correct across the testable ones at FDR level `q`.
/// Columns with fewer than [`MIN_PAIRS`] non-zero differences are reported
/// untested and take no part in the correction.
pub fn wilcoxon_fdr(table: &PairedSampleTable, alternative: Alternative, q: f64) -> Result<Vec<ColumnTest>> {
    table.validate()?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("FDR level {q} outside (0, 1]")));
    }
    let mut tests = Vec::with_capacity(table.columns.len());
    for c in &table.columns {
        let diffs: Vec<f64> = c
            .a
            .iter()
            .zip(&c.b)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| y - x)
            .collect();
        let mean_difference = if diffs.is_empty() {
            f64::NAN
        } else {
            diffs.iter().sum::<f64>() / diffs.len() as f64
        };
        let result = match wilcoxon_differences(&diffs, alternative) {
            Ok(r) => Some(r),
            Err(Error::TooFewSamples { .. }) => {
                log::info!("column {} has too few non-zero pairs to test", c.name);
                None
            }
            Err(e) => return Err(e),
        };
        tests.push(ColumnTest {
            column: c.name.clone(),
            mean_difference,
            result,
            adjusted_p: None,
            significant: false,
        });
    }
    let tested: Vec<usize> = (0..tests.len()).filter(|&i| tests[i].result.is_some()).collect();
    let p: Vec<f64> = tested.iter().map(|&i| tests[i].result.unwrap().p_value).collect();
    let (adjusted, significant) = benjamini_hochberg(&p, q);
    for (k, &i) in tested.iter().enumerate() {
        tests[i].adjusted_p = Some(adjusted[k]);
        tests[i].significant = significant[k];
    }
    Ok(tests)
}
