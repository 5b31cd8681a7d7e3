//! Pearson χ² tests, tail probabilities and multiple-comparison correction.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::tables::{Contingency, Table2x2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("table needs at least two rows and two columns, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("table has no counts")]
    Empty,
    #[error("row {0:?} is empty")]
    EmptyRow(String),
    #[error("column {0:?} is empty")]
    EmptyColumn(String),
    #[error("cell ({row},{col}) has zero error")]
    ZeroError { row: usize, col: usize },
    #[error("cell ({row},{col}) has a non-positive weighted count")]
    NonPositiveCount { row: usize, col: usize },
    #[error("invalid weighted cell: N={n}, e2={e2}")]
    InvalidWeighted { n: f64, e2: f64 },
    #[error("correction multiplier must be at least 1")]
    Multiplier,
}

/// Outcome of one χ² test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub descriptor: String,
    pub chi2: f64,
    pub dof: u32,
    pub p_raw: f64,
    pub p_corrected: f64,
    /// Smallest expected count; below 5 the asymptotic p-value is rough.
    pub min_expected: f64,
}

impl Chi2Result {
    pub fn new(chi2: f64, dof: u32, min_expected: f64) -> Self {
        let p = chi2_pvalue(chi2, dof);
        Chi2Result {
            descriptor: String::new(),
            chi2,
            dof,
            p_raw: p,
            p_corrected: p,
            min_expected,
        }
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        self.descriptor = descriptor.into();
        self
    }

    pub fn low_expected(&self) -> bool {
        self.min_expected < 5.0
    }
}

/// Upper tail of the χ² distribution, Q(dof/2, chi2/2).
pub fn chi2_pvalue(chi2: f64, dof: u32) -> f64 {
    assert!(dof > 0, "dof must be positive");
    if chi2.is_nan() {
        return f64::NAN;
    }
    if chi2 <= 0.0 {
        return 1.0;
    }
    if chi2.is_infinite() {
        return 0.0;
    }
    gamma_ur(dof as f64 / 2.0, chi2 / 2.0)
}

/// The dof-1 tail written as erfc(√(χ²/2)).
pub fn chi2_pvalue_erfc(chi2: f64) -> f64 {
    libm::erfc((chi2.max(0.0) / 2.0).sqrt())
}

pub fn pearson_chi2(t: &Contingency) -> Result<Chi2Result, StatsError> {
    if t.rows < 2 || t.cols < 2 {
        return Err(StatsError::Shape {
            rows: t.rows,
            cols: t.cols,
        });
    }
    let rs = t.row_sums();
    let cs = t.col_sums();
    let n: f64 = rs.iter().sum();
    if n <= 0.0 {
        return Err(StatsError::Empty);
    }
    if let Some(i) = rs.iter().position(|&r| r <= 0.0) {
        return Err(StatsError::EmptyRow(t.row_labels[i].clone()));
    }
    if let Some(j) = cs.iter().position(|&c| c <= 0.0) {
        return Err(StatsError::EmptyColumn(t.col_labels[j].clone()));
    }
    let mut chi2 = 0.0;
    let mut min_e = f64::INFINITY;
    for (i, r) in rs.iter().enumerate() {
        for (j, c) in cs.iter().enumerate() {
            let e = r * c / n;
            let d = t.get(i, j) - e;
            chi2 += d * d / e;
            min_e = min_e.min(e);
        }
    }
    let dof = ((t.rows - 1) * (t.cols - 1)) as u32;
    Ok(Chi2Result::new(chi2, dof, min_e))
}

pub fn pearson_chi2_2x2(t: &Table2x2) -> Result<Chi2Result, StatsError> {
    pearson_chi2(&Contingency::from(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionPolicy {
    pub multiplier: u32,
}

impl CorrectionPolicy {
    pub fn new(multiplier: u32) -> Result<Self, StatsError> {
        if multiplier == 0 {
            return Err(StatsError::Multiplier);
        }
        Ok(CorrectionPolicy { multiplier })
    }
}

pub fn bonferroni(result: &Chi2Result, policy: CorrectionPolicy) -> Chi2Result {
    let mut r = result.clone();
    r.p_corrected = (policy.multiplier as f64 * r.p_raw).min(1.0);
    r
}

/// Weighted count N = ΣC/T with squared error e² = ΣC/T² over intervals
/// that had C coincidences in T trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedCell {
    pub n: f64,
    pub e2: f64,
}

impl WeightedCell {
    pub fn new(n: f64, e2: f64) -> Result<Self, StatsError> {
        let ok = n.is_finite() && e2.is_finite() && n >= 0.0 && e2 >= 0.0 && (e2 > 0.0 || n == 0.0);
        if !ok {
            return Err(StatsError::InvalidWeighted { n, e2 });
        }
        Ok(WeightedCell { n, e2 })
    }

    /// From a count and its (unsquared) error, as published.
    pub fn from_n_and_e(n: f64, e: f64) -> Result<Self, StatsError> {
        WeightedCell::new(n, e * e)
    }

    /// Accumulate `(coincidences, trials)` per interval; intervals with no trials are skipped.
    pub fn from_intervals<I: IntoIterator<Item = (u64, u64)>>(intervals: I) -> Self {
        let (mut n, mut e2) = (0.0, 0.0);
        for (c, t) in intervals {
            if t == 0 {
                continue;
            }
            let (c, t) = (c as f64, t as f64);
            n += c / t;
            e2 += c / (t * t);
        }
        WeightedCell { n, e2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedCounts {
    pub cells: [[WeightedCell; 2]; 2],
}

impl WeightedCounts {
    pub fn from_n_and_e(n: [[f64; 2]; 2], e: [[f64; 2]; 2]) -> Result<Self, StatsError> {
        let cell = |i: usize, j: usize| WeightedCell::from_n_and_e(n[i][j], e[i][j]);
        Ok(WeightedCounts {
            cells: [[cell(0, 0)?, cell(0, 1)?], [cell(1, 0)?, cell(1, 1)?]],
        })
    }
}

/// χ² = ((N₀₀N₁₁ − N₀₁N₁₀)/ΣN)² · Σ 1/e², one degree of freedom.
pub fn weighted_chi2(w: &WeightedCounts) -> Result<Chi2Result, StatsError> {
    let c = &w.cells;
    for (i, row) in c.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell.n <= 0.0 {
                return Err(StatsError::NonPositiveCount { row: i, col: j });
            }
            if cell.e2 <= 0.0 {
                return Err(StatsError::ZeroError { row: i, col: j });
            }
        }
    }
    let total = c[0][0].n + c[0][1].n + c[1][0].n + c[1][1].n;
    let d = (c[0][0].n * c[1][1].n - c[0][1].n * c[1][0].n) / total;
    let inv: f64 = c.iter().flatten().map(|x| 1.0 / x.e2).sum();
    let min_n = c
        .iter()
        .flatten()
        .map(|x| x.n)
        .fold(f64::INFINITY, f64::min);
    Ok(Chi2Result::new(d * d * inv, 1, min_n))
}

/// χ² of counts against a uniform expectation, dof k−1.
pub fn uniformity_chi2(counts: &[u64]) -> Result<Chi2Result, StatsError> {
    if counts.len() < 2 {
        return Err(StatsError::Shape {
            rows: 1,
            cols: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::Empty);
    }
    let e = total as f64 / counts.len() as f64;
    let chi2 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    Ok(Chi2Result::new(chi2, counts.len() as u32 - 1, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t2(a: f64, b: f64, c: f64, d: f64) -> Contingency {
        Contingency::from_rows(&[[a, b], [c, d]]).unwrap()
    }

    /// ∫ f over [a,b] by adaptive Simpson.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = (a + b) / 2.0;
            let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn quadrature_oracle_at_five_percent() {
        // dof-1 density after x = u²: 2·φ(u) on [0, √x].
        let phi = |u: f64| 2.0 * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = 1.0 - simpson(&phi, 0.0, 3.841f64.sqrt(), 1e-13);
        let p = chi2_pvalue(3.841, 1);
        assert!((p - oracle).abs() < 1e-10, "{p} vs {oracle}");
        assert!((p - 0.05).abs() < 5e-4);
    }

    #[test]
    fn pvalue_edges() {
        assert_eq!(chi2_pvalue(0.0, 1), 1.0);
        assert_eq!(chi2_pvalue(0.0, 15), 1.0);
        let p = chi2_pvalue(20.0, 1);
        assert!((p - 7.744216e-6).abs() < 1e-11);
        // dof 2 has the closed form exp(-x/2).
        assert!((chi2_pvalue(7.0, 2) - (-3.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn totals_table_value() {
        let r = pearson_chi2(&t2(26933.0, 53764.0, 29470.0, 50011.0)).unwrap();
        assert!((r.chi2 - 240.62).abs() < 0.01, "{}", r.chi2);
        assert_eq!(r.dof, 1);
        let r = pearson_chi2(&t2(2285.0, 2603.0, 2470.0, 2092.0)).unwrap();
        assert!((r.chi2 - 51.63).abs() < 0.01, "{}", r.chi2);
    }

    #[test]
    fn proportional_rows_give_zero() {
        let r = pearson_chi2(&t2(10.0, 20.0, 30.0, 60.0)).unwrap();
        assert!(r.chi2.abs() < 1e-12);
        assert_eq!(r.p_raw, 1.0);
    }

    #[test]
    fn empty_marginal_is_named() {
        let mut t = t2(0.0, 0.0, 3.0, 4.0);
        t.row_labels[0] = "XY=01".into();
        assert_eq!(
            pearson_chi2(&t).unwrap_err(),
            StatsError::EmptyRow("XY=01".into())
        );
        let t = t2(0.0, 1.0, 0.0, 4.0);
        assert!(matches!(pearson_chi2(&t), Err(StatsError::EmptyColumn(_))));
    }

    #[test]
    fn general_table_dof() {
        let t = Contingency::from_rows(&[[5.0, 7.0, 9.0], [6.0, 2.0, 8.0]]).unwrap();
        assert_eq!(pearson_chi2(&t).unwrap().dof, 2);
    }

    #[test]
    fn bonferroni_cases() {
        let mut r = Chi2Result::new(8.0, 1, 100.0);
        r.p_raw = 0.005;
        let c = bonferroni(&r, CorrectionPolicy::new(32).unwrap());
        assert!((c.p_corrected - 0.16).abs() < 1e-12);
        assert_eq!(
            bonferroni(&r, CorrectionPolicy::new(1).unwrap()).p_corrected,
            0.005
        );
        r.p_raw = 0.5;
        assert_eq!(
            bonferroni(&r, CorrectionPolicy::new(4).unwrap()).p_corrected,
            1.0
        );
        assert_eq!(CorrectionPolicy::new(0), Err(StatsError::Multiplier));
    }

    #[test]
    fn weighted_examples() {
        let w = WeightedCounts::from_n_and_e(
            [[7.04, 7.37], [7.54, 2.82]],
            [[0.78, 0.87], [0.82, 0.67]],
        )
        .unwrap();
        let r = weighted_chi2(&w).unwrap();
        assert!((r.chi2 - 13.98).abs() < 0.15, "{}", r.chi2);
        let w = WeightedCounts::from_n_and_e(
            [[124.87, 112.25], [100.06, 78.59]],
            [[2.95, 3.27], [2.97, 2.67]],
        )
        .unwrap();
        assert!((weighted_chi2(&w).unwrap().chi2 - 5.37).abs() < 0.1);
        let w = WeightedCounts::from_n_and_e([[1.0, 2.0], [3.0, 6.0]], [[0.5; 2]; 2]).unwrap();
        assert!(weighted_chi2(&w).unwrap().chi2.abs() < 1e-12);
    }

    #[test]
    fn weighted_rejects_zero_error() {
        assert!(WeightedCell::new(1.0, 0.0).is_err());
        let z = WeightedCell { n: 1.0, e2: 0.0 };
        let ok = WeightedCell::new(1.0, 1.0).unwrap();
        let w = WeightedCounts {
            cells: [[z, ok], [ok, ok]],
        };
        assert_eq!(
            weighted_chi2(&w).unwrap_err(),
            StatsError::ZeroError { row: 0, col: 0 }
        );
    }

    #[test]
    fn weighted_cell_from_intervals() {
        let c = WeightedCell::from_intervals([(4, 2), (9, 3), (5, 0)]);
        assert!((c.n - 5.0).abs() < 1e-12);
        assert!((c.e2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uniformity_examples() {
        assert_eq!(uniformity_chi2(&[7, 7, 7]).unwrap().chi2, 0.0);
        let r = uniformity_chi2(&[10, 0]).unwrap();
        assert_eq!(r.chi2, 10.0);
        assert_eq!(r.dof, 1);
        assert!(uniformity_chi2(&[]).is_err());
    }

    proptest! {
        #[test]
        fn pvalue_matches_erfc(x in 0.0f64..700.0) {
            let q = chi2_pvalue(x, 1);
            let e = chi2_pvalue_erfc(x);
            prop_assert!((q - e).abs() <= 1e-12 * e, "x={} q={} erfc={}", x, q, e);
        }

        #[test]
        fn pvalue_monotone(x in 0.0f64..200.0, dx in 0.0f64..50.0, dof in 1u32..40) {
            prop_assert!(chi2_pvalue(x + dx, dof) <= chi2_pvalue(x, dof));
        }

        #[test]
        fn swaps_and_transpose_preserve_chi2(
            a in 1u32..5000, b in 1u32..5000, c in 1u32..5000, d in 1u32..5000,
        ) {
            let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
            let base = pearson_chi2(&t2(a, b, c, d)).unwrap().chi2;
            for other in [t2(c, d, a, b), t2(b, a, d, c), t2(a, c, b, d)] {
                let v = pearson_chi2(&other).unwrap().chi2;
                prop_assert!((v - base).abs() <= 1e-9 * base.max(1.0));
            }
        }

        #[test]
        fn scaling_scales_chi2(
            a in 1u32..5000, b in 1u32..5000, c in 1u32..5000, d in 1u32..5000, k in 1u32..50,
        ) {
            let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
            let k = k as f64;
            let base = pearson_chi2(&t2(a, b, c, d)).unwrap().chi2;
            let scaled = pearson_chi2(&t2(k * a, k * b, k * c, k * d)).unwrap().chi2;
            prop_assert!((scaled - k * base).abs() <= 1e-9 * (k * base).max(1.0));
        }

        #[test]
        fn corrected_never_below_raw(p in 0.0f64..=1.0, m in 1u32..1000) {
            let mut r = Chi2Result::new(1.0, 1, 10.0);
            r.p_raw = p;
            let c = bonferroni(&r, CorrectionPolicy::new(m).unwrap());
            prop_assert!(c.p_corrected >= c.p_raw && c.p_corrected <= 1.0);
        }
    }
}
