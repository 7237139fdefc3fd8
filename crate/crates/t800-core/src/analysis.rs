//! Summary statistics over metric samples and the 2^3 full-factorial
//! influence-of-factors analysis.
//!
//! The three binary factors are A (filtering policy present), I (traffic
//! intensity) and M (malicious traffic present). Cell means are regressed
//! on the orthogonal sign matrix, each factor's sum of squares is
//! `8 r q^2`, the within-cell variation is the experimental error, and a
//! factor's influence is its share of the total variation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate factorial input: {0}")]
    DegenerateInput(String),
    #[error("incomplete experiment grid: {0}")]
    IncompleteGrid(String),
}

/// Order statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

/// Exact order statistics; the median of an even-length sample is the
/// midpoint of the central pair, quartiles interpolate linearly between
/// order statistics.
pub fn summarize(samples: &[f64]) -> Result<SummaryStats, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    Ok(SummaryStats {
        median: quantile(0.5),
        min: sorted[0],
        max: *sorted.last().unwrap(),
        q1: quantile(0.25),
        q3: quantile(0.75),
        n: sorted.len(),
    })
}

/// Factor and interaction labels in design-matrix column order (the
/// leading intercept column is unnamed).
pub const EFFECT_NAMES: [&str; 7] = ["A", "I", "M", "AI", "AM", "IM", "AIM"];

/// Map a cell index (0..8) to its factor levels. Cells follow the
/// canonical factorial ordering: M varies fastest, then I, then A.
pub fn cell_levels(cell: usize) -> (i64, i64, i64) {
    let a = if cell >= 4 { 1 } else { -1 };
    let i = if cell % 4 >= 2 { 1 } else { -1 };
    let m = if cell % 2 == 1 { 1 } else { -1 };
    (a, i, m)
}

/// The 8x8 sign matrix: columns [1, A, I, M, AI, AM, IM, AIM], one row per
/// experiment cell. Interaction columns are elementwise products of the
/// main-effect columns, so X^T X = 8 I exactly.
pub fn build_design_matrix() -> [[i64; 8]; 8] {
    let mut x = [[0i64; 8]; 8];
    for (cell, row) in x.iter_mut().enumerate() {
        let (a, i, m) = cell_levels(cell);
        *row = [1, a, i, m, a * i, a * m, i * m, a * i * m];
    }
    x
}

/// Replicate responses for the 8 cells of the 2^3 design.
#[derive(Debug, Clone)]
pub struct FactorialInput {
    pub cells: [Vec<f64>; 8],
}

impl FactorialInput {
    /// Validate shape: every cell populated with the same replica count,
    /// at least two replicas so the error term is meaningful.
    pub fn replicas(&self) -> Result<usize, AnalysisError> {
        let r = self.cells[0].len();
        if self.cells.iter().any(|c| c.len() != r) {
            return Err(AnalysisError::DegenerateInput(
                "cells carry unequal replica counts".into(),
            ));
        }
        if r < 2 {
            return Err(AnalysisError::DegenerateInput(format!(
                "needs at least 2 replicas per cell to estimate SSE, found {r}"
            )));
        }
        Ok(r)
    }

    pub fn cell_means(&self) -> [f64; 8] {
        let mut means = [0.0; 8];
        for (i, cell) in self.cells.iter().enumerate() {
            means[i] = cell.iter().sum::<f64>() / cell.len() as f64;
        }
        means
    }
}

/// Regression coefficients, sums of squares and influence fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsTable {
    /// (q0, qA, qI, qM, qAI, qAM, qIM, qAIM)
    pub q: [f64; 8],
    /// Sums of squares in [`EFFECT_NAMES`] order.
    pub ss: [f64; 7],
    pub sse: f64,
    pub sst: f64,
    /// Influence fractions in [`EFFECT_NAMES`] order plus the error share
    /// last. All zero when the response carries no variation at all.
    pub fractions: [f64; 8],
}

/// Estimate the additive model. By the orthogonality of the design the
/// least-squares solution is `q = X^T ybar / 8`; each effect's sum of
/// squares is `8 r q^2`, the error term is the within-cell deviation from
/// the cell means, and the total variation is their sum.
pub fn estimate_effects(input: &FactorialInput) -> Result<EffectsTable, AnalysisError> {
    let r = input.replicas()?;
    let means = input.cell_means();
    let x = build_design_matrix();

    let mut q = [0.0; 8];
    for (col, qv) in q.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (row, mean) in means.iter().enumerate() {
            acc += x[row][col] as f64 * mean;
        }
        *qv = acc / 8.0;
    }

    let mut ss = [0.0; 7];
    for (k, s) in ss.iter_mut().enumerate() {
        *s = 8.0 * r as f64 * q[k + 1] * q[k + 1];
    }
    let sse: f64 = input
        .cells
        .iter()
        .zip(&means)
        .map(|(cell, mean)| cell.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>())
        .sum();
    let sst = ss.iter().sum::<f64>() + sse;

    let mut fractions = [0.0; 8];
    if sst > 0.0 {
        for (k, f) in fractions.iter_mut().enumerate() {
            *f = if k < 7 { ss[k] / sst } else { sse / sst };
        }
    }
    Ok(EffectsTable {
        q,
        ss,
        sse,
        sst,
        fractions,
    })
}

/// Generic dense least-squares via the normal equations and Gaussian
/// elimination with partial pivoting. This is the second algebraic route
/// against which the orthogonality shortcut is checked.
pub fn solve_least_squares(a: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let rows = a.len();
    if rows == 0 || y.len() != rows {
        return None;
    }
    let cols = a[0].len();
    // Normal equations: (A^T A) q = A^T y.
    let mut ata = vec![vec![0.0; cols]; cols];
    let mut aty = vec![0.0; cols];
    for i in 0..cols {
        for j in 0..cols {
            ata[i][j] = (0..rows).map(|k| a[k][i] * a[k][j]).sum();
        }
        aty[i] = (0..rows).map(|k| a[k][i] * y[k]).sum();
    }
    // Gaussian elimination with partial pivoting on the augmented system.
    for i in 0..cols {
        let pivot = (i..cols).max_by(|p, q| ata[*p][i].abs().total_cmp(&ata[*q][i].abs()))?;
        if ata[pivot][i].abs() < 1e-12 {
            return None;
        }
        ata.swap(i, pivot);
        aty.swap(i, pivot);
        for row in i + 1..cols {
            let factor = ata[row][i] / ata[i][i];
            let (pivot_rows, rest) = ata.split_at_mut(i + 1);
            let pivot_row = &pivot_rows[i];
            for (col, value) in rest[row - i - 1].iter_mut().enumerate().skip(i) {
                *value -= factor * pivot_row[col];
            }
            aty[row] -= factor * aty[i];
        }
    }
    let mut q = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut acc = aty[i];
        for j in i + 1..cols {
            acc -= ata[i][j] * q[j];
        }
        q[i] = acc / ata[i][i];
    }
    Some(q)
}

/// One per-replica response of a benchmark campaign: the mean of the
/// metric over the replica's windows, keyed by policy and traffic cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResponse {
    pub policy: String,
    pub intensity_high: bool,
    pub malicious: bool,
    pub replica: usize,
    pub response: f64,
}

/// The influence-of-factors report: one effects table per policy (factor A
/// contrasts that policy against the disabled filter) plus the simple
/// average of the fractions across policies.
#[derive(Debug, Clone)]
pub struct InfluenceReport {
    pub rows: Vec<(String, EffectsTable)>,
    pub average: [f64; 8],
}

/// Name under which baseline (filter off) responses are keyed.
pub const DISABLED_POLICY: &str = "disabled";

fn collect_cell(
    responses: &[CampaignResponse],
    policy: &str,
    intensity_high: bool,
    malicious: bool,
) -> Vec<f64> {
    let mut rows: Vec<(usize, f64)> = responses
        .iter()
        .filter(|r| r.policy == policy && r.intensity_high == intensity_high && r.malicious == malicious)
        .map(|r| (r.replica, r.response))
        .collect();
    rows.sort_by_key(|(replica, _)| *replica);
    rows.into_iter().map(|(_, v)| v).collect()
}

/// Build the factorial input for one policy against the disabled baseline.
pub fn policy_factorial(
    responses: &[CampaignResponse],
    policy: &str,
) -> Result<FactorialInput, AnalysisError> {
    let mut cells: [Vec<f64>; 8] = Default::default();
    for (idx, cell) in cells.iter_mut().enumerate() {
        let (a, i, m) = cell_levels(idx);
        let key = if a > 0 { policy } else { DISABLED_POLICY };
        let got = collect_cell(responses, key, i > 0, m > 0);
        if got.is_empty() {
            return Err(AnalysisError::IncompleteGrid(format!(
                "no runs for policy `{key}` at I{}M{}",
                (i > 0) as u8,
                (m > 0) as u8
            )));
        }
        *cell = got;
    }
    let r = cells[0].len();
    if cells.iter().any(|c| c.len() != r) {
        return Err(AnalysisError::IncompleteGrid(
            "replica counts differ across cells".into(),
        ));
    }
    Ok(FactorialInput { cells })
}

/// Run the analysis for every policy of the campaign and average the rows.
pub fn influence_report(
    responses: &[CampaignResponse],
    policies: &[&str],
) -> Result<InfluenceReport, AnalysisError> {
    if policies.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut rows = Vec::new();
    for policy in policies {
        let input = policy_factorial(responses, policy)?;
        rows.push((policy.to_string(), estimate_effects(&input)?));
    }
    let mut average = [0.0; 8];
    for (_, table) in &rows {
        for (k, f) in table.fractions.iter().enumerate() {
            average[k] += f / rows.len() as f64;
        }
    }
    Ok(InfluenceReport { rows, average })
}

impl InfluenceReport {
    /// Fixed-width report table, columns
    /// Model, A, I, M, AI, AM, IM, AIM, Err.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10}", "Model"));
        for name in EFFECT_NAMES.iter().chain(["Err"].iter()) {
            out.push_str(&format!("{name:>7}"));
        }
        out.push('\n');
        for (name, table) in &self.rows {
            out.push_str(&format!("{name:<10}"));
            for f in table.fractions {
                out.push_str(&format!("{f:>7.2}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<10}", "average"));
        for f in self.average {
            out.push_str(&format!("{f:>7.2}"));
        }
        out.push('\n');
        out
    }

    /// Machine-readable variant: one CSV row per policy plus the average.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,A,I,M,AI,AM,IM,AIM,err\n");
        for (name, table) in &self.rows {
            out.push_str(name);
            for f in table.fractions {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
        out.push_str("average");
        for f in self.average {
            out.push_str(&format!(",{f}"));
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn summarize_small_samples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 3.0);

        let c = summarize(&[4.2, 4.2, 4.2]).unwrap();
        assert_eq!(c.min, c.median);
        assert_eq!(c.median, c.max);

        let even = summarize(&[0.10, 0.12, 0.11, 0.15]).unwrap();
        assert!((even.median - 0.115).abs() < 1e-12);

        assert_eq!(summarize(&[]), Err(AnalysisError::EmptyInput));
    }

    #[test]
    fn summary_invariants_hold() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let samples: Vec<f64> = (0..rng.next_below(40) + 1)
                .map(|_| rng.next_range(-10.0, 10.0))
                .collect();
            let s = summarize(&samples).unwrap();
            assert!(s.min <= s.q1);
            assert!(s.q1 <= s.median);
            assert!(s.median <= s.q3);
            assert!(s.q3 <= s.max);
        }
    }

    #[test]
    fn design_matrix_matches_reference_rows() {
        let x = build_design_matrix();
        assert_eq!(x[0], [1, -1, -1, -1, 1, 1, 1, -1]);
        assert_eq!(x[7], [1, 1, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn design_matrix_is_orthogonal() {
        let x = build_design_matrix();
        for i in 0..8 {
            for j in 0..8 {
                let dot: i64 = (0..8).map(|k| x[k][i] * x[k][j]).sum();
                assert_eq!(dot, if i == j { 8 } else { 0 });
            }
        }
    }

    fn constant_input(c: f64, r: usize) -> FactorialInput {
        FactorialInput {
            cells: std::array::from_fn(|_| vec![c; r]),
        }
    }

    #[test]
    fn constant_response_has_no_effects() {
        let t = estimate_effects(&constant_input(3.25, 4)).unwrap();
        assert_eq!(t.q[0], 3.25);
        for k in 1..8 {
            assert_eq!(t.q[k], 0.0);
        }
        assert_eq!(t.fractions, [0.0; 8]);
    }

    #[test]
    fn pure_intensity_pattern_allocates_everything_to_i() {
        // Cell mean = 5 * I sign, no within-cell variance.
        let mut cells: [Vec<f64>; 8] = Default::default();
        for (idx, cell) in cells.iter_mut().enumerate() {
            let (_, i, _) = cell_levels(idx);
            *cell = vec![5.0 * i as f64; 3];
        }
        let t = estimate_effects(&FactorialInput { cells }).unwrap();
        assert!((t.q[2] - 5.0).abs() < 1e-12);
        assert!((t.fractions[1] - 1.0).abs() < 1e-12); // fraction of I
        for (k, f) in t.fractions.iter().enumerate() {
            if k != 1 {
                assert!(f.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_replica_is_degenerate() {
        assert!(matches!(
            estimate_effects(&constant_input(1.0, 1)),
            Err(AnalysisError::DegenerateInput(_))
        ));
    }

    /// Contrast-based oracle: every quantity recomputed from scratch
    /// without the design matrix. Effects come from cell-mean contrasts,
    /// SST directly from the deviation of every observation around the
    /// grand mean.
    pub(crate) fn oracle_fractions(input: &FactorialInput) -> [f64; 8] {
        let r = input.cells[0].len() as f64;
        let means = input.cell_means();
        let contrast = |select: &dyn Fn(usize) -> f64| -> f64 {
            (0..8).map(|c| select(c) * means[c]).sum::<f64>() / 8.0
        };
        let effects = [
            contrast(&|c| cell_levels(c).0 as f64),
            contrast(&|c| cell_levels(c).1 as f64),
            contrast(&|c| cell_levels(c).2 as f64),
            contrast(&|c| (cell_levels(c).0 * cell_levels(c).1) as f64),
            contrast(&|c| (cell_levels(c).0 * cell_levels(c).2) as f64),
            contrast(&|c| (cell_levels(c).1 * cell_levels(c).2) as f64),
            contrast(&|c| (cell_levels(c).0 * cell_levels(c).1 * cell_levels(c).2) as f64),
        ];
        let grand: f64 =
            input.cells.iter().flat_map(|c| c.iter()).sum::<f64>() / (8.0 * r);
        let sst_direct: f64 = input
            .cells
            .iter()
            .flat_map(|c| c.iter())
            .map(|y| (y - grand) * (y - grand))
            .sum();
        let mut fractions = [0.0; 8];
        if sst_direct > 0.0 {
            for (k, e) in effects.iter().enumerate() {
                fractions[k] = 8.0 * r * e * e / sst_direct;
            }
            let sse: f64 = input
                .cells
                .iter()
                .zip(&means)
                .map(|(cell, m)| cell.iter().map(|y| (y - m) * (y - m)).sum::<f64>())
                .sum();
            fractions[7] = sse / sst_direct;
        }
        fractions
    }

    #[test]
    fn matches_contrast_oracle_on_random_inputs() {
        let mut rng = SplitMix64::new(0xFAC701);
        for _ in 0..200 {
            let r = 2 + rng.next_below(6) as usize;
            let cells: [Vec<f64>; 8] = std::array::from_fn(|_| {
                (0..r).map(|_| rng.next_range(-5.0, 5.0)).collect()
            });
            let input = FactorialInput { cells };
            let t = estimate_effects(&input).unwrap();
            let oracle = oracle_fractions(&input);
            for (k, (got, want)) in t.fractions.iter().zip(&oracle).enumerate() {
                let diff = (got - want).abs();
                assert!(diff <= 1e-9, "fraction {k} differs by {diff}");
            }
            let total: f64 = t.fractions.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9, "fractions sum to {total}");
        }
    }

    #[test]
    fn orthogonal_shortcut_matches_generic_solver() {
        let mut rng = SplitMix64::new(0x5001);
        let x = build_design_matrix();
        let a: Vec<Vec<f64>> = x
            .iter()
            .map(|row| row.iter().map(|v| *v as f64).collect())
            .collect();
        for _ in 0..100 {
            let cells: [Vec<f64>; 8] =
                std::array::from_fn(|_| (0..3).map(|_| rng.next_range(-2.0, 2.0)).collect());
            let input = FactorialInput { cells };
            let t = estimate_effects(&input).unwrap();
            let q = solve_least_squares(&a, &input.cell_means()).unwrap();
            for (k, (a_q, b_q)) in t.q.iter().zip(&q).enumerate() {
                assert!((a_q - b_q).abs() <= 1e-12, "q[{k}]");
            }
        }
    }

    #[test]
    fn noisy_known_model_recovers_allocation() {
        // y = 10 + 3 I + 1 M plus seeded noise, r = 10. Fractions must land
        // within 0.05 of the noise-free allocation.
        let mut rng = SplitMix64::new(0xADD);
        let mut cells: [Vec<f64>; 8] = Default::default();
        for (idx, cell) in cells.iter_mut().enumerate() {
            let (_, i, m) = cell_levels(idx);
            *cell = (0..10)
                .map(|_| {
                    10.0 + 3.0 * i as f64 + m as f64 + 0.1 * (rng.next_f64() * 2.0 - 1.0)
                })
                .collect();
        }
        let t = estimate_effects(&FactorialInput { cells }).unwrap();
        // Noise-free: SS_I : SS_M = 9 : 1, nothing else.
        let clean_i = 9.0 / 10.0;
        let clean_m = 1.0 / 10.0;
        assert!((t.fractions[1] - clean_i).abs() <= 0.05, "I {}", t.fractions[1]);
        assert!((t.fractions[2] - clean_m).abs() <= 0.05, "M {}", t.fractions[2]);
        for k in [0, 3, 4, 5, 6] {
            assert!(t.fractions[k] <= 0.05);
        }
    }

    #[test]
    fn effects_invariant_under_replica_relabeling() {
        let mut rng = SplitMix64::new(0xBEE);
        let cells: [Vec<f64>; 8] =
            std::array::from_fn(|_| (0..5).map(|_| rng.next_range(0.0, 1.0)).collect());
        let input = FactorialInput {
            cells: cells.clone(),
        };
        let mut relabeled = cells;
        for cell in relabeled.iter_mut() {
            cell.reverse();
        }
        let a = estimate_effects(&input).unwrap();
        let b = estimate_effects(&FactorialInput { cells: relabeled }).unwrap();
        for k in 0..8 {
            assert!((a.fractions[k] - b.fractions[k]).abs() < 1e-12);
            assert!((a.q[k] - b.q[k]).abs() < 1e-12);
        }
    }

    fn synthetic_campaign(policies: &[&str], replicas: usize) -> Vec<CampaignResponse> {
        let mut rng = SplitMix64::new(0xCA4);
        let mut out = Vec::new();
        for policy in policies.iter().chain([&DISABLED_POLICY]) {
            for intensity_high in [false, true] {
                for malicious in [false, true] {
                    for replica in 0..replicas {
                        let base = if intensity_high { 0.13 } else { 0.07 };
                        let overhead = if *policy == DISABLED_POLICY { 0.0 } else { 0.008 };
                        let scan = if malicious && *policy == DISABLED_POLICY { 0.01 } else { 0.001 };
                        out.push(CampaignResponse {
                            policy: policy.to_string(),
                            intensity_high,
                            malicious,
                            replica,
                            response: base + overhead + scan + 0.001 * rng.next_f64(),
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn report_rows_are_allocation_identities() {
        let responses = synthetic_campaign(&["dt", "mlp"], 4);
        let report = influence_report(&responses, &["dt", "mlp"]).unwrap();
        assert_eq!(report.rows.len(), 2);
        for (_, table) in &report.rows {
            let total: f64 = table.fractions.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
        let rendered = report.render_table();
        assert!(rendered.starts_with("Model"));
        assert!(rendered.contains("average"));
        let csv = report.to_csv();
        assert!(csv.starts_with("model,A,I,M,AI,AM,IM,AIM,err"));
    }

    #[test]
    fn missing_cell_is_incomplete_grid() {
        let mut responses = synthetic_campaign(&["dt"], 3);
        responses.retain(|r| !(r.policy == "dt" && r.intensity_high && r.malicious));
        assert!(matches!(
            influence_report(&responses, &["dt"]),
            Err(AnalysisError::IncompleteGrid(_))
        ));
    }

    #[test]
    fn average_row_is_column_mean() {
        let responses = synthetic_campaign(&["dt", "mlp", "svm"], 3);
        let report = influence_report(&responses, &["dt", "mlp", "svm"]).unwrap();
        for k in 0..8 {
            let mean: f64 =
                report.rows.iter().map(|(_, t)| t.fractions[k]).sum::<f64>() / 3.0;
            assert!((report.average[k] - mean).abs() < 1e-12);
        }
    }
}
