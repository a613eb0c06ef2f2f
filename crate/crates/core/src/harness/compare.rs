//! Scheme comparison on the fixed small-instance family.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FixedRow;
use crate::error::{Error, Result};

/// Relative slack for the ordering checks (floating-point noise only).
pub const ORDER_SLACK: f64 = 1e-9;
pub const CENTRALIZED_MATCH: f64 = 0.01;
pub const EXHAUSTIVE_GAP_FLOOR: f64 = 0.02;
pub const GREEDY_GAP_FLOOR: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: String,
    pub count: usize,
    pub mean_latency_ms: f64,
    /// How much lower the proposed latency is, in percent of this scheme's.
    pub gap_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash: String,
    /// Proposed latency the gaps are measured against (relaxed placement).
    pub proposed_ms: f64,
    pub rows: Vec<ComparisonRow>,
    pub checks: Vec<Check>,
}

impl Comparison {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config {}  proposed (relaxed) {:.3} ms", self.config_hash, self.proposed_ms);
        let _ = writeln!(s, "{:<24} {:>6} {:>16} {:>10}", "scheme", "runs", "latency (ms)", "gap (%)");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<24} {:>6} {:>16.3} {:>10.3}",
                r.scheme, r.count, r.mean_latency_ms, r.gap_percent
            );
        }
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

/// Percentage by which `proposed` undercuts `other`.
pub fn gap_percent(proposed: f64, other: f64) -> f64 {
    if other == 0.0 {
        0.0
    } else {
        100.0 * (other - proposed) / other
    }
}

/// Mean latency per scheme and the ordering checks over `rows`.
pub fn compare_rows(rows: &[FixedRow]) -> Result<Comparison> {
    let mut by: BTreeMap<&str, Vec<&FixedRow>> = BTreeMap::new();
    for r in rows {
        by.entry(r.scheme.as_str()).or_default().push(r);
    }
    let mean = |name: &str, f: &dyn Fn(&FixedRow) -> Option<f64>| -> Result<f64> {
        let v: Vec<f64> = by
            .get(name)
            .ok_or_else(|| Error::MissingScheme(name.into()))?
            .iter()
            .filter_map(|r| f(r))
            .collect();
        if v.is_empty() {
            return Err(Error::MissingScheme(format!("{name} has no usable values")));
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    };
    let latency = |r: &FixedRow| Some(r.average_latency_ms);
    let proposed = mean("proposed", &|r: &FixedRow| r.relaxed_latency_ms.or(Some(r.average_latency_ms)))?;
    let centralized = mean("centralized", &latency)?;
    let exhaustive = mean("exhaustive", &latency)?;
    let greedy = mean("greedy", &latency)?;
    let noncollab = mean("non-collaboration", &latency)?;

    let mut out = vec![ComparisonRow {
        scheme: "proposed (relaxed)".into(),
        count: by["proposed"].len(),
        mean_latency_ms: proposed,
        gap_percent: 0.0,
    }];
    for (name, rs) in &by {
        let m = mean(name, &latency)?;
        out.push(ComparisonRow {
            scheme: name.to_string(),
            count: rs.len(),
            mean_latency_ms: m,
            gap_percent: gap_percent(proposed, m),
        });
    }

    let le = |a: f64, b: f64| a <= b + ORDER_SLACK * b.abs();
    let check = |name: &str, passed: bool, detail: String| Check {
        name: name.into(),
        passed,
        detail,
    };
    let g_ex = gap_percent(proposed, exhaustive);
    let g_gr = gap_percent(proposed, greedy);
    let checks = vec![
        check(
            "proposed <= exhaustive",
            le(proposed, exhaustive),
            format!("{proposed:.6} vs {exhaustive:.6} ms"),
        ),
        check(
            "exhaustive <= greedy",
            le(exhaustive, greedy),
            format!("{exhaustive:.6} vs {greedy:.6} ms"),
        ),
        check(
            "greedy <= non-collaboration",
            le(greedy, noncollab),
            format!("{greedy:.6} vs {noncollab:.6} ms"),
        ),
        check(
            "proposed within 1% of centralized",
            (proposed - centralized).abs() <= CENTRALIZED_MATCH * centralized,
            format!("{:.4}% apart", 100.0 * (proposed - centralized).abs() / centralized),
        ),
        check(
            "proposed at least 2% below exhaustive",
            g_ex >= 100.0 * EXHAUSTIVE_GAP_FLOOR,
            format!("gap {g_ex:.4}%"),
        ),
        check(
            "proposed at least 20% below greedy",
            g_gr >= 100.0 * GREEDY_GAP_FLOOR,
            format!("gap {g_gr:.4}%"),
        ),
        check(
            "greedy gap >= exhaustive gap >= 0",
            g_gr + ORDER_SLACK >= g_ex && g_ex >= -ORDER_SLACK,
            format!("{g_gr:.4}% >= {g_ex:.4}% >= 0"),
        ),
    ];
    Ok(Comparison {
        config_hash: rows.first().map(|r| r.config_hash.clone()).unwrap_or_default(),
        proposed_ms: proposed,
        rows: out,
        checks,
    })
}

/// Read `fixed_instance.csv` from a results directory, write
/// `comparison.csv` next to it and return the table.
pub fn compare(results_dir: &Path) -> Result<Comparison> {
    let mut rdr = csv::Reader::from_path(results_dir.join("fixed_instance.csv"))?;
    let rows: Vec<FixedRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let c = compare_rows(&rows)?;
    let mut w = csv::Writer::from_path(results_dir.join("comparison.csv"))?;
    for r in &c.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(c)
}
