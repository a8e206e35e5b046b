use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::eki::RunRecord;
use crate::error::{Error, Result};

use super::write_atomic;

pub const METRICS_HEADER: &str = "iteration,l1_error,data_misfit,wall_time_seconds";

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NaN".to_string()
    }
}

/// CSV text with one row per completed iteration.
pub fn metrics_csv(record: &RunRecord) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in &record.iterations {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.iteration,
            fmt17(row.l1_error.unwrap_or(f64::NAN)),
            fmt17(row.data_misfit),
            fmt17(row.wall_time_seconds)
        );
    }
    out
}

pub fn emit_metrics(record: &RunRecord, path: impl AsRef<Path>) -> Result<()> {
    if record.iterations.is_empty() {
        return Err(Error::Argument("cannot emit metrics for an empty run".into()));
    }
    write_atomic(path.as_ref(), metrics_csv(record).as_bytes())
}

/// One value per line.
pub fn emit_vector(v: &DVector<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v.iter() {
        out.push_str(&fmt17(*x));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub(crate) const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot l1 error and data misfit from metrics.csv in this directory."""
import csv
import os
import sys

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "metrics.csv"))))
it = [int(r["iteration"]) for r in rows]
l1 = [float(r["l1_error"]) for r in rows]
misfit = [float(r["data_misfit"]) for r in rows]

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to draw the figure")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(it, l1, marker="o")
ax1.set_xlabel("iteration")
ax1.set_ylabel("l1 error")
ax2.semilogy(it, misfit, marker="o")
ax2.set_xlabel("iteration")
ax2.set_ylabel("data misfit")
fig.tight_layout()
fig.savefig(os.path.join(here, "metrics.png"), dpi=120)
"#;

pub fn emit_plot_script(path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), PLOT_SCRIPT.as_bytes())
}
