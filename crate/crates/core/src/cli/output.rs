//! Writing sweep results as CSV.

use std::io::Write;
use std::path::Path;

use super::sweep::SweepRow;
use crate::error::Result;
use crate::numfmt::g10;

pub const HEADER: &str = "pattern,delta,estimate,se,ci_low,ci_high,n_eff";

/// Renders rows as CSV text; failed rows carry `NA` in every numeric field
/// except `delta`.
pub fn render(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let fields = [r.estimate, r.se, r.ci_low, r.ci_high, r.n_eff]
            .map(|v| if r.is_ok() { g10(v) } else { "NA".to_string() });
        out.push_str(&format!("{},{},{}\n", r.pattern.name(), g10(r.delta), fields.join(",")));
    }
    out
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit_results(rows: &[SweepRow], path: Option<&Path>) -> Result<()> {
    let text = render(rows);
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
