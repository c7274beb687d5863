//! Plain-text tables for terminal output.

use std::fmt::Write;

use gridbn_core::{Network, ValidationReport};

use crate::api::{OptimizeResponse, PosteriorResponse, ReportResponse};

/// Column-aligned table; the first column is left-aligned, the rest right-aligned.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    table_with(header, rows, &[0])
}

/// Like [`table`] with an explicit set of left-aligned columns.
pub fn table_with(header: &[&str], rows: &[Vec<String>], left: &[usize]) -> String {
    let columns = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate().take(columns) {
            if i > 0 {
                out.push_str("  ");
            }
            if left.contains(&i) {
                let _ = write!(out, "{cell:<w$}", w = widths[i]);
            } else {
                let _ = write!(out, "{cell:>w$}", w = widths[i]);
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out += &line(rule.iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn pct(p: f64) -> String {
    format!("{:.1}%", 100.0 * p)
}

fn gw(v: f64) -> String {
    format!("{v:.1}")
}

fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn compile_summary(network: &Network, report: &ValidationReport, out: &str) -> String {
    let auxiliary = network.nodes().filter(|n| n.auxiliary).count();
    let mut s = format!("wrote {out}: {} nodes", network.len());
    if auxiliary > 0 {
        let _ = write!(s, " ({auxiliary} auxiliary)");
    }
    if report.is_valid() {
        s += ", validation passed\n";
    } else {
        let _ = writeln!(s, ", validation FAILED\n{report}");
    }
    s
}

pub fn posteriors(r: &PosteriorResponse) -> String {
    let mut out = String::new();
    let evidence = if r.evidence.is_empty() {
        "none".to_string()
    } else {
        r.evidence.to_string()
    };
    let _ = writeln!(out, "Evidence: {evidence}");
    let _ = writeln!(out, "P(evidence) = {:.6}\n", r.evidence_probability);

    if let Some(s) = &r.scenarios {
        let rows: Vec<Vec<String>> = s
            .grid
            .states
            .iter()
            .zip(&s.grid.distribution)
            .map(|(state, p)| vec![state.clone(), format!("{p:.3}"), pct(*p)])
            .collect();
        let _ = writeln!(out, "{}", s.grid.node);
        out += &table(&["Scenario", "P", "%"], &rows);
        out.push('\n');

        let rows: Vec<Vec<String>> = [&s.bulk, &s.balance]
            .iter()
            .map(|n| {
                vec![
                    n.node.clone(),
                    format!("{} {}", n.states[1], pct(n.distribution[1])),
                    opt(n.gw, gw),
                ]
            })
            .collect();
        out += &table(&["Total", "P(high)", "GW"], &rows);
        out.push('\n');
    }

    let rows: Vec<Vec<String>> = r
        .nodes
        .iter()
        .map(|n| {
            let dist = n
                .states
                .iter()
                .zip(&n.distribution)
                .map(|(st, p)| format!("{st} {p:.3}"))
                .collect::<Vec<_>>()
                .join("  ");
            vec![n.node.clone(), n.layer.to_string(), dist, opt(n.gw, gw)]
        })
        .collect();
    out += &table_with(&["Node", "Layer", "Posterior", "GW"], &rows, &[0, 2]);
    out
}

pub fn plan(r: &OptimizeResponse) -> String {
    let p = &r.plan;
    let mut out = format!(
        "Target {}: {} -> {}\n",
        p.target,
        pct(p.initial_probability),
        pct(p.final_probability)
    );
    if let Some(reason) = &p.terminated {
        let _ = writeln!(out, "stopped: {reason}");
    }
    if r.rows.is_empty() {
        out += "no step raises the target probability\n";
        return out;
    }
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            vec![
                row.component.clone(),
                opt(row.prior_gw, gw),
                opt(row.proposed_gw, gw),
                opt(row.delta_gw, |d| format!("{d:+.1}")),
                opt(row.cost, |c| format!("{c:.0}")),
                pct(row.joint),
                opt(row.effect, |e| format!("{:+.2}", 100.0 * e)),
                pct(row.cumulative),
            ]
        })
        .collect();
    out.push('\n');
    out += &table(
        &["Component", "Prior GW", "Proposed GW", "Delta GW", "Cost", "Joint", "Effect pp", "Cumulative"],
        &rows,
    );
    out
}

pub fn report(r: &ReportResponse) -> String {
    let mut out = String::new();
    if !r.evidence.is_empty() {
        let _ = writeln!(out, "Evidence: {}\n", r.evidence);
    }
    let rows: Vec<Vec<String>> = r
        .availability
        .rows
        .iter()
        .map(|a| vec![a.component.clone(), gw(a.capacity_gw), gw(a.peak_hour_gw), gw(a.peak_season_gw)])
        .collect();
    let a = &r.availability;
    let mut rows = rows;
    rows.push(vec!["Total".into(), gw(a.capacity_gw), gw(a.peak_hour_gw), gw(a.peak_season_gw)]);
    if let Some(i) = a.import_gw {
        rows.push(vec!["Import".into(), gw(i), gw(i), gw(i)]);
        rows.push(vec![
            "Total with import".into(),
            gw(a.capacity_gw + i),
            gw(a.total_peak_hour_gw),
            gw(a.total_peak_season_gw),
        ]);
    }
    let _ = writeln!(out, "Availability ({})", r.profile.as_deref().unwrap_or("custom"));
    out += &table(&["Component", "Capacity GW", "Peak hour GW", "Peak season GW"], &rows);
    out.push('\n');

    let rows: Vec<Vec<String>> = r.buckets.iter().map(|(b, v)| vec![b.to_string(), gw(*v)]).collect();
    let _ = writeln!(out, "Buckets ({})", r.preset);
    out += &table(&["Bucket", "GW"], &rows);
    out
}
