//! Rendering: human-readable ledgers and machine-readable tables.
//!
//! Machine mode keeps full precision: every float is printed in Rust's
//! shortest round-trip form, which re-parses to exactly the same bits
//! (and spends up to 17 significant digits to do so). CSV output uses a
//! comma separator, `.` decimal point, LF line endings, and always a
//! header row, so two files from identical runs compare bit-for-bit.

use std::io::Write;

use qkdbudget_core::{BudgetLedger64, OptimizationResult64, SweepTable64};
use serde::Serialize;

use crate::config::CliError;

/// Formats a float in shortest round-trip form.
pub fn float(v: f64) -> String {
    format!("{v}")
}

/// Yes/no rendering for humans.
fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Renders the ledger for humans: one labelled line per term, values in
/// bits unless the label says otherwise, warnings last.
pub fn render_ledger(l: &BudgetLedger64, indent: &str) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("block length m", format!("{} pulses", float(l.block_length))),
        ("sifted bits n", float(l.sifted)),
        ("sifted errors e_T", float(l.sifted_errors)),
        ("single-photon bits n1", float(l.single_photon_sifted)),
        ("single-photon errors e_T1", float(l.single_photon_errors)),
        ("error-correction leak q", float(l.ec_leakage)),
        ("single-photon attack t", float(l.single_photon_attack)),
        ("multi-photon leakage nu", float(l.multiphoton_leakage)),
        ("authentication cost a", float(l.auth_cost)),
        ("compression margin g_pa", float(l.pa_compression)),
        ("secret key length L", float(l.key_length)),
        (
            "secrecy capacity S",
            format!("{} bits/pulse", float(l.capacity)),
        ),
        ("secret-key rate R", format!("{} bits/s", float(l.rate))),
        (
            "small-dark approx S_approx",
            format!("{} bits/pulse", float(l.capacity_small_dark)),
        ),
        ("error multiplier f", float(l.error_multiplier)),
        ("leakage per pair nu_tilde", float(l.multiphoton_rescaled)),
        ("interceptor yield y", float(l.eavesdropper_yield)),
        ("attack regime", l.regime.to_string()),
        ("feasible", yes_no(l.feasible).to_string()),
    ];
    let mut out = String::new();
    for (label, value) in rows {
        out.push_str(&format!("{indent}{label:<27}{value}\n"));
    }
    for w in &l.warnings {
        out.push_str(&format!("{indent}warning: {w}\n"));
    }
    out
}

/// Renders an optimization result for humans, including the full budget
/// at the optimum when one exists.
pub fn render_optimization(target: &str, unit: &str, r: &OptimizationResult64) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<27}{}\n", "target", target));
    out.push_str(&format!("{:<27}{}{}\n", "argmax", float(r.argmax), unit));
    out.push_str(&format!(
        "{:<27}{} bits/pulse\n",
        "capacity S at argmax",
        float(r.value)
    ));
    out.push_str(&format!("{:<27}{}\n", "feasible", yes_no(r.feasible)));
    out.push_str(&format!(
        "{:<27}{}\n",
        "pinned to search boundary",
        yes_no(r.boundary)
    ));
    out.push_str(&format!("{:<27}{}\n", "ledger evaluations", r.iterations));
    if let Some(ledger) = &r.ledger_at_optimum {
        out.push_str("budget at the optimum:\n");
        out.push_str(&render_ledger(ledger, "  "));
    }
    out
}

fn write_failed(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("cannot write sweep output: {e}"))
}

/// Writes the sweep table as CSV. The header starts with the swept
/// parameter's dotted name, then the budget columns; an `optimized_mu`
/// column appears when per-point intensity optimization ran, and the
/// trailing `error` column carries the message for rows whose parameter
/// value violated a domain invariant (their budget cells stay empty).
pub fn write_sweep_csv<W: Write>(w: W, table: &SweepTable64) -> Result<(), CliError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let optimized = table.rows.iter().any(|r| r.optimized_mu.is_some());
    let mut header: Vec<&str> = vec![
        table.axis.name(),
        "n",
        "e_T",
        "q",
        "t",
        "nu",
        "a",
        "L",
        "S",
        "R",
        "regime",
        "feasible",
    ];
    if optimized {
        header.push("optimized_mu");
    }
    header.push("error");
    wtr.write_record(&header).map_err(write_failed)?;
    for row in &table.rows {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        record.push(float(row.value));
        match &row.outcome {
            Ok(l) => {
                record.extend([
                    float(l.sifted),
                    float(l.sifted_errors),
                    float(l.ec_leakage),
                    float(l.single_photon_attack),
                    float(l.multiphoton_leakage),
                    float(l.auth_cost),
                    float(l.key_length),
                    float(l.capacity),
                    float(l.rate),
                    l.regime.to_string(),
                    l.feasible.to_string(),
                ]);
                if optimized {
                    record.push(row.optimized_mu.map(float).unwrap_or_default());
                }
                record.push(String::new());
            }
            Err(e) => {
                record.extend(std::iter::repeat(String::new()).take(11));
                if optimized {
                    record.push(String::new());
                }
                record.push(e.to_string());
            }
        }
        wtr.write_record(&record).map_err(write_failed)?;
    }
    wtr.flush().map_err(write_failed)
}

/// One sweep row in machine form. Field order is declaration order;
/// exactly one of `ledger` and `error` is present.
#[derive(Serialize)]
struct JsonSweepRow<'a> {
    /// Dotted name of the swept parameter.
    axis: &'a str,
    /// The swept parameter's value at this row.
    value: f64,
    /// Per-point optimal intensity, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    optimized_mu: Option<f64>,
    /// The budget at this point.
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<&'a BudgetLedger64>,
    /// The domain violation this point provoked.
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Writes the sweep table as JSON lines: one object per row, same row
/// order as the grid.
pub fn write_sweep_jsonl<W: Write>(mut w: W, table: &SweepTable64) -> Result<(), CliError> {
    for row in &table.rows {
        let json = JsonSweepRow {
            axis: table.axis.name(),
            value: row.value,
            optimized_mu: row.optimized_mu,
            ledger: row.outcome.as_ref().ok(),
            error: row.outcome.as_ref().err().map(|e| e.to_string()),
        };
        let line = serde_json::to_string(&json).expect("sweep rows serialize");
        writeln!(w, "{line}").map_err(write_failed)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qkdbudget_core::budget::compute_ledger;
    use qkdbudget_core::budget::{
        ChannelModel, DetectorModel, ErrorCorrectionModel, EveCapability, EveClass, Medium,
        SourceModel,
    };
    use qkdbudget_core::optimizer::{sweep, ParamAxis};
    use qkdbudget_core::{LinkParameters64, SecurityParameters64, SweepSpec64};

    fn golden_link() -> LinkParameters64 {
        LinkParameters64 {
            source: SourceModel { mu: 0.1, tau: 1e-6 },
            channel: ChannelModel {
                alpha: 0.1,
                r_c: 0.01,
                medium: Medium::Fiber,
            },
            detector: DetectorModel {
                eta: 0.5,
                r_d: 1e-5,
            },
            error_correction: ErrorCorrectionModel { x: 1.2 },
            eve: EveCapability {
                class: EveClass::TechnologyLimited,
                y_override: None,
            },
        }
    }

    fn golden_security() -> SecurityParameters64 {
        SecurityParameters64 {
            m: 1e7,
            epsilon: 0.01,
            g_pa: 30.0,
            g_auth: 30.0,
            g_ec: 30.0,
            g_tilde_ec: 30.0,
        }
    }

    #[test]
    fn float_formatting_round_trips_exactly() {
        for &v in &[
            0.1,
            1e-300,
            9.551697555936624e-4,
            2.0 / 3.0,
            f64::MIN_POSITIVE,
            -271.25,
            1e17 + 1.0,
        ] {
            let text = float(v);
            assert_eq!(text.parse::<f64>().unwrap(), v, "{text}");
        }
    }

    #[test]
    fn ledger_rendering_names_every_term() {
        let ledger = compute_ledger(&golden_link(), &golden_security()).unwrap();
        let text = render_ledger(&ledger, "");
        for needle in [
            "block length m",
            "sifted bits n",
            "sifted errors e_T",
            "single-photon bits n1",
            "single-photon errors e_T1",
            "error-correction leak q",
            "single-photon attack t",
            "multi-photon leakage nu",
            "authentication cost a",
            "compression margin g_pa",
            "secret key length L",
            "secrecy capacity S",
            "secret-key rate R",
            "small-dark approx S_approx",
            "error multiplier f",
            "leakage per pair nu_tilde",
            "interceptor yield y",
            "attack regime",
            "feasible",
            "bits/pulse",
            "bits/s",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in:\n{text}");
        }
        assert!(text.contains(&float(ledger.capacity)));
        assert!(text.ends_with(&format!("{:<27}{}\n", "feasible", "yes")));
    }

    #[test]
    fn csv_header_matches_the_contract() {
        let spec = SweepSpec64 {
            axis: ParamAxis::ChannelAlpha,
            grid: vec![0.1],
            optimize_mu_per_point: false,
            mu_bounds: None,
        };
        let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "channel.alpha,n,e_T,q,t,nu,a,L,S,R,regime,feasible,error"
        );
        assert_eq!(lines.count(), 1);
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_rows_round_trip_bit_exactly() {
        let spec = SweepSpec64 {
            axis: ParamAxis::ChannelAlpha,
            grid: vec![0.05, 0.1, 0.31622776601683794],
            optimize_mu_per_point: false,
            mu_bounds: None,
        };
        let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, row) in text.lines().skip(1).zip(&table.rows) {
            let fields: Vec<&str> = line.split(',').collect();
            let ledger = row.outcome.as_ref().unwrap();
            assert_eq!(fields[0].parse::<f64>().unwrap(), row.value);
            assert_eq!(fields[1].parse::<f64>().unwrap(), ledger.sifted);
            assert_eq!(fields[8].parse::<f64>().unwrap(), ledger.capacity);
            assert_eq!(fields[9].parse::<f64>().unwrap(), ledger.rate);
            assert_eq!(fields[10], ledger.regime.to_string());
            assert_eq!(fields[11], ledger.feasible.to_string());
            assert_eq!(fields[12], "");
        }
    }

    #[test]
    fn csv_error_rows_keep_budget_cells_empty() {
        let spec = SweepSpec64 {
            axis: ParamAxis::ChannelAlpha,
            grid: vec![0.1, 2.0],
            optimize_mu_per_point: false,
            mu_bounds: None,
        };
        let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bad = text.lines().nth(2).unwrap();
        assert!(bad.starts_with("2,"), "{bad}");
        assert!(bad.contains("alpha"), "{bad}");
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let records: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(&records[1][1], "");
        assert_eq!(&records[1][8], "");
        assert!(records[1][12].contains("0 < alpha <= 1"));
    }

    #[test]
    fn csv_gains_a_mu_column_when_optimizing_per_point() {
        let spec = SweepSpec64 {
            axis: ParamAxis::DetectorEta,
            grid: vec![0.5],
            optimize_mu_per_point: true,
            mu_bounds: Some((1e-3, 5.0)),
        };
        let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "detector.eta,n,e_T,q,t,nu,a,L,S,R,regime,feasible,optimized_mu,error"
        );
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        let mu = fields[12].parse::<f64>().unwrap();
        assert_eq!(Some(mu), table.rows[0].optimized_mu);
    }

    #[test]
    fn jsonl_rows_parse_and_carry_the_ledger() {
        let spec = SweepSpec64 {
            axis: ParamAxis::ChannelAlpha,
            grid: vec![0.1, 2.0],
            optimize_mu_per_point: false,
            mu_bounds: None,
        };
        let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();
        let mut buf = Vec::new();
        write_sweep_jsonl(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);

        let good: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(good["axis"], "channel.alpha");
        assert_eq!(good["value"], 0.1);
        let expect = table.rows[0].outcome.as_ref().unwrap();
        assert_eq!(good["ledger"]["S"], expect.capacity);
        assert_eq!(good["ledger"]["n"], expect.sifted);
        assert!(good.get("error").is_none());

        let bad: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(bad["value"], 2.0);
        assert!(bad.get("ledger").is_none());
        assert!(bad["error"].as_str().unwrap().contains("alpha"));
    }
}
