//! Trace CSV files. Floats are written with 17 significant digits, so a
//! trace parses back to the exact recorded values.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use imitate_core::dynamics::TraceRow;

pub const HEADER: [&str; 7] = [
    "round",
    "potential",
    "l_av",
    "l_av_plus",
    "max_used_latency",
    "migrations",
    "unsat_fraction",
];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            float(r.potential),
            float(r.l_av),
            float(r.l_av_plus),
            float(r.max_used_latency),
            r.migrations.to_string(),
            float(r.unsat_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is ASCII")
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        bail!("unexpected trace header");
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or_default();
            (|| -> Result<TraceRow> {
                Ok(TraceRow {
                    round: field(0).parse()?,
                    potential: field(1).parse()?,
                    l_av: field(2).parse()?,
                    l_av_plus: field(3).parse()?,
                    max_used_latency: field(4).parse()?,
                    migrations: field(5).parse()?,
                    unsat_fraction: field(6).parse()?,
                })
            })()
            .with_context(|| format!("trace row {}", i + 1))
        })
        .collect()
}
