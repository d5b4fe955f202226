//! Human table and line-delimited JSON renderings of a run.

use std::fmt::Write;

use serde::Serialize;

use crate::runner::Report;

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<'a> {
    Step(&'a crate::runner::StepRecord),
    Failure { message: &'a str },
    Summary(&'a crate::runner::Summary),
}

impl Report {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let lines = self
            .records
            .iter()
            .map(Line::Step)
            .chain(self.failures.iter().map(|m| Line::Failure { message: m }))
            .chain(std::iter::once(Line::Summary(&self.summary)));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3}  {:<16} {:<13} {:<22} {:>5} {:>10} {:>6} {:>4} {:>9} {:>5}",
            "#", "label", "action", "outcome", "block", "pool", "delta", "flag", "balance", "bits"
        );
        for r in &self.records {
            let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>3}  {:<16} {:<13} {:<22} {:>5} {:>10} {:>6} {:>4} {:>9} {:>5}",
                r.index,
                r.label,
                r.action,
                r.outcome,
                r.block,
                r.pool,
                r.delta,
                r.flagged,
                opt(r.actor_balance.map(|b| b.to_string())),
                opt(r.chain_popcount.map(|b| b.to_string())),
            );
            if let Some(d) = &r.detail {
                let _ = writeln!(out, "       {d}");
            }
        }
        let s = &self.summary;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "seed {}  steps {}  pool {}  shadow {}  delta {}  flagged {}  audit {}",
            s.seed,
            s.steps,
            s.pool,
            s.shadow.pool,
            s.delta,
            s.flagged,
            if s.audit_consistent { "consistent" } else { "INCONSISTENT" }
        );
        for a in &s.actors {
            let _ = writeln!(
                out,
                "  {:<10} {:<12} shielded {:>8}  external {:>8}  N_n {:?}",
                a.name, a.address, a.balance, a.external, a.neighborhood
            );
        }
        let _ = writeln!(out, "state {}", s.state_hash);
        for f in &self.failures {
            let _ = writeln!(out, "FAILED {f}");
        }
        out
    }
}
