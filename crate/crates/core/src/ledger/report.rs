//! Deterministic DPIA exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::document::{DpiaDocument, EntryBody, LedgerEntry, PipelineMode, StageId, StageStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "json" => Some(ReportFormat::Json),
            "markdown" | "md" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    case_id: &'a str,
    mode: PipelineMode,
    version: u32,
    stage_status: BTreeMap<StageId, StageStatus>,
    entries: &'a [LedgerEntry],
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', "<br>")
}

pub fn export_report(doc: &DpiaDocument, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let r = JsonReport {
                case_id: &doc.case_id,
                mode: doc.mode,
                version: doc.version(),
                stage_status: doc.stage_status(),
                entries: doc.versions(),
            };
            let mut s = serde_json::to_string_pretty(&r).expect("report serialises");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(doc),
    }
}

fn markdown(doc: &DpiaDocument) -> String {
    let status = doc.stage_status();
    let mut out = String::new();
    let _ = writeln!(out, "# DPIA: {}\n", doc.case_id);
    let _ = writeln!(
        out,
        "Mode: {}. Version: {}.\n",
        match doc.mode {
            PipelineMode::Etl => "ETL",
            PipelineMode::Elt => "ELT",
        },
        doc.version()
    );
    out.push_str("| Stage | Status | Version |\n|---|---|---|\n");
    for s in doc.mode.order() {
        let v = doc.latest(s).map_or("-".to_owned(), |e| e.version.to_string());
        let _ = writeln!(out, "| {} | {} | {} |", s.title(), status[&s].as_str(), v);
    }
    out.push('\n');

    for s in doc.mode.order() {
        let _ = writeln!(out, "## {}\n", s.title());
        match doc.latest(s) {
            None => out.push_str("Status: missing\n\n"),
            Some(entry) => {
                let EntryBody::Stage { fields, citations, .. } = &entry.body else {
                    unreachable!("latest returns stage entries")
                };
                let _ = writeln!(
                    out,
                    "Status: {}. Version {} by {} at {}.\n",
                    status[&s].as_str(),
                    entry.version,
                    entry.author,
                    entry.timestamp.to_rfc3339()
                );
                out.push_str("| Field | Value |\n|---|---|\n");
                for (k, v) in fields {
                    let _ = writeln!(out, "| {} | {} |", cell(k), cell(v));
                }
                out.push('\n');
                if !citations.is_empty() {
                    out.push_str("Citations:\n\n");
                    for c in citations {
                        let _ = writeln!(out, "- {c}");
                    }
                    out.push('\n');
                }
            }
        }
    }

    let reopens: Vec<&LedgerEntry> = doc
        .versions()
        .iter()
        .filter(|e| matches!(e.body, EntryBody::Reopen { .. }))
        .collect();
    if !reopens.is_empty() {
        out.push_str("## Change log\n\n| Version | When | Change | From stage | Marked stale |\n|---|---|---|---|---|\n");
        for e in reopens {
            if let EntryBody::Reopen {
                change_description,
                earliest_affected_stage,
                staled,
            } = &e.body
            {
                let staled: Vec<&str> = staled.iter().map(|s| s.as_str()).collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    e.version,
                    e.timestamp.to_rfc3339(),
                    cell(change_description),
                    earliest_affected_stage,
                    if staled.is_empty() { "-".to_owned() } else { staled.join(", ") }
                );
            }
        }
        out.push('\n');
    }
    out.push_str("The data protection officer's advice is sought when carrying out the assessment (GDPR Art. 35(2)).\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::document::tests::{doc_through, ts};

    #[test]
    fn markdown_marks_missing_stages() {
        let d = doc_through(StageId::Extract, PipelineMode::Etl);
        let md = export_report(&d, ReportFormat::Markdown);
        for s in StageId::ALL {
            assert!(md.contains(&format!("## {}", s.title())));
        }
        assert!(md.contains("| Transform | missing | - |"));
        assert!(md.contains("Status: missing"));
    }

    #[test]
    fn exports_are_deterministic() {
        let d = doc_through(StageId::Present, PipelineMode::Elt).reopen_on_change("x", StageId::Load, "a", ts(20));
        for f in [ReportFormat::Json, ReportFormat::Markdown] {
            assert_eq!(export_report(&d, f), export_report(&d.clone(), f));
        }
        let v: serde_json::Value = serde_json::from_str(&export_report(&d, ReportFormat::Json)).unwrap();
        assert_eq!(v["stage_status"]["load"], "stale");
        assert!(export_report(&d, ReportFormat::Markdown).contains("## Change log"));
    }
}
