use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use super::{sorted_results, Condition, LanguageSummary, Method, RunResult};
use crate::context::language_name;
use crate::error::{Error, Result};
use crate::scoring::MetricTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Tsv,
    Markdown,
    Json,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Tsv => "tsv",
            TableFormat::Markdown => "md",
            TableFormat::Json => "json",
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(TableFormat::Tsv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            _ => Err(Error::Config(format!("unknown table format {s:?}"))),
        }
    }
}

/// One decimal, explicit sign on gains, and no negative zero.
pub fn format_delta(delta_percent: f64) -> String {
    let rounded = (delta_percent * 10.0).round() / 10.0;
    if rounded == 0.0 {
        "0.0%".to_string()
    } else if rounded > 0.0 {
        format!("+{rounded:.1}%")
    } else {
        format!("{rounded:.1}%")
    }
}

fn grid(header: &[String], rows: &[Vec<String>], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Tsv => {
            for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
                out.push_str(&line.join("\t"));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let row = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            out.push_str(&row(header));
            out.push_str(&row(&vec!["---".to_string(); header.len()]));
            for r in rows {
                out.push_str(&row(r));
            }
        }
        TableFormat::Json => unreachable!("json is rendered from the records"),
    }
    out
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.decimals$}"))
}

fn triple_cells(t: Option<&MetricTriple>) -> [String; 3] {
    [
        opt(t.and_then(|t| t.bleu), 2),
        opt(t.and_then(|t| t.chrfpp), 2),
        opt(t.map(|t| t.comet), 4),
    ]
}

/// Per-movie table: baseline triple, then each method's triple per condition.
/// With no results the header lists the full and sel30 columns.
pub fn render_tables(results: &[RunResult], format: TableFormat) -> String {
    let results = sorted_results(results);
    if format == TableFormat::Json {
        let mut s = serde_json::to_string_pretty(&results).expect("results serialize");
        s.push('\n');
        return s;
    }
    let mut conditions: BTreeSet<Condition> = results.iter().map(|r| r.condition).collect();
    if conditions.is_empty() {
        conditions = [Condition::Full, Condition::Selective(30.0)].into_iter().collect();
    }
    let mut header: Vec<String> = ["movie", "language", "baseline_bleu", "baseline_chrfpp", "baseline_comet"]
        .map(String::from)
        .to_vec();
    for m in Method::ALL {
        for c in &conditions {
            for metric in ["bleu", "chrfpp", "comet"] {
                header.push(format!("{m}_{c}_{metric}"));
            }
        }
    }

    let mut rows: BTreeMap<(&str, &str), Vec<&RunResult>> = BTreeMap::new();
    for r in &results {
        rows.entry((&r.movie_id, &r.language)).or_default().push(r);
    }
    let body: Vec<Vec<String>> = rows
        .into_iter()
        .map(|((movie, lang), rs)| {
            let mut cells = vec![movie.to_string(), lang.to_string()];
            cells.extend(triple_cells(Some(&rs[0].baseline)));
            for m in Method::ALL {
                for c in &conditions {
                    let hit = rs.iter().find(|r| r.method == m && r.condition == *c);
                    cells.extend(triple_cells(hit.map(|r| &r.metrics)));
                }
            }
            cells
        })
        .collect();
    grid(&header, &body, format)
}

/// Language-wise table with one column per (method, condition).
pub fn render_language_summary(summaries: &[LanguageSummary], format: TableFormat) -> String {
    if format == TableFormat::Json {
        let mut s = serde_json::to_string_pretty(summaries).expect("summaries serialize");
        s.push('\n');
        return s;
    }
    let columns: BTreeSet<(Method, Condition)> = summaries.iter().map(|s| (s.method, s.condition)).collect();
    let mut header = vec!["language".to_string()];
    header.extend(columns.iter().map(|(m, c)| format!("{m}_{c}")));
    let mut by_lang: BTreeMap<&str, BTreeMap<(Method, Condition), f64>> = BTreeMap::new();
    for s in summaries {
        by_lang
            .entry(&s.language)
            .or_default()
            .insert((s.method, s.condition), s.delta_percent);
    }
    let body: Vec<Vec<String>> = by_lang
        .into_iter()
        .map(|(lang, cells)| {
            let name = match format {
                TableFormat::Markdown => language_name(lang).to_string(),
                _ => lang.to_string(),
            };
            std::iter::once(name)
                .chain(columns.iter().map(|k| cells.get(k).map_or_else(|| "NA".into(), |d| format_delta(*d))))
                .collect()
        })
        .collect();
    grid(&header, &body, format)
}
