//! Published per-movie tables as TSV: the combined table (baseline, full and
//! sel30 triples) and the selective table (sel20/sel30 COMET).

use std::collections::HashMap;
use std::path::Path;

use super::{Condition, Method, RunResult};
use crate::error::{Error, Result};
use crate::scoring::MetricTriple;

type Row = HashMap<String, f64>;

fn parse_tsv(text: &str) -> std::result::Result<Vec<(String, String, Row)>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("missing header")?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 || cols[0] != "movie" || cols[1] != "language" {
        return Err("header must start with movie, language".into());
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != cols.len() {
            return Err(format!("line {}: expected {} columns, got {}", i + 1, cols.len(), cells.len()));
        }
        let mut row = Row::new();
        for (c, v) in cols[2..].iter().zip(&cells[2..]) {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("line {}: column {c}: {v:?} is not a number", i + 1))?;
            row.insert(c.to_string(), v);
        }
        out.push((cells[0].to_string(), cells[1].to_string(), row));
    }
    Ok(out)
}

fn col(row: &Row, name: &str) -> std::result::Result<f64, String> {
    row.get(name).copied().ok_or_else(|| format!("missing column {name}"))
}

fn triple(row: &Row, prefix: &str) -> std::result::Result<MetricTriple, String> {
    Ok(MetricTriple {
        bleu: Some(col(row, &format!("{prefix}_bleu"))?),
        chrfpp: Some(col(row, &format!("{prefix}_chrfpp"))?),
        comet: col(row, &format!("{prefix}_comet"))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedRow {
    pub movie_id: String,
    pub language: String,
    pub baseline: MetricTriple,
    /// (method, full, sel30)
    pub methods: Vec<(Method, MetricTriple, MetricTriple)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveRow {
    pub movie_id: String,
    pub language: String,
    pub baseline_comet: f64,
    /// (method, k, COMET)
    pub comet: Vec<(Method, f64, f64)>,
}

pub fn parse_combined(text: &str) -> std::result::Result<Vec<CombinedRow>, String> {
    parse_tsv(text)?
        .into_iter()
        .map(|(movie, lang, row)| {
            let baseline = triple(&row, "baseline")?;
            let methods = Method::ALL
                .into_iter()
                .map(|m| Ok((m, triple(&row, &format!("{m}_full"))?, triple(&row, &format!("{m}_sel30"))?)))
                .collect::<std::result::Result<Vec<_>, String>>()?;
            Ok(CombinedRow {
                movie_id: movie,
                language: lang,
                baseline,
                methods,
            })
        })
        .collect()
}

pub fn parse_selective(text: &str) -> std::result::Result<Vec<SelectiveRow>, String> {
    parse_tsv(text)?
        .into_iter()
        .map(|(movie, lang, row)| {
            let baseline = col(&row, "baseline_comet")?;
            let mut sel = Vec::new();
            for m in Method::ALL {
                for k in [20.0, 30.0] {
                    sel.push((m, k, col(&row, &format!("{m}_sel{k}_comet"))?));
                }
            }
            Ok(SelectiveRow {
                movie_id: movie,
                language: lang,
                baseline_comet: baseline,
                comet: sel,
            })
        })
        .collect()
}

/// Run results from the two published tables. Full conditions come from the
/// combined table; selective COMET comes from the selective table, which is
/// the dedicated source where the two disagree. Sel30 BLEU/chrF++ exist only
/// in the combined table and are carried over from it.
pub fn load_published_tables(combined: &Path, selective: &Path) -> Result<Vec<RunResult>> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    let combined_rows = parse_combined(&read(combined)?).map_err(|m| Error::format(combined, m))?;
    let selective_rows = parse_selective(&read(selective)?).map_err(|m| Error::format(selective, m))?;
    let sel: HashMap<(String, String), SelectiveRow> = selective_rows
        .into_iter()
        .map(|r| ((r.movie_id.clone(), r.language.clone()), r))
        .collect();

    let mut out = Vec::new();
    for CombinedRow {
        movie_id: movie,
        language: lang,
        baseline,
        methods,
    } in combined_rows
    {
        let row = sel
            .get(&(movie.clone(), lang.clone()))
            .ok_or_else(|| Error::format(selective, format!("no row for {movie} {lang}")))?;
        let sel_base = row.baseline_comet;
        if (sel_base - baseline.comet).abs() > 1e-9 {
            return Err(Error::format(
                selective,
                format!("{movie} {lang}: baseline COMET {sel_base} differs from {}", baseline.comet),
            ));
        }
        for (method, full, sel30) in methods {
            let make = |condition, metrics| RunResult {
                movie_id: movie.clone(),
                language: lang.clone(),
                method,
                condition,
                metrics,
                baseline,
            };
            out.push(make(Condition::Full, full));
            for &(_, k, comet) in row.comet.iter().filter(|r| r.0 == method) {
                let metrics = if k == 30.0 {
                    if (sel30.comet - comet).abs() > 1e-9 {
                        log::debug!("{movie} {lang} {method} sel30: tables disagree ({} vs {comet})", sel30.comet);
                    }
                    MetricTriple { comet, ..sel30 }
                } else {
                    MetricTriple::comet_only(comet)
                };
                out.push(make(Condition::Selective(k), metrics));
            }
        }
    }
    Ok(out)
}
