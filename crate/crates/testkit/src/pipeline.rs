//! Brute-force, in-memory reimplementation of the citation pipeline,
//! operating directly on parsed dump JSON. Used as the ground truth the real
//! streaming pipeline is compared against.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::Value;

use crate::checksums::{issn_check_char, orcid_check_char};
use crate::codec::oracle_encode;
use crate::dates::{oracle_timespan, OracleDate};

/// One expected citation, fields in their CSV text forms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleCitation {
    pub citing: String,
    pub cited: String,
    pub oci: String,
    pub creation: String,
    pub timespan: String,
    pub journal_sc: bool,
    pub author_sc: bool,
}

fn norm_doi(raw: &str) -> Option<String> {
    let doi = raw.trim().to_lowercase();
    if doi.is_empty() || doi.chars().any(char::is_control) {
        None
    } else {
        Some(doi)
    }
}

fn item_doi(item: &Value) -> Option<String> {
    norm_doi(item.get("DOI")?.as_str()?)
}

fn item_date(item: &Value) -> Option<OracleDate> {
    let row = item.get("issued")?.get("date-parts")?.get(0)?.as_array()?;
    let mut parts = Vec::new();
    for v in row {
        match v {
            Value::Number(n) => parts.push(n.as_i64()?),
            Value::String(s) => parts.push(s.trim().parse().ok()?),
            Value::Null => break,
            _ => return None,
        }
    }
    OracleDate::from_parts(&parts)
}

fn norm_issn(raw: &str) -> Option<String> {
    let cleaned: String = raw.trim().chars().filter(|c| *c != '-').collect();
    if cleaned.len() != 8 {
        return None;
    }
    let mut digits = [0u8; 7];
    for (i, c) in cleaned.chars().take(7).enumerate() {
        digits[i] = c.to_digit(10)? as u8;
    }
    let check = cleaned.chars().last().unwrap().to_ascii_uppercase();
    if !check.is_ascii_digit() && check != 'X' {
        return None;
    }
    if issn_check_char(&digits) != check {
        return None;
    }
    Some(format!("{}-{}{}", &cleaned[..4], &cleaned[4..7], check))
}

fn norm_orcid(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    for prefix in ["https://orcid.org/", "http://orcid.org/", "orcid.org/"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest;
            break;
        }
    }
    let cleaned: String = s.chars().filter(|c| *c != '-').collect();
    if cleaned.len() != 16 {
        return None;
    }
    let mut digits = [0u8; 15];
    for (i, c) in cleaned.chars().take(15).enumerate() {
        digits[i] = c.to_digit(10)? as u8;
    }
    let check = cleaned.chars().last().unwrap().to_ascii_uppercase();
    if !check.is_ascii_digit() && check != 'X' {
        return None;
    }
    if orcid_check_char(&digits) != check {
        return None;
    }
    let mut out = String::with_capacity(19);
    for (i, c) in cleaned.chars().take(15).enumerate() {
        if i > 0 && i % 4 == 0 {
            out.push('-');
        }
        out.push(c);
    }
    out.push(check);
    Some(out)
}

fn ref_doi(entry: &Value) -> Option<String> {
    norm_doi(entry.get("DOI")?.as_str()?)
}

fn ref_year(entry: &Value) -> Option<i64> {
    match entry.get("year")? {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// The *Dates* table after full ingestion: indexed-item dates always beat
/// reference years; among indexed duplicates the more precise wins (ties to
/// the first); among reference years the first wins.
pub fn oracle_dates(items: &[Value]) -> BTreeMap<String, String> {
    let mut indexed: HashMap<String, OracleDate> = HashMap::new();
    for item in items {
        let Some(doi) = item_doi(item) else { continue };
        let Some(date) = item_date(item) else { continue };
        match indexed.get(&doi) {
            Some(existing) if existing.precision() >= date.precision() => {}
            _ => {
                indexed.insert(doi, date);
            }
        }
    }
    let mut dates: BTreeMap<String, String> =
        indexed.iter().map(|(doi, d)| (doi.clone(), d.render())).collect();
    for item in items {
        let Some(refs) = item.get("reference").and_then(Value::as_array) else { continue };
        for entry in refs {
            let Some(doi) = ref_doi(entry) else { continue };
            if indexed.contains_key(&doi) || dates.contains_key(&doi) {
                continue;
            }
            let Some(year) = ref_year(entry) else { continue };
            if let Some(d) = OracleDate::from_parts(&[year]) {
                dates.insert(doi, d.render());
            }
        }
    }
    dates
}

fn oracle_date_map(items: &[Value]) -> HashMap<String, OracleDate> {
    // re-derive OracleDate values from the rendered strings so both views of
    // *Dates* stay in lockstep
    oracle_dates(items)
        .into_iter()
        .map(|(doi, text)| {
            let parts: Vec<i64> = text.split('-').map(|p| p.parse().unwrap()).collect();
            (doi, OracleDate::from_parts(&parts).unwrap())
        })
        .collect()
}

/// Per-DOI valid ISSN sets (union over duplicate items).
pub fn oracle_issns(items: &[Value]) -> HashMap<String, HashSet<String>> {
    let mut map: HashMap<String, HashSet<String>> = HashMap::new();
    for item in items {
        let Some(doi) = item_doi(item) else { continue };
        let entry = map.entry(doi).or_default();
        if let Some(list) = item.get("ISSN").and_then(Value::as_array) {
            for v in list {
                if let Some(s) = v.as_str().and_then(norm_issn) {
                    entry.insert(s);
                }
            }
        }
    }
    map
}

/// Per-DOI valid ORCID sets (union over duplicate items).
pub fn oracle_orcids(items: &[Value]) -> HashMap<String, HashSet<String>> {
    let mut map: HashMap<String, HashSet<String>> = HashMap::new();
    for item in items {
        let Some(doi) = item_doi(item) else { continue };
        let entry = map.entry(doi).or_default();
        if let Some(authors) = item.get("author").and_then(Value::as_array) {
            for author in authors {
                if let Some(s) = author.get("ORCID").and_then(Value::as_str).and_then(norm_orcid) {
                    entry.insert(s);
                }
            }
        }
    }
    map
}

/// Runs the whole pipeline naively: every emitted citation, sorted by
/// (citing, cited). `lookup_csv` is the codec table the encoder should use.
pub fn oracle_pipeline(items: &[Value], lookup_csv: &str) -> Vec<OracleCitation> {
    let dates = oracle_date_map(items);
    let issns = oracle_issns(items);
    let orcids = oracle_orcids(items);
    let empty = HashSet::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::new();
    for item in items {
        let Some(citing) = item_doi(item) else { continue };
        let Some(refs) = item.get("reference").and_then(Value::as_array) else { continue };
        let mut cited_in_work: HashSet<String> = HashSet::new();
        for entry in refs {
            let Some(cited) = ref_doi(entry) else { continue };
            if !cited_in_work.insert(cited.clone()) {
                continue;
            }
            if !seen.insert((citing.clone(), cited.clone())) {
                continue;
            }
            let Some(citing_numeral) = oracle_encode(lookup_csv, &citing, "020") else { continue };
            let Some(cited_numeral) = oracle_encode(lookup_csv, &cited, "020") else { continue };
            let creation = dates.get(&citing).map(|d| d.render()).unwrap_or_default();
            let timespan =
                oracle_timespan(dates.get(&citing).copied(), dates.get(&cited).copied())
                    .unwrap_or_default();
            let journal_sc = !issns
                .get(&citing)
                .unwrap_or(&empty)
                .is_disjoint(issns.get(&cited).unwrap_or(&empty));
            let author_sc = !orcids
                .get(&citing)
                .unwrap_or(&empty)
                .is_disjoint(orcids.get(&cited).unwrap_or(&empty));
            out.push(OracleCitation {
                oci: format!("{citing_numeral}-{cited_numeral}"),
                citing: citing.clone(),
                cited,
                creation,
                timespan,
                journal_sc,
                author_sc,
            });
        }
    }
    out.sort();
    out
}
