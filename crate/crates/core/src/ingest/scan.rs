//! Streaming dump scanning: walks `{"items": [...]}` files byte by byte,
//! yielding one raw item at a time without materializing the file, and
//! converts raw items into lenient [`WorkRecord`]s.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde_json::Value;

use crate::ids::{normalize_doi, normalize_issn, normalize_orcid};
use crate::model::PartialDate;

/// One work as the pipeline sees it: normalized identifiers, validated date,
/// and per-record noise counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkRecord {
    pub doi: String,
    pub issued: Option<PartialDate>,
    /// A date was present but unusable (bad month, fractional year, …).
    pub date_invalid: bool,
    /// Valid ISSNs, normalized, sorted, deduplicated.
    pub issns: Vec<String>,
    pub invalid_issns: u32,
    /// Valid ORCIDs, normalized, sorted, deduplicated.
    pub orcids: Vec<String>,
    pub invalid_orcids: u32,
    pub pub_type: Option<String>,
    pub references: Vec<ReferenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceEntry {
    pub doi: Option<String>,
    pub year: Option<i64>,
}

/// What one raw item turned into.
#[derive(Debug)]
pub enum ItemOutcome {
    Work(Box<WorkRecord>),
    /// No usable DOI; the item is counted and dropped.
    NoDoi,
}

fn usable_doi(raw: &str) -> Option<String> {
    let doi = normalize_doi(raw);
    if doi.is_empty() || doi.chars().any(char::is_control) {
        None
    } else {
        Some(doi)
    }
}

/// Lenient date extraction: `issued.date-parts[0]`, numbers or numeric
/// strings; a null part truncates the date there; anything else makes the
/// whole date unusable. Returns `(date, had_invalid_date)`.
fn extract_date(item: &Value) -> (Option<PartialDate>, bool) {
    let Some(row) = item
        .get("issued")
        .and_then(|v| v.get("date-parts"))
        .and_then(|v| v.get(0))
        .and_then(Value::as_array)
    else {
        return (None, false);
    };
    let mut parts: Vec<i64> = Vec::with_capacity(3);
    for v in row {
        match v {
            Value::Number(n) => match n.as_i64() {
                Some(p) => parts.push(p),
                None => return (None, true),
            },
            Value::String(s) => match s.trim().parse() {
                Ok(p) => parts.push(p),
                Err(_) => return (None, true),
            },
            Value::Null => break,
            _ => return (None, true),
        }
    }
    if parts.is_empty() {
        // `[[null]]`: an explicitly unknown date, not an invalid one
        return (None, false);
    }
    match PartialDate::from_date_parts(&parts) {
        Ok(d) => (Some(d), false),
        Err(_) => (None, true),
    }
}

fn sanitize_type(raw: &str) -> String {
    raw.chars().map(|c| if c.is_control() { ' ' } else { c }).collect()
}

/// Converts a parsed dump item into a [`WorkRecord`].
pub fn work_from_json(item: &Value) -> ItemOutcome {
    let Some(doi) = item.get("DOI").and_then(Value::as_str).and_then(usable_doi) else {
        return ItemOutcome::NoDoi;
    };
    let (issued, date_invalid) = extract_date(item);

    let mut issns = Vec::new();
    let mut invalid_issns = 0;
    if let Some(list) = item.get("ISSN").and_then(Value::as_array) {
        for v in list {
            match v.as_str().and_then(normalize_issn) {
                Some(issn) => issns.push(issn),
                None => invalid_issns += 1,
            }
        }
    }
    issns.sort_unstable();
    issns.dedup();

    let mut orcids = Vec::new();
    let mut invalid_orcids = 0;
    if let Some(authors) = item.get("author").and_then(Value::as_array) {
        for author in authors {
            match author.get("ORCID").map(|v| v.as_str().and_then(normalize_orcid)) {
                None => {}
                Some(Some(orcid)) => orcids.push(orcid),
                Some(None) => invalid_orcids += 1,
            }
        }
    }
    orcids.sort_unstable();
    orcids.dedup();

    let pub_type = item
        .get("type")
        .and_then(Value::as_str)
        .map(sanitize_type)
        .filter(|s| !s.is_empty());

    let mut references = Vec::new();
    if let Some(refs) = item.get("reference").and_then(Value::as_array) {
        for entry in refs {
            let doi = entry.get("DOI").and_then(Value::as_str).and_then(usable_doi);
            let year = match entry.get("year") {
                Some(Value::Number(n)) => n.as_i64(),
                Some(Value::String(s)) => s.trim().parse().ok(),
                _ => None,
            };
            references.push(ReferenceEntry { doi, year });
        }
    }

    ItemOutcome::Work(Box::new(WorkRecord {
        doi,
        issued,
        date_invalid,
        issns,
        invalid_issns,
        orcids,
        invalid_orcids,
        pub_type,
        references,
    }))
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed dump JSON: {0}")]
    Malformed(&'static str),
}

/// Counts from scanning one file.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScanStats {
    pub items: u64,
    pub malformed_items: u64,
}

const MAX_ITEM_BYTES: usize = 32 * 1024 * 1024;

/// Streams the elements of the top-level `items` array out of `reader`,
/// invoking `on_item` with the raw bytes of each element. Bounded memory:
/// only one element is buffered at a time.
pub fn scan_items<R, F, E>(reader: R, mut on_item: F) -> Result<ScanStats, ScanFailure<E>>
where
    R: Read,
    F: FnMut(&[u8]) -> Result<(), E>,
{
    #[derive(PartialEq)]
    enum Mode {
        /// Tokenizing the root object, hunting for the top-level "items" key.
        Root,
        /// Skipping a non-"items" top-level value.
        SkipValue,
        /// Inside the items array, between elements.
        ArrayGap,
        /// Inside the items array, accumulating one element.
        Element,
        /// Items array finished; remainder ignored.
        Done,
    }

    let mut mode = Mode::Root;
    let mut stats = ScanStats::default();
    let mut found_items = false;

    // shared string/escape state for the active tokenizer
    let mut in_string = false;
    let mut escaped = false;
    // Root: depth inside the root object; SkipValue/Element: nesting depth
    let mut depth: i64 = 0;
    let mut root_seen = false;
    // key accumulator while at root depth 1
    let mut key = Vec::new();
    let mut in_key = false;
    let mut last_key_items = false;
    // element accumulator
    let mut element: Vec<u8> = Vec::new();

    let mut buf = [0u8; 64 * 1024];
    let mut reader = reader;
    loop {
        let n = reader.read(&mut buf).map_err(|e| ScanFailure::Scan(ScanError::Io(e)))?;
        if n == 0 {
            break;
        }
        let mut i = 0;
        while i < n {
            let b = buf[i];
            match mode {
                Mode::Root => {
                    if in_string {
                        if escaped {
                            escaped = false;
                            if in_key {
                                key.push(b);
                            }
                        } else if b == b'\\' {
                            escaped = true;
                            if in_key {
                                key.push(b);
                            }
                        } else if b == b'"' {
                            in_string = false;
                            if in_key {
                                in_key = false;
                                last_key_items = key == b"items";
                            }
                        } else if in_key {
                            key.push(b);
                        }
                    } else {
                        match b {
                            b'{' => {
                                if !root_seen {
                                    root_seen = true;
                                    depth = 1;
                                } else {
                                    // a value started without ':' handling —
                                    // treat as a value to skip
                                    depth += 1;
                                    mode = Mode::SkipValue;
                                }
                            }
                            b'}' => {
                                depth -= 1;
                                if depth == 0 {
                                    mode = Mode::Done;
                                }
                            }
                            b'"' if depth == 1 => {
                                in_string = true;
                                in_key = true;
                                key.clear();
                            }
                            b':' if depth == 1 => {
                                // the upcoming value belongs to the last key
                                if last_key_items {
                                    // expect '[' next (after whitespace)
                                    let mut j = i + 1;
                                    let mut entered = false;
                                    while j < n {
                                        let c = buf[j];
                                        if c.is_ascii_whitespace() {
                                            j += 1;
                                        } else if c == b'[' {
                                            mode = Mode::ArrayGap;
                                            found_items = true;
                                            entered = true;
                                            i = j;
                                            break;
                                        } else {
                                            return Err(ScanFailure::Scan(ScanError::Malformed(
                                                "\"items\" is not an array",
                                            )));
                                        }
                                    }
                                    if !entered && j >= n {
                                        // '[' may arrive in the next buffer;
                                        // loop again in a waiting state
                                        mode = Mode::Root;
                                        // keep last_key_items set; the '['
                                        // case below handles it
                                    }
                                } else {
                                    // value of an uninteresting key: skip it,
                                    // returning to Root when depth is 1 again
                                    mode = Mode::SkipValue;
                                }
                            }
                            b'[' if last_key_items && depth == 1 => {
                                mode = Mode::ArrayGap;
                                found_items = true;
                            }
                            _ => {}
                        }
                    }
                }
                Mode::SkipValue => {
                    // consume one JSON value that started right after ':'
                    if in_string {
                        if escaped {
                            escaped = false;
                        } else if b == b'\\' {
                            escaped = true;
                        } else if b == b'"' {
                            in_string = false;
                            if depth == 1 {
                                mode = Mode::Root;
                            }
                        }
                    } else {
                        match b {
                            b'"' => in_string = true,
                            b'{' | b'[' => depth += 1,
                            b'}' | b']' => {
                                depth -= 1;
                                if depth == 0 {
                                    mode = Mode::Done;
                                } else if depth == 1 {
                                    mode = Mode::Root;
                                }
                            }
                            b',' if depth == 1 => mode = Mode::Root,
                            _ => {}
                        }
                    }
                }
                Mode::ArrayGap => match b {
                    b']' => mode = Mode::Done,
                    b',' => {}
                    c if c.is_ascii_whitespace() => {}
                    _ => {
                        element.clear();
                        element.push(b);
                        in_string = b == b'"';
                        escaped = false;
                        depth = match b {
                            b'{' | b'[' => 1,
                            _ => 0,
                        };
                        mode = Mode::Element;
                        // a one-byte scalar element ending exactly at the
                        // closing bracket is handled in the Element arm
                    }
                },
                Mode::Element => {
                    if in_string {
                        element.push(b);
                        if escaped {
                            escaped = false;
                        } else if b == b'\\' {
                            escaped = true;
                        } else if b == b'"' {
                            in_string = false;
                            if depth == 0 {
                                // bare string element complete
                                emit(&mut element, &mut stats, &mut on_item)?;
                                mode = Mode::ArrayGap;
                            }
                        }
                    } else if depth == 0 {
                        // scalar element: runs until ',' or ']'
                        match b {
                            b',' => {
                                emit(&mut element, &mut stats, &mut on_item)?;
                                mode = Mode::ArrayGap;
                            }
                            b']' => {
                                emit(&mut element, &mut stats, &mut on_item)?;
                                mode = Mode::Done;
                            }
                            _ => element.push(b),
                        }
                    } else {
                        element.push(b);
                        match b {
                            b'"' => in_string = true,
                            b'{' | b'[' => depth += 1,
                            b'}' | b']' => {
                                depth -= 1;
                                if depth == 0 {
                                    emit(&mut element, &mut stats, &mut on_item)?;
                                    mode = Mode::ArrayGap;
                                }
                            }
                            _ => {}
                        }
                    }
                    if element.len() > MAX_ITEM_BYTES {
                        return Err(ScanFailure::Scan(ScanError::Malformed("oversized item")));
                    }
                }
                Mode::Done => {
                    i = n;
                    continue;
                }
            }
            i += 1;
        }
        if mode == Mode::Done {
            // drain the remainder without tokenizing
            loop {
                let n = reader.read(&mut buf).map_err(|e| ScanFailure::Scan(ScanError::Io(e)))?;
                if n == 0 {
                    break;
                }
            }
            break;
        }
    }
    match mode {
        Mode::Done if found_items => Ok(stats),
        Mode::Done => Err(ScanFailure::Scan(ScanError::Malformed("no \"items\" array"))),
        Mode::Root if !root_seen => Err(ScanFailure::Scan(ScanError::Malformed("no root object"))),
        _ => Err(ScanFailure::Scan(ScanError::Malformed("truncated file"))),
    }
}

fn emit<F, E>(element: &mut Vec<u8>, stats: &mut ScanStats, on_item: &mut F) -> Result<(), ScanFailure<E>>
where
    F: FnMut(&[u8]) -> Result<(), E>,
{
    stats.items += 1;
    let trimmed: &[u8] = {
        let mut s = element.as_slice();
        while let [rest @ .., last] = s {
            if last.is_ascii_whitespace() {
                s = rest;
            } else {
                break;
            }
        }
        s
    };
    on_item(trimmed).map_err(ScanFailure::Sink)?;
    element.clear();
    Ok(())
}

/// Scan failure: either the scan itself broke or the item callback did.
#[derive(Debug)]
pub enum ScanFailure<E> {
    Scan(ScanError),
    Sink(E),
}

/// Dump files of a path: a single file, or every `*.json` / `*.json.gz`
/// directly inside a directory, sorted by file name.
pub fn dump_files(path: &Path) -> io::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let p = entry?.path();
        if !p.is_file() {
            continue;
        }
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".json") || name.ends_with(".json.gz") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Opens a dump file, transparently decompressing `.gz`.
pub fn open_dump_file(path: &Path) -> io::Result<Box<dyn Read + Send>> {
    let file = File::open(path)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".gz") {
        Ok(Box::new(MultiGzDecoder::new(BufReader::with_capacity(64 * 1024, file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(64 * 1024, file)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn collect_items(text: &str) -> Result<(Vec<String>, ScanStats), ScanError> {
        let mut out = Vec::new();
        let res = scan_items(text.as_bytes(), |bytes| {
            out.push(String::from_utf8(bytes.to_vec()).unwrap());
            Ok::<(), std::convert::Infallible>(())
        });
        match res {
            Ok(stats) => Ok((out, stats)),
            Err(ScanFailure::Scan(e)) => Err(e),
            Err(ScanFailure::Sink(_)) => unreachable!(),
        }
    }

    #[test]
    fn plain_items_array() {
        let (items, stats) = collect_items(r#"{"items": [{"a": 1}, {"b": [2, 3]}, {"c": {"d": 4}}]}"#).unwrap();
        assert_eq!(items, vec![r#"{"a": 1}"#, r#"{"b": [2, 3]}"#, r#"{"c": {"d": 4}}"#]);
        assert_eq!(stats.items, 3);
    }

    #[test]
    fn keys_before_and_after_items_are_skipped() {
        let text = r#"{"status": "ok", "message": {"items": [9], "note": "decoy"},
                       "items": [{"DOI": "10.1/a"}], "trailer": [1, {"items": 2}]}"#;
        let (items, _) = collect_items(text).unwrap();
        assert_eq!(items, vec![r#"{"DOI": "10.1/a"}"#]);
    }

    #[test]
    fn strings_with_braces_and_escapes() {
        let text = r#"{"items": [{"t": "a } ] \" , {"}, {"u": "\\"}]}"#;
        let (items, _) = collect_items(text).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0], r#"{"t": "a } ] \" , {"}"#);
        assert_eq!(items[1], r#"{"u": "\\"}"#);
    }

    #[test]
    fn empty_items_array() {
        let (items, stats) = collect_items(r#"{"items": []}"#).unwrap();
        assert!(items.is_empty());
        assert_eq!(stats.items, 0);
    }

    #[test]
    fn scalar_items_are_yielded_verbatim() {
        let (items, _) = collect_items(r#"{"items": [1, "two", null]}"#).unwrap();
        assert_eq!(items, vec!["1", "\"two\"", "null"]);
    }

    #[test]
    fn truncated_and_malformed_files_error() {
        assert!(collect_items(r#"{"items": [{"a": 1}"#).is_err());
        assert!(collect_items(r#"{"other": 1}"#).is_err());
        assert!(collect_items("[1, 2]").is_err());
        assert!(collect_items(r#"{"items": "nope"}"#).is_err());
        assert!(collect_items("").is_err());
    }

    #[test]
    fn tiny_read_chunks_do_not_split_tokens() {
        // byte-at-a-time reader: every token boundary lands on a chunk edge
        struct OneByte<'a>(&'a [u8], usize);
        impl Read for OneByte<'_> {
            fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
                if self.1 >= self.0.len() {
                    return Ok(0);
                }
                buf[0] = self.0[self.1];
                self.1 += 1;
                Ok(1)
            }
        }
        let text = r#"{"pre": [1, {"items": [0]}], "items": [{"DOI": "10.1/x", "v": "a,]}\""}, {"n": 2}], "post": 1}"#;
        let mut out = Vec::new();
        scan_items(OneByte(text.as_bytes(), 0), |bytes| {
            out.push(String::from_utf8(bytes.to_vec()).unwrap());
            Ok::<(), std::convert::Infallible>(())
        })
        .map_err(|_| "scan failed")
        .unwrap();
        assert_eq!(out, vec![r#"{"DOI": "10.1/x", "v": "a,]}\""}"#, r#"{"n": 2}"#]);
    }

    #[test]
    fn work_extraction_normalizes_and_validates() {
        let item = json!({
            "DOI": " 10.1186/1756-8722-6-59 ",
            "type": "journal-article",
            "issued": { "date-parts": [[2013, "03", 5]] },
            "ISSN": ["1756-8722", "9999-9999", 17],
            "author": [
                { "family": "A", "ORCID": "https://orcid.org/0000-0003-0530-4305" },
                { "family": "B", "ORCID": "0000-0003-0530-4306" },
                { "family": "C" }
            ],
            "reference": [
                { "DOI": "10.1186/1756-8722-5-31", "year": "2012" },
                { "unstructured": "no doi" },
                { "DOI": "10.X/Bad\u{7}", "year": 2000 },
                { "DOI": "10.5555/ok", "year": "n.d." }
            ]
        });
        let ItemOutcome::Work(work) = work_from_json(&item) else {
            panic!("expected a work");
        };
        assert_eq!(work.doi, "10.1186/1756-8722-6-59");
        assert_eq!(work.issued.unwrap().to_string(), "2013-03-05");
        assert_eq!(work.issns, vec!["1756-8722"]);
        assert_eq!(work.invalid_issns, 2);
        assert_eq!(work.orcids, vec!["0000-0003-0530-4305"]);
        assert_eq!(work.invalid_orcids, 1);
        assert_eq!(work.references.len(), 4);
        assert_eq!(work.references[0].doi.as_deref(), Some("10.1186/1756-8722-5-31"));
        assert_eq!(work.references[0].year, Some(2012));
        assert_eq!(work.references[1].doi, None);
        assert_eq!(work.references[2].doi, None, "control characters disqualify a DOI");
        assert_eq!(work.references[3].year, None);
    }

    #[test]
    fn items_without_doi_are_flagged() {
        assert!(matches!(work_from_json(&json!({"title": ["x"]})), ItemOutcome::NoDoi));
        assert!(matches!(work_from_json(&json!({"DOI": "  "})), ItemOutcome::NoDoi));
        assert!(matches!(work_from_json(&json!({"DOI": 7})), ItemOutcome::NoDoi));
    }

    #[test]
    fn date_edge_cases() {
        let date = |v: Value| extract_date(&v);
        assert_eq!(date(json!({"issued": {"date-parts": [[2018, 0]]}})).0.unwrap().to_string(), "2018");
        assert_eq!(date(json!({"issued": {"date-parts": [[null]]}})), (None, false));
        assert_eq!(date(json!({"issued": {"date-parts": [[2018, 13]]}})), (None, true));
        assert_eq!(date(json!({"issued": {"date-parts": [[2018.5]]}})), (None, true));
        assert_eq!(date(json!({"issued": {"date-parts": [["20x8"]]}})), (None, true));
        assert_eq!(date(json!({})), (None, false));
        assert_eq!(date(json!({"issued": {"date-parts": [[2018, null, 5]]}})).0.unwrap().to_string(), "2018");
    }
}
