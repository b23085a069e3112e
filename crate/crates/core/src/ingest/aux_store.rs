//! The on-disk auxiliary store: three namespaces (dates / issn / orcid),
//! each a DOI-sorted CSV with a sparse `.idx` sidecar for random access.
//!
//! The CSV files double as the normative export format. Rows are
//! newline-free by construction, so the sidecar can address them by byte
//! offset and the reader can scan line-wise.
//!
//! Namespace schemas:
//! - `dates.csv`:  `doi,date` — the winning publication date per DOI.
//! - `issn.csv`:   `doi,issns,pub_type` — space-joined ISSNs.
//! - `orcid.csv`:  `doi,orcids` — space-joined ORCIDs.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::csvutil;

use crate::model::{EntityAux, PartialDate};

use super::sorter::SortedLines;

pub const DATES_FILE: &str = "dates.csv";
pub const ISSN_FILE: &str = "issn.csv";
pub const ORCID_FILE: &str = "orcid.csv";

const DATES_HEADER: &str = "doi,date";
const ISSN_HEADER: &str = "doi,issns,pub_type";
const ORCID_HEADER: &str = "doi,orcids";

/// One sidecar entry every this many rows.
const INDEX_EVERY: u64 = 32;

/// Sort-line construction. Lines are `key-field \t order-field [\t value]`;
/// lexicographic order on the whole line realizes the priority rules:
/// - dates: order field is `{source}{precision}{seq}` — indexed ('0')
///   before reference ('1'), finer precision first, then scan order.
/// - issn: `i{issn}` lines collect the set; `p{seq}\t{type}` lines pick the
///   first publication type ('i' sorts before 'p').
/// - orcid: plain `{doi}\t{orcid}` lines; duplicates collapse.
pub mod lines {
    use crate::model::{DatePrecision, PartialDate};

    /// Scan-order sequence number: file, then item, then reference position.
    pub fn seq(file_idx: u64, item_idx: u64, ref_idx: u64) -> u64 {
        debug_assert!(item_idx < (1 << 32) && ref_idx < (1 << 16));
        (file_idx << 48) | (item_idx << 16) | ref_idx
    }

    fn precision_digit(p: DatePrecision) -> char {
        match p {
            DatePrecision::Day => '0',
            DatePrecision::Month => '1',
            DatePrecision::Year => '2',
        }
    }

    pub fn indexed_date(doi: &str, date: &PartialDate, seq: u64) -> String {
        format!("{doi}\t0{}{seq:020}\t{date}", precision_digit(date.precision()))
    }

    pub fn reference_date(doi: &str, year: u16, seq: u64) -> String {
        format!("{doi}\t12{seq:020}\t{:04}", year)
    }

    pub fn issn(doi: &str, issn: &str) -> String {
        format!("{doi}\ti{issn}")
    }

    pub fn pub_type(doi: &str, pub_type: &str, seq: u64) -> String {
        format!("{doi}\tp{seq:020}\t{pub_type}")
    }

    pub fn orcid(doi: &str, orcid: &str) -> String {
        format!("{doi}\to{orcid}")
    }
}

/// Row counts and resolution tallies from writing the store.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AuxCounts {
    pub dates_entries: u64,
    pub issn_entries: u64,
    pub orcid_entries: u64,
    /// Discarded date candidates that disagreed with the winning date.
    pub date_conflicts_resolved: u64,
}

struct NamespaceWriter {
    data: BufWriter<File>,
    idx: BufWriter<File>,
    offset: u64,
    rows: u64,
}

impl NamespaceWriter {
    fn create(dir: &Path, file: &str, header: &str) -> io::Result<Self> {
        let data_path = dir.join(file);
        let idx_path = dir.join(format!("{file}.idx"));
        let mut data = BufWriter::new(File::create(data_path)?);
        let idx = BufWriter::new(File::create(idx_path)?);
        let mut header_line = String::from(header);
        header_line.push('\n');
        data.write_all(header_line.as_bytes())?;
        Ok(Self { data, idx, offset: header_line.len() as u64, rows: 0 })
    }

    fn write_row(&mut self, key: &str, fields: &[&str]) -> io::Result<()> {
        if self.rows % INDEX_EVERY == 0 {
            writeln!(self.idx, "{key}\t{}", self.offset)?;
        }
        let line = csvutil::record_line(fields);
        self.data.write_all(line.as_bytes())?;
        self.offset += line.len() as u64;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> io::Result<u64> {
        self.data.flush()?;
        self.idx.flush()?;
        Ok(self.rows)
    }
}

fn split_key(line: &[u8]) -> Option<(&str, &str)> {
    let line = std::str::from_utf8(line).ok()?;
    let (key, rest) = line.split_once('\t')?;
    Some((key, rest))
}

/// Consumes the three sorted line streams and writes the store files.
pub fn write_store(
    dir: &Path,
    mut dates: SortedLines,
    mut issn: SortedLines,
    mut orcid: SortedLines,
) -> io::Result<AuxCounts> {
    let mut counts = AuxCounts::default();

    // dates: first line of each DOI group wins; later lines that disagree
    // with the winner are counted as resolved conflicts
    {
        let mut w = NamespaceWriter::create(dir, DATES_FILE, DATES_HEADER)?;
        let mut current: Option<(String, String)> = None;
        while let Some(line) = dates.next_line()? {
            let Some((doi, rest)) = split_key(&line) else { continue };
            let Some((_order, value)) = rest.split_once('\t') else { continue };
            match &current {
                Some((cur_doi, winner)) if cur_doi == doi => {
                    if winner != value {
                        counts.date_conflicts_resolved += 1;
                    }
                }
                _ => {
                    w.write_row(doi, &[doi, value])?;
                    current = Some((doi.to_string(), value.to_string()));
                }
            }
        }
        counts.dates_entries = w.finish()?;
    }

    // issn: union of 'i' lines, first 'p' line supplies the type
    {
        fn flush_group(
            w: &mut NamespaceWriter,
            cur_doi: &mut Option<String>,
            issns: &mut Vec<String>,
            pub_type: &mut Option<String>,
        ) -> io::Result<()> {
            if let Some(doi) = cur_doi.take() {
                let joined = issns.join(" ");
                w.write_row(&doi, &[&doi, &joined, pub_type.as_deref().unwrap_or("")])?;
                issns.clear();
                *pub_type = None;
            }
            Ok(())
        }
        let mut w = NamespaceWriter::create(dir, ISSN_FILE, ISSN_HEADER)?;
        let mut cur_doi: Option<String> = None;
        let mut issns: Vec<String> = Vec::new();
        let mut pub_type: Option<String> = None;
        while let Some(line) = issn.next_line()? {
            let Some((doi, rest)) = split_key(&line) else { continue };
            if cur_doi.as_deref() != Some(doi) {
                flush_group(&mut w, &mut cur_doi, &mut issns, &mut pub_type)?;
                cur_doi = Some(doi.to_string());
            }
            if let Some(value) = rest.strip_prefix('i') {
                if issns.last().map(String::as_str) != Some(value) {
                    issns.push(value.to_string());
                }
            } else if rest.starts_with('p') && pub_type.is_none() {
                if let Some((_seq, value)) = rest.split_once('\t') {
                    pub_type = Some(value.to_string());
                }
            }
        }
        flush_group(&mut w, &mut cur_doi, &mut issns, &mut pub_type)?;
        counts.issn_entries = w.finish()?;
    }

    // orcid: union per DOI
    {
        fn flush_group(
            w: &mut NamespaceWriter,
            cur_doi: &mut Option<String>,
            orcids: &mut Vec<String>,
        ) -> io::Result<()> {
            if let Some(doi) = cur_doi.take() {
                let joined = orcids.join(" ");
                w.write_row(&doi, &[&doi, &joined])?;
                orcids.clear();
            }
            Ok(())
        }
        let mut w = NamespaceWriter::create(dir, ORCID_FILE, ORCID_HEADER)?;
        let mut cur_doi: Option<String> = None;
        let mut orcids: Vec<String> = Vec::new();
        while let Some(line) = orcid.next_line()? {
            let Some((doi, rest)) = split_key(&line) else { continue };
            let Some(value) = rest.strip_prefix('o') else { continue };
            if cur_doi.as_deref() != Some(doi) {
                flush_group(&mut w, &mut cur_doi, &mut orcids)?;
                cur_doi = Some(doi.to_string());
            }
            if orcids.last().map(String::as_str) != Some(value) {
                orcids.push(value.to_string());
            }
        }
        flush_group(&mut w, &mut cur_doi, &mut orcids)?;
        counts.orcid_entries = w.finish()?;
    }

    Ok(counts)
}

#[derive(Debug, thiserror::Error)]
pub enum AuxError {
    #[error("I/O error in aux store: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt aux store: {0}")]
    Corrupt(String),
}

struct Namespace {
    path: PathBuf,
    reader: Mutex<BufReader<File>>,
    /// `(first DOI of block, byte offset)`, ascending.
    index: Vec<(String, u64)>,
    data_start: u64,
}

impl Namespace {
    fn open(dir: &Path, file: &str, header: &str) -> Result<Self, AuxError> {
        let path = dir.join(file);
        let mut reader = BufReader::with_capacity(16 * 1024, File::open(&path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        if first.trim_end_matches('\n') != header {
            return Err(AuxError::Corrupt(format!(
                "{file}: expected header {header:?}, found {:?}",
                first.trim_end()
            )));
        }
        let data_start = first.len() as u64;

        let idx_path = dir.join(format!("{file}.idx"));
        let mut index: Vec<(String, u64)> = Vec::new();
        let mut idx_text = String::new();
        File::open(&idx_path)?.read_to_string(&mut idx_text)?;
        for line in idx_text.lines() {
            let (doi, offset) = line
                .rsplit_once('\t')
                .ok_or_else(|| AuxError::Corrupt(format!("{file}.idx: bad line")))?;
            let offset: u64 = offset
                .parse()
                .map_err(|_| AuxError::Corrupt(format!("{file}.idx: bad offset")))?;
            if let Some((prev, _)) = index.last() {
                if doi <= prev.as_str() {
                    return Err(AuxError::Corrupt(format!("{file}.idx: keys out of order")));
                }
            }
            index.push((doi.to_string(), offset));
        }
        Ok(Self { path, reader: Mutex::new(reader), index, data_start })
    }

    /// Fetches the row for `doi`, parsed into fields.
    fn lookup(&self, doi: &str) -> Result<Option<Vec<String>>, AuxError> {
        // last index block whose first key is <= doi
        let pos = self.index.partition_point(|(k, _)| k.as_str() <= doi);
        let start = match pos {
            0 => self.data_start,
            p => self.index[p - 1].1,
        };
        let mut reader = self.reader.lock().expect("aux reader poisoned");
        reader.seek(SeekFrom::Start(start))?;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            let row = line.trim_end_matches('\n');
            let fields = csvutil::parse_record(row).ok_or_else(|| {
                AuxError::Corrupt(format!("{}: unparseable row", self.path.display()))
            })?;
            let Some(key) = fields.first() else { continue };
            match key.as_str().cmp(doi) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => return Ok(Some(fields)),
                std::cmp::Ordering::Greater => return Ok(None),
            }
        }
    }
}

/// Read handle over an aux store directory.
pub struct AuxStore {
    dates: Namespace,
    issn: Namespace,
    orcid: Namespace,
}

impl AuxStore {
    pub fn open(dir: &Path) -> Result<Self, AuxError> {
        Ok(Self {
            dates: Namespace::open(dir, DATES_FILE, DATES_HEADER)?,
            issn: Namespace::open(dir, ISSN_FILE, ISSN_HEADER)?,
            orcid: Namespace::open(dir, ORCID_FILE, ORCID_HEADER)?,
        })
    }

    pub fn pub_date(&self, doi: &str) -> Result<Option<PartialDate>, AuxError> {
        match self.dates.lookup(doi)? {
            None => Ok(None),
            Some(fields) => {
                let raw = fields.get(1).map(String::as_str).unwrap_or("");
                raw.parse()
                    .map(Some)
                    .map_err(|_| AuxError::Corrupt(format!("dates: bad date {raw:?}")))
            }
        }
    }

    fn joined(fields: &[String], idx: usize) -> Vec<String> {
        fields
            .get(idx)
            .map(|s| s.split(' ').filter(|p| !p.is_empty()).map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn issns(&self, doi: &str) -> Result<(Vec<String>, Option<String>), AuxError> {
        match self.issn.lookup(doi)? {
            None => Ok((Vec::new(), None)),
            Some(fields) => {
                let issns = Self::joined(&fields, 1);
                let pub_type = fields.get(2).filter(|s| !s.is_empty()).cloned();
                Ok((issns, pub_type))
            }
        }
    }

    pub fn orcids(&self, doi: &str) -> Result<Vec<String>, AuxError> {
        match self.orcid.lookup(doi)? {
            None => Ok(Vec::new()),
            Some(fields) => Ok(Self::joined(&fields, 1)),
        }
    }

    /// All auxiliary facts about one DOI in a single struct.
    pub fn entity_aux(&self, doi: &str) -> Result<EntityAux, AuxError> {
        let pub_date = self.pub_date(doi)?;
        let (issns, pub_type) = self.issns(doi)?;
        let orcids = self.orcids(doi)?;
        Ok(EntityAux { doi: doi.to_string(), pub_date, issns, orcids, pub_type })
    }

}
