//! Phase 2: join each work's reference list against the aux store to mint
//! citations, then emit the citation and provenance CSVs sorted by
//! (citing, cited).

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::csvutil;
use crate::ingest::aux_store::AuxStore;
use crate::ingest::scan;
use crate::ingest::sorter::ExternalSorter;
use crate::ingest::{AuxError, ItemOutcome, WorkRecord};
use crate::model::{compute_timespan, CitationRecord, ProvenanceRecord};
use crate::oci::{format_oci, OciCodec};

pub const CITATIONS_FILE: &str = "citations.csv";
pub const PROVENANCE_FILE: &str = "provenance.csv";
pub const CITATIONS_HEADER: &str = "oci,citing,cited,creation,timespan,journal_sc,author_sc";
pub const PROVENANCE_HEADER: &str = "oci,agent,source,created";

pub const DEFAULT_AGENT_IRI: &str = "https://w3id.org/oc";
pub const DEFAULT_SOURCE_TEMPLATE: &str = "https://api.crossref.org/works/{doi}";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone)]
pub struct BuildConfig {
    /// IRI of the agent credited in provenance.
    pub agent_iri: String,
    /// Metadata API URL template; `{doi}` is replaced by the citing DOI.
    pub source_url_template: String,
    /// Provenance `created` value, one per run, `YYYY-MM-DDTHH:MM:SSZ`.
    pub run_timestamp: String,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            agent_iri: DEFAULT_AGENT_IRI.to_string(),
            source_url_template: DEFAULT_SOURCE_TEMPLATE.to_string(),
            run_timestamp: now_utc_timestamp(),
        }
    }
}

/// Current wall-clock time in the provenance timestamp format.
pub fn now_utc_timestamp() -> String {
    chrono::Utc::now().format(TIMESTAMP_FORMAT).to_string()
}

/// Checks a user-supplied run timestamp for the exact `created` format.
pub fn is_valid_run_timestamp(text: &str) -> bool {
    chrono::NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT).is_ok()
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("dump path not found: {0}")]
    DumpMissing(PathBuf),
    #[error("aux store error: {0}")]
    Aux(#[from] AuxError),
    #[error("I/O error during build: {0}")]
    Io(#[from] std::io::Error),
}

/// Citations minted from one work, plus what had to be dropped.
#[derive(Debug, Default)]
pub struct WorkCitations {
    pub pairs: Vec<(CitationRecord, ProvenanceRecord)>,
    /// References whose DOI pair could not be encoded as an OCI.
    pub unencodable: u64,
}

/// Mints one citation per distinct cited DOI in the work's reference list.
///
/// Creation comes from the dates namespace for the citing DOI (not the raw
/// item), the timespan needs both dates, and the self-citation flags compare
/// ISSN / ORCID sets of the two DOIs.
pub fn generate_citations(
    work: &WorkRecord,
    aux: &AuxStore,
    codec: &OciCodec,
    config: &BuildConfig,
) -> Result<WorkCitations, AuxError> {
    let mut out = WorkCitations::default();
    if work.references.is_empty() {
        return Ok(out);
    }
    let citing_doi = work.doi.as_str();
    let creation = aux.pub_date(citing_doi)?;
    let (citing_issns, _) = aux.issns(citing_doi)?;
    let citing_orcids = aux.orcids(citing_doi)?;
    let source = config.source_url_template.replace("{doi}", citing_doi);

    let mut seen: HashSet<&str> = HashSet::new();
    for reference in &work.references {
        let Some(cited_doi) = reference.doi.as_deref() else { continue };
        if !seen.insert(cited_doi) {
            continue;
        }
        let oci = match codec.build_oci(citing_doi, cited_doi, "020") {
            Ok(oci) => oci,
            Err(e) => {
                log::debug!("skipping unencodable pair {citing_doi} -> {cited_doi}: {e}");
                out.unencodable += 1;
                continue;
            }
        };
        let cited_date = aux.pub_date(cited_doi)?;
        let timespan = match (&creation, &cited_date) {
            (Some(citing), Some(cited)) => Some(compute_timespan(citing, cited)),
            _ => None,
        };
        let (cited_issns, _) = aux.issns(cited_doi)?;
        let cited_orcids = aux.orcids(cited_doi)?;
        let journal_sc = intersects(&citing_issns, &cited_issns);
        let author_sc = intersects(&citing_orcids, &cited_orcids);

        let prov = ProvenanceRecord {
            oci: oci.clone(),
            agent: config.agent_iri.clone(),
            source: source.clone(),
            created_at: config.run_timestamp.clone(),
        };
        out.pairs.push((
            CitationRecord {
                oci,
                citing_doi: citing_doi.to_string(),
                cited_doi: cited_doi.to_string(),
                creation: creation.clone(),
                timespan,
                journal_sc,
                author_sc,
            },
            prov,
        ));
    }
    Ok(out)
}

/// Both vectors are sorted and deduplicated, so a linear walk suffices.
fn intersects(a: &[String], b: &[String]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "yes"
    } else {
        "no"
    }
}

/// Citation CSV row fields in column order, with the bare OCI numerals.
pub fn citation_row(record: &CitationRecord) -> [String; 7] {
    [
        format_oci(&record.oci, false),
        record.citing_doi.clone(),
        record.cited_doi.clone(),
        record.creation.as_ref().map(|d| d.to_string()).unwrap_or_default(),
        record.timespan.as_ref().map(|t| t.to_string()).unwrap_or_default(),
        yes_no(record.journal_sc).to_string(),
        yes_no(record.author_sc).to_string(),
    ]
}

/// Provenance CSV row fields in column order.
pub fn provenance_row(record: &ProvenanceRecord) -> [String; 4] {
    [
        format_oci(&record.oci, false),
        record.agent.clone(),
        record.source.clone(),
        record.created_at.clone(),
    ]
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct BuildReport {
    pub works: u64,
    pub references_with_doi: u64,
    pub citations: u64,
    pub duplicates_removed: u64,
    pub unencodable_skipped: u64,
}

/// Options controlling the build driver.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub sort_buffer_bytes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { sort_buffer_bytes: 512 * 1024 }
    }
}

/// Runs Phase 2 end to end: re-scans the dump for reference lists, mints
/// citations against the aux store, and writes `citations.csv` and
/// `provenance.csv` (both sorted by citing, cited) into `out_dir`.
pub fn run_build(
    dump: &Path,
    aux_dir: &Path,
    out_dir: &Path,
    config: &BuildConfig,
    opts: &BuildOptions,
) -> Result<BuildReport, BuildError> {
    if !dump.exists() {
        return Err(BuildError::DumpMissing(dump.to_path_buf()));
    }
    let aux = AuxStore::open(aux_dir)?;
    let codec = OciCodec::builtin();
    fs::create_dir_all(out_dir)?;
    let sort_dir = out_dir.join(".sort-citations");
    if sort_dir.exists() {
        fs::remove_dir_all(&sort_dir)?;
    }
    let mut sorter = ExternalSorter::new(sort_dir.clone(), opts.sort_buffer_bytes)?;

    let mut report = BuildReport::default();
    for path in scan::dump_files(dump)? {
        let reader = match scan::open_dump_file(&path) {
            Ok(r) => r,
            Err(_) => continue, // already reported during ingest
        };
        let result = scan::scan_items(reader, |bytes| -> Result<(), BuildError> {
            let Ok(value) = serde_json::from_slice::<serde_json::Value>(bytes) else {
                return Ok(());
            };
            let ItemOutcome::Work(work) = crate::ingest::work_from_json(&value) else {
                return Ok(());
            };
            report.works += 1;
            report.references_with_doi +=
                work.references.iter().filter(|r| r.doi.is_some()).count() as u64;
            let generated = generate_citations(&work, &aux, codec, config)?;
            report.unencodable_skipped += generated.unencodable;
            for (citation, prov) in &generated.pairs {
                let line = merge_line(citation, prov);
                sorter.push(line.as_bytes())?;
            }
            Ok(())
        });
        match result {
            Ok(_) => {}
            Err(scan::ScanFailure::Scan(_)) => continue, // skipped in Phase 1 too
            Err(scan::ScanFailure::Sink(e)) => return Err(e),
        }
    }

    let mut citations = CsvOut::create(&out_dir.join(CITATIONS_FILE), CITATIONS_HEADER)?;
    let mut provenance = CsvOut::create(&out_dir.join(PROVENANCE_FILE), PROVENANCE_HEADER)?;
    let mut merged = sorter.finish()?;
    let mut last_key: Option<String> = None;
    while let Some(line) = merged.next_line()? {
        let text = String::from_utf8_lossy(&line);
        let mut parts = text.splitn(4, '\t');
        let (Some(citing), Some(cited), Some(cit_row), Some(prov_row)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            continue;
        };
        let key = format!("{citing}\t{cited}");
        if last_key.as_deref() == Some(key.as_str()) {
            report.duplicates_removed += 1;
            continue;
        }
        last_key = Some(key);
        citations.write_line(cit_row)?;
        provenance.write_line(prov_row)?;
        report.citations += 1;
    }
    citations.finish()?;
    provenance.finish()?;
    Ok(report)
}

/// One sortable line carrying both output rows: raw citing and cited DOIs
/// for ordering and deduplication, then the two pre-rendered CSV rows.
/// Tabs are safe separators because no field may contain control characters.
fn merge_line(citation: &CitationRecord, prov: &ProvenanceRecord) -> String {
    let cit = citation_row(citation);
    let prv = provenance_row(prov);
    format!(
        "{}\t{}\t{}\t{}",
        citation.citing_doi,
        citation.cited_doi,
        csvutil::record_string(&cit.iter().map(String::as_str).collect::<Vec<_>>()),
        csvutil::record_string(&prv.iter().map(String::as_str).collect::<Vec<_>>()),
    )
}

struct CsvOut {
    writer: BufWriter<File>,
}

impl CsvOut {
    fn create(path: &Path, header: &str) -> std::io::Result<Self> {
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(header.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(Self { writer })
    }

    fn write_line(&mut self, row: &str) -> std::io::Result<()> {
        self.writer.write_all(row.as_bytes())?;
        self.writer.write_all(b"\n")
    }

    fn finish(mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}
