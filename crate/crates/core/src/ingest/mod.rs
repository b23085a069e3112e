//! Phase 1: stream a JSON dump once, extract per-work facts, and build the
//! auxiliary store (dates / issn / orcid namespaces) plus a run report.

pub mod aux_store;
pub mod scan;
pub mod sorter;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use aux_store::{AuxError, AuxStore};
pub use scan::{work_from_json, ItemOutcome, ReferenceEntry, WorkRecord};

use aux_store::lines;
use scan::{ScanError, ScanFailure};
use sorter::ExternalSorter;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Worker threads scanning dump files; 1 = sequential.
    pub jobs: usize,
    /// In-memory budget per sort buffer before spilling to disk.
    pub sort_buffer_bytes: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { jobs: 1, sort_buffer_bytes: 512 * 1024 }
    }
}

/// Flat counters describing one ingest run; serialized as
/// `ingest-report.json` in the aux directory.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: u64,
    pub files_skipped: u64,
    pub files_unreadable: u64,
    pub files_malformed: u64,
    pub items: u64,
    pub malformed_items: u64,
    pub items_without_doi: u64,
    pub works: u64,
    pub invalid_dates: u64,
    pub invalid_issns: u64,
    pub invalid_orcids: u64,
    pub references: u64,
    pub references_with_doi: u64,
    pub reference_date_candidates: u64,
    pub invalid_reference_years: u64,
    pub dates_entries: u64,
    pub issn_entries: u64,
    pub orcid_entries: u64,
    pub date_conflicts_resolved: u64,
    pub peak_rss_kib: u64,
    pub elapsed_ms: u64,
}

impl IngestReport {
    fn absorb(&mut self, local: &IngestReport) {
        self.files_skipped += local.files_skipped;
        self.files_unreadable += local.files_unreadable;
        self.files_malformed += local.files_malformed;
        self.items += local.items;
        self.malformed_items += local.malformed_items;
        self.items_without_doi += local.items_without_doi;
        self.works += local.works;
        self.invalid_dates += local.invalid_dates;
        self.invalid_issns += local.invalid_issns;
        self.invalid_orcids += local.invalid_orcids;
        self.references += local.references;
        self.references_with_doi += local.references_with_doi;
        self.reference_date_candidates += local.reference_date_candidates;
        self.invalid_reference_years += local.invalid_reference_years;
    }
}

pub const REPORT_FILE: &str = "ingest-report.json";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("dump path not found: {0}")]
    DumpMissing(PathBuf),
    #[error("I/O error during ingest: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization failed: {0}")]
    Report(#[from] serde_json::Error),
}

/// Peak resident set size of this process in KiB, from `/proc/self/status`.
pub fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return rest.trim().trim_end_matches("kB").trim().parse().ok();
        }
    }
    None
}

enum FileProblem {
    Unreadable,
    Malformed,
    Fatal(IngestError),
}

struct Sorters {
    dates: Mutex<ExternalSorter>,
    issn: Mutex<ExternalSorter>,
    orcid: Mutex<ExternalSorter>,
}

/// Per-worker line batches, flushed to the shared sorters in bulk to keep
/// lock traffic low. Sizes are fixed, so worker memory stays bounded.
#[derive(Default)]
struct Batches {
    dates: Vec<String>,
    issn: Vec<String>,
    orcid: Vec<String>,
}

const FLUSH_LINES: usize = 4096;

impl Batches {
    fn flush(&mut self, sorters: &Sorters) -> std::io::Result<()> {
        for (batch, sorter) in [
            (&mut self.dates, &sorters.dates),
            (&mut self.issn, &sorters.issn),
            (&mut self.orcid, &sorters.orcid),
        ] {
            if batch.is_empty() {
                continue;
            }
            let mut guard = sorter.lock().expect("sorter poisoned");
            for line in batch.drain(..) {
                guard.push(line.as_bytes())?;
            }
        }
        Ok(())
    }

    fn maybe_flush(&mut self, sorters: &Sorters) -> std::io::Result<()> {
        if self.dates.len() + self.issn.len() + self.orcid.len() >= FLUSH_LINES {
            self.flush(sorters)?;
        }
        Ok(())
    }
}

fn record_work(
    work: &WorkRecord,
    file_idx: u64,
    item_idx: u64,
    local: &mut IngestReport,
    batches: &mut Batches,
) {
    local.works += 1;
    if work.date_invalid {
        local.invalid_dates += 1;
    }
    local.invalid_issns += u64::from(work.invalid_issns);
    local.invalid_orcids += u64::from(work.invalid_orcids);

    let seq = lines::seq(file_idx, item_idx, 0);
    if let Some(date) = &work.issued {
        batches.dates.push(lines::indexed_date(&work.doi, date, seq));
    }
    for issn in &work.issns {
        batches.issn.push(lines::issn(&work.doi, issn));
    }
    if let Some(pub_type) = &work.pub_type {
        batches.issn.push(lines::pub_type(&work.doi, pub_type, seq));
    }
    for orcid in &work.orcids {
        batches.orcid.push(lines::orcid(&work.doi, orcid));
    }

    local.references += work.references.len() as u64;
    for (ref_idx, reference) in work.references.iter().enumerate() {
        let Some(ref_doi) = &reference.doi else { continue };
        local.references_with_doi += 1;
        let Some(year) = reference.year else { continue };
        if (1..=9999).contains(&year) {
            local.reference_date_candidates += 1;
            let ref_seq = lines::seq(file_idx, item_idx, (ref_idx as u64 + 1).min(0xFFFF));
            batches.dates.push(lines::reference_date(ref_doi, year as u16, ref_seq));
        } else {
            local.invalid_reference_years += 1;
        }
    }
}

fn ingest_one_file(
    path: &Path,
    file_idx: u64,
    local: &mut IngestReport,
    sorters: &Sorters,
) -> Result<(), FileProblem> {
    let reader = match scan::open_dump_file(path) {
        Ok(r) => r,
        Err(_) => return Err(FileProblem::Unreadable),
    };
    let mut batches = Batches::default();
    let mut item_idx: u64 = 0;
    let result = scan::scan_items(reader, |bytes| -> Result<(), IngestError> {
        local.items += 1;
        match serde_json::from_slice::<serde_json::Value>(bytes) {
            Err(_) => local.malformed_items += 1,
            Ok(value) => match work_from_json(&value) {
                ItemOutcome::NoDoi => local.items_without_doi += 1,
                ItemOutcome::Work(work) => {
                    record_work(&work, file_idx, item_idx, local, &mut batches)
                }
            },
        }
        item_idx += 1;
        batches.maybe_flush(sorters).map_err(IngestError::Io)
    });
    match result {
        Ok(_stats) => {
            batches.flush(sorters).map_err(|e| FileProblem::Fatal(IngestError::Io(e)))?;
            Ok(())
        }
        Err(ScanFailure::Scan(ScanError::Io(_))) => Err(FileProblem::Unreadable),
        Err(ScanFailure::Scan(ScanError::Malformed(_))) => Err(FileProblem::Malformed),
        Err(ScanFailure::Sink(e)) => Err(FileProblem::Fatal(e)),
    }
}

/// Runs Phase 1: scans `dump` (a file or a directory of `*.json[.gz]`
/// files), writes the aux store into `aux_dir`, and writes
/// `ingest-report.json` next to it.
///
/// Data problems (unreadable or structurally broken files, malformed items)
/// are counted and skipped; only environmental failures abort the run.
pub fn run_ingest(
    dump: &Path,
    aux_dir: &Path,
    opts: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    let started = Instant::now();
    if !dump.exists() {
        return Err(IngestError::DumpMissing(dump.to_path_buf()));
    }
    let files = scan::dump_files(dump)?;
    fs::create_dir_all(aux_dir)?;
    let sort_root = aux_dir.join(".sort");
    if sort_root.exists() {
        fs::remove_dir_all(&sort_root)?;
    }
    fs::create_dir_all(&sort_root)?;

    let sorters = Sorters {
        dates: Mutex::new(ExternalSorter::new(sort_root.join("dates"), opts.sort_buffer_bytes)?),
        issn: Mutex::new(ExternalSorter::new(sort_root.join("issn"), opts.sort_buffer_bytes)?),
        orcid: Mutex::new(ExternalSorter::new(sort_root.join("orcid"), opts.sort_buffer_bytes)?),
    };

    let mut report = IngestReport { files: files.len() as u64, ..IngestReport::default() };
    let totals: Mutex<IngestReport> = Mutex::new(IngestReport::default());
    let fatal: Mutex<Option<IngestError>> = Mutex::new(None);
    let stop = AtomicBool::new(false);
    let cursor = AtomicUsize::new(0);
    let jobs = opts.jobs.max(1).min(files.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let file_idx = cursor.fetch_add(1, Ordering::Relaxed);
                if file_idx >= files.len() {
                    break;
                }
                let mut local = IngestReport::default();
                match ingest_one_file(&files[file_idx], file_idx as u64, &mut local, &sorters) {
                    Ok(()) => {}
                    Err(FileProblem::Unreadable) => {
                        log::warn!("skipping unreadable dump file {}", files[file_idx].display());
                        local.files_skipped += 1;
                        local.files_unreadable += 1;
                    }
                    Err(FileProblem::Malformed) => {
                        log::warn!("skipping malformed dump file {}", files[file_idx].display());
                        local.files_skipped += 1;
                        local.files_malformed += 1;
                    }
                    Err(FileProblem::Fatal(e)) => {
                        *fatal.lock().expect("fatal slot poisoned") = Some(e);
                        stop.store(true, Ordering::Relaxed);
                        break;
                    }
                }
                totals.lock().expect("totals poisoned").absorb(&local);
            });
        }
    });

    if let Some(e) = fatal.into_inner().expect("fatal slot poisoned") {
        return Err(e);
    }
    report.absorb(&totals.into_inner().expect("totals poisoned"));

    let dates = sorters.dates.into_inner().expect("sorter poisoned").finish()?;
    let issn = sorters.issn.into_inner().expect("sorter poisoned").finish()?;
    let orcid = sorters.orcid.into_inner().expect("sorter poisoned").finish()?;
    let counts = aux_store::write_store(aux_dir, dates, issn, orcid)?;
    let _ = fs::remove_dir(&sort_root);

    report.dates_entries = counts.dates_entries;
    report.issn_entries = counts.issn_entries;
    report.orcid_entries = counts.orcid_entries;
    report.date_conflicts_resolved = counts.date_conflicts_resolved;
    report.peak_rss_kib = peak_rss_kib().unwrap_or(0);
    report.elapsed_ms = started.elapsed().as_millis() as u64;

    let json = serde_json::to_string_pretty(&report)?;
    fs::write(aux_dir.join(REPORT_FILE), json + "\n")?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PartialDate;

    fn write_json(path: &Path, items: &[serde_json::Value]) {
        let doc = serde_json::json!({ "items": items });
        fs::write(path, serde_json::to_vec(&doc).unwrap()).unwrap();
    }

    #[test]
    fn fixture_dump_builds_expected_store() {
        let tmp = tempfile::tempdir().unwrap();
        let dump = tmp.path().join("dump");
        fs::create_dir(&dump).unwrap();
        write_json(&dump.join("dump-000.json"), &ocindex_testkit::gen::example_items());

        let aux = tmp.path().join("aux");
        let report = run_ingest(&dump, &aux, &IngestOptions::default()).unwrap();
        assert_eq!(report.files, 1);
        assert_eq!(report.files_skipped, 0);
        assert_eq!(report.works, 6);
        assert_eq!(report.items, 6);
        assert_eq!(report.references, 5);
        assert_eq!(report.references_with_doi, 4);

        let store = AuxStore::open(&aux).unwrap();
        let date = |doi: &str| store.pub_date(doi).unwrap().map(|d| d.to_string());
        assert_eq!(date("10.1186/1756-8722-6-59").as_deref(), Some("2013"));
        assert_eq!(date("10.1186/1756-8722-5-31").as_deref(), Some("2012"));
        assert_eq!(date("10.1016/j.cell.2019.0101").as_deref(), Some("2019-01"));
        assert_eq!(date("10.1007/s00018-018-2862-4").as_deref(), Some("2018-06-05"));
        assert_eq!(date("10.1021/acs.jpcb.2020.777").as_deref(), Some("2020-02-29"));
        assert_eq!(date("10.9999/undated.2021"), None);

        let (issns, pub_type) = store.issns("10.1186/1756-8722-6-59").unwrap();
        assert_eq!(issns, vec!["1756-8722"]);
        assert_eq!(pub_type.as_deref(), Some("journal-article"));
        assert_eq!(
            store.orcids("10.1016/j.cell.2019.0101").unwrap(),
            vec!["0000-0003-0530-4305"]
        );

        let report_text = fs::read_to_string(aux.join(REPORT_FILE)).unwrap();
        let parsed: IngestReport = serde_json::from_str(&report_text).unwrap();
        assert_eq!(parsed.works, 6);
    }

    #[test]
    fn reference_year_fills_dates_gap_but_never_beats_indexed() {
        let tmp = tempfile::tempdir().unwrap();
        let dump = tmp.path().join("dump");
        fs::create_dir(&dump).unwrap();
        // file 0: references propose years for two DOIs
        write_json(
            &dump.join("a.json"),
            &[serde_json::json!({
                "DOI": "10.1/citing",
                "issued": { "date-parts": [[2021]] },
                "reference": [
                    { "DOI": "10.1/known", "year": 1990 },
                    { "DOI": "10.1/gap", "year": 1984 },
                ],
            })],
        );
        // file 1 (later in sorted order): 10.1/known turns up as an indexed work
        write_json(
            &dump.join("b.json"),
            &[serde_json::json!({
                "DOI": "10.1/known",
                "issued": { "date-parts": [[1991, 5]] },
            })],
        );

        let aux = tmp.path().join("aux");
        let report = run_ingest(&dump, &aux, &IngestOptions::default()).unwrap();
        let store = AuxStore::open(&aux).unwrap();
        assert_eq!(
            store.pub_date("10.1/known").unwrap(),
            Some(PartialDate::year_month(1991, 5).unwrap()),
            "indexed date beats an earlier reference year"
        );
        assert_eq!(store.pub_date("10.1/gap").unwrap(), Some(PartialDate::year(1984).unwrap()));
        assert_eq!(report.date_conflicts_resolved, 1);
        assert_eq!(report.reference_date_candidates, 2);
    }

    #[test]
    fn corrupt_file_is_skipped_and_counted() {
        let tmp = tempfile::tempdir().unwrap();
        let dump = tmp.path().join("dump");
        fs::create_dir(&dump).unwrap();
        write_json(&dump.join("good.json"), &ocindex_testkit::gen::example_items());
        fs::write(dump.join("broken.json"), b"{\"items\": [{\"DOI\": ").unwrap();

        let aux = tmp.path().join("aux");
        let report = run_ingest(&dump, &aux, &IngestOptions::default()).unwrap();
        assert_eq!(report.files, 2);
        assert_eq!(report.files_skipped, 1);
        assert_eq!(report.files_malformed, 1);
        assert_eq!(report.works, 6);
    }

    #[test]
    fn missing_dump_is_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        let err = run_ingest(
            &tmp.path().join("nope"),
            &tmp.path().join("aux"),
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::DumpMissing(_)));
        assert!(!tmp.path().join("aux").join(aux_store::DATES_FILE).exists());
    }

    #[test]
    fn parallel_and_sequential_runs_produce_identical_stores() {
        use ocindex_testkit::gen::{write_dump, DumpConfig};
        let tmp = tempfile::tempdir().unwrap();
        let dump = tmp.path().join("dump");
        let cfg = DumpConfig { seed: 11, works: 300, ..DumpConfig::default() };
        write_dump(&dump, &cfg, 4, true).unwrap();

        let aux1 = tmp.path().join("aux1");
        let aux2 = tmp.path().join("aux2");
        let r1 = run_ingest(&dump, &aux1, &IngestOptions::default()).unwrap();
        let r2 = run_ingest(
            &dump,
            &aux2,
            &IngestOptions { jobs: 4, sort_buffer_bytes: 8 * 1024 },
        )
        .unwrap();
        assert_eq!(r1.works, r2.works);
        assert_eq!(r1.dates_entries, r2.dates_entries);
        assert_eq!(r1.date_conflicts_resolved, r2.date_conflicts_resolved);
        for file in [aux_store::DATES_FILE, aux_store::ISSN_FILE, aux_store::ORCID_FILE] {
            let a = fs::read(aux1.join(file)).unwrap();
            let b = fs::read(aux2.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between jobs=1 and jobs=4");
            assert!(!a.is_empty());
            let ai = fs::read(aux1.join(format!("{file}.idx"))).unwrap();
            let bi = fs::read(aux2.join(format!("{file}.idx"))).unwrap();
            assert_eq!(ai, bi, "{file}.idx differs");
        }
        // sort scratch space is cleaned up
        assert!(!aux1.join(".sort").exists());
        assert!(!aux2.join(".sort").exists());
    }
}
