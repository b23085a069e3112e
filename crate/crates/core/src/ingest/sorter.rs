//! External line sorter: buffers lines up to a byte cap, spills sorted runs
//! to disk, and k-way-merges them with bounded fan-in. Memory use is capped
//! by the chunk size plus a fixed merge buffer per open run, independent of
//! input size.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

/// Merge no more than this many runs at once; larger run sets go through
/// intermediate merge passes so open-file buffers stay bounded.
const MAX_FAN_IN: usize = 64;
/// Read buffer per run during a merge.
const MERGE_BUF_BYTES: usize = 16 * 1024;

pub struct ExternalSorter {
    tmp_dir: PathBuf,
    max_chunk_bytes: usize,
    chunk: Vec<Box<[u8]>>,
    chunk_bytes: usize,
    runs: Vec<PathBuf>,
    run_counter: usize,
    lines: u64,
}

impl ExternalSorter {
    /// `tmp_dir` is created if missing; run files land there.
    pub fn new(tmp_dir: PathBuf, max_chunk_bytes: usize) -> io::Result<ExternalSorter> {
        fs::create_dir_all(&tmp_dir)?;
        Ok(ExternalSorter {
            tmp_dir,
            max_chunk_bytes: max_chunk_bytes.max(4 * 1024),
            chunk: Vec::new(),
            chunk_bytes: 0,
            runs: Vec::new(),
            run_counter: 0,
            lines: 0,
        })
    }

    /// Adds one line (no embedded newline).
    pub fn push(&mut self, line: &[u8]) -> io::Result<()> {
        debug_assert!(!line.contains(&b'\n'));
        self.chunk_bytes += line.len() + 1;
        self.chunk.push(line.into());
        self.lines += 1;
        if self.chunk_bytes >= self.max_chunk_bytes {
            self.spill()?;
        }
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    fn spill(&mut self) -> io::Result<()> {
        if self.chunk.is_empty() {
            return Ok(());
        }
        self.chunk.sort_unstable();
        let path = self.tmp_dir.join(format!("run-{:05}", self.run_counter));
        self.run_counter += 1;
        let mut out = BufWriter::with_capacity(64 * 1024, File::create(&path)?);
        for line in self.chunk.drain(..) {
            out.write_all(&line)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        self.chunk_bytes = 0;
        self.chunk.shrink_to_fit();
        self.runs.push(path);
        Ok(())
    }

    /// Sorts everything and returns the lines in ascending byte order.
    /// Removes its run files (and the tmp dir if it emptied) when the
    /// returned reader is dropped.
    pub fn finish(mut self) -> io::Result<SortedLines> {
        if self.runs.is_empty() {
            self.chunk.sort_unstable();
            return Ok(SortedLines {
                source: Source::Memory(self.chunk.into_iter()),
                cleanup: vec![],
                tmp_dir: self.tmp_dir,
            });
        }
        self.spill()?;
        // collapse to at most MAX_FAN_IN runs
        while self.runs.len() > MAX_FAN_IN {
            let batch: Vec<PathBuf> = self.runs.drain(..MAX_FAN_IN).collect();
            let path = self.tmp_dir.join(format!("run-{:05}", self.run_counter));
            self.run_counter += 1;
            {
                let mut merge = MergeIter::open(&batch)?;
                let mut out = BufWriter::with_capacity(64 * 1024, File::create(&path)?);
                while let Some(line) = merge.next_line()? {
                    out.write_all(&line)?;
                    out.write_all(b"\n")?;
                }
                out.flush()?;
            }
            for p in &batch {
                let _ = fs::remove_file(p);
            }
            self.runs.push(path);
        }
        let merge = MergeIter::open(&self.runs)?;
        Ok(SortedLines {
            source: Source::Merge(merge),
            cleanup: self.runs,
            tmp_dir: self.tmp_dir,
        })
    }
}

struct MergeIter {
    readers: Vec<BufReader<File>>,
    heap: BinaryHeap<Reverse<(Vec<u8>, usize)>>,
}

impl MergeIter {
    fn open(paths: &[PathBuf]) -> io::Result<MergeIter> {
        let mut readers = Vec::with_capacity(paths.len());
        for p in paths {
            readers.push(BufReader::with_capacity(MERGE_BUF_BYTES, File::open(p)?));
        }
        let mut merge = MergeIter { readers, heap: BinaryHeap::new() };
        for i in 0..merge.readers.len() {
            merge.refill(i)?;
        }
        Ok(merge)
    }

    fn refill(&mut self, idx: usize) -> io::Result<()> {
        let mut line = Vec::new();
        let n = self.readers[idx].read_until(b'\n', &mut line)?;
        if n == 0 {
            return Ok(());
        }
        if line.last() == Some(&b'\n') {
            line.pop();
        }
        self.heap.push(Reverse((line, idx)));
        Ok(())
    }

    fn next_line(&mut self) -> io::Result<Option<Vec<u8>>> {
        match self.heap.pop() {
            None => Ok(None),
            Some(Reverse((line, idx))) => {
                self.refill(idx)?;
                Ok(Some(line))
            }
        }
    }
}

enum Source {
    Memory(std::vec::IntoIter<Box<[u8]>>),
    Merge(MergeIter),
}

/// Sorted output stream of a finished [`ExternalSorter`].
pub struct SortedLines {
    source: Source,
    cleanup: Vec<PathBuf>,
    tmp_dir: PathBuf,
}

impl SortedLines {
    pub fn next_line(&mut self) -> io::Result<Option<Vec<u8>>> {
        match &mut self.source {
            Source::Memory(iter) => Ok(iter.next().map(Vec::from)),
            Source::Merge(merge) => merge.next_line(),
        }
    }
}

impl Drop for SortedLines {
    fn drop(&mut self) {
        for p in &self.cleanup {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_dir(&self.tmp_dir);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(mut lines: SortedLines) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        while let Some(line) = lines.next_line().unwrap() {
            out.push(line);
        }
        out
    }

    fn tmp(tag: &str) -> PathBuf {
        std::env::temp_dir().join(format!("ocindex-sort-{tag}-{}", std::process::id()))
    }

    #[test]
    fn small_input_stays_in_memory() {
        let dir = tmp("mem");
        let mut sorter = ExternalSorter::new(dir.clone(), 1 << 20).unwrap();
        for s in ["pear", "apple", "quince", "apple"] {
            sorter.push(s.as_bytes()).unwrap();
        }
        assert_eq!(sorter.len(), 4);
        let lines = drain(sorter.finish().unwrap());
        assert_eq!(lines, vec![b"apple".to_vec(), b"apple".to_vec(), b"pear".to_vec(), b"quince".to_vec()]);
        assert!(!dir.join("run-00000").exists());
        let _ = fs::remove_dir(&dir);
    }

    #[test]
    fn spilled_runs_merge_in_order() {
        let dir = tmp("spill");
        // cap clamps to the 4 KiB floor, forcing enough runs to exceed the
        // merge fan-in and take the multi-pass path
        let mut sorter = ExternalSorter::new(dir.clone(), 1).unwrap();
        let mut expect = Vec::new();
        for i in 0..30_000u32 {
            let line = format!("{:08}", (i.wrapping_mul(2_654_435_761)) % 1_000_000);
            expect.push(line.clone().into_bytes());
            sorter.push(line.as_bytes()).unwrap();
        }
        expect.sort();
        let got = drain(sorter.finish().unwrap());
        assert_eq!(got, expect);
        assert!(!dir.exists(), "tmp dir should be removed after drop");
    }

    #[test]
    fn empty_sorter_yields_nothing() {
        let dir = tmp("empty");
        let sorter = ExternalSorter::new(dir.clone(), 1 << 20).unwrap();
        assert!(sorter.is_empty());
        let lines = drain(sorter.finish().unwrap());
        assert!(lines.is_empty());
        let _ = fs::remove_dir(&dir);
    }
}
