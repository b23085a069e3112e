//! Synthetic Crossref-style dump generation.
//!
//! Every attribute of work `i` is drawn from an RNG seeded by `(seed, i)`,
//! so a reference inside work `a` can know the publication date of target
//! work `b` without materializing it, and dumps of any size stream out in
//! constant memory.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::checksums::{random_issn, random_orcid};

/// Knobs for the randomized corpus. Rates are probabilities in [0, 1].
#[derive(Debug, Clone)]
pub struct DumpConfig {
    pub seed: u64,
    pub works: usize,
    /// references per work, drawn uniformly from this inclusive range
    pub refs_min: usize,
    pub refs_max: usize,
    /// share of references pointing at other indexed works
    pub internal_ref_share: f64,
    /// chance an indexed work carries no usable publication date
    pub missing_date_rate: f64,
    /// chance a dated work has full day precision / year-month precision
    pub day_precision_rate: f64,
    pub month_precision_rate: f64,
    /// chance an external reference carries a year
    pub external_year_rate: f64,
    /// chance a reference entry has no DOI
    pub doiless_ref_rate: f64,
    /// chance a work's reference list repeats an earlier entry
    pub duplicate_ref_rate: f64,
    /// chance an item has no DOI at all (ingest must skip it)
    pub doiless_item_rate: f64,
    /// chance a generated ISSN/ORCID string is corrupted (bad check digit)
    pub invalid_id_rate: f64,
    /// chance a reference year is unusable text like "n.d."
    pub junk_year_rate: f64,
    /// distinct ISSNs shared corpus-wide; small pools force intersections
    pub issn_pool: usize,
    pub issns_per_work_max: usize,
    /// distinct ORCIDs shared corpus-wide
    pub orcid_pool: usize,
    pub authors_per_work_max: usize,
    /// chance an author record carries an ORCID
    pub orcid_rate: f64,
    /// DOI registrant codes; work i gets prefix `10.<prefixes[i % len]>`
    pub prefixes: Vec<String>,
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig {
            seed: 1,
            works: 100,
            refs_min: 2,
            refs_max: 12,
            internal_ref_share: 0.7,
            missing_date_rate: 0.12,
            day_precision_rate: 0.45,
            month_precision_rate: 0.25,
            external_year_rate: 0.6,
            doiless_ref_rate: 0.15,
            duplicate_ref_rate: 0.2,
            doiless_item_rate: 0.03,
            invalid_id_rate: 0.08,
            junk_year_rate: 0.05,
            issn_pool: 12,
            issns_per_work_max: 2,
            orcid_pool: 40,
            authors_per_work_max: 4,
            orcid_rate: 0.5,
            prefixes: vec!["1186".into(), "1016".into(), "1007".into(), "1021".into(), "9999".into()],
        }
    }
}

fn mix(seed: u64, i: u64, stream: u64) -> u64 {
    let mut x = seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn attr_rng(cfg: &DumpConfig, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(cfg.seed, i as u64, 1))
}

fn ref_rng(cfg: &DumpConfig, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(cfg.seed, i as u64, 2))
}

/// The DOI of indexed work `i`.
pub fn indexed_doi(cfg: &DumpConfig, i: usize) -> String {
    let reg = &cfg.prefixes[i % cfg.prefixes.len()];
    let h = mix(cfg.seed, i as u64, 3);
    let sep = ['-', '.', '_', '(', ')'][(h % 5) as usize];
    if sep == '(' {
        format!("10.{reg}/gw({:06})", i)
    } else {
        format!("10.{reg}/gw{sep}{i:06}")
    }
}

/// Draws a work's date as the first values of its attribute stream, so the
/// date is knowable without building the whole item.
fn draw_date(cfg: &DumpConfig, rng: &mut ChaCha8Rng) -> Option<Vec<i64>> {
    if rng.random_bool(cfg.missing_date_rate) {
        return None;
    }
    let year = 1980 + rng.random_range(0..44i64);
    let style = rng.random_range(0.0..1.0);
    if style < cfg.day_precision_rate {
        let month = rng.random_range(1..=12i64);
        let mut day = rng.random_range(1..=31i64);
        if NaiveDate::from_ymd_opt(year as i32, month as u32, day as u32).is_none() {
            day = 28;
        }
        Some(vec![year, month, day])
    } else if style < cfg.day_precision_rate + cfg.month_precision_rate {
        Some(vec![year, rng.random_range(1..=12i64)])
    } else {
        Some(vec![year])
    }
}

/// The publication date of work `i` as date-parts, or `None` for dateless
/// works. Deterministic in `(cfg.seed, i)`.
pub fn work_date_parts(cfg: &DumpConfig, i: usize) -> Option<Vec<i64>> {
    draw_date(cfg, &mut attr_rng(cfg, i))
}

fn pool_issn(cfg: &DumpConfig, p: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, p as u64, 4));
    random_issn(&mut rng)
}

fn pool_orcid(cfg: &DumpConfig, p: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, p as u64, 5));
    random_orcid(&mut rng)
}

/// Flips the check character so the identifier fails validation.
fn corrupt(id: &str) -> String {
    let mut s: Vec<char> = id.chars().collect();
    let last = s.last_mut().unwrap();
    *last = match *last {
        'X' => '0',
        '9' => '8',
        c => char::from(c as u8 + 1),
    };
    s.into_iter().collect()
}

/// Builds item `i` of the dump.
pub fn generate_item(cfg: &DumpConfig, i: usize) -> Value {
    let mut rng = attr_rng(cfg, i);
    let date = draw_date(cfg, &mut rng);

    let mut item = serde_json::Map::new();
    if rng.random_bool(cfg.doiless_item_rate) {
        item.insert("title".into(), json!(["Record without identifier"]));
        item.insert("type".into(), json!("journal-article"));
        return Value::Object(item);
    }
    item.insert("DOI".into(), json!(indexed_doi(cfg, i)));
    item.insert("type".into(), json!("journal-article"));
    match &date {
        Some(parts) => {
            item.insert("issued".into(), json!({ "date-parts": [parts] }));
        }
        None => {
            // Crossref emits [[null]] for unknown dates about as often as it
            // omits the field; cover both.
            if rng.random_bool(0.5) {
                item.insert("issued".into(), json!({ "date-parts": [[null]] }));
            }
        }
    }

    let issn_count = rng.random_range(0..=cfg.issns_per_work_max);
    if issn_count > 0 {
        let mut issns = Vec::new();
        for _ in 0..issn_count {
            let mut s = pool_issn(cfg, rng.random_range(0..cfg.issn_pool));
            if rng.random_bool(cfg.invalid_id_rate) {
                s = corrupt(&s);
            }
            issns.push(s);
        }
        item.insert("ISSN".into(), json!(issns));
    }

    let author_count = rng.random_range(1..=cfg.authors_per_work_max);
    let mut authors = Vec::new();
    for a in 0..author_count {
        let mut author = serde_json::Map::new();
        author.insert("family".into(), json!(format!("Author{:02}", mix(cfg.seed, i as u64, 6 + a as u64) % 100)));
        author.insert("given".into(), json!("G."));
        if rng.random_bool(cfg.orcid_rate) {
            let mut orcid = pool_orcid(cfg, rng.random_range(0..cfg.orcid_pool));
            if rng.random_bool(cfg.invalid_id_rate) {
                orcid = corrupt(&orcid);
            }
            let rendered = match rng.random_range(0..3) {
                0 => orcid,
                1 => format!("http://orcid.org/{orcid}"),
                _ => format!("https://orcid.org/{orcid}"),
            };
            author.insert("ORCID".into(), json!(rendered));
        }
        authors.push(Value::Object(author));
    }
    item.insert("author".into(), Value::Array(authors));

    let mut refs: Vec<Value> = Vec::new();
    let mut rrng = ref_rng(cfg, i);
    let n = rrng.random_range(cfg.refs_min..=cfg.refs_max);
    for k in 0..n {
        let mut entry = serde_json::Map::new();
        entry.insert("key".into(), json!(format!("ref{k}")));
        if rrng.random_bool(cfg.doiless_ref_rate) {
            entry.insert("unstructured".into(), json!("An untraceable reference."));
            refs.push(Value::Object(entry));
            continue;
        }
        if rrng.random_bool(cfg.internal_ref_share) {
            let j = rrng.random_range(0..cfg.works);
            entry.insert("DOI".into(), json!(indexed_doi(cfg, j)));
            if rrng.random_bool(0.5) {
                if rrng.random_bool(cfg.junk_year_rate) {
                    entry.insert("year".into(), json!("n.d."));
                } else if let Some(parts) = work_date_parts(cfg, j) {
                    let mut year = parts[0];
                    if rrng.random_bool(0.3) {
                        year += rrng.random_range(-1..=1i64);
                    }
                    let rendered: Value = if rrng.random_bool(0.5) {
                        json!(year)
                    } else {
                        json!(year.to_string())
                    };
                    entry.insert("year".into(), rendered);
                }
            }
        } else {
            let ext = mix(cfg.seed, (i * 1000 + k) as u64, 7) % 50_000;
            entry.insert("DOI".into(), json!(format!("10.5555/ext{ext:05}")));
            if rrng.random_bool(cfg.external_year_rate) {
                let year = 1900 + (ext % 120) as i64;
                let rendered: Value = if rrng.random_bool(0.5) {
                    json!(year)
                } else {
                    json!(year.to_string())
                };
                entry.insert("year".into(), rendered);
            }
        }
        refs.push(Value::Object(entry));
    }
    if !refs.is_empty() && rrng.random_bool(cfg.duplicate_ref_rate) {
        let dup = refs[rrng.random_range(0..refs.len())].clone();
        refs.push(dup);
    }
    item.insert("reference".into(), Value::Array(refs));
    Value::Object(item)
}

/// All items, materialized. Fine for desk-scale corpora.
pub fn generate_items(cfg: &DumpConfig) -> Vec<Value> {
    (0..cfg.works).map(|i| generate_item(cfg, i)).collect()
}

/// Streams the corpus into `files` dump files under `dir`, named
/// `dump-NNN.json[.gz]`, each an `{"items": [...]}` object. Constant memory
/// regardless of corpus size.
pub fn write_dump(dir: &Path, cfg: &DumpConfig, files: usize, gzip: bool) -> io::Result<Vec<PathBuf>> {
    assert!(files > 0);
    fs::create_dir_all(dir)?;
    let per_file = cfg.works.div_ceil(files);
    let mut paths = Vec::new();
    for f in 0..files {
        let start = f * per_file;
        let end = ((f + 1) * per_file).min(cfg.works);
        if start >= end && f > 0 {
            break;
        }
        let name = if gzip {
            format!("dump-{f:03}.json.gz")
        } else {
            format!("dump-{f:03}.json")
        };
        let path = dir.join(name);
        let file = File::create(&path)?;
        let mut sink: Box<dyn Write> = if gzip {
            Box::new(BufWriter::new(GzEncoder::new(file, Compression::fast())))
        } else {
            Box::new(BufWriter::new(file))
        };
        sink.write_all(b"{\"items\": [")?;
        for i in start..end {
            if i > start {
                sink.write_all(b",\n")?;
            }
            serde_json::to_writer(&mut sink, &generate_item(cfg, i))?;
        }
        sink.write_all(b"]}\n")?;
        sink.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes one `{"items": [...]}` file from already-materialized items.
pub fn write_items_file(path: &Path, items: &[Value], gzip: bool) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file = File::create(path)?;
    let mut sink: Box<dyn Write> = if gzip {
        Box::new(BufWriter::new(GzEncoder::new(file, Compression::fast())))
    } else {
        Box::new(BufWriter::new(file))
    };
    sink.write_all(b"{\"items\": [")?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            sink.write_all(b",\n")?;
        }
        serde_json::to_writer(&mut sink, item)?;
    }
    sink.write_all(b"]}\n")?;
    sink.flush()
}

/// Corpus with exact planted statistics: `citations` works each citing one
/// distinct counterpart, the first `journal_sc` pairs sharing an ISSN, the
/// first `author_sc` pairs sharing an ORCID. All dates present.
#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub seed: u64,
    pub citations: usize,
    pub journal_sc: usize,
    pub author_sc: usize,
    pub prefixes: Vec<String>,
}

pub fn planted_items(cfg: &PlantedConfig) -> Vec<Value> {
    assert!(cfg.journal_sc <= cfg.citations && cfg.author_sc <= cfg.citations);
    let mut items = Vec::with_capacity(cfg.citations * 2);
    let reg = |k: usize| &cfg.prefixes[k % cfg.prefixes.len()];
    for k in 0..cfg.citations {
        let citing_doi = format!("10.{}/pc{k:05}", reg(k));
        let cited_doi = format!("10.{}/pd{k:05}", reg(k + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, k as u64, 8));
        let (shared_issn, shared_orcid) = (random_issn(&mut rng), random_orcid(&mut rng));
        let (solo_a, solo_b) = (random_issn(&mut rng), random_issn(&mut rng));
        let citing_year = 2010 + (k % 8) as i64;
        let cited_year = 2005 + (k % 5) as i64;

        let issns_citing = if k < cfg.journal_sc {
            vec![shared_issn.clone()]
        } else {
            vec![solo_a]
        };
        let issns_cited = if k < cfg.journal_sc {
            vec![shared_issn]
        } else {
            vec![solo_b]
        };
        let author_citing = if k < cfg.author_sc {
            json!([{ "family": "Shared", "given": "A.", "ORCID": shared_orcid }])
        } else {
            json!([{ "family": "Solo", "given": "C." }])
        };
        let author_cited = if k < cfg.author_sc {
            json!([{ "family": "Shared", "given": "A.", "ORCID": shared_orcid }])
        } else {
            json!([{ "family": "Solo", "given": "D." }])
        };

        items.push(json!({
            "DOI": citing_doi,
            "type": "journal-article",
            "issued": { "date-parts": [[citing_year, 3, 14]] },
            "ISSN": issns_citing,
            "author": author_citing,
            "reference": [{ "key": "r0", "DOI": cited_doi }],
        }));
        items.push(json!({
            "DOI": cited_doi,
            "type": "journal-article",
            "issued": { "date-parts": [[cited_year, 6, 2]] },
            "ISSN": issns_cited,
            "author": author_cited,
            "reference": [],
        }));
    }
    items
}

/// The worked-example fixture: the well-known citing/cited article pair plus
/// companions exercising author self-citation, multiple citers, and a
/// dateless citer.
pub fn example_items() -> Vec<Value> {
    vec![
        json!({
            "DOI": "10.1186/1756-8722-6-59",
            "type": "journal-article",
            "issued": { "date-parts": [[2013]] },
            "ISSN": ["1756-8722"],
            "author": [{ "family": "Cersosimo", "given": "U." }],
            "reference": [
                { "key": "r1", "DOI": "10.1186/1756-8722-5-31", "year": "2012" },
                { "key": "r2", "unstructured": "No identifier here." }
            ],
        }),
        json!({
            "DOI": "10.1186/1756-8722-5-31",
            "type": "journal-article",
            "issued": { "date-parts": [[2012]] },
            "ISSN": ["1756-8722"],
            "author": [{ "family": "Peinado", "given": "H." }],
            "reference": [],
        }),
        json!({
            "DOI": "10.1016/j.cell.2019.0101",
            "type": "journal-article",
            "issued": { "date-parts": [[2019, 1]] },
            "ISSN": ["0092-8674"],
            "author": [{ "family": "Shared", "given": "S.", "ORCID": "https://orcid.org/0000-0003-0530-4305" }],
            "reference": [{ "key": "r1", "DOI": "10.1007/s00018-018-2862-4" }],
        }),
        json!({
            "DOI": "10.1007/s00018-018-2862-4",
            "type": "journal-article",
            "issued": { "date-parts": [[2018, 6, 5]] },
            "ISSN": ["1420-682X"],
            "author": [{ "family": "Shared", "given": "S.", "ORCID": "0000-0003-0530-4305" }],
            "reference": [],
        }),
        json!({
            "DOI": "10.1021/acs.jpcb.2020.777",
            "type": "journal-article",
            "issued": { "date-parts": [[2020, 2, 29]] },
            "ISSN": ["1520-6106"],
            "author": [{ "family": "Third", "given": "T." }],
            "reference": [{ "key": "r1", "DOI": "10.1186/1756-8722-5-31", "year": 2012 }],
        }),
        json!({
            "DOI": "10.9999/undated.2021",
            "type": "journal-article",
            "author": [{ "family": "Fourth", "given": "F." }],
            "reference": [{ "key": "r1", "DOI": "10.1186/1756-8722-5-31" }],
        }),
    ]
}

/// Publisher labels for the example fixture's prefixes, as `prefix,label`
/// CSV text. `10.9999` is deliberately unmapped.
pub fn example_prefix_map() -> &'static str {
    "prefix,label\n10.1186,BioMed Central\n10.1016,Elsevier\n10.1007,Springer\n10.1021,ACS\n10.5555,Example House\n"
}
