//! Open Citation Identifier (OCI) encoding, decoding, parsing and formatting.
//!
//! An OCI is `oci:` followed by two numeral sequences separated by a dash:
//! the citing and the cited entity. Each numeral starts with a supplier
//! prefix naming the source database ("020" = Crossref) and, for DOI-backed
//! suppliers, continues with the DOI suffix encoded two digits per character
//! through a fixed lookup table.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::ids::normalize_doi;

/// Two-digit character table shipped with the crate, as CSV text. Digits map
/// to "00"-"09", lowercase letters to "10"-"35", '/' to "36" and '-' to "63";
/// the remaining DOI punctuation has stable codes assigned in the versioned
/// data file.
pub const LOOKUP_CSV_V1: &str = include_str!("../data/lookup.v1.csv");

#[derive(Debug, Error)]
pub enum OciError {
    #[error("malformed DOI {0:?}: expected \"10.\" followed by a non-empty suffix")]
    MalformedDoi(String),
    #[error("character {0:?} is not in the lookup table")]
    UnmappedCharacter(char),
    #[error("numeral {0:?} does not start with a registered supplier prefix")]
    UnknownSupplier(String),
    #[error("numeral body has odd length, cannot split into two-digit codes")]
    OddLengthBody,
    #[error("code {0:?} is not in the lookup table")]
    UnmappedCode(String),
    #[error("malformed OCI {0:?}: expected two dash-separated digit sequences")]
    MalformedOci(String),
    #[error("supplier {0:?} does not encode an external identifier scheme")]
    UnsupportedScheme(String),
    #[error("{role} DOI: {source}")]
    Role {
        role: CitationRole,
        #[source]
        source: Box<OciError>,
    },
    #[error("invalid lookup table: {0}")]
    InvalidTable(String),
    #[error("invalid supplier registry: {0}")]
    InvalidRegistry(String),
}

/// Which side of the citation an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CitationRole {
    Citing,
    Cited,
}

impl fmt::Display for CitationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CitationRole::Citing => write!(f, "citing"),
            CitationRole::Cited => write!(f, "cited"),
        }
    }
}

/// Bidirectional character <-> two-digit-code table.
///
/// Codes are exactly two decimal digits and the mapping is injective in both
/// directions, so decoding is a fixed-width scan.
#[derive(Debug, Clone)]
pub struct LookupTable {
    by_char: HashMap<char, u8>,
    by_code: [Option<char>; 100],
}

impl LookupTable {
    /// The table embedded in the crate (`lookup.v1.csv`).
    pub fn builtin() -> &'static LookupTable {
        static TABLE: OnceLock<LookupTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            LookupTable::from_csv_reader(LOOKUP_CSV_V1.as_bytes())
                .expect("embedded lookup table is valid")
        })
    }

    /// Loads a table from two-column CSV (`c,code`, header row).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<LookupTable, OciError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = csv
                .headers()
                .map_err(|e| OciError::InvalidTable(e.to_string()))?;
            if headers.len() != 2 || &headers[0] != "c" || &headers[1] != "code" {
                return Err(OciError::InvalidTable(format!(
                    "expected header \"c,code\", got {:?}",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
        let mut by_char = HashMap::new();
        let mut by_code: [Option<char>; 100] = [None; 100];
        for record in csv.records() {
            let record = record.map_err(|e| OciError::InvalidTable(e.to_string()))?;
            if record.len() != 2 {
                return Err(OciError::InvalidTable(format!("row with {} fields", record.len())));
            }
            let mut chars = record[0].chars();
            let (c, extra) = (chars.next(), chars.next());
            let c = match (c, extra) {
                (Some(c), None) => c,
                _ => {
                    return Err(OciError::InvalidTable(format!(
                        "character field {:?} is not a single character",
                        &record[0]
                    )))
                }
            };
            let code_str = &record[1];
            if code_str.len() != 2 || !code_str.bytes().all(|b| b.is_ascii_digit()) {
                return Err(OciError::InvalidTable(format!(
                    "code {code_str:?} is not two decimal digits"
                )));
            }
            let code: u8 = code_str.parse().unwrap();
            if by_char.insert(c, code).is_some() {
                return Err(OciError::InvalidTable(format!("duplicate character {c:?}")));
            }
            if by_code[code as usize].replace(c).is_some() {
                return Err(OciError::InvalidTable(format!("duplicate code {code_str:?}")));
            }
        }
        if by_char.is_empty() {
            return Err(OciError::InvalidTable("empty table".into()));
        }
        Ok(LookupTable { by_char, by_code })
    }

    pub fn code_for(&self, c: char) -> Option<u8> {
        self.by_char.get(&c).copied()
    }

    pub fn char_for(&self, code: u8) -> Option<char> {
        self.by_code.get(code as usize).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_char.is_empty()
    }
}

/// Identifier scheme encoded after a supplier prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdScheme {
    /// DOI suffix encoded through the lookup table; decodable.
    Doi,
    /// Dataset-local numeric identifier; passed through verbatim on decode.
    Local,
}

impl FromStr for IdScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "doi" => Ok(IdScheme::Doi),
            "local" => Ok(IdScheme::Local),
            other => Err(format!("unknown identifier scheme {other:?}")),
        }
    }
}

/// One registered supplier prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplierPrefix {
    digits: String,
    name: String,
    scheme: IdScheme,
}

impl SupplierPrefix {
    pub fn digits(&self) -> &str {
        &self.digits
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scheme(&self) -> IdScheme {
        self.scheme
    }
}

/// Prefix-free registry of supplier prefixes.
///
/// Every prefix is a digit string ending in "0"; no registered prefix may be
/// a proper prefix of another, so stripping the prefix from a numeral is
/// unambiguous.
#[derive(Debug, Clone)]
pub struct SupplierRegistry {
    entries: Vec<SupplierPrefix>,
}

impl SupplierRegistry {
    /// The shipped registry: "020" Crossref (DOI) and "030" OpenCitations
    /// Corpus (local identifiers).
    pub fn builtin() -> &'static SupplierRegistry {
        static REGISTRY: OnceLock<SupplierRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut reg = SupplierRegistry::empty();
            reg.register("020", "Crossref", IdScheme::Doi).unwrap();
            reg.register("030", "OpenCitations Corpus", IdScheme::Local).unwrap();
            reg
        })
    }

    pub fn empty() -> SupplierRegistry {
        SupplierRegistry { entries: Vec::new() }
    }

    pub fn register(&mut self, digits: &str, name: &str, scheme: IdScheme) -> Result<(), OciError> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(OciError::InvalidRegistry(format!(
                "prefix {digits:?} is not a non-empty digit string"
            )));
        }
        if !digits.ends_with('0') {
            return Err(OciError::InvalidRegistry(format!(
                "prefix {digits:?} does not end in \"0\""
            )));
        }
        for existing in &self.entries {
            if existing.digits == digits {
                return Err(OciError::InvalidRegistry(format!("duplicate prefix {digits:?}")));
            }
            if digits.starts_with(&existing.digits) || existing.digits.starts_with(digits) {
                return Err(OciError::InvalidRegistry(format!(
                    "prefix {digits:?} overlaps registered prefix {:?}",
                    existing.digits
                )));
            }
        }
        self.entries.push(SupplierPrefix {
            digits: digits.to_string(),
            name: name.to_string(),
            scheme,
        });
        Ok(())
    }

    /// Loads a registry from three-column CSV (`prefix,name,scheme`, header
    /// row; scheme is `doi` or `local`).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<SupplierRegistry, OciError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut reg = SupplierRegistry::empty();
        for record in csv.records() {
            let record = record.map_err(|e| OciError::InvalidRegistry(e.to_string()))?;
            if record.len() != 3 {
                return Err(OciError::InvalidRegistry(format!("row with {} fields", record.len())));
            }
            let scheme = record[2]
                .parse::<IdScheme>()
                .map_err(OciError::InvalidRegistry)?;
            reg.register(&record[0], &record[1], scheme)?;
        }
        if reg.entries.is_empty() {
            return Err(OciError::InvalidRegistry("empty registry".into()));
        }
        Ok(reg)
    }

    pub fn get(&self, digits: &str) -> Option<&SupplierPrefix> {
        self.entries.iter().find(|p| p.digits == digits)
    }

    /// The registered prefix the numeral starts with, if any. At most one can
    /// match because the registry is prefix-free.
    pub fn match_numeral(&self, numeral: &str) -> Option<&SupplierPrefix> {
        self.entries.iter().find(|p| numeral.starts_with(&p.digits))
    }

    pub fn entries(&self) -> &[SupplierPrefix] {
        &self.entries
    }
}

/// A validated OCI: two non-empty digit strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Oci {
    citing: String,
    cited: String,
}

impl Oci {
    pub fn new(citing: impl Into<String>, cited: impl Into<String>) -> Result<Oci, OciError> {
        let (citing, cited) = (citing.into(), cited.into());
        for numeral in [&citing, &cited] {
            if numeral.is_empty() || !numeral.bytes().all(|b| b.is_ascii_digit()) {
                return Err(OciError::MalformedOci(format!("{citing}-{cited}")));
            }
        }
        Ok(Oci { citing, cited })
    }

    pub fn citing_numeral(&self) -> &str {
        &self.citing
    }

    pub fn cited_numeral(&self) -> &str {
        &self.cited
    }
}

/// Canonical form with the scheme prefix, e.g. `oci:0301-03018`.
impl fmt::Display for Oci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "oci:{}-{}", self.citing, self.cited)
    }
}

impl FromStr for Oci {
    type Err = OciError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_oci(s)
    }
}

/// Parses an OCI with or without the `oci:` scheme prefix.
pub fn parse_oci(text: &str) -> Result<Oci, OciError> {
    let bare = text.strip_prefix("oci:").unwrap_or(text);
    let mut parts = bare.split('-');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(citing), Some(cited), None) => {
            Oci::new(citing, cited).map_err(|_| OciError::MalformedOci(text.to_string()))
        }
        _ => Err(OciError::MalformedOci(text.to_string())),
    }
}

/// Formats an OCI, with the `oci:` scheme prefix or as bare numerals.
pub fn format_oci(oci: &Oci, with_scheme: bool) -> String {
    if with_scheme {
        oci.to_string()
    } else {
        format!("{}-{}", oci.citing, oci.cited)
    }
}

/// Identifier recovered from a numeral.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodedId {
    Doi(String),
    /// Dataset-local identifier, reported verbatim.
    Local(String),
}

impl DecodedId {
    pub fn as_str(&self) -> &str {
        match self {
            DecodedId::Doi(s) | DecodedId::Local(s) => s,
        }
    }
}

/// Encoder/decoder binding a lookup table to a supplier registry.
pub struct OciCodec {
    table: LookupTable,
    registry: SupplierRegistry,
}

impl OciCodec {
    /// Codec over the shipped table and registry.
    pub fn builtin() -> &'static OciCodec {
        static CODEC: OnceLock<OciCodec> = OnceLock::new();
        CODEC.get_or_init(|| OciCodec {
            table: LookupTable::builtin().clone(),
            registry: SupplierRegistry::builtin().clone(),
        })
    }

    pub fn new(table: LookupTable, registry: SupplierRegistry) -> OciCodec {
        OciCodec { table, registry }
    }

    pub fn table(&self) -> &LookupTable {
        &self.table
    }

    pub fn registry(&self) -> &SupplierRegistry {
        &self.registry
    }

    /// Encodes a DOI as a supplier-prefixed numeral. The DOI is normalized
    /// (lowercase, trimmed), the leading "10." is stripped, and each suffix
    /// character becomes its two-digit code.
    pub fn encode_doi(&self, doi: &str, supplier: &str) -> Result<String, OciError> {
        let prefix = self
            .registry
            .get(supplier)
            .ok_or_else(|| OciError::UnknownSupplier(supplier.to_string()))?;
        if prefix.scheme != IdScheme::Doi {
            return Err(OciError::UnsupportedScheme(supplier.to_string()));
        }
        let normalized = normalize_doi(doi);
        let suffix = normalized
            .strip_prefix("10.")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| OciError::MalformedDoi(normalized.clone()))?;
        let mut numeral = String::with_capacity(prefix.digits.len() + suffix.len() * 2);
        numeral.push_str(&prefix.digits);
        for c in suffix.chars() {
            let code = self.table.code_for(c).ok_or(OciError::UnmappedCharacter(c))?;
            numeral.push(char::from(b'0' + code / 10));
            numeral.push(char::from(b'0' + code % 10));
        }
        Ok(numeral)
    }

    /// Strips the supplier prefix and decodes the body. DOI-scheme numerals
    /// decode through the lookup table; local-scheme numerals are returned
    /// verbatim.
    pub fn decode_numeral(&self, numeral: &str) -> Result<(&SupplierPrefix, DecodedId), OciError> {
        if numeral.is_empty() || !numeral.bytes().all(|b| b.is_ascii_digit()) {
            return Err(OciError::MalformedOci(numeral.to_string()));
        }
        let prefix = self
            .registry
            .match_numeral(numeral)
            .ok_or_else(|| OciError::UnknownSupplier(numeral.to_string()))?;
        let body = &numeral[prefix.digits.len()..];
        match prefix.scheme {
            IdScheme::Local => Ok((prefix, DecodedId::Local(body.to_string()))),
            IdScheme::Doi => {
                if body.len() % 2 != 0 {
                    return Err(OciError::OddLengthBody);
                }
                let mut doi = String::with_capacity(3 + body.len() / 2);
                doi.push_str("10.");
                for pair in body.as_bytes().chunks(2) {
                    let code = (pair[0] - b'0') * 10 + (pair[1] - b'0');
                    let c = self
                        .table
                        .char_for(code)
                        .ok_or_else(|| OciError::UnmappedCode(format!("{}{}", pair[0] as char, pair[1] as char)))?;
                    doi.push(c);
                }
                Ok((prefix, DecodedId::Doi(doi)))
            }
        }
    }

    /// Mints the OCI for a citing/cited DOI pair under one supplier.
    pub fn build_oci(&self, citing_doi: &str, cited_doi: &str, supplier: &str) -> Result<Oci, OciError> {
        let citing = self.encode_doi(citing_doi, supplier).map_err(|e| OciError::Role {
            role: CitationRole::Citing,
            source: Box::new(e),
        })?;
        let cited = self.encode_doi(cited_doi, supplier).map_err(|e| OciError::Role {
            role: CitationRole::Cited,
            source: Box::new(e),
        })?;
        Ok(Oci { citing, cited })
    }
}
