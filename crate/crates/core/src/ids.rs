//! Normalization and validation for the identifier schemes the pipeline
//! touches: DOIs, ISSNs (with check digit), and ORCIDs (ISO 7064 MOD 11-2).

/// Normalizes a DOI: trimmed and lowercased. DOIs are case-insensitive and
/// Crossref practice is to lowercase them.
pub fn normalize_doi(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// A normalized DOI is usable by the pipeline if it has the "10." lead-in,
/// a non-empty suffix, and no control characters (which would break the
/// line-oriented store formats).
pub fn is_wellformed_doi(doi: &str) -> bool {
    doi.len() > 3 && doi.starts_with("10.") && !doi.chars().any(|c| c.is_control())
}

/// Returns the registrant prefix of a DOI, i.e. everything before the first
/// slash ("10.1186/1756-8722-6-59" -> "10.1186").
pub fn doi_prefix(doi: &str) -> &str {
    doi.split('/').next().unwrap_or(doi)
}

/// Normalizes an ISSN to the canonical "NNNN-NNNC" uppercase form.
/// Returns `None` when the shape or the check digit is wrong.
pub fn normalize_issn(raw: &str) -> Option<String> {
    let compact: String = raw
        .trim()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if compact.len() != 8 {
        return None;
    }
    let bytes = compact.as_bytes();
    let mut total: u32 = 0;
    for (i, &b) in bytes[..7].iter().enumerate() {
        if !b.is_ascii_digit() {
            return None;
        }
        total += u32::from(b - b'0') * (8 - i as u32);
    }
    let rem = total % 11;
    let want = match (11 - rem) % 11 {
        10 => 'X',
        d => char::from(b'0' + d as u8),
    };
    if char::from(bytes[7]) != want {
        return None;
    }
    Some(format!("{}-{}", &compact[..4], &compact[4..]))
}

/// Normalizes an ORCID to the bare 19-character "NNNN-NNNN-NNNN-NNNC" form,
/// accepting the URL forms Crossref emits. Returns `None` when the shape or
/// the MOD 11-2 check digit is wrong.
pub fn normalize_orcid(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    for prefix in [
        "https://orcid.org/",
        "http://orcid.org/",
        "https://www.orcid.org/",
        "http://www.orcid.org/",
        "orcid.org/",
    ] {
        if let Some(rest) = strip_prefix_ignore_case(s, prefix) {
            s = rest;
            break;
        }
    }
    let compact: String = s
        .chars()
        .filter(|c| *c != '-')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if compact.len() != 16 {
        return None;
    }
    let bytes = compact.as_bytes();
    let mut total: u32 = 0;
    for &b in &bytes[..15] {
        if !b.is_ascii_digit() {
            return None;
        }
        total = (total + u32::from(b - b'0')) * 2;
    }
    let rem = (12 - (total % 11)) % 11;
    let want = match rem {
        10 => 'X',
        d => char::from(b'0' + d as u8),
    };
    if char::from(bytes[15]) != want {
        return None;
    }
    Some(format!(
        "{}-{}-{}-{}",
        &compact[..4],
        &compact[4..8],
        &compact[8..12],
        &compact[12..]
    ))
}

fn strip_prefix_ignore_case<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doi_normalization_lowercases_and_trims() {
        assert_eq!(normalize_doi("  10.1186/1756-8722-6-59 "), "10.1186/1756-8722-6-59");
        assert_eq!(normalize_doi("10.1002/(SICI)1097"), "10.1002/(sici)1097");
    }

    #[test]
    fn doi_wellformedness() {
        assert!(is_wellformed_doi("10.1186/1756-8722-6-59"));
        assert!(!is_wellformed_doi("11.1186/x"));
        assert!(!is_wellformed_doi("10."));
        assert!(!is_wellformed_doi("10.1186/a\nb"));
    }

    #[test]
    fn doi_prefix_extraction() {
        assert_eq!(doi_prefix("10.1007/978-3-030"), "10.1007");
        assert_eq!(doi_prefix("10.1007"), "10.1007");
    }

    #[test]
    fn issn_accepts_valid_checksums() {
        assert_eq!(normalize_issn("1756-8722").as_deref(), Some("1756-8722"));
        assert_eq!(normalize_issn("17568722").as_deref(), Some("1756-8722"));
        // 0378-5955 is the canonical ISSN documentation example.
        assert_eq!(normalize_issn("0378-5955").as_deref(), Some("0378-5955"));
        // X check digit: 2434-561X (valid per the mod-11 rule).
        assert_eq!(normalize_issn("2434-561x").as_deref(), Some("2434-561X"));
    }

    #[test]
    fn issn_rejects_bad_shape_or_checksum() {
        assert_eq!(normalize_issn("1756-8723"), None);
        assert_eq!(normalize_issn("1756-872"), None);
        assert_eq!(normalize_issn("abcd-efgh"), None);
        assert_eq!(normalize_issn(""), None);
    }

    #[test]
    fn orcid_accepts_valid_checksums() {
        assert_eq!(
            normalize_orcid("0000-0003-0530-4305").as_deref(),
            Some("0000-0003-0530-4305")
        );
        assert_eq!(
            normalize_orcid("https://orcid.org/0000-0001-5366-5194").as_deref(),
            Some("0000-0001-5366-5194")
        );
        assert_eq!(
            normalize_orcid("http://orcid.org/0000-0001-5506-523x").as_deref(),
            Some("0000-0001-5506-523X")
        );
    }

    #[test]
    fn orcid_rejects_bad_shape_or_checksum() {
        assert_eq!(normalize_orcid("0000-0003-0530-4306"), None);
        assert_eq!(normalize_orcid("0000-0003-0530"), None);
        assert_eq!(normalize_orcid("not-an-orcid"), None);
    }
}
