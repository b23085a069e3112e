//! Oracle implementation of the OCI character encoding, driven directly by
//! lookup-table CSV text. Kept deliberately naive: string maps, linear
//! prefix matching, no shared code with the production codec.

use std::collections::HashMap;

/// Parses `c,code` CSV text into forward and reverse maps.
pub fn parse_lookup_csv(csv_text: &str) -> (HashMap<char, String>, HashMap<String, char>) {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());
    let mut forward = HashMap::new();
    let mut reverse = HashMap::new();
    for record in reader.records() {
        let record = record.expect("lookup CSV parses");
        let c = record[0].chars().next().expect("one character");
        let code = record[1].to_string();
        forward.insert(c, code.clone());
        reverse.insert(code, c);
    }
    (forward, reverse)
}

/// Every character the table maps.
pub fn mapped_charset(csv_text: &str) -> Vec<char> {
    let (forward, _) = parse_lookup_csv(csv_text);
    let mut chars: Vec<char> = forward.into_keys().collect();
    chars.sort_unstable();
    chars
}

/// Encodes a DOI as a prefixed numeral; `None` when the DOI is malformed or
/// uses an unmapped character. Lowercases and trims first.
pub fn oracle_encode(csv_text: &str, doi: &str, prefix: &str) -> Option<String> {
    let (forward, _) = parse_lookup_csv(csv_text);
    let doi = doi.trim().to_lowercase();
    let suffix = doi.strip_prefix("10.")?;
    if suffix.is_empty() {
        return None;
    }
    let mut out = prefix.to_string();
    for c in suffix.chars() {
        out.push_str(forward.get(&c)?);
    }
    Some(out)
}

/// Decodes a prefixed numeral back to a DOI; `None` on any irregularity.
pub fn oracle_decode(csv_text: &str, numeral: &str, prefix: &str) -> Option<String> {
    let (_, reverse) = parse_lookup_csv(csv_text);
    let body = numeral.strip_prefix(prefix)?;
    if body.len() % 2 != 0 || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut doi = "10.".to_string();
    for pair in body.as_bytes().chunks(2) {
        let code = std::str::from_utf8(pair).ok()?;
        doi.push(*reverse.get(code)?);
    }
    Some(doi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "c,code\n0,00\n1,01\na,10\n/,36\n-,63\n";

    #[test]
    fn round_trip_on_toy_table() {
        let numeral = oracle_encode(TOY, "10.101/a-1", "020").unwrap();
        assert_eq!(numeral, "02001000136106301");
        assert_eq!(oracle_decode(TOY, &numeral, "020").unwrap(), "10.101/a-1");
    }

    #[test]
    fn unmapped_character_returns_none() {
        assert_eq!(oracle_encode(TOY, "10.1z1", "020"), None);
        assert_eq!(oracle_decode(TOY, "02099", "020"), None);
    }

    #[test]
    fn charset_collects_all_characters() {
        assert_eq!(mapped_charset(TOY), vec!['-', '/', '0', '1', 'a']);
    }
}
