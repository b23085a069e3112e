//! Minimal RFC 4180 record writing and parsing for the store formats.
//!
//! All store rows are guaranteed newline-free (fields never contain control
//! characters), so one line is always one record. Quoting is applied only
//! when a field contains a comma, quote, CR, or LF.

use std::io::{self, Write};

fn needs_quoting(field: &str) -> bool {
    field.bytes().any(|b| matches!(b, b',' | b'"' | b'\r' | b'\n'))
}

/// Appends one field to `out`, quoting if required.
pub fn push_field(out: &mut String, field: &str) {
    if needs_quoting(field) {
        out.push('"');
        for c in field.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// Renders one record without a line terminator.
pub fn record_string(fields: &[&str]) -> String {
    let mut line = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        push_field(&mut line, f);
    }
    line
}

/// Renders one record as a line, including the trailing LF.
pub fn record_line(fields: &[&str]) -> String {
    let mut line = record_string(fields);
    line.push('\n');
    line
}

/// Writes one record to `w` with a trailing LF.
pub fn write_record<W: Write>(w: &mut W, fields: &[&str]) -> io::Result<()> {
    w.write_all(record_line(fields).as_bytes())
}

/// Splits one newline-free RFC 4180 record into fields. Returns `None` on
/// structurally broken quoting (stray quote, unterminated quoted field).
pub fn parse_record(line: &str) -> Option<Vec<String>> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = line.chars().peekable();
    loop {
        match chars.peek() {
            None => {
                fields.push(field);
                return Some(fields);
            }
            Some('"') => {
                chars.next();
                if !field.is_empty() {
                    return None;
                }
                loop {
                    match chars.next() {
                        None => return None,
                        Some('"') => match chars.peek() {
                            Some('"') => {
                                field.push('"');
                                chars.next();
                            }
                            _ => break,
                        },
                        Some(c) => field.push(c),
                    }
                }
                match chars.next() {
                    None => {
                        fields.push(std::mem::take(&mut field));
                        return Some(fields);
                    }
                    Some(',') => fields.push(std::mem::take(&mut field)),
                    Some(_) => return None,
                }
            }
            Some(_) => loop {
                match chars.next() {
                    None => {
                        fields.push(std::mem::take(&mut field));
                        return Some(fields);
                    }
                    Some(',') => {
                        fields.push(std::mem::take(&mut field));
                        break;
                    }
                    Some('"') => return None,
                    Some(c) => field.push(c),
                }
            },
        }
    }
}
