//! Oracle calendar arithmetic: timespans computed by brute-force month
//! stepping with chrono, and an independent ISO 8601 duration formatter.

use chrono::{Datelike, NaiveDate};

/// A date as year + optional month + optional day; the oracle's own partial
/// date shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleDate {
    pub year: i32,
    pub month: Option<u32>,
    pub day: Option<u32>,
}

impl OracleDate {
    /// Interprets a Crossref-style date-parts row with the truncate-at-zero
    /// rule; `None` when there is no usable year or a component is invalid.
    pub fn from_parts(parts: &[i64]) -> Option<OracleDate> {
        let &year = parts.first()?;
        if !(1..=9999).contains(&year) {
            return None;
        }
        let year = year as i32;
        let month = match parts.get(1).copied().unwrap_or(0) {
            0 => return Some(OracleDate { year, month: None, day: None }),
            m if (1..=12).contains(&m) => m as u32,
            _ => return None,
        };
        let day = match parts.get(2).copied().unwrap_or(0) {
            0 => return Some(OracleDate { year, month: Some(month), day: None }),
            d if d >= 1 => d as u32,
            _ => return None,
        };
        // chrono validates the day against the month length
        NaiveDate::from_ymd_opt(year, month, day)?;
        Some(OracleDate { year, month: Some(month), day: Some(day) })
    }

    pub fn precision(&self) -> u8 {
        match (self.month, self.day) {
            (None, _) => 0,
            (Some(_), None) => 1,
            _ => 2,
        }
    }

    pub fn render(&self) -> String {
        match (self.month, self.day) {
            (Some(m), Some(d)) => format!("{:04}-{m:02}-{d:02}", self.year),
            (Some(m), None) => format!("{:04}-{m:02}", self.year),
            _ => format!("{:04}", self.year),
        }
    }
}

/// Resolves a (year, month, day) where the day may overflow the month: the
/// excess spills into the following month (2020-02-31 resolves to 2020-03-02).
fn resolve_with_spill(year: i32, month: u32, day: u32) -> NaiveDate {
    let len = month_len(year, month);
    if day <= len {
        NaiveDate::from_ymd_opt(year, month, day).unwrap()
    } else {
        let (mut y2, mut m2) = (year, month + 1);
        if m2 > 12 {
            m2 = 1;
            y2 += 1;
        }
        NaiveDate::from_ymd_opt(y2, m2, day - len).unwrap()
    }
}

/// Adds whole years, then whole months, to an anchor date; each stage
/// resolves day overflow by spilling. Always computed from the anchor, so
/// repeated calls never accumulate drift.
fn add_staged(anchor: NaiveDate, years: u32, months: u32) -> NaiveDate {
    let with_years = resolve_with_spill(anchor.year() + years as i32, anchor.month(), anchor.day());
    let total = with_years.month() as i32 - 1 + months as i32;
    let (y2, m2) = (with_years.year() + total / 12, (total % 12 + 1) as u32);
    resolve_with_spill(y2, m2, with_years.day())
}

fn month_len(year: i32, month: u32) -> u32 {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    };
    next.unwrap()
        .signed_duration_since(NaiveDate::from_ymd_opt(year, month, 1).unwrap())
        .num_days() as u32
}

/// The timespan between two partial dates as its canonical ISO text, or
/// `None` when either date is absent. Truncates to the common precision,
/// then counts whole months by stepping and leftover days with chrono.
pub fn oracle_timespan(citing: Option<OracleDate>, cited: Option<OracleDate>) -> Option<String> {
    let (citing, cited) = (citing?, cited?);
    let precision = citing.precision().min(cited.precision());
    let key = |d: &OracleDate| match precision {
        0 => (d.year, 0, 0),
        1 => (d.year, d.month.unwrap(), 0),
        _ => (d.year, d.month.unwrap(), d.day.unwrap()),
    };
    let (a, b) = (key(&cited), key(&citing));
    let negative = b < a;
    let (lo, hi) = if negative { (b, a) } else { (a, b) };
    let (years, months, days) = match precision {
        0 => ((hi.0 - lo.0) as u32, 0, 0),
        1 => {
            let total = (hi.0 - lo.0) * 12 + hi.1 as i32 - lo.1 as i32;
            ((total / 12) as u32, (total % 12) as u32, 0)
        }
        _ => {
            let anchor = NaiveDate::from_ymd_opt(lo.0, lo.1, lo.2).unwrap();
            let target = NaiveDate::from_ymd_opt(hi.0, hi.1, hi.2).unwrap();
            // largest whole-month count whose anchored addition stays at or
            // before the target; the answer is within a few of the raw
            // year/month estimate, so only a small window needs checking
            let estimate = (hi.0 - lo.0) * 12 + hi.1 as i32 - lo.1 as i32;
            let mut best: Option<(i32, NaiveDate)> = None;
            for k in (estimate - 3).max(0)..=(estimate + 1).max(0) {
                let candidate = add_staged(anchor, (k / 12) as u32, (k % 12) as u32);
                if candidate <= target {
                    best = Some((k, candidate));
                }
            }
            let (k, reached) = best.expect("estimate window always brackets the answer");
            let days = target.signed_duration_since(reached).num_days() as u32;
            ((k / 12) as u32, (k % 12) as u32, days)
        }
    };
    Some(render_duration(negative, years, months, days))
}

/// ISO 8601 Y/M/D duration text; zero components omitted, zero span "P0Y",
/// zero never negative.
pub fn render_duration(negative: bool, years: u32, months: u32, days: u32) -> String {
    if (years, months, days) == (0, 0, 0) {
        return "P0Y".to_string();
    }
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push('P');
    if years > 0 {
        out.push_str(&format!("{years}Y"));
    }
    if months > 0 {
        out.push_str(&format!("{months}M"));
    }
    if days > 0 {
        out.push_str(&format!("{days}D"));
    }
    out
}
