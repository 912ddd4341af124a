//! Trading-day calendar and aggregation windows.
//!
//! Weekends are skipped; a "month" is 20 trading days and a "quarter" 60.
//! A window covers the calendar range `[start, end)` where `end` is `start`
//! advanced by the span's number of trading days, so consecutive windows of
//! a schedule tile the calendar without gaps or overlap.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

/// Aggregation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Span {
    Day,
    Week,
    Month,
    Quarter,
}

impl Span {
    pub fn trading_days(self) -> u32 {
        match self {
            Span::Day => 1,
            Span::Week => 5,
            Span::Month => 20,
            Span::Quarter => 60,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Span::Day => "day",
            Span::Week => "week",
            Span::Month => "month",
            Span::Quarter => "quarter",
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "day" | "1" => Ok(Span::Day),
            "week" | "5" => Ok(Span::Week),
            "month" | "20" => Ok(Span::Month),
            "quarter" | "60" => Ok(Span::Quarter),
            other => Err(format!("unknown aggregation span `{other}`")),
        }
    }
}

pub fn is_trading_day(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// First trading day on or after `date`.
pub fn next_trading_day(date: NaiveDate) -> NaiveDate {
    let mut d = date;
    while !is_trading_day(d) {
        d = d + Days::new(1);
    }
    d
}

/// Advance by `n` trading days. `date` itself is snapped forward to a
/// trading day first.
pub fn add_trading_days(date: NaiveDate, n: u32) -> NaiveDate {
    let mut d = next_trading_day(date);
    for _ in 0..n {
        d = next_trading_day(d + Days::new(1));
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AggregationWindow {
    pub start: NaiveDate,
    pub span: Span,
}

impl AggregationWindow {
    /// The start is snapped to the next trading day.
    pub fn new(start: NaiveDate, span: Span) -> Self {
        AggregationWindow {
            start: next_trading_day(start),
            span,
        }
    }

    /// Exclusive calendar end: the first trading day of the next window.
    pub fn end(&self) -> NaiveDate {
        add_trading_days(self.start, self.span.trading_days())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.start && date < self.end()
    }

    pub fn next(&self) -> AggregationWindow {
        AggregationWindow {
            start: self.end(),
            span: self.span,
        }
    }

    pub fn year(&self) -> i32 {
        self.start.year()
    }
}

impl fmt::Display for AggregationWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.start, self.span)
    }
}

/// Contiguous, non-overlapping windows starting at `first` and covering
/// every date up to and including `last`.
pub fn schedule(first: NaiveDate, last: NaiveDate, span: Span) -> Vec<AggregationWindow> {
    let mut out = Vec::new();
    let mut w = AggregationWindow::new(first, span);
    while w.start <= last {
        let next = w.next();
        out.push(w);
        w = next;
    }
    out
}
