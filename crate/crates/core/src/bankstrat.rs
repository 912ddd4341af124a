//! Bank inventories and lending/borrowing strategy categories.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classify::largest_remainder;
use crate::netcore::{AggregatedNetwork, BankId};

/// Lending minus borrowing of `bank` on one day; 0 when absent.
pub fn daily_net_balance(net: &AggregatedNetwork, bank: &BankId) -> f64 {
    match net.index_of(bank) {
        Some(i) => net.out_strength(i) - net.in_strength(i),
        None => 0.0,
    }
}

fn is_active(net: &AggregatedNetwork, bank: &BankId) -> bool {
    net.index_of(bank).is_some_and(|i| net.total_degree(i) > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventorySeries {
    pub bank: BankId,
    pub daily_delta: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `max |b(t)|`; `None` when the inventory never leaves zero.
    pub normalizer: Option<f64>,
    /// `b(t) / normalizer`, all zero when there is no normalizer.
    pub normalized: Vec<f64>,
    /// Whether the bank traded on any day.
    pub active: bool,
}

pub fn inventory(days: &[AggregatedNetwork], bank: &BankId) -> InventorySeries {
    let daily_delta: Vec<f64> = days.iter().map(|d| daily_net_balance(d, bank)).collect();
    let cumulative: Vec<f64> = daily_delta
        .iter()
        .scan(0.0, |b, d| {
            *b += d;
            Some(*b)
        })
        .collect();
    let peak = cumulative.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let normalizer = (peak > 0.0).then_some(peak);
    let normalized = match normalizer {
        Some(p) => cumulative.iter().map(|b| b / p).collect(),
        None => vec![0.0; cumulative.len()],
    };
    InventorySeries {
        bank: bank.clone(),
        active: days.iter().any(|d| is_active(d, bank)),
        daily_delta,
        cumulative,
        normalizer,
        normalized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyCategory {
    BB,
    SB,
    SL,
    BL,
    NA,
}

impl StrategyCategory {
    pub const ALL: [StrategyCategory; 5] = [
        StrategyCategory::BB,
        StrategyCategory::SB,
        StrategyCategory::SL,
        StrategyCategory::BL,
        StrategyCategory::NA,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StrategyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type Categorization = BTreeMap<BankId, StrategyCategory>;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Categorize every roster bank by its net balance summed over the period.
///
/// Borrowers (negative balance) above the median absolute borrower balance
/// are big, the rest small; lenders likewise. Banks without any loan are
/// non-active; active banks with a zero balance count as small lenders
/// and stay out of the lender median.
pub fn categorize(period: &[AggregatedNetwork], roster: &[BankId]) -> Categorization {
    let balances: Vec<(BankId, bool, f64)> = roster
        .iter()
        .map(|b| {
            let active = period.iter().any(|d| is_active(d, b));
            let balance = period.iter().map(|d| daily_net_balance(d, b)).sum();
            (b.clone(), active, balance)
        })
        .collect();
    let side_median = |lenders: bool| {
        let mut abs: Vec<f64> = balances
            .iter()
            .filter(|(_, active, x)| *active && if lenders { *x > 0.0 } else { *x < 0.0 })
            .map(|(_, _, x)| x.abs())
            .collect();
        if abs.is_empty() {
            0.0
        } else {
            median(&mut abs)
        }
    };
    let (borrow_median, lend_median) = (side_median(false), side_median(true));
    balances
        .into_iter()
        .map(|(bank, active, x)| {
            let cat = if !active {
                StrategyCategory::NA
            } else if x < 0.0 {
                if -x > borrow_median {
                    StrategyCategory::BB
                } else {
                    StrategyCategory::SB
                }
            } else if x > lend_median {
                StrategyCategory::BL
            } else {
                StrategyCategory::SL
            };
            (bank, cat)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    /// `counts[from][to]` in `StrategyCategory::ALL` order.
    pub counts: [[usize; 5]; 5],
    /// `100 * counts[from][to] / row_counts[from]`, zero for empty rows.
    pub percent: [[f64; 5]; 5],
    pub row_counts: [usize; 5],
}

/// Category moves between two categorizations over their shared banks.
pub fn transition_matrix(before: &Categorization, after: &Categorization) -> TransitionMatrix {
    let mut counts = [[0usize; 5]; 5];
    for (bank, from) in before {
        if let Some(to) = after.get(bank) {
            counts[from.index()][to.index()] += 1;
        }
    }
    let row_counts = counts.map(|row| row.iter().sum());
    let mut percent = [[0.0; 5]; 5];
    for r in 0..5 {
        if row_counts[r] > 0 {
            for c in 0..5 {
                percent[r][c] = 100.0 * counts[r][c] as f64 / row_counts[r] as f64;
            }
        }
    }
    TransitionMatrix {
        counts,
        percent,
        row_counts,
    }
}

impl TransitionMatrix {
    /// CSV with integer percentages (largest remainder, rows sum to 100)
    /// and a trailing `banks` column of per-row counts.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from", "BB", "SB", "SL", "BL", "NA", "banks"])?;
        for (r, cat) in StrategyCategory::ALL.iter().enumerate() {
            let mut rec = vec![cat.to_string()];
            rec.extend(largest_remainder(&self.counts[r]).iter().map(u32::to_string));
            rec.push(self.row_counts[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
