//! Event-file ingestion and canonical serialization.
//!
//! One CSV per (stock, date), named `<STOCK>_<YYYYMMDD>.csv`, with header
//! `timestamp_us,type,price,quantity,side,buyer_cat,seller_cat,bid,ask`.
//! TRADE rows leave `bid,ask` empty; QUOTE rows leave the trade columns empty.
//! Simultaneous stamps keep file order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{
    DayKey, DayTape, Micros, QuoteEvent, SessionSpec, Side, TradeEvent, TraderCategory,
};

pub const HEADER: [&str; 9] = [
    "timestamp_us",
    "type",
    "price",
    "quantity",
    "side",
    "buyer_cat",
    "seller_cat",
    "bid",
    "ask",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub trades: usize,
    pub quotes: usize,
    /// Category strings that fell back to `OTHER`.
    pub unknown_categories: usize,
}

/// Parse `<STOCK>_<YYYYMMDD>.csv`.
pub fn parse_file_name(path: &Path) -> Result<DayKey> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::FileName(path.display().to_string()))?;
    let stem = name
        .strip_suffix(".csv")
        .ok_or_else(|| Error::FileName(name.to_string()))?;
    let (stock, date) = stem
        .rsplit_once('_')
        .ok_or_else(|| Error::FileName(name.to_string()))?;
    if stock.is_empty() {
        return Err(Error::FileName(name.to_string()));
    }
    let date = date.parse().map_err(|_| Error::FileName(name.to_string()))?;
    Ok(DayKey::new(stock, date))
}

fn positive(field: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{what} {field:?} is not a number"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{what} must be positive, got {field:?}"));
    }
    Ok(v)
}

/// Read and validate one event file.
pub fn ingest_events(path: &Path, session: &SessionSpec) -> Result<(DayTape, IngestReport)> {
    let key = parse_file_name(path)?;
    let text = fs::read(path)?;
    let mut tape = parse_events(&text, path, session)?;
    tape.0.key = Some(key);
    Ok(tape)
}

/// Parse event-file bytes; `origin` is only used for error messages.
pub fn parse_events(
    bytes: &[u8],
    origin: &Path,
    session: &SessionSpec,
) -> Result<(DayTape, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(parse_err(1, format!("unexpected header {:?}", header)));
    }
    let end = session.end();
    let mut tape = DayTape::default();
    let mut report = IngestReport::default();
    let mut prev = i64::MIN;
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let ts: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp {:?}", &rec[0])))?;
        if ts < 0 || ts > end.0 {
            return Err(parse_err(line, format!("timestamp {ts} outside the session")));
        }
        if ts < prev {
            return Err(Error::NonMonotone {
                path: origin.to_path_buf(),
                line,
                prev,
                cur: ts,
            });
        }
        prev = ts;
        let empty = |i: usize| rec[i].trim().is_empty();
        match rec[1].trim() {
            "TRADE" => {
                if !(empty(7) && empty(8)) {
                    return Err(parse_err(line, "TRADE row must leave bid/ask empty".into()));
                }
                let price = positive(&rec[2], "price").map_err(|m| parse_err(line, m))?;
                let quantity = positive(&rec[3], "quantity").map_err(|m| parse_err(line, m))?;
                let side = match rec[4].trim() {
                    "1" | "+1" => Side::Buy,
                    "-1" => Side::Sell,
                    s => return Err(parse_err(line, format!("side must be 1 or -1, got {s:?}"))),
                };
                let (buyer, b_unknown) = TraderCategory::parse_lenient(rec[5].trim());
                let (seller, s_unknown) = TraderCategory::parse_lenient(rec[6].trim());
                report.unknown_categories += (b_unknown && rec[5].trim() != "OTHER") as usize;
                report.unknown_categories += (s_unknown && rec[6].trim() != "OTHER") as usize;
                tape.trades.push(TradeEvent {
                    ts: Micros(ts),
                    price,
                    quantity,
                    side,
                    buyer,
                    seller,
                });
            }
            "QUOTE" => {
                if !(2..=6).all(empty) {
                    return Err(parse_err(line, "QUOTE row must leave trade columns empty".into()));
                }
                let bid = positive(&rec[7], "bid").map_err(|m| parse_err(line, m))?;
                let ask = positive(&rec[8], "ask").map_err(|m| parse_err(line, m))?;
                if ask <= bid {
                    return Err(parse_err(line, format!("ask {ask} must exceed bid {bid}")));
                }
                tape.quotes.push(QuoteEvent {
                    ts: Micros(ts),
                    bid,
                    ask,
                });
            }
            other => return Err(parse_err(line, format!("unknown row type {other:?}"))),
        }
    }
    report.trades = tape.trades.len();
    report.quotes = tape.quotes.len();
    if report.unknown_categories > 0 {
        log::warn!(
            "{}: {} unknown category strings mapped to OTHER",
            origin.display(),
            report.unknown_categories
        );
    }
    Ok((tape, report))
}

fn side_str(s: Side) -> &'static str {
    match s {
        Side::Buy => "1",
        Side::Sell => "-1",
    }
}

/// Canonical serialization: rows ordered by timestamp, quotes before trades
/// at equal stamps, each type in its stored order.
pub fn write_events<W: Write>(tape: &DayTape, mut w: W) -> Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    let (mut qi, mut ti) = (0, 0);
    while qi < tape.quotes.len() || ti < tape.trades.len() {
        let take_quote = match (tape.quotes.get(qi), tape.trades.get(ti)) {
            (Some(q), Some(t)) => q.ts <= t.ts,
            (Some(_), None) => true,
            _ => false,
        };
        if take_quote {
            let q = &tape.quotes[qi];
            writeln!(w, "{},QUOTE,,,,,,{},{}", q.ts.0, q.bid, q.ask)?;
            qi += 1;
        } else {
            let t = &tape.trades[ti];
            writeln!(
                w,
                "{},TRADE,{},{},{},{},{},,",
                t.ts.0,
                t.price,
                t.quantity,
                side_str(t.side),
                t.buyer,
                t.seller
            )?;
            ti += 1;
        }
    }
    Ok(())
}

pub fn write_events_file(tape: &DayTape, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(tape.key().file_name());
    let mut buf = Vec::with_capacity(64 * (tape.trades.len() + tape.quotes.len()) + 64);
    write_events(tape, &mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

/// Load every `<STOCK>_<YYYYMMDD>.csv` in `dir`, in parallel, sorted by key.
pub fn load_dir(dir: &Path, session: &SessionSpec) -> Result<Vec<(DayTape, IngestReport)>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "csv") && parse_file_name(&p).is_ok() {
            paths.push(p);
        }
    }
    paths.sort();
    let mut out: Vec<_> = paths
        .par_iter()
        .map(|p| ingest_events(p, session))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.0.key.cmp(&b.0.key));
    Ok(out)
}
