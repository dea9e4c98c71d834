//! Interaction log ingestion and preprocessing.
//!
//! Raw CSV logs are parsed into an [`InteractionLog`], cleaned up
//! (binarization, time-window restriction, duplicate collapse, iterated
//! degree filtering), and finally turned into a dense-indexed
//! [`ItemCatalog`] plus a binary [`SparseUserItemMatrix`].

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped user-item event. `rating` is present for explicit-feedback
/// sources and absent for implicit ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    /// Seconds since epoch, nonnegative.
    pub timestamp: i64,
    pub rating: Option<f64>,
}

/// Declared rating range for explicit-feedback logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

/// Interactions sorted by `(user, timestamp, item)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLog {
    records: Vec<Interaction>,
    scale: Option<RatingScale>,
}

impl InteractionLog {
    /// Build a log, establishing the canonical sort order.
    pub fn new(mut records: Vec<Interaction>, scale: Option<RatingScale>) -> Self {
        records.sort_by(|a, b| {
            (a.user.as_str(), a.timestamp, a.item.as_str()).cmp(&(
                b.user.as_str(),
                b.timestamp,
                b.item.as_str(),
            ))
        });
        InteractionLog { records, scale }
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scale(&self) -> Option<RatingScale> {
        self.scale
    }

    /// Serialize to the canonical CSV format (fixed header and column order,
    /// records in canonical sort order). `parse_interactions` on the output
    /// reproduces the log bit-identically.
    pub fn write_canonical_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("user_id,item_id,rating,timestamp\n");
        for r in &self.records {
            let rating = r.rating.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.user, r.item, rating, r.timestamp
            ));
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Maps CSV header names to interaction fields. `rating` and `timestamp`
/// are optional; a missing timestamp column loads every event at t = 0,
/// which restricts the corpus to non-temporal protocols.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub user: String,
    pub item: String,
    pub timestamp: Option<String>,
    pub rating: Option<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            user: "user_id".into(),
            item: "item_id".into(),
            timestamp: Some("timestamp".into()),
            rating: Some("rating".into()),
        }
    }
}

/// Malformed-row policy: abort with the offending line, or skip and count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub rows_read: u64,
    pub loaded: u64,
    pub skipped: u64,
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &ResolvedColumns,
    scale: Option<RatingScale>,
) -> std::result::Result<Interaction, String> {
    let user = record.get(cols.user).unwrap_or("").trim();
    if user.is_empty() {
        return Err("empty user id".into());
    }
    let item = record.get(cols.item).unwrap_or("").trim();
    if item.is_empty() {
        return Err("empty item id".into());
    }
    let timestamp = match cols.timestamp {
        Some(ix) => {
            let raw = record.get(ix).unwrap_or("").trim();
            let t: i64 = raw
                .parse()
                .map_err(|_| format!("non-integer timestamp `{raw}`"))?;
            if t < 0 {
                return Err(format!("negative timestamp {t}"));
            }
            t
        }
        None => 0,
    };
    let rating = match cols.rating {
        Some(ix) => {
            let raw = record.get(ix).unwrap_or("").trim();
            if raw.is_empty() {
                None
            } else {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("non-numeric rating `{raw}`"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite rating {v}"));
                }
                if let Some(s) = scale {
                    if v < s.min || v > s.max {
                        return Err(format!("rating {v} outside scale [{}, {}]", s.min, s.max));
                    }
                }
                Some(v)
            }
        }
        None => None,
    };
    Ok(Interaction {
        user: user.to_string(),
        item: item.to_string(),
        timestamp,
        rating,
    })
}

struct ResolvedColumns {
    user: usize,
    item: usize,
    timestamp: Option<usize>,
    rating: Option<usize>,
}

/// Load a CSV interaction log. Returns the sorted log plus row counts.
///
/// `scale`, when given, is recorded on the log and out-of-scale ratings are
/// treated as malformed rows.
pub fn parse_interactions(
    path: &Path,
    schema: &ColumnSpec,
    mode: ParseMode,
    scale: Option<RatingScale>,
) -> Result<(InteractionLog, ParseStats)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::MalformedRow {
                line: 1,
                message: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols = ResolvedColumns {
        user: find_column(&headers, &schema.user)?,
        item: find_column(&headers, &schema.item)?,
        timestamp: schema
            .timestamp
            .as_deref()
            .map(|n| find_column(&headers, n))
            .transpose()?,
        rating: schema
            .rating
            .as_deref()
            .and_then(|n| headers.iter().position(|h| h == n)),
    };

    let mut stats = ParseStats::default();
    let mut records = Vec::new();
    for row in reader.records() {
        stats.rows_read += 1;
        let line = stats.rows_read + 1; // header occupies line 1
        let outcome = match row {
            Ok(rec) => {
                let expected = cols
                    .user
                    .max(cols.item)
                    .max(cols.timestamp.unwrap_or(0))
                    .max(cols.rating.unwrap_or(0))
                    + 1;
                if rec.len() < expected {
                    Err(format!(
                        "expected at least {expected} fields, got {}",
                        rec.len()
                    ))
                } else {
                    parse_row(&rec, &cols, scale)
                }
            }
            Err(e) => Err(e.to_string()),
        };
        match outcome {
            Ok(interaction) => {
                stats.loaded += 1;
                records.push(interaction);
            }
            Err(message) => match mode {
                ParseMode::Strict => return Err(Error::MalformedRow { line, message }),
                ParseMode::Lenient => stats.skipped += 1,
            },
        }
    }
    Ok((InteractionLog::new(records, scale), stats))
}

/// Preprocessing knobs. `binarize_threshold = None` treats every interaction
/// as positive feedback (implicit-only sources).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessOpts {
    pub binarize_threshold: Option<f64>,
    pub min_user_deg: usize,
    pub min_item_deg: usize,
    /// Inclusive `[t_start, t_end]` restriction.
    pub window: Option<(i64, i64)>,
}

impl Default for PreprocessOpts {
    fn default() -> Self {
        PreprocessOpts {
            binarize_threshold: None,
            min_user_deg: 5,
            min_item_deg: 5,
            window: None,
        }
    }
}

/// Apply window restriction, positive-feedback binarization, duplicate
/// collapse (earliest timestamp wins), and user/item degree filtering
/// iterated to a fixed point.
pub fn preprocess(log: &InteractionLog, opts: &PreprocessOpts) -> Result<InteractionLog> {
    let mut records: Vec<Interaction> = Vec::with_capacity(log.len());
    for r in log.records() {
        if let Some((lo, hi)) = opts.window {
            if r.timestamp < lo || r.timestamp > hi {
                continue;
            }
        }
        if let Some(threshold) = opts.binarize_threshold {
            let rating = r.rating.ok_or_else(|| {
                Error::ContractViolation(format!(
                    "binarize_threshold set but interaction ({}, {}) has no rating",
                    r.user, r.item
                ))
            })?;
            if rating < threshold {
                continue;
            }
        }
        records.push(r.clone());
    }

    // Collapse duplicate (user, item) pairs onto the earliest timestamp.
    // Records are in (user, timestamp, item) order, so the first occurrence
    // of a pair carries its minimum timestamp.
    let mut seen: HashSet<(&str, &str)> = HashSet::with_capacity(records.len());
    let mut deduped: Vec<Interaction> = Vec::with_capacity(records.len());
    for r in &records {
        if seen.insert((r.user.as_str(), r.item.as_str())) {
            deduped.push(r.clone());
        }
    }

    // Alternate user/item degree filtering until stable.
    let mut current = deduped;
    loop {
        let before = current.len();
        let mut user_deg: HashMap<&str, usize> = HashMap::new();
        for r in &current {
            *user_deg.entry(r.user.as_str()).or_default() += 1;
        }
        let keep_users: HashSet<String> = user_deg
            .iter()
            .filter(|(_, &d)| d >= opts.min_user_deg)
            .map(|(u, _)| u.to_string())
            .collect();
        current.retain(|r| keep_users.contains(&r.user));

        let mut item_deg: HashMap<&str, usize> = HashMap::new();
        for r in &current {
            *item_deg.entry(r.item.as_str()).or_default() += 1;
        }
        let keep_items: HashSet<String> = item_deg
            .iter()
            .filter(|(_, &d)| d >= opts.min_item_deg)
            .map(|(i, _)| i.to_string())
            .collect();
        current.retain(|r| keep_items.contains(&r.item));

        if current.len() == before {
            break;
        }
    }

    if current.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(InteractionLog::new(current, log.scale()))
}

/// Dense item indexing plus per-item first-seen timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCatalog {
    ids: Vec<String>,
    index_of: HashMap<String, usize>,
    first_seen: Vec<i64>,
    t_min: i64,
    t_max: i64,
}

impl ItemCatalog {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    pub fn first_seen(&self) -> &[i64] {
        &self.first_seen
    }

    pub fn t_min(&self) -> i64 {
        self.t_min
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }
}

/// Dense user indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct UserIndex {
    ids: Vec<String>,
    index_of: HashMap<String, usize>,
}

impl UserIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }
}

/// Binary user-item matrix in compressed sparse row form; values are
/// implicitly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUserItemMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseUserItemMatrix {
    pub fn from_rows(cols: usize, rows_items: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows_items.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for items in rows_items {
            debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
            debug_assert!(items.iter().all(|&i| i < cols));
            col_idx.extend_from_slice(items);
            row_ptr.push(col_idx.len());
        }
        SparseUserItemMatrix {
            rows: rows_items.len(),
            cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Item indices of one user row, strictly increasing.
    pub fn row(&self, user: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[user]..self.row_ptr[user + 1]]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Interaction count per item column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for &i in &self.col_idx {
            counts[i] += 1;
        }
        counts
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.row(user).binary_search(&item).is_ok()
    }
}

/// Build dense contiguous user/item indices, per-item first-seen timestamps,
/// and the binary CSR matrix from a preprocessed log.
pub fn build_catalog_and_matrix(
    log: &InteractionLog,
) -> Result<(ItemCatalog, SparseUserItemMatrix, UserIndex)> {
    if log.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut item_ids: Vec<String> = log
        .records()
        .iter()
        .map(|r| r.item.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    item_ids.sort();
    let item_index: HashMap<String, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();

    let mut user_ids: Vec<String> = log
        .records()
        .iter()
        .map(|r| r.user.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    user_ids.sort();
    let user_index: HashMap<String, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(u, id)| (id.clone(), u))
        .collect();

    let mut first_seen = vec![i64::MAX; item_ids.len()];
    let mut rows_items: Vec<Vec<usize>> = vec![Vec::new(); user_ids.len()];
    for r in log.records() {
        let i = item_index[&r.item];
        let u = user_index[&r.user];
        first_seen[i] = first_seen[i].min(r.timestamp);
        rows_items[u].push(i);
    }
    for items in &mut rows_items {
        items.sort_unstable();
        items.dedup();
    }

    let t_min = *first_seen.iter().min().expect("nonempty");
    let t_max = *first_seen.iter().max().expect("nonempty");
    let catalog = ItemCatalog {
        ids: item_ids,
        index_of: item_index,
        first_seen,
        t_min,
        t_max,
    };
    let matrix = SparseUserItemMatrix::from_rows(catalog.len(), &rows_items);
    let users = UserIndex {
        ids: user_ids,
        index_of: user_index,
    };
    Ok((catalog, matrix, users))
}

const CATALOG_TAG: &str = "#temporec-catalog v1";
const USERS_TAG: &str = "#temporec-users v1";
const MATRIX_TAG: &str = "#temporec-csr v1";

/// Write a corpus snapshot: item catalog, user index, and CSR matrix dump,
/// each under a format tag.
pub fn write_snapshot(
    dir: &Path,
    catalog: &ItemCatalog,
    matrix: &SparseUserItemMatrix,
    users: &UserIndex,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };

    let catalog_path = dir.join("catalog.csv");
    let mut out = format!("{CATALOG_TAG}\nitem_id,index,first_seen\n");
    for (i, id) in catalog.ids.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", id, i, catalog.first_seen[i]));
    }
    std::fs::write(&catalog_path, out).map_err(io_err(&catalog_path))?;

    let users_path = dir.join("users.csv");
    let mut out = format!("{USERS_TAG}\nuser_id,index\n");
    for (u, id) in users.ids.iter().enumerate() {
        out.push_str(&format!("{},{}\n", id, u));
    }
    std::fs::write(&users_path, out).map_err(io_err(&users_path))?;

    let matrix_path = dir.join("matrix.csr");
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(&matrix_path).map_err(io_err(&matrix_path))?);
    let write = |f: &mut dyn Write, s: &str| -> std::io::Result<()> { f.write_all(s.as_bytes()) };
    (|| -> std::io::Result<()> {
        write(&mut f, &format!("{MATRIX_TAG}\n"))?;
        write(
            &mut f,
            &format!("{} {} {}\n", matrix.rows, matrix.cols, matrix.nnz()),
        )?;
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        write(&mut f, &join(&matrix.row_ptr))?;
        write(&mut f, "\n")?;
        write(&mut f, &join(&matrix.col_idx))?;
        write(&mut f, "\n")?;
        f.flush()
    })()
    .map_err(io_err(&matrix_path))?;
    Ok(())
}

/// Read back a snapshot written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path) -> Result<(ItemCatalog, SparseUserItemMatrix, UserIndex)> {
    let read = |name: &str| -> Result<String> {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
    };

    let catalog_text = read("catalog.csv")?;
    let mut lines = catalog_text.lines();
    match lines.next() {
        Some(tag) if tag == CATALOG_TAG => {}
        other => return Err(Error::BadFormatTag(other.unwrap_or("<empty>").to_string())),
    }
    lines.next(); // header
    let mut ids = Vec::new();
    let mut first_seen = Vec::new();
    for (n, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::MalformedRow {
                line: n as u64 + 3,
                message: format!("catalog row `{line}`"),
            });
        }
        ids.push(parts[0].to_string());
        first_seen.push(parts[2].parse().map_err(|_| Error::MalformedRow {
            line: n as u64 + 3,
            message: format!("first_seen `{}`", parts[2]),
        })?);
    }
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let index_of = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let t_min = *first_seen.iter().min().expect("nonempty");
    let t_max = *first_seen.iter().max().expect("nonempty");
    let catalog = ItemCatalog {
        ids,
        index_of,
        first_seen,
        t_min,
        t_max,
    };

    let users_text = read("users.csv")?;
    let mut lines = users_text.lines();
    match lines.next() {
        Some(tag) if tag == USERS_TAG => {}
        other => return Err(Error::BadFormatTag(other.unwrap_or("<empty>").to_string())),
    }
    lines.next();
    let ids: Vec<String> = lines
        .map(|l| l.split(',').next().unwrap_or("").to_string())
        .collect();
    let index_of = ids
        .iter()
        .enumerate()
        .map(|(u, id)| (id.clone(), u))
        .collect();
    let users = UserIndex { ids, index_of };

    let matrix_text = read("matrix.csr")?;
    let mut lines = matrix_text.lines();
    match lines.next() {
        Some(tag) if tag == MATRIX_TAG => {}
        other => return Err(Error::BadFormatTag(other.unwrap_or("<empty>").to_string())),
    }
    let parse_usizes = |line: Option<&str>, what: &str| -> Result<Vec<usize>> {
        line.unwrap_or("")
            .split_whitespace()
            .map(|x| {
                x.parse().map_err(|_| Error::MalformedRow {
                    line: 0,
                    message: format!("{what} entry `{x}`"),
                })
            })
            .collect()
    };
    let dims = parse_usizes(lines.next(), "dims")?;
    if dims.len() != 3 {
        return Err(Error::MalformedRow {
            line: 2,
            message: "expected `rows cols nnz`".into(),
        });
    }
    let row_ptr = parse_usizes(lines.next(), "row_ptr")?;
    let col_idx = parse_usizes(lines.next(), "col_idx")?;
    if row_ptr.len() != dims[0] + 1 || col_idx.len() != dims[2] {
        return Err(Error::MalformedRow {
            line: 3,
            message: "CSR layout does not match declared dims".into(),
        });
    }
    let matrix = SparseUserItemMatrix {
        rows: dims[0],
        cols: dims[1],
        row_ptr,
        col_idx,
    };
    Ok((catalog, matrix, users))
}
