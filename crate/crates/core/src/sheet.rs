//! QR payloads printed on exam sheets and routing of scanned pages.
//!
//! Payload grammar, bit-exact:
//!
//! ```text
//! "VK1" "|" exam_id "|" booklet_id "|" page "|" crc
//! ```
//!
//! `exam_id` and `booklet_id` are 1 to 32 characters from `[A-Z0-9_-]`,
//! `page` is a decimal integer >= 1 without leading zeros, and `crc` is the
//! CRC-32/ISO-HDLC of `"VK1|<exam_id>|<booklet_id>|<page>"` as 8 lowercase
//! hex digits. QR image decoding happens upstream; this module sees text.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exam::Exam;
use crate::ids::{BookletId, TaskId};

pub const PAYLOAD_VERSION: &str = "VK1";
pub const MAX_ID_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("{field} {value:?} contains characters outside [A-Z0-9_-]")]
    BadCharset { field: &'static str, value: String },
    #[error("{field} must be 1 to {MAX_ID_LEN} characters, got {len}")]
    BadLength { field: &'static str, len: usize },
    #[error("page must be at least 1")]
    BadPage,
    #[error("malformed payload: {0}")]
    BadFormat(String),
    #[error("checksum mismatch: payload says {found:08x}, content hashes to {expected:08x}")]
    BadChecksum { expected: u32, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QrPayload {
    pub exam_id: String,
    pub booklet_id: BookletId,
    pub page: u32,
    pub crc: u32,
}

pub fn validate_identifier(field: &'static str, value: &str) -> Result<(), CodecError> {
    if value.is_empty() || value.len() > MAX_ID_LEN {
        return Err(CodecError::BadLength { field, len: value.chars().count() });
    }
    if !value.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_' || b == b'-') {
        return Err(CodecError::BadCharset { field, value: value.to_string() });
    }
    Ok(())
}

fn checksum(exam_id: &str, booklet_id: &str, page: u32) -> u32 {
    crc32fast::hash(format!("{PAYLOAD_VERSION}|{exam_id}|{booklet_id}|{page}").as_bytes())
}

pub fn encode_payload(exam_id: &str, booklet_id: &str, page: u32) -> Result<String, CodecError> {
    validate_identifier("exam_id", exam_id)?;
    validate_identifier("booklet_id", booklet_id)?;
    if page == 0 {
        return Err(CodecError::BadPage);
    }
    let crc = checksum(exam_id, booklet_id, page);
    Ok(format!("{PAYLOAD_VERSION}|{exam_id}|{booklet_id}|{page}|{crc:08x}"))
}

pub fn decode_payload(text: &str) -> Result<QrPayload, CodecError> {
    let bad = |msg: &str| CodecError::BadFormat(msg.to_string());
    let fields: Vec<&str> = text.split('|').collect();
    if fields.len() != 5 {
        return Err(bad("expected 5 '|'-separated fields"));
    }
    let [version, exam_id, booklet_id, page, crc] = [fields[0], fields[1], fields[2], fields[3], fields[4]];
    if version != PAYLOAD_VERSION {
        return Err(bad("unknown version tag"));
    }
    validate_identifier("exam_id", exam_id).map_err(|e| CodecError::BadFormat(e.to_string()))?;
    validate_identifier("booklet_id", booklet_id).map_err(|e| CodecError::BadFormat(e.to_string()))?;
    if page.is_empty() || !page.bytes().all(|b| b.is_ascii_digit()) || page.starts_with('0') {
        return Err(bad("page must be a decimal number >= 1 without leading zeros"));
    }
    let page: u32 = page.parse().map_err(|_| bad("page out of range"))?;
    if crc.len() != 8 || !crc.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(bad("checksum must be 8 lowercase hex digits"));
    }
    let found = u32::from_str_radix(crc, 16).map_err(|_| bad("checksum is not hex"))?;
    let expected = checksum(exam_id, booklet_id, page);
    if found != expected {
        return Err(CodecError::BadChecksum { expected, found });
    }
    Ok(QrPayload { exam_id: exam_id.to_string(), booklet_id: BookletId::new(booklet_id), page, crc: found })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanPage {
    pub image_ref: String,
    pub payload_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scan #{0} has an empty image reference")]
pub struct EmptyImageRef(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanBatch {
    pages: Vec<ScanPage>,
    pub ingested_at: DateTime<Utc>,
}

impl ScanBatch {
    pub fn new(pages: Vec<ScanPage>, ingested_at: DateTime<Utc>) -> Result<Self, EmptyImageRef> {
        if let Some(i) = pages.iter().position(|p| p.image_ref.trim().is_empty()) {
            return Err(EmptyImageRef(i));
        }
        Ok(ScanBatch { pages, ingested_at })
    }

    pub fn pages(&self) -> &[ScanPage] {
        &self.pages
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutedPage {
    pub page: u32,
    pub image_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    UndecodablePayload { image_ref: String, payload_text: String, reason: String },
    ForeignExam { image_ref: String, exam_id: String },
    UnknownBooklet { booklet_id: BookletId, page: u32, image_ref: String },
    PageOutOfRange { booklet_id: BookletId, page: u32, image_ref: String },
    DuplicatePage { booklet_id: BookletId, page: u32, image_refs: Vec<String> },
    MissingPage { booklet_id: BookletId, page: u32 },
}

/// Pages grouped per booklet and sorted, plus everything that looked wrong.
/// Duplicates and out-of-range pages stay in the booklet's page list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingResult {
    pub booklets: BTreeMap<BookletId, Vec<RoutedPage>>,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingConfig {
    pub exam_id: String,
    /// Expected pages per booklet; `None` skips missing and out-of-range
    /// page checks.
    pub pages_per_booklet: Option<u32>,
}

/// Groups scans by booklet. `registry` of `None` accepts every booklet id.
/// The result does not depend on the order of pages in the batch.
pub fn route_batch(batch: &ScanBatch, config: &RoutingConfig, registry: Option<&BTreeSet<BookletId>>) -> RoutingResult {
    let mut result = RoutingResult::default();
    for scan in batch.pages() {
        let payload = match decode_payload(&scan.payload_text) {
            Ok(p) => p,
            Err(e) => {
                result.anomalies.push(Anomaly::UndecodablePayload {
                    image_ref: scan.image_ref.clone(),
                    payload_text: scan.payload_text.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if payload.exam_id != config.exam_id {
            result.anomalies.push(Anomaly::ForeignExam { image_ref: scan.image_ref.clone(), exam_id: payload.exam_id });
            continue;
        }
        if registry.is_some_and(|known| !known.contains(&payload.booklet_id)) {
            result.anomalies.push(Anomaly::UnknownBooklet {
                booklet_id: payload.booklet_id,
                page: payload.page,
                image_ref: scan.image_ref.clone(),
            });
            continue;
        }
        if config.pages_per_booklet.is_some_and(|n| payload.page > n) {
            result.anomalies.push(Anomaly::PageOutOfRange {
                booklet_id: payload.booklet_id.clone(),
                page: payload.page,
                image_ref: scan.image_ref.clone(),
            });
        }
        result
            .booklets
            .entry(payload.booklet_id)
            .or_default()
            .push(RoutedPage { page: payload.page, image_ref: scan.image_ref.clone() });
    }
    for (booklet, pages) in result.booklets.iter_mut() {
        pages.sort();
        let mut by_page: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        for p in pages.iter() {
            by_page.entry(p.page).or_default().push(p.image_ref.clone());
        }
        for (&page, refs) in &by_page {
            if refs.len() > 1 {
                result.anomalies.push(Anomaly::DuplicatePage { booklet_id: booklet.clone(), page, image_refs: refs.clone() });
            }
        }
        for page in 1..=config.pages_per_booklet.unwrap_or(0) {
            if !by_page.contains_key(&page) {
                result.anomalies.push(Anomaly::MissingPage { booklet_id: booklet.clone(), page });
            }
        }
    }
    result.anomalies.sort();
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    #[default]
    TopRight,
    BottomLeft,
    BottomRight,
}

/// Task area on a page as `[x0, y0, x1, y1]`, page-relative in `0..=1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRegion {
    pub task_id: TaskId,
    pub bbox: [f64; 4],
}

impl TaskRegion {
    fn overlaps(&self, other: &TaskRegion) -> bool {
        let [ax0, ay0, ax1, ay1] = self.bbox;
        let [bx0, by0, bx1, by1] = other.bbox;
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageTemplate {
    pub page: u32,
    #[serde(default)]
    pub qr_corner: Corner,
    #[serde(default)]
    pub regions: Vec<TaskRegion>,
}

/// Page structure shared by all booklets of an exam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutTemplate {
    pub pages: Vec<PageTemplate>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("no page template available")]
    NoTemplate,
    #[error("invalid page template: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl LayoutTemplate {
    pub fn page_count(&self) -> u32 {
        self.pages.len() as u32
    }

    /// Pages numbered 1..N in order, boxes inside the page, no overlapping
    /// regions on one page, and (when given) only known task ids.
    pub fn validate(&self, tasks: Option<&BTreeSet<TaskId>>) -> Result<(), LayoutError> {
        let invalid = |msg: String| Err(LayoutError::InvalidTemplate(msg));
        if self.pages.is_empty() {
            return Err(LayoutError::NoTemplate);
        }
        for (i, page) in self.pages.iter().enumerate() {
            if page.page as usize != i + 1 {
                return invalid(format!("pages must be numbered 1..N in order, found {} at position {}", page.page, i + 1));
            }
            for region in &page.regions {
                let [x0, y0, x1, y1] = region.bbox;
                let inside = [x0, y0, x1, y1].iter().all(|v| (0.0..=1.0).contains(v));
                if !inside || x0 >= x1 || y0 >= y1 {
                    return invalid(format!("region of {} on page {} is not a box inside the page", region.task_id, page.page));
                }
                if let Some(known) = tasks {
                    if !known.contains(&region.task_id) {
                        return invalid(format!("region on page {} names unknown task {}", page.page, region.task_id));
                    }
                }
            }
            for (a, ra) in page.regions.iter().enumerate() {
                for rb in &page.regions[a + 1..] {
                    if ra.overlaps(rb) {
                        return invalid(format!(
                            "regions of {} and {} overlap on page {}",
                            ra.task_id, rb.task_id, page.page
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Pages whose regions include `task`.
    pub fn pages_of(&self, task: &TaskId) -> Vec<u32> {
        self.pages.iter().filter(|p| p.regions.iter().any(|r| &r.task_id == task)).map(|p| p.page).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLayout {
    pub page: u32,
    pub payload: String,
    pub qr_corner: Corner,
    pub regions: Vec<TaskRegion>,
}

/// Everything an external renderer needs to print one booklet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub exam_id: String,
    pub booklet_id: BookletId,
    pub pages: Vec<PageLayout>,
}

/// One descriptor per booklet. `template` overrides the exam's own layout.
pub fn generate_layout(
    exam: &Exam,
    booklet_ids: &[BookletId],
    template: Option<&LayoutTemplate>,
) -> Result<Vec<LayoutDescriptor>, LayoutError> {
    let template = template.or(exam.layout.as_ref()).ok_or(LayoutError::NoTemplate)?;
    let task_ids: BTreeSet<TaskId> = exam.tasks().map(|t| t.id.clone()).collect();
    template.validate(Some(&task_ids))?;
    booklet_ids
        .iter()
        .map(|booklet| {
            let pages = template
                .pages
                .iter()
                .map(|p| {
                    Ok(PageLayout {
                        page: p.page,
                        payload: encode_payload(&exam.exam_id, booklet.as_str(), p.page)?,
                        qr_corner: p.qr_corner,
                        regions: p.regions.clone(),
                    })
                })
                .collect::<Result<_, LayoutError>>()?;
            Ok(LayoutDescriptor { exam_id: exam.exam_id.clone(), booklet_id: booklet.clone(), pages })
        })
        .collect()
}

/// `B0001`, `B0002`, ... as used for freshly printed booklets.
pub fn sequential_booklet_ids(count: usize) -> Vec<BookletId> {
    let width = count.to_string().len().max(4);
    (1..=count).map(|i| BookletId::new(format!("B{i:0width$}"))).collect()
}
