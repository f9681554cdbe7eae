//! Pause-based segmentation into inter-pausal units (IPUs).

use serde::{Deserialize, Serialize};

use crate::corpus::Transcript;
use crate::error::{invalid, Result};

/// Pause thresholds used in the reference experiments, in milliseconds.
pub const STANDARD_THRESHOLDS_MS: [u64; 3] = [150, 300, 500];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ipu {
    pub tokens: Vec<String>,
    /// Present only when every token of the IPU came pre-tagged.
    pub pos_tags: Option<Vec<String>>,
    pub start_ms: u64,
    pub end_ms: u64,
    pub para_events: Vec<String>,
    /// Silence before the next IPU; `None` for the last one.
    pub following_pause_ms: Option<u64>,
}

/// Splits between consecutive tokens exactly when the silent gap (next start
/// minus previous end) is strictly greater than `threshold_ms`.
///
/// A marker joins the IPU whose time span contains it; a marker that falls
/// into a pause joins the IPU preceding the pause, and one before the first
/// token joins the first IPU. A transcript with markers but no tokens yields
/// a single token-less IPU.
pub fn segment_into_ipus(transcript: &Transcript, threshold_ms: u64) -> Result<Vec<Ipu>> {
    if threshold_ms == 0 {
        return Err(invalid!("pause threshold must be positive"));
    }
    let tokens = &transcript.tokens;
    let mut ipus: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..tokens.len() {
        let gap = tokens[i].start_ms.saturating_sub(tokens[i - 1].end_ms);
        if gap > threshold_ms {
            ipus.push((start, i));
            start = i;
        }
    }
    if !tokens.is_empty() {
        ipus.push((start, tokens.len()));
    }

    let mut out: Vec<Ipu> = ipus
        .iter()
        .map(|&(a, b)| {
            let slice = &tokens[a..b];
            let pos_tags = slice
                .iter()
                .map(|t| t.pos.clone())
                .collect::<Option<Vec<String>>>();
            Ipu {
                tokens: slice.iter().map(|t| t.text.clone()).collect(),
                pos_tags,
                start_ms: slice[0].start_ms,
                end_ms: slice.iter().map(|t| t.end_ms).max().unwrap_or(slice[0].end_ms),
                para_events: Vec::new(),
                following_pause_ms: None,
            }
        })
        .collect();
    for i in 0..out.len().saturating_sub(1) {
        out[i].following_pause_ms = Some(out[i + 1].start_ms.saturating_sub(out[i].end_ms));
    }

    if out.is_empty() {
        if transcript.markers.is_empty() {
            return Ok(out);
        }
        let first = transcript.markers.iter().map(|m| m.timestamp_ms).min().unwrap_or(0);
        let last = transcript.markers.iter().map(|m| m.timestamp_ms).max().unwrap_or(0);
        out.push(Ipu {
            tokens: Vec::new(),
            pos_tags: None,
            start_ms: first,
            end_ms: last,
            para_events: Vec::new(),
            following_pause_ms: None,
        });
    }
    let mut markers: Vec<_> = transcript.markers.iter().collect();
    markers.sort_by_key(|m| m.timestamp_ms);
    for m in markers {
        let idx = out
            .iter()
            .rposition(|ipu| ipu.start_ms <= m.timestamp_ms)
            .unwrap_or(0);
        out[idx].para_events.push(m.text.clone());
    }
    Ok(out)
}
