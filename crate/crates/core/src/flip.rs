//! SC-Flip and partitioned SC-Flip (PSCF) decoding.
//!
//! Both decoders keep the first-pass decisions of the partition being
//! retried. A flip attempt at leaf `f` restores those decisions before `f`
//! and re-decodes only `[f, partition end)`, so its cost is the number of
//! leaves actually re-decided.

use crate::code::{CodeSpec, LeafRole};
use crate::sc::DecoderWorkspace;
use crate::{Bit, Error, Llr, Result};

/// Decoder knobs shared by SC-Flip and PSCF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipOptions {
    /// Flip attempts allowed per partition after the initial pass.
    pub t_max: usize,
    /// Whether CRC-bit leaves may be flipped. On by default.
    pub flip_crc_bits: bool,
}

impl FlipOptions {
    pub fn new(t_max: usize) -> Self {
        Self {
            t_max,
            flip_crc_bits: true,
        }
    }
}

/// Least reliable non-frozen leaves of a range, ascending by `|LLR|`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipCandidateSet {
    entries: Vec<(usize, Llr)>,
}

impl FlipCandidateSet {
    /// Picks up to `t_max` leaves in `[start, end)`. Ties on magnitude go to
    /// the lower index.
    pub fn build(
        code: &CodeSpec,
        leaf_llr: &[Llr],
        start: usize,
        end: usize,
        t_max: usize,
        flip_crc_bits: bool,
    ) -> Self {
        let mut entries: Vec<(usize, Llr)> = (start..end)
            .filter(|&i| match code.role(i) {
                LeafRole::Frozen => false,
                LeafRole::Info => true,
                LeafRole::Crc => flip_crc_bits,
            })
            .map(|i| (i, leaf_llr[i].abs()))
            .collect();
        let by_key = |a: &(usize, Llr), b: &(usize, Llr)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if entries.len() > t_max {
            if t_max == 0 {
                entries.clear();
            } else {
                entries.select_nth_unstable_by(t_max - 1, by_key);
                entries.truncate(t_max);
            }
        }
        entries.sort_by(by_key);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, Llr)] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of a flip decoder on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipResult {
    pub u_hat: Vec<Bit>,
    /// Every partition's CRC passed.
    pub success: bool,
    /// SC passes: one initial pass plus one per flip attempt.
    pub iterations: usize,
    pub flip_attempts: usize,
    /// Leaves decided, re-decisions included.
    pub leaf_visits: u64,
    /// Part of `leaf_visits` spent after an early termination, decoding the
    /// remaining partitions only to complete `u_hat`.
    pub completion_visits: u64,
    /// Partition whose flip budget ran out, which stopped the search.
    pub terminated_early: Option<usize>,
}

impl FlipResult {
    pub fn normalized_complexity(&self, block_len: usize) -> f64 {
        count_complexity(self, block_len)
    }
}

/// Decoding work relative to one plain SC pass.
///
/// Counts the leaves the decoder itself decided: `leaf_visits` minus the
/// completion pass after an early termination, divided by `N`.
pub fn count_complexity(result: &FlipResult, block_len: usize) -> f64 {
    (result.leaf_visits - result.completion_visits) as f64 / block_len as f64
}

/// Classic SC-Flip on a monolithic code.
pub fn sc_flip_decode(code: &CodeSpec, y: &[Llr], opts: FlipOptions, ws: &mut DecoderWorkspace) -> Result<FlipResult> {
    if code.partitions() != 1 {
        return Err(Error::ContractViolation(format!(
            "SC-Flip needs a monolithic code, got {} partitions",
            code.partitions()
        )));
    }
    if code.c() == 0 {
        return Err(Error::ContractViolation("SC-Flip needs a CRC".into()));
    }
    let len = code.len();
    ws.load_channel(y);
    ws.decode_range(code, &[], 0, len)?;
    let mut attempts = 0;
    let mut success = code.crc_passes(0, ws.u_hat());
    if !success && opts.t_max > 0 {
        let first_u = ws.u_hat().to_vec();
        let first_llr = ws.leaf_llr().to_vec();
        let candidates = FlipCandidateSet::build(code, &first_llr, 0, len, opts.t_max, opts.flip_crc_bits);
        for f in candidates.indices() {
            ws.restore(0, &first_u[..f], &first_llr[..f]);
            ws.decode_range(code, &[f], f, len)?;
            attempts += 1;
            if code.crc_passes(0, ws.u_hat()) {
                success = true;
                break;
            }
        }
    }
    Ok(FlipResult {
        u_hat: ws.u_hat().to_vec(),
        success,
        iterations: 1 + attempts,
        flip_attempts: attempts,
        leaf_visits: ws.leaf_visits(),
        completion_visits: 0,
        terminated_early: None,
    })
}

/// Partitioned SC-Flip.
///
/// Partitions are decoded in order, each checked by its own CRC and retried
/// with up to `t_max` single flips chosen among its own leaves. Decisions of
/// earlier partitions are never revisited. When a partition exhausts its
/// budget the search stops; the remaining partitions are decoded once
/// without flips so that a full decision vector exists.
pub fn pscf_decode(code: &CodeSpec, y: &[Llr], opts: FlipOptions, ws: &mut DecoderWorkspace) -> Result<FlipResult> {
    if code.c() == 0 {
        return Err(Error::ContractViolation("PSCF needs per-partition CRCs".into()));
    }
    let len = code.len();
    ws.load_channel(y);
    let mut attempts = 0;
    let mut all_pass = true;
    let mut terminated_early = None;
    let mut completion_visits = 0;
    let mut first_u: Vec<Bit> = Vec::new();
    let mut first_llr: Vec<Llr> = Vec::new();

    for j in 0..code.partitions() {
        let (start, end) = code.partition_bounds(j);
        ws.decode_range(code, &[], start, end)?;
        if code.crc_passes(j, ws.u_hat()) {
            continue;
        }
        if opts.t_max == 0 {
            all_pass = false;
            continue;
        }
        first_u.clear();
        first_u.extend_from_slice(&ws.u_hat()[start..end]);
        first_llr.clear();
        first_llr.extend_from_slice(&ws.leaf_llr()[start..end]);
        let candidates = FlipCandidateSet::build(code, ws.leaf_llr(), start, end, opts.t_max, opts.flip_crc_bits);
        let mut fixed = false;
        for f in candidates.indices() {
            let keep = f - start;
            ws.restore(start, &first_u[..keep], &first_llr[..keep]);
            ws.decode_range(code, &[f], f, end)?;
            attempts += 1;
            if code.crc_passes(j, ws.u_hat()) {
                fixed = true;
                break;
            }
        }
        if !fixed {
            all_pass = false;
            terminated_early = Some(j);
            let before = ws.leaf_visits();
            ws.decode_range(code, &[], end, len)?;
            completion_visits = ws.leaf_visits() - before;
            break;
        }
    }
    Ok(FlipResult {
        u_hat: ws.u_hat().to_vec(),
        success: all_pass,
        iterations: 1 + attempts,
        flip_attempts: attempts,
        leaf_visits: ws.leaf_visits(),
        completion_visits,
        terminated_early,
    })
}
