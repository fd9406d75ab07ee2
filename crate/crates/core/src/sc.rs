//! Successive-cancellation decoding.
//!
//! The decoder walks the binary tree depth first, left child first. LLRs go
//! down through the min-sum `f` and the `g` update, partial sums come back up
//! through [`combine`]. A pass can stop at any leaf and later resume, or
//! restart at an arbitrary leaf given the decisions before it; both produce
//! exactly the state an uninterrupted pass would have.

use crate::code::{polar_transform, CodeSpec};
use crate::{Bit, Error, Llr, Result};

/// Min-sum check-node update: `sgn(a)·sgn(b)·min(|a|, |b|)`.
#[inline(always)]
pub fn f_op(a: Llr, b: Llr) -> Llr {
    const SIGN: u64 = 1 << 63;
    let m = a.abs().min(b.abs());
    f64::from_bits(m.to_bits() | ((a.to_bits() ^ b.to_bits()) & SIGN))
}

/// Variable-node update: `b + (1 − 2β)·a`.
#[inline(always)]
pub fn g_op(a: Llr, b: Llr, beta_l: Bit) -> Llr {
    b + f64::from_bits(a.to_bits() ^ ((beta_l as u64) << 63))
}

/// Parent partial sums from its children: `(β_l ⊕ β_r, β_r)`.
pub fn combine(beta_l: &[Bit], beta_r: &[Bit]) -> Result<Vec<Bit>> {
    if beta_l.len() != beta_r.len() {
        return Err(Error::ContractViolation(format!(
            "partial sum halves differ in length: {} vs {}",
            beta_l.len(),
            beta_r.len()
        )));
    }
    let mut out: Vec<Bit> = beta_l.iter().zip(beta_r).map(|(l, r)| l ^ r).collect();
    out.extend_from_slice(beta_r);
    Ok(out)
}

/// Per-frame decoder state. One per worker; reused across frames.
///
/// Stage `s` (nodes of `2^s` values) lives at offset `2^s` in each buffer,
/// so the channel LLRs occupy `alpha[N..2N]` and the single leaf LLR sits at
/// `alpha[1]`.
#[derive(Debug, Clone)]
pub struct DecoderWorkspace {
    log2_len: u32,
    alpha: Vec<Llr>,
    /// Partial sums of the most recently completed left child, per stage.
    left: Vec<Bit>,
    /// Partial sums of the right child being folded upward, per stage.
    right: Vec<Bit>,
    leaf_llr: Vec<Llr>,
    u_hat: Vec<Bit>,
    leaf_visits: u64,
    /// Next leaf whose path state is valid, if any.
    cursor: Option<usize>,
    loaded: bool,
}

impl DecoderWorkspace {
    pub fn new(log2_len: u32) -> Self {
        let len = 1usize << log2_len;
        Self {
            log2_len,
            alpha: vec![0.0; 2 * len],
            left: vec![0; 2 * len],
            right: vec![0; 2 * len],
            leaf_llr: vec![0.0; len],
            u_hat: vec![0; len],
            leaf_visits: 0,
            cursor: None,
            loaded: false,
        }
    }

    pub fn for_code(code: &CodeSpec) -> Self {
        Self::new(code.log2_len())
    }

    pub fn len(&self) -> usize {
        1 << self.log2_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Loads channel LLRs and resets the visit counter.
    pub fn load_channel(&mut self, y: &[Llr]) {
        let len = self.len();
        assert_eq!(y.len(), len, "channel LLR length");
        self.alpha[len..].copy_from_slice(y);
        self.leaf_visits = 0;
        self.cursor = None;
        self.loaded = true;
    }

    pub fn channel(&self) -> &[Llr] {
        &self.alpha[self.len()..]
    }

    pub fn u_hat(&self) -> &[Bit] {
        &self.u_hat
    }

    /// Decision LLR seen at each leaf.
    pub fn leaf_llr(&self) -> &[Llr] {
        &self.leaf_llr
    }

    pub fn leaf_visits(&self) -> u64 {
        self.leaf_visits
    }

    /// Root partial sums, i.e. the re-encoded decisions, once the last leaf
    /// has been decided.
    pub fn root_partial_sums(&self) -> Option<&[Bit]> {
        let len = self.len();
        (self.cursor == Some(len)).then(|| &self.right[len..])
    }

    /// Overwrites decisions and leaf LLRs on `[start, start + u.len())`.
    /// Invalidates the resume cursor; the next decode rebuilds its path.
    pub fn restore(&mut self, start: usize, u: &[Bit], llr: &[Llr]) {
        assert_eq!(u.len(), llr.len());
        self.u_hat[start..start + u.len()].copy_from_slice(u);
        self.leaf_llr[start..start + llr.len()].copy_from_slice(llr);
        self.cursor = None;
    }

    /// Decodes leaves `[start, end)`, inverting the hard decision at every
    /// leaf listed in `flips`.
    ///
    /// Decisions before `start` must already be in the workspace (from an
    /// earlier pass or [`restore`](Self::restore)).
    pub fn decode_range(&mut self, code: &CodeSpec, flips: &[usize], start: usize, end: usize) -> Result<()> {
        if let Some(&f) = flips.iter().find(|&&f| f >= code.len() || code.is_frozen(f)) {
            return Err(Error::ContractViolation(format!(
                "forced flip at frozen or out-of-range index {f}"
            )));
        }
        if flips.is_empty() {
            self.run(code, start, end, |_, hard| hard)
        } else {
            self.run(code, start, end, |i, hard| hard ^ flips.contains(&i) as Bit)
        }
    }

    /// Core loop. `decide` maps the thresholded decision at a non-frozen
    /// leaf to the final one.
    pub(crate) fn run<D>(&mut self, code: &CodeSpec, start: usize, end: usize, mut decide: D) -> Result<()>
    where
        D: FnMut(usize, Bit) -> Bit,
    {
        let len = self.len();
        if code.log2_len() != self.log2_len {
            return Err(Error::ContractViolation(format!(
                "workspace for N = {len} used with code of N = {}",
                code.len()
            )));
        }
        if start > end || end > len {
            return Err(Error::ContractViolation(format!(
                "leaf range [{start}, {end}) outside [0, {len})"
            )));
        }
        if !self.loaded {
            return Err(Error::ContractViolation("no channel LLRs loaded".into()));
        }
        if start == end {
            return Ok(());
        }
        if self.cursor != Some(start) {
            self.rebuild_path(start);
        } else {
            self.descend(start);
        }
        for i in start..end {
            if i != start {
                self.descend(i);
            }
            let llr = self.alpha[1];
            self.leaf_llr[i] = llr;
            let bit = if code.is_frozen(i) {
                0
            } else {
                decide(i, (llr < 0.0) as Bit) & 1
            };
            self.u_hat[i] = bit;
            self.leaf_visits += 1;
            self.propagate(i, bit);
        }
        self.cursor = Some(end);
        Ok(())
    }

    /// Computes the path LLRs down to leaf `i`, assuming the state left by
    /// deciding leaf `i − 1`.
    fn descend(&mut self, i: usize) {
        let n = self.log2_len;
        let top = if i == 0 {
            n
        } else {
            let t = i.trailing_zeros();
            self.g_stage(t);
            t
        };
        for s in (0..top).rev() {
            self.f_stage(s);
        }
    }

    /// Recomputes the path to leaf `i` from the root using only the
    /// decisions `u_hat[..i]`.
    fn rebuild_path(&mut self, i: usize) {
        for s in (0..self.log2_len).rev() {
            if (i >> s) & 1 == 1 {
                let h = 1usize << s;
                let base = (i >> (s + 1)) << (s + 1);
                let dst = &mut self.left[h..2 * h];
                dst.copy_from_slice(&self.u_hat[base..base + h]);
                polar_transform(dst);
                self.g_stage(s);
            } else {
                self.f_stage(s);
            }
        }
    }

    #[inline]
    fn f_stage(&mut self, s: u32) {
        let h = 1usize << s;
        let (lo, hi) = self.alpha.split_at_mut(2 * h);
        let child = &mut lo[h..];
        let (pa, pb) = hi[..2 * h].split_at(h);
        for ((c, &a), &b) in child.iter_mut().zip(pa).zip(pb) {
            *c = f_op(a, b);
        }
    }

    #[inline]
    fn g_stage(&mut self, s: u32) {
        let h = 1usize << s;
        let (lo, hi) = self.alpha.split_at_mut(2 * h);
        let child = &mut lo[h..];
        let (pa, pb) = hi[..2 * h].split_at(h);
        let beta = &self.left[h..2 * h];
        for (((c, &a), &b), &bl) in child.iter_mut().zip(pa).zip(pb).zip(beta) {
            *c = g_op(a, b, bl);
        }
    }

    /// Folds the decision at leaf `i` into the partial-sum buffers.
    fn propagate(&mut self, i: usize, bit: Bit) {
        let n = self.log2_len;
        if i & 1 == 0 {
            self.left[1] = bit;
            return;
        }
        self.right[1] = bit;
        for s in 0..n {
            let h = 1usize << s;
            let to_right = s + 1 == n || (i >> (s + 1)) & 1 == 1;
            if to_right {
                let (lo, hi) = self.right.split_at_mut(2 * h);
                fold(&self.left[h..2 * h], &lo[h..], &mut hi[..2 * h]);
            } else {
                let (lo, hi) = self.left.split_at_mut(2 * h);
                fold(&lo[h..], &self.right[h..2 * h], &mut hi[..2 * h]);
                break;
            }
        }
    }
}

/// Writes `(l ⊕ r, r)` into `dst`.
#[inline(always)]
fn fold(l: &[Bit], r: &[Bit], dst: &mut [Bit]) {
    let (a, b) = dst.split_at_mut(l.len());
    for ((d, &x), &y) in a.iter_mut().zip(l).zip(r) {
        *d = x ^ y;
    }
    b.copy_from_slice(r);
}

/// Output of [`sc_decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScOutput {
    pub u_hat: Vec<Bit>,
    pub leaf_llr: Vec<Llr>,
    pub leaf_visits: u64,
}

/// Runs SC from `start_index` to the last leaf.
///
/// With `start_index == 0` the channel LLRs `y` are loaded into `ws`;
/// otherwise `ws` must already hold `y` and valid decisions before
/// `start_index`. `leaf_visits` reports the leaves decided by this call.
pub fn sc_decode(
    code: &CodeSpec,
    y: &[Llr],
    forced_flips: &[usize],
    start_index: usize,
    ws: &mut DecoderWorkspace,
) -> Result<ScOutput> {
    let len = code.len();
    if ws.len() != len {
        return Err(Error::ContractViolation(format!(
            "workspace for N = {}, code has N = {len}",
            ws.len()
        )));
    }
    if y.len() != len {
        return Err(Error::ContractViolation(format!(
            "{} channel LLRs, expected {len}",
            y.len()
        )));
    }
    if start_index >= len {
        return Err(Error::ContractViolation(format!(
            "start index {start_index} out of range"
        )));
    }
    if start_index == 0 {
        ws.load_channel(y);
    } else if !ws.loaded || ws.channel() != y {
        return Err(Error::ContractViolation(
            "restart requires the workspace to hold the same channel LLRs".into(),
        ));
    }
    let before = ws.leaf_visits;
    ws.decode_range(code, forced_flips, start_index, len)?;
    Ok(ScOutput {
        u_hat: ws.u_hat.clone(),
        leaf_llr: ws.leaf_llr.clone(),
        leaf_visits: ws.leaf_visits - before,
    })
}

/// Result of genie-aided decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub success: bool,
    /// Leaves where the genie replaced a wrong decision, ascending.
    pub corrections: Vec<usize>,
    /// Number of corrections: the frame's error order.
    pub error_order: usize,
}

/// SC with a genie that substitutes the true bit wherever the decoder's
/// decision is wrong. CRC bits are treated like any other non-frozen bit.
pub fn sc_oracle_decode(
    code: &CodeSpec,
    y: &[Llr],
    u_true: &[Bit],
    ws: &mut DecoderWorkspace,
) -> Result<OracleOutcome> {
    let len = code.len();
    if y.len() != len || u_true.len() != len {
        return Err(Error::ContractViolation("oracle input lengths".into()));
    }
    if code.frozen_set().iter().any(|&i| u_true[i] != 0) {
        return Err(Error::ContractViolation(
            "true vector has a one at a frozen index".into(),
        ));
    }
    ws.load_channel(y);
    let mut corrections = Vec::new();
    ws.run(code, 0, len, |i, hard| {
        let truth = u_true[i] & 1;
        if hard != truth {
            corrections.push(i);
        }
        truth
    })?;
    Ok(OracleOutcome {
        success: true,
        error_order: corrections.len(),
        corrections,
    })
}
