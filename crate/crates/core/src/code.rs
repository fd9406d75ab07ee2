//! Code construction, frame assembly and polar encoding.
//!
//! Everything is in natural index order: no bit-reversal permutation is
//! applied on either side of the transform.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crc::CrcConfig;
use crate::{Bit, Error, Result};

/// Largest supported `n` (N = 2^n).
pub const MAX_LOG2_LEN: u32 = 24;

// ---------------------------------------------------------------------------
// Gaussian approximation
// ---------------------------------------------------------------------------

/// Below this mean the Chung fit exceeds 1; `ln φ` is linear on `[0, SMALL_MEAN]`.
const SMALL_MEAN: f64 = 0.1;

fn chung_low(x: f64) -> f64 {
    -0.4527 * x.powf(0.86) + 0.0218
}

fn chung_high(x: f64) -> f64 {
    0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
}

/// `ln φ(x)` for the Chung approximation of the density-evolution function.
///
/// The two Chung branches disagree by about 0.025 at `x = 10`; the upper one
/// is shifted to meet the lower so the function stays strictly decreasing.
fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < SMALL_MEAN {
        x / SMALL_MEAN * chung_low(SMALL_MEAN)
    } else if x < 10.0 {
        chung_low(x)
    } else {
        chung_high(x) - chung_high(10.0) + chung_low(10.0)
    }
}

/// Inverse of [`ln_phi`] by bisection; `ln_phi` is strictly decreasing.
fn ln_phi_inv(target: f64) -> f64 {
    if target >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ln_phi(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR of the degraded (check-node) child of a channel with mean `m`:
/// `φ⁻¹(1 − (1 − φ(m))²)`, evaluated in the log domain.
fn degrade(m: f64) -> f64 {
    let lp = ln_phi(m);
    let p = lp.exp();
    ln_phi_inv(lp + (2.0 - p).ln())
}

/// Per-index mean LLRs of the `2^n` synthetic channels under the Gaussian
/// approximation, for BPSK over AWGN at `ebn0_db` and code rate `rate`.
pub fn ga_mean_llrs(n: u32, ebn0_db: f64, rate: f64) -> Result<Vec<f64>> {
    if n == 0 || n > MAX_LOG2_LEN {
        return Err(Error::InvalidParameter(format!(
            "log2 length {n} outside 1..={MAX_LOG2_LEN}"
        )));
    }
    if !(rate > 0.0 && rate <= 1.0) || !ebn0_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "design point rate={rate}, ebn0={ebn0_db} dB"
        )));
    }
    let sigma2 = crate::channel::noise_variance(ebn0_db, rate);
    let mut means = vec![2.0 / sigma2];
    for _ in 0..n {
        let mut next = Vec::with_capacity(means.len() * 2);
        for &m in &means {
            next.push(degrade(m));
            next.push(2.0 * m);
        }
        means = next;
    }
    Ok(means)
}

/// Bit-channel indices ordered from least to most reliable.
///
/// Uses Gaussian-approximation density evolution at the design Eb/N0 for a
/// code of the given rate. Ties are broken by ascending index.
pub fn construct_reliability(n: u32, design_ebn0_db: f64, rate: f64) -> Result<Vec<usize>> {
    let means = ga_mean_llrs(n, design_ebn0_db, rate)?;
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    Ok(order)
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

/// Partition end indices for PSCF, each an exclusive upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    rho: Vec<usize>,
    /// Eb/N0 of the error profile the plan was derived from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiled_at_db: Option<f64>,
}

impl PartitionPlan {
    pub fn new(rho: Vec<usize>, block_len: usize) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::planning(None, "empty partition list"));
        }
        let mut prev = 0;
        for (j, &r) in rho.iter().enumerate() {
            if r <= prev {
                return Err(Error::planning(
                    Some(j),
                    format!("partition ends {rho:?} are not strictly increasing from 0"),
                ));
            }
            prev = r;
        }
        if prev != block_len {
            return Err(Error::planning(
                Some(rho.len() - 1),
                format!("last partition ends at {prev}, expected {block_len}"),
            ));
        }
        Ok(Self {
            rho,
            profiled_at_db: None,
        })
    }

    /// A single partition covering the whole block.
    pub fn monolithic(block_len: usize) -> Self {
        Self {
            rho: vec![block_len],
            profiled_at_db: None,
        }
    }

    pub fn with_profile_snr(mut self, ebn0_db: f64) -> Self {
        self.profiled_at_db = Some(ebn0_db);
        self
    }

    pub fn partitions(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[usize] {
        &self.rho
    }

    pub fn profiled_at_db(&self) -> Option<f64> {
        self.profiled_at_db
    }

    /// Leaf range `[start, end)` of partition `j`.
    pub fn bounds(&self, j: usize) -> (usize, usize) {
        let start = if j == 0 { 0 } else { self.rho[j - 1] };
        (start, self.rho[j])
    }

    pub fn crc_bits_per_partition(&self, total_crc: usize) -> Result<usize> {
        let p = self.partitions();
        if !total_crc.is_multiple_of(p) {
            return Err(Error::planning(
                None,
                format!("{p} partitions do not divide {total_crc} CRC bits"),
            ));
        }
        Ok(total_crc / p)
    }
}

/// Role of a leaf (bit-channel) in a code layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafRole {
    Frozen,
    Info,
    Crc,
}

/// An immutable polar code definition.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    log2_len: u32,
    k: usize,
    c: usize,
    design_snr_db: f64,
    reliability: Option<Vec<usize>>,
    roles: Vec<LeafRole>,
    frozen: Vec<usize>,
    info: Vec<usize>,
    crc_positions: Vec<Vec<usize>>,
    partition_info: Vec<Vec<usize>>,
    plan: PartitionPlan,
    has_plan: bool,
    crc: Option<CrcConfig>,
}

/// Builds a code layout.
///
/// Information bits take the `k` most reliable indices regardless of the
/// plan. Each partition then reserves the `c / P` most reliable remaining
/// indices inside its own range for CRC bits; everything else is frozen.
/// Without a plan the whole block is one partition.
pub fn build_code(
    log2_len: u32,
    k: usize,
    c: usize,
    reliability: &[usize],
    plan: Option<PartitionPlan>,
    design_snr_db: f64,
) -> Result<CodeSpec> {
    if log2_len == 0 || log2_len > MAX_LOG2_LEN {
        return Err(Error::InvalidParameter(format!(
            "log2 length {log2_len} outside 1..={MAX_LOG2_LEN}"
        )));
    }
    let len = 1usize << log2_len;
    if k + c > len {
        return Err(Error::InvalidParameter(format!("K + C = {} exceeds N = {len}", k + c)));
    }
    let rank = ranks(reliability, len)?;
    let has_plan = plan.is_some();
    let plan = plan.unwrap_or_else(|| PartitionPlan::monolithic(len));
    if *plan.rho.last().unwrap() != len {
        return Err(Error::planning(None, "plan does not end at N"));
    }
    let crc_per = plan.crc_bits_per_partition(c)?;

    let mut roles = vec![LeafRole::Frozen; len];
    for &i in &reliability[len - k..] {
        roles[i] = LeafRole::Info;
    }
    let mut crc_positions = Vec::with_capacity(plan.partitions());
    for j in 0..plan.partitions() {
        let (start, end) = plan.bounds(j);
        let mut spare: Vec<usize> = (start..end).filter(|&i| roles[i] != LeafRole::Info).collect();
        if spare.len() < crc_per {
            return Err(Error::planning(
                Some(j),
                format!(
                    "range [{start}, {end}) has {} non-information indices, needs {crc_per} for CRC",
                    spare.len()
                ),
            ));
        }
        spare.sort_by_key(|&i| std::cmp::Reverse(rank[i]));
        let mut chosen = spare[..crc_per].to_vec();
        chosen.sort_unstable();
        for &i in &chosen {
            roles[i] = LeafRole::Crc;
        }
        crc_positions.push(chosen);
    }

    let crc = if c > 0 {
        Some(CrcConfig::default_for_width(crc_per)?)
    } else {
        None
    };
    CodeSpec::from_parts(
        log2_len,
        k,
        c,
        design_snr_db,
        Some(reliability.to_vec()),
        roles,
        crc_positions,
        plan,
        has_plan,
        crc,
    )
}

fn ranks(reliability: &[usize], len: usize) -> Result<Vec<usize>> {
    if reliability.len() != len {
        return Err(Error::InvalidParameter(format!(
            "reliability order has {} entries, expected {len}",
            reliability.len()
        )));
    }
    let mut rank = vec![usize::MAX; len];
    for (r, &i) in reliability.iter().enumerate() {
        if i >= len || rank[i] != usize::MAX {
            return Err(Error::InvalidParameter("reliability order is not a permutation".into()));
        }
        rank[i] = r;
    }
    Ok(rank)
}

impl CodeSpec {
    /// Constructs reliabilities by Gaussian approximation at `design_snr_db`
    /// (Eb/N0, rate `k / N`) and builds the layout.
    pub fn construct(
        log2_len: u32,
        k: usize,
        c: usize,
        design_snr_db: f64,
        plan: Option<PartitionPlan>,
    ) -> Result<Self> {
        if log2_len == 0 || log2_len > MAX_LOG2_LEN {
            return Err(Error::InvalidParameter(format!(
                "log2 length {log2_len} outside 1..={MAX_LOG2_LEN}"
            )));
        }
        let len = 1usize << log2_len;
        if k == 0 || k + c > len {
            return Err(Error::InvalidParameter(format!(
                "K = {k}, C = {c} do not fit N = {len}"
            )));
        }
        let reliability = construct_reliability(log2_len, design_snr_db, k as f64 / len as f64)?;
        build_code(log2_len, k, c, &reliability, plan, design_snr_db)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        log2_len: u32,
        k: usize,
        c: usize,
        design_snr_db: f64,
        reliability: Option<Vec<usize>>,
        roles: Vec<LeafRole>,
        crc_positions: Vec<Vec<usize>>,
        plan: PartitionPlan,
        has_plan: bool,
        crc: Option<CrcConfig>,
    ) -> Result<Self> {
        let frozen = indices_with(&roles, LeafRole::Frozen);
        let info = indices_with(&roles, LeafRole::Info);
        let partition_info = (0..plan.partitions())
            .map(|j| {
                let (s, e) = plan.bounds(j);
                info.iter().copied().filter(|&i| i >= s && i < e).collect()
            })
            .collect();
        let code = Self {
            log2_len,
            k,
            c,
            design_snr_db,
            reliability,
            roles,
            frozen,
            info,
            crc_positions,
            partition_info,
            plan,
            has_plan,
            crc,
        };
        code.validate()?;
        Ok(code)
    }

    fn validate(&self) -> Result<()> {
        let len = self.len();
        if self.roles.len() != len {
            return Err(Error::ContractViolation("role vector length".into()));
        }
        if self.info.len() != self.k {
            return Err(Error::ContractViolation(format!(
                "{} information positions, expected K = {}",
                self.info.len(),
                self.k
            )));
        }
        let crc_total: usize = self.crc_positions.iter().map(Vec::len).sum();
        if crc_total != self.c {
            return Err(Error::ContractViolation(format!(
                "{crc_total} CRC positions, expected C = {}",
                self.c
            )));
        }
        if self.crc_positions.len() != self.plan.partitions() {
            return Err(Error::ContractViolation(
                "one CRC position list per partition required".into(),
            ));
        }
        let per = self.plan.crc_bits_per_partition(self.c)?;
        for (j, list) in self.crc_positions.iter().enumerate() {
            let (s, e) = self.plan.bounds(j);
            if list.len() != per {
                return Err(Error::planning(
                    Some(j),
                    format!("{} CRC positions, expected {per}", list.len()),
                ));
            }
            if list.iter().any(|&i| i < s || i >= e || self.roles[i] != LeafRole::Crc) {
                return Err(Error::planning(
                    Some(j),
                    "CRC position outside its partition or overlapping another role",
                ));
            }
        }
        if let Some(cfg) = &self.crc {
            if cfg.width() != per {
                return Err(Error::InvalidParameter(format!(
                    "crc width {} does not match {per} bits per partition",
                    cfg.width()
                )));
            }
        } else if self.c > 0 {
            return Err(Error::ContractViolation("CRC bits without a CRC config".into()));
        }
        Ok(())
    }

    /// Replaces the per-partition CRC polynomial.
    pub fn with_crc(mut self, cfg: CrcConfig) -> Result<Self> {
        self.crc = Some(cfg);
        self.validate()?;
        Ok(self)
    }

    pub fn log2_len(&self) -> u32 {
        self.log2_len
    }

    /// Block length N.
    pub fn len(&self) -> usize {
        1 << self.log2_len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self) -> usize {
        self.c
    }

    /// Information rate K / N.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.len() as f64
    }

    pub fn design_snr_db(&self) -> f64 {
        self.design_snr_db
    }

    pub fn reliability(&self) -> Option<&[usize]> {
        self.reliability.as_deref()
    }

    pub fn role(&self, i: usize) -> LeafRole {
        self.roles[i]
    }

    #[inline]
    pub fn is_frozen(&self, i: usize) -> bool {
        self.roles[i] == LeafRole::Frozen
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen
    }

    pub fn frozen_mask(&self) -> Vec<bool> {
        self.roles.iter().map(|r| *r == LeafRole::Frozen).collect()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    pub fn crc_positions(&self) -> &[Vec<usize>] {
        &self.crc_positions
    }

    pub fn crc_config(&self) -> Option<&CrcConfig> {
        self.crc.as_ref()
    }

    /// The plan; a one-partition plan for monolithic codes.
    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    /// Whether the code was built with an explicit partition plan.
    pub fn has_plan(&self) -> bool {
        self.has_plan
    }

    pub fn partitions(&self) -> usize {
        self.plan.partitions()
    }

    pub fn partition_bounds(&self, j: usize) -> (usize, usize) {
        self.plan.bounds(j)
    }

    /// Information positions inside partition `j`, ascending.
    pub fn partition_info(&self, j: usize) -> &[usize] {
        &self.partition_info[j]
    }

    /// CRC verdict for partition `j` on a decision vector. Always passes when
    /// the code carries no CRC.
    pub fn crc_passes(&self, j: usize, u: &[Bit]) -> bool {
        let Some(cfg) = &self.crc else { return true };
        let remainder = cfg.remainder(self.partition_info[j].iter().map(|&i| u[i]));
        let got = self.crc_positions[j]
            .iter()
            .fold(0u32, |acc, &i| (acc << 1) | u[i] as u32);
        remainder == got
    }

    pub fn all_crc_pass(&self, u: &[Bit]) -> bool {
        (0..self.partitions()).all(|j| self.crc_passes(j, u))
    }

    /// Short stable digest of the layout, used to key cached profiles.
    pub fn code_hash(&self) -> String {
        let json = serde_json::to_vec(&self.to_file()).expect("code file serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    pub fn to_file(&self) -> CodeFile {
        CodeFile {
            n: self.log2_len,
            k: self.k,
            c: self.c,
            design_snr_db: self.design_snr_db,
            frozen: self.frozen.clone(),
            info: self.info.clone(),
            crc: self.crc_positions.clone(),
            rho: self.plan.rho.clone(),
        }
    }

    /// Rebuilds a code from its file form. The CRC polynomial is the default
    /// for the per-partition width.
    pub fn from_file(file: &CodeFile) -> Result<Self> {
        let n = file.n;
        if n == 0 || n > MAX_LOG2_LEN {
            return Err(Error::InvalidParameter(format!(
                "log2 length {n} outside 1..={MAX_LOG2_LEN}"
            )));
        }
        let len = 1usize << n;
        let mut roles: Vec<Option<LeafRole>> = vec![None; len];
        let mut assign = |i: usize, role: LeafRole| -> Result<()> {
            match roles.get_mut(i) {
                Some(slot @ None) => {
                    *slot = Some(role);
                    Ok(())
                }
                Some(Some(_)) => Err(Error::ContractViolation(format!(
                    "index {i} appears in more than one set"
                ))),
                None => Err(Error::ContractViolation(format!("index {i} out of range"))),
            }
        };
        for &i in &file.frozen {
            assign(i, LeafRole::Frozen)?;
        }
        for &i in &file.info {
            assign(i, LeafRole::Info)?;
        }
        for list in &file.crc {
            for &i in list {
                assign(i, LeafRole::Crc)?;
            }
        }
        let roles: Vec<LeafRole> = roles
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::ContractViolation(format!("index {i} is unassigned"))))
            .collect::<Result<_>>()?;
        let plan = PartitionPlan::new(file.rho.clone(), len)?;
        let has_plan = plan.partitions() > 1;
        let per = plan.crc_bits_per_partition(file.c)?;
        let crc = if file.c > 0 {
            Some(CrcConfig::default_for_width(per)?)
        } else {
            None
        };
        let mut crc_positions = file.crc.clone();
        if file.c == 0 && crc_positions.is_empty() {
            crc_positions = vec![Vec::new(); plan.partitions()];
        }
        for list in &mut crc_positions {
            list.sort_unstable();
        }
        Self::from_parts(
            n,
            file.k,
            file.c,
            file.design_snr_db,
            None,
            roles,
            crc_positions,
            plan,
            has_plan,
            crc,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CodeFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

fn indices_with(roles: &[LeafRole], role: LeafRole) -> Vec<usize> {
    roles
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == role)
        .map(|(i, _)| i)
        .collect()
}

/// On-disk form of a code layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFile {
    pub n: u32,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub design_snr_db: f64,
    pub frozen: Vec<usize>,
    pub info: Vec<usize>,
    pub crc: Vec<Vec<usize>>,
    pub rho: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// In-place `x = u · G^{⊗n}` over GF(2) with `G = [[1, 0], [1, 1]]`.
pub fn polar_transform(bits: &mut [Bit]) {
    let len = bits.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// Encodes `u`, which must be zero at every frozen index.
pub fn encode(code: &CodeSpec, u: &[Bit]) -> Result<Vec<Bit>> {
    if u.len() != code.len() {
        return Err(Error::ContractViolation(format!(
            "input has {} bits, expected {}",
            u.len(),
            code.len()
        )));
    }
    if let Some(&i) = code.frozen.iter().find(|&&i| u[i] != 0) {
        return Err(Error::ContractViolation(format!("frozen index {i} carries a one")));
    }
    let mut x = u.to_vec();
    polar_transform(&mut x);
    Ok(x)
}

/// Places `payload` on the information positions (ascending) and writes each
/// partition's CRC remainder, computed over that partition's payload bits in
/// ascending index order, onto its CRC positions (most significant bit at the
/// lowest index).
pub fn assemble_frame(code: &CodeSpec, payload: &[Bit]) -> Result<Vec<Bit>> {
    if payload.len() != code.k {
        return Err(Error::ContractViolation(format!(
            "payload has {} bits, expected K = {}",
            payload.len(),
            code.k
        )));
    }
    let mut u = vec![0; code.len()];
    for (&i, &b) in code.info.iter().zip(payload) {
        u[i] = b & 1;
    }
    if let Some(cfg) = &code.crc {
        for j in 0..code.partitions() {
            let rem = cfg.remainder_bits(code.partition_info[j].iter().map(|&i| u[i]));
            for (&i, b) in code.crc_positions[j].iter().zip(rem) {
                u[i] = b;
            }
        }
    }
    Ok(u)
}
