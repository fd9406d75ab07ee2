//! First-error profiling and partition planning.
//!
//! A profile records, for every frame that plain SC gets wrong, how many
//! genie corrections it needed (its error order) and, for frames needing
//! exactly one, where that single error occurred. Partition ends are then
//! placed at quantiles of the single-error distribution.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::code::{build_code, polar_transform, CodeSpec, PartitionPlan};
use crate::sc::{sc_oracle_decode, DecoderWorkspace};
use crate::sim::{frame_rng, run_chunked, StopRule, Tally, DEFAULT_CHUNK};
use crate::{Bit, Error, Llr, Result};

/// Empirical error-order statistics of SC on one code at one Eb/N0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub code_hash: String,
    pub ebn0_db: f64,
    pub seed: u64,
    pub frames: u64,
    pub failures: u64,
    /// `order_tallies[n]`: frames that needed exactly `n` corrections.
    pub order_tallies: Vec<u64>,
    /// Per-leaf count of single-error frames whose error sat at that leaf.
    pub e1_histogram: Vec<u64>,
}

impl ErrorProfile {
    /// Frames whose failure was a single channel-induced error.
    pub fn e1_events(&self) -> u64 {
        self.order_tallies.get(1).copied().unwrap_or(0)
    }

    /// Fraction of failures with error order 1.
    pub fn e1_share(&self) -> f64 {
        if self.failures == 0 {
            0.0
        } else {
            self.e1_events() as f64 / self.failures as f64
        }
    }

    /// `F[m]` = share of single-error events at leaves `< m`, for
    /// `m = 0..=N`. Non-decreasing from 0 to 1 (all zeros without events).
    pub fn cumulative_e1(&self) -> Vec<f64> {
        let total = self.e1_events().max(1) as f64;
        let mut acc = 0u64;
        let mut out = Vec::with_capacity(self.e1_histogram.len() + 1);
        out.push(0.0);
        for &c in &self.e1_histogram {
            acc += c;
            out.push(acc as f64 / total);
        }
        out
    }

    pub fn check_consistency(&self) -> Result<()> {
        let hist: u64 = self.e1_histogram.iter().sum();
        let tallied: u64 = self.order_tallies.iter().sum();
        let failures: u64 = self.order_tallies.iter().skip(1).sum();
        if hist != self.e1_events() || tallied != self.frames || failures != self.failures {
            return Err(Error::ContractViolation(format!(
                "profile counts disagree: histogram {hist}, E1 {}, frames {}/{tallied}, failures {}/{failures}",
                self.e1_events(),
                self.frames,
                self.failures
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let profile: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        profile.check_consistency()?;
        Ok(profile)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Default)]
struct ProfileTally {
    frames: u64,
    order_tallies: Vec<u64>,
    e1_histogram: Vec<u64>,
}

impl ProfileTally {
    fn failures(&self) -> u64 {
        self.order_tallies.iter().skip(1).sum()
    }
}

impl Tally for ProfileTally {
    fn merge(&mut self, o: Self) {
        self.frames += o.frames;
        if self.order_tallies.len() < o.order_tallies.len() {
            self.order_tallies.resize(o.order_tallies.len(), 0);
        }
        for (a, b) in self.order_tallies.iter_mut().zip(o.order_tallies) {
            *a += b;
        }
        if self.e1_histogram.len() < o.e1_histogram.len() {
            self.e1_histogram.resize(o.e1_histogram.len(), 0);
        }
        for (a, b) in self.e1_histogram.iter_mut().zip(o.e1_histogram) {
            *a += b;
        }
    }
}

/// Profiling settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// `min_errors` counts SC failures.
    pub stop: StopRule,
    pub seed: u64,
    pub workers: usize,
    pub chunk_size: u64,
}

impl ProfileOptions {
    pub fn new(stop: StopRule, seed: u64) -> Self {
        Self {
            stop,
            seed,
            workers: 1,
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

/// Collects an [`ErrorProfile`] with the genie decoder.
///
/// The CRC is not used: every non-frozen leaf carries a random bit. Fails
/// with [`Error::InsufficientData`] if no frame failed.
pub fn profile_errors(code: &CodeSpec, channel: Channel, opts: ProfileOptions) -> Result<ErrorProfile> {
    opts.stop.validate()?;
    let len = code.len();
    let non_frozen: Vec<usize> = (0..len).filter(|&i| !code.is_frozen(i)).collect();
    let stop = opts.stop;
    let tally: ProfileTally = run_chunked(
        opts.workers,
        opts.chunk_size,
        stop.max_frames,
        || {
            (
                DecoderWorkspace::for_code(code),
                vec![0 as Bit; len],
                vec![0 as Bit; len],
                vec![0.0 as Llr; len],
            )
        },
        |(ws, u, x, y), frame, t: &mut ProfileTally| {
            let mut rng = frame_rng(opts.seed, frame);
            for &i in &non_frozen {
                u[i] = rng.random_range(0..2);
            }
            x.copy_from_slice(u);
            polar_transform(x);
            channel.transmit_into(x, &mut rng, y);
            let outcome = sc_oracle_decode(code, y, u, ws)?;
            let order = outcome.error_order;
            if t.order_tallies.len() <= order {
                t.order_tallies.resize(order + 1, 0);
            }
            t.order_tallies[order] += 1;
            if order == 1 {
                if t.e1_histogram.is_empty() {
                    t.e1_histogram.resize(len, 0);
                }
                t.e1_histogram[outcome.corrections[0]] += 1;
            }
            t.frames += 1;
            Ok(())
        },
        |t| t.failures() >= stop.min_errors,
    )?;

    let failures = tally.failures();
    let mut order_tallies = tally.order_tallies;
    if order_tallies.len() < 2 {
        order_tallies.resize(2, 0);
    }
    let mut e1_histogram = tally.e1_histogram;
    e1_histogram.resize(len, 0);
    if failures == 0 {
        return Err(Error::InsufficientData {
            frames: tally.frames,
            failures: 0,
            e1_events: 0,
            required: 1,
        });
    }
    let ebn0_db = match channel {
        Channel::Awgn(p) => p.ebn0_db(),
        Channel::Noiseless => f64::MAX,
    };
    Ok(ErrorProfile {
        code_hash: code.code_hash(),
        ebn0_db,
        seed: opts.seed,
        frames: tally.frames,
        failures,
        order_tallies,
        e1_histogram,
    })
}

/// File cache for profiles keyed by code, SNR, seed and stopping rule.
#[derive(Debug, Clone)]
pub struct ProfileCache {
    dir: PathBuf,
}

impl ProfileCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, code: &CodeSpec, ebn0_db: f64, opts: &ProfileOptions) -> PathBuf {
        self.dir.join(format!(
            "profile_{}_{:.4}dB_s{}_e{}_f{}.json",
            code.code_hash(),
            ebn0_db,
            opts.seed,
            opts.stop.min_errors,
            opts.stop.max_frames
        ))
    }

    /// Loads the cached profile or collects and stores a new one.
    pub fn get_or_profile(&self, code: &CodeSpec, ebn0_db: f64, opts: ProfileOptions) -> Result<ErrorProfile> {
        let path = self.path_for(code, ebn0_db, &opts);
        if path.exists() {
            return ErrorProfile::load(&path);
        }
        let profile = profile_errors(code, Channel::awgn(ebn0_db, code.rate())?, opts)?;
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        profile.save(&path)?;
        Ok(profile)
    }
}

/// Partition selection knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    /// Minimum number of single-error events before a plan is trusted.
    pub min_e1_events: u64,
    /// Each partition must contain at least this many non-frozen leaves.
    pub min_non_frozen: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            min_e1_events: 1000,
            min_non_frozen: 1,
        }
    }
}

/// Selected partition ends plus any adjustments made on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSelection {
    pub rho: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Places partition ends so that partition `q` covers up to the `q/P`
/// quantile of the single-error distribution.
///
/// `ρ_q` is the smallest `m` with `F(m) ≥ q/P`, where `F(m)` is the share of
/// events below `m`. A quantile inside a run of event-free leaves therefore
/// lands on the first leaf of that run, which then opens the next
/// partition. An end that would not advance past the previous one (or would
/// leave too few non-frozen leaves) is pushed forward and reported.
/// `frozen` is the frozen mask of the code the profile was collected on.
pub fn select_partition_indices(
    profile: &ErrorProfile,
    partitions: usize,
    frozen: &[bool],
    opts: PlanOptions,
) -> Result<PlanSelection> {
    let len = frozen.len();
    if partitions == 0 {
        return Err(Error::planning(None, "need at least one partition"));
    }
    if profile.e1_histogram.len() != len {
        return Err(Error::ContractViolation(format!(
            "profile covers {} leaves, code has {len}",
            profile.e1_histogram.len()
        )));
    }
    if let Some(i) = (0..len).find(|&i| frozen[i] && profile.e1_histogram[i] > 0) {
        return Err(Error::ContractViolation(format!(
            "profile has single-error mass at frozen leaf {i}"
        )));
    }
    if partitions == 1 {
        return Ok(PlanSelection {
            rho: vec![len],
            warnings: Vec::new(),
        });
    }
    let total: u64 = profile.e1_histogram.iter().sum();
    if total < opts.min_e1_events.max(1) {
        return Err(Error::InsufficientData {
            frames: profile.frames,
            failures: profile.failures,
            e1_events: total,
            required: opts.min_e1_events.max(1),
        });
    }
    let mut below = vec![0u64; len + 1];
    let mut free_below = vec![0usize; len + 1];
    for i in 0..len {
        below[i + 1] = below[i] + profile.e1_histogram[i];
        free_below[i + 1] = free_below[i] + (!frozen[i]) as usize;
    }
    let p = partitions as u64;
    let mut rho = Vec::with_capacity(partitions);
    let mut warnings = Vec::new();
    let mut prev = 0usize;
    for q in 1..p {
        // smallest m with below[m] / total >= q / P, in exact integers
        let quantile = below.partition_point(|&b| b * p < q * total);
        let admissible = |m: usize| m > prev && free_below[m] - free_below[prev] >= opts.min_non_frozen;
        let mut m = quantile;
        while m <= len && !admissible(m) {
            m += 1;
        }
        if m >= len {
            return Err(Error::planning(
                Some(q as usize - 1),
                format!("no admissible end for quantile {q}/{p} after {prev}"),
            ));
        }
        if m != quantile {
            warnings.push(format!("partition {} end moved from {quantile} to {m}", q - 1));
        }
        rho.push(m);
        prev = m;
    }
    if free_below[len] - free_below[prev] < opts.min_non_frozen {
        return Err(Error::planning(
            Some(partitions - 1),
            format!("last partition [{prev}, {len}) has too few non-frozen leaves"),
        ));
    }
    rho.push(len);
    Ok(PlanSelection { rho, warnings })
}

/// Profiles `base` (a monolithic layout) at `ebn0_db`, picks partition ends
/// and rebuilds the code with the resulting plan.
pub fn plan_code(
    base: &CodeSpec,
    partitions: usize,
    profile: &ErrorProfile,
    plan_opts: PlanOptions,
) -> Result<(CodeSpec, PlanSelection)> {
    let reliability = base
        .reliability()
        .ok_or_else(|| Error::planning(None, "base code has no reliability order to rebuild from"))?;
    if partitions == 0 || !base.c().is_multiple_of(partitions) {
        return Err(Error::planning(
            None,
            format!("{partitions} partitions do not divide {} CRC bits", base.c()),
        ));
    }
    let opts = PlanOptions {
        min_non_frozen: plan_opts.min_non_frozen.max(base.c() / partitions),
        ..plan_opts
    };
    let selection = select_partition_indices(profile, partitions, &base.frozen_mask(), opts)?;
    let plan = PartitionPlan::new(selection.rho.clone(), base.len())?.with_profile_snr(profile.ebn0_db);
    let code = build_code(
        base.log2_len(),
        base.k(),
        base.c(),
        reliability,
        Some(plan),
        base.design_snr_db(),
    )?;
    Ok((code, selection))
}

/// Per-partition error-count distributions: `probs[j][i]` is the
/// probability of exactly `i` channel-induced errors in partition `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSuccessModel {
    probs: Vec<Vec<f64>>,
}

impl PartitionSuccessModel {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::ContractViolation("no partitions in model".into()));
        }
        for (j, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "partition {j} probabilities sum to {sum}"
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn partitions(&self) -> usize {
        self.probs.len()
    }

    fn prob(&self, j: usize, errors: usize) -> f64 {
        self.probs[j].get(errors).copied().unwrap_or(0.0)
    }
}

/// Probability that SC fails but every partition holds at most one error,
/// i.e. the failure is correctable by one flip per partition, assuming
/// partitions are independent: `Π (p0 + p1) − Π p0`.
pub fn predict_pscf_success(model: &PartitionSuccessModel) -> f64 {
    let (at_most_one, none) = (0..model.partitions()).fold((1.0, 1.0), |(a, z), j| {
        (a * (model.prob(j, 0) + model.prob(j, 1)), z * model.prob(j, 0))
    });
    at_most_one - none
}
