//! Independent reference implementations and the property checks shared by
//! the integration tests and the acceptance run.
#![allow(dead_code)]

use polarflip::code::{assemble_frame, build_code, encode, polar_transform, CodeSpec, PartitionPlan};
use polarflip::crc::{crc_check, crc_remainder, to_bits, CrcConfig};
use polarflip::flip::{pscf_decode, sc_flip_decode, FlipOptions};
use polarflip::planner::{select_partition_indices, ErrorProfile, PlanOptions};
use polarflip::sc::{sc_decode, DecoderWorkspace};
use polarflip::sim::{run_campaign, DecoderKind, SimConfig, StopRule};
use polarflip::{Bit, Llr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bits(rng: &mut impl Rng, len: usize) -> Vec<Bit> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// `x_j = ⊕ u_i` over all `i` whose binary digits cover those of `j`,
/// i.e. multiplication by the `n`-fold Kronecker power of `[[1,0],[1,1]]`.
pub fn matrix_encode(u: &[Bit]) -> Vec<Bit> {
    let len = u.len();
    (0..len)
        .map(|j| (0..len).filter(|&i| i & j == j).fold(0, |acc, i| acc ^ u[i]))
        .collect()
}

/// Textbook recursive SC with min-sum, returning `(u_hat, leaf_llr)`.
pub fn naive_sc(y: &[Llr], frozen: &[bool]) -> (Vec<Bit>, Vec<Llr>) {
    fn rec(alpha: &[Llr], frozen: &[bool], u: &mut Vec<Bit>, llr: &mut Vec<Llr>) -> Vec<Bit> {
        if alpha.len() == 1 {
            let i = u.len();
            let bit = if frozen[i] || alpha[0] >= 0.0 { 0 } else { 1 };
            u.push(bit);
            llr.push(alpha[0]);
            return vec![bit];
        }
        let h = alpha.len() / 2;
        let (a, b) = alpha.split_at(h);
        let left: Vec<Llr> = a
            .iter()
            .zip(b)
            .map(|(&x, &z)| {
                let m = x.abs().min(z.abs());
                if (x < 0.0) ^ (z < 0.0) {
                    -m
                } else {
                    m
                }
            })
            .collect();
        let beta_l = rec(&left, frozen, u, llr);
        let right: Vec<Llr> = (0..h)
            .map(|k| b[k] + if beta_l[k] == 1 { -a[k] } else { a[k] })
            .collect();
        let beta_r = rec(&right, frozen, u, llr);
        let mut out: Vec<Bit> = (0..h).map(|k| beta_l[k] ^ beta_r[k]).collect();
        out.extend(beta_r);
        out
    }
    let mut u = Vec::with_capacity(y.len());
    let mut llr = Vec::with_capacity(y.len());
    rec(y, frozen, &mut u, &mut llr);
    (u, llr)
}

/// BPSK over AWGN with an independent sampler, returning channel LLRs.
pub fn awgn_llr(x: &[Bit], ebn0_db: f64, rate: f64, rng: &mut impl Rng) -> Vec<Llr> {
    let sigma2 = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
    let noise = Normal::new(0.0, sigma2.sqrt()).unwrap();
    x.iter()
        .map(|&b| 2.0 * ((1.0 - 2.0 * b as f64) + noise.sample(rng)) / sigma2)
        .collect()
}

/// A random assembled frame and its channel LLRs.
pub fn noisy_frame(code: &CodeSpec, ebn0_db: f64, rng: &mut impl Rng) -> (Vec<Bit>, Vec<Llr>) {
    let payload = random_bits(rng, code.k());
    let u = assemble_frame(code, &payload).unwrap();
    let x = encode(code, &u).unwrap();
    let y = awgn_llr(&x, ebn0_db, code.rate(), rng);
    (u, y)
}

// ---------------------------------------------------------------------------
// Property checks
// ---------------------------------------------------------------------------

pub fn encode_involution_and_linearity(vectors: usize) -> Check {
    let mut r = rng(11);
    let sizes = [1u32, 2, 3, 5, 8, 10];
    for t in 0..vectors {
        let n = sizes[t % sizes.len()];
        let len = 1usize << n;
        let full = CodeSpec::construct(n, len, 0, 2.5, None).map_err(|e| e.to_string())?;
        let a = random_bits(&mut r, len);
        let b = random_bits(&mut r, len);
        let xa = encode(&full, &a).unwrap();
        if encode(&full, &xa).unwrap() != a {
            return Err(format!("involution fails at N = {len}, vector {t}"));
        }
        let ab: Vec<Bit> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        let xb = encode(&full, &b).unwrap();
        let sum: Vec<Bit> = xa.iter().zip(&xb).map(|(p, q)| p ^ q).collect();
        if encode(&full, &ab).unwrap() != sum {
            return Err(format!("linearity fails at N = {len}, vector {t}"));
        }
        if n <= 5 && xa != matrix_encode(&a) {
            return Err(format!("butterfly differs from matrix product at N = {len}"));
        }
    }
    Ok(format!("{vectors} vectors, N up to 1024"))
}

pub fn sc_matches_naive(frames_per_len: usize) -> Check {
    let mut r = rng(12);
    for (n, k) in [(3u32, 5usize), (4, 8), (6, 32)] {
        let code = CodeSpec::construct(n, k, 0, 2.5, None).unwrap();
        let mask = code.frozen_mask();
        let mut ws = DecoderWorkspace::for_code(&code);
        for f in 0..frames_per_len {
            let snr = [0.0, 1.0, 2.5, 4.0][f % 4];
            let (_, y) = noisy_frame(&code, snr, &mut r);
            let fast = sc_decode(&code, &y, &[], 0, &mut ws).unwrap();
            let (u, llr) = naive_sc(&y, &mask);
            if fast.u_hat != u || fast.leaf_llr != llr || fast.leaf_visits != code.len() as u64 {
                return Err(format!("N = {}, frame {f} differs from recursive SC", code.len()));
            }
        }
    }
    Ok(format!("{frames_per_len} frames each at N = 8, 16, 64"))
}

pub fn pscf_single_partition_is_sc_flip(frames: usize) -> Check {
    let code = CodeSpec::construct(10, 512, 16, 2.5, None).unwrap();
    let mut ws = DecoderWorkspace::for_code(&code);
    let mut r = rng(13);
    let mut flipped = 0;
    for f in 0..frames {
        let snr = [1.0, 1.5, 2.0][f % 3];
        let (_, y) = noisy_frame(&code, snr, &mut r);
        for flip_crc_bits in [true, false] {
            let opts = FlipOptions {
                t_max: 10,
                flip_crc_bits,
            };
            let a = sc_flip_decode(&code, &y, opts, &mut ws).unwrap();
            let b = pscf_decode(&code, &y, opts, &mut ws).unwrap();
            if a.u_hat != b.u_hat
                || a.success != b.success
                || a.iterations != b.iterations
                || a.leaf_visits != b.leaf_visits
            {
                return Err(format!("frame {f} differs (flip_crc_bits = {flip_crc_bits})"));
            }
            flipped += (a.iterations > 1) as usize;
        }
    }
    Ok(format!("{frames} frames, {flipped} runs with flips"))
}

pub fn restart_prefix_stability(frames: usize) -> Check {
    let code = CodeSpec::construct(8, 128, 8, 2.5, None).unwrap();
    let len = code.len();
    let mut r = rng(14);
    let mut ws = DecoderWorkspace::for_code(&code);
    let mut fresh = DecoderWorkspace::for_code(&code);
    for f in 0..frames {
        let (_, y) = noisy_frame(&code, 1.5, &mut r);
        let full = sc_decode(&code, &y, &[], 0, &mut ws).unwrap();
        let j = r.random_range(1..len);

        // stop at j, then resume
        ws.load_channel(&y);
        ws.decode_range(&code, &[], 0, j).unwrap();
        ws.decode_range(&code, &[], j, len).unwrap();
        if ws.u_hat() != full.u_hat.as_slice() || ws.leaf_llr() != full.leaf_llr.as_slice() {
            return Err(format!("frame {f}: resume at {j} differs"));
        }

        // restart from j with only the decisions before it
        fresh.load_channel(&y);
        fresh.restore(0, &full.u_hat[..j], &full.leaf_llr[..j]);
        let resumed = sc_decode(&code, &y, &[], j, &mut fresh).unwrap();
        if resumed.u_hat != full.u_hat || resumed.leaf_llr != full.leaf_llr {
            return Err(format!("frame {f}: restart at {j} differs"));
        }
        if resumed.leaf_visits != (len - j) as u64 {
            return Err(format!("frame {f}: restart counted {} leaves", resumed.leaf_visits));
        }

        // a forced flip leaves the prefix alone
        if let Some(g) = (j..len).find(|&i| !code.is_frozen(i)) {
            let flipped = sc_decode(&code, &y, &[g], 0, &mut ws).unwrap();
            if flipped.u_hat[..g] != full.u_hat[..g] || flipped.u_hat[g] == full.u_hat[g] {
                return Err(format!("frame {f}: flip at {g} not local"));
            }
        }
    }
    Ok(format!("{frames} frames"))
}

pub fn reencode_consistency(frames: usize) -> Check {
    let mut r = rng(15);
    for (n, k, c) in [(4u32, 8usize, 0usize), (7, 64, 8), (10, 512, 16)] {
        let code = CodeSpec::construct(n, k, c, 2.5, None).unwrap();
        let mut ws = DecoderWorkspace::for_code(&code);
        for f in 0..frames {
            let (_, y) = noisy_frame(&code, 1.0, &mut r);
            let out = sc_decode(&code, &y, &[], 0, &mut ws).unwrap();
            let mut x = out.u_hat.clone();
            polar_transform(&mut x);
            if ws.root_partial_sums() != Some(x.as_slice()) {
                return Err(format!("N = {}, frame {f}: root partial sums differ", code.len()));
            }
        }
    }
    Ok(format!("{frames} frames each at N = 16, 128, 1024"))
}

/// Every single-bit error and every burst no longer than the register width,
/// at every offset of a codeword, leaves a nonzero syndrome.
pub fn crc_detects_short_bursts() -> Check {
    let mut r = rng(16);
    let mut patterns = 0u64;
    for width in [4usize, 8] {
        let cfg = CrcConfig::default_for_width(width).unwrap();
        for msg_len in [1usize, 7, 16, 40] {
            for _ in 0..4 {
                let msg = random_bits(&mut r, msg_len);
                let rem = to_bits(crc_remainder(&cfg, &msg), width);
                if !crc_check(&cfg, &msg, &rem) {
                    return Err(format!("width {width}: clean codeword rejected"));
                }
                let mut word = msg.clone();
                word.extend_from_slice(&rem);
                let total = word.len();
                for start in 0..total {
                    for len in 1..=width.min(total - start) {
                        // burst: first and last bits set, inner bits free
                        let inner = len.saturating_sub(2);
                        for mask in 0u32..(1 << inner) {
                            let mut e = word.clone();
                            e[start] ^= 1;
                            if len > 1 {
                                e[start + len - 1] ^= 1;
                                for b in 0..inner {
                                    e[start + 1 + b] ^= ((mask >> b) & 1) as Bit;
                                }
                            }
                            patterns += 1;
                            if crc_check(&cfg, &e[..msg_len], &e[msg_len..]) {
                                return Err(format!(
                                    "width {width}: burst of {len} at {start} in {total} bits undetected"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{patterns} error patterns"))
}

fn synthetic_profile(r: &mut ChaCha8Rng, frozen: &[bool], kind: usize) -> ErrorProfile {
    let len = frozen.len();
    let mut hist = vec![0u64; len];
    let open: Vec<usize> = (0..len).filter(|&i| !frozen[i]).collect();
    match kind % 4 {
        // uniform over non-frozen leaves
        0 => {
            for _ in 0..r.random_range(1000..5000) {
                hist[open[r.random_range(0..open.len())]] += 1;
            }
        }
        // a few spikes separated by long empty plateaus
        1 => {
            let spikes = r.random_range(2..6);
            for _ in 0..spikes {
                hist[open[r.random_range(0..open.len())]] += r.random_range(200..2000);
            }
        }
        // mass concentrated early, as seen on real codes
        2 => {
            for _ in 0..r.random_range(1000..4000) {
                let pick = (r.random::<f64>().powi(3) * open.len() as f64) as usize;
                hist[open[pick.min(open.len() - 1)]] += 1;
            }
        }
        // everything on a single leaf
        _ => hist[open[r.random_range(0..open.len())]] = r.random_range(1000..3000),
    }
    let e1: u64 = hist.iter().sum();
    let higher = r.random_range(0..100);
    ErrorProfile {
        code_hash: "synthetic".into(),
        ebn0_db: 2.5,
        seed: kind as u64,
        frames: e1 + higher + 10_000,
        failures: e1 + higher,
        order_tallies: vec![10_000, e1, higher],
        e1_histogram: hist,
    }
}

/// Plan invariants over 100 synthetic profiles, plateau-heavy ones included.
pub fn planner_invariants(profiles: usize) -> Check {
    let mut r = rng(17);
    let mut planned = 0;
    let mut rejected = 0;
    for t in 0..profiles {
        let n = r.random_range(6..11u32);
        let len = 1usize << n;
        let k = len / 2;
        let c = 8;
        let base = CodeSpec::construct(n, k, c, 2.5, None).unwrap();
        let frozen = base.frozen_mask();
        let profile = synthetic_profile(&mut r, &frozen, t);
        profile.check_consistency().map_err(|e| e.to_string())?;
        let cdf = profile.cumulative_e1();
        if cdf.windows(2).any(|w| w[1] < w[0]) || (cdf[len] - 1.0).abs() > 1e-12 {
            return Err(format!("profile {t}: cumulative distribution malformed"));
        }
        for p in [1usize, 2, 4, 8] {
            let opts = PlanOptions {
                min_non_frozen: c / p,
                ..PlanOptions::default()
            };
            let sel = match select_partition_indices(&profile, p, &frozen, opts) {
                Ok(s) => s,
                Err(_) => {
                    rejected += 1;
                    continue;
                }
            };
            let rho = &sel.rho;
            if rho.len() != p || rho[p - 1] != len || rho.windows(2).any(|w| w[0] >= w[1]) || rho[0] == 0 {
                return Err(format!("profile {t}, P = {p}: bad ends {rho:?}"));
            }
            let total: u64 = profile.e1_histogram.iter().sum();
            let below = |m: usize| profile.e1_histogram[..m].iter().sum::<u64>();
            for (q, &m) in rho[..p - 1].iter().enumerate() {
                let q = q as u64 + 1;
                let reached = below(m) * p as u64 >= q * total;
                let first = m == 0 || below(m - 1) * (p as u64) < q * total;
                // either the exact quantile, or a warned advance past it
                if !(reached && first) && sel.warnings.is_empty() {
                    return Err(format!("profile {t}, P = {p}: end {m} is not the {q}/{p} quantile"));
                }
                // a quantile on a plateau opens the next partition at the plateau start
                if reached && first && m > 0 && profile.e1_histogram[m - 1] == 0 && sel.warnings.is_empty() {
                    return Err(format!("profile {t}, P = {p}: end {m} sits inside a plateau"));
                }
            }
            let plan = PartitionPlan::new(rho.clone(), len).map_err(|e| e.to_string())?;
            let code = match build_code(n, k, c, base.reliability().unwrap(), Some(plan), 2.5) {
                Ok(code) => code,
                Err(polarflip::Error::Planning { .. }) => {
                    rejected += 1;
                    continue;
                }
                Err(e) => return Err(format!("profile {t}, P = {p}: {e}")),
            };
            for j in 0..p {
                let (s, e) = code.partition_bounds(j);
                let free = (s..e).filter(|&i| !code.is_frozen(i)).count();
                if free < c / p || code.crc_positions()[j].len() != c / p {
                    return Err(format!("profile {t}, P = {p}: partition {j} underfilled"));
                }
            }
            if code.info_positions() != base.info_positions() {
                return Err(format!("profile {t}, P = {p}: information bits moved"));
            }
            planned += 1;
        }
    }
    if planned == 0 {
        return Err("no profile could be planned".into());
    }
    Ok(format!(
        "{profiles} profiles, {planned} plans, {rejected} rejected as infeasible"
    ))
}

pub fn worker_count_invariance() -> Check {
    let code = CodeSpec::construct(7, 64, 8, 2.5, None).unwrap();
    let mut reference = None;
    for workers in [1usize, 2, 3, 4] {
        let cfg = SimConfig {
            stop: StopRule {
                min_errors: 150,
                max_frames: 40_000,
            },
            seed: 99,
            workers,
            chunk_size: 97,
            ..SimConfig::new(DecoderKind::ScFlip, vec![1.0, 2.0])
        };
        let mut recs = run_campaign(&code, &cfg).map_err(|e| e.to_string())?;
        for rec in &mut recs {
            rec.wall_time = 0.0;
        }
        match &reference {
            None => reference = Some(recs),
            Some(first) if *first != recs => {
                return Err(format!("{workers} workers changed the records"));
            }
            _ => {}
        }
    }
    Ok("1 to 4 workers give identical records".into())
}
