//! Seeded Monte-Carlo campaigns and result files.
//!
//! Frame `i` of a campaign draws its payload and noise from a ChaCha stream
//! keyed by `(seed, i)`, so per-frame outcomes do not depend on how frames
//! are spread over workers. Frames are processed in fixed-size chunks and
//! merged in chunk order; the stopping rule is evaluated after each chunk.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::code::{assemble_frame, polar_transform, CodeSpec};
use crate::flip::{pscf_decode, sc_flip_decode, FlipOptions};
use crate::sc::{sc_oracle_decode, DecoderWorkspace};
use crate::{Bit, Error, Llr, Result};

/// Default frames per chunk.
pub const DEFAULT_CHUNK: u64 = 1000;

/// Per-frame random stream.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

/// Stop once `min_errors` errors were seen or `max_frames` frames were run,
/// whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 400,
            max_frames: 10_000_000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 || self.max_frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "stopping rule needs positive bounds, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Accumulated per-chunk statistics.
pub(crate) trait Tally: Default + Send {
    fn merge(&mut self, other: Self);
}

/// Runs frames in parallel chunks until `done` holds or `max_frames` is
/// reached. The result is independent of the worker count.
pub(crate) fn run_chunked<T, W, I, F, D>(
    workers: usize,
    chunk: u64,
    max_frames: u64,
    init: I,
    per_frame: F,
    done: D,
) -> Result<T>
where
    T: Tally,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, u64, &mut T) -> Result<()> + Sync + Send,
    D: Fn(&T) -> bool,
{
    let chunk = chunk.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut total = T::default();
    let mut next = 0u64;
    while next < max_frames && !done(&total) {
        let round: Vec<(u64, u64)> = (0..workers.max(1) as u64)
            .map(|w| next + w * chunk)
            .take_while(|&s| s < max_frames)
            .map(|s| (s, (s + chunk).min(max_frames)))
            .collect();
        let results: Vec<Result<T>> = pool.install(|| {
            round
                .par_iter()
                .map_init(&init, |w, &(s, e)| {
                    let mut t = T::default();
                    for f in s..e {
                        per_frame(w, f, &mut t)?;
                    }
                    Ok(t)
                })
                .collect()
        });
        for (r, &(_, e)) in results.into_iter().zip(&round) {
            total.merge(r?);
            next = e;
            if done(&total) {
                break;
            }
        }
    }
    Ok(total)
}

/// Decoder under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Sc,
    ScFlip,
    Pscf,
    /// Genie that corrects the first wrong decision only; a frame fails
    /// when SC makes two or more channel-induced errors.
    Oracle,
}

impl DecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderKind::Sc => "sc",
            DecoderKind::ScFlip => "scflip",
            DecoderKind::Pscf => "pscf",
            DecoderKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(DecoderKind::Sc),
            "scflip" | "sc-flip" => Ok(DecoderKind::ScFlip),
            "pscf" => Ok(DecoderKind::Pscf),
            "oracle" | "sc-oracle" => Ok(DecoderKind::Oracle),
            other => Err(Error::InvalidParameter(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Campaign settings, applied to a resolved [`CodeSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub decoder: DecoderKind,
    pub t_max: usize,
    pub flip_crc_bits: bool,
    pub snr_points: Vec<f64>,
    pub stop: StopRule,
    pub seed: u64,
    pub workers: usize,
    pub chunk_size: u64,
    /// Replace the AWGN channel by an error-free one.
    pub noiseless: bool,
}

impl SimConfig {
    pub fn new(decoder: DecoderKind, snr_points: Vec<f64>) -> Self {
        Self {
            decoder,
            t_max: 10,
            flip_crc_bits: true,
            snr_points,
            stop: StopRule::default(),
            seed: 1,
            workers: 1,
            chunk_size: DEFAULT_CHUNK,
            noiseless: false,
        }
    }

    pub fn validate(&self, code: &CodeSpec) -> Result<()> {
        self.stop.validate()?;
        if self.snr_points.is_empty() {
            return Err(Error::InvalidParameter("empty SNR sweep".into()));
        }
        if let Some(bad) = self.snr_points.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("SNR point {bad}")));
        }
        if self.workers == 0 || self.chunk_size == 0 {
            return Err(Error::InvalidParameter(
                "workers and chunk size must be positive".into(),
            ));
        }
        match self.decoder {
            DecoderKind::ScFlip if code.partitions() != 1 => Err(Error::planning(
                None,
                format!(
                    "scflip needs a monolithic code, this one has {} partitions",
                    code.partitions()
                ),
            )),
            DecoderKind::ScFlip | DecoderKind::Pscf if code.c() == 0 => {
                Err(Error::planning(None, format!("{} needs CRC bits", self.decoder)))
            }
            _ => Ok(()),
        }
    }
}

/// Inclusive SNR sweep `start, start + step, …, stop`.
pub fn snr_sweep(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::InvalidParameter(format!(
            "SNR sweep {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = start + step * i as f64;
            (v * 1e9).round() / 1e9
        })
        .collect())
}

/// One (decoder, code, SNR) result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub decoder: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "tmax")]
    pub t_max: usize,
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub avg_iterations: f64,
    #[serde(rename = "avg_norm_complexity")]
    pub avg_normalized_complexity: f64,
    #[serde(rename = "undetected_errors")]
    pub undetected_error_count: u64,
    pub seed: u64,
    /// Seconds spent on this point. Not written to result files.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 16] = [
    "decoder",
    "N",
    "K",
    "C",
    "P",
    "tmax",
    "ebn0_db",
    "frames",
    "frame_errors",
    "bit_errors",
    "fer",
    "ber",
    "avg_iterations",
    "avg_norm_complexity",
    "undetected_errors",
    "seed",
];

#[derive(Debug, Default)]
struct FrameTally {
    frames: u64,
    frame_errors: u64,
    bit_errors: u64,
    iterations: u64,
    leaf_visits: u64,
    undetected: u64,
}

impl Tally for FrameTally {
    fn merge(&mut self, o: Self) {
        self.frames += o.frames;
        self.frame_errors += o.frame_errors;
        self.bit_errors += o.bit_errors;
        self.iterations += o.iterations;
        self.leaf_visits += o.leaf_visits;
        self.undetected += o.undetected;
    }
}

struct Worker {
    ws: DecoderWorkspace,
    payload: Vec<Bit>,
    x: Vec<Bit>,
    y: Vec<Llr>,
}

impl Worker {
    fn new(code: &CodeSpec) -> Self {
        Self {
            ws: DecoderWorkspace::for_code(code),
            payload: vec![0; code.k()],
            x: vec![0; code.len()],
            y: vec![0.0; code.len()],
        }
    }
}

/// Outcome of one decoded frame.
struct Decoded {
    u_hat: Vec<Bit>,
    crc_ok: bool,
    iterations: usize,
    /// Leaves counted towards complexity.
    leaf_visits: u64,
}

fn decode_frame(code: &CodeSpec, cfg: &SimConfig, ws: &mut DecoderWorkspace, y: &[Llr], u: &[Bit]) -> Result<Decoded> {
    let len = code.len();
    let opts = FlipOptions {
        t_max: cfg.t_max,
        flip_crc_bits: cfg.flip_crc_bits,
    };
    Ok(match cfg.decoder {
        DecoderKind::Sc => {
            ws.load_channel(y);
            ws.decode_range(code, &[], 0, len)?;
            Decoded {
                crc_ok: code.all_crc_pass(ws.u_hat()),
                u_hat: ws.u_hat().to_vec(),
                iterations: 1,
                leaf_visits: ws.leaf_visits(),
            }
        }
        DecoderKind::ScFlip | DecoderKind::Pscf => {
            let r = if cfg.decoder == DecoderKind::ScFlip {
                sc_flip_decode(code, y, opts, ws)?
            } else {
                pscf_decode(code, y, opts, ws)?
            };
            Decoded {
                crc_ok: r.success,
                u_hat: r.u_hat,
                iterations: r.iterations,
                leaf_visits: r.leaf_visits - r.completion_visits,
            }
        }
        DecoderKind::Oracle => {
            let outcome = sc_oracle_decode(code, y, u, ws)?;
            if outcome.error_order >= 2 {
                // correcting the first wrong leaf equals flipping it
                let first = outcome.corrections[0];
                ws.decode_range(code, &[first], first, len)?;
            }
            Decoded {
                u_hat: ws.u_hat().to_vec(),
                crc_ok: false,
                iterations: 1,
                leaf_visits: len as u64,
            }
        }
    })
}

fn simulate_point(code: &CodeSpec, cfg: &SimConfig, ebn0_db: f64) -> Result<SimRecord> {
    let started = Instant::now();
    let channel = if cfg.noiseless {
        Channel::Noiseless
    } else {
        Channel::awgn(ebn0_db, code.rate())?
    };
    let stop = cfg.stop;
    let tally: FrameTally = run_chunked(
        cfg.workers,
        cfg.chunk_size,
        stop.max_frames,
        || Worker::new(code),
        |w, frame, t: &mut FrameTally| {
            let mut rng = frame_rng(cfg.seed, frame);
            for b in w.payload.iter_mut() {
                *b = rng.random_range(0..2);
            }
            let u = assemble_frame(code, &w.payload)?;
            w.x.copy_from_slice(&u);
            polar_transform(&mut w.x);
            channel.transmit_into(&w.x, &mut rng, &mut w.y);
            let d = decode_frame(code, cfg, &mut w.ws, &w.y, &u)?;
            let wrong = d.u_hat != u;
            t.frames += 1;
            t.iterations += d.iterations as u64;
            t.leaf_visits += d.leaf_visits;
            if wrong {
                t.frame_errors += 1;
                t.bit_errors += code.info_positions().iter().filter(|&&i| d.u_hat[i] != u[i]).count() as u64;
                if d.crc_ok && code.c() > 0 {
                    t.undetected += 1;
                }
            }
            Ok(())
        },
        |t| t.frame_errors >= stop.min_errors,
    )?;
    let frames = tally.frames.max(1) as f64;
    Ok(SimRecord {
        decoder: cfg.decoder.name().to_string(),
        n: code.len(),
        k: code.k(),
        c: code.c(),
        p: code.partitions(),
        t_max: match cfg.decoder {
            DecoderKind::ScFlip | DecoderKind::Pscf => cfg.t_max,
            _ => 0,
        },
        ebn0_db,
        frames: tally.frames,
        frame_errors: tally.frame_errors,
        bit_errors: tally.bit_errors,
        fer: tally.frame_errors as f64 / frames,
        ber: tally.bit_errors as f64 / (frames * code.k() as f64),
        avg_iterations: tally.iterations as f64 / frames,
        avg_normalized_complexity: tally.leaf_visits as f64 / (frames * code.len() as f64),
        undetected_error_count: tally.undetected,
        seed: cfg.seed,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Runs one record per SNR point.
///
/// A frame is in error whenever the decided vector differs from the
/// transmitted one; frames whose CRC passed anyway are also counted as
/// undetected errors.
pub fn run_campaign(code: &CodeSpec, config: &SimConfig) -> Result<Vec<SimRecord>> {
    config.validate(code)?;
    config
        .snr_points
        .iter()
        .map(|&snr| simulate_point(code, config, snr))
        .collect()
}

/// Runs `base` at a single SNR for each candidate `t_max`.
pub fn sweep_t_max(code: &CodeSpec, base: &SimConfig, ebn0_db: f64, candidates: &[usize]) -> Result<Vec<SimRecord>> {
    candidates
        .iter()
        .map(|&t| {
            let cfg = SimConfig {
                t_max: t,
                snr_points: vec![ebn0_db],
                ..base.clone()
            };
            Ok(run_campaign(code, &cfg)?.remove(0))
        })
        .collect()
}

/// Record whose average iteration count is closest to `target`; ties go to
/// the smaller `t_max`.
pub fn closest_by_iterations(records: &[SimRecord], target: f64) -> Option<&SimRecord> {
    records.iter().min_by(|a, b| {
        let da = (a.avg_iterations - target).abs();
        let db = (b.avg_iterations - target).abs();
        da.total_cmp(&db).then(a.t_max.cmp(&b.t_max))
    })
}

/// Linear interpolation, in dB, of where a FER curve crosses `target`
/// (log-FER is interpolated). `None` when the curve never brackets it.
pub fn snr_at_fer(records: &[SimRecord], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.fer > 0.0)
        .map(|r| (r.ebn0_db, r.fer))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find_map(|w| {
        let (s0, f0) = w[0];
        let (s1, f1) = w[1];
        if f0 >= target && f1 <= target && f0 != f1 {
            let t = (f0.ln() - target.ln()) / (f0.ln() - f1.ln());
            Some(s0 + t * (s1 - s0))
        } else if f0 == target {
            Some(s0)
        } else {
            None
        }
    })
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

/// Formats with six significant digits, `%g` style.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent");
        format!("{}e{e}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `x` rounded to the precision written to result files.
pub fn round_sig6(x: f64) -> f64 {
    fmt_sig6(x).parse().unwrap_or(x)
}

impl SimRecord {
    /// Copy with floats rounded as in result files and no wall time.
    pub fn as_written(&self) -> Self {
        Self {
            ebn0_db: round_sig6(self.ebn0_db),
            fer: round_sig6(self.fer),
            ber: round_sig6(self.ber),
            avg_iterations: round_sig6(self.avg_iterations),
            avg_normalized_complexity: round_sig6(self.avg_normalized_complexity),
            wall_time: 0.0,
            ..self.clone()
        }
    }

    fn csv_row(&self) -> [String; 16] {
        [
            self.decoder.clone(),
            self.n.to_string(),
            self.k.to_string(),
            self.c.to_string(),
            self.p.to_string(),
            self.t_max.to_string(),
            fmt_sig6(self.ebn0_db),
            self.frames.to_string(),
            self.frame_errors.to_string(),
            self.bit_errors.to_string(),
            fmt_sig6(self.fer),
            fmt_sig6(self.ber),
            fmt_sig6(self.avg_iterations),
            fmt_sig6(self.avg_normalized_complexity),
            self.undetected_error_count.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Renders records as CSV text.
pub fn to_csv(records: &[SimRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(r.csv_row()).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json(records: &[SimRecord]) -> Result<String> {
    let rounded: Vec<SimRecord> = records.iter().map(SimRecord::as_written).collect();
    Ok(serde_json::to_string_pretty(&rounded)?)
}

/// Writes records to `path`.
pub fn emit_results(records: &[SimRecord], format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        OutputFormat::Csv => to_csv(records)?,
        OutputFormat::Json => to_json(records)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<SimRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?
        .clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidParameter(format!(
            "unexpected csv header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::InvalidParameter(format!("csv: {e}"))))
        .collect()
}

/// Reads records written by [`emit_results`].
pub fn read_results(path: impl AsRef<Path>, format: OutputFormat) -> Result<Vec<SimRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = match format {
        OutputFormat::Csv => parse_csv(&text),
        OutputFormat::Json => serde_json::from_str(&text).map_err(Error::from),
    };
    parsed.map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
