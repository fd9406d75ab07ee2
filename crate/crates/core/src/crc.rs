//! Bit-serial cyclic redundancy checks.
//!
//! Non-reflected, no final XOR. The generator polynomial is given without its
//! leading `x^width` term, so CRC-16/CCITT is `width = 16, poly = 0x1021`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Bit, Error, Result};

/// CRC parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrcConfig {
    width: u8,
    poly: u32,
    init: u32,
}

impl CrcConfig {
    pub fn new(width: u8, poly: u32, init: u32) -> Result<Self> {
        if !(1..=32).contains(&width) {
            return Err(Error::InvalidParameter(format!("crc width {width} outside 1..=32")));
        }
        let mask = mask(width);
        if poly & !mask != 0 || init & !mask != 0 {
            return Err(Error::InvalidParameter(format!(
                "crc poly {poly:#x} / init {init:#x} wider than {width} bits"
            )));
        }
        Ok(Self { width, poly, init })
    }

    /// Standard polynomial for a given width, init 0.
    pub fn default_for_width(width: usize) -> Result<Self> {
        let poly = match width {
            1 => 0x1,
            2 => 0x3,
            3 => 0x3,
            4 => 0x3,
            5 => 0x05,
            6 => 0x03,
            7 => 0x09,
            8 => 0x07,
            10 => 0x233,
            11 => 0x385,
            12 => 0x80f,
            15 => 0x4599,
            16 => 0x1021,
            24 => 0x0086_4cfb,
            32 => 0x04c1_1db7,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "no default crc polynomial for width {width}; pass one explicitly"
                )))
            }
        };
        Self::new(width as u8, poly, 0)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    pub fn init(&self) -> u32 {
        self.init
    }

    /// Same polynomial and width with a different initial register.
    pub fn with_init(self, init: u32) -> Result<Self> {
        Self::new(self.width, self.poly, init)
    }

    /// Remainder of `bits · x^width` modulo the generator, starting from `init`.
    pub fn remainder<I>(&self, bits: I) -> u32
    where
        I: IntoIterator<Item = Bit>,
    {
        let top = self.width - 1;
        let mask = mask(self.width);
        let mut reg = self.init;
        for b in bits {
            let feedback = ((reg >> top) & 1) ^ (b as u32 & 1);
            reg = (reg << 1) & mask;
            if feedback != 0 {
                reg ^= self.poly;
            }
        }
        reg
    }

    /// The remainder as `width` bits, most significant first.
    pub fn remainder_bits<I>(&self, bits: I) -> Vec<Bit>
    where
        I: IntoIterator<Item = Bit>,
    {
        to_bits(self.remainder(bits), self.width())
    }

    pub fn check<I>(&self, payload: I, remainder: &[Bit]) -> bool
    where
        I: IntoIterator<Item = Bit>,
    {
        remainder.len() == self.width() && self.remainder(payload) == from_bits(remainder)
    }
}

/// Free-function form of [`CrcConfig::remainder`].
pub fn crc_remainder(cfg: &CrcConfig, bits: &[Bit]) -> u32 {
    cfg.remainder(bits.iter().copied())
}

/// Passes iff the recomputed remainder of `payload` equals `remainder_bits`.
pub fn crc_check(cfg: &CrcConfig, payload: &[Bit], remainder_bits: &[Bit]) -> bool {
    cfg.check(payload.iter().copied(), remainder_bits)
}

/// `width` bits of `value`, most significant first.
pub fn to_bits(value: u32, width: usize) -> Vec<Bit> {
    (0..width).rev().map(|k| ((value >> k) & 1) as Bit).collect()
}

pub fn from_bits(bits: &[Bit]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | (b as u32 & 1))
}

fn mask(width: u8) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

#[derive(Serialize, Deserialize)]
struct CrcConfigRepr {
    width: u8,
    poly: String,
    #[serde(default)]
    init: u32,
}

impl Serialize for CrcConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CrcConfigRepr {
            width: self.width,
            poly: format!("0x{:x}", self.poly),
            init: self.init,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CrcConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CrcConfigRepr::deserialize(deserializer)?;
        let poly = parse_hex(&repr.poly).map_err(serde::de::Error::custom)?;
        CrcConfig::new(repr.width, poly, repr.init).map_err(serde::de::Error::custom)
    }
}

/// Parses `0x1021`, `1021` or `0X1021`.
pub fn parse_hex(s: &str) -> Result<u32> {
    let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u32::from_str_radix(digits, 16).map_err(|e| Error::InvalidParameter(format!("bad hex value {s:?}: {e}")))
}
