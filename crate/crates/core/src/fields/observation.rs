//! Packed binary observation records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One sensor's record `ξ_i(t_1..t_T)`, bit `t` of word `t / 64` holding step
/// `t`. Bits past `len` are always zero.
#[derive(Debug, Clone, Copy)]
pub struct BitRow<'a> {
    words: &'a [u64],
    len: usize,
}

impl<'a> BitRow<'a> {
    pub fn words(&self) -> &'a [u64] {
        self.words
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, t: usize) -> bool {
        self.words[t / 64] >> (t % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }
}

/// `N` binary sequences of length `T`, stored row-major with each row padded
/// to whole 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMatrix {
    n_sensors: usize,
    n_steps: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl ObservationMatrix {
    pub fn zeros(n_sensors: usize, n_steps: usize) -> Self {
        let words_per_row = n_steps.div_ceil(64);
        Self {
            n_sensors,
            n_steps,
            words_per_row,
            bits: vec![0; n_sensors * words_per_row],
        }
    }

    /// Builds from per-sensor rows; all rows must have the same length.
    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let n_steps = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != n_steps) {
            return Err(Error::invalid("observation rows differ in length"));
        }
        let mut m = Self::zeros(rows.len(), n_steps);
        for (i, row) in rows.iter().enumerate() {
            for (t, &b) in row.as_ref().iter().enumerate() {
                m.set(i, t, b);
            }
        }
        Ok(m)
    }

    /// Builds from per-step columns, each holding one bit per sensor.
    pub fn from_columns(n_sensors: usize, columns: &[Vec<bool>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != n_sensors) {
            return Err(Error::invalid("observation column has wrong sensor count"));
        }
        let mut m = Self::zeros(n_sensors, columns.len());
        for (t, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                m.set(i, t, b);
            }
        }
        Ok(m)
    }

    /// Parses rows written as `'0'`/`'1'` strings, e.g. `["1101", "1001"]`.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let parsed: Vec<Vec<bool>> = rows
            .iter()
            .map(|s| {
                s.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::invalid(format!("bad bit character {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::from_rows(&parsed)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn row(&self, i: usize) -> BitRow<'_> {
        let start = i * self.words_per_row;
        BitRow {
            words: &self.bits[start..start + self.words_per_row],
            len: self.n_steps,
        }
    }

    pub fn get(&self, i: usize, t: usize) -> bool {
        self.row(i).get(t)
    }

    pub fn set(&mut self, i: usize, t: usize, value: bool) {
        assert!(i < self.n_sensors && t < self.n_steps, "bit ({i}, {t}) out of range");
        let w = &mut self.bits[i * self.words_per_row + t / 64];
        let mask = 1u64 << (t % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Fraction of steps at which sensor `i` recorded 1.
    pub fn mean(&self, i: usize) -> f64 {
        self.row(i).count_ones() as f64 / self.n_steps as f64
    }

    /// Reorders the time axis of every row: new step `t` takes old step
    /// `perm[t]`.
    pub fn permute_time(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_steps {
            return Err(Error::invalid("permutation length differs from T"));
        }
        let mut out = Self::zeros(self.n_sensors, self.n_steps);
        for i in 0..self.n_sensors {
            for (t, &src) in perm.iter().enumerate() {
                out.set(i, t, self.get(i, src));
            }
        }
        Ok(out)
    }

    /// Serializes as: `N` and `T` (u64 little-endian), then `N` rows of
    /// `ceil(T/8)` bytes, bit `j` of a row (LSB first within each byte)
    /// holding step `j`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let row_bytes = self.n_steps.div_ceil(8);
        let mut out = Vec::with_capacity(16 + self.n_sensors * row_bytes);
        out.extend_from_slice(&(self.n_sensors as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_steps as u64).to_le_bytes());
        for i in 0..self.n_sensors {
            let bytes: Vec<u8> = self.row(i).words().iter().flat_map(|w| w.to_le_bytes()).collect();
            out.extend_from_slice(&bytes[..row_bytes]);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::invalid(format!("observation dump: {reason}"));
        if buf.len() < 16 {
            return Err(bad("truncated header".into()));
        }
        let n = u64::from_le_bytes(buf[0..8].try_into().unwrap());
        let t = u64::from_le_bytes(buf[8..16].try_into().unwrap());
        let (n, t) = (usize::try_from(n).map_err(|_| bad("N too large".into()))?, usize::try_from(t).map_err(|_| bad("T too large".into()))?);
        let row_bytes = t.div_ceil(8);
        let expected = n
            .checked_mul(row_bytes)
            .and_then(|b| b.checked_add(16))
            .ok_or_else(|| bad("size overflow".into()))?;
        if buf.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", buf.len())));
        }
        let mut m = Self::zeros(n, t);
        for i in 0..n {
            let row = &buf[16 + i * row_bytes..16 + (i + 1) * row_bytes];
            for (w, chunk) in row.chunks(8).enumerate() {
                let mut word = [0u8; 8];
                word[..chunk.len()].copy_from_slice(chunk);
                m.bits[i * m.words_per_row + w] = u64::from_le_bytes(word);
            }
            if t % 64 != 0 {
                let last = &mut m.bits[i * m.words_per_row + m.words_per_row - 1];
                if *last >> (t % 64) != 0 {
                    return Err(bad(format!("row {i} has bits set past T")));
                }
            }
        }
        Ok(m)
    }

    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf).map_err(|e| Error::data(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_layout_matches_dump_format() {
        let m = ObservationMatrix::from_bit_strings(&["1101000001", "0000000000"]).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &10u64.to_le_bytes());
        // steps 0,1,3 set in the first byte, step 9 in bit 1 of the second
        assert_eq!(&bytes[16..18], &[0b0000_1011, 0b0000_0010]);
        assert_eq!(&bytes[18..20], &[0, 0]);
    }

    #[test]
    fn rejects_corrupt_dumps() {
        let m = ObservationMatrix::from_bit_strings(&["101"]).unwrap();
        let mut bytes = m.to_bytes();
        assert!(ObservationMatrix::from_bytes(&bytes[..10]).is_err());
        assert!(ObservationMatrix::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[16] |= 0b1000_0000; // a bit past T = 3
        assert!(ObservationMatrix::from_bytes(&bytes).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(ObservationMatrix::from_bit_strings(&["10", "1"]).is_err());
        assert!(ObservationMatrix::from_bit_strings(&["1x"]).is_err());
    }

    proptest! {
        #[test]
        fn dump_round_trips(rows in (1usize..6, 1usize..200).prop_flat_map(|(n, t)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), t), n)
        })) {
            let m = ObservationMatrix::from_rows(&rows).unwrap();
            let back = ObservationMatrix::from_bytes(&m.to_bytes()).unwrap();
            prop_assert_eq!(&back, &m);
            for (i, row) in rows.iter().enumerate() {
                let ones = row.iter().filter(|&&b| b).count() as u64;
                prop_assert_eq!(m.row(i).count_ones(), ones);
            }
        }
    }
}
