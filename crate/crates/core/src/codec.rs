//! Little-endian helpers shared by the binary file formats.
//!
//! Raw fixed-point samples are stored in `ceil(total_bits / 8)` bytes,
//! two's complement, sign-extended on read.

use crate::error::{Error, Result};

pub(crate) fn sample_bytes(total_bits: u32) -> usize {
    total_bits.div_ceil(8) as usize
}

pub(crate) fn put_raw(out: &mut Vec<u8>, raw: i64, total_bits: u32) {
    out.extend_from_slice(&raw.to_le_bytes()[..sample_bytes(total_bits)]);
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], kind: &'static str) -> Self {
        Reader { buf, pos: 0, kind }
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            kind: self.kind,
            msg: msg.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn raw(&mut self, total_bits: u32) -> Result<i64> {
        let n = sample_bytes(total_bits);
        let bytes = self.take(n)?;
        let mut wide = [0u8; 8];
        wide[..n].copy_from_slice(bytes);
        let shift = 64 - 8 * n as u32;
        let v = (i64::from_le_bytes(wide) << shift) >> shift;
        // stored width may exceed total_bits; reject out-of-range samples
        let lim = 1i64 << (total_bits - 1);
        if v < -lim || v >= lim {
            return Err(self.err(format!("sample {v} exceeds {total_bits} bits")));
        }
        Ok(v)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
