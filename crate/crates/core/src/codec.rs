//! Canonical binary encoding.
//!
//! Integers are big-endian and fixed width. Text and byte strings carry a
//! `u32` big-endian length prefix. Hashes, keys and signatures are written
//! raw. Decoding is strict: unknown tags, non-boolean flags, invalid UTF-8
//! and trailing bytes are all errors, so every value has exactly one
//! encoding.

use crate::crypto::{PublicKeyId, Signature};
use crate::hash::Hash256;

/// Largest length-prefixed field accepted in either direction.
pub const MAX_FIELD_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("unexpected end of input while reading {0}")]
    Truncated(&'static str),
    #[error("field {field} is {len} bytes, limit is {MAX_FIELD_LEN}")]
    Oversize { field: &'static str, len: usize },
    #[error("invalid tag {tag} for {field}")]
    InvalidTag { field: &'static str, tag: u8 },
    #[error("field {0} is not valid UTF-8")]
    InvalidUtf8(&'static str),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn hash(&mut self, h: &Hash256) -> &mut Self {
        self.raw(&h.0)
    }

    pub fn key(&mut self, k: &PublicKeyId) -> &mut Self {
        self.raw(&k.0)
    }

    pub fn signature(&mut self, s: &Signature) -> &mut Self {
        self.raw(&s.0)
    }

    pub fn bytes(&mut self, field: &'static str, bytes: &[u8]) -> Result<&mut Self, CodecError> {
        if bytes.len() > MAX_FIELD_LEN {
            return Err(CodecError::Oversize {
                field,
                len: bytes.len(),
            });
        }
        self.u32(bytes.len() as u32);
        Ok(self.raw(bytes))
    }

    pub fn text(&mut self, field: &'static str, s: &str) -> Result<&mut Self, CodecError> {
        self.bytes(field, s.as_bytes())
    }

    pub fn opt_key(&mut self, k: Option<&PublicKeyId>) -> &mut Self {
        match k {
            None => self.u8(0),
            Some(k) => self.u8(1).key(k),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated(what));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N, what)?);
        Ok(out)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32, CodecError> {
        self.array(what).map(u32::from_be_bytes)
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64, CodecError> {
        self.array(what).map(u64::from_be_bytes)
    }

    pub fn hash(&mut self, what: &'static str) -> Result<Hash256, CodecError> {
        self.array(what).map(Hash256)
    }

    pub fn key(&mut self, what: &'static str) -> Result<PublicKeyId, CodecError> {
        self.array(what).map(PublicKeyId)
    }

    pub fn signature(&mut self, what: &'static str) -> Result<Signature, CodecError> {
        self.array(what).map(Signature)
    }

    pub fn bytes(&mut self, what: &'static str) -> Result<&'a [u8], CodecError> {
        let len = self.u32(what)? as usize;
        if len > MAX_FIELD_LEN {
            return Err(CodecError::Oversize { field: what, len });
        }
        self.take(len, what)
    }

    pub fn text(&mut self, what: &'static str) -> Result<String, CodecError> {
        let raw = self.bytes(what)?;
        std::str::from_utf8(raw)
            .map(str::to_owned)
            .map_err(|_| CodecError::InvalidUtf8(what))
    }

    pub fn flag(&mut self, what: &'static str) -> Result<bool, CodecError> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(CodecError::InvalidTag { field: what, tag }),
        }
    }

    pub fn opt_key(&mut self, what: &'static str) -> Result<Option<PublicKeyId>, CodecError> {
        if self.flag(what)? {
            self.key(what).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Errors unless the whole input was consumed.
    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_four_zero_bytes() {
        let mut w = Writer::new();
        w.text("k", "").unwrap();
        assert_eq!(w.into_bytes(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn integers_are_big_endian() {
        let mut w = Writer::new();
        w.u32(0x0102_0304).u64(5);
        assert_eq!(w.into_bytes(), vec![1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 5]);
    }

    #[test]
    fn oversize_field_rejected() {
        let big = vec![0u8; MAX_FIELD_LEN + 1];
        assert!(matches!(
            Writer::new().bytes("blob", &big),
            Err(CodecError::Oversize { .. })
        ));
        assert!(Writer::new().bytes("blob", &big[..MAX_FIELD_LEN]).is_ok());
    }

    #[test]
    fn strict_reader() {
        let mut r = Reader::new(&[2]);
        assert!(matches!(r.flag("f"), Err(CodecError::InvalidTag { tag: 2, .. })));

        let mut r = Reader::new(&[0, 0, 0, 5, b'a']);
        assert_eq!(r.text("t"), Err(CodecError::Truncated("t")));

        let r = Reader::new(&[1]);
        assert_eq!(r.finish(), Err(CodecError::TrailingBytes(1)));

        let mut r = Reader::new(&[0, 0, 0, 1, 0xFF]);
        assert_eq!(r.text("t"), Err(CodecError::InvalidUtf8("t")));
    }
}
