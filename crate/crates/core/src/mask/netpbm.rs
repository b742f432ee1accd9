//! Binary Netpbm codecs: masks as P4 bitmaps, probability maps as 16-bit P5.
//!
//! Only the binary variants are written. The readers also accept P5 masks
//! (any nonzero sample is foreground), which is what most PNG converters
//! produce for label images.

use std::fs;
use std::path::Path;

use super::grid::{BinaryMask, Grid, ProbMap};
use crate::error::{Error, Result};

pub const PGM_MAXVAL: u16 = 65535;

pub fn encode_pbm(m: &BinaryMask) -> Vec<u8> {
    let (w, h) = m.dims();
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    out.reserve(row_bytes * h);
    for y in 0..h {
        let mut row = vec![0u8; row_bytes];
        for x in 0..w {
            if m.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn encode_pgm16(p: &ProbMap) -> Vec<u8> {
    let (w, h) = p.dims();
    let mut out = format!("P5\n{w} {h}\n{PGM_MAXVAL}\n").into_bytes();
    out.reserve(2 * w * h);
    for &v in p.values() {
        let q = (v * PGM_MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let mut hdr = Header::new(bytes);
    let magic = hdr.magic()?;
    match magic {
        b'4' => {
            let w = hdr.number("width")?;
            let h = hdr.number("height")?;
            let start = hdr.finish()?;
            let row_bytes = w.div_ceil(8);
            let need = row_bytes * h;
            let body = body(bytes, start, need)?;
            let mask = BinaryMask::from_fn(w, h, |x, y| {
                body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0
            });
            Ok(mask)
        }
        b'5' => {
            let samples = decode_p5_samples(&mut hdr, bytes)?;
            Ok(BinaryMask::from_grid(samples.map(|&(s, _)| s != 0)))
        }
        other => Err(Error::format(
            1,
            format!("unsupported mask magic P{}", other as char),
        )),
    }
}

pub fn decode_probmap(bytes: &[u8]) -> Result<ProbMap> {
    let mut hdr = Header::new(bytes);
    let magic = hdr.magic()?;
    if magic != b'5' {
        return Err(Error::format(
            1,
            format!("expected P5 graymap, found P{}", magic as char),
        ));
    }
    let samples = decode_p5_samples(&mut hdr, bytes)?;
    Ok(ProbMap::from_grid_clamped(
        samples.map(|&(s, maxval)| s as f64 / maxval as f64),
    ))
}

/// Returns (sample, maxval) pairs; every sample is checked against maxval.
fn decode_p5_samples(hdr: &mut Header<'_>, bytes: &[u8]) -> Result<Grid<(u32, u32)>> {
    let w = hdr.number("width")?;
    let h = hdr.number("height")?;
    let maxval_at = hdr.pos;
    let maxval = hdr.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(maxval_at, format!("maxval {maxval} not in 1..=65535")));
    }
    let start = hdr.finish()?;
    let bps = if maxval > 255 { 2 } else { 1 };
    let body = body(bytes, start, w * h * bps)?;
    let mut data = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let s = if bps == 2 {
            u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as u32
        } else {
            body[i] as u32
        };
        if s > maxval as u32 {
            return Err(Error::format(
                start + i * bps,
                format!("sample {s} exceeds maxval {maxval}"),
            ));
        }
        data.push((s, maxval as u32));
    }
    Grid::new(w, h, data)
}

fn body(bytes: &[u8], start: usize, need: usize) -> Result<&[u8]> {
    let have = bytes.len().saturating_sub(start);
    if have < need {
        return Err(Error::format(
            bytes.len(),
            format!("truncated pixel data: need {need} bytes after offset {start}, have {have}"),
        ));
    }
    Ok(&bytes[start..start + need])
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Header { bytes, pos: 0 }
    }

    fn magic(&mut self) -> Result<u8> {
        if self.bytes.len() < 2 || self.bytes[0] != b'P' {
            return Err(Error::format(0, "missing Netpbm magic"));
        }
        self.pos = 2;
        Ok(self.bytes[1])
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let n: usize = text
            .parse()
            .map_err(|_| Error::format(start, format!("{what} out of range")))?;
        if n == 0 {
            return Err(Error::format(start, format!("{what} must be nonzero")));
        }
        Ok(n)
    }

    /// Consumes the single whitespace byte that ends the header.
    fn finish(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            Some(_) => Err(Error::format(self.pos, "expected whitespace after header")),
            None => Err(Error::format(self.pos, "truncated header")),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask(&read(path.as_ref())?)
}

pub fn save_mask(path: impl AsRef<Path>, m: &BinaryMask) -> Result<()> {
    write(path.as_ref(), &encode_pbm(m))
}

pub fn load_probmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    decode_probmap(&read(path.as_ref())?)
}

pub fn save_probmap(path: impl AsRef<Path>, p: &ProbMap) -> Result<()> {
    write(path.as_ref(), &encode_pgm16(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pbm_layout_is_msb_first_and_row_padded() {
        let m = BinaryMask::from_fn(10, 2, |x, y| (x == 0 && y == 0) || (x == 9 && y == 1));
        let bytes = encode_pbm(&m);
        assert_eq!(&bytes[..8], b"P4\n10 2\n");
        assert_eq!(&bytes[8..], &[0x80, 0x00, 0x00, 0x40]);
    }

    #[test]
    fn pgm_endpoints() {
        let p = ProbMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        let bytes = encode_pgm16(&p);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0xff, 0xff]);
        let back = decode_probmap(&bytes).unwrap();
        assert_eq!(back.values(), &[0.0, 1.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P4 # a comment\n3 # w\n 1\n\xa0";
        let m = decode_mask(bytes).unwrap();
        assert_eq!(m.bits(), &[true, false, true]);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let m = BinaryMask::full(16, 4);
        let bytes = encode_pbm(&m);
        let cut = &bytes[..bytes.len() - 1];
        match decode_mask(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(decode_mask(b"P4\n3").is_err());
        assert!(decode_mask(b"").is_err());
    }

    #[test]
    fn out_of_range_sample_names_its_offset() {
        let mut bytes = b"P5\n2 1\n200\n".to_vec();
        let start = bytes.len();
        bytes.extend_from_slice(&[10, 201]);
        match decode_probmap(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, start + 1),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn p5_masks_are_accepted() {
        let mut bytes = b"P5\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 7]);
        assert_eq!(decode_mask(&bytes).unwrap().bits(), &[false, true, true]);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(13, 5, |x, y| (x * y) % 3 == 1);
        let path = dir.path().join("nested/00000.pbm");
        save_mask(&path, &m).unwrap();
        assert_eq!(load_mask(&path).unwrap(), m);
        assert!(load_mask(dir.path().join("missing.pbm")).is_err());
    }

    proptest! {
        #[test]
        fn mask_round_trip_is_identity(
            (w, h, bits) in (1usize..20, 1usize..20)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
        ) {
            let m = BinaryMask::new(w, h, bits).unwrap();
            prop_assert_eq!(decode_mask(&encode_pbm(&m)).unwrap(), m);
        }

        #[test]
        fn probmap_round_trip_within_one_step(vals in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let n = vals.len();
            let p = ProbMap::new(n, 1, vals).unwrap();
            let back = decode_probmap(&encode_pgm16(&p)).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1.0 / PGM_MAXVAL as f64);
            }
        }
    }
}
