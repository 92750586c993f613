//! Minimal NPY v1.0 reader/writer for the two array kinds the toolkit
//! exchanges: 2-D little-endian `float32` matrices and 1-D little-endian
//! `int64` vectors.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    I64,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::I64 => "<i8",
        }
    }

    fn item_size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::I64 => 8,
        }
    }
}

/// Raw decoded array: dtype, shape and the little-endian payload.
#[derive(Debug, Clone)]
pub struct RawArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl RawArray {
    pub fn as_f32(&self) -> Vec<f32> {
        self.data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.data
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect()
    }
}

pub fn header_string(dtype: Dtype, shape: &[usize]) -> String {
    let shape_str = match shape {
        [n] => format!("({},)", n),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // magic(6) + version(2) + header_len(2) + dict + padding + '\n'
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    format!("{}{}\n", dict, " ".repeat(pad))
}

pub fn encode(dtype: Dtype, shape: &[usize], payload: &[u8]) -> Vec<u8> {
    let header = header_string(dtype, shape);
    let mut out = Vec::with_capacity(10 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_file(path: &Path, dtype: Dtype, shape: &[usize], payload: &[u8]) -> Result<()> {
    let bytes = encode(dtype, shape, payload);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<RawArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<RawArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic string".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY preamble".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        _ => {
            return Err(Error::Format(format!(
                "unsupported NPY version {}.{}",
                major, minor
            )))
        }
    };
    let header_end = header_start + header_len;
    if bytes.len() < header_end {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let header = std::str::from_utf8(&bytes[header_start..header_end])
        .map_err(|_| Error::Format("NPY header is not valid text".into()))?;
    let (dtype, fortran, shape) = parse_header(header)?;
    if fortran {
        return Err(Error::Format(
            "fortran_order arrays are not supported".into(),
        ));
    }
    let count: usize = shape.iter().product();
    let expected = count * dtype.item_size();
    let payload = &bytes[header_end..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "shape {:?} needs {} data bytes, file holds {}",
            shape,
            expected,
            payload.len()
        )));
    }
    Ok(RawArray {
        dtype,
        shape,
        data: payload.to_vec(),
    })
}

fn parse_header(header: &str) -> Result<(Dtype, bool, Vec<usize>)> {
    let h = header.trim();
    if !h.starts_with('{') || !h.ends_with('}') {
        return Err(Error::Format(format!("malformed header dict: {}", h)));
    }
    let descr = dict_value(h, "descr")?;
    let descr = descr.trim().trim_matches(|c| c == '\'' || c == '"');
    let dtype = match descr {
        "<f4" => Dtype::F32,
        "<i8" => Dtype::I64,
        other => {
            return Err(Error::Format(format!(
                "unsupported dtype '{}' (expected <f4 or <i8)",
                other
            )))
        }
    };
    let fortran = match dict_value(h, "fortran_order")?.trim() {
        "False" => false,
        "True" => true,
        other => return Err(Error::Format(format!("bad fortran_order '{}'", other))),
    };
    let shape_raw = dict_value(h, "shape")?;
    let inner = shape_raw
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Format(format!("bad shape '{}'", shape_raw)))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad shape entry '{}'", s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dtype, fortran, shape))
}

/// Extracts the raw text of `key`'s value from a Python dict literal.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let needle_single = format!("'{}'", key);
    let needle_double = format!("\"{}\"", key);
    let pos = dict
        .find(&needle_single)
        .map(|p| p + needle_single.len())
        .or_else(|| dict.find(&needle_double).map(|p| p + needle_double.len()))
        .ok_or_else(|| Error::Format(format!("header lacks key '{}'", key)))?;
    let rest = dict[pos..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| Error::Format(format!("expected ':' after '{}'", key)))?;
    let rest = rest.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| Error::Format(format!("unterminated value for '{}'", key)))?;
    Ok(&rest[..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_byte_aligned_and_newline_terminated() {
        for shape in [vec![4usize, 3], vec![3], vec![100000, 2048]] {
            let h = header_string(Dtype::F32, &shape);
            assert_eq!((10 + h.len()) % 64, 0);
            assert!(h.ends_with('\n'));
        }
    }

    #[test]
    fn header_matches_numpy_text() {
        let h = header_string(Dtype::I64, &[3]);
        assert!(h.starts_with("{'descr': '<i8', 'fortran_order': False, 'shape': (3,), }"));
        let h = header_string(Dtype::F32, &[4, 3]);
        assert!(h.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (4, 3), }"));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        // header claims 2x3 floats, payload carries 2x2
        let payload = vec![0u8; 2 * 2 * 4];
        let bytes = encode(Dtype::F32, &[2, 3], &payload);
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode(Dtype::I64, &[1], &0i64.to_le_bytes());
        bytes[1] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn parses_numpy_v2_header() {
        let dict = "{'descr': '<i8', 'fortran_order': False, 'shape': (2,), }\n";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&[2, 0]);
        bytes.extend_from_slice(&(dict.len() as u32).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(&5i64.to_le_bytes());
        bytes.extend_from_slice(&7i64.to_le_bytes());
        let raw = decode(&bytes).unwrap();
        assert_eq!(raw.as_i64(), vec![5, 7]);
    }
}
