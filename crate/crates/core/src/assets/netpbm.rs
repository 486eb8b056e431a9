//! PFM (HDR float images), binary PGM (integer masks) and PPM previews.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::texture::{MaskImage, TextureImage};
use crate::error::{Error, FormatError, Result};

/// Whitespace-separated header tokens, skipping `#` comments. Returns the tokens and the
/// offset just past the single whitespace byte that terminates the last one.
fn header_tokens(bytes: &[u8], count: usize) -> std::result::Result<(Vec<String>, usize), FormatError> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(FormatError::MalformedHeader("unexpected end of header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        if tokens.len() == count {
            return Ok((tokens, bytes.len()));
        }
        return Err(FormatError::MalformedHeader("missing payload".into()));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(token: &str) -> std::result::Result<usize, FormatError> {
    match token.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(FormatError::MalformedHeader(format!("bad dimension {token:?}"))),
    }
}

pub fn decode_pfm(bytes: &[u8]) -> std::result::Result<TextureImage, FormatError> {
    let channels = match bytes.get(..2) {
        Some(b"PF") => 3,
        Some(b"Pf") => 1,
        _ => return Err(FormatError::NotPfm),
    };
    if bytes.get(2).is_some_and(|b| !b.is_ascii_whitespace()) {
        return Err(FormatError::NotPfm);
    }
    let (tokens, offset) = header_tokens(&bytes[2..], 3)?;
    let width = parse_dim(&tokens[0])?;
    let height = parse_dim(&tokens[1])?;
    let scale: f64 = tokens[2]
        .parse()
        .map_err(|_| FormatError::MalformedHeader(format!("bad scale {:?}", tokens[2])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::MalformedHeader(format!("bad scale {scale}")));
    }
    let little_endian = scale < 0.0;
    let payload = &bytes[2 + offset..];
    let count = width * height * channels;
    let expected = count * 4;
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !v.is_finite() {
            return Err(FormatError::NonFinite(i));
        }
        data.push(v as f64);
    }
    Ok(TextureImage::from_data(width, height, channels, data).expect("shape checked"))
}

/// Canonical encoding: `-1.0` scale line, little-endian payload, rows as stored.
pub fn encode_pfm(image: &TextureImage) -> std::result::Result<Vec<u8>, FormatError> {
    if let Some(i) = image.first_non_finite() {
        return Err(FormatError::NonFinite(i));
    }
    let tag = if image.channels() == 3 { "PF" } else { "Pf" };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", image.width(), image.height()).into_bytes();
    out.reserve(image.data().len() * 4);
    for &v in image.data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(FormatError::NonFinite(0));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<TextureImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes).map_err(|e| Error::format(path, e))
}

pub fn write_pfm(image: &TextureImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pfm(image).map_err(|e| Error::format(path, e))?;
    write_atomic(path, &bytes)
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<MaskImage, FormatError> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err(FormatError::AsciiPgm),
        _ => return Err(FormatError::NotPgm),
    }
    let (tokens, offset) = header_tokens(&bytes[2..], 3)?;
    let width = parse_dim(&tokens[0])?;
    let height = parse_dim(&tokens[1])?;
    let maxval: u32 = tokens[2]
        .parse()
        .map_err(|_| FormatError::MalformedHeader(format!("bad maxval {:?}", tokens[2])))?;
    if maxval == 0 {
        return Err(FormatError::MalformedHeader("maxval 0".into()));
    }
    if maxval > 65535 {
        return Err(FormatError::MaxvalTooLarge(maxval));
    }
    let payload = &bytes[2 + offset..];
    let wide = maxval >= 256;
    let count = width * height;
    let expected = if wide { count * 2 } else { count };
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let ids = if wide {
        payload[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    } else {
        payload[..expected].iter().map(|&b| b as u32).collect()
    };
    Ok(MaskImage::from_ids(width, height, ids).expect("shape checked"))
}

pub fn encode_pgm(mask: &MaskImage) -> std::result::Result<Vec<u8>, FormatError> {
    let max = mask.max_id();
    if max > 65535 {
        return Err(FormatError::MaxvalTooLarge(max));
    }
    let maxval = if max < 256 { 255 } else { 65535 };
    let mut out = format!("P5\n{} {}\n{}\n", mask.width(), mask.height(), maxval).into_bytes();
    for &id in mask.ids() {
        if maxval == 255 {
            out.push(id as u8);
        } else {
            out.extend_from_slice(&(id as u16).to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<MaskImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| Error::format(path, e))
}

pub fn write_mask_pgm(mask: &MaskImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(mask).map_err(|e| Error::format(path, e))?;
    write_atomic(path, &bytes)
}

/// Gamma-2.2 display value of a linear HDR sample, clamped to `[0, 1]`.
pub fn tonemap(v: f64) -> f64 {
    v.clamp(0.0, 1.0).powf(1.0 / 2.2)
}

/// 8-bit binary PPM preview; rows are flipped to top-first on output.
pub fn write_ppm_preview(image: &TextureImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width(), image.height());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for row in (0..h).rev() {
        for x in 0..w {
            let c = image.rgb(row * w + x);
            for v in c.to_array() {
                out.push((tonemap(v) * 255.0).round() as u8);
            }
        }
    }
    write_atomic(path, &out)
}

/// Writes through a sibling temporary file so readers never observe partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn le_floats(values: &[f32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn pfm_rgb_little_endian() {
        let mut bytes = b"PF\n2 1\n-1.0\n".to_vec();
        bytes.extend(le_floats(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let img = decode_pfm(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 1, 3));
        assert_eq!(img.data(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(encode_pfm(&img).unwrap(), bytes);
    }

    #[test]
    fn pfm_big_endian_scale() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend(2.5f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().data(), &[2.5]);
    }

    #[test]
    fn pfm_gray_canonical_write() {
        let img = TextureImage::filled(1, 1, &[0.5]);
        let bytes = encode_pfm(&img).unwrap();
        let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
        expected.extend(0.5f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn pfm_errors_are_distinct() {
        assert_eq!(decode_pfm(b"P6\n1 1\n255\n\0\0\0").unwrap_err(), FormatError::NotPfm);
        assert!(matches!(
            decode_pfm(b"PF\n1 x\n-1.0\n").unwrap_err(),
            FormatError::MalformedHeader(_)
        ));
        assert_eq!(
            decode_pfm(b"Pf\n1 1\n-1.0\n\0\0").unwrap_err(),
            FormatError::Truncated {
                expected: 4,
                found: 2
            }
        );
        let mut nan = b"Pf\n1 1\n-1.0\n".to_vec();
        nan.extend(f32::NAN.to_le_bytes());
        assert_eq!(decode_pfm(&nan).unwrap_err(), FormatError::NonFinite(0));
    }

    #[test]
    fn pfm_refuses_non_finite_write() {
        let img = TextureImage::filled(1, 1, &[f64::INFINITY]);
        assert_eq!(encode_pfm(&img).unwrap_err(), FormatError::NonFinite(0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        assert!(write_pfm(&img, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn pgm_8_and_16_bit() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 1, 1, 2]);
        assert_eq!(decode_pgm(&bytes).unwrap().ids(), &[0, 1, 1, 2]);

        let mut wide = b"P5 2 1 65535\n".to_vec();
        wide.extend([0x01, 0x02, 0xff, 0xfe]);
        assert_eq!(decode_pgm(&wide).unwrap().ids(), &[0x0102, 0xfffe]);
    }

    #[test]
    fn pgm_rejections() {
        assert_eq!(decode_pgm(b"P2\n1 1\n255\n0\n").unwrap_err(), FormatError::AsciiPgm);
        assert_eq!(
            decode_pgm(b"P5\n1 1\n70000\n\0\0").unwrap_err(),
            FormatError::MaxvalTooLarge(70000)
        );
        assert_eq!(decode_pgm(b"P6\n1 1\n255\n\0").unwrap_err(), FormatError::NotPgm);
    }

    #[test]
    fn pgm_header_comments() {
        let mut bytes = b"P5\n# made by hand\n1 1\n255\n".to_vec();
        bytes.push(7);
        assert_eq!(decode_pgm(&bytes).unwrap().ids(), &[7]);
    }

    proptest! {
        #[test]
        fn pfm_roundtrip(w in 1usize..6, h in 1usize..6, rgb in any::<bool>(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let c = if rgb { 3 } else { 1 };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data = (0..w * h * c).map(|_| rng.gen_range(-1e4f32..1e4) as f64).collect();
            let img = TextureImage::from_data(w, h, c, data).unwrap();
            let bytes = encode_pfm(&img).unwrap();
            let back = decode_pfm(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_pfm(&back).unwrap(), bytes);
        }

        #[test]
        fn pgm_roundtrip(w in 1usize..6, h in 1usize..6, ids in proptest::collection::vec(0u32..65536, 36)) {
            let mask = MaskImage::from_ids(w, h, ids[..w * h].to_vec()).unwrap();
            let back = decode_pgm(&encode_pgm(&mask).unwrap()).unwrap();
            prop_assert_eq!(back, mask);
        }
    }
}
