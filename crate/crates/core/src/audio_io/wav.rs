//! Minimal RIFF/WAVE codec: reads PCM16, PCM24 and IEEE float32, writes
//! float32. Unknown chunks are skipped; declared-but-missing sample bytes
//! are reported as truncation rather than silently shortened.

use super::{AudioClip, AudioError};
use std::fs;
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.bytes.len() {
            return None;
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Some(out)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Decode a WAV file. Integer samples are scaled to [-1, 1] by the type's
/// maximum magnitude (so i16 -32768 maps to exactly -1.0).
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| AudioError::Unreadable {
        path: path_str.clone(),
        source,
    })?;
    decode_wav(&bytes, &path_str)
}

fn decode_wav(bytes: &[u8], path: &str) -> Result<AudioClip, AudioError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let not_wave = || AudioError::NotWave { path: path.to_string() };
    if cur.take(4) != Some(b"RIFF") {
        return Err(not_wave());
    }
    let _riff_size = cur.u32().ok_or_else(not_wave)?;
    if cur.take(4) != Some(b"WAVE") {
        return Err(not_wave());
    }

    let mut fmt: Option<FmtChunk> = None;
    loop {
        let id = match cur.take(4) {
            Some(id) => id,
            None if fmt.is_some() => {
                return Err(AudioError::Malformed {
                    path: path.to_string(),
                    detail: "no data chunk".into(),
                })
            }
            None => return Err(not_wave()),
        };
        let size = cur.u32().ok_or_else(|| AudioError::Malformed {
            path: path.to_string(),
            detail: "chunk header cut short".into(),
        })? as usize;

        match id {
            b"fmt " => {
                let body = cur.take(size).ok_or_else(|| AudioError::Malformed {
                    path: path.to_string(),
                    detail: "fmt chunk cut short".into(),
                })?;
                if size < 16 {
                    return Err(AudioError::Malformed {
                        path: path.to_string(),
                        detail: format!("fmt chunk too small ({size} bytes)"),
                    });
                }
                let mut f = Cursor { bytes: body, pos: 0 };
                let format_tag = f.u16().unwrap();
                let channels = f.u16().unwrap();
                let sample_rate = f.u32().unwrap();
                let _byte_rate = f.u32().unwrap();
                let _block_align = f.u16().unwrap();
                let bits_per_sample = f.u16().unwrap();
                fmt = Some(FmtChunk { format_tag, channels, sample_rate, bits_per_sample });
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| AudioError::Malformed {
                    path: path.to_string(),
                    detail: "data chunk before fmt chunk".into(),
                })?;
                if cur.remaining() < size {
                    return Err(AudioError::TruncatedData {
                        path: path.to_string(),
                        expected: size,
                        found: cur.remaining(),
                    });
                }
                let data = cur.take(size).unwrap();
                return decode_samples(&fmt, data, path);
            }
            _ => {
                // Skip unknown chunks, honoring the RIFF even-byte padding.
                let padded = size + (size & 1);
                if cur.take(padded).is_none() {
                    return Err(AudioError::Malformed {
                        path: path.to_string(),
                        detail: "chunk body cut short".into(),
                    });
                }
            }
        }
    }
}

fn decode_samples(fmt: &FmtChunk, data: &[u8], path: &str) -> Result<AudioClip, AudioError> {
    let unsupported = || AudioError::UnsupportedCodec {
        path: path.to_string(),
        format_tag: fmt.format_tag,
        bits_per_sample: fmt.bits_per_sample,
    };
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(AudioError::Malformed {
            path: path.to_string(),
            detail: "zero channel count or sample rate".into(),
        });
    }
    let samples: Vec<f64> = match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_PCM, 24) => data
            .chunks_exact(3)
            .map(|b| {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        _ => return Err(unsupported()),
    };
    AudioClip::new(samples, fmt.sample_rate, fmt.channels).map_err(|_| AudioError::Malformed {
        path: path.to_string(),
        detail: "sample count not a multiple of channel count".into(),
    })
}

/// Write the clip as an IEEE float32 WAV. Samples are clamped to [-1, 1]
/// on export only.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes = encode_wav(clip);
    fs::write(path, bytes).map_err(|source| AudioError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}

fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 4;
    let byte_rate = clip.sample_rate * clip.channels as u32 * 4;
    let block_align = clip.channels * 4;

    let mut out = Vec::with_capacity(58 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((50 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&18u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&clip.channels.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes()); // cbSize for non-PCM fmt
    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&(clip.frames() as u32).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&(s.clamp(-1.0, 1.0) as f32).to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference byte-level WAV builder, independent of `encode_wav`.
    fn raw_wav(format_tag: u16, bits: u16, channels: u16, rate: u32, frames: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + frames.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format_tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let block = channels * bits / 8;
        out.extend_from_slice(&(rate * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
        out.extend_from_slice(frames);
        out
    }

    #[test]
    fn silence_roundtrip() {
        let data = vec![0u8; 16_000 * 2];
        let bytes = raw_wav(FORMAT_PCM, 16, 1, 16_000, &data);
        let clip = decode_wav(&bytes, "mem").unwrap();
        assert_eq!(clip.samples.len(), 16_000);
        assert_eq!(clip.sample_rate, 16_000);
        assert_eq!(clip.channels, 1);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pcm16_scale_boundaries() {
        let mut data = Vec::new();
        data.extend_from_slice(&(-32768i16).to_le_bytes());
        data.extend_from_slice(&32767i16.to_le_bytes());
        data.extend_from_slice(&0i16.to_le_bytes());
        let clip = decode_wav(&raw_wav(FORMAT_PCM, 16, 1, 8_000, &data), "mem").unwrap();
        assert_eq!(clip.samples[0], -1.0);
        assert_eq!(clip.samples[1], 32767.0 / 32768.0);
        assert_eq!(clip.samples[2], 0.0);
    }

    #[test]
    fn pcm24_scale_boundaries() {
        // -8388608 and +8388607 in little-endian 24-bit two's complement.
        let data = [0x00, 0x00, 0x80, 0xff, 0xff, 0x7f];
        let clip = decode_wav(&raw_wav(FORMAT_PCM, 24, 1, 8_000, &data), "mem").unwrap();
        assert_eq!(clip.samples[0], -1.0);
        assert_eq!(clip.samples[1], 8_388_607.0 / 8_388_608.0);
    }

    #[test]
    fn stereo_44k_reference_writer_roundtrip() {
        // 2 s of stereo at 44.1 kHz built with the reference writer.
        let frames_count = 2 * 44_100;
        let mut data = Vec::with_capacity(frames_count * 4);
        let mut expect = Vec::with_capacity(frames_count * 2);
        for i in 0..frames_count {
            let l = ((i % 2000) as i32 - 1000) as i16;
            let r = -(l / 2);
            data.extend_from_slice(&l.to_le_bytes());
            data.extend_from_slice(&r.to_le_bytes());
            expect.push(l as f64 / 32768.0);
            expect.push(r as f64 / 32768.0);
        }
        let clip = decode_wav(&raw_wav(FORMAT_PCM, 16, 2, 44_100, &data), "mem").unwrap();
        assert_eq!(clip.channels, 2);
        assert_eq!(clip.sample_rate, 44_100);
        assert_eq!(clip.samples.len(), 176_400);
        assert_eq!(clip.samples, expect);
    }

    #[test]
    fn float32_write_read_is_exact() {
        let samples: Vec<f64> = (0..1000)
            .map(|i| ((i as f32) * 0.001).sin() as f64)
            .collect();
        let clip = AudioClip::mono(samples, 16_000);
        let bytes = encode_wav(&clip);
        let back = decode_wav(&bytes, "mem").unwrap();
        assert_eq!(back.samples, clip.samples);
        assert_eq!(back.sample_rate, clip.sample_rate);
        assert_eq!(back.channels, clip.channels);
    }

    #[test]
    fn truncated_data_reported_distinctly() {
        let data = vec![0u8; 100];
        let mut bytes = raw_wav(FORMAT_PCM, 16, 1, 8_000, &data);
        bytes.truncate(bytes.len() - 40);
        match decode_wav(&bytes, "mem") {
            Err(AudioError::TruncatedData { expected, found, .. }) => {
                assert_eq!(expected, 100);
                assert_eq!(found, 60);
            }
            other => panic!("expected TruncatedData, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_codec_reported_distinctly() {
        // 8-bit PCM is outside the supported set.
        let bytes = raw_wav(FORMAT_PCM, 8, 1, 8_000, &[0u8; 4]);
        match decode_wav(&bytes, "mem") {
            Err(AudioError::UnsupportedCodec { format_tag, bits_per_sample, .. }) => {
                assert_eq!(format_tag, 1);
                assert_eq!(bits_per_sample, 8);
            }
            other => panic!("expected UnsupportedCodec, got {other:?}"),
        }
    }

    #[test]
    fn non_wave_bytes_rejected() {
        assert!(matches!(
            decode_wav(b"OggS\x00\x00\x00\x00\x00\x00\x00\x00", "mem"),
            Err(AudioError::NotWave { .. })
        ));
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let data = vec![0u8, 0, 1, 0];
        let mut bytes = raw_wav(FORMAT_PCM, 16, 1, 8_000, &data);
        // Splice a LIST chunk (odd size, so padding applies) before data.
        let insert_at = 12;
        let mut chunk = Vec::new();
        chunk.extend_from_slice(b"LIST");
        chunk.extend_from_slice(&3u32.to_le_bytes());
        chunk.extend_from_slice(&[1, 2, 3, 0]);
        bytes.splice(insert_at..insert_at, chunk);
        let clip = decode_wav(&bytes, "mem").unwrap();
        assert_eq!(clip.samples.len(), 2);
    }

    #[test]
    fn missing_file_is_unreadable() {
        assert!(matches!(
            load_wav("/nonexistent/definitely_missing.wav"),
            Err(AudioError::Unreadable { .. })
        ));
    }
}
