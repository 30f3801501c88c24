//! Mono 16-bit PCM WAV ingestion, plus FLAC for corpus layouts that ship it.
//!
//! Samples are normalized by 1/32768 so that the most negative code maps
//! exactly to -1.0 and every sample lies in [-1, 1].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors raised while reading, writing or clipping audio.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: malformed WAV at byte {offset}: {reason}")]
    MalformedWav {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("{path}: unsupported format at byte {offset}: {reason}")]
    UnsupportedFormat {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("{path}: file contains no samples")]
    EmptyAudio { path: PathBuf },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("sample at index {index} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A decoded utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_id: String,
}

impl AudioBuffer {
    /// Builds a buffer from samples already in [-1, 1].
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: u32,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        let source_id = source_id.into();
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio {
                path: PathBuf::from(&source_id),
            });
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample { index });
        }
        if let Some(index) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(AudioError::SampleOutOfRange { index });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_id,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

const PCM_SCALE: f64 = 32768.0;

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a RIFF/WAVE file holding 16-bit integer PCM with one channel.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav(&bytes, path, stem)
}

/// Mono FLAC of any bit depth up to 24, scaled by `2^(bits - 1)`.
pub fn read_flac(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let unsupported = |reason: String| AudioError::UnsupportedFormat {
        path: path.to_path_buf(),
        offset: 0,
        reason,
    };
    let mut reader = claxon::FlacReader::open(path).map_err(|e| match e {
        claxon::Error::IoError(source) => AudioError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => unsupported(other.to_string()),
    })?;
    let info = reader.streaminfo();
    if info.channels != 1 {
        return Err(unsupported(format!("{} channels, need mono", info.channels)));
    }
    if info.bits_per_sample > 24 {
        return Err(unsupported(format!("{} bits per sample", info.bits_per_sample)));
    }
    let scale = f64::from(1u32 << (info.bits_per_sample - 1));
    let samples = reader
        .samples()
        .map(|s| s.map(|v| f64::from(v) / scale))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| unsupported(e.to_string()))?;
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: info.sample_rate,
        source_id: stem,
    })
}

/// Reads `.flac` through [`read_flac`] and anything else as WAV.
pub fn read_audio(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("flac") => read_flac(path),
        _ => read_wav(path),
    }
}

/// Decodes WAV bytes; `path` is only used for error reporting.
pub fn decode_wav(
    bytes: &[u8],
    path: &Path,
    source_id: String,
) -> Result<AudioBuffer, AudioError> {
    let malformed = |offset: usize, reason: &str| AudioError::MalformedWav {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.to_string(),
    };
    let unsupported = |offset: usize, reason: String| AudioError::UnsupportedFormat {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };

    if bytes.len() < 12 {
        return Err(malformed(0, "file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed(0, "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed(8, "missing WAVE tag"));
    }

    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<(usize, usize)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .ok_or_else(|| malformed(pos + 4, "chunk size overflow"))?;
        match id {
            b"fmt " => {
                if size < 16 || end > bytes.len() {
                    return Err(malformed(pos + 4, "truncated fmt chunk"));
                }
                let tag = le_u16(bytes, body);
                let channels = le_u16(bytes, body + 2);
                let rate = le_u32(bytes, body + 4);
                let bits = le_u16(bytes, body + 14);
                if tag != 1 {
                    return Err(unsupported(body, format!("format tag {tag} is not integer PCM")));
                }
                if channels != 1 {
                    return Err(unsupported(body + 2, format!("{channels} channels, expected 1")));
                }
                if bits != 16 {
                    return Err(unsupported(body + 14, format!("{bits} bits per sample, expected 16")));
                }
                if rate == 0 {
                    return Err(malformed(body + 4, "zero sample rate"));
                }
                sample_rate = Some(rate);
            }
            b"data" => {
                let end = end.min(bytes.len());
                data = Some((body, end));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }

    let rate = sample_rate.ok_or_else(|| malformed(12, "no fmt chunk"))?;
    let (start, end) = data.ok_or_else(|| malformed(12, "no data chunk"))?;
    if (end - start) % 2 != 0 {
        return Err(malformed(end, "odd byte count in 16-bit data chunk"));
    }
    let samples: Vec<f64> = bytes[start..end]
        .chunks_exact(2)
        .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / PCM_SCALE)
        .collect();
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: rate,
        source_id,
    })
}

/// Quantizes a real sample to the nearest 16-bit code.
pub fn quantize(sample: f64) -> i16 {
    (sample * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes samples as a canonical 44-byte-header mono 16-bit WAV.
pub fn encode_wav(samples: &[f64], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn write_wav(
    path: impl AsRef<Path>,
    samples: &[f64],
    sample_rate_hz: u32,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let io = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&encode_wav(samples, sample_rate_hz)).map_err(io)?;
    Ok(())
}

/// Clips every value to [-1, 1].
pub fn clip_to_unit(samples: &[f64]) -> Result<Vec<f64>, AudioError> {
    samples
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            if x.is_finite() {
                Ok(x.clamp(-1.0, 1.0))
            } else {
                Err(AudioError::NonFiniteSample { index })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw_wav(bits: u16, channels: u16, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + payload.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&(16000u32 * u32::from(bits / 8)).to_le_bytes());
        out.extend_from_slice(&(bits / 8 * channels).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(payload);
        out
    }

    fn decode(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
        decode_wav(bytes, Path::new("mem.wav"), "mem".into())
    }

    #[test]
    fn extreme_codes_scale_by_32768() {
        let payload: Vec<u8> = [32767i16, 0, -32768]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let buf = decode(&raw_wav(16, 1, &payload)).unwrap();
        assert_eq!(buf.samples(), &[32767.0 / 32768.0, 0.0, -1.0]);
        assert!((buf.samples()[0] - 0.99997).abs() < 1e-5);
        assert_eq!(buf.sample_rate_hz(), 16000);
    }

    #[test]
    fn eight_bit_is_rejected() {
        let err = decode(&raw_wav(8, 1, &[1, 2, 3])).unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedFormat { .. }), "{err}");
    }

    #[test]
    fn stereo_is_rejected() {
        let err = decode(&raw_wav(16, 2, &[0, 0, 0, 0])).unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedFormat { .. }));
    }

    #[test]
    fn empty_data_chunk() {
        let err = decode(&raw_wav(16, 1, &[])).unwrap_err();
        assert!(matches!(err, AudioError::EmptyAudio { .. }));
    }

    #[test]
    fn bad_magic_reports_offset() {
        let mut bytes = raw_wav(16, 1, &[0, 0]);
        bytes[8] = b'X';
        match decode(&bytes).unwrap_err() {
            AudioError::MalformedWav { offset, .. } => assert_eq!(offset, 8),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = raw_wav(16, 1, &[0x00, 0x40]);
        // splice a LIST chunk with odd size before the data chunk
        let data_at = bytes.len() - 10;
        let extra = [b'L', b'I', b'S', b'T', 3, 0, 0, 0, 9, 9, 9, 0];
        bytes.splice(data_at..data_at, extra);
        let buf = decode(&bytes).unwrap();
        assert_eq!(buf.samples(), &[0.5]);
    }

    #[test]
    fn sine_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let sine: Vec<f64> = (0..16000)
            .map(|n| (2.0 * std::f64::consts::PI * 440.0 * n as f64 / 16000.0).sin())
            .collect();
        write_wav(&path, &sine, 16000).unwrap();
        let buf = read_wav(&path).unwrap();
        assert_eq!(buf.len(), 16000);
        assert_eq!(buf.source_id(), "sine");
        let peak = buf.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((0.999..=1.0).contains(&peak), "peak {peak}");
        for (a, b) in sine.iter().zip(buf.samples()) {
            // +1.0 saturates at 32767/32768
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn dispatch_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("a.wav");
        write_wav(&wav, &[0.5, -0.25], 16000).unwrap();
        assert_eq!(read_audio(&wav).unwrap().samples(), &[0.5, -0.25]);
        let fake = dir.path().join("b.flac");
        std::fs::copy(&wav, &fake).unwrap();
        assert!(matches!(read_audio(&fake), Err(AudioError::UnsupportedFormat { .. })));
        let missing = dir.path().join("c.flac");
        assert!(matches!(read_audio(&missing), Err(AudioError::Io { .. })));
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_to_unit(&[1.5, -2.0, 0.3]).unwrap(), vec![1.0, -1.0, 0.3]);
        assert_eq!(clip_to_unit(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            clip_to_unit(&[0.0, f64::NAN]),
            Err(AudioError::NonFiniteSample { index: 1 })
        ));
        assert!(clip_to_unit(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn clip_touches_exactly_the_out_of_range_values() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // scale chosen so that roughly 3% of gaussian-ish samples exceed 1
        let noise: Vec<f64> = (0..20000)
            .map(|_| (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0)
            .map(|x| x * 0.46)
            .collect();
        let expected = noise.iter().filter(|x| x.abs() > 1.0).count();
        let clipped = clip_to_unit(&noise).unwrap();
        let saturated = clipped
            .iter()
            .zip(&noise)
            .filter(|(c, n)| c.abs() == 1.0 && n.abs() > 1.0)
            .count();
        assert_eq!(saturated, expected);
        let frac = expected as f64 / noise.len() as f64;
        assert!(frac > 0.01 && frac < 0.06, "{frac}");
    }

    proptest! {
        #[test]
        fn wav_round_trip(samples in proptest::collection::vec(-1.0f64..(32767.0 / 32768.0), 1..400)) {
            let bytes = encode_wav(&samples, 16000);
            let buf = decode(&bytes).unwrap();
            prop_assert_eq!(buf.len(), samples.len());
            for (a, b) in samples.iter().zip(buf.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 65536.0);
            }
        }

        #[test]
        fn clip_is_idempotent(xs in proptest::collection::vec(-5.0f64..5.0, 0..200)) {
            let once = clip_to_unit(&xs).unwrap();
            let twice = clip_to_unit(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
