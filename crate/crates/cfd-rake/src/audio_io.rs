//! WAV ingest/egress (RIFF PCM, 16-bit mono) and result-record files.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::AudioSegment;

const PCM_SCALE: f64 = 32768.0;

fn u16_at(b: &[u8], o: usize) -> u16 {
    u16::from_le_bytes([b[o], b[o + 1]])
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn wav_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::WavFormat { path: path.into(), detail: detail.into() }
}

/// Decodes a 16-bit PCM mono WAV; samples scaled to [-1, 1).
///
/// Anything else (stereo, float, other bit depths, compressed formats) is
/// rejected with the offending property named.
pub fn read_wav(path: &Path) -> Result<AudioSegment> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE container"));
    }

    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    let mut offset = 12usize;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32_at(&bytes, offset + 4) as usize;
        let body_end = offset + 8 + size;
        if body_end > bytes.len() {
            return Err(wav_err(path, format!("truncated '{}' chunk", String::from_utf8_lossy(id))));
        }
        let body = &bytes[offset + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(wav_err(path, "fmt chunk shorter than 16 bytes"));
                }
                let format = u16_at(body, 0);
                if format != 1 {
                    let name = match format {
                        3 => " (IEEE float)",
                        6 => " (A-law)",
                        7 => " (mu-law)",
                        0xFFFE => " (extensible)",
                        _ => "",
                    };
                    return Err(wav_err(
                        path,
                        format!("audio format {format}{name} unsupported, expected PCM (1)"),
                    ));
                }
                let channels = u16_at(body, 2);
                if channels != 1 {
                    return Err(wav_err(
                        path,
                        format!("{channels} channels unsupported, expected mono"),
                    ));
                }
                let bits = u16_at(body, 14);
                if bits != 16 {
                    return Err(wav_err(
                        path,
                        format!("{bits} bits per sample unsupported, expected 16"),
                    ));
                }
                sample_rate = Some(u32_at(body, 4));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        offset = body_end + size % 2;
    }

    let sample_rate = sample_rate.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    let samples = data
        .chunks_exact(2)
        .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / PCM_SCALE)
        .collect();
    Ok(AudioSegment { samples, sample_rate })
}

/// Writes 16-bit PCM mono; samples are clamped to the representable range.
pub fn write_wav(seg: &AudioSegment, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let data_len = (seg.samples.len() * 2) as u32;

    let mut header = Vec::with_capacity(44);
    header.extend_from_slice(b"RIFF");
    header.extend_from_slice(&(36 + data_len).to_le_bytes());
    header.extend_from_slice(b"WAVEfmt ");
    header.extend_from_slice(&16u32.to_le_bytes());
    header.extend_from_slice(&1u16.to_le_bytes()); // PCM
    header.extend_from_slice(&1u16.to_le_bytes()); // mono
    header.extend_from_slice(&seg.sample_rate.to_le_bytes());
    header.extend_from_slice(&(seg.sample_rate * 2).to_le_bytes());
    header.extend_from_slice(&2u16.to_le_bytes());
    header.extend_from_slice(&16u16.to_le_bytes());
    header.extend_from_slice(b"data");
    header.extend_from_slice(&data_len.to_le_bytes());
    out.write_all(&header).map_err(|e| Error::io(path, e))?;

    for &s in &seg.samples {
        let q = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.write_all(&q.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One estimate, as written to result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub input: String,
    pub start_s: f64,
    pub end_s: f64,
    pub f_d_hz: f64,
    pub score: f64,
    pub is_speech: bool,
    pub pitch_var_hz2: f64,
    /// Secondary maxima as (shift Hz, score) pairs.
    pub secondary: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl ResultFormat {
    pub fn from_name(name: &str) -> Option<ResultFormat> {
        match name.to_ascii_lowercase().as_str() {
            "csv" => Some(ResultFormat::Csv),
            "json" => Some(ResultFormat::Json),
            _ => None,
        }
    }
}

pub const RESULT_CSV_HEADER: &str =
    "input,start_s,end_s,f_d_hz,score,is_speech,pitch_var_hz2,secondary";

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn encode_secondary(pairs: &[(f64, f64)]) -> String {
    pairs.iter().map(|(hz, s)| format!("{hz}:{s}")).collect::<Vec<_>>().join(";")
}

fn decode_secondary(field: &str, path: &Path) -> Result<Vec<(f64, f64)>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|pair| {
            let (hz, s) = pair.split_once(':').ok_or_else(|| Error::Parse {
                path: path.into(),
                detail: format!("secondary entry '{pair}' is not 'hz:score'"),
            })?;
            Ok((
                hz.parse().map_err(|e| Error::Parse {
                    path: path.into(),
                    detail: format!("secondary hz '{hz}': {e}"),
                })?,
                s.parse().map_err(|e| Error::Parse {
                    path: path.into(),
                    detail: format!("secondary score '{s}': {e}"),
                })?,
            ))
        })
        .collect()
}

/// Writes records as CSV (fixed header) or a JSON array.
pub fn write_results(records: &[ResultRecord], path: &Path, format: ResultFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ResultFormat::Csv => {
            writeln!(out, "{RESULT_CSV_HEADER}").map_err(|e| Error::io(path, e))?;
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_quote(&r.input),
                    r.start_s,
                    r.end_s,
                    r.f_d_hz,
                    r.score,
                    r.is_speech,
                    r.pitch_var_hz2,
                    csv_quote(&encode_secondary(&r.secondary)),
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
        ResultFormat::Json => {
            let text = serde_json::to_string_pretty(records)
                .map_err(|e| Error::Parse { path: path.into(), detail: e.to_string() })?;
            writeln!(out, "{text}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

/// Reads records back from either format (detected by the requested format,
/// not the extension).
pub fn read_results(path: &Path, format: ResultFormat) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ResultFormat::Json => serde_json::from_str(&text)
            .map_err(|e| Error::Parse { path: path.into(), detail: e.to_string() }),
        ResultFormat::Csv => {
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == RESULT_CSV_HEADER => {}
                _ => {
                    return Err(Error::Parse {
                        path: path.into(),
                        detail: format!("missing header '{RESULT_CSV_HEADER}'"),
                    })
                }
            }
            let mut records = Vec::new();
            for (i, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let f = split_csv_line(line);
                if f.len() != 8 {
                    return Err(Error::Parse {
                        path: path.into(),
                        detail: format!("row {}: expected 8 fields, got {}", i + 2, f.len()),
                    });
                }
                let num = |s: &str, what: &str| -> Result<f64> {
                    s.parse().map_err(|e| Error::Parse {
                        path: path.into(),
                        detail: format!("row {}: {what} '{s}': {e}", i + 2),
                    })
                };
                records.push(ResultRecord {
                    input: f[0].clone(),
                    start_s: num(&f[1], "start_s")?,
                    end_s: num(&f[2], "end_s")?,
                    f_d_hz: num(&f[3], "f_d_hz")?,
                    score: num(&f[4], "score")?,
                    is_speech: f[5].parse().map_err(|_| Error::Parse {
                        path: path.into(),
                        detail: format!("row {}: is_speech '{}'", i + 2, f[5]),
                    })?,
                    pitch_var_hz2: num(&f[6], "pitch_var_hz2")?,
                    secondary: decode_secondary(&f[7], path)?,
                });
            }
            Ok(records)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn reads_zero_samples() {
        let dir = tmp();
        let path = dir.path().join("z.wav");
        write_wav(&AudioSegment::new(vec![0.0; 8000], 8000), &path).unwrap();
        let seg = read_wav(&path).unwrap();
        assert_eq!(seg.sample_rate, 8000);
        assert_eq!(seg.samples.len(), 8000);
        assert!(seg.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_square_wave_scaling() {
        let dir = tmp();
        let path = dir.path().join("sq.wav");
        // Hand-assembled file with raw 32767 samples.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 8).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        for v in [1u16, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        for v in [2u16, 16] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&8u32.to_le_bytes());
        for v in [32767i16, 32767, -32768, -32768] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();

        let seg = read_wav(&path).unwrap();
        assert_eq!(seg.samples[0], 32767.0 / 32768.0);
        assert_eq!(seg.samples[2], -1.0);
    }

    #[test]
    fn round_trip_is_within_quantization() {
        let dir = tmp();
        let path = dir.path().join("rt.wav");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.99..0.99)).collect();
        let seg = AudioSegment::new(samples.clone(), 8000);
        write_wav(&seg, &path).unwrap();
        let back = read_wav(&path).unwrap();
        let max_err = samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max error {max_err}");
    }

    #[test]
    fn rejects_stereo_naming_the_property() {
        let dir = tmp();
        let path = dir.path().join("st.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&36u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        for v in [1u16, 2] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&32000u32.to_le_bytes());
        for v in [4u16, 16] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("2 channels"), "{err}");
    }

    #[test]
    fn rejects_float_format_naming_the_property() {
        let dir = tmp();
        let path = dir.path().join("f32.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&36u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        for v in [3u16, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&32000u32.to_le_bytes());
        for v in [4u16, 32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("format 3") && err.contains("float"), "{err}");
    }

    #[test]
    fn rejects_non_wav_bytes() {
        let dir = tmp();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"definitely not audio").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::WavFormat { .. })));
    }

    fn sample_records() -> Vec<ResultRecord> {
        vec![
            ResultRecord {
                input: "dir/a,b.wav".into(),
                start_s: 0.0,
                end_s: 12.5,
                f_d_hz: 300.25,
                score: -12345.678,
                is_speech: true,
                pitch_var_hz2: 144.0,
                secondary: vec![(1098.0, -13000.5), (998.25, -13100.0)],
            },
            ResultRecord {
                input: "c.wav".into(),
                start_s: 0.0,
                end_s: 3.0,
                f_d_hz: 0.1,
                score: 7.0,
                is_speech: false,
                pitch_var_hz2: 0.0,
                secondary: Vec::new(),
            },
        ]
    }

    #[test]
    fn empty_records_yield_header_only_csv() {
        let dir = tmp();
        let path = dir.path().join("empty.csv");
        write_results(&[], &path, ResultFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{RESULT_CSV_HEADER}\n"));
        assert!(read_results(&path, ResultFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn one_record_is_one_row() {
        let dir = tmp();
        let path = dir.path().join("one.csv");
        write_results(&sample_records()[..1], &path, ResultFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tmp();
        let path = dir.path().join("r.csv");
        let records = sample_records();
        write_results(&records, &path, ResultFormat::Csv).unwrap();
        assert_eq!(read_results(&path, ResultFormat::Csv).unwrap(), records);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let dir = tmp();
        let path = dir.path().join("r.json");
        let records = sample_records();
        write_results(&records, &path, ResultFormat::Json).unwrap();
        assert_eq!(read_results(&path, ResultFormat::Json).unwrap(), records);
    }
}
