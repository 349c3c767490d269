//! PCM16 mono audio clips and their RIFF/WAV encoding.
//!
//! Clips may carry a free-text annotation, written as a `LIST`/`INFO`/`ICMT`
//! chunk. Fixture recordings use it to embed their transcript.

use std::f64::consts::TAU;

use thiserror::Error;

pub const SAMPLE_RATE: u32 = 22_050;

const PCM_FORMAT: u16 = 1;
const BITS_PER_SAMPLE: u16 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WavError {
    #[error("truncated wav data")]
    Truncated,
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Vec<i16>,
    annotation: Option<String>,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>) -> Self {
        Self {
            samples,
            annotation: None,
        }
    }

    pub fn silence(sample_count: usize) -> Self {
        Self::new(vec![0; sample_count])
    }

    pub fn with_annotation(mut self, text: impl Into<String>) -> Self {
        self.annotation = Some(text.into());
        self
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn annotation(&self) -> Option<&str> {
        self.annotation.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count over sample rate.
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(SAMPLE_RATE)
    }

    pub fn to_wav(&self) -> Vec<u8> {
        let data_len = (self.samples.len() * 2) as u32;
        let list_chunk = self.annotation.as_deref().map(info_chunk);
        let list_len = list_chunk.as_ref().map_or(0, |c| c.len() as u32);
        let riff_len = 4 + (8 + 16) + list_len + (8 + data_len);

        let mut out = Vec::with_capacity(riff_len as usize + 8);
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&riff_len.to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
        out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&BITS_PER_SAMPLE.to_le_bytes());
        if let Some(chunk) = list_chunk {
            out.extend_from_slice(&chunk);
        }
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_wav(bytes: &[u8]) -> Result<Self, WavError> {
        if bytes.len() < 12 {
            return Err(WavError::Truncated);
        }
        if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
            return Err(WavError::NotWave);
        }
        let mut fmt_seen = false;
        let mut annotation = None;
        let mut samples = None;
        let mut rest = &bytes[12..];
        while !rest.is_empty() {
            let (id, body, tail) = split_chunk(rest)?;
            match id {
                b"fmt " => {
                    check_format(body)?;
                    fmt_seen = true;
                }
                b"LIST" => {
                    if let Some(text) = parse_info_comment(body)? {
                        annotation = Some(text);
                    }
                }
                b"data" => {
                    if !fmt_seen {
                        return Err(WavError::MissingChunk("fmt"));
                    }
                    if body.len() % 2 != 0 {
                        return Err(WavError::Truncated);
                    }
                    samples = Some(
                        body.chunks_exact(2)
                            .map(|b| i16::from_le_bytes([b[0], b[1]]))
                            .collect(),
                    );
                }
                _ => {}
            }
            rest = tail;
        }
        Ok(Self {
            samples: samples.ok_or(WavError::MissingChunk("data"))?,
            annotation,
        })
    }
}

/// (chunk id, chunk body, rest)
type Chunk<'a> = (&'a [u8], &'a [u8], &'a [u8]);

fn split_chunk(bytes: &[u8]) -> Result<Chunk<'_>, WavError> {
    if bytes.len() < 8 {
        return Err(WavError::Truncated);
    }
    let len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let end = 8usize.checked_add(len).ok_or(WavError::Truncated)?;
    if bytes.len() < end {
        return Err(WavError::Truncated);
    }
    let padded = (end + (len & 1)).min(bytes.len());
    Ok((&bytes[0..4], &bytes[8..end], &bytes[padded..]))
}

fn check_format(body: &[u8]) -> Result<(), WavError> {
    if body.len() < 16 {
        return Err(WavError::Truncated);
    }
    let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let format = u16_at(0);
    let channels = u16_at(2);
    let rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
    let bits = u16_at(14);
    if format != PCM_FORMAT || channels != 1 || bits != BITS_PER_SAMPLE || rate != SAMPLE_RATE {
        return Err(WavError::UnsupportedFormat(format!(
            "format {format}, {channels} channel(s), {bits} bit, {rate} Hz; expected PCM16 mono {SAMPLE_RATE} Hz"
        )));
    }
    Ok(())
}

fn info_chunk(text: &str) -> Vec<u8> {
    let mut comment = text.as_bytes().to_vec();
    comment.push(0);
    let comment_len = comment.len() as u32;
    if comment.len() % 2 == 1 {
        comment.push(0);
    }
    let mut chunk = Vec::with_capacity(comment.len() + 20);
    chunk.extend_from_slice(b"LIST");
    chunk.extend_from_slice(&(4 + 8 + comment.len() as u32).to_le_bytes());
    chunk.extend_from_slice(b"INFO");
    chunk.extend_from_slice(b"ICMT");
    chunk.extend_from_slice(&comment_len.to_le_bytes());
    chunk.extend_from_slice(&comment);
    chunk
}

fn parse_info_comment(body: &[u8]) -> Result<Option<String>, WavError> {
    if body.len() < 4 || &body[0..4] != b"INFO" {
        return Ok(None);
    }
    let mut rest = &body[4..];
    while !rest.is_empty() {
        let (id, value, tail) = split_chunk(rest)?;
        if id == b"ICMT" {
            let end = value.iter().position(|&b| b == 0).unwrap_or(value.len());
            let text = String::from_utf8(value[..end].to_vec())
                .map_err(|_| WavError::UnsupportedFormat("ICMT is not utf-8".into()))?;
            return Ok(Some(text));
        }
        rest = tail;
    }
    Ok(None)
}

/// Appends `count` samples of a sine tone, starting at phase zero.
/// A frequency of zero appends silence.
pub fn push_tone(out: &mut Vec<i16>, frequency_hz: f64, count: usize, amplitude: f64) {
    let step = TAU * frequency_hz / f64::from(SAMPLE_RATE);
    out.extend((0..count).map(|n| {
        let v = (step * n as f64).sin() * amplitude * f64::from(i16::MAX);
        v.round() as i16
    }));
}

/// Cumulative sample boundary for `seconds`, rounded half up.
pub fn seconds_to_samples(seconds: f64) -> usize {
    (seconds * f64::from(SAMPLE_RATE) + 0.5).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_with_annotation() {
        let clip = AudioClip::new(vec![0, 1, -1, i16::MAX, i16::MIN]).with_annotation("good morning");
        let bytes = clip.to_wav();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(
            u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize,
            bytes.len() - 8
        );
        assert_eq!(AudioClip::from_wav(&bytes).unwrap(), clip);
    }

    #[test]
    fn wav_without_annotation() {
        let clip = AudioClip::silence(3);
        let bytes = clip.to_wav();
        assert_eq!(bytes.len(), 44 + 6);
        let back = AudioClip::from_wav(&bytes).unwrap();
        assert_eq!(back.annotation(), None);
        assert_eq!(back.samples(), &[0, 0, 0]);
    }

    #[test]
    fn odd_length_annotation_is_padded() {
        for text in ["a", "ab", "おはよう"] {
            let clip = AudioClip::new(vec![5]).with_annotation(text);
            assert_eq!(AudioClip::from_wav(&clip.to_wav()).unwrap().annotation(), Some(text));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(AudioClip::from_wav(b"RIFF"), Err(WavError::Truncated));
        assert_eq!(AudioClip::from_wav(b"RIFX\0\0\0\0WAVE"), Err(WavError::NotWave));
        let mut bytes = AudioClip::silence(10).to_wav();
        bytes.truncate(bytes.len() - 4);
        assert_eq!(AudioClip::from_wav(&bytes), Err(WavError::Truncated));
        let mut stereo = AudioClip::silence(2).to_wav();
        stereo[22] = 2;
        assert!(matches!(AudioClip::from_wav(&stereo), Err(WavError::UnsupportedFormat(_))));
        let mut rate = AudioClip::silence(2).to_wav();
        rate[24..28].copy_from_slice(&44_100u32.to_le_bytes());
        assert!(matches!(AudioClip::from_wav(&rate), Err(WavError::UnsupportedFormat(_))));
    }

    #[test]
    fn duration_is_samples_over_rate() {
        assert_eq!(AudioClip::silence(22_050).duration_seconds(), 1.0);
        assert_eq!(AudioClip::silence(0).duration_seconds(), 0.0);
    }

    #[test]
    fn tone_frequency_by_zero_crossings() {
        let mut out = Vec::new();
        push_tone(&mut out, 441.0, 22_050, 0.5);
        let rising = out.windows(2).filter(|w| w[0] < 0 && w[1] >= 0).count();
        assert!((440..=442).contains(&rising), "{rising}");
        let mut silent = Vec::new();
        push_tone(&mut silent, 0.0, 10, 0.5);
        assert!(silent.iter().all(|&s| s == 0));
    }

    #[test]
    fn sample_boundaries_round_half_up() {
        assert_eq!(seconds_to_samples(0.0), 0);
        assert_eq!(seconds_to_samples(1.0), 22_050);
        assert_eq!(seconds_to_samples(0.25), 5513);
        assert_eq!(seconds_to_samples(0.3), 6615);
    }
}
