//! Binary feature files and the corpus directory layout.
//!
//! Feature file layout (little endian):
//!
//! ```text
//! "NPSF" | version u32 = 1 | hop f64 | stream count u8
//! per stream: name len u8 | name utf-8 | N u32 | T u32 | T*N f32 (frame-major)
//! control:    |P| u32 | dim u32 | T u32 | T*dim f32
//! labels:     T u32 | T u16
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Alphabet, ControlTrack, Corpus, GeneratorTruth, Split, Stream, Utterance};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NPSF";
const VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.txt";
pub const ALPHABET: &str = "alphabet.txt";
pub const TRUTH: &str = "generator_truth.txt";

pub(crate) fn encode_features(u: &Utterance) -> Result<Vec<u8>> {
    u.validate()?;
    let t = u32::try_from(u.len()).map_err(|_| Error::Dimension("utterance too long".into()))?;
    if u.streams.len() > u8::MAX as usize {
        return Err(Error::Dimension("too many streams".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u.hop_seconds.to_le_bytes());
    out.push(u.streams.len() as u8);
    for s in &u.streams {
        let name = s.name.as_bytes();
        if name.len() > u8::MAX as usize {
            return Err(Error::Dimension(format!("stream name '{}' too long", s.name)));
        }
        out.push(name.len() as u8);
        out.extend_from_slice(name);
        out.extend_from_slice(&(s.dim as u32).to_le_bytes());
        out.extend_from_slice(&t.to_le_bytes());
        s.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out.extend_from_slice(&(u.control.alphabet_size as u32).to_le_bytes());
    out.extend_from_slice(&(u.control.dim as u32).to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    u.control.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    out.extend_from_slice(&t.to_le_bytes());
    u.labels.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(out)
}

/// Byte cursor that reports the offset of any short read.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.offset(),
                format!("truncated: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.offset(), "length overflow"))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn string(&mut self, len: usize) -> Result<String> {
        let at = self.offset();
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::format(at, "invalid utf-8"))
    }
}

pub(crate) fn decode_features(buf: &[u8]) -> Result<Utterance> {
    let mut r = Reader::new(buf);
    if r.take(4)? != MAGIC {
        return Err(Error::format(0, "bad magic, expected NPSF"));
    }
    let at = r.offset();
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let hop_seconds = r.f64()?;
    let n_streams = r.u8()?;
    let mut streams = Vec::with_capacity(n_streams as usize);
    let mut frames: Option<usize> = None;
    for _ in 0..n_streams {
        let len = r.u8()? as usize;
        let name = r.string(len)?;
        let at = r.offset();
        let dim = r.u32()? as usize;
        let t = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::format(at, format!("stream '{name}' has zero width")));
        }
        check_frames(&mut frames, t, at)?;
        let data = r.f32_vec(t * dim)?;
        streams.push(Stream { name, dim, data });
    }
    let at = r.offset();
    let alphabet_size = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let t = r.u32()? as usize;
    check_frames(&mut frames, t, at)?;
    let data = r.f32_vec(t * dim)?;
    let control = ControlTrack {
        alphabet_size,
        dim,
        data,
    };
    let at = r.offset();
    let t = r.u32()? as usize;
    check_frames(&mut frames, t, at)?;
    let labels = (0..t).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
    if r.remaining() != 0 {
        return Err(Error::format(r.offset(), "trailing bytes"));
    }
    Ok(Utterance {
        hop_seconds,
        streams,
        control,
        labels,
    })
}

fn check_frames(frames: &mut Option<usize>, t: usize, at: u64) -> Result<()> {
    match frames {
        Some(f) if *f != t => Err(Error::format(at, format!("frame count {t} disagrees with {f}"))),
        _ => {
            *frames = Some(t);
            Ok(())
        }
    }
}

pub fn write_features(u: &Utterance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(u)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Utterance> {
    decode_features(&fs::read(path)?)
}

fn utterance_file(i: usize) -> String {
    format!("utt_{i:04}.npsf")
}

/// Writes feature files, `manifest.txt`, `alphabet.txt` and, for synthetic
/// corpora, `generator_truth.txt` into `dir` (created if missing).
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, (u, split)) in corpus.utterances.iter().zip(&corpus.split).enumerate() {
        let name = utterance_file(i);
        write_features(u, dir.join(&name))?;
        writeln!(manifest, "{name} {}", split.tag()).unwrap();
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    let mut alphabet = corpus.alphabet.symbols().join("\n");
    alphabet.push('\n');
    fs::write(dir.join(ALPHABET), alphabet)?;
    match &corpus.truth {
        Some(truth) => fs::write(dir.join(TRUTH), format_truth(&corpus.alphabet, truth))?,
        None => {
            if dir.join(TRUTH).exists() {
                fs::remove_file(dir.join(TRUTH))?;
            }
        }
    }
    Ok(())
}

fn join_floats(v: &[f32]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn format_truth(alphabet: &Alphabet, truth: &GeneratorTruth) -> String {
    let mut out = String::new();
    for (id, sym) in alphabet.symbols().iter().enumerate() {
        writeln!(
            out,
            "{sym} {} {} {}",
            u8::from(truth.voiced[id]),
            join_floats(&truth.harmonic[id]),
            join_floats(&truth.aperiodic[id])
        )
        .unwrap();
    }
    out
}

fn parse_truth(text: &str, alphabet: &Alphabet) -> Result<GeneratorTruth> {
    let bad = |line: usize| Error::Config(format!("{TRUTH}:{}: malformed line", line + 1));
    let floats = |s: &str, line: usize| -> Result<Vec<f32>> {
        s.split(',').map(|x| x.parse::<f32>().map_err(|_| bad(line))).collect()
    };
    let mut truth = GeneratorTruth {
        harmonic: Vec::new(),
        aperiodic: Vec::new(),
        voiced: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [sym, voiced, h, a] = parts[..] else {
            return Err(bad(i));
        };
        if alphabet.index_of(sym)? != truth.voiced.len() {
            return Err(bad(i));
        }
        truth.voiced.push(match voiced {
            "0" => false,
            "1" => true,
            _ => return Err(bad(i)),
        });
        truth.harmonic.push(floats(h, i)?);
        truth.aperiodic.push(floats(a, i)?);
    }
    if truth.voiced.len() != alphabet.len() {
        return Err(Error::Config(format!("{TRUTH}: expected {} phonemes", alphabet.len())));
    }
    Ok(truth)
}

/// Phoneme alphabet of a corpus directory.
pub fn read_alphabet(dir: impl AsRef<Path>) -> Result<Alphabet> {
    let path = dir.as_ref().join(ALPHABET);
    let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Alphabet::new(text.lines().map(str::to_string).collect())
}

pub fn read_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let read_text = |name: &str| {
        fs::read_to_string(dir.join(name))
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.join(name).display())))
    };
    let alphabet = read_alphabet(dir)?;
    let mut utterances = Vec::new();
    let mut split = Vec::new();
    for (i, line) in read_text(MANIFEST)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(path), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Config(format!("{MANIFEST}:{}: expected '<path> <split>'", i + 1)));
        };
        let u = read_features(dir.join(path))?;
        if u.control.alphabet_size != alphabet.len() {
            return Err(Error::Config(format!(
                "{path}: control alphabet size {} does not match alphabet ({})",
                u.control.alphabet_size,
                alphabet.len()
            )));
        }
        utterances.push(u);
        split.push(Split::from_tag(tag)?);
    }
    let truth = if dir.join(TRUTH).exists() {
        Some(parse_truth(&read_text(TRUTH)?, &alphabet)?)
    } else {
        None
    };
    Ok(Corpus {
        alphabet,
        utterances,
        split,
        truth,
    })
}
