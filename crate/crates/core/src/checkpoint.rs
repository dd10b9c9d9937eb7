//! Trained stream networks on disk.
//!
//! Layout (little endian):
//!
//! ```text
//! "NPSW" | version u32 = 1 | stream name len u16 | name utf-8
//! config: field count u32; per field: tag len u16 | tag | count u32 | count u32 values
//! tensors: count u32; per tensor: name len u16 | name | rank u32 | dims u32.. | f32 data
//! sections: count u32; per section: tag [4] | length u32 | payload
//! crc32 of everything before it, u32
//! ```
//!
//! Sections: `STAT` standardisation statistics, `TCFG` training config echo
//! (`key=value` text), `HIST` history text records, `OPTS` resumable
//! optimiser state.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{Reader, StreamKind};
use crate::kv;
use crate::netcore::{NetConfig, NetParams};
use crate::training::{EpochRecord, OptState, Standardizer, TrainHistory};

const MAGIC: &[u8; 4] = b"NPSW";
const VERSION: u32 = 1;

/// Parameters plus optimiser state at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResumeState {
    pub params: NetParams<f32>,
    pub opt: OptState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stream: StreamKind,
    pub net: NetConfig,
    /// Best parameters seen during training.
    pub params: NetParams<f32>,
    /// Statistics for the `[own | aux]` input channels.
    pub stats: Standardizer,
    pub config_echo: Vec<(String, String)>,
    /// Epoch timings are not stored and read back as zero.
    pub history: TrainHistory,
    pub resume: Option<ResumeState>,
}

fn put_u16_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::Dimension(format!("name '{s}' too long")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Dimension(format!("value {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
}

fn read_str(r: &mut Reader<'_>) -> Result<String> {
    let n = r.u16()? as usize;
    r.string(n)
}

fn config_fields(c: &NetConfig) -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("input_channels", vec![c.input_channels]),
        ("aux_channels", vec![c.aux_channels]),
        ("initial_taps", vec![c.initial_taps]),
        ("dilations", c.dilations.clone()),
        ("conv_channels", vec![c.conv_channels]),
        ("skip_channels", vec![c.skip_channels]),
        ("control_dim", vec![c.control_dim]),
        ("output_channels", vec![c.output_channels]),
    ]
}

fn put_tensors(out: &mut Vec<u8>, p: &NetParams<f32>) -> Result<()> {
    let named = p.named();
    put_u32(out, named.len())?;
    for (name, t) in named {
        put_u16_str(out, &name)?;
        put_u32(out, t.shape.len())?;
        for &d in &t.shape {
            put_u32(out, d)?;
        }
        put_f32s(out, &t.data);
    }
    Ok(())
}

fn read_tensors(r: &mut Reader<'_>, cfg: &NetConfig) -> Result<NetParams<f32>> {
    let mut p = NetParams::<f32>::zeros(cfg);
    let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
    let at = r.offset();
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(Error::format(at, format!("expected {} tensors, found {count}", names.len())));
    }
    for (expect, t) in names.iter().zip(p.tensors_mut()) {
        let at = r.offset();
        let name = read_str(r)?;
        if &name != expect {
            return Err(Error::format(at, format!("expected tensor '{expect}', found '{name}'")));
        }
        let at = r.offset();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != t.shape {
            return Err(Error::format(
                at,
                format!("tensor '{name}': shape {shape:?} does not match config {:?}", t.shape),
            ));
        }
        t.data = r.f32_vec(t.data.len())?;
    }
    Ok(p)
}

fn history_text(h: &TrainHistory) -> String {
    let mut s = format!("initial {}\n", h.initial_val_nll);
    match h.best_epoch {
        Some(b) => writeln!(s, "best {}", b + 1).unwrap(),
        None => s.push_str("best none\n"),
    }
    for (i, e) in h.epochs.iter().enumerate() {
        writeln!(s, "{} {} {}", i + 1, e.train_nll, e.val_nll).unwrap();
    }
    s
}

fn parse_history(text: &str, at: u64) -> Result<TrainHistory> {
    let bad = |m: String| Error::format(at, format!("history: {m}"));
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing '{key}'")))?;
        line.strip_prefix(key)
            .and_then(|v| v.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected '{key}', got '{line}'")))
    };
    let initial_val_nll = field("initial")?.parse().map_err(|_| bad("bad initial value".into()))?;
    let best = field("best")?;
    let best_epoch = match best.as_str() {
        "none" => None,
        v => Some(
            v.parse::<usize>()
                .ok()
                .and_then(|b| b.checked_sub(1))
                .ok_or_else(|| bad(format!("bad best epoch '{v}'")))?,
        ),
    };
    let mut epochs = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [e, t, v] => match (e.parse::<usize>(), t.parse(), v.parse()) {
                (Ok(e), Ok(t), Ok(v)) if e == epochs.len() + 1 => Some(EpochRecord {
                    train_nll: t,
                    val_nll: v,
                    seconds: 0.0,
                }),
                _ => None,
            },
            _ => None,
        };
        epochs.push(parsed.ok_or_else(|| bad(format!("bad record '{line}'")))?);
    }
    if best_epoch.is_some_and(|b| b >= epochs.len()) {
        return Err(bad("best epoch out of range".into()));
    }
    Ok(TrainHistory {
        initial_val_nll,
        epochs,
        best_epoch,
    })
}

fn put_section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) -> Result<()> {
    out.extend_from_slice(tag);
    put_u32(out, payload.len())?;
    out.extend_from_slice(payload);
    Ok(())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.params.check_shapes(&self.net)?;
        if self.stats.dim() != self.net.row_width() {
            return Err(Error::Dimension(format!(
                "statistics cover {} channels, network input has {}",
                self.stats.dim(),
                self.net.row_width()
            )));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u16_str(&mut out, self.stream.name())?;
        let fields = config_fields(&self.net);
        put_u32(&mut out, fields.len())?;
        for (tag, values) in fields {
            put_u16_str(&mut out, tag)?;
            put_u32(&mut out, values.len())?;
            for v in values {
                put_u32(&mut out, v)?;
            }
        }
        put_tensors(&mut out, &self.params)?;

        let mut sections: Vec<(&[u8; 4], Vec<u8>)> = Vec::new();
        let mut stat = Vec::new();
        put_u32(&mut stat, self.stats.dim())?;
        put_f32s(&mut stat, &self.stats.mean);
        put_f32s(&mut stat, &self.stats.std);
        sections.push((b"STAT", stat));
        sections.push((b"TCFG", kv::format(&self.config_echo).into_bytes()));
        sections.push((b"HIST", history_text(&self.history).into_bytes()));
        if let Some(state) = &self.resume {
            let mut opts = Vec::new();
            opts.extend_from_slice(&state.opt.step.to_le_bytes());
            put_tensors(&mut opts, &state.params)?;
            put_tensors(&mut opts, &state.opt.m)?;
            put_tensors(&mut opts, &state.opt.v)?;
            sections.push((b"OPTS", opts));
        }
        put_u32(&mut out, sections.len())?;
        for (tag, payload) in &sections {
            put_section(&mut out, tag, payload)?;
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 8 {
            return Err(Error::format(0, "file too short for a checkpoint"));
        }
        if &buf[..4] != MAGIC {
            return Err(Error::format(0, "bad magic, expected NPSW"));
        }
        let body_len = buf.len() - 4;
        let stored = u32::from_le_bytes(buf[body_len..].try_into().unwrap());
        if crc32fast::hash(&buf[..body_len]) != stored {
            return Err(Error::format(body_len as u64, "checksum mismatch"));
        }
        let mut r = Reader::new(&buf[..body_len]);
        r.take(4)?;
        let at = r.offset();
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        let at = r.offset();
        let stream = StreamKind::from_name(&read_str(&mut r)?).map_err(|e| Error::format(at, e.to_string()))?;

        let mut net = NetConfig {
            input_channels: 0,
            aux_channels: 0,
            initial_taps: 0,
            dilations: Vec::new(),
            conv_channels: 0,
            skip_channels: 0,
            control_dim: 0,
            output_channels: 0,
        };
        let cfg_at = r.offset();
        let fields = r.u32()?;
        for _ in 0..fields {
            let at = r.offset();
            let tag = read_str(&mut r)?;
            let n = r.u32()? as usize;
            let mut values = Vec::with_capacity(n.min(64));
            for _ in 0..n {
                values.push(r.u32()? as usize);
            }
            let scalar = |v: &[usize]| -> Result<usize> {
                match v {
                    [x] => Ok(*x),
                    _ => Err(Error::format(at, format!("config field '{tag}' must be a scalar"))),
                }
            };
            match tag.as_str() {
                "input_channels" => net.input_channels = scalar(&values)?,
                "aux_channels" => net.aux_channels = scalar(&values)?,
                "initial_taps" => net.initial_taps = scalar(&values)?,
                "dilations" => net.dilations = values,
                "conv_channels" => net.conv_channels = scalar(&values)?,
                "skip_channels" => net.skip_channels = scalar(&values)?,
                "control_dim" => net.control_dim = scalar(&values)?,
                "output_channels" => net.output_channels = scalar(&values)?,
                _ => return Err(Error::format(at, format!("unknown config field '{tag}'"))),
            }
        }
        net.validate().map_err(|e| Error::format(cfg_at, e.to_string()))?;
        let params = read_tensors(&mut r, &net)?;

        let mut stats = None;
        let mut config_echo = None;
        let mut history = None;
        let mut resume = None;
        let count = r.u32()?;
        for _ in 0..count {
            let at = r.offset();
            let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
            let len = r.u32()? as usize;
            let payload_at = r.offset();
            let payload = r.take(len)?;
            let mut s = Reader::new(payload);
            let text = || {
                std::str::from_utf8(payload).map_err(|_| Error::format(payload_at, "section is not utf-8"))
            };
            match &tag {
                b"STAT" => {
                    let dim = s.u32()? as usize;
                    let mean = s.f32_vec(dim)?;
                    let std = s.f32_vec(dim)?;
                    if dim != net.row_width() {
                        return Err(Error::format(payload_at, format!("statistics for {dim} channels")));
                    }
                    stats = Some(Standardizer { mean, std });
                }
                b"TCFG" => {
                    config_echo = Some(kv::parse(text()?).map_err(|e| Error::format(payload_at, e.to_string()))?)
                }
                b"HIST" => history = Some(parse_history(text()?, payload_at)?),
                b"OPTS" => {
                    let step = s.u64()?;
                    let p = read_tensors(&mut s, &net)?;
                    let m = read_tensors(&mut s, &net)?;
                    let v = read_tensors(&mut s, &net)?;
                    resume = Some(ResumeState {
                        params: p,
                        opt: OptState { m, v, step },
                    });
                }
                _ => return Err(Error::format(at, format!("unknown section {:?}", String::from_utf8_lossy(&tag)))),
            }
        }
        if r.remaining() != 0 {
            return Err(Error::format(r.offset(), "trailing bytes before checksum"));
        }
        let missing = |what: &str| Error::format(r.offset(), format!("missing {what} section"));
        Ok(Checkpoint {
            stream,
            net,
            params,
            stats: stats.ok_or_else(|| missing("STAT"))?,
            config_echo: config_echo.ok_or_else(|| missing("TCFG"))?,
            history: history.ok_or_else(|| missing("HIST"))?,
            resume,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
