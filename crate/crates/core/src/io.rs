//! File formats: the `MFSHE1` binary field dump and the `MFPEAKS v1` text
//! point list.
//!
//! `MFSHE1` layout (little-endian): magic, version u16, d u16, shape u64 x d,
//! spacing f64, origin f64 x d, alpha, beta, t f64, seed u64, scheme u8,
//! then the values as f64 in row-major order. Scheme codes 0..=2 are the
//! field samplers; code 3 marks a PAM snapshot.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fractal::{shell_of, GaugeRecord, PeakSet};
use crate::gaussian_field::{FieldSample, LatticeSpec, SampleMeta, Scheme};
use crate::kernels::ModelParams;

pub const FIELD_MAGIC: &[u8; 6] = b"MFSHE1";
pub const FIELD_VERSION: u16 = 1;
pub const PAM_SNAPSHOT_CODE: u8 = 3;

/// What produced a dumped field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    Sampler(Scheme),
    PamSnapshot,
}

impl DumpKind {
    pub fn code(self) -> u8 {
        match self {
            DumpKind::Sampler(s) => s.code(),
            DumpKind::PamSnapshot => PAM_SNAPSHOT_CODE,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        if c == PAM_SNAPSHOT_CODE {
            Ok(DumpKind::PamSnapshot)
        } else {
            Scheme::from_code(c).map(DumpKind::Sampler)
        }
    }
}

/// Contents of an `MFSHE1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub lattice: LatticeSpec,
    pub values: Vec<f64>,
    pub params: ModelParams,
    pub seed: u64,
    pub kind: DumpKind,
}

impl FieldDump {
    pub fn from_sample(s: &FieldSample) -> Self {
        Self {
            lattice: s.lattice.clone(),
            values: s.values.clone(),
            params: s.params,
            seed: s.seed,
            kind: DumpKind::Sampler(s.scheme),
        }
    }

    /// Back to a field sample; sampler metadata is not persisted.
    pub fn into_sample(self) -> Result<FieldSample> {
        match self.kind {
            DumpKind::Sampler(scheme) => Ok(FieldSample {
                lattice: self.lattice,
                values: self.values,
                params: self.params,
                seed: self.seed,
                scheme,
                meta: SampleMeta::default(),
            }),
            DumpKind::PamSnapshot => Err(Error::Format("file holds a PAM snapshot, not a field sample".into())),
        }
    }
}

pub fn write_field_dump<W: Write>(w: &mut W, dump: &FieldDump) -> Result<()> {
    let l = &dump.lattice;
    if dump.values.len() != l.len() {
        return Err(Error::Format("value count does not match lattice".into()));
    }
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    w.write_all(&(l.d as u16).to_le_bytes())?;
    for &n in &l.shape {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    w.write_all(&l.spacing.to_le_bytes())?;
    for &o in &l.origin {
        w.write_all(&o.to_le_bytes())?;
    }
    let p = &dump.params;
    for v in [p.alpha, p.beta, p.t] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&dump.seed.to_le_bytes())?;
    w.write_all(&[dump.kind.code()])?;
    let mut buf = Vec::with_capacity(8 * dump.values.len());
    for v in &dump.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated field dump: {e}")))?;
    Ok(b)
}

fn f64_le<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(take::<8, _>(r)?))
}

pub fn read_field_dump<R: Read>(r: &mut R) -> Result<FieldDump> {
    if &take::<6, _>(r)? != FIELD_MAGIC {
        return Err(Error::Format("bad magic, not an MFSHE1 file".into()));
    }
    let version = u16::from_le_bytes(take::<2, _>(r)?);
    if version != FIELD_VERSION {
        return Err(Error::Format(format!("unsupported MFSHE1 version {version}")));
    }
    let d = u16::from_le_bytes(take::<2, _>(r)?) as usize;
    let shape = (0..d)
        .map(|_| Ok(u64::from_le_bytes(take::<8, _>(r)?) as usize))
        .collect::<Result<Vec<_>>>()?;
    let spacing = f64_le(r)?;
    let origin = (0..d).map(|_| f64_le(r)).collect::<Result<Vec<_>>>()?;
    let (alpha, beta, t) = (f64_le(r)?, f64_le(r)?, f64_le(r)?);
    let seed = u64::from_le_bytes(take::<8, _>(r)?);
    let kind = DumpKind::from_code(take::<1, _>(r)?[0])?;
    let lattice = LatticeSpec::new(origin, spacing, shape)?;
    let params = if beta == d as f64 {
        ModelParams::white_noise(alpha, d, t)?
    } else {
        ModelParams::new(alpha, beta, d, t)?
    };
    let mut raw = vec![0u8; 8 * lattice.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated field values: {e}")))?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after field values".into()));
    }
    Ok(FieldDump {
        lattice,
        values,
        params,
        seed,
        kind,
    })
}

pub fn save_field_dump(path: &Path, dump: &FieldDump) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_dump(&mut w, dump)?;
    w.flush()?;
    Ok(())
}

pub fn load_field_dump(path: &Path) -> Result<FieldDump> {
    read_field_dump(&mut BufReader::new(File::open(path)?))
}

pub fn save_field(path: &Path, sample: &FieldSample) -> Result<()> {
    save_field_dump(path, &FieldDump::from_sample(sample))
}

pub fn load_field(path: &Path) -> Result<FieldSample> {
    load_field_dump(path)?.into_sample()
}

/// Writes `MFPEAKS v1`: a header line, then `x_1 ... x_d n=<shell>` per point.
/// Lines starting with `#` are comments; the source is stored as one.
pub fn write_peaks<W: Write>(w: &mut W, set: &PeakSet) -> Result<()> {
    if set.gauge.tag.contains(char::is_whitespace) {
        return Err(Error::Format("gauge tag must not contain whitespace".into()));
    }
    writeln!(w, "MFPEAKS v1 d={} gauge={} gamma={}", set.d, set.gauge.tag, set.gauge.gamma)?;
    if !set.source.is_empty() {
        writeln!(w, "# source {}", set.source.replace('\n', " "))?;
    }
    let mut line = String::new();
    for (p, n) in set.points() {
        line.clear();
        for c in p {
            line.push_str(&c.to_string());
            line.push(' ');
        }
        line.push_str("n=");
        line.push_str(&n.to_string());
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_peaks<R: BufRead>(r: R) -> Result<PeakSet> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty peaks file".into()))??;
    let mut it = header.split_whitespace();
    if it.next() != Some("MFPEAKS") || it.next() != Some("v1") {
        return Err(Error::Format(format!("bad peaks header '{header}'")));
    }
    let (mut d, mut tag, mut gamma) = (None, None, None);
    for kv in it {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header field '{kv}'")))?;
        let bad = || Error::Format(format!("bad header value '{kv}'"));
        match k {
            "d" => d = Some(v.parse::<usize>().map_err(|_| bad())?),
            "gauge" => tag = Some(v.to_string()),
            "gamma" => gamma = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(Error::Format(format!("unknown header field '{k}'"))),
        }
    }
    let (Some(d), Some(tag), Some(gamma)) = (d, tag, gamma) else {
        return Err(Error::Format("peaks header needs d, gauge and gamma".into()));
    };
    let mut source = String::new();
    let mut tagged = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(s) = c.trim_start().strip_prefix("source ") {
                source = s.to_string();
            }
            continue;
        }
        let bad = || Error::Format(format!("bad point on line {}: '{line}'", i + 2));
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(bad());
        }
        let p = toks[..d]
            .iter()
            .map(|s| s.parse::<i64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let n = toks[d]
            .strip_prefix("n=")
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(bad)?;
        if shell_of(&p)? != n {
            return Err(Error::ShellMembership { point: p, shell: n });
        }
        tagged.push((p, n));
    }
    PeakSet::from_tagged(d, &tagged, GaugeRecord::new(&tag, gamma), &source)
}

pub fn save_peaks(path: &Path, set: &PeakSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_peaks(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn load_peaks(path: &Path) -> Result<PeakSet> {
    read_peaks(BufReader::new(File::open(path)?))
}

/// Minimal CSV writer: header then rows, numbers via `Display`.
pub fn write_csv<W: Write>(w: &mut W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Format("csv row width does not match header".into()));
        }
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

pub fn save_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, header, rows)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_dump_roundtrip() {
        let lattice = LatticeSpec::new(vec![3.0, -2.0], 0.5, vec![3, 2]).unwrap();
        let dump = FieldDump {
            lattice,
            values: vec![1.5, -0.25, f64::MIN_POSITIVE, 3.0, 1e300, -7.0],
            params: ModelParams::new(1.5, 0.5, 2, 0.7).unwrap(),
            seed: u64::MAX - 3,
            kind: DumpKind::Sampler(Scheme::BlockIndependent),
        };
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &dump).unwrap();
        assert_eq!(&buf[..6], b"MFSHE1");
        assert_eq!(buf.len(), 6 + 2 + 2 + 16 + 8 + 16 + 24 + 8 + 1 + 48);
        let back = read_field_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(back, dump);
        let snap = FieldDump {
            kind: DumpKind::PamSnapshot,
            ..dump.clone()
        };
        let mut buf2 = Vec::new();
        write_field_dump(&mut buf2, &snap).unwrap();
        let back = read_field_dump(&mut buf2.as_slice()).unwrap();
        assert!(back.into_sample().is_err());
        buf.truncate(buf.len() - 1);
        assert!(matches!(read_field_dump(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn white_noise_params_roundtrip() {
        let dump = FieldDump {
            lattice: LatticeSpec::line(0.0, 1.0, 2).unwrap(),
            values: vec![0.0, 1.0],
            params: ModelParams::white_noise(2.0, 1, 1.0).unwrap(),
            seed: 1,
            kind: DumpKind::Sampler(Scheme::CirculantExact),
        };
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &dump).unwrap();
        assert_eq!(read_field_dump(&mut buf.as_slice()).unwrap(), dump);
    }

    #[test]
    fn peaks_roundtrip_and_errors() {
        let set = PeakSet::from_points(
            2,
            &[vec![9, -1], vec![0, 0], vec![-30, 100]],
            GaugeRecord::new("linear-she", 0.25),
            "field seed=7",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_peaks(&mut buf, &set).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("MFPEAKS v1 d=2 gauge=linear-she gamma=0.25\n"));
        assert!(text.contains("9 -1 n=3\n"));
        assert_eq!(read_peaks(buf.as_slice()).unwrap(), set);
        let wrong = "MFPEAKS v1 d=1 gauge=x gamma=1\n9 n=2\n";
        assert!(matches!(read_peaks(wrong.as_bytes()), Err(Error::ShellMembership { .. })));
        assert!(read_peaks("MFPEAKS v2 d=1 gauge=x gamma=1\n".as_bytes()).is_err());
        assert!(read_peaks("MFPEAKS v1 d=1 gauge=x\n".as_bytes()).is_err());
    }
}
