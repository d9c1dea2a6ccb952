//! Cloud, feature-table and label file formats, plus the train/test split.
//!
//! Cloud files come in two encodings sharing one logical layout: a header
//! (format version, channel set, label and normalized-height flags, point
//! count, provenance) followed by one record per point with columns
//! `x y z [z_norm] r_<channel>... [label]`.
//!
//! * Text: `#`-prefixed `key value` header lines, then one space-separated
//!   record per line. Unlabeled points in a labeled file carry `-`.
//! * Binary (little-endian): the 16-byte magic `MSFORESTCLOUD\0\0\0`, a
//!   16-byte header `{u16 version, u8 channel mask, u8 flags, u32
//!   provenance length, u64 point count}`, the UTF-8 provenance, then packed
//!   records of `f64` coordinates, `f32` reflectances and a `u8` label (255
//!   when unlabeled).

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::{
    Channel, ChannelCloud, ChannelPoint, MultispectralCloud, MultispectralPoint, SemanticClass,
    NUM_CLASSES,
};

pub const BINARY_MAGIC: &[u8; 16] = b"MSFORESTCLOUD\0\0\0";
pub const FORMAT_VERSION: u16 = 1;

const FLAG_LABELS: u8 = 1;
const FLAG_Z_NORM: u8 = 2;
const NO_LABEL: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Text,
    Binary,
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(CloudFormat::Text),
            "binary" => Ok(CloudFormat::Binary),
            _ => Err(Error::invalid(format!("unknown cloud format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudFileHeader {
    pub format_version: u16,
    /// Channels present, in canonical order.
    pub channels: Vec<Channel>,
    pub has_labels: bool,
    pub has_z_normalized: bool,
    pub point_count: u64,
    pub provenance: String,
}

impl CloudFileHeader {
    fn channel_mask(&self) -> u8 {
        self.channels.iter().fold(0, |m, c| m | c.bit())
    }

    fn channels_from_mask(mask: u8) -> Result<Vec<Channel>> {
        if mask == 0 || mask & !0b111 != 0 {
            return Err(Error::Format(format!("invalid channel mask {mask:#04b}")));
        }
        Ok(Channel::ALL
            .into_iter()
            .filter(|c| mask & c.bit() != 0)
            .collect())
    }

    fn columns_per_record(&self) -> usize {
        3 + self.has_z_normalized as usize + self.channels.len() + self.has_labels as usize
    }
}

/// Format-independent view of one point record.
#[derive(Debug, Clone, PartialEq)]
struct Record {
    xyz: [f64; 3],
    z_norm: Option<f64>,
    reflectance: Vec<f32>,
    label: Option<SemanticClass>,
}

fn detect_format(bytes: &[u8]) -> CloudFormat {
    if bytes.starts_with(BINARY_MAGIC) {
        CloudFormat::Binary
    } else {
        CloudFormat::Text
    }
}

fn decode(bytes: &[u8]) -> Result<(CloudFileHeader, Vec<Record>)> {
    match detect_format(bytes) {
        CloudFormat::Binary => decode_binary(bytes),
        CloudFormat::Text => {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| Error::Format("neither a binary cloud nor UTF-8 text".into()))?;
            decode_text(text)
        }
    }
}

fn read_file(path: &Path) -> Result<(CloudFileHeader, Vec<Record>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads only the header of a cloud file.
pub fn read_cloud_header(path: &Path) -> Result<CloudFileHeader> {
    read_file(path).map(|(h, _)| h)
}

pub fn read_channel_cloud(path: &Path, expected_channel: Channel) -> Result<ChannelCloud> {
    let (header, records) = read_file(path)?;
    if header.channels != [expected_channel] {
        return Err(Error::Format(format!(
            "expected a {expected_channel} cloud, file holds channels [{}]",
            channel_list(&header.channels)
        )));
    }
    if header.has_z_normalized {
        return Err(Error::Format(
            "channel clouds carry no normalized heights".into(),
        ));
    }
    let points = records
        .into_iter()
        .map(|r| ChannelPoint {
            x: r.xyz[0],
            y: r.xyz[1],
            z: r.xyz[2],
            reflectance_db: r.reflectance[0],
            channel: expected_channel,
            label: r.label,
        })
        .collect();
    ChannelCloud::new(expected_channel, points)
}

pub fn read_multispectral_cloud(path: &Path) -> Result<MultispectralCloud> {
    let (header, records) = read_file(path)?;
    if header.channels != Channel::ALL {
        return Err(Error::Format(format!(
            "expected all three channels, file holds [{}]",
            channel_list(&header.channels)
        )));
    }
    let points = records
        .into_iter()
        .map(|r| MultispectralPoint {
            x: r.xyz[0],
            y: r.xyz[1],
            z: r.xyz[2],
            z_normalized: r.z_norm,
            reflectance_db: [r.reflectance[0], r.reflectance[1], r.reflectance[2]],
            label: r.label,
        })
        .collect();
    MultispectralCloud::new(points, header.provenance)
}

pub fn write_channel_cloud(cloud: &ChannelCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let header = CloudFileHeader {
        format_version: FORMAT_VERSION,
        channels: vec![cloud.channel()],
        has_labels: cloud.points().iter().any(|p| p.label.is_some()),
        has_z_normalized: false,
        point_count: cloud.len() as u64,
        provenance: String::new(),
    };
    let records = cloud.points().iter().map(|p| Record {
        xyz: p.position(),
        z_norm: None,
        reflectance: vec![p.reflectance_db],
        label: p.label,
    });
    write_file(path, &header, records, format)
}

pub fn write_multispectral_cloud(
    cloud: &MultispectralCloud,
    path: &Path,
    format: CloudFormat,
) -> Result<()> {
    let header = CloudFileHeader {
        format_version: FORMAT_VERSION,
        channels: Channel::ALL.to_vec(),
        has_labels: cloud.points().iter().any(|p| p.label.is_some()),
        has_z_normalized: cloud.has_z_normalized(),
        point_count: cloud.len() as u64,
        provenance: cloud.provenance.clone(),
    };
    let has_z = header.has_z_normalized;
    let records = cloud.points().iter().map(move |p| Record {
        xyz: p.position(),
        z_norm: if has_z { p.z_normalized } else { None },
        reflectance: p.reflectance_db.to_vec(),
        label: p.label,
    });
    write_file(path, &header, records, format)
}

fn write_file(
    path: &Path,
    header: &CloudFileHeader,
    records: impl Iterator<Item = Record>,
    format: CloudFormat,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        CloudFormat::Binary => encode_binary(&mut w, header, records).map_err(io)?,
        CloudFormat::Text => encode_text(&mut w, header, records).map_err(io)?,
    }
    w.flush().map_err(io)
}

fn channel_list(channels: &[Channel]) -> String {
    channels
        .iter()
        .map(|c| c.name())
        .collect::<Vec<_>>()
        .join(" ")
}

fn encode_text(
    w: &mut impl Write,
    header: &CloudFileHeader,
    records: impl Iterator<Item = Record>,
) -> std::io::Result<()> {
    writeln!(w, "# version {}", header.format_version)?;
    writeln!(w, "# channels {}", channel_list(&header.channels))?;
    writeln!(w, "# labels {}", header.has_labels as u8)?;
    writeln!(w, "# z_norm {}", header.has_z_normalized as u8)?;
    writeln!(w, "# count {}", header.point_count)?;
    if !header.provenance.is_empty() {
        writeln!(w, "# provenance {}", header.provenance.replace('\n', " "))?;
    }
    let mut line = String::new();
    for r in records {
        line.clear();
        let _ = write!(line, "{:.9} {:.9} {:.9}", r.xyz[0], r.xyz[1], r.xyz[2]);
        if header.has_z_normalized {
            let _ = write!(line, " {:.9}", r.z_norm.unwrap_or(0.0));
        }
        for v in &r.reflectance {
            let _ = write!(line, " {:.9}", *v as f64);
        }
        if header.has_labels {
            match r.label {
                Some(l) => {
                    let _ = write!(line, " {}", l.code());
                }
                None => line.push_str(" -"),
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn decode_text(text: &str) -> Result<(CloudFileHeader, Vec<Record>)> {
    let mut version = None;
    let mut channels = None;
    let mut labels = None;
    let mut z_norm = false;
    let mut count = None;
    let mut provenance = String::new();
    let mut lines = text.lines().enumerate().peekable();

    let bad_header = |line: usize, msg: String| Error::Parse {
        record: 0,
        message: format!("header line {}: {msg}", line + 1),
    };
    let flag = |v: &str, line: usize| match v {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(bad_header(
            line,
            format!("expected 0 or 1, found '{other}'"),
        )),
    };

    while let Some((no, line)) = lines.peek().copied() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        lines.next();
        let rest = rest.trim();
        let (key, value) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        let value = value.trim();
        match key {
            "version" => {
                let v: u16 = value
                    .parse()
                    .map_err(|_| bad_header(no, format!("bad version '{value}'")))?;
                if v != FORMAT_VERSION {
                    return Err(bad_header(no, format!("unsupported format version {v}")));
                }
                version = Some(v);
            }
            "channels" => {
                let mut list = value
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(Channel::from_str)
                    .collect::<Result<Vec<_>>>()?;
                list.sort();
                list.dedup();
                if list.is_empty() {
                    return Err(bad_header(no, "empty channel list".into()));
                }
                channels = Some(list);
            }
            "labels" => labels = Some(flag(value, no)?),
            "z_norm" => z_norm = flag(value, no)?,
            "count" => {
                count = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| bad_header(no, format!("bad count '{value}'")))?,
                )
            }
            "provenance" => provenance = value.to_string(),
            _ => {}
        }
    }
    let missing = |k: &str| Error::Format(format!("text cloud header lacks '{k}'"));
    let header = CloudFileHeader {
        format_version: version.ok_or_else(|| missing("version"))?,
        channels: channels.ok_or_else(|| missing("channels"))?,
        has_labels: labels.ok_or_else(|| missing("labels"))?,
        has_z_normalized: z_norm,
        point_count: count.ok_or_else(|| missing("count"))?,
        provenance,
    };

    let expected_cols = header.columns_per_record();
    let mut records = Vec::with_capacity(header.point_count.min(1 << 24) as usize);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record = records.len();
        let err = |msg: String| Error::Parse {
            record,
            message: format!("line {}: {msg}", no + 1),
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != expected_cols {
            return Err(err(format!(
                "expected {expected_cols} columns, found {}",
                tokens.len()
            )));
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            let v: f64 = tokens[i]
                .parse()
                .map_err(|_| err(format!("{what} '{}' is not a number", tokens[i])))?;
            if !v.is_finite() {
                return Err(err(format!("{what} is not finite")));
            }
            Ok(v)
        };
        let xyz = [num(0, "x")?, num(1, "y")?, num(2, "z")?];
        let mut col = 3;
        let z_norm = if header.has_z_normalized {
            col += 1;
            let h = num(3, "z_norm")?;
            if h < 0.0 {
                return Err(err(format!("negative z_norm {h}")));
            }
            Some(h)
        } else {
            None
        };
        let mut reflectance = Vec::with_capacity(header.channels.len());
        for c in &header.channels {
            let v = num(col, &format!("r_{}", c.name()))? as f32;
            if !v.is_finite() {
                return Err(err(format!("r_{} overflows f32", c.name())));
            }
            reflectance.push(v);
            col += 1;
        }
        let label = if header.has_labels {
            match tokens[col] {
                "-" => None,
                t => Some(parse_label(t).map_err(err)?),
            }
        } else {
            None
        };
        records.push(Record {
            xyz,
            z_norm,
            reflectance,
            label,
        });
    }
    if records.len() as u64 != header.point_count {
        return Err(Error::Format(format!(
            "header announces {} points, file holds {}",
            header.point_count,
            records.len()
        )));
    }
    Ok((header, records))
}

fn parse_label(token: &str) -> std::result::Result<SemanticClass, String> {
    token
        .parse::<u8>()
        .ok()
        .and_then(SemanticClass::from_code)
        .ok_or_else(|| format!("invalid label '{token}'"))
}

fn encode_binary(
    w: &mut impl Write,
    header: &CloudFileHeader,
    records: impl Iterator<Item = Record>,
) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&header.format_version.to_le_bytes())?;
    w.write_all(&[header.channel_mask()])?;
    let flags = if header.has_labels { FLAG_LABELS } else { 0 }
        | if header.has_z_normalized {
            FLAG_Z_NORM
        } else {
            0
        };
    w.write_all(&[flags])?;
    w.write_all(&(header.provenance.len() as u32).to_le_bytes())?;
    w.write_all(&header.point_count.to_le_bytes())?;
    w.write_all(header.provenance.as_bytes())?;
    for r in records {
        for v in r.xyz {
            w.write_all(&v.to_le_bytes())?;
        }
        if header.has_z_normalized {
            w.write_all(&r.z_norm.unwrap_or(0.0).to_le_bytes())?;
        }
        for v in &r.reflectance {
            w.write_all(&v.to_le_bytes())?;
        }
        if header.has_labels {
            w.write_all(&[r.label.map_or(NO_LABEL, |l| l.code())])?;
        }
    }
    Ok(())
}

fn decode_binary(bytes: &[u8]) -> Result<(CloudFileHeader, Vec<Record>)> {
    let truncated = || Error::Format("truncated binary cloud header".into());
    let h = bytes.get(16..32).ok_or_else(truncated)?;
    let format_version = u16::from_le_bytes([h[0], h[1]]);
    if format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {format_version}"
        )));
    }
    let channels = CloudFileHeader::channels_from_mask(h[2])?;
    let flags = h[3];
    if flags & !(FLAG_LABELS | FLAG_Z_NORM) != 0 {
        return Err(Error::Format(format!("unknown header flags {flags:#04x}")));
    }
    let prov_len = u32::from_le_bytes(h[4..8].try_into().unwrap()) as usize;
    let point_count = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let prov = bytes.get(32..32 + prov_len).ok_or_else(truncated)?;
    let provenance = std::str::from_utf8(prov)
        .map_err(|_| Error::Format("provenance is not UTF-8".into()))?
        .to_string();
    let header = CloudFileHeader {
        format_version,
        channels,
        has_labels: flags & FLAG_LABELS != 0,
        has_z_normalized: flags & FLAG_Z_NORM != 0,
        point_count,
        provenance,
    };

    let nch = header.channels.len();
    let record_len =
        24 + 8 * header.has_z_normalized as usize + 4 * nch + header.has_labels as usize;
    let body = &bytes[32 + prov_len..];
    let expected = (point_count as u128) * record_len as u128;
    if body.len() as u128 != expected {
        return Err(Error::Format(format!(
            "header announces {point_count} points ({expected} bytes), body holds {} bytes",
            body.len()
        )));
    }
    let f64_at = |b: &[u8], o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let mut records = Vec::with_capacity(point_count as usize);
    for (record, chunk) in body.chunks_exact(record_len).enumerate() {
        let err = |msg: String| Error::Parse {
            record,
            message: msg,
        };
        let xyz = [f64_at(chunk, 0), f64_at(chunk, 8), f64_at(chunk, 16)];
        if xyz.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate".into()));
        }
        let mut off = 24;
        let z_norm = if header.has_z_normalized {
            let h = f64_at(chunk, off);
            off += 8;
            if !(h.is_finite() && h >= 0.0) {
                return Err(err(format!("invalid z_norm {h}")));
            }
            Some(h)
        } else {
            None
        };
        let mut reflectance = Vec::with_capacity(nch);
        for _ in 0..nch {
            let v = f32::from_le_bytes(chunk[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(err("non-finite reflectance".into()));
            }
            reflectance.push(v);
            off += 4;
        }
        let label = if header.has_labels {
            match chunk[off] {
                NO_LABEL => None,
                code => Some(
                    SemanticClass::from_code(code)
                        .ok_or_else(|| err(format!("invalid label {code}")))?,
                ),
            }
        } else {
            None
        };
        records.push(Record {
            xyz,
            z_norm,
            reflectance,
            label,
        });
    }
    Ok((header, records))
}

/// Writes a feature table: a tab-separated line of column names, then one row
/// per point. A trailing `label` column is added when labels are given.
/// Values use the shortest decimal form that parses back to the same `f64`.
pub fn write_feature_table(
    table: &FeatureTable,
    labels: Option<&[SemanticClass]>,
    path: &Path,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != table.n_rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                l.len(),
                table.n_rows()
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut head = table.columns().join("\t");
    if labels.is_some() {
        head.push_str("\tlabel");
    }
    writeln!(w, "{head}").map_err(io)?;
    let mut line = String::new();
    for i in 0..table.n_rows() {
        line.clear();
        for (j, v) in table.row(i).iter().enumerate() {
            if j > 0 {
                line.push('\t');
            }
            let _ = write!(line, "{v}");
        }
        if let Some(l) = labels {
            let _ = write!(line, "\t{}", l[i].code());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_table(path: &Path) -> Result<(FeatureTable, Option<Vec<SemanticClass>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Format("feature table without a header line".into()))?;
    let mut columns: Vec<String> = head.split('\t').map(str::to_string).collect();
    let has_labels = columns.last().is_some_and(|c| c == "label");
    if has_labels {
        columns.pop();
    }
    let d = columns.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (record, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let tokens: Vec<&str> = line.split('\t').collect();
        if tokens.len() != d + has_labels as usize {
            return Err(Error::Parse {
                record,
                message: format!(
                    "expected {} fields, found {}",
                    d + has_labels as usize,
                    tokens.len()
                ),
            });
        }
        for t in &tokens[..d] {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                record,
                message: format!("'{t}' is not a number"),
            })?;
            values.push(v);
        }
        if has_labels {
            labels
                .push(parse_label(tokens[d]).map_err(|message| Error::Parse { record, message })?);
        }
    }
    let table = FeatureTable::new(columns, values)?;
    Ok((table, has_labels.then_some(labels)))
}

/// Writes predicted labels with their per-class scores.
pub fn write_predictions(
    path: &Path,
    labels: &[SemanticClass],
    scores: &[[f64; NUM_CLASSES]],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut head = String::from("label");
    for c in SemanticClass::ALL {
        let _ = write!(head, "\tp_{}", c.key());
    }
    writeln!(w, "{head}").map_err(io)?;
    for (l, s) in labels.iter().zip(scores) {
        let mut line = l.code().to_string();
        for v in s {
            let _ = write!(line, "\t{v}");
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the label column of a predictions file.
pub fn read_predictions(path: &Path) -> Result<Vec<SemanticClass>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("label") => {}
        _ => return Err(Error::Format("predictions file lacks its header".into())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(record, line)| {
            let token = line.split('\t').next().unwrap_or("");
            parse_label(token).map_err(|message| Error::Parse { record, message })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitUnit {
    PerPoint,
    PerPlot,
}

impl FromStr for SplitUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_point" | "per-point" | "point" => Ok(SplitUnit::PerPoint),
            "per_plot" | "per-plot" | "plot" => Ok(SplitUnit::PerPlot),
            _ => Err(Error::invalid(format!("unknown split unit '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    /// Training share as `numerator / denominator`.
    pub ratio_train: (u32, u32),
    pub seed: u64,
    pub unit: SplitUnit,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratio_train: (4, 5),
            seed: 0,
            unit: SplitUnit::PerPlot,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (num, den) = self.ratio_train;
        if den == 0 || num == 0 || num >= den {
            return Err(Error::invalid(format!(
                "training ratio {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(())
    }

    /// `round(total * ratio)`.
    fn train_count(&self, total: usize) -> usize {
        let (num, den) = (self.ratio_train.0 as u128, self.ratio_train.1 as u128);
        ((total as u128 * num * 2 + den) / (2 * den)) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<MultispectralCloud>,
    pub test: Vec<MultispectralCloud>,
}

/// Splits labeled clouds into disjoint training and test sets.
///
/// `PerPlot` keeps each cloud whole; `PerPoint` shuffles all points and keeps
/// each cloud's share on either side in its original order. Empty parts are
/// dropped.
pub fn split_train_test(clouds: &[MultispectralCloud], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if clouds.is_empty() {
        return Err(Error::invalid("nothing to split"));
    }
    for (i, c) in clouds.iter().enumerate() {
        c.labels()
            .map_err(|e| Error::invalid(format!("cloud {i}: {e}")))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.unit {
        SplitUnit::PerPlot => {
            if clouds.len() < 2 {
                return Err(Error::invalid("a per-plot split needs at least two clouds"));
            }
            let n_train = spec.train_count(clouds.len()).clamp(1, clouds.len() - 1);
            let mut order: Vec<usize> = (0..clouds.len()).collect();
            order.shuffle(&mut rng);
            let mut train_ids = order[..n_train].to_vec();
            let mut test_ids = order[n_train..].to_vec();
            train_ids.sort_unstable();
            test_ids.sort_unstable();
            Ok(Split {
                train: train_ids.iter().map(|&i| clouds[i].clone()).collect(),
                test: test_ids.iter().map(|&i| clouds[i].clone()).collect(),
            })
        }
        SplitUnit::PerPoint => {
            let total: usize = clouds.iter().map(MultispectralCloud::len).sum();
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut rng);
            let mut in_train = vec![false; total];
            for &i in &order[..spec.train_count(total)] {
                in_train[i] = true;
            }
            let mut split = Split {
                train: Vec::new(),
                test: Vec::new(),
            };
            let mut offset = 0;
            for cloud in clouds {
                let (tr, te): (Vec<usize>, Vec<usize>) =
                    (0..cloud.len()).partition(|&i| in_train[offset + i]);
                offset += cloud.len();
                if !tr.is_empty() {
                    split.train.push(cloud.select(&tr));
                }
                if !te.is_empty() {
                    split.test.push(cloud.select(&te));
                }
            }
            Ok(split)
        }
    }
}

/// Cuts a cloud into `nx * ny` equal rectangular plots over its XY extent,
/// row-major in Y then X. Point order inside a plot follows the input.
pub fn split_into_plots(
    cloud: &MultispectralCloud,
    nx: usize,
    ny: usize,
) -> Result<Vec<MultispectralCloud>> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(
            "plot grid needs at least one column and row",
        ));
    }
    if cloud.is_empty() {
        return Err(Error::invalid("cannot tile an empty cloud"));
    }
    let pts = cloud.points();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let cell = |v: f64, lo: f64, hi: f64, n: usize| -> usize {
        if hi <= lo {
            0
        } else {
            (((v - lo) / (hi - lo) * n as f64) as usize).min(n - 1)
        }
    };
    let mut members = vec![Vec::new(); nx * ny];
    for (i, p) in pts.iter().enumerate() {
        members[cell(p.y, y0, y1, ny) * nx + cell(p.x, x0, x1, nx)].push(i);
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(k, idx)| {
            let mut plot = cloud.select(idx);
            plot.provenance = crate::preprocess::join_provenance(
                &cloud.provenance,
                &format!("plot {k} of {nx}x{ny}"),
            );
            plot
        })
        .collect())
}
