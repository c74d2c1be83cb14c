//! Dataset manifests, frame folders, Middlebury `.flo` files and feature CSVs.
//!
//! Manifest CSV header: `dataset,subject,video,frames_dir,onset,apex,offset,label`.
//! Frame indices in the file are 1-based positions in the lexicographically
//! sorted list of image files of `frames_dir` (relative paths are resolved
//! against the manifest's directory); they are 0-based once loaded.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use image::DynamicImage;

use crate::error::{Error, Result};
use crate::raster::{resize_bilinear, Grid};
use crate::types::{FeatureVector, FlowField, Frame, VideoSample};

pub const MANIFEST_HEADER: [&str; 8] = ["dataset", "subject", "video", "frames_dir", "onset", "apex", "offset", "label"];

const IMAGE_EXTENSIONS: [&str; 9] = ["png", "jpg", "jpeg", "bmp", "pgm", "ppm", "pnm", "tif", "tiff"];

/// Magic number opening every Middlebury `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub dataset: String,
    pub subject_id: String,
    pub video_id: String,
    pub frames_dir: PathBuf,
    pub onset: usize,
    pub apex: Option<usize>,
    pub offset: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Class ids in lexicographic label order.
    pub label_map: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert((e.subject_id.clone(), e.video_id.clone())) {
                return Err(Error::Parse {
                    row: i + 2,
                    message: format!("duplicate subject/video pair {}/{}", e.subject_id, e.video_id),
                });
            }
        }
        let labels: std::collections::BTreeSet<&str> = entries.iter().map(|e| e.label.as_str()).collect();
        let label_map = labels.into_iter().enumerate().map(|(i, l)| (l.to_string(), i)).collect();
        Ok(Manifest { entries, label_map })
    }

    pub fn label_id(&self, entry: &ManifestEntry) -> usize {
        self.label_map[&entry.label]
    }

    /// Label names indexed by class id.
    pub fn class_names(&self) -> Vec<String> {
        self.label_map.keys().cloned().collect()
    }

    pub fn subjects(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.subject_id.as_str()).collect()
    }
}

fn parse_index(raw: &str, column: &str, row: usize) -> Result<usize> {
    let value: usize = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("{column} `{raw}` is not a frame number"),
    })?;
    if value == 0 {
        return Err(Error::Parse {
            row,
            message: format!("{column} must be a 1-based frame number, got 0"),
        });
    }
    Ok(value - 1)
}

/// Parses manifest CSV text; relative `frames_dir` values are joined to `base_dir`.
pub fn parse_manifest(reader: impl Read, base_dir: &Path) -> Result<Manifest> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_HEADER) {
        *slot = header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing column `{name}`"),
        })?;
    }

    let mut entries = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |k: usize| record.get(columns[k]).unwrap_or("");
        let onset = parse_index(field(4), "onset", row)?;
        let apex = match field(5) {
            "" => None,
            raw => Some(parse_index(raw, "apex", row)?),
        };
        let offset = parse_index(field(6), "offset", row)?;
        if onset > offset {
            return Err(Error::Parse {
                row,
                message: format!("onset {} is after offset {}", onset + 1, offset + 1),
            });
        }
        if let Some(a) = apex {
            if a < onset || a > offset {
                return Err(Error::Parse {
                    row,
                    message: format!("apex {} outside [{}, {}]", a + 1, onset + 1, offset + 1),
                });
            }
        }
        let dir = PathBuf::from(field(3));
        entries.push(ManifestEntry {
            dataset: field(0).to_string(),
            subject_id: field(1).to_string(),
            video_id: field(2).to_string(),
            frames_dir: if dir.is_absolute() { dir } else { base_dir.join(dir) },
            onset,
            apex,
            offset,
            label: field(7).to_string(),
        });
    }
    Manifest::from_entries(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(BufReader::new(file), base)
}

/// Writes a manifest with 1-based indices; `frames_dir` is written as stored.
pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(MANIFEST_HEADER).map_err(|e| csv_io(path, e))?;
    for e in &manifest.entries {
        let apex = e.apex.map(|a| (a + 1).to_string()).unwrap_or_default();
        w.write_record([
            e.dataset.as_str(),
            &e.subject_id,
            &e.video_id,
            &e.frames_dir.to_string_lossy(),
            &(e.onset + 1).to_string(),
            &apex,
            &(e.offset + 1).to_string(),
            &e.label,
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, io::Error::other(e))
}

/// Image files of `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Reads one image as a grayscale frame (Rec.601 luma for colour input).
pub fn read_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Frame::from_bytes(w, h, buf.as_raw()),
        DynamicImage::ImageLuma16(buf) => {
            Frame::new(w, h, buf.as_raw().iter().map(|&v| f64::from(v) / 65535.0).collect())
        }
        other => Frame::from_rgb_bytes(w, h, other.to_rgb8().as_raw()),
    }
}

/// Writes a frame as an 8-bit grayscale PNG.
pub fn write_frame_png(frame: &Frame, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, frame.to_bytes())
        .expect("buffer size matches frame");
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Bilinear resize of a frame to `width x height`.
pub fn resize_frame(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!("cannot resize to {width}x{height}")));
    }
    let grid = Grid::new(frame.width(), frame.height(), frame.data().to_vec());
    let out = resize_bilinear(&grid, width, height);
    Frame::new(width, height, out.data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Loads frames `onset..=offset` of an entry, optionally resized, with
/// indices rebased so that the onset is frame 0.
pub fn load_video(entry: &ManifestEntry, label: usize, resize: Option<(usize, usize)>) -> Result<VideoSample> {
    let files = list_frames(&entry.frames_dir)?;
    if entry.offset >= files.len() {
        return Err(Error::io(
            &entry.frames_dir,
            io::Error::new(
                io::ErrorKind::NotFound,
                format!(
                    "video {}: offset frame {} requested but only {} frames found",
                    entry.video_id,
                    entry.offset + 1,
                    files.len()
                ),
            ),
        ));
    }
    let mut frames = Vec::with_capacity(entry.offset - entry.onset + 1);
    for path in &files[entry.onset..=entry.offset] {
        let mut frame = read_frame(path)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if frame.dims() != first.dims() && resize.is_none() {
                return Err(Error::io(
                    path,
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("frame is {:?}, earlier frames are {:?}", frame.dims(), first.dims()),
                    ),
                ));
            }
        }
        if let Some((w, h)) = resize {
            frame = resize_frame(&frame, w, h)?;
        }
        frames.push(frame);
    }
    VideoSample::new(
        frames,
        0,
        entry.apex.map(|a| a - entry.onset),
        entry.offset - entry.onset,
        label,
        entry.subject_id.clone(),
        entry.video_id.clone(),
    )
}

/// Writes a Middlebury `.flo` file (little-endian).
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_flo(flow, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_flo(flow: &FlowField, w: &mut impl Write) -> io::Result<()> {
    w.write_f32::<LittleEndian>(FLO_MAGIC)?;
    w.write_i32::<LittleEndian>(flow.width() as i32)?;
    w.write_i32::<LittleEndian>(flow.height() as i32)?;
    for (u, v) in flow.u().iter().zip(flow.v()) {
        w.write_f32::<LittleEndian>(*u as f32)?;
        w.write_f32::<LittleEndian>(*v as f32)?;
    }
    Ok(())
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes)
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    let truncated = |_| Error::Format("truncated .flo data".into());
    let mut r = bytes;
    let magic = r.read_f32::<LittleEndian>().map_err(truncated)?;
    if magic != FLO_MAGIC {
        return Err(Error::Format(format!("bad .flo magic {magic}")));
    }
    let width = r.read_i32::<LittleEndian>().map_err(truncated)?;
    let height = r.read_i32::<LittleEndian>().map_err(truncated)?;
    if width <= 0 || height <= 0 {
        return Err(Error::Format(format!("bad .flo size {width}x{height}")));
    }
    let n = width as usize * height as usize;
    if r.len() != n * 8 {
        return Err(Error::Format(format!(
            "expected {} bytes of flow data for {width}x{height}, found {}",
            n * 8,
            r.len()
        )));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        u.push(f64::from(r.read_f32::<LittleEndian>().map_err(truncated)?));
        v.push(f64::from(r.read_f32::<LittleEndian>().map_err(truncated)?));
    }
    FlowField::new(width as usize, height as usize, u, v).map_err(|e| Error::Format(e.to_string()))
}

/// Formats `x` with at most 9 significant digits, dropping trailing zeros
/// (`0.5` prints as `0.5`).
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One feature-CSV row: video id, label name, features.
pub type FeatureRow = (String, String, FeatureVector);

/// Writes `video_id,label,f0,...,f{D-1}`; an empty row list gives a header
/// without feature columns.
pub fn export_features(rows: &[FeatureRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(rows, BufWriter::new(file)).map_err(|e| match e {
        Error::Format(m) => Error::io(path, io::Error::other(m)),
        other => other,
    })
}

/// Feature CSV: `video_id,label,f0..f{D-1}`, values to 9 significant digits.
pub fn write_features(rows: &[FeatureRow], out: impl Write) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.2.len());
    if let Some((id, _, f)) = rows.iter().find(|r| r.2.len() != dim) {
        return Err(Error::Shape(format!(
            "feature rows must share one length: {id} has {}, expected {dim}",
            f.len()
        )));
    }
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["video_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(fmt)?;
    for (id, label, f) in rows {
        let mut record = vec![id.clone(), label.clone()];
        record.extend(f.values().iter().map(|&v| format_sig9(v)));
        w.write_record(&record).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn import_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let values = record
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("feature `{v}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((
            record.get(0).unwrap_or("").to_string(),
            record.get(1).unwrap_or("").to_string(),
            FeatureVector::new(values)?,
        ));
    }
    Ok(rows)
}
