// SPDX-License-Identifier: Apache-2.0

//! Point cloud I/O: comma-separated text for pipeline files and a reader for
//! uncompressed LAS point formats 0, 1 and 6.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cloud::{Label, Point3, PointCloud, PointRecord, TruthLabel};
use crate::error::{Error, Result};

/// Output column order. `x,y,z` are always written.
pub const COLUMN_ORDER: [&str; 8] = ["x", "y", "z", "intensity", "truth", "ground", "v", "class"];

/// Optional columns to write.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ColumnSet {
    pub intensity: bool,
    pub truth: bool,
    pub ground: bool,
    pub v: bool,
    pub class: bool,
}

impl ColumnSet {
    pub fn none() -> Self {
        Self::default()
    }

    /// Every optional column the cloud can supply.
    pub fn available(cloud: &PointCloud<f64>) -> Self {
        Self {
            intensity: cloud.has_intensity(),
            truth: cloud.has_truth(),
            ground: cloud.ground_mask().is_some(),
            v: cloud.features().is_some(),
            class: cloud.has_predicted(),
        }
    }

    pub fn header(&self) -> Vec<&'static str> {
        let on = [
            true,
            true,
            true,
            self.intensity,
            self.truth,
            self.ground,
            self.v,
            self.class,
        ];
        COLUMN_ORDER
            .iter()
            .zip(on)
            .filter(|(_, b)| *b)
            .map(|(c, _)| *c)
            .collect()
    }

    fn check(&self, cloud: &PointCloud<f64>) -> Result<()> {
        let have = Self::available(cloud);
        let missing: Vec<&str> = [
            ("intensity", self.intensity && !have.intensity),
            ("truth", self.truth && !have.truth),
            ("ground", self.ground && !have.ground),
            ("v", self.v && !have.v),
            ("class", self.class && !have.class),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|(c, _)| *c)
        .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::SchemaError(format!(
                "requested column(s) not present on the cloud: {}",
                missing.join(", ")
            )))
        }
    }
}

fn parse_f64(cell: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::ParseError {
        row,
        message: format!("column {col}: cannot parse {cell:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::ParseError {
            row,
            message: format!("column {col}: non-finite value {cell:?}"),
        });
    }
    Ok(v)
}

fn parse_bool(cell: &str, row: usize) -> Result<bool> {
    match cell.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::ParseError {
            row,
            message: format!("column ground: expected 0/1, got {other:?}"),
        }),
    }
}

/// Parses CSV text. Row numbers in errors count the header as row 1.
pub fn parse_csv(text: &str) -> Result<PointCloud<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::SchemaError(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(Error::SchemaError(format!(
            "header must contain x, y and z; got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    };
    let [ii, it, ig, iv, ic] = ["intensity", "truth", "ground", "v", "class"].map(find);
    for h in headers.iter().filter(|h| !COLUMN_ORDER.contains(h)) {
        log::warn!("ignoring unknown column {h:?}");
    }

    let mut records = Vec::new();
    let mut ground = Vec::new();
    let mut features = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::ParseError {
            row: line,
            message: e.to_string(),
        })?;
        let cell = |i: usize| row.get(i).unwrap_or("");
        let p = Point3::new(
            parse_f64(cell(ix), line, "x")?,
            parse_f64(cell(iy), line, "y")?,
            parse_f64(cell(iz), line, "z")?,
        );
        let mut r = PointRecord::new(p);
        if let Some(i) = ii.filter(|&i| !cell(i).is_empty()) {
            r.intensity = Some(parse_f64(cell(i), line, "intensity")?);
        }
        if let Some(i) = it.filter(|&i| !cell(i).is_empty()) {
            let t: TruthLabel = cell(i)
                .parse()
                .map_err(|m| Error::ParseError { row: line, message: m })?;
            r.truth_label = Some(t);
        }
        if let Some(i) = ic.filter(|&i| !cell(i).is_empty()) {
            let l: Label = cell(i)
                .parse()
                .map_err(|m| Error::ParseError { row: line, message: m })?;
            r.predicted_label = Some(l);
        }
        if let Some(i) = ig {
            ground.push(parse_bool(cell(i), line)?);
        }
        if let Some(i) = iv {
            features.push(match cell(i) {
                "" => None,
                s => Some(parse_f64(s, line, "v")?),
            });
        }
        records.push(r);
    }
    let mut cloud = PointCloud::new(records).map_err(|e| match e {
        Error::EmptyInput(_) => Error::EmptyInput("CSV has a header but no data rows".into()),
        other => other,
    })?;
    if ig.is_some() {
        cloud.set_ground_mask(ground)?;
    }
    if iv.is_some() {
        cloud.set_features(features)?;
    }
    Ok(cloud)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<PointCloud<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Renders the cloud as CSV. Floats use the shortest representation that
/// parses back to the same bits.
pub fn format_csv(cloud: &PointCloud<f64>, include: ColumnSet) -> Result<String> {
    include.check(cloud)?;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::SchemaError(format!("csv writer: {e}"));
    w.write_record(include.header()).map_err(csv_err)?;
    let ground = cloud.ground_mask();
    let features = cloud.features();
    let mut row: Vec<String> = Vec::with_capacity(8);
    for (i, r) in cloud.records().iter().enumerate() {
        row.clear();
        row.push(r.position.x.to_string());
        row.push(r.position.y.to_string());
        row.push(r.position.z.to_string());
        if include.intensity {
            row.push(r.intensity.map(|v| v.to_string()).unwrap_or_default());
        }
        if include.truth {
            row.push(r.truth_label.map(|t| t.to_string()).unwrap_or_default());
        }
        if include.ground {
            row.push(if ground.is_some_and(|g| g[i]) { "1" } else { "0" }.into());
        }
        if include.v {
            row.push(features.and_then(|f| f[i]).map(|v| v.to_string()).unwrap_or_default());
        }
        if include.class {
            row.push(r.predicted_label.map(|l| l.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::SchemaError(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes through a temporary file in the target directory, so a failed
/// write never leaves a partial file behind.
pub fn write_csv(cloud: &PointCloud<f64>, path: impl AsRef<Path>, include: ColumnSet) -> Result<()> {
    let text = format_csv(cloud, include)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Fields of a LAS public header block that the reader uses.
#[derive(Debug, Clone, PartialEq)]
pub struct LasHeader {
    pub version: (u8, u8),
    pub point_format: u8,
    pub record_length: u16,
    pub point_offset: u32,
    pub point_count: u64,
    pub scale: [f64; 3],
    pub offset: [f64; 3],
}

fn record_length_of(format: u8) -> Option<u16> {
    match format {
        0 => Some(20),
        1 => Some(28),
        6 => Some(30),
        _ => None,
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn i32_at(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

const LAS_MIN_HEADER: usize = 227;

pub fn parse_las_header(bytes: &[u8]) -> Result<LasHeader> {
    if bytes.len() < 4 || &bytes[..4] != b"LASF" {
        return Err(Error::FormatError("missing LASF signature".into()));
    }
    if bytes.len() < LAS_MIN_HEADER {
        return Err(Error::FormatError(format!(
            "header truncated: {} bytes, need {LAS_MIN_HEADER}",
            bytes.len()
        )));
    }
    let version = (bytes[24], bytes[25]);
    let header_size = u16_at(bytes, 94) as usize;
    let raw_format = bytes[104];
    // bits 6 and 7 mark compressed (LAZ) data
    let point_format = raw_format & 0x3f;
    if raw_format & 0xc0 != 0 {
        return Err(Error::UnsupportedFormat(raw_format));
    }
    let expected = record_length_of(point_format).ok_or(Error::UnsupportedFormat(point_format))?;
    let record_length = u16_at(bytes, 105);
    if record_length < expected {
        return Err(Error::FormatError(format!(
            "point record length {record_length} is shorter than format {point_format}'s {expected}"
        )));
    }
    let mut point_count = u32_at(bytes, 107) as u64;
    if version >= (1, 4) && header_size >= 255 && bytes.len() >= 255 {
        let wide = u64_at(bytes, 247);
        if wide != 0 {
            point_count = wide;
        }
    }
    let scale = [f64_at(bytes, 131), f64_at(bytes, 139), f64_at(bytes, 147)];
    let offset = [f64_at(bytes, 155), f64_at(bytes, 163), f64_at(bytes, 171)];
    if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::FormatError(format!(
            "scale factors must be positive, got {scale:?}"
        )));
    }
    if offset.iter().any(|o| !o.is_finite()) {
        return Err(Error::FormatError("non-finite offset".into()));
    }
    Ok(LasHeader {
        version,
        point_format,
        record_length,
        point_offset: u32_at(bytes, 96),
        point_count,
        scale,
        offset,
    })
}

/// Decodes a LAS byte buffer. Classification bytes are ignored.
pub fn parse_las(bytes: &[u8]) -> Result<PointCloud<f64>> {
    let h = parse_las_header(bytes)?;
    let start = h.point_offset as usize;
    let len = h.record_length as usize;
    let need = (h.point_count as u128) * (len as u128) + start as u128;
    if (bytes.len() as u128) < need {
        return Err(Error::FormatError(format!(
            "header declares {} points but the file holds {}",
            h.point_count,
            bytes.len().saturating_sub(start) / len
        )));
    }
    let mut records = Vec::with_capacity(h.point_count as usize);
    for k in 0..h.point_count as usize {
        let at = start + k * len;
        let raw = [i32_at(bytes, at), i32_at(bytes, at + 4), i32_at(bytes, at + 8)];
        let p = Point3::new(
            raw[0] as f64 * h.scale[0] + h.offset[0],
            raw[1] as f64 * h.scale[1] + h.offset[1],
            raw[2] as f64 * h.scale[2] + h.offset[2],
        );
        records.push(PointRecord::new(p).with_intensity(u16_at(bytes, at + 12) as f64));
    }
    PointCloud::new(records)
}

pub fn read_las(path: impl AsRef<Path>) -> Result<PointCloud<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_las(&bytes)
}

/// Picks the reader by extension: `.las` is binary LAS, anything else CSV.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud<f64>> {
    let path = path.as_ref();
    let is_las = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("las"));
    if is_las {
        read_las(path)
    } else {
        read_csv(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let c = parse_csv("x,y,z\n1,2,3\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.position(0), Point3::new(1.0, 2.0, 3.0));
        assert!(!c.has_intensity());
    }

    #[test]
    fn truth_vocabulary() {
        let c = parse_csv("x,y,z,truth\n0,0,0,ground\n0,0,1,tree\n0,0,2,human\n").unwrap();
        let t: Vec<_> = c.records().iter().map(|r| r.truth_label.unwrap()).collect();
        assert_eq!(t, [TruthLabel::Ground, TruthLabel::Tree, TruthLabel::HumanMade]);
    }

    #[test]
    fn missing_column() {
        assert!(matches!(parse_csv("x,y\n1,2\n"), Err(Error::SchemaError(_))));
    }

    #[test]
    fn parse_error_carries_row() {
        match parse_csv("x,y,z\n1,2,3\n1,abc,3\n") {
            Err(Error::ParseError { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_csv("x,y,z\n1,NaN,3\n"),
            Err(Error::ParseError { row: 2, .. })
        ));
        assert!(matches!(parse_csv("x,y,z\n1,inf,3\n"), Err(Error::ParseError { .. })));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse_csv("x,y,z\n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn unknown_columns_and_order() {
        let c = parse_csv("z,extra,y,x\n3,9,2,1\n").unwrap();
        assert_eq!(c.position(0), Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn header_follows_fixed_order() {
        assert_eq!(ColumnSet::none().header(), ["x", "y", "z"]);
        let all = ColumnSet {
            intensity: true,
            truth: true,
            ground: true,
            v: true,
            class: true,
        };
        assert_eq!(all.header(), COLUMN_ORDER);
    }

    #[test]
    fn absent_column_requested() {
        let c = parse_csv("x,y,z\n1,2,3\n").unwrap();
        let want = ColumnSet {
            intensity: true,
            ..ColumnSet::none()
        };
        assert!(matches!(format_csv(&c, want), Err(Error::SchemaError(_))));
    }

    #[test]
    fn class_vocabulary() {
        let mut c = parse_csv("x,y,z\n0,0,0\n0,0,1\n0,0,2\n0,0,3\n0,0,4\n").unwrap();
        c.set_predicted(&[
            Label::Ground,
            Label::Tree,
            Label::HumanMade,
            Label::HumanMadeSub(1),
            Label::HumanMadeSub(2),
        ])
        .unwrap();
        let text = format_csv(
            &c,
            ColumnSet {
                class: true,
                ..ColumnSet::none()
            },
        )
        .unwrap();
        let classes: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(classes, ["ground", "tree", "human", "human_1", "human_2"]);
    }

    #[test]
    fn round_trip_all_columns() {
        let text = "x,y,z,intensity,truth,ground,v,class\n\
                    0.1,1e-7,600.0000000000001,12,ground,1,,ground\n\
                    -3.3333333333333335,2.5,1e300,0,tree,0,2.718281828459045,tree\n";
        let c = parse_csv(text).unwrap();
        let again = parse_csv(&format_csv(&c, ColumnSet::available(&c)).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.position(0).z.to_bits(), 600.0000000000001f64.to_bits());
        assert_eq!(again.features().unwrap()[0], None);
    }

    fn las_bytes(format: u8, scale: f64, offset: f64, raws: &[[i32; 3]], declared: u32) -> Vec<u8> {
        let len = record_length_of(format).unwrap() as usize;
        let mut b = vec![0u8; 227];
        b[..4].copy_from_slice(b"LASF");
        b[24] = 1;
        b[25] = 2;
        b[94..96].copy_from_slice(&227u16.to_le_bytes());
        b[96..100].copy_from_slice(&227u32.to_le_bytes());
        b[104] = format;
        b[105..107].copy_from_slice(&(len as u16).to_le_bytes());
        b[107..111].copy_from_slice(&declared.to_le_bytes());
        for k in 0..3 {
            b[131 + 8 * k..139 + 8 * k].copy_from_slice(&scale.to_le_bytes());
            b[155 + 8 * k..163 + 8 * k].copy_from_slice(&offset.to_le_bytes());
        }
        for (k, r) in raws.iter().enumerate() {
            let mut rec = vec![0u8; len];
            for a in 0..3 {
                rec[4 * a..4 * a + 4].copy_from_slice(&r[a].to_le_bytes());
            }
            rec[12..14].copy_from_slice(&(100 + k as u16).to_le_bytes());
            b.extend(rec);
        }
        b
    }

    #[test]
    fn las_scale_offset() {
        let b = las_bytes(1, 0.01, 100.0, &[[12345, 0, -1]], 1);
        let c = parse_las(&b).unwrap();
        assert_eq!(c.position(0).x, 12345.0 * 0.01 + 100.0);
        assert!((c.position(0).x - 223.45).abs() < 1e-12);
        assert_eq!(c.record(0).intensity, Some(100.0));
    }

    #[test]
    fn las_errors() {
        let mut b = las_bytes(0, 0.01, 0.0, &[[1, 2, 3]], 1);
        b[3] = b'X';
        assert!(matches!(parse_las(&b), Err(Error::FormatError(_))));
        let b = las_bytes(0, 0.01, 0.0, &[[1, 2, 3]; 9], 10);
        assert!(matches!(parse_las(&b), Err(Error::FormatError(_))));
        let mut b = las_bytes(0, 0.01, 0.0, &[[1, 2, 3]], 1);
        b[104] = 3;
        assert!(matches!(parse_las(&b), Err(Error::UnsupportedFormat(3))));
        let mut b = las_bytes(0, 0.01, 0.0, &[[1, 2, 3]], 1);
        b[104] = 0x80;
        assert!(matches!(parse_las(&b), Err(Error::UnsupportedFormat(0x80))));
        let b = las_bytes(6, 0.0, 0.0, &[[1, 2, 3]], 1);
        assert!(matches!(parse_las(&b), Err(Error::FormatError(_))));
        assert!(matches!(parse_las(b"LASF"), Err(Error::FormatError(_))));
    }

    #[test]
    fn las_is_deterministic() {
        let b = las_bytes(6, 0.001, -5.0, &[[1, 2, 3], [4, 5, 6]], 2);
        assert_eq!(parse_las(&b).unwrap(), parse_las(&b).unwrap());
    }
}
