//! The CPLE binary container and its CSV fallback.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CPLE"
//! 4       4     version (u32, = 1)
//! 8       1     kind (0 = features, 1 = logits)
//! 9       8     n (u64)
//! 17      4     d (u32)
//! 21      4     c (u32)
//! 25      1     has_labels (0 or 1)
//! 26      4nd   rows, f32 row-major
//! ...     4n    labels, i32 with -1 for unlabeled (only if has_labels)
//! ...     rest  optional UTF-8 JSON sidecar {"class_names": [...]}
//! ```
//!
//! Values are stored as f32 and widened to f64 on load.

use std::fs;
use std::path::Path;

use cpl_core::{ContainerKind, DataContainer, LinearModel};
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

pub const MAGIC: &[u8; 4] = b"CPLE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 26;
const UNLABELED: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub kind: ContainerKind,
    pub n: u64,
    pub d: u32,
    pub c: u32,
    pub has_labels: bool,
}

impl ContainerHeader {
    pub fn payload_len(&self) -> Option<u64> {
        let rows = self.n.checked_mul(self.d as u64)?.checked_mul(4)?;
        let labels = if self.has_labels { self.n.checked_mul(4)? } else { 0 };
        rows.checked_add(labels)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    class_names: Vec<String>,
}

fn kind_code(kind: ContainerKind) -> u8 {
    match kind {
        ContainerKind::Features => 0,
        ContainerKind::Logits => 1,
    }
}

pub fn encode(container: &DataContainer) -> Result<Vec<u8>> {
    let has_labels = container.has_labels();
    let d = u32::try_from(container.dim()).map_err(|_| IoError::format(17, "d does not fit in u32"))?;
    let c = u32::try_from(container.classes()).map_err(|_| IoError::format(21, "c does not fit in u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + container.rows().len() * 4 + container.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_code(container.kind()));
    out.extend_from_slice(&(container.len() as u64).to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    out.push(has_labels as u8);
    for &v in container.rows() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(IoError::format(out.len() as u64, format!("value {v} overflows f32")));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    if has_labels {
        for label in container.labels() {
            let code = label.map_or(UNLABELED, |l| l as i32);
            out.extend_from_slice(&code.to_le_bytes());
        }
    }
    if let Some(names) = container.class_names() {
        out.extend_from_slice(&serde_json::to_vec(&Sidecar {
            class_names: names.to_vec(),
        })?);
    }
    Ok(out)
}

fn take<const N: usize>(bytes: &[u8], offset: usize, field: &str) -> Result<[u8; N]> {
    bytes
        .get(offset..offset + N)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| {
            IoError::format(
                bytes.len() as u64,
                format!("unexpected end of data reading {field} ({N} bytes at offset {offset})"),
            )
        })
}

pub fn decode_header(bytes: &[u8]) -> Result<ContainerHeader> {
    let magic: [u8; 4] = take(bytes, 0, "magic")?;
    if &magic != MAGIC {
        return Err(IoError::format(0, format!("bad magic {magic:?}, expected \"CPLE\"")));
    }
    let version = u32::from_le_bytes(take(bytes, 4, "version")?);
    if version != VERSION {
        return Err(IoError::format(4, format!("unsupported version {version}")));
    }
    let kind = match take::<1>(bytes, 8, "kind")?[0] {
        0 => ContainerKind::Features,
        1 => ContainerKind::Logits,
        other => return Err(IoError::format(8, format!("unknown kind {other}"))),
    };
    let n = u64::from_le_bytes(take(bytes, 9, "n")?);
    let d = u32::from_le_bytes(take(bytes, 17, "d")?);
    let c = u32::from_le_bytes(take(bytes, 21, "c")?);
    let has_labels = match take::<1>(bytes, 25, "has_labels")?[0] {
        0 => false,
        1 => true,
        other => return Err(IoError::format(25, format!("has_labels must be 0 or 1, got {other}"))),
    };
    if d == 0 || c == 0 {
        return Err(IoError::format(17, "d and c must be positive"));
    }
    if kind == ContainerKind::Logits && d != c {
        return Err(IoError::format(
            17,
            format!("logits container needs d == c, got d={d} c={c}"),
        ));
    }
    Ok(ContainerHeader {
        kind,
        n,
        d,
        c,
        has_labels,
    })
}

pub fn decode(bytes: &[u8]) -> Result<DataContainer> {
    let header = decode_header(bytes)?;
    let payload = header
        .payload_len()
        .ok_or_else(|| IoError::format(9, "declared payload size overflows"))?;
    let end = HEADER_LEN as u64 + payload;
    if (bytes.len() as u64) < end {
        return Err(IoError::format(
            bytes.len() as u64,
            format!("truncated payload: header declares {end} bytes, found {}", bytes.len()),
        ));
    }
    let count = (header.n * header.d as u64) as usize;
    let mut offset = HEADER_LEN;
    let mut rows = Vec::with_capacity(count);
    for chunk in bytes[offset..offset + count * 4].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap_or_default());
        if !v.is_finite() {
            return Err(IoError::format(offset as u64, "non-finite value"));
        }
        rows.push(v as f64);
        offset += 4;
    }
    let mut labels = Vec::new();
    if header.has_labels {
        labels.reserve(header.n as usize);
        for chunk in bytes[offset..offset + header.n as usize * 4].chunks_exact(4) {
            let code = i32::from_le_bytes(chunk.try_into().unwrap_or_default());
            let label = match code {
                UNLABELED => None,
                l if l >= 0 && (l as u32) < header.c => Some(l as usize),
                l => {
                    return Err(IoError::format(
                        offset as u64,
                        format!("label {l} outside [-1, {})", header.c),
                    ))
                }
            };
            labels.push(label);
            offset += 4;
        }
    }
    let class_names = if offset < bytes.len() {
        let sidecar: Sidecar = serde_json::from_slice(&bytes[offset..])
            .map_err(|e| IoError::format(offset as u64, format!("invalid JSON sidecar: {e}")))?;
        if sidecar.class_names.len() != header.c as usize {
            return Err(IoError::format(
                offset as u64,
                "sidecar class-name count differs from c",
            ));
        }
        Some(sidecar.class_names)
    } else {
        None
    };
    Ok(DataContainer::new(
        header.kind,
        header.d as usize,
        header.c as usize,
        rows,
        labels,
        class_names,
    )?)
}

pub fn save_container(container: &DataContainer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(container)?).map_err(|e| IoError::io(path, e))
}

pub fn load_container(path: impl AsRef<Path>) -> Result<DataContainer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode(&bytes)
}

/// Loads a CPLE file, or a CSV file when the extension is `.csv`.
pub fn load_any(path: impl AsRef<Path>, kind: ContainerKind, classes: Option<usize>) -> Result<DataContainer> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load_csv(path, kind, classes)
    } else {
        load_container(path)
    }
}

/// Reads `f0,...,f{D-1},label` rows (label `-1` = unlabeled). The class
/// count defaults to `d` for logits and to `max label + 1` for features.
pub fn load_csv(path: impl AsRef<Path>, kind: ContainerKind, classes: Option<usize>) -> Result<DataContainer> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let has_label = headers.iter().next_back() == Some("label");
    let d = headers.len() - has_label as usize;
    for (k, name) in headers.iter().take(d).enumerate() {
        if name != format!("f{k}") {
            return Err(IoError::Csv {
                line: 1,
                message: format!("column {k} is {name:?}, expected \"f{k}\""),
            });
        }
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for field in record.iter().take(d) {
            let v: f64 = field.trim().parse().map_err(|_| IoError::Csv {
                line,
                message: format!("invalid number {field:?}"),
            })?;
            rows.push(v);
        }
        if has_label {
            let code: i64 = record[d].trim().parse().map_err(|_| IoError::Csv {
                line,
                message: format!("invalid label {:?}", &record[d]),
            })?;
            labels.push(match code {
                -1 => None,
                l if l >= 0 => Some(l as usize),
                l => {
                    return Err(IoError::Csv {
                        line,
                        message: format!("invalid label {l}"),
                    })
                }
            });
        }
    }
    let c = match (classes, kind) {
        (Some(c), _) => c,
        (None, ContainerKind::Logits) => d,
        (None, ContainerKind::Features) => labels.iter().flatten().max().map_or(1, |&m| m + 1),
    };
    Ok(DataContainer::new(kind, d, c, rows, labels, None)?)
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::io(path, io),
        other => IoError::Csv {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn save_csv(container: &DataContainer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (0..container.dim()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..container.len() {
        let mut record: Vec<String> = container.row(i).iter().map(|v| v.to_string()).collect();
        record.push(container.label(i).map_or("-1".into(), |l| l.to_string()));
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| IoError::io(path, e))
}

/// Checkpoints reuse the container: `c` rows of `[W_k, b_k]`, kind features.
pub fn save_checkpoint(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    let c = model.classes();
    let container = DataContainer::new(
        ContainerKind::Features,
        model.dim() + 1,
        c,
        model.to_rows(),
        vec![],
        None,
    )?;
    save_container(&container, path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<LinearModel> {
    let container = load_container(path)?;
    if container.len() != container.classes() {
        return Err(IoError::format(9, "checkpoint must have one row per class"));
    }
    Ok(LinearModel::from_rows(
        container.classes(),
        container.dim(),
        container.rows(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DataContainer {
        DataContainer::new(
            ContainerKind::Features,
            2,
            3,
            vec![0.5, -1.25, 3.0, 0.125, -7.5, 2.0],
            vec![Some(2), None, Some(0)],
            Some(vec!["cat".into(), "dog".into(), "owl".into()]),
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"CPLE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 0);
        assert_eq!(u64::from_le_bytes(bytes[9..17].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[21..25].try_into().unwrap()), 3);
        assert_eq!(bytes[25], 1);
        assert_eq!(f32::from_le_bytes(bytes[26..30].try_into().unwrap()), 0.5);
        let labels_at = 26 + 6 * 4;
        assert_eq!(
            i32::from_le_bytes(bytes[labels_at + 4..labels_at + 8].try_into().unwrap()),
            -1
        );
        let sidecar: serde_json::Value = serde_json::from_slice(&bytes[labels_at + 12..]).unwrap();
        assert_eq!(sidecar["class_names"][2], "owl");
    }

    #[test]
    fn round_trip_and_resave() {
        let data = sample();
        let bytes = encode(&data).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back, data);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn unlabeled_container_omits_labels() {
        let data = sample().masked();
        let bytes = encode(&data).unwrap();
        assert_eq!(bytes[25], 0);
        assert_eq!(decode(&bytes).unwrap(), data);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&sample().masked()).unwrap();
        let cut = &bytes[..12];
        match decode(cut) {
            Err(IoError::Format { offset, message }) => {
                assert_eq!(offset, 12);
                assert!(message.contains("reading n"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let cut = &bytes[..HEADER_LEN + 10];
        assert!(matches!(decode(cut), Err(IoError::Format { offset, .. }) if offset == HEADER_LEN as u64 + 10));
    }

    #[test]
    fn bad_magic_version_kind() {
        let mut bytes = encode(&sample()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(IoError::Format { offset: 0, .. })));
        let mut bytes = encode(&sample()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(IoError::Format { offset: 4, .. })));
        let mut bytes = encode(&sample()).unwrap();
        bytes[8] = 7;
        assert!(matches!(decode(&bytes), Err(IoError::Format { offset: 8, .. })));
        let mut bytes = encode(&sample()).unwrap();
        bytes[8] = 1; // logits with d != c
        assert!(matches!(decode(&bytes), Err(IoError::Format { offset: 17, .. })));
    }

    #[test]
    fn bad_label_rejected() {
        let mut bytes = encode(&sample()).unwrap();
        let at = 26 + 6 * 4;
        bytes[at..at + 4].copy_from_slice(&5i32.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(IoError::Format { offset, .. }) if offset == at as u64));
    }
}
