//! Persistence: binary fingerprint databases and the CSV dataset format.
//!
//! Database file layout (all multi-byte integers little-endian, floats
//! IEEE-754 binary64):
//!
//! ```text
//! magic        8 bytes  "CSIFPDB1"
//! version      u16      currently 1
//! n_locations  u32
//! shape        4 x u32  k1, k2, k3, k4 (input width fixed at 90)
//! flags        u16      bit0 L2 distance, bit1 sigma=var, bit2 no-bias forward
//! grid_m       f64
//! per location:
//!   x, y                     f64
//!   min_amp, max_amp         f64
//!   8 weight matrices        f64 row-major (enc 1-4, then dec 1-4)
//!   8 bias vectors           f64          (enc 1-4, then dec 1-4)
//! ```
//!
//! Floats round-trip bit-exactly, so saving and reloading a database is the
//! identity. Writes go to a temp file in the target directory and rename
//! into place.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::csi::{AntennaSelection, CsiPacket, NormalizationParams, SigmaMode, CSI_DIM};
use crate::deepnet::{FingerprintModel, NetShape};
use crate::locator::{DbFlags, DistanceMetric, FingerprintDatabase, LocationRecord};

pub const DB_MAGIC: &[u8; 8] = b"CSIFPDB1";
pub const DB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DatastoreError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected \"CSIFPDB1\"")]
    BadMagic,
    #[error("unsupported version {found} (supported: {supported})")]
    VersionMismatch { found: u16, supported: u16 },
    #[error("file truncated")]
    Truncated,
    #[error("trailing bytes after payload")]
    TrailingData,
    #[error("non-finite weight in stored model")]
    NonFiniteWeight,
    #[error("invalid stored value: {0}")]
    InvalidValue(String),
    #[error("only 90-input models can be persisted, got n_in = {0}")]
    UnsupportedShape(usize),
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn flags_to_bits(flags: DbFlags) -> u16 {
    let mut bits = 0u16;
    if flags.distance == DistanceMetric::L2 {
        bits |= 1;
    }
    if flags.sigma_mode == SigmaMode::Var {
        bits |= 2;
    }
    if flags.bias_forward_disabled {
        bits |= 4;
    }
    bits
}

fn bits_to_flags(bits: u16) -> Result<DbFlags, DatastoreError> {
    if bits & !0b111 != 0 {
        return Err(DatastoreError::InvalidValue(format!(
            "unknown flag bits {bits:#06x}"
        )));
    }
    Ok(DbFlags {
        distance: if bits & 1 != 0 {
            DistanceMetric::L2
        } else {
            DistanceMetric::L1
        },
        sigma_mode: if bits & 2 != 0 {
            SigmaMode::Var
        } else {
            SigmaMode::Std
        },
        bias_forward_disabled: bits & 4 != 0,
    })
}

struct LeWriter<W: Write> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    fn u16(&mut self, v: u16) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
}

struct LeReader<R: Read> {
    inner: R,
}

impl<R: Read> LeReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], DatastoreError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                DatastoreError::Truncated
            } else {
                DatastoreError::Io(e)
            }
        })?;
        Ok(buf)
    }
    fn u16(&mut self) -> Result<u16, DatastoreError> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<u32, DatastoreError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, DatastoreError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

/// Serializes a fingerprint database. The write is atomic: a temp file next
/// to `path` is renamed into place.
pub fn save_db(db: &FingerprintDatabase, path: &Path) -> Result<(), DatastoreError> {
    let shape = db.entries()[0].shape;
    if shape.n_in != CSI_DIM {
        return Err(DatastoreError::UnsupportedShape(shape.n_in));
    }

    let tmp = path.with_extension("tmp");
    {
        let mut w = LeWriter {
            inner: BufWriter::new(File::create(&tmp)?),
        };
        w.inner.write_all(DB_MAGIC)?;
        w.u16(DB_VERSION)?;
        w.u32(db.len() as u32)?;
        for k in [shape.k1, shape.k2, shape.k3, shape.k4] {
            w.u32(k as u32)?;
        }
        w.u16(flags_to_bits(db.flags()))?;
        w.f64(db.grid_m())?;

        for model in db.entries() {
            w.f64(model.location.0)?;
            w.f64(model.location.1)?;
            w.f64(model.norm.min_amp)?;
            w.f64(model.norm.max_amp)?;
            for mat in model.enc_w.iter().chain(model.dec_w.iter()) {
                for &x in mat.iter() {
                    w.f64(x)?;
                }
            }
            for vec in model.enc_b.iter().chain(model.dec_b.iter()) {
                for &x in vec.iter() {
                    w.f64(x)?;
                }
            }
        }
        w.inner.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a fingerprint database, validating magic, version, finiteness and
/// exact payload length.
pub fn load_db(path: &Path) -> Result<FingerprintDatabase, DatastoreError> {
    let mut r = LeReader {
        inner: BufReader::new(File::open(path)?),
    };
    let magic: [u8; 8] = r.bytes()?;
    if &magic != DB_MAGIC {
        return Err(DatastoreError::BadMagic);
    }
    let version = r.u16()?;
    if version != DB_VERSION {
        return Err(DatastoreError::VersionMismatch {
            found: version,
            supported: DB_VERSION,
        });
    }
    let n_locations = r.u32()? as usize;
    let k1 = r.u32()? as usize;
    let k2 = r.u32()? as usize;
    let k3 = r.u32()? as usize;
    let k4 = r.u32()? as usize;
    let shape = NetShape::new(k1, k2, k3, k4)
        .map_err(|e| DatastoreError::InvalidValue(e.to_string()))?;
    let flags = bits_to_flags(r.u16()?)?;
    let grid_m = r.f64()?;

    let dims = shape.layer_dims();
    let mut entries = Vec::with_capacity(n_locations);
    for _ in 0..n_locations {
        let x = r.f64()?;
        let y = r.f64()?;
        let min_amp = r.f64()?;
        let max_amp = r.f64()?;
        let norm = NormalizationParams::new(min_amp, max_amp)
            .map_err(|e| DatastoreError::InvalidValue(e.to_string()))?;

        let mut read_matrix = |rows: usize, cols: usize| -> Result<Array2<f64>, DatastoreError> {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let v = r.f64()?;
                if !v.is_finite() {
                    return Err(DatastoreError::NonFiniteWeight);
                }
                data.push(v);
            }
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| DatastoreError::InvalidValue(e.to_string()))
        };

        let mut enc_w = Vec::with_capacity(4);
        for &(nv, nh) in &dims {
            enc_w.push(read_matrix(nv, nh)?);
        }
        let mut dec_w = Vec::with_capacity(4);
        for &(nv, nh) in dims.iter().rev() {
            dec_w.push(read_matrix(nh, nv)?);
        }

        let mut read_vector = |len: usize| -> Result<Array1<f64>, DatastoreError> {
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let v = r.f64()?;
                if !v.is_finite() {
                    return Err(DatastoreError::NonFiniteWeight);
                }
                data.push(v);
            }
            Ok(Array1::from_vec(data))
        };

        let mut enc_b = Vec::with_capacity(4);
        for &(_, nh) in &dims {
            enc_b.push(read_vector(nh)?);
        }
        let mut dec_b = Vec::with_capacity(4);
        for &(nv, _) in dims.iter().rev() {
            dec_b.push(read_vector(nv)?);
        }

        entries.push(FingerprintModel {
            shape,
            enc_w,
            enc_b,
            dec_w,
            dec_b,
            norm,
            location: (x, y),
        });
    }

    let mut probe = [0u8; 1];
    match r.inner.read(&mut probe)? {
        0 => {}
        _ => return Err(DatastoreError::TrailingData),
    }

    FingerprintDatabase::with_flags(entries, grid_m, flags, AntennaSelection::All)
        .map_err(|e| DatastoreError::Invalid(e.to_string()))
}

/// Exact file size `save_db` produces for a given shape and location count.
pub fn predicted_db_size(shape: &NetShape, n_locations: usize) -> usize {
    let dims = shape.layer_dims();
    let weights: usize = dims.iter().map(|(a, b)| a * b).sum::<usize>() * 2;
    let biases: usize = dims.iter().map(|(_, b)| b).sum::<usize>()
        + dims.iter().map(|(a, _)| a).sum::<usize>();
    let per_location = (4 + weights + biases) * 8;
    8 + 2 + 4 + 16 + 2 + 8 + n_locations * per_location
}

const CSV_COLUMNS: usize = 4 + CSI_DIM;

/// Writes per-location packets as the dataset CSV: header row, then one row
/// per packet: `location_id,x_m,y_m,rss_dbm,a0s0..a2s29`.
pub fn write_dataset(records: &[LocationRecord], path: &Path) -> Result<(), DatastoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        let mut header = String::from("location_id,x_m,y_m,rss_dbm");
        for a in 0..3 {
            for s in 0..30 {
                header.push_str(&format!(",a{a}s{s}"));
            }
        }
        writeln!(w, "{header}")?;
        for rec in records {
            for packet in &rec.packets {
                write!(w, "{},{},{},", rec.id, rec.xy.0, rec.xy.1)?;
                if let Some(r) = packet.rss {
                    write!(w, "{r}")?;
                }
                for &a in packet.amplitudes().iter() {
                    write!(w, ",{a}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads the dataset CSV back into per-location packet lists, grouped by
/// `location_id` in first-appearance order. A header-only file yields an
/// empty dataset.
pub fn read_dataset(path: &Path) -> Result<Vec<LocationRecord>, DatastoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records: Vec<LocationRecord> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if !line.starts_with("location_id,") {
                return Err(DatastoreError::CsvParse {
                    line: 1,
                    message: "missing header row".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_COLUMNS {
            return Err(DatastoreError::CsvParse {
                line: idx + 1,
                message: format!("expected {CSV_COLUMNS} columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, DatastoreError> {
            s.parse::<f64>().map_err(|_| DatastoreError::CsvParse {
                line: idx + 1,
                message: format!("bad {what}: {s:?}"),
            })
        };
        let id = fields[0].to_string();
        let x = parse(fields[1], "x_m")?;
        let y = parse(fields[2], "y_m")?;
        let rss = if fields[3].is_empty() {
            None
        } else {
            Some(parse(fields[3], "rss_dbm")?)
        };
        let mut amplitudes = Vec::with_capacity(CSI_DIM);
        for f in &fields[4..] {
            amplitudes.push(parse(f, "amplitude")?);
        }
        let packet = CsiPacket::new(amplitudes, rss, None).map_err(|e| {
            DatastoreError::CsvParse {
                line: idx + 1,
                message: e.to_string(),
            }
        })?;

        match records.iter_mut().find(|r| r.id == id) {
            Some(rec) => {
                if rec.xy != (x, y) {
                    return Err(DatastoreError::CsvParse {
                        line: idx + 1,
                        message: format!("location_id {id} has inconsistent coordinates"),
                    });
                }
                rec.packets.push(packet);
            }
            None => records.push(LocationRecord {
                id,
                xy: (x, y),
                packets: vec![packet],
            }),
        }
    }
    Ok(records)
}

/// Writes a key=value description of a scenario next to its dataset files.
pub fn write_scenario_meta(
    scenario: &crate::simulator::SimScenario,
    layout: &str,
    counts: (usize, usize, usize, usize),
    path: &Path,
) -> Result<(), DatastoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "layout={layout}")?;
    writeln!(w, "room_w_m={}", scenario.room_w_m)?;
    writeln!(w, "room_h_m={}", scenario.room_h_m)?;
    writeln!(w, "ap_x={}", scenario.ap_xy.0)?;
    writeln!(w, "ap_y={}", scenario.ap_xy.1)?;
    writeln!(w, "grid_m={}", scenario.grid_m)?;
    writeln!(w, "n_clusters_min={}", scenario.n_clusters_range.0)?;
    writeln!(w, "n_clusters_max={}", scenario.n_clusters_range.1)?;
    writeln!(w, "noise_std={}", scenario.noise_std)?;
    writeln!(
        w,
        "antenna_offsets={},{},{}",
        scenario.antenna_offsets[0], scenario.antenna_offsets[1], scenario.antenna_offsets[2]
    )?;
    writeln!(w, "rss_path_loss_exp={}", scenario.rss_path_loss_exp)?;
    writeln!(w, "seed={}", scenario.seed)?;
    writeln!(w, "n_train_points={}", counts.0)?;
    writeln!(w, "n_test_points={}", counts.1)?;
    writeln!(w, "packets_per_train={}", counts.2)?;
    writeln!(w, "packets_per_test={}", counts.3)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::NormalizedCsi;
    use crate::deepnet::{pretrain, unroll, TrainConfig};
    use crate::rng::RngStream;

    fn tiny_db(n: usize, seed: u64) -> FingerprintDatabase {
        let shape = NetShape::new(8, 6, 4, 2).unwrap();
        let models: Vec<FingerprintModel> = (0..n)
            .map(|i| {
                let mut rng = RngStream::seeded(seed + i as u64);
                let inputs: Vec<NormalizedCsi> = (0..3)
                    .map(|_| {
                        NormalizedCsi::new(
                            (0..CSI_DIM).map(|_| 0.1 + 0.8 * rng.uniform()).collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                let cfg = TrainConfig {
                    pretrain_epochs: 1,
                    seed: seed + i as u64,
                    ..TrainConfig::default()
                };
                unroll(
                    &pretrain(&inputs, &shape, &cfg).unwrap(),
                    NormalizationParams::new(1.0, 9.0).unwrap(),
                    (i as f64 * 0.5, 1.0),
                )
                .unwrap()
            })
            .collect();
        FingerprintDatabase::new(models, 0.5).unwrap()
    }

    #[test]
    fn db_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        let db = tiny_db(3, 11);
        save_db(&db, &path).unwrap();
        let loaded = load_db(&path).unwrap();
        assert_eq!(db.len(), loaded.len());
        assert_eq!(db.grid_m(), loaded.grid_m());
        assert_eq!(db.flags(), loaded.flags());
        for (a, b) in db.entries().iter().zip(loaded.entries()) {
            assert_eq!(a.location, b.location);
            assert_eq!(a.norm, b.norm);
            for (wa, wb) in a.enc_w.iter().zip(&b.enc_w) {
                for (x, y) in wa.iter().zip(wb.iter()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            for (wa, wb) in a.dec_w.iter().zip(&b.dec_w) {
                for (x, y) in wa.iter().zip(wb.iter()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn db_flags_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        let base = tiny_db(2, 3);
        let flags = DbFlags {
            distance: DistanceMetric::L2,
            sigma_mode: SigmaMode::Var,
            bias_forward_disabled: true,
        };
        let db = FingerprintDatabase::with_flags(
            base.entries().to_vec(),
            0.25,
            flags,
            AntennaSelection::All,
        )
        .unwrap();
        save_db(&db, &path).unwrap();
        let loaded = load_db(&path).unwrap();
        assert_eq!(loaded.flags(), flags);
        assert_eq!(loaded.grid_m(), 0.25);
    }

    #[test]
    fn db_file_size_matches_prediction() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        let db = tiny_db(3, 7);
        save_db(&db, &path).unwrap();
        let meta = fs::metadata(&path).unwrap();
        let shape = db.entries()[0].shape;
        assert_eq!(meta.len() as usize, predicted_db_size(&shape, 3));
    }

    #[test]
    fn db_predicted_size_full_scale() {
        // Arithmetic on field sizes for the standard living-room database.
        let shape = NetShape::new(300, 150, 100, 50).unwrap();
        let weights = 2 * (90 * 300 + 300 * 150 + 150 * 100 + 100 * 50);
        let biases = (300 + 150 + 100 + 50) + (100 + 150 + 300 + 90);
        let expected = 40 + 38 * (4 + weights + biases) * 8;
        assert_eq!(predicted_db_size(&shape, 38), expected);
    }

    #[test]
    fn load_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        let db = tiny_db(1, 5);
        save_db(&db, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_db(&path), Err(DatastoreError::BadMagic)));
    }

    #[test]
    fn load_rejects_bad_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        save_db(&tiny_db(1, 6), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = 99;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_db(&path),
            Err(DatastoreError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn load_rejects_truncation_and_trailing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        save_db(&tiny_db(2, 8), &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_db(&path), Err(DatastoreError::Truncated)));

        let mut extended = bytes.clone();
        extended.push(0);
        fs::write(&path, &extended).unwrap();
        assert!(matches!(load_db(&path), Err(DatastoreError::TrailingData)));
    }

    #[test]
    fn load_rejects_non_finite_weight() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.db");
        save_db(&tiny_db(1, 9), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        // First weight starts after header (40) + location/norm (32).
        let offset = 72;
        bytes[offset..offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_db(&path),
            Err(DatastoreError::NonFiniteWeight)
        ));
    }

    fn sample_records(seed: u64) -> Vec<LocationRecord> {
        let mut rng = RngStream::seeded(seed);
        (0..3)
            .map(|i| LocationRecord {
                id: format!("{i}"),
                xy: (i as f64 * 0.5, 2.0),
                packets: (0..4)
                    .map(|j| {
                        CsiPacket::new(
                            (0..CSI_DIM).map(|_| 10.0 * rng.uniform()).collect(),
                            if j % 2 == 0 {
                                Some(-40.0 - rng.uniform())
                            } else {
                                None
                            },
                            None,
                        )
                        .unwrap()
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let records = sample_records(13);
        write_dataset(&records, &path).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert_eq!(records.len(), loaded.len());
        for (a, b) in records.iter().zip(&loaded) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.xy, b.xy);
            assert_eq!(a.packets.len(), b.packets.len());
            for (pa, pb) in a.packets.iter().zip(&b.packets) {
                assert_eq!(pa.amplitudes(), pb.amplitudes());
                assert_eq!(pa.rss, pb.rss);
            }
        }
    }

    #[test]
    fn dataset_rejects_wrong_column_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let records = sample_records(14);
        write_dataset(&records, &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        // Append a 95th column to the first data row.
        let lines: Vec<&str> = text.lines().collect();
        let mut bad = lines[1].to_string();
        bad.push_str(",1.0");
        text = format!("{}\n{}\n", lines[0], bad);
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(DatastoreError::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn dataset_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_dataset(&[], &path).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn dataset_missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "1,2,3\n").unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(DatastoreError::CsvParse { line: 1, .. })
        ));
    }

    #[test]
    fn scenario_meta_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.meta");
        let scenario = crate::simulator::SimScenario::living_room(77);
        write_scenario_meta(&scenario, "living_room", (38, 12, 500, 100), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("layout=living_room"));
        assert!(text.contains("seed=77"));
        assert!(text.contains("room_w_m=4"));
        assert!(text.contains("packets_per_train=500"));
    }
}
