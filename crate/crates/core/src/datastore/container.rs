use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{DatastoreError, Manifest};

pub const FIELDS_ARRAY: &str = "fields";
pub const STATIC_ARRAY: &str = "static";

const MANIFEST_FILE: &str = "manifest.json";
const DATA_DIR: &str = "data";

fn blob_path(root: &Path, name: &str) -> PathBuf {
    root.join(DATA_DIR).join(format!("{name}.f32le"))
}

/// A fully materialized container.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub manifest: Manifest,
    pub arrays: BTreeMap<String, Vec<f32>>,
}

impl Container {
    pub fn array(&self, name: &str) -> Option<&[f32]> {
        self.arrays.get(name).map(Vec::as_slice)
    }

    pub fn write(&self, path: &Path) -> Result<(), DatastoreError> {
        write_container(path, self)
    }

    pub fn read(path: &Path) -> Result<Self, DatastoreError> {
        let reader = ContainerReader::open(path)?;
        let mut arrays = BTreeMap::new();
        for a in &reader.manifest().arrays {
            arrays.insert(a.name.clone(), reader.read_array(&a.name)?);
        }
        Ok(Self {
            manifest: reader.manifest().clone(),
            arrays,
        })
    }
}

pub fn write_container(path: &Path, c: &Container) -> Result<(), DatastoreError> {
    c.manifest.validate()?;
    let data_dir = path.join(DATA_DIR);
    fs::create_dir_all(&data_dir).map_err(|e| DatastoreError::io(&data_dir, e))?;
    for info in &c.manifest.arrays {
        let values = c
            .arrays
            .get(&info.name)
            .ok_or_else(|| DatastoreError::Schema(format!("array {} declared but not provided", info.name)))?;
        if values.len() != info.len() {
            return Err(DatastoreError::ByteLength {
                array: info.name.clone(),
                expected: info.byte_len(),
                found: 4 * values.len() as u64,
            });
        }
        let p = blob_path(path, &info.name);
        let f = File::create(&p).map_err(|e| DatastoreError::io(&p, e))?;
        let mut w = BufWriter::new(f);
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(|e| DatastoreError::io(&p, e))?;
        }
        w.flush().map_err(|e| DatastoreError::io(&p, e))?;
    }
    let mp = path.join(MANIFEST_FILE);
    fs::write(&mp, c.manifest.to_text()).map_err(|e| DatastoreError::io(&mp, e))
}

/// Lazily reads arrays from a container directory and records every
/// leading-axis window it serves.
#[derive(Debug)]
pub struct ContainerReader {
    root: PathBuf,
    manifest: Manifest,
    log: Mutex<Vec<(String, Range<usize>)>>,
}

impl ContainerReader {
    pub fn open(path: &Path) -> Result<Self, DatastoreError> {
        let mp = path.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mp).map_err(|e| DatastoreError::io(&mp, e))?;
        let manifest = Manifest::from_text(&text)?;
        for a in &manifest.arrays {
            let p = blob_path(path, &a.name);
            let found = fs::metadata(&p).map_err(|e| DatastoreError::io(&p, e))?.len();
            if found != a.byte_len() {
                return Err(DatastoreError::ByteLength {
                    array: a.name.clone(),
                    expected: a.byte_len(),
                    found,
                });
            }
        }
        Ok(Self {
            root: path.to_path_buf(),
            manifest,
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn info(&self, name: &str) -> Result<&super::ArrayInfo, DatastoreError> {
        self.manifest
            .array(name)
            .ok_or_else(|| DatastoreError::Schema(format!("no array named {name}")))
    }

    pub fn read_array(&self, name: &str) -> Result<Vec<f32>, DatastoreError> {
        let lead = self.info(name)?.dims.first().copied().unwrap_or(1);
        self.read_window(name, 0..lead)
    }

    /// Reads indices `range` along the first axis.
    pub fn read_window(&self, name: &str, range: Range<usize>) -> Result<Vec<f32>, DatastoreError> {
        let info = self.info(name)?;
        let lead = info.dims.first().copied().unwrap_or(1);
        if range.start > range.end || range.end > lead {
            return Err(DatastoreError::Schema(format!(
                "window {range:?} outside array {name} with leading dimension {lead}"
            )));
        }
        let stride = info.len() / lead.max(1);
        let p = blob_path(&self.root, name);
        let mut f = File::open(&p).map_err(|e| DatastoreError::io(&p, e))?;
        f.seek(SeekFrom::Start(4 * (range.start * stride) as u64))
            .map_err(|e| DatastoreError::io(&p, e))?;
        let mut bytes = vec![0u8; 4 * range.len() * stride];
        f.read_exact(&mut bytes).map_err(|e| DatastoreError::io(&p, e))?;
        self.log.lock().unwrap().push((name.to_string(), range));
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    /// Every window served so far, in request order.
    pub fn access_log(&self) -> Vec<(String, Range<usize>)> {
        self.log.lock().unwrap().clone()
    }
}
