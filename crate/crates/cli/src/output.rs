//! In-memory artifact set, flushed to disk once at the end of a run.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    file: &'a str,
    bytes: usize,
    sha256: String,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).expect("rows serialize");
        }
        self.add(name, w.into_inner().expect("in-memory writer"));
    }

    /// CSV with a header decided at run time.
    pub fn csv_records(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("header writes");
        for row in rows {
            w.write_record(row).expect("row writes");
        }
        self.add(name, w.into_inner().expect("in-memory writer"));
    }

    /// Binary P5 graymap, one byte per cell, rows in the given order.
    pub fn pgm(&mut self, name: &str, width: usize, height: usize, pixels: &[u8]) {
        assert_eq!(pixels.len(), width * height);
        let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
        bytes.extend_from_slice(pixels);
        self.add(name, bytes);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn write_all(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = Vec::new();
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
            manifest.push(ManifestEntry {
                file: name,
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            });
        }
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        text.push(b'\n');
        fs::write(dir.join(MANIFEST), text)
    }
}

/// Scale `values` linearly onto 0..=255 with `max` mapped to 255.
pub fn scale_to_bytes(values: &[f64], max: f64) -> Vec<u8> {
    values
        .iter()
        .map(|&v| {
            if max > 0.0 {
                (255.0 * (v / max).clamp(0.0, 1.0)).round() as u8
            } else {
                0
            }
        })
        .collect()
}
