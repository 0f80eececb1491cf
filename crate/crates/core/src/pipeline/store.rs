use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use ndarray::{Array2, ArrayD};
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::tensor;
use super::wav;
use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Artifact access rooted at one output directory. Every read is logged,
/// and reads below a forbidden prefix fail, which keeps held-out trials out
/// of fold training.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    forbidden: Vec<PathBuf>,
    reads: Arc<Mutex<Vec<PathBuf>>>,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), forbidden: Vec::new(), reads: Arc::default() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    /// A view sharing the read log that refuses reads below any of `prefixes`
    /// (relative to the root).
    pub fn guarded<P: AsRef<Path>>(&self, prefixes: impl IntoIterator<Item = P>) -> Self {
        let mut forbidden = self.forbidden.clone();
        forbidden.extend(prefixes.into_iter().map(|p| self.root.join(p)));
        Self { root: self.root.clone(), forbidden, reads: Arc::clone(&self.reads) }
    }

    /// Paths read so far through this store or any view of it.
    pub fn reads(&self) -> Vec<PathBuf> {
        self.reads.lock().expect("read log poisoned").clone()
    }

    fn check_read(&self, rel: &Path) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if self.forbidden.iter().any(|f| path.starts_with(f)) {
            return Err(Error::HeldOutAccess(path));
        }
        self.reads.lock().expect("read log poisoned").push(path.clone());
        Ok(path)
    }

    fn prepare_write(&self, rel: &Path) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(path)
    }

    pub fn exists(&self, rel: impl AsRef<Path>) -> bool {
        self.root.join(rel).exists()
    }

    pub fn read_tensor(&self, rel: impl AsRef<Path>) -> Result<ArrayD<f64>> {
        tensor::read_tensor(&self.check_read(rel.as_ref())?)
    }

    pub fn read_matrix(&self, rel: impl AsRef<Path>) -> Result<Array2<f64>> {
        let path = self.check_read(rel.as_ref())?;
        tensor::matrix_from_tensor(tensor::read_tensor(&path)?, &path)
    }

    pub fn write_tensor(&self, rel: impl AsRef<Path>, t: &ArrayD<f64>) -> Result<()> {
        tensor::write_tensor(&self.prepare_write(rel.as_ref())?, t)
    }

    pub fn write_matrix(&self, rel: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
        self.write_tensor(rel, &m.clone().into_dyn())
    }

    pub fn read_wav(&self, rel: impl AsRef<Path>) -> Result<Waveform> {
        wav::read_wav(&self.check_read(rel.as_ref())?)
    }

    /// Returns the number of clipped samples.
    pub fn write_wav(&self, rel: impl AsRef<Path>, x: &Waveform) -> Result<usize> {
        wav::write_wav(&self.prepare_write(rel.as_ref())?, x)
    }

    pub fn read_text(&self, rel: impl AsRef<Path>) -> Result<String> {
        let path = self.check_read(rel.as_ref())?;
        std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    }

    pub fn write_text(&self, rel: impl AsRef<Path>, text: &str) -> Result<()> {
        let path = self.prepare_write(rel.as_ref())?;
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: impl AsRef<Path>) -> Result<T> {
        let rel = rel.as_ref();
        let text = self.read_text(rel)?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: self.root.join(rel), reason: e.to_string() })
    }

    pub fn write_json<T: Serialize>(&self, rel: impl AsRef<Path>, value: &T) -> Result<()> {
        let rel = rel.as_ref();
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Format { path: self.root.join(rel), reason: e.to_string() })?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    /// Writes `step,loss` rows.
    pub fn write_loss_csv(&self, rel: impl AsRef<Path>, curve: &[f64]) -> Result<()> {
        let rel = rel.as_ref();
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Error::Format { path: self.root.join(rel), reason: e.to_string() };
        w.write_record(["step", "loss"]).map_err(fail)?;
        for (i, v) in curve.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()]).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format { path: self.root.join(rel), reason: e.to_string() })?;
        self.write_text(rel, &String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
