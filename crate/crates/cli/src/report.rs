//! Output files and their provenance.
//!
//! Every table starts with a comment line naming the config hash and seed
//! that produced it. `bundle.toml` lists every file written into an output
//! directory with its SHA-256 digest, so files that cannot carry a comment
//! (line-delimited JSON) are still tied to the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const BUNDLE_FILE: &str = "bundle.toml";

/// What produced a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub backend: Option<String>,
    pub template_hash: Option<String>,
}

impl Provenance {
    pub fn header(&self) -> String {
        let mut s = format!(
            "# config_hash={} seed={} command={}",
            self.config_hash, self.seed, self.command
        );
        if let Some(b) = &self.backend {
            let _ = write!(s, " backend={}", b.replace(' ', "_"));
        }
        if let Some(t) = &self.template_hash {
            let _ = write!(s, " template={t}");
        }
        s
    }
}

/// `(config_hash, seed)` from a provenance comment, which may be wrapped in an
/// XML comment.
pub fn parse_header(line: &str) -> Option<(String, u64)> {
    let body = line
        .trim()
        .trim_start_matches("<!--")
        .trim_end_matches("-->")
        .trim();
    let body = body.strip_prefix('#')?;
    let mut hash = None;
    let mut seed = None;
    for token in body.split_whitespace() {
        if let Some(v) = token.strip_prefix("config_hash=") {
            hash = Some(v.to_owned());
        } else if let Some(v) = token.strip_prefix("seed=") {
            seed = v.parse().ok();
        }
    }
    Some((hash?, seed?))
}

/// A delimiter-separated table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)
            .map_err(|e| CliError::Output(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r)
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Formats a float for output. Identical values always print identically.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub command: String,
    pub sha256: String,
    pub embeds_header: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct BundleManifest {
    config_hash: String,
    seed: u64,
    #[serde(default, rename = "file")]
    files: Vec<FileEntry>,
}

/// The files written into one output directory by runs of a single
/// configuration.
#[derive(Debug)]
pub struct ReportBundle {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    files: BTreeMap<String, FileEntry>,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ReportBundle {
    /// Opens `dir`, creating it if needed. A directory already holding the
    /// outputs of a different configuration or seed is rejected.
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut files = BTreeMap::new();
        let manifest_path = dir.join(BUNDLE_FILE);
        if manifest_path.exists() {
            let existing = read_manifest(&manifest_path)?;
            if existing.config_hash != config_hash || existing.seed != seed {
                return Err(CliError::Output(format!(
                    "{} holds outputs of config {} seed {}; use another output directory",
                    dir.display(),
                    existing.config_hash,
                    existing.seed
                )));
            }
            files = existing
                .files
                .into_iter()
                .map(|f| (f.name.clone(), f))
                .collect();
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_owned(),
            seed,
            files,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn check(&self, p: &Provenance) -> Result<(), CliError> {
        if p.config_hash != self.config_hash || p.seed != self.seed {
            return Err(CliError::Output(
                "provenance does not match the bundle".into(),
            ));
        }
        Ok(())
    }

    fn put(
        &mut self,
        name: &str,
        command: &str,
        contents: &str,
        embeds_header: bool,
    ) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.files.insert(
            name.to_owned(),
            FileEntry {
                name: name.to_owned(),
                command: command.to_owned(),
                sha256: digest(contents.as_bytes()),
                embeds_header,
            },
        );
        Ok(path)
    }

    pub fn write_table(
        &mut self,
        name: &str,
        table: &Table,
        p: &Provenance,
    ) -> Result<PathBuf, CliError> {
        self.check(p)?;
        let body = format!("{}\n{}", p.header(), table.to_csv()?);
        self.put(name, &p.command, &body, true)
    }

    /// Text in a format where `#` starts a comment line.
    pub fn write_text(
        &mut self,
        name: &str,
        contents: &str,
        p: &Provenance,
    ) -> Result<PathBuf, CliError> {
        self.check(p)?;
        let body = format!("{}\n{}", p.header(), contents);
        self.put(name, &p.command, &body, true)
    }

    pub fn write_svg(
        &mut self,
        name: &str,
        svg: &str,
        p: &Provenance,
    ) -> Result<PathBuf, CliError> {
        self.check(p)?;
        let body = format!("<!-- {} -->\n{}", p.header(), svg);
        self.put(name, &p.command, &body, true)
    }

    /// A file that cannot carry a comment; only its digest ties it to the run.
    pub fn write_raw(
        &mut self,
        name: &str,
        contents: &str,
        p: &Provenance,
    ) -> Result<PathBuf, CliError> {
        self.check(p)?;
        self.put(name, &p.command, contents, false)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let manifest = BundleManifest {
            config_hash: self.config_hash,
            seed: self.seed,
            files: self.files.into_values().collect(),
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        std::fs::write(self.dir.join(BUNDLE_FILE), text)?;
        Ok(())
    }

    /// Checks every listed file against its digest and provenance comment,
    /// and rejects unlisted files carrying another run's provenance.
    pub fn verify(dir: &Path) -> Result<(), CliError> {
        let manifest = read_manifest(&dir.join(BUNDLE_FILE))?;
        for f in &manifest.files {
            let bytes = std::fs::read(dir.join(&f.name))?;
            if digest(&bytes) != f.sha256 {
                return Err(CliError::Output(format!(
                    "{} does not match its recorded digest",
                    f.name
                )));
            }
            if f.embeds_header {
                let text = String::from_utf8_lossy(&bytes);
                let first = text.lines().next().unwrap_or("");
                match parse_header(first) {
                    Some((h, s)) if h == manifest.config_hash && s == manifest.seed => {}
                    _ => {
                        return Err(CliError::Output(format!(
                            "{} carries a different config hash or seed",
                            f.name
                        )))
                    }
                }
            }
        }
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == BUNDLE_FILE
                || manifest.files.iter().any(|f| f.name == name)
                || !entry.path().is_file()
            {
                continue;
            }
            let text = std::fs::read_to_string(entry.path()).unwrap_or_default();
            if let Some((h, _)) = text.lines().next().and_then(parse_header) {
                if h != manifest.config_hash {
                    return Err(CliError::Output(format!("{name} comes from config {h}")));
                }
            }
        }
        Ok(())
    }
}

fn read_manifest(path: &Path) -> Result<BundleManifest, CliError> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}
