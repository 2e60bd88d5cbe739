use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub speaker: String,
    pub speech: PathBuf,
    pub egg: Option<PathBuf>,
}

impl ManifestEntry {
    /// File stem of the speech path, used to name per-utterance outputs.
    pub fn stem(&self) -> String {
        self.speech
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// Tab-separated `speaker, speech path, optional EGG path` rows. Blank lines
/// and lines starting with `#` are skipped; relative paths are taken
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let err = |line: usize, detail: &str| Error::Parse {
            what: "manifest".into(),
            detail: format!("line {line}: {detail}"),
        };
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&cols.len()) {
                return Err(err(i + 1, "expected 2 or 3 tab-separated columns"));
            }
            let speaker = cols[0].trim();
            if speaker.is_empty() {
                return Err(err(i + 1, "empty speaker id"));
            }
            if cols[1].trim().is_empty() {
                return Err(err(i + 1, "empty speech path"));
            }
            let resolve = |p: &str| {
                let p = Path::new(p.trim());
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                }
            };
            entries.push(ManifestEntry {
                speaker: speaker.to_string(),
                speech: resolve(cols[1]),
                egg: cols
                    .get(2)
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| resolve(s)),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Serializes with paths relative to `base` where possible.
    pub fn to_tsv(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.speaker);
            out.push('\t');
            out.push_str(&rel(&e.speech));
            if let Some(egg) = &e.egg {
                out.push('\t');
                out.push_str(&rel(egg));
            }
            out.push('\n');
        }
        out
    }

    /// Fails on an empty manifest or a path that does not exist.
    pub fn check_files(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyManifest);
        }
        for e in &self.entries {
            for p in std::iter::once(&e.speech).chain(e.egg.as_ref()) {
                if !p.exists() {
                    return Err(Error::Unreadable {
                        path: p.clone(),
                        source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Speaker ids in order of first appearance.
    pub fn speakers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.speaker) {
                out.push(e.speaker.clone());
            }
        }
        out
    }

    /// Speech paths of entries without an EGG recording.
    pub fn missing_egg(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.egg.is_none())
            .map(|e| e.speech.display().to_string())
            .collect()
    }
}
