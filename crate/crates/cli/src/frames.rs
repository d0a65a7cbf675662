use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// One input file and the frame id derived from its name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFile {
    pub id: u32,
    pub path: PathBuf,
}

impl FrameFile {
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// First run of ASCII digits in the file stem, e.g. `frame_0042_mgd` -> 42.
pub fn frame_id_from_name(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    let start = stem.find(|c: char| c.is_ascii_digit())?;
    let digits: String = stem[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Files in `dir` with the given extension whose stem ends with `suffix`,
/// sorted by name.
pub fn list_dir(dir: &Path, extension: &str, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        let ext_ok = path.extension().is_some_and(|e| e.eq_ignore_ascii_case(extension));
        let stem_ok = path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.ends_with(suffix));
        if path.is_file() && ext_ok && stem_ok {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// A single PGM or every PGM in a directory. Ids come from the file names;
/// files without digits are numbered by position.
pub fn resolve_inputs(input: &Path) -> Result<Vec<FrameFile>> {
    let paths = if input.is_dir() {
        let p = list_dir(input, "pgm", "")?;
        if p.is_empty() {
            bail!("no .pgm files in {}", input.display());
        }
        p
    } else if input.is_file() {
        vec![input.to_path_buf()]
    } else {
        bail!("input {} does not exist", input.display());
    };
    let files: Vec<FrameFile> = paths
        .into_iter()
        .enumerate()
        .map(|(i, path)| FrameFile {
            id: frame_id_from_name(&path).unwrap_or(if input.is_dir() { i as u32 } else { 0 }),
            path,
        })
        .collect();
    check_unique(&files)?;
    Ok(files)
}

pub fn check_unique(files: &[FrameFile]) -> Result<()> {
    let mut ids: Vec<u32> = files.iter().map(|f| f.id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!("two inputs share frame id {}", w[0]);
    }
    Ok(())
}
