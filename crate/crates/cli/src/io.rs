use std::io::Write;
use std::path::Path;

use depkit_core::report::{hash_file, InputFile};
use depkit_core::{Error, Result, FORMAT_TAG};
use serde::Deserialize;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn input(role: &str, path: &Path) -> Result<InputFile> {
    Ok(InputFile {
        role: role.into(),
        path: path.display().to_string(),
        sha256: hash_file(path)?,
    })
}

/// A single input vector: a bare JSON array, or an object with `x` and
/// optionally `label` and `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub x: Vec<f64>,
    pub label: Option<usize>,
    pub shape: Option<(usize, usize, usize)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawVector {
    Bare(Vec<f64>),
    Object(VectorObject),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorObject {
    #[serde(default)]
    format: Option<String>,
    x: Vec<f64>,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    shape: Option<(usize, usize, usize)>,
}

pub fn read_vector(path: &Path) -> Result<VectorFile> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawVector =
        serde_json::from_str(&text).map_err(|e| Error::MalformedInput(format!("{}: {e}", path.display())))?;
    Ok(match raw {
        RawVector::Bare(x) => VectorFile {
            x,
            label: None,
            shape: None,
        },
        RawVector::Object(o) => {
            if let Some(f) = o.format.filter(|f| f != FORMAT_TAG) {
                return Err(Error::MalformedInput(format!(
                    "{}: unsupported format {f:?}",
                    path.display()
                )));
            }
            VectorFile {
                x: o.x,
                label: o.label,
                shape: o.shape,
            }
        }
    })
}

/// Parses `HxWxC` (or `HxW`, one channel).
pub fn parse_shape(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::BadParameters(format!("bad shape {s:?}, expected HxWxC")))?;
    match parts[..] {
        [h, w] => Ok((h, w, 1)),
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::BadParameters(format!("bad shape {s:?}, expected HxWxC"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(parse_shape("8x8x3").unwrap(), (8, 8, 3));
        assert_eq!(parse_shape("4X5").unwrap(), (4, 5, 1));
        assert!(parse_shape("4x").is_err());
        assert!(parse_shape("1x2x3x4").is_err());
    }

    #[test]
    fn vector_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        std::fs::write(&p, "[0.5, 1]").unwrap();
        assert_eq!(read_vector(&p).unwrap().x, vec![0.5, 1.0]);
        std::fs::write(&p, r#"{"format":"depkit/1","x":[1],"label":2,"shape":[1,1,1]}"#).unwrap();
        let v = read_vector(&p).unwrap();
        assert_eq!((v.label, v.shape), (Some(2), Some((1, 1, 1))));
        std::fs::write(&p, r#"{"x":[1],"colour":2}"#).unwrap();
        assert!(read_vector(&p).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
