//! Corpus manifests.
//!
//! One TSV row per image: `path  image_id  group_id  owner_id  [query]`.
//! Lines starting with `#` and blank lines are ignored. Relative paths are
//! resolved against the manifest's directory. The optional fifth column
//! (`1` or `0`) marks query images; rows without it are queries.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::load_image;
use crate::error::{Error, Result};
use crate::eval::CorpusImage;
use crate::store::read_file;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: PathBuf,
    pub image_id: String,
    pub group_id: String,
    pub owner_id: String,
    pub query: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        let mut ids = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if !(4..=5).contains(&fields.len()) {
                return Err(Error::Manifest {
                    line: line_no,
                    message: format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
                });
            }
            if let Some(empty) = fields[..4].iter().position(|f| f.is_empty()) {
                return Err(Error::Manifest {
                    line: line_no,
                    message: format!("field {} is empty", empty + 1),
                });
            }
            let query = match fields.get(4) {
                None => true,
                Some(&"1") => true,
                Some(&"0") => false,
                Some(other) => {
                    return Err(Error::Manifest {
                        line: line_no,
                        message: format!("query flag must be 0 or 1, found `{other}`"),
                    })
                }
            };
            if !ids.insert(fields[1].to_string()) {
                return Err(Error::Manifest {
                    line: line_no,
                    message: format!("duplicate image id `{}`", fields[1]),
                });
            }
            let path = Path::new(fields[0]);
            rows.push(ManifestRow {
                path: if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    base_dir.join(path)
                },
                image_id: fields[1].to_string(),
                group_id: fields[2].to_string(),
                owner_id: fields[3].to_string(),
                query,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Manifest {
            line: 0,
            message: "manifest is not UTF-8".into(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Renders the manifest; paths are written relative to `base_dir` when
    /// they live under it.
    pub fn to_tsv(&self, base_dir: &Path) -> String {
        let mut out = String::from("# path\timage_id\tgroup_id\towner_id\tquery\n");
        for r in &self.rows {
            let path = r.path.strip_prefix(base_dir).unwrap_or(&r.path);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                path.display(),
                r.image_id,
                r.group_id,
                r.owner_id,
                u8::from(r.query)
            );
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Decodes every image, in manifest order.
    pub fn load_corpus(&self) -> Result<Vec<CorpusImage>> {
        self.rows
            .par_iter()
            .map(|r| {
                Ok(CorpusImage {
                    image_id: r.image_id.clone(),
                    group_id: r.group_id.clone(),
                    owner_id: r.owner_id.clone(),
                    is_query: r.query,
                    image: load_image(&r.path)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows_and_comments() {
        let text = "# header\n\na.png\timg0\tg0\talice\nsub/b.png\timg1\tg0\tbob\t0\n/abs/c.png\timg2\tg1\tbob\t1\n";
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.rows[0].path, PathBuf::from("/data/a.png"));
        assert!(m.rows[0].query);
        assert!(!m.rows[1].query);
        assert_eq!(m.rows[2].path, PathBuf::from("/abs/c.png"));
        assert_eq!(m.rows[1].owner_id, "bob");
    }

    #[test]
    fn rejects_duplicates_and_bad_rows() {
        let dup = "a.png\tx\tg\to\nb.png\tx\tg\to\n";
        assert!(matches!(Manifest::parse(dup, Path::new(".")), Err(Error::Manifest { line: 2, .. })));
        assert!(Manifest::parse("a.png\tx\tg\n", Path::new(".")).is_err());
        assert!(Manifest::parse("a.png\tx\t\to\n", Path::new(".")).is_err());
        assert!(Manifest::parse("a.png\tx\tg\to\tyes\n", Path::new(".")).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let text = "a.png\timg0\tg0\talice\t1\nb.png\timg1\tg0\tbob\t0\n";
        let m = Manifest::parse(text, Path::new("/d")).unwrap();
        let again = Manifest::parse(&m.to_tsv(Path::new("/d")), Path::new("/d")).unwrap();
        assert_eq!(m, again);
    }
}
