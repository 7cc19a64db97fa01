use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use walkdir::WalkDir;

/// Directories never copied into a working copy.
const SKIPPED_DIRS: [&str; 4] = [".git", "target", ".nondex", ".flakemend"];

/// Scratch copy of a project where patches are trialed. The user's checkout
/// is only ever read.
#[derive(Debug)]
pub struct WorkingCopy {
    root: PathBuf,
    module_path: String,
    dirty: bool,
    temp: Option<TempDir>,
}

impl WorkingCopy {
    /// Copies `project` into a fresh temporary directory.
    pub fn create(project: &Path, module_path: &str) -> io::Result<Self> {
        let temp = tempfile::Builder::new().prefix("flakemend-wc-").tempdir()?;
        let root = temp.path().join("project");
        copy_tree(project, &root)?;
        Ok(WorkingCopy {
            root,
            module_path: module_path.to_string(),
            dirty: false,
            temp: Some(temp),
        })
    }

    /// Copies `project` into `parent/<name>`; the copy is kept on drop.
    pub fn create_in(project: &Path, module_path: &str, parent: &Path, name: &str) -> io::Result<Self> {
        let root = parent.join(name);
        if root.exists() {
            fs::remove_dir_all(&root)?;
        }
        copy_tree(project, &root)?;
        Ok(WorkingCopy {
            root,
            module_path: module_path.to_string(),
            dirty: false,
            temp: None,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn module_path(&self) -> &str {
        &self.module_path
    }

    pub fn module_dir(&self) -> PathBuf {
        self.root.join(&self.module_path)
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn path_of(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn read(&self, rel: &Path) -> io::Result<String> {
        fs::read_to_string(self.root.join(rel))
    }

    pub fn write(&mut self, rel: &Path, text: &str) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
        self.dirty = true;
        Ok(())
    }

    /// Relative path of the module manifest.
    pub fn manifest_path(&self) -> PathBuf {
        Path::new(&self.module_path).join("pom.xml")
    }

    /// Keeps the directory on disk after drop and returns its path.
    pub fn keep(mut self) -> PathBuf {
        if let Some(temp) = self.temp.take() {
            let _ = temp.keep();
        }
        self.root.clone()
    }
}

fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    if !from.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("project directory {} does not exist", from.display()),
        ));
    }
    let walker = WalkDir::new(from).into_iter().filter_entry(|e| {
        e.depth() == 0
            || !(e.file_type().is_dir() && SKIPPED_DIRS.iter().any(|s| e.file_name() == *s))
    });
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(from).expect("walk stays under root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}
