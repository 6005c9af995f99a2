//! All-or-nothing output: artifacts are staged as hidden temp files next to
//! their destinations and only renamed into place once every one of them
//! has been written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json(&mut self, name: &str, text: String) {
        let mut bytes = text.into_bytes();
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn commit(self, dir: &Path) -> Result<(), String> {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
            let written = fs::File::create(&tmp).and_then(|mut f| {
                f.write_all(bytes)?;
                f.sync_all()
            });
            staged.push((tmp, target));
            if let Err(e) = written {
                cleanup(&staged);
                return Err(format!("cannot write {name}: {e}"));
            }
        }
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                cleanup(&staged[i..]);
                return Err(format!("cannot move {} into place: {e}", target.display()));
            }
        }
        Ok(())
    }
}
