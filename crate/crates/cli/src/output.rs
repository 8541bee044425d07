use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Input(format!("cannot write {}: {e}", target.display()))
    })?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Decibel value for JSON: a number when finite, otherwise `"inf"` / `"-inf"`.
pub fn db_value(db: f64) -> Value {
    if db.is_finite() {
        Value::from(db)
    } else if db > 0.0 {
        Value::from("inf")
    } else if db < 0.0 {
        Value::from("-inf")
    } else {
        Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_sentinels() {
        assert_eq!(db_value(3.5), Value::from(3.5));
        assert_eq!(db_value(f64::INFINITY), Value::from("inf"));
        assert_eq!(db_value(f64::NEG_INFINITY), Value::from("-inf"));
        assert_eq!(db_value(f64::NAN), Value::Null);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_atomic(dir.path(), "a.txt", b"hello").unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), "hello");
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
