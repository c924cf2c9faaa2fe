//! CSV and metadata emission with byte-stable number formatting.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`; exponent form for
/// very large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of negative zero
        return "0.0".to_string();
    }
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes a CSV with the given header and string rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn join(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn formatting_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x = f64::from_bits(rng.gen::<u64>());
            if !x.is_finite() {
                continue;
            }
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert!(back == x, "{x:?} -> {s}");
        }
    }

    #[test]
    fn formatting_examples() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(6.0), "6.0");
        assert_eq!(fmt_f64(-0.0), "0.0");
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_opt(None), "");
    }
}
