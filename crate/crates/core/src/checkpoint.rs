//! Plain-text parameter checkpoints.
//!
//! ```text
//! fockrbm-ckpt v1 <N> <N_β> <M> <K> <seed> <iteration>
//! <one real parameter per line, flat layout>
//! ```
//! Floats are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rbm::{RbmParams, RbmShape};

pub const MAGIC: &str = "fockrbm-ckpt";
pub const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: RbmParams,
    pub seed: u64,
    /// Completed training iterations.
    pub iteration: usize,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let s = self.params.shape();
        let mut out = format!(
            "{MAGIC} {VERSION} {} {} {} {} {} {}\n",
            s.n_spins, s.n_bits, s.n_hidden, s.n_mixing, self.seed, self.iteration
        );
        for v in self.params.to_real() {
            writeln!(out, "{v}").unwrap();
        }
        out
    }

    /// `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 8 || fields[0] != MAGIC {
            return Err(bad(format!("bad header {header:?}")));
        }
        if fields[1] != VERSION {
            return Err(bad(format!("unsupported version {}", fields[1])));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i].parse().map_err(|_| {
                bad(format!(
                    "header field {} is not an integer: {:?}",
                    i, fields[i]
                ))
            })
        };
        let shape = RbmShape::new(
            int(2)? as usize,
            int(3)? as usize,
            int(4)? as usize,
            int(5)? as usize,
        )
        .map_err(|e| bad(e.to_string()))?;
        let seed = int(6)?;
        let iteration = int(7)? as usize;
        let values = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("line {}: not a finite number: {l:?}", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let params = RbmParams::from_real(shape, &values).map_err(|e| bad(e.to_string()))?;
        Ok(Checkpoint {
            params,
            seed,
            iteration,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::init_params;

    fn sample() -> Checkpoint {
        let shape = RbmShape::new(1, 3, 4, 2).unwrap();
        let mut params = init_params(shape, 5);
        let bump: Vec<f64> = (0..shape.param_count())
            .map(|i| (i as f64).sin() / 3.0)
            .collect();
        params.add_scaled(&bump, 1.0).unwrap();
        Checkpoint {
            params,
            seed: 5,
            iteration: 120,
        }
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let c = sample();
        let text = c.to_text();
        assert!(text.starts_with("fockrbm-ckpt v1 1 3 4 2 5 120\n"));
        assert_eq!(text.lines().count(), 1 + c.params.shape().param_count());
        assert_eq!(Checkpoint::parse(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let c = sample();
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        assert!(matches!(
            Checkpoint::load(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let good = sample().to_text();
        let p = Path::new("c");
        let cases = [
            String::new(),
            good.replacen("fockrbm-ckpt", "other", 1),
            good.replacen("v1", "v2", 1),
            good.replacen(" 120", " x", 1),
            good.lines().take(5).collect::<Vec<_>>().join("\n"),
            format!("{good}0.5\n"),
            good.replacen('\n', "\nnan\n", 1)
                .lines()
                .take(good.lines().count())
                .collect::<Vec<_>>()
                .join("\n"),
        ];
        for text in &cases {
            assert!(
                matches!(Checkpoint::parse(text, p), Err(Error::Checkpoint { .. })),
                "{text:.60}"
            );
        }
    }
}
