//! Text snapshots of spectral states.
//!
//! ```text
//! # any number of comment lines
//! d = 1
//! modes = -2 -1 0 1 2
//! 0 -2 1.0000000000000000e0 0.0000000000000000e0
//! ...
//! ```
//!
//! Each data line is `component wavenumber re im` with 17 significant digits,
//! which makes the round trip bit-exact.

use std::fmt::Write;
use std::sync::Arc;

use num_complex::Complex64;

use super::{ModeGrid, SpectralState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub components: usize,
    pub modes: Vec<i64>,
    /// Component-major, in the order of `modes`.
    pub coeffs: Vec<Complex64>,
}

impl Snapshot {
    pub fn from_state(u: &SpectralState) -> Self {
        let g = u.grid();
        Self {
            components: g.components(),
            modes: (0..g.n_modes()).map(|i| g.wavenumber(i)).collect(),
            coeffs: u.coeffs().to_vec(),
        }
    }

    /// Attaches the coefficients to a grid with the same layout.
    pub fn into_state(self, grid: Arc<ModeGrid>) -> Result<SpectralState> {
        let expected: Vec<i64> = (0..grid.n_modes()).map(|i| grid.wavenumber(i)).collect();
        if self.components != grid.components() || self.modes != expected {
            return Err(Error::GridMismatch(format!(
                "snapshot has d = {} with {} modes, grid has d = {} with {} modes",
                self.components,
                self.modes.len(),
                grid.components(),
                grid.n_modes()
            )));
        }
        SpectralState::from_coeffs(grid, self.coeffs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "d = {}", self.components).unwrap();
        let modes: Vec<String> = self.modes.iter().map(|k| k.to_string()).collect();
        writeln!(out, "modes = {}", modes.join(" ")).unwrap();
        let n = self.modes.len();
        for c in 0..self.components {
            for (i, k) in self.modes.iter().enumerate() {
                let z = self.coeffs[c * n + i];
                writeln!(out, "{c} {k} {:.16e} {:.16e}", z.re, z.im).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut components = None;
        let mut modes: Option<Vec<i64>> = None;
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                match key.trim() {
                    "d" => {
                        components = Some(value.trim().parse::<usize>().map_err(|_| {
                            Error::parse(line_no, "`d` must be a positive integer")
                        })?)
                    }
                    "modes" => {
                        modes = Some(
                            value
                                .split_whitespace()
                                .map(|v| v.parse::<i64>())
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|_| Error::parse(line_no, "bad mode list"))?,
                        )
                    }
                    other => {
                        return Err(Error::parse(line_no, format!("unknown key `{other}`")))
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(line_no, "expected `component k re im`"));
            }
            let comp: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(line_no, "bad component index"))?;
            let k: i64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(line_no, "bad wavenumber"))?;
            let re: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(line_no, "bad real part"))?;
            let im: f64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(line_no, "bad imaginary part"))?;
            entries.push((line_no, comp, k, Complex64::new(re, im)));
        }
        let components = components.ok_or_else(|| Error::parse(0, "missing `d`"))?;
        let modes = modes.ok_or_else(|| Error::parse(0, "missing `modes`"))?;
        let n = modes.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); components * n];
        let mut seen = vec![false; components * n];
        for (line_no, comp, k, z) in entries {
            let i = modes
                .iter()
                .position(|&m| m == k)
                .ok_or_else(|| Error::parse(line_no, format!("wavenumber {k} not in mode list")))?;
            if comp >= components {
                return Err(Error::parse(line_no, "component index out of range"));
            }
            if std::mem::replace(&mut seen[comp * n + i], true) {
                return Err(Error::parse(line_no, "duplicate coefficient"));
            }
            coeffs[comp * n + i] = z;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::parse(0, "snapshot is missing coefficients"));
        }
        Ok(Self {
            components,
            modes,
            coeffs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(kmax: usize) -> Arc<ModeGrid> {
        Arc::new(
            ModeGrid::diagonal(kmax, |k| Complex64::new(0.0, -((k * k) as f64)), |k| {
                (1.0 + (k * k) as f64).sqrt()
            })
            .unwrap(),
        )
    }

    proptest! {
        #[test]
        fn text_round_trip_preserves_state(
            values in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 9)
        ) {
            let g = grid(4);
            let coeffs = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let u = SpectralState::from_coeffs(Arc::clone(&g), coeffs).unwrap();
            let text = Snapshot::from_state(&u).to_text();
            let back = Snapshot::parse(&text).unwrap().into_state(g).unwrap();
            prop_assert_eq!(&back, &u);
            prop_assert!((back.norm() - u.norm()).abs() <= 1e-15 * u.norm());
        }
    }

    #[test]
    fn rejects_mismatched_grid_and_garbage() {
        let u = SpectralState::zeros(grid(2));
        let text = Snapshot::from_state(&u).to_text();
        assert!(Snapshot::parse(&text).unwrap().into_state(grid(3)).is_err());
        assert!(Snapshot::parse("d = 1\nmodes = 0\n").is_err());
        assert!(Snapshot::parse("d = 1\nmodes = 0\n0 0 1 x\n").is_err());
        assert!(Snapshot::parse("d = 1\nmodes = 0\n0 0 1 0\n0 0 1 0\n").is_err());
        assert!(Snapshot::parse("# header\nd = 1\nmodes = 0\n0 0 1 0\n").is_ok());
    }
}
