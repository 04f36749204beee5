//! Generator-to-RIS and RIS-to-user channels.
//!
//! The effective channel of user `k` is `[h_k]_n = conj([h_{u,k}]_n) [h_g]_n`
//! and the noiseless received sample is `sqrt(P) * h_k^H theta`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constellation::{PskConstellation, SymbolVector};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h_g: Vec<Complex64>,
    h_u: Vec<Vec<Complex64>>,
    h_eff: Vec<Vec<Complex64>>,
    noise_var: f64,
}

impl ChannelSet {
    pub fn new(h_g: Vec<Complex64>, h_u: Vec<Vec<Complex64>>, noise_var: f64) -> Result<Self> {
        let n = h_g.len();
        if n == 0 {
            return Err(invalid("channel needs at least one RIS element"));
        }
        if h_u.is_empty() {
            return Err(invalid("channel needs at least one user"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        for row in &h_u {
            if row.len() != n {
                return Err(Error::Dimension {
                    context: "user channel length",
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        let h_eff = h_u
            .iter()
            .map(|row| row.iter().zip(&h_g).map(|(u, g)| u.conj() * g).collect())
            .collect();
        Ok(Self {
            h_g,
            h_u,
            h_eff,
            noise_var,
        })
    }

    /// All-ones channels; every effective entry is 1.
    pub fn ones(n: usize, k: usize, noise_var: f64) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        Self::new(vec![one; n], vec![vec![one; n]; k], noise_var)
    }

    /// Builds a set whose effective rows equal `h_eff` by taking an all-ones
    /// generator hop.
    pub fn from_effective(h_eff: Vec<Vec<Complex64>>, noise_var: f64) -> Result<Self> {
        let n = h_eff.first().map_or(0, Vec::len);
        let h_u = h_eff
            .into_iter()
            .map(|row| row.into_iter().map(|h| h.conj()).collect())
            .collect();
        Self::new(vec![Complex64::new(1.0, 0.0); n], h_u, noise_var)
    }

    /// i.i.d. CN(0, 1) entries on both hops.
    pub fn generate_rayleigh<R: Rng + ?Sized>(n: usize, k: usize, noise_var: f64, rng: &mut R) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(invalid("Rayleigh channel needs N >= 1 and K >= 1"));
        }
        let h_g = (0..n).map(|_| complex_normal(rng)).collect();
        let h_u = (0..k).map(|_| (0..n).map(|_| complex_normal(rng)).collect()).collect();
        Self::new(h_g, h_u, noise_var)
    }

    /// Same geometry with the user hop scaled by `factor`, so every effective
    /// row is scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let h_u = self
            .h_u
            .iter()
            .map(|row| row.iter().map(|h| h * factor).collect())
            .collect();
        Self::new(self.h_g.clone(), h_u, self.noise_var)
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.h_g.clone(), self.h_u.clone(), noise_var)
    }

    pub fn n(&self) -> usize {
        self.h_g.len()
    }

    pub fn k(&self) -> usize {
        self.h_u.len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn sigma_w(&self) -> f64 {
        self.noise_var.sqrt()
    }

    pub fn generator(&self) -> &[Complex64] {
        &self.h_g
    }

    pub fn user(&self, k: usize) -> &[Complex64] {
        &self.h_u[k]
    }

    pub fn effective(&self, k: usize) -> &[Complex64] {
        &self.h_eff[k]
    }

    /// `h_k^H theta`.
    pub fn received(&self, k: usize, theta: &[Complex64]) -> Complex64 {
        self.h_eff[k].iter().zip(theta).map(|(h, t)| h.conj() * t).sum()
    }

    /// Rotates every user's effective channel by its own symbol:
    /// `a_k = conj(s_k) * conj(h_k)`.
    pub fn rotate(&self, symbols: &SymbolVector, constellation: &PskConstellation) -> Result<RotatedChannels> {
        if symbols.len() != self.k() {
            return Err(Error::Dimension {
                context: "symbol vector length",
                expected: self.k(),
                actual: symbols.len(),
            });
        }
        let rows = symbols
            .points(constellation)
            .iter()
            .zip(&self.h_eff)
            .map(|(s, h)| h.iter().map(|hn| s.conj() * hn.conj()).collect())
            .collect();
        Ok(RotatedChannels { rows })
    }

    /// Serializes as a `(K + 1) x N` complex matrix: the generator hop on the
    /// first row, then one row per user hop.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<&[Complex64]> = vec![&self.h_g];
        rows.extend(self.h_u.iter().map(Vec::as_slice));
        write_complex_matrix(&rows)
    }

    /// Inverse of [`ChannelSet::to_text`].
    pub fn from_text(text: &str, noise_var: f64) -> Result<Self> {
        let mut rows = read_complex_matrix(text)?;
        if rows.len() < 2 {
            return Err(Error::Parse {
                line: rows.len(),
                message: "channel file needs a generator row and at least one user row".into(),
            });
        }
        let h_g = rows.remove(0);
        Self::new(h_g, rows, noise_var)
    }
}

/// Symbol-rotated effective channels `a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedChannels {
    rows: Vec<Vec<Complex64>>,
}

impl RotatedChannels {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(invalid("rotated channels need K >= 1 and N >= 1"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                context: "rotated channel row",
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self { rows })
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    /// `omega_k = a_k^T theta`.
    pub fn omega(&self, k: usize, theta: &[Complex64]) -> Complex64 {
        self.rows[k].iter().zip(theta).map(|(a, t)| a * t).sum()
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Writes rows of complex numbers as whitespace-separated `re,im` tokens,
/// one matrix row per line. Values use the shortest round-trip decimal form.
pub fn write_complex_matrix<R: AsRef<[Complex64]>>(rows: &[R]) -> String {
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for z in row.as_ref() {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{},{}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

/// Parses the format produced by [`write_complex_matrix`]. Blank lines and
/// lines starting with `#` are ignored. All rows must have equal length.
pub fn read_complex_matrix(text: &str) -> Result<Vec<Vec<Complex64>>> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                parse_complex(tok).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("bad complex token {tok:?}, expected re,im"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_complex(tok: &str) -> Option<Complex64> {
    let (re, im) = tok.split_once(',')?;
    let re: f64 = re.parse().ok()?;
    let im: f64 = im.parse().ok()?;
    (re.is_finite() && im.is_finite()).then(|| Complex64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rayleigh_is_reproducible() {
        let a = ChannelSet::generate_rayleigh(8, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = ChannelSet::generate_rayleigh(8, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rayleigh_component_variance_is_half() {
        // Var of the sample variance for N(0, 1/2) with n = 1e4 is
        // 2 * 0.25 / 1e4, std ~ 0.007; 0.02 is ~3 sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cs = ChannelSet::generate_rayleigh(10_000, 1, 1.0, &mut rng).unwrap();
        let re: Vec<f64> = cs.generator().iter().map(|z| z.re).collect();
        let mean = re.iter().sum::<f64>() / re.len() as f64;
        let var = re.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (re.len() - 1) as f64;
        assert!((var - 0.5).abs() < 0.02, "{var}");
    }

    #[test]
    fn all_ones_gives_unit_effective_channel() {
        let cs = ChannelSet::ones(4, 2, 1.0).unwrap();
        for k in 0..2 {
            assert!(cs.effective(k).iter().all(|&h| h == c(1.0, 0.0)));
        }
    }

    #[test]
    fn effective_channel_matches_definition() {
        let cs = ChannelSet::generate_rayleigh(6, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for k in 0..3 {
            for n in 0..6 {
                let want = cs.user(k)[n].conj() * cs.generator()[n];
                let got = cs.effective(k)[n];
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn from_effective_round_trips() {
        let rows = vec![vec![c(1.0, 2.0), c(-0.5, 0.25)], vec![c(0.0, 1.0), c(3.0, 0.0)]];
        let cs = ChannelSet::from_effective(rows.clone(), 1.0).unwrap();
        assert_eq!(cs.effective(0), rows[0].as_slice());
        assert_eq!(cs.effective(1), rows[1].as_slice());
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let err = ChannelSet::new(vec![c(1.0, 0.0); 3], vec![vec![c(1.0, 0.0); 2]], 1.0);
        assert!(matches!(err, Err(Error::Dimension { .. })));
        assert!(ChannelSet::new(vec![c(1.0, 0.0)], vec![vec![c(1.0, 0.0)]], 0.0).is_err());
    }

    #[test]
    fn rotate_by_identity_symbol_conjugates() {
        let psk = PskConstellation::with_offset(4, 0.0).unwrap();
        let cs = ChannelSet::from_effective(vec![vec![c(1.0, 2.0), c(0.3, -0.7)]], 1.0).unwrap();
        let s = SymbolVector::new(vec![0], &psk).unwrap();
        let a = cs.rotate(&s, &psk).unwrap();
        assert_eq!(a.row(0), &[c(1.0, -2.0), c(0.3, 0.7)]);
    }

    #[test]
    fn rotate_by_j() {
        let psk = PskConstellation::with_offset(4, 0.0).unwrap();
        let cs = ChannelSet::from_effective(vec![vec![c(1.0, 0.0)]], 1.0).unwrap();
        // index 1 is e^{j pi/2} = j
        let s = SymbolVector::new(vec![1], &psk).unwrap();
        let a = cs.rotate(&s, &psk).unwrap();
        assert!((a.row(0)[0] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_preserves_magnitudes_and_received_phase() {
        let psk = PskConstellation::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = ChannelSet::generate_rayleigh(12, 4, 1.0, &mut rng).unwrap();
        let s = psk.random_symbols(4, &mut rng).unwrap();
        let a = cs.rotate(&s, &psk).unwrap();
        let theta: Vec<Complex64> = (0..12)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let points = s.points(&psk);
        for (k, point) in points.iter().enumerate() {
            for (x, h) in a.row(k).iter().zip(cs.effective(k)) {
                assert!((x.norm() - h.norm()).abs() < 1e-12);
            }
            let lhs = a.omega(k, &theta);
            let rhs = point.conj() * cs.received(k, &theta);
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn text_format_round_trips_exactly() {
        let cs = ChannelSet::generate_rayleigh(5, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let text = cs.to_text();
        assert_eq!(text.lines().count(), 4);
        let back = ChannelSet::from_text(&text, 1.0).unwrap();
        assert_eq!(back, cs);
    }

    #[test]
    fn text_parser_reports_bad_tokens() {
        let err = read_complex_matrix("1,0 2,0\n# comment\n3;0 4,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_complex_matrix("1,0 2,0\n3,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(ChannelSet::from_text("1,0\n", 1.0).is_err());
    }
}
