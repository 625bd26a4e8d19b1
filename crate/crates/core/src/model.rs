//! The one-atom laser: a single incoherently pumped two-level emitter coupled
//! to one lossy bosonic mode.
//!
//! Dynamics are written in the frame rotating at the cavity frequency, so the
//! Hamiltonian is `Δ σ⁺σ⁻ + g₀ (σ⁺c + σ⁻c†)` with `Δ = ω₀ − ω_c`. All rates
//! are in ps⁻¹.
//!
//! Density-matrix elements are indexed by a [`ConfigPair`] `(x | y)`, i.e.
//! `ρ(x, y) = ⟨x|ρ|y⟩`. A [`LiouvillianRow`] for `(x | y)` lists the elements
//! `ρ_m` that feed `ρ̇(x, y) = Σ_m L(n, m) ρ_m`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::{max_occupation, Spin, SpinBosonConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Emitter-mode coupling g₀.
    pub g0: f64,
    /// Incoherent pump rate Γ.
    pub gamma: f64,
    /// Bosonic decay rate κ.
    pub kappa: f64,
    /// ω₀ − ω_c.
    #[serde(default)]
    pub detuning: f64,
}

impl ModelParams {
    pub fn new(g0: f64, gamma: f64, kappa: f64, detuning: f64) -> Result<Self> {
        let p = ModelParams {
            g0,
            gamma,
            kappa,
            detuning,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g0", self.g0),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }
}

/// Bra (`left`, σ-side) and ket (`right`, η-side) configuration of one
/// density-matrix element.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigPair {
    pub left: SpinBosonConfig,
    pub right: SpinBosonConfig,
}

impl ConfigPair {
    pub fn new(left: SpinBosonConfig, right: SpinBosonConfig) -> Self {
        debug_assert_eq!(left.n_spins(), right.n_spins());
        debug_assert_eq!(left.n_bits(), right.n_bits());
        ConfigPair { left, right }
    }

    pub fn diagonal(side: SpinBosonConfig) -> Self {
        ConfigPair {
            left: side.clone(),
            right: side,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.left == self.right
    }

    /// The element with bra and ket exchanged.
    pub fn swapped(&self) -> Self {
        ConfigPair {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

impl std::fmt::Debug for ConfigPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:?}|{:?})", self.left, self.right)
    }
}

#[derive(Clone, Debug)]
pub struct LiouvillianRow {
    pub source: ConfigPair,
    /// `(m, L(source, m))`, nonzero amplitudes only.
    pub entries: Vec<(ConfigPair, Complex64)>,
    /// Set when a contribution referenced an occupation above `2^N_β − 1`
    /// and was dropped.
    pub truncated: bool,
}

/// Spin-up count plus bosonic occupation.
pub fn excitation(side: &SpinBosonConfig) -> u64 {
    side.spin_up_count() + side.occupation()
}

/// Whether the element lies in the excitation-conserving sector that holds
/// the steady state.
pub fn in_steady_support(cp: &ConfigPair) -> bool {
    excitation(&cp.left) == excitation(&cp.right)
}

/// Row of the Liouvillian for the element `src`, restricted to occupations
/// representable in `src`'s bit width.
///
/// # Panics
///
/// If `src` does not have exactly one spin per side.
pub fn liouvillian_row(p: &ModelParams, src: &ConfigPair) -> LiouvillianRow {
    let n_bits = src.left.n_bits();
    liouvillian_row_with_cutoff(p, src, max_occupation(n_bits))
}

/// As [`liouvillian_row`] but drops every target with occupation above
/// `n_cap` (which must not exceed the bit capacity).
pub(crate) fn liouvillian_row_with_cutoff(
    p: &ModelParams,
    src: &ConfigPair,
    n_cap: u64,
) -> LiouvillianRow {
    assert!(
        src.left.n_spins() == 1 && src.right.n_spins() == 1,
        "the one-atom laser model has exactly one spin"
    );
    let (s, n) = (src.left.spins()[0], src.left.occupation());
    let (t, m) = (src.right.spins()[0], src.right.occupation());
    let up = |x: Spin| if x == Spin::Up { 1.0 } else { 0.0 };
    let down = |x: Spin| 1.0 - up(x);
    let (nf, mf) = (n as f64, m as f64);

    let mut row = LiouvillianRow {
        source: src.clone(),
        entries: Vec::with_capacity(5),
        truncated: false,
    };
    let i = Complex64::i();

    let diag = -i * p.detuning * (up(s) - up(t))
        - 0.5 * p.kappa * (nf + mf)
        - 0.5 * p.gamma * (down(s) + down(t));
    row.push(src.clone(), diag);

    let target =
        |row: &mut LiouvillianRow, left: (Spin, u64), right: (Spin, u64), amp: Complex64| {
            if amp == Complex64::new(0.0, 0.0) {
                return;
            }
            if left.1 > n_cap || right.1 > n_cap {
                row.truncated = true;
                return;
            }
            let cp = ConfigPair::new(side(&src.left, left), side(&src.right, right));
            row.push(cp, amp);
        };

    // −i⟨x|Hρ|y⟩: ⟨↑,n|H = g√(n+1)⟨↓,n+1|, ⟨↓,n|H = g√n⟨↑,n−1|.
    match s {
        Spin::Up => target(
            &mut row,
            (Spin::Down, n + 1),
            (t, m),
            -i * p.g0 * (nf + 1.0).sqrt(),
        ),
        Spin::Down if n > 0 => target(&mut row, (Spin::Up, n - 1), (t, m), -i * p.g0 * nf.sqrt()),
        Spin::Down => {}
    }
    // +i⟨x|ρH|y⟩
    match t {
        Spin::Up => target(
            &mut row,
            (s, n),
            (Spin::Down, m + 1),
            i * p.g0 * (mf + 1.0).sqrt(),
        ),
        Spin::Down if m > 0 => target(&mut row, (s, n), (Spin::Up, m - 1), i * p.g0 * mf.sqrt()),
        Spin::Down => {}
    }
    // κ⟨x|cρc†|y⟩
    target(
        &mut row,
        (s, n + 1),
        (t, m + 1),
        Complex64::from(p.kappa * ((nf + 1.0) * (mf + 1.0)).sqrt()),
    );
    // Γ⟨x|σ⁺ρσ⁻|y⟩
    if s == Spin::Up && t == Spin::Up {
        target(
            &mut row,
            (Spin::Down, n),
            (Spin::Down, m),
            Complex64::from(p.gamma),
        );
    }
    row
}

impl LiouvillianRow {
    fn push(&mut self, cp: ConfigPair, amp: Complex64) {
        if amp != Complex64::new(0.0, 0.0) {
            self.entries.push((cp, amp));
        }
    }

    /// `Σ_m L(n, m)`.
    pub fn amplitude_sum(&self) -> Complex64 {
        self.entries.iter().map(|(_, a)| a).sum()
    }
}

fn side(template: &SpinBosonConfig, (spin, n): (Spin, u64)) -> SpinBosonConfig {
    SpinBosonConfig::with_occupation(vec![spin], n, template.n_bits())
        .expect("caller checked the occupation range")
}

/// Every in-support element for `n_spins` spins and `n_bits` bits, ordered
/// by left spins, right spins, then left occupation.
pub fn support_pairs(n_spins: usize, n_bits: usize) -> Vec<ConfigPair> {
    let n_max = max_occupation(n_bits);
    let spin_sets = all_spin_configs(n_spins);
    let mut out = Vec::new();
    for ls in &spin_sets {
        for rs in &spin_sets {
            let (lo, hi) = occupation_range(ls, rs, n_max);
            for nl in lo..=hi {
                let nr = (nl as i64 + excitation_offset(ls, rs)) as u64;
                let left = SpinBosonConfig::with_occupation(ls.clone(), nl, n_bits).unwrap();
                let right = SpinBosonConfig::with_occupation(rs.clone(), nr, n_bits).unwrap();
                out.push(ConfigPair::new(left, right));
            }
        }
    }
    out
}

/// Every diagonal element `(x | x)`.
pub fn diagonal_pairs(n_spins: usize, n_bits: usize) -> Vec<ConfigPair> {
    let mut out = Vec::new();
    for spins in all_spin_configs(n_spins) {
        for n in 0..=max_occupation(n_bits) {
            let side = SpinBosonConfig::with_occupation(spins.clone(), n, n_bits).unwrap();
            out.push(ConfigPair::diagonal(side));
        }
    }
    out
}

pub(crate) fn all_spin_configs(n_spins: usize) -> Vec<Vec<Spin>> {
    (0..1u64 << n_spins)
        .map(|mask| {
            (0..n_spins)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Spin::Up
                    } else {
                        Spin::Down
                    }
                })
                .collect()
        })
        .collect()
}

/// `n_right − n_left` forced by the support condition for the given spins.
pub(crate) fn excitation_offset(left: &[Spin], right: &[Spin]) -> i64 {
    let ups = |s: &[Spin]| s.iter().filter(|&&x| x == Spin::Up).count() as i64;
    ups(left) - ups(right)
}

/// Admissible left occupations `lo..=hi` so that both sides stay within
/// `0..=n_max` under the support condition. Empty when `lo > hi`.
pub(crate) fn occupation_range(left: &[Spin], right: &[Spin], n_max: u64) -> (u64, u64) {
    let d = excitation_offset(left, right);
    let lo = (-d).max(0) as u64;
    let hi = (n_max as i64).min(n_max as i64 - d);
    if hi < lo as i64 {
        (1, 0)
    } else {
        (lo, hi as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn cfg(spin: Spin, n: u64, n_bits: usize) -> SpinBosonConfig {
        SpinBosonConfig::with_occupation(vec![spin], n, n_bits).unwrap()
    }

    fn pair(s: Spin, n: u64, t: Spin, m: u64, n_bits: usize) -> ConfigPair {
        ConfigPair::new(cfg(s, n, n_bits), cfg(t, m, n_bits))
    }

    fn all_pairs(n_bits: usize) -> Vec<ConfigPair> {
        let mut out = Vec::new();
        for s in [Spin::Down, Spin::Up] {
            for t in [Spin::Down, Spin::Up] {
                for n in 0..=max_occupation(n_bits) {
                    for m in 0..=max_occupation(n_bits) {
                        out.push(pair(s, n, t, m, n_bits));
                    }
                }
            }
        }
        out
    }

    /// Dense reference: ρ̇ built from explicit operator matrices on a three
    /// level Fock space (0, 1, 2), in the basis index `spin * 3 + n`.
    fn dense_cavity_decay_rhs(kappa: f64, rho: &[[f64; 6]; 6]) -> [[f64; 6]; 6] {
        let mut c = [[0.0; 6]; 6];
        for s in 0..2 {
            for n in 1..3 {
                c[s * 3 + n - 1][s * 3 + n] = (n as f64).sqrt();
            }
        }
        let mul = |a: &[[f64; 6]; 6], b: &[[f64; 6]; 6]| {
            let mut r = [[0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        r[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            r
        };
        let tr = |a: &[[f64; 6]; 6]| {
            let mut r = [[0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    r[i][j] = a[j][i];
                }
            }
            r
        };
        let cd = tr(&c);
        let num = mul(&cd, &c);
        let jump = mul(&mul(&c, rho), &cd);
        let (a, b) = (mul(&num, rho), mul(rho, &num));
        let mut out = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                out[i][j] = kappa * jump[i][j] - 0.5 * kappa * (a[i][j] + b[i][j]);
            }
        }
        out
    }

    #[test]
    fn cavity_decay_row_matches_dense_reference() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 0.0).unwrap();
        // Fock states 0..=2 need two bits; cap at 2.
        let src = pair(Spin::Down, 1, Spin::Down, 1, 2);
        let row = liouvillian_row_with_cutoff(&p, &src, 2);
        let amps: HashMap<_, _> = row.entries.iter().cloned().collect();
        assert_eq!(amps.len(), 2);
        assert!((amps[&src] - Complex64::from(-1.0)).norm() < 1e-15);
        let from = pair(Spin::Down, 2, Spin::Down, 2, 2);
        assert!((amps[&from] - Complex64::from(2.0)).norm() < 1e-15);

        // Column-by-column comparison with the dense reference.
        let idx = |c: &SpinBosonConfig| {
            (if c.spins()[0] == Spin::Up { 3 } else { 0 }) + c.occupation() as usize
        };
        for target in all_pairs(2)
            .into_iter()
            .filter(|c| c.left.occupation() <= 2 && c.right.occupation() <= 2)
        {
            let mut rho = [[0.0; 6]; 6];
            rho[idx(&target.left)][idx(&target.right)] = 1.0;
            let dense = dense_cavity_decay_rhs(1.0, &rho);
            let expected = dense[idx(&src.left)][idx(&src.right)];
            let got = amps.get(&target).copied().unwrap_or_default();
            assert!(
                (got - Complex64::from(expected)).norm() < 1e-14,
                "{target:?}"
            );
        }
    }

    #[test]
    fn null_model_has_empty_rows() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 0.0).unwrap();
        for cp in all_pairs(2) {
            assert!(liouvillian_row(&p, &cp).entries.is_empty());
        }
    }

    #[test]
    fn rows_are_conjugate_under_swap() {
        let p = ModelParams::new(0.2, 0.4, 0.04, 0.03).unwrap();
        for cp in all_pairs(3) {
            let row = liouvillian_row(&p, &cp);
            let swapped: HashMap<_, _> = liouvillian_row(&p, &cp.swapped())
                .entries
                .into_iter()
                .collect();
            assert_eq!(row.entries.len(), swapped.len());
            for (m, a) in &row.entries {
                let b = swapped[&m.swapped()];
                assert!((a.conj() - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn excitation_examples() {
        assert_eq!(excitation(&cfg(Spin::Up, 3, 3)), 4);
        assert_eq!(excitation(&cfg(Spin::Down, 0, 3)), 0);
        assert_eq!(excitation(&cfg(Spin::Down, 7, 3)), 7);
    }

    #[test]
    fn support_examples() {
        assert!(in_steady_support(&pair(Spin::Up, 2, Spin::Down, 3, 3)));
        assert!(!in_steady_support(&pair(Spin::Up, 2, Spin::Up, 3, 3)));
        assert!(in_steady_support(&pair(Spin::Down, 5, Spin::Down, 5, 3)));
    }

    #[test]
    fn trace_preservation() {
        let p = ModelParams::new(0.2, 0.4, 0.04, 0.1).unwrap();
        for n_bits in 1..=3 {
            let mut column_sums: HashMap<ConfigPair, Complex64> = HashMap::new();
            for cp in all_pairs(n_bits)
                .into_iter()
                .filter(ConfigPair::is_diagonal)
            {
                for (m, a) in liouvillian_row(&p, &cp).entries {
                    *column_sums.entry(m).or_default() += a;
                }
            }
            for (m, s) in column_sums {
                assert!(s.norm() < 1e-14, "column {m:?} sums to {s}");
            }
        }
    }

    #[test]
    fn support_closure_and_sparsity() {
        let p = ModelParams::new(0.2, 0.4, 0.04, 0.1).unwrap();
        for n_bits in 1..=3 {
            for cp in all_pairs(n_bits) {
                let row = liouvillian_row(&p, &cp);
                assert!(row.entries.len() <= 8);
                if in_steady_support(&cp) {
                    assert!(row.entries.iter().all(|(m, _)| in_steady_support(m)));
                }
            }
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let p = ModelParams::new(0.2, 0.4, 0.04, 0.0).unwrap();
        let top = pair(Spin::Down, 3, Spin::Down, 3, 2);
        assert!(liouvillian_row(&p, &top).truncated);
        let inner = pair(Spin::Down, 1, Spin::Down, 1, 2);
        assert!(!liouvillian_row(&p, &inner).truncated);
    }

    #[test]
    fn support_enumeration_counts() {
        // Two spins-equal blocks of 2^N_β plus two shifted blocks of 2^N_β − 1.
        for n_bits in 1..=5 {
            let n = 1usize << n_bits;
            let pairs = support_pairs(1, n_bits);
            assert_eq!(pairs.len(), 4 * n - 2);
            assert!(pairs.iter().all(in_steady_support));
        }
        assert_eq!(diagonal_pairs(1, 2).len(), 8);
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(ModelParams::new(-0.1, 0.4, 0.04, 0.0).is_err());
        assert!(ModelParams::new(0.1, f64::NAN, 0.04, 0.0).is_err());
    }
}
