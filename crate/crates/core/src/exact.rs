//! Exact density-matrix benchmark for the one-atom laser.
//!
//! Two independent routes to the steady state:
//! * [`evolve_to_steady`] propagates the full master equation with RK4,
//!   applying operator matrices built from `c` and `σ⁺` directly;
//! * [`projector_steady_state`] solves `L x = 0` on the excitation-conserving
//!   sector only, with the superoperator assembled from [`model::liouvillian_row`].
//!
//! The basis is spin ⊗ Fock with Fock states `0..n_fock`; basis index is
//! `spin * n_fock + n` with spin down = 0, up = 1.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bits::{Spin, SpinBosonConfig};
use crate::error::{Error, Result};
use crate::model::{self, ConfigPair, ModelParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default steady-state tolerance on the max norm of ρ̇ (ps⁻¹).
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_fock: usize,
    data: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(n_fock: usize) -> Self {
        let d = 2 * n_fock;
        DensityMatrix {
            n_fock,
            data: DMatrix::zeros(d, d),
        }
    }

    /// `|spin, n⟩⟨spin, n|`.
    pub fn pure_fock(n_fock: usize, spin: Spin, n: usize) -> Self {
        let mut rho = Self::zeros(n_fock);
        let i = rho.index(spin, n);
        rho.data[(i, i)] = Complex64::new(1.0, 0.0);
        rho
    }

    pub fn from_matrix(n_fock: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let d = 2 * n_fock;
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: if data.nrows() != d {
                    data.nrows()
                } else {
                    data.ncols()
                },
            });
        }
        Ok(DensityMatrix { n_fock, data })
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn dim(&self) -> usize {
        2 * self.n_fock
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn index(&self, spin: Spin, n: usize) -> usize {
        debug_assert!(n < self.n_fock);
        match spin {
            Spin::Down => n,
            Spin::Up => self.n_fock + n,
        }
    }

    pub fn get(&self, left: (Spin, usize), right: (Spin, usize)) -> Complex64 {
        self.data[(self.index(left.0, left.1), self.index(right.0, right.1))]
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn normalize(&mut self) {
        let tr = self.trace().re;
        self.data /= Complex64::from(tr);
    }

    /// Largest `|ρ_ij − ρ_ji*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * Complex64::from(0.5);
        herm.symmetric_eigenvalues().min()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Sparse real matrix in coordinate form.
#[derive(Clone, Debug)]
struct SparseOp {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOp {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        SparseOp { entries }
    }

    /// `out += scale * A ρ`
    fn left_mul_add(
        &self,
        rho: &DMatrix<Complex64>,
        scale: Complex64,
        out: &mut DMatrix<Complex64>,
    ) {
        let d = rho.ncols();
        for &(i, k, v) in &self.entries {
            let f = scale * v;
            for j in 0..d {
                out[(i, j)] += f * rho[(k, j)];
            }
        }
    }

    /// `out += scale * ρ A`
    fn right_mul_add(
        &self,
        rho: &DMatrix<Complex64>,
        scale: Complex64,
        out: &mut DMatrix<Complex64>,
    ) {
        let d = rho.nrows();
        for &(k, j, v) in &self.entries {
            let f = scale * v;
            for i in 0..d {
                out[(i, j)] += f * rho[(i, k)];
            }
        }
    }
}

/// Operator matrices of the model on a fixed basis.
#[derive(Clone, Debug)]
pub struct LindbladOperators {
    n_fock: usize,
    params: ModelParams,
    hamiltonian: SparseOp,
    annihilation: SparseOp,
    creation: SparseOp,
    number: SparseOp,
    raising: SparseOp,
    lowering: SparseOp,
    ground_projector: SparseOp,
}

impl LindbladOperators {
    pub fn new(p: &ModelParams, n_fock: usize) -> Self {
        let mut c_mode = DMatrix::<f64>::zeros(n_fock, n_fock);
        for n in 1..n_fock {
            c_mode[(n - 1, n)] = (n as f64).sqrt();
        }
        // σ⁺|↓⟩ = |↑⟩ with down = 0, up = 1.
        let mut sp = DMatrix::<f64>::zeros(2, 2);
        sp[(1, 0)] = 1.0;
        let id_mode = DMatrix::<f64>::identity(n_fock, n_fock);
        let id_spin = DMatrix::<f64>::identity(2, 2);

        let c = id_spin.kronecker(&c_mode);
        let sigma_plus = sp.kronecker(&id_mode);
        let sigma_minus = sigma_plus.transpose();
        let cd = c.transpose();
        let h = &sigma_plus * &sigma_minus * p.detuning
            + (&sigma_plus * &c + &sigma_minus * &cd) * p.g0;

        LindbladOperators {
            n_fock,
            params: *p,
            hamiltonian: SparseOp::from_dense(&h),
            annihilation: SparseOp::from_dense(&c),
            creation: SparseOp::from_dense(&cd),
            number: SparseOp::from_dense(&(&cd * &c)),
            raising: SparseOp::from_dense(&sigma_plus),
            lowering: SparseOp::from_dense(&sigma_minus),
            ground_projector: SparseOp::from_dense(&(&sigma_minus * &sigma_plus)),
        }
    }

    /// `−i[H,ρ] + κ/2 (2cρc† − {c†c,ρ}) + Γ/2 (2σ⁺ρσ⁻ − {σ⁻σ⁺,ρ})`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_fock != self.n_fock {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n_fock,
                actual: rho.dim(),
            });
        }
        let mut out = DensityMatrix::zeros(self.n_fock);
        self.apply_into(&rho.data, &mut out.data);
        Ok(out)
    }

    fn apply_into(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let d = rho.nrows();
        let p = &self.params;
        out.fill(ZERO);
        let i = Complex64::i();
        self.hamiltonian.left_mul_add(rho, -i, out);
        self.hamiltonian.right_mul_add(rho, i, out);

        let mut tmp = DMatrix::<Complex64>::zeros(d, d);
        if p.kappa != 0.0 {
            self.annihilation
                .left_mul_add(rho, Complex64::from(1.0), &mut tmp);
            self.creation
                .right_mul_add(&tmp, Complex64::from(p.kappa), out);
            let half = Complex64::from(-0.5 * p.kappa);
            self.number.left_mul_add(rho, half, out);
            self.number.right_mul_add(rho, half, out);
        }
        if p.gamma != 0.0 {
            tmp.fill(ZERO);
            self.raising
                .left_mul_add(rho, Complex64::from(1.0), &mut tmp);
            self.lowering
                .right_mul_add(&tmp, Complex64::from(p.gamma), out);
            let half = Complex64::from(-0.5 * p.gamma);
            self.ground_projector.left_mul_add(rho, half, out);
            self.ground_projector.right_mul_add(rho, half, out);
        }
    }
}

/// Right-hand side of the master equation for `rho`.
pub fn rhs(p: &ModelParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    LindbladOperators::new(p, rho.n_fock).apply(rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyStateMethod {
    Propagation,
    ProjectorSolve,
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// Propagation time until the tolerance was met; `None` for the direct solve.
    pub time_to_converge: Option<f64>,
    /// Max norm of ρ̇ at the returned state (ps⁻¹).
    pub residual: f64,
    pub method: SteadyStateMethod,
}

/// Options for [`evolve_to_steady`].
#[derive(Clone, Copy, Debug)]
pub struct PropagationOptions {
    pub dt: f64,
    pub tol: f64,
    pub max_time: f64,
    /// Hermiticity/positivity check period in steps; 0 disables.
    pub check_every: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            dt: 0.02,
            tol: DEFAULT_TOL,
            max_time: 1.0e5,
            check_every: 1000,
        }
    }
}

/// Classic RK4 propagation from `rho0` until `max|ρ̇| < tol`, renormalizing the
/// trace after each step.
pub fn evolve_to_steady(
    p: &ModelParams,
    rho0: &DensityMatrix,
    opts: PropagationOptions,
) -> Result<SteadyStateResult> {
    evolve_with_observer(p, rho0, opts, |_| {})
}

/// As [`evolve_to_steady`], calling `observe` with the state after every step.
pub fn evolve_with_observer(
    p: &ModelParams,
    rho0: &DensityMatrix,
    opts: PropagationOptions,
    mut observe: impl FnMut(&DensityMatrix),
) -> Result<SteadyStateResult> {
    if opts.dt.is_nan() || opts.dt <= 0.0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "dt and tol must be positive".into(),
        ));
    }
    let ops = LindbladOperators::new(p, rho0.n_fock);
    let d = rho0.dim();
    let mut rho = rho0.clone();
    rho.normalize();
    let dt = Complex64::from(opts.dt);
    let (mut k1, mut k2, mut k3, mut k4) = (
        DMatrix::zeros(d, d),
        DMatrix::zeros(d, d),
        DMatrix::zeros(d, d),
        DMatrix::zeros(d, d),
    );
    let mut stage = DMatrix::<Complex64>::zeros(d, d);
    let mut step = 0usize;
    loop {
        let t = step as f64 * opts.dt;
        ops.apply_into(&rho.data, &mut k1);
        let residual = k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Unphysical {
                time: t,
                reason: "non-finite derivative".into(),
            });
        }
        if residual < opts.tol {
            return Ok(SteadyStateResult {
                rho,
                time_to_converge: Some(t),
                residual,
                method: SteadyStateMethod::Propagation,
            });
        }
        if t >= opts.max_time {
            return Err(Error::NoConvergence { time: t, residual });
        }

        stage.copy_from(&rho.data);
        add_scaled(&mut stage, dt * 0.5, &k1);
        ops.apply_into(&stage, &mut k2);
        stage.copy_from(&rho.data);
        add_scaled(&mut stage, dt * 0.5, &k2);
        ops.apply_into(&stage, &mut k3);
        stage.copy_from(&rho.data);
        add_scaled(&mut stage, dt, &k3);
        ops.apply_into(&stage, &mut k4);

        let sixth = dt / 6.0;
        add_scaled(&mut rho.data, sixth, &k1);
        add_scaled(&mut rho.data, sixth * 2.0, &k2);
        add_scaled(&mut rho.data, sixth * 2.0, &k3);
        add_scaled(&mut rho.data, sixth, &k4);
        rho.normalize();
        step += 1;
        observe(&rho);

        if opts.check_every > 0 && step.is_multiple_of(opts.check_every) {
            check_physical(&rho, step as f64 * opts.dt)?;
        }
    }
}

fn add_scaled(dst: &mut DMatrix<Complex64>, scale: Complex64, src: &DMatrix<Complex64>) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += scale * s;
    }
}

fn check_physical(rho: &DensityMatrix, time: f64) -> Result<()> {
    let herm = rho.hermiticity_error();
    if herm > 1e-12 {
        return Err(Error::Unphysical {
            time,
            reason: format!("hermiticity error {herm:e}"),
        });
    }
    let min_ev = rho.min_eigenvalue();
    if min_ev < -1e-8 {
        return Err(Error::Unphysical {
            time,
            reason: format!("negative eigenvalue {min_ev:e}"),
        });
    }
    Ok(())
}

/// Sector elements `(↓,n|↓,n)`, `(↑,n|↑,n)`, `(↑,n|↓,n+1)`, `(↓,n+1|↑,n)` for
/// Fock states `0..n_fock`, encoded with enough bits to hold `n_fock − 1`.
pub fn sector_elements(n_fock: usize) -> Vec<ConfigPair> {
    let n_bits = bits_for(n_fock);
    let side = |s: Spin, n: usize| {
        SpinBosonConfig::with_occupation(vec![s], n as u64, n_bits).expect("fits by construction")
    };
    let mut out = Vec::with_capacity(4 * n_fock);
    for n in 0..n_fock {
        out.push(ConfigPair::diagonal(side(Spin::Down, n)));
        out.push(ConfigPair::diagonal(side(Spin::Up, n)));
        if n + 1 < n_fock {
            out.push(ConfigPair::new(side(Spin::Up, n), side(Spin::Down, n + 1)));
            out.push(ConfigPair::new(side(Spin::Down, n + 1), side(Spin::Up, n)));
        }
    }
    out
}

fn bits_for(n_fock: usize) -> usize {
    let top = n_fock.saturating_sub(1).max(1) as u64;
    (64 - top.leading_zeros()) as usize
}

/// Steady state from a dense LU solve of the sector-restricted Liouvillian,
/// with the first row replaced by the trace condition.
pub fn projector_steady_state(p: &ModelParams, n_fock: usize) -> Result<SteadyStateResult> {
    if n_fock == 0 {
        return Err(Error::InvalidParameter("n_fock must be at least 1".into()));
    }
    let elements = sector_elements(n_fock);
    let dim = elements.len();
    let index: std::collections::HashMap<&ConfigPair, usize> =
        elements.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let cap = (n_fock - 1) as u64;

    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, e) in elements.iter().enumerate() {
        let row = model::liouvillian_row_with_cutoff(p, e, cap);
        for (m, amp) in row.entries {
            let j = *index
                .get(&m)
                .expect("the sector is closed under the Liouvillian");
            a[(i, j)] += amp;
        }
    }

    let mut system = a.clone();
    let mut b = nalgebra::DVector::<Complex64>::zeros(dim);
    for (j, e) in elements.iter().enumerate() {
        system[(0, j)] = if e.is_diagonal() {
            Complex64::from(1.0)
        } else {
            ZERO
        };
    }
    b[0] = Complex64::from(1.0);

    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let x = system.lu().solve(&b).ok_or(Error::SingularSystem {
        residual: f64::INFINITY,
    })?;
    let sector_residual = (&a * &x).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !sector_residual.is_finite() || sector_residual > 1e-10 * scale {
        return Err(Error::SingularSystem {
            residual: sector_residual,
        });
    }

    let mut rho = DensityMatrix::zeros(n_fock);
    for (e, v) in elements.iter().zip(x.iter()) {
        let l = rho.index(e.left.spins()[0], e.left.occupation() as usize);
        let r = rho.index(e.right.spins()[0], e.right.occupation() as usize);
        rho.data[(l, r)] = *v;
    }
    let residual = rhs(p, &rho)?.max_abs();
    Ok(SteadyStateResult {
        rho,
        time_to_converge: None,
        residual,
        method: SteadyStateMethod::ProjectorSolve,
    })
}

/// `Tr(c†c ρ)`.
pub fn observable_n(rho: &DensityMatrix) -> f64 {
    diagonal_populations(rho)
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// `P_n = Σ_spin ⟨spin,n|ρ|spin,n⟩`.
pub fn diagonal_populations(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.n_fock)
        .map(|n| {
            rho.get((Spin::Down, n), (Spin::Down, n)).re + rho.get((Spin::Up, n), (Spin::Up, n)).re
        })
        .collect()
}

/// `(spin-up, spin-down)` populations.
pub fn spin_populations(rho: &DensityMatrix) -> (f64, f64) {
    let mut up = 0.0;
    let mut down = 0.0;
    for n in 0..rho.n_fock {
        up += rho.get((Spin::Up, n), (Spin::Up, n)).re;
        down += rho.get((Spin::Down, n), (Spin::Down, n)).re;
    }
    (up, down)
}

/// Largest magnitude among elements outside the excitation-conserving sector.
pub fn off_support_max(rho: &DensityMatrix) -> f64 {
    let mut worst = 0.0f64;
    for s in [Spin::Down, Spin::Up] {
        for t in [Spin::Down, Spin::Up] {
            for n in 0..rho.n_fock {
                for m in 0..rho.n_fock {
                    let ex = |sp: Spin, k: usize| k + usize::from(sp == Spin::Up);
                    if ex(s, n) != ex(t, m) {
                        worst = worst.max(rho.get((s, n), (t, m)).norm());
                    }
                }
            }
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffCheck {
    pub n_fock: usize,
    pub n_mean: f64,
    pub n_mean_doubled: f64,
    pub relative_deviation: f64,
    pub converged: bool,
}

/// Compares ⟨n⟩ at `n_fock` and `2 n_fock`; converged below 0.1 % deviation.
pub fn check_cutoff(p: &ModelParams, n_fock: usize) -> Result<CutoffCheck> {
    let a = observable_n(&projector_steady_state(p, n_fock)?.rho);
    let b = observable_n(&projector_steady_state(p, 2 * n_fock)?.rho);
    let rel = if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    };
    Ok(CutoffCheck {
        n_fock,
        n_mean: a,
        n_mean_doubled: b,
        relative_deviation: rel,
        converged: rel < 1e-3,
    })
}
