//! Neural density operator with bit-encoded bosonic visible units.
//!
//! For a bra/ket pair with visible vectors `v` (σ-side) and `v'` (η-side):
//!
//! ```text
//! ln ρ(v, v') = ln 8 + Σ_i (a_i v_i + a_i* v'_i)
//!             + Σ_m [ ln cosh(b_m + Σ_i W_mi v_i) + ln cosh(b_m* + Σ_i W_mi* v'_i) ]
//!             + Σ_k ln cosh(2 c_k + Σ_i (U_ki v_i + U_ki* v'_i))
//! ```
//!
//! with spins entering as ±1 and bits as 0/1. Mixing biases `c_k` are real.
//!
//! Real parameter layout, used by gradients and checkpoints:
//! `[Re a, Im a, Re b, Im b, c, Re W, Im W, Re U, Im U]`, matrices row-major.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConfigPair;

const LN_8: f64 = 3.0 * LN_2;

/// Layer sizes: `N` spins, `N_β` bits, `M` hidden units per side, `K` mixing units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbmShape {
    #[serde(default = "one")]
    pub n_spins: usize,
    pub n_bits: usize,
    pub n_hidden: usize,
    pub n_mixing: usize,
}

fn one() -> usize {
    1
}

impl RbmShape {
    pub fn new(n_spins: usize, n_bits: usize, n_hidden: usize, n_mixing: usize) -> Result<Self> {
        let shape = RbmShape {
            n_spins,
            n_bits,
            n_hidden,
            n_mixing,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Hidden and mixing layers sized `N_β + 1`.
    pub fn unit_density(n_spins: usize, n_bits: usize) -> Result<Self> {
        Self::new(n_spins, n_bits, n_bits + 1, n_bits + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 || self.n_hidden == 0 || self.n_mixing == 0 {
            return Err(Error::InvalidParameter(
                "all layer sizes must be at least 1".into(),
            ));
        }
        if self.n_bits == 0 || self.n_bits > crate::bits::MAX_BITS {
            return Err(Error::InvalidBitCount(self.n_bits));
        }
        Ok(())
    }

    /// Visible units per side, `N + N_β`.
    pub fn n_visible(&self) -> usize {
        self.n_spins + self.n_bits
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    fn offsets(&self) -> Offsets {
        let (v, m, k) = (self.n_visible(), self.n_hidden, self.n_mixing);
        let re_a = 0;
        let im_a = re_a + v;
        let re_b = im_a + v;
        let im_b = re_b + m;
        let c = im_b + m;
        let re_w = c + k;
        let im_w = re_w + m * v;
        let re_u = im_w + m * v;
        let im_u = re_u + k * v;
        Offsets {
            re_a,
            im_a,
            re_b,
            im_b,
            c,
            re_w,
            im_w,
            re_u,
            im_u,
            end: im_u + k * v,
        }
    }
}

struct Offsets {
    re_a: usize,
    im_a: usize,
    re_b: usize,
    im_b: usize,
    c: usize,
    re_w: usize,
    im_w: usize,
    re_u: usize,
    im_u: usize,
    end: usize,
}

/// `2(N+N_β) + 2M + K + 2M(N+N_β) + 2K(N+N_β)`.
pub fn param_count(shape: &RbmShape) -> usize {
    let v = shape.n_visible();
    2 * v + 2 * shape.n_hidden + shape.n_mixing + 2 * shape.n_hidden * v + 2 * shape.n_mixing * v
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams {
    shape: RbmShape,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<f64>,
    /// `M × (N+N_β)`, row-major.
    w: Vec<Complex64>,
    /// `K × (N+N_β)`, row-major.
    u: Vec<Complex64>,
}

impl RbmParams {
    pub fn zeros(shape: RbmShape) -> Self {
        let v = shape.n_visible();
        RbmParams {
            shape,
            a: vec![Complex64::default(); v],
            b: vec![Complex64::default(); shape.n_hidden],
            c: vec![0.0; shape.n_mixing],
            w: vec![Complex64::default(); shape.n_hidden * v],
            u: vec![Complex64::default(); shape.n_mixing * v],
        }
    }

    pub fn shape(&self) -> &RbmShape {
        &self.shape
    }

    pub fn visible_bias(&self) -> &[Complex64] {
        &self.a
    }

    pub fn hidden_bias(&self) -> &[Complex64] {
        &self.b
    }

    pub fn mixing_bias(&self) -> &[f64] {
        &self.c
    }

    pub fn hidden_weights(&self) -> &[Complex64] {
        &self.w
    }

    pub fn mixing_weights(&self) -> &[Complex64] {
        &self.u
    }

    /// Rebuilds parameters from the flat real layout.
    pub fn from_real(shape: RbmShape, values: &[f64]) -> Result<Self> {
        shape.validate()?;
        let o = shape.offsets();
        if values.len() != o.end {
            return Err(Error::DimensionMismatch {
                expected: o.end,
                actual: values.len(),
            });
        }
        let cplx = |re: usize, im: usize, len: usize| -> Vec<Complex64> {
            (0..len)
                .map(|i| Complex64::new(values[re + i], values[im + i]))
                .collect()
        };
        let (v, m, k) = (shape.n_visible(), shape.n_hidden, shape.n_mixing);
        Ok(RbmParams {
            shape,
            a: cplx(o.re_a, o.im_a, v),
            b: cplx(o.re_b, o.im_b, m),
            c: values[o.c..o.c + k].to_vec(),
            w: cplx(o.re_w, o.im_w, m * v),
            u: cplx(o.re_u, o.im_u, k * v),
        })
    }

    pub fn to_real(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape.param_count());
        let split = |xs: &[Complex64]| {
            let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
            let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
            (re, im)
        };
        let (ra, ia) = split(&self.a);
        let (rb, ib) = split(&self.b);
        let (rw, iw) = split(&self.w);
        let (ru, iu) = split(&self.u);
        for block in [&ra, &ia, &rb, &ib, &self.c, &rw, &iw, &ru, &iu] {
            out.extend_from_slice(block);
        }
        out
    }

    /// `ϑ_l ← ϑ_l + scale · delta_l` over the flat real layout.
    pub fn add_scaled(&mut self, delta: &[f64], scale: f64) -> Result<()> {
        let o = self.shape.offsets();
        if delta.len() != o.end {
            return Err(Error::DimensionMismatch {
                expected: o.end,
                actual: delta.len(),
            });
        }
        let upd = |xs: &mut [Complex64], re: usize, im: usize| {
            for (i, z) in xs.iter_mut().enumerate() {
                z.re += scale * delta[re + i];
                z.im += scale * delta[im + i];
            }
        };
        upd(&mut self.a, o.re_a, o.im_a);
        upd(&mut self.b, o.re_b, o.im_b);
        upd(&mut self.w, o.re_w, o.im_w);
        upd(&mut self.u, o.re_u, o.im_u);
        for (i, c) in self.c.iter_mut().enumerate() {
            *c += scale * delta[o.c + i];
        }
        Ok(())
    }

    fn check_pair(&self, cp: &ConfigPair) {
        let s = &self.shape;
        assert!(
            cp.left.n_spins() == s.n_spins
                && cp.right.n_spins() == s.n_spins
                && cp.left.n_bits() == s.n_bits
                && cp.right.n_bits() == s.n_bits,
            "configuration does not match the network shape"
        );
    }
}

/// Uniform draws from `[−0.01, 0.01]` excluding exactly zero, deterministic in `seed`.
pub fn init_params(shape: RbmShape, seed: u64) -> RbmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..shape.param_count())
        .map(|_| loop {
            let x: f64 = rng.random_range(-0.01..=0.01);
            if x != 0.0 {
                break x;
            }
        })
        .collect();
    RbmParams::from_real(shape, &values).expect("length matches the shape")
}

/// `ln cosh z` without overflow: `s + ln(1 + e^{−2s}) − ln 2` with
/// `s = ±z` chosen so that `Re s ≥ 0`.
pub fn ln_cosh(z: Complex64) -> Complex64 {
    let s = if z.re < 0.0 { -z } else { z };
    s + (Complex64::from(1.0) + (-2.0 * s).exp()).ln() - LN_2
}

/// Pre-activations of one configuration pair.
struct Activations {
    visible_term: Complex64,
    /// `θ_m` for the bra side followed by `θ'_m` for the ket side.
    hidden: Vec<Complex64>,
    mixing: Vec<Complex64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

fn activations(params: &RbmParams, cp: &ConfigPair) -> Activations {
    params.check_pair(cp);
    let s = &params.shape;
    let nv = s.n_visible();
    let mut left = vec![0.0; nv];
    let mut right = vec![0.0; nv];
    cp.left.write_visible(&mut left);
    cp.right.write_visible(&mut right);

    let mut visible_term = Complex64::default();
    for i in 0..nv {
        visible_term += params.a[i] * left[i] + params.a[i].conj() * right[i];
    }
    let mut hidden = Vec::with_capacity(2 * s.n_hidden);
    for m in 0..s.n_hidden {
        let row = &params.w[m * nv..(m + 1) * nv];
        let mut th = params.b[m];
        for i in 0..nv {
            th += row[i] * left[i];
        }
        hidden.push(th);
    }
    for m in 0..s.n_hidden {
        let row = &params.w[m * nv..(m + 1) * nv];
        let mut th = params.b[m].conj();
        for i in 0..nv {
            th += row[i].conj() * right[i];
        }
        hidden.push(th);
    }
    let mixing = (0..s.n_mixing)
        .map(|k| {
            let row = &params.u[k * nv..(k + 1) * nv];
            let mut chi = Complex64::from(2.0 * params.c[k]);
            for i in 0..nv {
                chi += row[i] * left[i] + row[i].conj() * right[i];
            }
            chi
        })
        .collect();
    Activations {
        visible_term,
        hidden,
        mixing,
        left,
        right,
    }
}

/// `ln ρ_ϑ(σ, η)`, defined up to multiples of `2πi`.
///
/// # Panics
///
/// If the pair does not match the parameter shape.
pub fn log_rho(params: &RbmParams, cp: &ConfigPair) -> Complex64 {
    let act = activations(params, cp);
    LN_8 + act.visible_term
        + act.hidden.iter().map(|&t| ln_cosh(t)).sum::<Complex64>()
        + act.mixing.iter().map(|&x| ln_cosh(x)).sum::<Complex64>()
}

/// `ρ_ϑ(num) / ρ_ϑ(den)` evaluated in the log domain.
pub fn rho_ratio(params: &RbmParams, num: &ConfigPair, den: &ConfigPair) -> Complex64 {
    (log_rho(params, num) - log_rho(params, den)).exp()
}

/// `∂ ln ρ_ϑ / ∂ϑ_l` for every real parameter, in the flat layout.
pub fn log_derivatives(params: &RbmParams, cp: &ConfigPair) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); params.shape.param_count()];
    log_derivatives_into(params, cp, &mut out);
    out
}

/// [`log_rho`] and [`log_derivatives`] in one pass; `out` receives the derivatives.
pub fn log_derivatives_into(
    params: &RbmParams,
    cp: &ConfigPair,
    out: &mut [Complex64],
) -> Complex64 {
    let s = &params.shape;
    let o = s.offsets();
    assert_eq!(out.len(), o.end);
    let act = activations(params, cp);
    let (nv, nh) = (s.n_visible(), s.n_hidden);
    let i = Complex64::i();
    let (l, r) = (&act.left, &act.right);

    for k in 0..nv {
        out[o.re_a + k] = Complex64::from(l[k] + r[k]);
        out[o.im_a + k] = i * (l[k] - r[k]);
    }
    let mut log = LN_8 + act.visible_term;
    for m in 0..nh {
        let (th_l, th_r) = (act.hidden[m], act.hidden[nh + m]);
        log += ln_cosh(th_l) + ln_cosh(th_r);
        let (tl, tr) = (th_l.tanh(), th_r.tanh());
        out[o.re_b + m] = tl + tr;
        out[o.im_b + m] = i * (tl - tr);
        for k in 0..nv {
            out[o.re_w + m * nv + k] = tl * l[k] + tr * r[k];
            out[o.im_w + m * nv + k] = i * (tl * l[k] - tr * r[k]);
        }
    }
    for (kk, &chi) in act.mixing.iter().enumerate() {
        log += ln_cosh(chi);
        let t = chi.tanh();
        out[o.c + kk] = 2.0 * t;
        for k in 0..nv {
            out[o.re_u + kk * nv + k] = t * (l[k] + r[k]);
            out[o.im_u + kk * nv + k] = i * t * (l[k] - r[k]);
        }
    }
    log
}
