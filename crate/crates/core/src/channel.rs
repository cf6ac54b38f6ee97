//! Stochastic channel realizations for the four link classes and their
//! split into an estimate plus an additive Gaussian estimation error.
//!
//! Every link draws from its own ChaCha stream: the generator is seeded with
//! the realization seed and its stream id is set to
//! `class << 56 | a << 28 | b`, with `(a, b)` the link's node indices. A
//! link's draw therefore never depends on the order links are visited.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NetworkLayout;
use crate::units::{dbm_to_watts, MIN_SEPARATION};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Path-loss exponents and noise/estimation-error powers (W).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub alpha_dl: f64,
    pub alpha_ul: f64,
    /// UL user → DL user.
    pub alpha_t: f64,
    /// DL-RRU → UL-RRU.
    pub alpha_i: f64,
    pub sigma2_dl: f64,
    pub sigma2_ul: f64,
    pub sigma2_sp_dl: f64,
    pub sigma2_sp_ul: f64,
    /// Optional reference distance `d0`; the amplitude becomes `(d/d0)^-α`.
    pub reference_distance: Option<f64>,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            alpha_dl: 3.7,
            alpha_ul: 3.7,
            alpha_t: 4.0,
            alpha_i: 3.0,
            sigma2_dl: dbm_to_watts(-83.0),
            sigma2_ul: dbm_to_watts(-83.0),
            sigma2_sp_dl: dbm_to_watts(-105.0),
            sigma2_sp_ul: dbm_to_watts(-105.0),
            reference_distance: None,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        let exps = [
            ("alpha_dl", self.alpha_dl),
            ("alpha_ul", self.alpha_ul),
            ("alpha_t", self.alpha_t),
            ("alpha_i", self.alpha_i),
        ];
        for (name, v) in exps {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("sigma2_dl", self.sigma2_dl), ("sigma2_ul", self.sigma2_ul)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("sigma2_sp_dl", self.sigma2_sp_dl),
            ("sigma2_sp_ul", self.sigma2_sp_ul),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if let Some(d0) = self.reference_distance {
            if !(d0 > 0.0 && d0.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "reference distance must be positive, got {d0}"
                )));
            }
        }
        Ok(())
    }

    /// Large-scale amplitude of a link of length `d` with exponent `alpha`.
    pub fn amplitude(&self, d: f64, alpha: f64) -> Result<f64> {
        let g = large_scale_gain(d, alpha)?;
        Ok(match self.reference_distance {
            Some(d0) => g * d0.powf(alpha),
            None => g,
        })
    }
}

/// Large-scale amplitude factor `d^-alpha`; the power factor is its square.
pub fn large_scale_gain(d: f64, alpha: f64) -> Result<f64> {
    if !(d >= MIN_SEPARATION) {
        return Err(Error::DistanceTooSmall {
            distance: d,
            min: MIN_SEPARATION,
        });
    }
    Ok(d.powf(-alpha))
}

/// A channel with its estimate/error decomposition; `truth == estimate + error`.
#[derive(Clone, Debug, PartialEq)]
pub struct Link<T> {
    pub truth: T,
    pub estimate: T,
    pub error: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Truth,
    Estimate,
    Error,
}

impl<T> Link<T> {
    pub fn part(&self, part: Part) -> &T {
        match part {
            Part::Truth => &self.truth,
            Part::Estimate => &self.estimate,
            Part::Error => &self.error,
        }
    }
}

/// One Monte Carlo realization of every channel in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// `g_dl[m][l]`: DL-RRU `m` → DL user `l`, N-vector.
    pub g_dl: Vec<Vec<Link<CVector>>>,
    /// `g_ul[n][k]`: UL user `k` → UL-RRU `n`, N-vector.
    pub g_ul: Vec<Vec<Link<CVector>>>,
    /// `g_t[l][k]`: UL user `k` → DL user `l`.
    pub g_t: Vec<Vec<Link<Complex64>>>,
    /// `g_i[n][m]`: DL-RRU `m` → UL-RRU `n`, N×N.
    pub g_i: Vec<Vec<Link<CMatrix>>>,
    pub n_antennas: usize,
}

impl ChannelSet {
    pub fn m_dl(&self) -> usize {
        self.g_dl.len()
    }

    pub fn m_ul(&self) -> usize {
        self.g_ul.len()
    }

    pub fn k_dl(&self) -> usize {
        self.g_t.len()
    }

    pub fn k_ul(&self) -> usize {
        self.g_ul.first().map_or(0, Vec::len)
    }

    /// DL channel of user `l` stacked over all DL-RRUs (`M_dl·N`).
    pub fn stacked_dl(&self, l: usize, part: Part) -> CVector {
        let n = self.n_antennas;
        let mut v = CVector::zeros(self.m_dl() * n);
        for (m, row) in self.g_dl.iter().enumerate() {
            v.rows_mut(m * n, n).copy_from(row[l].part(part));
        }
        v
    }

    /// UL channel of user `k` stacked over all UL-RRUs (`M_ul·N`).
    pub fn stacked_ul(&self, k: usize, part: Part) -> CVector {
        let n = self.n_antennas;
        let mut v = CVector::zeros(self.m_ul() * n);
        for (i, row) in self.g_ul.iter().enumerate() {
            v.rows_mut(i * n, n).copy_from(row[k].part(part));
        }
        v
    }

    /// Column block of DL-RRU `m` in the stacked inter-RRU channel
    /// (`M_ul·N × N`).
    pub fn interference_block(&self, m: usize, part: Part) -> CMatrix {
        let n = self.n_antennas;
        let mut g = CMatrix::zeros(self.m_ul() * n, n);
        for (i, row) in self.g_i.iter().enumerate() {
            g.view_mut((i * n, 0), (n, n)).copy_from(row[m].part(part));
        }
        g
    }

    /// Matrix whose columns are the stacked DL channels of every DL user.
    pub fn dl_matrix(&self, part: Part) -> CMatrix {
        let mut g = CMatrix::zeros(self.m_dl() * self.n_antennas, self.k_dl());
        for l in 0..self.k_dl() {
            g.set_column(l, &self.stacked_dl(l, part));
        }
        g
    }

    pub fn ul_matrix(&self, part: Part) -> CMatrix {
        let mut g = CMatrix::zeros(self.m_ul() * self.n_antennas, self.k_ul());
        for k in 0..self.k_ul() {
            g.set_column(k, &self.stacked_ul(k, part));
        }
        g
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    Dl = 1,
    Ul = 2,
    UserToUser = 3,
    Inter = 4,
    DlError = 5,
    InterError = 6,
}

fn link_rng(seed: u64, stream: Stream, a: usize, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) | ((a as u64) << 28) | b as u64);
    rng
}

/// One `CN(0, variance)` sample: each real/imaginary part has variance
/// `variance / 2`.
fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

fn cn_vector(rng: &mut ChaCha8Rng, len: usize, variance: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

fn cn_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMatrix {
    // Column-major fill keeps the draw order tied to the storage order.
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}

fn exact<T: Clone>(truth: T, zero: T) -> Link<T> {
    Link {
        estimate: truth.clone(),
        truth,
        error: zero,
    }
}

/// Draws the true channels `d^-α · CN(0, I)` for every link. Estimates are
/// set equal to the truth; call [`split_estimate_error`] to add errors.
pub fn draw_channels(
    layout: &NetworkLayout,
    params: &FadingParams,
    seed: u64,
) -> Result<ChannelSet> {
    params.validate()?;
    let n = layout.n_antennas();
    let g_dl = layout
        .dl_rrus
        .iter()
        .enumerate()
        .map(|(m, rru)| {
            layout
                .dl_users
                .iter()
                .enumerate()
                .map(|(l, &user)| {
                    let amp = params.amplitude(rru.position.distance(user), params.alpha_dl)?;
                    let h = cn_vector(&mut link_rng(seed, Stream::Dl, m, l), n, 1.0);
                    Ok(exact(h * Complex64::from(amp), CVector::zeros(n)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let g_ul = layout
        .ul_rrus
        .iter()
        .enumerate()
        .map(|(i, rru)| {
            layout
                .ul_users
                .iter()
                .enumerate()
                .map(|(k, &user)| {
                    let amp = params.amplitude(rru.position.distance(user), params.alpha_ul)?;
                    let h = cn_vector(&mut link_rng(seed, Stream::Ul, i, k), n, 1.0);
                    Ok(exact(h * Complex64::from(amp), CVector::zeros(n)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let g_t = layout
        .dl_users
        .iter()
        .enumerate()
        .map(|(l, &dl)| {
            layout
                .ul_users
                .iter()
                .enumerate()
                .map(|(k, &ul)| {
                    let amp = params.amplitude(dl.distance(ul), params.alpha_t)?;
                    let h = complex_normal(&mut link_rng(seed, Stream::UserToUser, l, k), 1.0);
                    Ok(exact(h * amp, Complex64::new(0.0, 0.0)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let g_i = layout
        .ul_rrus
        .iter()
        .enumerate()
        .map(|(i, rx)| {
            layout
                .dl_rrus
                .iter()
                .enumerate()
                .map(|(m, tx)| {
                    let amp =
                        params.amplitude(rx.position.distance(tx.position), params.alpha_i)?;
                    let h = cn_matrix(&mut link_rng(seed, Stream::Inter, i, m), n, n, 1.0);
                    Ok(exact(h * Complex64::from(amp), CMatrix::zeros(n, n)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSet {
        g_dl,
        g_ul,
        g_t,
        g_i,
        n_antennas: n,
    })
}

/// Adds i.i.d. `CN(0, σ²_sp)` estimation errors: `σ²_sp_dl` on the
/// DL-RRU → DL-user channels, `σ²_sp_ul` on the inter-RRU channels. The
/// UL and user-to-user channels stay perfectly known.
///
/// The estimate is `truth - error`; the stored truth is then re-rounded as
/// `estimate + error` so the decomposition holds exactly in floating point
/// (the truth moves by at most one rounding step).
pub fn split_estimate_error(channels: &ChannelSet, params: &FadingParams, seed: u64) -> ChannelSet {
    let mut out = channels.clone();
    let n = channels.n_antennas;
    for (m, row) in out.g_dl.iter_mut().enumerate() {
        for (l, link) in row.iter_mut().enumerate() {
            let err = if params.sigma2_sp_dl > 0.0 {
                cn_vector(
                    &mut link_rng(seed, Stream::DlError, m, l),
                    n,
                    params.sigma2_sp_dl,
                )
            } else {
                CVector::zeros(n)
            };
            let estimate = &link.truth - &err;
            link.truth = &estimate + &err;
            link.estimate = estimate;
            link.error = err;
        }
    }
    for (i, row) in out.g_i.iter_mut().enumerate() {
        for (m, link) in row.iter_mut().enumerate() {
            let err = if params.sigma2_sp_ul > 0.0 {
                cn_matrix(
                    &mut link_rng(seed, Stream::InterError, i, m),
                    n,
                    n,
                    params.sigma2_sp_ul,
                )
            } else {
                CMatrix::zeros(n, n)
            };
            let estimate = &link.truth - &err;
            link.truth = &estimate + &err;
            link.estimate = estimate;
            link.error = err;
        }
    }
    out
}

/// Draws the true channels and their estimation errors for one realization.
pub fn draw_realization(
    layout: &NetworkLayout,
    params: &FadingParams,
    seed: u64,
) -> Result<ChannelSet> {
    let truth = draw_channels(layout, params, seed)?;
    Ok(split_estimate_error(&truth, params, seed))
}
