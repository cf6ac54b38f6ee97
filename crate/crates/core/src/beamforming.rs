//! Downlink ZF data beams, conjugate sensing beams and uplink combiners.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::channel::{CMatrix, CVector, ChannelSet, Part};
use crate::error::{Error, Result};
use crate::geometry::{NetworkLayout, Position};

/// Largest accepted condition number of the column-normalized channel matrix.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerMode {
    Mrc,
    #[default]
    Zf,
}

/// How beams are derived from a channel realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BeamPolicy {
    pub combiner: CombinerMode,
    /// Offset of the a priori target position from the true one; the
    /// sensing beams aim at `target + prior_offset`.
    pub prior_offset: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamSet {
    /// `w_c[m][i]`: block of user `i`'s data beam transmitted by DL-RRU `m`.
    /// Stacked over `m`, each user's beam has unit norm.
    pub w_c: Vec<Vec<CVector>>,
    /// `w_s[m]`: unit-norm sensing beam of DL-RRU `m`.
    pub w_s: Vec<CVector>,
    /// `v[k]`: unit-norm receive combiner of UL user `k` over all UL-RRU
    /// antennas.
    pub v: Vec<CVector>,
}

impl BeamSet {
    pub fn m_dl(&self) -> usize {
        self.w_s.len()
    }

    pub fn k_dl(&self) -> usize {
        self.w_c.first().map_or(0, Vec::len)
    }

    /// User `i`'s data beam stacked over all DL-RRUs.
    pub fn stacked_data(&self, i: usize) -> CVector {
        let n = self.w_s.first().map_or(0, |w| w.len());
        let mut out = CVector::zeros(self.m_dl() * n);
        for (m, row) in self.w_c.iter().enumerate() {
            out.rows_mut(m * n, n).copy_from(&row[i]);
        }
        out
    }

    pub fn norms(&self) -> BeamNorms {
        BeamNorms {
            data: self
                .w_c
                .iter()
                .map(|row| row.iter().map(|w| w.norm_squared()).collect())
                .collect(),
            pilot: self.w_s.iter().map(|w| w.norm_squared()).collect(),
        }
    }
}

/// Squared beam norms entering the per-RRU power constraint:
/// `data[m][i] = ‖w_c[m][i]‖²`, `pilot[m] = ‖w_s[m]‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamNorms {
    pub data: Vec<Vec<f64>>,
    pub pilot: Vec<f64>,
}

impl BeamNorms {
    pub fn m_dl(&self) -> usize {
        self.pilot.len()
    }

    pub fn k_dl(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    /// Entry-wise mean over realizations (average-power constraint).
    pub fn mean<'a>(norms: impl IntoIterator<Item = &'a BeamNorms>) -> Option<BeamNorms> {
        let mut iter = norms.into_iter();
        let mut acc = iter.next()?.clone();
        let mut count = 1.0;
        for n in iter {
            for (row, other) in acc.data.iter_mut().zip(&n.data) {
                for (a, b) in row.iter_mut().zip(other) {
                    *a += b;
                }
            }
            for (a, b) in acc.pilot.iter_mut().zip(&n.pilot) {
                *a += b;
            }
            count += 1.0;
        }
        acc.data.iter_mut().flatten().for_each(|a| *a /= count);
        acc.pilot.iter_mut().for_each(|a| *a /= count);
        Some(acc)
    }
}

/// Column-normalized ZF: `Ĝ(ĜᴴĜ)⁻¹` with unit-norm columns.
///
/// Columns are normalized before inversion; ZF directions do not depend on
/// column scaling, and the condition check then ignores path-loss spread.
fn zero_forcing(g_hat: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let (rows, cols) = g_hat.shape();
    if cols == 0 {
        return Ok(CMatrix::zeros(rows, 0));
    }
    if rows < cols {
        return Err(Error::RankDeficient {
            what,
            condition: f64::INFINITY,
            threshold: MAX_CONDITION,
        });
    }
    let mut g = g_hat.clone();
    for mut col in g.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::RankDeficient {
                what,
                condition: f64::INFINITY,
                threshold: MAX_CONDITION,
            });
        }
        col.unscale_mut(norm);
    }
    let sv = g.clone().svd(false, false).singular_values;
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| {
        (hi.max(s), lo.min(s))
    });
    let condition = smax / smin;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient {
            what,
            condition,
            threshold: MAX_CONDITION,
        });
    }
    let gram = g.adjoint() * &g;
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficient {
        what,
        condition,
        threshold: MAX_CONDITION,
    })?;
    let mut w = &g * chol.inverse();
    for mut col in w.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }
    Ok(w)
}

/// ZF data beams from the stacked estimated DL channel matrix
/// (`M_dl·N × K_dl`, column `l` = user `l`). Returns the stacked beam
/// matrix; column `i` is user `i`'s unit-norm beam.
pub fn zf_data_beams(g_hat: &CMatrix) -> Result<CMatrix> {
    zero_forcing(g_hat, "downlink")
}

/// Conjugate beams `w_s[m] = conj(a_m)/‖a_m‖` aimed at `prior` from every
/// DL-RRU.
pub fn conjugate_sensing_beams(layout: &NetworkLayout, prior: Position) -> Result<Vec<CVector>> {
    layout
        .dl_rrus
        .iter()
        .map(|rru| {
            let a = rru
                .array
                .steering_vector(rru.position.bearing_to(prior), layout.wavelength)?;
            let norm = a.norm();
            Ok(a.map(|z| z.conj() / norm))
        })
        .collect()
}

/// Unit-norm combiners from the stacked estimated UL channel matrix
/// (`M_ul·N × K_ul`).
pub fn uplink_combiners(g_hat: &CMatrix, mode: CombinerMode) -> Result<Vec<CVector>> {
    let v = match mode {
        CombinerMode::Zf => zero_forcing(g_hat, "uplink")?,
        CombinerMode::Mrc => {
            let mut v = g_hat.clone();
            for mut col in v.column_iter_mut() {
                let norm = col.norm();
                if !(norm > 0.0) {
                    return Err(Error::InvalidArgument("zero uplink channel in MRC".into()));
                }
                col.unscale_mut(norm);
            }
            v
        }
    };
    Ok(v.column_iter().map(|c| c.into_owned()).collect())
}

/// Splits a stacked beam matrix into per-RRU blocks `[m][i]`.
pub fn split_blocks(stacked: &CMatrix, n: usize) -> Vec<Vec<CVector>> {
    let m_count = stacked.nrows() / n;
    (0..m_count)
        .map(|m| {
            stacked
                .column_iter()
                .map(|col| col.rows(m * n, n).into_owned())
                .collect()
        })
        .collect()
}

/// All beams of one realization, computed from the estimated channels.
pub fn compute_beams(
    layout: &NetworkLayout,
    channels: &ChannelSet,
    policy: &BeamPolicy,
) -> Result<BeamSet> {
    let n = channels.n_antennas;
    let w = zf_data_beams(&channels.dl_matrix(Part::Estimate))?;
    let w_s = conjugate_sensing_beams(layout, layout.target + policy.prior_offset)?;
    let v = uplink_combiners(&channels.ul_matrix(Part::Estimate), policy.combiner)?;
    Ok(BeamSet {
        w_c: split_blocks(&w, n),
        w_s,
        v,
    })
}
