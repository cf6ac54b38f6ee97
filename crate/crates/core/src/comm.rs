//! Downlink/uplink SINRs, ergodic rates and the communication objective.
//!
//! The SINRs depend on the channels and beams only through a handful of
//! inner products. [`LinkGains`] precomputes them once per realization, so
//! evaluating an allocation costs `O(K²·M)` instead of `O(M²N²)`; this is
//! what makes population-based optimization over a fixed bank of
//! realizations affordable.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{compute_beams, BeamNorms, BeamPolicy, BeamSet};
use crate::channel::{draw_realization, CVector, ChannelSet, FadingParams, Part};
use crate::error::{Error, Result};
use crate::geometry::NetworkLayout;
use crate::units::trial_seed;

/// Data power factors `alpha[m][i]`, pilot power factors `beta[m]`, the
/// per-RRU power budget and the UL user transmit powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub p_max: f64,
    pub p_ul: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(m_dl: usize, k_dl: usize, p_max: f64, p_ul: Vec<f64>) -> Self {
        PowerAllocation {
            alpha: vec![vec![0.0; k_dl]; m_dl],
            beta: vec![0.0; m_dl],
            p_max,
            p_ul,
        }
    }

    pub fn m_dl(&self) -> usize {
        self.beta.len()
    }

    pub fn k_dl(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    /// Left-hand side of the per-RRU power constraint,
    /// `Σ_i α_{m,i}‖w_{i,m}‖² + β_m‖w_s,m‖²`, for every DL-RRU.
    pub fn loads(&self, norms: &BeamNorms) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .enumerate()
            .map(|(m, (row, &b))| {
                let data: f64 = row.iter().zip(&norms.data[m]).map(|(a, w)| a * w).sum();
                data + b * norms.pilot[m]
            })
            .collect()
    }

    pub fn check_feasible(&self, norms: &BeamNorms, tol: f64) -> Result<()> {
        self.validate()?;
        for (rru, load) in self.loads(norms).into_iter().enumerate() {
            if load > 1.0 + tol {
                return Err(Error::Infeasible { rru, load });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "p_max must be positive, got {}",
                self.p_max
            )));
        }
        if self.alpha.len() != self.beta.len() {
            return Err(Error::InvalidArgument(
                "alpha and beta disagree on the DL-RRU count".into(),
            ));
        }
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !self
            .alpha
            .iter()
            .flatten()
            .chain(&self.beta)
            .copied()
            .all(ok)
        {
            return Err(Error::InvalidArgument(
                "power factors must be finite and non-negative".into(),
            ));
        }
        if !self.p_ul.iter().copied().all(ok) {
            return Err(Error::InvalidArgument(
                "uplink powers must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Total data power factor of each DL-RRU, `α_m = Σ_i α_{m,i}`.
    pub fn data_factor(&self, m: usize) -> f64 {
        self.alpha[m].iter().sum()
    }
}

/// How the desired and inter-user terms of the DL SINR combine the DL-RRUs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumeratorForm {
    /// `Σ_m p α_{m,i} |g_lᴴ w_i|²`, summing per-RRU powers of the stacked
    /// effective channel.
    #[default]
    Printed,
    /// `|Σ_m √(p α_{m,i}) g_{l,m}ᴴ w_{i,m}|²`, coherent joint transmission.
    Coherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateWeights {
    pub omega_d: f64,
    pub omega_u: f64,
}

impl Default for RateWeights {
    fn default() -> Self {
        RateWeights {
            omega_d: 1.0,
            omega_u: 1.0,
        }
    }
}

/// Allocation-independent inner products of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkGains {
    /// `[l][i][m]`: `g_{l,m}ᴴ w_{i,m}` with the true DL channel.
    pub mu_c: Vec<Vec<Vec<Complex64>>>,
    /// `[l][k]`: `|g_t,l,k|²`.
    pub g_t_sq: Vec<Vec<f64>>,
    /// `[l][m]`: `|g̃_{l,m}ᴴ w_s,m|²`, the pilot left after separation.
    pub pilot_residual_dl: Vec<Vec<f64>>,
    /// `[k][i]`: `|v_kᴴ g_i|²` with the stacked UL channel.
    pub ul_sq: Vec<Vec<f64>>,
    /// `[k][l][m]`: `v_kᴴ G̃_{I,m} w_{l,m}`, DL-to-UL interference left
    /// after regeneration and cancellation.
    pub dl_to_ul: Vec<Vec<Vec<Complex64>>>,
    /// `[k][m]`: `|v_kᴴ G̃_{I,m} w_s,m|²`.
    pub pilot_residual_ul: Vec<Vec<f64>>,
    /// `[k]`: `‖v_k‖²`.
    pub v_norm_sq: Vec<f64>,
}

impl LinkGains {
    pub fn compute(channels: &ChannelSet, beams: &BeamSet) -> Self {
        let (m_dl, m_ul, k_dl, k_ul) = (
            channels.m_dl(),
            channels.m_ul(),
            channels.k_dl(),
            channels.k_ul(),
        );
        let n = channels.n_antennas;
        let mu_c = (0..k_dl)
            .map(|l| {
                (0..k_dl)
                    .map(|i| {
                        (0..m_dl)
                            .map(|m| channels.g_dl[m][l].truth.dotc(&beams.w_c[m][i]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let g_t_sq = channels
            .g_t
            .iter()
            .map(|row| row.iter().map(|g| g.truth.norm_sqr()).collect())
            .collect();
        let pilot_residual_dl = (0..k_dl)
            .map(|l| {
                (0..m_dl)
                    .map(|m| channels.g_dl[m][l].error.dotc(&beams.w_s[m]).norm_sqr())
                    .collect()
            })
            .collect();
        let g_ul: Vec<CVector> = (0..k_ul)
            .map(|k| channels.stacked_ul(k, Part::Truth))
            .collect();
        let ul_sq = beams
            .v
            .iter()
            .map(|vk| g_ul.iter().map(|g| vk.dotc(g).norm_sqr()).collect())
            .collect();
        // G̃_{I,m} x stacked over UL-RRUs, for x = w_{l,m} and x = w_s,m.
        let leak = |m: usize, x: &CVector| -> CVector {
            let mut out = CVector::zeros(m_ul * n);
            for i in 0..m_ul {
                out.rows_mut(i * n, n)
                    .copy_from(&(&channels.g_i[i][m].error * x));
            }
            out
        };
        let data_leak: Vec<Vec<CVector>> = (0..k_dl)
            .map(|l| (0..m_dl).map(|m| leak(m, &beams.w_c[m][l])).collect())
            .collect();
        let pilot_leak: Vec<CVector> = (0..m_dl).map(|m| leak(m, &beams.w_s[m])).collect();
        let dl_to_ul = beams
            .v
            .iter()
            .map(|vk| {
                data_leak
                    .iter()
                    .map(|row| row.iter().map(|f| vk.dotc(f)).collect())
                    .collect()
            })
            .collect();
        let pilot_residual_ul = beams
            .v
            .iter()
            .map(|vk| pilot_leak.iter().map(|f| vk.dotc(f).norm_sqr()).collect())
            .collect();
        let v_norm_sq = beams.v.iter().map(|v| v.norm_squared()).collect();
        LinkGains {
            mu_c,
            g_t_sq,
            pilot_residual_dl,
            ul_sq,
            dl_to_ul,
            pilot_residual_ul,
            v_norm_sq,
        }
    }

    pub fn k_dl(&self) -> usize {
        self.mu_c.len()
    }

    pub fn k_ul(&self) -> usize {
        self.ul_sq.len()
    }

    /// Received power of user `i`'s stream at DL user `l`.
    fn dl_stream_power(
        &self,
        alloc: &PowerAllocation,
        l: usize,
        i: usize,
        form: NumeratorForm,
    ) -> f64 {
        let mu = &self.mu_c[l][i];
        let p = alloc.p_max;
        match form {
            NumeratorForm::Printed => {
                let stacked: Complex64 = mu.iter().sum();
                let alpha_sum: f64 = alloc.alpha.iter().map(|row| row[i]).sum();
                p * alpha_sum * stacked.norm_sqr()
            }
            NumeratorForm::Coherent => mu
                .iter()
                .zip(&alloc.alpha)
                .map(|(z, row)| z * (p * row[i]).sqrt())
                .sum::<Complex64>()
                .norm_sqr(),
        }
    }

    /// Desired power and interference-plus-noise of DL user `l`.
    pub fn downlink_terms(
        &self,
        alloc: &PowerAllocation,
        fading: &FadingParams,
        l: usize,
        form: NumeratorForm,
    ) -> SinrTerms {
        let desired = self.dl_stream_power(alloc, l, l, form);
        let inter_user: f64 = (0..self.k_dl())
            .filter(|&i| i != l)
            .map(|i| self.dl_stream_power(alloc, l, i, form))
            .sum();
        let uplink_users: f64 = self.g_t_sq[l]
            .iter()
            .zip(&alloc.p_ul)
            .map(|(g, p)| p * g)
            .sum();
        let pilot: f64 = self.pilot_residual_dl[l]
            .iter()
            .zip(&alloc.beta)
            .map(|(r, b)| alloc.p_max * b * r)
            .sum();
        SinrTerms {
            desired,
            interference: inter_user + uplink_users,
            residual: pilot,
            noise: fading.sigma2_dl,
        }
    }

    /// Desired power and interference-plus-noise of UL user `k`.
    pub fn uplink_terms(
        &self,
        alloc: &PowerAllocation,
        fading: &FadingParams,
        k: usize,
    ) -> SinrTerms {
        let desired = alloc.p_ul[k] * self.ul_sq[k][k];
        let inter_user: f64 = (0..self.k_ul())
            .filter(|&i| i != k)
            .map(|i| alloc.p_ul[i] * self.ul_sq[k][i])
            .sum();
        let p = alloc.p_max;
        let dl_to_ul: f64 = self.dl_to_ul[k]
            .iter()
            .enumerate()
            .map(|(l, per_m)| {
                per_m
                    .iter()
                    .zip(&alloc.alpha)
                    .map(|(z, row)| z * (p * row[l]).sqrt())
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum();
        let pilot: f64 = self.pilot_residual_ul[k]
            .iter()
            .zip(&alloc.beta)
            .map(|(r, b)| p * b * r)
            .sum();
        SinrTerms {
            desired,
            interference: inter_user,
            residual: dl_to_ul + pilot,
            noise: fading.sigma2_ul * self.v_norm_sq[k],
        }
    }

    pub fn downlink_sinr(
        &self,
        alloc: &PowerAllocation,
        fading: &FadingParams,
        l: usize,
        form: NumeratorForm,
    ) -> f64 {
        self.downlink_terms(alloc, fading, l, form).sinr()
    }

    pub fn uplink_sinr(&self, alloc: &PowerAllocation, fading: &FadingParams, k: usize) -> f64 {
        self.uplink_terms(alloc, fading, k).sinr()
    }

    /// Instantaneous `log2(1 + γ)` of every DL and UL user.
    pub fn spectral_efficiencies(
        &self,
        alloc: &PowerAllocation,
        fading: &FadingParams,
        form: NumeratorForm,
    ) -> (Vec<f64>, Vec<f64>) {
        let dl = (0..self.k_dl())
            .map(|l| (1.0 + self.downlink_sinr(alloc, fading, l, form)).log2())
            .collect();
        let ul = (0..self.k_ul())
            .map(|k| (1.0 + self.uplink_sinr(alloc, fading, k)).log2())
            .collect();
        (dl, ul)
    }
}

/// SINR decomposition: `desired / (interference + residual + noise)`.
/// `residual` collects the terms caused by estimation error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrTerms {
    pub desired: f64,
    pub interference: f64,
    pub residual: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        self.desired / (self.interference + self.residual + self.noise)
    }
}

/// SINR of DL user `l` on one realization.
pub fn downlink_sinr(
    channels: &ChannelSet,
    beams: &BeamSet,
    alloc: &PowerAllocation,
    fading: &FadingParams,
    l: usize,
    form: NumeratorForm,
) -> f64 {
    LinkGains::compute(channels, beams).downlink_sinr(alloc, fading, l, form)
}

/// SINR of UL user `k` on one realization.
pub fn uplink_sinr(
    channels: &ChannelSet,
    beams: &BeamSet,
    alloc: &PowerAllocation,
    fading: &FadingParams,
    k: usize,
) -> f64 {
    LinkGains::compute(channels, beams).uplink_sinr(alloc, fading, k)
}

/// Monte Carlo rate estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_dl: Vec<f64>,
    pub r_ul: Vec<f64>,
    pub f1: f64,
    pub trials: usize,
    /// Standard error of `f1` (zero for a single trial).
    pub std_err: f64,
}

impl RateReport {
    /// Builds the report from per-trial `(dl, ul)` spectral efficiencies.
    /// Sums run in trial order, so results do not depend on how the trials
    /// were scheduled.
    pub fn from_trials(per_trial: &[(Vec<f64>, Vec<f64>)], weights: RateWeights) -> Self {
        let trials = per_trial.len();
        let (k_dl, k_ul) = per_trial
            .first()
            .map_or((0, 0), |(d, u)| (d.len(), u.len()));
        let mut r_dl = vec![0.0; k_dl];
        let mut r_ul = vec![0.0; k_ul];
        let mut f1_samples = Vec::with_capacity(trials);
        for (dl, ul) in per_trial {
            r_dl.iter_mut().zip(dl).for_each(|(a, x)| *a += x);
            r_ul.iter_mut().zip(ul).for_each(|(a, x)| *a += x);
            f1_samples.push(
                weights.omega_d * dl.iter().sum::<f64>() + weights.omega_u * ul.iter().sum::<f64>(),
            );
        }
        let t = trials.max(1) as f64;
        r_dl.iter_mut().chain(r_ul.iter_mut()).for_each(|a| *a /= t);
        let f1 =
            weights.omega_d * r_dl.iter().sum::<f64>() + weights.omega_u * r_ul.iter().sum::<f64>();
        let std_err = if trials > 1 {
            let mean = f1_samples.iter().sum::<f64>() / t;
            let var = f1_samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
            (var / t).sqrt()
        } else {
            0.0
        };
        RateReport {
            r_dl,
            r_ul,
            f1,
            trials,
            std_err,
        }
    }

    pub fn sum_dl(&self) -> f64 {
        self.r_dl.iter().sum()
    }

    pub fn sum_ul(&self) -> f64 {
        self.r_ul.iter().sum()
    }

    pub fn csv_header(k_dl: usize, k_ul: usize) -> Vec<String> {
        let mut h = vec!["trials".to_string()];
        h.extend((0..k_dl).map(|l| format!("r_dl_{l}")));
        h.extend((0..k_ul).map(|k| format!("r_ul_{k}")));
        h.extend(["f1".to_string(), "std_err".to_string()]);
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![self.trials.to_string()];
        row.extend(self.r_dl.iter().chain(&self.r_ul).map(|x| x.to_string()));
        row.extend([self.f1.to_string(), self.std_err.to_string()]);
        row
    }
}

/// Settings shared by every rate evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommSettings {
    pub form: NumeratorForm,
    pub weights: RateWeights,
}

/// A fixed bank of channel realizations with their beams, used as common
/// random numbers: every allocation is scored on the same draws.
#[derive(Clone, Debug)]
pub struct RealizationBank {
    pub gains: Vec<LinkGains>,
    /// Beam norms averaged over the bank; the power constraint is enforced
    /// on these (average transmit power per RRU).
    pub norms: BeamNorms,
    pub fading: FadingParams,
    pub seed: u64,
}

impl RealizationBank {
    /// Draws `trials` realizations; trial `t` uses `trial_seed(seed, t)`.
    pub fn draw(
        layout: &NetworkLayout,
        fading: &FadingParams,
        policy: &BeamPolicy,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidArgument(
                "at least one Monte Carlo trial is required".into(),
            ));
        }
        let per_trial: Vec<(LinkGains, BeamNorms)> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let channels = draw_realization(layout, fading, trial_seed(seed, t))?;
                let beams = compute_beams(layout, &channels, policy)?;
                Ok((LinkGains::compute(&channels, &beams), beams.norms()))
            })
            .collect::<Result<_>>()?;
        let norms = BeamNorms::mean(per_trial.iter().map(|(_, n)| n)).expect("trials > 0");
        Ok(RealizationBank {
            gains: per_trial.into_iter().map(|(g, _)| g).collect(),
            norms,
            fading: *fading,
            seed,
        })
    }

    pub fn trials(&self) -> usize {
        self.gains.len()
    }

    pub fn rates(&self, alloc: &PowerAllocation, settings: &CommSettings) -> RateReport {
        let per_trial: Vec<_> = self
            .gains
            .iter()
            .map(|g| g.spectral_efficiencies(alloc, &self.fading, settings.form))
            .collect();
        RateReport::from_trials(&per_trial, settings.weights)
    }
}

/// Ergodic rates `E[log2(1 + γ)]`: channels, estimation errors and beams
/// are redrawn for each of `trials` realizations.
#[allow(clippy::too_many_arguments)]
pub fn ergodic_rates(
    layout: &NetworkLayout,
    fading: &FadingParams,
    policy: &BeamPolicy,
    alloc: &PowerAllocation,
    settings: &CommSettings,
    trials: usize,
    seed: u64,
) -> Result<RateReport> {
    alloc.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one Monte Carlo trial is required".into(),
        ));
    }
    let per_trial: Vec<(Vec<f64>, Vec<f64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let channels = draw_realization(layout, fading, trial_seed(seed, t))?;
            let beams = compute_beams(layout, &channels, policy)?;
            Ok(LinkGains::compute(&channels, &beams).spectral_efficiencies(
                alloc,
                fading,
                settings.form,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(RateReport::from_trials(&per_trial, settings.weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{split_blocks, zf_data_beams, CombinerMode};
    use crate::channel::{draw_channels, split_estimate_error};
    use crate::geometry::{make_circle_deployment, ArraySpec, Position};
    use crate::units::wavelength;
    use approx::assert_relative_eq;

    fn layout(n: usize) -> NetworkLayout {
        make_circle_deployment(8, 60.0, 2, 3, 80.0, ArraySpec::new(n, wavelength(3.5e9)), 4)
            .unwrap()
    }

    fn uniform_alloc(m_dl: usize, k_dl: usize, a: f64, b: f64, k_ul: usize) -> PowerAllocation {
        PowerAllocation {
            alpha: vec![vec![a; k_dl]; m_dl],
            beta: vec![b; m_dl],
            p_max: 1.0,
            p_ul: vec![0.2; k_ul],
        }
    }

    fn realization(
        layout: &NetworkLayout,
        fading: &FadingParams,
        seed: u64,
    ) -> (ChannelSet, BeamSet) {
        let ch = draw_realization(layout, fading, seed).unwrap();
        let beams = compute_beams(layout, &ch, &BeamPolicy::default()).unwrap();
        (ch, beams)
    }

    #[test]
    fn silent_network_has_zero_sinr() {
        let l = layout(4);
        let f = FadingParams::default();
        let (ch, beams) = realization(&l, &f, 1);
        let mut alloc = uniform_alloc(4, 3, 0.0, 0.0, 2);
        alloc.p_ul = vec![0.0; 2];
        for u in 0..3 {
            assert_eq!(
                downlink_sinr(&ch, &beams, &alloc, &f, u, NumeratorForm::Printed),
                0.0
            );
        }
        for k in 0..2 {
            assert_eq!(uplink_sinr(&ch, &beams, &alloc, &f, k), 0.0);
        }
    }

    #[test]
    fn single_user_matched_filter_snr() {
        let mut l =
            make_circle_deployment(2, 30.0, 0, 1, 40.0, ArraySpec::new(4, 0.0857), 3).unwrap();
        l.ul_users.clear();
        let f = FadingParams {
            sigma2_sp_dl: 0.0,
            sigma2_sp_ul: 0.0,
            ..FadingParams::default()
        };
        let ch = draw_channels(&l, &f, 8).unwrap();
        let beams = compute_beams(&l, &ch, &BeamPolicy::default()).unwrap();
        let alloc = PowerAllocation {
            alpha: vec![vec![0.7]],
            beta: vec![0.0],
            p_max: 1.0,
            p_ul: vec![],
        };
        let g = &ch.g_dl[0][0].truth;
        let expected = 0.7 * g.norm_squared() / f.sigma2_dl;
        for form in [NumeratorForm::Printed, NumeratorForm::Coherent] {
            let got = downlink_sinr(&ch, &beams, &alloc, &f, 0, form);
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn perfect_cancellation_uplink_snr() {
        let mut l =
            make_circle_deployment(4, 30.0, 1, 2, 40.0, ArraySpec::new(4, 0.0857), 3).unwrap();
        l.ul_users.truncate(1);
        let f = FadingParams {
            sigma2_sp_ul: 0.0,
            ..FadingParams::default()
        };
        let (ch, beams) = realization(&l, &f, 2);
        let alloc = uniform_alloc(2, 2, 0.4, 0.3, 1);
        let g = ch.stacked_ul(0, Part::Truth);
        let expected = 0.2 * beams.v[0].dotc(&g).norm_sqr() / f.sigma2_ul;
        assert_relative_eq!(
            uplink_sinr(&ch, &beams, &alloc, &f, 0),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_uplink_power_zero_sinr() {
        let l = layout(4);
        let f = FadingParams::default();
        let (ch, beams) = realization(&l, &f, 3);
        let mut alloc = uniform_alloc(4, 3, 0.2, 0.2, 2);
        alloc.p_ul[1] = 0.0;
        assert_eq!(uplink_sinr(&ch, &beams, &alloc, &f, 1), 0.0);
        assert!(uplink_sinr(&ch, &beams, &alloc, &f, 0) > 0.0);
    }

    #[test]
    fn sinr_invariant_to_global_phase() {
        let l = layout(4);
        let f = FadingParams::default();
        let (ch, beams) = realization(&l, &f, 5);
        let alloc = uniform_alloc(4, 3, 0.2, 0.2, 2);
        let rot = Complex64::from_polar(1.0, 1.234);
        let mut ch2 = ch.clone();
        for row in ch2.g_dl.iter_mut() {
            let link = &mut row[1];
            link.truth *= rot;
            link.estimate *= rot;
            link.error *= rot;
        }
        let beams2 = compute_beams(&l, &ch2, &BeamPolicy::default()).unwrap();
        for u in 0..3 {
            let a = downlink_sinr(&ch, &beams, &alloc, &f, u, NumeratorForm::Printed);
            let b = downlink_sinr(&ch2, &beams2, &alloc, &f, u, NumeratorForm::Printed);
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn numerator_increases_in_alpha() {
        let l = layout(4);
        let f = FadingParams::default();
        let (ch, beams) = realization(&l, &f, 6);
        let gains = LinkGains::compute(&ch, &beams);
        let mut alloc = uniform_alloc(4, 3, 0.1, 0.2, 2);
        let mut prev = 0.0;
        for step in 0..5 {
            alloc.alpha[2][1] = 0.1 + 0.2 * step as f64;
            let t = gains.downlink_terms(&alloc, &f, 1, NumeratorForm::Printed);
            assert!(t.desired > prev);
            prev = t.desired;
        }
    }

    #[test]
    fn perfect_csi_residuals_vanish() {
        let l = layout(4);
        let f = FadingParams {
            sigma2_sp_dl: 0.0,
            sigma2_sp_ul: 0.0,
            ..FadingParams::default()
        };
        let (ch, beams) = realization(&l, &f, 7);
        let gains = LinkGains::compute(&ch, &beams);
        let alloc = uniform_alloc(4, 3, 0.25, 0.25, 2);
        for u in 0..3 {
            let t = gains.downlink_terms(&alloc, &f, u, NumeratorForm::Coherent);
            assert_eq!(t.residual, 0.0);
        }
        for k in 0..2 {
            let t = gains.uplink_terms(&alloc, &f, k);
            assert_eq!(t.residual, 0.0);
            assert!(t.interference < 1e-10 * t.desired);
        }
    }

    #[test]
    fn mrc_and_zf_match_for_one_user() {
        let mut l = layout(4);
        l.ul_users.truncate(1);
        let f = FadingParams::default();
        let ch = draw_realization(&l, &f, 9).unwrap();
        let alloc = uniform_alloc(4, 3, 0.2, 0.2, 1);
        let zf = compute_beams(&l, &ch, &BeamPolicy::default()).unwrap();
        let mrc = compute_beams(
            &l,
            &ch,
            &BeamPolicy {
                combiner: CombinerMode::Mrc,
                prior_offset: Position::ORIGIN,
            },
        )
        .unwrap();
        assert_relative_eq!(
            uplink_sinr(&ch, &zf, &alloc, &f, 0),
            uplink_sinr(&ch, &mrc, &alloc, &f, 0),
            max_relative = 1e-10
        );
    }

    #[test]
    fn deterministic_unit_sinr_gives_one_bit() {
        let per_trial = vec![(vec![1.0f64.ln_1p() / 2f64.ln()], vec![]); 7];
        let r = RateReport::from_trials(&per_trial, RateWeights::default());
        assert_eq!(r.r_dl[0], 1.0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.std_err, 0.0);
    }

    #[test]
    fn weight_masking() {
        let per_trial = vec![(vec![0.5, 1.5], vec![2.0]), (vec![1.0, 1.0], vec![4.0])];
        let r = RateReport::from_trials(
            &per_trial,
            RateWeights {
                omega_d: 1.0,
                omega_u: 0.0,
            },
        );
        assert_relative_eq!(r.f1, r.sum_dl(), max_relative = 1e-15);
        assert_relative_eq!(r.sum_ul(), 3.0);
    }

    #[test]
    fn f1_monotone_in_weights() {
        let per_trial = vec![(vec![0.5, 1.5], vec![2.0]), (vec![1.0, 0.1], vec![0.3])];
        let mut prev = -1.0;
        for w in [0.0, 0.5, 1.0, 2.0] {
            let r = RateReport::from_trials(
                &per_trial,
                RateWeights {
                    omega_d: w,
                    omega_u: 1.0,
                },
            );
            assert!(r.f1 >= prev);
            prev = r.f1;
        }
    }

    #[test]
    fn bank_matches_direct_ergodic_rates() {
        let l = layout(4);
        let f = FadingParams::default();
        let policy = BeamPolicy::default();
        let alloc = uniform_alloc(4, 3, 0.2, 0.2, 2);
        let settings = CommSettings::default();
        let direct = ergodic_rates(&l, &f, &policy, &alloc, &settings, 16, 99).unwrap();
        let bank = RealizationBank::draw(&l, &f, &policy, 16, 99).unwrap();
        assert_eq!(direct, bank.rates(&alloc, &settings));
    }

    #[test]
    fn manual_split_matches_blocks() {
        let l = layout(2);
        let f = FadingParams::default();
        let truth = draw_channels(&l, &f, 1).unwrap();
        let ch = split_estimate_error(&truth, &f, 1);
        let w = zf_data_beams(&ch.dl_matrix(Part::Estimate)).unwrap();
        let blocks = split_blocks(&w, 2);
        assert_eq!(blocks.len(), 4);
        assert_eq!(blocks[3][2][1], w[(7, 2)]);
    }
}
