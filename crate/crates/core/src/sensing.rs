//! Bistatic radar echo model and Cramér-Rao bounds of the target parameters
//! `(d_nm, θ_n, φ_m)` observed at each UL-RRU.
//!
//! The per-parameter bounds follow the closed forms
//!
//! ```text
//! 1/σ²_d,n = Σ_m p β_m π² (Δf/c)² |η_nm|² N² ‖w_s,m‖² / σ²_n
//! 1/σ²_θ,n = Σ_m p β_m 4π² |η_nm|² N (B_n - A_n²/N) ‖w_s,m‖² / (λ² σ²_n)
//! 1/σ²_φ,n = Σ_m p β_m 4π² |η_nm|² N (B_m - A_m²/N) ‖w_s,m‖² / (λ² σ²_n)
//! ```
//!
//! and are the values reported everywhere. [`numeric_fim_oracle`]
//! assembles the Fisher information of the virtual-array echo by central
//! differences and serves as an independent check of those forms.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::CVector;
use crate::comm::PowerAllocation;
use crate::error::{Error, Result};
use crate::geometry::{bistatic_geometry, BistaticGeometry, NetworkLayout};
use crate::units::{dbm_to_watts, wavelength, SPEED_OF_LIGHT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    pub g_t: f64,
    pub g_r: f64,
    /// Radar cross-section (m²).
    pub rcs: f64,
    /// Bandwidth (Hz).
    pub delta_f: f64,
    /// Sensing noise power per UL-RRU (W).
    pub sigma2_n: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        RadarParams {
            g_t: 1.0,
            g_r: 1.0,
            rcs: 1.0,
            delta_f: 1e6,
            sigma2_n: dbm_to_watts(-105.0),
            wavelength: wavelength(3.5e9),
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g_t", self.g_t),
            ("g_r", self.g_r),
            ("rcs", self.rcs),
            ("delta_f", self.delta_f),
            ("sigma2_n", self.sigma2_n),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "radar parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn range_phase_slope(&self) -> f64 {
        2.0 * PI * self.delta_f / SPEED_OF_LIGHT
    }
}

/// Echo amplitude `λ²G_tG_rσ/((4π)³d_n²d_m²) · e^{-j2π(Δf/c)d_nm}` of a
/// static target.
pub fn complex_amplitude(geom: &BistaticGeometry, radar: &RadarParams) -> Complex64 {
    Complex64::from_polar(
        amplitude_magnitude(geom, radar),
        -radar.range_phase_slope() * geom.d_nm,
    )
}

fn amplitude_magnitude(geom: &BistaticGeometry, radar: &RadarParams) -> f64 {
    radar.wavelength.powi(2) * radar.g_t * radar.g_r * radar.rcs
        / ((4.0 * PI).powi(3) * geom.d_n.powi(2) * geom.d_m.powi(2))
}

/// A variance bound, or the flag that the parameter is unobservable (zero
/// Fisher information).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Finite(f64),
    Unobservable,
}

impl Bound {
    pub fn from_information(info: f64) -> Bound {
        if info > 0.0 && info.is_finite() {
            Bound::Finite(1.0 / info)
        } else {
            Bound::Unobservable
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unobservable => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    /// The variance, with `+∞` for unobservable parameters.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    fn mean(values: impl IntoIterator<Item = Bound>) -> Bound {
        let mut sum = 0.0;
        let mut count = 0usize;
        for b in values {
            match b {
                Bound::Finite(v) => sum += v,
                Bound::Unobservable => return Bound::Unobservable,
            }
            count += 1;
        }
        if count == 0 {
            Bound::Unobservable
        } else {
            Bound::Finite(sum / count as f64)
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Unobservable => f.write_str("inf"),
        }
    }
}

/// Fisher information contributed by DL-RRU `m` to the three parameters
/// at one UL-RRU.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InformationTerms {
    pub range: f64,
    pub doa: f64,
    pub dod: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrlbTerms {
    pub sigma2_d: Bound,
    pub sigma2_theta: Bound,
    pub sigma2_phi: Bound,
}

fn check_sensing_inputs(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    sensing_beams: &[CVector],
) -> Result<()> {
    if alloc.m_dl() != layout.m_dl() || sensing_beams.len() != layout.m_dl() {
        return Err(Error::InvalidArgument(format!(
            "expected {} DL-RRU pilot factors and sensing beams, got {} and {}",
            layout.m_dl(),
            alloc.m_dl(),
            sensing_beams.len()
        )));
    }
    Ok(())
}

/// Per-DL-RRU information terms of the closed-form bounds at UL-RRU `n`.
pub fn information_terms(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    sensing_beams: &[CVector],
    n: usize,
) -> Result<Vec<InformationTerms>> {
    check_sensing_inputs(layout, alloc, sensing_beams)?;
    let n_ant = layout.n_antennas() as f64;
    let lambda2 = radar.wavelength.powi(2);
    let slope2 = (radar.delta_f / SPEED_OF_LIGHT).powi(2);
    (0..layout.m_dl())
        .map(|m| {
            let geom = bistatic_geometry(layout, m, n)?;
            let eta2 = amplitude_magnitude(&geom, radar).powi(2);
            let power = alloc.p_max * alloc.beta[m] * eta2 * sensing_beams[m].norm_squared()
                / radar.sigma2_n;
            let (a_n, b_n) = layout.ul_rrus[n].array.aperture_moments(geom.doa_theta);
            let (a_m, b_m) = layout.dl_rrus[m].array.aperture_moments(geom.dod_phi);
            let spread = |a: f64, b: f64| (b - a * a / n_ant).max(0.0);
            Ok(InformationTerms {
                range: power * PI * PI * slope2 * n_ant * n_ant,
                doa: power * 4.0 * PI * PI * n_ant * spread(a_n, b_n) / lambda2,
                dod: power * 4.0 * PI * PI * n_ant * spread(a_m, b_m) / lambda2,
            })
        })
        .collect()
}

/// Closed-form CRLBs of `(d_nm, θ_n, φ_m)` at UL-RRU `n`. Zero total
/// information (no pilot power, or a single antenna for the angles) is
/// reported as [`Bound::Unobservable`].
pub fn crlb_variances(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    sensing_beams: &[CVector],
    n: usize,
) -> Result<CrlbTerms> {
    let terms = information_terms(layout, alloc, radar, sensing_beams, n)?;
    let total = terms
        .iter()
        .fold(InformationTerms::default(), |acc, t| InformationTerms {
            range: acc.range + t.range,
            doa: acc.doa + t.doa,
            dod: acc.dod + t.dod,
        });
    Ok(CrlbTerms {
        sigma2_d: Bound::from_information(total.range),
        sigma2_theta: Bound::from_information(total.doa),
        sigma2_phi: Bound::from_information(total.dod),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingWeights {
    pub omega_sp: f64,
    pub omega_so: f64,
}

impl Default for SensingWeights {
    fn default() -> Self {
        SensingWeights {
            omega_sp: 1.0,
            omega_so: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub sigma2_d: Vec<Bound>,
    pub sigma2_theta: Vec<Bound>,
    pub sigma2_phi: Vec<Bound>,
    /// Squared position error bound: mean range bound over UL-RRUs (m²).
    pub speb: Bound,
    /// Squared orientation error bound: mean of `σ²_θ + σ²_φ` (rad²).
    pub soeb: Bound,
    /// `1/(ω_sp·SPEB + ω_so·SOEB)`, zero when a weighted term is unobservable.
    pub f2: f64,
}

impl SensingReport {
    pub fn observable(&self) -> bool {
        self.f2 > 0.0
    }

    pub fn csv_header() -> Vec<String> {
        [
            "n",
            "sigma2_d",
            "sigma2_theta",
            "sigma2_phi",
            "speb",
            "soeb",
            "f2",
        ]
        .map(String::from)
        .to_vec()
    }

    /// One row per UL-RRU; the aggregate columns repeat on every row.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.sigma2_d.len())
            .map(|n| {
                vec![
                    n.to_string(),
                    self.sigma2_d[n].to_string(),
                    self.sigma2_theta[n].to_string(),
                    self.sigma2_phi[n].to_string(),
                    self.speb.to_string(),
                    self.soeb.to_string(),
                    self.f2.to_string(),
                ]
            })
            .collect()
    }
}

/// Averages per-UL-RRU bounds into SPEB/SOEB and forms the sensing
/// objective. A zero weight masks its term entirely.
pub fn aggregate_errors(per_n: &[CrlbTerms], weights: SensingWeights) -> Result<SensingReport> {
    if per_n.is_empty() {
        return Err(Error::InvalidArgument("need at least one UL-RRU".into()));
    }
    let speb = Bound::mean(per_n.iter().map(|t| t.sigma2_d));
    let soeb = Bound::mean(per_n.iter().map(|t| match (t.sigma2_theta, t.sigma2_phi) {
        (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a + b),
        _ => Bound::Unobservable,
    }));
    let weighted = |w: f64, b: Bound| -> Option<f64> {
        if w == 0.0 {
            Some(0.0)
        } else {
            b.finite().map(|v| w * v)
        }
    };
    let f2 = match (
        weighted(weights.omega_sp, speb),
        weighted(weights.omega_so, soeb),
    ) {
        (Some(a), Some(b)) if a + b > 0.0 => 1.0 / (a + b),
        _ => 0.0,
    };
    Ok(SensingReport {
        sigma2_d: per_n.iter().map(|t| t.sigma2_d).collect(),
        sigma2_theta: per_n.iter().map(|t| t.sigma2_theta).collect(),
        sigma2_phi: per_n.iter().map(|t| t.sigma2_phi).collect(),
        speb,
        soeb,
        f2,
    })
}

/// Closed-form bounds at every UL-RRU, aggregated.
pub fn evaluate_sensing(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    sensing_beams: &[CVector],
    weights: SensingWeights,
) -> Result<SensingReport> {
    radar.validate()?;
    let per_n = (0..layout.m_ul())
        .map(|n| crlb_variances(layout, alloc, radar, sensing_beams, n))
        .collect::<Result<Vec<_>>>()?;
    aggregate_errors(&per_n, weights)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdSteps {
    /// Range step (m).
    pub range: f64,
    /// Angle step (rad).
    pub angle: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            range: 0.1,
            angle: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FimEstimate {
    /// Fisher information of `(d, θ, φ)` at the requested steps.
    pub fim: Matrix3<f64>,
    /// Same with every step halved.
    pub fim_half_step: Matrix3<f64>,
    /// Largest relative change of a diagonal entry between the two step sizes.
    pub step_discrepancy: f64,
}

impl FimEstimate {
    pub fn inverse(&self) -> Option<Matrix3<f64>> {
        self.fim_half_step.try_inverse()
    }
}

/// Relative diagonal discrepancy above which the oracle warns that its
/// steps are outside the second-order regime.
pub const FD_WARN_THRESHOLD: f64 = 1e-3;

/// Echo of DL-RRU `m` at UL-RRU `n` on the virtual array, as a function of
/// `(d, θ, φ)`: `√(pβ_m)‖w_s,m‖ |η| e^{-j2π(Δf/c)d} (b(θ) ⊗ a(φ))`.
/// The amplitude magnitude is held at its true value.
struct EchoModel<'a> {
    layout: &'a NetworkLayout,
    radar: &'a RadarParams,
    m: usize,
    n: usize,
    scale: f64,
}

impl EchoModel<'_> {
    fn echo(&self, d: f64, theta: f64, phi: f64) -> Result<DVector<Complex64>> {
        let a = self.layout.dl_rrus[self.m]
            .array
            .steering_vector(phi, self.radar.wavelength)?;
        let b = self.layout.ul_rrus[self.n]
            .array
            .steering_vector(theta, self.radar.wavelength)?;
        let phase = Complex64::from_polar(self.scale, -self.radar.range_phase_slope() * d);
        Ok(b.kronecker(&a) * phase)
    }
}

/// Numeric Fisher information `J = (1/σ²_n) Σ_m Re[(∂r_m/∂γ)ᴴ(∂r_m/∂γ)]`
/// at UL-RRU `n`, by central differences in `γ = (d_nm, θ_n, φ_m)`.
pub fn numeric_fim_oracle(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    sensing_beams: &[CVector],
    n: usize,
    steps: FdSteps,
) -> Result<FimEstimate> {
    check_sensing_inputs(layout, alloc, sensing_beams)?;
    if !(steps.range > 0.0 && steps.angle > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference steps must be positive".into(),
        ));
    }
    let fim = assemble_fim(layout, alloc, radar, sensing_beams, n, steps)?;
    let half = FdSteps {
        range: steps.range / 2.0,
        angle: steps.angle / 2.0,
    };
    let fim_half_step = assemble_fim(layout, alloc, radar, sensing_beams, n, half)?;
    let step_discrepancy = (0..3)
        .filter(|&i| fim_half_step[(i, i)] != 0.0)
        .map(|i| ((fim[(i, i)] - fim_half_step[(i, i)]) / fim_half_step[(i, i)]).abs())
        .fold(0.0, f64::max);
    if step_discrepancy > FD_WARN_THRESHOLD {
        log::warn!(
            "FIM finite differences not converged at UL-RRU {n}: step {:?} gives diag {:?}, half step gives {:?}",
            steps,
            fim.diagonal(),
            fim_half_step.diagonal()
        );
    }
    Ok(FimEstimate {
        fim,
        fim_half_step,
        step_discrepancy,
    })
}

fn assemble_fim(
    layout: &NetworkLayout,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    sensing_beams: &[CVector],
    n: usize,
    steps: FdSteps,
) -> Result<Matrix3<f64>> {
    let mut fim = Matrix3::zeros();
    for m in 0..layout.m_dl() {
        let geom = bistatic_geometry(layout, m, n)?;
        let model = EchoModel {
            layout,
            radar,
            m,
            n,
            scale: (alloc.p_max * alloc.beta[m]).sqrt()
                * sensing_beams[m].norm()
                * amplitude_magnitude(&geom, radar),
        };
        let (d, t, p) = (geom.d_nm, geom.doa_theta, geom.dod_phi);
        let dd = (model.echo(d + steps.range, t, p)? - model.echo(d - steps.range, t, p)?)
            / Complex64::from(2.0 * steps.range);
        let dt = (model.echo(d, t + steps.angle, p)? - model.echo(d, t - steps.angle, p)?)
            / Complex64::from(2.0 * steps.angle);
        let dp = (model.echo(d, t, p + steps.angle)? - model.echo(d, t, p - steps.angle)?)
            / Complex64::from(2.0 * steps.angle);
        let grads = [dd, dt, dp];
        for i in 0..3 {
            for j in 0..3 {
                fim[(i, j)] += grads[i].dotc(&grads[j]).re / radar.sigma2_n;
            }
        }
    }
    Ok(fim)
}
