//! Experiment runners: contour maps, power sweeps, Pareto fronts and the
//! time-division baselines. Every runner scores allocations through a
//! [`Scenario`], which pairs a layout with a bank of channel realizations
//! shared by all candidates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{conjugate_sensing_beams, BeamNorms, BeamPolicy};
use crate::channel::{CVector, FadingParams};
use crate::comm::{CommSettings, PowerAllocation, RateReport, RealizationBank};
use crate::dqn::{train_dqn, DqnConfig, DqnReport};
use crate::error::{Error, Result};
use crate::geometry::{NetworkLayout, Position};
use crate::moo::{
    decode_genes, encode_allocation, evolve_nsga2, gene_loads, repair_genes, NsgaConfig,
    Objectives, ParetoFront, Problem,
};
use crate::sensing::{evaluate_sensing, Bound, RadarParams, SensingReport, SensingWeights};

/// Everything except the layout that defines an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub fading: FadingParams,
    pub radar: RadarParams,
    pub policy: BeamPolicy,
    pub comm: CommSettings,
    pub sensing_weights: SensingWeights,
    /// Per-RRU transmit budget (W).
    pub p_max: f64,
    /// Transmit power of every UL user (W).
    pub p_ul: f64,
    /// Monte Carlo realizations in the bank.
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            fading: FadingParams::default(),
            radar: RadarParams::default(),
            policy: BeamPolicy::default(),
            comm: CommSettings::default(),
            sensing_weights: SensingWeights::default(),
            p_max: 1.0,
            p_ul: 0.2,
            trials: 200,
            seed: 1,
        }
    }
}

/// A layout with its physics and a fixed realization bank.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub layout: NetworkLayout,
    pub params: ScenarioParams,
    pub bank: RealizationBank,
    pub sensing_beams: Vec<CVector>,
}

/// Rates and sensing bounds of one allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformancePoint {
    pub f1: f64,
    pub f2: f64,
    pub speb: Bound,
    pub soeb: Bound,
    pub r_dl: Vec<f64>,
    pub r_ul: Vec<f64>,
    /// Standard error of `f1` over the realization bank.
    pub rate_std_err: f64,
    /// Effective power shares, `M_dl·(K_dl+1)` entries.
    pub genes: Vec<f64>,
}

impl PerformancePoint {
    pub fn objectives(&self) -> Objectives {
        Objectives::new(self.f1, self.f2)
    }

    pub fn sum_rate(&self) -> f64 {
        self.r_dl.iter().sum::<f64>() + self.r_ul.iter().sum::<f64>()
    }

    pub fn csv_header(k_dl: usize, k_ul: usize, n_genes: usize) -> Vec<String> {
        let mut h: Vec<String> = ["f1", "f2", "speb", "soeb", "rate_std_err"]
            .map(String::from)
            .to_vec();
        h.extend((0..k_dl).map(|l| format!("r_dl_{l}")));
        h.extend((0..k_ul).map(|k| format!("r_ul_{k}")));
        h.extend((0..n_genes).map(|g| format!("gene_{g}")));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut r = vec![
            self.f1.to_string(),
            self.f2.to_string(),
            self.speb.to_string(),
            self.soeb.to_string(),
            self.rate_std_err.to_string(),
        ];
        r.extend(self.r_dl.iter().map(f64::to_string));
        r.extend(self.r_ul.iter().map(f64::to_string));
        r.extend(self.genes.iter().map(f64::to_string));
        r
    }
}

impl Scenario {
    pub fn new(layout: NetworkLayout, params: ScenarioParams) -> Result<Self> {
        layout.validate()?;
        params.fading.validate()?;
        params.radar.validate()?;
        if !(params.p_max > 0.0 && params.p_max.is_finite()) {
            return Err(Error::config(
                "p_max",
                format!("must be positive, got {}", params.p_max),
            ));
        }
        if !(params.p_ul >= 0.0 && params.p_ul.is_finite()) {
            return Err(Error::config(
                "p_ul",
                format!("must be non-negative, got {}", params.p_ul),
            ));
        }
        let bank = RealizationBank::draw(
            &layout,
            &params.fading,
            &params.policy,
            params.trials,
            params.seed,
        )?;
        let sensing_beams =
            conjugate_sensing_beams(&layout, layout.target + params.policy.prior_offset)?;
        Ok(Scenario {
            layout,
            params,
            bank,
            sensing_beams,
        })
    }

    pub fn m_dl(&self) -> usize {
        self.layout.m_dl()
    }

    pub fn k_dl(&self) -> usize {
        self.layout.k_dl()
    }

    /// Beam norms the power constraint is enforced on.
    pub fn norms(&self) -> &BeamNorms {
        &self.bank.norms
    }

    fn p_ul(&self) -> Vec<f64> {
        vec![self.params.p_ul; self.layout.k_ul()]
    }

    /// Decodes (already repaired) shares into power factors.
    pub fn decode(&self, genes: &[f64]) -> PowerAllocation {
        decode_genes(genes, self.norms(), self.params.p_max, self.p_ul())
    }

    pub fn encode(&self, alloc: &PowerAllocation) -> Vec<f64> {
        encode_allocation(alloc, self.norms())
    }

    pub fn epa_genes(&self) -> Vec<f64> {
        epa_genes(self.m_dl(), self.k_dl())
    }

    pub fn epa_allocation(&self) -> PowerAllocation {
        epa_allocation(self.norms(), self.params.p_max, self.p_ul())
    }

    pub fn rates(&self, alloc: &PowerAllocation) -> RateReport {
        self.bank.rates(alloc, &self.params.comm)
    }

    pub fn sensing(&self, alloc: &PowerAllocation) -> Result<SensingReport> {
        evaluate_sensing(
            &self.layout,
            alloc,
            &self.params.radar,
            &self.sensing_beams,
            self.params.sensing_weights,
        )
    }

    /// Scores a feasible allocation.
    pub fn evaluate(&self, alloc: &PowerAllocation) -> Result<PerformancePoint> {
        alloc.validate()?;
        alloc.check_feasible(self.norms(), crate::moo::CONSTRAINT_TOL)?;
        let rates = self.rates(alloc);
        let sensing = self.sensing(alloc)?;
        Ok(PerformancePoint {
            f1: rates.f1,
            f2: sensing.f2,
            speb: sensing.speb,
            soeb: sensing.soeb,
            r_dl: rates.r_dl,
            r_ul: rates.r_ul,
            rate_std_err: rates.std_err,
            genes: self.encode(alloc),
        })
    }

    pub fn evaluate_genes(&self, genes: &[f64]) -> Result<PerformancePoint> {
        let mut g = genes.to_vec();
        repair_genes(&mut g, self.m_dl(), self.k_dl());
        self.evaluate(&self.decode(&g))
    }

    /// Log10 of the large-scale DL power gains, `[m][l]` flattened.
    pub fn csi_summary(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m_dl() * self.k_dl());
        for rru in &self.layout.dl_rrus {
            for user in &self.layout.dl_users {
                let d = rru.position.distance(*user);
                out.push(-2.0 * self.params.fading.alpha_dl * d.log10());
            }
        }
        out
    }
}

impl Problem for Scenario {
    fn n_genes(&self) -> usize {
        self.m_dl() * (self.k_dl() + 1)
    }

    fn repair(&self, genes: &mut [f64]) {
        repair_genes(genes, self.m_dl(), self.k_dl())
    }

    fn evaluate(&self, genes: &[f64]) -> Result<Objectives> {
        let alloc = self.decode(genes);
        let f1 = self.rates(&alloc).f1;
        let f2 = self.sensing(&alloc)?.f2;
        Ok(Objectives::new(f1, f2))
    }

    /// Measured on the decoded power factors, not on the shares.
    fn constraint_excess(&self, genes: &[f64]) -> f64 {
        self.decode(genes)
            .loads(self.norms())
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
            - 1.0
    }
}

/// Equal shares `1/(K_dl+1)` for every data stream and the pilot.
pub fn epa_genes(m_dl: usize, k_dl: usize) -> Vec<f64> {
    vec![1.0 / (k_dl + 1) as f64; m_dl * (k_dl + 1)]
}

/// Equal power allocation: `α_{m,i}‖w_{i,m}‖² = β_m‖w_s,m‖² = 1/(K_dl+1)`.
pub fn epa_allocation(norms: &BeamNorms, p_max: f64, p_ul: Vec<f64>) -> PowerAllocation {
    decode_genes(&epa_genes(norms.m_dl(), norms.k_dl()), norms, p_max, p_ul)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::square(61, 300.0)
    }
}

impl GridSpec {
    /// `n × n` points over `[-half, half]²`.
    pub fn square(n: usize, half: f64) -> Self {
        GridSpec {
            nx: n,
            ny: n,
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::config(
                "contour.grid",
                "needs at least 2 points per axis",
            ));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::config("contour.grid", "bounds must be increasing"));
        }
        Ok(())
    }

    /// Row-major points: `y` outer, `x` inner.
    pub fn points(&self) -> Vec<(usize, usize, Position)> {
        let step =
            |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let p = Position::new(
                    step(self.x_min, self.x_max, self.nx, ix),
                    step(self.y_min, self.y_max, self.ny, iy),
                );
                pts.push((ix, iy, p));
            }
        }
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourCell {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub speb: Bound,
    pub soeb: Bound,
    /// Too close to an RRU for the geometry to be defined.
    pub masked: bool,
}

impl ContourCell {
    pub fn csv_header() -> Vec<String> {
        ["ix", "iy", "x", "y", "speb", "soeb", "masked"]
            .map(String::from)
            .to_vec()
    }

    pub fn csv_row(&self) -> Vec<String> {
        let bound = |b: Bound| {
            if self.masked {
                String::new()
            } else {
                b.to_string()
            }
        };
        vec![
            self.ix.to_string(),
            self.iy.to_string(),
            self.x.to_string(),
            self.y.to_string(),
            bound(self.speb),
            bound(self.soeb),
            u8::from(self.masked).to_string(),
        ]
    }
}

/// SPEB/SOEB with the target moved to every grid point; sensing beams are
/// re-aimed at each point. Only the pilot factors of `alloc` matter.
pub fn run_contour(
    layout: &NetworkLayout,
    grid: &GridSpec,
    alloc: &PowerAllocation,
    radar: &RadarParams,
    prior_offset: Position,
) -> Result<Vec<ContourCell>> {
    grid.validate()?;
    radar.validate()?;
    grid.points()
        .into_par_iter()
        .map(|(ix, iy, p)| {
            let moved = layout.with_target(p);
            let evaluated = conjugate_sensing_beams(&moved, p + prior_offset).and_then(|w| {
                evaluate_sensing(&moved, alloc, radar, &w, SensingWeights::default())
            });
            let (speb, soeb, masked) = match evaluated {
                Ok(r) => (r.speb, r.soeb, false),
                Err(Error::DistanceTooSmall { .. }) | Err(Error::SingularGeometry(_)) => {
                    (Bound::Unobservable, Bound::Unobservable, true)
                }
                Err(e) => return Err(e),
            };
            Ok(ContourCell {
                ix,
                iy,
                x: p.x,
                y: p.y,
                speb,
                soeb,
                masked,
            })
        })
        .collect()
}

/// Pilot factor allocation used for contour maps: `β_m = beta` on every
/// DL-RRU, data streams sharing the remainder.
pub fn contour_allocation(m_dl: usize, k_dl: usize, beta: f64, p_max: f64) -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(m_dl, k_dl, p_max, vec![]);
    alloc.beta = vec![beta; m_dl];
    alloc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    /// Pilot share `β` per RRU; data streams split `1 - β` equally.
    Beta,
    /// Total data share `α` per RRU, split equally over the streams;
    /// the pilot takes `1 - α`.
    Alpha,
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepVar::Beta),
            "alpha" => Ok(SweepVar::Alpha),
            other => Err(Error::config(
                "sweep.variable",
                format!("expected `alpha` or `beta`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for SweepVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepVar::Beta => "beta",
            SweepVar::Alpha => "alpha",
        })
    }
}

/// Shares for one sweep point.
pub fn sweep_genes(var: SweepVar, value: f64, m_dl: usize, k_dl: usize) -> Vec<f64> {
    let (data_total, pilot) = match var {
        SweepVar::Beta => (1.0 - value, value),
        SweepVar::Alpha => (value, 1.0 - value),
    };
    let per_stream = if k_dl == 0 {
        0.0
    } else {
        data_total / k_dl as f64
    };
    let mut genes = Vec::with_capacity(m_dl * (k_dl + 1));
    for _ in 0..m_dl {
        genes.extend(std::iter::repeat_n(per_stream, k_dl));
        genes.push(pilot);
    }
    genes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_antennas: usize,
    pub variable: SweepVar,
    pub value: f64,
    pub point: PerformancePoint,
}

impl SweepPoint {
    pub fn csv_header() -> Vec<String> {
        [
            "n_antennas",
            "variable",
            "value",
            "sum_rate",
            "f1",
            "f2",
            "speb",
            "soeb",
            "rate_std_err",
        ]
        .map(String::from)
        .to_vec()
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.n_antennas.to_string(),
            self.variable.to_string(),
            self.value.to_string(),
            self.point.sum_rate().to_string(),
            self.point.f1.to_string(),
            self.point.f2.to_string(),
            self.point.speb.to_string(),
            self.point.soeb.to_string(),
            self.point.rate_std_err.to_string(),
        ]
    }
}

/// One series per antenna count. Values outside `[0,1]` are skipped with
/// a logged reason.
pub fn run_power_sweeps(
    layout: &NetworkLayout,
    params: &ScenarioParams,
    var: SweepVar,
    values: &[f64],
    n_antennas: &[usize],
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &n in n_antennas {
        let scenario = Scenario::new(layout.with_antennas(n)?, params.clone())?;
        for &value in values {
            if !(0.0..=1.0).contains(&value) {
                log::warn!("skipping {var} = {value}: outside [0, 1]");
                continue;
            }
            let genes = sweep_genes(var, value, scenario.m_dl(), scenario.k_dl());
            let point = scenario.evaluate(&scenario.decode(&genes))?;
            out.push(SweepPoint {
                n_antennas: n,
                variable: var,
                value,
                point,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeName {
    #[serde(rename = "NAFD-ISAC")]
    NafdIsac,
    #[serde(rename = "TDD-ISAC")]
    TddIsac,
    #[serde(rename = "TDD-NAFD-ISAC")]
    TddNafdIsac,
}

impl std::fmt::Display for SchemeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeName::NafdIsac => "NAFD-ISAC",
            SchemeName::TddIsac => "TDD-ISAC",
            SchemeName::TddNafdIsac => "TDD-NAFD-ISAC",
        })
    }
}

/// Time split of a coherence block. `t_joint` is the fraction in which
/// uplink and downlink run simultaneously.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub name: SchemeName,
    pub t_sense: f64,
    pub t_ul: f64,
    pub t_dl: f64,
    pub t_joint: f64,
    pub sensing_symbols: usize,
}

impl SchemeSpec {
    pub fn tdd_isac(sensing_symbols: usize, block: usize) -> Result<Self> {
        let s = slot_fraction(sensing_symbols, block)?;
        SchemeSpec {
            name: SchemeName::TddIsac,
            t_sense: s,
            t_ul: (1.0 - s) / 2.0,
            t_dl: (1.0 - s) / 2.0,
            t_joint: 0.0,
            sensing_symbols,
        }
        .checked()
    }

    pub fn tdd_nafd(sensing_symbols: usize, block: usize) -> Result<Self> {
        let s = slot_fraction(sensing_symbols, block)?;
        SchemeSpec {
            name: SchemeName::TddNafdIsac,
            t_sense: s,
            t_ul: 0.0,
            t_dl: 0.0,
            t_joint: 1.0 - s,
            sensing_symbols,
        }
        .checked()
    }

    /// Sensing rides on the pilots over the whole block.
    pub fn nafd(block: usize) -> Result<Self> {
        SchemeSpec {
            name: SchemeName::NafdIsac,
            t_sense: 0.0,
            t_ul: 0.0,
            t_dl: 0.0,
            t_joint: 1.0,
            sensing_symbols: block,
        }
        .checked()
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.t_sense, self.t_ul, self.t_dl, self.t_joint];
        if fr.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::InvalidArgument(format!(
                "slot fractions must lie in [0, 1]: {fr:?}"
            )));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "slot fractions sum to {sum}, not 1"
            )));
        }
        if self.name == SchemeName::NafdIsac && self.t_sense != 0.0 {
            return Err(Error::InvalidArgument(
                "NAFD-ISAC has no dedicated sensing slot".into(),
            ));
        }
        Ok(())
    }

    fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

fn slot_fraction(symbols: usize, block: usize) -> Result<f64> {
    if block == 0 || symbols > block {
        return Err(Error::InvalidArgument(format!(
            "sensing symbols {symbols} must not exceed the block length {block}"
        )));
    }
    Ok(symbols as f64 / block as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub spec: SchemeSpec,
    /// Sensing-duration axis value (symbols) this row belongs to.
    pub duration: usize,
    /// Weighted sum rate, time-averaged over the block.
    pub rate: f64,
    pub speb: Bound,
}

impl SchemeRow {
    pub fn csv_header() -> Vec<String> {
        [
            "scheme", "duration", "t_sense", "t_ul", "t_dl", "t_joint", "rate", "speb",
        ]
        .map(String::from)
        .to_vec()
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.spec.name.to_string(),
            self.duration.to_string(),
            self.spec.t_sense.to_string(),
            self.spec.t_ul.to_string(),
            self.spec.t_dl.to_string(),
            self.spec.t_joint.to_string(),
            self.rate.to_string(),
            self.speb.to_string(),
        ]
    }
}

fn scale_bound(b: Bound, symbols: usize) -> Bound {
    match b {
        Bound::Finite(v) if symbols > 0 => Bound::Finite(v / symbols as f64),
        _ => Bound::Unobservable,
    }
}

/// Rate and SPEB of the proposed scheme and both time-division baselines
/// for every sensing duration. The bound of `s` identical sensing symbols
/// is the single-symbol bound divided by `s`.
pub fn compare_schemes(
    scenario: &Scenario,
    durations: &[usize],
    block: usize,
) -> Result<Vec<SchemeRow>> {
    let (m_dl, k_dl) = (scenario.m_dl(), scenario.k_dl());
    let weights = scenario.params.comm.weights;
    let p_ul = scenario.p_ul();

    // Data-only phases: every stream at full power, no pilot.
    let data_only = scenario.decode(&sweep_genes(SweepVar::Alpha, 1.0, m_dl, k_dl));
    let mut dl_only = data_only.clone();
    dl_only.p_ul = vec![0.0; p_ul.len()];
    let ul_only = PowerAllocation::zeros(m_dl, k_dl, scenario.params.p_max, p_ul);
    let dl_rate = weights.omega_d * scenario.rates(&dl_only).sum_dl();
    let ul_rate = weights.omega_u * scenario.rates(&ul_only).sum_ul();
    let joint_rate = scenario.rates(&data_only).f1;

    let sensing_only = scenario.decode(&sweep_genes(SweepVar::Beta, 1.0, m_dl, k_dl));
    let speb_symbol = scenario.sensing(&sensing_only)?.speb;

    let epa = scenario.evaluate(&scenario.epa_allocation())?;
    let proposed = SchemeSpec::nafd(block)?;
    let proposed_speb = scale_bound(epa.speb, block);

    let mut rows = Vec::with_capacity(durations.len() * 3);
    for &s in durations {
        let tdd = SchemeSpec::tdd_isac(s, block)?;
        rows.push(SchemeRow {
            spec: tdd,
            duration: s,
            rate: tdd.t_dl * dl_rate + tdd.t_ul * ul_rate,
            speb: scale_bound(speb_symbol, s),
        });
        let tdd_nafd = SchemeSpec::tdd_nafd(s, block)?;
        rows.push(SchemeRow {
            spec: tdd_nafd,
            duration: s,
            rate: tdd_nafd.t_joint * joint_rate,
            speb: scale_bound(speb_symbol, s),
        });
        rows.push(SchemeRow {
            spec: proposed,
            duration: s,
            rate: epa.f1,
            speb: proposed_speb,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoReport {
    pub n_antennas: usize,
    pub front: ParetoFront,
    /// Front members re-scored with full detail, in front order.
    pub points: Vec<PerformancePoint>,
    pub epa: PerformancePoint,
    pub dqn: Option<(PerformancePoint, DqnReport)>,
}

impl ParetoReport {
    pub fn csv_header(n_genes: usize) -> Vec<String> {
        let mut h: Vec<String> = ["kind", "f1", "f2", "speb", "soeb"]
            .map(String::from)
            .to_vec();
        h.extend((0..n_genes).map(|g| format!("gene_{g}")));
        h
    }

    /// Front members, then the EPA point, then the DQN point if any.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let row = |kind: &str, p: &PerformancePoint| {
            let mut r = vec![
                kind.to_string(),
                p.f1.to_string(),
                p.f2.to_string(),
                p.speb.to_string(),
                p.soeb.to_string(),
            ];
            r.extend(p.genes.iter().map(f64::to_string));
            r
        };
        let mut rows: Vec<Vec<String>> = self.points.iter().map(|p| row("front", p)).collect();
        rows.push(row("epa", &self.epa));
        if let Some((p, _)) = &self.dqn {
            rows.push(row("dqn", p));
        }
        rows
    }
}

/// NSGA-II front, the EPA point and optionally the DQN solution on common
/// axes.
pub fn run_pareto(
    scenario: &Scenario,
    nsga: &NsgaConfig,
    dqn: Option<&DqnConfig>,
) -> Result<ParetoReport> {
    let front = evolve_nsga2(scenario, nsga)?;
    let points = front
        .members
        .par_iter()
        .map(|m| scenario.evaluate(&scenario.decode(&m.genes)))
        .collect::<Result<Vec<_>>>()?;
    let epa = scenario.evaluate(&scenario.epa_allocation())?;
    let dqn = match dqn {
        Some(cfg) => {
            let report = train_dqn(scenario, cfg)?;
            let point = scenario.evaluate(&scenario.decode(&report.best_genes))?;
            Some((point, report))
        }
        None => None,
    };
    Ok(ParetoReport {
        n_antennas: scenario.layout.n_antennas(),
        front,
        points,
        epa,
        dqn,
    })
}

/// Largest per-RRU share sum of `genes`.
pub fn max_share_load(genes: &[f64], m_dl: usize, k_dl: usize) -> f64 {
    gene_loads(genes, m_dl, k_dl)
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_circle_deployment, ArraySpec};
    use crate::units::wavelength;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn layout(n: usize) -> NetworkLayout {
        make_circle_deployment(
            8,
            120.0,
            2,
            2,
            200.0,
            ArraySpec::new(n, wavelength(3.5e9)),
            11,
        )
        .unwrap()
    }

    fn scenario(n: usize, trials: usize) -> Scenario {
        Scenario::new(
            layout(n),
            ScenarioParams {
                trials,
                ..ScenarioParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn epa_shares() {
        assert_eq!(epa_genes(1, 1), vec![0.5, 0.5]);
        assert_eq!(epa_genes(2, 3), vec![0.25; 8]);
        let s = scenario(4, 8);
        for load in s.epa_allocation().loads(s.norms()) {
            assert_relative_eq!(load, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn sweep_genes_fill_budget() {
        let g = sweep_genes(SweepVar::Beta, 0.4, 2, 3);
        assert_relative_eq!(g[3], 0.4);
        assert_relative_eq!(g[0], 0.2);
        assert_relative_eq!(max_share_load(&g, 2, 3), 1.0, max_relative = 1e-15);
        let g = sweep_genes(SweepVar::Alpha, 0.3, 1, 2);
        assert_relative_eq!(g[2], 0.7);
    }

    #[test]
    fn evaluate_rejects_infeasible() {
        let s = scenario(4, 4);
        let mut a = s.epa_allocation();
        a.beta[0] *= 3.0;
        assert!(matches!(s.evaluate(&a), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn evaluate_is_reproducible() {
        let s = scenario(4, 16);
        let a = s.evaluate(&s.epa_allocation()).unwrap();
        let b = scenario(4, 16).evaluate(&s.epa_allocation()).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.evaluate_genes(&a.genes).unwrap().f2, a.f2);
    }

    #[test]
    fn contour_masks_rru_cells_and_is_rotation_covariant() {
        let l = layout(4);
        let alloc = contour_allocation(4, 2, 0.25, 1.0);
        let grid = GridSpec {
            nx: 2,
            ny: 2,
            x_min: 120.0,
            x_max: 130.0,
            y_min: 0.0,
            y_max: 40.0,
        };
        let cells = run_contour(
            &l,
            &grid,
            &alloc,
            &RadarParams::default(),
            Position::default(),
        )
        .unwrap();
        assert!(cells[0].masked, "grid point on DL-RRU 0 must be masked");
        assert!(!cells[3].masked);

        // Two steps of 2π/M map DL-RRUs onto DL-RRUs.
        let turn = 2.0 * TAU / 8.0;
        let rotated = l.rotated(turn).unwrap();
        let p = Position::new(37.0, -52.0);
        let single = |lay: &NetworkLayout, q: Position| {
            let g = GridSpec {
                nx: 2,
                ny: 2,
                x_min: q.x,
                x_max: q.x + 1.0,
                y_min: q.y,
                y_max: q.y + 1.0,
            };
            run_contour(
                lay,
                &g,
                &alloc,
                &RadarParams::default(),
                Position::default(),
            )
            .unwrap()[0]
        };
        let a = single(&l, p);
        let b = single(&rotated, p.rotated(turn));
        assert_relative_eq!(a.speb.value(), b.speb.value(), max_relative = 1e-9);
        assert_relative_eq!(a.soeb.value(), b.soeb.value(), max_relative = 1e-9);
    }

    #[test]
    fn contour_near_rru_beats_edge() {
        let l = layout(4);
        let alloc = contour_allocation(4, 2, 0.25, 1.0);
        let cells = run_contour(
            &l,
            &GridSpec::square(21, 200.0),
            &alloc,
            &RadarParams::default(),
            Position::default(),
        )
        .unwrap();
        let near: Vec<f64> = cells
            .iter()
            .filter(|c| !c.masked)
            .filter(|c| {
                l.dl_rrus
                    .iter()
                    .any(|r| r.position.distance(Position::new(c.x, c.y)) < 30.0)
            })
            .map(|c| c.speb.value())
            .collect();
        let edge: Vec<f64> = cells
            .iter()
            .filter(|c| {
                Position::new(c.x, c.y).norm() > 190.0 && Position::new(c.x, c.y).norm() <= 200.0
            })
            .map(|c| c.speb.value())
            .collect();
        assert!(!near.is_empty() && !edge.is_empty());
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&near) < mean(&edge));
    }

    #[test]
    fn scheme_fractions_sum_to_one() {
        for s in [0, 1, 50, 100] {
            for spec in [
                SchemeSpec::tdd_isac(s, 100).unwrap(),
                SchemeSpec::tdd_nafd(s, 100).unwrap(),
            ] {
                assert_relative_eq!(spec.t_sense + spec.t_ul + spec.t_dl + spec.t_joint, 1.0);
            }
        }
        assert!(SchemeSpec::tdd_isac(101, 100).is_err());
        let bad = SchemeSpec {
            t_ul: 0.7,
            ..SchemeSpec::tdd_isac(10, 100).unwrap()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scheme_comparison_shapes() {
        let s = scenario(4, 16);
        let rows = compare_schemes(&s, &[5, 10, 40], 100).unwrap();
        assert_eq!(rows.len(), 9);
        let proposed: Vec<_> = rows
            .iter()
            .filter(|r| r.spec.name == SchemeName::NafdIsac)
            .collect();
        assert!(proposed.windows(2).all(|w| w[0].speb == w[1].speb));
        let tdd: Vec<_> = rows
            .iter()
            .filter(|r| r.spec.name == SchemeName::TddIsac)
            .collect();
        assert!(tdd
            .windows(2)
            .all(|w| w[1].speb.value() < w[0].speb.value()));
    }
}
