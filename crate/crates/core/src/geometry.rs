//! Planar network deployments, bistatic target geometry and array steering
//! vectors.
//!
//! Angles are measured counterclockwise from the +x axis and normalized to
//! `(-π, π]`. Each RRU carries a centered uniform linear array with
//! half-wavelength spacing; on the circle deployment the array axis is
//! tangential to the circle.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::MIN_SEPARATION;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Position::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Direction of `other` as seen from `self`, in `(-π, π]`.
    pub fn bearing_to(self, other: Position) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Position::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn swapped(self) -> Self {
        Position::new(self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Maps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    if a <= -PI {
        a += TAU;
    }
    a
}

/// Antenna geometry of one RRU, as element offsets from the RRU center.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaArray {
    offsets: Vec<Position>,
    orientation: f64,
    spacing: f64,
}

impl AntennaArray {
    /// Centered uniform linear array of `n` elements along the axis at
    /// angle `orientation`, with element pitch `spacing`.
    pub fn ula(n: usize, spacing: f64, orientation: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "antenna array needs at least one element".into(),
            ));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        let axis = Position::from_polar(1.0, orientation);
        let center = (n as f64 - 1.0) / 2.0;
        let offsets = (0..n)
            .map(|j| {
                let s = (j as f64 - center) * spacing;
                Position::new(s * axis.x, s * axis.y)
            })
            .collect();
        Ok(AntennaArray {
            offsets,
            orientation,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Position] {
        &self.offsets
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn centroid(&self) -> Position {
        let n = self.offsets.len() as f64;
        let sum = self
            .offsets
            .iter()
            .fold(Position::ORIGIN, |acc, &q| acc + q);
        Position::new(sum.x / n, sum.y / n)
    }

    /// Steering vector `e^{-j2π kᵀq_j/λ}` for a plane wave with direction
    /// `k = [cos angle, sin angle]`.
    pub fn steering_vector(&self, angle: f64, wavelength: f64) -> Result<DVector<Complex64>> {
        check_wavelength(wavelength)?;
        let (s, c) = angle.sin_cos();
        Ok(DVector::from_iterator(
            self.len(),
            self.offsets.iter().map(|q| {
                let phase = -TAU * (c * q.x + s * q.y) / wavelength;
                Complex64::from_polar(1.0, phase)
            }),
        ))
    }

    /// Aperture moments `(A, B) = (Σ u_j, Σ u_j²)` with
    /// `u_j = y_j cos(angle) - x_j sin(angle)`, the element positions
    /// projected on the direction normal to the wave vector.
    pub fn aperture_moments(&self, angle: f64) -> (f64, f64) {
        let (s, c) = angle.sin_cos();
        self.offsets.iter().fold((0.0, 0.0), |(a, b), q| {
            let u = q.y * c - q.x * s;
            (a + u, b + u * u)
        })
    }
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if wavelength > 0.0 && wavelength.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "wavelength must be positive, got {wavelength}"
        )))
    }
}

/// Element count and carrier wavelength shared by every RRU array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArraySpec {
    pub n_antennas: usize,
    pub wavelength: f64,
}

impl ArraySpec {
    pub fn new(n_antennas: usize, wavelength: f64) -> Self {
        ArraySpec {
            n_antennas,
            wavelength,
        }
    }

    /// Half-wavelength element pitch.
    pub fn spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn build(&self, orientation: f64) -> Result<AntennaArray> {
        check_wavelength(self.wavelength)?;
        AntennaArray::ula(self.n_antennas, self.spacing(), orientation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rru {
    pub position: Position,
    pub array: AntennaArray,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkLayout {
    pub dl_rrus: Vec<Rru>,
    pub ul_rrus: Vec<Rru>,
    pub dl_users: Vec<Position>,
    pub ul_users: Vec<Position>,
    pub target: Position,
    pub wavelength: f64,
}

/// Transmitter → target → receiver path of one (DL-RRU, UL-RRU) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BistaticGeometry {
    /// DL-RRU to target distance.
    pub d_m: f64,
    /// Target to UL-RRU distance.
    pub d_n: f64,
    /// Bistatic range `d_m + d_n`.
    pub d_nm: f64,
    /// Direction of departure at the DL-RRU.
    pub dod_phi: f64,
    /// Direction of arrival at the UL-RRU.
    pub doa_theta: f64,
}

impl NetworkLayout {
    pub fn m_dl(&self) -> usize {
        self.dl_rrus.len()
    }

    pub fn m_ul(&self) -> usize {
        self.ul_rrus.len()
    }

    pub fn k_dl(&self) -> usize {
        self.dl_users.len()
    }

    pub fn k_ul(&self) -> usize {
        self.ul_users.len()
    }

    /// Antenna count per RRU (all RRUs share one array size).
    pub fn n_antennas(&self) -> usize {
        self.dl_rrus.first().map_or(0, |r| r.array.len())
    }

    /// Checks the structural invariants: at least one RRU of each kind,
    /// a common array size, finite coordinates and pairwise separation.
    pub fn validate(&self) -> Result<()> {
        check_wavelength(self.wavelength)?;
        if self.dl_rrus.is_empty() || self.ul_rrus.is_empty() {
            return Err(Error::InvalidDeployment(
                "need at least one DL-RRU and one UL-RRU".into(),
            ));
        }
        let n = self.n_antennas();
        if n == 0
            || self
                .dl_rrus
                .iter()
                .chain(&self.ul_rrus)
                .any(|r| r.array.len() != n)
        {
            return Err(Error::InvalidDeployment(
                "all RRUs must carry arrays of the same non-zero size".into(),
            ));
        }
        let nodes = self.labelled_nodes();
        for (label, p) in &nodes {
            if !p.is_finite() {
                return Err(Error::InvalidDeployment(format!(
                    "{label} has non-finite coordinates"
                )));
            }
        }
        for (i, (la, pa)) in nodes.iter().enumerate() {
            for (lb, pb) in &nodes[i + 1..] {
                if pa.distance(*pb) < MIN_SEPARATION {
                    return Err(Error::InvalidDeployment(format!(
                        "{la} and {lb} are closer than {MIN_SEPARATION} m"
                    )));
                }
            }
        }
        Ok(())
    }

    fn labelled_nodes(&self) -> Vec<(String, Position)> {
        let mut nodes = Vec::new();
        nodes.extend(
            self.dl_rrus
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("dl_rru[{i}]"), r.position)),
        );
        nodes.extend(
            self.ul_rrus
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("ul_rru[{i}]"), r.position)),
        );
        nodes.extend(
            self.dl_users
                .iter()
                .enumerate()
                .map(|(i, &p)| (format!("dl_user[{i}]"), p)),
        );
        nodes.extend(
            self.ul_users
                .iter()
                .enumerate()
                .map(|(i, &p)| (format!("ul_user[{i}]"), p)),
        );
        nodes.push(("target".into(), self.target));
        nodes
    }

    /// Same deployment with the target moved to `target`.
    pub fn with_target(&self, target: Position) -> Self {
        NetworkLayout {
            target,
            ..self.clone()
        }
    }

    /// Same deployment with every RRU array rebuilt with `n` elements,
    /// keeping orientations and spacing.
    pub fn with_antennas(&self, n: usize) -> Result<Self> {
        let rebuild = |r: &Rru| -> Result<Rru> {
            Ok(Rru {
                position: r.position,
                array: AntennaArray::ula(n, r.array.spacing(), r.array.orientation())?,
            })
        };
        Ok(NetworkLayout {
            dl_rrus: self.dl_rrus.iter().map(rebuild).collect::<Result<_>>()?,
            ul_rrus: self.ul_rrus.iter().map(rebuild).collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    /// Rigid rotation of every node and array about the origin.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        self.map_isometry(|p| p.rotated(angle), |o| o + angle)
    }

    /// Reflection exchanging the x and y axes.
    pub fn axes_swapped(&self) -> Result<Self> {
        self.map_isometry(Position::swapped, |o| PI / 2.0 - o)
    }

    fn map_isometry(
        &self,
        point: impl Fn(Position) -> Position,
        orient: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let rru = |r: &Rru| -> Result<Rru> {
            Ok(Rru {
                position: point(r.position),
                array: AntennaArray::ula(
                    r.array.len(),
                    r.array.spacing(),
                    orient(r.array.orientation()),
                )?,
            })
        };
        Ok(NetworkLayout {
            dl_rrus: self.dl_rrus.iter().map(rru).collect::<Result<_>>()?,
            ul_rrus: self.ul_rrus.iter().map(rru).collect::<Result<_>>()?,
            dl_users: self.dl_users.iter().map(|&p| point(p)).collect(),
            ul_users: self.ul_users.iter().map(|&p| point(p)).collect(),
            target: point(self.target),
            wavelength: self.wavelength,
        })
    }

    pub fn to_document(&self) -> LayoutDocument {
        let mut nodes = Vec::new();
        let rru = |kind, r: &Rru| NodeRecord {
            kind,
            x: r.position.x,
            y: r.position.y,
            orientation: Some(r.array.orientation()),
        };
        let point = |kind, p: &Position| NodeRecord {
            kind,
            x: p.x,
            y: p.y,
            orientation: None,
        };
        nodes.extend(self.dl_rrus.iter().map(|r| rru(NodeKind::DlRru, r)));
        nodes.extend(self.ul_rrus.iter().map(|r| rru(NodeKind::UlRru, r)));
        nodes.extend(self.dl_users.iter().map(|p| point(NodeKind::DlUser, p)));
        nodes.extend(self.ul_users.iter().map(|p| point(NodeKind::UlUser, p)));
        nodes.push(point(NodeKind::Target, &self.target));
        LayoutDocument {
            schema: LAYOUT_SCHEMA.into(),
            version: LAYOUT_VERSION,
            wavelength: self.wavelength,
            n_antennas: self.n_antennas(),
            element_spacing: self
                .dl_rrus
                .first()
                .map_or(self.wavelength / 2.0, |r| r.array.spacing()),
            nodes,
        }
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        if doc.schema != LAYOUT_SCHEMA || doc.version != LAYOUT_VERSION {
            return Err(Error::InvalidDeployment(format!(
                "unsupported layout schema {} v{}",
                doc.schema, doc.version
            )));
        }
        let mut layout = NetworkLayout {
            dl_rrus: Vec::new(),
            ul_rrus: Vec::new(),
            dl_users: Vec::new(),
            ul_users: Vec::new(),
            target: Position::ORIGIN,
            wavelength: doc.wavelength,
        };
        let mut targets = 0;
        for node in &doc.nodes {
            let position = Position::new(node.x, node.y);
            let rru = || -> Result<Rru> {
                let orientation = node.orientation.ok_or_else(|| {
                    Error::InvalidDeployment("RRU record without array orientation".into())
                })?;
                Ok(Rru {
                    position,
                    array: AntennaArray::ula(doc.n_antennas, doc.element_spacing, orientation)?,
                })
            };
            match node.kind {
                NodeKind::DlRru => layout.dl_rrus.push(rru()?),
                NodeKind::UlRru => layout.ul_rrus.push(rru()?),
                NodeKind::DlUser => layout.dl_users.push(position),
                NodeKind::UlUser => layout.ul_users.push(position),
                NodeKind::Target => {
                    layout.target = position;
                    targets += 1;
                }
            }
        }
        if targets != 1 {
            return Err(Error::InvalidDeployment(format!(
                "expected exactly one target, found {targets}"
            )));
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document(&serde_json::from_str(&text)?)
    }
}

pub const LAYOUT_SCHEMA: &str = "nafd-isac/layout";
pub const LAYOUT_VERSION: u32 = 1;

/// Replayable text form of a [`NetworkLayout`]. RRU records carry the
/// orientation of their linear array; users and the target carry none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    pub schema: String,
    pub version: u32,
    pub wavelength: f64,
    pub n_antennas: usize,
    pub element_spacing: f64,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    DlRru,
    UlRru,
    DlUser,
    UlUser,
    Target,
}

fn uniform_in_disk(rng: &mut impl Rng, radius: f64) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    Position::from_polar(r, rng.random::<f64>() * TAU)
}

/// Draws a point in the disk at least [`MIN_SEPARATION`] from every placed node.
fn place(
    rng: &mut impl Rng,
    radius: f64,
    placed: &mut Vec<Position>,
    node: String,
) -> Result<Position> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = uniform_in_disk(rng, radius);
        if placed.iter().all(|q| q.distance(p) >= MIN_SEPARATION) {
            placed.push(p);
            return Ok(p);
        }
    }
    Err(Error::Placement {
        node,
        attempts: MAX_PLACEMENT_ATTEMPTS,
        min_separation: MIN_SEPARATION,
    })
}

fn check_counts(m_total: usize, region_radius: f64) -> Result<()> {
    if m_total == 0 || m_total % 2 != 0 {
        return Err(Error::InvalidDeployment(format!(
            "RRU count must be even and positive (half UL, half DL), got {m_total}"
        )));
    }
    if !(region_radius > 0.0 && region_radius.is_finite()) {
        return Err(Error::InvalidDeployment(format!(
            "region radius must be positive, got {region_radius}"
        )));
    }
    Ok(())
}

/// RRUs equally spaced on a circle (alternating DL/UL, starting with a DL-RRU
/// on the +x axis), users and target uniform in the disk of `region_radius`.
pub fn make_circle_deployment(
    m_total: usize,
    circle_radius: f64,
    k_ul: usize,
    k_dl: usize,
    region_radius: f64,
    array: ArraySpec,
    seed: u64,
) -> Result<NetworkLayout> {
    check_counts(m_total, region_radius)?;
    if !(circle_radius > 0.0 && circle_radius.is_finite()) {
        return Err(Error::InvalidDeployment(format!(
            "circle radius must be positive, got {circle_radius}"
        )));
    }
    let mut layout = empty_layout(array.wavelength);
    let mut placed = Vec::new();
    for i in 0..m_total {
        let angle = TAU * i as f64 / m_total as f64;
        let rru = Rru {
            position: Position::from_polar(circle_radius, angle),
            array: array.build(normalize_angle(angle + PI / 2.0))?,
        };
        placed.push(rru.position);
        if i % 2 == 0 {
            layout.dl_rrus.push(rru);
        } else {
            layout.ul_rrus.push(rru);
        }
    }
    if m_total > 2 && 2.0 * circle_radius * (PI / m_total as f64).sin() < MIN_SEPARATION {
        return Err(Error::InvalidDeployment(
            "RRUs on the circle are closer than the minimum separation".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_users_and_target(
        &mut layout,
        &mut rng,
        region_radius,
        k_ul,
        k_dl,
        &mut placed,
    )?;
    Ok(layout)
}

/// Every node i.i.d. uniform in the disk of `region_radius`, resampled until
/// pairwise separated; array orientations uniform in `[0, π)`.
pub fn make_random_deployment(
    m_total: usize,
    k_ul: usize,
    k_dl: usize,
    region_radius: f64,
    array: ArraySpec,
    seed: u64,
) -> Result<NetworkLayout> {
    check_counts(m_total, region_radius)?;
    let mut layout = empty_layout(array.wavelength);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed = Vec::new();
    for i in 0..m_total / 2 {
        let position = place(&mut rng, region_radius, &mut placed, format!("dl_rru[{i}]"))?;
        let array = array.build(rng.random::<f64>() * PI)?;
        layout.dl_rrus.push(Rru { position, array });
    }
    for i in 0..m_total / 2 {
        let position = place(&mut rng, region_radius, &mut placed, format!("ul_rru[{i}]"))?;
        let array = array.build(rng.random::<f64>() * PI)?;
        layout.ul_rrus.push(Rru { position, array });
    }
    place_users_and_target(
        &mut layout,
        &mut rng,
        region_radius,
        k_ul,
        k_dl,
        &mut placed,
    )?;
    Ok(layout)
}

fn empty_layout(wavelength: f64) -> NetworkLayout {
    NetworkLayout {
        dl_rrus: Vec::new(),
        ul_rrus: Vec::new(),
        dl_users: Vec::new(),
        ul_users: Vec::new(),
        target: Position::ORIGIN,
        wavelength,
    }
}

fn place_users_and_target(
    layout: &mut NetworkLayout,
    rng: &mut ChaCha8Rng,
    radius: f64,
    k_ul: usize,
    k_dl: usize,
    placed: &mut Vec<Position>,
) -> Result<()> {
    for i in 0..k_dl {
        layout
            .dl_users
            .push(place(rng, radius, placed, format!("dl_user[{i}]"))?);
    }
    for i in 0..k_ul {
        layout
            .ul_users
            .push(place(rng, radius, placed, format!("ul_user[{i}]"))?);
    }
    layout.target = place(rng, radius, placed, "target".into())?;
    Ok(())
}

/// Distances and angles of the DL-RRU `m` → target → UL-RRU `n` path.
pub fn bistatic_geometry(layout: &NetworkLayout, m: usize, n: usize) -> Result<BistaticGeometry> {
    let tx = layout
        .dl_rrus
        .get(m)
        .ok_or_else(|| Error::InvalidArgument(format!("DL-RRU index {m} out of range")))?;
    let rx = layout
        .ul_rrus
        .get(n)
        .ok_or_else(|| Error::InvalidArgument(format!("UL-RRU index {n} out of range")))?;
    let d_m = tx.position.distance(layout.target);
    let d_n = rx.position.distance(layout.target);
    if d_m < MIN_SEPARATION || d_n < MIN_SEPARATION {
        return Err(Error::SingularGeometry(format!(
            "target within {MIN_SEPARATION} m of dl_rru[{m}] or ul_rru[{n}]"
        )));
    }
    Ok(BistaticGeometry {
        d_m,
        d_n,
        d_nm: d_m + d_n,
        dod_phi: tx.position.bearing_to(layout.target),
        doa_theta: rx.position.bearing_to(layout.target),
    })
}

/// Transmit (`a_m`, toward the DOD) and receive (`b_n`, toward the DOA)
/// steering vectors of a bistatic path.
pub fn steering_vectors(
    geom: &BistaticGeometry,
    tx_array: &AntennaArray,
    rx_array: &AntennaArray,
    wavelength: f64,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let a = tx_array.steering_vector(geom.dod_phi, wavelength)?;
    let b = rx_array.steering_vector(geom.doa_theta, wavelength)?;
    Ok((a, b))
}
