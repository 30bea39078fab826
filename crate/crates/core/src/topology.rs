//! Structure descriptions: node sets, member connectivity, material
//! properties, and the three built-in benchmark generators (D-bar, triangular
//! prism, six-bar lander).
//!
//! Conventions used throughout the crate:
//!
//! * Nodes are indexed from 0. The nodal vector stacks coordinates node-major:
//!   entries `3i..3i+3` belong to node `i`.
//! * Members are listed bars first, then strings. Each member stores endpoints
//!   `(i, j)` with `i < j`; the member direction is `node_j − node_i`.
//! * Generators build structures at zero prestress: every member's rest length
//!   equals its as-built length.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Young's modulus of the steel used for every benchmark member (Pa).
pub const STEEL_YOUNGS_MODULUS: f64 = 200e9;
/// Density of steel (kg/m³).
pub const STEEL_DENSITY: f64 = 7850.0;
/// Yield strength of steel (Pa). Carried as metadata; the solver does not
/// enforce it.
pub const STEEL_YIELD_STRENGTH: f64 = 300e6;
/// Bars are hollow tubes with these radii (m).
pub const BAR_OUTER_RADIUS: f64 = 0.010;
pub const BAR_INNER_RADIUS: f64 = 0.008;
/// Strings are solid circular cables with this radius (m).
pub const STRING_RADIUS: f64 = 0.002;

/// Cross-section area of a benchmark bar (m²).
pub fn bar_area() -> f64 {
    PI * (BAR_OUTER_RADIUS * BAR_OUTER_RADIUS - BAR_INNER_RADIUS * BAR_INNER_RADIUS)
}

/// Cross-section area of a benchmark string (m²).
pub fn string_area() -> f64 {
    PI * STRING_RADIUS * STRING_RADIUS
}

/// Default D-bar bar length (m); the unit then spans 2 m across each diagonal.
pub const DEFAULT_DBAR_BAR_LENGTH: f64 = std::f64::consts::SQRT_2;
pub const DEFAULT_PRISM_RADIUS: f64 = 0.25;
pub const DEFAULT_PRISM_HEIGHT: f64 = 0.5;
/// Default twist of the prism's top triangle relative to the bottom one.
///
/// With bars `b_i–t_i` and vertical strings `b_i–t_{i+1}`, a fully tensioned
/// self-stress exists only at a relative rotation of −5π/6 (see
/// `statics::tests` for the force-balance check), so the generator starts
/// there: every cable then tightens as soon as the verticals are shortened.
pub const DEFAULT_PRISM_TWIST: f64 = -5.0 * PI / 6.0;
pub const DEFAULT_LANDER_BAR_LENGTH: f64 = 1.0;
/// Default ratio between the distance separating a parallel bar pair and the
/// bar length.
pub const DEFAULT_LANDER_SEPARATION_RATIO: f64 = 0.5;

/// Cartesian positions of every node, stored as a 3 × n matrix whose columns
/// are nodes (so the underlying column-major storage is exactly the stacked
/// nodal vector).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    coords: DMatrix<f64>,
}

impl NodeSet {
    pub fn from_matrix(coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() != 3 {
            return Err(Error::DimensionMismatch {
                context: "NodeSet rows",
                expected: 3,
                got: coords.nrows(),
            });
        }
        if coords.ncols() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a structure needs at least 2 nodes, got {}",
                coords.ncols()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "node coordinates must be finite".into(),
            ));
        }
        Ok(NodeSet { coords })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Result<Self> {
        let coords = DMatrix::from_fn(3, points.len(), |r, c| points[c][r]);
        Self::from_matrix(coords)
    }

    /// Rebuilds a node set from a stacked nodal vector of length `3n`.
    pub fn from_flattened(flat: &DVector<f64>) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::DimensionMismatch {
                context: "NodeSet::from_flattened",
                expected: 3 * (flat.len() / 3),
                got: flat.len(),
            });
        }
        let n = flat.len() / 3;
        Self::from_matrix(DMatrix::from_column_slice(3, n, flat.as_slice()))
    }

    pub fn count(&self) -> usize {
        self.coords.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.coords.fixed_view::<3, 1>(0, i))
    }

    /// The stacked nodal vector; entries `3i..3i+3` are node `i`.
    pub fn flattened(&self) -> DVector<f64> {
        DVector::from_column_slice(self.coords.as_slice())
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let n = self.count() as f64;
        let mut c = Vector3::zeros();
        for i in 0..self.count() {
            c += self.position(i);
        }
        c / n
    }

    pub fn translated(&self, shift: Vector3<f64>) -> NodeSet {
        let mut coords = self.coords.clone();
        for mut col in coords.column_iter_mut() {
            col += shift;
        }
        NodeSet { coords }
    }
}

/// Member role: bars carry compression, strings carry tension and can go
/// slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Bar,
    String,
}

/// Material and geometry of one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub kind: MemberKind,
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Cross-section area (m²).
    pub area: f64,
    /// Material density (kg/m³).
    pub density: f64,
    /// Unstressed length (m).
    pub rest_length: f64,
}

impl MemberSpec {
    pub fn steel_bar(rest_length: f64) -> Self {
        MemberSpec {
            kind: MemberKind::Bar,
            youngs_modulus: STEEL_YOUNGS_MODULUS,
            area: bar_area(),
            density: STEEL_DENSITY,
            rest_length,
        }
    }

    pub fn steel_string(rest_length: f64) -> Self {
        MemberSpec {
            kind: MemberKind::String,
            youngs_modulus: STEEL_YOUNGS_MODULUS,
            area: string_area(),
            density: STEEL_DENSITY,
            rest_length,
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        for (name, v) in [
            ("youngs_modulus", self.youngs_modulus),
            ("area", self.area),
            ("density", self.density),
            ("rest_length", self.rest_length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidStructure(format!(
                    "member {index}: {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Axial stiffness `E·A` (N).
    pub fn ea(&self) -> f64 {
        self.youngs_modulus * self.area
    }

    /// Member mass from the unstressed length (kg).
    pub fn mass(&self) -> f64 {
        self.density * self.area * self.rest_length
    }
}

/// Signed member–node incidence, kept as endpoint pairs (bars first). Row `k`
/// of the equivalent dense matrix has `−1` at column `i` and `+1` at column
/// `j` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    n_nodes: usize,
    bars: Vec<[usize; 2]>,
    strings: Vec<[usize; 2]>,
}

impl Connectivity {
    pub fn new(n_nodes: usize, bars: Vec<[usize; 2]>, strings: Vec<[usize; 2]>) -> Result<Self> {
        let normalize = |pairs: Vec<[usize; 2]>, what: &str| -> Result<Vec<[usize; 2]>> {
            pairs
                .into_iter()
                .enumerate()
                .map(|(k, [i, j])| {
                    if i == j {
                        return Err(Error::InvalidStructure(format!(
                            "{what} {k} connects node {i} to itself"
                        )));
                    }
                    if i >= n_nodes || j >= n_nodes {
                        return Err(Error::InvalidStructure(format!(
                            "{what} {k} references node out of range ({i}, {j}) with {n_nodes} nodes"
                        )));
                    }
                    Ok([i.min(j), i.max(j)])
                })
                .collect()
        };
        let bars = normalize(bars, "bar")?;
        let strings = normalize(strings, "string")?;
        let mut seen = BTreeSet::new();
        for &pair in bars.iter().chain(strings.iter()) {
            if !seen.insert(pair) {
                return Err(Error::InvalidStructure(format!(
                    "duplicate member between nodes {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
        let mut touched = vec![false; n_nodes];
        for &[i, j] in bars.iter().chain(strings.iter()) {
            touched[i] = true;
            touched[j] = true;
        }
        if let Some(idx) = touched.iter().position(|&t| !t) {
            return Err(Error::InvalidStructure(format!(
                "node {idx} is not connected to any member"
            )));
        }
        Ok(Connectivity {
            n_nodes,
            bars,
            strings,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_bars(&self) -> usize {
        self.bars.len()
    }

    pub fn n_strings(&self) -> usize {
        self.strings.len()
    }

    pub fn n_members(&self) -> usize {
        self.bars.len() + self.strings.len()
    }

    pub fn bars(&self) -> &[[usize; 2]] {
        &self.bars
    }

    pub fn strings(&self) -> &[[usize; 2]] {
        &self.strings
    }

    /// Endpoints and role of member `k` in the bars-first ordering.
    pub fn member(&self, k: usize) -> ([usize; 2], MemberKind) {
        if k < self.bars.len() {
            (self.bars[k], MemberKind::Bar)
        } else {
            (self.strings[k - self.bars.len()], MemberKind::String)
        }
    }

    pub fn endpoints(&self, k: usize) -> [usize; 2] {
        self.member(k).0
    }

    /// Dense signed incidence matrix (n_members × n_nodes).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n_members(), self.n_nodes);
        for k in 0..self.n_members() {
            let [i, j] = self.endpoints(k);
            c[(k, i)] = -1.0;
            c[(k, j)] = 1.0;
        }
        c
    }

    /// Dense unsigned incidence matrix (n_members × n_nodes).
    pub fn to_dense_abs(&self) -> DMatrix<f64> {
        self.to_dense().map(|v| v.abs())
    }
}

/// Which nodes are free to move. Fixed nodes keep their initial coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeNodeMap {
    n_nodes: usize,
    free: Vec<usize>,
}

impl FreeNodeMap {
    pub fn new(n_nodes: usize, mut free: Vec<usize>) -> Result<Self> {
        free.sort_unstable();
        free.dedup();
        if free.is_empty() {
            return Err(Error::InvalidStructure(
                "at least one node must be free".into(),
            ));
        }
        if let Some(&bad) = free.iter().find(|&&i| i >= n_nodes) {
            return Err(Error::InvalidStructure(format!(
                "free node {bad} out of range ({n_nodes} nodes)"
            )));
        }
        Ok(FreeNodeMap { n_nodes, free })
    }

    pub fn all_free(n_nodes: usize) -> Self {
        FreeNodeMap {
            n_nodes,
            free: (0..n_nodes).collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.free.binary_search(&node).is_ok()
    }

    /// Indices of the free degrees of freedom in the stacked nodal vector.
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut dofs = Vec::with_capacity(3 * self.free.len());
        for &i in &self.free {
            dofs.extend([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        dofs
    }

    /// Restricts a full-length vector to the free degrees of freedom.
    pub fn select(&self, full: &DVector<f64>) -> DVector<f64> {
        let dofs = self.free_dofs();
        DVector::from_fn(dofs.len(), |r, _| full[dofs[r]])
    }

    /// Restricts a full square operator to the free degrees of freedom.
    pub fn select_matrix(&self, full: &DMatrix<f64>) -> DMatrix<f64> {
        let dofs = self.free_dofs();
        DMatrix::from_fn(dofs.len(), dofs.len(), |r, c| full[(dofs[r], dofs[c])])
    }

    /// Adds a free-DOF increment into a full-length vector.
    pub fn scatter_add(&self, full: &mut DVector<f64>, delta: &DVector<f64>, scale: f64) {
        for (r, dof) in self.free_dofs().into_iter().enumerate() {
            full[dof] += scale * delta[r];
        }
    }
}

/// Identifies which benchmark a structure came from; drives default actuation
/// ranges and the reduced coordinate layout of datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    DBar,
    Prism,
    Lander,
    Custom,
}

impl StructureKind {
    pub fn name(self) -> &'static str {
        match self {
            StructureKind::DBar => "dbar",
            StructureKind::Prism => "prism",
            StructureKind::Lander => "lander",
            StructureKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dbar" => Ok(StructureKind::DBar),
            "prism" => Ok(StructureKind::Prism),
            "lander" => Ok(StructureKind::Lander),
            "custom" => Ok(StructureKind::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown structure kind '{other}' (expected dbar, prism, lander, or custom)"
            ))),
        }
    }
}

/// A complete tensegrity description: geometry, connectivity, member
/// properties, support conditions, and which cables are actuated.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub nodes: NodeSet,
    pub connectivity: Connectivity,
    pub members: Vec<MemberSpec>,
    pub free_map: FreeNodeMap,
    /// Indices into the string list (not global member indices).
    pub actuated_cables: Vec<usize>,
    pub kind: StructureKind,
    /// Material yield strength metadata (Pa); informational only.
    pub yield_strength: Option<f64>,
}

impl Structure {
    pub fn new(
        nodes: NodeSet,
        connectivity: Connectivity,
        members: Vec<MemberSpec>,
        free_map: FreeNodeMap,
        mut actuated_cables: Vec<usize>,
        kind: StructureKind,
    ) -> Result<Self> {
        if connectivity.n_nodes() != nodes.count() {
            return Err(Error::DimensionMismatch {
                context: "Structure nodes",
                expected: connectivity.n_nodes(),
                got: nodes.count(),
            });
        }
        if free_map.n_nodes() != nodes.count() {
            return Err(Error::DimensionMismatch {
                context: "Structure free map",
                expected: nodes.count(),
                got: free_map.n_nodes(),
            });
        }
        if members.len() != connectivity.n_members() {
            return Err(Error::DimensionMismatch {
                context: "Structure members",
                expected: connectivity.n_members(),
                got: members.len(),
            });
        }
        for (k, m) in members.iter().enumerate() {
            m.validate(k)?;
            let (_, kind_from_position) = connectivity.member(k);
            if m.kind != kind_from_position {
                return Err(Error::InvalidStructure(format!(
                    "member {k} is listed as a {:?} but sits in the {:?} block",
                    m.kind, kind_from_position
                )));
            }
        }
        actuated_cables.sort_unstable();
        actuated_cables.dedup();
        if let Some(&bad) = actuated_cables
            .iter()
            .find(|&&s| s >= connectivity.n_strings())
        {
            return Err(Error::InvalidStructure(format!(
                "actuated cable {bad} out of range ({} strings)",
                connectivity.n_strings()
            )));
        }
        Ok(Structure {
            nodes,
            connectivity,
            members,
            free_map,
            actuated_cables,
            kind,
            yield_strength: Some(STEEL_YIELD_STRENGTH),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.count()
    }

    pub fn n_members(&self) -> usize {
        self.connectivity.n_members()
    }

    pub fn n_bars(&self) -> usize {
        self.connectivity.n_bars()
    }

    pub fn n_strings(&self) -> usize {
        self.connectivity.n_strings()
    }

    pub fn n_actuated(&self) -> usize {
        self.actuated_cables.len()
    }

    /// Global member indices of the actuated cables.
    pub fn actuated_member_indices(&self) -> Vec<usize> {
        self.actuated_cables
            .iter()
            .map(|&s| self.connectivity.n_bars() + s)
            .collect()
    }

    /// Rest lengths of all members in member order.
    pub fn rest_lengths(&self) -> DVector<f64> {
        DVector::from_fn(self.n_members(), |k, _| self.members[k].rest_length)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StructureFile::from(self))?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(text)?;
        file.into_structure()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json_string()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Parse {
                path: path.display().to_string(),
                reason: inner.to_string(),
            },
            other => other,
        })
    }

    /// Content hash (SHA-256 of the compact JSON serialization); identifies
    /// the structure a dataset was generated from.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_string(&StructureFile::from(self))
            .expect("structure serialization cannot fail");
        let digest = Sha256::digest(compact.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }
}

/// On-disk JSON schema for [`Structure`].
#[derive(Serialize, Deserialize)]
struct StructureFile {
    nodes: Vec<[f64; 3]>,
    bars: Vec<[usize; 2]>,
    strings: Vec<[usize; 2]>,
    free_nodes: Vec<usize>,
    /// Indices into `strings`.
    actuated: Vec<usize>,
    members: Vec<MemberFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<StructureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yield_strength_pa: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct MemberFile {
    #[serde(rename = "E")]
    youngs_modulus: f64,
    #[serde(rename = "A")]
    area: f64,
    rho: f64,
    l0: f64,
}

impl From<&Structure> for StructureFile {
    fn from(s: &Structure) -> Self {
        StructureFile {
            nodes: (0..s.n_nodes())
                .map(|i| {
                    let p = s.nodes.position(i);
                    [p.x, p.y, p.z]
                })
                .collect(),
            bars: s.connectivity.bars().to_vec(),
            strings: s.connectivity.strings().to_vec(),
            free_nodes: s.free_map.free_nodes().to_vec(),
            actuated: s.actuated_cables.clone(),
            members: s
                .members
                .iter()
                .map(|m| MemberFile {
                    youngs_modulus: m.youngs_modulus,
                    area: m.area,
                    rho: m.density,
                    l0: m.rest_length,
                })
                .collect(),
            kind: Some(s.kind),
            yield_strength_pa: s.yield_strength,
        }
    }
}

impl StructureFile {
    fn into_structure(self) -> Result<Structure> {
        let nodes = NodeSet::from_points(&self.nodes)?;
        let connectivity = Connectivity::new(self.nodes.len(), self.bars, self.strings)?;
        let n_bars = connectivity.n_bars();
        let members: Vec<MemberSpec> = self
            .members
            .iter()
            .enumerate()
            .map(|(k, m)| MemberSpec {
                kind: if k < n_bars {
                    MemberKind::Bar
                } else {
                    MemberKind::String
                },
                youngs_modulus: m.youngs_modulus,
                area: m.area,
                density: m.rho,
                rest_length: m.l0,
            })
            .collect();
        let free_map = FreeNodeMap::new(nodes.count(), self.free_nodes)?;
        let mut s = Structure::new(
            nodes,
            connectivity,
            members,
            free_map,
            self.actuated,
            self.kind.unwrap_or(StructureKind::Custom),
        )?;
        s.yield_strength = self.yield_strength_pa;
        Ok(s)
    }
}

/// Current lengths and (unnormalized) direction columns `node_j − node_i` of
/// every member at the given coordinates.
pub fn member_geometry(
    connectivity: &Connectivity,
    nodes: &NodeSet,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n_e = connectivity.n_members();
    let mut lengths = DVector::zeros(n_e);
    let mut directions = DMatrix::zeros(3, n_e);
    for k in 0..n_e {
        let [i, j] = connectivity.endpoints(k);
        let h = nodes.position(j) - nodes.position(i);
        let l = h.norm();
        if l < 1e-12 {
            return Err(Error::DegenerateMember {
                index: k,
                length: l,
            });
        }
        lengths[k] = l;
        directions.set_column(k, &h);
    }
    Ok((lengths, directions))
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// Builds a structure from explicit point/member lists with steel members at
/// their as-built rest lengths.
fn assemble_steel(
    points: Vec<[f64; 3]>,
    bars: Vec<[usize; 2]>,
    strings: Vec<[usize; 2]>,
    actuated: Vec<usize>,
    kind: StructureKind,
) -> Result<Structure> {
    let mut members = Vec::with_capacity(bars.len() + strings.len());
    for &[i, j] in &bars {
        members.push(MemberSpec::steel_bar(distance(&points[i], &points[j])));
    }
    for &[i, j] in &strings {
        members.push(MemberSpec::steel_string(distance(&points[i], &points[j])));
    }
    let n_nodes = points.len();
    Structure::new(
        NodeSet::from_points(&points)?,
        Connectivity::new(n_nodes, bars, strings)?,
        members,
        FreeNodeMap::all_free(n_nodes),
        actuated,
        kind,
    )
}

/// Planar D-bar unit: a rhombus of four bars with a string across each
/// diagonal, both strings actuated.
///
/// Nodes sit at `(±a, 0, 0)` and `(0, ±a, 0)` with `a = bar_length/√2`, so
/// the strings have as-built length `√2·bar_length` (2 m for the default).
pub fn generate_dbar(bar_length: f64) -> Result<Structure> {
    require_positive(bar_length, "bar_length")?;
    let a = bar_length / std::f64::consts::SQRT_2;
    let points = vec![
        [a, 0.0, 0.0],
        [0.0, a, 0.0],
        [-a, 0.0, 0.0],
        [0.0, -a, 0.0],
    ];
    let bars = vec![[0, 1], [1, 2], [2, 3], [0, 3]];
    let strings = vec![[0, 2], [1, 3]];
    assemble_steel(points, bars, strings, vec![0, 1], StructureKind::DBar)
}

/// Triangular tensegrity prism: three bars `b_i–t_i`, triangle strings on both
/// faces, and three actuated vertical strings `b_i–t_{(i+1) mod 3}`.
///
/// Bottom nodes sit at angles `2πi/3` on a circle of `radius` at `z = 0`; top
/// nodes are rotated by `twist` at `z = height`. String order is bottom
/// triangle, top triangle, verticals, so the actuated cables are strings
/// 6, 7, 8.
pub fn generate_prism(radius: f64, height: f64, twist: f64) -> Result<Structure> {
    require_positive(radius, "radius")?;
    require_positive(height, "height")?;
    if !twist.is_finite() {
        return Err(Error::InvalidParameter("twist must be finite".into()));
    }
    let mut points = Vec::with_capacity(6);
    for i in 0..3 {
        let theta = 2.0 * PI * i as f64 / 3.0;
        points.push([radius * theta.cos(), radius * theta.sin(), 0.0]);
    }
    for i in 0..3 {
        let theta = 2.0 * PI * i as f64 / 3.0 + twist;
        points.push([radius * theta.cos(), radius * theta.sin(), height]);
    }
    let bars = vec![[0, 3], [1, 4], [2, 5]];
    let strings = vec![
        [0, 1],
        [1, 2],
        [0, 2],
        [3, 4],
        [4, 5],
        [3, 5],
        [0, 4],
        [1, 5],
        [2, 3],
    ];
    assemble_steel(points, bars, strings, vec![6, 7, 8], StructureKind::Prism)
}

/// Six-bar lander: three orthogonal pairs of parallel bars connected by 24
/// strings into a 4-regular string network.
///
/// With `d = separation_ratio · bar_length`, the bars parallel to x span
/// `(±L/2, ±d/2, 0)`, those parallel to y span `(0, ±L/2, ±d/2)`, and those
/// parallel to z span `(±d/2, 0, ±L/2)`. Each bar end connects to the
/// like-signed ends of both bars along the next axis and to both ends of the
/// matching bar along the previous axis. The two actuated strings share the
/// node at `(L/2, d/2, 0)` and end at `(0, L/2, d/2)` and `(d/2, 0, L/2)`.
pub fn generate_lander(bar_length: f64, separation_ratio: f64) -> Result<Structure> {
    require_positive(bar_length, "bar_length")?;
    if !(separation_ratio.is_finite() && separation_ratio > 0.0 && separation_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "separation_ratio must lie in (0, 1), got {separation_ratio}"
        )));
    }
    let l = bar_length / 2.0;
    let d = separation_ratio * bar_length / 2.0;
    // Node index = 4·axis + 2·(offset is −) + (end is −).
    let node_index = |axis: usize, s: usize, e: usize| 4 * axis + 2 * s + e;
    let sign = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
    let mut points = vec![[0.0; 3]; 12];
    for axis in 0..3 {
        for s in 0..2 {
            for e in 0..2 {
                let along = sign(e) * l;
                let offset = sign(s) * d;
                points[node_index(axis, s, e)] = match axis {
                    0 => [along, offset, 0.0],
                    1 => [0.0, along, offset],
                    _ => [offset, 0.0, along],
                };
            }
        }
    }
    let mut bars = Vec::with_capacity(6);
    for axis in 0..3 {
        for s in 0..2 {
            bars.push([node_index(axis, s, 0), node_index(axis, s, 1)]);
        }
    }
    let mut string_set = BTreeSet::new();
    for axis in 0..3 {
        let next = (axis + 1) % 3;
        let prev = (axis + 2) % 3;
        for s in 0..2 {
            for e in 0..2 {
                let u = node_index(axis, s, e);
                for v in [
                    node_index(next, 0, s),
                    node_index(next, 1, s),
                    node_index(prev, e, 0),
                    node_index(prev, e, 1),
                ] {
                    string_set.insert([u.min(v), u.max(v)]);
                }
            }
        }
    }
    let strings: Vec<[usize; 2]> = string_set.into_iter().collect();
    debug_assert_eq!(strings.len(), 24);
    let string_position = |pair: [usize; 2]| {
        strings
            .iter()
            .position(|&p| p == pair)
            .expect("actuated string present by construction")
    };
    let actuated = vec![string_position([0, 4]), string_position([0, 8])];
    assemble_steel(points, bars, strings, actuated, StructureKind::Lander)
}

/// Builds a benchmark structure with its default dimensions.
pub fn benchmark(kind: StructureKind) -> Result<Structure> {
    match kind {
        StructureKind::DBar => generate_dbar(DEFAULT_DBAR_BAR_LENGTH),
        StructureKind::Prism => generate_prism(
            DEFAULT_PRISM_RADIUS,
            DEFAULT_PRISM_HEIGHT,
            DEFAULT_PRISM_TWIST,
        ),
        StructureKind::Lander => {
            generate_lander(DEFAULT_LANDER_BAR_LENGTH, DEFAULT_LANDER_SEPARATION_RATIO)
        }
        StructureKind::Custom => Err(Error::InvalidParameter(
            "no default geometry for custom structures".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steel_sections() {
        assert_relative_eq!(bar_area(), 1.130_973_355_292_325_7e-4, max_relative = 1e-12);
        assert_relative_eq!(string_area(), 1.256_637_061_435_917_3e-5, max_relative = 1e-12);
    }

    #[test]
    fn nodeset_flattened_is_node_major() {
        let ns = NodeSet::from_points(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let flat = ns.flattened();
        assert_eq!(flat.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let back = NodeSet::from_flattened(&flat).unwrap();
        assert_eq!(back, ns);
    }

    #[test]
    fn nodeset_rejects_non_finite() {
        assert!(NodeSet::from_points(&[[0.0, 0.0, 0.0], [f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn connectivity_validation() {
        assert!(Connectivity::new(3, vec![[0, 0]], vec![[1, 2]]).is_err());
        assert!(Connectivity::new(3, vec![[0, 3]], vec![[1, 2]]).is_err());
        assert!(Connectivity::new(3, vec![[0, 1]], vec![[1, 0]]).is_err());
        assert!(Connectivity::new(4, vec![[0, 1]], vec![[1, 2]]).is_err());
        let c = Connectivity::new(3, vec![[1, 0]], vec![[1, 2]]).unwrap();
        assert_eq!(c.endpoints(0), [0, 1]);
        assert_eq!(c.member(1), ([1, 2], MemberKind::String));
    }

    #[test]
    fn connectivity_dense_row_signs() {
        let c = Connectivity::new(3, vec![[0, 1]], vec![[1, 2]]).unwrap();
        let dense = c.to_dense();
        assert_eq!(dense[(0, 0)], -1.0);
        assert_eq!(dense[(0, 1)], 1.0);
        assert_eq!(dense[(1, 1)], -1.0);
        assert_eq!(dense[(1, 2)], 1.0);
        assert_eq!(dense.row(0).iter().map(|v| v.abs()).sum::<f64>(), 2.0);
    }

    #[test]
    fn free_map_selection() {
        let map = FreeNodeMap::new(3, vec![2, 0]).unwrap();
        assert_eq!(map.free_nodes(), &[0, 2]);
        assert!(map.is_free(0) && !map.is_free(1));
        let full = DVector::from_iterator(9, (0..9).map(|i| i as f64));
        let sel = map.select(&full);
        assert_eq!(sel.as_slice(), &[0.0, 1.0, 2.0, 6.0, 7.0, 8.0]);
        let mut back = full.clone();
        map.scatter_add(&mut back, &DVector::from_element(6, 1.0), 2.0);
        assert_eq!(back[0], 2.0);
        assert_eq!(back[3], 3.0);
        assert_eq!(back[8], 10.0);
    }

    #[test]
    fn dbar_default_geometry() {
        let s = generate_dbar(DEFAULT_DBAR_BAR_LENGTH).unwrap();
        assert_eq!(s.n_nodes(), 4);
        assert_eq!(s.n_bars(), 4);
        assert_eq!(s.n_strings(), 2);
        assert_eq!(s.kind, StructureKind::DBar);
        let (lengths, _) = member_geometry(&s.connectivity, &s.nodes).unwrap();
        for k in 0..4 {
            assert_relative_eq!(lengths[k], std::f64::consts::SQRT_2, max_relative = 1e-12);
        }
        for k in 4..6 {
            assert_relative_eq!(lengths[k], 2.0, max_relative = 1e-12);
        }
        for (k, m) in s.members.iter().enumerate() {
            assert_relative_eq!(m.rest_length, lengths[k], max_relative = 1e-12);
        }
        assert_eq!(s.actuated_member_indices(), vec![4, 5]);
        assert_eq!(s.free_map.n_free(), 4);
    }

    #[test]
    fn prism_counts_and_vertical_length() {
        let s = generate_prism(0.25, 0.5, PI / 6.0).unwrap();
        assert_eq!(s.n_nodes(), 6);
        assert_eq!(s.n_members(), 12);
        assert_eq!(s.actuated_member_indices(), vec![9, 10, 11]);

        // At zero twist the vertical string b0–t1 has length √(h² + 3r²).
        let s0 = generate_prism(0.25, 0.5, 0.0).unwrap();
        let (lengths, _) = member_geometry(&s0.connectivity, &s0.nodes).unwrap();
        let expected = (0.5f64 * 0.5 + 3.0 * 0.25 * 0.25).sqrt();
        for k in [9, 10, 11] {
            assert_relative_eq!(lengths[k], expected, max_relative = 1e-12);
        }
        // Triangle edges on both faces have length r√3.
        for k in 3..9 {
            assert_relative_eq!(lengths[k], 0.25 * 3f64.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn prism_default_twist_orients_bars_long() {
        // At the default twist the bars are the long diagonals, longer than
        // the vertical strings they cross.
        let s = benchmark(StructureKind::Prism).unwrap();
        let (lengths, _) = member_geometry(&s.connectivity, &s.nodes).unwrap();
        let bar = lengths[0];
        let vertical = lengths[9];
        assert!(bar > vertical, "bar {bar} should exceed vertical {vertical}");
        assert_relative_eq!(
            bar,
            (0.25 + 2.0 * 0.0625 * (1.0 - (-5.0 * PI / 6.0).cos())).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn lander_wiring() {
        let s = benchmark(StructureKind::Lander).unwrap();
        assert_eq!(s.n_nodes(), 12);
        assert_eq!(s.n_bars(), 6);
        assert_eq!(s.n_strings(), 24);

        // The bar graph is a perfect matching: every node is on exactly one
        // bar, and the string graph is 4-regular.
        let mut bar_degree = vec![0usize; 12];
        for &[i, j] in s.connectivity.bars() {
            bar_degree[i] += 1;
            bar_degree[j] += 1;
        }
        assert!(bar_degree.iter().all(|&d| d == 1));
        let mut string_degree = vec![0usize; 12];
        for &[i, j] in s.connectivity.strings() {
            string_degree[i] += 1;
            string_degree[j] += 1;
        }
        assert!(string_degree.iter().all(|&d| d == 4), "{string_degree:?}");

        // Node (L/2, d/2, 0) is node 0 and connects to the four documented
        // partners.
        assert_eq!(s.nodes.position(0), Vector3::new(0.5, 0.25, 0.0));
        let mut partners: Vec<usize> = s
            .connectivity
            .strings()
            .iter()
            .filter(|&&[i, j]| i == 0 || j == 0)
            .map(|&[i, j]| if i == 0 { j } else { i })
            .collect();
        partners.sort_unstable();
        assert_eq!(partners, vec![4, 6, 8, 9]);
        assert_eq!(s.nodes.position(4), Vector3::new(0.0, 0.5, 0.25));
        assert_eq!(s.nodes.position(6), Vector3::new(0.0, 0.5, -0.25));
        assert_eq!(s.nodes.position(8), Vector3::new(0.25, 0.0, 0.5));
        assert_eq!(s.nodes.position(9), Vector3::new(0.25, 0.0, -0.5));

        // Every string has the same as-built length and the actuated pair is
        // node0–node4 and node0–node8.
        let (lengths, _) = member_geometry(&s.connectivity, &s.nodes).unwrap();
        let expected = 0.375f64.sqrt();
        for k in 6..30 {
            assert_relative_eq!(lengths[k], expected, max_relative = 1e-12);
        }
        let actuated: Vec<[usize; 2]> = s
            .actuated_member_indices()
            .iter()
            .map(|&k| s.connectivity.endpoints(k))
            .collect();
        assert_eq!(actuated, vec![[0, 4], [0, 8]]);
    }

    #[test]
    fn lander_rejects_bad_ratio() {
        assert!(generate_lander(1.0, 0.0).is_err());
        assert!(generate_lander(1.0, 1.0).is_err());
        assert!(generate_lander(-1.0, 0.5).is_err());
    }

    #[test]
    fn structure_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [StructureKind::DBar, StructureKind::Prism, StructureKind::Lander] {
            let s = benchmark(kind).unwrap();
            let path = dir.path().join(format!("{}.json", kind.name()));
            s.save(&path).unwrap();
            let loaded = Structure::load(&path).unwrap();
            assert_eq!(loaded, s);
            assert_eq!(loaded.fingerprint(), s.fingerprint());
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = generate_dbar(DEFAULT_DBAR_BAR_LENGTH).unwrap();
        let b = generate_dbar(1.5).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn member_kind_must_match_block() {
        let s = benchmark(StructureKind::DBar).unwrap();
        let mut members = s.members.clone();
        members[0].kind = MemberKind::String;
        let err = Structure::new(
            s.nodes.clone(),
            s.connectivity.clone(),
            members,
            s.free_map.clone(),
            s.actuated_cables.clone(),
            s.kind,
        );
        assert!(err.is_err());
    }

    #[test]
    fn member_geometry_signs_and_degeneracy() {
        let ns = NodeSet::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let c = Connectivity::new(2, vec![[0, 1]], vec![]).unwrap();
        let (lengths, dirs) = member_geometry(&c, &ns).unwrap();
        assert_relative_eq!(lengths[0], 1.0);
        assert_eq!(dirs.column(0).as_slice(), &[1.0, 0.0, 0.0]);

        let degenerate = NodeSet::from_points(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            member_geometry(&c, &degenerate),
            Err(Error::DegenerateMember { index: 0, .. })
        ));
    }
}
