//! Supervised-learning dataset generation: sample cable actuations, solve
//! each to equilibrium, run modal analysis, and assemble normalized
//! input/output rows.
//!
//! Output rows are laid out as `[coordinates | member forces | non-zero
//! frequencies]`. Forces are stored divided by `force_scale` (1 kN) and
//! frequencies by `freq_scale` (10⁶ rad/s); coordinates are unscaled meters.
//! Generation is deterministic for a fixed seed: every sample's inputs are
//! drawn up-front from one seeded stream in index order, so the result does
//! not depend on how the per-sample solves are scheduled.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::modal::modal_analysis;
use crate::numerics::Rng;
use crate::statics::{solve_equilibrium, EquilibriumState, LoadCase, SolverConfig};
use crate::topology::{Structure, StructureKind};
use crate::{Error, Result};

/// Column counts of the three output groups, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub coords: usize,
    pub forces: usize,
    pub frequencies: usize,
}

impl OutputLayout {
    pub fn total(&self) -> usize {
        self.coords + self.forces + self.frequencies
    }

    pub fn coord_range(&self) -> std::ops::Range<usize> {
        0..self.coords
    }

    pub fn force_range(&self) -> std::ops::Range<usize> {
        self.coords..self.coords + self.forces
    }

    pub fn freq_range(&self) -> std::ops::Range<usize> {
        self.coords + self.forces..self.total()
    }
}

/// Normalization constants applied to stored outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    /// Forces are stored in units of this many newtons.
    pub force_scale: f64,
    /// Frequencies are stored in units of this many rad/s.
    pub freq_scale: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Scales {
            force_scale: 1e3,
            freq_scale: 1e6,
        }
    }
}

/// How to sample the actuation inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Per-cable `[lo, hi]` ranges for the rest-length change (m).
    pub ranges: Vec<(f64, f64)>,
    pub sample_count: usize,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn new(ranges: Vec<(f64, f64)>, sample_count: usize, seed: u64) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::InvalidParameter(
                "sample_count must be at least 1".into(),
            ));
        }
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "cable {j}: invalid actuation range [{lo}, {hi}]"
                )));
            }
        }
        Ok(SamplingSpec {
            ranges,
            sample_count,
            seed,
        })
    }

    /// The shortening-only ranges used by the built-in benchmarks.
    pub fn benchmark(kind: StructureKind, sample_count: usize, seed: u64) -> Result<Self> {
        let ranges = benchmark_ranges(kind)?;
        SamplingSpec::new(ranges, sample_count, seed)
    }
}

/// Per-cable actuation ranges of the benchmark studies.
pub fn benchmark_ranges(kind: StructureKind) -> Result<Vec<(f64, f64)>> {
    match kind {
        StructureKind::DBar => Ok(vec![(-1.0, 0.0); 2]),
        StructureKind::Prism => Ok(vec![(-0.15, 0.0); 3]),
        StructureKind::Lander => Ok(vec![(-0.3, 0.0); 2]),
        StructureKind::Custom => Err(Error::InvalidParameter(
            "custom structures have no default actuation ranges".into(),
        )),
    }
}

/// Extra generation context carried alongside the sample matrices so saved
/// datasets are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: SolverConfig,
    pub ranges: Vec<(f64, f64)>,
    pub structure_kind: StructureKind,
}

/// A generated dataset: one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Actuation inputs, `sample_count × n_cables` (m).
    pub inputs: DMatrix<f64>,
    /// Normalized outputs, `sample_count × layout.total()`.
    pub outputs: DMatrix<f64>,
    pub layout: OutputLayout,
    pub scales: Scales,
    pub seed: u64,
    /// Content hash of the structure the samples were solved on.
    pub structure_fingerprint: String,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.ncols()
    }
}

/// The coordinate block recorded for a converged state.
///
/// Free-floating structures are translated so the nodal centroid sits at the
/// origin before coordinates are read, making the regression target unique
/// despite rigid-translation indeterminacy; supported structures are already
/// pinned and are left untouched. No rotational re-alignment is applied: the
/// Newton iteration preserves the build orientation exactly for translations
/// and to solver precision for rotations, whereas principal-axis frames are
/// discontinuous across the symmetric configurations these benchmarks
/// inhabit.
///
/// A D-bar reduces to 2 values (x of the first node, y of the second; its
/// other free coordinates are fixed by symmetry); every other structure
/// reports all free nodal coordinates node-major.
pub fn reduced_coordinates(s: &Structure, state: &EquilibriumState) -> DVector<f64> {
    let all_free = s.free_map.n_free() == s.n_nodes();
    let nodes = if all_free {
        state.nodes.translated(-state.nodes.centroid())
    } else {
        state.nodes.clone()
    };
    if s.kind == StructureKind::DBar {
        DVector::from_vec(vec![nodes.position(0).x, nodes.position(1).y])
    } else {
        s.free_map.select(&nodes.flattened())
    }
}

/// Solves one sample and assembles its normalized output row.
fn sample_row(
    s: &Structure,
    dl: &DVector<f64>,
    solver: &SolverConfig,
    scales: &Scales,
) -> Result<(DVector<f64>, OutputLayout)> {
    let load = LoadCase::free(s.n_nodes());
    let state = solve_equilibrium(s, dl, &load, solver)?;
    let modal = modal_analysis(s, &state)?;
    let coords = reduced_coordinates(s, &state);
    let freqs = modal.sorted_nonzero_frequencies();
    let layout = OutputLayout {
        coords: coords.len(),
        forces: state.member_forces.len(),
        frequencies: freqs.len(),
    };
    let mut row = DVector::zeros(layout.total());
    row.rows_mut(0, layout.coords).copy_from(&coords);
    for (k, &t) in state.member_forces.iter().enumerate() {
        row[layout.coords + k] = t / scales.force_scale;
    }
    for (k, &w) in freqs.iter().enumerate() {
        row[layout.coords + layout.forces + k] = w / scales.freq_scale;
    }
    Ok((row, layout))
}

/// Generates a dataset by solving every sampled actuation. Any sample that
/// fails aborts generation (reporting the smallest failing index) so the
/// input distribution stays exactly uniform.
pub fn generate(s: &Structure, spec: &SamplingSpec, solver: &SolverConfig) -> Result<Dataset> {
    if spec.ranges.len() != s.n_actuated() {
        return Err(Error::DimensionMismatch {
            context: "sampling ranges",
            expected: s.n_actuated(),
            got: spec.ranges.len(),
        });
    }
    let n = spec.sample_count;
    let k = spec.ranges.len();
    let mut rng = Rng::new(spec.seed);
    let mut inputs = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            let (lo, hi) = spec.ranges[j];
            inputs[(i, j)] = if lo == hi { lo } else { rng.uniform(lo, hi) };
        }
    }

    let scales = Scales::default();
    let rows: Vec<Result<(DVector<f64>, OutputLayout)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dl = DVector::from_fn(k, |j, _| inputs[(i, j)]);
            sample_row(s, &dl, solver, &scales)
        })
        .collect();

    let mut layout: Option<OutputLayout> = None;
    let mut outputs: Option<DMatrix<f64>> = None;
    for (i, row) in rows.into_iter().enumerate() {
        let (row, row_layout) = row.map_err(|e| Error::Generation {
            sample: i,
            dl: (0..k).map(|j| inputs[(i, j)]).collect(),
            source: Box::new(e),
        })?;
        let layout = *layout.get_or_insert(row_layout);
        if row_layout != layout {
            return Err(Error::LayoutMismatch {
                sample: i,
                reason: format!("row layout {row_layout:?} differs from first sample {layout:?}"),
            });
        }
        let out = outputs.get_or_insert_with(|| DMatrix::zeros(n, layout.total()));
        out.row_mut(i).tr_copy_from(&row);
    }
    Ok(Dataset {
        inputs,
        outputs: outputs.expect("sample_count >= 1"),
        layout: layout.expect("sample_count >= 1"),
        scales,
        seed: spec.seed,
        structure_fingerprint: s.fingerprint(),
        provenance: Some(Provenance {
            solver: *solver,
            ranges: spec.ranges.clone(),
            structure_kind: s.kind,
        }),
    })
}

fn select_rows(d: &Dataset, rows: &[usize], seed: u64) -> Dataset {
    Dataset {
        inputs: DMatrix::from_fn(rows.len(), d.n_inputs(), |r, c| d.inputs[(rows[r], c)]),
        outputs: DMatrix::from_fn(rows.len(), d.n_outputs(), |r, c| d.outputs[(rows[r], c)]),
        layout: d.layout,
        scales: d.scales,
        seed,
        structure_fingerprint: d.structure_fingerprint.clone(),
        provenance: d.provenance.clone(),
    }
}

/// Shuffles the rows with a seeded permutation and splits them
/// `⌊fraction·n⌋ / rest` into train and test sets.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = d.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::EmptySplit {
            fraction: train_fraction,
            n,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut perm);
    Ok((
        select_rows(d, &perm[..n_train], seed),
        select_rows(d, &perm[n_train..], seed),
    ))
}

/// Serialized sidecar schema (`<stem>.meta.json`).
#[derive(Serialize, Deserialize)]
struct MetaFile {
    sample_count: usize,
    n_inputs: usize,
    layout: OutputLayout,
    scales: Scales,
    seed: u64,
    structure_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `<stem>.csv` (header `dl_*, coord_*, force_*, freq_*`; floats with
/// 17 significant digits, which round-trip `f64` exactly) and the
/// `<stem>.meta.json` sidecar. Returns both paths.
pub fn save(d: &Dataset, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let meta_path = dir.join(format!("{stem}.meta.json"));

    let mut header = Vec::with_capacity(d.n_inputs() + d.n_outputs());
    for j in 0..d.n_inputs() {
        header.push(format!("dl_{}", j + 1));
    }
    for c in 0..d.layout.coords {
        header.push(format!("coord_{}", c + 1));
    }
    for f in 0..d.layout.forces {
        header.push(format!("force_{}", f + 1));
    }
    for q in 0..d.layout.frequencies {
        header.push(format!("freq_{}", q + 1));
    }
    let mut text = header.join(",");
    text.push('\n');
    for i in 0..d.len() {
        let mut fields = Vec::with_capacity(d.n_inputs() + d.n_outputs());
        for j in 0..d.n_inputs() {
            fields.push(format_float(d.inputs[(i, j)]));
        }
        for j in 0..d.n_outputs() {
            fields.push(format_float(d.outputs[(i, j)]));
        }
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(&csv_path, text)?;

    let meta = MetaFile {
        sample_count: d.len(),
        n_inputs: d.n_inputs(),
        layout: d.layout,
        scales: d.scales,
        seed: d.seed,
        structure_fingerprint: d.structure_fingerprint.clone(),
        provenance: d.provenance.clone(),
    };
    let mut meta_text = serde_json::to_string_pretty(&meta)?;
    meta_text.push('\n');
    std::fs::write(&meta_path, meta_text)?;
    Ok((csv_path, meta_path))
}

fn parse_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Path of the metadata sidecar belonging to a dataset CSV.
pub fn meta_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Loads a dataset written by [`save`], restoring it bit-identically.
pub fn load(csv_path: &Path) -> Result<Dataset> {
    let meta_path = meta_path_for(csv_path);
    let meta_text = std::fs::read_to_string(&meta_path)?;
    let meta: MetaFile = serde_json::from_str(&meta_text)
        .map_err(|e| parse_error(&meta_path, e.to_string()))?;

    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_error(csv_path, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let expected_cols = meta.n_inputs + meta.layout.total();
    if columns.len() != expected_cols {
        return Err(parse_error(
            csv_path,
            format!(
                "header has {} columns, metadata expects {}",
                columns.len(),
                expected_cols
            ),
        ));
    }
    let count_prefix = |prefix: &str| columns.iter().filter(|c| c.starts_with(prefix)).count();
    if count_prefix("dl_") != meta.n_inputs
        || count_prefix("coord_") != meta.layout.coords
        || count_prefix("force_") != meta.layout.forces
        || count_prefix("freq_") != meta.layout.frequencies
    {
        return Err(parse_error(csv_path, "header groups disagree with metadata"));
    }

    let mut inputs = DMatrix::zeros(meta.sample_count, meta.n_inputs);
    let mut outputs = DMatrix::zeros(meta.sample_count, meta.layout.total());
    let mut rows = 0usize;
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if rows >= meta.sample_count {
            return Err(parse_error(
                csv_path,
                format!("more rows than the declared {}", meta.sample_count),
            ));
        }
        let mut fields = line.split(',');
        for j in 0..expected_cols {
            let field = fields.next().ok_or_else(|| {
                parse_error(csv_path, format!("line {}: missing field {j}", line_no + 2))
            })?;
            let value: f64 = field.trim().parse().map_err(|e| {
                parse_error(csv_path, format!("line {}: {e}", line_no + 2))
            })?;
            if j < meta.n_inputs {
                inputs[(rows, j)] = value;
            } else {
                outputs[(rows, j - meta.n_inputs)] = value;
            }
        }
        if fields.next().is_some() {
            return Err(parse_error(
                csv_path,
                format!("line {}: too many fields", line_no + 2),
            ));
        }
        rows += 1;
    }
    if rows != meta.sample_count {
        return Err(parse_error(
            csv_path,
            format!("{} data rows, metadata declares {}", rows, meta.sample_count),
        ));
    }
    Ok(Dataset {
        inputs,
        outputs,
        layout: meta.layout,
        scales: meta.scales,
        seed: meta.seed,
        structure_fingerprint: meta.structure_fingerprint,
        provenance: meta.provenance,
    })
}
