//! Static equilibrium: force densities, stiffness assembly, and the
//! regularized-Newton form-finding solver driven by cable rest-length
//! actuation.
//!
//! Members are linear-elastic rods with force density
//! `x_k = E_k·A_k·(1/r_k − 1/l_k)` where `r_k` is the rest length and `l_k`
//! the current length. Strings cannot push: a string shorter than its rest
//! length is slack and carries nothing. The solver minimizes total potential
//! energy over the free nodal coordinates; at a minimum the free-node residual
//! of `K(n)·n = f_applied` vanishes.

use nalgebra::{DMatrix, DVector};

use crate::numerics::{minimize_scalar, solve_spd, sym_eig};
use crate::topology::{member_geometry, Connectivity, MemberKind, NodeSet, Structure};
use crate::{Error, Result};

/// Gravitational acceleration used by the CLI's optional self-weight load
/// (m/s²).
pub const GRAVITY_ACCEL: f64 = 9.81;

/// External loading for a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    /// Applied nodal forces, stacked node-major (length `3·n_nodes`).
    pub external: DVector<f64>,
    /// Self-weight: gravitational acceleration pulling along −z, applied to
    /// lumped nodal masses. Requires at least one fixed node.
    pub gravity: Option<f64>,
}

impl LoadCase {
    /// No external forces, no gravity.
    pub fn free(n_nodes: usize) -> Self {
        LoadCase {
            external: DVector::zeros(3 * n_nodes),
            gravity: None,
        }
    }

    pub fn with_gravity(n_nodes: usize, accel: f64) -> Self {
        LoadCase {
            external: DVector::zeros(3 * n_nodes),
            gravity: Some(accel),
        }
    }
}

/// Newton solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Convergence threshold on the free-node residual norm (N).
    pub tolerance: f64,
    /// Baseline diagonal shift keeping the Newton system positive definite.
    pub mu: f64,
    pub max_iterations: usize,
    /// Interval tolerance for the golden-section step-length search.
    pub line_search_tol: f64,
    pub line_search_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            mu: 0.1,
            max_iterations: 200,
            line_search_tol: 1e-8,
            line_search_max_iter: 100,
        }
    }
}

/// Converged output of the form-finding solver.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    /// Equilibrium coordinates of every node (fixed nodes unchanged).
    pub nodes: NodeSet,
    /// Rest lengths the solve was run with (actuation already applied).
    pub rest_lengths: DVector<f64>,
    /// Member lengths at equilibrium.
    pub lengths: DVector<f64>,
    /// Force densities `x` (N/m); zero for slack strings.
    pub force_densities: DVector<f64>,
    /// Axial member forces `t = x·l` (N); tension positive.
    pub member_forces: DVector<f64>,
    /// Residual norm on the free degrees of freedom at exit (N).
    pub residual_norm: f64,
    /// Newton updates performed (0 when the start point is in equilibrium).
    pub iterations: usize,
    /// Total potential energy at equilibrium (J).
    pub potential_energy: f64,
}

/// Lumped nodal masses: half of each member's mass to each endpoint (kg).
pub fn lumped_nodal_masses(s: &Structure) -> DVector<f64> {
    let mut masses = DVector::zeros(s.n_nodes());
    for k in 0..s.n_members() {
        let [i, j] = s.connectivity.endpoints(k);
        let half = 0.5 * s.members[k].mass();
        masses[i] += half;
        masses[j] += half;
    }
    masses
}

/// Nodal gravity loads for acceleration `accel`: `accel·m_i` on each z entry.
/// The applied force used by the solver is `external − gravity_vector`, so a
/// positive entry here pulls the node along −z.
pub fn gravity_vector(s: &Structure, accel: f64) -> DVector<f64> {
    let masses = lumped_nodal_masses(s);
    let mut g = DVector::zeros(3 * s.n_nodes());
    for i in 0..s.n_nodes() {
        g[3 * i + 2] = accel * masses[i];
    }
    g
}

/// Force densities at the given member lengths. Slack strings (shorter than
/// rest) contribute zero; bars carry compression freely.
pub fn force_densities(
    s: &Structure,
    rest_lengths: &DVector<f64>,
    lengths: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(s.n_members(), |k, _| {
        let (_, kind) = s.connectivity.member(k);
        if kind == MemberKind::String && lengths[k] < rest_lengths[k] {
            0.0
        } else {
            s.members[k].ea() * (1.0 / rest_lengths[k] - 1.0 / lengths[k])
        }
    })
}

/// Node-space force-density Laplacian `Cᵀ·diag(x)·C` (n_nodes × n_nodes).
pub fn force_density_laplacian(connectivity: &Connectivity, x: &DVector<f64>) -> DMatrix<f64> {
    let n = connectivity.n_nodes();
    let mut lap = DMatrix::zeros(n, n);
    for k in 0..connectivity.n_members() {
        let [i, j] = connectivity.endpoints(k);
        lap[(i, i)] += x[k];
        lap[(j, j)] += x[k];
        lap[(i, j)] -= x[k];
        lap[(j, i)] -= x[k];
    }
    lap
}

/// Geometric stiffness `(Cᵀ·diag(x)·C) ⊗ I₃` acting on stacked coordinates.
pub fn stiffness_matrix(connectivity: &Connectivity, x: &DVector<f64>) -> DMatrix<f64> {
    let n = connectivity.n_nodes();
    let lap = force_density_laplacian(connectivity, x);
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in 0..n {
            if lap[(i, j)] != 0.0 {
                for axis in 0..3 {
                    k[(3 * i + axis, 3 * j + axis)] = lap[(i, j)];
                }
            }
        }
    }
    k
}

/// Equilibrium matrix: column `k` holds the unit direction of member `k`
/// leaving node `i` (as `−ĥ_k`) and entering node `j` (as `+ĥ_k`), so every
/// column has norm √2 and `A·diag(x)·l` equals the internal force vector
/// `K·n`.
pub fn equilibrium_matrix(connectivity: &Connectivity, nodes: &NodeSet) -> Result<DMatrix<f64>> {
    let (lengths, directions) = member_geometry(connectivity, nodes)?;
    let n = connectivity.n_nodes();
    let mut a = DMatrix::zeros(3 * n, connectivity.n_members());
    for k in 0..connectivity.n_members() {
        let [i, j] = connectivity.endpoints(k);
        let unit = directions.column(k) / lengths[k];
        for axis in 0..3 {
            a[(3 * i + axis, k)] = -unit[axis];
            a[(3 * j + axis, k)] = unit[axis];
        }
    }
    Ok(a)
}

/// Tangent stiffness at the given coordinates: geometric part
/// `(Cᵀ·diag(x)·C) ⊗ I₃` plus the material part `(E·A/l³)·h·hᵀ` per taut
/// member. Slack strings contribute neither term. This is the exact Jacobian
/// of the internal force `K(n)·n` with respect to `n`.
pub fn tangent_stiffness(
    s: &Structure,
    nodes: &NodeSet,
    x: &DVector<f64>,
    rest_lengths: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let (lengths, directions) = member_geometry(&s.connectivity, nodes)?;
    let mut kt = stiffness_matrix(&s.connectivity, x);
    for k in 0..s.n_members() {
        let (_, kind) = s.connectivity.member(k);
        if kind == MemberKind::String && lengths[k] < rest_lengths[k] {
            continue;
        }
        let [i, j] = s.connectivity.endpoints(k);
        let h = directions.column(k);
        let scale = s.members[k].ea() / (lengths[k] * lengths[k] * lengths[k]);
        for a in 0..3 {
            for b in 0..3 {
                let block = scale * h[a] * h[b];
                kt[(3 * i + a, 3 * i + b)] += block;
                kt[(3 * j + a, 3 * j + b)] += block;
                kt[(3 * i + a, 3 * j + b)] -= block;
                kt[(3 * j + a, 3 * i + b)] -= block;
            }
        }
    }
    Ok(kt)
}

/// Total potential energy: elastic strain energy of taut members minus the
/// work of the applied nodal forces.
fn potential_energy_inner(
    s: &Structure,
    rest_lengths: &DVector<f64>,
    applied: &DVector<f64>,
    nodes: &NodeSet,
) -> Result<f64> {
    let (lengths, _) = member_geometry(&s.connectivity, nodes)?;
    let mut v = 0.0;
    for k in 0..s.n_members() {
        let (_, kind) = s.connectivity.member(k);
        if kind == MemberKind::String && lengths[k] < rest_lengths[k] {
            continue;
        }
        let stretch = lengths[k] - rest_lengths[k];
        v += s.members[k].ea() * stretch * stretch / (2.0 * rest_lengths[k]);
    }
    Ok(v - applied.dot(&nodes.flattened()))
}

/// Potential energy of a configuration under a load case (gravity included
/// via the lumped nodal masses).
pub fn potential_energy(
    s: &Structure,
    rest_lengths: &DVector<f64>,
    load: &LoadCase,
    nodes: &NodeSet,
) -> Result<f64> {
    let applied = applied_force(s, load)?;
    potential_energy_inner(s, rest_lengths, &applied, nodes)
}

/// Net applied force `external − gravity`, validated against the structure.
fn applied_force(s: &Structure, load: &LoadCase) -> Result<DVector<f64>> {
    if load.external.len() != 3 * s.n_nodes() {
        return Err(Error::DimensionMismatch {
            context: "LoadCase::external",
            expected: 3 * s.n_nodes(),
            got: load.external.len(),
        });
    }
    let mut applied = load.external.clone();
    if let Some(accel) = load.gravity {
        if s.free_map.n_free() == s.n_nodes() {
            return Err(Error::GravityWithoutSupport);
        }
        applied -= gravity_vector(s, accel);
    }
    Ok(applied)
}

/// Residual `applied − K(n)·n` over all degrees of freedom.
fn full_residual(
    s: &Structure,
    applied: &DVector<f64>,
    x: &DVector<f64>,
    directions: &DMatrix<f64>,
) -> DVector<f64> {
    let mut r = applied.clone();
    for k in 0..s.n_members() {
        let [i, j] = s.connectivity.endpoints(k);
        let f = x[k] * directions.column(k);
        // Internal force K·n pushes node i by −x·h and node j by +x·h;
        // subtracting it adds +x·h at i.
        for axis in 0..3 {
            r[3 * i + axis] += f[axis];
            r[3 * j + axis] -= f[axis];
        }
    }
    r
}

/// Applies cable actuation `dl` to the structure's rest lengths: entry `a` is
/// added to actuated cable `a`; all other members keep their stored rest
/// length.
pub fn actuated_rest_lengths(s: &Structure, dl: &DVector<f64>) -> Result<DVector<f64>> {
    if dl.len() != s.n_actuated() {
        return Err(Error::DimensionMismatch {
            context: "actuation vector",
            expected: s.n_actuated(),
            got: dl.len(),
        });
    }
    let mut rest = s.rest_lengths();
    for (a, &member) in s.actuated_member_indices().iter().enumerate() {
        rest[member] += dl[a];
    }
    Ok(rest)
}

fn validate_rest_lengths(rest: &DVector<f64>, n_members: usize) -> Result<()> {
    if rest.len() != n_members {
        return Err(Error::DimensionMismatch {
            context: "rest lengths",
            expected: n_members,
            got: rest.len(),
        });
    }
    for (k, &r) in rest.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidRestLength {
                index: k,
                rest_length: r,
            });
        }
    }
    Ok(())
}

/// Finds the equilibrium configuration after adding `dl` to the actuated
/// cables' rest lengths (negative entries shorten).
pub fn solve_equilibrium(
    s: &Structure,
    dl: &DVector<f64>,
    load: &LoadCase,
    config: &SolverConfig,
) -> Result<EquilibriumState> {
    let rest = actuated_rest_lengths(s, dl)?;
    solve_with_rest_lengths(s, &rest, load, config)
}

/// Finds the equilibrium configuration for an explicit rest-length vector.
pub fn solve_with_rest_lengths(
    s: &Structure,
    rest_lengths: &DVector<f64>,
    load: &LoadCase,
    config: &SolverConfig,
) -> Result<EquilibriumState> {
    solve_traced(s, rest_lengths, load, config).map(|(state, _)| state)
}

/// Like [`solve_with_rest_lengths`] but also returns the potential energy of
/// the start point and of every accepted iterate; the sequence is
/// non-increasing because each Newton direction is a descent direction and
/// the step length minimizes the potential along it.
pub fn solve_traced(
    s: &Structure,
    rest_lengths: &DVector<f64>,
    load: &LoadCase,
    config: &SolverConfig,
) -> Result<(EquilibriumState, Vec<f64>)> {
    validate_rest_lengths(rest_lengths, s.n_members())?;
    let applied = applied_force(s, load)?;
    let free = &s.free_map;

    let mut coords = s.nodes.clone();
    let mut trace =
        vec![potential_energy_inner(s, rest_lengths, &applied, &coords)?];
    let mut iterations = 0;
    loop {
        let (lengths, directions) = member_geometry(&s.connectivity, &coords)?;
        let x = force_densities(s, rest_lengths, &lengths);
        let residual = full_residual(s, &applied, &x, &directions);
        let f_a = free.select(&residual);
        let residual_norm = f_a.norm();
        if residual_norm <= config.tolerance {
            let member_forces = x.component_mul(&lengths);
            let state = EquilibriumState {
                nodes: coords,
                rest_lengths: rest_lengths.clone(),
                lengths,
                force_densities: x,
                member_forces,
                residual_norm,
                iterations,
                potential_energy: *trace.last().unwrap(),
            };
            return Ok((state, trace));
        }
        if iterations >= config.max_iterations {
            return Err(Error::NonConvergence {
                residual: residual_norm,
                iterations,
            });
        }

        let kt = tangent_stiffness(s, &coords, &x, rest_lengths)?;
        let kt_aa = free.select_matrix(&kt);
        let (eigenvalues, _) = sym_eig(&kt_aa)?;
        let lambda_min = eigenvalues[0];
        let shift = if lambda_min < 0.0 {
            config.mu - lambda_min
        } else {
            config.mu
        };
        let mut shifted = kt_aa;
        for d in 0..shifted.nrows() {
            shifted[(d, d)] += shift;
        }
        let dn_a = solve_spd(&shifted, &f_a)?;

        let base = coords.flattened();
        let objective = |delta: f64| {
            let mut probe = base.clone();
            free.scatter_add(&mut probe, &dn_a, delta);
            match NodeSet::from_flattened(&probe)
                .and_then(|ns| potential_energy_inner(s, rest_lengths, &applied, &ns))
            {
                Ok(v) => v,
                // A degenerate probe point (coincident nodes) cannot be the
                // minimizer; poison it so the search backs away.
                Err(_) => f64::INFINITY,
            }
        };
        let (delta, _) = minimize_scalar(
            &objective,
            0.0,
            1.0,
            config.line_search_tol,
            config.line_search_max_iter,
        )?;
        let mut updated = base;
        free.scatter_add(&mut updated, &dn_a, delta);
        coords = NodeSet::from_flattened(&updated)?;
        trace.push(potential_energy_inner(s, rest_lengths, &applied, &coords)?);
        iterations += 1;
    }
}
