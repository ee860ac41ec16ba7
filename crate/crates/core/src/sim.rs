//! Synthetic graph-recovery benchmarks.
//!
//! Random sparse concentration matrices, the clean / heavy-tailed /
//! contaminated data scenarios, and ROC evaluation of the recovered edge
//! sets over a penalty path.
//!
//! Penalties in this module are on the glasso scale (per-entry soft
//! threshold applied to a covariance-like matrix). The tlasso and its
//! alternative receive `n · ρ` so that one grid value means the same amount
//! of shrinkage for every method.

use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alt_t::{alt_tlasso_fit, alt_weighted_scatter, McmcConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glasso::{glasso_fit, GlassoOptions, GlassoResult, PenaltySpec};
use crate::linalg::{Cholesky, SpdMatrix};
use crate::rng;
use crate::t_model::{sample_t, weighted_scatter, TParams};
use crate::tlasso::{tlasso_fit, TlassoConfig, TlassoFit};

/// Undirected graph on `p` nodes stored as ordered pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut e = Self::empty(p);
        for i in 0..p {
            for j in (i + 1)..p {
                e.edges.insert((i, j));
            }
        }
        e
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut e = Self::empty(p);
        for (a, b) in pairs {
            e.insert(a, b)?;
        }
        Ok(e)
    }

    pub fn insert(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
        }
        for k in [a, b] {
            if k >= self.p {
                return Err(Error::IndexOutOfRange { index: k, dim: self.p });
            }
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn max_edges(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    pub fn common(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }
}

/// Off-diagonal entries of `theta` that are exactly nonzero.
pub fn edges_from_theta(theta: &SpdMatrix) -> EdgeSet {
    let p = theta.dim();
    let mut e = EdgeSet::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if theta.get(i, j) != 0.0 {
                e.edges.insert((i, j));
            }
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub p: usize,
    pub edge_prob: f64,
    /// Nonzero off-diagonals are drawn uniformly from `±[low, high]`.
    pub offdiag_low: f64,
    pub offdiag_high: f64,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(p: usize, edge_prob: f64, seed: u64) -> Self {
        Self {
            p,
            edge_prob,
            offdiag_low: 0.3,
            offdiag_high: 0.6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidScenario("graph needs at least one node".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::InvalidScenario(format!(
                "edge probability {} outside [0, 1]",
                self.edge_prob
            )));
        }
        if !(self.offdiag_low > 0.0 && self.offdiag_high >= self.offdiag_low) {
            return Err(Error::InvalidScenario("invalid off-diagonal magnitude range".into()));
        }
        Ok(())
    }
}

/// A ground-truth concentration matrix and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueGraph {
    pub theta: SpdMatrix,
    pub truth: EdgeSet,
}

impl TrueGraph {
    pub fn covariance(&self) -> SpdMatrix {
        Cholesky::new(&self.theta)
            .expect("diagonally dominant by construction")
            .inverse()
    }
}

/// Draws each pair independently with `edge_prob`, fills it with a signed
/// uniform magnitude, then sets `θ_ii = Σ_{j≠i} |θ_ij| + 1` so the matrix is
/// strictly diagonally dominant and hence positive definite.
pub fn random_concentration(spec: &GraphSpec) -> Result<TrueGraph> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[]);
    let p = spec.p;
    let mut theta = SpdMatrix::zeros(p);
    let mut truth = EdgeSet::empty(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < spec.edge_prob {
                let mag = rng.random_range(spec.offdiag_low..=spec.offdiag_high);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                theta.set(i, j, sign * mag);
                truth.edges.insert((i, j));
            }
        }
    }
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| theta.get(i, j).abs()).sum();
        theta.set(i, i, off + 1.0);
    }
    Ok(TrueGraph { theta, truth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Gaussian,
    StudentT {
        nu: f64,
    },
    /// The same `nodes` coordinates are replaced in `rows` random observations.
    ContaminatedFixed {
        nodes: usize,
        rows: usize,
        mean_multiplier: f64,
        #[serde(default)]
        node_set: Option<Vec<usize>>,
    },
    /// Observations are split into `blocks` groups of `block_size`; each group
    /// contaminates its own disjoint set of `nodes_per_block` coordinates.
    ContaminatedBlocks {
        blocks: usize,
        block_size: usize,
        nodes_per_block: usize,
        mean_multiplier: f64,
        #[serde(default)]
        node_sets: Option<Vec<Vec<usize>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    #[serde(flatten)]
    pub kind: ScenarioKind,
}

impl ScenarioSpec {
    pub fn gaussian(n: usize) -> Self {
        Self {
            n,
            kind: ScenarioKind::Gaussian,
        }
    }

    pub fn student_t(n: usize, nu: f64) -> Self {
        Self {
            n,
            kind: ScenarioKind::StudentT { nu },
        }
    }

    pub fn contaminated_fixed(n: usize, nodes: usize, rows: usize, mean_multiplier: f64) -> Self {
        Self {
            n,
            kind: ScenarioKind::ContaminatedFixed {
                nodes,
                rows,
                mean_multiplier,
                node_set: None,
            },
        }
    }

    pub fn contaminated_blocks(
        n: usize,
        blocks: usize,
        block_size: usize,
        nodes_per_block: usize,
        mean_multiplier: f64,
    ) -> Self {
        Self {
            n,
            kind: ScenarioKind::ContaminatedBlocks {
                blocks,
                block_size,
                nodes_per_block,
                mean_multiplier,
                node_sets: None,
            },
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n == 0 {
            return bad("sample size must be positive".into());
        }
        match &self.kind {
            ScenarioKind::Gaussian => Ok(()),
            ScenarioKind::StudentT { nu } => {
                crate::t_model::validate_nu(*nu).map_err(|e| Error::InvalidScenario(e.to_string()))
            }
            ScenarioKind::ContaminatedFixed {
                nodes, rows, node_set, ..
            } => {
                if *nodes > p {
                    return bad(format!("{nodes} contaminated nodes exceed p = {p}"));
                }
                if *rows > self.n {
                    return bad(format!("{rows} contaminated rows exceed n = {}", self.n));
                }
                if let Some(set) = node_set {
                    check_node_sets(std::slice::from_ref(set), p, *nodes)?;
                }
                Ok(())
            }
            ScenarioKind::ContaminatedBlocks {
                blocks,
                block_size,
                nodes_per_block,
                node_sets,
                ..
            } => {
                if blocks * block_size > self.n {
                    return bad(format!(
                        "{blocks} blocks of {block_size} observations exceed n = {}",
                        self.n
                    ));
                }
                match node_sets {
                    Some(sets) => {
                        if sets.len() != *blocks {
                            return bad(format!("expected {blocks} node sets, got {}", sets.len()));
                        }
                        check_node_sets(sets, p, *nodes_per_block)
                    }
                    None if blocks * nodes_per_block > p => bad(format!(
                        "{blocks} disjoint sets of {nodes_per_block} nodes exceed p = {p}"
                    )),
                    None => Ok(()),
                }
            }
        }
    }
}

fn check_node_sets(sets: &[Vec<usize>], p: usize, size: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for set in sets {
        if set.len() != size {
            return Err(Error::InvalidScenario(format!(
                "node set {set:?} should have {size} nodes"
            )));
        }
        for &k in set {
            if k >= p {
                return Err(Error::InvalidScenario(format!("node {k} out of range for p = {p}")));
            }
            if !seen.insert(k) {
                return Err(Error::InvalidScenario(format!("node {k} appears in more than one set")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    pub data: Dataset,
    /// Replaced cells as `(observation, node)`, sorted.
    pub contaminated_cells: Vec<(usize, usize)>,
    /// The node group of each contamination block (one group for the fixed pattern).
    pub node_groups: Vec<Vec<usize>>,
}

impl GeneratedData {
    pub fn is_contaminated(&self, i: usize, j: usize) -> bool {
        self.contaminated_cells.binary_search(&(i, j)).is_ok()
    }
}

/// Draws the clean rows first and only then the contamination, so two
/// scenarios run from the same seed share their uncontaminated data.
pub fn generate_scenario<R: Rng + ?Sized>(
    graph: &TrueGraph,
    scenario: &ScenarioSpec,
    rng: &mut R,
) -> Result<GeneratedData> {
    let p = graph.theta.dim();
    scenario.validate(p)?;
    let sigma = graph.covariance();
    let n = scenario.n;
    let mut data = match &scenario.kind {
        ScenarioKind::StudentT { nu } => sample_t(&TParams::new(vec![0.0; p], sigma.clone(), *nu)?, n, rng)?,
        _ => sample_gaussian(&sigma, n, rng)?,
    };
    let center = sigma.diag().into_iter().fold(0.0, f64::max);
    let mut cells = Vec::new();
    let mut groups = Vec::new();
    match &scenario.kind {
        ScenarioKind::Gaussian | ScenarioKind::StudentT { .. } => {}
        ScenarioKind::ContaminatedFixed {
            nodes,
            rows,
            mean_multiplier,
            node_set,
        } => {
            let group = match node_set {
                Some(set) => set.clone(),
                None => sorted(sample_indices(rng, p, *nodes).into_vec()),
            };
            let rows = sorted(sample_indices(rng, n, *rows).into_vec());
            for &i in &rows {
                for &j in &group {
                    let z: f64 = StandardNormal.sample(rng);
                    data.set(i, j, mean_multiplier * center + z);
                    cells.push((i, j));
                }
            }
            groups.push(group);
        }
        ScenarioKind::ContaminatedBlocks {
            blocks,
            block_size,
            nodes_per_block,
            mean_multiplier,
            node_sets,
        } => {
            let sets = match node_sets {
                Some(sets) => sets.clone(),
                None => {
                    let mut perm: Vec<usize> = (0..p).collect();
                    perm.shuffle(rng);
                    perm.chunks(*nodes_per_block.max(&1))
                        .take(*blocks)
                        .map(|c| sorted(c.to_vec()))
                        .collect()
                }
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for (b, group) in sets.iter().enumerate() {
                for &i in &order[b * block_size..(b + 1) * block_size] {
                    for &j in group {
                        let z: f64 = StandardNormal.sample(rng);
                        data.set(i, j, mean_multiplier * center + z);
                        cells.push((i, j));
                    }
                }
            }
            groups = sets;
        }
    }
    cells.sort_unstable();
    Ok(GeneratedData {
        data,
        contaminated_cells: cells,
        node_groups: groups,
    })
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

pub fn sample_gaussian<R: Rng + ?Sized>(sigma: &SpdMatrix, n: usize, rng: &mut R) -> Result<Dataset> {
    let chol = Cholesky::new(sigma)?;
    let p = sigma.dim();
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        values.extend(chol.mul_lower(&z));
    }
    Dataset::new(n, p, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Glasso,
    Tlasso,
    AltTlasso,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Glasso => "glasso",
            Method::Tlasso => "tlasso",
            Method::AltTlasso => "alt-tlasso",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glasso" => Ok(Method::Glasso),
            "tlasso" => Ok(Method::Tlasso),
            "alt-tlasso" | "alt_tlasso" => Ok(Method::AltTlasso),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Solver settings shared by every point of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MethodSettings {
    pub glasso: GlassoOptions,
    /// `rho` is overwritten per grid point.
    pub tlasso: TlassoConfig,
    pub mcmc: McmcConfig,
}

/// A penalty grid. Relative grids are fractions of the method's empty-graph
/// threshold on the data at hand (see [`method_rho_max`]), which lets
/// replicates with different data share labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum RhoGrid {
    Absolute(Vec<f64>),
    Relative(Vec<f64>),
}

impl RhoGrid {
    /// `len` log-spaced fractions from `lowest` up to 1.
    pub fn log_relative(len: usize, lowest: f64) -> Self {
        RhoGrid::Relative(log_spaced(lowest, 1.0, len))
    }

    pub fn labels(&self) -> &[f64] {
        match self {
            RhoGrid::Absolute(v) | RhoGrid::Relative(v) => v,
        }
    }

    pub fn resolve(&self, method: Method, data: &Dataset, settings: &MethodSettings) -> Result<Vec<f64>> {
        match self {
            RhoGrid::Absolute(v) => Ok(v.clone()),
            RhoGrid::Relative(v) => {
                let top = method_rho_max(method, data, settings)?;
                Ok(v.iter().map(|f| f * top).collect())
            }
        }
    }
}

/// Smallest glasso penalty whose solution is diagonal: `max_{i<j} |S_ij|`.
pub fn rho_max(data: &Dataset) -> f64 {
    data.covariance().max_abs_offdiag()
}

/// Empty-graph threshold of `method`: the largest off-diagonal of the
/// scatter matrix the method thresholds, evaluated at its fully shrunken
/// (diagonal) fit. For the glasso this is [`rho_max`]; the robust methods
/// use their weighted scatter, which ignores downweighted observations.
pub fn method_rho_max(method: Method, data: &Dataset, settings: &MethodSettings) -> Result<f64> {
    let raw = rho_max(data);
    if method == Method::Glasso {
        return Ok(raw);
    }
    let n = data.n() as f64;
    let p = data.p() as f64;
    let nu = settings.tlasso.nu;
    let mut big = (raw * (nu + p) / nu).max(1.0) * 10.0;
    for _ in 0..20 {
        let cfg = TlassoConfig {
            rho: n * big,
            ..settings.tlasso
        };
        let (theta, scatter) = match method {
            Method::Tlasso => {
                let fit = tlasso_fit(data, &cfg, None)?;
                let s = weighted_scatter(data, &fit.mu_hat, &fit.weights)?;
                (fit.theta_hat, s)
            }
            _ => {
                let fit = alt_tlasso_fit(data, &cfg, &settings.mcmc)?;
                let s = alt_weighted_scatter(data, &fit.mu_hat, &fit.tau_stats)?;
                (fit.theta_hat, s)
            }
        };
        if edges_from_theta(&theta).is_empty() {
            return Ok(scatter.max_abs_offdiag());
        }
        big *= 10.0;
    }
    Err(Error::NonConvergence {
        what: "empty-graph penalty search",
        iterations: 20,
    })
}

pub fn log_spaced(lo: f64, hi: f64, len: usize) -> Vec<f64> {
    match len {
        0 => vec![],
        1 => vec![hi],
        _ => (0..len)
            .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (len - 1) as f64).exp())
            .collect(),
    }
}

/// Default grid: 30 log-spaced values on `[0.01 ρ_max, ρ_max]`.
pub fn default_rho_grid(data: &Dataset) -> Vec<f64> {
    let top = rho_max(data);
    log_spaced(0.01 * top, top, 30)
}

/// One fitted precision matrix along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub label: f64,
    pub rho: f64,
    pub theta: std::result::Result<SpdMatrix, Error>,
}

impl PathPoint {
    pub fn edges(&self) -> Option<EdgeSet> {
        self.theta.as_ref().ok().map(edges_from_theta)
    }
}

enum Warm {
    None,
    Glasso(GlassoResult),
    Tlasso(TlassoFit),
}

fn fit_one(
    method: Method,
    data: &Dataset,
    rho: f64,
    settings: &MethodSettings,
    warm: &Warm,
) -> Result<(SpdMatrix, Warm)> {
    let n = data.n() as f64;
    match method {
        Method::Glasso => {
            let s = data.covariance();
            let prev = match warm {
                Warm::Glasso(g) => Some(g),
                _ => None,
            };
            let fit = glasso_fit(&s, &PenaltySpec::new(rho), &settings.glasso, prev)?;
            Ok((fit.theta_hat.clone(), Warm::Glasso(fit)))
        }
        Method::Tlasso => {
            let cfg = TlassoConfig {
                rho: n * rho,
                ..settings.tlasso
            };
            let prev = match warm {
                Warm::Tlasso(t) => Some(t),
                _ => None,
            };
            let fit = tlasso_fit(data, &cfg, prev)?;
            Ok((fit.theta_hat.clone(), Warm::Tlasso(fit)))
        }
        Method::AltTlasso => {
            let cfg = TlassoConfig {
                rho: n * rho,
                ..settings.tlasso
            };
            let fit = alt_tlasso_fit(data, &cfg, &settings.mcmc)?;
            Ok((fit.theta_hat, Warm::None))
        }
    }
}

/// Fits `method` at every grid value, from the largest penalty downward
/// with warm starts, so robust fits start from the empty graph. Points come
/// back in grid order; failures are kept per point.
pub fn fit_path(method: Method, data: &Dataset, grid: &RhoGrid, settings: &MethodSettings) -> Result<Vec<PathPoint>> {
    let rhos = grid.resolve(method, data, settings)?;
    let labels = grid.labels();
    let mut order: Vec<usize> = (0..rhos.len()).collect();
    order.sort_by(|&a, &b| rhos[b].total_cmp(&rhos[a]));
    let mut out: Vec<Option<PathPoint>> = vec![None; rhos.len()];
    let mut warm = Warm::None;
    for k in order {
        let theta = match fit_one(method, data, rhos[k], settings, &warm) {
            Ok((theta, next)) => {
                warm = next;
                Ok(theta)
            }
            Err(e) => Err(e),
        };
        out[k] = Some(PathPoint {
            label: labels[k],
            rho: rhos[k],
            theta,
        });
    }
    Ok(out.into_iter().map(|p| p.expect("every grid point visited")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Grid label (absolute penalty or fraction of `ρ_max`).
    pub rho: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by descending `rho`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// `(FPR, TPR)` of `found` against `truth`; a rate with an empty denominator is 0.
pub fn rates(found: &EdgeSet, truth: &EdgeSet) -> (f64, f64) {
    let tp = found.common(truth);
    let fp = found.len() - tp;
    let true_edges = truth.len();
    let non_edges = truth.max_edges() - true_edges;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(fp, non_edges), ratio(tp, true_edges))
}

/// Trapezoid area under the successful points, extended to `(0,0)` and `(1,1)`.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().filter(|p| !p.failed).map(|p| (p.fpr, p.tpr)).collect();
    xy.push((0.0, 0.0));
    xy.push((1.0, 1.0));
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    xy.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum()
}

impl RocCurve {
    pub fn from_points(mut points: Vec<RocPoint>) -> Self {
        points.sort_by(|a, b| b.rho.total_cmp(&a.rho));
        let auc = auc(&points);
        Self { points, auc }
    }
}

pub fn roc_from_path(path: &[PathPoint], truth: &EdgeSet) -> RocCurve {
    let points = path
        .iter()
        .map(|pt| match pt.edges() {
            Some(found) => {
                let (fpr, tpr) = rates(&found, truth);
                RocPoint {
                    rho: pt.label,
                    fpr,
                    tpr,
                    failed: false,
                }
            }
            None => RocPoint {
                rho: pt.label,
                fpr: f64::NAN,
                tpr: f64::NAN,
                failed: true,
            },
        })
        .collect();
    RocCurve::from_points(points)
}

pub fn roc_curve(
    method: Method,
    data: &Dataset,
    truth: &EdgeSet,
    grid: &RhoGrid,
    settings: &MethodSettings,
) -> Result<RocCurve> {
    if grid.labels().is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    if truth.p != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: truth.p,
        });
    }
    Ok(roc_from_path(&fit_path(method, data, grid, settings)?, truth))
}

/// Pointwise mean of FPR and TPR per grid label over the curves that
/// succeeded at that label.
pub fn average_roc(curves: &[RocCurve]) -> Result<RocCurve> {
    let first = curves.first().ok_or(Error::GridMismatch)?;
    for c in curves {
        if c.points.len() != first.points.len() || c.points.iter().zip(&first.points).any(|(a, b)| a.rho != b.rho) {
            return Err(Error::GridMismatch);
        }
    }
    let points = (0..first.points.len())
        .map(|k| {
            let ok: Vec<&RocPoint> = curves.iter().map(|c| &c.points[k]).filter(|p| !p.failed).collect();
            if ok.is_empty() {
                RocPoint {
                    rho: first.points[k].rho,
                    fpr: f64::NAN,
                    tpr: f64::NAN,
                    failed: true,
                }
            } else {
                let m = ok.len() as f64;
                RocPoint {
                    rho: first.points[k].rho,
                    fpr: ok.iter().map(|p| p.fpr).sum::<f64>() / m,
                    tpr: ok.iter().map(|p| p.tpr).sum::<f64>() / m,
                    failed: false,
                }
            }
        })
        .collect();
    Ok(RocCurve::from_points(points))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKEdges {
    pub edges: EdgeSet,
    /// `(i, j, |θ_ij|)` for the selected edges, largest magnitude first.
    pub magnitudes: Vec<(usize, usize, f64)>,
    pub rho: f64,
    /// Set when no penalty produced exactly `k` edges and the `k` largest
    /// entries of the nearest denser fit were taken instead.
    pub tie_broken: bool,
}

const BISECTION_STEPS: usize = 60;

/// Tunes the penalty by bisection until the fitted graph has exactly `k` edges.
pub fn top_k_edges(method: Method, data: &Dataset, k: usize, settings: &MethodSettings) -> Result<TopKEdges> {
    let p = data.p();
    let max_edges = p * p.saturating_sub(1) / 2;
    if k > max_edges {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {max_edges} possible edges"
        )));
    }
    let fit = |rho: f64| -> Result<SpdMatrix> { fit_one(method, data, rho, settings, &Warm::None).map(|(t, _)| t) };

    let mut hi = rho_max(data).max(f64::MIN_POSITIVE);
    let mut hi_theta = fit(hi)?;
    for _ in 0..40 {
        if edges_from_theta(&hi_theta).is_empty() {
            break;
        }
        hi *= 2.0;
        hi_theta = fit(hi)?;
    }
    if k == 0 {
        return Ok(select(&hi_theta, 0, hi, false));
    }

    let lo = if data.n() > p { 0.0 } else { 1e-3 * rho_max(data) };
    let lo_theta = fit(lo).map_err(|e| Error::Infeasible(format!("smallest penalty failed: {e}")))?;
    let lo_count = edges_from_theta(&lo_theta).len();
    if lo_count < k {
        return Err(Error::Infeasible(format!(
            "the smallest penalty yields only {lo_count} edges, fewer than {k}"
        )));
    }
    if lo_count == k {
        return Ok(select(&lo_theta, k, lo, false));
    }
    // best denser-or-equal fit seen so far
    let mut best = (lo_count, lo, lo_theta);
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let theta = fit(mid)?;
        let count = edges_from_theta(&theta).len();
        if count == k {
            return Ok(select(&theta, k, mid, false));
        }
        if count > k {
            lo = mid;
            if count < best.0 {
                best = (count, mid, theta);
            }
        } else {
            hi = mid;
        }
    }
    Ok(select(&best.2, k, best.1, true))
}

fn select(theta: &SpdMatrix, k: usize, rho: f64, tie_broken: bool) -> TopKEdges {
    let p = theta.dim();
    let mut mags: Vec<(usize, usize, f64)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, theta.get(i, j).abs()))
        .filter(|e| e.2 > 0.0)
        .collect();
    mags.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    mags.truncate(k);
    let edges = EdgeSet {
        p,
        edges: mags.iter().map(|&(i, j, _)| (i, j)).collect(),
    };
    TopKEdges {
        edges,
        magnitudes: mags,
        rho,
        tie_broken,
    }
}

/// A replicated ROC simulation: fresh graph and data per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocExperiment {
    pub graph: GraphSpec,
    pub scenario: ScenarioSpec,
    pub reps: usize,
    pub grid: RhoGrid,
    pub methods: Vec<Method>,
    pub settings: MethodSettings,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub averaged: RocCurve,
    pub replicate_auc: Vec<f64>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub graph: TrueGraph,
    pub generated: GeneratedData,
    /// One path per method, in the experiment's method order.
    pub curves: Vec<RocCurve>,
}

impl RocExperiment {
    /// Graph and data for replicate `rep`; the streams depend only on
    /// `(seed, rep)`.
    pub fn replicate_data(&self, rep: usize) -> Result<(TrueGraph, GeneratedData)> {
        let graph = random_concentration(&GraphSpec {
            seed: rng::derive_seed(self.seed, &[rep as u64, 0]),
            ..self.graph.clone()
        })?;
        let mut data_rng = rng::stream(self.seed, &[rep as u64, 1]);
        let generated = generate_scenario(&graph, &self.scenario, &mut data_rng)?;
        Ok((graph, generated))
    }

    pub fn run_replicate(&self, rep: usize) -> Result<ReplicateOutcome> {
        let (graph, generated) = self.replicate_data(rep)?;
        let mut settings = self.settings;
        settings.mcmc.seed = rng::derive_seed(self.seed, &[rep as u64, 2]);
        let curves = self
            .methods
            .iter()
            .map(|&m| roc_curve(m, &generated.data, &graph.truth, &self.grid, &settings))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReplicateOutcome {
            graph,
            generated,
            curves,
        })
    }

    /// Runs all replicates (concurrently) and averages per method. Results do
    /// not depend on scheduling.
    pub fn run(&self) -> Result<Vec<MethodSummary>> {
        self.graph.validate()?;
        self.scenario.validate(self.graph.p)?;
        if self.reps == 0 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        let outcomes: Vec<ReplicateOutcome> = (0..self.reps)
            .into_par_iter()
            .map(|rep| self.run_replicate(rep))
            .collect::<Result<Vec<_>>>()?;
        self.methods
            .iter()
            .enumerate()
            .map(|(k, &method)| {
                let curves: Vec<RocCurve> = outcomes.iter().map(|o| o.curves[k].clone()).collect();
                let replicate_auc: Vec<f64> = curves.iter().map(|c| c.auc).collect();
                let mean_auc = replicate_auc.iter().sum::<f64>() / replicate_auc.len() as f64;
                Ok(MethodSummary {
                    method,
                    averaged: average_roc(&curves)?,
                    replicate_auc,
                    mean_auc,
                })
            })
            .collect()
    }
}
