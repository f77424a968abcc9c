//! Feature maps and the per-transition observations `(Ã(X_t), b̃(X_t))` fed to
//! the stochastic-approximation iterate.
//!
//! Observations are kept in factored form. A TD observation is the rank-one
//! matrix `φ(s)(φ(s) − γφ(s'))ᵀ`, and a GTD observation is the stacked block
//! matrix `[[0, −A_tᵀ], [A_t, M_t]]` with rank-one `A_t`. Applying an update
//! then costs `O(nnz)` instead of `O(d²)`; [`LsaObservation::dense_a`] expands
//! the matrix when it is needed explicitly.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Policy, TabularMdp, Transition};
use crate::numerics::{DenseMatrix, DenseVector};

const RANK_TOL: f64 = 1e-8;
const MAX_RESAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature table is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("target policy puts mass on action {action} in state {state} where the behavior policy does not")]
    ZeroBehaviorProbability { state: usize, action: usize },
    #[error("invalid feature table: {0}")]
    InvalidTable(String),
    #[error("feature CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    OneHot,
    Random,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtdVariant {
    /// Norm of the expected TD update, `M = I`.
    Neu,
    /// Mean-squared projected Bellman error, `M = ΦᵀΞΦ`.
    Mspbe,
}

/// Which linear system the observations estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsaMode {
    Td,
    Gtd(GtdVariant),
}

impl LsaMode {
    /// Dimension of the iterate for features of dimension `d`.
    pub fn iterate_dim(self, d: usize) -> usize {
        match self {
            LsaMode::Td => d,
            LsaMode::Gtd(_) => 2 * d,
        }
    }
}

/// Sparse vector as parallel index/value lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(x: &[f64]) -> Self {
        let mut out = SparseVec::default();
        for (i, v) in x.iter().enumerate() {
            if *v != 0.0 {
                out.idx.push(i);
                out.val.push(*v);
            }
        }
        out
    }

    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(i, v)| v * dense[*i]).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.idx.iter().zip(&self.val) {
            out[*i] += v;
        }
        out
    }

    fn scaled(&self, k: f64) -> SparseVec {
        SparseVec { idx: self.idx.clone(), val: self.val.iter().map(|v| k * v).collect() }
    }

    fn shifted(&self, offset: usize) -> SparseVec {
        SparseVec { idx: self.idx.iter().map(|i| i + offset).collect(), val: self.val.clone() }
    }

    /// `self − k·other`, merging supports.
    fn axpy_sub(&self, k: f64, other: &SparseVec, dim: usize) -> SparseVec {
        let mut dense = self.to_dense(dim);
        for (i, v) in other.idx.iter().zip(&other.val) {
            dense[*i] -= k * v;
        }
        let mut out = SparseVec::default();
        let mut seen: Vec<usize> = self.idx.iter().chain(&other.idx).copied().collect();
        seen.sort_unstable();
        seen.dedup();
        for i in seen {
            out.idx.push(i);
            out.val.push(dense[i]);
        }
        out
    }
}

/// State features `φ(s)`, stored as the `n_states × d` table `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    table: DenseMatrix,
    rows: Vec<SparseVec>,
    kind: FeatureKind,
    phi_max: f64,
}

impl FeatureMap {
    pub fn one_hot(n_states: usize) -> Self {
        Self::build(DenseMatrix::identity(n_states), FeatureKind::OneHot)
    }

    /// Uniform(0, 1) entries, column-standardized, resampled until the table
    /// has full column rank.
    pub fn random(n_states: usize, d: usize, seed: u64) -> Result<Self, FeatureError> {
        if d == 0 || d > n_states {
            return Err(FeatureError::InvalidTable(format!("dimension {d} must lie in [1, {n_states}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last_sv = 0.0;
        for _ in 0..MAX_RESAMPLES {
            let mut table = DenseMatrix::zeros(n_states, d);
            for s in 0..n_states {
                for k in 0..d {
                    table[(s, k)] = rng.random::<f64>();
                }
            }
            standardize_columns(&mut table);
            last_sv = smallest_singular_value(&table);
            if last_sv > RANK_TOL {
                return Ok(Self::build(table, FeatureKind::Random));
            }
        }
        Err(FeatureError::RankDeficient(last_sv))
    }

    /// Wraps an arbitrary finite table.
    pub fn from_table(table: DenseMatrix) -> Result<Self, FeatureError> {
        if table.rows() == 0 || table.cols() == 0 {
            return Err(FeatureError::InvalidTable("empty table".into()));
        }
        if !table.is_finite() {
            return Err(FeatureError::InvalidTable("non-finite entry".into()));
        }
        Ok(Self::build(table, FeatureKind::External))
    }

    /// Reads an `n_states × d` table with header `f0,...,f{d-1}`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let d = headers.len();
        for (k, h) in headers.iter().enumerate() {
            if h != format!("f{k}") {
                return Err(FeatureError::InvalidTable(format!("header column {k} is {h:?}, expected \"f{k}\"")));
            }
        }
        let mut entries = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != d {
                return Err(FeatureError::InvalidTable(format!("row {n} has {} columns, expected {d}", record.len())));
            }
            for field in record.iter() {
                let x: f64 = field
                    .parse()
                    .map_err(|_| FeatureError::InvalidTable(format!("row {n}: cannot parse {field:?}")))?;
                entries.push(x);
            }
            n += 1;
        }
        let table = DenseMatrix::from_row_major(n, d, entries).map_err(|e| FeatureError::InvalidTable(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    fn build(table: DenseMatrix, kind: FeatureKind) -> Self {
        let rows: Vec<SparseVec> = (0..table.rows()).map(|s| SparseVec::from_dense(table.row(s))).collect();
        let phi_max = rows.iter().map(SparseVec::norm2).fold(0.0, f64::max);
        Self { table, rows, kind, phi_max }
    }

    pub fn n_states(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn table(&self) -> &DenseMatrix {
        &self.table
    }

    /// `φ(s)` as a sparse vector.
    pub fn phi(&self, s: usize) -> &SparseVec {
        &self.rows[s]
    }

    /// `max_s ‖φ(s)‖₂`.
    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn smallest_singular_value(&self) -> f64 {
        smallest_singular_value(&self.table)
    }
}

fn standardize_columns(table: &mut DenseMatrix) {
    let n = table.rows() as f64;
    for k in 0..table.cols() {
        let col = table.column(k);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        for (s, x) in col.iter().enumerate() {
            table[(s, k)] = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
        }
    }
}

/// Smallest singular value by one-sided Jacobi on the columns of `Φ`.
/// Working on `Φ` rather than `ΦᵀΦ` keeps small singular values accurate to
/// roughly machine precision times the largest one.
fn smallest_singular_value(table: &DenseMatrix) -> f64 {
    let (n, d) = (table.rows(), table.cols());
    let mut cols: Vec<Vec<f64>> = (0..d).map(|k| table.column(k)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let alpha = crate::numerics::dot(&cols[p], &cols[p]);
                let beta = crate::numerics::dot(&cols[q], &cols[q]);
                let gamma = crate::numerics::dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| crate::numerics::dot(c, c).sqrt()).fold(f64::INFINITY, f64::min)
}

/// Matrix part of an observation.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationMatrix {
    /// `u vᵀ`.
    RankOne { u: SparseVec, v: SparseVec },
    /// `[[0, −Aᵀ], [A, M]]` with `A = scale · u vᵀ` and `M` either `I` or `u uᵀ`.
    GtdStacked { d: usize, u: SparseVec, v: SparseVec, scale: f64, variant: GtdVariant },
    Dense(DenseMatrix),
}

/// One noisy pair `(Ã(X_t), b̃(X_t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsaObservation {
    dim: usize,
    a: ObservationMatrix,
    b: SparseVec,
}

impl LsaObservation {
    pub fn dense(a: DenseMatrix, b: DenseVector) -> Self {
        assert!(a.is_square() && a.rows() == b.dim(), "observation dimensions disagree");
        Self { dim: b.dim(), a: ObservationMatrix::Dense(a), b: SparseVec::from_dense(b.as_slice()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ObservationMatrix {
        &self.a
    }

    pub fn dense_a(&self) -> DenseMatrix {
        match &self.a {
            ObservationMatrix::RankOne { u, v } => DenseMatrix::outer(&u.to_dense(self.dim), &v.to_dense(self.dim)),
            ObservationMatrix::GtdStacked { d, u, v, scale, variant } => {
                let d = *d;
                let a = DenseMatrix::outer(&u.to_dense(d), &v.to_dense(d)).scaled(*scale);
                let m = match variant {
                    GtdVariant::Neu => DenseMatrix::identity(d),
                    GtdVariant::Mspbe => DenseMatrix::outer(&u.to_dense(d), &u.to_dense(d)),
                };
                let mut out = DenseMatrix::zeros(2 * d, 2 * d);
                for i in 0..d {
                    for j in 0..d {
                        out[(i, d + j)] = -a[(j, i)];
                        out[(d + i, j)] = a[(i, j)];
                        out[(d + i, d + j)] = m[(i, j)];
                    }
                }
                out
            }
            ObservationMatrix::Dense(m) => m.clone(),
        }
    }

    pub fn dense_b(&self) -> DenseVector {
        DenseVector::new(self.b.to_dense(self.dim))
    }

    pub fn a_frobenius(&self) -> f64 {
        match &self.a {
            ObservationMatrix::RankOne { u, v } => u.norm2() * v.norm2(),
            ObservationMatrix::GtdStacked { d, u, v, scale, variant } => {
                let a2 = (scale * u.norm2() * v.norm2()).powi(2);
                let m2 = match variant {
                    GtdVariant::Neu => *d as f64,
                    GtdVariant::Mspbe => u.norm2().powi(4),
                };
                (2.0 * a2 + m2).sqrt()
            }
            ObservationMatrix::Dense(m) => m.frobenius_norm(),
        }
    }

    pub fn b_norm(&self) -> f64 {
        self.b.norm2()
    }

    /// Calls `f` on every coordinate that [`apply_update`](Self::apply_update)
    /// may modify. Indices can repeat.
    pub fn for_each_touched(&self, mut f: impl FnMut(usize)) {
        self.b.idx.iter().for_each(|i| f(*i));
        match &self.a {
            ObservationMatrix::RankOne { u, .. } => u.idx.iter().for_each(|i| f(*i)),
            ObservationMatrix::GtdStacked { d, u, v, variant, .. } => {
                v.idx.iter().for_each(|i| f(*i));
                match variant {
                    GtdVariant::Neu => (*d..2 * d).for_each(&mut f),
                    GtdVariant::Mspbe => u.idx.iter().for_each(|i| f(d + i)),
                }
            }
            ObservationMatrix::Dense(_) => (0..self.dim).for_each(f),
        }
    }

    /// `θ ← θ + step · (b̃ − Ã θ)`, with every residual read from the
    /// pre-update `θ`.
    pub fn apply_update(&self, theta: &mut [f64], step: f64, scratch: &mut Vec<f64>) {
        debug_assert_eq!(theta.len(), self.dim);
        match &self.a {
            ObservationMatrix::RankOne { u, v } => {
                let vt = v.dot(theta);
                for (i, bi) in self.b.idx.iter().zip(&self.b.val) {
                    theta[*i] += step * bi;
                }
                for (i, ui) in u.idx.iter().zip(&u.val) {
                    theta[*i] -= step * ui * vt;
                }
            }
            ObservationMatrix::GtdStacked { d, u, v, scale, variant } => {
                let d = *d;
                let (th, y) = theta.split_at_mut(d);
                let v_theta = v.dot(th);
                let u_y = u.dot(y);
                // θ-block residual: Aᵀ y = scale · v (uᵀy)
                let top = step * scale * u_y;
                for (i, vi) in v.idx.iter().zip(&v.val) {
                    th[*i] += top * vi;
                }
                // y-block residual: b − A θ − M y
                match variant {
                    GtdVariant::Neu => y.iter_mut().for_each(|yi| *yi -= step * *yi),
                    GtdVariant::Mspbe => {
                        for (i, ui) in u.idx.iter().zip(&u.val) {
                            y[*i] -= step * ui * u_y;
                        }
                    }
                }
                let bottom = step * scale * v_theta;
                for (i, ui) in u.idx.iter().zip(&u.val) {
                    y[*i] -= bottom * ui;
                }
                for (i, bi) in self.b.idx.iter().zip(&self.b.val) {
                    theta[*i] += step * bi;
                }
            }
            ObservationMatrix::Dense(m) => {
                scratch.clear();
                scratch.extend((0..self.dim).map(|i| -crate::numerics::dot(m.row(i), theta)));
                for (i, bi) in self.b.idx.iter().zip(&self.b.val) {
                    scratch[*i] += bi;
                }
                for (t, r) in theta.iter_mut().zip(scratch.iter()) {
                    *t += step * r;
                }
            }
        }
    }
}

/// `π(a|s) / π_b(a|s)`.
pub fn importance_ratio(target: &Policy, behavior: &Policy, s: usize, a: usize) -> Result<f64, FeatureError> {
    let pb = behavior.prob(s, a);
    if pb == 0.0 {
        return Err(FeatureError::ZeroBehaviorProbability { state: s, action: a });
    }
    Ok(target.prob(s, a) / pb)
}

/// `Ã = φ(s)(φ(s) − γφ(s'))ᵀ`, `b̃ = r φ(s)`; `φ(s') = 0` after a terminal
/// transition.
pub fn td_observation(tr: &Transition, features: &FeatureMap, gamma: f64) -> LsaObservation {
    let u = features.phi(tr.s).clone();
    let v = td_direction(tr, features, gamma);
    let b = u.scaled(tr.r);
    LsaObservation { dim: features.dim(), a: ObservationMatrix::RankOne { u, v }, b }
}

/// Stacked GTD observation with importance ratio `ρ = π(a|s)/π_b(a|s)`.
pub fn gtd_observation(
    tr: &Transition,
    features: &FeatureMap,
    gamma: f64,
    target: &Policy,
    behavior: &Policy,
    variant: GtdVariant,
) -> Result<LsaObservation, FeatureError> {
    let rho = importance_ratio(target, behavior, tr.s, tr.a)?;
    Ok(gtd_observation_with_ratio(tr, features, gamma, rho, variant))
}

fn gtd_observation_with_ratio(
    tr: &Transition,
    features: &FeatureMap,
    gamma: f64,
    rho: f64,
    variant: GtdVariant,
) -> LsaObservation {
    let d = features.dim();
    let u = features.phi(tr.s).clone();
    let v = td_direction(tr, features, gamma);
    let b = u.scaled(rho * tr.r).shifted(d);
    LsaObservation { dim: 2 * d, a: ObservationMatrix::GtdStacked { d, u, v, scale: rho, variant }, b }
}

fn td_direction(tr: &Transition, features: &FeatureMap, gamma: f64) -> SparseVec {
    let phi = features.phi(tr.s);
    if tr.terminal_next {
        phi.clone()
    } else {
        phi.axpy_sub(gamma, features.phi(tr.s_next), features.dim())
    }
}

/// Recorded observation bounds `‖Ã‖_F ≤ a_max`, `‖b̃‖₂ ≤ b_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationBounds {
    pub a_max: f64,
    pub b_max: f64,
    pub rho_max: f64,
}

/// Turns transitions into observations for a fixed task, with importance
/// ratios precomputed and observation bounds recorded.
#[derive(Debug, Clone)]
pub struct Featurizer {
    features: FeatureMap,
    gamma: f64,
    mode: LsaMode,
    ratios: Vec<f64>,
    n_actions: usize,
    bounds: ObservationBounds,
}

impl Featurizer {
    pub fn new(
        mdp: &TabularMdp,
        features: FeatureMap,
        mode: LsaMode,
        target: &Policy,
        behavior: &Policy,
    ) -> Result<Self, FeatureError> {
        if features.n_states() != mdp.n_states() {
            return Err(FeatureError::InvalidTable(format!(
                "feature table has {} rows, MDP has {} states",
                features.n_states(),
                mdp.n_states()
            )));
        }
        let na = mdp.n_actions();
        let mut ratios = vec![0.0; mdp.n_states() * na];
        let mut rho_max: f64 = 0.0;
        for s in (0..mdp.n_states()).filter(|s| !mdp.is_terminal(*s)) {
            for a in 0..na {
                let (pt, pb) = (target.prob(s, a), behavior.prob(s, a));
                if pb > 0.0 {
                    ratios[s * na + a] = pt / pb;
                    rho_max = rho_max.max(pt / pb);
                } else if pt > 0.0 {
                    return Err(FeatureError::ZeroBehaviorProbability { state: s, action: a });
                }
            }
        }
        let gamma = mdp.gamma();
        let phi_max = features.phi_max();
        let bounds = match mode {
            LsaMode::Td => ObservationBounds {
                a_max: phi_max * (1.0 + gamma) * phi_max,
                b_max: mdp.r_max() * phi_max,
                rho_max: 1.0,
            },
            LsaMode::Gtd(variant) => {
                let block = rho_max * phi_max * (1.0 + gamma) * phi_max;
                let metric = match variant {
                    GtdVariant::Neu => (features.dim() as f64).sqrt(),
                    GtdVariant::Mspbe => phi_max * phi_max,
                };
                ObservationBounds {
                    a_max: (2.0 * block * block + metric * metric).sqrt(),
                    b_max: rho_max * mdp.r_max() * phi_max,
                    rho_max,
                }
            }
        };
        Ok(Self { features, gamma, mode, ratios, n_actions: na, bounds })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn mode(&self) -> LsaMode {
        self.mode
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dimension of the iterate the observations act on.
    pub fn dim(&self) -> usize {
        self.mode.iterate_dim(self.features.dim())
    }

    pub fn bounds(&self) -> ObservationBounds {
        self.bounds
    }

    pub fn observe(&self, tr: &Transition) -> LsaObservation {
        let obs = match self.mode {
            LsaMode::Td => td_observation(tr, &self.features, self.gamma),
            LsaMode::Gtd(variant) => {
                let rho = self.ratios[tr.s * self.n_actions + tr.a];
                gtd_observation_with_ratio(tr, &self.features, self.gamma, rho, variant)
            }
        };
        debug_assert!(
            obs.a_frobenius() <= self.bounds.a_max * (1.0 + 1e-9) && obs.b_norm() <= self.bounds.b_max * (1.0 + 1e-9),
            "observation exceeds recorded bounds"
        );
        obs
    }
}
