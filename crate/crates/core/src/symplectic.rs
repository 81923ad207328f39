//! Linear symplectic algebra on `R^{2d} = T_x(T*T^d)`.
//!
//! Conventions used throughout the crate:
//!
//! * `ω((dq, dp), (dq', dp')) = dq·dp' − dq'·dp`, i.e. `ω = dq ∧ dp`, with
//!   Gram matrix `Ω = [[0, I], [−I, 0]]` so that `ω(v, w) = vᵀ Ω w`.
//! * Torus coordinates are normalized to `[0, 1)`; distances on `T^d` take the
//!   per-coordinate minimum `min(|Δ|, 1 − |Δ|)`.
//! * Rank and kernel decisions are made on singular values with a relative
//!   threshold (default [`RANK_TOL`]).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Singular values within this factor of the threshold are reported as
/// near-threshold warnings.
const NEAR_THRESHOLD_FACTOR: f64 = 100.0;

/// Maps a real number to its representative in `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Maps a real number to its representative in `[−½, ½)`.
pub fn wrap_centered(x: f64) -> f64 {
    wrap_unit(x + 0.5) - 0.5
}

/// Flat distance on `T^d` between two coordinate vectors.
pub fn torus_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = wrap_unit(x - y);
            d.min(1.0 - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Gram matrix `Ω` of the canonical form on `R^{2d}`.
pub fn omega_matrix(d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, d + i)] = 1.0;
        m[(d + i, i)] = -1.0;
    }
    m
}

/// `‖JᵀΩJ − Ω‖_F`; zero iff `J` is symplectic.
pub fn symplectic_defect(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows() / 2;
    let om = omega_matrix(d);
    (j.transpose() * &om * j - om).norm()
}

/// Inverse of a symplectic matrix, `J⁻¹ = −Ω Jᵀ Ω`.
pub fn symplectic_inverse(j: &DMatrix<f64>) -> DMatrix<f64> {
    let om = omega_matrix(j.nrows() / 2);
    -(&om * j.transpose() * &om)
}

/// A point `(q, p)` of `T^d × R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    /// Builds a point and normalizes `q` into `[0, 1)^d`.
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: p.len() });
        }
        if q.is_empty() {
            return Err(Error::InvalidArgument("phase space dimension must be at least 1".into()));
        }
        Ok(Self::lifted(q, p).normalized())
    }

    /// Builds a point without normalizing `q`; used for lifted orbits.
    pub fn lifted(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p }
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(p))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn normalized(mut self) -> Self {
        self.q.apply(|x| *x = wrap_unit(*x));
        self
    }

    /// Stacked `(q, p)` as a `2d` vector.
    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.dim();
        let mut v = DVector::zeros(2 * d);
        v.rows_mut(0, d).copy_from(&self.q);
        v.rows_mut(d, d).copy_from(&self.p);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self::lifted(v.rows(0, d).into_owned(), v.rows(d, d).into_owned())
    }

    /// Flat distance on `T^d × R^d`.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let dq = torus_distance(&self.q, &other.q);
        (dq * dq + (&self.p - &other.p).norm_squared()).sqrt()
    }

    /// Displacement `other − self` with the torus part taken in `[−½, ½)`.
    pub fn displacement_to(&self, other: &PhasePoint) -> TangentVector {
        let dq = (&other.q - &self.q).map(wrap_centered);
        TangentVector { dq, dp: &other.p - &self.p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|x| x.is_finite())
    }
}

/// A tangent vector `(δq, δp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub dq: DVector<f64>,
    pub dp: DVector<f64>,
}

impl TangentVector {
    pub fn new(dq: DVector<f64>, dp: DVector<f64>) -> Result<Self> {
        if dq.len() != dp.len() {
            return Err(Error::DimensionMismatch { expected: dq.len(), got: dp.len() });
        }
        Ok(Self { dq, dp })
    }

    pub fn from_slices(dq: &[f64], dp: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(dq), DVector::from_column_slice(dp))
    }

    pub fn zeros(d: usize) -> Self {
        Self { dq: DVector::zeros(d), dp: DVector::zeros(d) }
    }

    pub fn dim(&self) -> usize {
        self.dq.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.dim();
        let mut v = DVector::zeros(2 * d);
        v.rows_mut(0, d).copy_from(&self.dq);
        v.rows_mut(d, d).copy_from(&self.dp);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self { dq: v.rows(0, d).into_owned(), dp: v.rows(d, d).into_owned() }
    }

    pub fn norm(&self) -> f64 {
        (self.dq.norm_squared() + self.dp.norm_squared()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dq: &self.dq * s, dp: &self.dp * s }
    }

    pub fn is_finite(&self) -> bool {
        self.dq.iter().chain(self.dp.iter()).all(|x| x.is_finite())
    }
}

/// The canonical symplectic form.
pub fn omega(v: &TangentVector, w: &TangentVector) -> Result<f64> {
    if v.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), got: w.dim() });
    }
    Ok(v.dq.dot(&w.dp) - w.dq.dot(&v.dp))
}

/// Liouville form `p·dq` at `x` evaluated on `v`.
pub fn liouville(x: &PhasePoint, v: &TangentVector) -> Result<f64> {
    if x.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: v.dim() });
    }
    Ok(x.p.dot(&v.dq))
}

/// A `k`-dimensional linear subspace of `R^{2d}` given by a full-rank
/// `2d × k` column frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceFrame {
    d: usize,
    columns: DMatrix<f64>,
}

impl SubspaceFrame {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(columns, RANK_TOL)
    }

    pub fn with_tolerance(columns: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if columns.nrows() == 0 || !columns.nrows().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "ambient dimension {} is not a positive even number",
                columns.nrows()
            )));
        }
        if columns.ncols() == 0 || columns.ncols() > columns.nrows() {
            return Err(Error::InvalidArgument(format!(
                "frame has {} columns in dimension {}",
                columns.ncols(),
                columns.nrows()
            )));
        }
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::Evaluator("frame entries".into()));
        }
        let sv = columns.singular_values();
        let max = sv.max();
        let min = sv.min();
        if max == 0.0 || min <= rank_tol * max {
            return Err(Error::RankDeficient { ratio: if max == 0.0 { 0.0 } else { min / max } });
        }
        Ok(Self { d: columns.nrows() / 2, columns })
    }

    pub fn from_columns(cols: &[TangentVector]) -> Result<Self> {
        let Some(first) = cols.first() else {
            return Err(Error::InvalidArgument("empty frame".into()));
        };
        let d = first.dim();
        let mut m = DMatrix::zeros(2 * d, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
            }
            m.set_column(j, &c.to_vector());
        }
        Self::new(m)
    }

    /// The vertical subspace `V = {δq = 0}`.
    pub fn vertical(d: usize) -> Self {
        let mut m = DMatrix::zeros(2 * d, d);
        for i in 0..d {
            m[(d + i, i)] = 1.0;
        }
        Self { d, columns: m }
    }

    /// The horizontal subspace `{δp = 0}`.
    pub fn horizontal(d: usize) -> Self {
        let mut m = DMatrix::zeros(2 * d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        Self { d, columns: m }
    }

    /// The graph `{(δq, S δq)}` of a `d × d` matrix.
    pub fn graph(s: &DMatrix<f64>) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::InvalidArgument("graph matrix must be square".into()));
        }
        let d = s.nrows();
        let mut m = DMatrix::zeros(2 * d, d);
        m.view_mut((0, 0), (d, d)).fill_with_identity();
        m.view_mut((d, 0), (d, d)).copy_from(s);
        Self::new(m)
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.d
    }

    pub fn phase_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, i: usize) -> TangentVector {
        TangentVector::from_vector(&self.columns.column(i).into_owned())
    }

    /// Orthonormal frame spanning the same subspace.
    pub fn orthonormalized(&self) -> DMatrix<f64> {
        self.columns.clone().qr().q()
    }

    /// `δq` rows.
    pub fn dq_block(&self) -> DMatrix<f64> {
        self.columns.rows(0, self.d).into_owned()
    }

    /// `δp` rows.
    pub fn dp_block(&self) -> DMatrix<f64> {
        self.columns.rows(self.d, self.d).into_owned()
    }

    /// Coordinates of a vector of the subspace in the frame basis, in the
    /// least-squares sense.
    pub fn coefficients_of(&self, v: &TangentVector) -> DVector<f64> {
        let svd = self.columns.clone().svd(true, true);
        svd.solve(&v.to_vector(), 1e-14).expect("svd computed with u and v")
    }

    /// Vector of the subspace with the given frame coefficients.
    pub fn combine(&self, coeffs: &DVector<f64>) -> TangentVector {
        TangentVector::from_vector(&(&self.columns * coeffs))
    }
}

/// Matrix of `ω` restricted to a frame: `M_ij = ω(col_i, col_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedFormMatrix {
    pub entries: DMatrix<f64>,
    /// Magnitude against which singular values are judged when the matrix
    /// itself is (nearly) zero: the product of the two largest column norms
    /// of the originating frame, or 1 for bare matrices.
    pub scale: f64,
}

impl RestrictedFormMatrix {
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument("restricted form must be square".into()));
        }
        Ok(Self { entries, scale: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest `|M_ij + M_ji|`.
    pub fn antisymmetry_error(&self) -> f64 {
        (&self.entries + self.entries.transpose()).amax()
    }
}

pub fn restricted_form(frame: &SubspaceFrame) -> RestrictedFormMatrix {
    let m = frame.matrix();
    let entries = m.transpose() * omega_matrix(frame.phase_dim()) * m;
    let mut norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    norms.sort_by(|a, b| b.total_cmp(a));
    let scale = match norms.as_slice() {
        [a, b, ..] => a * b,
        [a] => a * a,
        [] => 1.0,
    };
    RestrictedFormMatrix { entries, scale }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelWarning {
    /// A singular value within two decades of the rank threshold.
    NearThreshold { value: f64, threshold: f64 },
    /// `k − dim ker` is odd, impossible for an exact antisymmetric matrix.
    OddRank { k: usize, kernel_dim: usize },
    NotAntisymmetric { error: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelInfo {
    pub dim: usize,
    /// `k × dim` matrix of frame coefficients spanning the numerical kernel.
    pub basis: DMatrix<f64>,
    /// Singular values, sorted in decreasing order.
    pub singular_values: Vec<f64>,
    pub warnings: Vec<KernelWarning>,
}

/// Numerical kernel of a restricted form. A singular value counts as zero
/// when it is below `tol × max(σ_max, scale)`.
pub fn kernel(mat: &RestrictedFormMatrix, tol: f64) -> KernelInfo {
    let k = mat.dim();
    let mut warnings = Vec::new();
    let asym = mat.antisymmetry_error();
    if asym > tol * mat.scale.max(mat.entries.amax()).max(1e-300) {
        warnings.push(KernelWarning::NotAntisymmetric { error: asym });
    }
    let svd = mat.entries.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let threshold = tol * smax.max(mat.scale);

    let null: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] < threshold)
        .collect();
    for &s in &singular_values {
        let near = if s < threshold {
            s * NEAR_THRESHOLD_FACTOR > threshold
        } else {
            s < threshold * NEAR_THRESHOLD_FACTOR
        };
        if near {
            warnings.push(KernelWarning::NearThreshold { value: s, threshold });
        }
    }
    let dim = null.len();
    if !(k - dim).is_multiple_of(2) {
        warnings.push(KernelWarning::OddRank { k, kernel_dim: dim });
    }
    let mut basis = DMatrix::zeros(k, dim);
    for (c, &i) in null.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    KernelInfo { dim, basis, singular_values, warnings }
}

/// Largest `|ω(u, v)|` over unit vectors `u, v` of the subspace: the spectral
/// norm of the restricted form in an orthonormal basis. Independent of the
/// frame chosen for the subspace.
pub fn lagrangian_defect(frame: &SubspaceFrame) -> Result<f64> {
    if frame.dim() != frame.phase_dim() {
        return Err(Error::DimensionMismatch { expected: frame.phase_dim(), got: frame.dim() });
    }
    let q = frame.orthonormalized();
    let m = q.transpose() * omega_matrix(frame.phase_dim()) * &q;
    Ok(m.singular_values().max())
}

/// Largest `|ω(col_i, col_j)|` on the frame as given (no normalization).
pub fn raw_form_defect(frame: &SubspaceFrame) -> f64 {
    restricted_form(frame).entries.amax()
}

/// Smallest principal angle between the subspace and the vertical `V`.
pub fn vertical_angle(frame: &SubspaceFrame) -> f64 {
    let q = frame.orthonormalized();
    let qq = q.rows(0, frame.phase_dim()).into_owned();
    // cos² of the angles to V plus sin² add up to one on an orthonormal
    // frame, so the smallest angle is asin σ_min(δq block).
    let smin = if qq.ncols() > qq.nrows() { 0.0 } else { qq.singular_values().min() };
    smin.clamp(0.0, 1.0).asin()
}

/// For a subspace transverse to `V`, the symmetric-or-not matrix `S` with
/// subspace `{(δq, S δq)}`.
pub fn graph_matrix(frame: &SubspaceFrame) -> Result<DMatrix<f64>> {
    if frame.dim() != frame.phase_dim() {
        return Err(Error::DimensionMismatch { expected: frame.phase_dim(), got: frame.dim() });
    }
    let a = frame.dq_block();
    let b = frame.dp_block();
    let angle = vertical_angle(frame);
    let inv = a.try_inverse().ok_or(Error::NotAGraph { angle })?;
    Ok(b * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p1_frame(t3: f64) -> SubspaceFrame {
        let s = (2.0 * PI * t3).sin();
        let c = (2.0 * PI * t3).cos();
        SubspaceFrame::from_columns(&[
            TangentVector::from_slices(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap(),
            TangentVector::from_slices(&[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]).unwrap(),
            TangentVector::from_slices(&[0.0, 0.0, 1.0], &[-2.0 * PI * s, 2.0 * PI * c, 0.0])
                .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn omega_examples() {
        let e1 = TangentVector::from_slices(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(omega(&e1, &e1).unwrap(), 0.0);
        let t3 = 0.37_f64;
        let v = TangentVector::from_slices(&[0.0, 1.0, 0.0], &[0.0; 3]).unwrap();
        let w = TangentVector::from_slices(
            &[0.0, 0.0, 1.0],
            &[-2.0 * PI * (2.0 * PI * t3).sin(), 2.0 * PI * (2.0 * PI * t3).cos(), 0.0],
        )
        .unwrap();
        assert!((omega(&v, &w).unwrap() - 2.0 * PI * (2.0 * PI * t3).cos()).abs() < 1e-14);
        let h1 = TangentVector::from_slices(&[0.3, -1.2], &[0.0, 0.0]).unwrap();
        let h2 = TangentVector::from_slices(&[2.0, 0.7], &[0.0, 0.0]).unwrap();
        assert_eq!(omega(&h1, &h2).unwrap(), 0.0);
        assert!(omega(&h1, &TangentVector::zeros(3)).is_err());
    }

    #[test]
    fn nondegenerate_on_basis() {
        let d = 3;
        for i in 0..2 * d {
            let mut v = DVector::zeros(2 * d);
            v[i] = 1.0;
            let v = TangentVector::from_vector(&v);
            let hit = (0..2 * d).any(|j| {
                let mut w = DVector::zeros(2 * d);
                w[j] = 1.0;
                (omega(&v, &TangentVector::from_vector(&w)).unwrap().abs() - 1.0).abs() < 1e-15
            });
            assert!(hit, "basis vector {i} has no dual partner");
        }
    }

    #[test]
    fn liouville_examples() {
        let x0 = PhasePoint::from_slices(&[0.2, 0.4], &[0.0, 0.0]).unwrap();
        let v = TangentVector::from_slices(&[3.0, 4.0], &[5.0, 6.0]).unwrap();
        assert_eq!(liouville(&x0, &v).unwrap(), 0.0);
        let x = PhasePoint::from_slices(&[0.2, 0.4], &[1.0, 2.0]).unwrap();
        let vert = TangentVector::from_slices(&[0.0, 0.0], &[5.0, 6.0]).unwrap();
        assert_eq!(liouville(&x, &vert).unwrap(), 0.0);
        let hor = TangentVector::from_slices(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(liouville(&x, &hor).unwrap(), 11.0);
    }

    #[test]
    fn restricted_form_examples() {
        let v = restricted_form(&SubspaceFrame::vertical(3));
        assert_eq!(v.entries, DMatrix::zeros(3, 3));

        let t3 = 0.21;
        let m = restricted_form(&p1_frame(t3)).entries;
        assert_eq!(m[(0, 1)], 0.0);
        assert!((m[(0, 2)] + 2.0 * PI * (2.0 * PI * t3).sin()).abs() < 1e-14);
        assert!((m[(1, 2)] - 2.0 * PI * (2.0 * PI * t3).cos()).abs() < 1e-14);

        let one = SubspaceFrame::from_columns(&[
            TangentVector::from_slices(&[1.0, 2.0], &[3.0, 4.0]).unwrap()
        ])
        .unwrap();
        assert_eq!(restricted_form(&one).entries, DMatrix::zeros(1, 1));
    }

    #[test]
    fn kernel_examples() {
        let z = RestrictedFormMatrix::from_entries(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(kernel(&z, RANK_TOL).dim, 3);

        let j = RestrictedFormMatrix::from_entries(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0, 0.0],
        ))
        .unwrap();
        let k = kernel(&j, RANK_TOL);
        assert_eq!(k.dim, 0);
        assert!(k.warnings.is_empty());

        let t3 = 0.13;
        let k = kernel(&restricted_form(&p1_frame(t3)), RANK_TOL);
        assert_eq!(k.dim, 1);
        let b = k.basis.column(0);
        let expected = [(2.0 * PI * t3).cos(), (2.0 * PI * t3).sin(), 0.0];
        let sign = b[0] * expected[0] + b[1] * expected[1];
        for i in 0..3 {
            assert!((b[i] * sign.signum() - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_flags_odd_rank() {
        let m = RestrictedFormMatrix::from_entries(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        let k = kernel(&m, RANK_TOL);
        assert_eq!(k.dim, 1);
        assert!(k.warnings.iter().any(|w| matches!(w, KernelWarning::OddRank { .. })));
        assert!(k.warnings.iter().any(|w| matches!(w, KernelWarning::NotAntisymmetric { .. })));
    }

    #[test]
    fn lagrangian_defect_examples() {
        assert_eq!(lagrangian_defect(&SubspaceFrame::horizontal(3)).unwrap(), 0.0);
        let expected = 2.0 * PI / (1.0 + 4.0 * PI * PI).sqrt();
        assert!((lagrangian_defect(&p1_frame(0.0)).unwrap() - expected).abs() < 1e-12);
        assert!(lagrangian_defect(&SubspaceFrame::vertical(3)).unwrap().abs() < 1e-15);
        let f = SubspaceFrame::from_columns(&[
            TangentVector::from_slices(&[1.0, 0.0], &[0.0, 0.0]).unwrap()
        ])
        .unwrap();
        assert!(lagrangian_defect(&f).is_err());
    }

    #[test]
    fn herman_frame_raw_defect() {
        for &t2 in &[0.0, 0.1, 0.25, 0.6] {
            let dpsi = (2.0 * PI * t2).cos();
            let f = SubspaceFrame::from_columns(&[
                TangentVector::from_slices(&[1.0, 0.0], &[0.0, 0.0]).unwrap(),
                TangentVector::from_slices(&[0.0, 1.0], &[dpsi, 0.0]).unwrap(),
            ])
            .unwrap();
            assert!((raw_form_defect(&f) - dpsi.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn vertical_angle_examples() {
        assert!(vertical_angle(&SubspaceFrame::vertical(2)).abs() < 1e-15);
        assert!((vertical_angle(&SubspaceFrame::horizontal(2)) - PI / 2.0).abs() < 1e-15);
        let g = SubspaceFrame::graph(&DMatrix::identity(1, 1)).unwrap();
        assert!((vertical_angle(&g) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn graph_matrix_roundtrip() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let f = SubspaceFrame::graph(&s).unwrap();
        assert!((graph_matrix(&f).unwrap() - s).norm() < 1e-14);
        assert!(matches!(
            graph_matrix(&SubspaceFrame::vertical(2)),
            Err(Error::NotAGraph { .. })
        ));
    }

    #[test]
    fn frame_rejects_rank_deficiency() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(SubspaceFrame::new(m), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(3.5), 0.5);
        assert_eq!(wrap_unit(-1e-18), 0.0);
        assert_eq!(wrap_centered(0.75), -0.25);
        let a = DVector::from_vec(vec![0.05, 0.5]);
        let b = DVector::from_vec(vec![0.95, 0.5]);
        assert!((torus_distance(&a, &b) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn symplectic_inverse_is_inverse() {
        let mut j = DMatrix::identity(2, 2);
        j[(0, 1)] = 3.0;
        assert!((symplectic_inverse(&j) * &j - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(symplectic_defect(&j) < 1e-15);
    }
}
