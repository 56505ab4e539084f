//! Sub-Riemannian structures over Lie-algebra frames and structured
//! (base-dependent) frames, with orthonormalization into a working frame.
//!
//! All downstream curvature formulas consume a [`FramePoint`]: the structure
//! coefficients of an orthonormal adapted frame at one base point, together
//! with their derivatives along the frame directions. Constant frames have
//! vanishing derivative blocks and can be carried in exact arithmetic.

use crate::algebra::LieAlgebra;
use crate::error::{CoreError, Result};
use crate::linalg::{Mat, T3, T4};
use crate::poly::{left_invariant_field_of, left_invariant_fields, PolyVectorField};
use crate::scalar::Scalar;
use std::sync::Arc;

/// Structure data of an orthonormal adapted frame at a single base point.
///
/// `c[(i,j,k)]` are the frame structure coefficients, `dc[(l,i,j,k)]` their
/// derivatives along frame direction `l`. The first legs of the frame are
/// horizontal exactly where `horizontal[i]` holds.
#[derive(Debug, Clone)]
pub struct FramePoint<S> {
    pub n: usize,
    pub horizontal: Vec<bool>,
    pub c: T3<S>,
    pub dc: T4<S>,
}

impl<S: Scalar> FramePoint<S> {
    pub fn horizontal_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.horizontal[i]).collect()
    }

    pub fn vertical_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.horizontal[i]).collect()
    }

    pub fn rank_h(&self) -> usize {
        self.horizontal.iter().filter(|&&h| h).count()
    }

    /// Max-norm of the frame Jacobi residual
    /// `cyc( c_{jk}^m c_{im}^l + D_i c_{jk}^l )`; a sanity check that the
    /// declared coefficients come from an actual frame of vector fields.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = S::zero();
                        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                            acc = acc + self.dc[(a, b, c, l)].clone();
                            for m in 0..n {
                                acc = acc
                                    + self.c[(b, c, m)].clone() * self.c[(a, m, l)].clone();
                            }
                        }
                        worst = worst.max(acc.to_f64().abs());
                    }
                }
            }
        }
        worst
    }

    pub fn to_f64(&self) -> FramePoint<f64> {
        FramePoint {
            n: self.n,
            horizontal: self.horizontal.clone(),
            c: self.c.map(|x| x.to_f64()),
            dc: self.dc.map(|x| x.to_f64()),
        }
    }
}

/// A sub-Riemannian structure over a left-invariant (constant) frame:
/// a horizontal subset of the basis, the horizontal Gram matrix and a taming
/// full Gram matrix.
#[derive(Debug, Clone)]
pub struct SubRiemannianStructure<S> {
    pub algebra: LieAlgebra<S>,
    /// 0-indexed basis positions spanning H.
    pub horizontal: Vec<usize>,
    pub gram_h: Mat<S>,
    pub gram_full: Mat<S>,
}

impl<S: Scalar> SubRiemannianStructure<S> {
    pub fn new(
        algebra: LieAlgebra<S>,
        horizontal: Vec<usize>,
        gram_h: Mat<S>,
        gram_full: Mat<S>,
    ) -> Result<Self> {
        let dim = algebra.dim;
        if gram_full.rows != dim || gram_full.cols != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: gram_full.rows });
        }
        let nh = horizontal.len();
        if gram_h.rows != nh || gram_h.cols != nh {
            return Err(CoreError::DimensionMismatch { expected: nh, got: gram_h.rows });
        }
        for &i in &horizontal {
            if i >= dim {
                return Err(CoreError::InvalidArgument(format!(
                    "horizontal index {} out of range",
                    i + 1
                )));
            }
        }
        // Taming: the full metric restricted to H must equal the horizontal metric.
        for (a, &i) in horizontal.iter().enumerate() {
            for (b, &j) in horizontal.iter().enumerate() {
                if gram_full[(i, j)] != gram_h[(a, b)] {
                    return Err(CoreError::Precondition(format!(
                        "taming violated: gram_full[{},{}] differs from gram_h[{},{}]",
                        i + 1,
                        j + 1,
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(SubRiemannianStructure { algebra, horizontal, gram_h, gram_full })
    }

    /// Orthonormal structure: identity Gram matrices for the listed
    /// horizontal indices and the full basis.
    pub fn orthonormal(algebra: LieAlgebra<S>, horizontal: Vec<usize>) -> Result<Self> {
        let dim = algebra.dim;
        let nh = horizontal.len();
        Self::new(algebra, horizontal, Mat::identity(nh), Mat::identity(dim))
    }

    pub fn rank_h(&self) -> usize {
        self.horizontal.len()
    }

    pub fn is_horizontal_index(&self, i: usize) -> bool {
        self.horizontal.contains(&i)
    }

    /// `#^H alpha`: the unique horizontal `v` with `alpha(w) = <v, w>_{g_H}`
    /// for horizontal `w`. Components in the original basis.
    pub fn sharp_h(&self, alpha: &[S]) -> Result<Vec<S>> {
        let dim = self.algebra.dim;
        if alpha.len() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: alpha.len() });
        }
        let g_inv = self.gram_h.inverse()?;
        let restricted: Vec<S> = self.horizontal.iter().map(|&i| alpha[i].clone()).collect();
        let coeffs = g_inv.matvec(&restricted);
        let mut v = vec![S::zero(); dim];
        for (a, &i) in self.horizontal.iter().enumerate() {
            v[i] = coeffs[a].clone();
        }
        Ok(v)
    }

    /// Cometric `<alpha, beta>_{g_H^*} = <#^H alpha, #^H beta>_{g_H}`.
    pub fn cometric(&self, alpha: &[S], beta: &[S]) -> Result<S> {
        let sharp = self.sharp_h(alpha)?;
        let mut acc = S::zero();
        for &i in &self.horizontal {
            acc = acc + sharp[i].clone() * beta[i].clone();
        }
        Ok(acc)
    }

    /// Orthonormalize into a working frame adapted to `H ⊕ V`, with `V` the
    /// `gram_full`-orthogonal complement of `H`. Exact over rationals when
    /// the Cholesky pivots are perfect squares (identity Grams always are).
    pub fn ortho_frame(&self) -> Result<OrthoFrame<S>> {
        let dim = self.algebra.dim;
        let nh = self.horizontal.len();
        let mut perm: Vec<usize> = self.horizontal.clone();
        for i in 0..dim {
            if !self.horizontal.contains(&i) {
                perm.push(i);
            }
        }
        // Gram in permuted order.
        let mut g = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                g[(a, b)] = self.gram_full[(perm[a], perm[b])].clone();
            }
        }
        // Horizontal block.
        let mut ghh = Mat::zeros(nh, nh);
        for a in 0..nh {
            for b in 0..nh {
                ghh[(a, b)] = g[(a, b)].clone();
            }
        }
        let nv = dim - nh;
        let lh = ghh.cholesky()?;
        let lh_invt = lh.inverse()?.transpose();
        // Vertical complement through the Schur complement.
        let mut ghv = Mat::zeros(nh, nv);
        let mut gvv = Mat::zeros(nv, nv);
        for a in 0..nh {
            for b in 0..nv {
                ghv[(a, b)] = g[(a, nh + b)].clone();
            }
        }
        for a in 0..nv {
            for b in 0..nv {
                gvv[(a, b)] = g[(nh + a, nh + b)].clone();
            }
        }
        let ghh_inv = ghh.inverse()?;
        let proj = ghh_inv.matmul(&ghv); // coefficients of the H-projection
        let schur = gvv.sub(&ghv.transpose().matmul(&proj));
        let lv_invt = if nv > 0 { schur.cholesky()?.inverse()?.transpose() } else { Mat::zeros(0, 0) };

        // Columns of m_perm express the working frame in permuted coordinates.
        let mut m_perm = Mat::zeros(dim, dim);
        for a in 0..nh {
            for b in 0..nh {
                m_perm[(a, b)] = lh_invt[(a, b)].clone();
            }
        }
        let minus_proj_lv = proj.matmul(&lv_invt);
        for a in 0..nh {
            for b in 0..nv {
                m_perm[(a, nh + b)] = -minus_proj_lv[(a, b)].clone();
            }
        }
        for a in 0..nv {
            for b in 0..nv {
                m_perm[(nh + a, nh + b)] = lv_invt[(a, b)].clone();
            }
        }
        // Scatter rows back to original coordinates.
        let mut m = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                m[(perm[a], b)] = m_perm[(a, b)].clone();
            }
        }
        let m_inv = m.inverse()?;

        // Transformed structure constants.
        let mut c = T3::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                // bracket of columns a and b in original coordinates
                let mut va = vec![S::zero(); dim];
                let mut vb = vec![S::zero(); dim];
                for i in 0..dim {
                    va[i] = m[(i, a)].clone();
                    vb[i] = m[(i, b)].clone();
                }
                let br = self.algebra.bracket(&va, &vb)?;
                let coeffs = m_inv.matvec(&br);
                for d in 0..dim {
                    c[(a, b, d)] = coeffs[d].clone();
                }
            }
        }
        let mut horizontal = vec![false; dim];
        for h in horizontal.iter_mut().take(nh) {
            *h = true;
        }
        Ok(OrthoFrame {
            point: FramePoint { n: dim, horizontal, c, dc: T4::zeros(dim) },
            basis_map: m,
            basis_map_inv: m_inv,
        })
    }

    /// Working frame together with its left-invariant polynomial fields in
    /// the original exponential coordinates. Nilpotent step <= 4 only.
    pub fn invariant_frame(&self) -> Result<InvariantFrame<S>> {
        let ortho = self.ortho_frame()?;
        let base_fields = left_invariant_fields(&self.algebra)?;
        let dim = self.algebra.dim;
        let mut fields = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut col = vec![S::zero(); dim];
            for i in 0..dim {
                col[i] = ortho.basis_map[(i, a)].clone();
            }
            fields.push(left_invariant_field_of(&base_fields, &col));
        }
        Ok(InvariantFrame { ortho, fields })
    }

    pub fn to_f64(&self) -> SubRiemannianStructure<f64> {
        SubRiemannianStructure {
            algebra: self.algebra.to_f64(),
            horizontal: self.horizontal.clone(),
            gram_h: self.gram_h.to_f64(),
            gram_full: self.gram_full.to_f64(),
        }
    }
}

/// Orthonormal working frame of a constant structure.
#[derive(Debug, Clone)]
pub struct OrthoFrame<S> {
    pub point: FramePoint<S>,
    /// Columns express working frame vectors in the original basis.
    pub basis_map: Mat<S>,
    pub basis_map_inv: Mat<S>,
}

impl<S: Scalar> OrthoFrame<S> {
    /// Original-basis vector -> working-frame components.
    pub fn vector_to_frame(&self, v: &[S]) -> Vec<S> {
        self.basis_map_inv.matvec(v)
    }

    /// Original-basis covector components -> working-coframe components.
    pub fn covector_to_frame(&self, alpha: &[S]) -> Vec<S> {
        self.basis_map.transpose().matvec(alpha)
    }

    /// Working-frame vector components -> original basis.
    pub fn vector_from_frame(&self, w: &[S]) -> Vec<S> {
        self.basis_map.matvec(w)
    }
}

/// Orthonormal working frame of a left-invariant structure together with the
/// polynomial realizations of the frame fields.
#[derive(Debug, Clone)]
pub struct InvariantFrame<S> {
    pub ortho: OrthoFrame<S>,
    pub fields: Vec<PolyVectorField<S>>,
}

impl<S: Scalar> InvariantFrame<S> {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn point(&self) -> &FramePoint<S> {
        &self.ortho.point
    }

    pub fn horizontal_fields(&self) -> Vec<&PolyVectorField<S>> {
        self.ortho
            .point
            .horizontal_indices()
            .into_iter()
            .map(|i| &self.fields[i])
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Structured frames: analytic structure functions over base parameters.
// ---------------------------------------------------------------------------

/// 2-jet of a function of one base parameter; enough to carry structure
/// functions and their first derivatives through products and quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet2 {
    v: f64,
    d1: f64,
    d2: f64,
}

impl Jet2 {
    fn constant(v: f64) -> Self {
        Jet2 { v, d1: 0.0, d2: 0.0 }
    }

    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.v * o.d1 + self.d1 * o.v,
            d2: self.v * o.d2 + 2.0 * self.d1 * o.d1 + self.d2 * o.v,
        }
    }

    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }

    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }

    fn recip(self) -> Jet2 {
        let iv = 1.0 / self.v;
        Jet2 {
            v: iv,
            d1: -self.d1 * iv * iv,
            d2: (2.0 * self.d1 * self.d1 * iv - self.d2) * iv * iv,
        }
    }
}

/// Analytic profile `f(c)` with its first two derivatives.
#[derive(Clone)]
pub struct CurveProfile {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub ddf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for CurveProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CurveProfile({})", self.name)
    }
}

/// `f(c) = -c * arctan(c)`: bounded above, unbounded below, with bounded
/// first and second derivatives.
pub fn arctan_profile() -> CurveProfile {
    CurveProfile {
        name: "arctan".into(),
        f: Arc::new(|c| -c * c.atan()),
        df: Arc::new(|c| -c.atan() - c / (1.0 + c * c)),
        ddf: Arc::new(|c| -2.0 / ((1.0 + c * c) * (1.0 + c * c))),
    }
}

/// `f ≡ 0`.
pub fn zero_profile() -> CurveProfile {
    CurveProfile {
        name: "zero".into(),
        f: Arc::new(|_| 0.0),
        df: Arc::new(|_| 0.0),
        ddf: Arc::new(|_| 0.0),
    }
}

pub fn profile_by_name(name: &str) -> Result<CurveProfile> {
    match name {
        "arctan" => Ok(arctan_profile()),
        "zero" => Ok(zero_profile()),
        other => Err(CoreError::InvalidArgument(format!("unknown profile '{other}'"))),
    }
}

/// A frame with structure functions depending on base parameters, evaluated
/// pointwise into [`FramePoint`] snapshots.
pub struct StructuredFrame {
    pub n: usize,
    pub base_dim: usize,
    pub horizontal: Vec<bool>,
    pub names: Vec<String>,
    eval: Box<dyn Fn(&[f64]) -> FramePoint<f64> + Send + Sync>,
}

impl std::fmt::Debug for StructuredFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StructuredFrame(n={}, base_dim={})", self.n, self.base_dim)
    }
}

impl StructuredFrame {
    pub fn point(&self, u: &[f64]) -> FramePoint<f64> {
        assert_eq!(u.len(), self.base_dim);
        (self.eval)(u)
    }
}

/// The direct-sum frame on `su(2) x su(2) x R`: two commuting copies of
/// `su(2)` mixed into symmetric/antisymmetric combinations, three of them
/// rescaled by `e^{f(c)}`, plus the base direction.
///
/// Frame order: `Z1 = e^f A1^s`, `Z2 = e^f A2^s`, `Z3 = e^f A1^a`, `A3^s`,
/// `A2^a`, `A3^a`, `d/dc`; the horizontal bundle is spanned by
/// `Z1, Z2, Z3, d/dc` and the metric makes the whole frame orthonormal.
pub fn su2su2r_frame(profile: CurveProfile) -> StructuredFrame {
    let names = vec![
        "Z1".into(),
        "Z2".into(),
        "Z3".into(),
        "A3s".into(),
        "A2a".into(),
        "A3a".into(),
        "dc".into(),
    ];
    let horizontal = vec![true, true, true, false, false, false, true];
    let su2 = crate::algebra::su2::<f64>();

    // Underlying constant fields: B0..B2 = A1^s..A3^s, B3..B5 = A1^a..A3^a,
    // B6 = d/dc. Brackets from the su(2) table with the s/a parity rule.
    let mut bb: T3<f64> = T3::zeros(7);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let s = *su2.structure_constant(i, j, k);
                if s == 0.0 {
                    continue;
                }
                bb[(i, j, k)] = s; // [s, s] -> s
                bb[(i, j + 3, k + 3)] = s; // [s, a] -> a
                bb[(i + 3, j, k + 3)] = s; // [a, s] -> a
                bb[(i + 3, j + 3, k)] = s; // [a, a] -> s
            }
        }
    }

    let eval = move |u: &[f64]| -> FramePoint<f64> {
        let c = u[0];
        let fv = (profile.f)(c);
        let fp = (profile.df)(c);
        let fpp = (profile.ddf)(c);
        let ef = fv.exp();
        let exp_f = Jet2 { v: ef, d1: fp * ef, d2: (fpp + fp * fp) * ef };
        let one = Jet2::constant(1.0);
        // frame leg -> (underlying field, coefficient jet)
        let sigma = [0usize, 1, 3, 2, 4, 5, 6];
        let phi = [exp_f, exp_f, exp_f, one, one, one, one];

        let n = 7;
        let mut cval: T3<f64> = T3::zeros(n);
        let mut dc: T4<f64> = T4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                // [F_i, F_j] over the B-basis, coefficients as jets
                let mut coeff = [Jet2::constant(0.0); 7];
                for (b, cf) in coeff.iter_mut().enumerate() {
                    let s = bb[(sigma[i], sigma[j], b)];
                    if s != 0.0 {
                        *cf = cf.add(phi[i].mul(phi[j]).mul(Jet2::constant(s)));
                    }
                }
                // derivative terms: only d/dc (underlying index 6) acts on c
                if sigma[i] == 6 {
                    let dphi = Jet2 { v: phi[j].d1, d1: phi[j].d2, d2: 0.0 };
                    coeff[sigma[j]] = coeff[sigma[j]].add(dphi);
                }
                if sigma[j] == 6 {
                    let dphi = Jet2 { v: phi[i].d1, d1: phi[i].d2, d2: 0.0 };
                    coeff[sigma[i]] = coeff[sigma[i]].add(dphi.neg());
                }
                // convert back to frame coefficients: divide by phi_k
                for k in 0..n {
                    let jk = coeff[sigma[k]].mul(phi[k].recip());
                    cval[(i, j, k)] = jk.v;
                    // only the base leg differentiates structure functions
                    dc[(6, i, j, k)] = jk.d1;
                }
            }
        }
        FramePoint { n, horizontal: horizontal.clone(), c: cval, dc }
    };

    StructuredFrame { n: 7, base_dim: 1, horizontal: vec![true, true, true, false, false, false, true], names, eval: Box::new(eval) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{heisenberg, su2};
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;

    fn heis_ortho() -> SubRiemannianStructure<Rational> {
        SubRiemannianStructure::orthonormal(heisenberg::<Rational>(), vec![0, 1]).unwrap()
    }

    #[test]
    fn sharp_examples() {
        let srs = heis_ortho();
        // e3* is annihilated
        let e3s = vec![rat(0, 1), rat(0, 1), rat(1, 1)];
        assert!(srs.sharp_h(&e3s).unwrap().iter().all(|x| x.is_zero()));
        // e1* -> A1
        let e1s = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        assert_eq!(srs.sharp_h(&e1s).unwrap(), vec![rat(1, 1), rat(0, 1), rat(0, 1)]);
        assert_eq!(srs.cometric(&e1s, &e1s).unwrap(), rat(1, 1));
        assert_eq!(srs.cometric(&e3s, &e1s).unwrap(), rat(0, 1));
    }

    #[test]
    fn sharp_with_scaled_gram() {
        // one-dimensional H with <e1,e1> = 4: sharp(e1*) = e1/4, cometric 1/4
        let alg = crate::algebra::abelian::<Rational>(2);
        let srs = SubRiemannianStructure::new(
            alg,
            vec![0],
            Mat::from_diag(&[rat(4, 1)]),
            Mat::from_diag(&[rat(4, 1), rat(1, 1)]),
        )
        .unwrap();
        let e1s = vec![rat(1, 1), rat(0, 1)];
        assert_eq!(srs.sharp_h(&e1s).unwrap(), vec![rat(1, 4), rat(0, 1)]);
        assert_eq!(srs.cometric(&e1s, &e1s).unwrap(), rat(1, 4));
    }

    #[test]
    fn taming_validation() {
        let alg = crate::algebra::abelian::<Rational>(2);
        let bad = SubRiemannianStructure::new(
            alg,
            vec![0],
            Mat::from_diag(&[rat(4, 1)]),
            Mat::from_diag(&[rat(1, 1), rat(1, 1)]),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn ortho_frame_identity_gram_is_identity_map() {
        let srs = heis_ortho();
        let of = srs.ortho_frame().unwrap();
        assert_eq!(of.basis_map, Mat::<Rational>::identity(3));
        assert_eq!(of.point.c, heisenberg::<Rational>().constants().clone());
        assert_eq!(of.point.horizontal, vec![true, true, false]);
    }

    #[test]
    fn ortho_frame_scaled_gram_exact() {
        // gram_full = diag(4, 1, 9) on Heisenberg: perfect squares, exact.
        let srs = SubRiemannianStructure::new(
            heisenberg::<Rational>(),
            vec![0, 1],
            Mat::from_diag(&[rat(4, 1), rat(1, 1)]),
            Mat::from_diag(&[rat(4, 1), rat(1, 1), rat(9, 1)]),
        )
        .unwrap();
        let of = srs.ortho_frame().unwrap();
        // new frame: e1/2, e2, e3/3; [e1/2, e2] = e3/2 = (3/2) * (e3/3)
        assert_eq!(of.point.c[(0, 1, 2)], rat(3, 2));
        // orthonormality is definitional; check the Gram transform
        let m = &of.basis_map;
        let g = Mat::from_diag(&[rat(4, 1), rat(1, 1), rat(9, 1)]);
        let gram_new = m.transpose().matmul(&g).matmul(m);
        assert_eq!(gram_new, Mat::<Rational>::identity(3));
    }

    #[test]
    fn ortho_frame_mixed_gram_f64() {
        // a non-diagonal taming metric on the Heisenberg algebra
        let mut g = Mat::<f64>::identity(3);
        g[(0, 2)] = 0.3;
        g[(2, 0)] = 0.3;
        g[(2, 2)] = 2.0;
        let srs = SubRiemannianStructure::new(
            heisenberg::<f64>(),
            vec![0, 1],
            Mat::identity(2),
            g.clone(),
        )
        .unwrap();
        let of = srs.ortho_frame().unwrap();
        let gram_new = of.basis_map.transpose().matmul(&g).matmul(&of.basis_map);
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram_new[(a, b)] - expect).abs() < 1e-12);
            }
        }
        // vertical leg stays the gram-orthogonal complement of span(e1, e2)
        let v: Vec<f64> = (0..3).map(|i| of.basis_map[(i, 2)]).collect();
        let dot0: f64 = (0..3).map(|i| g[(0, i)] * v[i]).sum();
        assert!(dot0.abs() < 1e-12);
    }

    #[test]
    fn su2_frame_point_is_constant_and_valid() {
        let srs = SubRiemannianStructure::orthonormal(su2::<Rational>(), vec![0, 1, 2]).unwrap();
        let of = srs.ortho_frame().unwrap();
        assert_eq!(of.point.jacobi_residual(), 0.0);
    }

    #[test]
    fn structured_frame_satisfies_jacobi() {
        for profile in [arctan_profile(), zero_profile()] {
            let frame = su2su2r_frame(profile);
            for c in [-2.0, -0.5, 0.0, 0.7, 1.3] {
                let p = frame.point(&[c]);
                assert!(p.jacobi_residual() < 1e-9, "jacobi at c={c}");
                // antisymmetry
                for i in 0..7 {
                    for j in 0..7 {
                        for k in 0..7 {
                            assert!((p.c[(i, j, k)] + p.c[(j, i, k)]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn structured_frame_matches_hand_table_at_zero() {
        // Independent oracle: the bracket table derived by hand from the
        // definition of the fields, evaluated at c = 0 for f = -c atan(c)
        // (f = 0, f' = 0 there, so every e^f factor is 1).
        let frame = su2su2r_frame(arctan_profile());
        let p = frame.point(&[0.0]);
        let expect: &[(usize, usize, usize, f64)] = &[
            (0, 1, 3, 1.0),  // [Z1, Z2] = e^{2f} A3s
            (1, 2, 5, -1.0), // [Z2, Z3] = -e^{2f} A3a
            (0, 3, 1, -1.0), // [Z1, A3s] = -Z2
            (1, 3, 0, 1.0),  // [Z2, A3s] = Z1
            (2, 3, 4, -1.0), // [Z3, A3s] = -e^f A2a
            (0, 4, 5, 1.0),  // [Z1, A2a] = e^f A3a
            (2, 4, 3, 1.0),  // [Z3, A2a] = e^f A3s
            (0, 5, 4, -1.0), // [Z1, A3a] = -e^f A2a
            (1, 5, 2, 1.0),  // [Z2, A3a] = Z3
            (2, 5, 1, -1.0), // [Z3, A3a] = -Z2
            (3, 4, 2, -1.0), // [A3s, A2a] = -e^{-f} Z3
            (4, 5, 0, 1.0),  // [A2a, A3a] = e^{-f} Z1
        ];
        let mut nonzero = std::collections::HashMap::new();
        for &(i, j, k, v) in expect {
            nonzero.insert((i, j, k), v);
            nonzero.insert((j, i, k), -v);
        }
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    let want = nonzero.get(&(i, j, k)).copied().unwrap_or(0.0);
                    assert!(
                        (p.c[(i, j, k)] - want).abs() < 1e-12,
                        "c[{i}{j}{k}] = {} want {}",
                        p.c[(i, j, k)],
                        want
                    );
                }
            }
        }
        // [dc, Z_j] = f' Z_j vanishes at 0 for this profile
        for j in 0..3 {
            assert!(p.c[(6, j, j)].abs() < 1e-14);
        }
        // derivative of c_{6j}^j is f''(0) = -2
        for j in 0..3 {
            assert!((p.dc[(6, 6, j, j)] - (-2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn structured_frame_at_nonzero_c() {
        // cross-check a few entries against closed forms at c = 1
        let frame = su2su2r_frame(arctan_profile());
        let c = 1.0f64;
        let p = frame.point(&[c]);
        let f = -c * c.atan();
        let fp = -c.atan() - c / (1.0 + c * c);
        let e2f = (2.0 * f).exp();
        assert!((p.c[(0, 1, 3)] - e2f).abs() < 1e-12); // [Z1,Z2] = e^{2f} A3s
        assert!((p.c[(6, 0, 0)] - fp).abs() < 1e-12); // [dc, Z1] = f' Z1
        assert!((p.c[(3, 4, 2)] + (-f).exp()).abs() < 1e-12); // [A3s,A2a] = -e^{-f} Z3
        let cocurv = p.c[(3, 4, 2)];
        assert!(cocurv.abs() > 0.1, "cocurvature visible in the constants");
    }
}
