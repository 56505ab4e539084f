//! Exact operator identities on left-invariant frames: rough Laplacians on
//! functions and one-forms with polynomial coefficients, and the residuals
//! that are required to vanish identically.

use crate::connection::{second_fundamental_max, ConnPoint};
use crate::curvature::{c_two_form, codifferential_two_form, ricci_matrix, script_a};
use crate::error::{CoreError, Result};
use crate::frame::InvariantFrame;
use crate::linalg::Mat;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// One-form expressed in the working coframe: `η = Σ_a η_a E^a*` with
/// polynomial coefficients in the exponential coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOneForm<S> {
    pub components: Vec<Poly<S>>,
}

impl<S: Scalar> FrameOneForm<S> {
    pub fn zero(frame_dim: usize, nvars: usize) -> Self {
        FrameOneForm { components: (0..frame_dim).map(|_| Poly::zero(nvars)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_coeff_abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        FrameOneForm {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        FrameOneForm {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        FrameOneForm { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

}

/// `df` in the working coframe: components `Ã_a f`.
pub fn differential<S: Scalar>(frame: &InvariantFrame<S>, f: &Poly<S>) -> Result<FrameOneForm<S>> {
    let mut comps = Vec::with_capacity(frame.dim());
    for a in &frame.fields {
        comps.push(a.apply(f)?);
    }
    Ok(FrameOneForm { components: comps })
}

/// Covariant derivative `(∇_{E_i} η)_j = Ã_i(η_j) - Σ_k Γ_{ij}^k η_k`.
pub fn covariant_derivative<S: Scalar>(
    frame: &InvariantFrame<S>,
    conn: &ConnPoint<S>,
    i: usize,
    eta: &FrameOneForm<S>,
) -> Result<FrameOneForm<S>> {
    let n = frame.dim();
    let mut comps = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = frame.fields[i].apply(&eta.components[j])?;
        for k in 0..n {
            let g = &conn.gamma[(i, j, k)];
            if !g.is_zero() {
                acc = acc - eta.components[k].scale(g);
            }
        }
        comps.push(acc);
    }
    Ok(FrameOneForm { components: comps })
}

/// Rough Laplacian on one-forms: `Σ_a [∇_a ∇_a η - ∇_{∇_a E_a} η]`, the trace
/// running over the horizontal legs (or all legs when `horizontal_only` is
/// false).
pub fn rough_laplacian_form<S: Scalar>(
    frame: &InvariantFrame<S>,
    conn: &ConnPoint<S>,
    horizontal_only: bool,
    eta: &FrameOneForm<S>,
) -> Result<FrameOneForm<S>> {
    let n = frame.dim();
    let nvars = frame.fields[0].nvars();
    let mut acc = FrameOneForm::zero(n, nvars);
    let fp = frame.point();
    for a in 0..n {
        if horizontal_only && !fp.horizontal[a] {
            continue;
        }
        let first = covariant_derivative(frame, conn, a, eta)?;
        let second = covariant_derivative(frame, conn, a, &first)?;
        acc = acc.add(&second);
        for k in 0..n {
            let g = &conn.gamma[(a, a, k)];
            if !g.is_zero() {
                let corr = covariant_derivative(frame, conn, k, eta)?;
                acc = acc.sub(&corr.scale(g));
            }
        }
    }
    Ok(acc)
}

/// Rough Laplacian on functions: `Σ_a [Ã_a Ã_a f - Γ_{aa}^k Ã_k f]`.
pub fn rough_laplacian_scalar<S: Scalar>(
    frame: &InvariantFrame<S>,
    conn: &ConnPoint<S>,
    horizontal_only: bool,
    f: &Poly<S>,
) -> Result<Poly<S>> {
    let n = frame.dim();
    let mut acc = Poly::zero(f.nvars);
    let fp = frame.point();
    for a in 0..n {
        if horizontal_only && !fp.horizontal[a] {
            continue;
        }
        acc = acc + frame.fields[a].apply(&frame.fields[a].apply(f)?)?;
        for k in 0..n {
            let g = &conn.gamma[(a, a, k)];
            if !g.is_zero() {
                acc = acc - frame.fields[k].apply(f)?.scale(g);
            }
        }
    }
    Ok(acc)
}

fn apply_matrix<S: Scalar>(m: &Mat<S>, eta: &FrameOneForm<S>) -> FrameOneForm<S> {
    let n = m.rows;
    let nvars = eta.components[0].nvars;
    let mut comps = vec![Poly::zero(nvars); n];
    for j in 0..n {
        for l in 0..n {
            if !m[(j, l)].is_zero() {
                comps[j] = comps[j].clone() + eta.components[l].scale(&m[(j, l)]);
            }
        }
    }
    FrameOneForm { components: comps }
}

/// `(L(∇̂) - Ric(∇)) df - d L(∇̂) f` as exact polynomials; identically zero
/// for any connection compatible with the horizontal structure.
pub fn weitzenbock_residual<S: Scalar>(
    frame: &InvariantFrame<S>,
    conn: &ConnPoint<S>,
    f: &Poly<S>,
) -> Result<FrameOneForm<S>> {
    let fp = frame.point();
    let adj = conn.adjoint(fp);
    let df = differential(frame, f)?;
    let l_hat_df = rough_laplacian_form(frame, &adj, true, &df)?;
    let ric = ricci_matrix(conn, fp);
    let ric_df = apply_matrix(&ric, &df);
    let l_hat_f = rough_laplacian_scalar(frame, &adj, true, f)?;
    let d_lf = differential(frame, &l_hat_f)?;
    Ok(l_hat_df.sub(&ric_df).sub(&d_lf))
}

/// `L df - d L f + 2 D^m df - A(df)` with `L = L(∇)`,
/// `m(β ⊗ α) = α(T(#^H β, ·))` and `A` the zero-order operator of the
/// torsion identity; identically zero for compatible metric connections.
pub fn metric_torsion_residual<S: Scalar>(
    frame: &InvariantFrame<S>,
    conn: &ConnPoint<S>,
    f: &Poly<S>,
) -> Result<FrameOneForm<S>> {
    let fp = frame.point();
    let n = frame.dim();
    let nvars = frame.fields[0].nvars();
    let df = differential(frame, f)?;
    let l_df = rough_laplacian_form(frame, conn, true, &df)?;
    let lf = rough_laplacian_scalar(frame, conn, true, f)?;
    let d_lf = differential(frame, &lf)?;
    // D^m η = Σ_{b in H} Σ_k T_{bj}^k (∇_{E_b} η)_k
    let torsion = conn.torsion(fp);
    let mut dm = FrameOneForm::zero(n, nvars);
    for b in 0..n {
        if !fp.horizontal[b] {
            continue;
        }
        let nabla_b = covariant_derivative(frame, conn, b, &df)?;
        for j in 0..n {
            for k in 0..n {
                let t = &torsion[(b, j, k)];
                if !t.is_zero() {
                    dm.components[j] = dm.components[j].clone() + nabla_b.components[k].scale(t);
                }
            }
        }
    }
    let (a_matrix, disc) = script_a(fp, conn);
    if disc > 1e-9 {
        return Err(CoreError::Inconsistency(format!(
            "the two routes of the zero-order operator disagree by {disc:.3e}"
        )));
    }
    let a_df = apply_matrix(&a_matrix, &df);
    Ok(l_df.sub(&d_lf).add(&dm.scale(&S::from_int(2))).sub(&a_df))
}

/// `Δ_g Δ_H f - Δ_H Δ_g f`, exact. The identity requires the commutation
/// hypotheses (vanishing second fundamental tensor and coclosed `C`);
/// violated preconditions are reported as errors.
pub fn commutation_residual<S: Scalar>(frame: &InvariantFrame<S>, f: &Poly<S>) -> Result<Poly<S>> {
    let fp = frame.point();
    let ii = second_fundamental_max(fp);
    if ii > 1e-12 {
        return Err(CoreError::Precondition(format!(
            "second fundamental tensor does not vanish (max {ii:.3e})"
        )));
    }
    let (c2, dc2) = c_two_form(fp);
    let lc = crate::connection::levi_civita(fp);
    let delta_c = codifferential_two_form(fp, &lc, &c2, &dc2)
        .iter()
        .map(|x| x.to_f64().abs())
        .fold(0.0, f64::max);
    if delta_c > 1e-12 {
        return Err(CoreError::Precondition(format!(
            "the two-form C is not coclosed (max |δC| = {delta_c:.3e})"
        )));
    }
    commutation_residual_unchecked(frame, f)
}

/// The raw commutator `Δ_g Δ_H f - Δ_H Δ_g f` with no hypothesis checks;
/// used by the negative controls.
pub fn commutation_residual_unchecked<S: Scalar>(
    frame: &InvariantFrame<S>,
    f: &Poly<S>,
) -> Result<Poly<S>> {
    let fp = frame.point();
    let h_fields: Vec<_> = fp
        .horizontal_indices()
        .into_iter()
        .map(|i| frame.fields[i].clone())
        .collect();
    let sub = |g: &Poly<S>| crate::poly::sum_of_squares(&h_fields, g);
    let full = |g: &Poly<S>| crate::poly::sum_of_squares(&frame.fields, g);
    Ok(full(&sub(f)?)? - sub(&full(f)?)?)
}

/// A connection that deliberately breaks compatibility with the horizontal
/// structure; the negative control for the identity suite.
pub fn incompatible_test_connection<S: Scalar>(fp: &crate::frame::FramePoint<S>) -> ConnPoint<S> {
    let mut conn = ConnPoint::zero(fp.n);
    let h = fp.horizontal_indices();
    let v = fp.vertical_indices();
    if let (Some(&a), Some(&z)) = (h.first(), v.first()) {
        // push a horizontal leg out of H under ∇_{E_a}
        conn.gamma[(a, a, z)] = S::one();
    }
    conn
}
