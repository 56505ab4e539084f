//! Frame connections: coefficients `Γ_{ij}^k` (and their frame derivatives)
//! at a base point, with the constructions used throughout — the flat
//! left-invariant connection, Levi-Civita, Bott, the canonical connection
//! built from the torsion three-form, adjoints and admissible perturbations.

use crate::error::{CoreError, Result};
use crate::frame::FramePoint;
use crate::linalg::{T3, T4};
use crate::scalar::Scalar;
use serde::Serialize;

/// Connection coefficients at one base point of an orthonormal adapted frame:
/// `∇_{E_i} E_j = Γ_{ij}^k E_k`, plus derivatives `dgamma[(l,i,j,k)] = D_l Γ_{ij}^k`.
#[derive(Debug, Clone)]
pub struct ConnPoint<S> {
    pub gamma: T3<S>,
    pub dgamma: T4<S>,
}

impl<S: Scalar> ConnPoint<S> {
    pub fn zero(n: usize) -> Self {
        ConnPoint { gamma: T3::zeros(n), dgamma: T4::zeros(n) }
    }

    pub fn n(&self) -> usize {
        self.gamma.n
    }

    /// Torsion `T_{ij}^k = Γ_{ij}^k - Γ_{ji}^k - c_{ij}^k`.
    pub fn torsion(&self, fp: &FramePoint<S>) -> T3<S> {
        let n = self.n();
        let mut t = T3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[(i, j, k)] = self.gamma[(i, j, k)].clone()
                        - self.gamma[(j, i, k)].clone()
                        - fp.c[(i, j, k)].clone();
                }
            }
        }
        t
    }

    /// Frame derivatives of the torsion.
    pub fn dtorsion(&self, fp: &FramePoint<S>) -> T4<S> {
        let n = self.n();
        let mut t = T4::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        t[(l, i, j, k)] = self.dgamma[(l, i, j, k)].clone()
                            - self.dgamma[(l, j, i, k)].clone()
                            - fp.dc[(l, i, j, k)].clone();
                    }
                }
            }
        }
        t
    }

    /// Adjoint connection `∇̂_A B = ∇_A B - T(A, B)`, i.e.
    /// `Γ̂_{ij}^k = Γ_{ji}^k + c_{ij}^k`.
    pub fn adjoint(&self, fp: &FramePoint<S>) -> ConnPoint<S> {
        let n = self.n();
        let mut gamma = T3::zeros(n);
        let mut dgamma = T4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    gamma[(i, j, k)] = self.gamma[(j, i, k)].clone() + fp.c[(i, j, k)].clone();
                    for l in 0..n {
                        dgamma[(l, i, j, k)] =
                            self.dgamma[(l, j, i, k)].clone() + fp.dc[(l, i, j, k)].clone();
                    }
                }
            }
        }
        ConnPoint { gamma, dgamma }
    }
}

/// The connection with every left-invariant field parallel: `Γ ≡ 0`.
pub fn flat_connection<S: Scalar>(fp: &FramePoint<S>) -> ConnPoint<S> {
    ConnPoint::zero(fp.n)
}

/// Levi-Civita connection of the frame metric, through the Koszul formula in
/// an orthonormal frame: `Γ_{ij}^k = (c_{ij}^k - c_{jk}^i + c_{ki}^j) / 2`.
pub fn levi_civita<S: Scalar>(fp: &FramePoint<S>) -> ConnPoint<S> {
    let n = fp.n;
    let half = S::from_ratio(1, 2);
    let mut gamma = T3::zeros(n);
    let mut dgamma = T4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma[(i, j, k)] = (fp.c[(i, j, k)].clone() - fp.c[(j, k, i)].clone()
                    + fp.c[(k, i, j)].clone())
                    * half.clone();
                for l in 0..n {
                    dgamma[(l, i, j, k)] = (fp.dc[(l, i, j, k)].clone()
                        - fp.dc[(l, j, k, i)].clone()
                        + fp.dc[(l, k, i, j)].clone())
                        * half.clone();
                }
            }
        }
    }
    ConnPoint { gamma, dgamma }
}

/// Curvature `R(A,Z) = pr_V [pr_H A, pr_H Z]` of the splitting, as frame
/// coefficients: nonzero only for horizontal legs and vertical values.
pub fn splitting_curvature<S: Scalar>(fp: &FramePoint<S>) -> T3<S> {
    let n = fp.n;
    let mut r = T3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if !(fp.horizontal[i] && fp.horizontal[j]) {
                continue;
            }
            for k in 0..n {
                if !fp.horizontal[k] {
                    r[(i, j, k)] = fp.c[(i, j, k)].clone();
                }
            }
        }
    }
    r
}

/// Cocurvature `R̄(A,Z) = pr_H [pr_V A, pr_V Z]`; vanishes iff V is integrable.
pub fn splitting_cocurvature<S: Scalar>(fp: &FramePoint<S>) -> T3<S> {
    let n = fp.n;
    let mut r = T3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if fp.horizontal[i] || fp.horizontal[j] {
                continue;
            }
            for k in 0..n {
                if fp.horizontal[k] {
                    r[(i, j, k)] = fp.c[(i, j, k)].clone();
                }
            }
        }
    }
    r
}

/// The torsion three-form `ζ = cyc<R(.,.),.> + cyc<R̄(.,.),.>` and its frame
/// derivatives. Both tensors are linear in the structure coefficients.
pub fn torsion_three_form<S: Scalar>(fp: &FramePoint<S>) -> (T3<S>, T4<S>) {
    let n = fp.n;
    let proj = |i: usize, j: usize, k: usize| -> bool {
        // <R(E_i,E_j), E_k> + <R̄(E_i,E_j), E_k> is c_{ij}^k when either
        // (i,j in H, k in V) or (i,j in V, k in H), zero otherwise.
        (fp.horizontal[i] && fp.horizontal[j] && !fp.horizontal[k])
            || (!fp.horizontal[i] && !fp.horizontal[j] && fp.horizontal[k])
    };
    let mut zeta = T3::zeros(n);
    let mut dzeta = T4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = S::zero();
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    if proj(a, b, c) {
                        v = v + fp.c[(a, b, c)].clone();
                    }
                }
                zeta[(i, j, k)] = v;
                for l in 0..n {
                    let mut dv = S::zero();
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        if proj(a, b, c) {
                            dv = dv + fp.dc[(l, a, b, c)].clone();
                        }
                    }
                    dzeta[(l, i, j, k)] = dv;
                }
            }
        }
    }
    (zeta, dzeta)
}

/// Max-norm of the second fundamental tensor of the splitting. In an
/// orthonormal adapted frame its components reduce to symmetrized structure
/// coefficients with one leg crossing the splitting.
pub fn second_fundamental_max<S: Scalar>(fp: &FramePoint<S>) -> f64 {
    second_fundamental_entries(fp)
        .into_iter()
        .map(|(_, _, _, v)| v.to_f64().abs())
        .fold(0.0, f64::max)
}

/// Components `<II(E_a,E_b), E_k>` of the mixed Lie-derivative tensor; only
/// entries with `(a, b)` on one side of the splitting and `k` on the other
/// can be nonzero.
pub fn second_fundamental_entries<S: Scalar>(fp: &FramePoint<S>) -> Vec<(usize, usize, usize, S)> {
    let n = fp.n;
    let half = S::from_ratio(1, 2);
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let relevant = (fp.horizontal[a] && fp.horizontal[b] && !fp.horizontal[k])
                    || (!fp.horizontal[a] && !fp.horizontal[b] && fp.horizontal[k]);
                if !relevant {
                    continue;
                }
                let v = (fp.c[(k, a, b)].clone() + fp.c[(k, b, a)].clone()) * half.clone();
                if !v.is_zero() {
                    out.push((a, b, k, v));
                }
            }
        }
    }
    out
}

/// The compatible connection with skew torsion form built from the splitting:
/// `∇_A B = ∇^g_A B - (1/2) # ι_{A∧B} ζ`. Requires `II = 0` (checked within
/// `tol` in floating point, exactly over rationals).
pub fn canonical_connection<S: Scalar>(fp: &FramePoint<S>, tol: f64) -> Result<ConnPoint<S>> {
    let entries = second_fundamental_entries(fp);
    let worst = entries.iter().map(|(_, _, _, v)| v.to_f64().abs()).fold(0.0, f64::max);
    if worst > tol {
        let detail: Vec<String> = entries
            .iter()
            .take(4)
            .map(|(a, b, k, v)| format!("<II(E{},E{}),E{}> = {}", a + 1, b + 1, k + 1, v))
            .collect();
        return Err(CoreError::Precondition(format!(
            "second fundamental tensor does not vanish (max {worst:.3e}): {}",
            detail.join(", ")
        )));
    }
    let lc = levi_civita(fp);
    let (zeta, dzeta) = torsion_three_form(fp);
    let n = fp.n;
    let half = S::from_ratio(1, 2);
    let mut gamma = T3::zeros(n);
    let mut dgamma = T4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma[(i, j, k)] =
                    lc.gamma[(i, j, k)].clone() - zeta[(i, j, k)].clone() * half.clone();
                for l in 0..n {
                    dgamma[(l, i, j, k)] = lc.dgamma[(l, i, j, k)].clone()
                        - dzeta[(l, i, j, k)].clone() * half.clone();
                }
            }
        }
    }
    Ok(ConnPoint { gamma, dgamma })
}

/// Bott connection of the splitting:
/// projected Levi-Civita on matching legs, projected brackets across.
pub fn bott_connection<S: Scalar>(fp: &FramePoint<S>) -> ConnPoint<S> {
    let lc = levi_civita(fp);
    let n = fp.n;
    let mut gamma = T3::zeros(n);
    let mut dgamma = T4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (g, use_lc) = match (fp.horizontal[i], fp.horizontal[j], fp.horizontal[k]) {
                    (true, true, true) | (false, false, false) => (S::zero(), true),
                    (false, true, true) | (true, false, false) => (fp.c[(i, j, k)].clone(), false),
                    _ => (S::zero(), false),
                };
                if use_lc {
                    gamma[(i, j, k)] = lc.gamma[(i, j, k)].clone();
                    for l in 0..n {
                        dgamma[(l, i, j, k)] = lc.dgamma[(l, i, j, k)].clone();
                    }
                } else {
                    gamma[(i, j, k)] = g;
                    if !(fp.horizontal[i] == fp.horizontal[j]) {
                        for l in 0..n {
                            dgamma[(l, i, j, k)] = if fp.horizontal[k] != fp.horizontal[j] {
                                S::zero()
                            } else {
                                fp.dc[(l, i, j, k)].clone()
                            };
                        }
                    }
                }
            }
        }
    }
    ConnPoint { gamma, dgamma }
}

/// Admissible perturbation data for [`perturbed_connection`]: an
/// endomorphism-valued one-form `λ` (antisymmetric, vanishing on H) and a
/// three-form `β` vanishing on V.
#[derive(Debug, Clone)]
pub struct Perturbation<S> {
    /// `lambda[(z,i,k)]`: the component of `λ(E_z) E_i` along `E_k`.
    pub lambda: T3<S>,
    /// Fully antisymmetric `beta[(i,j,k)]`.
    pub beta: T3<S>,
}

impl<S: Scalar> Perturbation<S> {
    pub fn zero(n: usize) -> Self {
        Perturbation { lambda: T3::zeros(n), beta: T3::zeros(n) }
    }

    /// Validate against the frame: `λ(v)` antisymmetric and zero for
    /// horizontal `v`; `β` antisymmetric and annihilated by vertical legs.
    pub fn validate(&self, fp: &FramePoint<S>) -> Result<()> {
        let n = fp.n;
        let mut problems = Vec::new();
        for z in 0..n {
            for i in 0..n {
                for k in 0..n {
                    let a = self.lambda[(z, i, k)].clone();
                    if fp.horizontal[z] && !a.is_zero() {
                        problems.push(format!("lambda(E{}) must vanish (horizontal leg)", z + 1));
                    }
                    if !(a.clone() + self.lambda[(z, k, i)].clone()).is_zero() {
                        problems.push(format!("lambda(E{}) not antisymmetric at ({},{})", z + 1, i + 1, k + 1));
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let b = self.beta[(i, j, k)].clone();
                    if b.is_zero() {
                        continue;
                    }
                    if !(fp.horizontal[i] && fp.horizontal[j] && fp.horizontal[k]) {
                        problems.push(format!(
                            "beta({},{},{}) nonzero with a vertical leg",
                            i + 1,
                            j + 1,
                            k + 1
                        ));
                    }
                    if !(b.clone() + self.beta[(j, i, k)].clone()).is_zero()
                        || !(b.clone() + self.beta[(i, k, j)].clone()).is_zero()
                    {
                        problems.push(format!("beta not antisymmetric at ({},{},{})", i + 1, j + 1, k + 1));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            problems.sort();
            problems.dedup();
            Err(CoreError::Precondition(problems.join("; ")))
        }
    }
}

/// `∇'_{Z1} Z2 = ∇_{Z1} Z2 + λ(Z2) Z1 + #^H ι_{Z1 ∧ Z2} β` over the canonical
/// connection; the family exhausting the compatible pairs.
pub fn perturbed_connection<S: Scalar>(
    fp: &FramePoint<S>,
    canonical: &ConnPoint<S>,
    pert: &Perturbation<S>,
) -> Result<ConnPoint<S>> {
    pert.validate(fp)?;
    let n = fp.n;
    let mut gamma = canonical.gamma.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut add = pert.lambda[(j, i, k)].clone();
                if fp.horizontal[k] {
                    add = add + pert.beta[(i, j, k)].clone();
                }
                gamma[(i, j, k)] = gamma[(i, j, k)].clone() + add;
            }
        }
    }
    Ok(ConnPoint { gamma, dgamma: canonical.dgamma.clone() })
}

/// Pointwise compatibility residuals of a connection with the structure.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    /// max |vertical component of ∇_Z A| over horizontal A.
    pub h_preservation: f64,
    /// max |Z<A1,A2> - <∇A1,A2> - <A1,∇A2>| over horizontal A1, A2.
    pub metric_h: f64,
    /// same residual over the full frame (compatibility with g).
    pub metric_full: f64,
    /// max |tr T(v, .)| over horizontal v.
    pub horizontal_torsion_trace: f64,
}

impl CompatibilityReport {
    pub fn is_compatible(&self, tol: f64) -> bool {
        self.h_preservation <= tol && self.metric_h <= tol
    }
}

/// Residuals of `∇ g_H^* = 0` (H-preservation plus horizontal metric) and of
/// full metric compatibility, in the orthonormal working frame.
pub fn check_compatible<S: Scalar>(conn: &ConnPoint<S>, fp: &FramePoint<S>) -> CompatibilityReport {
    let n = fp.n;
    let mut h_pres = 0.0f64;
    let mut metric_h = 0.0f64;
    let mut metric_full = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let g = conn.gamma[(i, j, k)].to_f64();
                if fp.horizontal[j] && !fp.horizontal[k] {
                    h_pres = h_pres.max(g.abs());
                }
                // orthonormal frame: Z<E_j, E_k> = 0, so the residual is
                // Γ_{ij}^k + Γ_{ik}^j.
                let r = (conn.gamma[(i, j, k)].clone() + conn.gamma[(i, k, j)].clone()).to_f64();
                metric_full = metric_full.max(r.abs());
                if fp.horizontal[j] && fp.horizontal[k] {
                    metric_h = metric_h.max(r.abs());
                }
            }
        }
    }
    let t = conn.torsion(fp);
    let mut trace = 0.0f64;
    for v in 0..n {
        if !fp.horizontal[v] {
            continue;
        }
        let mut acc = S::zero();
        for k in 0..n {
            acc = acc + t[(v, k, k)].clone();
        }
        trace = trace.max(acc.to_f64().abs());
    }
    CompatibilityReport {
        h_preservation: h_pres,
        metric_h,
        metric_full,
        horizontal_torsion_trace: trace,
    }
}
