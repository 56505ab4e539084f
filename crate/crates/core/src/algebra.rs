//! Lie algebras given by structure constants, nilpotent group law in
//! exponential coordinates, stratifications and dilations.
//!
//! Group elements are plain coordinate vectors in exponential coordinates of
//! the first kind; the product is the Baker-Campbell-Hausdorff series, exact
//! for nilpotency step at most 4.

use crate::error::{CoreError, Result};
use crate::linalg::{Mat, T3};
use crate::scalar::Scalar;

use serde::Serialize;

/// A finite-dimensional Lie algebra presented by structure constants:
/// `[e_i, e_j] = sum_k c[i][j][k] e_k` (0-indexed internally).
#[derive(Debug, Clone)]
pub struct LieAlgebra<S> {
    pub dim: usize,
    pub basis_names: Vec<String>,
    /// Sparse bracket table as entered, kept for serialization: `(i, j, k, value)`.
    pub brackets: Vec<(usize, usize, usize, S)>,
    c: T3<S>,
}

/// A single invariant violation found by [`LieAlgebra::validate`].
#[derive(Debug, Clone, Serialize)]
pub enum AlgebraViolation {
    Antisymmetry { i: usize, j: usize, k: usize, residual: f64 },
    Jacobi { i: usize, j: usize, l: usize, residual: f64 },
}

impl<S: Scalar> LieAlgebra<S> {
    /// Build from a sparse bracket list. Entries with `i > j` are stored as
    /// given; missing mirror entries are filled in by antisymmetry.
    pub fn from_brackets(
        dim: usize,
        basis_names: Vec<String>,
        brackets: Vec<(usize, usize, usize, S)>,
    ) -> Result<Self> {
        let mut c: T3<S> = T3::zeros(dim);
        let mut explicit = std::collections::HashSet::new();
        for (i, j, k, v) in &brackets {
            if *i >= dim || *j >= dim || *k >= dim {
                return Err(CoreError::InvalidArgument(format!(
                    "bracket index ({},{},{}) out of range for dim {}",
                    i + 1,
                    j + 1,
                    k + 1,
                    dim
                )));
            }
            c[(*i, *j, *k)] = c[(*i, *j, *k)].clone() + v.clone();
            explicit.insert((*i, *j, *k));
        }
        // Fill unspecified mirror entries by antisymmetry.
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if !explicit.contains(&(i, j, k)) && explicit.contains(&(j, i, k)) {
                        c[(i, j, k)] = -c[(j, i, k)].clone();
                    }
                }
            }
        }
        let names = if basis_names.is_empty() {
            (1..=dim).map(|i| format!("e{i}")).collect()
        } else {
            basis_names
        };
        if names.len() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: names.len() });
        }
        Ok(LieAlgebra { dim, basis_names: names, brackets, c })
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> &S {
        &self.c[(i, j, k)]
    }

    pub fn constants(&self) -> &T3<S> {
        &self.c
    }

    /// Diagnostic report of every antisymmetry and Jacobi violation.
    pub fn validate(&self) -> Vec<AlgebraViolation> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = self.c[(i, j, k)].clone() + self.c[(j, i, k)].clone();
                    if !r.is_zero() {
                        out.push(AlgebraViolation::Antisymmetry {
                            i,
                            j,
                            k,
                            residual: r.to_f64().abs(),
                        });
                    }
                }
            }
        }
        // Jacobi: [e_i,[e_j,e_l]] + [e_j,[e_l,e_i]] + [e_l,[e_i,e_j]] = 0.
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let mut res = vec![S::zero(); n];
                    for (a, b, cc) in [(i, j, l), (j, l, i), (l, i, j)] {
                        for m in 0..n {
                            let inner = self.c[(b, cc, m)].clone();
                            if inner.is_zero() {
                                continue;
                            }
                            for k in 0..n {
                                res[k] = res[k].clone() + inner.clone() * self.c[(a, m, k)].clone();
                            }
                        }
                    }
                    let mag = res.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
                    if res.iter().any(|x| !x.is_zero()) {
                        out.push(AlgebraViolation::Jacobi { i, j, l, residual: mag });
                    }
                }
            }
        }
        out
    }

    /// `[v, w]` for coefficient vectors.
    pub fn bracket(&self, v: &[S], w: &[S]) -> Result<Vec<S>> {
        if v.len() != self.dim || w.len() != self.dim {
            return Err(CoreError::DimensionMismatch { expected: self.dim, got: v.len().max(w.len()) });
        }
        let mut out = vec![S::zero(); self.dim];
        for i in 0..self.dim {
            if v[i].is_zero() {
                continue;
            }
            for j in 0..self.dim {
                if w[j].is_zero() {
                    continue;
                }
                for k in 0..self.dim {
                    let c = self.c[(i, j, k)].clone();
                    if !c.is_zero() {
                        out[k] = out[k].clone() + v[i].clone() * w[j].clone() * c;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix of `w -> [v, w]` in the declared basis.
    pub fn ad_matrix(&self, v: &[S]) -> Mat<S> {
        let n = self.dim;
        let mut m: Mat<S> = Mat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if v[i].is_zero() {
                    continue;
                }
                for k in 0..n {
                    let c = self.c[(i, j, k)].clone();
                    if !c.is_zero() {
                        m[(k, j)] = m[(k, j)].clone() + v[i].clone() * c;
                    }
                }
            }
        }
        m
    }

    /// Basis (as coefficient rows) of `span{[v, w] : v in a, w in b}`.
    fn bracket_span(&self, a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
        let mut rows = Vec::new();
        for v in a {
            for w in b {
                let bw = self.bracket(v, w).expect("dims checked");
                if bw.iter().any(|x| !x.is_zero()) {
                    rows.push(bw);
                }
            }
        }
        rows
    }

    /// Nilpotency step: the largest `k` with nonvanishing k-fold brackets.
    /// Returns an error if the lower central series does not terminate.
    pub fn nilpotency_step(&self) -> Result<usize> {
        let basis: Vec<Vec<S>> = (0..self.dim)
            .map(|i| {
                let mut v = vec![S::zero(); self.dim];
                v[i] = S::one();
                v
            })
            .collect();
        let mut current = basis.clone();
        let mut step = 1;
        loop {
            let next = self.bracket_span(&basis, &current);
            if next.is_empty() {
                return Ok(step);
            }
            if Mat::from_rows(next.clone()).rank() == 0 {
                return Ok(step);
            }
            current = next;
            step += 1;
            if step > self.dim + 1 {
                return Err(CoreError::NotNilpotent);
            }
        }
    }

    pub fn to_f64(&self) -> LieAlgebra<f64> {
        LieAlgebra {
            dim: self.dim,
            basis_names: self.basis_names.clone(),
            brackets: self
                .brackets
                .iter()
                .map(|(i, j, k, v)| (*i, *j, *k, v.to_f64()))
                .collect(),
            c: self.c.map(|x| x.to_f64()),
        }
    }
}

/// Declared stratification: ordered layers of basis indices (0-indexed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratification {
    pub layers: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratificationViolation {
    pub kind: String,
    pub detail: String,
}

impl Stratification {
    pub fn new(layers: Vec<Vec<usize>>) -> Self {
        Stratification { layers }
    }

    pub fn step(&self) -> usize {
        self.layers.len()
    }

    /// Homogeneous dimension `Q = sum_j j * |layer_j|`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.layers
            .iter()
            .enumerate()
            .map(|(j, layer)| (j + 1) * layer.len())
            .sum()
    }

    /// Weight (1-based layer index) of each basis element.
    pub fn weights(&self, dim: usize) -> Vec<usize> {
        let mut w = vec![0; dim];
        for (j, layer) in self.layers.iter().enumerate() {
            for &i in layer {
                w[i] = j + 1;
            }
        }
        w
    }

    /// Check the grading invariants against a concrete algebra.
    pub fn verify<S: Scalar>(&self, alg: &LieAlgebra<S>) -> Vec<StratificationViolation> {
        let mut out = Vec::new();
        let dim = alg.dim;
        let mut seen = vec![false; dim];
        for layer in &self.layers {
            for &i in layer {
                if i >= dim {
                    out.push(StratificationViolation {
                        kind: "index".into(),
                        detail: format!("layer index {} out of range", i + 1),
                    });
                    return out;
                }
                if seen[i] {
                    out.push(StratificationViolation {
                        kind: "partition".into(),
                        detail: format!("basis index {} listed twice", i + 1),
                    });
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            out.push(StratificationViolation {
                kind: "partition".into(),
                detail: "layers do not cover every basis index".into(),
            });
            return out;
        }

        let weights = self.weights(dim);
        let k = self.layers.len();
        let basis_of = |layer: &[usize]| -> Vec<Vec<S>> {
            layer
                .iter()
                .map(|&i| {
                    let mut v = vec![S::zero(); dim];
                    v[i] = S::one();
                    v
                })
                .collect()
        };

        // Containment: [layer_i, layer_j] inside layer_{i+j} (zero beyond step k).
        for (li, layer_i) in self.layers.iter().enumerate() {
            for (lj, layer_j) in self.layers.iter().enumerate() {
                let target = li + lj + 2; // 1-based weight of the bracket image
                for v in basis_of(layer_i) {
                    for w in basis_of(layer_j) {
                        let b = alg.bracket(&v, &w).expect("dims");
                        for (idx, coeff) in b.iter().enumerate() {
                            if coeff.is_zero() {
                                continue;
                            }
                            if target > k || weights[idx] != target {
                                out.push(StratificationViolation {
                                    kind: "grading".into(),
                                    detail: format!(
                                        "[layer {}, layer {}] has a component of weight {} at basis index {}",
                                        li + 1,
                                        lj + 1,
                                        weights[idx],
                                        idx + 1
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }

        // Spanning: [layer_1, layer_j] spans layer_{j+1}.
        for j in 0..k.saturating_sub(1) {
            let rows = alg.bracket_span(&basis_of(&self.layers[0]), &basis_of(&self.layers[j]));
            let next = &self.layers[j + 1];
            let span_rank = if rows.is_empty() { 0 } else { Mat::from_rows(rows.clone()).rank() };
            if span_rank != next.len() {
                out.push(StratificationViolation {
                    kind: "spanning".into(),
                    detail: format!(
                        "[layer 1, layer {}] spans rank {} but layer {} has rank {}",
                        j + 1,
                        span_rank,
                        j + 2,
                        next.len()
                    ),
                });
            }
        }
        out
    }
}

/// Scaling by scalars from the coefficient field, used to run the BCH series
/// over plain numbers and over polynomial coefficients with the same code.
pub trait ScalarMul<S>: Clone {
    fn smul(&self, s: &S) -> Self;
}

impl<S: Scalar> ScalarMul<S> for S {
    fn smul(&self, s: &S) -> Self {
        self.clone() * s.clone()
    }
}

pub(crate) fn bracket_generic<S, R>(alg: &LieAlgebra<S>, v: &[R], w: &[R], zero: &R) -> Vec<R>
where
    S: Scalar,
    R: Clone + ScalarMul<S> + std::ops::Add<Output = R> + std::ops::Sub<Output = R> + std::ops::Mul<Output = R>,
{
    let n = alg.dim;
    let mut out = vec![zero.clone(); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = alg.structure_constant(i, j, k);
                if c.is_zero() {
                    continue;
                }
                let prod = (v[i].clone() * w[j].clone()).smul(c);
                out[k] = out[k].clone() + prod;
            }
        }
    }
    out
}

/// BCH series truncated at nested-bracket depth 4:
/// `x + y + [x,y]/2 + ([x,[x,y]] + [y,[y,x]])/12 - [y,[x,[x,y]]]/24`.
/// Exact for nilpotency step <= 4.
pub(crate) fn bch_generic<S, R>(alg: &LieAlgebra<S>, x: &[R], y: &[R], zero: &R) -> Vec<R>
where
    S: Scalar,
    R: Clone + ScalarMul<S> + std::ops::Add<Output = R> + std::ops::Sub<Output = R> + std::ops::Mul<Output = R>,
{
    let b1 = bracket_generic(alg, x, y, zero); // [x,y]
    let b2 = bracket_generic(alg, x, &b1, zero); // [x,[x,y]]
    let yx: Vec<R> = b1.iter().map(|t| zero.clone() - t.clone()).collect(); // [y,x]
    let b3 = bracket_generic(alg, y, &yx, zero); // [y,[y,x]]
    let b4 = bracket_generic(alg, y, &b2, zero); // [y,[x,[x,y]]]
    let half = S::from_ratio(1, 2);
    let twelfth = S::from_ratio(1, 12);
    let m24 = S::from_ratio(-1, 24);
    (0..alg.dim)
        .map(|k| {
            x[k].clone()
                + y[k].clone()
                + b1[k].smul(&half)
                + (b2[k].clone() + b3[k].clone()).smul(&twelfth)
                + b4[k].smul(&m24)
        })
        .collect()
}

/// Group product in exponential coordinates. Requires nilpotency step <= 4.
pub fn bch_product<S: Scalar>(alg: &LieAlgebra<S>, x: &[S], y: &[S]) -> Result<Vec<S>> {
    if x.len() != alg.dim || y.len() != alg.dim {
        return Err(CoreError::DimensionMismatch { expected: alg.dim, got: x.len().max(y.len()) });
    }
    let step = alg.nilpotency_step()?;
    if step > 4 {
        return Err(CoreError::UnsupportedStep { step });
    }
    Ok(bch_generic(alg, x, y, &S::zero()))
}

/// Group inverse: `-x` in exponential coordinates.
pub fn group_inverse<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|c| -c.clone()).collect()
}

/// Dilation `delta_s`: coordinate in layer j scales by `s^j`.
pub fn dilation<S: Scalar>(strat: &Stratification, s: &S, x: &[S]) -> Result<Vec<S>> {
    if s.to_f64() <= 0.0 {
        return Err(CoreError::InvalidArgument("dilation parameter must be positive".into()));
    }
    let weights = strat.weights(x.len());
    Ok(x.iter()
        .enumerate()
        .map(|(i, c)| {
            let mut factor = S::one();
            for _ in 0..weights[i] {
                factor = factor * s.clone();
            }
            c.clone() * factor
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Built-in algebras.
// ---------------------------------------------------------------------------

pub fn abelian<S: Scalar>(n: usize) -> LieAlgebra<S> {
    LieAlgebra::from_brackets(n, vec![], vec![]).expect("abelian")
}

/// Heisenberg algebra: `[e1, e2] = e3`.
pub fn heisenberg<S: Scalar>() -> LieAlgebra<S> {
    LieAlgebra::from_brackets(
        3,
        vec!["a1".into(), "a2".into(), "a3".into()],
        vec![(0, 1, 2, S::one())],
    )
    .expect("heisenberg")
}

pub fn heisenberg_stratification() -> Stratification {
    Stratification::new(vec![vec![0, 1], vec![2]])
}

/// Engel algebra: `[e1, e2] = e3`, `[e1, e3] = e4`.
pub fn engel<S: Scalar>() -> LieAlgebra<S> {
    LieAlgebra::from_brackets(
        4,
        vec!["e1".into(), "e2".into(), "e3".into(), "e4".into()],
        vec![(0, 1, 2, S::one()), (0, 2, 3, S::one())],
    )
    .expect("engel")
}

pub fn engel_stratification() -> Stratification {
    Stratification::new(vec![vec![0, 1], vec![2], vec![3]])
}

/// `su(2)`: `[A1,A2] = A3`, `[A3,A1] = A2`, `[A2,A3] = A1`.
pub fn su2<S: Scalar>() -> LieAlgebra<S> {
    LieAlgebra::from_brackets(
        3,
        vec!["A1".into(), "A2".into(), "A3".into()],
        vec![(0, 1, 2, S::one()), (2, 0, 1, S::one()), (1, 2, 0, S::one())],
    )
    .expect("su2")
}

/// Free nilpotent algebra of step 2 on 3 generators:
/// `[e1,e2] = e4`, `[e1,e3] = e5`, `[e2,e3] = e6`.
pub fn free_nilpotent_3_2<S: Scalar>() -> LieAlgebra<S> {
    LieAlgebra::from_brackets(
        6,
        (1..=6).map(|i| format!("e{i}")).collect(),
        vec![(0, 1, 3, S::one()), (0, 2, 4, S::one()), (1, 2, 5, S::one())],
    )
    .expect("free32")
}

pub fn free_nilpotent_3_2_stratification() -> Stratification {
    Stratification::new(vec![vec![0, 1, 2], vec![3, 4, 5]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rvec(rng: &mut StdRng, n: usize) -> Vec<Rational> {
        (0..n).map(|_| rat(rng.gen_range(-6..=6), rng.gen_range(1..=4))).collect()
    }

    #[test]
    fn heisenberg_is_valid() {
        assert!(heisenberg::<Rational>().validate().is_empty());
    }

    #[test]
    fn su2_is_valid_and_brackets_match() {
        let alg = su2::<Rational>();
        assert!(alg.validate().is_empty());
        let e1 = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        let e3 = vec![rat(0, 1), rat(0, 1), rat(1, 1)];
        // [A3, A1] = A2
        assert_eq!(alg.bracket(&e3, &e1).unwrap(), vec![rat(0, 1), rat(1, 1), rat(0, 1)]);
    }

    #[test]
    fn antisymmetry_violation_is_reported() {
        let alg = LieAlgebra::from_brackets(
            3,
            vec![],
            vec![(0, 1, 2, rat(1, 1)), (1, 0, 2, rat(1, 1))],
        )
        .unwrap();
        let report = alg.validate();
        assert!(report
            .iter()
            .any(|v| matches!(v, AlgebraViolation::Antisymmetry { i: 0, j: 1, k: 2, .. })));
    }

    #[test]
    fn jacobi_violation_is_reported() {
        // [e1,e2] = e3, [e1,e3] = e1: the cyclic sum at (1,2,3) equals e3.
        let alg = LieAlgebra::from_brackets(
            3,
            vec![],
            vec![(0, 1, 2, rat(1, 1)), (0, 2, 0, rat(1, 1))],
        )
        .unwrap();
        let report = alg.validate();
        assert!(report.iter().any(|v| matches!(v, AlgebraViolation::Jacobi { .. })));
    }

    #[test]
    fn bracket_of_vector_with_itself_vanishes() {
        let alg = engel::<Rational>();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let v = rvec(&mut rng, 4);
            let b = alg.bracket(&v, &v).unwrap();
            assert!(b.iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn ad_matrix_heisenberg() {
        let alg = heisenberg::<Rational>();
        let e1 = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        let m = alg.ad_matrix(&e1);
        // sends e2 to e3, all else zero
        assert_eq!(m[(2, 1)], rat(1, 1));
        let total: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].to_f64().abs())
            .sum();
        assert_eq!(total, 1.0);
    }

    /// Oracle for the Heisenberg product: log(exp(X) exp(Y)) in the 3x3
    /// unipotent matrix representation e1 = E12, e2 = E23, e3 = E13.
    fn heisenberg_matrix_product(x: &[Rational], y: &[Rational]) -> Vec<Rational> {
        let to_mat = |v: &[Rational]| -> [[Rational; 3]; 3] {
            // exp([[0,a,c],[0,0,b],[0,0,0]]) = [[1,a,c+ab/2],[0,1,b],[0,0,1]]
            let a = v[0].clone();
            let b = v[1].clone();
            let c = v[2].clone() + a.clone() * b.clone() * rat(1, 2);
            [
                [rat(1, 1), a, c],
                [rat(0, 1), rat(1, 1), b],
                [rat(0, 1), rat(0, 1), rat(1, 1)],
            ]
        };
        let mx = to_mat(x);
        let my = to_mat(y);
        let mut p = [
            [rat(0, 1), rat(0, 1), rat(0, 1)],
            [rat(0, 1), rat(0, 1), rat(0, 1)],
            [rat(0, 1), rat(0, 1), rat(0, 1)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    p[i][j] = p[i][j].clone() + mx[i][k].clone() * my[k][j].clone();
                }
            }
        }
        // log of unipotent [[1,a,c],[0,1,b],[0,0,1]] is [[0,a,c-ab/2],[0,0,b],[0,0,0]]
        let a = p[0][1].clone();
        let b = p[1][2].clone();
        let c = p[0][2].clone() - a.clone() * b.clone() * rat(1, 2);
        vec![a, b, c]
    }

    #[test]
    fn bch_matches_matrix_oracle_on_heisenberg() {
        let alg = heisenberg::<Rational>();
        let x = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        let y = vec![rat(0, 1), rat(1, 1), rat(0, 1)];
        let z = bch_product(&alg, &x, &y).unwrap();
        assert_eq!(z, vec![rat(1, 1), rat(1, 1), rat(1, 2)]);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..40 {
            let x = rvec(&mut rng, 3);
            let y = rvec(&mut rng, 3);
            assert_eq!(bch_product(&alg, &x, &y).unwrap(), heisenberg_matrix_product(&x, &y));
        }
    }

    #[test]
    fn bch_associative_on_builtins() {
        let mut rng = StdRng::seed_from_u64(3);
        let algs: Vec<(LieAlgebra<Rational>, usize)> =
            vec![(heisenberg(), 3), (engel(), 4), (free_nilpotent_3_2(), 6), (abelian(2), 2)];
        for (alg, n) in &algs {
            for _ in 0..100 {
                let x = rvec(&mut rng, *n);
                let y = rvec(&mut rng, *n);
                let z = rvec(&mut rng, *n);
                let xy_z = bch_product(alg, &bch_product(alg, &x, &y).unwrap(), &z).unwrap();
                let x_yz = bch_product(alg, &x, &bch_product(alg, &y, &z).unwrap()).unwrap();
                assert_eq!(xy_z, x_yz);
            }
        }
    }

    #[test]
    fn bch_inverse_and_identity() {
        let alg = engel::<Rational>();
        let mut rng = StdRng::seed_from_u64(5);
        let zero = vec![rat(0, 1); 4];
        for _ in 0..20 {
            let x = rvec(&mut rng, 4);
            assert_eq!(bch_product(&alg, &x, &group_inverse(&x)).unwrap(), zero);
            assert_eq!(bch_product(&alg, &x, &zero).unwrap(), x);
        }
    }

    #[test]
    fn bch_abelian_is_addition() {
        let alg = abelian::<Rational>(3);
        let x = vec![rat(1, 2), rat(3, 1), rat(-1, 4)];
        let y = vec![rat(1, 3), rat(-2, 1), rat(5, 4)];
        let expect: Vec<Rational> =
            x.iter().zip(&y).map(|(a, b)| a.clone() + b.clone()).collect();
        assert_eq!(bch_product(&alg, &x, &y).unwrap(), expect);
    }

    #[test]
    fn bch_rejects_non_nilpotent() {
        let alg = su2::<Rational>();
        let x = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        assert!(matches!(bch_product(&alg, &x, &x), Err(CoreError::NotNilpotent)));
    }

    #[test]
    fn nilpotency_steps() {
        assert_eq!(heisenberg::<Rational>().nilpotency_step().unwrap(), 2);
        assert_eq!(engel::<Rational>().nilpotency_step().unwrap(), 3);
        assert_eq!(abelian::<Rational>(4).nilpotency_step().unwrap(), 1);
        assert_eq!(free_nilpotent_3_2::<Rational>().nilpotency_step().unwrap(), 2);
        assert!(su2::<Rational>().nilpotency_step().is_err());
    }

    #[test]
    fn stratification_checks() {
        let alg = heisenberg::<Rational>();
        assert!(heisenberg_stratification().verify(&alg).is_empty());
        let bad = Stratification::new(vec![vec![0, 2], vec![1]]);
        assert!(!bad.verify(&alg).is_empty());

        let engel_alg = engel::<Rational>();
        assert!(engel_stratification().verify(&engel_alg).is_empty());

        assert!(free_nilpotent_3_2_stratification()
            .verify(&free_nilpotent_3_2::<Rational>())
            .is_empty());
    }

    #[test]
    fn homogeneous_dimensions() {
        assert_eq!(heisenberg_stratification().homogeneous_dimension(), 4);
        assert_eq!(engel_stratification().homogeneous_dimension(), 7);
        assert_eq!(Stratification::new(vec![(0..5).collect()]).homogeneous_dimension(), 5);
        assert_eq!(free_nilpotent_3_2_stratification().homogeneous_dimension(), 9);
    }

    #[test]
    fn dilation_scales_by_layer_weight() {
        let strat = heisenberg_stratification();
        let x = vec![rat(1, 1), rat(1, 1), rat(1, 1)];
        let s2 = dilation(&strat, &rat(2, 1), &x).unwrap();
        assert_eq!(s2, vec![rat(2, 1), rat(2, 1), rat(4, 1)]);
        assert_eq!(dilation(&strat, &rat(1, 1), &x).unwrap(), x);

        let es = engel_stratification();
        let y = vec![rat(1, 1), rat(0, 1), rat(1, 1), rat(1, 1)];
        assert_eq!(
            dilation(&es, &rat(3, 1), &y).unwrap(),
            vec![rat(3, 1), rat(0, 1), rat(9, 1), rat(27, 1)]
        );
        assert!(dilation(&es, &rat(-1, 1), &y).is_err());
    }

    #[test]
    fn dilation_is_group_homomorphism() {
        let alg = engel::<Rational>();
        let strat = engel_stratification();
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..50 {
            let x = rvec(&mut rng, 4);
            let y = rvec(&mut rng, 4);
            let s = rat(rng.gen_range(1..=5), rng.gen_range(1..=3));
            let lhs = dilation(&strat, &s, &bch_product(&alg, &x, &y).unwrap()).unwrap();
            let rhs = bch_product(
                &alg,
                &dilation(&strat, &s, &x).unwrap(),
                &dilation(&strat, &s, &y).unwrap(),
            )
            .unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn permuted_valid_stratification_rejected_unless_valid() {
        let alg = engel::<Rational>();
        let mut rng = StdRng::seed_from_u64(9);
        let mut rejected = 0;
        for _ in 0..20 {
            let mut idx: Vec<usize> = (0..4).collect();
            for i in (1..4).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            let strat =
                Stratification::new(vec![vec![idx[0], idx[1]], vec![idx[2]], vec![idx[3]]]);
            let ok = strat.verify(&alg).is_empty();
            // Only the declared grading (as sets) is admissible for Engel.
            let mut first = vec![idx[0], idx[1]];
            first.sort_unstable();
            let same_grading = first == vec![0, 1] && idx[2] == 2 && idx[3] == 3;
            assert_eq!(ok, same_grading, "permutation {idx:?}");
            if !same_grading {
                rejected += 1;
            }
        }
        assert!(rejected > 0);
    }
}
