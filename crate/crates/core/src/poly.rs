//! Sparse multivariate polynomials with exact coefficients, plus polynomial
//! vector fields and one-forms in a coordinate frame.
//!
//! This is the surface on which the operator identities are checked with a
//! residual that is literally zero.

use crate::algebra::{bch_generic, LieAlgebra, ScalarMul, Stratification};
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exponent multi-index; entry `a` is the exponent of variable `x_{a+1}`.
pub type Monomial = Vec<u16>;

/// Sparse polynomial. No zero coefficients are stored and terms are kept in a
/// BTreeMap, so structural equality is semantic equality.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<S> {
    pub nvars: usize,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> Poly<S> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: S) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, S::one())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        assert!(idx < nvars);
        let mut m = vec![0u16; nvars];
        m[idx] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(m, S::one());
        p
    }

    pub fn monomial(nvars: usize, exponents: &[u16], coeff: S) -> Self {
        assert_eq!(exponents.len(), nvars);
        let mut p = Self::zero(nvars);
        if !coeff.is_zero() {
            p.terms.insert(exponents.to_vec(), coeff);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn insert(&mut self, m: Monomial, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            out.insert(m.clone(), c.clone() * s.clone());
        }
        out
    }

    /// Exact partial derivative with respect to variable `idx`.
    pub fn partial(&self, idx: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m[idx];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2[idx] = e - 1;
            out.insert(m2, c.clone() * S::from_int(e as i64));
        }
        out
    }

    pub fn eval(&self, point: &[S]) -> S {
        assert_eq!(point.len(), self.nvars);
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    t = t * point[i].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Substitute `x_i -> s^{w_i} x_i`; this is composition with a dilation
    /// when `w` are the layer weights.
    pub fn dilate(&self, weights: &[usize], s: &S) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let total: usize = m.iter().enumerate().map(|(i, &e)| weights[i] * e as usize).sum();
            let mut factor = S::one();
            for _ in 0..total {
                factor = factor * s.clone();
            }
            out.insert(m.clone(), c.clone() * factor);
        }
        out
    }

    /// Reinterpret over a different number of variables (appending or
    /// dropping trailing zero exponents).
    pub fn resize_vars(&self, nvars: usize) -> Self {
        let mut out = Poly::zero(nvars);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            if m2.len() > nvars {
                assert!(m2[nvars..].iter().all(|&e| e == 0), "dropping live variable");
            }
            m2.resize(nvars, 0);
            out.insert(m2, c.clone());
        }
        out
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Poly<T> {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.insert(m.clone(), f(c));
        }
        out
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }
}

impl<S: Scalar> Add for Poly<S> {
    type Output = Poly<S>;
    fn add(self, rhs: Poly<S>) -> Poly<S> {
        assert_eq!(self.nvars, rhs.nvars, "variable mismatch");
        let mut out = self;
        for (m, c) in rhs.terms {
            out.insert(m, c);
        }
        out
    }
}

impl<S: Scalar> Sub for Poly<S> {
    type Output = Poly<S>;
    fn sub(self, rhs: Poly<S>) -> Poly<S> {
        self + (-rhs)
    }
}

impl<S: Scalar> Neg for Poly<S> {
    type Output = Poly<S>;
    fn neg(self) -> Poly<S> {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in self.terms {
            out.insert(m, -c);
        }
        out
    }
}

impl<S: Scalar> Mul for Poly<S> {
    type Output = Poly<S>;
    fn mul(self, rhs: Poly<S>) -> Poly<S> {
        assert_eq!(self.nvars, rhs.nvars, "variable mismatch");
        let mut out = Poly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let m: Monomial = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.insert(m, c1.clone() * c2.clone());
            }
        }
        out
    }
}

impl<S: Scalar> ScalarMul<S> for Poly<S> {
    fn smul(&self, s: &S) -> Self {
        self.scale(s)
    }
}

impl<S: Scalar> fmt::Display for Poly<S> {
    /// Canonical form: sorted `coeff * x1^a1...xn^an` terms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in m.iter().enumerate() {
                if e == 1 {
                    write!(f, "*x{}", i + 1)?;
                } else if e > 1 {
                    write!(f, "*x{}^{}", i + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// Vector field with polynomial coefficients in the coordinate frame
/// `d/dx^1, ..., d/dx^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField<S> {
    pub components: Vec<Poly<S>>,
}

impl<S: Scalar> PolyVectorField<S> {
    pub fn zero(nvars: usize) -> Self {
        PolyVectorField { components: (0..nvars).map(|_| Poly::zero(nvars)).collect() }
    }

    pub fn nvars(&self) -> usize {
        self.components.len()
    }

    /// Directional derivative `X f = sum_a X^a df/dx^a`, exact.
    pub fn apply(&self, f: &Poly<S>) -> Result<Poly<S>> {
        if f.nvars != self.nvars() {
            return Err(CoreError::DimensionMismatch { expected: self.nvars(), got: f.nvars });
        }
        let mut acc = Poly::zero(f.nvars);
        for (a, comp) in self.components.iter().enumerate() {
            if comp.is_zero() {
                continue;
            }
            acc = acc + comp.clone() * f.partial(a);
        }
        Ok(acc)
    }

    /// Commutator `[X, Y] = X(Y^a) - Y(X^a)` as a first-order operator.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        let n = self.nvars();
        if other.nvars() != n {
            return Err(CoreError::DimensionMismatch { expected: n, got: other.nvars() });
        }
        let mut comps = Vec::with_capacity(n);
        for a in 0..n {
            comps.push(self.apply(&other.components[a])? - other.apply(&self.components[a])?);
        }
        Ok(PolyVectorField { components: comps })
    }

    pub fn add(&self, other: &Self) -> Self {
        PolyVectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        PolyVectorField { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn eval(&self, point: &[S]) -> Vec<S> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> PolyVectorField<T> {
        PolyVectorField { components: self.components.iter().map(|c| c.map_coeffs(f)).collect() }
    }
}

/// One-form with polynomial coefficients of `dx^1, ..., dx^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOneForm<S> {
    pub components: Vec<Poly<S>>,
}

impl<S: Scalar> PolyOneForm<S> {
    pub fn zero(nvars: usize) -> Self {
        PolyOneForm { components: (0..nvars).map(|_| Poly::zero(nvars)).collect() }
    }

    /// Exterior differential of a scalar.
    pub fn d(f: &Poly<S>) -> Self {
        PolyOneForm { components: (0..f.nvars).map(|a| f.partial(a)).collect() }
    }

    /// Bilinear pairing with a vector field.
    pub fn pair(&self, x: &PolyVectorField<S>) -> Poly<S> {
        let n = self.components.len();
        assert_eq!(n, x.nvars());
        let mut acc = Poly::zero(n);
        for a in 0..n {
            acc = acc + self.components[a].clone() * x.components[a].clone();
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        PolyOneForm {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        PolyOneForm {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        PolyOneForm { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_coeff_abs()).fold(0.0, f64::max)
    }
}

/// Left-invariant vector fields of a nilpotent algebra in exponential
/// coordinates: field `i` at `x` is `d/dt|_0 bch(x, t e_i)`. The coefficients
/// are polynomials of degree strictly below the nilpotency step.
pub fn left_invariant_fields<S: Scalar>(alg: &LieAlgebra<S>) -> Result<Vec<PolyVectorField<S>>> {
    let step = alg.nilpotency_step()?;
    if step > 4 {
        return Err(CoreError::UnsupportedStep { step });
    }
    let n = alg.dim;
    // Work in n+1 variables, the last one being the curve parameter t.
    let zero = Poly::<S>::zero(n + 1);
    let x: Vec<Poly<S>> = (0..n).map(|i| Poly::var(n + 1, i)).collect();
    let mut fields = Vec::with_capacity(n);
    for i in 0..n {
        let mut y: Vec<Poly<S>> = (0..n).map(|_| Poly::zero(n + 1)).collect();
        y[i] = Poly::var(n + 1, n); // t * e_i
        let z = bch_generic(alg, &x, &y, &zero);
        let mut comps = Vec::with_capacity(n);
        for zk in z {
            // d/dt at t = 0: keep terms linear in t, strip the t.
            let mut lin = Poly::zero(n);
            for (m, c) in zk.terms() {
                if m[n] == 1 {
                    lin = lin + Poly::monomial(n, &m[..n], c.clone());
                }
            }
            comps.push(lin);
        }
        fields.push(PolyVectorField { components: comps });
    }
    Ok(fields)
}

/// Left-invariant field of an arbitrary algebra vector (linear combination).
pub fn left_invariant_field_of<S: Scalar>(
    fields: &[PolyVectorField<S>],
    v: &[S],
) -> PolyVectorField<S> {
    let n = fields.len();
    let mut acc = PolyVectorField::zero(n);
    for (i, f) in fields.iter().enumerate() {
        if !v[i].is_zero() {
            acc = acc.add(&f.scale(&v[i]));
        }
    }
    acc
}

/// `sum_i A_i^2 f` for the given frame fields: the second-order operator of an
/// orthonormal family. With the horizontal frame this is the sub-Laplacian of
/// a unimodular group, with the full frame the Laplace-Beltrami operator.
pub fn sum_of_squares<S: Scalar>(fields: &[PolyVectorField<S>], f: &Poly<S>) -> Result<Poly<S>> {
    let mut acc = Poly::zero(f.nvars);
    for a in fields {
        acc = acc + a.apply(&a.apply(f)?)?;
    }
    Ok(acc)
}

/// Layer weight of each coordinate together with dilation of polynomials is
/// enough to state the scaling identities; this helper applies `f ∘ δ_s`.
pub fn compose_with_dilation<S: Scalar>(
    f: &Poly<S>,
    strat: &Stratification,
    s: &S,
) -> Poly<S> {
    f.dilate(&strat.weights(f.nvars), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        abelian, bch_product, engel, engel_stratification, heisenberg, heisenberg_stratification,
    };
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn hfields() -> Vec<PolyVectorField<Rational>> {
        left_invariant_fields(&heisenberg::<Rational>()).unwrap()
    }

    #[test]
    fn heisenberg_fields_match_hand_formulas() {
        let a = hfields();
        // A1 = dx - (y/2) dz
        let mut expect = PolyVectorField::zero(3);
        expect.components[0] = Poly::one(3);
        expect.components[2] = Poly::var(3, 1).scale(&rat(-1, 2));
        assert_eq!(a[0], expect);
        // A2 = dy + (x/2) dz
        let mut expect = PolyVectorField::zero(3);
        expect.components[1] = Poly::one(3);
        expect.components[2] = Poly::var(3, 0).scale(&rat(1, 2));
        assert_eq!(a[1], expect);
        // A3 = dz
        let mut expect = PolyVectorField::zero(3);
        expect.components[2] = Poly::one(3);
        assert_eq!(a[2], expect);
    }

    #[test]
    fn abelian_fields_are_coordinate_fields() {
        let a = left_invariant_fields(&abelian::<Rational>(3)).unwrap();
        for (i, f) in a.iter().enumerate() {
            for (j, c) in f.components.iter().enumerate() {
                if i == j {
                    assert_eq!(*c, Poly::one(3));
                } else {
                    assert!(c.is_zero());
                }
            }
        }
    }

    #[test]
    fn bracket_closure_matches_structure_constants() {
        for alg in [heisenberg::<Rational>(), engel::<Rational>()] {
            let fields = left_invariant_fields(&alg).unwrap();
            for i in 0..alg.dim {
                for j in 0..alg.dim {
                    let lhs = fields[i].bracket(&fields[j]).unwrap();
                    let mut rhs = PolyVectorField::zero(alg.dim);
                    for k in 0..alg.dim {
                        let c = alg.structure_constant(i, j, k);
                        if !c.is_zero() {
                            rhs = rhs.add(&fields[k].scale(c));
                        }
                    }
                    assert_eq!(lhs, rhs, "bracket closure failed at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn apply_field_examples() {
        let a = hfields();
        let z = Poly::<Rational>::var(3, 2);
        // A1 z = -y/2
        assert_eq!(a[0].apply(&z).unwrap(), Poly::var(3, 1).scale(&rat(-1, 2)));
        // constants die
        assert!(a[1].apply(&Poly::one(3)).unwrap().is_zero());
        // dx applied to x^2 = 2x
        let x2 = Poly::<Rational>::var(3, 0) * Poly::var(3, 0);
        let mut dx = PolyVectorField::zero(3);
        dx.components[0] = Poly::one(3);
        assert_eq!(dx.apply(&x2).unwrap(), Poly::var(3, 0).scale(&rat(2, 1)));
    }

    #[test]
    fn bracket_with_self_and_with_central_field_vanish() {
        let a = hfields();
        assert!(a[0].bracket(&a[0]).unwrap().is_zero());
        assert!(a[0].bracket(&a[2]).unwrap().is_zero());
    }

    #[test]
    fn field_values_match_group_curve_difference() {
        // A_i f (x) against (f(x * (h e_i)) - f(x)semigroup)/h up to O(h), float check.
        let alg = engel::<f64>();
        let fields = left_invariant_fields(&alg).unwrap();
        let mut rng = StdRng::seed_from_u64(17);
        let h = 1e-6;
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = Poly::<f64>::var(4, 2) * Poly::var(4, 3) + Poly::var(4, 0);
            for i in 0..4 {
                let mut step = vec![0.0; 4];
                step[i] = h;
                let xh = bch_product(&alg, &x, &step).unwrap();
                let fd = (f.eval(&xh) - f.eval(&x)) / h;
                let exact = fields[i].apply(&f).unwrap().eval(&x);
                assert!((fd - exact).abs() < 1e-4, "i={i} fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn layer_homogeneity_of_fields() {
        // A in layer j: A(f . delta_s) = s^j (A f) . delta_s, exact.
        let alg = engel::<Rational>();
        let strat = engel_stratification();
        let fields = left_invariant_fields(&alg).unwrap();
        let weights = strat.weights(4);
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..10 {
            let f = random_poly(&mut rng, 4, 4);
            let s = rat(rng.gen_range(1..=4), rng.gen_range(1..=3));
            for i in 0..4 {
                let lhs = fields[i].apply(&compose_with_dilation(&f, &strat, &s)).unwrap();
                let mut sj = Rational::one_();
                for _ in 0..weights[i] {
                    sj = sj * s.clone();
                }
                let rhs =
                    compose_with_dilation(&fields[i].apply(&f).unwrap(), &strat, &s).scale(&sj);
                assert_eq!(lhs, rhs);
            }
        }
    }

    trait OneExt {
        fn one_() -> Self;
    }
    impl OneExt for Rational {
        fn one_() -> Self {
            rat(1, 1)
        }
    }

    pub(crate) fn random_poly(rng: &mut StdRng, nvars: usize, max_deg: usize) -> Poly<Rational> {
        let mut p = Poly::zero(nvars);
        for _ in 0..8 {
            let mut m = vec![0u16; nvars];
            let mut budget = max_deg;
            for e in m.iter_mut() {
                let d = rng.gen_range(0..=budget.min(2));
                *e = d as u16;
                budget -= d;
            }
            let c = rat(rng.gen_range(-5..=5), rng.gen_range(1..=3));
            p = p + Poly::monomial(nvars, &m, c);
        }
        p
    }

    #[test]
    fn sub_laplacian_examples_on_heisenberg() {
        let a = hfields();
        let hframe = &a[0..2];
        let x2y2 = Poly::<Rational>::var(3, 0) * Poly::var(3, 0)
            + Poly::var(3, 1) * Poly::var(3, 1);
        // Delta_H (x^2 + y^2) = 4 = 2n with n = 2
        assert_eq!(
            sum_of_squares(hframe, &x2y2).unwrap(),
            Poly::constant(3, rat(4, 1))
        );
        // Delta_H z^2 = (x^2 + y^2)/2
        let z2 = Poly::<Rational>::var(3, 2) * Poly::var(3, 2);
        assert_eq!(sum_of_squares(hframe, &z2).unwrap(), x2y2.scale(&rat(1, 2)));
        // constants
        assert!(sum_of_squares(hframe, &Poly::one(3)).unwrap().is_zero());
    }

    #[test]
    fn full_laplacian_abelian_is_euclidean() {
        let alg = abelian::<Rational>(3);
        let fields = left_invariant_fields(&alg).unwrap();
        let f = (0..3)
            .map(|i| Poly::<Rational>::var(3, i) * Poly::var(3, i))
            .fold(Poly::zero(3), |a, b| a + b);
        assert_eq!(sum_of_squares(&fields, &f).unwrap(), Poly::constant(3, rat(6, 1)));
    }

    #[test]
    fn full_laplacian_heisenberg_snapshot() {
        // Regression snapshot computed from the exact frame formulas:
        // Delta_g (x^2+y^2+z^2) = 4 + 2 + (x^2+y^2)/2.
        let a = hfields();
        let f = (0..3)
            .map(|i| Poly::<Rational>::var(3, i) * Poly::var(3, i))
            .fold(Poly::zero(3), |acc, p| acc + p);
        let got = sum_of_squares(&a, &f).unwrap();
        let expect = Poly::constant(3, rat(6, 1))
            + (Poly::<Rational>::var(3, 0) * Poly::var(3, 0)
                + Poly::var(3, 1) * Poly::var(3, 1))
            .scale(&rat(1, 2));
        assert_eq!(got, expect);
    }

    #[test]
    fn dilation_scaling_of_sub_laplacian() {
        // Delta_H (f . delta_s) = s^2 (Delta_H f) . delta_s, exact.
        let alg = heisenberg::<Rational>();
        let strat = heisenberg_stratification();
        let fields = left_invariant_fields(&alg).unwrap();
        let hframe = &fields[0..2];
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..10 {
            let f = random_poly(&mut rng, 3, 4);
            let s = rat(rng.gen_range(1..=5), rng.gen_range(1..=4));
            let lhs = sum_of_squares(hframe, &compose_with_dilation(&f, &strat, &s)).unwrap();
            let rhs = compose_with_dilation(&sum_of_squares(hframe, &f).unwrap(), &strat, &s)
                .scale(&(s.clone() * s.clone()));
            assert_eq!(lhs, rhs);
        }
    }

    proptest! {
        #[test]
        fn poly_mul_is_commutative(seed in 0u64..500) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_poly(&mut rng, 3, 3);
            let b = random_poly(&mut rng, 3, 3);
            prop_assert_eq!(a.clone() * b.clone(), b * a);
        }

        #[test]
        fn derivative_satisfies_leibniz(seed in 0u64..500) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_poly(&mut rng, 3, 3);
            let b = random_poly(&mut rng, 3, 3);
            let lhs = (a.clone() * b.clone()).partial(0);
            let rhs = a.partial(0) * b.clone() + a * b.partial(0);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn pairing_is_bilinear(seed in 0u64..200) {
            let mut rng = StdRng::seed_from_u64(seed);
            let f = random_poly(&mut rng, 3, 3);
            let g = random_poly(&mut rng, 3, 3);
            let eta = PolyOneForm::d(&f);
            let xi = PolyOneForm::d(&g);
            let mut v = PolyVectorField::zero(3);
            v.components[0] = random_poly(&mut rng, 3, 2);
            v.components[2] = random_poly(&mut rng, 3, 2);
            let lhs = eta.add(&xi).pair(&v);
            let rhs = eta.pair(&v) + xi.pair(&v);
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn display_is_canonical() {
        let p = Poly::<Rational>::var(3, 0) * Poly::var(3, 0)
            + Poly::var(3, 2).scale(&rat(-1, 2));
        assert_eq!(p.to_string(), "-1/2*x3 + 1*x1^2");
    }
}
