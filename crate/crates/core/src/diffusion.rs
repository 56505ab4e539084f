//! Monte Carlo horizontal Brownian motion on nilpotent groups via the
//! product-of-exponentials integrator, semigroup estimation, the stochastic
//! gradient representations and their finite-difference oracle.
//!
//! Determinism contract: path `p` of a run is a pure function of
//! `(seed, p)` through a counter-based stream RNG, and every reduction runs
//! in fixed path order, so results are bit-identical across thread counts.

use crate::algebra::{bch_generic, LieAlgebra};
use crate::connection::{canonical_connection, ConnPoint};
use crate::curvature::{
    c_two_form, codifferential_two_form, conditions_report_points, psi_horizontal_max, psi_map,
    ricci_matrix,
};
use crate::error::{CoreError, Result};
use crate::expr::TestFunction;
use crate::frame::{InvariantFrame, SubRiemannianStructure};
use crate::linalg::{mat_exp, Mat};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Seed plus stream contract: path `i` draws from stream `i` of a
/// counter-based generator, so distinct paths are independent and any path
/// can be regenerated bit-exactly in isolation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub fn stream(&self, path: usize) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSettings {
    pub t: f64,
    pub step: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
}

impl SimSettings {
    pub fn n_steps(&self) -> Result<usize> {
        if self.step <= 0.0 || self.n_paths == 0 || self.t < 0.0 {
            return Err(CoreError::InvalidArgument(
                "time, step and path count must be positive".into(),
            ));
        }
        let k = self.t / self.step;
        let rounded = k.round();
        if (k - rounded).abs() > 1e-9 * k.max(1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "step {} does not divide t {}",
                self.step, self.t
            )));
        }
        Ok(rounded as usize)
    }
}

/// Mean with standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl EstimateWithError {
    pub fn agrees_with(&self, other: &EstimateWithError, sigmas: f64) -> bool {
        let tol = sigmas * (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        (self.value - other.value).abs() <= tol
    }
}

pub fn mean_stderr(vals: &[f64]) -> EstimateWithError {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    EstimateWithError { value: mean, stderr: (var / n as f64).sqrt(), n_paths: n }
}

/// An ensemble of simulated horizontal Brownian paths: endpoints (from `x0`)
/// and total anti-development increments in the orthonormal horizontal frame.
/// Per-step increments are regenerated from the RNG spec when needed.
#[derive(Debug, Clone)]
pub struct DiffusionBatch {
    pub settings: SimSettings,
    pub endpoints: Vec<Vec<f64>>,
    pub antidev: Vec<Vec<f64>>,
}

/// Simulation engine over a fixed left-invariant structure.
pub struct Engine {
    pub structure: SubRiemannianStructure<f64>,
    pub frame: InvariantFrame<f64>,
    /// Orthonormal horizontal legs as algebra vectors in the original basis.
    h_legs: Vec<Vec<f64>>,
    nilpotency_step: usize,
}

impl Engine {
    pub fn new(structure: SubRiemannianStructure<f64>) -> Result<Self> {
        let step = structure.algebra.nilpotency_step()?;
        if step > 4 {
            return Err(CoreError::UnsupportedStep { step });
        }
        let frame = structure.invariant_frame()?;
        let dim = structure.algebra.dim;
        let nh = structure.rank_h();
        let mut h_legs = Vec::with_capacity(nh);
        for a in 0..nh {
            let mut col = vec![0.0; dim];
            for i in 0..dim {
                col[i] = frame.ortho.basis_map[(i, a)];
            }
            h_legs.push(col);
        }
        Ok(Engine { structure, frame, h_legs, nilpotency_step: step })
    }

    pub fn dim(&self) -> usize {
        self.structure.algebra.dim
    }

    pub fn rank_h(&self) -> usize {
        self.h_legs.len()
    }

    fn algebra(&self) -> &LieAlgebra<f64> {
        &self.structure.algebra
    }

    pub fn group_mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        debug_assert!(self.nilpotency_step <= 4);
        bch_generic(self.algebra(), x, y, &0.0)
    }

    /// Frame components of the differential of `f` at `y`: `(Ã_a f)(y)`.
    pub fn frame_differential(&self, f: &TestFunction, y: &[f64]) -> Vec<f64> {
        let (_, grad) = f.eval_grad(y);
        self.frame
            .fields
            .iter()
            .map(|field| {
                field
                    .components
                    .iter()
                    .enumerate()
                    .map(|(alpha, c)| {
                        if c.is_zero() {
                            0.0
                        } else {
                            c.eval(y) * grad[alpha]
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Norm of the horizontal gradient at `y`.
    pub fn horizontal_gradient_norm(&self, f: &TestFunction, y: &[f64]) -> f64 {
        let dfc = self.frame_differential(f, y);
        let fp = self.frame.point();
        (0..self.dim())
            .filter(|&a| fp.horizontal[a])
            .map(|a| dfc[a] * dfc[a])
            .sum::<f64>()
            .sqrt()
    }

    /// Full-frame covector norm of `df` at `y`.
    pub fn full_gradient_norm(&self, f: &TestFunction, y: &[f64]) -> f64 {
        self.frame_differential(f, y).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Walk one path from the identity; the visitor sees each per-step
    /// increment (components over the orthonormal horizontal legs). Returns
    /// the endpoint (at the identity) and the accumulated anti-development.
    fn walk_path<F: FnMut(usize, &[f64])>(
        &self,
        settings: &SimSettings,
        spec: RngSpec,
        path: usize,
        n_steps: usize,
        mut visitor: F,
    ) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let nh = self.rank_h();
        let sqrt_h = settings.step.sqrt();
        let mut rng = spec.stream(path);
        let mut x = vec![0.0; dim];
        let mut w = vec![0.0; nh];
        let mut xi = vec![0.0; nh];
        for k in 0..n_steps {
            for item in xi.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *item = sqrt_h * z;
            }
            visitor(k, &xi);
            let mut incr = vec![0.0; dim];
            for (i, leg) in self.h_legs.iter().enumerate() {
                for alpha in 0..dim {
                    incr[alpha] += xi[i] * leg[alpha];
                }
                w[i] += xi[i];
            }
            x = self.group_mul(&x, &incr);
        }
        (x, w)
    }

    /// Simulate a batch of horizontal Brownian paths started at `x0`.
    pub fn simulate_paths(&self, settings: &SimSettings) -> Result<DiffusionBatch> {
        let n_steps = settings.n_steps()?;
        if settings.x0.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: settings.x0.len(),
            });
        }
        let spec = RngSpec { seed: settings.seed };
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..settings.n_paths)
            .into_par_iter()
            .map(|p| {
                let (x, w) = self.walk_path(settings, spec, p, n_steps, |_, _| {});
                (self.group_mul(&settings.x0, &x), w)
            })
            .collect();
        let mut endpoints = Vec::with_capacity(rows.len());
        let mut antidev = Vec::with_capacity(rows.len());
        for (e, w) in rows {
            endpoints.push(e);
            antidev.push(w);
        }
        Ok(DiffusionBatch { settings: settings.clone(), endpoints, antidev })
    }

    /// `P_t f(x0)`: sample mean of `f` over the batch endpoints.
    pub fn estimate_ptf(&self, f: &TestFunction, batch: &DiffusionBatch) -> EstimateWithError {
        let vals: Vec<f64> = batch.endpoints.iter().map(|y| f.eval(y)).collect();
        mean_stderr(&vals)
    }

    fn horizontal_frame_components(&self, v: &[f64]) -> Result<Vec<f64>> {
        let vf = self.frame.ortho.vector_to_frame(v);
        let fp = self.frame.point();
        for (a, comp) in vf.iter().enumerate() {
            if !fp.horizontal[a] && comp.abs() > 1e-12 {
                return Err(CoreError::InvalidArgument(
                    "direction vector must be horizontal".into(),
                ));
            }
        }
        Ok(vf)
    }

    fn psi_h(&self) -> f64 {
        let fp = self.frame.point();
        psi_horizontal_max(&psi_map(fp), fp)
    }

    /// Deterministic chunked statistics over paths: `fill(path, out)` writes
    /// `width` values for one path; chunks of fixed size are reduced in
    /// chunk-index order, so the result is bit-identical for any thread count.
    fn chunked_stats<F>(&self, n_paths: usize, width: usize, fill: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        const CHUNK: usize = 2048;
        let n_chunks = n_paths.div_ceil(CHUNK);
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = ((ci + 1) * CHUNK).min(n_paths);
                let mut sums = vec![0.0; width];
                let mut sqs = vec![0.0; width];
                let mut buf = vec![0.0; width];
                for p in lo..hi {
                    fill(p, &mut buf);
                    for i in 0..width {
                        sums[i] += buf[i];
                        sqs[i] += buf[i] * buf[i];
                    }
                }
                (sums, sqs)
            })
            .collect();
        let mut sums = vec![0.0; width];
        let mut sqs = vec![0.0; width];
        for (s, q) in &partials {
            for i in 0..width {
                sums[i] += s[i];
                sqs[i] += q[i];
            }
        }
        let n = n_paths as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
        let errs: Vec<f64> = (0..width)
            .map(|i| {
                if n_paths > 1 {
                    (((sqs[i] - n * means[i] * means[i]) / (n - 1.0)).max(0.0) / n).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        (means, errs)
    }

    /// Transpose-inverse of the basis map as plain rows, for pulling
    /// coordinate covectors back to the original basis.
    fn m_inv_t_rows(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let m_inv = &self.frame.ortho.basis_map_inv;
        (0..dim)
            .map(|alpha| (0..dim).map(|a| m_inv[(a, alpha)]).collect())
            .collect()
    }

    /// Gradient representation on stratified groups with vanishing `ψ|_h`:
    /// `dP_t f(x·v) = E[ df((x·X_t)·(v - ad(W_t) v)) ]` for every listed
    /// function and horizontal direction, sharing one batch of paths.
    pub fn gradient_rep_carnot_multi(
        &self,
        fs: &[TestFunction],
        x: &[f64],
        vs: &[Vec<f64>],
        settings: &SimSettings,
    ) -> Result<Vec<Vec<EstimateWithError>>> {
        let psi_h = self.psi_h();
        if psi_h > 1e-12 {
            return Err(CoreError::RepresentationInapplicable(format!(
                "psi does not vanish on the horizontal space (max {psi_h:.3e})"
            )));
        }
        for v in vs {
            self.horizontal_frame_components(v)?;
        }
        let n_steps = settings.n_steps()?;
        let spec = RngSpec { seed: settings.seed };
        let dim = self.dim();
        let m_inv_t = self.m_inv_t_rows();
        let width = fs.len() * vs.len();
        let (means, errs) = self.chunked_stats(settings.n_paths, width, |p, out| {
            let (xt, w) = self.walk_path(settings, spec, p, n_steps, |_, _| {});
            let y = self.group_mul(x, &xt);
            let mut w_full = vec![0.0; dim];
            for (i, leg) in self.h_legs.iter().enumerate() {
                for alpha in 0..dim {
                    w_full[alpha] += w[i] * leg[alpha];
                }
            }
            // ad(W) as a matrix on original coordinates
            let ad_w = self.algebra().ad_matrix(&w_full);
            for (fi, f) in fs.iter().enumerate() {
                let dfc = self.frame_differential(f, &y);
                // covector acting on original v: (I - ad_W)^T M^{-T} dfc
                let mut tmp = vec![0.0; dim];
                for alpha in 0..dim {
                    tmp[alpha] = m_inv_t[alpha].iter().zip(&dfc).map(|(a, b)| a * b).sum();
                }
                let mut cov = tmp.clone();
                for alpha in 0..dim {
                    let mut acc = 0.0;
                    for k in 0..dim {
                        acc += tmp[k] * ad_w[(k, alpha)];
                    }
                    cov[alpha] -= acc;
                }
                for (vi, v) in vs.iter().enumerate() {
                    out[fi * vs.len() + vi] = cov.iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
        });
        Ok(collect_grid(fs.len(), vs.len(), settings.n_paths, &means, &errs))
    }

    pub fn gradient_rep_carnot(
        &self,
        f: &TestFunction,
        x: &[f64],
        v: &[f64],
        settings: &SimSettings,
    ) -> Result<EstimateWithError> {
        Ok(self
            .gradient_rep_carnot_multi(std::slice::from_ref(f), x, &[v.to_vec()], settings)?[0][0])
    }

    /// Gradient representation on groups of polynomial growth:
    /// `dP_t f(x·v) = E[ df((x·X_t)·(Q_t^T v + ∫_0^t ad(Q_s^T v) dW_s)) ]`
    /// with the deterministic factor solving `dQ/dt = -QA/2` (`A = -ψ^T` on
    /// covectors for the flat connection, so `Q_s^T = exp(+sψ/2)` on
    /// vectors) and a left-point discretization of the stochastic integral.
    pub fn gradient_rep_polygrowth_multi(
        &self,
        fs: &[TestFunction],
        x: &[f64],
        vs: &[Vec<f64>],
        settings: &SimSettings,
    ) -> Result<Vec<Vec<EstimateWithError>>> {
        for v in vs {
            self.horizontal_frame_components(v)?;
        }
        let n_steps = settings.n_steps()?;
        let spec = RngSpec { seed: settings.seed };
        let dim = self.dim();
        let fp = self.frame.point();
        let mut psi_frame = psi_map(fp);
        psi_frame = self
            .frame
            .ortho
            .basis_map
            .matmul(&psi_frame)
            .matmul(&self.frame.ortho.basis_map_inv);
        let e_step = SmallMat::from_mat(&mat_exp(&psi_frame.scale(&(settings.step / 2.0))));
        // deterministic factors at every grid time
        let mut q_all = Vec::with_capacity(n_steps + 1);
        let mut cur = SmallMat::identity(dim);
        for _ in 0..=n_steps {
            q_all.push(cur);
            cur = e_step.mul(&cur);
        }
        // ad matrices of the orthonormal horizontal legs
        let ad_legs: Vec<SmallMat> = self
            .h_legs
            .iter()
            .map(|leg| SmallMat::from_mat(&self.algebra().ad_matrix(leg)))
            .collect();
        let m_inv_t = self.m_inv_t_rows();
        let width = fs.len() * vs.len();
        let nh = self.rank_h();
        let (means, errs) = self.chunked_stats(settings.n_paths, width, |p, out| {
            // U = Q_K - Σ_k ad(ΔW_k) Q_k, assembled along the walk
            let mut correction = SmallMat::zeros(dim);
            let (xt, _) = self.walk_path(settings, spec, p, n_steps, |k, xi| {
                let mut ad_dw = SmallMat::zeros(dim);
                for i in 0..nh {
                    ad_dw.add_scaled(&ad_legs[i], xi[i]);
                }
                correction.sub_assign(&ad_dw.mul(&q_all[k]));
            });
            let mut u_map = q_all[n_steps];
            u_map.add_assign(&correction);
            let y = self.group_mul(x, &xt);
            for (fi, f) in fs.iter().enumerate() {
                let dfc = self.frame_differential(f, &y);
                let mut tmp = vec![0.0; dim];
                for alpha in 0..dim {
                    tmp[alpha] = m_inv_t[alpha].iter().zip(&dfc).map(|(a, b)| a * b).sum();
                }
                let cov = u_map.transpose_matvec(&tmp);
                for (vi, v) in vs.iter().enumerate() {
                    out[fi * vs.len() + vi] = cov.iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
        });
        Ok(collect_grid(fs.len(), vs.len(), settings.n_paths, &means, &errs))
    }

    pub fn gradient_rep_polygrowth(
        &self,
        f: &TestFunction,
        x: &[f64],
        v: &[f64],
        settings: &SimSettings,
    ) -> Result<EstimateWithError> {
        Ok(self
            .gradient_rep_polygrowth_multi(std::slice::from_ref(f), x, &[v.to_vec()], settings)?
            [0][0])
    }

    /// Data for the adjoint-transport representation; fails when the
    /// geometric conditions do not hold.
    pub fn adjoint_rep_data(&self) -> Result<AdjointData> {
        let fp = self.frame.point();
        let conn = canonical_connection(fp, 1e-10).map_err(|e| {
            CoreError::RepresentationInapplicable(format!("canonical connection: {e}"))
        })?;
        let (c2, dc2) = c_two_form(fp);
        let delta_c = codifferential_two_form(fp, &conn, &c2, &dc2)
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        if delta_c > 1e-10 {
            return Err(CoreError::RepresentationInapplicable(format!(
                "the two-form C is not coclosed (max {delta_c:.3e})"
            )));
        }
        let ric = ricci_matrix(&conn, fp);
        let adjoint = conn.adjoint(fp);
        Ok(AdjointData { adjoint, ric })
    }

    /// Core of the adjoint-transport representation: walks each path once,
    /// carrying the frame transport of the adjoint connection and the
    /// Ricci-driven linear factor, and hands the per-path pullback operator
    /// `Q̂_t /̂/_t^{-1}` (on frame covector components) to the consumer.
    fn adjoint_walk<G>(&self, settings: &SimSettings, data: &AdjointData, consume: &G, p: usize, out: &mut [f64])
    where
        G: Fn(usize, &SmallMat, &[f64], &mut [f64]) + Sync,
    {
        let n_steps = settings.n_steps().expect("validated by caller");
        let spec = RngSpec { seed: settings.seed };
        let dim = self.dim();
        let fp = self.frame.point();
        let h_idx = fp.horizontal_indices();
        let gamma_hat: Vec<SmallMat> = h_idx
            .iter()
            .map(|&leg| {
                let mut m = SmallMat::zeros(dim);
                for a in 0..dim {
                    for b in 0..dim {
                        m.set(a, b, data.adjoint.gamma[(leg, b, a)]);
                    }
                }
                m
            })
            .collect();
        let ric = SmallMat::from_mat(&data.ric);
        let mut transport = SmallMat::identity(dim);
        let mut transport_inv = SmallMat::identity(dim);
        let mut q_hat = SmallMat::identity(dim);
        let (xt, _) = self.walk_path(settings, spec, p, n_steps, |_, xi| {
            // u' = -Γ̂[ξ] u along the exponential segment
            let mut m = SmallMat::zeros(dim);
            for (i, g) in gamma_hat.iter().enumerate() {
                m.add_scaled(g, xi[i]);
            }
            transport = m.scaled(-1.0).exp().mul(&transport);
            transport_inv = transport_inv.mul(&m.exp());
            // Ricci in the transported frame, acting on covector components
            let r_t = transport.transpose().mul(&ric).mul(&transport_inv.transpose());
            q_hat = q_hat.mul(&r_t.scaled(-settings.step / 2.0).exp());
        });
        let pullback = q_hat.mul(&transport.transpose());
        consume(p, &pullback, &xt, out);
    }

    /// Adjoint-transport estimates `dP_t f(x)(v)` for every listed function
    /// and direction, sharing one batch of paths.
    pub fn gradient_rep_adjoint_multi(
        &self,
        fs: &[TestFunction],
        x: &[f64],
        vs: &[Vec<f64>],
        settings: &SimSettings,
    ) -> Result<Vec<Vec<EstimateWithError>>> {
        let data = self.adjoint_rep_data()?;
        settings.n_steps()?;
        let vfs: Vec<Vec<f64>> =
            vs.iter().map(|v| self.frame.ortho.vector_to_frame(v)).collect();
        let width = fs.len() * vs.len();
        let consume = |_p: usize, pullback: &SmallMat, xt: &[f64], out: &mut [f64]| {
            let y = self.group_mul(x, xt);
            for (fi, f) in fs.iter().enumerate() {
                let dfc = self.frame_differential(f, &y);
                let cov = pullback.matvec(&dfc);
                for (vi, vf) in vfs.iter().enumerate() {
                    out[fi * vfs.len() + vi] = cov.iter().zip(vf).map(|(a, b)| a * b).sum();
                }
            }
        };
        let (means, errs) = self.chunked_stats(settings.n_paths, width, |p, out| {
            self.adjoint_walk(settings, &data, &consume, p, out)
        });
        Ok(collect_grid(fs.len(), vs.len(), settings.n_paths, &means, &errs))
    }

    pub fn gradient_rep_adjoint(
        &self,
        f: &TestFunction,
        x: &[f64],
        v: &[f64],
        settings: &SimSettings,
    ) -> Result<EstimateWithError> {
        Ok(self
            .gradient_rep_adjoint_multi(std::slice::from_ref(f), x, &[v.to_vec()], settings)?
            [0][0])
    }

    /// Full covector estimates of `dP_t f` at several base points from one
    /// batch of paths: returns per point and function the frame-component
    /// means and standard errors.
    pub fn gradient_covectors_adjoint_grid(
        &self,
        fs: &[TestFunction],
        xs: &[Vec<f64>],
        settings: &SimSettings,
    ) -> Result<Vec<Vec<(Vec<f64>, Vec<f64>)>>> {
        let data = self.adjoint_rep_data()?;
        settings.n_steps()?;
        let dim = self.dim();
        let width = xs.len() * fs.len() * dim;
        let consume = |_p: usize, pullback: &SmallMat, xt: &[f64], out: &mut [f64]| {
            for (xi, x) in xs.iter().enumerate() {
                let y = self.group_mul(x, xt);
                for (fi, f) in fs.iter().enumerate() {
                    let dfc = self.frame_differential(f, &y);
                    let cov = pullback.matvec(&dfc);
                    let base = (xi * fs.len() + fi) * dim;
                    out[base..base + dim].copy_from_slice(&cov);
                }
            }
        };
        let (means, errs) = self.chunked_stats(settings.n_paths, width, |p, out| {
            self.adjoint_walk(settings, &data, &consume, p, out)
        });
        let mut grid = Vec::with_capacity(xs.len());
        for xi in 0..xs.len() {
            let mut per_f = Vec::with_capacity(fs.len());
            for fi in 0..fs.len() {
                let base = (xi * fs.len() + fi) * dim;
                per_f.push((means[base..base + dim].to_vec(), errs[base..base + dim].to_vec()));
            }
            grid.push(per_f);
        }
        Ok(grid)
    }

    /// Full covector estimate of `dP_t f(x)` in frame components.
    pub fn gradient_covector_adjoint(
        &self,
        f: &TestFunction,
        x: &[f64],
        settings: &SimSettings,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = self.gradient_covectors_adjoint_grid(
            std::slice::from_ref(f),
            std::slice::from_ref(&x.to_vec()),
            settings,
        )?;
        Ok(grid[0][0].clone())
    }

    /// Central-difference oracle with common random numbers:
    /// `(P_t f(x·exp(εv)) - P_t f(x·exp(-εv))) / 2ε` over shared paths.
    pub fn finite_difference_gradient_multi(
        &self,
        fs: &[TestFunction],
        x: &[f64],
        vs: &[Vec<f64>],
        settings: &SimSettings,
        eps: f64,
    ) -> Result<Vec<Vec<EstimateWithError>>> {
        if eps <= 0.0 {
            return Err(CoreError::InvalidArgument("eps must be positive".into()));
        }
        let n_steps = settings.n_steps()?;
        let spec = RngSpec { seed: settings.seed };
        let shifted: Vec<(Vec<f64>, Vec<f64>)> = vs
            .iter()
            .map(|v| {
                let ev: Vec<f64> = v.iter().map(|c| c * eps).collect();
                let xp = self.group_mul(x, &ev);
                let xm = self.group_mul(x, &ev.iter().map(|c| -c).collect::<Vec<_>>());
                (xp, xm)
            })
            .collect();
        let width = fs.len() * vs.len();
        let (means, errs) = self.chunked_stats(settings.n_paths, width, |p, out| {
            let (xt, _) = self.walk_path(settings, spec, p, n_steps, |_, _| {});
            for (vi, (xp, xm)) in shifted.iter().enumerate() {
                let yp = self.group_mul(xp, &xt);
                let ym = self.group_mul(xm, &xt);
                for (fi, f) in fs.iter().enumerate() {
                    out[fi * vs.len() + vi] = (f.eval(&yp) - f.eval(&ym)) / (2.0 * eps);
                }
            }
        });
        Ok(collect_grid(fs.len(), vs.len(), settings.n_paths, &means, &errs))
    }

    pub fn finite_difference_gradient(
        &self,
        f: &TestFunction,
        x: &[f64],
        v: &[f64],
        settings: &SimSettings,
        eps: f64,
    ) -> Result<EstimateWithError> {
        Ok(self.finite_difference_gradient_multi(
            std::slice::from_ref(f),
            x,
            &[v.to_vec()],
            settings,
            eps,
        )?[0][0])
    }

    /// Estimate of the horizontal gradient vector of `P_t f` at `x` (frame
    /// components over the horizontal legs), via the applicable
    /// representation.
    pub fn horizontal_gradient_of_ptf(
        &self,
        f: &TestFunction,
        x: &[f64],
        settings: &SimSettings,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let vs: Vec<Vec<f64>> = self.h_legs.clone();
        let grid = if self.psi_h() <= 1e-12 {
            self.gradient_rep_carnot_multi(std::slice::from_ref(f), x, &vs, settings)?
        } else {
            self.gradient_rep_adjoint_multi(std::slice::from_ref(f), x, &vs, settings)?
        };
        let vals = grid[0].iter().map(|e| e.value).collect();
        let errs = grid[0].iter().map(|e| e.stderr).collect();
        Ok((vals, errs))
    }

    /// Verify `|∇^H P_t f| <= C_p (P_t |∇^H f|^p)^{1/p}` within Monte Carlo
    /// error.
    pub fn gradient_bound_check(
        &self,
        f: &TestFunction,
        x: &[f64],
        p: f64,
        c_p: f64,
        settings: &SimSettings,
    ) -> Result<BoundCheck> {
        if p <= 1.0 {
            return Err(CoreError::InvalidArgument("p must exceed 1".into()));
        }
        let (grad, errs) = self.horizontal_gradient_of_ptf(f, x, settings)?;
        let lhs = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let lhs_err = errs.iter().map(|e| e * e).sum::<f64>().sqrt();
        let batch = self.simulate_paths(&SimSettings { x0: x.to_vec(), ..settings.clone() })?;
        let powered: Vec<f64> = batch
            .endpoints
            .iter()
            .map(|y| self.horizontal_gradient_norm(f, y).powf(p))
            .collect();
        let m = mean_stderr(&powered);
        let (rhs_raw, rhs_err) = if m.value > 0.0 {
            (m.value.powf(1.0 / p), m.value.powf(1.0 / p - 1.0) * m.stderr / p)
        } else {
            (0.0, 0.0)
        };
        let rhs = c_p * rhs_raw;
        let combined = (lhs_err.powi(2) + (c_p * rhs_err).powi(2)).sqrt();
        Ok(BoundCheck {
            name: format!("|grad_H P_t f| <= C_p (P_t |grad_H f|^p)^(1/p), p={p}"),
            lhs,
            lhs_stderr: lhs_err,
            rhs,
            rhs_stderr: c_p * rhs_err,
            pass: lhs <= rhs + 3.0 * combined,
        })
    }

    /// Verify `P_t f^2 - (P_t f)^2 <= t C_2^2 P_t |∇^H f|^2` within Monte
    /// Carlo error.
    pub fn variance_bound_check(
        &self,
        f: &TestFunction,
        x: &[f64],
        c2: f64,
        settings: &SimSettings,
    ) -> Result<BoundCheck> {
        let batch = self.simulate_paths(&SimSettings { x0: x.to_vec(), ..settings.clone() })?;
        let fv: Vec<f64> = batch.endpoints.iter().map(|y| f.eval(y)).collect();
        let fsq: Vec<f64> = fv.iter().map(|v| v * v).collect();
        let ef = mean_stderr(&fv);
        let ef2 = mean_stderr(&fsq);
        let lhs = ef2.value - ef.value * ef.value;
        let lhs_err = (ef2.stderr.powi(2) + (2.0 * ef.value.abs() * ef.stderr).powi(2)).sqrt();
        let gsq: Vec<f64> = batch
            .endpoints
            .iter()
            .map(|y| {
                let g = self.horizontal_gradient_norm(f, y);
                g * g
            })
            .collect();
        let eg = mean_stderr(&gsq);
        let rhs = settings.t * c2 * c2 * eg.value;
        let rhs_err = settings.t * c2 * c2 * eg.stderr;
        let combined = (lhs_err.powi(2) + rhs_err.powi(2)).sqrt();
        Ok(BoundCheck {
            name: "P_t f^2 - (P_t f)^2 <= t C_2^2 P_t |grad_H f|^2".into(),
            lhs,
            lhs_stderr: lhs_err,
            rhs,
            rhs_stderr: rhs_err,
            pass: lhs <= rhs + 3.0 * combined,
        })
    }

    /// Verify the semigroup covector bound `‖dP_t f‖_∞ <= e^{Kt} ‖df‖_∞`
    /// over a sample grid, with the sup of `|df|` taken over the grid and the
    /// batch endpoints.
    pub fn sup_gradient_bound_check(
        &self,
        f: &TestFunction,
        grid: &[Vec<f64>],
        k_const: f64,
        settings: &SimSettings,
    ) -> Result<BoundCheck> {
        let mut worst = 0.0f64;
        let mut worst_err = 0.0f64;
        let rows =
            self.gradient_covectors_adjoint_grid(std::slice::from_ref(f), grid, settings)?;
        for per_f in &rows {
            let (means, errs) = &per_f[0];
            let norm = means.iter().map(|m| m * m).sum::<f64>().sqrt();
            let err = errs.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > worst {
                worst = norm;
                worst_err = err;
            }
        }
        let mut df_sup = grid
            .iter()
            .map(|x| self.full_gradient_norm(f, x))
            .fold(0.0, f64::max);
        let batch = self.simulate_paths(settings)?;
        for y in batch.endpoints.iter().take(20_000) {
            df_sup = df_sup.max(self.full_gradient_norm(f, y));
        }
        let rhs = (k_const * settings.t).exp() * df_sup;
        Ok(BoundCheck {
            name: format!("sup |dP_t f| <= e^(K t) sup |df|, K={k_const}"),
            lhs: worst,
            lhs_stderr: worst_err,
            rhs,
            rhs_stderr: 0.0,
            pass: worst <= rhs + 3.0 * worst_err,
        })
    }

    /// Condition report of the underlying constant frame.
    pub fn conditions(&self, tol: f64) -> crate::curvature::ConditionReport {
        let fp = self.frame.point();
        conditions_report_points(&[fp.clone()], vec![], Some(self.psi_h()), tol)
    }
}

fn collect_grid(
    nf: usize,
    nv: usize,
    n_paths: usize,
    means: &[f64],
    errs: &[f64],
) -> Vec<Vec<EstimateWithError>> {
    (0..nf)
        .map(|fi| {
            (0..nv)
                .map(|vi| EstimateWithError {
                    value: means[fi * nv + vi],
                    stderr: errs[fi * nv + vi],
                    n_paths,
                })
                .collect()
        })
        .collect()
}

/// Stack-allocated square matrix for the per-step transport updates; leg
/// counts never exceed seven.
#[derive(Clone, Copy)]
struct SmallMat {
    n: usize,
    a: [f64; 49],
}

impl SmallMat {
    fn zeros(n: usize) -> Self {
        debug_assert!(n <= 7);
        SmallMat { n, a: [0.0; 49] }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    fn from_mat(m: &Mat<f64>) -> Self {
        let mut out = Self::zeros(m.rows);
        for i in 0..m.rows {
            for j in 0..m.cols {
                out.a[i * m.rows + j] = m[(i, j)];
            }
        }
        out
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    fn mul(&self, o: &SmallMat) -> SmallMat {
        let n = self.n;
        let mut out = SmallMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let v = self.a[i * n + k];
                if v == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += v * o.a[k * n + j];
                }
            }
        }
        out
    }

    fn transpose(&self) -> SmallMat {
        let n = self.n;
        let mut out = SmallMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j];
            }
        }
        out
    }

    fn scaled(&self, s: f64) -> SmallMat {
        let mut out = *self;
        for v in out.a.iter_mut() {
            *v *= s;
        }
        out
    }

    fn add_scaled(&mut self, o: &SmallMat, s: f64) {
        for i in 0..self.n * self.n {
            self.a[i] += s * o.a[i];
        }
    }

    fn add_assign(&mut self, o: &SmallMat) {
        for i in 0..self.n * self.n {
            self.a[i] += o.a[i];
        }
    }

    fn sub_assign(&mut self, o: &SmallMat) {
        for i in 0..self.n * self.n {
            self.a[i] -= o.a[i];
        }
    }

    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum())
            .collect()
    }

    fn transpose_matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j] * v[i]).sum())
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.a[..self.n * self.n].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Scaling-and-squaring exponential with a fixed-order Taylor core.
    fn exp(&self) -> SmallMat {
        let norm = self.max_abs() * self.n as f64;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let base = self.scaled(0.5f64.powi(squarings as i32));
        let mut result = SmallMat::identity(self.n);
        let mut term = SmallMat::identity(self.n);
        for k in 1..=12 {
            term = term.mul(&base).scaled(1.0 / k as f64);
            result.add_assign(&term);
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }
}

/// Canonical-adjoint transport data.
pub struct AdjointData {
    pub adjoint: ConnPoint<f64>,
    pub ric: Mat<f64>,
}

/// Two-sided Monte Carlo inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub pass: bool,
}
