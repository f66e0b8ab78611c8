//! Semidefinite-relaxation oracle for the coordinated precoder.
//!
//! The lifted problem maximises `t` subject to
//! `σ²_rcs Tr(A W) ≥ t ξ(ρ)`, per-AP power budgets, the SSB and direct-link
//! nulls and the user SINR requirement. For a PSD block `W_jj` the null
//! constraint `f^T W_jj f^* = 0` is equivalent to `W_jj f^* = 0`, so the
//! nulls are eliminated exactly by writing `W = B X B^H` where `B` is block
//! diagonal with orthonormal bases of the allowed subspaces. Under the
//! symmetric user model the SINR requirement becomes `ρ_j ≥ ρ_min`.
//!
//! Raising any `ρ_j` above its floor both shrinks the sensing budget and
//! raises the clutter term, so every level `t` of the bisection is feasible
//! exactly when the SDP
//!
//! `S = max ⟨b̂ b̂^H, X⟩  s.t.  X ⪰ 0,  Tr X_jj ≤ c_j = 1 − ρ_min,j / P`
//!
//! reaches the level's threshold. `S` is bracketed by an interior-point
//! method on its dual `min Σ c_j μ_j  s.t.  diag(μ_j I) ⪰ b̂ b̂^H`, whose
//! log-det barrier is minimised by damped Newton steps along the central
//! path. The dual iterate gives the upper bound. The central-path matrix
//! `F(μ)^{-1}/τ`, rescaled onto the budgets, is a feasible primal point and
//! gives the lower bound.

use nalgebra::DMatrix;

use super::{check_inputs, nulled_basis, MaskMode, Method, PrecoderSolution, Residuals};
use crate::channel::ChannelSet;
use crate::linalg::{c, complement_basis, hermitian_cholesky, hermitian_eigen};
use crate::metrics::{combining_vector, sensing_sinr_from_gain};
use crate::scene::Scene;
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SdrOptions {
    /// Bisection bracket on `t` (linear SINR). `None` uses `[0, t_upper]`
    /// with `t_upper` the bound obtained when the whole budget aligns with
    /// the objective direction.
    pub t_bracket: Option<(f64, f64)>,
    /// Stop when `(t_hi − t_lo) ≤ rel_tol · t_hi`.
    pub bisection_rel_tol: f64,
    /// Cap on Newton steps of the interior-point solve.
    pub max_iterations: usize,
    /// Target relative duality gap of the SDP bounds.
    pub gap_tol: f64,
}

impl Default for SdrOptions {
    fn default() -> Self {
        Self {
            t_bracket: None,
            bisection_rel_tol: 1e-4,
            max_iterations: 500,
            gap_tol: 1e-9,
        }
    }
}

/// Solver trace of one SDR solve.
#[derive(Debug, Clone)]
pub struct SdrDiagnostics {
    /// Relaxed solution `W` (JM × JM), mW.
    pub w_matrix: CMatrix,
    /// `λ₁/λ₂` of `W` (infinite for an exactly rank-one `W`).
    pub eigen_ratio: f64,
    pub bisection_steps: usize,
    pub newton_iterations: usize,
    /// Bisection levels that fell inside the duality gap; they are treated
    /// as infeasible.
    pub unresolved_checks: usize,
    /// Certified `(lower, upper)` bounds on the relaxed optimum of `t`.
    pub t_bounds: (f64, f64),
    /// Largest budget violation of the returned relaxed point, normalised.
    pub relaxed_residual: f64,
    /// Sensing SINR of the rank-one precoder extracted from `W`.
    pub extracted_objective: f64,
    /// Final bisection bracket on `t`.
    pub bracket: (f64, f64),
}

/// Normalised SDP: unit objective direction and per-block budgets.
struct Lifted {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    /// `b/‖b‖`.
    b_unit: CVector,
    /// `c_j = 1 − ρ_min,j / P`; blocks with no room are pinned to zero.
    budget: Vec<f64>,
}

/// Bounds on `S` with the primal point attaining the lower one.
struct SdpBounds {
    lower: f64,
    upper: f64,
    x: CMatrix,
    newton_steps: usize,
    converged: bool,
}

impl Lifted {
    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Blocks carrying a dual variable.
    fn active(&self) -> Vec<usize> {
        (0..self.sizes.len())
            .filter(|&j| self.sizes[j] > 0 && self.budget[j] > 0.0)
            .collect()
    }

    /// `F(μ) = diag(μ_j I) − b̂ b̂^H` restricted to the active blocks, with
    /// its Cholesky factor when it is positive definite.
    fn slack(&self, active: &[usize], mu: &[f64]) -> Option<(CMatrix, f64)> {
        let idx = self.active_indices(active);
        let n = idx.len();
        let mut f = CMatrix::zeros(n, n);
        let mut pos = 0;
        for (a, &j) in active.iter().enumerate() {
            for _ in 0..self.sizes[j] {
                f[(pos, pos)] = c(mu[a]);
                pos += 1;
            }
        }
        let b: CVector = CVector::from_iterator(n, idx.iter().map(|&i| self.b_unit[i]));
        f.gerc(c(-1.0), &b, &b, c(1.0));
        let chol = hermitian_cholesky(&f)?;
        let logdet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.re.ln())
                .sum::<f64>();
        Some((chol.inverse(), logdet))
    }

    fn active_indices(&self, active: &[usize]) -> Vec<usize> {
        active
            .iter()
            .flat_map(|&j| self.offsets[j]..self.offsets[j] + self.sizes[j])
            .collect()
    }

    /// Path-following on the dual barrier `τ c^T μ − log det F(μ)`.
    fn solve(&self, opts: &SdrOptions) -> SdpBounds {
        let active = self.active();
        let dim = self.dim();
        if active.is_empty() {
            return SdpBounds {
                lower: 0.0,
                upper: 0.0,
                x: CMatrix::zeros(dim, dim),
                newton_steps: 0,
                converged: true,
            };
        }
        let k = active.len();
        let n = self.active_indices(&active).len() as f64;
        let cost: Vec<f64> = active.iter().map(|&j| self.budget[j]).collect();
        let dual = |mu: &[f64]| mu.iter().zip(&cost).map(|(m, c)| m * c).sum::<f64>();
        // ‖b̂‖ = 1, so μ = 2 leaves F ⪰ I.
        let mut mu = vec![2.0; k];
        let mut tau = n / dual(&mu);
        let mut steps = 0;
        let mut converged = false;
        let (mut z, mut logdet) = self.slack(&active, &mu).expect("initial point is interior");
        'outer: loop {
            loop {
                if steps >= opts.max_iterations {
                    break 'outer;
                }
                let (g, h) = self.derivatives(&active, &z, tau, &cost);
                let Some(hc) = h.clone().cholesky() else {
                    break;
                };
                let delta = -hc.solve(&g);
                let decrement = -g.dot(&delta);
                // Centred well enough; the gap bound n/τ then holds to
                // within a factor 1 + O(√decrement).
                if decrement < 1e-10 {
                    break;
                }
                steps += 1;
                let value = tau * dual(&mu) - logdet;
                let mut s = 1.0;
                let mut accepted = false;
                while s > 1e-12 {
                    let trial: Vec<f64> = mu
                        .iter()
                        .zip(delta.iter())
                        .map(|(m, d)| m + s * d)
                        .collect();
                    if let Some((zt, lt)) = self.slack(&active, &trial) {
                        if tau * dual(&trial) - lt <= value - 0.25 * s * decrement {
                            if trial == mu {
                                // Step below the resolution of μ.
                                break;
                            }
                            mu = trial;
                            z = zt;
                            logdet = lt;
                            accepted = true;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if n / tau <= opts.gap_tol * dual(&mu) {
                converged = true;
                break;
            }
            tau *= 8.0;
        }

        // Central-path primal point, rescaled onto the budgets.
        let mut x_active = z * c(1.0 / tau);
        let mut pos = 0;
        let mut scale = Vec::with_capacity(k);
        for &j in &active {
            let tr: f64 = (pos..pos + self.sizes[j])
                .map(|i| x_active[(i, i)].re)
                .sum();
            // Filling each budget exactly keeps X feasible and can only
            // raise the objective.
            let s = if tr > 0.0 {
                (self.budget[j] / tr).sqrt()
            } else {
                1.0
            };
            scale.extend(std::iter::repeat_n(s, self.sizes[j]));
            pos += self.sizes[j];
        }
        for r in 0..x_active.nrows() {
            for col in 0..x_active.ncols() {
                x_active[(r, col)] *= scale[r] * scale[col];
            }
        }
        let idx = self.active_indices(&active);
        let mut x = CMatrix::zeros(dim, dim);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                x[(ia, ib)] = x_active[(a, b)];
            }
        }
        let lower = self.b_unit.dotc(&(&x * &self.b_unit)).re;
        SdpBounds {
            lower,
            upper: dual(&mu),
            x,
            newton_steps: steps,
            converged,
        }
    }

    /// Gradient and Hessian of the barrier objective in `μ`.
    fn derivatives(
        &self,
        active: &[usize],
        z: &CMatrix,
        tau: f64,
        cost: &[f64],
    ) -> (nalgebra::DVector<f64>, DMatrix<f64>) {
        let k = active.len();
        let starts: Vec<usize> = active
            .iter()
            .scan(0, |acc, &j| {
                let o = *acc;
                *acc += self.sizes[j];
                Some(o)
            })
            .collect();
        let g = nalgebra::DVector::from_fn(k, |a, _| {
            let tr: f64 = (0..self.sizes[active[a]])
                .map(|i| z[(starts[a] + i, starts[a] + i)].re)
                .sum();
            tau * cost[a] - tr
        });
        let h = DMatrix::from_fn(k, k, |a, b| {
            z.view(
                (starts[a], starts[b]),
                (self.sizes[active[a]], self.sizes[active[b]]),
            )
            .iter()
            .map(|v| v.norm_sqr())
            .sum()
        });
        (g, h)
    }

    /// Largest budget excess of `X`, relative to the budget.
    fn budget_violation(&self, x: &CMatrix) -> f64 {
        (0..self.sizes.len())
            .map(|j| {
                let tr: f64 = (self.offsets[j]..self.offsets[j] + self.sizes[j])
                    .map(|i| x[(i, i)].re)
                    .sum();
                (tr - self.budget[j].max(0.0)).max(0.0) / self.budget[j].max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Bisection on `t` over the lifted problem.
///
/// `rho_min` is the per-AP SSB power floor implied by the user SINR
/// requirement. Each level is decided from certified SDP bounds; levels
/// inside the duality gap count as infeasible. The returned solution
/// reports the largest feasible `t` as its objective and carries the
/// rank-one precoder extracted from `W`.
pub fn sdr_bisection_solver(
    scene: &Scene,
    channels: &ChannelSet,
    q: usize,
    rho_min: &[f64],
    p_max: f64,
    mode: MaskMode,
    opts: &SdrOptions,
) -> Result<(PrecoderSolution, SdrDiagnostics)> {
    check_inputs(scene, channels, q, rho_min, p_max)?;
    if !(opts.bisection_rel_tol > 0.0) || opts.max_iterations == 0 || !(opts.gap_tol > 0.0) {
        return Err(Error::Contract("invalid SDR options".into()));
    }
    let m = scene.m();
    let jn = scene.j();
    let v = combining_vector(channels, q);

    // Allowed subspace per AP and the projected objective direction.
    let bases: Vec<CMatrix> = (0..jn)
        .map(|j| complement_basis(&nulled_basis(scene, channels, q, j, mode), m))
        .collect();
    let sizes: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let dim: usize = sizes.iter().sum();
    let mut b = CVector::zeros(dim);
    for (j, h) in channels.sensing[q].iter().enumerate() {
        let a = h.h_tx.conjugate() * (h.scale().conj() * h.h_rx.dotc(&v));
        b.rows_mut(offsets[j], sizes[j])
            .copy_from(&(bases[j].adjoint() * a));
    }
    let s = b.norm_squared();
    if s == 0.0 {
        return Err(Error::DegenerateVoxel { voxel: q });
    }
    let beta_g = channels.params.clutter_var;
    let noise = channels.params.noise_var;
    let sigma_rcs2 = channels.sigma_rcs2();
    let xi_min = beta_g * rho_min.iter().sum::<f64>() + noise;
    if !(xi_min > 0.0) || !(sigma_rcs2 > 0.0) {
        return Err(Error::Contract(
            "SDR needs positive noise and RCS power".into(),
        ));
    }
    let rho_floor: Vec<f64> = rho_min.iter().map(|r| r / p_max).collect();
    let lifted = Lifted {
        offsets: offsets.clone(),
        sizes: sizes.clone(),
        b_unit: b.unscale(s.sqrt()),
        budget: rho_floor.iter().map(|f| 1.0 - f).collect(),
    };
    // Level u asks for ⟨b̂b̂^H, X⟩ ≥ u (σ²_n + β_g P Σρ'_min)/ξ_min, and
    // t = u · s P σ²_rcs / ξ_min.
    let level_scale = (noise + beta_g * p_max * rho_floor.iter().sum::<f64>()) / xi_min;
    let t_per_u = s * p_max * sigma_rcs2 / xi_min;
    // ⟨b̂b̂^H, X⟩ ≤ Tr X ≤ Σ c_j.
    let u_upper: f64 = lifted.budget.iter().map(|c| c.max(0.0)).sum::<f64>() / level_scale;
    let (mut lo, mut hi) = match opts.t_bracket {
        Some((a, b)) if a >= 0.0 && b > a => (a / t_per_u, b / t_per_u),
        Some(_) => return Err(Error::Contract("invalid bisection bracket".into())),
        None => (0.0, u_upper),
    };

    let bounds = lifted.solve(opts);
    if bounds.lower < lo * level_scale {
        return Err(Error::Solver(format!(
            "lower end of the bisection bracket (t = {}) is infeasible",
            lo * t_per_u
        )));
    }
    let mut steps = 0;
    let mut unresolved = 0;
    while hi - lo > opts.bisection_rel_tol * hi {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let need = mid * level_scale;
        if bounds.lower >= need {
            lo = mid;
        } else {
            if bounds.upper >= need {
                unresolved += 1;
            }
            hi = mid;
        }
    }

    let relaxed_residual = lifted.budget_violation(&bounds.x);
    let rho: Vec<f64> = rho_floor
        .iter()
        .map(|r| (r * p_max).clamp(0.0, p_max))
        .collect();
    let mut bmat = CMatrix::zeros(jn * m, dim);
    for j in 0..jn {
        bmat.view_mut((j * m, offsets[j]), (m, sizes[j]))
            .copy_from(&bases[j]);
    }
    let w_matrix = &bmat * (&bounds.x * c(p_max)) * bmat.adjoint();
    let (vals, _) = hermitian_eigen(&w_matrix);
    let eigen_ratio = match vals.get(1) {
        Some(&l2) if l2 > 0.0 => vals[0] / l2,
        _ => f64::INFINITY,
    };
    let w = extract_rank1(&w_matrix, &rho, p_max)?;
    let f = scene.ssb_column(q);
    let extracted_objective = sensing_sinr_from_gain(channels, &v, q, &w, &rho);
    let t = lo * t_per_u;
    let mut warnings = Vec::new();
    if !bounds.converged {
        warnings.push(format!(
            "interior-point solve stopped after {} Newton steps with relative gap {:.2e}",
            bounds.newton_steps,
            (bounds.upper - bounds.lower) / bounds.upper
        ));
    }
    if unresolved > 0 {
        warnings.push(format!(
            "{unresolved} bisection levels fell inside the duality gap"
        ));
    }
    let sol = PrecoderSolution {
        objective: t,
        residuals: Residuals::evaluate(&w, &rho, p_max, &f, channels),
        w,
        rho,
        p_max,
        mode,
        method: Method::Sdr,
        voxel: q,
        idle_aps: Vec::new(),
        warnings,
    };
    let diag = SdrDiagnostics {
        w_matrix,
        eigen_ratio,
        bisection_steps: steps,
        newton_iterations: bounds.newton_steps,
        unresolved_checks: unresolved,
        t_bounds: (
            bounds.lower / level_scale * t_per_u,
            bounds.upper / level_scale * t_per_u,
        ),
        relaxed_residual,
        extracted_objective,
        bracket: (lo * t_per_u, hi * t_per_u),
    };
    Ok((sol, diag))
}

/// `w_j = √(P_max − ρ_j) · z_j` where `z_j` is block `j` of the unit
/// dominant eigenvector of `W`. The eigenvector phase is fixed by making
/// its first nonzero entry real and positive.
pub fn extract_rank1(w: &CMatrix, rho: &[f64], p_max: f64) -> Result<Vec<CVector>> {
    let n = w.nrows();
    let j = rho.len();
    if n != w.ncols() || j == 0 || !n.is_multiple_of(j) {
        return Err(Error::Contract(format!(
            "W of size {}x{} does not split into {} blocks",
            n,
            w.ncols(),
            j
        )));
    }
    let (vals, vecs) = hermitian_eigen(w);
    let scale = w.norm();
    if !(vals[0] > 1e-12 * scale) || scale == 0.0 {
        return Err(Error::DegenerateSolution("W is numerically zero".into()));
    }
    let mut z = vecs.column(0).into_owned();
    let zmax = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if let Some(first) = z.iter().find(|x| x.norm() > 1e-12 * zmax).copied() {
        z *= first.conj() / first.norm();
    }
    let m = n / j;
    Ok((0..j)
        .map(|k| z.rows(k * m, m).into_owned() * c((p_max - rho[k]).max(0.0).sqrt()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rank1_extraction_of_exact_outer_product() {
        let u = CVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ]);
        let w = &u * u.adjoint();
        let out = extract_rank1(&w, &[1.0, 3.0], 5.0).unwrap();
        assert!((out[0].clone() - u.rows(0, 2) * c(2.0)).norm() < 1e-12);
        assert!((out[1].clone() - u.rows(2, 2) * c(2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn rank1_extraction_of_block_diagonal() {
        let mut w = CMatrix::zeros(4, 4);
        w[(0, 0)] = c(1.0);
        w[(3, 3)] = c(2.0);
        let out = extract_rank1(&w, &[0.0, 0.0], 1.0).unwrap();
        assert!(out[0].norm() < 1e-12);
        assert!((out[1][1] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        assert!(matches!(
            extract_rank1(&CMatrix::zeros(4, 4), &[0.0, 0.0], 1.0),
            Err(Error::DegenerateSolution(_))
        ));
    }

    #[test]
    fn sdp_bounds_bracket_the_aligned_optimum() {
        // With one block the optimum puts the whole budget on b̂.
        let b = CVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.8), c(0.0)]);
        let lifted = Lifted {
            offsets: vec![0],
            sizes: vec![3],
            b_unit: b,
            budget: vec![0.7],
        };
        let out = lifted.solve(&SdrOptions::default());
        assert!(out.converged);
        assert!(out.lower <= 0.7 + 1e-12 && out.upper >= 0.7 - 1e-12);
        assert!(out.upper - out.lower < 1e-8, "{} {}", out.lower, out.upper);
        let v = lifted.budget_violation(&out.x);
        assert!(
            v < 1e-12,
            "violation {v} bounds {} {}",
            out.lower,
            out.upper
        );
    }

    #[test]
    fn sdp_bounds_with_two_blocks() {
        let b = CVector::from_vec(vec![
            c(0.3),
            c(0.4),
            Complex64::new(0.0, 0.5),
            c(0.5),
            c(-0.5),
        ]);
        let b = b.unscale(b.norm());
        let budget = [0.4, 0.9];
        let lifted = Lifted {
            offsets: vec![0, 2],
            sizes: vec![2, 3],
            b_unit: b.clone(),
            budget: budget.to_vec(),
        };
        let out = lifted.solve(&SdrOptions::default());
        assert!(out.converged);
        assert!(out.upper - out.lower < 1e-8);

        // Grid over per-block amplitudes with each block aligned to b̂_j.
        let n = [b.rows(0, 2).norm(), b.rows(2, 3).norm()];
        let mut grid_best: f64 = 0.0;
        for i in 0..=200 {
            for k in 0..=200 {
                let a1 = budget[0].sqrt() * i as f64 / 200.0;
                let a2 = budget[1].sqrt() * k as f64 / 200.0;
                grid_best = grid_best.max((a1 * n[0] + a2 * n[1]).powi(2));
            }
        }
        assert!(out.upper >= grid_best - 1e-12);
        assert!(
            (out.lower - grid_best).abs() < 1e-6,
            "{} vs {}",
            out.lower,
            grid_best
        );

        // Random feasible PSD points never beat the dual bound.
        let mut rng = crate::rng::StreamSeed(3).rng();
        for _ in 0..200 {
            let g = CMatrix::from_fn(5, 5, |_, _| {
                Complex64::new(
                    rand::Rng::random::<f64>(&mut rng) - 0.5,
                    rand::Rng::random::<f64>(&mut rng) - 0.5,
                )
            });
            let mut x = &g * g.adjoint();
            for (j, (o, sz)) in [(0usize, 2usize), (2, 3)].into_iter().enumerate() {
                let tr: f64 = (o..o + sz).map(|i| x[(i, i)].re).sum();
                let sc = (budget[j] / tr).sqrt();
                for r in 0..5 {
                    if (o..o + sz).contains(&r) {
                        for col in 0..5 {
                            x[(r, col)] *= sc;
                            x[(col, r)] *= sc;
                        }
                    }
                }
            }
            assert!(b.dotc(&(&x * &b)).re <= out.upper + 1e-12);
        }
    }
}
