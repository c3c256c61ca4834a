//! Minimum-norm points of polytopes.
//!
//! Solves `min ½‖δ‖² s.t. A δ + b >= 0` as a least-distance program: after
//! normalizing every row, the problem is reduced to the non-negative least
//! squares problem `min ‖E u - e_{d+1}‖, u >= 0` with `E = [Aᵀ; hᵀ]`
//! (Lawson–Hanson). A zero residual certifies infeasibility and the NNLS
//! solution is then a Farkas certificate; otherwise the minimizer and its
//! multipliers are read off the residual and polished on the active set.
//!
//! [`check_kkt`] and [`check_farkas`] verify results from the problem data
//! alone and share nothing with the solver.

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{axpy, dot, norm2, norm_inf, Qr};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub constraints: Polytope<T>,
}

impl<T: Scalar> QpProblem<T> {
    pub fn new(constraints: Polytope<T>) -> Result<Self> {
        let finite = constraints.a().all_finite() && constraints.b().iter().all(|b| b.is_finite());
        if !finite {
            return Err(Error::NonFinite("QP constraints".into()));
        }
        Ok(Self { constraints })
    }

    pub fn dim(&self) -> usize {
        self.constraints.dim()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.num_rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub status: QpStatus,
    /// Minimizer; empty when infeasible.
    pub delta: Vec<T>,
    /// One multiplier per row; empty when infeasible.
    pub multipliers: Vec<T>,
    /// Largest scaled KKT violation (optimal) or certificate residual
    /// (infeasible), as measured by the independent checkers.
    pub kkt_residual: T,
    /// `y >= 0` with `Aᵀ y = 0`, `bᵀ y = -1` when infeasible.
    pub certificate: Option<Vec<T>>,
    pub iterations: usize,
}

impl<T: Scalar> QpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    pub fn norm(&self) -> Option<T> {
        self.is_optimal().then(|| norm2(&self.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Cap on least-squares solves; `None` means `50 · (m + d)`.
    pub max_iterations: Option<usize>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: None,
        }
    }
}

/// Acceptance thresholds for [`check_kkt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktTolerances<T> {
    pub primal: T,
    pub stationarity: T,
    pub complementarity: T,
    pub multiplier: T,
}

impl<T: Scalar> Default for KktTolerances<T> {
    fn default() -> Self {
        let s = T::TOLERANCE_SCALE;
        Self {
            primal: T::lit(1e-8 * s),
            stationarity: T::lit(1e-8 * s),
            complementarity: T::lit(1e-7 * s),
            multiplier: T::lit(1e-10 * s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport<T> {
    /// `max_i max(0, -(A_i δ + b_i))`
    pub primal: T,
    /// `‖δ - Aᵀλ‖∞ / (1 + ‖δ‖∞)`
    pub stationarity: T,
    /// `max_i |λ_i (A_i δ + b_i)|`
    pub complementarity: T,
    /// `max_i max(0, -λ_i)`
    pub negative_multiplier: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn passes(&self, tol: &KktTolerances<T>) -> bool {
        self.primal <= tol.primal
            && self.stationarity <= tol.stationarity
            && self.complementarity <= tol.complementarity
            && self.negative_multiplier <= tol.multiplier
    }

    /// Largest violation relative to its tolerance.
    pub fn worst_ratio(&self, tol: &KktTolerances<T>) -> T {
        (self.primal / tol.primal)
            .max(self.stationarity / tol.stationarity)
            .max(self.complementarity / tol.complementarity)
            .max(self.negative_multiplier / tol.multiplier)
    }
}

/// KKT residuals of `(δ, λ)` for `min ½‖δ‖² s.t. A δ + b >= 0`.
pub fn check_kkt<T: Scalar>(problem: &QpProblem<T>, delta: &[T], lambda: &[T]) -> KktReport<T> {
    let p = &problem.constraints;
    assert_eq!(delta.len(), p.dim());
    assert_eq!(lambda.len(), p.num_rows());
    let mut primal = T::zero();
    let mut complementarity = T::zero();
    let mut negative_multiplier = T::zero();
    let mut at_lambda = vec![T::zero(); p.dim()];
    for i in 0..p.num_rows() {
        let slack = p.row_value(i, delta);
        primal = primal.max(-slack);
        complementarity = complementarity.max((lambda[i] * slack).abs());
        negative_multiplier = negative_multiplier.max(-lambda[i]);
        axpy(lambda[i], p.a().row(i), &mut at_lambda);
    }
    let diff: Vec<T> = delta.iter().zip(&at_lambda).map(|(&d, &g)| d - g).collect();
    let stationarity = norm_inf(&diff) / (T::one() + norm_inf(delta));
    KktReport {
        primal,
        stationarity,
        complementarity,
        negative_multiplier,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarkasReport<T> {
    /// `max_i max(0, -y_i)`
    pub negative_entry: T,
    /// `‖Aᵀ y‖∞ / ‖y‖∞`
    pub combination: T,
    /// `bᵀ y / ‖y‖∞`, negative for a valid certificate.
    pub offset: T,
}

impl<T: Scalar> FarkasReport<T> {
    pub fn certifies_infeasibility(&self, tol: T) -> bool {
        self.negative_entry <= tol && self.combination <= tol && self.offset < -tol
    }
}

/// Residuals of a Farkas certificate `y >= 0, Aᵀy = 0, bᵀy < 0`.
pub fn check_farkas<T: Scalar>(problem: &QpProblem<T>, y: &[T]) -> FarkasReport<T> {
    let p = &problem.constraints;
    assert_eq!(y.len(), p.num_rows());
    let scale = norm_inf(y).max(T::min_positive_value());
    let mut combo = vec![T::zero(); p.dim()];
    let mut negative_entry = T::zero();
    for (i, &yi) in y.iter().enumerate() {
        negative_entry = negative_entry.max(-yi / scale);
        axpy(yi, p.a().row(i), &mut combo);
    }
    FarkasReport {
        negative_entry,
        combination: norm_inf(&combo) / scale,
        offset: dot(y, p.b()) / scale,
    }
}

pub fn solve_min_norm<T: Scalar>(problem: &QpProblem<T>) -> Result<QpSolution<T>> {
    solve_min_norm_with(problem, &QpSettings::default())
}

/// Any feasible point (the minimum-norm one), or `None` if the polytope is
/// empty.
pub fn feasible_point<T: Scalar>(problem: &QpProblem<T>) -> Result<Option<Vec<T>>> {
    let sol = solve_min_norm(problem)?;
    Ok(sol.is_optimal().then_some(sol.delta))
}

pub fn solve_min_norm_with<T: Scalar>(
    problem: &QpProblem<T>,
    settings: &QpSettings,
) -> Result<QpSolution<T>> {
    let p = &problem.constraints;
    let (m, d) = (p.num_rows(), p.dim());
    let limit = settings.max_iterations.unwrap_or(50 * (m + d));
    let tol = KktTolerances::<T>::default();

    // Zero rows either hold trivially or prove infeasibility on their own.
    let mut rows = Vec::with_capacity(m);
    let mut norms = vec![T::zero(); m];
    for (i, norm) in norms.iter_mut().enumerate() {
        *norm = norm2(p.a().row(i));
        if *norm == T::zero() {
            if p.b()[i] < T::zero() {
                let mut y = vec![T::zero(); m];
                y[i] = -T::one() / p.b()[i];
                return Ok(infeasible(problem, y, 0));
            }
        } else {
            rows.push(i);
        }
    }

    // normalized rows G_j = A_i / ‖A_i‖, offsets h_j = -b_i / ‖A_i‖
    let h_raw: Vec<T> = rows.iter().map(|&i| -p.b()[i] / norms[i]).collect();
    let scale = h_raw.iter().fold(T::zero(), |acc, &v| acc.max(v));
    if scale <= T::zero() {
        // the origin is feasible
        let zero = vec![T::zero(); d];
        let lambda = vec![T::zero(); m];
        return Ok(optimal(problem, zero, lambda, 0, &tol));
    }
    let h: Vec<T> = h_raw.iter().map(|&v| v / scale).collect();
    let g: Vec<Vec<T>> = rows
        .iter()
        .map(|&i| p.a().row(i).iter().map(|&a| a / norms[i]).collect())
        .collect();

    let nnls = nnls_ldp(&g, &h, limit)?;
    let mut residual = nnls.residual;
    let last = residual[d];
    // ‖res‖² = -res_{d+1}; a vanishing residual means infeasible
    if -last <= T::lit(1e-11 * T::TOLERANCE_SCALE) {
        let hu: T = dot(&h, &nnls.u);
        let mut y = vec![T::zero(); m];
        for (j, &i) in rows.iter().enumerate() {
            y[i] = nnls.u[j] / (norms[i] * scale * hu);
        }
        return Ok(infeasible(problem, y, nnls.iterations));
    }

    // raw LDP solution: δ̂ = -res_{1..d} / res_{d+1}, λ̂ = u / (-res_{d+1})
    residual.truncate(d);
    let raw_delta: Vec<T> = residual.iter().map(|&r| -r / last).collect();
    let raw_lambda: Vec<T> = nnls.u.iter().map(|&u| u / -last).collect();
    let unscale = |delta_hat: &[T], lambda_hat: &[T]| {
        let delta: Vec<T> = delta_hat.iter().map(|&v| v * scale).collect();
        let mut lambda = vec![T::zero(); m];
        for (j, &i) in rows.iter().enumerate() {
            lambda[i] = lambda_hat[j] * scale / norms[i];
        }
        (delta, lambda)
    };
    let (delta, lambda) = unscale(&raw_delta, &raw_lambda);
    let mut best = optimal(problem, delta, lambda, nnls.iterations, &tol);

    if let Some((pd, pl)) = polish(&g, &h, &nnls.u) {
        let (delta, lambda) = unscale(&pd, &pl);
        let polished = optimal(problem, delta, lambda, nnls.iterations, &tol);
        if polished.kkt_residual <= best.kkt_residual {
            best = polished;
        }
    }
    Ok(best)
}

fn optimal<T: Scalar>(
    problem: &QpProblem<T>,
    delta: Vec<T>,
    multipliers: Vec<T>,
    iterations: usize,
    tol: &KktTolerances<T>,
) -> QpSolution<T> {
    let report = check_kkt(problem, &delta, &multipliers);
    QpSolution {
        status: QpStatus::Optimal,
        delta,
        multipliers,
        kkt_residual: report.worst_ratio(tol),
        certificate: None,
        iterations,
    }
}

fn infeasible<T: Scalar>(problem: &QpProblem<T>, y: Vec<T>, iterations: usize) -> QpSolution<T> {
    let report = check_farkas(problem, &y);
    QpSolution {
        status: QpStatus::Infeasible,
        delta: Vec::new(),
        multipliers: Vec::new(),
        kkt_residual: report.combination.max(report.negative_entry),
        certificate: Some(y),
        iterations,
    }
}

struct NnlsOutcome<T> {
    u: Vec<T>,
    /// `E u - e_{d+1}`
    residual: Vec<T>,
    iterations: usize,
}

/// Lawson–Hanson NNLS for `min ‖E u - e_{d+1}‖, u >= 0` where column `j` of
/// `E` is `(g_j, h_j)`.
fn nnls_ldp<T: Scalar>(g: &[Vec<T>], h: &[T], limit: usize) -> Result<NnlsOutcome<T>> {
    let m = g.len();
    let d = g.first().map_or(0, Vec::len);
    let n = d + 1;
    let column = |j: usize| -> Vec<T> {
        let mut c = g[j].clone();
        c.push(h[j]);
        c
    };
    let columns: Vec<Vec<T>> = (0..m).map(column).collect();
    let residual_of = |u: &[T]| -> Vec<T> {
        let mut r = vec![T::zero(); n];
        r[d] = -T::one();
        for (c, &uj) in columns.iter().zip(u) {
            if uj != T::zero() {
                axpy(uj, c, &mut r);
            }
        }
        r
    };
    let dual_tol = T::lit(1e-13 * T::TOLERANCE_SCALE) * T::lit((m.max(n)) as f64).sqrt();
    let dependent_tol = T::lit(1e-12 * T::TOLERANCE_SCALE);

    let mut u = vec![T::zero(); m];
    let mut passive: Vec<usize> = Vec::new();
    let mut in_passive = vec![false; m];
    let mut iterations = 0;
    let mut rejected = vec![false; m];

    loop {
        let r = residual_of(&u);
        // w = -Eᵀ r is the negative gradient
        let mut best: Option<(usize, T)> = None;
        for j in 0..m {
            if in_passive[j] || rejected[j] {
                continue;
            }
            let w = -dot(&columns[j], &r);
            if w > dual_tol && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        let Some((t, _)) = best else {
            return Ok(NnlsOutcome {
                residual: r,
                u,
                iterations,
            });
        };
        passive.push(t);
        in_passive[t] = true;

        let mut first = true;
        loop {
            iterations += 1;
            if iterations > limit {
                let primal = norm2(&residual_of(&u)).to_f64_lossy();
                return Err(Error::IterationLimit {
                    limit,
                    primal_residual: primal,
                    dual_residual: dual_tol.to_f64_lossy(),
                });
            }
            let z = if passive.len() <= n {
                let cols: Vec<Vec<T>> = passive.iter().map(|&j| columns[j].clone()).collect();
                let qr = Qr::new(&cols);
                let mut rhs = vec![T::zero(); n];
                rhs[d] = T::one();
                (qr.rcond_estimate() > dependent_tol).then(|| qr.least_squares(&rhs))
            } else {
                None
            };
            if first {
                let added_ok = z.as_ref().is_some_and(|z| *z.last().unwrap() > T::zero());
                if !added_ok {
                    // numerically dependent or wrong-signed: drop it for this round
                    passive.pop();
                    in_passive[t] = false;
                    rejected[t] = true;
                    break;
                }
                first = false;
            }
            let z = match z {
                Some(z) => z,
                None => break,
            };
            if z.iter().all(|&v| v > T::zero()) {
                for (k, &j) in passive.iter().enumerate() {
                    u[j] = z[k];
                }
                rejected.iter_mut().for_each(|r| *r = false);
                break;
            }
            // step back to the boundary of the feasible orthant
            let mut alpha = T::one();
            let mut blocking = None;
            for (k, &j) in passive.iter().enumerate() {
                if z[k] <= T::zero() {
                    let ratio = u[j] / (u[j] - z[k]);
                    if blocking.is_none() || ratio < alpha {
                        alpha = ratio;
                        blocking = Some(j);
                    }
                }
            }
            for (k, &j) in passive.iter().enumerate() {
                let uj = u[j];
                u[j] = uj + alpha * (z[k] - uj);
            }
            if let Some(j) = blocking {
                u[j] = T::zero();
            }
            passive.retain(|&j| {
                let keep = u[j] > T::epsilon() * T::lit(16.0);
                if !keep {
                    u[j] = T::zero();
                    in_passive[j] = false;
                }
                keep
            });
            if passive.is_empty() {
                break;
            }
        }
    }
}

/// Re-solves the equality-constrained least-norm problem on the rows that
/// carry positive NNLS weight: `min ‖δ‖ s.t. G_P δ = h_P`.
fn polish<T: Scalar>(g: &[Vec<T>], h: &[T], u: &[T]) -> Option<(Vec<T>, Vec<T>)> {
    let active: Vec<usize> = (0..u.len()).filter(|&j| u[j] > T::zero()).collect();
    let d = g.first()?.len();
    if active.is_empty() || active.len() > d {
        return None;
    }
    let cols: Vec<Vec<T>> = active.iter().map(|&j| g[j].clone()).collect();
    let qr = Qr::new(&cols);
    if qr.rcond_estimate() <= T::lit(1e-12 * T::TOLERANCE_SCALE) {
        return None;
    }
    let rhs: Vec<T> = active.iter().map(|&j| h[j]).collect();
    let y = qr.solve_rt(&rhs);
    let mu = qr.solve_r(&y);
    if mu.iter().any(|&v| v < T::zero()) {
        return None;
    }
    let mut delta = vec![T::zero(); d];
    delta[..y.len()].copy_from_slice(&y);
    qr.apply_q(&mut delta);
    let mut lambda = vec![T::zero(); u.len()];
    for (k, &j) in active.iter().enumerate() {
        lambda[j] = mu[k];
    }
    Some((delta, lambda))
}
