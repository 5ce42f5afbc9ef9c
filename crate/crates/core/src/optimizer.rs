//! BFGS minimization of the cost over the entries of the transcoding matrix.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::TranscodingMatrix;
use crate::cost::{CostBreakdown, Problem};
use crate::error::{Error, Result};
use crate::io::matrix_file::import_matrix;
use crate::linalg::Matrix;
use crate::real::Real;

/// Starting point of the optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Init {
    /// `remap-plus-noise` with scale 0.05 when a remapping baseline exists,
    /// otherwise `random` with scale 0.5.
    Auto,
    Remap,
    Random { scale: f64 },
    RemapPlusNoise { scale: f64 },
    /// Matrix file with the transcoder shape.
    Given { path: PathBuf },
    #[serde(skip)]
    Matrix(Matrix<f64>),
}

impl Default for Init {
    fn default() -> Self {
        Init::Auto
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    pub init: Init,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub cost_tolerance: f64,
    pub seed: u64,
    /// Independent runs with seeds `seed, seed + 1, …`; the lowest cost wins.
    pub restarts: usize,
    /// Log iteration, cost and gradient norm at info level.
    pub progress: bool,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            init: Init::Auto,
            max_iterations: 2000,
            gradient_tolerance: 1e-7,
            cost_tolerance: 1e-10,
            seed: 0,
            restarts: 1,
            progress: false,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) || !self.gradient_tolerance.is_finite() {
            return Err(Error::config("gradient_tolerance", "must be positive"));
        }
        if !(self.cost_tolerance > 0.0) || !self.cost_tolerance.is_finite() {
            return Err(Error::config("cost_tolerance", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        match self.init {
            Init::Random { scale } | Init::RemapPlusNoise { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(Error::config("init.scale", "must be a non-negative number"))
            }
            _ => Ok(()),
        }
    }
}

/// Matrix of uniform entries in `[−scale, scale]`, drawn row-major.
pub fn random_matrix<T: Real>(rows: usize, cols: usize, seed: u64, scale: f64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| {
        let x: f64 = if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 };
        T::lit(x)
    })
}

pub fn initialize<T: Real>(config: &OptimizationConfig, problem: &Problem<T>) -> Result<Matrix<T>> {
    let (n, m) = problem.shape();
    let remap = || {
        problem.baseline.as_ref().map(|b| b.entries.clone()).ok_or_else(|| {
            Error::config("optimizer.init", "remap initialization needs input channel directions")
        })
    };
    let t = match &config.init {
        Init::Auto => match &problem.baseline {
            Some(b) => &b.entries + &random_matrix(n, m, config.seed, 0.05),
            None => random_matrix(n, m, config.seed, 0.5),
        },
        Init::Remap => remap()?,
        Init::Random { scale } => random_matrix(n, m, config.seed, *scale),
        Init::RemapPlusNoise { scale } => &remap()? + &random_matrix(n, m, config.seed, *scale),
        Init::Given { path } => import_matrix(path)?.to_matrix(),
        Init::Matrix(given) => given.cast(),
    };
    if t.shape() != (n, m) {
        return Err(Error::Dimension(format!("initial transcoder is {:?}, expected {:?}", t.shape(), (n, m))));
    }
    if !t.is_finite() {
        return Err(Error::Numeric("non-finite initial transcoder".into()));
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    CostTolerance,
    IterationLimit,
    LineSearchFailure,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradientTolerance | StopReason::CostTolerance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::CostTolerance => "cost-tolerance",
            StopReason::IterationLimit => "iteration-limit",
            StopReason::LineSearchFailure => "line-search-failure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub cost: T,
    pub gradient_norm: T,
}

#[derive(Clone, Debug)]
pub struct OptimizationReport<T> {
    pub final_t: TranscodingMatrix<T>,
    pub initial: CostBreakdown<T>,
    pub final_cost: CostBreakdown<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub gradient_norm_final: T,
    pub seed: u64,
    pub history: Vec<IterationRecord<T>>,
    pub wall_time_seconds: f64,
}

impl<T: Real> OptimizationReport<T> {
    /// Line-oriented progress log: iteration, total cost, gradient norm.
    pub fn progress_log(&self) -> String {
        let mut out = String::from("# iteration\tcost\tgradient_norm\n");
        for r in &self.history {
            out.push_str(&format!(
                "{}\t{:.16e}\t{:.16e}\n",
                r.iteration,
                r.cost.to_f64_lossy(),
                r.gradient_norm.to_f64_lossy()
            ));
        }
        out
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 40;
const STALL_WINDOW: usize = 5;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Cost and gradient over flattened variables, counting evaluations.
struct Objective<'a, T> {
    problem: &'a Problem<T>,
    shape: (usize, usize),
    evaluations: usize,
}

impl<T: Real> Objective<'_, T> {
    fn eval(&mut self, x: &[T]) -> Result<(CostBreakdown<T>, Vec<T>)> {
        self.evaluations += 1;
        let t = Matrix::from_row_major(self.shape.0, self.shape.1, x.to_vec())?;
        let (b, g) = self.problem.cost_gradient(&t)?;
        Ok((b, g.into_vec()))
    }
}

struct Point<T> {
    x: Vec<T>,
    cost: CostBreakdown<T>,
    grad: Vec<T>,
}

impl<T: Real> Point<T> {
    fn f(&self) -> T {
        self.cost.total
    }
}

fn finite<T: Real>(p: &Point<T>) -> bool {
    p.f().is_finite() && p.grad.iter().all(|g| g.is_finite())
}

/// Strong Wolfe line search along `dir` from `x0`. Returns the accepted
/// point, or `None` when no step with sufficient decrease was found.
fn line_search<T: Real>(obj: &mut Objective<'_, T>, x0: &Point<T>, dir: &[T], alpha0: T) -> Result<Option<Point<T>>> {
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let f0 = x0.f();
    let d0 = dot(&x0.grad, dir);
    let at = |alpha: T| -> Vec<T> { x0.x.iter().zip(dir).map(|(&x, &d)| x + alpha * d).collect() };
    let mut probe = |obj: &mut Objective<'_, T>, alpha: T| -> Result<(Point<T>, T)> {
        let x = at(alpha);
        let (cost, grad) = obj.eval(&x)?;
        let d = dot(&grad, dir);
        Ok((Point { x, cost, grad }, d))
    };

    let mut prev_alpha = T::zero();
    let mut prev_f = f0;
    let mut prev_d = d0;
    let mut prev_point: Option<Point<T>> = None;
    let mut alpha = alpha0;
    for i in 0..MAX_LINE_SEARCH {
        let (pt, d) = probe(obj, alpha)?;
        let f = pt.f();
        if !finite(&pt) || f > f0 + c1 * alpha * d0 || (i > 0 && f >= prev_f) {
            let lo = (prev_alpha, prev_f, prev_d, prev_point);
            let hi = (alpha, if f.is_finite() { f } else { T::max_value() }, if d.is_finite() { d } else { T::zero() });
            return zoom(obj, x0, dir, lo, hi, &mut probe);
        }
        if d.abs() <= -c2 * d0 {
            return Ok(Some(pt));
        }
        if d >= T::zero() {
            let lo = (alpha, f, d, Some(pt));
            let hi = (prev_alpha, prev_f, prev_d);
            return zoom(obj, x0, dir, lo, hi, &mut probe);
        }
        prev_alpha = alpha;
        prev_f = f;
        prev_d = d;
        prev_point = Some(pt);
        alpha = alpha * T::lit(2.0);
    }
    Ok(prev_point.filter(|p| p.f() < f0))
}

type Lo<T> = (T, T, T, Option<Point<T>>);

fn zoom<T: Real>(
    obj: &mut Objective<'_, T>,
    x0: &Point<T>,
    dir: &[T],
    lo: Lo<T>,
    hi: (T, T, T),
    probe: &mut impl FnMut(&mut Objective<'_, T>, T) -> Result<(Point<T>, T)>,
) -> Result<Option<Point<T>>> {
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let f0 = x0.f();
    let d0 = dot(&x0.grad, dir);
    let (mut a_lo, mut f_lo, mut d_lo, mut p_lo) = lo;
    let (mut a_hi, mut f_hi, mut d_hi) = hi;
    for _ in 0..MAX_LINE_SEARCH {
        let width = a_hi - a_lo;
        if width.abs() <= T::epsilon() * a_lo.abs().max(T::one()) {
            break;
        }
        let alpha = cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
        let (pt, d) = probe(obj, alpha)?;
        let f = pt.f();
        if !finite(&pt) || f > f0 + c1 * alpha * d0 || f >= f_lo {
            a_hi = alpha;
            f_hi = if f.is_finite() { f } else { T::max_value() };
            d_hi = if d.is_finite() { d } else { T::zero() };
            continue;
        }
        if d.abs() <= -c2 * d0 {
            return Ok(Some(pt));
        }
        if d * (a_hi - a_lo) >= T::zero() {
            a_hi = a_lo;
            f_hi = f_lo;
            d_hi = d_lo;
        }
        a_lo = alpha;
        f_lo = f;
        d_lo = d;
        p_lo = Some(pt);
    }
    // best point found with sufficient decrease, even without curvature
    Ok(p_lo.filter(|p| p.f() < f0))
}

/// Minimizer of the cubic through both end points, kept inside the middle
/// 80% of the bracket; bisection when the cubic is unusable.
fn cubic_step<T: Real>(a: T, fa: T, da: T, b: T, fb: T, db: T) -> T {
    let lo = a.min(b);
    let hi = a.max(b);
    let margin = T::lit(0.1) * (hi - lo);
    let mid = (a + b) * T::lit(0.5);
    if fb == T::max_value() {
        return mid;
    }
    let d1 = da + db - T::lit(3.0) * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < T::zero() {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + T::lit(2.0) * d2;
    if denom == T::zero() {
        return mid;
    }
    let x = b - (b - a) * (db + d2 - d1) / denom;
    if !x.is_finite() || x < lo + margin || x > hi - margin {
        mid
    } else {
        x
    }
}

/// Dense inverse-Hessian approximation.
struct InverseHessian<T> {
    n: usize,
    h: Vec<T>,
    fresh: bool,
}

impl<T: Real> InverseHessian<T> {
    fn new(n: usize) -> Self {
        let mut me = Self { n, h: vec![T::zero(); n * n], fresh: true };
        me.reset();
        me
    }

    fn reset(&mut self) {
        self.h.iter_mut().for_each(|x| *x = T::zero());
        for i in 0..self.n {
            self.h[i * self.n + i] = T::one();
        }
        self.fresh = true;
    }

    fn apply(&self, v: &[T]) -> Vec<T> {
        self.h.chunks_exact(self.n).map(|row| dot(row, v)).collect()
    }

    /// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`; skipped unless `sᵀy` is
    /// sufficiently positive.
    fn update(&mut self, s: &[T], y: &[T]) {
        let sy = dot(s, y);
        let yy = dot(y, y);
        if !(sy > T::lit(1e-10) * norm(s) * yy.sqrt()) {
            return;
        }
        if self.fresh {
            let gamma = sy / yy;
            self.h.iter_mut().for_each(|x| *x *= gamma);
            self.fresh = false;
        }
        let rho = T::one() / sy;
        let hy = self.apply(y);
        let yhy = dot(y, &hy);
        let k = rho * rho * yhy + rho;
        let n = self.n;
        for i in 0..n {
            let row = &mut self.h[i * n..(i + 1) * n];
            let (si, hyi) = (s[i], hy[i]);
            for j in 0..n {
                row[j] += k * si * s[j] - rho * (si * hy[j] + hyi * s[j]);
            }
        }
    }
}

/// Runs BFGS from the initialization described by `config`.
pub fn optimize<T: Real>(problem: &Problem<T>, config: &OptimizationConfig) -> Result<OptimizationReport<T>> {
    config.validate()?;
    let t0 = initialize(config, problem)?;
    optimize_from(problem, config, t0)
}

pub fn optimize_from<T: Real>(problem: &Problem<T>, config: &OptimizationConfig, t0: Matrix<T>) -> Result<OptimizationReport<T>> {
    let start = Instant::now();
    let shape = problem.shape();
    let mut obj = Objective { problem, shape, evaluations: 0 };
    let x0 = t0.into_vec();
    let (c0, g0) = obj.eval(&x0)?;
    if !c0.total.is_finite() {
        return Err(Error::Numeric("initial cost is not finite".into()));
    }
    let initial = c0;
    let mut cur = Point { x: x0, cost: c0, grad: g0 };
    let n = cur.x.len();
    let gtol = T::lit(config.gradient_tolerance);
    let ctol = T::lit(config.cost_tolerance);
    let mut hess = InverseHessian::new(n);
    let mut history = vec![IterationRecord { iteration: 0, cost: cur.f(), gradient_norm: norm(&cur.grad) }];
    let mut reason = StopReason::IterationLimit;
    let mut iterations = 0;

    if norm(&cur.grad) < gtol {
        reason = StopReason::GradientTolerance;
    } else {
        while iterations < config.max_iterations {
            let gnorm = norm(&cur.grad);
            let mut dir: Vec<T> = hess.apply(&cur.grad).into_iter().map(|v| -v).collect();
            let slope = dot(&dir, &cur.grad);
            if !(slope < T::zero()) || dir.iter().any(|d| !d.is_finite()) {
                hess.reset();
                dir = cur.grad.iter().map(|&g| -g).collect();
            }
            let steepest = hess.fresh;
            let alpha0 = if steepest { T::one().min(T::one() / gnorm) } else { T::one() };
            let mut next = line_search(&mut obj, &cur, &dir, alpha0)?;
            if next.is_none() && !steepest {
                hess.reset();
                dir = cur.grad.iter().map(|&g| -g).collect();
                next = line_search(&mut obj, &cur, &dir, T::one().min(T::one() / gnorm))?;
            }
            let Some(next) = next else {
                reason = StopReason::LineSearchFailure;
                break;
            };
            iterations += 1;
            let s: Vec<T> = next.x.iter().zip(&cur.x).map(|(&a, &b)| a - b).collect();
            let y: Vec<T> = next.grad.iter().zip(&cur.grad).map(|(&a, &b)| a - b).collect();
            hess.update(&s, &y);
            cur = next;
            let gnorm = norm(&cur.grad);
            history.push(IterationRecord { iteration: iterations, cost: cur.f(), gradient_norm: gnorm });
            if config.progress {
                log::info!("iter {iterations:5}  cost {:.10e}  |g| {:.3e}", cur.f().to_f64_lossy(), gnorm.to_f64_lossy());
            }
            if gnorm < gtol {
                reason = StopReason::GradientTolerance;
                break;
            }
            if history.len() > STALL_WINDOW {
                let old = history[history.len() - 1 - STALL_WINDOW].cost;
                let new = cur.f();
                let scale = old.abs().max(new.abs()).max(T::min_positive_value());
                if (old - new).abs() / scale < ctol {
                    reason = StopReason::CostTolerance;
                    break;
                }
            }
        }
    }

    let final_t = problem.transcoder(Matrix::from_row_major(shape.0, shape.1, cur.x)?)?;
    Ok(OptimizationReport {
        final_t,
        initial,
        final_cost: cur.cost,
        iterations,
        evaluations: obj.evaluations,
        converged: reason.converged(),
        stop_reason: reason,
        gradient_norm_final: norm(&cur.grad),
        seed: config.seed,
        history,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs `config.restarts` independent optimizations on scoped threads and
/// returns the one with the lowest final cost (lowest seed on ties).
pub fn optimize_with_restarts<T: Real>(problem: &Problem<T>, config: &OptimizationConfig) -> Result<OptimizationReport<T>> {
    config.validate()?;
    if config.restarts == 1 {
        return optimize(problem, config);
    }
    let configs: Vec<OptimizationConfig> = (0..config.restarts as u64)
        .map(|k| OptimizationConfig { seed: config.seed.wrapping_add(k), restarts: 1, ..config.clone() })
        .collect();
    let results: Vec<Result<OptimizationReport<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || optimize(problem, c))).collect();
        handles.into_iter().map(|h| h.join().expect("optimizer thread panicked")).collect()
    });
    let mut best: Option<OptimizationReport<T>> = None;
    for r in results {
        let r = r?;
        let better = match &best {
            None => true,
            Some(b) => r.final_cost.total < b.final_cost.total,
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}
