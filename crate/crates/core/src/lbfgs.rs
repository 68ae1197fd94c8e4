//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Parameters are circuit angles, so no bounds are imposed.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_iter: usize,
    /// Stop once `‖∇f‖_∞` falls below this.
    pub gtol: f64,
    /// Stop once the relative decrease of `f` over one step falls below this
    /// (disabled at 0).
    pub ftol: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, c1: 1e-4, c2: 0.9, max_iter: 1000, gtol: 1e-6, ftol: 0.0, max_line_search: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// `(f, ‖∇f‖_∞)` at the start and after every accepted step.
    pub trace: Vec<(f64, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f` where `fg(x)` returns `(f(x), ∇f(x))`. `observe` sees the
/// iterate after every accepted step (and the starting point, as step 0).
pub fn minimize<F, O>(mut fg: F, x0: &[f64], opts: &LbfgsOptions, mut observe: O) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    O: FnMut(usize, &[f64], f64, &[f64]),
{
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut evaluations = 1;
    let mut trace = vec![(f, inf_norm(&g))];
    observe(0, &x, f, &g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let termination = loop {
        if inf_norm(&g) < opts.gtol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }

        // Two-loop recursion for d = −H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / inf_norm(&g).max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut dg = dot(&d, &g);
        if !(dg < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            dg = dot(&d, &g);
        }

        let ls = line_search(&mut fg, &x, f, &d, dg, opts, &mut evaluations);
        let Some((step, f_new, g_new)) = ls else {
            if !history.is_empty() {
                // Retry once from steepest descent before giving up.
                history.clear();
                continue;
            }
            break Termination::LineSearchFailed;
        };
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let f_old = f;
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
        trace.push((f, inf_norm(&g)));
        observe(iterations, &x, f, &g);
        if opts.ftol > 0.0 && (f_old - f) <= opts.ftol * f_old.abs().max(f.abs()).max(1.0) {
            break Termination::FunctionTolerance;
        }
    };
    LbfgsResult { x, f, iterations, evaluations, termination, trace }
}

/// Strong-Wolfe bracketing and zoom (Nocedal & Wright, Alg. 3.5/3.6) with
/// cubic interpolation. Returns the step with its value and gradient.
fn line_search<F>(
    fg: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    dg0: f64,
    opts: &LbfgsOptions,
    evaluations: &mut usize,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval = |a: f64| {
        *evaluations += 1;
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let (fa, ga) = fg(&xa);
        let dga = dot(&ga, d);
        (fa, ga, dga)
    };
    let mut a_prev = 0.0;
    let (mut f_prev, mut dg_prev) = (f0, dg0);
    let mut a = 1.0;
    for i in 0..opts.max_line_search {
        let (fa, ga, dga) = eval(a);
        if !fa.is_finite() {
            a = 0.5 * (a_prev + a);
            continue;
        }
        if fa > f0 + opts.c1 * a * dg0 || (i > 0 && fa >= f_prev) {
            return zoom(&mut eval, f0, dg0, (a_prev, f_prev, dg_prev), (a, fa, dga), opts);
        }
        if dga.abs() <= -opts.c2 * dg0 {
            return Some((a, fa, ga));
        }
        if dga >= 0.0 {
            return zoom(&mut eval, f0, dg0, (a, fa, dga), (a_prev, f_prev, dg_prev), opts);
        }
        a_prev = a;
        f_prev = fa;
        dg_prev = dga;
        a *= 2.0;
    }
    None
}

fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (a0, f0, d0) = a;
    let (a1, f1, d1) = b;
    let d1_ = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
    let disc = d1_ * d1_ - d0 * d1;
    if disc < 0.0 {
        return None;
    }
    let d2 = (a1 - a0).signum() * disc.sqrt();
    let t = a1 - (a1 - a0) * (d1 + d2 - d1_) / (d1 - d0 + 2.0 * d2);
    t.is_finite().then_some(t)
}

fn zoom<E>(
    eval: &mut E,
    f0: f64,
    dg0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    opts: &LbfgsOptions,
) -> Option<(f64, f64, Vec<f64>)>
where
    E: FnMut(f64) -> (f64, Vec<f64>, f64),
{
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..opts.max_line_search {
        let (left, right) = if lo.0 < hi.0 { (lo.0, hi.0) } else { (hi.0, lo.0) };
        let width = right - left;
        if width < 1e-14 * right.abs().max(1.0) {
            break;
        }
        let mut a = cubic_min(lo, hi).unwrap_or(0.5 * (left + right));
        // Keep the trial safely inside the bracket.
        if a < left + 0.1 * width || a > right - 0.1 * width {
            a = 0.5 * (left + right);
        }
        let (fa, ga, dga) = eval(a);
        if fa < f0 && best.as_ref().map_or(true, |b| fa < b.1) {
            best = Some((a, fa, ga.clone()));
        }
        if fa > f0 + opts.c1 * a * dg0 || fa >= lo.1 {
            hi = (a, fa, dga);
        } else {
            if dga.abs() <= -opts.c2 * dg0 {
                return Some((a, fa, ga));
            }
            if dga * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, dga);
        }
    }
    // Accept a sufficient-decrease point even if curvature was not met.
    best.filter(|(a, fa, _)| *fa <= f0 + opts.c1 * a * dg0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_quickly() {
        let a: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let fg = |x: &[f64]| {
            let f = x.iter().zip(&a).map(|(xi, ai)| (xi - ai).powi(2)).sum();
            let g = x.iter().zip(&a).map(|(xi, ai)| 2.0 * (xi - ai)).collect();
            (f, g)
        };
        let opts = LbfgsOptions { gtol: 1e-10, ..Default::default() };
        let r = minimize(fg, &[0.0; 10], &opts, |_, _, _, _| {});
        assert!(r.iterations <= 15, "{} iterations", r.iterations);
        assert!(r.x.iter().zip(&a).all(|(x, a)| (x - a).abs() < 1e-8));
    }

    #[test]
    fn rosenbrock() {
        let fg = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        };
        let opts = LbfgsOptions { gtol: 1e-10, max_iter: 200, ..Default::default() };
        let r = minimize(fg, &[-1.2, 1.0], &opts, |_, _, _, _| {});
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?} {:?}", r.x, r.termination);
        assert!(r.iterations <= 200);
    }

    #[test]
    fn constant_function_stops_immediately() {
        let r = minimize(|_: &[f64]| (3.0, vec![0.0, 0.0]), &[1.0, 2.0], &LbfgsOptions::default(), |_, _, _, _| {});
        assert_eq!(r.iterations, 0);
        assert_eq!(r.termination, Termination::GradientTolerance);
    }

    #[test]
    fn best_so_far_is_monotone() {
        let fg = |x: &[f64]| {
            let f = x[0].sin() * x[1].cos() + 0.1 * (x[0] * x[0] + x[1] * x[1]);
            (f, vec![x[0].cos() * x[1].cos() + 0.2 * x[0], -x[0].sin() * x[1].sin() + 0.2 * x[1]])
        };
        let r = minimize(fg, &[0.4, 2.5], &LbfgsOptions::default(), |_, _, _, _| {});
        assert!(r.trace.windows(2).all(|w| w[1].0 <= w[0].0));
    }
}
