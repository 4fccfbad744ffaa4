use std::f64::consts::TAU;

use rayon::prelude::*;

/// Grid-doubling quadrature over the torus `T^k` with normalized Haar measure.
#[derive(Clone, Debug)]
pub struct GridOptions {
    /// Starting resolution per circle factor.
    pub start: usize,
    /// Stop once successive estimates differ by less than this.
    pub tolerance: f64,
    /// Largest number of grid points a single level may use.
    pub max_points: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { start: 256, tolerance: 1e-8, max_points: 1 << 24 }
    }
}

/// Outcome of [`integrate`]. The first `primary` outputs drive the stopping
/// rule; the rest are evaluated on the same grids and extrapolated the same way.
#[derive(Clone, Debug)]
pub struct GridResult {
    pub values: Vec<f64>,
    /// Error estimate per output at the final level.
    pub errors: Vec<f64>,
    /// Raw grid means per level, outer index = level.
    pub levels: Vec<Vec<f64>>,
    /// Final resolution per circle factor.
    pub resolution: usize,
    pub converged: bool,
}

/// Aitken's delta-squared extrapolation of three successive values.
pub fn aitken(s0: f64, s1: f64, s2: f64) -> f64 {
    let d1 = s1 - s0;
    let d2 = s2 - s1;
    let denom = d2 - d1;
    // Only extrapolate a geometric-looking tail; otherwise trust the last value.
    if denom.abs() <= 1e-14 * (s2.abs() + 1.0) || d1 == 0.0 || d2 / d1 <= 0.0 || d2 / d1 >= 1.0 {
        s2
    } else {
        s2 - d2 * d2 / denom
    }
}

/// Effective starting resolution under the point budget: leaves room for at
/// least three levels.
pub fn effective_start(k: usize, start: usize, max_points: usize) -> usize {
    if k == 0 {
        return 1;
    }
    let log_budget = (usize::BITS - 1 - max_points.max(1).leading_zeros()) as usize;
    let cap_log = (log_budget / k).saturating_sub(2).max(2);
    start.max(4).min(1 << cap_log)
}

/// Mean of each output of `f` over the midpoint grid of resolution `m`.
pub fn grid_mean<F>(k: usize, m: usize, outputs: usize, f: &F) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let total = m.pow(k as u32);
    let chunk = 4096.min(total.max(1));
    let chunks = total.div_ceil(chunk);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; outputs];
            let mut out = vec![0.0; outputs];
            let mut theta = vec![0.0; k];
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                let mut rest = idx;
                for t in theta.iter_mut() {
                    let j = rest % m;
                    rest /= m;
                    *t = TAU * (j as f64 + 0.5) / m as f64;
                }
                f(&theta, &mut out);
                for (a, o) in acc.iter_mut().zip(&out) {
                    *a += o;
                }
            }
            acc
        })
        .collect();
    let mut sum = vec![0.0; outputs];
    for p in partial {
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / total as f64).collect()
}

/// Integrates `f: T^k -> R^outputs` by resolution doubling with Aitken
/// acceleration until the primary outputs stabilize within the tolerance or
/// the point budget is exhausted.
pub fn integrate<F>(k: usize, outputs: usize, primary: usize, opts: &GridOptions, f: F) -> GridResult
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if k == 0 {
        let mut out = vec![0.0; outputs];
        f(&[], &mut out);
        return GridResult {
            errors: vec![0.0; outputs],
            levels: vec![out.clone()],
            values: out,
            resolution: 1,
            converged: true,
        };
    }
    let mut m = effective_start(k, opts.start, opts.max_points);
    let mut levels: Vec<Vec<f64>> = Vec::new();
    let mut extrapolated: Vec<Vec<f64>> = Vec::new();
    loop {
        levels.push(grid_mean(k, m, outputs, &f));
        let l = levels.len();
        if l >= 3 {
            extrapolated.push(
                (0..outputs).map(|o| aitken(levels[l - 3][o], levels[l - 2][o], levels[l - 1][o])).collect(),
            );
        }
        if l >= 2 {
            let errors: Vec<f64> = (0..outputs)
                .map(|o| {
                    let plain = (levels[l - 1][o] - levels[l - 2][o]).abs();
                    match extrapolated.len() {
                        n if n >= 2 => plain.min((extrapolated[n - 1][o] - extrapolated[n - 2][o]).abs()),
                        _ => plain,
                    }
                })
                .collect();
            let values = extrapolated.last().unwrap_or(&levels[l - 1]).clone();
            let converged = errors[..primary.min(outputs)].iter().all(|e| *e < opts.tolerance);
            let next = (2 * m).checked_pow(k as u32);
            if converged || next.is_none_or(|p| p > opts.max_points) {
                return GridResult { values, errors, levels, resolution: m, converged };
            }
        }
        m *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrand_converges_fast() {
        // mean of log|z - 2| over the circle is log 2
        let r = integrate(1, 1, 1, &GridOptions::default(), |th, out| {
            out[0] = (5.0 - 4.0 * th[0].cos()).sqrt().ln();
        });
        assert!(r.converged);
        assert!((r.values[0] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn aitken_removes_geometric_error() {
        // log|1 - z| has midpoint error exactly log(2)/M
        let r = integrate(1, 1, 1, &GridOptions { tolerance: 1e-10, ..Default::default() }, |th, out| {
            out[0] = (2.0 - 2.0 * th[0].cos()).sqrt().ln();
        });
        assert!(r.converged);
        assert!(r.values[0].abs() < 1e-10, "{}", r.values[0]);
    }

    #[test]
    fn start_shrinks_in_higher_rank() {
        assert_eq!(effective_start(1, 256, 1 << 24), 256);
        assert_eq!(effective_start(2, 256, 1 << 24), 256);
        assert_eq!(effective_start(3, 256, 1 << 24), 64);
    }

    #[test]
    fn reports_nonconvergence() {
        let r = integrate(1, 1, 1, &GridOptions { max_points: 1 << 12, tolerance: 1e-14, ..Default::default() }, |th, out| {
            out[0] = (th[0] - std::f64::consts::PI).abs().powf(-0.9);
        });
        assert!(!r.converged);
    }
}
