//! Fixed-step Runge–Kutta and Hermite interpolation on small static vectors.

use nalgebra::SVector;

/// One classical RK4 step of length `h` from `(t, y)`.
pub fn rk4_step<const N: usize, E>(
    t: f64,
    y: &SVector<f64, N>,
    h: f64,
    mut f: impl FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
) -> Result<SVector<f64, N>, E> {
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(y + k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Cubic Hermite interpolant on `[t0, t1]` from endpoint values and slopes.
pub fn hermite<const N: usize>(
    t0: f64,
    y0: &SVector<f64, N>,
    d0: &SVector<f64, N>,
    t1: f64,
    y1: &SVector<f64, N>,
    d1: &SVector<f64, N>,
    t: f64,
) -> SVector<f64, N> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}

/// Sorted union of `0, h, 2h, …`, the interior `knots` and `t_f`. Points
/// closer than `1e-9·h` are merged.
pub fn time_grid(t_f: f64, h: f64, knots: &[f64]) -> Vec<f64> {
    let n = (t_f / h).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * h).filter(|t| *t < t_f).collect();
    grid.extend(knots.iter().copied().filter(|t| *t > 0.0 && *t < t_f));
    grid.push(t_f);
    grid.sort_by(f64::total_cmp);
    let tol = 1e-9 * h;
    let mut out: Vec<f64> = Vec::with_capacity(grid.len());
    for t in grid {
        match out.last_mut() {
            Some(last) if t - *last <= tol => {
                // keep an exact knot or t_f over a grid multiple
                if t == t_f || knots.contains(&t) {
                    *last = t;
                }
            }
            _ => out.push(t),
        }
    }
    out
}
