//! Shared helpers for the integration and acceptance suites.

#![allow(dead_code)]

/// Brute-force 2D grid minimization with local refinement: scans the box
/// at `resolution`, then zooms twice by a factor of 100 around the best
/// cell. Independent of every solver code path.
pub fn grid_minimize_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: f64,
) -> ((f64, f64), f64) {
    let scan = |x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, step: f64| -> ((f64, f64), f64) {
        let nx = ((x_hi - x_lo) / step).round() as usize;
        let ny = ((y_hi - y_lo) / step).round() as usize;
        let mut best = ((x_lo, y_lo), f(x_lo, y_lo));
        for i in 0..=nx {
            let x = x_lo + (x_hi - x_lo) * i as f64 / nx.max(1) as f64;
            for j in 0..=ny {
                let y = y_lo + (y_hi - y_lo) * j as f64 / ny.max(1) as f64;
                let v = f(x, y);
                if v < best.1 {
                    best = ((x, y), v);
                }
            }
        }
        best
    };

    let mut step = resolution;
    let ((mut bx, mut by), mut bv) = scan(x_range.0, x_range.1, y_range.0, y_range.1, step);
    for _ in 0..2 {
        let next = step / 100.0;
        let x_lo = (bx - step).max(x_range.0);
        let x_hi = (bx + step).min(x_range.1);
        let y_lo = (by - step).max(y_range.0);
        let y_hi = (by + step).min(y_range.1);
        let ((nx, ny), nv) = scan(x_lo, x_hi, y_lo, y_hi, next);
        if nv < bv {
            bx = nx;
            by = ny;
            bv = nv;
        }
        step = next;
    }
    ((bx, by), bv)
}

/// SplitMix64: small deterministic generator for randomized test points.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `(lo, hi)`, biased off the endpoints.
    pub fn in_interval(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (0.05 + 0.9 * self.next_f64())
    }
}

/// A strictly interior point of a relaxation's box, jittered by `rng`.
pub fn random_interior_point(relax: &pathstable::Relaxation, rng: &mut SplitMix64) -> Vec<f64> {
    relax
        .lower()
        .iter()
        .zip(relax.upper().iter())
        .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => rng.in_interval(lo, hi),
            (true, false) => lo + 0.3 + 2.0 * rng.next_f64(),
            (false, true) => hi - 0.3 - 2.0 * rng.next_f64(),
            (false, false) => 40.0 * (rng.next_f64() - 0.5),
        })
        .collect()
}
