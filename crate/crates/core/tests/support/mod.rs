//! Independent reference implementations used as test oracles. None of
//! these call into the library's own algorithms.

#![allow(dead_code)]

/// Euclidean projection of `v` onto `{a : sum a = 1, 0 <= a_i <= cap}`.
///
/// The map `tau -> sum clamp(v_i - tau, 0, cap)` is piecewise linear and
/// non-increasing; its breakpoints are `v_i` and `v_i - cap`. Walk them in
/// order and solve the linear piece that crosses 1.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| -> f64 { v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum() };
    let mut knots: Vec<f64> = v.iter().flat_map(|&x| [x, x - cap]).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    // mass is non-increasing in tau: find adjacent knots with mass(lo) >= 1 >= mass(hi).
    let mut tau = knots[0];
    for pair in knots.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let (mlo, mhi) = (mass(lo), mass(hi));
        if mlo >= 1.0 && mhi <= 1.0 {
            tau = if mlo == mhi { lo } else { lo + (mlo - 1.0) * (hi - lo) / (mlo - mhi) };
            break;
        }
    }
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect()
}

/// `0.5 * a' Q a` on a dense row-major matrix.
pub fn quadratic(q: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * q[i * n + j] * a[j];
        }
    }
    0.5 * s
}

/// Frank-Wolfe gap `g'(x - s)` where `s` minimizes `g's` over the capped
/// simplex (fill the smallest gradient entries up to `cap` first). For a
/// convex objective it bounds `f(x) - f*` from above.
pub fn duality_gap(grad: &[f64], x: &[f64], cap: f64) -> f64 {
    let mut order: Vec<usize> = (0..grad.len()).collect();
    order.sort_by(|&i, &j| grad[i].total_cmp(&grad[j]));
    let mut left = 1.0f64;
    let mut gs = 0.0;
    for i in order {
        let take = left.min(cap);
        gs += take * grad[i];
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    let gx: f64 = grad.iter().zip(x).map(|(g, a)| g * a).sum();
    gx - gs
}

/// Minimizes `0.5 a'Qa` over the capped simplex with accelerated projected
/// gradient (FISTA with adaptive restart), stopping once the duality gap
/// certifies `1e-8` optimality, well inside the `1e-6` comparisons it
/// serves. Returns `(alpha, objective)`.
pub fn qp_oracle(q: &[f64], n: usize, cap: f64, iterations: usize) -> (Vec<f64>, f64) {
    // Lipschitz bound from the largest absolute row sum.
    let lip = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum()).collect()
    };
    let mut x = project_capped_simplex(&vec![1.0 / n as f64; n], cap);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = quadratic(q, &x);
    for it in 0..iterations {
        if it % 50 == 0 && duality_gap(&grad(&x), &x, cap) <= 1e-8 {
            break;
        }
        let g = grad(&y);
        let moved: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let next = project_capped_simplex(&moved, cap);
        let fnext = quadratic(q, &next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fnext > fx {
            // Restart momentum.
            y = x.clone();
            t = 1.0;
            continue;
        }
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = next;
        fx = fnext;
        t = t_next;
    }
    (x, fx)
}

/// Gaussian kernel matrix computed directly from the definition.
pub fn gaussian_gram(points: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = points.len();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            q[i * n + j] = (-gamma * d2).exp();
        }
    }
    q
}

/// Otsu by brute force over the 256-bin histogram. A pixel falls in the
/// bin of the smallest integer not below it, so bin membership agrees with
/// the `v > t` foreground test. For every threshold both classes are
/// recounted from the pixels and the between-class variances compared as
/// exact fractions. Lowest threshold wins ties.
pub fn otsu_oracle(pixels: &[f64]) -> Option<u8> {
    let levels: Vec<i128> = pixels.iter().map(|&v| v.ceil() as i128).collect();
    let mut best: Option<(u8, i128, i128)> = None;
    for t in 0..=255u32 {
        let (mut n0, mut s0, mut n1, mut s1) = (0i128, 0i128, 0i128, 0i128);
        for (&v, &q) in pixels.iter().zip(&levels) {
            if v > f64::from(t) {
                n1 += 1;
                s1 += q;
            } else {
                n0 += 1;
                s0 += q;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // n0 n1 (mu1 - mu0)^2 = (n0 s1 - n1 s0)^2 / (n0 n1)
        let d = n0 * s1 - n1 * s0;
        let (num, den) = (d * d, n0 * n1);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

/// Inclusive bounding box `(row_min, row_max, col_min, col_max)` of the
/// lattice points inside an axis-aligned ellipse, found by scanning the
/// implicit inequality `(dr*b)^2 + (dc*a)^2 <= (a*b)^2`.
pub fn ellipse_box(
    center: [f64; 2],
    semi: [f64; 2],
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let (a, b) = (semi[0], semi[1]);
    let mut out: Option<(usize, usize, usize, usize)> = None;
    for r in 0..height {
        for c in 0..width {
            let dr = r as f64 - center[0];
            let dc = c as f64 - center[1];
            if (dr * b).powi(2) + (dc * a).powi(2) <= (a * b).powi(2) {
                out = Some(match out {
                    None => (r, r, c, c),
                    Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
                });
            }
        }
    }
    out
}

/// Small deterministic generator (SplitMix64) so fixtures do not depend on
/// the library's own RNG choices.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}
