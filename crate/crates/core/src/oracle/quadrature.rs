//! Marcum Q by direct numerical integration, independent of the Bessel
//! series used in `analysis`.

/// `e^{-y} I_0(y)`: ascending series up to 20, asymptotic expansion beyond.
pub fn scaled_i0(y: f64) -> f64 {
    let y = y.abs();
    if y <= 20.0 {
        let q = y * y / 4.0;
        let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
        while term > 1e-18 * sum {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
        }
        sum * (-y).exp()
    } else {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (k as f64 * 8.0 * y);
            if next > term || next < 1e-18 {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * y).sqrt()
    }
}

fn integrand(v: f64, x: f64) -> f64 {
    x * (-(x - v) * (x - v) / 2.0).exp() * scaled_i0(v * x)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`, split into `pieces`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = lo + width;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            adaptive(&f, lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb), tol / pieces as f64, 40)
        })
        .sum()
}

/// `Q_1(v, w)` by quadrature of its defining integral.
pub fn marcum_q1_quadrature(v: f64, w: f64) -> f64 {
    let (v, w) = (v.max(0.0), w.max(0.0));
    let f = |x: f64| integrand(v, x);
    let q = if w >= v {
        integrate(f, w, w.max(v) + 40.0, 64, 1e-14)
    } else {
        1.0 - integrate(f, 0.0, w, 64, 1e-14)
    };
    q.clamp(0.0, 1.0)
}
