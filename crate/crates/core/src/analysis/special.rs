//! First-order Marcum Q function.

/// Exponentially scaled modified Bessel functions `e^{-x} I_k(x)` for
/// `k = 0..len` by Miller's backward recurrence, normalised with
/// `I_0 + 2 sum_{k>=1} I_k = e^x`.
fn scaled_bessel_sequence(x: f64, len: usize) -> Vec<f64> {
    let start = len + 20 + (12.0 * x.sqrt()) as usize;
    let mut f = vec![0.0f64; start + 2];
    f[start] = 1e-280;
    let two_over_x = 2.0 / x;
    for k in (1..=start).rev() {
        f[k - 1] = f[k + 1] + k as f64 * two_over_x * f[k];
        if f[k - 1] > 1e200 {
            for v in &mut f[k - 1..] {
                *v *= 1e-200;
            }
        }
    }
    let norm = f[0] + 2.0 * f[1..=start].iter().sum::<f64>();
    f.truncate(len);
    for v in &mut f {
        *v /= norm;
    }
    f
}

/// `Q_1(v, w) = int_w^inf x exp(-(x^2 + v^2) / 2) I_0(v x) dx`.
///
/// Evaluated through the Bessel series
/// `Q_1 = e^{-(v-w)^2/2} sum_{k>=0} (v/w)^k e^{-vw} I_k(vw)` for `v < w` and
/// `1 - Q_1 = e^{-(v-w)^2/2} sum_{k>=1} (w/v)^k e^{-vw} I_k(vw)` otherwise,
/// stopping once a term drops below `1e-15` of the partial sum. Negative
/// arguments are treated as zero.
pub fn marcum_q1(v: f64, w: f64) -> f64 {
    let (v, w) = (v.max(0.0), w.max(0.0));
    if w == 0.0 {
        return 1.0;
    }
    if v == 0.0 {
        return (-0.5 * w * w).exp();
    }
    let exponent = -0.5 * (v - w) * (v - w);
    if exponent < -745.0 {
        return if v < w { 0.0 } else { 1.0 };
    }
    let x = v * w;
    let (ratio, first) = if v < w { (v / w, 0) } else { (w / v, 1) };

    let mut len = 64 + (12.0 * x.sqrt()) as usize;
    loop {
        let bessel = scaled_bessel_sequence(x, len);
        let mut sum = 0.0;
        let mut power = if first == 0 { 1.0 } else { ratio };
        let mut converged = false;
        for &ik in &bessel[first..] {
            let term = power * ik;
            sum += term;
            if term <= 1e-15 * sum || term == 0.0 {
                converged = true;
                break;
            }
            power *= ratio;
        }
        if converged || len > 4_000_000 {
            let tail = exponent.exp() * sum;
            let q = if v < w { tail } else { 1.0 - tail };
            return q.clamp(0.0, 1.0);
        }
        len *= 2;
    }
}
