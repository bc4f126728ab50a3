//! Numerical weighted maximum-likelihood fit, independent of the closed form.

/// Minimizes `Σ a_i NLL(x_i) / Σ a_i + ε/2 · tr(Λ)` over the mean and a
/// Cholesky factor of the precision `Λ = L Lᵀ` (log-parametrized diagonal)
/// with BFGS. The ridge term makes the minimizer
/// the regularized covariance `S + εI`. Returns (mean, covariance).
pub fn numerical_weighted_mle(xs: &[Vec<f64>], a: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let d = xs[0].len();
    let total: f64 = a.iter().sum();
    let tri: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let n_theta = d + tri.len();

    let unpack = |theta: &[f64]| {
        let mu = theta[..d].to_vec();
        let mut l = vec![0.0; d * d];
        for (t, &(i, j)) in tri.iter().enumerate() {
            let v = theta[d + t];
            l[i * d + j] = if i == j { v.exp() } else { v };
        }
        (mu, l)
    };
    let objective = |theta: &[f64]| {
        let (mu, l) = unpack(theta);
        let mut f = 0.0;
        for (x, &ai) in xs.iter().zip(a) {
            // ‖Lᵀ(x−μ)‖²
            let mut q = 0.0;
            for c in 0..d {
                let mut s = 0.0;
                for r in c..d {
                    s += l[r * d + c] * (x[r] - mu[r]);
                }
                q += s * s;
            }
            f += ai * 0.5 * q;
        }
        f /= total;
        let fro: f64 = l.iter().map(|v| v * v).sum();
        f + 0.5 * eps * fro - (0..d).map(|i| l[i * d + i].ln()).sum::<f64>()
    };
    let gradient = |theta: &[f64]| {
        let (mu, l) = unpack(theta);
        let mut g_mu = vec![0.0; d];
        let mut g_l = vec![0.0; d * d];
        for (x, &ai) in xs.iter().zip(a) {
            let u: Vec<f64> = (0..d).map(|r| x[r] - mu[r]).collect();
            // v = Lᵀ u
            let v: Vec<f64> = (0..d).map(|c| (c..d).map(|r| l[r * d + c] * u[r]).sum()).collect();
            let w = ai / total;
            for r in 0..d {
                // (L v)_r
                let lv: f64 = (0..=r).map(|c| l[r * d + c] * v[c]).sum();
                g_mu[r] -= w * lv;
                for c in 0..=r {
                    g_l[r * d + c] += w * u[r] * v[c];
                }
            }
        }
        let mut g = g_mu;
        for &(i, j) in &tri {
            let mut gij = g_l[i * d + j] + eps * l[i * d + j];
            if i == j {
                gij = (gij - 1.0 / l[i * d + i]) * l[i * d + i];
            }
            g.push(gij);
        }
        g
    };

    let theta = bfgs(&objective, &gradient, vec![0.0; n_theta]);
    let (mu, l) = unpack(&theta);
    // Σ = (L Lᵀ)⁻¹ via Gauss-Jordan.
    let mut prec = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            prec[i * d + j] = (0..d).map(|c| l[i * d + c] * l[j * d + c]).sum();
        }
    }
    (mu, invert(&prec, d))
}

/// BFGS with Armijo backtracking, run until the gradient vanishes or the
/// steps stall at rounding level.
fn bfgs(f: &dyn Fn(&[f64]) -> f64, grad: &dyn Fn(&[f64]) -> Vec<f64>, mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len();
    let mut hinv: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
    let mut g = grad(&x);
    for _ in 0..10_000 {
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-11 {
            break;
        }
        let p: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>()).collect();
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        let f0 = f(&x);
        let mut t = 1.0;
        let mut cand;
        loop {
            cand = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect::<Vec<_>>();
            let fc = f(&cand);
            if fc.is_finite() && fc <= f0 + 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
            if t < 1e-16 {
                return x;
            }
        }
        let g_new = grad(&cand);
        let s: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
        if s.iter().all(|v| v.abs() < 1e-15) {
            return cand;
        }
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = cand;
        g = g_new;
    }
    x
}

fn invert(m: &[f64], d: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    let mut inv: Vec<f64> = (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect();
    for c in 0..d {
        let p = (c..d).max_by(|&x, &y| a[x * d + c].abs().total_cmp(&a[y * d + c].abs())).unwrap();
        for j in 0..d {
            a.swap(c * d + j, p * d + j);
            inv.swap(c * d + j, p * d + j);
        }
        let piv = a[c * d + c];
        for j in 0..d {
            a[c * d + j] /= piv;
            inv[c * d + j] /= piv;
        }
        for r in 0..d {
            if r != c {
                let f = a[r * d + c];
                for j in 0..d {
                    a[r * d + j] -= f * a[c * d + j];
                    inv[r * d + j] -= f * inv[c * d + j];
                }
            }
        }
    }
    inv
}
