use crate::error::domain_err;
use crate::Result;

/// Absolute tolerance of the kl-UCB inversions.
const INVERSION_TOL: f64 = 1e-13;
const MAX_ITER: usize = 100;

/// Bernoulli KL divergence with the `0 ln 0 = 0` conventions.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(domain_err!("kl({p}, {q}): arguments must lie in [0,1]"));
    }
    Ok(kl_bern(p, q))
}

#[inline]
pub(crate) fn kl_bern(p: f64, q: f64) -> f64 {
    let mut d = 0.0;
    if p > 0.0 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        d += p * (libm::log(p) - libm::log(q));
    }
    if p < 1.0 {
        if q >= 1.0 {
            return f64::INFINITY;
        }
        d += (1.0 - p) * (libm::log1p(-p) - libm::log1p(-q));
    }
    d.max(0.0)
}

/// `sum_{i in supp(p)} p_i ln(p_i / q_i)`, infinite when `supp(p)` is not
/// contained in `supp(q)`.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(domain_err!("distributions of length {} and {}", p.len(), q.len()));
    }
    Ok(kl_cat(p, q))
}

#[inline]
pub(crate) fn kl_cat(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (libm::log(pi) - libm::log(qi));
        }
    }
    d.max(0.0)
}

/// Largest `v` in `[p_hat, 1]` with `kl(p_hat, v) <= level`.
pub fn kl_ucb_upper(p_hat: f64, level: f64) -> f64 {
    invert(p_hat, level, true)
}

/// Smallest `v` in `[0, p_hat]` with `kl(p_hat, v) <= level`.
pub fn kl_ucb_lower(p_hat: f64, level: f64) -> f64 {
    invert(p_hat, level, false)
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * libm::log(x)
    } else {
        0.0
    }
}

/// Safeguarded Newton on the convex map `v -> kl(p, v) - level`, bracketed
/// between `p` and the Pinsker bound `p +- sqrt(level / 2)`.
fn invert(p: f64, level: f64, upper: bool) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let edge = if upper { 1.0 } else { 0.0 };
    if !(level > 0.0) || p == edge {
        return p;
    }
    if level == f64::INFINITY {
        return edge;
    }
    let reach = libm::sqrt(level / 2.0);
    // Dropping the `ln(1 - v)` term (resp. `ln v`) gives a second infeasible
    // point, far tighter than Pinsker when the root is close to the edge.
    let neg_entropy = xlogx(p) + xlogx(1.0 - p);
    // `inside` always satisfies kl <= level, `outside` violates it.
    let mut inside = p;
    // When that point rounds onto the edge the root is within rounding of
    // it; the edge itself is the conservative answer.
    let mut outside = if upper {
        let tail = -libm::expm1((neg_entropy - level) / (1.0 - p));
        if tail >= 1.0 {
            return 1.0;
        }
        (p + reach).min(tail)
    } else {
        let tail = libm::exp((neg_entropy - level) / p);
        if tail <= 0.0 {
            return 0.0;
        }
        (p - reach).max(tail)
    };
    if outside != edge && kl_bern(p, outside) <= level {
        return outside;
    }
    let mut v = if outside == edge { 0.5 * (inside + outside) } else { outside };
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let f = kl_bern(p, v) - level;
        if f > 0.0 {
            outside = v;
        } else {
            inside = v;
        }
        if f.abs() <= 1e-15 || (outside - inside).abs() <= INVERSION_TOL * v.min(1.0 - v) {
            converged = true;
            break;
        }
        let slope = (v - p) / (v * (1.0 - v));
        let newton = v - f / slope;
        let (lo, hi) = if upper { (inside, outside) } else { (outside, inside) };
        v = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            midpoint(edge, inside, outside)
        };
        if v == lo || v == hi {
            converged = true;
            break;
        }
    }
    if !converged {
        v = outside;
    }
    if upper {
        v.clamp(p, 1.0)
    } else {
        v.clamp(0.0, p)
    }
}

/// Bisection point measured by distance to `edge`; geometric when the
/// bracket spans orders of magnitude.
fn midpoint(edge: f64, inside: f64, outside: f64) -> f64 {
    let (di, d_o) = ((edge - inside).abs(), (edge - outside).abs());
    let d = if d_o > 0.0 && di > 4.0 * d_o {
        libm::sqrt(di) * libm::sqrt(d_o)
    } else {
        0.5 * (di + d_o)
    };
    if edge == 0.0 {
        d
    } else {
        1.0 - d
    }
}
