#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::special::ln_gamma;

/// Largest sample accepted by [`quad_component_marginal`].
pub const MAX_QUAD_POINTS: usize = 5;

// Kronrod nodes (descending, last is the centre) and weights; the Gauss
// 7-point rule uses the odd-indexed nodes and the centre.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel. Returns `(kronrod, |kronrod - gauss|)`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration on `[a, b]`: the panel with
/// the largest error estimate is bisected until the summed estimate drops
/// below `rel_tol · |I|`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Result<f64> {
    let mut panels = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        // error estimates below the rounding floor cannot be reduced further
        let floor = 50.0 * f64::EPSILON * total.abs();
        if err <= (rel_tol * total.abs()).max(floor) || err == 0.0 {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature {
                achieved: err / total.abs(),
                target: rel_tol,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        for (l, h) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(&mut f, l, h);
            panels.push((l, h, v, e));
        }
    }
}

/// `dx/dw` and `x` for the map `x = c + s·w/(1 − w²)` from `(−1, 1)` onto the
/// real line.
fn real_line(c: f64, s: f64, w: f64) -> (f64, f64) {
    let q = 1.0 - w * w;
    (c + s * w / q, s * (1.0 + w * w) / (q * q))
}

/// Log joint density of `(m, r)` and the data under one Normal–Gamma
/// component, written out term by term.
fn log_integrand(data: &[f64], spec: &ModelSpec, m: f64, r: f64) -> f64 {
    let ln_r = r.ln();
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let like: f64 = data
        .iter()
        .map(|&x| 0.5 * ln_r - half_ln_2pi - 0.5 * r * (x - m).powi(2))
        .sum();
    let prior_m = 0.5 * (spec.tau * r).ln() - half_ln_2pi - 0.5 * spec.tau * r * (m - spec.mu).powi(2);
    let prior_r = spec.gamma * spec.delta.ln() - ln_gamma(spec.gamma) + (spec.gamma - 1.0) * ln_r - spec.delta * r;
    like + prior_m + prior_r
}

const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 4000;

/// `ln ∫ p(x, m | r) dm`. With `m = c + d` the `m`-dependent part of the
/// exponent is `−r/2 [Q(c + d) − Q(c)]` for `Q(m) = Σ (x_i − m)² + τ (m − μ)²`,
/// expanded in `d` so that large `r` does not amplify cancellation.
fn log_inner(data: &[f64], spec: &ModelSpec, r: f64) -> Result<f64> {
    let cnt = data.len() as f64;
    let centre = (spec.tau * spec.mu + data.iter().sum::<f64>()) / (spec.tau + cnt);
    let scale = 1.0 / (r * (spec.tau + cnt)).sqrt();
    let lin = data.iter().map(|&x| x - centre).sum::<f64>() + spec.tau * (spec.mu - centre);
    let v = integrate(
        |w| {
            let (d, jac) = real_line(0.0, scale, w);
            let dq = d * d * (cnt + spec.tau) - 2.0 * d * lin;
            let y = (-0.5 * r * dq).exp() * jac;
            if y.is_finite() {
                y
            } else {
                0.0
            }
        },
        -1.0,
        1.0,
        INNER_TOL,
        MAX_PANELS,
    )?;
    Ok(log_integrand(data, spec, centre, r) + v.ln())
}

/// Marginal likelihood of `data` under one Normal–Gamma component, by
/// nested adaptive quadrature over the mean and the log precision.
/// Independent of the closed form; intended as a test oracle.
pub fn quad_component_marginal(data: &[f64], spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    if data.len() > MAX_QUAD_POINTS {
        return Err(invalid("data", format!("at most {MAX_QUAD_POINTS} points")));
    }
    // in u = ln r the integrand is exp(g(u))
    let g = |u: f64| log_inner(data, spec, u.exp()).map(|v| v + u);

    // locate the mode on a grid, then its curvature
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut u = -40.0;
    while u <= 40.0 {
        let v = g(u)?;
        if v > best.0 {
            best = (v, u);
        }
        u += 0.25;
    }
    let (peak, mut mode) = best;
    let mut h = 0.25;
    for _ in 0..6 {
        // parabolic refinement from three points
        let (l, c, r) = (g(mode - h)?, g(mode)?, g(mode + h)?);
        let curv = l - 2.0 * c + r;
        if curv < 0.0 {
            mode -= 0.5 * h * (r - l) / curv;
        }
        h *= 0.5;
    }
    let hc = 1e-2;
    let curv = (g(mode - hc)? - 2.0 * g(mode)? + g(mode + hc)?) / (hc * hc);
    let su = if curv < 0.0 { (1.0 / (-curv).sqrt()).clamp(1e-3, 10.0) } else { 1.0 };
    let peak = peak.max(g(mode)?);

    let mut err = None;
    let v = integrate(
        |w| {
            let (u, jac) = real_line(mode, su, w);
            if !u.is_finite() || u.abs() > 700.0 {
                return 0.0;
            }
            match g(u) {
                Ok(val) => {
                    let y = (val - peak).exp() * jac;
                    if y.is_finite() {
                        y
                    } else {
                        0.0
                    }
                }
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        -1.0,
        1.0,
        OUTER_TOL,
        MAX_PANELS,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(peak + v.ln())
}
