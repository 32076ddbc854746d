//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// Integrable `1/sqrt` endpoint behaviour to be removed by substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endpoint {
    #[default]
    Regular,
    SqrtLeft,
    SqrtRight,
    SqrtBoth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any panel.
    pub max_depth: u32,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_depth: 60,
            max_panels: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub panels: usize,
    pub converged: bool,
}

impl<const N: usize> QuadResult<N> {
    pub fn zero() -> Self {
        QuadResult {
            value: [0.0; N],
            error: [0.0; N],
            panels: 0,
            converged: true,
        }
    }

    pub fn max_error(&self) -> f64 {
        self.error.iter().cloned().fold(0.0, f64::max)
    }

    pub fn accumulate(&mut self, other: &QuadResult<N>) {
        for i in 0..N {
            self.value[i] += other.value[i];
            self.error[i] += other.error[i];
        }
        self.panels += other.panels;
        self.converged &= other.converged;
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    depth: u32,
    value: [f64; N],
    error: [f64; N],
}

impl<const N: usize> Panel<N> {
    fn key(&self) -> f64 {
        self.error.iter().cloned().fold(0.0, f64::max)
    }
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().total_cmp(&other.key())
    }
}

fn check<const N: usize>(v: [f64; N], x: f64) -> Result<[f64; N], QuadError> {
    if v.iter().all(|y| y.is_finite()) {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { x })
    }
}

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64, depth: u32) -> Result<Panel<N>, QuadError>
where
    F: FnMut(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = check(f(c), c)?;
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let x1 = c - h * XGK[j];
        let x2 = c + h * XGK[j];
        let f1 = check(f(x1), x1)?;
        let f2 = check(f(x2), x2)?;
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        value[i] = k[i] * h;
        error[i] = ((k[i] - g[i]) * h).abs();
    }
    Ok(Panel {
        a,
        b,
        depth,
        value,
        error,
    })
}

fn adapt<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [f64; N],
{
    let first = gk15(&mut f, a, b, 0)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut panels = 1usize;
    let mut frozen: Vec<Panel<N>> = Vec::new();
    let mut converged = false;

    loop {
        let scale = total.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let budget = opts.abs_tol.max(opts.rel_tol * scale);
        let err = total_err.iter().cloned().fold(0.0, f64::max);
        if err <= budget {
            converged = true;
            break;
        }
        if panels >= opts.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= opts.max_depth || mid <= worst.a || mid >= worst.b {
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = gk15(&mut f, worst.a, mid, worst.depth + 1)?;
        let right = gk15(&mut f, mid, worst.b, worst.depth + 1)?;
        for i in 0..N {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
            total_err[i] += left.error[i] + right.error[i] - worst.error[i];
        }
        panels += 1;
        heap.push(left);
        heap.push(right);
    }

    // re-sum to shed accumulated cancellation error
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for p in heap.iter().chain(frozen.iter()) {
        for i in 0..N {
            value[i] += p.value[i];
            error[i] += p.error[i];
        }
    }
    Ok(QuadResult {
        value,
        error,
        panels: panels + frozen.len(),
        converged,
    })
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    endpoint: Endpoint,
    opts: &QuadOptions,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [f64; N],
{
    integrate_dyn(&mut f, a, b, endpoint, opts)
}

fn integrate_dyn<const N: usize>(
    f: &mut dyn FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    endpoint: Endpoint,
    opts: &QuadOptions,
) -> Result<QuadResult<N>, QuadError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::BadInterval { a, b });
    }
    if b == a {
        return Ok(QuadResult::zero());
    }
    let w = b - a;
    match endpoint {
        Endpoint::Regular => adapt(f, a, b, opts),
        // x = a + t^2
        Endpoint::SqrtLeft => adapt(
            |t: f64| {
                let mut y = f(a + t * t);
                y.iter_mut().for_each(|v| *v *= 2.0 * t);
                y
            },
            0.0,
            w.sqrt(),
            opts,
        ),
        // x = b - t^2
        Endpoint::SqrtRight => adapt(
            |t: f64| {
                let mut y = f(b - t * t);
                y.iter_mut().for_each(|v| *v *= 2.0 * t);
                y
            },
            0.0,
            w.sqrt(),
            opts,
        ),
        Endpoint::SqrtBoth => {
            let m = a + 0.5 * w;
            let mut left = integrate_dyn(f, a, m, Endpoint::SqrtLeft, opts)?;
            let right = integrate_dyn(f, m, b, Endpoint::SqrtRight, opts)?;
            left.accumulate(&right);
            Ok(left)
        }
    }
}

/// Integrate across consecutive segments `points[i]..points[i+1]`.
///
/// `endpoints` returns the singularity description of each segment.
pub fn integrate_segments<const N: usize, F, E>(
    mut f: F,
    points: &[f64],
    mut endpoints: E,
    opts: &QuadOptions,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [f64; N],
    E: FnMut(f64, f64) -> Endpoint,
{
    let mut total = QuadResult::zero();
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = integrate_dyn(&mut f, w[0], w[1], endpoints(w[0], w[1]), opts)?;
        total.accumulate(&r);
    }
    Ok(total)
}
