//! Adaptive Gauss–Kronrod quadrature for vector-valued complex integrands,
//! and trapezoidal contour quadrature on circles.

#![allow(clippy::excessive_precision)]

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::CMat;

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525520920,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 20_000 }
    }
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let dim = fc.len();
    let mut kron: Vec<Complex64> = fc.iter().map(|x| x * WGK[10]).collect();
    let mut gauss = vec![Complex64::zero(); dim];
    for k in 0..10 {
        let dx = h * XGK[k];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        for i in 0..dim {
            let s = f1[i] + f2[i];
            kron[i] += s * WGK[k];
            if k % 2 == 1 {
                gauss[i] += s * WG[k / 2];
            }
        }
    }
    let value: Vec<Complex64> = kron.iter().map(|x| x * h).collect();
    let diff: Vec<Complex64> = kron.iter().zip(&gauss).map(|(k, g)| (k - g) * h).collect();
    // raw Gauss/Kronrod gap: pessimistic for smooth integrands, never optimistic
    let error = max_norm(&diff);
    Ok(Panel { a, b, value, error })
}

/// Global adaptive integration over `[a, b]`, splitting first at the given
/// interior break points.
pub fn integrate_with_breaks<F>(mut f: F, a: f64, b: f64, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let mut nodes: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    inner.dedup();
    nodes.extend(inner);
    nodes.push(b);

    let mut heap = BinaryHeap::new();
    for w in nodes.windows(2) {
        heap.push(gk21(&mut f, w[0], w[1])?);
    }
    loop {
        let (total, err) = totals(&heap);
        let target = opts.abs_tol.max(opts.rel_tol * max_norm(&total));
        if err <= target {
            return Ok(QuadResult { value: total, error: err, intervals: heap.len() });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NoConvergence { what: "adaptive quadrature exceeded its interval budget" });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split any further; accept it as is
            let (total, err) = totals_with(&heap, &worst);
            let target = opts.abs_tol.max(opts.rel_tol * max_norm(&total));
            if err <= 10.0 * target {
                return Ok(QuadResult { value: total, error: err, intervals: heap.len() + 1 });
            }
            return Err(Error::NoConvergence { what: "adaptive quadrature hit machine resolution" });
        }
        heap.push(gk21(&mut f, worst.a, mid)?);
        heap.push(gk21(&mut f, mid, worst.b)?);
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (Vec<Complex64>, f64) {
    let dim = heap.peek().map(|p| p.value.len()).unwrap_or(0);
    let mut total = vec![Complex64::zero(); dim];
    let mut err = 0.0;
    for p in heap.iter() {
        for (t, v) in total.iter_mut().zip(&p.value) {
            *t += v;
        }
        err += p.error;
    }
    (total, err)
}

fn totals_with(heap: &BinaryHeap<Panel>, extra: &Panel) -> (Vec<Complex64>, f64) {
    let (mut total, err) = totals(heap);
    if total.is_empty() {
        total = vec![Complex64::zero(); extra.value.len()];
    }
    for (t, v) in total.iter_mut().zip(&extra.value) {
        *t += v;
    }
    (total, err + extra.error)
}

pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    integrate_with_breaks(f, a, b, &[], opts)
}

/// `∫_a^∞ f`, through `x = a + s t / (1 - t)` on `t ∈ [0, 1)`. Break points
/// are given in the original variable.
pub fn integrate_to_infinity<F>(mut f: F, a: f64, scale: f64, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let s = scale;
    let tb: Vec<f64> = breaks.iter().filter(|x| **x > a).map(|x| (x - a) / (x - a + s)).collect();
    let g = |t: f64| -> Result<Vec<Complex64>> {
        let one_m = 1.0 - t;
        let x = a + s * t / one_m;
        let jac = s / (one_m * one_m);
        let mut v = f(x)?;
        v.iter_mut().for_each(|y| *y *= jac);
        Ok(v)
    };
    integrate_with_breaks(g, 0.0, 1.0, &tb, opts)
}

/// `∫_{-∞}^{b} f` by reflection.
pub fn integrate_from_neg_infinity<F>(
    mut f: F,
    b: f64,
    scale: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let rb: Vec<f64> = breaks.iter().map(|x| -x).collect();
    integrate_to_infinity(|x| f(-x), -b, scale, &rb, opts)
}

/// Trapezoidal approximation of `(1/2πi) ∮ (z - c)^k F(z) dz` on the circle
/// `|z - c| = r` with `nodes` equispaced points, summed in node order.
pub fn circle_moment<F>(center: Complex64, radius: f64, nodes: usize, k: i32, mut f: F) -> Result<CMat>
where
    F: FnMut(Complex64) -> Result<CMat>,
{
    let mut acc: Option<CMat> = None;
    for j in 0..nodes {
        let theta = 2.0 * PI * (j as f64) / (nodes as f64);
        let e = Complex64::from_polar(1.0, theta);
        let z = center + e * radius;
        let w = Complex64::from_polar(radius.powi(k + 1), theta * (k + 1) as f64) / (nodes as f64);
        let v = f(z)?;
        match acc.as_mut() {
            None => acc = Some(v.scale(w)),
            Some(a) => a.axpy(w, &v),
        }
    }
    acc.ok_or_else(|| Error::invalid("circle quadrature needs at least one node"))
}
