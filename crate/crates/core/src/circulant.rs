//! Spectral conditioning of ±1 circulant matrices and the search for
//! approximately Hadamard circulants.
//!
//! The singular values of the circulant with first column a are the moduli
//! of the DFT of a, so c√n‖x‖ ≤ ‖Ax‖ ≤ C√n‖x‖ with c, C the extreme values
//! of |F_k|/√n.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::task_rng;

/// Stand-in for log(C/c) when c = 0.
const INFINITE_OBJECTIVE: f64 = 1e6;
/// Exhaustive search enumerates 2^(n-1) sequences.
pub const EXHAUSTIVE_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantReport {
    pub sequence: Vec<i8>,
    pub magnitudes: Vec<f64>,
    pub c: f64,
    #[serde(rename = "C")]
    pub c_upper: f64,
    /// C/c, infinite when some |F_k| vanishes (serialized as null).
    pub ratio: f64,
}

impl CirculantReport {
    pub fn n(&self) -> usize {
        self.sequence.len()
    }

    /// |Σ|F_k|² − n²|
    pub fn parseval_defect(&self) -> f64 {
        let n = self.n() as f64;
        (self.magnitudes.iter().map(|m| m * m).sum::<f64>() - n * n).abs()
    }

    fn objective(&self) -> f64 {
        if self.ratio.is_finite() {
            self.ratio.ln()
        } else {
            INFINITE_OBJECTIVE
        }
    }
}

fn check_sequence(seq: &[i8]) -> Result<()> {
    if seq.is_empty() {
        return Err(invalid("empty sequence"));
    }
    if let Some(bad) = seq.iter().find(|&&v| v != 1 && v != -1) {
        return Err(invalid(format!("entries must be ±1, found {bad}")));
    }
    Ok(())
}

/// |F_k| for F = DFT(seq).
fn dft_magnitudes(seq: &[i8], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = seq.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|z| z.norm()).collect()
}

fn report_from(seq: Vec<i8>, magnitudes: Vec<f64>) -> CirculantReport {
    let rn = (seq.len() as f64).sqrt();
    let lo = magnitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = magnitudes.iter().copied().fold(0.0, f64::max);
    // Exact cancellations leave round-off of order n·eps in |F_k|.
    let lo = if lo <= 1e-9 * seq.len() as f64 { 0.0 } else { lo };
    let c = lo / rn;
    let c_upper = hi / rn;
    let ratio = if c == 0.0 { f64::INFINITY } else { c_upper / c };
    CirculantReport { sequence: seq, magnitudes, c, c_upper, ratio }
}

pub fn circulant_spectrum(seq: &[i8]) -> Result<CirculantReport> {
    check_sequence(seq)?;
    let mut planner = FftPlanner::new();
    Ok(report_from(seq.to_vec(), dft_magnitudes(seq, &mut planner)))
}

/// Dense circulant with A_{jk} = a_{(j−k) mod n}.
pub fn circulant_matrix(seq: &[i8]) -> nalgebra::DMatrix<f64> {
    let n = seq.len();
    nalgebra::DMatrix::from_fn(n, n, |j, k| seq[(j + n - k) % n] as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorBounds {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub trials: usize,
}

/// Extremes of ‖Ax‖/(√n‖x‖) over `trials` Gaussian directions, by dense
/// products.
pub fn verify_operator_bounds(seq: &[i8], trials: usize, seed: u64) -> Result<OperatorBounds> {
    check_sequence(seq)?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let a = circulant_matrix(seq);
    let n = seq.len();
    let mut rng = task_rng(seed, 0xc12c, 0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..trials {
        let x = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let r = (&a * &x).norm() / ((n as f64).sqrt() * x.norm());
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(OperatorBounds { min_ratio: lo, max_ratio: hi, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Anneal,
    Local,
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub seed: u64,
    /// Independent starts for anneal/local.
    pub restarts: usize,
    pub sweeps: usize,
    pub t0: f64,
    pub cooling: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { seed: 0, restarts: 16, sweeps: 200, t0: 1.0, cooling: 0.995 }
    }
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Legendre symbol sequence a_j = (j|n), a_0 = +1.
pub fn legendre_sequence(n: usize) -> Result<Vec<i8>> {
    if !(is_prime(n) && n % 2 == 1) {
        return Err(invalid(format!("legendre construction needs an odd prime, got {n}")));
    }
    let mut residue = vec![false; n];
    for j in 1..n {
        residue[j * j % n] = true;
    }
    Ok((0..n).map(|j| if j == 0 || residue[j] { 1 } else { -1 }).collect())
}

fn sequence_from_bits(n: usize, bits: u64) -> Vec<i8> {
    // a_0 = +1 fixed; bit i sets the sign of a_{i+1}.
    (0..n).map(|j| if j > 0 && (bits >> (j - 1)) & 1 == 1 { -1 } else { 1 }).collect()
}

fn better(a: &CirculantReport, b: &CirculantReport) -> bool {
    let (oa, ob) = (a.objective(), b.objective());
    oa < ob || (oa == ob && a.sequence < b.sequence)
}

fn exhaustive(n: usize) -> CirculantReport {
    let total = 1u64 << (n - 1);
    let chunks = 64u64.min(total);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut planner = FftPlanner::new();
            let mut best: Option<CirculantReport> = None;
            let mut bits = c;
            while bits < total {
                let seq = sequence_from_bits(n, bits);
                let mags = dft_magnitudes(&seq, &mut planner);
                let r = report_from(seq, mags);
                if best.as_ref().is_none_or(|b| better(&r, b)) {
                    best = Some(r);
                }
                bits += chunks;
            }
            best.unwrap()
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .unwrap()
}

/// Running DFT of a ±1 sequence; a flip updates every F_k in O(n).
struct FlipState {
    seq: Vec<i8>,
    f: Vec<Complex64>,
    twiddle: Vec<Complex64>,
}

impl FlipState {
    fn new(seq: Vec<i8>, planner: &mut FftPlanner<f64>) -> Self {
        let n = seq.len();
        let mut f: Vec<Complex64> = seq.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
        planner.plan_fft_forward(n).process(&mut f);
        let twiddle = (0..n).map(|m| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m as f64 / n as f64)).collect();
        FlipState { seq, f, twiddle }
    }

    fn delta(&self, j: usize, k: usize) -> Complex64 {
        let n = self.seq.len();
        self.twiddle[j * k % n] * (-2.0 * self.seq[j] as f64)
    }

    fn log_ratio(&self, lo: f64, hi: f64) -> f64 {
        let n = self.seq.len() as f64;
        if lo.sqrt() <= 1e-9 * n {
            INFINITE_OBJECTIVE
        } else {
            0.5 * (hi / lo).ln()
        }
    }

    fn objective(&self) -> f64 {
        let (lo, hi) = self.f.iter().map(|z| z.norm_sqr()).fold((f64::INFINITY, 0.0f64), |(l, h), m| (l.min(m), h.max(m)));
        self.log_ratio(lo, hi)
    }

    /// log(C/c) after flipping entry j, without committing.
    fn objective_after(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..self.f.len() {
            let m2 = (self.f[k] + self.delta(j, k)).norm_sqr();
            lo = lo.min(m2);
            hi = hi.max(m2);
        }
        self.log_ratio(lo, hi)
    }

    fn flip(&mut self, j: usize) {
        for k in 0..self.f.len() {
            let d = self.delta(j, k);
            self.f[k] += d;
        }
        self.seq[j] = -self.seq[j];
    }
}

/// One start of annealing (`anneal = true`) or greedy single-flip descent.
/// Annealing ends with the same greedy descent from its best sequence.
fn flip_search(n: usize, opts: &SearchOptions, start: usize, anneal: bool) -> CirculantReport {
    let mut rng = task_rng(opts.seed, if anneal { 0xa22e } else { 0x10c }, start as u64);
    let mut planner = FftPlanner::new();
    let seq: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let mut state = FlipState::new(seq, &mut planner);
    let mut cur = state.objective();
    if anneal {
        let mut best = (cur, state.seq.clone());
        let mut t = opts.t0;
        for _ in 0..opts.sweeps {
            for _ in 0..n {
                let j = rng.random_range(0..n);
                let cand = state.objective_after(j);
                let delta = cand - cur;
                if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                    state.flip(j);
                    cur = cand;
                    if cur < best.0 {
                        best = (cur, state.seq.clone());
                    }
                }
            }
            t *= opts.cooling;
        }
        state = FlipState::new(best.1, &mut planner);
        cur = best.0;
    }
    loop {
        let mut improved = false;
        for j in 0..n {
            let cand = state.objective_after(j);
            if cand < cur - 1e-12 {
                state.flip(j);
                cur = cand;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    // Fresh transform so the report carries no accumulated update error.
    let mags = dft_magnitudes(&state.seq, &mut planner);
    report_from(state.seq, mags)
}

/// Canonical representative under global negation: a_0 = +1.
fn normalize_sign(mut r: CirculantReport) -> CirculantReport {
    if r.sequence[0] < 0 {
        r.sequence.iter_mut().for_each(|v| *v = -*v);
    }
    r
}

/// Sequence of length n minimizing C/c under the given strategy.
pub fn search_circulant(n: usize, strategy: Strategy, opts: &SearchOptions) -> Result<CirculantReport> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    match strategy {
        Strategy::Exhaustive => {
            if n > EXHAUSTIVE_MAX_N {
                return Err(invalid(format!("exhaustive search limited to n <= {EXHAUSTIVE_MAX_N}, got {n}")));
            }
            Ok(exhaustive(n))
        }
        Strategy::Legendre => circulant_spectrum(&legendre_sequence(n)?),
        Strategy::Anneal | Strategy::Local => {
            if opts.restarts == 0 {
                return Err(invalid("restarts must be at least 1"));
            }
            let anneal = strategy == Strategy::Anneal;
            let best = (0..opts.restarts)
                .into_par_iter()
                .map(|k| normalize_sign(flip_search(n, opts, k, anneal)))
                .reduce_with(|a, b| if better(&b, &a) { b } else { a })
                .unwrap();
            Ok(best)
        }
    }
}
