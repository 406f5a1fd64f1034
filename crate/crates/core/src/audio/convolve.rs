//! Linear convolution, direct and overlap-add.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Below this many multiply-adds per output sample the direct sum is used.
const DIRECT_TAPS_LIMIT: usize = 48;
const MIN_FFT_LEN: usize = 256;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn check_operands(signal: &[f64], ir: &[f64], out_len: usize) -> Result<()> {
    if signal.is_empty() || ir.is_empty() {
        return Err(Error::EmptyOperand);
    }
    if signal.iter().chain(ir).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let full = signal.len() + ir.len() - 1;
    if out_len > full {
        return Err(Error::InvalidArgument(format!(
            "out_len {out_len} exceeds full convolution length {full}"
        )));
    }
    Ok(())
}

/// First `out_len` samples of `signal * ir`.
pub fn convolve(signal: &AudioBuffer, ir: &[f64], out_len: usize) -> Result<AudioBuffer> {
    let out = convolve_slices(signal.samples(), ir, out_len)?;
    Ok(AudioBuffer::new(out, signal.sample_rate())?)
}

/// Slice form of [`convolve`]; picks direct or overlap-add by IR length.
pub fn convolve_slices(signal: &[f64], ir: &[f64], out_len: usize) -> Result<Vec<f64>> {
    check_operands(signal, ir, out_len)?;
    if ir.len().min(signal.len()) <= DIRECT_TAPS_LIMIT {
        Ok(direct(signal, ir, out_len))
    } else {
        Ok(overlap_add(signal, ir, out_len))
    }
}

/// Overlap-add convolution with power-of-two FFT blocks.
pub fn convolve_fft(signal: &[f64], ir: &[f64], out_len: usize) -> Result<Vec<f64>> {
    check_operands(signal, ir, out_len)?;
    Ok(overlap_add(signal, ir, out_len))
}

fn direct(signal: &[f64], ir: &[f64], out_len: usize) -> Vec<f64> {
    // The shorter operand drives the inner loop.
    let (long, short) = if ir.len() <= signal.len() {
        (signal, ir)
    } else {
        (ir, signal)
    };
    let mut out = vec![0.0; out_len];
    for (k, &h) in short.iter().enumerate() {
        if k >= out_len {
            break;
        }
        let end = (out_len - k).min(long.len());
        for (o, &x) in out[k..k + end].iter_mut().zip(&long[..end]) {
            *o += h * x;
        }
    }
    out
}

fn overlap_add(signal: &[f64], ir: &[f64], out_len: usize) -> Vec<f64> {
    let m = ir.len();
    let n_fft = (2 * m).next_power_of_two().max(MIN_FFT_LEN);
    let block = n_fft - m + 1;
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n_fft), p.plan_fft_inverse(n_fft))
    });

    let mut h_spec: Vec<Complex64> = ir
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    fwd.process(&mut h_spec);

    let scale = 1.0 / n_fft as f64;
    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    // Inputs past out_len cannot contribute to the retained outputs.
    let used = signal.len().min(out_len);
    let mut start = 0;
    while start < used {
        let stop = (start + block).min(used);
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = start + i;
            *b = if idx < stop {
                Complex64::new(signal[idx], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&h_spec) {
            *b *= h;
        }
        inv.process(&mut buf);
        let span = (stop - start + m - 1).min(out_len - start);
        for (o, b) in out[start..start + span].iter_mut().zip(&buf) {
            *o += b.re * scale;
        }
        start = stop;
    }
    out
}
