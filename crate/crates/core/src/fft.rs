//! Discrete Fourier transform of real series of arbitrary length
//! (radix-2 Cooley–Tukey, Bluestein's chirp-z for other lengths).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::Complex;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

type C64 = Complex<f64>;

/// Forward DFT `X_k = Σ_t x_t exp(−2πi k t / n)`.
pub fn dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = x.to_vec();
        radix2(&mut buf, false);
        buf
    } else {
        bluestein(x)
    }
}

pub fn dft_real(x: &[f64]) -> Vec<C64> {
    let c: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    dft(&c)
}

fn radix2(a: &mut [C64], inverse: bool) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles from direct evaluation; recurrences drift for long inputs.
        let tw: Vec<C64> = (0..half)
            .map(|k| {
                let a = ang * k as f64;
                C64::new(a.cos(), a.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = a[start + k];
                let v = a[start + k + half] * tw[k];
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
    if inverse {
        let s = 1.0 / n as f64;
        for v in a.iter_mut() {
            *v *= s;
        }
    }
}

fn bluestein(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp w_k = exp(−πi k² / n); k² reduced mod 2n to keep the angle small.
    let chirp: Vec<C64> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            let a = -PI * k2 / n as f64;
            C64::new(a.cos(), a.sin())
        })
        .collect();
    let mut a = vec![C64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = x[k] * chirp[k];
    }
    let mut b = vec![C64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (ai, bi) in a.iter_mut().zip(b.iter()) {
        *ai *= *bi;
    }
    radix2(&mut a, true);
    (0..n).map(|k| a[k] * chirp[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut s = C64::new(0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    s += C64::new(v * a.cos(), v * a.sin());
                }
                s
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1usize, 2, 7, 8, 12, 31, 64, 100] {
            let x: Vec<f64> = (0..n).map(|t| ((t * 37 + 11) % 17) as f64 - 8.0).collect();
            let fast = dft_real(&x);
            let slow = naive(&x);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).re.hypot((a - b).im) < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }
}
