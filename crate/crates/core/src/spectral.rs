//! Periodic Fourier transforms on grid functions: radial multipliers, axis
//! derivatives, and the fractional Laplacian |xi|^{2s}.
//!
//! Wavenumbers on [-L, L) are xi_k = pi k / L with k in [-N/2, N/2).

use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridShape};
use crate::real::Real;

/// Scalar usable for both grid numerics and FFTs.
pub trait Scalar: Real + FftNum {}
impl<T: Real + FftNum> Scalar for T {}

/// Signed frequency index for row j of an N-point axis: j, or j - N past the
/// Nyquist split.
fn freq_index(j: usize, n_pts: usize) -> isize {
    if j < n_pts / 2 {
        j as isize
    } else {
        j as isize - n_pts as isize
    }
}

/// xi = pi k / L for grid row j.
pub fn wavenumber<T: Real>(shape: &GridShape<T>, j: usize) -> T {
    let k = freq_index(j, shape.points_per_axis());
    T::PI() * T::of(k as f64) / shape.half_length()
}

/// In-place FFT along every axis of a row-major N^n cube. Lines are gathered
/// into a contiguous scratch buffer; n <= 3 keeps this cheap.
fn fft_all_axes<T: Scalar>(shape: &GridShape<T>, data: &mut [Complex<T>], inverse: bool) {
    let n_pts = shape.points_per_axis();
    let n_dim = shape.params().n() as usize;
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n_pts)
    } else {
        planner.plan_fft_forward(n_pts)
    };
    let mut line = vec![Complex::new(T::zero(), T::zero()); n_pts];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    for axis in 0..n_dim {
        // stride of the axis and number of lines across it
        let stride = n_pts.pow((n_dim - 1 - axis) as u32);
        let lines = data.len() / n_pts;
        for li in 0..lines {
            // base index of the li-th line along `axis`
            let block = li / stride;
            let offset = li % stride;
            let base = block * stride * n_pts + offset;
            for j in 0..n_pts {
                line[j] = data[base + j * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for j in 0..n_pts {
                data[base + j * stride] = line[j];
            }
        }
    }
    if inverse {
        let scale = T::of_usize(n_pts).powi(n_dim as i32).recip();
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Forward transform of the samples (unnormalized DFT coefficients).
pub fn forward<T: Scalar>(u: &GridFunction<T>) -> Vec<Complex<T>> {
    let mut data: Vec<Complex<T>> = u
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fft_all_axes(&u.shape(), &mut data, false);
    data
}

/// Inverse transform back to real samples (imaginary parts are dropped;
/// callers keep them at roundoff by using conjugate-symmetric multipliers).
pub fn inverse<T: Scalar>(shape: GridShape<T>, mut coeffs: Vec<Complex<T>>) -> Result<GridFunction<T>> {
    fft_all_axes(&shape, &mut coeffs, true);
    GridFunction::new(shape, coeffs.into_iter().map(|c| c.re).collect())
}

/// Visits every coefficient with its wavenumber vector (xi[..n] valid).
pub fn for_each_mode<T: Scalar>(
    shape: &GridShape<T>,
    coeffs: &mut [Complex<T>],
    mut f: impl FnMut(&[T; 3], &mut Complex<T>),
) {
    let n_pts = shape.points_per_axis();
    let n_dim = shape.params().n() as usize;
    // per-axis wavenumber table
    let table: Vec<T> = (0..n_pts).map(|j| wavenumber(shape, j)).collect();
    let mut xi = [T::zero(); 3];
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let mut rest = flat;
        for axis in (0..n_dim).rev() {
            xi[axis] = table[rest % n_pts];
            rest /= n_pts;
        }
        f(&xi, c);
    }
}

/// Multiplier g(|xi|^2) applied in Fourier space; g real keeps the result
/// real. The zero mode gets g(0), so mass scales by exactly that factor.
pub fn apply_radial_multiplier<T: Scalar>(
    u: &GridFunction<T>,
    mut g: impl FnMut(T) -> T,
) -> Result<GridFunction<T>> {
    let mut coeffs = forward(u);
    for_each_mode(&u.shape(), &mut coeffs, |xi, c| {
        let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        *c = *c * g(q);
    });
    inverse(u.shape(), coeffs)
}

/// (-Lap)^s u via the |xi|^{2s} multiplier.
pub fn fractional_laplacian<T: Scalar>(u: &GridFunction<T>, s: T) -> Result<GridFunction<T>> {
    if !(s > T::zero() && s <= T::one()) {
        return Err(Error::BadParams(format!("order s = {} outside (0, 1]", s.as_f64())));
    }
    apply_radial_multiplier(u, |q| if q == T::zero() { T::zero() } else { q.powf(s) })
}

/// d/dx_axis via the i*xi multiplier. The unpaired Nyquist mode is zeroed,
/// which keeps the output real and the derivative of even data odd.
pub fn derivative_axis<T: Scalar>(u: &GridFunction<T>, axis: usize) -> Result<GridFunction<T>> {
    let n_dim = u.shape().params().n() as usize;
    if axis >= n_dim {
        return Err(Error::BadParams(format!("axis {axis} out of range for n = {n_dim}")));
    }
    let n_pts = u.shape().points_per_axis();
    let nyquist = wavenumber(&u.shape(), n_pts / 2).abs();
    let mut coeffs = forward(u);
    for_each_mode(&u.shape(), &mut coeffs, |xi, c| {
        let k = xi[axis];
        *c = if k.abs() == nyquist {
            Complex::new(T::zero(), T::zero())
        } else {
            Complex::new(T::zero(), k) * *c
        };
    });
    inverse(u.shape(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::FracParams;
    use approx::assert_relative_eq;

    fn shape(n: u32, l: f64, m: usize) -> GridShape<f64> {
        GridShape::new(FracParams::new(n, 0.5).unwrap(), l, m).unwrap()
    }

    #[test]
    fn wavenumbers_wrap_at_nyquist() {
        let sh = shape(1, 2.0, 8);
        let xs: Vec<f64> = (0..8).map(|j| wavenumber(&sh, j)).collect();
        let pi = std::f64::consts::PI;
        let want = [0.0, 0.5, 1.0, 1.5, -2.0, -1.5, -1.0, -0.5].map(|k| k * pi);
        for (a, b) in xs.iter().zip(want.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let sh = shape(2, 3.0, 16);
        let u = GridFunction::from_fn(sh, |x| (x[0] * 2.1).sin() + (x[1] - 0.3).cos()).unwrap();
        let v = inverse(sh, forward(&u)).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn derivative_of_trig_mode_is_exact() {
        let sh = shape(1, std::f64::consts::PI, 64);
        let u = GridFunction::from_fn(sh, |x| (3.0 * x[0]).sin()).unwrap();
        let du = derivative_axis(&u, 0).unwrap();
        for (j, d) in du.values().iter().enumerate() {
            let x = sh.coordinate(j);
            assert_relative_eq!(*d, 3.0 * (3.0 * x).cos(), epsilon = 1e-11);
        }
        assert!(derivative_axis(&u, 1).is_err());
    }

    #[test]
    fn laplacian_order_one_matches_second_derivative() {
        let sh = shape(1, std::f64::consts::PI, 64);
        let u = GridFunction::from_fn(sh, |x| (2.0 * x[0]).cos()).unwrap();
        let lap = fractional_laplacian(&u, 1.0).unwrap();
        // (-Lap)^1 cos(2x) = 4 cos(2x)
        for (a, b) in lap.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, 4.0 * b, epsilon = 1e-11);
        }
    }

    #[test]
    fn fractional_laplacian_scales_single_mode() {
        let sh = shape(1, std::f64::consts::PI, 64);
        let u = GridFunction::from_fn(sh, |x| (5.0 * x[0]).cos()).unwrap();
        let lap = fractional_laplacian(&u, 0.5).unwrap();
        for (a, b) in lap.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, 5.0 * b, epsilon = 1e-10);
        }
        assert!(fractional_laplacian(&u, 0.0).is_err());
    }

    #[test]
    fn zero_mean_of_derivative_and_laplacian() {
        let sh = shape(1, 5.0, 128);
        let u = GridFunction::from_fn(sh, |x| (-x[0] * x[0]).exp()).unwrap();
        assert!(derivative_axis(&u, 0).unwrap().mass().abs() < 1e-13);
        assert!(fractional_laplacian(&u, 0.7).unwrap().mass().abs() < 1e-13);
    }

    #[test]
    fn multiplier_on_2d_radial_data_stays_radial() {
        let sh = shape(2, 4.0, 32);
        let u = GridFunction::from_fn(sh, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let v = apply_radial_multiplier(&u, |q| (-q).exp()).unwrap();
        // symmetry x <-> y preserved
        let m = 32;
        for i in 0..m {
            for j in 0..m {
                let a = v.values()[i * m + j];
                let b = v.values()[j * m + i];
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}
