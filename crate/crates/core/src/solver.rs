//! Evolution of initial data under d/dt u + (-Lap)^s u = 0 by two
//! independent routes: the periodic spectral multiplier e^{-t|xi|^{2s}}, and
//! free-space convolution against the kernel (the heavy-tail-faithful
//! oracle, with no periodic images).

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridShape, InitialDatum};
use crate::kernel::KernelProfile;
use crate::real::Real;
use crate::spectral::{self, Scalar};

/// Earliest time at which a point mass is grid-representable: the kernel
/// width t^{1/2s} must span two cells, t >= (2h)^{2s}.
pub fn warm_up_time<T: Real>(shape: &GridShape<T>) -> T {
    (shape.spacing() * T::of(2.0)).powf(shape.params().two_s())
}

/// Box large enough for evolution out to t_max: L >= 8 t_max^{1/2s}, i.e.
/// t_max <= (L/8)^{2s}.
pub fn max_admissible_time<T: Real>(shape: &GridShape<T>) -> T {
    (shape.half_length() * T::of(0.125)).powf(shape.params().two_s())
}

pub fn check_aliasing_budget<T: Real>(shape: &GridShape<T>, t_max: T) -> Result<()> {
    let cap = max_admissible_time(shape);
    if t_max > cap {
        return Err(Error::AliasingBudget {
            t_max: t_max.as_f64(),
            context: format!(
                "box half-length {} admits t <= {:.3e}; enlarge L or shorten the ladder",
                shape.half_length(),
                cap.as_f64()
            ),
        });
    }
    Ok(())
}

/// Mass of the kernel tail that wraps around the box by time t: the leading
/// power-tail estimate c_tail * omega/(2s) * L^{-2s} * t for s < 1, the
/// closed-form Gaussian complement at s = 1.
pub fn aliasing_estimate<T: Real>(profile: &KernelProfile<T>, shape: &GridShape<T>, t: T) -> T {
    let params = shape.params();
    let l = shape.half_length();
    if params.s() < T::one() {
        let (c_tail, _) = profile.tail_coefficient();
        c_tail * params.sphere_area() * params.inv_2s() * l.powf(-params.two_s()) * t
    } else {
        profile
            .ball_complement_mass(l / t.sqrt())
            .unwrap_or_else(|_| T::one())
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::BadParams(format!("time t = {t} must be positive")));
    }
    Ok(())
}

/// Samples of M * P(x - center, t) for unit M; the building block shared by
/// data catalogs and error reports.
pub fn kernel_grid<T: Scalar>(
    profile: &KernelProfile<T>,
    shape: GridShape<T>,
    t: T,
    center: &[T],
) -> Result<GridFunction<T>> {
    check_time(t)?;
    if profile.params() != shape.params() {
        return Err(Error::BadParams("profile and grid parameters differ".into()));
    }
    let n = shape.params().n() as usize;
    if center.len() != n {
        return Err(Error::BadParams(format!(
            "center has {} coordinates, dimension is {n}",
            center.len()
        )));
    }
    let sigma = shape.params().scale(t);
    let amp = shape.params().amplitude(t);
    GridFunction::from_fn(shape, |x| {
        let mut r2 = T::zero();
        for a in 0..n {
            let d = x[a] - center[a];
            r2 += d * d;
        }
        amp * profile.value(r2.sqrt() / sigma)
    })
}

/// Spectral evolution: DFT coefficients of the datum (grid part by FFT,
/// point masses analytically as e^{-i xi.x0}) multiplied by e^{-t|xi|^{2s}}.
/// The zero mode has multiplier one, so mass is conserved exactly.
pub fn evolve_spectral<T: Scalar>(datum: &InitialDatum<T>, t: T) -> Result<GridFunction<T>> {
    check_time(t)?;
    let shape = datum.shape();
    if !datum.point_masses().is_empty() {
        let warm = warm_up_time(&shape);
        if t < warm {
            return Err(Error::BadParams(format!(
                "point masses are not grid-representable before the warm-up \
                 time {:.3e}; evolve to t >= warm-up, or bake the masses into \
                 the grid part at a positive time first",
                warm.as_f64()
            )));
        }
    }
    let mut coeffs = match datum.grid_part() {
        Some(g) => spectral::forward(g),
        None => vec![Complex::new(T::zero(), T::zero()); shape.len()],
    };
    if !datum.point_masses().is_empty() {
        let inv_cell = shape.cell_volume().recip();
        let l = shape.half_length();
        let n = shape.params().n() as usize;
        spectral::for_each_mode(&shape, &mut coeffs, |xi, c| {
            for pm in datum.point_masses() {
                let mut phase = T::zero();
                for a in 0..n {
                    phase += xi[a] * (pm.location[a] + l);
                }
                let w = pm.mass * inv_cell;
                *c += Complex::new(w * phase.cos(), -(w * phase.sin()));
            }
        });
    }
    let s = shape.params().s();
    spectral::for_each_mode(&shape, &mut coeffs, |xi, c| {
        let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if q > T::zero() {
            *c = *c * (-t * q.powf(s)).exp();
        }
    });
    spectral::inverse(shape, coeffs)
}

/// Free-space evolution: u(x,t) = h^n sum_y P(x-y,t) u0(y) over the nonzero
/// grid atoms, plus m_k P(x-x_k,t) for each point mass. Quadratic in the
/// number of atoms; intended as the oracle, not the workhorse.
pub fn evolve_convolution<T: Scalar>(
    datum: &InitialDatum<T>,
    profile: &KernelProfile<T>,
    t: T,
) -> Result<GridFunction<T>> {
    check_time(t)?;
    let shape = datum.shape();
    if profile.params() != shape.params() {
        return Err(Error::BadParams("profile and datum parameters differ".into()));
    }
    let n = shape.params().n() as usize;
    // atoms: (location, weight) with grid weights h^n u(y)
    let mut atoms: Vec<([T; 3], T)> = Vec::new();
    if let Some(g) = datum.grid_part() {
        let h_n = shape.cell_volume();
        for (flat, &v) in g.values().iter().enumerate() {
            if v != T::zero() {
                atoms.push((shape.point(flat), v * h_n));
            }
        }
    }
    for pm in datum.point_masses() {
        let mut loc = [T::zero(); 3];
        loc[..n].copy_from_slice(&pm.location);
        atoms.push((loc, pm.mass));
    }
    let sigma = shape.params().scale(t);
    let amp = shape.params().amplitude(t);
    GridFunction::from_fn(shape, |x| {
        let mut acc = T::zero();
        for (y, w) in &atoms {
            let mut r2 = T::zero();
            for a in 0..n {
                let d = x[a] - y[a];
                r2 += d * d;
            }
            acc += *w * profile.value(r2.sqrt() / sigma);
        }
        acc * amp
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PointMass;
    use crate::params::FracParams;
    use crate::Profile;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn poisson() -> &'static Profile {
        static CELL: OnceLock<Profile> = OnceLock::new();
        CELL.get_or_init(|| Profile::explicit(FracParams::new(1, 0.5).unwrap()).unwrap())
    }

    fn shape(l: f64, m: usize) -> GridShape<f64> {
        GridShape::new(FracParams::new(1, 0.5).unwrap(), l, m).unwrap()
    }

    #[test]
    fn constant_datum_is_fixed_point() {
        let sh = shape(10.0, 64);
        let u = GridFunction::from_fn(sh, |_| 3.25).unwrap();
        let out = evolve_spectral(&InitialDatum::from_grid(u), 7.0).unwrap();
        for v in out.values() {
            assert_relative_eq!(*v, 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn mass_conserved_and_semigroup_composes() {
        let sh = shape(100.0, 512);
        let u = GridFunction::from_fn(sh, |x| (-(x[0] - 2.0) * (x[0] - 2.0)).exp()).unwrap();
        let datum = InitialDatum::from_grid(u.clone());
        let m0 = u.mass();

        let one = evolve_spectral(&datum, 1.0).unwrap();
        assert_relative_eq!(one.mass(), m0, max_relative = 1e-13);

        let two_steps =
            evolve_spectral(&InitialDatum::from_grid(one), 2.0).unwrap();
        let direct = evolve_spectral(&datum, 3.0).unwrap();
        for (a, b) in two_steps.values().iter().zip(direct.values()) {
            assert!((a - b).abs() <= 1e-13 * m0);
        }
    }

    #[test]
    fn point_mass_spectral_needs_warm_up() {
        let sh = shape(100.0, 512);
        let d = InitialDatum::from_masses(
            sh,
            vec![PointMass {
                location: vec![0.0],
                mass: 1.0,
            }],
        )
        .unwrap();
        let warm = warm_up_time(&sh);
        assert!(evolve_spectral(&d, warm * 0.5).is_err());
        let out = evolve_spectral(&d, 2.0).unwrap();
        assert_relative_eq!(out.mass(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn convolution_of_delta_is_kernel() {
        let sh = shape(50.0, 128);
        let d = InitialDatum::from_masses(
            sh,
            vec![PointMass {
                location: vec![1.5],
                mass: 2.0,
            }],
        )
        .unwrap();
        let out = evolve_convolution(&d, poisson(), 4.0).unwrap();
        for (j, v) in out.values().iter().enumerate() {
            let x = sh.coordinate(j);
            let want = 2.0 * poisson().kernel_at(&[x - 1.5], 4.0).unwrap();
            assert_relative_eq!(*v, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn dipole_is_odd_and_vanishes_at_origin() {
        let sh = shape(50.0, 128);
        let d = InitialDatum::from_masses(
            sh,
            vec![
                PointMass {
                    location: vec![3.0],
                    mass: 1.0,
                },
                PointMass {
                    location: vec![-3.0],
                    mass: -1.0,
                },
            ],
        )
        .unwrap();
        let out = evolve_convolution(&d, poisson(), 2.0).unwrap();
        let m = 128;
        assert_eq!(out.values()[m / 2], 0.0);
        // u(-x) = -u(x) away from the unpaired leftmost row
        for j in 1..m / 2 {
            assert_relative_eq!(out.values()[m / 2 + j], -out.values()[m / 2 - j], epsilon = 1e-15);
        }
    }

    #[test]
    fn spectral_reproduces_kernel_semigroup() {
        // evolve kernel samples at t0 = 1 by t = 1; compare with t = 2 kernel
        let sh = shape(400.0, 4096);
        let u0 = kernel_grid(poisson(), sh, 1.0, &[0.0]).unwrap();
        let out = evolve_spectral(&InitialDatum::from_grid(u0), 1.0).unwrap();
        let want = kernel_grid(poisson(), sh, 2.0, &[0.0]).unwrap();
        let peak = want.values()[2048];
        let worst = out
            .values()
            .iter()
            .zip(want.values())
            .fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
        assert!(worst <= 1e-4 * peak, "sup err {worst:.3e} vs peak {peak:.3e}");
    }

    #[test]
    fn methods_agree_on_smooth_compact_datum() {
        let sh = shape(400.0, 4096);
        let u0 = GridFunction::from_fn(sh, |x| {
            let r = x[0] / 2.0;
            if r.abs() < 1.0 {
                (1.0 - r * r).powi(3)
            } else {
                0.0
            }
        })
        .unwrap();
        let datum = InitialDatum::from_grid(u0.clone());
        let l1 = u0.lp_norm(1.0).unwrap();
        let a = evolve_spectral(&datum, 1.0).unwrap();
        let b = evolve_convolution(&datum, poisson(), 1.0).unwrap();
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |w, (x, y)| w.max((x - y).abs()));
        // discrepancy is the wrapped periodic image, ~ P_1(2L) per side
        assert!(worst <= 1e-5 * l1, "sup discrepancy {worst:.3e}, l1 {l1:.3}");
    }

    #[test]
    fn l1_contraction() {
        let sh = shape(100.0, 1024);
        let u = GridFunction::from_fn(sh, |x| (-(x[0] * x[0])).exp()).unwrap();
        let v = GridFunction::from_fn(sh, |x| {
            if x[0].abs() < 2.0 {
                0.4
            } else {
                0.0
            }
        })
        .unwrap();
        let du0 = u.combine(&v, 1.0, -1.0).unwrap().lp_norm(1.0).unwrap();
        let ut = evolve_spectral(&InitialDatum::from_grid(u), 5.0).unwrap();
        let vt = evolve_spectral(&InitialDatum::from_grid(v), 5.0).unwrap();
        let dut = ut.combine(&vt, 1.0, -1.0).unwrap().lp_norm(1.0).unwrap();
        assert!(dut <= du0 * (1.0 + 1e-12), "{dut} > {du0}");
    }

    #[test]
    fn radial_monotonicity_propagates() {
        let sh = shape(100.0, 1024);
        let u = GridFunction::from_fn(sh, |x| if x[0].abs() < 3.0 { 1.0 } else { 0.0 }).unwrap();
        let out = evolve_spectral(&InitialDatum::from_grid(u), 2.0).unwrap();
        let vals = out.values();
        let peak = vals[512];
        for j in 512..1023 {
            assert!(
                vals[j + 1] <= vals[j] + 1e-12 * peak,
                "not nonincreasing at offset {}",
                j - 512
            );
        }
    }

    #[test]
    fn aliasing_budget_checks() {
        let sh = shape(100.0, 512);
        assert!(check_aliasing_budget(&sh, 12.0).is_ok());
        assert!(check_aliasing_budget(&sh, 13.0).is_err());
        let est = aliasing_estimate(poisson(), &sh, 1.0);
        // 1/pi * 2 / (2s) * L^{-1} * t / ... = c than order 1e-3
        assert!(est > 0.0 && est < 1e-2, "estimate {est:.3e}");
    }
}
