//! The acceptance suite: fourteen numbered checks shared between
//! `fracheat verify-all` and the integration tests. Each check measures the
//! claim at its stated tolerance and returns one verdict; builds are cached
//! so the whole suite stays at desk scale.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Result};
use fracheat_core::asymptotics::{self, ErrorReport, ExactDatum, RateFn};
use fracheat_core::fokker_planck::{self, FpFrameSnapshot};
use fracheat_core::grid::{GridFunction, GridShape, InitialDatum};
use fracheat_core::params::FracParams;
use fracheat_core::solver;
use fracheat_core::Profile;

use crate::experiments::{
    interpolation_ratio, smoothing_bound, smoothing_catalog, write_atomic, Status, Verdict,
};

const ORDERS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

pub struct Suite {
    profiles: HashMap<(u32, u64), Profile>,
    reports: Vec<ErrorReport<f64>>,
    pub log: String,
}

impl Suite {
    pub fn new() -> Self {
        Suite {
            profiles: HashMap::new(),
            reports: Vec::new(),
            log: String::new(),
        }
    }

    fn profile(&mut self, n: u32, s: f64) -> Result<Profile> {
        let key = (n, s.to_bits());
        if !self.profiles.contains_key(&key) {
            let params = FracParams::new(n, s)?;
            let built = Profile::build_default(params)?;
            self.profiles.insert(key, built);
        }
        Ok(self.profiles[&key].clone())
    }

    fn note(&mut self, line: String) {
        self.log.push_str(&line);
        self.log.push('\n');
    }

    fn check(&mut self, criterion: u32, f: impl FnOnce(&mut Self) -> Result<Verdict>) -> Verdict {
        match f(self) {
            Ok(v) => v,
            Err(e) => Verdict {
                criterion,
                status: Status::Fail,
                detail: format!("errored: {e:#}"),
            },
        }
    }

    pub fn run_all(&mut self) -> Vec<Verdict> {
        let fns: [(u32, fn(&mut Self) -> Result<Verdict>); 14] = [
            (1, Self::c01_normalization),
            (2, Self::c02_closed_forms),
            (3, Self::c03_tail_law),
            (4, Self::c04_stationarity),
            (5, Self::c05_monotone_positive),
            (6, Self::c06_moment_dichotomy),
            (7, Self::c07_solver_cross_check),
            (8, Self::c08_smoothing),
            (9, Self::c09_rate),
            (10, Self::c10_relative_error),
            (11, Self::c11_corrector),
            (12, Self::c12_counterexample),
            (13, Self::c13_fokker_planck),
            (14, Self::c14_interpolation),
        ];
        let mut out = Vec::with_capacity(14);
        for (id, f) in fns {
            let started = Instant::now();
            let v = self.check(id, f);
            self.note(format!(
                "{} ({:.1}s)",
                v.line(),
                started.elapsed().as_secs_f64()
            ));
            out.push(v);
        }
        out
    }

    fn c01_normalization(&mut self) -> Result<Verdict> {
        let started = Instant::now();
        let mut worst = (0.0f64, 0u32, 0.0f64);
        let mut ok = true;
        for n in [1u32, 2] {
            let tol = if n == 2 { 1e-4 } else { 1e-6 };
            for s in ORDERS {
                let err = (self.profile(n, s)?.mass() - 1.0).abs();
                ok &= err <= tol;
                if err > worst.0 {
                    worst = (err, n, s);
                }
            }
        }
        let secs = started.elapsed().as_secs_f64();
        ok &= secs <= 30.0;
        Ok(Verdict {
            criterion: 1,
            status: Status::from_bool(ok),
            detail: format!(
                "worst |mass-1|={:.3e} at n={} s={} ({secs:.1}s, budget 30s)",
                worst.0, worst.1, worst.2
            ),
        })
    }

    fn c02_closed_forms(&mut self) -> Result<Verdict> {
        let mut worst = (0.0f64, 0.0f64);
        for s in [0.5, 1.0] {
            let built = self.profile(1, s)?;
            let explicit = Profile::explicit(built.params())?;
            let mut sup = 0.0f64;
            for &r in built.radii().iter().filter(|&&r| r <= 50.0) {
                let reference = explicit.value(r);
                sup = sup.max((built.value(r) - reference).abs() / reference);
            }
            if sup > worst.0 {
                worst = (sup, s);
            }
        }
        Ok(Verdict {
            criterion: 2,
            status: Status::from_bool(worst.0 <= 1e-6),
            detail: format!(
                "sup rel error {:.3e} (worst at s={}) tol 1e-6 for r<=50",
                worst.0, worst.1
            ),
        })
    }

    fn c03_tail_law(&mut self) -> Result<Verdict> {
        let mut detail = String::new();
        let mut ok = true;
        for s in [0.25, 0.5, 0.75] {
            let profile = self.profile(1, s)?;
            let power = 1.0 + 2.0 * s;
            let window: Vec<f64> = profile
                .radii()
                .iter()
                .zip(profile.values())
                .filter(|(&r, _)| (100.0..=200.0).contains(&r))
                .map(|(&r, &f)| r.powf(power) * f)
                .collect();
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let spread = hi / lo - 1.0;
            ok &= spread <= 0.02;
            let _ = write!(detail, "s={s}: spread={spread:.3e}");
            if s == 0.5 {
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                let vs_pi = (mean * std::f64::consts::PI - 1.0).abs();
                ok &= vs_pi <= 0.02;
                let _ = write!(detail, " pi*mean-1={vs_pi:.3e}");
            }
            detail.push_str("; ");
        }
        Ok(Verdict {
            criterion: 3,
            status: Status::from_bool(ok),
            detail: format!("{detail}window [100,200] tol 2%"),
        })
    }

    fn c04_stationarity(&mut self) -> Result<Verdict> {
        let mut detail = String::new();
        let mut ok = true;
        for (s, half_length, tol) in [(0.5, 200.0, 1e-2), (0.75, 200.0, 1e-2), (1.0, 40.0, 1e-6)]
        {
            let profile = self.profile(1, s)?;
            let shape = GridShape::new(profile.params(), half_length, 4096)?;
            let resid = fokker_planck::stationarity_residual(&profile, shape)?;
            ok &= resid <= tol;
            let _ = write!(detail, "s={s}: {resid:.3e} (tol {tol:.0e}); ");
        }
        Ok(Verdict {
            criterion: 4,
            status: Status::from_bool(ok),
            detail: format!("{detail}N=4096"),
        })
    }

    fn c05_monotone_positive(&mut self) -> Result<Verdict> {
        let mut ok = true;
        let mut points = 0usize;
        for n in [1u32, 2] {
            for s in ORDERS {
                let profile = self.profile(n, s)?;
                let v = profile.values();
                ok &= v.iter().all(|&f| f > 0.0);
                ok &= v.windows(2).all(|w| w[1] <= w[0]);
                points += v.len();
            }
        }
        Ok(Verdict {
            criterion: 5,
            status: Status::from_bool(ok),
            detail: format!("8 profiles, {points} tabulated points"),
        })
    }

    fn c06_moment_dichotomy(&mut self) -> Result<Verdict> {
        let mut detail = String::new();
        let mut ok = true;
        for s in ORDERS {
            let test = self.profile(1, s)?.moment_test(1.0)?;
            let expected = s <= 0.5;
            ok &= test.divergent == expected;
            let _ = write!(
                detail,
                "s={s}: divergent={} (want {expected}); ",
                test.divergent
            );
        }
        Ok(Verdict {
            criterion: 6,
            status: Status::from_bool(ok),
            detail,
        })
    }

    fn c07_solver_cross_check(&mut self) -> Result<Verdict> {
        let profile = self.profile(1, 0.5)?;
        let shape = GridShape::new(profile.params(), 200.0, 4096)?;
        let datum = InitialDatum::from_grid(GridFunction::from_fn(shape, |x| {
            let q = 1.0 - x[0] * x[0];
            if q > 0.0 {
                q * q * q
            } else {
                0.0
            }
        })?);
        let t = 1.0;

        let u_spec = solver::evolve_spectral(&datum, t)?;
        let u_conv = solver::evolve_convolution(&datum, &profile, t)?;
        let sup = u_spec
            .values()
            .iter()
            .zip(u_conv.values())
            .fold(0.0f64, |w, (&a, &b)| w.max((a - b).abs()));
        let bound = 1e-6 * datum.l1_norm() * shape.params().amplitude(t);
        let routes_ok = sup <= bound;

        let mid = solver::evolve_spectral(&datum, t)?;
        let via_half = solver::evolve_spectral(&InitialDatum::from_grid(mid), t)?;
        let direct = solver::evolve_spectral(&datum, 2.0 * t)?;
        let peak = direct.values().iter().fold(0.0f64, |w, &v| w.max(v.abs()));
        let semi = via_half
            .values()
            .iter()
            .zip(direct.values())
            .fold(0.0f64, |w, (&a, &b)| w.max((a - b).abs()));
        let semi_ok = semi <= 1e-12 * peak.max(1.0);

        let drift = (u_spec.mass() - datum.total_mass()).abs();
        let mass_ok = drift <= 1e-12 * datum.total_mass();

        Ok(Verdict {
            criterion: 7,
            status: Status::from_bool(routes_ok && semi_ok && mass_ok),
            detail: format!(
                "routes {sup:.3e} (bound {bound:.3e}), semigroup {semi:.3e}, mass drift {drift:.3e}"
            ),
        })
    }

    fn c08_smoothing(&mut self) -> Result<Verdict> {
        let mut detail = String::new();
        let mut ok = true;
        for s in ORDERS {
            let params = FracParams::new(1, s)?;
            let shape = GridShape::new(params, 200.0, 4096)?;
            let bound = smoothing_bound(s)
                .ok_or_else(|| anyhow!("no frozen bound at s={s}"))?;
            let mut worst = 0.0f64;
            for (name, datum) in smoothing_catalog(shape)? {
                let u = solver::evolve_spectral(&datum, 4.0)?;
                let sup = u.values().iter().fold(0.0f64, |w, &v| w.max(v.abs()));
                let ratio = sup * 4.0f64.powf(params.nf() * params.inv_2s()) / datum.l1_norm();
                if ratio > worst {
                    worst = ratio;
                }
                if ratio > bound {
                    ok = false;
                    let _ = write!(detail, "[{name} s={s}: {ratio:.4} > {bound}] ");
                }
            }
            let _ = write!(detail, "s={s}: worst {worst:.4} vs {bound}; ");
        }
        Ok(Verdict {
            criterion: 8,
            status: Status::from_bool(ok),
            detail: format!("{detail}10 data at t=4"),
        })
    }

    fn c09_rate(&mut self) -> Result<Verdict> {
        let started = Instant::now();
        let times: Vec<f64> = (0..7).map(|k| (1u64 << k) as f64).collect();
        let mut detail = String::new();
        let mut ok = true;
        for s in [0.25, 0.5, 0.75] {
            let profile = self.profile(1, s)?;
            let target = -1.0 / (2.0 * s);
            for (name, datum) in [
                ("shift", ExactDatum::point_mass(vec![0.5], 1.0)),
                ("indicator", ExactDatum::indicator(0.0, 1.0, 1024)?),
            ] {
                let reports = asymptotics::exact_flow_reports(
                    &datum,
                    &profile,
                    &times,
                    4096,
                    10.0,
                    &[2.0, 4.0],
                )?;
                let einf: Vec<f64> = reports.iter().map(|r| r.einf).collect();
                let fit = asymptotics::fit_rate(&times, &einf)?;
                let err = (fit.slope - target).abs();
                ok &= err <= 0.05;
                let _ = write!(detail, "{name} s={s}: slope {:.4}; ", fit.slope);
                self.reports.extend(reports);
            }
        }
        let secs = started.elapsed().as_secs_f64();
        ok &= secs <= 120.0;
        Ok(Verdict {
            criterion: 9,
            status: Status::from_bool(ok),
            detail: format!("{detail}tol 0.05, t in [1,64] ({secs:.1}s, budget 120s)"),
        })
    }

    fn c10_relative_error(&mut self) -> Result<Verdict> {
        let times: Vec<f64> = (0..7).map(|k| 8.0 * (1u64 << k) as f64).collect();
        let datum = ExactDatum::indicator(-1.0, 1.0, 1024)?;
        let mut detail = String::new();
        let mut ok = true;
        for s in [0.5, 0.75] {
            let profile = self.profile(1, s)?;
            let reports = asymptotics::exact_flow_reports(
                &datum,
                &profile,
                &times,
                4096,
                10.0,
                &[2.0, 4.0],
            )?;
            let q: Vec<f64> = reports
                .iter()
                .map(|r| r.rel_sup.expect("mass is nonzero") * r.t.powf(1.0 / (2.0 * s)))
                .collect();
            let q_min = q.iter().cloned().fold(f64::INFINITY, f64::min);
            let q_last = *q.last().unwrap();
            ok &= q_last <= 1.2 * q_min;
            let _ = write!(detail, "s={s}: final {q_last:.4e} vs min {q_min:.4e}; ");
            self.reports.extend(reports);
        }
        Ok(Verdict {
            criterion: 10,
            status: Status::from_bool(ok),
            detail: format!("{detail}indicator [-1,1], t in [8,512], tol 1.2x"),
        })
    }

    fn c11_corrector(&mut self) -> Result<Verdict> {
        let times: Vec<f64> = (0..7).map(|k| (1u64 << k) as f64).collect();
        let mut detail = String::new();
        let mut ok = true;
        for s in [0.5, 0.75] {
            let profile = self.profile(1, s)?;
            let datum = ExactDatum::point_mass(vec![1.0], 1.0);
            let reports =
                asymptotics::exact_flow_reports(&datum, &profile, &times, 4096, 10.0, &[2.0, 4.0])?;
            let corr: Vec<f64> = reports
                .iter()
                .map(|r| r.corrector_resid.expect("finite first moment"))
                .collect();
            let decayed = corr.last().unwrap() <= &(0.5 * corr[0]);
            ok &= decayed;
            let _ = write!(
                detail,
                "s={s}: {:.3e} -> {:.3e}; ",
                corr[0],
                corr.last().unwrap()
            );
            self.reports.extend(reports);
        }

        // zero first moment: the corrector term vanishes identically, so the
        // corrector series must equal the scaled plain relative series
        let profile = self.profile(1, 0.5)?;
        let pair = ExactDatum::Mixture {
            t0: 0.0,
            atoms: vec![(vec![-2.0], 0.5), (vec![2.0], 0.5)],
        };
        let reports =
            asymptotics::exact_flow_reports(&pair, &profile, &times, 4096, 10.0, &[2.0, 4.0])?;
        let mut coincide = true;
        for r in &reports {
            let plain = r.rel_sup.unwrap() * r.t;
            let corr = r.corrector_resid.unwrap();
            coincide &= (corr - plain).abs() <= 1e-12 * plain.max(1e-300);
        }
        ok &= coincide;
        self.reports.extend(reports);
        Ok(Verdict {
            criterion: 11,
            status: Status::from_bool(ok),
            detail: format!("{detail}symmetric pair coincides: {coincide}"),
        })
    }

    fn c12_counterexample(&mut self) -> Result<Verdict> {
        let profile = self.profile(1, 0.5)?;
        let spec = asymptotics::build_counterexample(RateFn::power(0.1)?, 3, &profile)?;
        let checks = asymptotics::verify_counterexample(&spec, &profile)?;
        let all_pass = checks.iter().all(|c| c.pass);
        let control = asymptotics::verify_counterexample(
            &spec.with_scaled_locations(0.5, &profile),
            &profile,
        )?;
        let control_fails = control.iter().any(|c| !c.pass);
        Ok(Verdict {
            criterion: 12,
            status: Status::from_bool(all_pass && control_fails),
            detail: format!(
                "k=1..3 pass={all_pass}; halved control fails at k={{{}}}",
                control
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.k.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        })
    }

    fn c13_fokker_planck(&mut self) -> Result<Verdict> {
        let taus: Vec<f64> = (8..=12).map(|k| ((1u64 << k) - 1) as f64).collect();
        let fp_params_shape = |params| GridShape::new(params, 10.0, 2048);
        let mut detail = String::new();
        let mut ok = true;
        for s in [0.5, 0.75] {
            let profile = self.profile(1, s)?;
            let params = profile.params();
            let shape = fp_params_shape(params)?;
            let shift = 1.0;
            let mut l1s = Vec::with_capacity(taus.len());
            for &tau in &taus {
                // exact flow of a unit point mass at shift*e1, mapped to the
                // similarity frame analytically: no box ever truncates it
                let lam = params.scale(1.0 + tau);
                let amp = params.amplitude(tau);
                let sigma = params.scale(tau);
                let v = GridFunction::from_fn(shape, |x| {
                    lam * amp * profile.value((lam * x[0] - shift).abs() / sigma)
                })?;
                let snap = FpFrameSnapshot {
                    v,
                    t: (1.0 + tau).ln(),
                    source_tau: tau,
                };
                let (l1, _linf) = fokker_planck::fp_error(&snap, &profile, 1.0)?;
                l1s.push(l1);
            }
            let shifted: Vec<f64> = taus.iter().map(|&tau| 1.0 + tau).collect();
            let fit = asymptotics::fit_rate(&shifted, &l1s)?;
            let target = -1.0 / (2.0 * s);
            let slope_ok = (fit.slope - target).abs() <= 0.07;

            let ref_shape = GridShape::new(params, 200.0, 4096)?;
            let eig = fokker_planck::eigen_residual(&profile, ref_shape, 0)?;
            let ray = fokker_planck::rayleigh_quotient(&profile, ref_shape, 0)?;
            let eig_ok = eig <= 2e-2;
            let ray_ok = (ray - target).abs() <= 0.1 * target.abs();
            ok &= slope_ok && eig_ok && ray_ok;
            let _ = write!(
                detail,
                "s={s}: slope {:.4} (want {target:.4}), eigen {eig:.2e}, rayleigh {ray:.4}; ",
                fit.slope
            );
        }
        Ok(Verdict {
            criterion: 13,
            status: Status::from_bool(ok),
            detail: format!("{detail}slope tol 0.07, eigen tol 2e-2, rayleigh tol 10%"),
        })
    }

    fn c14_interpolation(&mut self) -> Result<Verdict> {
        let (worst, checked) = interpolation_ratio(&self.reports);
        Ok(Verdict {
            criterion: 14,
            status: Status::from_bool(checked > 0 && worst <= 1.0 + 1e-6),
            detail: format!(
                "max ep/(e1^(1/p) einf^(1-1/p)) = {worst:.9} over {checked} checks, p in {{2,4}}"
            ),
        })
    }
}

impl Default for Suite {
    fn default() -> Self {
        Self::new()
    }
}

/// Run all fourteen checks and persist verdicts.txt plus a timing log.
pub fn run_all(out_dir: &Path) -> Result<Vec<Verdict>> {
    std::fs::create_dir_all(out_dir)?;
    let mut suite = Suite::new();
    let verdicts = suite.run_all();
    let mut text = String::new();
    for v in &verdicts {
        text.push_str(&v.line());
        text.push('\n');
    }
    write_atomic(&out_dir.join("verdicts.txt"), &text)?;
    write_atomic(&out_dir.join("log.txt"), &suite.log)?;
    Ok(verdicts)
}
