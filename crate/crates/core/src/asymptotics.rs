//! Long-time comparison of solutions with the kernel: renormalized error
//! reports, log-log rate fits, relative-error and corrector ladders, and the
//! escaping-mass construction showing no uniform convergence rate exists.

use crate::error::{Error, Result};
use crate::grid::{self, GridFunction, GridShape, InitialDatum, MomentSummary};
use crate::kernel::KernelProfile;
use crate::real::Real;
use crate::solver::{self, evolve_spectral};
use crate::spectral::Scalar;

/// Renormalized distances between a solution sample at time t and M P_t.
///
/// e1 is the plain L1 error; einf and ep carry the t^{n/2s} and
/// t^{n(p-1)/(2sp)} weights. rel_sup and corrector_resid are taken over the
/// trusted region P_t >= 1e3 eps P_t(0) and are None when they are not
/// defined for the datum (zero total mass, or a divergent first moment).
#[derive(Clone, Debug)]
pub struct ErrorReport<T> {
    pub t: T,
    pub e1: T,
    pub einf: T,
    /// (p, scaled Lp error) for each requested p
    pub ep: Vec<(T, T)>,
    pub rel_sup: Option<T>,
    /// t^{1/2s} sup |u - M P_t + N1 . grad P_t| / P_t
    pub corrector_resid: Option<T>,
}

fn norm_sq<T: Real>(x: &[T], n: usize) -> T {
    let mut r2 = T::zero();
    for a in 0..n {
        r2 += x[a] * x[a];
    }
    r2
}

pub fn error_report<T: Real>(
    u_t: &GridFunction<T>,
    profile: &KernelProfile<T>,
    m: T,
    t: T,
    moments: &MomentSummary<T>,
    p_list: &[T],
) -> Result<ErrorReport<T>> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::BadParams(format!("time t = {t} must be positive")));
    }
    let shape = u_t.shape();
    let params = shape.params();
    if profile.params() != params {
        return Err(Error::BadParams("profile and grid parameters differ".into()));
    }
    for &p in p_list {
        if !(p >= T::one() && p.is_finite()) {
            return Err(Error::Domain(format!(
                "norm index p = {p} outside [1, inf)"
            )));
        }
    }
    let n = params.n() as usize;
    let sigma = params.scale(t);
    let amp = params.amplitude(t);
    let floor = T::of(1e3) * T::epsilon() * amp * profile.value(T::zero());
    let drift = &moments.first_moment;
    let use_rel = m != T::zero();
    let use_corr = moments.abs_first_moment.is_some();

    let mut l1 = T::zero();
    let mut linf = T::zero();
    let mut lp = vec![T::zero(); p_list.len()];
    let mut rel = T::zero();
    let mut corr = T::zero();
    for (flat, &u) in u_t.values().iter().enumerate() {
        let x = shape.point(flat);
        let r = norm_sq(&x, n).sqrt();
        let p_val = amp * profile.value(r / sigma);
        let d = u - m * p_val;
        let ad = d.abs();
        l1 += ad;
        linf = linf.max(ad);
        for (acc, &p) in lp.iter_mut().zip(p_list) {
            *acc += ad.powf(p);
        }
        if p_val >= floor {
            if use_rel {
                rel = rel.max(ad / p_val);
            }
            if use_corr {
                let mut c = d;
                if r > T::zero() {
                    let pref = amp / sigma * profile.derivative(r / sigma) / r;
                    for a in 0..n {
                        c += drift[a] * pref * x[a];
                    }
                }
                corr = corr.max(c.abs() / p_val);
            }
        }
    }
    let h_n = shape.cell_volume();
    let t_scale = amp.recip();
    Ok(ErrorReport {
        t,
        e1: l1 * h_n,
        einf: t_scale * linf,
        ep: p_list
            .iter()
            .zip(&lp)
            .map(|(&p, &acc)| {
                let w = t_scale.powf((p - T::one()) / p);
                (p, w * (acc * h_n).powf(p.recip()))
            })
            .collect(),
        rel_sup: use_rel.then_some(rel),
        corrector_resid: use_corr.then_some(sigma * corr),
    })
}

/// Least-squares power-law fit of err(t) in (log t, log err) coordinates.
#[derive(Clone, Copy, Debug)]
pub struct RateEstimate<T> {
    pub slope: T,
    pub intercept: T,
    /// max absolute deviation from the fit line, in log space
    pub residual: T,
    pub window: (T, T),
}

pub fn fit_rate<T: Real>(times: &[T], values: &[T]) -> Result<RateEstimate<T>> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::BadParams(format!(
            "rate fit needs >= 4 samples, got {} times and {} values",
            times.len(),
            values.len()
        )));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::BadParams("times must be strictly increasing".into()));
        }
    }
    if !(times[0] > T::zero()) {
        return Err(Error::BadParams("times must be positive".into()));
    }
    let mut xs = Vec::with_capacity(times.len());
    let mut ys = Vec::with_capacity(times.len());
    for (&t, &v) in times.iter().zip(values) {
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::Domain(format!(
                "rate fit needs positive values, got {v} at t = {t}"
            )));
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    let count = T::of_usize(times.len());
    let xbar = xs.iter().fold(T::zero(), |a, &x| a + x) / count;
    let ybar = ys.iter().fold(T::zero(), |a, &y| a + y) / count;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut residual = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        residual = residual.max((y - intercept - slope * x).abs());
    }
    Ok(RateEstimate {
        slope,
        intercept,
        residual,
        window: (times[0], *times.last().unwrap()),
    })
}

/// Initial data whose evolution is known in closed form, so ladders can run
/// to large times on freshly scaled sampling boxes with no periodic images
/// and no accumulation of solver error.
///
/// A mixture sum_k m_k P_{t0}(. - c_k) evolves to sum_k m_k P_{t0+t}(. - c_k);
/// t0 = 0 is a family of point masses. The 1D interval indicator is evolved
/// by midpoint quadrature of the exact convolution over `cells` sub-cells.
#[derive(Clone, Debug)]
pub enum ExactDatum<T> {
    Mixture { t0: T, atoms: Vec<(Vec<T>, T)> },
    Interval { a: T, b: T, cells: usize },
}

impl<T: Real> ExactDatum<T> {
    pub fn point_mass(location: Vec<T>, mass: T) -> Self {
        ExactDatum::Mixture {
            t0: T::zero(),
            atoms: vec![(location, mass)],
        }
    }

    /// P_{t0}(. - shift), unit mass.
    pub fn shifted_kernel(t0: T, shift: Vec<T>) -> Self {
        ExactDatum::Mixture {
            t0,
            atoms: vec![(shift, T::one())],
        }
    }

    /// Antisymmetric pair: +1 at a e1, -1 at -a e1 (one dimension).
    pub fn dipole(a: T) -> Self {
        ExactDatum::Mixture {
            t0: T::zero(),
            atoms: vec![(vec![a], T::one()), (vec![-a], -T::one())],
        }
    }

    pub fn indicator(a: T, b: T, cells: usize) -> Result<Self> {
        if !(b > a && a.is_finite() && b.is_finite()) || cells == 0 {
            return Err(Error::BadParams(format!(
                "indicator needs a < b and cells > 0, got [{a}, {b}] with {cells}"
            )));
        }
        Ok(ExactDatum::Interval { a, b, cells })
    }

    pub fn dimension(&self) -> Result<usize> {
        match self {
            ExactDatum::Mixture { atoms, .. } => {
                let n = atoms.first().map_or(0, |(c, _)| c.len());
                if n == 0 || atoms.iter().any(|(c, _)| c.len() != n) {
                    return Err(Error::BadParams(
                        "mixture atoms must share a nonzero dimension".into(),
                    ));
                }
                Ok(n)
            }
            ExactDatum::Interval { .. } => Ok(1),
        }
    }

    pub fn mass(&self) -> T {
        match self {
            ExactDatum::Mixture { atoms, .. } => {
                atoms.iter().fold(T::zero(), |acc, (_, m)| acc + *m)
            }
            ExactDatum::Interval { a, b, .. } => *b - *a,
        }
    }

    /// Farthest reach of the datum from the origin.
    pub fn extent(&self) -> T {
        match self {
            ExactDatum::Mixture { atoms, .. } => atoms.iter().fold(T::zero(), |acc, (c, _)| {
                acc.max(norm_sq(c, c.len()).sqrt())
            }),
            ExactDatum::Interval { a, b, .. } => a.abs().max(b.abs()),
        }
    }

    /// Exact mass and first moments. The absolute moment of a spread kernel
    /// atom (t0 > 0) is estimated from the profile table and flagged
    /// divergent for s <= 1/2, matching the moment dichotomy.
    pub fn moment_summary(&self, profile: &KernelProfile<T>) -> Result<MomentSummary<T>> {
        let n = self.dimension()?;
        match self {
            ExactDatum::Mixture { t0, atoms } => {
                let mut first = vec![T::zero(); n];
                let mut abs = Some(T::zero());
                for (c, m) in atoms {
                    for a in 0..n {
                        first[a] += *m * c[a];
                    }
                    let reach = norm_sq(c, n).sqrt();
                    if *t0 > T::zero() {
                        let params = profile.params();
                        if params.two_s() <= T::one() {
                            abs = None;
                        } else if let Some(v) = abs.as_mut() {
                            // |x| <= |c| + |x - c| under the atom's own kernel
                            let r_max = profile.r_max();
                            let (c_tail, _) = profile.tail_coefficient();
                            let spread = profile.truncated_moment(T::one(), r_max)?
                                + c_tail * params.sphere_area()
                                    * r_max.powf(T::one() - params.two_s())
                                    / (params.two_s() - T::one());
                            *v += m.abs() * (reach + params.scale(*t0) * spread);
                        }
                    } else if let Some(v) = abs.as_mut() {
                        *v += m.abs() * reach;
                    }
                }
                Ok(MomentSummary {
                    mass: self.mass(),
                    first_moment: first,
                    abs_first_moment: abs,
                })
            }
            ExactDatum::Interval { a, b, .. } => Ok(MomentSummary {
                mass: *b - *a,
                first_moment: vec![(*b * *b - *a * *a) * T::of(0.5)],
                abs_first_moment: Some((*b * b.abs() - *a * a.abs()) * T::of(0.5)),
            }),
        }
    }

    /// u(x, t) for the exact flow.
    pub fn evaluate(&self, profile: &KernelProfile<T>, t: T, x: &[T]) -> Result<T> {
        match self {
            ExactDatum::Mixture { t0, atoms } => {
                let mut acc = T::zero();
                let mut shifted = vec![T::zero(); x.len()];
                for (c, m) in atoms {
                    for (a, sx) in shifted.iter_mut().enumerate() {
                        *sx = x[a] - c[a];
                    }
                    acc += *m * profile.kernel_at(&shifted, *t0 + t)?;
                }
                Ok(acc)
            }
            ExactDatum::Interval { a, b, cells } => {
                let w = (*b - *a) / T::of_usize(*cells);
                let mut acc = T::zero();
                for i in 0..*cells {
                    let y = *a + w * (T::of_usize(i) + T::of(0.5));
                    acc += profile.kernel_at(&[x[0] - y], t)?;
                }
                Ok(acc * w)
            }
        }
    }
}

/// Evolve an exact datum along a time ladder, reporting against M P_t on a
/// sampling box of half-length extent + radius_factor * t^{1/2s} at each
/// time, so the comparison region tracks the kernel's own scale.
pub fn exact_flow_reports<T: Real>(
    datum: &ExactDatum<T>,
    profile: &KernelProfile<T>,
    times: &[T],
    points: usize,
    radius_factor: T,
    p_list: &[T],
) -> Result<Vec<ErrorReport<T>>> {
    let params = profile.params();
    if datum.dimension()? != params.n() as usize {
        return Err(Error::BadParams("datum and profile dimensions differ".into()));
    }
    let m = datum.mass();
    let moments = datum.moment_summary(profile)?;
    let mut reports = Vec::with_capacity(times.len());
    for &t in times {
        let l = datum.extent() + radius_factor * params.scale(t);
        let shape = GridShape::new(params, l, points)?;
        let mut worst: Option<Error> = None;
        let u = GridFunction::from_fn(shape, |x| match datum.evaluate(profile, t, x) {
            Ok(v) => v,
            Err(e) => {
                worst = Some(e);
                T::zero()
            }
        })?;
        if let Some(e) = worst {
            return Err(e);
        }
        reports.push(error_report(&u, profile, m, t, &moments, p_list)?);
    }
    Ok(reports)
}

/// Fitted decay of einf for a grid datum evolved spectrally, with the
/// first-moment envelope the fitted prefactor is compared against.
#[derive(Clone, Debug)]
pub struct RateExperiment<T> {
    pub reports: Vec<ErrorReport<T>>,
    pub fit: RateEstimate<T>,
    /// e^{intercept}, the fitted constant in einf ~ prefactor * t^{slope}
    pub prefactor: T,
    /// envelope constant times N1(u0); None when the datum's absolute first
    /// moment is flagged divergent, in which case only the slope is claimed
    pub envelope: Option<T>,
}

/// Measured stand-in for the sharp constant in the first-order error bound:
/// 1.25 sup |F'|, a quarter above the exact first-order coefficient.
pub fn rate_envelope_constant<T: Real>(profile: &KernelProfile<T>) -> T {
    T::of(1.25) * profile.sup_derivative()
}

pub fn rate_experiment<T: Scalar>(
    datum: &InitialDatum<T>,
    profile: &KernelProfile<T>,
    times: &[T],
    p: T,
) -> Result<RateExperiment<T>> {
    let shape = datum.shape();
    if profile.params() != shape.params() {
        return Err(Error::BadParams("profile and datum parameters differ".into()));
    }
    let last = *times
        .last()
        .ok_or_else(|| Error::BadParams("empty time ladder".into()))?;
    solver::check_aliasing_budget(&shape, last)?;
    let m = datum.total_mass();
    let moments = grid::moments(datum);
    let mut reports = Vec::with_capacity(times.len());
    for &t in times {
        let u = evolve_spectral(datum, t)?;
        reports.push(error_report(&u, profile, m, t, &moments, &[p])?);
    }
    let einf: Vec<T> = reports.iter().map(|r| r.einf).collect();
    let fit = fit_rate(times, &einf)?;
    Ok(RateExperiment {
        prefactor: fit.intercept.exp(),
        envelope: moments
            .abs_first_moment
            .map(|n1| rate_envelope_constant(profile) * n1),
        reports,
        fit,
    })
}

/// Relative-error ladder for compactly supported data: evolves spectrally
/// and reports rel_sup at each time. The support radius is declared by the
/// caller and checked against the datum.
/// Relative and corrector sups restricted to |x| <= r_trust. The periodic
/// solver floors the far-field ratio at (|x|/(2L-|x|))^{n+2s} * M from
/// wrap-around images, independent of t, so the uniform-in-x theorem is only
/// measurable on the self-similar window where its sup actually sits.
fn windowed_relative<T: Real>(
    u_t: &GridFunction<T>,
    profile: &KernelProfile<T>,
    m: T,
    t: T,
    moments: &MomentSummary<T>,
    r_trust: T,
) -> (T, Option<T>) {
    let shape = u_t.shape();
    let params = shape.params();
    let n = params.n() as usize;
    let sigma = params.scale(t);
    let amp = params.amplitude(t);
    let floor = T::of(1e3) * T::epsilon() * amp * profile.value(T::zero());
    let drift = &moments.first_moment;
    let use_corr = moments.abs_first_moment.is_some();
    let mut rel = T::zero();
    let mut corr = T::zero();
    for (flat, &u) in u_t.values().iter().enumerate() {
        let x = shape.point(flat);
        let r = norm_sq(&x, n).sqrt();
        if r > r_trust {
            continue;
        }
        let p_val = amp * profile.value(r / sigma);
        if p_val < floor {
            continue;
        }
        let d = u - m * p_val;
        rel = rel.max(d.abs() / p_val);
        if use_corr {
            let mut c = d;
            if r > T::zero() {
                let pref = amp / sigma * profile.derivative(r / sigma) / r;
                for a in 0..n {
                    c += drift[a] * pref * x[a];
                }
            }
            corr = corr.max(c.abs() / p_val);
        }
    }
    (rel, use_corr.then_some(sigma * corr))
}

/// The ratio window |x| <= R + 4 sigma(t) must clear the box edge by a
/// margin or the wrapped tail pollutes it; L/4 keeps the nearest image at
/// least 7x further out than any trusted point.
fn check_ratio_window<T: Real>(shape: &GridShape<T>, reach: T, t_max: T) -> Result<T> {
    let window = reach + T::of(4.0) * shape.params().scale(t_max);
    let limit = shape.half_length() * T::of(0.25);
    if window > limit {
        let sigma_max = (limit - reach) / T::of(4.0);
        let hint = if sigma_max > T::zero() {
            format!(
                "; admissible t <= {:.3e}",
                sigma_max.powf(shape.params().two_s()).as_f64()
            )
        } else {
            String::new()
        };
        return Err(Error::BoxTooSmall(format!(
            "trusted ratio window |x| <= {:.1} at t = {} exceeds L/4 = {:.1}{hint}",
            window.as_f64(),
            t_max.as_f64(),
            limit.as_f64()
        )));
    }
    Ok(window)
}

fn datum_reach<T: Scalar>(datum: &InitialDatum<T>) -> T {
    let shape = datum.shape();
    let n = shape.params().n() as usize;
    let mut reach = T::zero();
    if let Some(g) = datum.grid_part() {
        for (flat, &v) in g.values().iter().enumerate() {
            if v != T::zero() {
                reach = reach.max(norm_sq(&shape.point(flat), n).sqrt());
            }
        }
    }
    for pm in datum.point_masses() {
        reach = reach.max(norm_sq(&pm.location, n).sqrt());
    }
    reach
}

pub fn relative_error_experiment<T: Scalar>(
    datum: &InitialDatum<T>,
    profile: &KernelProfile<T>,
    support_radius: T,
    times: &[T],
) -> Result<Vec<ErrorReport<T>>> {
    let shape = datum.shape();
    if profile.params() != shape.params() {
        return Err(Error::BadParams("profile and datum parameters differ".into()));
    }
    let reach = datum_reach(datum);
    if reach > support_radius {
        return Err(Error::BadParams(format!(
            "datum reaches |y| = {} outside the declared support radius {}",
            reach.as_f64(),
            support_radius.as_f64()
        )));
    }
    if datum.total_mass() == T::zero() {
        return Err(Error::Domain(
            "relative error is undefined for zero total mass".into(),
        ));
    }
    let last = *times
        .last()
        .ok_or_else(|| Error::BadParams("empty time ladder".into()))?;
    solver::check_aliasing_budget(&shape, last)?;
    check_ratio_window(&shape, support_radius, last)?;
    let m = datum.total_mass();
    let moments = grid::moments(datum);
    let mut reports = Vec::with_capacity(times.len());
    for &t in times {
        let u = evolve_spectral(datum, t)?;
        let mut rep = error_report(&u, profile, m, t, &moments, &[])?;
        let window = support_radius + T::of(4.0) * shape.params().scale(t);
        let (rel, corr) = windowed_relative(&u, profile, m, t, &moments, window);
        rep.rel_sup = Some(rel);
        rep.corrector_resid = corr;
        reports.push(rep);
    }
    Ok(reports)
}

/// Corrector ladder: same pipeline, requiring nonzero mass and an
/// unflagged (finite) absolute first moment so the corrector field exists.
pub fn corrector_experiment<T: Scalar>(
    datum: &InitialDatum<T>,
    profile: &KernelProfile<T>,
    times: &[T],
) -> Result<Vec<ErrorReport<T>>> {
    if datum.total_mass() == T::zero() {
        return Err(Error::Domain(
            "corrector ladder is normalized by the mass; it must be nonzero".into(),
        ));
    }
    let moments = grid::moments(datum);
    if moments.abs_first_moment.is_none() {
        return Err(Error::Domain(
            "first absolute moment flagged divergent; the corrector needs \
             compactly supported data"
                .into(),
        ));
    }
    let shape = datum.shape();
    if profile.params() != shape.params() {
        return Err(Error::BadParams("profile and datum parameters differ".into()));
    }
    let last = *times
        .last()
        .ok_or_else(|| Error::BadParams("empty time ladder".into()))?;
    solver::check_aliasing_budget(&shape, last)?;
    let reach = datum_reach(datum);
    check_ratio_window(&shape, reach, last)?;
    let m = datum.total_mass();
    let mut reports = Vec::with_capacity(times.len());
    for &t in times {
        let u = evolve_spectral(datum, t)?;
        let mut rep = error_report(&u, profile, m, t, &moments, &[])?;
        let window = reach + T::of(4.0) * shape.params().scale(t);
        let (rel, corr) = windowed_relative(&u, profile, m, t, &moments, window);
        rep.rel_sup = Some(rel);
        rep.corrector_resid = corr;
        reports.push(rep);
    }
    Ok(reports)
}

/// Decreasing rate functions the counterexample can be built against.
#[derive(Clone, Copy, Debug)]
pub enum RateFn<T> {
    PowerLaw { alpha: T },
    LogPower { beta: T },
}

impl<T: Real> RateFn<T> {
    pub fn power(alpha: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(Error::BadParams(format!(
                "power rate needs alpha > 0, got {alpha}"
            )));
        }
        Ok(RateFn::PowerLaw { alpha })
    }

    pub fn log_power(beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta.is_finite()) {
            return Err(Error::BadParams(format!(
                "log-power rate needs beta > 0, got {beta}"
            )));
        }
        Ok(RateFn::LogPower { beta })
    }

    /// Value at t; decreasing for t > 1 by the constructor checks.
    pub fn eval(&self, t: T) -> T {
        match self {
            RateFn::PowerLaw { alpha } => t.powf(-*alpha),
            RateFn::LogPower { beta } => t.ln().powf(-*beta),
        }
    }
}

impl<T: Real> std::fmt::Display for RateFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateFn::PowerLaw { alpha } => write!(f, "t^-{alpha}"),
            RateFn::LogPower { beta } => write!(f, "(log t)^-{beta}"),
        }
    }
}

/// A datum (1-delta) delta_0 + sum_k m_k delta_{x_k e1} whose renormalized
/// error at x = 0 stays above k phi(t_k) along the time sequence, beating
/// any candidate uniform rate phi.
#[derive(Clone, Debug)]
pub struct CounterexampleSpec<T> {
    pub rate: RateFn<T>,
    /// m_k = 2^-k
    pub masses: Vec<T>,
    /// radii |x_k|; the mass sits at x_k e1
    pub locations: Vec<T>,
    pub times: Vec<T>,
    pub delta: T,
    /// certified lower bound m_k (F(0) - F(|x_k| t_k^{-1/2s})) at each k
    pub certified: Vec<T>,
}

impl<T: Real> CounterexampleSpec<T> {
    /// Negative control: same times and masses with every |x_k| scaled,
    /// breaking the F(0)/2 separation when factor < 1.
    pub fn with_scaled_locations(&self, factor: T, profile: &KernelProfile<T>) -> Self {
        let params = profile.params();
        let f0 = profile.value(T::zero());
        let locations: Vec<T> = self.locations.iter().map(|&x| x * factor).collect();
        let certified = self
            .masses
            .iter()
            .zip(&locations)
            .zip(&self.times)
            .map(|((&m, &x), &t)| m * (f0 - profile.value(x / params.scale(t))))
            .collect();
        CounterexampleSpec {
            rate: self.rate,
            masses: self.masses.clone(),
            locations,
            times: self.times.clone(),
            delta: self.delta,
            certified,
        }
    }
}

/// Smallest radius (to bisection accuracy) where F drops strictly below
/// F(0)/2; exists because F is continuous and decreasing to 0.
fn half_value_radius<T: Real>(profile: &KernelProfile<T>) -> T {
    let target = profile.value(T::zero()) * T::of(0.5);
    let mut hi = T::one();
    while profile.value(hi) >= target {
        hi = hi + hi;
    }
    let mut lo = hi * T::of(0.5);
    for _ in 0..200 {
        let mid = (lo + hi) * T::of(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if profile.value(mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn build_counterexample<T: Real>(
    rate: RateFn<T>,
    k_terms: usize,
    profile: &KernelProfile<T>,
) -> Result<CounterexampleSpec<T>> {
    if !(1..=8).contains(&k_terms) {
        return Err(Error::BadParams(format!(
            "term count {k_terms} outside 1..=8"
        )));
    }
    let params = profile.params();
    let f0 = profile.value(T::zero());
    let r_half = half_value_radius(profile);
    let mut masses = Vec::with_capacity(k_terms);
    let mut locations = Vec::with_capacity(k_terms);
    let mut times = Vec::with_capacity(k_terms);
    let mut certified = Vec::with_capacity(k_terms);
    let mut t_prev = T::one();
    let mut delta = T::zero();
    for k in 1..=k_terms {
        let m = T::of(0.5).powi(k as i32);
        let threshold = f0 * m / T::of_usize(2 * k);
        let mut t = (t_prev * T::of(4.0)).max(T::of(2.0));
        while rate.eval(t) > threshold {
            t = t + t;
            if !t.is_finite() {
                return Err(Error::Domain(format!(
                    "rate {rate} decreases too slowly: the time needed at \
                     term {k} exceeds the floating-point range"
                )));
            }
        }
        let x = r_half * params.scale(t);
        let bound = m * (f0 - profile.value(x / params.scale(t)));
        if bound < T::of_usize(k) * rate.eval(t) {
            return Err(Error::Invariant(format!(
                "certified bound {:.3e} under k phi(t_k) = {:.3e} at k = {k}",
                bound.as_f64(),
                (T::of_usize(k) * rate.eval(t)).as_f64()
            )));
        }
        masses.push(m);
        locations.push(x);
        times.push(t);
        certified.push(bound);
        delta += m;
        t_prev = t;
    }
    Ok(CounterexampleSpec {
        rate,
        masses,
        locations,
        times,
        delta,
        certified,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CounterexampleCheck<T> {
    pub k: usize,
    pub t: T,
    /// measured t^{n/2s} |u(0, t_k) - P_{t_k}(0)|
    pub deficit: T,
    /// k phi(t_k)
    pub required: T,
    pub pass: bool,
}

/// Evaluate the mixture analytically at the probe times and compare the
/// renormalized deficit at the origin with k phi(t_k). Exact kernel
/// evaluation throughout: the construction places mass at |x_k| ~ t_k^{1/2s},
/// far outside any fixed solver box.
pub fn verify_counterexample<T: Real>(
    spec: &CounterexampleSpec<T>,
    profile: &KernelProfile<T>,
) -> Result<Vec<CounterexampleCheck<T>>> {
    let k_terms = spec.masses.len();
    if spec.locations.len() != k_terms || spec.times.len() != k_terms {
        return Err(Error::BadParams("ragged counterexample spec".into()));
    }
    if !(spec.delta < T::one()) {
        return Err(Error::BadParams(format!(
            "leftover mass requires delta < 1, got {}",
            spec.delta.as_f64()
        )));
    }
    let params = profile.params();
    let n = params.n() as usize;
    let origin = vec![T::zero(); n];
    let mut checks = Vec::with_capacity(k_terms);
    for (k, &t) in spec.times.iter().enumerate() {
        let p0 = profile.kernel_at(&origin, t)?;
        let mut u0 = (T::one() - spec.delta) * p0;
        for (&m, &x) in spec.masses.iter().zip(&spec.locations) {
            let mut loc = vec![T::zero(); n];
            loc[0] = x;
            u0 += m * profile.kernel_at(&loc, t)?;
        }
        let deficit = (u0 - p0).abs() / params.amplitude(t);
        let required = T::of_usize(k + 1) * spec.rate.eval(t);
        checks.push(CounterexampleCheck {
            k: k + 1,
            t,
            deficit,
            required,
            pass: deficit >= required,
        });
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PointMass;
    use crate::params::FracParams;
    use crate::solver::kernel_grid;
    use crate::Profile;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn poisson() -> &'static Profile {
        static CELL: OnceLock<Profile> = OnceLock::new();
        CELL.get_or_init(|| Profile::explicit(FracParams::new(1, 0.5).unwrap()).unwrap())
    }

    fn dyadic(t0: f64, count: usize) -> Vec<f64> {
        (0..count).map(|j| t0 * (1u64 << j) as f64).collect()
    }

    #[test]
    fn fit_exact_power_law() {
        let times = [1.0, 2.0, 4.0, 8.0, 16.0];
        let values: Vec<f64> = times.iter().map(|t| 3.0 / t).collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_relative_eq!(fit.slope, -1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept.exp(), 3.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.window, (1.0, 16.0));

        let flat = [2.0; 5];
        assert_relative_eq!(fit_rate(&times, &flat).unwrap().slope, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn fit_tolerates_small_wobble() {
        let times = dyadic(1.0, 8);
        let values: Vec<f64> = times
            .iter()
            .map(|t| 2.0 * t.powf(-0.5) * (1.0 + 0.01 * t.ln().sin()))
            .collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02, "slope {}", fit.slope);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_rate(&[1.0, 2.0, 4.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 2.0, 4.0], &[1.0; 4]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 4.0, 8.0], &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn identity_report_is_exact_zero() {
        let profile = poisson();
        let shape = GridShape::new(profile.params(), 50.0, 256).unwrap();
        let u = kernel_grid(profile, shape, 2.0, &[0.0]).unwrap();
        let moments = MomentSummary {
            mass: 1.0,
            first_moment: vec![0.0],
            abs_first_moment: Some(0.0),
        };
        let rep = error_report(&u, profile, 1.0, 2.0, &moments, &[2.0, 4.0]).unwrap();
        assert_eq!(rep.e1, 0.0);
        assert_eq!(rep.einf, 0.0);
        assert_eq!(rep.ep, vec![(2.0, 0.0), (4.0, 0.0)]);
        assert_eq!(rep.rel_sup, Some(0.0));
        assert_eq!(rep.corrector_resid, Some(0.0));
    }

    #[test]
    fn shifted_kernel_error_is_first_order() {
        // sup_x |P_t(x-h) - P_t(x)| ~ h sup |P_t'| = h t^{-(n+1)/2s} sup|F'|
        let profile = poisson();
        let (h, t) = (0.01, 4.0);
        let datum = ExactDatum::point_mass(vec![h], 1.0);
        let rep = &exact_flow_reports(&datum, profile, &[t], 16384, 10.0, &[])
            .unwrap()[0];
        let sup_deriv = profile.sup_derivative();
        assert_relative_eq!(rep.einf, h / t * sup_deriv, max_relative = 0.02);
    }

    #[test]
    fn dipole_has_no_relative_error_and_unit_rate() {
        let times = dyadic(4.0, 7);
        let datum = ExactDatum::dipole(1.0);
        let reports =
            exact_flow_reports(&datum, poisson(), &times, 8192, 8.0, &[2.0]).unwrap();
        assert!(reports.iter().all(|r| r.rel_sup.is_none()));
        // zero-mass pair decays one similarity order faster than the kernel
        let einf: Vec<f64> = reports.iter().map(|r| r.einf).collect();
        let fit = fit_rate(&times, &einf).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.04, "slope {}", fit.slope);
        // corrector uses the exact moment vector and decays as well
        let corr: Vec<f64> = reports
            .iter()
            .map(|r| r.corrector_resid.unwrap())
            .collect();
        assert!(corr.last().unwrap() < &(0.5 * corr[0]));
    }

    #[test]
    fn symmetric_pair_corrector_equals_scaled_relative_error() {
        let times = dyadic(4.0, 4);
        let datum = ExactDatum::Mixture {
            t0: 0.0,
            atoms: vec![(vec![1.5], 1.0), (vec![-1.5], 1.0)],
        };
        let reports =
            exact_flow_reports(&datum, poisson(), &times, 4096, 8.0, &[]).unwrap();
        for rep in &reports {
            let scale = rep.t; // t^{1/2s} with s = 1/2
            assert_eq!(rep.corrector_resid.unwrap(), scale * rep.rel_sup.unwrap());
        }
    }

    #[test]
    fn point_mass_relative_error_stays_bounded() {
        let times = dyadic(8.0, 7);
        let datum = ExactDatum::point_mass(vec![1.0], 1.0);
        let reports =
            exact_flow_reports(&datum, poisson(), &times, 8192, 8.0, &[]).unwrap();
        let series: Vec<f64> = reports
            .iter()
            .map(|r| r.rel_sup.unwrap() * r.t)
            .collect();
        let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(series.last().unwrap() <= &(1.2 * min), "{series:?}");
        // one-term Taylor: sup |F'/F| = 1 at r = 1 for this kernel
        assert_relative_eq!(series.last().unwrap(), &1.0, max_relative = 0.05);
    }

    #[test]
    fn interpolation_and_triangle_bounds_hold() {
        let times = dyadic(2.0, 4);
        let datum = ExactDatum::indicator(0.0, 1.0, 64).unwrap();
        let reports =
            exact_flow_reports(&datum, poisson(), &times, 4096, 8.0, &[2.0, 4.0]).unwrap();
        for rep in &reports {
            for &(p, ep) in &rep.ep {
                let bound = rep.e1.powf(1.0 / p) * rep.einf.powf((p - 1.0) / p);
                assert!(ep <= bound * (1.0 + 1e-12), "p = {p}: {ep} vs {bound}");
            }
            // mass 1 datum against the unit-mass kernel
            assert!(rep.e1 <= 1.0 + 1.0 + 1e-9);
        }
    }

    #[test]
    fn spectral_rate_experiment_recovers_unit_slope() {
        let profile = poisson();
        let shape = GridShape::new(profile.params(), 1024.0, 16384).unwrap();
        let u0 = GridFunction::from_fn(shape, |x| {
            if (0.0..1.0).contains(&x[0]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let datum = InitialDatum::from_grid(u0);
        let times = dyadic(1.0, 5);
        let out = rate_experiment(&datum, profile, &times, 2.0).unwrap();
        assert!(
            (out.fit.slope + 1.0).abs() < 0.05,
            "slope {} residual {}",
            out.fit.slope,
            out.fit.residual
        );
        let envelope = out.envelope.unwrap();
        assert!(
            out.prefactor <= envelope,
            "prefactor {} envelope {}",
            out.prefactor,
            envelope
        );
        // ladder past the box budget is rejected up front
        let long = dyadic(1.0, 9);
        assert!(matches!(
            rate_experiment(&datum, profile, &long, 2.0),
            Err(Error::AliasingBudget { .. })
        ));
    }

    #[test]
    fn relative_error_experiment_rejections() {
        let profile = poisson();
        let shape = GridShape::new(profile.params(), 256.0, 1024).unwrap();
        let far = InitialDatum::from_masses(
            shape,
            vec![PointMass {
                location: vec![3.0],
                mass: 1.0,
            }],
        )
        .unwrap();
        assert!(relative_error_experiment(&far, profile, 2.0, &dyadic(1.0, 4)).is_err());

        let dipole = InitialDatum::from_masses(
            shape,
            vec![
                PointMass {
                    location: vec![1.0],
                    mass: 1.0,
                },
                PointMass {
                    location: vec![-1.0],
                    mass: -1.0,
                },
            ],
        )
        .unwrap();
        assert!(relative_error_experiment(&dipole, profile, 2.0, &dyadic(1.0, 4)).is_err());
        assert!(corrector_experiment(&dipole, profile, &dyadic(1.0, 4)).is_err());
    }

    #[test]
    fn windowed_ratio_recovers_the_taylor_constant() {
        // one-term Taylor of the shifted kernel: rel_sup * t^{1/2s} tends to
        // h sup |F'|/F = h (Poisson: 2r/(1+r^2) peaks at 1)
        let profile = poisson();
        let shape = GridShape::new(profile.params(), 1200.0, 8192).unwrap();
        let h = 0.5;
        let datum = InitialDatum::from_masses(
            shape,
            vec![PointMass {
                location: vec![h],
                mass: 1.0,
            }],
        )
        .unwrap();
        let times = dyadic(4.0, 4);
        let reports = relative_error_experiment(&datum, profile, h, &times).unwrap();
        let q: Vec<f64> = reports
            .iter()
            .map(|r| r.rel_sup.unwrap() * r.t)
            .collect();
        let last = *q.last().unwrap();
        assert!((last / h - 1.0).abs() < 0.05, "q = {q:?}");
        // the corrector removes that first-order term and keeps decaying
        let corr: Vec<f64> = reports
            .iter()
            .map(|r| r.corrector_resid.unwrap())
            .collect();
        assert!(
            corr.last().unwrap() < &(0.5 * corr[0]),
            "corrector {corr:?}"
        );
    }

    #[test]
    fn ratio_window_rejection_names_admissible_time() {
        let profile = poisson();
        let shape = GridShape::new(profile.params(), 256.0, 1024).unwrap();
        let datum = InitialDatum::from_masses(
            shape,
            vec![PointMass {
                location: vec![0.5],
                mass: 1.0,
            }],
        )
        .unwrap();
        let err = relative_error_experiment(&datum, profile, 0.5, &dyadic(4.0, 4))
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("admissible t"), "{text}");
        // (L/4 - R)/4 = 15.875
        assert!(text.contains("1.58"), "{text}");
    }

    #[test]
    fn counterexample_passes_and_scaled_control_fails() {
        let profile = poisson();
        let rate = RateFn::power(0.1).unwrap();
        let spec = build_counterexample(rate, 3, profile).unwrap();
        assert_eq!(spec.masses, vec![0.5, 0.25, 0.125]);
        assert!(spec.delta < 1.0);
        for w in spec.times.windows(2) {
            assert!(w[1] >= 4.0 * w[0]);
        }
        for (k, (&b, &t)) in spec.certified.iter().zip(&spec.times).enumerate() {
            assert!(b >= (k + 1) as f64 * rate.eval(t));
        }
        let checks = verify_counterexample(&spec, profile).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");

        let control = spec.with_scaled_locations(0.5, profile);
        let control_checks = verify_counterexample(&control, profile).unwrap();
        assert!(control_checks.iter().any(|c| !c.pass), "{control_checks:?}");
        assert!(!control_checks.last().unwrap().pass);
    }

    #[test]
    fn log_rate_counterexample_builds_or_rejects_at_range_edge() {
        let profile = poisson();
        let rate = RateFn::log_power(1.0).unwrap();
        let spec = build_counterexample(rate, 2, profile).unwrap();
        let checks = verify_counterexample(&spec, profile).unwrap();
        assert!(checks.iter().all(|c| c.pass));
        // deeper ladders push t beyond f64 and must be refused, not faked
        assert!(build_counterexample(rate, 8, profile).is_err());
    }
}
