//! Spot checks of built profiles against high-precision reference values
//! (40-digit contour-rotated quadrature, two independent integration paths
//! agreeing to 1e-18, truncated to 19 digits).

use std::sync::OnceLock;

use fracheat_core::{Params, Profile};

fn cached(cell: &'static OnceLock<Profile>, n: u32, s: f64) -> &'static Profile {
    cell.get_or_init(|| {
        Profile::build_default(Params::new(n, s).expect("params")).expect("build")
    })
}

static P1Q: OnceLock<Profile> = OnceLock::new();
static P1T: OnceLock<Profile> = OnceLock::new();
static P2Q: OnceLock<Profile> = OnceLock::new();
static P2T: OnceLock<Profile> = OnceLock::new();
static P3Q: OnceLock<Profile> = OnceLock::new();
static P3T: OnceLock<Profile> = OnceLock::new();

fn p1q() -> &'static Profile {
    cached(&P1Q, 1, 0.25)
}
fn p1t() -> &'static Profile {
    cached(&P1T, 1, 0.75)
}
fn p2q() -> &'static Profile {
    cached(&P2Q, 2, 0.25)
}
fn p2t() -> &'static Profile {
    cached(&P2T, 2, 0.75)
}
fn p3q() -> &'static Profile {
    cached(&P3Q, 3, 0.25)
}
fn p3t() -> &'static Profile {
    cached(&P3T, 3, 0.75)
}

#[track_caller]
fn close(got: f64, want: f64, tol: f64) {
    let rel = (got - want).abs() / want.abs();
    assert!(
        rel <= tol,
        "got {got:.17e}, want {want:.17e}, rel err {rel:.3e} > {tol:.1e}"
    );
}

// The profile is served off a 2048-point table, so accuracy away from the
// nodes is interpolation-limited (observed worst case 4e-8); quadrature and
// certification account for another decade of headroom.
const VAL_TOL: f64 = 2e-7;
const DERIV_TOL: f64 = 1e-8;

#[test]
fn values_n1_s_quarter() {
    let p = p1q();
    close(p.value(0.5), 0.1707624017252062238, VAL_TOL);
    close(p.value(1.0), 0.08610714691260411832, VAL_TOL);
    close(p.value(2.0), 0.03914285804965134295, VAL_TOL);
    close(p.value(10.0), 0.004872255383721116158, VAL_TOL);
    close(p.value(100.0), 1.840537264013975196e-4, VAL_TOL);
    close(p.value(200.0), 6.663292552687654004e-5, VAL_TOL);
}

#[test]
fn values_n1_s_three_quarter() {
    let p = p1t();
    close(p.value(0.5), 0.2622968403540900358, VAL_TOL);
    close(p.value(1.0), 0.2020381596078401304, VAL_TOL);
    close(p.value(2.0), 0.08453962312613752006, VAL_TOL);
    close(p.value(5.0), 0.007111736047654806841, VAL_TOL);
    close(p.value(10.0), 0.001047776024929440461, VAL_TOL);
    close(p.value(100.0), 3.001636034771775095e-6, VAL_TOL);
    close(p.value(200.0), 5.295249994979197293e-7, VAL_TOL);
}

#[test]
fn values_n2() {
    close(p2q().value(1.0), 0.02945095211350308122, VAL_TOL);
    close(p2q().value(10.0), 1.925595801165522219e-4, VAL_TOL);
    close(p2t().value(1.0), 0.06318455758944793904, VAL_TOL);
    close(p2t().value(5.0), 8.802660878791011111e-4, VAL_TOL);
    close(p2t().value(20.0), 5.014199182292689402e-6, VAL_TOL);
}

#[test]
fn values_n3() {
    close(p3q().value(1.0), 0.01466572783022327288, VAL_TOL);
    close(p3q().value(10.0), 1.061082182644262611e-5, VAL_TOL);
    close(p3t().value(1.0), 0.02158306605420003735, VAL_TOL);
    close(p3t().value(5.0), 1.310807661418516903e-4, VAL_TOL);
}

#[test]
fn derivatives_n1() {
    close(p1q().derivative(1.0), -0.09214748562195362506, DERIV_TOL);
    close(p1q().derivative(10.0), -6.666975979700477255e-4, DERIV_TOL);
    close(p1t().derivative(1.0), -0.1356104035156361671, DERIV_TOL);
    close(p1t().derivative(10.0), -2.780673141552328275e-4, DERIV_TOL);
}

#[test]
fn derivatives_n3() {
    close(p3q().derivative(1.0), -0.04207899957976451321, DERIV_TOL);
    close(p3t().derivative(0.01), -3.127460002763552627e-4, DERIV_TOL);
    close(p3t().derivative(1.0), -0.01867709080825537557, DERIV_TOL);
    close(p3t().derivative(35.0), -1.781788482348984453e-9, DERIV_TOL);
}

#[test]
fn total_mass_is_one() {
    for p in [p1q(), p1t(), p2q(), p2t(), p3q(), p3t()] {
        let err = (p.mass() - 1.0).abs();
        assert!(
            err <= 2e-7,
            "n = {}, s = {}: |mass - 1| = {err:.3e}",
            p.params().n(),
            p.params().s()
        );
        assert!(p.tail_mass() > 0.0);
    }
}

#[test]
fn ball_complement_spots() {
    close(
        p1q().ball_complement_mass(200.0).unwrap(),
        0.05485090822613442951,
        1e-8,
    );
    // 1 - (small) amplifies the certified relative error of the integral by
    // 1/Bc here, so the gate is wider.
    close(
        p1t().ball_complement_mass(200.0).unwrap(),
        1.411270119260934840e-4,
        1e-6,
    );
}

#[test]
fn first_moment_truncations_n1_s_quarter() {
    let p = p1q();
    close(p.truncated_moment(1.0, 100.0).unwrap(), 6.040149026673568421, 1e-8);
    close(p.truncated_moment(1.0, 200.0).unwrap(), 9.130296686592967217, 1e-8);
}

#[test]
fn first_moment_dichotomy() {
    // s = 1/4: first moment diverges (tail integrand ~ r^{-1/2}); pinned by
    // the truncation references above at 0.5116.
    let low = p1q().moment_test(1.0).unwrap();
    assert!(low.divergent, "increment {:.4}", low.increment);
    assert!((low.increment - 0.5116).abs() < 0.01, "increment {:.4}", low.increment);
    // s = 3/4: first moment converges (1 < 2s).
    let high = p1t().moment_test(1.0).unwrap();
    assert!(!high.divergent, "increment {:.4}", high.increment);
}

#[test]
fn tail_power_fit_is_flat_for_n1() {
    for p in [p1q(), p1t()] {
        let (coef, resid) = p.tail_coefficient();
        assert!(coef > 0.0);
        assert!(
            resid < 0.02,
            "s = {}: tail deviation {resid:.3e}",
            p.params().s()
        );
    }
}
