//! Config-driven experiment runner. Each experiment writes a run directory
//! with the resolved config, CSV tables, SVG plots, a human summary, and a
//! verdict file listing the acceptance checks this experiment owns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use fracheat_core::asymptotics::{
    self, ErrorReport, ExactDatum, RateFn,
};
use fracheat_core::fokker_planck;
use fracheat_core::grid::{GridFunction, GridShape, InitialDatum, PointMass};
use fracheat_core::params::FracParams;
use fracheat_core::solver;
use fracheat_core::{Datum, Profile};

use crate::config::{CounterRate, DatumSpec, ExperimentConfig, ExperimentId};
use crate::svg::{self, Plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn word(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub criterion: u32,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!("C{:02} {} {}", self.criterion, self.status.word(), self.detail)
    }
}

pub struct RunReport {
    pub dir: PathBuf,
    pub verdicts: Vec<Verdict>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }
}

struct Artifacts {
    files: Vec<(String, String)>,
    verdicts: Vec<Verdict>,
    summary: String,
}

/// Output root: explicit config value, else FRACHEAT_OUT, else ./fracheat-out.
pub fn output_root(config: &ExperimentConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("FRACHEAT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fracheat-out"))
}

pub fn make_run_dir(root: &Path, tag: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)
        .with_context(|| format!("creating output root {}", root.display()))?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for attempt in 0.. {
        let name = if attempt == 0 {
            format!("{tag}-{stamp}")
        } else {
            format!("{tag}-{stamp}-{attempt}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).context("creating run directory"),
        }
    }
    unreachable!()
}

pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Shared CSV schema for error ladders.
fn reports_csv(reports: &[ErrorReport<f64>]) -> String {
    let mut out = String::from("t,e1,einf,ep,rel_sup,corrector_resid\n");
    for r in reports {
        let ep = r.ep.iter().find(|(p, _)| *p == 2.0).map(|(_, v)| *v);
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{},{},{}",
            r.t,
            r.e1,
            r.einf,
            fmt_opt(ep),
            fmt_opt(r.rel_sup),
            fmt_opt(r.corrector_resid)
        );
    }
    out
}

fn series_points(reports: &[ErrorReport<f64>], pick: impl Fn(&ErrorReport<f64>) -> Option<f64>) -> Vec<(f64, f64)> {
    reports
        .iter()
        .filter_map(|r| pick(r).map(|v| (r.t, v)))
        .collect()
}

/// Explicit closed form where one exists, quadrature elsewhere.
pub fn load_profile(params: FracParams<f64>) -> Result<Profile> {
    let s = params.s();
    if s == 0.5 || s == 1.0 {
        Ok(Profile::explicit(params)?)
    } else {
        Ok(Profile::build_default(params)?)
    }
}

fn cube_radius_sq(x: &[f64], n: usize) -> f64 {
    x[..n].iter().map(|c| c * c).sum()
}

/// Solver-side datum on the configured grid.
pub fn build_initial_datum(
    config: &ExperimentConfig,
    shape: GridShape<f64>,
) -> Result<Datum> {
    let n = config.params.n() as usize;
    let datum = match &config.datum {
        DatumSpec::PointMasses(atoms) => InitialDatum::from_masses(
            shape,
            atoms
                .iter()
                .map(|(w, x)| PointMass {
                    location: x.clone(),
                    mass: *w,
                })
                .collect(),
        )?,
        DatumSpec::ShiftedKernel { shift } => {
            let mut location = vec![0.0; n];
            location[0] = *shift;
            InitialDatum::from_masses(shape, vec![PointMass { location, mass: 1.0 }])?
        }
        DatumSpec::Dipole { a } => {
            let mut plus = vec![0.0; n];
            let mut minus = vec![0.0; n];
            plus[0] = *a;
            minus[0] = -*a;
            InitialDatum::from_masses(
                shape,
                vec![
                    PointMass {
                        location: plus,
                        mass: 1.0,
                    },
                    PointMass {
                        location: minus,
                        mass: -1.0,
                    },
                ],
            )?
        }
        DatumSpec::Indicator { a, b } => {
            let (a, b) = (*a, *b);
            InitialDatum::from_grid(GridFunction::from_fn(shape, |x| {
                if x[..n].iter().all(|&c| c >= a && c < b) {
                    1.0
                } else {
                    0.0
                }
            })?)
        }
        DatumSpec::Gaussian { width } => {
            let w2 = width * width;
            InitialDatum::from_grid(GridFunction::from_fn(shape, |x| {
                (-cube_radius_sq(x, n) / w2).exp()
            })?)
        }
        DatumSpec::Bump { width } => {
            let w2 = width * width;
            InitialDatum::from_grid(GridFunction::from_fn(shape, |x| {
                let q = 1.0 - cube_radius_sq(x, n) / w2;
                if q > 0.0 {
                    q * q * q
                } else {
                    0.0
                }
            })?)
        }
    };
    Ok(datum)
}

/// Free-space exact counterpart for mixtures and the 1D interval.
pub fn build_exact_datum(config: &ExperimentConfig) -> Result<ExactDatum<f64>> {
    let n = config.params.n() as usize;
    match &config.datum {
        DatumSpec::PointMasses(atoms) => Ok(ExactDatum::Mixture {
            t0: 0.0,
            atoms: atoms.iter().map(|(w, x)| (x.clone(), *w)).collect(),
        }),
        DatumSpec::ShiftedKernel { shift } => {
            let mut location = vec![0.0; n];
            location[0] = *shift;
            Ok(ExactDatum::point_mass(location, 1.0))
        }
        DatumSpec::Dipole { a } => {
            if n != 1 {
                return Err(anyhow!("the dipole pair is one-dimensional"));
            }
            Ok(ExactDatum::dipole(*a))
        }
        DatumSpec::Indicator { a, b } => {
            if n != 1 {
                return Err(anyhow!("the exact indicator flow is one-dimensional"));
            }
            Ok(ExactDatum::indicator(*a, *b, 1024)?)
        }
        other => Err(anyhow!("{other:?} has no exact free-space flow")),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let artifacts = match config.experiment {
        ExperimentId::KernelProfile => kernel_profile(config)?,
        ExperimentId::Tail => tail(config)?,
        ExperimentId::Stationarity => stationarity(config)?,
        ExperimentId::Moments => moments(config)?,
        ExperimentId::Rate => rate(config)?,
        ExperimentId::RelativeError => relative_error(config)?,
        ExperimentId::Corrector => corrector(config)?,
        ExperimentId::Counterexample => counterexample(config)?,
        ExperimentId::FokkerPlanck => fokker_planck_run(config)?,
        ExperimentId::CrossCheck => cross_check(config)?,
    };

    let root = output_root(config);
    let dir = make_run_dir(&root, config.experiment.tag())?;
    write_atomic(&dir.join("config.txt"), &config.render())?;
    for (name, content) in &artifacts.files {
        write_atomic(&dir.join(name), content)?;
    }
    write_atomic(&dir.join("summary.txt"), &artifacts.summary)?;
    let mut verdict_text = String::new();
    for v in &artifacts.verdicts {
        verdict_text.push_str(&v.line());
        verdict_text.push('\n');
    }
    write_atomic(&dir.join("verdict.txt"), &verdict_text)?;
    Ok(RunReport {
        dir,
        verdicts: artifacts.verdicts,
    })
}

fn kernel_profile(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let built = Profile::build_default(params)?;
    let mut files = Vec::new();
    let mut csv = Vec::new();
    built.write_csv(&mut csv)?;
    files.push(("profile.csv".into(), String::from_utf8(csv)?));

    let (c_tail, tail_resid) = built.tail_coefficient();
    let mut meta = String::new();
    let _ = writeln!(meta, "n = {}", params.n());
    let _ = writeln!(meta, "s = {:.17e}", params.s());
    let _ = writeln!(meta, "quad_tol = {:.17e}", built.quad_tol());
    let _ = writeln!(meta, "r_max = {:.17e}", built.r_max());
    let _ = writeln!(meta, "c_tail = {c_tail:.17e}");
    let _ = writeln!(meta, "c_tail_residual = {tail_resid:.17e}");
    let _ = writeln!(meta, "mass = {:.17e}", built.mass());
    files.push(("profile.meta.txt".into(), meta));

    let pts: Vec<(f64, f64)> = built
        .radii()
        .iter()
        .zip(built.values())
        .map(|(&r, &f)| (r, f))
        .collect();
    files.push((
        "profile.svg".into(),
        svg::render(&Plot {
            title: &format!("profile, n={} s={}", params.n(), params.s()),
            x_label: "r",
            y_label: "F(r)",
            log_x: true,
            log_y: true,
            series: &[Series {
                label: "F",
                points: &pts,
            }],
        }),
    ));

    let mass_tol = if params.n() == 2 { 1e-4 } else { 1e-6 };
    let mass_err = (built.mass() - 1.0).abs();
    let mut verdicts = vec![Verdict {
        criterion: 1,
        status: Status::from_bool(mass_err <= mass_tol),
        detail: format!("mass_error={mass_err:.3e} tol={mass_tol:.1e}"),
    }];

    let s = params.s();
    if s == 0.5 || s == 1.0 {
        let explicit = Profile::explicit(params)?;
        let tol = config.residual_tol.unwrap_or(1e-6);
        let mut worst = 0.0f64;
        for &r in built.radii().iter().filter(|&&r| r <= 50.0) {
            let reference = explicit.value(r);
            worst = worst.max((built.value(r) - reference).abs() / reference);
        }
        verdicts.push(Verdict {
            criterion: 2,
            status: Status::from_bool(worst <= tol),
            detail: format!("sup_rel_error={worst:.3e} tol={tol:.1e} r<=50"),
        });
    } else {
        verdicts.push(Verdict {
            criterion: 2,
            status: Status::Skip,
            detail: format!("no closed form at s={s}"),
        });
    }

    let positive = built.values().iter().all(|&v| v > 0.0);
    let monotone = built.values().windows(2).all(|w| w[1] <= w[0]);
    verdicts.push(Verdict {
        criterion: 5,
        status: Status::from_bool(positive && monotone),
        detail: format!("positive={positive} monotone={monotone} points={}", built.values().len()),
    });

    let mut summary = format!(
        "kernel profile n={} s={}\nmeasured mass {:.12}\ntail coefficient {:.9e} (fit residual {:.1e})\n",
        params.n(),
        s,
        built.mass(),
        c_tail,
        tail_resid
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn tail(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let s = params.s();
    let profile = load_profile(params)?;
    let power = params.nf() + params.two_s();
    let window: Vec<(f64, f64)> = profile
        .radii()
        .iter()
        .zip(profile.values())
        .filter(|(&r, _)| (100.0..=200.0).contains(&r))
        .map(|(&r, &f)| (r, r.powf(power) * f))
        .collect();

    let mut csv = String::from("r,tail_product\n");
    for (r, q) in &window {
        let _ = writeln!(csv, "{r:.17e},{q:.17e}");
    }
    let files = vec![
        ("tail.csv".into(), csv),
        (
            "tail.svg".into(),
            svg::render(&Plot {
                title: &format!("r^(n+2s) F(r), n={} s={s}", params.n()),
                x_label: "r",
                y_label: "r^(n+2s) F",
                log_x: true,
                log_y: false,
                series: &[Series {
                    label: "tail product",
                    points: &window,
                }],
            }),
        ),
    ];

    let mut verdicts = Vec::new();
    let mut summary = format!("tail law n={} s={s}\n", params.n());
    if s == 1.0 {
        verdicts.push(Verdict {
            criterion: 3,
            status: Status::Skip,
            detail: "gaussian tail has no power law".into(),
        });
    } else {
        let lo = window.iter().map(|(_, q)| *q).fold(f64::INFINITY, f64::min);
        let hi = window
            .iter()
            .map(|(_, q)| *q)
            .fold(f64::NEG_INFINITY, f64::max);
        let spread = hi / lo - 1.0;
        let tol = config.residual_tol.unwrap_or(0.02);
        let mut ok = spread <= tol;
        let mut detail = format!("spread={spread:.3e} tol={tol:.1e} window=[100,200]");
        if s == 0.5 && params.n() == 1 {
            let mean = window.iter().map(|(_, q)| *q).sum::<f64>() / window.len() as f64;
            let vs_pi = (mean * std::f64::consts::PI - 1.0).abs();
            ok = ok && vs_pi <= tol;
            let _ = write!(detail, " pi*mean-1={vs_pi:.3e}");
        }
        let _ = writeln!(summary, "{detail}");
        verdicts.push(Verdict {
            criterion: 3,
            status: Status::from_bool(ok),
            detail,
        });
    }
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn stationarity(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let shape = config.shape()?;
    let resid = fokker_planck::stationarity_residual(&profile, shape)?;
    let tol = config
        .residual_tol
        .unwrap_or(if params.s() == 1.0 { 1e-6 } else { 1e-2 });

    let mut csv = String::from("s,n,points,half_length,residual,threshold\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{resid:.17e},{tol:.17e}",
        params.s(),
        params.n(),
        config.grid_points,
        config.half_length
    );
    let verdicts = vec![Verdict {
        criterion: 4,
        status: Status::from_bool(resid <= tol),
        detail: format!(
            "residual={resid:.3e} tol={tol:.1e} N={} L={}",
            config.grid_points, config.half_length
        ),
    }];
    let mut summary = format!(
        "stationarity residual sup|2s (-Lap)^s F - nF - rF'|/F(0) = {resid:.6e}\n"
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files: vec![("stationarity.csv".into(), csv)],
        verdicts,
        summary,
    })
}

fn moments(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let s = params.s();
    let profile = load_profile(params)?;
    let test = profile.moment_test(1.0)?;
    let expect_divergent = s <= 0.5;

    let mut csv = String::from("s,half_radius_moment,full_radius_moment,increment,divergent\n");
    let _ = writeln!(
        csv,
        "{s},{:.17e},{:.17e},{:.17e},{}",
        test.half, test.full, test.increment, test.divergent
    );
    let verdicts = vec![Verdict {
        criterion: 6,
        status: Status::from_bool(test.divergent == expect_divergent),
        detail: format!(
            "divergent={} expected={expect_divergent} increment={:.3e}",
            test.divergent, test.increment
        ),
    }];
    let mut summary = format!(
        "first absolute moment, truncated at r_max/2 vs r_max: {:.6e} vs {:.6e}\n\
         relative increment {:.3e} -> divergent={}\n",
        test.half, test.full, test.increment, test.divergent
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files: vec![("moments.csv".into(), csv)],
        verdicts,
        summary,
    })
}

/// Holder bound ep <= e1^(1/p) einf^(1-1/p); exact in the discrete norms.
/// Returns the largest ratio ep / bound and how many pairs contributed.
pub fn interpolation_ratio(reports: &[ErrorReport<f64>]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for r in reports {
        for &(p, ep) in &r.ep {
            let bound = r.e1.powf(1.0 / p) * r.einf.powf((p - 1.0) / p);
            if bound > 0.0 {
                worst = worst.max(ep / bound);
                checked += 1;
            }
        }
    }
    (worst, checked)
}

fn interpolation_verdict(reports: &[ErrorReport<f64>]) -> Verdict {
    let (worst, checked) = interpolation_ratio(reports);
    Verdict {
        criterion: 14,
        status: Status::from_bool(checked > 0 && worst <= 1.0 + 1e-6),
        detail: format!("max_ratio={worst:.9} checks={checked}"),
    }
}

fn rate(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let times = config.ladder();
    let p_list = [2.0, 4.0];

    let (reports, envelope_note) = if config.datum.exactly_evolvable() {
        let datum = build_exact_datum(config)?;
        let reports = asymptotics::exact_flow_reports(
            &datum,
            &profile,
            &times,
            config.grid_points,
            10.0,
            &p_list,
        )?;
        let moments = datum.moment_summary(&profile)?;
        let note = match moments.abs_first_moment {
            Some(n1) => format!(
                "first-moment envelope {:.6e}",
                asymptotics::rate_envelope_constant(&profile) * n1
            ),
            None => "absolute first moment divergent; only the slope is claimed".into(),
        };
        (reports, note)
    } else {
        let shape = config.shape()?;
        let datum = build_initial_datum(config, shape)?;
        let exp = asymptotics::rate_experiment(&datum, &profile, &times, 2.0)?;
        let note = match exp.envelope {
            Some(env) => format!(
                "prefactor {:.6e} vs envelope {:.6e}",
                exp.prefactor, env
            ),
            None => "absolute first moment divergent; only the slope is claimed".into(),
        };
        (exp.reports, note)
    };

    let einf_pts = series_points(&reports, |r| Some(r.einf));
    let fit = asymptotics::fit_rate(
        &times,
        &einf_pts.iter().map(|&(_, v)| v).collect::<Vec<_>>(),
    )?;
    let target = -params.inv_2s();
    let slope_err = (fit.slope - target).abs();

    let fit_line: Vec<(f64, f64)> = [times[0], *times.last().unwrap()]
        .iter()
        .map(|&t| (t, fit.intercept.exp() * t.powf(fit.slope)))
        .collect();

    let files = vec![
        ("rate.csv".into(), reports_csv(&reports)),
        (
            "rate.svg".into(),
            svg::render(&Plot {
                title: &format!("renormalized sup error, s={}", params.s()),
                x_label: "t",
                y_label: "t^(n/2s) sup|u - M P_t|",
                log_x: true,
                log_y: true,
                series: &[
                    Series {
                        label: "einf",
                        points: &einf_pts,
                    },
                    Series {
                        label: "fit",
                        points: &fit_line,
                    },
                ],
            }),
        ),
    ];

    let verdicts = vec![
        Verdict {
            criterion: 9,
            status: Status::from_bool(slope_err <= config.slope_tol),
            detail: format!(
                "slope={:.4} target={target:.4} err={slope_err:.3} tol={}",
                fit.slope, config.slope_tol
            ),
        },
        interpolation_verdict(&reports),
    ];

    let mut summary = format!(
        "decay fit: slope {:.6} (target {target:.6}), intercept {:.6}, max log deviation {:.3e}\n{envelope_note}\n",
        fit.slope, fit.intercept, fit.residual
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn relative_error(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let shape = config.shape()?;
    let datum = build_initial_datum(config, shape)?;
    let times = config.ladder();
    let reports = asymptotics::relative_error_experiment(
        &datum,
        &profile,
        config.datum.support_radius().max(shape.spacing()),
        &times,
    )?;

    let scaled: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| r.rel_sup.map(|q| (r.t, q * r.t.powf(params.inv_2s()))))
        .collect();
    let q_min = scaled.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
    let q_last = scaled.last().map(|&(_, q)| q).unwrap_or(f64::NAN);
    let ok = q_last <= config.ratio_tol * q_min;

    let rel_pts = series_points(&reports, |r| r.rel_sup);
    let files = vec![
        ("relative_error.csv".into(), reports_csv(&reports)),
        (
            "relative_error.svg".into(),
            svg::render(&Plot {
                title: &format!("relative error on the trusted ball, s={}", params.s()),
                x_label: "t",
                y_label: "sup |u - M P_t| / (M P_t)",
                log_x: true,
                log_y: true,
                series: &[Series {
                    label: "rel_sup",
                    points: &rel_pts,
                }],
            }),
        ),
    ];

    let verdicts = vec![Verdict {
        criterion: 10,
        status: Status::from_bool(ok),
        detail: format!(
            "scaled_final={q_last:.4e} scaled_min={q_min:.4e} ratio_tol={}",
            config.ratio_tol
        ),
    }];
    let mut summary = String::from("t^(1/2s)-scaled relative error along the ladder:\n");
    for (t, q) in &scaled {
        let _ = writeln!(summary, "  t={t:<8} {q:.6e}");
    }
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn corrector(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let times = config.ladder();
    let reports = if config.datum.exactly_evolvable() {
        let datum = build_exact_datum(config)?;
        if datum.mass() == 0.0 {
            return Err(anyhow!(
                "corrector ladder is normalized by the mass; it must be nonzero"
            ));
        }
        asymptotics::exact_flow_reports(
            &datum,
            &profile,
            &times,
            config.grid_points,
            10.0,
            &[2.0, 4.0],
        )?
    } else {
        let shape = config.shape()?;
        let datum = build_initial_datum(config, shape)?;
        asymptotics::corrector_experiment(&datum, &profile, &times)?
    };

    let corr: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| r.corrector_resid.map(|c| (r.t, c)))
        .collect();
    if corr.len() != reports.len() {
        return Err(anyhow!(
            "corrector series unavailable: the datum's absolute first moment is flagged divergent"
        ));
    }
    let first = corr.first().map(|&(_, c)| c).unwrap_or(f64::NAN);
    let last = corr.last().map(|&(_, c)| c).unwrap_or(f64::NAN);
    let ok = last <= config.ratio_tol * first;

    let files = vec![
        ("corrector.csv".into(), reports_csv(&reports)),
        (
            "corrector.svg".into(),
            svg::render(&Plot {
                title: &format!("corrector residual, s={}", params.s()),
                x_label: "t",
                y_label: "t^(1/2s) sup|u - M P_t + N1.grad P_t| / P_t",
                log_x: true,
                log_y: true,
                series: &[Series {
                    label: "corrector",
                    points: &corr,
                }],
            }),
        ),
    ];

    let verdicts = vec![Verdict {
        criterion: 11,
        status: Status::from_bool(ok),
        detail: format!(
            "first={first:.4e} final={last:.4e} ratio_tol={}",
            config.ratio_tol
        ),
    }];
    let mut summary = String::from("corrector residual along the ladder:\n");
    for (t, c) in &corr {
        let _ = writeln!(summary, "  t={t:<8} {c:.6e}");
    }
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn counterexample(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let rate_fn = match config.counter_rate {
        CounterRate::Power(alpha) => RateFn::power(alpha)?,
        CounterRate::LogPower(beta) => RateFn::log_power(beta)?,
    };
    let spec = asymptotics::build_counterexample(rate_fn, config.counter_terms, &profile)?;
    let checks = asymptotics::verify_counterexample(&spec, &profile)?;
    let control_spec = spec.with_scaled_locations(0.5, &profile);
    let control = asymptotics::verify_counterexample(&control_spec, &profile)?;

    let row = |out: &mut String, c: &asymptotics::CounterexampleCheck<f64>| {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{}",
            c.k, c.t, c.deficit, c.required, c.pass
        );
    };
    let mut csv = String::from("k,t,deficit,required,pass\n");
    for c in &checks {
        row(&mut csv, c);
    }
    let mut control_csv = String::from("k,t,deficit,required,pass\n");
    for c in &control {
        row(&mut control_csv, c);
    }

    let deficit_pts: Vec<(f64, f64)> = checks.iter().map(|c| (c.t, c.deficit)).collect();
    let required_pts: Vec<(f64, f64)> = checks.iter().map(|c| (c.t, c.required)).collect();
    let files = vec![
        ("counterexample.csv".into(), csv),
        ("control.csv".into(), control_csv),
        (
            "counterexample.svg".into(),
            svg::render(&Plot {
                title: &format!("slow-datum deficit vs required {}", spec.rate),
                x_label: "t_k",
                y_label: "t^(n/2s) |u - P_t| at 0",
                log_x: true,
                log_y: true,
                series: &[
                    Series {
                        label: "deficit",
                        points: &deficit_pts,
                    },
                    Series {
                        label: "k phi(t_k)",
                        points: &required_pts,
                    },
                ],
            }),
        ),
    ];

    let all_pass = checks.iter().all(|c| c.pass);
    let control_fails = control.iter().any(|c| !c.pass)
        && control.last().map(|c| !c.pass).unwrap_or(false);
    let verdicts = vec![Verdict {
        criterion: 12,
        status: Status::from_bool(all_pass && control_fails),
        detail: format!(
            "terms={} all_pass={all_pass} control_fails={control_fails} delta={:.4}",
            checks.len(),
            spec.delta
        ),
    }];

    let mut summary = format!(
        "datum below every {} envelope: mass 2^-k at |x_k| = {:?}\n",
        spec.rate,
        spec.locations
            .iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
    );
    for c in &checks {
        let _ = writeln!(
            summary,
            "  k={} t={:.3e} deficit {:.4e} >= required {:.4e}: {}",
            c.k,
            c.t,
            c.deficit,
            c.required,
            if c.pass { "yes" } else { "NO" }
        );
    }
    let _ = writeln!(
        summary,
        "halved-location control fails at k={}",
        control
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

fn fokker_planck_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let shape = config.shape()?;
    let datum = build_initial_datum(config, shape)?;
    let taus = config.ladder();
    let fp_shape = config.fp_shape()?;
    let out = fokker_planck::fp_convergence_experiment(&datum, &profile, &taus, fp_shape)?;

    let mut csv = String::from("tau,t,l1_error,linf_error\n");
    for r in &out.rows {
        let _ = writeln!(
            csv,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            r.tau, r.t, r.l1, r.linf
        );
    }

    let l1_pts: Vec<(f64, f64)> = out.rows.iter().map(|r| (r.t, r.l1)).collect();
    let linf_pts: Vec<(f64, f64)> = out.rows.iter().map(|r| (r.t, r.linf)).collect();
    let files = vec![
        ("fokker_planck.csv".into(), csv),
        (
            "fokker_planck.svg".into(),
            svg::render(&Plot {
                title: &format!("similarity-frame convergence, s={}", params.s()),
                x_label: "t = log(1+tau)",
                y_label: "error vs M F",
                log_x: false,
                log_y: true,
                series: &[
                    Series {
                        label: "L1",
                        points: &l1_pts,
                    },
                    Series {
                        label: "Linf",
                        points: &linf_pts,
                    },
                ],
            }),
        ),
    ];

    // eigen diagnostics on the reference box for this order
    let ref_shape = if params.s() == 1.0 {
        GridShape::new(params, 40.0, 4096)?
    } else {
        GridShape::new(params, 200.0, 4096)?
    };
    let eig = fokker_planck::eigen_residual(&profile, ref_shape, 0)?;
    let rayleigh = fokker_planck::rayleigh_quotient(&profile, ref_shape, 0)?;

    let target = -params.inv_2s();
    let slope_err = (out.fit.slope - target).abs();
    let rayleigh_err = (rayleigh - target).abs() / params.inv_2s();
    let ok = slope_err <= config.slope_tol && eig <= 2e-2 && rayleigh_err <= 0.1;
    let verdicts = vec![Verdict {
        criterion: 13,
        status: Status::from_bool(ok),
        detail: format!(
            "slope={:.4} target={target:.4} tol={} eigen_residual={eig:.3e} rayleigh={rayleigh:.4}",
            out.fit.slope, config.slope_tol
        ),
    }];

    let mut summary = format!(
        "semi-log fit of L1 error against t = log(1+tau): slope {:.6} (target {target:.6})\n\
         gradient eigenfunction: residual {eig:.4e}, Rayleigh quotient {rayleigh:.6}\n",
        out.fit.slope
    );
    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files,
        verdicts,
        summary,
    })
}

/// The ten-datum catalog the smoothing bound is frozen against.
pub fn smoothing_catalog(shape: GridShape<f64>) -> Result<Vec<(&'static str, Datum)>> {
    let n = shape.params().n() as usize;
    let at = |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        x
    };
    let masses = |atoms: &[(f64, f64)]| -> Result<Datum> {
        Ok(InitialDatum::from_masses(
            shape,
            atoms
                .iter()
                .map(|&(w, r)| PointMass {
                    location: at(r),
                    mass: w,
                })
                .collect(),
        )?)
    };
    let field = |f: &dyn Fn(&[f64]) -> f64| -> Result<Datum> {
        Ok(InitialDatum::from_grid(GridFunction::from_fn(shape, f)?))
    };
    Ok(vec![
        ("point-mass", masses(&[(1.0, 0.0)])?),
        ("shifted-mass", masses(&[(1.0, 1.0)])?),
        ("mass-pair", masses(&[(0.5, -2.0), (0.5, 2.0)])?),
        ("signed-pair", masses(&[(1.0, -1.0), (-0.5, 1.0)])?),
        ("comb", masses(&[(0.5, -3.0), (1.0, 0.0), (0.25, 2.0)])?),
        (
            "gaussian",
            field(&|x| (-cube_radius_sq(x, n)).exp())?,
        ),
        (
            "wide-gaussian",
            field(&|x| (-cube_radius_sq(x, n) / 16.0).exp())?,
        ),
        (
            "indicator",
            field(&|x| {
                if x[..n].iter().all(|&c| c.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            })?,
        ),
        (
            "offset-indicator",
            field(&|x| {
                let centered = (x[0] - 2.0).abs() <= 1.0;
                if centered && x[1..n].iter().all(|&c| c.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            })?,
        ),
        (
            "bump",
            field(&|x| {
                let q = 1.0 - cube_radius_sq(x, n);
                if q > 0.0 {
                    q * q * q
                } else {
                    0.0
                }
            })?,
        ),
    ])
}

/// Frozen smoothing constants 1.05 F_s(0) for the reference orders, n=1.
pub fn smoothing_bound(s: f64) -> Option<f64> {
    match s {
        x if x == 0.25 => Some(0.67),
        x if x == 0.5 => Some(0.335),
        x if x == 0.75 => Some(0.302),
        x if x == 1.0 => Some(0.297),
        _ => None,
    }
}

fn cross_check(config: &ExperimentConfig) -> Result<Artifacts> {
    let params = config.params;
    let profile = load_profile(params)?;
    let shape = config.shape()?;
    let datum = build_initial_datum(config, shape)?;
    let t = config.ladder_start;

    let u_spectral = solver::evolve_spectral(&datum, t)?;
    let u_convolution = solver::evolve_convolution(&datum, &profile, t)?;
    let sup_diff = u_spectral
        .values()
        .iter()
        .zip(u_convolution.values())
        .fold(0.0f64, |w, (&a, &b)| w.max((a - b).abs()));
    let agree_tol = config.residual_tol.unwrap_or(1e-6);
    let agree_bound = agree_tol * datum.l1_norm() * params.amplitude(t);
    let agree_ok = sup_diff <= agree_bound;

    let via_half = {
        let mid = solver::evolve_spectral(&datum, t)?;
        solver::evolve_spectral(&InitialDatum::from_grid(mid), t)?
    };
    let direct = solver::evolve_spectral(&datum, 2.0 * t)?;
    let peak = direct
        .values()
        .iter()
        .fold(0.0f64, |w, &v| w.max(v.abs()));
    let semi_diff = via_half
        .values()
        .iter()
        .zip(direct.values())
        .fold(0.0f64, |w, (&a, &b)| w.max((a - b).abs()));
    let semi_ok = semi_diff <= 1e-12 * peak.max(1.0);

    let mass_drift = (u_spectral.mass() - datum.total_mass()).abs();
    let mass_ok = mass_drift <= 1e-12 * datum.total_mass().abs().max(1.0);

    let mut csv = String::from("check,measured,bound\n");
    let _ = writeln!(csv, "route_agreement,{sup_diff:.17e},{agree_bound:.17e}");
    let _ = writeln!(csv, "semigroup,{semi_diff:.17e},{:.17e}", 1e-12 * peak.max(1.0));
    let _ = writeln!(
        csv,
        "mass_conservation,{mass_drift:.17e},{:.17e}",
        1e-12 * datum.total_mass().abs().max(1.0)
    );

    let mut verdicts = vec![Verdict {
        criterion: 7,
        status: Status::from_bool(agree_ok && semi_ok && mass_ok),
        detail: format!(
            "route_diff={sup_diff:.3e} bound={agree_bound:.3e} semigroup={semi_diff:.3e} mass={mass_drift:.3e}"
        ),
    }];

    let mut summary = format!(
        "spectral vs free-space convolution at t={t}: sup diff {sup_diff:.4e} (bound {agree_bound:.4e})\n\
         semigroup composition: {semi_diff:.4e}; mass drift {mass_drift:.4e}\n"
    );

    let mut catalog_csv = String::from("datum,l1,scaled_sup,bound\n");
    match smoothing_bound(params.s()) {
        Some(bound) if solver::check_aliasing_budget(&shape, 4.0).is_ok() => {
            let mut all_ok = true;
            let mut worst = 0.0f64;
            for (name, item) in smoothing_catalog(shape)? {
                let u = solver::evolve_spectral(&item, 4.0)?;
                let sup = u.values().iter().fold(0.0f64, |w, &v| w.max(v.abs()));
                let ratio = sup * 4.0f64.powf(params.nf() * params.inv_2s()) / item.l1_norm();
                all_ok &= ratio <= bound;
                worst = worst.max(ratio);
                let _ = writeln!(
                    catalog_csv,
                    "{name},{:.17e},{ratio:.17e},{bound:.17e}",
                    item.l1_norm()
                );
            }
            let _ = writeln!(
                summary,
                "smoothing catalog at t=4: worst scaled sup {worst:.6} vs bound {bound}"
            );
            verdicts.push(Verdict {
                criterion: 8,
                status: Status::from_bool(all_ok),
                detail: format!("worst_ratio={worst:.6} bound={bound} data=10"),
            });
        }
        _ => {
            verdicts.push(Verdict {
                criterion: 8,
                status: Status::Skip,
                detail: format!("no frozen bound at s={}", params.s()),
            });
        }
    }

    for v in &verdicts {
        let _ = writeln!(summary, "{}", v.line());
    }
    Ok(Artifacts {
        files: vec![
            ("cross_check.csv".into(), csv),
            ("smoothing.csv".into(), catalog_csv),
        ],
        verdicts,
        summary,
    })
}
