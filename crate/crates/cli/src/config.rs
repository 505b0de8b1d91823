//! Flat key-value experiment configs. One `key = value` per line, dotted
//! section keys, `#` comments. Every key is validated; unknown keys are
//! errors so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use fracheat_core::grid::GridShape;
use fracheat_core::params::FracParams;
use fracheat_core::solver;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentId {
    KernelProfile,
    Tail,
    Stationarity,
    Moments,
    Rate,
    RelativeError,
    Corrector,
    Counterexample,
    FokkerPlanck,
    CrossCheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::KernelProfile,
        ExperimentId::Tail,
        ExperimentId::Stationarity,
        ExperimentId::Moments,
        ExperimentId::Rate,
        ExperimentId::RelativeError,
        ExperimentId::Corrector,
        ExperimentId::Counterexample,
        ExperimentId::FokkerPlanck,
        ExperimentId::CrossCheck,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentId::KernelProfile => "kernel-profile",
            ExperimentId::Tail => "tail",
            ExperimentId::Stationarity => "stationarity",
            ExperimentId::Moments => "moments",
            ExperimentId::Rate => "rate",
            ExperimentId::RelativeError => "relative-error",
            ExperimentId::Corrector => "corrector",
            ExperimentId::Counterexample => "counterexample",
            ExperimentId::FokkerPlanck => "fokker-planck",
            ExperimentId::CrossCheck => "cross-check",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|id| id.tag() == text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatumSpec {
    /// weight at location, any finite signed mixture
    PointMasses(Vec<(f64, Vec<f64>)>),
    Indicator { a: f64, b: f64 },
    /// point mass at shift * e1: the evolved solution is the kernel
    /// translated by the shift
    ShiftedKernel { shift: f64 },
    /// +1 at a e1, -1 at -a e1
    Dipole { a: f64 },
    Gaussian { width: f64 },
    /// (1 - (r/width)^2)^3 on its support
    Bump { width: f64 },
}

impl DatumSpec {
    /// Mixtures and the indicator admit exact free-space evolution; sampled
    /// smooth data must go through the spectral solver.
    pub fn exactly_evolvable(&self) -> bool {
        !matches!(self, DatumSpec::Gaussian { .. } | DatumSpec::Bump { .. })
    }

    /// Radius of the smallest origin-centered ball carrying the datum.
    pub fn support_radius(&self) -> f64 {
        match self {
            DatumSpec::PointMasses(atoms) => atoms
                .iter()
                .map(|(_, x)| x.iter().map(|c| c * c).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            DatumSpec::Indicator { a, b } => a.abs().max(b.abs()),
            DatumSpec::ShiftedKernel { shift } => shift.abs(),
            DatumSpec::Dipole { a } => a.abs(),
            // exp(-(r/w)^2) underflows to exact zero beyond r ~ 27.3 w
            DatumSpec::Gaussian { width } => 28.0 * width,
            DatumSpec::Bump { width } => *width,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CounterRate {
    Power(f64),
    LogPower(f64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub params: FracParams<f64>,
    pub grid_points: usize,
    pub half_length: f64,
    pub datum: DatumSpec,
    pub ladder_start: f64,
    pub ladder_count: usize,
    pub slope_tol: f64,
    pub residual_tol: Option<f64>,
    pub ratio_tol: f64,
    pub fp_points: usize,
    pub fp_half_length: f64,
    pub counter_rate: CounterRate,
    pub counter_terms: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Dyadic time ladder t0 * 2^k.
    pub fn ladder(&self) -> Vec<f64> {
        (0..self.ladder_count)
            .map(|k| self.ladder_start * (1u64 << k) as f64)
            .collect()
    }

    pub fn shape(&self) -> Result<GridShape<f64>> {
        Ok(GridShape::new(
            self.params,
            self.half_length,
            self.grid_points,
        )?)
    }

    pub fn fp_shape(&self) -> Result<GridShape<f64>> {
        Ok(GridShape::new(
            self.params,
            self.fp_half_length,
            self.fp_points,
        )?)
    }

    /// Canonical echo of the resolved config; parses back to an equal config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("experiment", self.experiment.tag().into());
        push("params.n", self.params.n().to_string());
        push("params.s", format!("{}", self.params.s()));
        push("grid.points", self.grid_points.to_string());
        push("grid.half_length", format!("{}", self.half_length));
        match &self.datum {
            DatumSpec::PointMasses(atoms) => {
                push("datum.kind", "point-masses".into());
                let rendered: Vec<String> = atoms
                    .iter()
                    .map(|(w, x)| {
                        let coords: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
                        format!("{w}@{}", coords.join(","))
                    })
                    .collect();
                push("datum.masses", rendered.join("; "));
            }
            DatumSpec::Indicator { a, b } => {
                push("datum.kind", "indicator".into());
                push("datum.a", format!("{a}"));
                push("datum.b", format!("{b}"));
            }
            DatumSpec::ShiftedKernel { shift } => {
                push("datum.kind", "shifted-kernel".into());
                push("datum.shift", format!("{shift}"));
            }
            DatumSpec::Dipole { a } => {
                push("datum.kind", "dipole".into());
                push("datum.separation", format!("{}", 2.0 * a));
            }
            DatumSpec::Gaussian { width } => {
                push("datum.kind", "gaussian".into());
                push("datum.width", format!("{width}"));
            }
            DatumSpec::Bump { width } => {
                push("datum.kind", "bump".into());
                push("datum.width", format!("{width}"));
            }
        }
        push("ladder.start", format!("{}", self.ladder_start));
        push("ladder.count", self.ladder_count.to_string());
        push("tolerances.slope", format!("{}", self.slope_tol));
        if let Some(r) = self.residual_tol {
            push("tolerances.residual", format!("{r}"));
        }
        push("tolerances.ratio", format!("{}", self.ratio_tol));
        push("fp.points", self.fp_points.to_string());
        push("fp.half_length", format!("{}", self.fp_half_length));
        match self.counter_rate {
            CounterRate::Power(a) => {
                push("counterexample.rate", "power".into());
                push("counterexample.exponent", format!("{a}"));
            }
            CounterRate::LogPower(b) => {
                push("counterexample.rate", "log".into());
                push("counterexample.exponent", format!("{b}"));
            }
        }
        push("counterexample.terms", self.counter_terms.to_string());
        if let Some(dir) = &self.out_dir {
            push("output.dir", dir.display().to_string());
        }
        out
    }
}

struct Raw {
    line: usize,
    value: String,
    used: bool,
}

struct Doc {
    entries: BTreeMap<String, Raw>,
}

impl Doc {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let body = match full.find('#') {
                Some(p) => &full[..p],
                None => full,
            }
            .trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line}: expected `key = value`, got {body:?}"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                bail!("line {line}: empty key or value");
            }
            if let Some(prev) = entries.get(&key) {
                let prev: &Raw = prev;
                bail!(
                    "line {line}: key `{key}` already set on line {}",
                    prev.line
                );
            }
            entries.insert(
                key,
                Raw {
                    line,
                    value,
                    used: false,
                },
            );
        }
        Ok(Doc { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|raw| {
            raw.used = true;
            (raw.line, raw.value.clone())
        })
    }

    fn number(&mut self, key: &str) -> Result<Option<(usize, f64)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let x: f64 = v
                    .parse()
                    .map_err(|e| anyhow!("line {line}: bad number for {key}: {e}"))?;
                if !x.is_finite() {
                    bail!("line {line}: {key} must be finite");
                }
                Ok(Some((line, x)))
            }
        }
    }

    fn integer(&mut self, key: &str) -> Result<Option<(usize, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let k: usize = v
                    .parse()
                    .map_err(|e| anyhow!("line {line}: bad integer for {key}: {e}"))?;
                Ok(Some((line, k)))
            }
        }
    }

    fn unused(&self) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .filter(|(_, raw)| !raw.used)
            .min_by_key(|(_, raw)| raw.line)
            .map(|(k, raw)| (raw.line, k.as_str()))
    }
}

fn parse_masses(line: usize, text: &str, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut atoms = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (w, loc) = part
            .split_once('@')
            .ok_or_else(|| anyhow!("line {line}: expected weight@x,y,... in datum.masses"))?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|e| anyhow!("line {line}: bad mass weight: {e}"))?;
        let coords: Result<Vec<f64>> = loc
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow!("line {line}: bad mass coordinate: {e}"))
            })
            .collect();
        let coords = coords?;
        if coords.len() != n {
            bail!(
                "line {line}: mass location has {} coordinates, dimension is {n}",
                coords.len()
            );
        }
        atoms.push((w, coords));
    }
    if atoms.is_empty() {
        bail!("line {line}: datum.masses lists no masses");
    }
    Ok(atoms)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut doc = Doc::parse(text)?;

    let (exp_line, exp_text) = doc
        .take("experiment")
        .ok_or_else(|| anyhow!("missing required key `experiment`"))?;
    let experiment = ExperimentId::parse(&exp_text).ok_or_else(|| {
        let known: Vec<&str> = ExperimentId::ALL.iter().map(|id| id.tag()).collect();
        anyhow!(
            "line {exp_line}: unknown experiment id {exp_text:?}; known ids: {}",
            known.join(", ")
        )
    })?;

    let (s_line, s) = doc
        .number("params.s")?
        .ok_or_else(|| anyhow!("missing required key `params.s`"))?;
    let n = match doc.integer("params.n")? {
        Some((line, k)) => {
            if !(1..=3).contains(&k) {
                bail!("line {line}: dimension n = {k} outside 1..=3");
            }
            k as u32
        }
        None => 1,
    };
    if !(s > 0.0 && s <= 1.0) {
        bail!("line {s_line}: order out of (0,1]: s = {s}");
    }
    let params = FracParams::new(n, s)?;

    // reference boxes sized so the default ladders respect the aliasing
    // budget and the similarity-frame reach
    let default_grid = match experiment {
        ExperimentId::RelativeError => (16384, 1024.0),
        ExperimentId::FokkerPlanck => (16384, 600.0),
        ExperimentId::Stationarity if s == 1.0 => (4096, 40.0),
        _ => (4096, 200.0),
    };
    let grid_points = doc
        .integer("grid.points")?
        .map(|(_, k)| k)
        .unwrap_or(default_grid.0);
    let half_length = match doc.number("grid.half_length")? {
        Some((line, l)) => {
            if l <= 0.0 {
                bail!("line {line}: grid.half_length must be positive");
            }
            l
        }
        None => default_grid.1,
    };

    let datum = match doc.take("datum.kind") {
        None => match experiment {
            ExperimentId::RelativeError => DatumSpec::Indicator { a: -1.0, b: 1.0 },
            ExperimentId::CrossCheck => DatumSpec::Bump { width: 1.0 },
            _ => DatumSpec::ShiftedKernel { shift: 1.0 },
        },
        Some((line, kind)) => match kind.as_str() {
            "point-masses" => {
                let (ml, mv) = doc
                    .take("datum.masses")
                    .ok_or_else(|| anyhow!("line {line}: point-masses needs datum.masses"))?;
                DatumSpec::PointMasses(parse_masses(ml, &mv, n as usize)?)
            }
            "indicator" => {
                let a = doc.number("datum.a")?.map(|(_, v)| v).unwrap_or(-1.0);
                let b = doc.number("datum.b")?.map(|(_, v)| v).unwrap_or(1.0);
                if !(a < b) {
                    bail!("line {line}: indicator needs a < b, got [{a}, {b}]");
                }
                DatumSpec::Indicator { a, b }
            }
            "shifted-kernel" => {
                let shift = doc.number("datum.shift")?.map(|(_, v)| v).unwrap_or(1.0);
                DatumSpec::ShiftedKernel { shift }
            }
            "dipole" => {
                let sep = doc
                    .number("datum.separation")?
                    .map(|(_, v)| v)
                    .unwrap_or(2.0);
                if sep <= 0.0 {
                    bail!("line {line}: dipole separation must be positive");
                }
                DatumSpec::Dipole { a: sep * 0.5 }
            }
            "gaussian" | "bump" => {
                let width = doc.number("datum.width")?.map(|(_, v)| v).unwrap_or(1.0);
                if width <= 0.0 {
                    bail!("line {line}: datum.width must be positive");
                }
                if kind == "gaussian" {
                    DatumSpec::Gaussian { width }
                } else {
                    DatumSpec::Bump { width }
                }
            }
            other => bail!(
                "line {line}: unknown datum kind {other:?}; known: point-masses, \
                 indicator, shifted-kernel, dipole, gaussian, bump"
            ),
        },
    };

    let ladder_start = match doc.number("ladder.start")? {
        Some((line, t)) => {
            if t <= 0.0 {
                bail!("line {line}: ladder.start must be positive");
            }
            t
        }
        None => 1.0,
    };
    let ladder_count = match doc.integer("ladder.count")? {
        Some((line, k)) => {
            if !(1..=40).contains(&k) {
                bail!("line {line}: ladder.count = {k} outside 1..=40");
            }
            k
        }
        None => match experiment {
            // similarity-frame reach and the trusted ratio window both cap
            // the default ladders earlier than the aliasing budget does
            ExperimentId::FokkerPlanck | ExperimentId::RelativeError => 5,
            _ => 7,
        },
    };

    let mut tol = |key: &str, default: f64| -> Result<f64> {
        match doc.number(key)? {
            Some((line, v)) => {
                if v <= 0.0 {
                    bail!("line {line}: {key} must be positive");
                }
                Ok(v)
            }
            None => Ok(default),
        }
    };
    let slope_tol = tol(
        "tolerances.slope",
        if experiment == ExperimentId::FokkerPlanck {
            0.07
        } else {
            0.05
        },
    )?;
    let ratio_tol = tol(
        "tolerances.ratio",
        if experiment == ExperimentId::Corrector {
            0.5
        } else {
            1.2
        },
    )?;
    let residual_tol = doc
        .number("tolerances.residual")?
        .map(|(line, v)| {
            if v <= 0.0 {
                bail!("line {line}: tolerances.residual must be positive");
            }
            Ok(v)
        })
        .transpose()?;

    let fp_points = doc.integer("fp.points")?.map(|(_, k)| k).unwrap_or(2048);
    let fp_half_length = match doc.number("fp.half_length")? {
        Some((line, l)) => {
            if l <= 0.0 {
                bail!("line {line}: fp.half_length must be positive");
            }
            l
        }
        None => 30.0,
    };

    let counter_rate = match doc.take("counterexample.rate") {
        None => CounterRate::Power(
            doc.number("counterexample.exponent")?
                .map(|(_, v)| v)
                .unwrap_or(0.1),
        ),
        Some((line, kind)) => {
            let exponent = doc
                .number("counterexample.exponent")?
                .map(|(_, v)| v)
                .unwrap_or(if kind == "log" { 1.0 } else { 0.1 });
            match kind.as_str() {
                "power" => CounterRate::Power(exponent),
                "log" => CounterRate::LogPower(exponent),
                other => bail!("line {line}: counterexample.rate must be power or log, got {other:?}"),
            }
        }
    };
    let counter_terms = match doc.integer("counterexample.terms")? {
        Some((line, k)) => {
            if !(1..=8).contains(&k) {
                bail!("line {line}: counterexample.terms = {k} outside 1..=8");
            }
            k
        }
        None => 3,
    };

    let out_dir = doc.take("output.dir").map(|(_, v)| PathBuf::from(v));

    if let Some((line, key)) = doc.unused() {
        bail!("line {line}: unknown key `{key}`");
    }

    let config = ExperimentConfig {
        experiment,
        params,
        grid_points,
        half_length,
        datum,
        ladder_start,
        ladder_count,
        slope_tol,
        residual_tol,
        ratio_tol,
        fp_points,
        fp_half_length,
        counter_rate,
        counter_terms,
        out_dir,
    };
    validate(&config)?;
    Ok(config)
}

/// Grid and ladder must be mutually admissible before any work starts.
fn validate(config: &ExperimentConfig) -> Result<()> {
    let shape = config.shape()?;
    let ladder = config.ladder();
    let last = *ladder.last().expect("count >= 1");
    let spectral = match config.experiment {
        ExperimentId::RelativeError | ExperimentId::CrossCheck | ExperimentId::FokkerPlanck => {
            true
        }
        ExperimentId::Rate | ExperimentId::Corrector => !config.datum.exactly_evolvable(),
        _ => false,
    };
    if spectral {
        let t_max = if config.experiment == ExperimentId::CrossCheck {
            config.ladder_start
        } else {
            last
        };
        solver::check_aliasing_budget(&shape, t_max)?;
    }
    if config.experiment == ExperimentId::FokkerPlanck {
        let lambda = (1.0 + last).powf(config.params.inv_2s());
        let reach = lambda * config.fp_half_length;
        let limit = config.half_length - shape.spacing();
        if reach > limit {
            let admissible =
                (limit / config.fp_half_length).powf(config.params.two_s()) - 1.0;
            bail!(
                "similarity box rescaled to |y| <= {reach:.1} at tau = {last}, beyond the \
                 source box; admissible tau <= {admissible:.3e}"
            );
        }
    }
    if config.datum.support_radius() >= config.half_length {
        bail!(
            "datum reaches |x| = {} outside the box (half length {})",
            config.datum.support_radius(),
            config.half_length
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("experiment = rate\nparams.s = 0.5\n").unwrap();
        assert_eq!(cfg.params.n(), 1);
        assert_eq!(cfg.grid_points, 4096);
        assert_eq!(cfg.ladder(), vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
        assert_eq!(cfg.datum, DatumSpec::ShiftedKernel { shift: 1.0 });
        assert_eq!(cfg.slope_tol, 0.05);
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        let err = parse_config("experiment = rate\nparams.s = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("order out of (0,1]"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_and_ids_are_rejected_with_context() {
        let err = parse_config("experiment = rate\nparams.s = 0.5\nparams.z = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("params.z"), "{err}");

        let err = parse_config("experiment = warp\nparams.s = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("unknown experiment id"), "{err}");
    }

    #[test]
    fn ladder_beyond_budget_names_admissible_time() {
        let text = "experiment = relative-error\nparams.s = 0.5\n\
                    grid.half_length = 100\ngrid.points = 1024\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("12.5"), "{err}");
    }

    #[test]
    fn config_roundtrips_through_render() {
        let text = "experiment = counterexample\nparams.s = 0.5\n\
                    counterexample.rate = log\ncounterexample.exponent = 1\n\
                    datum.kind = point-masses\ndatum.masses = 1@0; -0.5@2\n";
        let cfg = parse_config(text).unwrap();
        let echoed = parse_config(&cfg.render()).unwrap();
        assert_eq!(echoed.datum, cfg.datum);
        assert_eq!(echoed.counter_rate, cfg.counter_rate);
        assert_eq!(echoed.counter_terms, cfg.counter_terms);
    }

    #[test]
    fn masses_validate_dimension() {
        let text = "experiment = rate\nparams.s = 0.5\nparams.n = 2\n\
                    datum.kind = point-masses\ndatum.masses = 1@0\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("dimension is 2"), "{err}");
    }
}
