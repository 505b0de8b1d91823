//! Uniform periodic grids on [-L, L)^n, the initial data they carry (an
//! integrable grid part plus finitely many point masses), and the norms and
//! moments read off them.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::params::FracParams;
use crate::real::Real;

/// Geometry of a uniform grid: N points per axis on [-L, L), spacing 2L/N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridShape<T: Real> {
    params: FracParams<T>,
    half_length: T,
    points: usize,
}

impl<T: Real> GridShape<T> {
    pub fn new(params: FracParams<T>, half_length: T, points: usize) -> Result<Self> {
        if !(half_length > T::zero() && half_length.is_finite()) {
            return Err(Error::BadParams(format!(
                "box half-length {half_length} must be positive"
            )));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::BadParams(format!(
                "points per axis {points} must be even and >= 8"
            )));
        }
        if (points as f64).powi(params.n() as i32) > 2e8 {
            return Err(Error::BadParams(format!(
                "grid {points}^{} exceeds the in-memory budget",
                params.n()
            )));
        }
        Ok(GridShape {
            params,
            half_length,
            points,
        })
    }

    pub fn params(&self) -> FracParams<T> {
        self.params
    }

    pub fn half_length(&self) -> T {
        self.half_length
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.params.n())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        (self.half_length + self.half_length) / T::of_usize(self.points)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.params.n() as i32)
    }

    /// Coordinate of index j along one axis: -L + j h.
    pub fn coordinate(&self, j: usize) -> T {
        T::of_usize(j).mul_add(self.spacing(), -self.half_length)
    }

    /// Row-major decomposition of a flat index into the point it addresses.
    pub fn point(&self, flat: usize) -> [T; 3] {
        let n = self.params.n() as usize;
        let mut out = [T::zero(); 3];
        let mut rest = flat;
        for axis in (0..n).rev() {
            out[axis] = self.coordinate(rest % self.points);
            rest /= self.points;
        }
        out
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.params.n() as usize
            && x.iter().all(|&c| c >= -self.half_length && c < self.half_length)
    }
}

/// Samples of a function on a grid; immutable once built.
#[derive(Clone, Debug)]
pub struct GridFunction<T: Real> {
    shape: GridShape<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(shape: GridShape<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::BadParams(format!(
                "value count {} does not match grid size {}",
                values.len(),
                shape.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::BadParams("non-finite grid value".into()));
        }
        Ok(GridFunction { shape, values })
    }

    pub fn zeros(shape: GridShape<T>) -> Self {
        GridFunction {
            shape,
            values: vec![T::zero(); shape.len()],
        }
    }

    pub fn from_fn(shape: GridShape<T>, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let n = shape.params().n() as usize;
        let mut values = Vec::with_capacity(shape.len());
        for flat in 0..shape.len() {
            let p = shape.point(flat);
            values.push(f(&p[..n]));
        }
        Self::new(shape, values)
    }

    pub fn shape(&self) -> GridShape<T> {
        self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// h^n Σ u: the trapezoid rule on a periodic box.
    pub fn mass(&self) -> T {
        let mut acc = T::zero();
        for v in &self.values {
            acc += *v;
        }
        acc * self.shape.cell_volume()
    }

    /// (h^n Σ |u|^p)^{1/p}; p = infinity gives max |u|. p < 1 is rejected.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        if p.is_infinite() && p > T::zero() {
            return Ok(self
                .values
                .iter()
                .fold(T::zero(), |m, v| m.max(v.abs())));
        }
        if !(p >= T::one() && p.is_finite()) {
            return Err(Error::Domain(format!("norm index p = {p} must be >= 1")));
        }
        let mut acc = T::zero();
        if p == T::one() {
            for v in &self.values {
                acc += v.abs();
            }
        } else if p == T::of(2.0) {
            for v in &self.values {
                acc += *v * *v;
            }
        } else {
            for v in &self.values {
                acc += v.abs().powf(p);
            }
        }
        Ok((acc * self.shape.cell_volume()).powf(p.recip()))
    }

    /// Mass, signed first moments, and the absolute first moment of the
    /// samples; the absolute moment switches to the divergence flag (None)
    /// when a doubled-radius Cauchy test shows the tail still growing.
    pub fn moment_summary(&self) -> MomentSummary<T> {
        let n = self.shape.params().n() as usize;
        let h_n = self.shape.cell_volume();
        let l = self.shape.half_length();
        let half = l * T::of(0.5);
        let mut mass = T::zero();
        let mut first = [T::zero(); 3];
        let mut abs_inner = T::zero();
        let mut abs_full = T::zero();
        for flat in 0..self.shape.len() {
            let v = self.values[flat];
            let p = self.shape.point(flat);
            mass += v;
            let mut r2 = T::zero();
            for axis in 0..n {
                first[axis] += v * p[axis];
                r2 += p[axis] * p[axis];
            }
            let r = r2.sqrt();
            let contrib = v.abs() * r;
            abs_full += contrib;
            if r <= half {
                abs_inner += contrib;
            }
        }
        let abs_full = abs_full * h_n;
        let abs_inner = abs_inner * h_n;
        // fat tail reaching the boundary: the outer half of the box still
        // contributes more than 10% on top of the inner half
        let divergent = abs_inner > T::zero() && (abs_full - abs_inner) > abs_inner * T::of(0.1);
        MomentSummary {
            mass: mass * h_n,
            first_moment: first[..n].iter().map(|&x| x * h_n).collect(),
            abs_first_moment: if divergent { None } else { Some(abs_full) },
        }
    }

    /// Pointwise a*self + b*other on a shared grid.
    pub fn combine(&self, other: &GridFunction<T>, a: T, b: T) -> Result<GridFunction<T>> {
        if self.shape != other.shape {
            return Err(Error::BadParams("grid shapes differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        GridFunction::new(self.shape, values)
    }

    /// Text header (n, s, L, N, t) followed by the raw row-major values as
    /// little-endian f64. The time is caller metadata, not grid state.
    pub fn write_binary<W: Write>(&self, t: T, out: &mut W) -> Result<()> {
        writeln!(out, "fracheat grid v1")?;
        writeln!(out, "n = {}", self.shape.params().n())?;
        writeln!(out, "s = {:.17e}", self.shape.params().s().as_f64())?;
        writeln!(out, "L = {:.17e}", self.shape.half_length().as_f64())?;
        writeln!(out, "N = {}", self.shape.points_per_axis())?;
        writeln!(out, "t = {:.17e}", t.as_f64())?;
        writeln!(out, "data")?;
        for v in &self.values {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(input: &mut R) -> Result<(Self, T)> {
        let mut header = std::collections::HashMap::new();
        let mut line = String::new();
        input.read_line(&mut line)?;
        if line.trim_end() != "fracheat grid v1" {
            return Err(Error::Format("missing grid header magic".into()));
        }
        loop {
            line.clear();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Format("unterminated grid header".into()));
            }
            let trimmed = line.trim_end();
            if trimmed == "data" {
                break;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header line: {trimmed}")))?;
            header.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            header
                .get(k)
                .ok_or_else(|| Error::Format(format!("header key {k} missing")))
        };
        let n: u32 = get("n")?.parse().map_err(|_| Error::Format("bad n".into()))?;
        let s: f64 = get("s")?.parse().map_err(|_| Error::Format("bad s".into()))?;
        let l: f64 = get("L")?.parse().map_err(|_| Error::Format("bad L".into()))?;
        let npts: usize = get("N")?.parse().map_err(|_| Error::Format("bad N".into()))?;
        let t: f64 = get("t")?.parse().map_err(|_| Error::Format("bad t".into()))?;
        let shape = GridShape::new(FracParams::new(n, T::of(s))?, T::of(l), npts)?;
        let mut bytes = vec![0u8; 8 * shape.len()];
        input.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("chunk of 8"))))
            .collect();
        Ok((GridFunction::new(shape, values)?, T::of(t)))
    }

    /// x,u rows; 1D only.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        if self.shape.params().n() != 1 {
            return Err(Error::Domain("CSV export is 1D only".into()));
        }
        writeln!(out, "x,u")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e}", self.shape.coordinate(j).as_f64(), v.as_f64())?;
        }
        Ok(())
    }
}

/// A Dirac mass; enters evolution analytically, never as a grid spike.
#[derive(Clone, Debug)]
pub struct PointMass<T> {
    pub location: Vec<T>,
    pub mass: T,
}

/// Initial datum: optional integrable grid part plus finitely many point
/// masses, all strictly inside the box.
#[derive(Clone, Debug)]
pub struct InitialDatum<T: Real> {
    shape: GridShape<T>,
    grid_part: Option<GridFunction<T>>,
    point_masses: Vec<PointMass<T>>,
}

impl<T: Real> InitialDatum<T> {
    pub fn new(
        shape: GridShape<T>,
        grid_part: Option<GridFunction<T>>,
        point_masses: Vec<PointMass<T>>,
    ) -> Result<Self> {
        if let Some(g) = &grid_part {
            if g.shape() != shape {
                return Err(Error::BadParams("grid part has a different shape".into()));
            }
        }
        for pm in &point_masses {
            if !shape.contains(&pm.location) {
                return Err(Error::BadParams(format!(
                    "point mass at {:?} is not strictly inside the box",
                    pm.location.iter().map(|x| x.as_f64()).collect::<Vec<_>>()
                )));
            }
            if !pm.mass.is_finite() {
                return Err(Error::BadParams("point mass must be finite".into()));
            }
        }
        Ok(InitialDatum {
            shape,
            grid_part,
            point_masses,
        })
    }

    pub fn from_grid(grid: GridFunction<T>) -> Self {
        InitialDatum {
            shape: grid.shape(),
            grid_part: Some(grid),
            point_masses: Vec::new(),
        }
    }

    pub fn from_masses(shape: GridShape<T>, point_masses: Vec<PointMass<T>>) -> Result<Self> {
        Self::new(shape, None, point_masses)
    }

    pub fn shape(&self) -> GridShape<T> {
        self.shape
    }

    pub fn grid_part(&self) -> Option<&GridFunction<T>> {
        self.grid_part.as_ref()
    }

    pub fn point_masses(&self) -> &[PointMass<T>] {
        &self.point_masses
    }

    pub fn total_mass(&self) -> T {
        let grid = self.grid_part.as_ref().map_or(T::zero(), |g| g.mass());
        self.point_masses
            .iter()
            .fold(grid, |acc, pm| acc + pm.mass)
    }

    pub fn l1_norm(&self) -> T {
        let grid = self
            .grid_part
            .as_ref()
            .map_or(T::zero(), |g| g.lp_norm(T::one()).expect("p = 1"));
        self.point_masses
            .iter()
            .fold(grid, |acc, pm| acc + pm.mass.abs())
    }
}

/// Mass and first moments; `abs_first_moment = None` flags divergence.
#[derive(Clone, Debug)]
pub struct MomentSummary<T> {
    pub mass: T,
    pub first_moment: Vec<T>,
    pub abs_first_moment: Option<T>,
}

/// Moments of the full datum: grid quadrature plus exact point-mass terms.
pub fn moments<T: Real>(datum: &InitialDatum<T>) -> MomentSummary<T> {
    let n = datum.shape().params().n() as usize;
    let mut summary = datum
        .grid_part()
        .map_or(
            MomentSummary {
                mass: T::zero(),
                first_moment: vec![T::zero(); n],
                abs_first_moment: Some(T::zero()),
            },
            |g| g.moment_summary(),
        );
    for pm in datum.point_masses() {
        summary.mass += pm.mass;
        let mut r2 = T::zero();
        for axis in 0..n {
            summary.first_moment[axis] += pm.mass * pm.location[axis];
            r2 += pm.location[axis] * pm.location[axis];
        }
        if let Some(a) = summary.abs_first_moment.as_mut() {
            *a += pm.mass.abs() * r2.sqrt();
        }
    }
    summary
}
