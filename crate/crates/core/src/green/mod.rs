//! Green function G(x) = Σ_{n≥0} P(S_n = x) of a transient lattice walk.
//!
//! Two independent methods fill a [`GreenTable`] on the box ‖x‖∞ ≤ R:
//! [`green_quadrature`] integrates the continuous-time heat kernel over time,
//! and [`green_convolution`] sums n-step laws directly. Tables store one value
//! per orbit of the step law's coordinate symmetries.

mod cache;
mod convolution;
mod gaussian;
mod quadrature;
mod symmetry;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::distributions::StepDistribution;
use crate::point::{euclid_norm, pack, sup_norm, Coords};

pub use cache::{cache_dir, load_or_build, CacheOutcome, CACHE_ENV};
pub use convolution::{green_convolution, ConvolutionGreen};
pub use gaussian::StepGaussian;
pub use quadrature::green_quadrature;
pub use symmetry::Symmetry;

/// Tolerance used for tables feeding path functionals.
pub const DEFAULT_ABS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("the walk is recurrent in dimension {0}; G is infinite")]
    RecurrentDimension(usize),
    #[error("quadrature reached {achieved:e}, requested {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },
    #[error("quadrature needs every support vector on a coordinate axis")]
    NonSeparableStep,
    #[error("box radius {0} is too small for a radial profile (need at least 10)")]
    BoxTooSmall(i64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cache file is unreadable: {0}")]
    CacheCorrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GreenMethod {
    Quadrature,
    Convolution,
}

impl fmt::Display for GreenMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GreenMethod::Quadrature => "quadrature",
            GreenMethod::Convolution => "convolution",
        })
    }
}

impl FromStr for GreenMethod {
    type Err = GreenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadrature" => Ok(GreenMethod::Quadrature),
            "convolution" => Ok(GreenMethod::Convolution),
            other => Err(GreenError::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Far-field model c·q(x)^{(2−d)/2}, with c fitted on the outer shell.
#[derive(Debug, Clone)]
pub struct FarField {
    pub constant: f64,
    /// Sup-norm radius beyond which the model replaces table values.
    pub crossover_radius: i64,
    gaussian: StepGaussian,
}

impl FarField {
    pub fn value(&self, x: &[i64]) -> f64 {
        let d = self.gaussian.dim() as f64;
        self.constant * self.gaussian.quad_form(x).powf((2.0 - d) / 2.0)
    }
}

/// G on the box ‖x‖∞ ≤ R, stored on canonical representatives.
#[derive(Debug, Clone)]
pub struct GreenTable {
    step: StepDistribution,
    radius: i64,
    method: GreenMethod,
    abs_tol: f64,
    symmetry: Symmetry,
    sites: Vec<Coords>,
    values: Vec<f64>,
    index: HashMap<u128, usize>,
    far: FarField,
}

pub(crate) fn check_transient(step: &StepDistribution) -> Result<(), GreenError> {
    if step.dim() <= 2 {
        Err(GreenError::RecurrentDimension(step.dim()))
    } else {
        Ok(())
    }
}

impl GreenTable {
    pub(crate) fn from_parts(
        step: &StepDistribution,
        radius: i64,
        method: GreenMethod,
        abs_tol: f64,
        symmetry: Symmetry,
        sites: Vec<Coords>,
        values: Vec<f64>,
    ) -> Self {
        let d = step.dim();
        let index = sites
            .iter()
            .enumerate()
            .map(|(i, c)| (pack(&c[..d]), i))
            .collect();
        let gaussian = StepGaussian::of_step(step);
        // orbit-weighted mean of G·q^{(d−2)/2} over the outer shell
        let (mut num, mut den) = (0.0, 0.0);
        if radius > 0 {
            for (c, v) in sites.iter().zip(&values) {
                let x = &c[..d];
                if sup_norm(x) == radius {
                    let w = symmetry.orbit_size(x) as f64;
                    num += w * v * gaussian.quad_form(x).powf((d as f64 - 2.0) / 2.0);
                    den += w;
                }
            }
        }
        let constant = if den > 0.0 { num / den } else { gaussian.far_field_constant() };
        Self {
            step: step.clone(),
            radius,
            method,
            abs_tol,
            symmetry,
            sites,
            values,
            index,
            far: FarField {
                constant,
                crossover_radius: radius,
                gaussian,
            },
        }
    }

    pub fn step(&self) -> &StepDistribution {
        &self.step
    }

    pub fn dim(&self) -> usize {
        self.step.dim()
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn method(&self) -> GreenMethod {
        self.method
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn far_field(&self) -> &FarField {
        &self.far
    }

    pub fn symmetry(&self) -> &Symmetry {
        &self.symmetry
    }

    /// Canonical sites with their values.
    pub fn entries(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        let d = self.dim();
        self.sites.iter().zip(&self.values).map(move |(c, &v)| (&c[..d], v))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Table value, or `None` outside the box.
    pub fn get(&self, x: &[i64]) -> Option<f64> {
        if sup_norm(x) > self.radius {
            return None;
        }
        let c = self.symmetry.canonical(x);
        self.index.get(&pack(&c[..self.dim()])).map(|&i| self.values[i])
    }

    /// Table value inside the box, far-field model outside.
    pub fn value(&self, x: &[i64]) -> f64 {
        self.get(x).unwrap_or_else(|| self.far.value(x))
    }

    /// Full-box array for fast repeated lookups.
    pub fn dense(&self) -> DenseGreen {
        let d = self.dim();
        let side = (2 * self.radius + 1) as usize;
        let len = side.pow(d as u32);
        let mut values = vec![0.0; len];
        let mut x = vec![0i64; d];
        for (k, slot) in values.iter_mut().enumerate() {
            let mut r = k;
            for xi in x.iter_mut().rev() {
                *xi = (r % side) as i64 - self.radius;
                r /= side;
            }
            *slot = self.get(&x).expect("inside box");
        }
        DenseGreen {
            dim: d,
            radius: self.radius,
            side,
            values,
            far: self.far.clone(),
        }
    }

    /// max |G(x) − δ₀(x) − Σ_y θ(y) G(x − y)| over ‖x‖∞ ≤ R − range.
    pub fn harmonicity_residual(&self) -> f64 {
        let d = self.dim();
        let inner = self.radius - self.step.range();
        let mut worst: f64 = 0.0;
        for (x, v) in self.entries() {
            if sup_norm(x) > inner {
                continue;
            }
            let mut avg = if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
            for (y, w) in self.step.atoms() {
                let z: Vec<i64> = (0..d).map(|i| x[i] - y[i]).collect();
                avg += w * self.get(&z).expect("interior neighbour");
            }
            worst = worst.max((v - avg).abs());
        }
        worst
    }

    /// Writes `x_1..x_d,G,method,tol` rows for the canonical sites.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GreenError> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        header.extend(["G", "method", "tol"].map(String::from));
        w.write_record(&header).map_err(csv_io)?;
        let method = self.method.to_string();
        let tol = format!("{:e}", self.abs_tol);
        for (x, v) in self.entries() {
            let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            row.push(format!("{v:.17e}"));
            row.push(method.clone());
            row.push(tol.clone());
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> GreenError {
    GreenError::Io(std::io::Error::other(e))
}

/// Unreduced copy of a table for hot loops.
#[derive(Debug, Clone)]
pub struct DenseGreen {
    dim: usize,
    radius: i64,
    side: usize,
    values: Vec<f64>,
    far: FarField,
}

impl DenseGreen {
    #[inline]
    pub fn value(&self, x: &[i64]) -> f64 {
        let mut k = 0usize;
        for &xi in &x[..self.dim] {
            if xi.abs() > self.radius {
                return self.far.value(x);
            }
            k = k * self.side + (xi + self.radius) as usize;
        }
        self.values[k]
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }
}

/// One shell of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub radius: f64,
    pub mean: f64,
    pub sites: u64,
}

/// Mean of G(x)·|x|^{d−2} over shells of rounded Euclidean radius 1..=R.
pub fn asymptotic_profile(table: &GreenTable) -> Result<Vec<ProfilePoint>, GreenError> {
    if table.radius() < 10 {
        return Err(GreenError::BoxTooSmall(table.radius()));
    }
    let d = table.dim();
    let shells = table.radius() as usize;
    let mut sum = vec![0.0; shells + 1];
    let mut count = vec![0u64; shells + 1];
    for (x, v) in table.entries() {
        let r = euclid_norm(x);
        let shell = r.round() as usize;
        if shell == 0 || shell > shells {
            continue;
        }
        let w = table.symmetry().orbit_size(x);
        sum[shell] += w as f64 * v * r.powi(d as i32 - 2);
        count[shell] += w;
    }
    Ok((1..=shells)
        .filter(|&s| count[s] > 0)
        .map(|s| ProfilePoint {
            radius: s as f64,
            mean: sum[s] / count[s] as f64,
            sites: count[s],
        })
        .collect())
}

/// max/min of the profile over shells with radius ≥ R/2.
pub fn profile_flatness(profile: &[ProfilePoint], radius: i64) -> f64 {
    let outer: Vec<f64> = profile
        .iter()
        .filter(|p| p.radius >= radius as f64 / 2.0)
        .map(|p| p.mean)
        .collect();
    let max = outer.iter().cloned().fold(f64::MIN, f64::max);
    let min = outer.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// Σ_i G(target − z_i) along a path.
pub fn path_g(path: &[Vec<i64>], target: &[i64], green: &GreenTable) -> f64 {
    path.iter()
        .map(|z| {
            let diff: Vec<i64> = target.iter().zip(z).map(|(a, b)| a - b).collect();
            green.value(&diff)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrent_dimensions_are_rejected() {
        let step = StepDistribution::simple(2).unwrap();
        assert!(matches!(
            green_quadrature(&step, 4, 1e-6),
            Err(GreenError::RecurrentDimension(2))
        ));
        assert!(matches!(
            green_convolution(&step, 4, 10),
            Err(GreenError::RecurrentDimension(2))
        ));
    }

    #[test]
    fn small_box_has_no_profile() {
        let step = StepDistribution::simple(3).unwrap();
        let t = green_quadrature(&step, 2, 1e-6).unwrap();
        assert!(matches!(asymptotic_profile(&t), Err(GreenError::BoxTooSmall(2))));
    }

    #[test]
    fn path_g_sums_lookups() {
        let step = StepDistribution::simple(4).unwrap();
        let t = green_quadrature(&step, 6, 1e-6).unwrap();
        let a = vec![3, 0, 0, 0];
        assert_eq!(path_g(std::slice::from_ref(&a), &a, &t), t.value(&[0, 0, 0, 0]));
        let two = path_g(&[vec![0, 0, 0, 0], a.clone()], &a, &t);
        assert_eq!(two, t.value(&a) + t.value(&[0, 0, 0, 0]));
        let dense = t.dense();
        assert_eq!(dense.value(&[1, -2, 0, 3]), t.value(&[1, -2, 0, 3]));
        assert_eq!(dense.value(&[40, 0, 0, 0]), t.value(&[40, 0, 0, 0]));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let step = StepDistribution::simple(3).unwrap();
        let t = green_quadrature(&step, 2, 1e-6).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x_1,x_2,x_3,G,method,tol"));
        assert_eq!(lines.count(), t.len());
    }
}
