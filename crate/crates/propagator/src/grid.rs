//! Uniform spatial grids, sampled complex wavefunctions and the bilinear
//! pairing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GaussianWavepacket, PhysicalParams};

/// A uniform tensor grid over `[min, max)` per axis with `points` samples per
/// axis and spacing `dx = (max - min) / points`. Supports one and two axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    points: usize,
}

impl Grid {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, points: usize) -> Result<Self> {
        if mins.len() != maxs.len() || mins.is_empty() {
            return Err(Error::InvalidParameter("grid axis bounds must match and be nonempty".into()));
        }
        if mins.len() > 2 {
            return Err(Error::InvalidParameter("grids support one or two axes only".into()));
        }
        if points < 2 {
            return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
        }
        for (lo, hi) in mins.iter().zip(&maxs) {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("grid span [{lo}, {hi}) is not positive")));
            }
        }
        Ok(Self { mins, maxs, points })
    }

    pub fn new_1d(min: f64, max: f64, points: usize) -> Result<Self> {
        Self::new(vec![min], vec![max], points)
    }

    pub fn new_2d(min: [f64; 2], max: [f64; 2], points: usize) -> Result<Self> {
        Self::new(min.to_vec(), max.to_vec(), points)
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    /// Total number of samples, `points^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.maxs[axis] - self.mins[axis]) / self.points as f64
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        (self.mins[axis], self.maxs[axis])
    }

    /// Volume element for quadrature, the product of the axis spacings.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Coordinates of the flat sample index (row-major over axes).
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        let mut rem = index;
        for axis in (0..self.dim()).rev() {
            let i = rem % self.points;
            rem /= self.points;
            out.push(self.mins[axis] + i as f64 * self.spacing(axis));
        }
        out.reverse();
        out
    }

    /// Iterator over the coordinates of every sample, in flat order.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Norm and boundary diagnostics of a sampled wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionDiagnostics {
    /// Grid L2 norm by the trapezoid rule.
    pub l2_norm: f64,
    /// Fraction of the squared mass within 5% of the grid boundary.
    pub boundary_leakage: f64,
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl GridWavefunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "got {} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, samples })
    }

    /// Samples a pointwise function on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = grid.points().map(|x| f(&x)).collect();
        Self { grid, samples }
    }

    /// Samples a wavepacket on the grid.
    pub fn from_wavepacket(grid: Grid, w: &GaussianWavepacket, p: &PhysicalParams) -> Result<Self> {
        if w.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "wavepacket dimension {} vs grid dimension {}",
                w.dim(),
                grid.dim()
            )));
        }
        Ok(Self::from_fn(grid, |x| w.eval(x, p)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Fraction of |psi|^2 mass within 5% of the span of any axis boundary.
    pub fn boundary_leakage(&self) -> f64 {
        let total: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut near = 0.0;
        for (i, z) in self.samples.iter().enumerate() {
            let x = self.grid.point(i);
            let edge = (0..self.grid.dim()).any(|a| {
                let (lo, hi) = self.grid.bounds(a);
                let margin = 0.05 * (hi - lo);
                x[a] < lo + margin || x[a] > hi - margin
            });
            if edge {
                near += z.norm_sqr();
            }
        }
        near / total
    }

    pub fn diagnostics(&self) -> WavefunctionDiagnostics {
        WavefunctionDiagnostics {
            l2_norm: self.l2_norm(),
            boundary_leakage: self.boundary_leakage(),
        }
    }
}

/// Bilinear pairing `int f(x) g(x) dx` by trapezoid quadrature.
///
/// There is no complex conjugation: the pairing matches the transition
/// amplitudes, which are bilinear rather than sesquilinear.
pub fn bilinear_pair(f: &GridWavefunction, g: &GridWavefunction) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch("bilinear pairing requires a common grid".into()));
    }
    let acc: Complex64 = f.samples.iter().zip(&g.samples).map(|(a, b)| a * b).sum();
    Ok(acc * f.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::smearing_kernel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p1() -> PhysicalParams {
        PhysicalParams::natural(1)
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new_1d(-10.0, 10.0, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert_relative_eq!(g.spacing(0), 2.5);
        assert_relative_eq!(g.point(0)[0], -10.0);
        assert_relative_eq!(g.point(7)[0], 7.5);

        let g2 = Grid::new_2d([-1.0, -2.0], [1.0, 2.0], 4).unwrap();
        assert_eq!(g2.len(), 16);
        assert_relative_eq!(g2.point(0)[0], -1.0);
        assert_relative_eq!(g2.point(0)[1], -2.0);
        assert_relative_eq!(g2.point(1)[1], -1.0); // last axis fastest
        assert_relative_eq!(g2.cell_volume(), 0.5);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new_1d(1.0, 1.0, 8).is_err());
        assert!(Grid::new_1d(0.0, 1.0, 1).is_err());
        assert!(Grid::new(vec![0.0; 3], vec![1.0; 3], 4).is_err());
    }

    #[test]
    fn smearing_kernel_integrates_to_one_on_grid() {
        // spans >= 8 standard deviations of the width-1 kernel
        let g = Grid::new_1d(-12.0, 12.0, 512).unwrap();
        let f = GridWavefunction::from_fn(g, |x| {
            Complex64::new(smearing_kernel(&[0.3], x, 1.0, &p1()).unwrap(), 0.0)
        });
        let total: f64 = f.samples().iter().map(|z| z.re).sum::<f64>() * f.grid().cell_volume();
        assert!((total - 1.0).abs() <= 1e-8, "total={total}");
    }

    #[test]
    fn smearing_norm_against_grid_quadrature() {
        let g = Grid::new_1d(-16.0, 16.0, 2048).unwrap();
        let gamma = 0.8;
        let f = GridWavefunction::from_fn(g, |x| {
            Complex64::new(smearing_kernel(&[0.0], x, gamma, &p1()).unwrap(), 0.0)
        });
        let norm2 = f.l2_norm().powi(2);
        let closed = crate::model::smearing_norm(gamma, &p1()).unwrap().powi(2);
        assert!((norm2 - closed).abs() <= 1e-10, "grid {norm2} vs closed {closed}");
    }

    #[test]
    fn wavepacket_normalized_on_grid() {
        let g = Grid::new_1d(-20.0, 20.0, 1024).unwrap();
        let w = GaussianWavepacket::new(vec![1.0], 1.5, vec![2.0]).unwrap();
        let f = GridWavefunction::from_wavepacket(g, &w, &p1()).unwrap();
        assert_relative_eq!(f.l2_norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pairing_requires_common_grid() {
        let a = GridWavefunction::from_fn(Grid::new_1d(-1.0, 1.0, 16).unwrap(), |_| Complex64::ONE);
        let b = GridWavefunction::from_fn(Grid::new_1d(-2.0, 1.0, 16).unwrap(), |_| Complex64::ONE);
        assert!(bilinear_pair(&a, &b).is_err());
    }

    #[test]
    fn pairing_of_real_gaussian_is_positive() {
        let g = Grid::new_1d(-20.0, 20.0, 512).unwrap();
        let w = GaussianWavepacket::new(vec![0.0], 1.0, vec![0.0]).unwrap();
        let f = GridWavefunction::from_wavepacket(g, &w, &p1()).unwrap();
        let v = bilinear_pair(&f, &f).unwrap();
        assert!(v.re > 0.0 && v.im.abs() < 1e-14);
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-12); // real packet: equals ||f||^2
    }

    proptest! {
        #[test]
        fn pairing_symmetric_and_linear(
            seed in 0u64..1000,
            scale in 0.1f64..3.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let vals: Vec<Complex64> = (0..64)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                GridWavefunction::new(g.clone(), vals).unwrap()
            };
            let f = mk(&mut rng);
            let h = mk(&mut rng);
            let fh = bilinear_pair(&f, &h).unwrap();
            let hf = bilinear_pair(&h, &f).unwrap();
            prop_assert!((fh - hf).norm() == 0.0);

            // linearity in the first slot
            let scaled = GridWavefunction::new(
                g.clone(),
                f.samples().iter().map(|z| z * scale).collect(),
            ).unwrap();
            let s = bilinear_pair(&scaled, &h).unwrap();
            prop_assert!((s - fh * scale).norm() <= 1e-12 * fh.norm().max(1.0));
        }
    }
}
