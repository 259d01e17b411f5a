//! Transmit, receive and cascaded beampatterns of a solution over an angle grid.

use std::io::Write;

use rayon::prelude::*;

use crate::channel::steering_vector;
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::metrics::BeamformingSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub start: f64,
    pub stop: f64,
    pub num_points: usize,
}

impl AngleGrid {
    pub fn new(start: f64, stop: f64, num_points: usize) -> Result<Self> {
        if !(start < stop) || num_points < 2 {
            return Err(Error::Domain(format!("angle grid needs start < stop and at least 2 points, got [{start}, {stop}] x {num_points}")));
        }
        Ok(Self { start, stop, num_points })
    }

    /// `[-90, 90]` degrees in steps of `step_deg`.
    pub fn broadside(step_deg: f64) -> Result<Self> {
        let n = (180.0 / step_deg).round() as usize + 1;
        Self::new(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, n)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.num_points - 1) as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.start + self.step() * i as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.angle(i)).collect()
    }
}

/// `(theta, gain)` samples.
pub type Pattern = Vec<(f64, f64)>;

/// `p1(theta) = b^H(theta) R_x b(theta)` with unit-gain steering vectors.
pub fn tx_beampattern(sol: &BeamformingSolution, grid: &AngleGrid, array_size: usize) -> Pattern {
    let r_x = sol.covariance();
    grid.angles()
        .into_par_iter()
        .map(|t| (t, quad_form(&r_x, &steering_vector(t, array_size, 1.0)).max(0.0)))
        .collect()
}

/// `p2(theta) = |u_k^H b(theta)|^2`.
pub fn rx_beampattern(sol: &BeamformingSolution, k: usize, grid: &AngleGrid, array_size: usize) -> Result<Pattern> {
    let u = sol.u.get(k).ok_or_else(|| Error::Dimension(format!("no receive filter for tag {k}")))?;
    if u.len() != array_size {
        return Err(Error::Dimension(format!("receive filter has {} taps, array has {array_size}", u.len())));
    }
    Ok(grid.angles().into_par_iter().map(|t| (t, u.dotc(&steering_vector(t, array_size, 1.0)).norm_sqr())).collect())
}

/// `p3 = p1 * p2` for tag `k`.
pub fn joint_beampattern(sol: &BeamformingSolution, k: usize, grid: &AngleGrid) -> Result<Pattern> {
    let n = sol.u.get(k).map(|u| u.len()).ok_or_else(|| Error::Dimension(format!("no receive filter for tag {k}")))?;
    let p1 = tx_beampattern(sol, grid, sol.w.len());
    let p2 = rx_beampattern(sol, k, grid, n)?;
    Ok(p1.iter().zip(&p2).map(|(a, b)| (a.0, a.1 * b.1)).collect())
}

/// Indices of samples strictly above one neighbour and not below the other.
pub fn local_maxima(pattern: &[(f64, f64)]) -> Vec<usize> {
    let n = pattern.len();
    (0..n)
        .filter(|&i| {
            let g = pattern[i].1;
            let left = if i > 0 { Some(pattern[i - 1].1) } else { None };
            let right = if i + 1 < n { Some(pattern[i + 1].1) } else { None };
            match (left, right) {
                (Some(l), Some(r)) => (g > l && g >= r) || (g >= l && g > r),
                (None, Some(r)) => g > r,
                (Some(l), None) => g > l,
                (None, None) => true,
            }
        })
        .collect()
}

/// Two-column CSV, `theta_deg,gain_db`. Zero gains print as `-inf`.
pub fn write_pattern_csv<W: Write>(mut out: W, pattern: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "theta_deg,gain_db")?;
    for &(t, g) in pattern {
        writeln!(out, "{:.4},{:.6}", t.to_degrees(), 10.0 * g.log10())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat, CVec};
    use proptest::prelude::*;

    fn sol(w: CVec, s: CMat, u: Vec<CVec>) -> BeamformingSolution {
        let k = u.len();
        BeamformingSolution { w, s, u, alpha: vec![0.5; k] }
    }

    #[test]
    fn grid_validation() {
        assert!(AngleGrid::new(1.0, 0.0, 10).is_err());
        assert!(AngleGrid::new(0.0, 1.0, 1).is_err());
        let g = AngleGrid::broadside(0.5).unwrap();
        assert_eq!(g.num_points, 361);
        assert!((g.step().to_degrees() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tx_peak_at_steered_direction() {
        let grid = AngleGrid::broadside(0.5).unwrap();
        let theta0 = 25f64.to_radians();
        let w = steering_vector(theta0, 8, 1.0);
        let p = tx_beampattern(&sol(w, CMat::zeros(8, 8), vec![]), &grid, 8);
        let imax = (0..p.len()).max_by(|&a, &b| p[a].1.total_cmp(&p[b].1)).unwrap();
        let nearest = (0..p.len()).min_by(|&a, &b| (p[a].0 - theta0).abs().total_cmp(&(p[b].0 - theta0).abs())).unwrap();
        assert_eq!(imax, nearest);
    }

    #[test]
    fn isotropic_covariance_is_flat() {
        let grid = AngleGrid::broadside(1.0).unwrap();
        let cval = 0.7;
        let p = tx_beampattern(&sol(CVec::zeros(6), CMat::identity(6, 6) * c(cval, 0.0), vec![]), &grid, 6);
        for (_, g) in p {
            assert!((g - cval).abs() < 1e-12);
        }
    }

    #[test]
    fn rx_matched_and_orthogonal() {
        let grid = AngleGrid::broadside(0.5).unwrap();
        let theta0 = grid.angle(200);
        let b0 = steering_vector(theta0, 8, 1.0);
        let u = &b0 / c(b0.norm(), 0.0);
        let p = rx_beampattern(&sol(CVec::zeros(8), CMat::zeros(8, 8), vec![u]), 0, &grid, 8).unwrap();
        let imax = (0..p.len()).max_by(|&a, &b| p[a].1.total_cmp(&p[b].1)).unwrap();
        assert_eq!(imax, 200);
        assert!((p[200].1 - b0.norm_squared()).abs() < 1e-12);

        // a filter orthogonal to b(theta0)
        let mut v = CVec::from_element(8, c(0.0, 0.0));
        v[0] = b0[1].conj();
        v[1] = -b0[0].conj();
        let v = &v / c(v.norm(), 0.0);
        let p = rx_beampattern(&sol(CVec::zeros(8), CMat::zeros(8, 8), vec![v]), 0, &grid, 8).unwrap();
        assert!(p[200].1 < 1e-28);
    }

    #[test]
    fn local_maxima_finder() {
        let p: Pattern = [0.0, 1.0, 0.5, 0.5, 2.0, 1.0, 3.0].iter().enumerate().map(|(i, &g)| (i as f64, g)).collect();
        assert_eq!(local_maxima(&p), vec![1, 4, 6]);
    }

    #[test]
    fn csv_format() {
        let mut buf = Vec::new();
        write_pattern_csv(&mut buf, &[(0.0, 1.0), (std::f64::consts::FRAC_PI_4, 10.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "theta_deg,gain_db\n0.0000,0.000000\n45.0000,10.000000\n");
    }

    proptest! {
        #[test]
        fn joint_is_product_and_nonnegative(seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = crate::linalg::complex_normal_vec(4, &mut rng);
            let x = CMat::from_fn(4, 2, |_, _| crate::linalg::complex_normal(&mut rng));
            let u = crate::linalg::complex_normal_vec(5, &mut rng);
            let u = &u / c(u.norm(), 0.0);
            let s = sol(w, &x * x.adjoint(), vec![u]);
            let grid = AngleGrid::new(-1.2, 1.2, 97).unwrap();
            let p1 = tx_beampattern(&s, &grid, 4);
            let p2 = rx_beampattern(&s, 0, &grid, 5).unwrap();
            let p3 = joint_beampattern(&s, 0, &grid).unwrap();
            for i in 0..grid.num_points {
                prop_assert!(p1[i].1 >= 0.0 && p2[i].1 >= 0.0);
                prop_assert!((p3[i].1 - p1[i].1 * p2[i].1).abs() <= 1e-12 * p3[i].1.abs().max(1e-300));
            }
        }
    }
}
