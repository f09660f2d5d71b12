//! Classification of the (lambda, delta) plane into the stable fixed-point
//! region (I) and the self-oscillating region (II).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{simulate_attractor, AttractorKind, IntegratorConfig};
use crate::error::{Error, Result};
use crate::fixed_points::{eigen_crossing, find_threshold, solve_fixed_point, SweepAxis};
use crate::model::ModelParams;
use crate::paths::Grid;
use crate::sweep::{derive_seed, par_map};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// At least one linearly stable fixed point.
    I,
    /// No stable fixed point.
    II,
    /// The fixed-point solve failed.
    Unknown,
}

impl Region {
    pub fn code(self) -> i32 {
        match self {
            Region::I => 1,
            Region::II => 2,
            Region::Unknown => 0,
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
            Region::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCell {
    pub lambda: f64,
    pub delta: f64,
    pub region: Region,
    /// Largest eigenvalue real part at the most stable fixed point
    /// (NaN when unknown).
    pub max_re: f64,
    pub roots: usize,
}

/// Eigenvalue classification of a single parameter point.
pub fn classify_point(params: &ModelParams) -> PhaseCell {
    let mut cell = PhaseCell {
        lambda: params.lambda,
        delta: params.delta,
        region: Region::Unknown,
        max_re: f64::NAN,
        roots: 0,
    };
    match solve_fixed_point(params) {
        Ok(fps) => {
            cell.roots = fps.len();
            cell.max_re = fps
                .iter()
                .map(|f| f.max_real_eigenvalue())
                .fold(f64::INFINITY, f64::min);
            cell.region = if fps.iter().any(|f| f.stable) {
                Region::I
            } else {
                Region::II
            };
        }
        Err(e) => log::warn!(
            "cell lambda={}, delta={} unclassified: {e}",
            params.lambda,
            params.delta
        ),
    }
    cell
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Row-major: one row of lambdas per delta.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_delta: usize, i_lambda: usize) -> &PhaseCell {
        &self.cells[i_delta * self.lambdas.len() + i_lambda]
    }

    pub fn unknown_fraction(&self) -> f64 {
        let n = self.cells.iter().filter(|c| c.region == Region::Unknown).count();
        n as f64 / self.cells.len() as f64
    }

    /// Whether a neighbouring cell (including diagonals) has another region.
    pub fn near_boundary(&self, i_delta: usize, i_lambda: usize) -> bool {
        let r = self.cell(i_delta, i_lambda).region;
        let (nd, nl) = (self.deltas.len() as isize, self.lambdas.len() as isize);
        for dd in -1..=1isize {
            for dl in -1..=1isize {
                let (d, l) = (i_delta as isize + dd, i_lambda as isize + dl);
                if (0..nd).contains(&d) && (0..nl).contains(&l) && self.cell(d as usize, l as usize).region != r {
                    return true;
                }
            }
        }
        false
    }

    /// Region at the grid point nearest to `(lambda, delta)`.
    pub fn region_at(&self, lambda: f64, delta: f64) -> Region {
        let nearest = |xs: &[f64], x: f64| {
            xs.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.cell(nearest(&self.deltas, delta), nearest(&self.lambdas, lambda)).region
    }
}

pub fn sweep_phase_diagram(
    template: &ModelParams,
    lambdas: &Grid,
    deltas: &Grid,
    threads: usize,
) -> Result<PhaseDiagram> {
    template.validate()?;
    let lambdas = lambdas.values();
    let deltas = deltas.values();
    let points: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|&d| lambdas.iter().map(move |&l| (l, d)))
        .collect();
    let cells = par_map(&points, threads, |_, &(l, d)| {
        classify_point(&template.with_delta(d).with_lambda(l))
    })?;
    Ok(PhaseDiagram {
        lambdas,
        deltas,
        cells,
    })
}

/// Lasing threshold at one detuning, from the grid and refined.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub delta: f64,
    /// First grid lambda in region II after a region-I cell.
    pub lambda_grid: Option<f64>,
    /// Eigenvalue crossing refined inside the grid bracket.
    pub lambda_eigen: Option<f64>,
    /// Root of `gamma_m + gamma_opt`.
    pub lambda_gamma: Option<f64>,
}

pub fn boundary_curve(
    diagram: &PhaseDiagram,
    template: &ModelParams,
    threads: usize,
) -> Result<Vec<BoundaryRow>> {
    let nl = diagram.lambdas.len();
    let rows: Vec<usize> = (0..diagram.deltas.len()).collect();
    par_map(&rows, threads, |_, &i| {
        let delta = diagram.deltas[i];
        let base = template.with_delta(delta);
        let onset = (1..nl).find(|&k| {
            diagram.cell(i, k - 1).region == Region::I && diagram.cell(i, k).region == Region::II
        });
        let lambda_grid = onset.map(|k| diagram.lambdas[k]);
        let lambda_eigen = onset.and_then(|k| {
            eigen_crossing(&base, SweepAxis::Lambda, diagram.lambdas[k - 1], diagram.lambdas[k]).ok()
        });
        let lambda_gamma = find_threshold(template, delta).ok();
        BoundaryRow {
            delta,
            lambda_grid,
            lambda_eigen,
            lambda_gamma,
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub lambda: f64,
    pub delta: f64,
    pub region: Region,
    pub attractor: Result<AttractorKind>,
}

impl CrossCheck {
    pub fn agrees(&self) -> bool {
        matches!(
            (self.region, &self.attractor),
            (Region::I, Ok(AttractorKind::FixedPoint)) | (Region::II, Ok(AttractorKind::LimitCycle))
        )
    }
}

/// Time-integrate a seeded random subsample of the cells that are not
/// next to the boundary and compare with the eigenvalue classification.
pub fn cross_check(
    diagram: &PhaseDiagram,
    template: &ModelParams,
    config: &IntegratorConfig,
    fraction: f64,
    seed: u64,
    threads: usize,
) -> Result<Vec<CrossCheck>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "cross-check fraction must lie in [0, 1] (got {fraction})"
        )));
    }
    let nl = diagram.lambdas.len();
    let eligible: Vec<usize> = (0..diagram.cells.len())
        .filter(|&k| {
            diagram.cells[k].region != Region::Unknown && !diagram.near_boundary(k / nl, k % nl)
        })
        .collect();
    let take = ((fraction * diagram.cells.len() as f64).ceil() as usize).min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), take)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    par_map(&picked, threads, |_, &k| {
        let c = &diagram.cells[k];
        let params = template.with_delta(c.delta).with_lambda(c.lambda);
        CrossCheck {
            lambda: c.lambda,
            delta: c.delta,
            region: c.region,
            attractor: simulate_attractor(&params, config, derive_seed(seed, k as u64))
                .map(|r| r.kind),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marked_points() {
        let t = ModelParams::reference(10.0, 0.0);
        assert_eq!(classify_point(&t.with_lambda(3.0)).region, Region::I);
        assert_eq!(classify_point(&t.with_lambda(5.01)).region, Region::II);
        assert_eq!(classify_point(&t.with_lambda(8.0)).region, Region::II);
    }

    #[test]
    fn single_cell_diagram() {
        let t = ModelParams::reference(10.0, 0.0);
        let g = Grid::new(3.0, 3.0, 1.0).unwrap();
        let d = sweep_phase_diagram(&t, &g, &Grid::new(10.0, 10.0, 1.0).unwrap(), 1).unwrap();
        assert_eq!(d.cells.len(), 1);
        assert!(!d.near_boundary(0, 0));
        assert_eq!(d.region_at(3.0, 10.0), Region::I);
        assert_eq!(d.unknown_fraction(), 0.0);
    }

    #[test]
    fn boundary_rows_bracket_the_threshold() {
        let t = ModelParams::reference(10.0, 0.0);
        let d = sweep_phase_diagram(
            &t,
            &Grid::new(4.0, 6.0, 0.25).unwrap(),
            &Grid::new(10.0, 10.0, 1.0).unwrap(),
            2,
        )
        .unwrap();
        let rows = boundary_curve(&d, &t, 1).unwrap();
        let r = &rows[0];
        let grid = r.lambda_grid.unwrap();
        let eig = r.lambda_eigen.unwrap();
        assert!(eig <= grid && eig > grid - 0.25);
        assert!((r.lambda_gamma.unwrap() - eig).abs() < 1e-3);
    }
}
