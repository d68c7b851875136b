//! Random Voronoi initialization of the candidate eigenfunctions.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64`, which is portable across platforms, so a
//! seed fully determines the initial state.

use crate::domains::DomainMask;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::partition::{MultiField, Partition};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Attempts at redrawing a seed whose Voronoi cell came out empty.
pub const MAX_RESEEDS: usize = 100;

/// Distance used to assign nodes to seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Wrap-around distance on the `[-π, π]^dim` torus.
    Periodic,
    Euclidean,
}

impl Metric {
    /// Periodic on the torus, Euclidean inside bounded domains.
    pub fn for_mask(mask: &DomainMask) -> Self {
        if mask.is_torus() {
            Metric::Periodic
        } else {
            Metric::Euclidean
        }
    }

    fn dist2(self, a: &[f64; 3], b: &[f64; 3], dim: usize) -> f64 {
        (0..dim)
            .map(|i| {
                let mut d = (a[i] - b[i]).abs();
                if self == Metric::Periodic && d > PI {
                    d = 2.0 * PI - d;
                }
                d * d
            })
            .sum()
    }
}

/// Seed points of a Voronoi initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub points: Vec<[f64; 3]>,
    pub rng_seed: u64,
}

/// Labels every domain node with its nearest seed; ties go to the smaller seed index.
pub fn voronoi_labels(seeds: &[[f64; 3]], mask: &DomainMask, metric: Metric) -> Result<Partition> {
    let spec = *mask.spec();
    let k = seeds.len();
    let mut labels = vec![Partition::OUTSIDE; spec.len()];
    for (idx, label) in labels.iter_mut().enumerate() {
        if !mask.contains(idx) {
            continue;
        }
        let p = spec.point(idx);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (s, seed) in seeds.iter().enumerate() {
            let d = metric.dist2(&p, seed, spec.dim());
            if d < best_d {
                best = s;
                best_d = d;
            }
        }
        *label = best as u32;
    }
    Partition::new(spec, k, labels)
}

/// Normalized region indicators `χ_{A_ℓ} / |A_ℓ|^{1/2}`.
pub fn indicator_field(phi: &Partition) -> Result<MultiField> {
    let comps = (0..phi.k()).map(|l| phi.indicator(l)).collect();
    MultiField::normalized(comps)
}

/// One seed: a uniformly chosen domain node plus a jitter of at most half a cell.
fn draw_seed(rng: &mut ChaCha8Rng, spec: &GridSpec, inside: &[usize]) -> [f64; 3] {
    let idx = inside[rng.gen_range(0..inside.len())];
    let mut p = spec.point(idx);
    let h = spec.h();
    for c in p.iter_mut().take(spec.dim()) {
        *c += rng.gen_range(-0.5 * h..0.5 * h);
    }
    p
}

/// Random seeds whose Voronoi cells are all nonempty.
pub fn random_seeds(k: usize, mask: &DomainMask, rng_seed: u64, metric: Metric) -> Result<SeedSet> {
    if k == 0 {
        return Err(Error::RegionCount { expected: 1, found: 0 });
    }
    let cells = mask.cell_count();
    if k > cells {
        return Err(Error::TooManyRegions { k, cells });
    }
    let spec = *mask.spec();
    let inside: Vec<usize> = (0..spec.len()).filter(|&i| mask.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut points: Vec<[f64; 3]> = (0..k).map(|_| draw_seed(&mut rng, &spec, &inside)).collect();
    for _ in 0..MAX_RESEEDS {
        let sizes = voronoi_labels(&points, mask, metric)?.region_sizes();
        let empty: Vec<usize> = (0..k).filter(|&l| sizes[l] == 0).collect();
        if empty.is_empty() {
            return Ok(SeedSet { points, rng_seed });
        }
        for l in empty {
            points[l] = draw_seed(&mut rng, &spec, &inside);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_RESEEDS,
    })
}

/// Random Voronoi start `u⁰`: each component is the normalized indicator of one Voronoi cell.
pub fn voronoi_init(k: usize, mask: &DomainMask, rng_seed: u64, metric: Metric) -> Result<MultiField> {
    let seeds = random_seeds(k, mask, rng_seed, metric)?;
    voronoi_from_seeds(&seeds.points, mask, metric)
}

/// Voronoi start from explicit seed points.
pub fn voronoi_from_seeds(seeds: &[[f64; 3]], mask: &DomainMask, metric: Metric) -> Result<MultiField> {
    if seeds.is_empty() {
        return Err(Error::RegionCount { expected: 1, found: 0 });
    }
    let phi = voronoi_labels(seeds, mask, metric)?;
    indicator_field(&phi)
}
