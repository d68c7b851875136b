//! Relaxed partition energy, pointwise thresholding of labels, and the normalized projection
//! update of the eigenfunction candidates.

use crate::domains::DomainMask;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, GridSpec, ScalarField};
use crate::spectral::HeatOperator;

/// Projections whose norm falls below this are treated as a vanished region.
pub const EMPTY_REGION_NORM: f64 = 1e-14;

/// The k candidate eigenfunctions `u = (u₁, …, u_k)` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiField {
    components: Vec<ScalarField>,
}

impl MultiField {
    /// Wraps the components as given; no normalization is applied.
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components.first().ok_or(Error::RegionCount {
            expected: 1,
            found: 0,
        })?;
        let spec = *first.spec();
        for c in &components[1..] {
            spec.ensure_same(c.spec())?;
        }
        Ok(Self { components })
    }

    /// Wraps the components after scaling each to unit L² norm.
    pub fn normalized(components: Vec<ScalarField>) -> Result<Self> {
        let components = components
            .into_iter()
            .enumerate()
            .map(|(region, c)| {
                let norm = l2_norm(&c);
                if norm < EMPTY_REGION_NORM {
                    Err(Error::EmptyRegion { region })
                } else {
                    Ok(c.scaled(1.0 / norm))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn spec(&self) -> &GridSpec {
        self.components[0].spec()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, region: usize) -> &ScalarField {
        &self.components[region]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Applies `op` to every component.
    pub fn diffuse(&self, op: &HeatOperator) -> Result<MultiField> {
        self.spec().ensure_same(op.spec())?;
        let components = self
            .components
            .iter()
            .map(|c| op.apply(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// `sqrt(Σ_ℓ ‖a_ℓ − b_ℓ‖²)`.
    pub fn distance(&self, other: &MultiField) -> Result<f64> {
        if self.k() != other.k() {
            return Err(Error::RegionCount {
                expected: self.k(),
                found: other.k(),
            });
        }
        let mut sum = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            sum += crate::grid::l2_distance(a, b)?.powi(2);
        }
        Ok(sum.sqrt())
    }
}

/// A labeling of the grid into `k` regions plus [`Partition::OUTSIDE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    spec: GridSpec,
    k: usize,
    labels: Vec<u32>,
}

impl Partition {
    /// Label carried by nodes outside the domain mask.
    pub const OUTSIDE: u32 = u32::MAX;

    pub fn new(spec: GridSpec, k: usize, labels: Vec<u32>) -> Result<Self> {
        if k == 0 {
            return Err(Error::RegionCount { expected: 1, found: 0 });
        }
        if labels.len() != spec.len() {
            return Err(Error::FieldLength {
                expected: spec.len(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels
            .iter()
            .find(|&&l| l != Self::OUTSIDE && l as usize >= k)
        {
            return Err(Error::InvalidConfig(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { spec, k, labels })
    }

    /// Every node outside the domain, all others unassigned to region 0.
    pub fn outside(spec: GridSpec, k: usize) -> Result<Self> {
        Self::new(spec, k, vec![Self::OUTSIDE; spec.len()])
    }

    /// All domain nodes in region 0.
    pub fn single(mask: &DomainMask, k: usize) -> Result<Self> {
        let labels = (0..mask.spec().len())
            .map(|i| if mask.contains(i) { 0 } else { Self::OUTSIDE })
            .collect();
        Self::new(*mask.spec(), k, labels)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Indicator field `φ_ℓ` of one region.
    pub fn indicator(&self, region: usize) -> ScalarField {
        let values = self
            .labels
            .iter()
            .map(|&l| if l as usize == region && l != Self::OUTSIDE { 1.0 } else { 0.0 })
            .collect();
        ScalarField::new(self.spec, values).expect("labels match the grid")
    }

    /// Node count of every region.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            if l != Self::OUTSIDE {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Number of nodes whose label differs from `other`.
    pub fn changed_cells(&self, other: &Partition) -> usize {
        self.labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// `E^τ` and its per-region terms `λ₁^τ(φ_ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue {
    pub total: f64,
    pub per_region: Vec<f64>,
}

impl EnergyValue {
    fn from_overlaps(overlaps: &[f64], tau: f64) -> Self {
        let per_region: Vec<f64> = overlaps.iter().map(|o| (1.0 - o) / tau).collect();
        Self {
            total: per_region.iter().sum(),
            per_region,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTau {
            tau,
            requirement: "positive",
        })
    }
}

fn check_pair(phi: &Partition, u: &MultiField) -> Result<()> {
    phi.spec().ensure_same(u.spec())?;
    if phi.k() != u.k() {
        return Err(Error::RegionCount {
            expected: phi.k(),
            found: u.k(),
        });
    }
    Ok(())
}

/// `E^τ(φ, u) = Σ_ℓ [1/τ − (1/τ)∫ φ_ℓ |e^{(τ/2)Δ} u_ℓ|²]` with `τ` taken from `op`.
pub fn relaxed_energy(phi: &Partition, u: &MultiField, op: &HeatOperator) -> Result<EnergyValue> {
    check_pair(phi, u)?;
    let diffused = u.diffuse(op)?;
    energy_from_diffused(phi, &diffused, op.tau())
}

/// Energy of `φ` given the already diffused candidates `u* = e^{(τ/2)Δ}u`.
pub fn energy_from_diffused(phi: &Partition, u_star: &MultiField, tau: f64) -> Result<EnergyValue> {
    check_tau(tau)?;
    check_pair(phi, u_star)?;
    let mut overlaps = vec![0.0; phi.k()];
    for (idx, &l) in phi.labels().iter().enumerate() {
        if l != Partition::OUTSIDE {
            let v = u_star.component(l as usize).values()[idx];
            overlaps[l as usize] += v * v;
        }
    }
    let w = phi.spec().cell_volume();
    overlaps.iter_mut().for_each(|o| *o *= w);
    Ok(EnergyValue::from_overlaps(&overlaps, tau))
}

/// Assigns every domain node to the smallest index maximizing `|u*_ℓ|²`.
pub fn threshold_phi(u_star: &MultiField, mask: &DomainMask) -> Result<Partition> {
    threshold_with_energy(u_star, mask, None).map(|(phi, _)| phi)
}

/// Thresholds and, when `tau` is given, evaluates the energy of the new labels from the same
/// squared values.
pub(crate) fn threshold_with_energy(
    u_star: &MultiField,
    mask: &DomainMask,
    tau: Option<f64>,
) -> Result<(Partition, Option<EnergyValue>)> {
    let spec = *mask.spec();
    spec.ensure_same(u_star.spec())?;
    let k = u_star.k();
    let mut labels = vec![Partition::OUTSIDE; spec.len()];
    let mut overlaps = vec![0.0; k];
    let comps = u_star.components();
    for (idx, label) in labels.iter_mut().enumerate() {
        if !mask.contains(idx) {
            continue;
        }
        let mut best = 0;
        let mut best_sq = comps[0].values()[idx].powi(2);
        for (l, c) in comps.iter().enumerate().skip(1) {
            let sq = c.values()[idx].powi(2);
            if sq > best_sq {
                best = l;
                best_sq = sq;
            }
        }
        *label = best as u32;
        overlaps[best] += best_sq;
    }
    let energy = match tau {
        Some(tau) => {
            check_tau(tau)?;
            let w = spec.cell_volume();
            overlaps.iter_mut().for_each(|o| *o *= w);
            Some(EnergyValue::from_overlaps(&overlaps, tau))
        }
        None => None,
    };
    Ok((Partition::new(spec, k, labels)?, energy))
}

/// One projection update: `u_ℓ ← e^{(τ/2)Δ}(φ_ℓ e^{(τ/2)Δ}u_ℓ) / ‖·‖₂` for every region.
pub fn project_u(phi: &Partition, u: &MultiField, op: &HeatOperator) -> Result<MultiField> {
    check_pair(phi, u)?;
    check_tau(op.tau())?;
    let u_star = u.diffuse(op)?;
    let projected = project_from_diffused(phi, &u_star, op);
    let components = projected
        .into_iter()
        .enumerate()
        .map(|(region, c)| c.ok_or(Error::EmptyRegion { region }))
        .collect::<Result<Vec<_>>>()?;
    MultiField::new(components)
}

/// Projection from already diffused candidates; `None` marks a vanished region.
pub(crate) fn project_from_diffused(
    phi: &Partition,
    u_star: &MultiField,
    op: &HeatOperator,
) -> Vec<Option<ScalarField>> {
    u_star
        .components()
        .iter()
        .enumerate()
        .map(|(region, c)| {
            let mut masked = c.clone();
            for (v, &l) in masked.values_mut().iter_mut().zip(phi.labels()) {
                if l as usize != region || l == Partition::OUTSIDE {
                    *v = 0.0;
                }
            }
            op.apply_in_place(masked.values_mut());
            let norm = l2_norm(&masked);
            (norm >= EMPTY_REGION_NORM).then(|| masked.scaled(1.0 / norm))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_mask, ShapeName, ShapeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(2, n).unwrap()
    }

    fn torus(n: usize) -> DomainMask {
        make_mask(grid(n), ShapeName::Torus, ShapeParams::default()).unwrap()
    }

    fn random_multi(rng: &mut ChaCha8Rng, spec: GridSpec, k: usize) -> MultiField {
        let comps = (0..k)
            .map(|_| {
                let v = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                ScalarField::new(spec, v).unwrap()
            })
            .collect();
        MultiField::normalized(comps).unwrap()
    }

    fn random_partition(rng: &mut ChaCha8Rng, mask: &DomainMask, k: usize) -> Partition {
        let labels = (0..mask.spec().len())
            .map(|i| {
                if mask.contains(i) {
                    rng.gen_range(0..k as u32)
                } else {
                    Partition::OUTSIDE
                }
            })
            .collect();
        Partition::new(*mask.spec(), k, labels).unwrap()
    }

    #[test]
    fn all_outside_has_maximal_energy() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_multi(&mut rng, g, 3);
        let phi = Partition::outside(g, 3).unwrap();
        let op = HeatOperator::new(g, 0.25).unwrap();
        let e = relaxed_energy(&phi, &u, &op).unwrap();
        assert!((e.total - 3.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn energy_argument_errors() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_multi(&mut rng, g, 2);
        let phi = Partition::single(&torus(8), 3).unwrap();
        let op = HeatOperator::new(g, 0.1).unwrap();
        assert!(matches!(relaxed_energy(&phi, &u, &op), Err(Error::RegionCount { .. })));
        let phi2 = Partition::single(&torus(8), 2).unwrap();
        assert!(matches!(
            energy_from_diffused(&phi2, &u, 0.0),
            Err(Error::InvalidTau { .. })
        ));
        let zero = HeatOperator::new(g, 0.0).unwrap();
        assert!(project_u(&phi2, &u, &zero).is_err());
    }

    #[test]
    fn exact_ties_go_to_the_smaller_index() {
        let g = grid(8);
        let a = ScalarField::from_fn(g, |p| p[0].sin());
        let b = a.map(|v| -v);
        let u = MultiField::new(vec![a, b]).unwrap();
        let phi = threshold_phi(&u, &torus(8)).unwrap();
        assert!(phi.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn single_region_on_torus() {
        let g = grid(8);
        let u = MultiField::new(vec![ScalarField::from_fn(g, |p| p[1].cos())]).unwrap();
        let phi = threshold_phi(&u, &torus(8)).unwrap();
        assert!(phi.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn threshold_matches_exhaustive_comparison() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sq = make_mask(g, ShapeName::Disk, ShapeParams { size: Some(2.5), rotation: None })
            .unwrap();
        for _ in 0..20 {
            let u = random_multi(&mut rng, g, 2);
            let phi = threshold_phi(&u, &sq).unwrap();
            for idx in 0..g.len() {
                let expected = if !sq.contains(idx) {
                    Partition::OUTSIDE
                } else {
                    let a = u.component(0).values()[idx].powi(2);
                    let b = u.component(1).values()[idx].powi(2);
                    if b > a { 1 } else { 0 }
                };
                assert_eq!(phi.labels()[idx], expected);
            }
        }
    }

    #[test]
    fn threshold_is_optimal_among_partitions() {
        let g = grid(16);
        let mask = make_mask(g, ShapeName::Square, ShapeParams::default()).unwrap();
        let op = HeatOperator::new(g, 1.0 / 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_multi(&mut rng, g, 3);
        let u_star = u.diffuse(&op).unwrap();
        let best = threshold_phi(&u_star, &mask).unwrap();
        let e_best = relaxed_energy(&best, &u, &op).unwrap().total;
        for _ in 0..50 {
            let other = random_partition(&mut rng, &mask, 3);
            let e = relaxed_energy(&other, &u, &op).unwrap().total;
            assert!(e_best <= e + 1e-12, "{e_best} > {e}");
        }
    }

    #[test]
    fn fourier_mode_is_a_projection_fixed_point() {
        let g = grid(32);
        let c = ScalarField::from_fn(g, |p| p[0].cos());
        let u = MultiField::normalized(vec![c]).unwrap();
        let phi = Partition::single(&torus(32), 1).unwrap();
        let op = HeatOperator::new(g, 0.3).unwrap();
        let next = project_u(&phi, &u, &op).unwrap();
        assert!(next.distance(&u).unwrap() < 1e-12);
    }

    #[test]
    fn empty_region_is_reported() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_multi(&mut rng, g, 2);
        let phi = Partition::single(&torus(8), 2).unwrap();
        let op = HeatOperator::new(g, 0.1).unwrap();
        assert_eq!(project_u(&phi, &u, &op), Err(Error::EmptyRegion { region: 1 }));
    }

    #[test]
    fn projection_never_increases_energy() {
        let g = grid(32);
        let mask = make_mask(g, ShapeName::Disk, ShapeParams { size: Some(2.8), rotation: None })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..100 {
            let k = 1 + trial % 4;
            let tau = [0.25, 1.0 / 16.0, 1.0 / 64.0][trial % 3];
            let op = HeatOperator::new(g, tau).unwrap();
            let u = random_multi(&mut rng, g, k);
            let phi = random_partition(&mut rng, &mask, k);
            let before = relaxed_energy(&phi, &u, &op).unwrap();
            let next = project_u(&phi, &u, &op).unwrap();
            for c in next.components() {
                assert!((l2_norm(c) - 1.0).abs() < 1e-10);
            }
            let after = relaxed_energy(&phi, &next, &op).unwrap();
            assert!(after.total <= before.total + 1e-10, "trial {trial}");
            for e in [&before, &after] {
                assert!(e.total >= -1e-12 && e.total <= k as f64 / tau + 1e-12);
                let sum: f64 = e.per_region.iter().sum();
                assert!((sum - e.total).abs() <= 1e-10 * e.total.abs().max(1.0));
            }
            let sizes: usize = phi.region_sizes().iter().sum();
            assert_eq!(sizes, mask.cell_count());
        }
    }

    #[test]
    fn relaxed_eigenvalue_of_smooth_square_mode() {
        // Periodic extension of the square's first eigenfunction: an exact Laplacian mode.
        let g = grid(512);
        let mask = make_mask(g, ShapeName::Square, ShapeParams::default()).unwrap();
        let u = MultiField::new(vec![ScalarField::from_fn(g, |p| {
            2.0 / PI * p[0].cos() * p[1].cos()
        })])
        .unwrap();
        let phi = Partition::single(&mask, 1).unwrap();
        for (j, expected) in [(4, 1.8801), (9, 1.9961)] {
            let tau = 2f64.powi(-j);
            let op = HeatOperator::new(g, tau).unwrap();
            let e = relaxed_energy(&phi, &u, &op).unwrap();
            assert!((e.total - expected).abs() < 2e-3, "tau=2^-{j}: {}", e.total);
        }
    }
}
