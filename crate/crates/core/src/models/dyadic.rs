//! Dyadic-cube model: kernel `K(x,y) = Σ_Q s_Q/ω(Q)·χ_Q(x)χ_Q(y)` over the
//! dyadic cubes of `[0,1)^n` up to generation `L`, summed over cubes with
//! `ω(Q) ≠ 0`. The associated `d = 1/K` is an ultra-metric (exactly, even in
//! floating point: kernel values along a chain share their prefix sums), and
//! the operator norm is sandwiched by the discrete Carleson norm,
//! `‖s‖_ω ≤ ‖T‖ ≤ 4‖s‖_ω`.

use std::collections::BTreeMap;

use super::ModelError;
use crate::rng::keyed_unit;
use crate::space::{KernelMatrix, MeasureSpace};

/// One dyadic cube: generation and floored coordinates in `[0, 2^gen)^n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CubeId {
    pub gen: u32,
    pub coords: Vec<u64>,
}

impl CubeId {
    fn containing(point: &[f64], gen: u32) -> CubeId {
        let scale = (1u64 << gen) as f64;
        CubeId {
            gen,
            coords: point.iter().map(|&x| (x * scale) as u64).collect(),
        }
    }

    /// Whether `self ⊆ other` in the dyadic grid.
    fn contained_in(&self, other: &CubeId) -> bool {
        self.gen >= other.gen
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(&c, &p)| c >> (self.gen - other.gen) == p)
    }

    fn key(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.gen as u64;
        for &c in &self.coords {
            h = h.wrapping_mul(0x1000_0000_01b3) ^ c;
        }
        h
    }
}

/// How the per-cube scalars `s_Q` are generated.
#[derive(Debug, Clone)]
pub enum SRule {
    Constant(f64),
    /// `s_Q` uniform in `[lo, hi)`, a pure function of `(seed, cube)` so the
    /// assignment does not depend on enumeration order.
    Seeded { seed: u64, lo: f64, hi: f64 },
    /// Explicit per-cube values; every massed cube up to the model level
    /// must be listed.
    PerCube(BTreeMap<CubeId, f64>),
}

impl SRule {
    fn value(&self, id: &CubeId) -> Result<f64, ModelError> {
        let v = match self {
            SRule::Constant(c) => *c,
            SRule::Seeded { seed, lo, hi } => lo + (hi - lo) * keyed_unit(*seed, id.key()),
            SRule::PerCube(map) => map.get(id).copied().ok_or_else(|| {
                ModelError::InvalidSpec(format!(
                    "no s value for cube gen={} coords={:?}",
                    id.gen, id.coords
                ))
            })?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(ModelError::InvalidSpec(format!(
                "s value {v} for cube gen={} coords={:?} must be positive and finite",
                id.gen, id.coords
            )));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone)]
struct CubeInfo {
    id: CubeId,
    mass: f64,
    s: f64,
}

#[derive(Debug, Clone)]
pub struct DyadicModel {
    pub dim: usize,
    pub level: u32,
    pub atoms: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    cubes: Vec<CubeInfo>,
    /// `prefix[i][g] = Σ_{g' ≤ g} s/ω` along atom `i`'s cube chain.
    chain_prefix: Vec<Vec<f64>>,
}

/// Assemble the model from point masses. Cubes that carry no mass do not
/// enter the sums.
pub fn build_dyadic(
    dim: usize,
    level: u32,
    atoms: Vec<Vec<f64>>,
    masses: Vec<f64>,
    rule: &SRule,
) -> Result<DyadicModel, ModelError> {
    if atoms.is_empty() {
        return Err(ModelError::EmptyMeasure);
    }
    if atoms.len() != masses.len() || atoms.iter().any(|a| a.len() != dim) {
        return Err(ModelError::InvalidSpec("atoms/masses shape mismatch".into()));
    }
    for (i, (a, &m)) in atoms.iter().zip(&masses).enumerate() {
        if a.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(ModelError::AtomOutOfDomain { index: i });
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(ModelError::NonPositiveWeight { index: i });
        }
    }

    let mut mass_by_cube: BTreeMap<CubeId, f64> = BTreeMap::new();
    for (a, &m) in atoms.iter().zip(&masses) {
        for gen in 0..=level {
            *mass_by_cube.entry(CubeId::containing(a, gen)).or_insert(0.0) += m;
        }
    }
    let cubes: Vec<CubeInfo> = mass_by_cube
        .into_iter()
        .map(|(id, mass)| {
            let s = rule.value(&id)?;
            Ok(CubeInfo { id, mass, s })
        })
        .collect::<Result<_, ModelError>>()?;

    let lookup: BTreeMap<&CubeId, &CubeInfo> = cubes.iter().map(|c| (&c.id, c)).collect();
    let chain_prefix = atoms
        .iter()
        .map(|a| {
            let mut acc = 0.0;
            (0..=level)
                .map(|gen| {
                    let info = lookup[&CubeId::containing(a, gen)];
                    acc += info.s / info.mass;
                    acc
                })
                .collect()
        })
        .collect();

    Ok(DyadicModel {
        dim,
        level,
        atoms,
        masses,
        cubes,
        chain_prefix,
    })
}

impl DyadicModel {
    /// Deepest generation at which `i` and `j` share a cube.
    fn common_generation(&self, i: usize, j: usize) -> u32 {
        let mut common = 0;
        for gen in 1..=self.level {
            if CubeId::containing(&self.atoms[i], gen) == CubeId::containing(&self.atoms[j], gen) {
                common = gen;
            } else {
                break;
            }
        }
        common
    }

    /// Kernel entry: the shared prefix of the two chains.
    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        self.chain_prefix[i][self.common_generation(i, j) as usize]
    }

    pub fn kernel(&self) -> KernelMatrix {
        KernelMatrix::from_fn_symmetric(self.atoms.len(), |i, j| self.kernel_entry(i, j))
            .expect("dyadic kernel entries are positive and finite")
    }

    pub fn measure(&self) -> MeasureSpace {
        MeasureSpace::with_coords(self.masses.clone(), self.atoms.clone())
            .expect("masses validated at build time")
    }

    /// `‖s‖_ω = sup_Q ω(Q)⁻¹ Σ_{P ⊆ Q} s_P·ω(P)`, exact over the finite
    /// family of massed cubes.
    pub fn carleson_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for q in &self.cubes {
            let mut sum = 0.0;
            for p in &self.cubes {
                if p.id.contained_in(&q.id) {
                    sum += p.s * p.mass;
                }
            }
            best = best.max(sum / q.mass);
        }
        best
    }

    /// `Σ_Q s_Q/ω(Q)·(∫_Q g dω)²`, the bilinear form `⟨Tg, g⟩` written
    /// cube by cube.
    pub fn bilinear_form(&self, g: &[f64]) -> f64 {
        assert_eq!(g.len(), self.atoms.len());
        let mut total = 0.0;
        for q in &self.cubes {
            let integral: f64 = self
                .atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| CubeId::containing(a, q.id.gen) == q.id)
                .map(|(i, _)| g[i] * self.masses[i])
                .sum();
            total += q.s / q.mass * integral * integral;
        }
        total
    }

    pub fn cube_count(&self) -> usize {
        self.cubes.len()
    }

    /// `(generation, mass, s)` per massed cube, for reports.
    pub fn cube_summaries(&self) -> Vec<(u32, f64, f64)> {
        self.cubes.iter().map(|c| (c.id.gen, c.mass, c.s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neumann::{apply_t, operator_norm};
    use crate::rng::SplitMix64;

    fn random_model(seed: u64, n_atoms: usize, level: u32) -> DyadicModel {
        let mut rng = SplitMix64::new(seed);
        let atoms: Vec<Vec<f64>> = (0..n_atoms).map(|_| vec![rng.next_f64()]).collect();
        let masses: Vec<f64> = (0..n_atoms).map(|_| rng.next_range(0.5, 1.5)).collect();
        build_dyadic(
            1,
            level,
            atoms,
            masses,
            &SRule::Seeded {
                seed: seed ^ 0xD7AD,
                lo: 0.05,
                hi: 0.4,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_cube_rank_one() {
        let model = build_dyadic(1, 0, vec![vec![0.5]], vec![1.0], &SRule::Constant(0.3)).unwrap();
        let k = model.kernel();
        assert_eq!(k.entry(0, 0), 0.3);
        let norm = operator_norm(&k, &model.measure()).unwrap();
        assert!((norm - 0.3).abs() < 1e-12);
        assert_eq!(model.carleson_norm(), 0.3);
    }

    #[test]
    fn nested_pair_carleson() {
        // One atom: every cube in its chain has full mass. L = 1 gives the
        // pair Q ⊃ P with ω(Q) = ω(P) = 1, s ≡ σ: ‖s‖_ω = 2σ at Q.
        let model = build_dyadic(1, 1, vec![vec![0.25]], vec![1.0], &SRule::Constant(0.7)).unwrap();
        assert!((model.carleson_norm() - 1.4).abs() < 1e-15);
    }

    #[test]
    fn carleson_norm_homogeneous_in_s() {
        let m1 = build_dyadic(
            1,
            2,
            vec![vec![0.1], vec![0.6], vec![0.8]],
            vec![1.0, 0.5, 0.25],
            &SRule::Constant(0.2),
        )
        .unwrap();
        let m2 = build_dyadic(
            1,
            2,
            vec![vec![0.1], vec![0.6], vec![0.8]],
            vec![1.0, 0.5, 0.25],
            &SRule::Constant(0.6),
        )
        .unwrap();
        assert!((3.0 * m1.carleson_norm() - m2.carleson_norm()).abs() < 1e-12);
    }

    #[test]
    fn ultra_metric_exact() {
        let model = random_model(0x11, 30, 4);
        let k = model.kernel();
        let n = k.n();
        for i in 0..n {
            for j in 0..n {
                for z in 0..n {
                    let d = |a: usize, b: usize| 1.0 / k.entry(a, b);
                    assert!(d(i, j) <= d(i, z).max(d(z, j)));
                }
            }
        }
    }

    #[test]
    fn carleson_sandwich() {
        for seed in [1u64, 2, 3, 4] {
            let model = random_model(seed, 25, 4);
            let norm = operator_norm(&model.kernel(), &model.measure()).unwrap();
            let carleson = model.carleson_norm();
            assert!(carleson <= norm * (1.0 + 1e-10), "left sandwich failed");
            assert!(norm <= 4.0 * carleson * (1.0 + 1e-10), "right sandwich failed");
        }
    }

    #[test]
    fn bilinear_identity() {
        let model = random_model(0x99, 20, 4);
        let k = model.kernel();
        let omega = model.measure();
        let mut rng = SplitMix64::new(0x77);
        for _ in 0..5 {
            let g: Vec<f64> = (0..20).map(|_| rng.next_range(-1.0, 1.0)).collect();
            let tg = apply_t(&k, &omega, &g);
            let lhs: f64 = tg
                .iter()
                .zip(&g)
                .zip(omega.weights())
                .map(|((t, gi), w)| t * gi * w)
                .sum();
            let rhs = model.bilinear_form(&g);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn empty_measure_rejected() {
        assert!(matches!(
            build_dyadic(1, 2, vec![], vec![], &SRule::Constant(1.0)),
            Err(ModelError::EmptyMeasure)
        ));
    }

    #[test]
    fn per_cube_rule_uses_listed_values_and_rejects_gaps() {
        // One atom at 0.25, L = 1: chain is [0,1) then [0,0.5).
        let mut map = BTreeMap::new();
        map.insert(CubeId { gen: 0, coords: vec![0] }, 0.5);
        map.insert(CubeId { gen: 1, coords: vec![0] }, 0.25);
        let model = build_dyadic(
            1,
            1,
            vec![vec![0.25]],
            vec![1.0],
            &SRule::PerCube(map.clone()),
        )
        .unwrap();
        // K(x,x) = 0.5/1 + 0.25/1.
        assert_eq!(model.kernel_entry(0, 0), 0.75);
        assert_eq!(model.carleson_norm(), 0.75);

        map.remove(&CubeId { gen: 1, coords: vec![0] });
        assert!(matches!(
            build_dyadic(1, 1, vec![vec![0.25]], vec![1.0], &SRule::PerCube(map)),
            Err(ModelError::InvalidSpec(_))
        ));
    }

    #[test]
    fn nonpositive_s_rejected() {
        assert!(matches!(
            build_dyadic(1, 1, vec![vec![0.5]], vec![1.0], &SRule::Constant(0.0)),
            Err(ModelError::InvalidSpec(_))
        ));
    }
}
