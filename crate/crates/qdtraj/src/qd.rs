//! MAP-Elites engine: illuminates a spatial archive of grasp starting
//! frames with the best trajectory found per 1 cm cell.
//!
//! The behavioral descriptor of a genotype is the cell its grasp position
//! falls in; local competition keeps, per cell, the genotype whose
//! trajectory achieved the strictly largest fraction of the commanded joint
//! travel. Evaluation is embarrassingly parallel; every random draw happens
//! in the serial selection phase and insertion follows population order, so
//! the archive is bit-identical for any worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grasp::GripperModel;
use crate::interaction::{
    evaluate_adaptive, evaluate_vatmart, evaluate_where2act, joint_vector, EvalResult,
    InteractionConfig, TrajectoryPrimitive, WHERE2ACT_DIRECTIONS,
};
use crate::object::{part_pose, ActivationTask, ArticulatedObject};
use crate::rng::SplitMix64;
use crate::se3::{CellKey, Pose, Quat, Vec3};

/// How parents are picked from the archive each generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspStrategy {
    /// Elites plus random occupied cells; rewards coverage.
    Explore,
    /// Only cells whose trajectory cleared the success threshold.
    Success,
    /// Fresh random genotypes every generation, no mutation.
    Random,
}

/// How a genotype's starting frame is turned into motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    /// Rigid attachment dragged by the actuated joint.
    Adaptive,
    /// Fixed straight stroke along one of six gripper-frame directions.
    Where2act,
    /// Random residual waypoints around the grasp.
    Vatmart,
}

impl std::str::FromStr for GraspStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explore" => Ok(GraspStrategy::Explore),
            "success" => Ok(GraspStrategy::Success),
            "random" => Ok(GraspStrategy::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected explore|success|random)"
            ))),
        }
    }
}

impl std::str::FromStr for ActionSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(ActionSpace::Adaptive),
            "where2act" => Ok(ActionSpace::Where2act),
            "vatmart" => Ok(ActionSpace::Vatmart),
            other => Err(Error::InvalidConfig(format!(
                "unknown action space '{other}' (expected adaptive|where2act|vatmart)"
            ))),
        }
    }
}

impl std::fmt::Display for GraspStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraspStrategy::Explore => "explore",
            GraspStrategy::Success => "success",
            GraspStrategy::Random => "random",
        })
    }
}

impl std::fmt::Display for ActionSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActionSpace::Adaptive => "adaptive",
            ActionSpace::Where2act => "where2act",
            ActionSpace::Vatmart => "vatmart",
        })
    }
}

/// Where the non-elite half of the explore population comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomHalfSource {
    /// Uniformly random occupied cells (mutated).
    Archive,
    /// Fresh random genotypes.
    Fresh,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QdConfig {
    pub population: usize,
    pub generations: usize,
    /// Half-width of the uniform position mutation, meters.
    pub sigma_pos: f64,
    /// Maximum rotation mutation angle, radians.
    pub theta_max: f64,
    /// Padding around the moving part's bounding box for initialization,
    /// meters.
    pub init_margin: f64,
    /// Fraction of occupied cells treated as elites.
    pub elite_fraction: f64,
    /// Maximum clones of one elite per generation.
    pub clone_count: usize,
    /// Probability of redrawing the primitive gene / noise seed on mutation.
    pub redraw_prob: f64,
    pub strategy: GraspStrategy,
    pub action_space: ActionSpace,
    pub global_seed: u64,
    /// Fitness at or above which a trajectory counts as successful.
    pub success_threshold: f64,
    pub random_half_source: RandomHalfSource,
}

impl Default for QdConfig {
    fn default() -> Self {
        QdConfig {
            population: 512,
            generations: 30,
            sigma_pos: 0.03,
            theta_max: 0.26,
            init_margin: 0.09,
            elite_fraction: 0.1,
            clone_count: 4,
            redraw_prob: 0.2,
            strategy: GraspStrategy::Explore,
            action_space: ActionSpace::Adaptive,
            global_seed: 0,
            success_threshold: 0.65,
            random_half_source: RandomHalfSource::Archive,
        }
    }
}

impl QdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig("population must be >= 2".into()));
        }
        if !(self.sigma_pos >= 0.0 && self.theta_max >= 0.0 && self.init_margin >= 0.0) {
            return Err(Error::InvalidConfig(
                "mutation widths and init margin must be >= 0".into(),
            ));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(Error::InvalidConfig("elite_fraction must be in (0, 1]".into()));
        }
        if self.clone_count == 0 {
            return Err(Error::InvalidConfig("clone_count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.redraw_prob) {
            return Err(Error::InvalidConfig("redraw_prob must be in [0, 1]".into()));
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return Err(Error::InvalidConfig(
                "success_threshold must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A candidate solution: a grasp starting frame in the object base frame
/// plus the discrete levers the non-adaptive action spaces read.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    pub position: Vec3,
    pub orientation: Quat,
    /// Where2Act direction index, 0..=5.
    pub primitive_gene: u8,
    /// Keys the residual waypoint stream.
    pub noise_seed: u64,
}

impl Genotype {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveCell {
    pub genotype: Genotype,
    pub fitness: f64,
    pub s_drop: f64,
    pub trajectory: TrajectoryPrimitive,
}

/// Per-generation archive statistics (one extra row for the initial
/// population, generation 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub occupied: usize,
    /// Occupied cells: every elite holds at least a successful grasp.
    pub grasps: usize,
    /// Cells whose trajectory fitness reached the success threshold.
    pub trajectories: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InsertStats {
    pub inserted: usize,
    pub replaced: usize,
    pub rejected: usize,
    pub failed_grasp: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub cell_size: f64,
    pub cells: BTreeMap<CellKey, ArchiveCell>,
    pub generation_log: Vec<GenerationRow>,
}

impl Archive {
    pub fn new(cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::InvalidCellSize(cell_size));
        }
        Ok(Archive {
            cell_size,
            cells: BTreeMap::new(),
            generation_log: Vec::new(),
        })
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    /// Number of cells whose fitness is at or above `threshold`.
    pub fn successful(&self, threshold: f64) -> usize {
        self.cells
            .values()
            .filter(|c| c.fitness >= threshold)
            .count()
    }

    pub fn best_fitness(&self) -> f64 {
        self.cells
            .values()
            .map(|c| c.fitness)
            .fold(0.0, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.values().map(|c| c.fitness).sum::<f64>() / self.cells.len() as f64
    }

    /// Inserts one evaluated genotype. Failed grasps never enter; an
    /// occupied cell is replaced only by a strictly better fitness.
    pub fn insert(&mut self, genotype: Genotype, result: &EvalResult, stats: &mut InsertStats) {
        if !result.grasp_success {
            stats.failed_grasp += 1;
            return;
        }
        let Some(trajectory) = &result.trajectory else {
            stats.failed_grasp += 1;
            return;
        };
        let cell = ArchiveCell {
            genotype,
            fitness: result.fitness,
            s_drop: result.s_drop,
            trajectory: trajectory.clone(),
        };
        match self.cells.entry(result.descriptor) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(cell);
                stats.inserted += 1;
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if cell.fitness > e.get().fitness {
                    e.insert(cell);
                    stats.replaced += 1;
                } else {
                    stats.rejected += 1;
                }
            }
        }
    }
}

/// Axis-aligned bounds (in the object base frame) of the moving part at the
/// task's start value, padded by the init margin. Genotype positions are
/// initialized uniformly inside.
pub fn init_bounds(
    object: &ArticulatedObject,
    task: &ActivationTask,
    icfg: &InteractionConfig,
    margin: f64,
) -> Result<(Vec3, Vec3)> {
    task.validate(object)?;
    let jv = joint_vector(object, task, task.s_init, icfg)?;
    let poses = part_pose(object, &jv)?;
    let moving = task.moving_part(object);
    let base_inv = object.base_pose.invert();
    let to_base = base_inv.compose(poses[moving]);
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for bx in &object.parts[moving].boxes {
        for corner in bx.corners() {
            let p = to_base.transform_point(corner);
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("moving part bounding box"));
    }
    let m = Vec3::new(margin, margin, margin);
    Ok((lo - m, hi + m))
}

/// Uniform random orientation (Shoemake's subgroup method).
fn random_orientation(rng: &mut SplitMix64) -> Quat {
    let u1 = rng.uniform01();
    let u2 = rng.uniform01();
    let u3 = rng.uniform01();
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Quat {
        x: a * (std::f64::consts::TAU * u2).sin(),
        y: a * (std::f64::consts::TAU * u2).cos(),
        z: b * (std::f64::consts::TAU * u3).sin(),
        w: b * (std::f64::consts::TAU * u3).cos(),
    }
    .normalized()
}

/// Fresh random genotype. Draw order is part of the determinism contract:
/// position (x, y, z), orientation (3 draws), primitive gene, noise seed.
fn sample_genotype(rng: &mut SplitMix64, bounds: (Vec3, Vec3)) -> Genotype {
    let (lo, hi) = bounds;
    let position = Vec3::new(
        rng.uniform(lo.x, hi.x),
        rng.uniform(lo.y, hi.y),
        rng.uniform(lo.z, hi.z),
    );
    let orientation = random_orientation(rng);
    let primitive_gene = rng.uniform_usize(WHERE2ACT_DIRECTIONS.len()) as u8;
    let noise_seed = rng.next_u64();
    Genotype {
        position,
        orientation,
        primitive_gene,
        noise_seed,
    }
}

/// Mutated copy of a parent. Draw order: position (3), rotation axis (2)
/// and angle, gene gate (+ gene), seed gate (+ seed).
fn mutate(parent: &Genotype, rng: &mut SplitMix64, cfg: &QdConfig) -> Genotype {
    let s = cfg.sigma_pos;
    let position = parent.position
        + Vec3::new(
            rng.uniform(-s, s),
            rng.uniform(-s, s),
            rng.uniform(-s, s),
        );
    let axis = Vec3::from_array(rng.unit_vector());
    let angle = rng.uniform(0.0, cfg.theta_max);
    let orientation = Quat::from_axis_angle_unchecked(axis, angle)
        .mul(parent.orientation)
        .normalized();
    let mut primitive_gene = parent.primitive_gene;
    if rng.uniform01() < cfg.redraw_prob {
        primitive_gene = rng.uniform_usize(WHERE2ACT_DIRECTIONS.len()) as u8;
    }
    let mut noise_seed = parent.noise_seed;
    if rng.uniform01() < cfg.redraw_prob {
        noise_seed = rng.next_u64();
    }
    Genotype {
        position,
        orientation,
        primitive_gene,
        noise_seed,
    }
}

pub fn evaluate_genotype(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype: &Genotype,
    icfg: &InteractionConfig,
    qcfg: &QdConfig,
) -> Result<EvalResult> {
    let pose = genotype.pose();
    match qcfg.action_space {
        ActionSpace::Adaptive => evaluate_adaptive(object, task, gripper, pose, icfg),
        ActionSpace::Where2act => evaluate_where2act(
            object,
            task,
            gripper,
            pose,
            genotype.primitive_gene as usize,
            icfg,
        ),
        ActionSpace::Vatmart => evaluate_vatmart(
            object,
            task,
            gripper,
            pose,
            genotype.noise_seed,
            qcfg.global_seed,
            icfg,
        ),
    }
}

fn fisher_yates<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.uniform_usize(i + 1);
        items.swap(i, j);
    }
}

/// Builds the next population from the archive according to the strategy.
///
/// Explore and Success both split the population in half: parents from the
/// highest-fitness `elite_fraction` of occupied cells, and parents from
/// occupied cells uniformly. Explore draws with replacement, each elite
/// cloned at most `clone_count` times before the pool rotates; Success
/// draws without replacement and never clones; shortfalls are filled with
/// fresh genotypes. Random ignores the archive entirely.
fn select(
    archive: &Archive,
    rng: &mut SplitMix64,
    cfg: &QdConfig,
    bounds: (Vec3, Vec3),
) -> Vec<Genotype> {
    let cells: Vec<&ArchiveCell> = archive.cells.values().collect();
    let mut population = Vec::with_capacity(cfg.population);
    if cfg.strategy == GraspStrategy::Random || cells.is_empty() {
        for _ in 0..cfg.population {
            population.push(sample_genotype(rng, bounds));
        }
        return population;
    }
    // Rank by fitness; the sort is stable, so equal-fitness cells keep
    // their grid order and the elite set stays deterministic.
    let mut ranked = cells.clone();
    ranked.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
    let elite_count =
        ((cfg.elite_fraction * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
    let elites = &ranked[..elite_count];
    let elite_half = cfg.population / 2;

    match cfg.strategy {
        GraspStrategy::Explore => {
            let mut quota = vec![cfg.clone_count; elite_count];
            let mut remaining = elite_count * cfg.clone_count;
            for _ in 0..elite_half {
                if remaining == 0 {
                    // pool rotates: every elite regains its clone budget
                    quota.fill(cfg.clone_count);
                    remaining = elite_count * cfg.clone_count;
                }
                let mut ei = rng.uniform_usize(elite_count);
                while quota[ei] == 0 {
                    ei = (ei + 1) % elite_count;
                }
                quota[ei] -= 1;
                remaining -= 1;
                population.push(mutate(&elites[ei].genotype, rng, cfg));
            }
            for _ in elite_half..cfg.population {
                match cfg.random_half_source {
                    RandomHalfSource::Archive => {
                        let parent = cells[rng.uniform_usize(cells.len())];
                        population.push(mutate(&parent.genotype, rng, cfg));
                    }
                    RandomHalfSource::Fresh => {
                        population.push(sample_genotype(rng, bounds));
                    }
                }
            }
        }
        GraspStrategy::Success => {
            // elite half: each top cell at most once
            let mut elite_pool: Vec<&ArchiveCell> = elites.to_vec();
            fisher_yates(&mut elite_pool, rng);
            for i in 0..elite_half {
                match elite_pool.get(i) {
                    Some(cell) => population.push(mutate(&cell.genotype, rng, cfg)),
                    None => population.push(sample_genotype(rng, bounds)),
                }
            }
            // random half: each occupied cell at most once
            let mut cell_pool = cells.clone();
            fisher_yates(&mut cell_pool, rng);
            for i in 0..cfg.population - elite_half {
                match cell_pool.get(i) {
                    Some(cell) => population.push(mutate(&cell.genotype, rng, cfg)),
                    None => population.push(sample_genotype(rng, bounds)),
                }
            }
        }
        GraspStrategy::Random => unreachable!("handled above"),
    }
    population
}

/// Runs the full loop: an initial random population (logged as generation
/// 0) followed by `generations` rounds of select, evaluate, insert.
pub fn run(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    icfg: &InteractionConfig,
    qcfg: &QdConfig,
) -> Result<Archive> {
    run_with_observer(object, task, gripper, icfg, qcfg, |_, _| {})
}

/// Like [`run`], but calls `observer(generation, &archive)` after each
/// generation's insertions, for tests and progress reporting.
pub fn run_with_observer(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    icfg: &InteractionConfig,
    qcfg: &QdConfig,
    mut observer: impl FnMut(usize, &Archive),
) -> Result<Archive> {
    qcfg.validate()?;
    icfg.validate()?;
    task.validate(object)?;
    let bounds = init_bounds(object, task, icfg, qcfg.init_margin)?;
    let mut rng = SplitMix64::new(qcfg.global_seed);
    let mut archive = Archive::new(icfg.cell_size)?;

    for generation in 0..=qcfg.generations {
        let start = Instant::now();
        let population: Vec<Genotype> = if generation == 0 {
            (0..qcfg.population)
                .map(|_| sample_genotype(&mut rng, bounds))
                .collect()
        } else {
            select(&archive, &mut rng, qcfg, bounds)
        };
        let results: Vec<Result<EvalResult>> = population
            .par_iter()
            .map(|g| evaluate_genotype(object, task, gripper, g, icfg, qcfg))
            .collect();
        let mut stats = InsertStats::default();
        for (genotype, result) in population.into_iter().zip(results) {
            archive.insert(genotype, &result?, &mut stats);
        }
        archive.generation_log.push(GenerationRow {
            generation,
            occupied: archive.occupied(),
            grasps: archive.occupied(),
            trajectories: archive.successful(qcfg.success_threshold),
            best_fitness: archive.best_fitness(),
            mean_fitness: archive.mean_fitness(),
            seconds: start.elapsed().as_secs_f64(),
        });
        observer(generation, &archive);
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::object::{make_experimental_box, ExperimentalBoxSpec};
    use std::f64::consts::FRAC_PI_2;

    fn object() -> ArticulatedObject {
        make_experimental_box(&ExperimentalBoxSpec::default()).unwrap()
    }

    fn hinge_task() -> ActivationTask {
        ActivationTask::new(0, FRAC_PI_2, 0.0)
    }

    fn small_cfg(strategy: GraspStrategy, action_space: ActionSpace, seed: u64) -> QdConfig {
        QdConfig {
            population: 64,
            generations: 5,
            strategy,
            action_space,
            global_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn init_bounds_cover_moving_part() {
        let obj = object();
        let (lo, hi) = init_bounds(&obj, &hinge_task(), &InteractionConfig::default(), 0.15)
            .unwrap();
        // open door spans x in [0.2, 0.5]-ish, handle out to y = 0.21
        assert!(lo.x < 0.2 && hi.x > 0.45);
        assert!(hi.y > 0.21);
        assert!(lo.z < -0.1 && hi.z > 0.1);
        // margin applied on both sides
        let (lo0, hi0) = init_bounds(&obj, &hinge_task(), &InteractionConfig::default(), 0.0)
            .unwrap();
        assert!((lo0.x - lo.x - 0.15).abs() < 1e-12);
        assert!((hi.x - hi0.x - 0.15).abs() < 1e-12);
    }

    #[test]
    fn sampled_genotypes_in_bounds_and_valid() {
        let bounds = (Vec3::new(-1.0, 0.0, 2.0), Vec3::new(1.0, 0.5, 3.0));
        let mut rng = SplitMix64::new(3);
        for _ in 0..2000 {
            let g = sample_genotype(&mut rng, bounds);
            assert!(g.position.x >= -1.0 && g.position.x < 1.0);
            assert!(g.position.y >= 0.0 && g.position.y < 0.5);
            assert!(g.position.z >= 2.0 && g.position.z < 3.0);
            assert!((g.orientation.norm() - 1.0).abs() < 1e-12);
            assert!(g.primitive_gene < 6);
        }
    }

    #[test]
    fn random_orientations_are_unbiased() {
        // each quaternion component has mean 0 and variance 1/4 under the
        // uniform distribution; check component means within 4 sigma
        let mut rng = SplitMix64::new(11);
        let n = 4000;
        let mut sums = [0.0f64; 4];
        for _ in 0..n {
            let q = random_orientation(&mut rng);
            sums[0] += q.w;
            sums[1] += q.x;
            sums[2] += q.y;
            sums[3] += q.z;
        }
        let bound = 4.0 * 0.5 / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < bound, "component mean {}", s / n as f64);
        }
    }

    #[test]
    fn mutation_stays_within_widths() {
        let cfg = QdConfig::default();
        let mut rng = SplitMix64::new(5);
        let parent = Genotype {
            position: Vec3::new(0.1, 0.2, 0.3),
            orientation: Quat::IDENTITY,
            primitive_gene: 2,
            noise_seed: 77,
        };
        for _ in 0..2000 {
            let child = mutate(&parent, &mut rng, &cfg);
            let d = child.position - parent.position;
            assert!(d.x.abs() <= cfg.sigma_pos && d.y.abs() <= cfg.sigma_pos);
            assert!(d.z.abs() <= cfg.sigma_pos);
            assert!(child.orientation.angle_to(parent.orientation) <= cfg.theta_max + 1e-9);
        }
    }

    #[test]
    fn mutation_redraw_rate_matches_probability() {
        let cfg = QdConfig::default();
        let mut rng = SplitMix64::new(6);
        let parent = Genotype {
            position: Vec3::ZERO,
            orientation: Quat::IDENTITY,
            primitive_gene: 3,
            noise_seed: 123,
        };
        let n = 5000;
        let redrawn = (0..n)
            .filter(|_| mutate(&parent, &mut rng, &cfg).noise_seed != 123)
            .count();
        // Binomial(5000, 0.2): mean 1000, sigma ~28; allow 4 sigma
        assert!((880..=1120).contains(&redrawn), "redrawn {redrawn}");
    }

    #[test]
    fn insert_semantics() {
        let mut archive = Archive::new(0.01).unwrap();
        let mut stats = InsertStats::default();
        let g = Genotype {
            position: Vec3::new(0.005, 0.005, 0.005),
            orientation: Quat::IDENTITY,
            primitive_gene: 0,
            noise_seed: 0,
        };
        let key = CellKey { i: 0, j: 0, k: 0 };
        let result = |fitness: f64, grasp_success: bool| EvalResult {
            grasp_success,
            s_drop: 0.0,
            fitness,
            trajectory: grasp_success.then(|| TrajectoryPrimitive {
                frames: vec![g.pose()],
                joint_values: vec![0.0],
            }),
            descriptor: key,
        };
        archive.insert(g, &result(0.0, false), &mut stats);
        assert_eq!(archive.occupied(), 0);
        assert_eq!(stats.failed_grasp, 1);
        archive.insert(g, &result(0.5, true), &mut stats);
        assert_eq!(stats.inserted, 1);
        // tie keeps the incumbent
        let mut g2 = g;
        g2.noise_seed = 9;
        archive.insert(g2, &result(0.5, true), &mut stats);
        assert_eq!(stats.rejected, 1);
        assert_eq!(archive.cells[&key].genotype.noise_seed, 0);
        // strictly better replaces
        archive.insert(g2, &result(0.6, true), &mut stats);
        assert_eq!(stats.replaced, 1);
        assert_eq!(archive.cells[&key].genotype.noise_seed, 9);
        assert_eq!(archive.occupied(), 1);
    }

    #[test]
    fn run_logs_and_fills_monotonically() {
        let obj = object();
        let cfg = QdConfig {
            population: 256,
            ..small_cfg(GraspStrategy::Explore, ActionSpace::Adaptive, 3)
        };
        let archive = run(
            &obj,
            &hinge_task(),
            &GripperModel::default(),
            &InteractionConfig::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(archive.generation_log.len(), cfg.generations + 1);
        assert!(archive.occupied() > 0, "no cell filled in 6 generations");
        for w in archive.generation_log.windows(2) {
            assert!(w[1].occupied >= w[0].occupied);
            assert_eq!(w[1].generation, w[0].generation + 1);
        }
        let last = archive.generation_log.last().unwrap();
        assert_eq!(last.occupied, archive.occupied());
        assert!(last.best_fitness <= 1.0 && last.mean_fitness <= last.best_fitness);
    }

    #[test]
    fn run_is_deterministic() {
        let obj = object();
        let cfg = small_cfg(GraspStrategy::Explore, ActionSpace::Where2act, 23);
        let icfg = InteractionConfig::default();
        let gripper = GripperModel::default();
        let a = run(&obj, &hinge_task(), &gripper, &icfg, &cfg).unwrap();
        let b = run(&obj, &hinge_task(), &gripper, &icfg, &cfg).unwrap();
        assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn run_is_worker_count_invariant() {
        let obj = object();
        let cfg = small_cfg(GraspStrategy::Explore, ActionSpace::Vatmart, 31);
        let icfg = InteractionConfig::default();
        let gripper = GripperModel::default();
        let task = hinge_task();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run(&obj, &task, &gripper, &icfg, &cfg))
            .unwrap();
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| run(&obj, &task, &gripper, &icfg, &cfg))
            .unwrap();
        assert_eq!(single.cells, multi.cells);
    }

    #[test]
    fn strategies_and_spaces_all_run() {
        let obj = object();
        let task = hinge_task();
        let icfg = InteractionConfig::default();
        let gripper = GripperModel::default();
        for strategy in [
            GraspStrategy::Explore,
            GraspStrategy::Success,
            GraspStrategy::Random,
        ] {
            for space in [
                ActionSpace::Adaptive,
                ActionSpace::Where2act,
                ActionSpace::Vatmart,
            ] {
                let cfg = QdConfig {
                    population: 32,
                    generations: 2,
                    strategy,
                    action_space: space,
                    global_seed: 7,
                    ..Default::default()
                };
                let archive = run(&obj, &task, &gripper, &icfg, &cfg).unwrap();
                assert_eq!(archive.generation_log.len(), 3, "{strategy} {space}");
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = QdConfig {
            population: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = QdConfig {
            elite_fraction: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = QdConfig {
            success_threshold: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
