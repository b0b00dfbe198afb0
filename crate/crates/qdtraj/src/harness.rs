//! Experiment harness: configuration, the strategy-by-action-space
//! comparison matrix, and all file I/O.
//!
//! Artifacts are diff-able, language-neutral JSON/CSV. archive.json is
//! byte-reproducible: cells are written in key order, quaternions are sign
//! canonicalized, and floats use shortest-roundtrip formatting, so equal
//! archives serialize to equal bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grasp::{evaluate_grasp, GripperModel};
use crate::interaction::{joint_vector, InteractionConfig, TrajectoryPrimitive};
use crate::object::{
    make_experimental_box, parse_urdf, ActivationTask, ArticulatedObject, ExperimentalBoxSpec,
};
use crate::qd::{self, ActionSpace, Archive, GraspStrategy, QdConfig};
use crate::se3::{bin_descriptor, CellKey, Pose, Quat, Vec3};

pub const ARCHIVE_SCHEMA_VERSION: u64 = 1;
pub const METRICS_HEADER: &str =
    "generation,occupied,grasps,trajectories,best_fitness,mean_fitness,seconds";

/// Distinct exit codes per failure class.
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INVALID_TASK: i32 = 2;
pub const EXIT_OBJECT: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

pub type CliResult<T> = std::result::Result<T, CliFailure>;

fn fail(code: i32) -> impl Fn(Error) -> CliFailure {
    move |e| CliFailure {
        code,
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectSource {
    /// The builtin articulated box (door hinge + sliding tray); the
    /// geometry is overridable from the config file.
    BuiltinBox {
        #[serde(default)]
        spec: ExperimentalBoxSpec,
    },
    Urdf { path: PathBuf },
}

impl ObjectSource {
    /// The builtin box with its default geometry.
    pub fn builtin_box() -> Self {
        ObjectSource::BuiltinBox {
            spec: ExperimentalBoxSpec::default(),
        }
    }
}

/// Everything one experiment needs; loadable from a JSON config file,
/// overridable flag by flag on the command line.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub object: ObjectSource,
    /// Movable joint, by name or by index.
    pub joint: String,
    pub s_init: f64,
    pub s_target: f64,
    pub qd: QdConfig,
    pub interaction: InteractionConfig,
    pub gripper: GripperModel,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            object: ObjectSource::builtin_box(),
            joint: "hinge0".into(),
            s_init: std::f64::consts::FRAC_PI_2,
            s_target: 0.0,
            qd: QdConfig::default(),
            interaction: InteractionConfig::default(),
            gripper: GripperModel::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
        }
    }
}

pub fn load_object(source: &ObjectSource) -> Result<ArticulatedObject> {
    match source {
        ObjectSource::BuiltinBox { spec } => make_experimental_box(spec),
        ObjectSource::Urdf { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(parse_urdf(&text)?.object)
        }
    }
}

/// Resolves the spec's joint (name or movable-joint index) to a task.
pub fn resolve_task(object: &ArticulatedObject, spec: &ExperimentSpec) -> Result<ActivationTask> {
    let movable = object.movable_joints();
    let index = if let Ok(i) = spec.joint.parse::<usize>() {
        i
    } else {
        movable
            .iter()
            .position(|&ji| object.joints[ji].name == spec.joint)
            .ok_or_else(|| {
                Error::InvalidTask(format!(
                    "no movable joint named '{}' (movable joints: {})",
                    spec.joint,
                    movable
                        .iter()
                        .map(|&ji| object.joints[ji].name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?
    };
    let task = ActivationTask::new(index, spec.s_init, spec.s_target);
    task.validate(object)?;
    Ok(task)
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn quat_array(q: Quat) -> Value {
    let c = q.canonicalized();
    json!([num(c.w), num(c.x), num(c.y), num(c.z)])
}

fn vec_array(v: Vec3) -> Value {
    json!([num(v.x), num(v.y), num(v.z)])
}

/// Trajectory file content: a JSON list of [x, y, z, qw, qx, qy, qz, s]
/// rows, quaternions sign canonicalized.
pub fn trajectory_json(traj: &TrajectoryPrimitive) -> Vec<u8> {
    let rows: Vec<Value> = traj
        .frames
        .iter()
        .zip(&traj.joint_values)
        .map(|(pose, &s)| {
            let q = pose.orientation.canonicalized();
            json!([
                num(pose.position.x),
                num(pose.position.y),
                num(pose.position.z),
                num(q.w),
                num(q.x),
                num(q.y),
                num(q.z),
                num(s)
            ])
        })
        .collect();
    let mut bytes = serde_json::to_vec(&Value::Array(rows)).expect("trajectory serializes");
    bytes.push(b'\n');
    bytes
}

pub fn trajectory_hash(content: &[u8]) -> String {
    let digest = Sha256::digest(content);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One run, fully serialized: archive.json bytes, metrics.csv bytes, and
/// the content-addressed trajectory files.
pub struct SerializedRun {
    pub archive_json: Vec<u8>,
    pub metrics_csv: Vec<u8>,
    pub trajectories: BTreeMap<String, Vec<u8>>,
}

pub fn serialize_run(archive: &Archive, qcfg: &QdConfig) -> SerializedRun {
    let mut trajectories = BTreeMap::new();
    let mut cells = Vec::with_capacity(archive.cells.len());
    for (key, cell) in &archive.cells {
        let content = trajectory_json(&cell.trajectory);
        let hash = trajectory_hash(&content);
        trajectories.insert(hash.clone(), content);
        cells.push(json!({
            "cell": [key.i, key.j, key.k],
            "genotype": {
                "position": vec_array(cell.genotype.position),
                "orientation": quat_array(cell.genotype.orientation),
                "primitive_gene": cell.genotype.primitive_gene,
                "noise_seed": cell.genotype.noise_seed,
            },
            "fitness": num(cell.fitness),
            "grasp": true,
            "s_drop": num(cell.s_drop),
            "trajectory": hash,
        }));
    }
    let doc = json!({
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "cell_size": num(archive.cell_size),
        "strategy": qcfg.strategy.to_string(),
        "action_space": qcfg.action_space.to_string(),
        "global_seed": qcfg.global_seed,
        "success_threshold": num(qcfg.success_threshold),
        "cells": cells,
    });
    let mut archive_json = serde_json::to_vec_pretty(&doc).expect("archive serializes");
    archive_json.push(b'\n');

    let mut metrics_csv = Vec::new();
    writeln!(metrics_csv, "{METRICS_HEADER}").unwrap();
    for row in &archive.generation_log {
        writeln!(
            metrics_csv,
            "{},{},{},{},{},{},{}",
            row.generation,
            row.occupied,
            row.grasps,
            row.trajectories,
            row.best_fitness,
            row.mean_fitness,
            row.seconds
        )
        .unwrap();
    }
    SerializedRun {
        archive_json,
        metrics_csv,
        trajectories,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_run(dir: &Path, run: &SerializedRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("archive.json"), &run.archive_json)?;
    write_file(&dir.join("metrics.csv"), &run.metrics_csv)?;
    let traj_dir = dir.join("trajectories");
    std::fs::create_dir_all(&traj_dir).map_err(|e| Error::io(&traj_dir, e))?;
    for (hash, content) in &run.trajectories {
        write_file(&traj_dir.join(format!("{hash}.json")), content)?;
    }
    Ok(())
}

pub fn run_dir_name(strategy: GraspStrategy, space: ActionSpace, seed: u64) -> String {
    format!("{strategy}-{space}-{seed}")
}

/// Executes one run per seed and persists each under
/// output_dir/<strategy>-<space>-<seed>/.
pub fn cli_run(spec: &ExperimentSpec) -> CliResult<()> {
    let object = load_object(&spec.object).map_err(fail(EXIT_OBJECT))?;
    let task = resolve_task(&object, spec).map_err(fail(EXIT_INVALID_TASK))?;
    if spec.seeds.is_empty() {
        return Err(CliFailure {
            code: EXIT_CONFIG,
            message: "at least one seed is required".into(),
        });
    }
    for &seed in &spec.seeds {
        let qcfg = QdConfig {
            global_seed: seed,
            ..spec.qd.clone()
        };
        let archive = qd::run(&object, &task, &spec.gripper, &spec.interaction, &qcfg)
            .map_err(fail(EXIT_CONFIG))?;
        let serialized = serialize_run(&archive, &qcfg);
        let dir = spec
            .output_dir
            .join(run_dir_name(qcfg.strategy, qcfg.action_space, seed));
        write_run(&dir, &serialized).map_err(fail(EXIT_OUTPUT))?;
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixCell {
    pub strategy: String,
    pub action_space: String,
    pub seeds: Vec<u64>,
    pub grasps_per_seed: Vec<usize>,
    pub trajectories_per_seed: Vec<usize>,
    pub grasps_mean: f64,
    pub grasps_std: f64,
    pub trajectories_mean: f64,
    pub trajectories_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixReport {
    pub cells: Vec<MatrixCell>,
    /// Combinations that failed, with diagnostics; skipped, not fatal.
    pub failures: Vec<String>,
}

pub const ALL_STRATEGIES: [GraspStrategy; 3] = [
    GraspStrategy::Explore,
    GraspStrategy::Success,
    GraspStrategy::Random,
];
pub const ALL_ACTION_SPACES: [ActionSpace; 3] = [
    ActionSpace::Adaptive,
    ActionSpace::Where2act,
    ActionSpace::Vatmart,
];

/// Runs all nine strategy-by-action-space combinations over the configured
/// seeds; persists per-run artifacts, matrix_report.json, an aligned text
/// table (matrix_table.txt, also returned), and fill_curves.csv.
pub fn cli_matrix(spec: &ExperimentSpec) -> CliResult<String> {
    let object = load_object(&spec.object).map_err(fail(EXIT_OBJECT))?;
    let task = resolve_task(&object, spec).map_err(fail(EXIT_INVALID_TASK))?;
    if spec.seeds.is_empty() {
        return Err(CliFailure {
            code: EXIT_CONFIG,
            message: "at least one seed is required".into(),
        });
    }
    std::fs::create_dir_all(&spec.output_dir)
        .map_err(|e| fail(EXIT_OUTPUT)(Error::io(&spec.output_dir, e)))?;

    let mut report = MatrixReport {
        cells: Vec::new(),
        failures: Vec::new(),
    };
    let mut fill_curves = Vec::new();
    writeln!(
        fill_curves,
        "strategy,action_space,seed,generation,occupied,grasps,trajectories"
    )
    .unwrap();

    for strategy in ALL_STRATEGIES {
        for space in ALL_ACTION_SPACES {
            let mut grasps = Vec::new();
            let mut trajectories = Vec::new();
            let mut combo_failed = false;
            for &seed in &spec.seeds {
                let qcfg = QdConfig {
                    strategy,
                    action_space: space,
                    global_seed: seed,
                    ..spec.qd.clone()
                };
                let archive =
                    match qd::run(&object, &task, &spec.gripper, &spec.interaction, &qcfg) {
                        Ok(a) => a,
                        Err(e) => {
                            report
                                .failures
                                .push(format!("{strategy}-{space}-{seed}: {e}"));
                            combo_failed = true;
                            continue;
                        }
                    };
                let dir = spec.output_dir.join(run_dir_name(strategy, space, seed));
                write_run(&dir, &serialize_run(&archive, &qcfg)).map_err(fail(EXIT_OUTPUT))?;
                for row in &archive.generation_log {
                    writeln!(
                        fill_curves,
                        "{strategy},{space},{seed},{},{},{},{}",
                        row.generation, row.occupied, row.grasps, row.trajectories
                    )
                    .unwrap();
                }
                grasps.push(archive.occupied());
                trajectories.push(archive.successful(qcfg.success_threshold));
            }
            if combo_failed && grasps.is_empty() {
                continue;
            }
            let g: Vec<f64> = grasps.iter().map(|&v| v as f64).collect();
            let t: Vec<f64> = trajectories.iter().map(|&v| v as f64).collect();
            let (gm, gs) = mean_std(&g);
            let (tm, ts) = mean_std(&t);
            report.cells.push(MatrixCell {
                strategy: strategy.to_string(),
                action_space: space.to_string(),
                seeds: spec.seeds.clone(),
                grasps_per_seed: grasps,
                trajectories_per_seed: trajectories,
                grasps_mean: gm,
                grasps_std: gs,
                trajectories_mean: tm,
                trajectories_std: ts,
            });
        }
    }

    let mut report_json = serde_json::to_vec_pretty(&report).expect("report serializes");
    report_json.push(b'\n');
    write_file(&spec.output_dir.join("matrix_report.json"), &report_json)
        .map_err(fail(EXIT_OUTPUT))?;
    write_file(&spec.output_dir.join("fill_curves.csv"), &fill_curves)
        .map_err(fail(EXIT_OUTPUT))?;
    let table = format_matrix_table(&report);
    write_file(
        &spec.output_dir.join("matrix_table.txt"),
        table.as_bytes(),
    )
    .map_err(fail(EXIT_OUTPUT))?;
    Ok(table)
}

/// Aligned text table: rows are grasp strategies, column pairs are action
/// spaces (grasps / trajectories), each cell mean +/- std over seeds.
pub fn format_matrix_table(report: &MatrixReport) -> String {
    const W: usize = 18;
    let mut out = String::new();
    out.push_str(&format!("{:<10}", ""));
    for space in ALL_ACTION_SPACES {
        out.push_str(&format!("{:^width$}", space.to_string(), width = 2 * W));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", "strategy"));
    for _ in ALL_ACTION_SPACES {
        out.push_str(&format!("{:>W$}{:>W$}", "grasps", "trajectories"));
    }
    out.push('\n');
    for strategy in ALL_STRATEGIES {
        out.push_str(&format!("{:<10}", strategy.to_string()));
        for space in ALL_ACTION_SPACES {
            let cell = report.cells.iter().find(|c| {
                c.strategy == strategy.to_string() && c.action_space == space.to_string()
            });
            match cell {
                Some(c) => {
                    out.push_str(&format!(
                        "{:>W$}{:>W$}",
                        format!("{:.1}±{:.1}", c.grasps_mean, c.grasps_std),
                        format!("{:.1}±{:.1}", c.trajectories_mean, c.trajectories_std)
                    ));
                }
                None => out.push_str(&format!("{:>W$}{:>W$}", "failed", "failed")),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationSet {
    /// The 24 rotations of the cube group.
    Rotations24,
    /// Six axis-aligned approach orientations.
    AxisAligned6,
}

impl std::str::FromStr for OrientationSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotations24" => Ok(OrientationSet::Rotations24),
            "axis6" => Ok(OrientationSet::AxisAligned6),
            other => Err(Error::InvalidConfig(format!(
                "unknown orientation set '{other}' (expected rotations24|axis6)"
            ))),
        }
    }
}

/// The rotation group of the cube as quaternions, in a deterministic order.
pub fn cube_rotations() -> Vec<Quat> {
    let gens = [
        Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), std::f64::consts::FRAC_PI_2),
        Quat::from_axis_angle_unchecked(Vec3::new(0.0, 1.0, 0.0), std::f64::consts::FRAC_PI_2),
        Quat::from_axis_angle_unchecked(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2),
    ];
    // dedup key: round, then fix the double-cover sign by the first
    // nonzero component (w alone is ambiguous at 180 degree rotations)
    let key = |q: Quat| {
        let mut k = [q.w, q.x, q.y, q.z].map(|v| (v * 1e9).round() as i64);
        if let Some(first) = k.iter().find(|&&v| v != 0) {
            if *first < 0 {
                k = k.map(|v| -v);
            }
        }
        k
    };
    let mut seen = BTreeMap::new();
    seen.insert(key(Quat::IDENTITY), Quat::IDENTITY);
    loop {
        let current: Vec<Quat> = seen.values().copied().collect();
        let before = seen.len();
        for q in current {
            for g in gens {
                let next = g.mul(q).normalized();
                seen.entry(key(next)).or_insert(next);
            }
        }
        if seen.len() == before {
            break;
        }
    }
    let rotations: Vec<Quat> = seen.into_values().collect();
    debug_assert_eq!(rotations.len(), 24);
    rotations
}

/// Six orientations pointing the gripper approach axis (local z) along each
/// world axis direction.
pub fn axis_aligned_orientations() -> Vec<Quat> {
    use std::f64::consts::{FRAC_PI_2, PI};
    vec![
        Quat::IDENTITY,                                                       // z -> +z
        Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), PI),        // z -> -z
        Quat::from_axis_angle_unchecked(Vec3::new(0.0, 1.0, 0.0), FRAC_PI_2), // z -> +x
        Quat::from_axis_angle_unchecked(Vec3::new(0.0, 1.0, 0.0), -FRAC_PI_2), // z -> -x
        Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), -FRAC_PI_2), // z -> +y
        Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2), // z -> -y
    ]
}

pub const ORACLE_MAX_EVALUATIONS: u64 = 10_000_000;

/// Brute-force ground truth: every descriptor cell that contains at least
/// one grasp-successful pose on a regular position grid crossed with an
/// orientation set, over the init volume.
pub fn oracle_grid_cells(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    icfg: &InteractionConfig,
    init_margin: f64,
    grid_step: f64,
    orientation_set: OrientationSet,
) -> Result<BTreeSet<CellKey>> {
    if grid_step < icfg.cell_size {
        return Err(Error::InvalidConfig(format!(
            "grid_step {grid_step} must be >= cell_size {}",
            icfg.cell_size
        )));
    }
    let (lo, hi) = qd::init_bounds(object, task, icfg, init_margin)?;
    let counts = [
        ((hi.x - lo.x) / grid_step).floor() as u64 + 1,
        ((hi.y - lo.y) / grid_step).floor() as u64 + 1,
        ((hi.z - lo.z) / grid_step).floor() as u64 + 1,
    ];
    let orientations = match orientation_set {
        OrientationSet::Rotations24 => cube_rotations(),
        OrientationSet::AxisAligned6 => axis_aligned_orientations(),
    };
    let evaluations = counts.iter().product::<u64>() * orientations.len() as u64;
    if evaluations > ORACLE_MAX_EVALUATIONS {
        return Err(Error::OracleGridTooLarge {
            evaluations,
            limit: ORACLE_MAX_EVALUATIONS,
        });
    }
    let jv = joint_vector(object, task, task.s_init, icfg)?;
    let moving = task.moving_part(object);
    let positions: Vec<Vec3> = (0..counts[0])
        .flat_map(|ix| {
            (0..counts[1]).flat_map(move |iy| {
                (0..counts[2]).map(move |iz| {
                    Vec3::new(
                        lo.x + ix as f64 * grid_step,
                        lo.y + iy as f64 * grid_step,
                        lo.z + iz as f64 * grid_step,
                    )
                })
            })
        })
        .collect();
    let cells = positions
        .par_iter()
        .map(|&pos| -> Result<BTreeSet<CellKey>> {
            let mut local = BTreeSet::new();
            for &q in &orientations {
                let ee = object.base_pose.compose(Pose::new(pos, q));
                let outcome = evaluate_grasp(object, &jv, gripper, ee, moving)?;
                if outcome.success {
                    local.insert(bin_descriptor(pos, icfg.cell_size)?);
                    break;
                }
            }
            Ok(local)
        })
        .try_reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            Ok(a)
        })?;
    Ok(cells)
}

/// Runs the oracle grid and writes oracle_cells.json into the output dir.
pub fn cli_oracle_grid(
    spec: &ExperimentSpec,
    grid_step: f64,
    orientation_set: OrientationSet,
) -> CliResult<BTreeSet<CellKey>> {
    let object = load_object(&spec.object).map_err(fail(EXIT_OBJECT))?;
    let task = resolve_task(&object, spec).map_err(fail(EXIT_INVALID_TASK))?;
    let cells = oracle_grid_cells(
        &object,
        &task,
        &spec.gripper,
        &spec.interaction,
        spec.qd.init_margin,
        grid_step,
        orientation_set,
    )
    .map_err(fail(EXIT_CONFIG))?;
    std::fs::create_dir_all(&spec.output_dir)
        .map_err(|e| fail(EXIT_OUTPUT)(Error::io(&spec.output_dir, e)))?;
    let doc = json!({
        "schema_version": 1,
        "grid_step": num(grid_step),
        "orientation_set": match orientation_set {
            OrientationSet::Rotations24 => "rotations24",
            OrientationSet::AxisAligned6 => "axis6",
        },
        "cells": cells.iter().map(|c| json!([c.i, c.j, c.k])).collect::<Vec<_>>(),
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("oracle cells serialize");
    bytes.push(b'\n');
    write_file(&spec.output_dir.join("oracle_cells.json"), &bytes).map_err(fail(EXIT_OUTPUT))?;
    Ok(cells)
}

/// Configures the global evaluation pool from QDTRAJ_WORKERS (0 or unset =
/// hardware default). Must run before any parallel work.
pub fn configure_workers_from_env() -> Result<()> {
    let Ok(raw) = std::env::var("QDTRAJ_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("QDTRAJ_WORKERS must be an integer, got '{raw}'")))?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("failed to size worker pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn small_spec(dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            qd: QdConfig {
                population: 32,
                generations: 5,
                ..Default::default()
            },
            seeds: vec![3],
            output_dir: dir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn run_smoke_contract() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = small_spec(tmp.path());
        cli_run(&spec).unwrap();
        let dir = tmp.path().join("explore-adaptive-3");
        assert!(dir.join("archive.json").is_file());
        assert!(dir.join("trajectories").is_dir());
        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), 1 + 6, "header plus generations 0..=5");
    }

    #[test]
    fn run_twice_byte_identical_archive() {
        let tmp1 = tempfile::tempdir().unwrap();
        let tmp2 = tempfile::tempdir().unwrap();
        cli_run(&small_spec(tmp1.path())).unwrap();
        cli_run(&small_spec(tmp2.path())).unwrap();
        let a = std::fs::read(tmp1.path().join("explore-adaptive-3/archive.json")).unwrap();
        let b = std::fs::read(tmp2.path().join("explore-adaptive-3/archive.json")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn archive_json_round_trips_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        cli_run(&small_spec(tmp.path())).unwrap();
        let path = tmp.path().join("explore-adaptive-3/archive.json");
        let original = std::fs::read(&path).unwrap();
        let value: Value = serde_json::from_slice(&original).unwrap();
        let mut reserialized = serde_json::to_vec_pretty(&value).unwrap();
        reserialized.push(b'\n');
        assert_eq!(original, reserialized);
    }

    #[test]
    fn trajectory_files_match_archive_hashes() {
        let tmp = tempfile::tempdir().unwrap();
        cli_run(&small_spec(tmp.path())).unwrap();
        let dir = tmp.path().join("explore-adaptive-3");
        let doc: Value =
            serde_json::from_slice(&std::fs::read(dir.join("archive.json")).unwrap()).unwrap();
        let cells = doc["cells"].as_array().unwrap();
        assert!(!cells.is_empty());
        for cell in cells {
            let hash = cell["trajectory"].as_str().unwrap();
            let content = std::fs::read(dir.join("trajectories").join(format!("{hash}.json")))
                .unwrap();
            assert_eq!(trajectory_hash(&content), hash);
            let rows: Vec<Vec<f64>> = serde_json::from_slice(&content).unwrap();
            assert!(rows.iter().all(|r| r.len() == 8));
            // stored quaternions are canonicalized: qw >= 0
            assert!(rows.iter().all(|r| r[3] >= 0.0));
        }
    }

    #[test]
    fn invalid_task_exit_code_and_no_files() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            joint: "42".into(),
            output_dir: tmp.path().join("out"),
            ..small_spec(tmp.path())
        };
        let err = cli_run(&spec).unwrap_err();
        assert_eq!(err.code, EXIT_INVALID_TASK);
        assert!(!spec.output_dir.exists());
        let spec = ExperimentSpec {
            joint: "nope".into(),
            ..spec
        };
        assert_eq!(cli_run(&spec).unwrap_err().code, EXIT_INVALID_TASK);
    }

    #[test]
    fn unreadable_object_exit_code() {
        let spec = ExperimentSpec {
            object: ObjectSource::Urdf {
                path: PathBuf::from("/nonexistent/robot.urdf"),
            },
            ..Default::default()
        };
        assert_eq!(cli_run(&spec).unwrap_err().code, EXIT_OBJECT);
    }

    #[test]
    fn joint_resolution_by_name_and_index() {
        let object = load_object(&ObjectSource::builtin_box()).unwrap();
        let spec = ExperimentSpec::default();
        assert_eq!(resolve_task(&object, &spec).unwrap().joint_index, 0);
        let spec = ExperimentSpec {
            joint: "slider0".into(),
            s_init: 0.0,
            s_target: 0.2,
            ..Default::default()
        };
        assert_eq!(resolve_task(&object, &spec).unwrap().joint_index, 1);
        let spec = ExperimentSpec {
            joint: "1".into(),
            s_init: 0.0,
            s_target: 0.2,
            ..Default::default()
        };
        assert_eq!(resolve_task(&object, &spec).unwrap().joint_index, 1);
    }

    #[test]
    fn matrix_cardinality_and_fill_curves() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            qd: QdConfig {
                population: 16,
                generations: 2,
                ..Default::default()
            },
            seeds: vec![1, 2],
            output_dir: tmp.path().to_path_buf(),
            ..Default::default()
        };
        let table = cli_matrix(&spec).unwrap();
        let dirs: Vec<_> = std::fs::read_dir(tmp.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().is_dir())
            .collect();
        assert_eq!(dirs.len(), 18, "9 combinations x 2 seeds");
        let report: MatrixReport = serde_json::from_slice(
            &std::fs::read(tmp.path().join("matrix_report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report.cells.len(), 9);
        assert!(report.failures.is_empty());
        // report numbers recomputable from the persisted archives
        for cell in &report.cells {
            let mut grasps = Vec::new();
            for (&seed, &stored) in cell.seeds.iter().zip(&cell.grasps_per_seed) {
                let dir = tmp
                    .path()
                    .join(format!("{}-{}-{seed}", cell.strategy, cell.action_space));
                let doc: Value =
                    serde_json::from_slice(&std::fs::read(dir.join("archive.json")).unwrap())
                        .unwrap();
                let n = doc["cells"].as_array().unwrap().len();
                assert_eq!(n, stored);
                grasps.push(n as f64);
            }
            let (mean, std) = mean_std(&grasps);
            assert!((mean - cell.grasps_mean).abs() < 1e-9);
            assert!((std - cell.grasps_std).abs() < 1e-9);
            assert!(cell.grasps_std >= 0.0 && cell.trajectories_std >= 0.0);
        }
        // fill curves: generations + 1 rows per combination per seed
        let curves =
            std::fs::read_to_string(tmp.path().join("fill_curves.csv")).unwrap();
        assert_eq!(curves.lines().count(), 1 + 9 * 2 * 3);
        // table mentions every strategy and space
        for name in ["explore", "success", "random", "adaptive", "where2act", "vatmart"] {
            assert!(table.contains(name), "table missing {name}:\n{table}");
        }
    }

    #[test]
    fn cube_rotation_group_has_24_elements() {
        let rotations = cube_rotations();
        assert_eq!(rotations.len(), 24);
        for q in &rotations {
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
        // closed under the generators; sign fixed by first nonzero component
        let key = |q: Quat| {
            let mut k = [q.w, q.x, q.y, q.z].map(|v| (v * 1e6).round() as i64);
            if k.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                k = k.map(|v| -v);
            }
            k
        };
        let set: BTreeSet<_> = rotations.iter().map(|&q| key(q)).collect();
        let g = Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2);
        for &q in &rotations {
            assert!(set.contains(&key(g.mul(q).normalized())));
        }
    }

    #[test]
    fn axis_aligned_set_covers_all_directions() {
        let targets = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        for (q, want) in axis_aligned_orientations().iter().zip(targets) {
            let z = q.rotate(Vec3::new(0.0, 0.0, 1.0));
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn oracle_grid_finds_handle_cells_and_is_deterministic() {
        let spec = ExperimentSpec::default();
        let object = load_object(&spec.object).unwrap();
        let task = resolve_task(&object, &spec).unwrap();
        let run = || {
            oracle_grid_cells(
                &object,
                &task,
                &spec.gripper,
                &spec.interaction,
                0.02, // tight margin keeps this test fast
                0.02,
                OrientationSet::AxisAligned6,
            )
            .unwrap()
        };
        let cells = run();
        assert!(!cells.is_empty(), "no graspable cell found near the door");
        assert_eq!(cells, run());
    }

    #[test]
    fn oracle_grid_far_from_object_is_empty() {
        let object = load_object(&ObjectSource::builtin_box()).unwrap();
        let task = ActivationTask::new(0, FRAC_PI_2, 0.0);
        // shift the whole grid far away by binning a task-independent box:
        // use a spec whose init volume is moved via a custom interaction
        // config center; simplest equivalent: evaluate a grid whose margin
        // is negative enough to shrink to the part, then test a manual far
        // grid through evaluate_grasp directly.
        let gripper = GripperModel::default();
        let jv = [FRAC_PI_2, 0.0];
        let mut any = false;
        for ix in 0..5 {
            for iy in 0..5 {
                let pos = Vec3::new(3.0 + 0.02 * ix as f64, 3.0 + 0.02 * iy as f64, 3.0);
                let outcome =
                    evaluate_grasp(&object, &jv, &gripper, Pose::new(pos, Quat::IDENTITY), 1)
                        .unwrap();
                any |= outcome.success;
            }
        }
        assert!(!any);
        let _ = task;
    }

    #[test]
    fn oracle_grid_refuses_oversized_grids() {
        let spec = ExperimentSpec::default();
        let object = load_object(&spec.object).unwrap();
        let task = resolve_task(&object, &spec).unwrap();
        let icfg = InteractionConfig {
            cell_size: 1e-4,
            ..Default::default()
        };
        let err = oracle_grid_cells(
            &object,
            &task,
            &spec.gripper,
            &icfg,
            0.15,
            1e-4,
            OrientationSet::Rotations24,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OracleGridTooLarge { .. }));
    }

    #[test]
    fn oracle_grid_rejects_step_below_cell_size() {
        let spec = ExperimentSpec::default();
        let object = load_object(&spec.object).unwrap();
        let task = resolve_task(&object, &spec).unwrap();
        let err = oracle_grid_cells(
            &object,
            &task,
            &spec.gripper,
            &spec.interaction,
            0.15,
            0.005,
            OrientationSet::AxisAligned6,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = ExperimentSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.object, spec.object);
        assert_eq!(back.joint, spec.joint);
        assert_eq!(back.seeds, spec.seeds);
        // partial configs fall back to defaults
        let partial: ExperimentSpec =
            serde_json::from_str(r#"{"joint": "slider0", "s_init": 0.0, "s_target": 0.2}"#)
                .unwrap();
        assert_eq!(partial.joint, "slider0");
        assert_eq!(partial.qd.population, 512);
    }
}
