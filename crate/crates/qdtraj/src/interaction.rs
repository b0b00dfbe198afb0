//! Interaction policies: turning a grasped starting frame into a full
//! trajectory primitive and a fitness value.
//!
//! Physics is replaced by a two-mode kinematic surrogate. The adaptive
//! policy rigidly attaches the end effector to the actuated part and lets
//! the joint drag it; the commanded baselines (fixed-direction strokes and
//! random residual waypoints) project each commanded displacement onto the
//! joint's point jacobian and detach when the rejected displacement exceeds
//! a slip tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{boxes_overlap, evaluate_grasp, GripperModel};
use crate::object::{joint_world_frame, part_pose, ActivationTask, ArticulatedObject, JointKind};
use crate::rng::SplitMix64;
use crate::se3::{bin_descriptor, CellKey, Pose, Quat, Vec3};

/// Frame in which the Where2Act primitive directions are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveFrame {
    Gripper,
    World,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractionConfig {
    /// Trajectory discretization steps.
    pub n_steps: usize,
    /// Behavioral grid cell size, meters.
    pub cell_size: f64,
    /// Robot base offset: the reach sphere is centered here. The default
    /// places the base behind the builtin box's hinge side, so far swing
    /// positions of wide doors leave the workspace partway through.
    pub workspace_center: Vec3,
    /// FR3-like reach, meters.
    pub workspace_radius: f64,
    /// Maximum rejected displacement per step before the grasp slips, meters.
    pub slip_tolerance: f64,
    /// Straight-line length of a Where2Act primitive, meters.
    pub primitive_stroke: f64,
    pub primitive_frame: PrimitiveFrame,
    pub vatmart_waypoints: usize,
    /// Residual translation bound per axis, meters.
    pub vatmart_residual_bound_pos: f64,
    /// Residual rotation bound, radians.
    pub vatmart_residual_bound_rot: f64,
    /// Values held by non-task movable joints during evaluation (empty =
    /// zero, clamped into limits).
    pub rest_joint_values: Vec<f64>,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            n_steps: 100,
            cell_size: 0.01,
            workspace_center: Vec3::new(0.2, 0.82, 0.22),
            workspace_radius: 0.855,
            slip_tolerance: 0.005,
            primitive_stroke: 0.30,
            primitive_frame: PrimitiveFrame::Gripper,
            vatmart_waypoints: 8,
            vatmart_residual_bound_pos: 0.05,
            vatmart_residual_bound_rot: 0.3,
            rest_joint_values: Vec::new(),
        }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidConfig("n_steps must be >= 2".into()));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::InvalidCellSize(self.cell_size));
        }
        for (name, v) in [
            ("workspace_radius", self.workspace_radius),
            ("slip_tolerance", self.slip_tolerance),
            ("primitive_stroke", self.primitive_stroke),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.vatmart_waypoints == 0 || self.vatmart_waypoints > self.n_steps {
            return Err(Error::InvalidConfig(
                "vatmart_waypoints must be in [1, n_steps]".into(),
            ));
        }
        if self.vatmart_residual_bound_pos < 0.0 || self.vatmart_residual_bound_rot < 0.0 {
            return Err(Error::InvalidConfig("residual bounds must be >= 0".into()));
        }
        Ok(())
    }
}

/// End-effector trajectory in the object base frame, with the object joint
/// value at every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPrimitive {
    pub frames: Vec<Pose>,
    pub joint_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub grasp_success: bool,
    /// Joint value at detachment (s_target when nothing detached).
    pub s_drop: f64,
    /// Fraction of commanded travel achieved, in [0, 1].
    pub fitness: f64,
    pub trajectory: Option<TrajectoryPrimitive>,
    pub descriptor: CellKey,
}

impl EvalResult {
    fn failed_grasp(task: &ActivationTask, descriptor: CellKey) -> Self {
        EvalResult {
            grasp_success: false,
            s_drop: task.s_init,
            fitness: 0.0,
            trajectory: None,
            descriptor,
        }
    }
}

pub const WHERE2ACT_DIRECTIONS: [Vec3; 6] = [
    Vec3 { x: 1.0, y: 0.0, z: 0.0 },  // push
    Vec3 { x: -1.0, y: 0.0, z: 0.0 }, // pull
    Vec3 { x: 0.0, y: 1.0, z: 0.0 },  // right
    Vec3 { x: 0.0, y: -1.0, z: 0.0 }, // left
    Vec3 { x: 0.0, y: 0.0, z: 1.0 },  // up
    Vec3 { x: 0.0, y: 0.0, z: -1.0 }, // down
];

/// Movable-joint vector with the task joint at `s` and every other joint at
/// its configured rest value, clamped into limits.
pub(crate) fn joint_vector(
    object: &ArticulatedObject,
    task: &ActivationTask,
    s: f64,
    cfg: &InteractionConfig,
) -> Result<Vec<f64>> {
    let movable = object.movable_joints();
    if !cfg.rest_joint_values.is_empty() && cfg.rest_joint_values.len() != movable.len() {
        return Err(Error::InvalidConfig(format!(
            "rest_joint_values has {} entries, object has {} movable joints",
            cfg.rest_joint_values.len(),
            movable.len()
        )));
    }
    let mut values = Vec::with_capacity(movable.len());
    for (slot, &ji) in movable.iter().enumerate() {
        let [lo, hi] = object.joints[ji].limits.expect("movable joint has limits");
        let rest = cfg.rest_joint_values.get(slot).copied().unwrap_or(0.0);
        values.push(rest.clamp(lo, hi));
    }
    values[task.joint_index] = s;
    Ok(values)
}

/// Instantaneous world velocity of a point rigidly attached to the task
/// joint's child part, per unit joint rate.
pub fn joint_point_jacobian(
    object: &ArticulatedObject,
    task: &ActivationTask,
    joint_values: &[f64],
    point: Vec3,
) -> Result<Vec3> {
    let ji = task.joint(object);
    let frame = joint_world_frame(object, joint_values, ji)?;
    let axis_world = frame.orientation.rotate(object.joints[ji].axis);
    Ok(match object.joints[ji].kind {
        JointKind::Prismatic => axis_world,
        JointKind::Revolute => axis_world.cross(point - frame.position),
        JointKind::Fixed => Vec3::ZERO,
    })
}

struct GraspContext {
    /// Grasp frame expressed in the moving part's frame at s_init.
    attachment: Pose,
    moving_part: usize,
    descriptor: CellKey,
    ee_world: Pose,
}

/// Common preamble: descriptor binning and the grasp test at s_init.
/// Returns Err(result) with the failed-grasp result when the grasp fails.
fn grasp_at_start(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype_pose: Pose,
    cfg: &InteractionConfig,
) -> Result<std::result::Result<GraspContext, EvalResult>> {
    task.validate(object)?;
    cfg.validate()?;
    let descriptor = bin_descriptor(genotype_pose.position, cfg.cell_size)?;
    let jv = joint_vector(object, task, task.s_init, cfg)?;
    let ee_world = object.base_pose.compose(genotype_pose);
    let moving_part = task.moving_part(object);
    let outcome = evaluate_grasp(object, &jv, gripper, ee_world, moving_part)?;
    if !outcome.success {
        return Ok(Err(EvalResult::failed_grasp(task, descriptor)));
    }
    let part_at_init = part_pose(object, &jv)?[moving_part];
    Ok(Ok(GraspContext {
        attachment: part_at_init.invert().compose(ee_world),
        moving_part,
        descriptor,
        ee_world,
    }))
}

fn palm_collides(
    object: &ArticulatedObject,
    gripper: &GripperModel,
    ee_world: Pose,
    poses: &[Pose],
    moving_part: usize,
) -> bool {
    let tcp = ee_world.compose(gripper.tcp_offset);
    object
        .parts
        .iter()
        .enumerate()
        .filter(|(pi, _)| *pi != moving_part)
        .any(|(pi, part)| {
            part.boxes
                .iter()
                .any(|b| boxes_overlap(&gripper.body_box, tcp, b, poses[pi]))
        })
}

/// Adaptive policy: the actuated joint steps from s_init to s_target and
/// drags the rigidly attached end effector until it leaves the workspace
/// sphere or the palm collides with a non-grasped part.
pub fn evaluate_adaptive(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype_pose: Pose,
    cfg: &InteractionConfig,
) -> Result<EvalResult> {
    let ctx = match grasp_at_start(object, task, gripper, genotype_pose, cfg)? {
        Ok(ctx) => ctx,
        Err(result) => return Ok(result),
    };
    let base_inv = object.base_pose.invert();
    let travel = task.travel();

    let mut frames = vec![genotype_pose];
    let mut joint_values = vec![task.s_init];
    let mut s_drop = task.s_target;
    for k in 1..=cfg.n_steps {
        let s_k = task.s_init + (k as f64 / cfg.n_steps as f64) * travel;
        let jv = joint_vector(object, task, s_k, cfg)?;
        let poses = part_pose(object, &jv)?;
        let ee_k = poses[ctx.moving_part].compose(ctx.attachment);
        let outside =
            (ee_k.position - cfg.workspace_center).norm() > cfg.workspace_radius;
        if outside || palm_collides(object, gripper, ee_k, &poses, ctx.moving_part) {
            s_drop = *joint_values.last().expect("nonempty");
            break;
        }
        frames.push(base_inv.compose(ee_k));
        joint_values.push(s_k);
    }
    let fitness = ((s_drop - task.s_init) / travel).clamp(0.0, 1.0);
    Ok(EvalResult {
        grasp_success: true,
        s_drop,
        fitness,
        trajectory: Some(TrajectoryPrimitive {
            frames,
            joint_values,
        }),
        descriptor: ctx.descriptor,
    })
}

/// One projected step of a commanded displacement. Returns the joint
/// increment, or None when the grasp slips.
fn project_step(
    object: &ArticulatedObject,
    task: &ActivationTask,
    jv: &[f64],
    tcp_position: Vec3,
    delta: Vec3,
    slip_tolerance: f64,
) -> Result<Option<f64>> {
    let jac = joint_point_jacobian(object, task, jv, tcp_position)?;
    let jj = jac.norm_squared();
    if jj < 1e-12 {
        return Ok(if delta.norm() > slip_tolerance {
            None
        } else {
            Some(0.0)
        });
    }
    let ds = jac.dot(delta) / jj;
    let residual = delta - jac * ds;
    if residual.norm() > slip_tolerance {
        return Ok(None);
    }
    Ok(Some(ds))
}

/// Shared stepper for the commanded baselines. `command(k)` gives the
/// commanded TCP displacement of step k (0-based); `rotation(k)` an
/// optional commanded rotation composed into the recorded frame.
fn run_commanded(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype_pose: Pose,
    cfg: &InteractionConfig,
    total_steps: usize,
    mut command: impl FnMut(usize) -> Vec3,
    mut rotation: impl FnMut(usize) -> Option<Quat>,
) -> Result<EvalResult> {
    let ctx = match grasp_at_start(object, task, gripper, genotype_pose, cfg)? {
        Ok(ctx) => ctx,
        Err(result) => return Ok(result),
    };
    let ji = task.joint(object);
    let [lo, hi] = object.joints[ji].limits.expect("movable joint has limits");
    let base_inv = object.base_pose.invert();

    let mut frames = vec![genotype_pose];
    let mut joint_values = vec![task.s_init];
    let mut s = task.s_init;
    let mut ee = ctx.ee_world;
    let mut commanded_rotation = Quat::IDENTITY;

    for k in 0..total_steps {
        let delta = command(k);
        let jv = joint_vector(object, task, s, cfg)?;
        let tcp = ee.compose(gripper.tcp_offset).position;
        let Some(ds) = project_step(object, task, &jv, tcp, delta, cfg.slip_tolerance)? else {
            break; // slipped
        };
        if let Some(q) = rotation(k) {
            commanded_rotation = commanded_rotation.mul(q).normalized();
        }
        let new_s = s + ds;
        let clamped = new_s.clamp(lo, hi);
        let hit_limit = clamped != new_s;
        s = clamped;
        let jv = joint_vector(object, task, s, cfg)?;
        let poses = part_pose(object, &jv)?;
        let attached = poses[ctx.moving_part].compose(ctx.attachment);
        ee = Pose {
            position: attached.position,
            orientation: attached.orientation.mul(commanded_rotation).normalized(),
        };
        frames.push(base_inv.compose(ee));
        joint_values.push(s);
        if hit_limit {
            break; // detached at the joint stop
        }
    }
    let s_drop = s;
    let fitness = ((s_drop - task.s_init) / task.travel()).clamp(0.0, 1.0);
    Ok(EvalResult {
        grasp_success: true,
        s_drop,
        fitness,
        trajectory: Some(TrajectoryPrimitive {
            frames,
            joint_values,
        }),
        descriptor: ctx.descriptor,
    })
}

/// Where2Act action space: a straight stroke along one of six directions,
/// interpreted in the gripper frame at grasp time (or world frame,
/// per config).
pub fn evaluate_where2act(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype_pose: Pose,
    primitive_index: usize,
    cfg: &InteractionConfig,
) -> Result<EvalResult> {
    let dir = *WHERE2ACT_DIRECTIONS
        .get(primitive_index)
        .ok_or_else(|| Error::InvalidConfig(format!("primitive index {primitive_index} > 5")))?;
    let ee_world0 = object.base_pose.compose(genotype_pose);
    let world_dir = match cfg.primitive_frame {
        PrimitiveFrame::Gripper => ee_world0.orientation.rotate(dir),
        PrimitiveFrame::World => dir,
    };
    let delta = world_dir * (cfg.primitive_stroke / cfg.n_steps as f64);
    run_commanded(
        object,
        task,
        gripper,
        genotype_pose,
        cfg,
        cfg.n_steps,
        move |_| delta,
        |_| None,
    )
}

/// VAT-Mart action space: residual waypoints drawn from a deterministic
/// stream keyed by (global_seed, genotype_seed), each interpolated over
/// n_steps / vatmart_waypoints substeps. Rotational residuals tilt the
/// commanded frame; only translation drives the joint.
pub fn evaluate_vatmart(
    object: &ArticulatedObject,
    task: &ActivationTask,
    gripper: &GripperModel,
    genotype_pose: Pose,
    genotype_seed: u64,
    global_seed: u64,
    cfg: &InteractionConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    let mut rng = SplitMix64::keyed(global_seed, genotype_seed);
    let b = cfg.vatmart_residual_bound_pos;
    let rb = cfg.vatmart_residual_bound_rot;
    let substeps = cfg.n_steps / cfg.vatmart_waypoints;
    let mut step_deltas = Vec::with_capacity(cfg.vatmart_waypoints * substeps);
    let mut step_rotations = Vec::with_capacity(step_deltas.capacity());
    for _ in 0..cfg.vatmart_waypoints {
        let residual = Vec3::new(
            rng.uniform(-b, b),
            rng.uniform(-b, b),
            rng.uniform(-b, b),
        );
        let axis = Vec3::from_array(rng.unit_vector());
        let angle = rng.uniform(-rb, rb);
        let delta = residual * (1.0 / substeps as f64);
        let rot = Quat::from_axis_angle_unchecked(axis, angle / substeps as f64);
        for _ in 0..substeps {
            step_deltas.push(delta);
            step_rotations.push(rot);
        }
    }
    run_commanded(
        object,
        task,
        gripper,
        genotype_pose,
        cfg,
        step_deltas.len(),
        move |k| step_deltas[k],
        move |k| Some(step_rotations[k]),
    )
}
