//! C ABI for the quality-diversity trajectory engine.
//!
//! Conventions:
//! - Objects and archives are opaque handles created and destroyed by this
//!   library; never free them with anything but the matching `_free`.
//! - Every fallible call returns a `QdtrajStatus`; on failure,
//!   `qdtraj_last_error_message` returns a thread-local, NUL-terminated
//!   description valid until the next failing call on the same thread.
//! - Out-parameters are written only on `Ok`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qdtraj::grasp::GripperModel;
use qdtraj::harness::{serialize_run, write_run};
use qdtraj::interaction::InteractionConfig;
use qdtraj::object::{
    make_experimental_box, parse_urdf, ActivationTask, ArticulatedObject, ExperimentalBoxSpec,
};
use qdtraj::qd::{self, ActionSpace, Archive, GraspStrategy, QdConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QdtrajStatus {
    Ok = 0,
    /// A pointer argument was NULL or an argument was out of range.
    InvalidArgument = 1,
    /// The activation task does not fit the object.
    InvalidTask = 2,
    /// The URDF text could not be parsed into a supported model.
    ParseError = 3,
    /// A filesystem operation failed.
    IoError = 4,
    /// The optimizer rejected its configuration or failed internally.
    RuntimeError = 5,
}

/// Grasp selection strategy.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QdtrajStrategy {
    Explore = 0,
    Success = 1,
    Random = 2,
}

/// Post-grasp action space.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QdtrajActionSpace {
    Adaptive = 0,
    Where2act = 1,
    Vatmart = 2,
}

/// Parameters of one optimization run. Use `qdtraj_run_params_default` to
/// initialize, then override fields.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QdtrajRunParams {
    /// Index into the object's movable joints.
    pub joint_index: u32,
    pub s_init: f64,
    pub s_target: f64,
    pub strategy: QdtrajStrategy,
    pub action_space: QdtrajActionSpace,
    pub population: u32,
    pub generations: u32,
    pub seed: u64,
    /// Behavioral grid cell size, meters.
    pub cell_size: f64,
    /// Fitness at or above which a trajectory counts as successful.
    pub success_threshold: f64,
}

/// Summary of one archive cell, for iteration from C.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QdtrajCellInfo {
    /// Descriptor cell indices.
    pub i: i64,
    pub j: i64,
    pub k: i64,
    /// Grasp position of the elite, object base frame, meters.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub fitness: f64,
    /// Joint value at detachment.
    pub s_drop: f64,
}

/// Opaque articulated-object handle.
pub struct QdtrajObject {
    object: ArticulatedObject,
}

/// Opaque archive handle (result of a run).
pub struct QdtrajArchive {
    archive: Archive,
    qcfg: QdConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap();
    });
}

fn guard<F: FnOnce() -> QdtrajStatus>(f: F) -> QdtrajStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            QdtrajStatus::RuntimeError
        }
    }
}

/// Last error message for this thread, NUL terminated. Never NULL. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qdtraj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates the builtin articulated box (door hinge + sliding tray).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_object_builtin_box(
    out: *mut *mut QdtrajObject,
) -> QdtrajStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        match make_experimental_box(&ExperimentalBoxSpec::default()) {
            Ok(object) => {
                unsafe { *out = Box::into_raw(Box::new(QdtrajObject { object })) };
                QdtrajStatus::Ok
            }
            Err(e) => {
                set_error(e);
                QdtrajStatus::RuntimeError
            }
        }
    })
}

/// Parses a NUL-terminated URDF document.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_object_from_urdf(
    text: *const c_char,
    out: *mut *mut QdtrajObject,
) -> QdtrajStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            set_error("text or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("URDF text is not valid UTF-8");
                return QdtrajStatus::InvalidArgument;
            }
        };
        match parse_urdf(text) {
            Ok(parse) => {
                unsafe {
                    *out = Box::into_raw(Box::new(QdtrajObject {
                        object: parse.object,
                    }))
                };
                QdtrajStatus::Ok
            }
            Err(e) => {
                set_error(e);
                QdtrajStatus::ParseError
            }
        }
    })
}

/// Frees an object handle. NULL is a no-op.
///
/// # Safety
/// `object` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_object_free(object: *mut QdtrajObject) {
    if !object.is_null() {
        drop(unsafe { Box::from_raw(object) });
    }
}

/// Number of movable joints of an object.
///
/// # Safety
/// `object` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_object_movable_joint_count(
    object: *const QdtrajObject,
    out: *mut usize,
) -> QdtrajStatus {
    guard(|| {
        if object.is_null() || out.is_null() {
            set_error("object or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        unsafe { *out = (*object).object.movable_joints().len() };
        QdtrajStatus::Ok
    })
}

/// Default run parameters (explore + adaptive, desk scale, seed 0).
#[no_mangle]
pub extern "C" fn qdtraj_run_params_default() -> QdtrajRunParams {
    let qcfg = QdConfig::default();
    let icfg = InteractionConfig::default();
    QdtrajRunParams {
        joint_index: 0,
        s_init: std::f64::consts::FRAC_PI_2,
        s_target: 0.0,
        strategy: QdtrajStrategy::Explore,
        action_space: QdtrajActionSpace::Adaptive,
        population: qcfg.population as u32,
        generations: qcfg.generations as u32,
        seed: qcfg.global_seed,
        cell_size: icfg.cell_size,
        success_threshold: qcfg.success_threshold,
    }
}

/// Runs the optimizer and returns a new archive handle.
///
/// # Safety
/// `object`, `params`, and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_run(
    object: *const QdtrajObject,
    params: *const QdtrajRunParams,
    out: *mut *mut QdtrajArchive,
) -> QdtrajStatus {
    guard(|| {
        if object.is_null() || params.is_null() || out.is_null() {
            set_error("object, params, or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        let object = unsafe { &(*object).object };
        let p = unsafe { *params };
        let task = ActivationTask::new(p.joint_index as usize, p.s_init, p.s_target);
        if let Err(e) = task.validate(object) {
            set_error(e);
            return QdtrajStatus::InvalidTask;
        }
        let qcfg = QdConfig {
            population: p.population as usize,
            generations: p.generations as usize,
            strategy: match p.strategy {
                QdtrajStrategy::Explore => GraspStrategy::Explore,
                QdtrajStrategy::Success => GraspStrategy::Success,
                QdtrajStrategy::Random => GraspStrategy::Random,
            },
            action_space: match p.action_space {
                QdtrajActionSpace::Adaptive => ActionSpace::Adaptive,
                QdtrajActionSpace::Where2act => ActionSpace::Where2act,
                QdtrajActionSpace::Vatmart => ActionSpace::Vatmart,
            },
            global_seed: p.seed,
            success_threshold: p.success_threshold,
            ..QdConfig::default()
        };
        let icfg = InteractionConfig {
            cell_size: p.cell_size,
            ..InteractionConfig::default()
        };
        match qd::run(object, &task, &GripperModel::default(), &icfg, &qcfg) {
            Ok(archive) => {
                unsafe { *out = Box::into_raw(Box::new(QdtrajArchive { archive, qcfg })) };
                QdtrajStatus::Ok
            }
            Err(e) => {
                set_error(e);
                QdtrajStatus::RuntimeError
            }
        }
    })
}

/// Frees an archive handle. NULL is a no-op.
///
/// # Safety
/// `archive` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_free(archive: *mut QdtrajArchive) {
    if !archive.is_null() {
        drop(unsafe { Box::from_raw(archive) });
    }
}

/// Number of occupied cells.
///
/// # Safety
/// `archive` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_cell_count(
    archive: *const QdtrajArchive,
    out: *mut usize,
) -> QdtrajStatus {
    guard(|| {
        if archive.is_null() || out.is_null() {
            set_error("archive or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        unsafe { *out = (*archive).archive.occupied() };
        QdtrajStatus::Ok
    })
}

/// Number of cells whose fitness reached the run's success threshold.
///
/// # Safety
/// `archive` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_successful_count(
    archive: *const QdtrajArchive,
    out: *mut usize,
) -> QdtrajStatus {
    guard(|| {
        if archive.is_null() || out.is_null() {
            set_error("archive or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        let a = unsafe { &*archive };
        unsafe { *out = a.archive.successful(a.qcfg.success_threshold) };
        QdtrajStatus::Ok
    })
}

/// Best fitness over the archive (0 when empty).
///
/// # Safety
/// `archive` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_best_fitness(
    archive: *const QdtrajArchive,
    out: *mut f64,
) -> QdtrajStatus {
    guard(|| {
        if archive.is_null() || out.is_null() {
            set_error("archive or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        unsafe { *out = (*archive).archive.best_fitness() };
        QdtrajStatus::Ok
    })
}

/// Summary of the cell at `index` (cells are ordered by descriptor key;
/// index must be < cell count).
///
/// # Safety
/// `archive` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_cell(
    archive: *const QdtrajArchive,
    index: usize,
    out: *mut QdtrajCellInfo,
) -> QdtrajStatus {
    guard(|| {
        if archive.is_null() || out.is_null() {
            set_error("archive or out is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        let a = unsafe { &(*archive).archive };
        let Some((key, cell)) = a.cells.iter().nth(index) else {
            set_error(format!(
                "cell index {index} out of range ({} cells)",
                a.cells.len()
            ));
            return QdtrajStatus::InvalidArgument;
        };
        unsafe {
            *out = QdtrajCellInfo {
                i: key.i,
                j: key.j,
                k: key.k,
                x: cell.genotype.position.x,
                y: cell.genotype.position.y,
                z: cell.genotype.position.z,
                fitness: cell.fitness,
                s_drop: cell.s_drop,
            };
        }
        QdtrajStatus::Ok
    })
}

/// Writes archive.json, metrics.csv, and trajectories/ into `dir`
/// (created if needed).
///
/// # Safety
/// `archive` must be valid and `dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn qdtraj_archive_write(
    archive: *const QdtrajArchive,
    dir: *const c_char,
) -> QdtrajStatus {
    guard(|| {
        if archive.is_null() || dir.is_null() {
            set_error("archive or dir is NULL");
            return QdtrajStatus::InvalidArgument;
        }
        let dir = match unsafe { CStr::from_ptr(dir) }.to_str() {
            Ok(d) => d,
            Err(_) => {
                set_error("dir is not valid UTF-8");
                return QdtrajStatus::InvalidArgument;
            }
        };
        let a = unsafe { &*archive };
        let run = serialize_run(&a.archive, &a.qcfg);
        match write_run(std::path::Path::new(dir), &run) {
            Ok(()) => QdtrajStatus::Ok,
            Err(e) => {
                set_error(e);
                QdtrajStatus::IoError
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn full_round_trip_through_the_c_abi() {
        unsafe {
            let mut object: *mut QdtrajObject = ptr::null_mut();
            assert_eq!(qdtraj_object_builtin_box(&mut object), QdtrajStatus::Ok);
            let mut joints = 0usize;
            assert_eq!(
                qdtraj_object_movable_joint_count(object, &mut joints),
                QdtrajStatus::Ok
            );
            assert_eq!(joints, 2);

            // Slide the tray out: its handle sits in the open, so even a
            // small budget reliably fills a few cells.
            let mut params = qdtraj_run_params_default();
            params.joint_index = 1;
            params.s_init = 0.0;
            params.s_target = 0.2;
            params.population = 128;
            params.generations = 5;
            params.seed = 11;
            let mut archive: *mut QdtrajArchive = ptr::null_mut();
            assert_eq!(qdtraj_run(object, &params, &mut archive), QdtrajStatus::Ok);

            let mut cells = 0usize;
            assert_eq!(qdtraj_archive_cell_count(archive, &mut cells), QdtrajStatus::Ok);
            assert!(cells > 0);
            let mut best = 0.0f64;
            assert_eq!(
                qdtraj_archive_best_fitness(archive, &mut best),
                QdtrajStatus::Ok
            );
            assert!((0.0..=1.0).contains(&best));
            let mut info = QdtrajCellInfo {
                i: 0,
                j: 0,
                k: 0,
                x: 0.0,
                y: 0.0,
                z: 0.0,
                fitness: 0.0,
                s_drop: 0.0,
            };
            assert_eq!(qdtraj_archive_cell(archive, 0, &mut info), QdtrajStatus::Ok);
            assert!(info.fitness >= 0.0);
            assert_eq!(
                qdtraj_archive_cell(archive, cells, &mut info),
                QdtrajStatus::InvalidArgument
            );

            let tmp = tempfile::tempdir().unwrap();
            let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
            assert_eq!(qdtraj_archive_write(archive, dir.as_ptr()), QdtrajStatus::Ok);
            assert!(tmp.path().join("archive.json").is_file());

            qdtraj_archive_free(archive);
            qdtraj_object_free(object);
        }
    }

    #[test]
    fn urdf_constructor_and_error_paths() {
        unsafe {
            let mut object: *mut QdtrajObject = ptr::null_mut();
            let text = CString::new("<robot name=\"r\"><link name=\"a\"/></robot>").unwrap();
            let status = qdtraj_object_from_urdf(text.as_ptr(), &mut object);
            assert_eq!(status, QdtrajStatus::ParseError);
            let message = CStr::from_ptr(qdtraj_last_error_message());
            assert!(!message.to_str().unwrap().is_empty());

            let good = CString::new(
                r#"<robot name="r">
                    <link name="base"><collision>
                        <geometry><box size="0.4 0.3 0.3"/></geometry>
                    </collision></link>
                    <link name="arm"><collision>
                        <geometry><box size="0.2 0.02 0.02"/></geometry>
                    </collision></link>
                    <joint name="j0" type="revolute">
                        <parent link="base"/><child link="arm"/>
                        <origin xyz="0.2 0 0"/>
                        <axis xyz="0 0 1"/>
                        <limit lower="0" upper="1.57"/>
                    </joint>
                </robot>"#,
            )
            .unwrap();
            assert_eq!(
                qdtraj_object_from_urdf(good.as_ptr(), &mut object),
                QdtrajStatus::Ok
            );

            // invalid task through the run entry point
            let mut params = qdtraj_run_params_default();
            params.joint_index = 7;
            let mut archive: *mut QdtrajArchive = ptr::null_mut();
            assert_eq!(
                qdtraj_run(object, &params, &mut archive),
                QdtrajStatus::InvalidTask
            );

            // NULL handling
            assert_eq!(
                qdtraj_object_builtin_box(ptr::null_mut()),
                QdtrajStatus::InvalidArgument
            );
            qdtraj_object_free(ptr::null_mut());
            qdtraj_archive_free(ptr::null_mut());
            qdtraj_object_free(object);
        }
    }
}
