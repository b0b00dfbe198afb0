//! Parser for the URDF subset this crate understands: box collision
//! geometry and revolute / prismatic / fixed joints.

use roxmltree::{Document, Node};

use crate::error::{Error, Result};
use crate::se3::{Pose, Quat, Vec3};

use super::{ArticulatedObject, BoxPrimitive, JointKind, ObjectJoint, RigidPart};

/// Parse result: the object plus warnings for ignored elements.
#[derive(Debug)]
pub struct UrdfParse {
    pub object: ArticulatedObject,
    pub warnings: Vec<String>,
}

const KNOWN_LINK_CHILDREN: &[&str] = &["collision", "visual", "inertial"];
const KNOWN_JOINT_CHILDREN: &[&str] = &["origin", "axis", "limit", "parent", "child"];

fn parse_floats(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Xml(format!("bad number in {what}: {e}")))?;
    if vals.len() != n {
        return Err(Error::Xml(format!(
            "expected {n} numbers in {what}, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_origin(node: Option<Node>) -> Result<Pose> {
    let Some(node) = node else {
        return Ok(Pose::IDENTITY);
    };
    let xyz = match node.attribute("xyz") {
        Some(t) => {
            let v = parse_floats(t, 3, "origin xyz")?;
            Vec3::new(v[0], v[1], v[2])
        }
        None => Vec3::ZERO,
    };
    let rot = match node.attribute("rpy") {
        Some(t) => {
            let v = parse_floats(t, 3, "origin rpy")?;
            Quat::from_rpy(v[0], v[1], v[2])
        }
        None => Quat::IDENTITY,
    };
    Ok(Pose::new(xyz, rot))
}

fn child<'a>(node: Node<'a, 'a>, tag: &str) -> Option<Node<'a, 'a>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn parse_link(node: Node, warnings: &mut Vec<String>) -> Result<RigidPart> {
    let name = node
        .attribute("name")
        .ok_or_else(|| Error::Xml("link without name".into()))?
        .to_string();
    let mut boxes = Vec::new();
    for c in node.children().filter(|c| c.is_element()) {
        match c.tag_name().name() {
            "collision" => {
                let geometry = child(c, "geometry").ok_or_else(|| Error::UnsupportedGeometry {
                    link: name.clone(),
                    detail: "collision without geometry".into(),
                })?;
                let shape = geometry
                    .children()
                    .find(|g| g.is_element())
                    .ok_or_else(|| Error::UnsupportedGeometry {
                        link: name.clone(),
                        detail: "empty geometry element".into(),
                    })?;
                if !shape.has_tag_name("box") {
                    return Err(Error::UnsupportedGeometry {
                        link: name.clone(),
                        detail: format!("geometry `{}` (only box is supported)", shape.tag_name().name()),
                    });
                }
                let size = parse_floats(
                    shape.attribute("size").ok_or_else(|| Error::UnsupportedGeometry {
                        link: name.clone(),
                        detail: "box without size".into(),
                    })?,
                    3,
                    "box size",
                )?;
                let local_pose = parse_origin(child(c, "origin"))?;
                boxes.push(BoxPrimitive::new(
                    Vec3::new(size[0] / 2.0, size[1] / 2.0, size[2] / 2.0),
                    local_pose,
                ));
            }
            "visual" | "inertial" => {} // collision geometry only
            other => {
                if !KNOWN_LINK_CHILDREN.contains(&other) {
                    warnings.push(format!("ignored element <{other}> in link `{name}`"));
                }
            }
        }
    }
    if boxes.is_empty() {
        return Err(Error::UnsupportedGeometry {
            link: name,
            detail: "link has no box collision geometry".into(),
        });
    }
    Ok(RigidPart { name, boxes })
}

/// Parses a URDF document into an articulated object. Links become rigid
/// parts (collision boxes only); joints must be revolute, prismatic, or
/// fixed. Unknown elements are collected as warnings, not errors.
pub fn parse_urdf(text: &str) -> Result<UrdfParse> {
    let doc = Document::parse(text).map_err(|e| Error::Xml(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(Error::Xml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }

    let mut warnings = Vec::new();
    let mut parts: Vec<RigidPart> = Vec::new();
    let mut joints_raw = Vec::new();

    for node in robot.children().filter(|c| c.is_element()) {
        match node.tag_name().name() {
            "link" => parts.push(parse_link(node, &mut warnings)?),
            "joint" => joints_raw.push(node),
            other => warnings.push(format!("ignored element <{other}> in robot")),
        }
    }

    let part_index = |name: &str| -> Result<usize> {
        parts
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::MalformedTree(format!("joint references unknown link `{name}`")))
    };

    let mut joints = Vec::new();
    for node in joints_raw {
        let name = node
            .attribute("name")
            .ok_or_else(|| Error::Xml("joint without name".into()))?
            .to_string();
        let kind = match node.attribute("type") {
            Some("revolute") => JointKind::Revolute,
            Some("prismatic") => JointKind::Prismatic,
            Some("fixed") => JointKind::Fixed,
            Some(other) => {
                return Err(Error::UnsupportedJoint {
                    joint: name,
                    kind: other.to_string(),
                })
            }
            None => {
                return Err(Error::UnsupportedJoint {
                    joint: name,
                    kind: "<missing>".to_string(),
                })
            }
        };
        for c in node.children().filter(|c| c.is_element()) {
            let tag = c.tag_name().name();
            if !KNOWN_JOINT_CHILDREN.contains(&tag) {
                warnings.push(format!("ignored element <{tag}> in joint `{name}`"));
            }
        }
        let parent = part_index(
            child(node, "parent")
                .and_then(|p| p.attribute("link"))
                .ok_or_else(|| Error::Xml(format!("joint `{name}` without parent link")))?,
        )?;
        let child_part = part_index(
            child(node, "child")
                .and_then(|p| p.attribute("link"))
                .ok_or_else(|| Error::Xml(format!("joint `{name}` without child link")))?,
        )?;
        let origin = parse_origin(child(node, "origin"))?;
        let axis = match child(node, "axis").and_then(|a| a.attribute("xyz")) {
            Some(t) => {
                let v = parse_floats(t, 3, "joint axis")?;
                Vec3::new(v[0], v[1], v[2])
            }
            // URDF default axis
            None => Vec3::new(1.0, 0.0, 0.0),
        };
        let limits = match child(node, "limit") {
            Some(l) => {
                let lo = l
                    .attribute("lower")
                    .map(|t| t.parse::<f64>())
                    .transpose()
                    .map_err(|e| Error::Xml(format!("bad limit lower: {e}")))?
                    .unwrap_or(0.0);
                let hi = l
                    .attribute("upper")
                    .map(|t| t.parse::<f64>())
                    .transpose()
                    .map_err(|e| Error::Xml(format!("bad limit upper: {e}")))?
                    .unwrap_or(0.0);
                Some([lo, hi])
            }
            None => None,
        };
        if kind.is_movable() && limits.is_none() {
            return Err(Error::MissingLimits(name));
        }
        joints.push(ObjectJoint {
            name,
            kind,
            parent,
            child: child_part,
            origin,
            axis,
            limits,
        });
    }

    let object = ArticulatedObject::new(Pose::IDENTITY, parts, joints)?;
    Ok(UrdfParse { object, warnings })
}
