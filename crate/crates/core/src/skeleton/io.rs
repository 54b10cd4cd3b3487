use std::sync::Arc;

use ndarray::Array3;
use serde_json::{json, Value};

use super::{SkeletonGraph, SkeletonSequence};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn field_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { field: field.into(), message: message.into() }
}

fn as_index(v: &Value, field: &str) -> Result<usize> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| field_err(field, format!("expected a non-negative integer, got {v}")))
}

/// Reads a SKEL-JSON document.
pub fn parse_skel_json<T: Real>(text: &[u8]) -> Result<SkeletonSequence<T>> {
    let doc: Value = serde_json::from_slice(text).map_err(|e| field_err("<document>", e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| field_err("<document>", "expected a JSON object"))?;
    let get = |name: &str| obj.get(name).ok_or_else(|| field_err(name, "missing"));

    let num_joints = as_index(get("num_joints")?, "num_joints")?;
    let hip_index = as_index(get("hip_index")?, "hip_index")?;
    let edges = get("edges")?
        .as_array()
        .ok_or_else(|| field_err("edges", "expected an array of pairs"))?
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let name = format!("edges[{i}]");
            match e.as_array().map(Vec::as_slice) {
                Some([a, b]) => Ok((as_index(a, &name)?, as_index(b, &name)?)),
                _ => Err(field_err(name, "expected a pair [a, b]")),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => return Err(field_err("label", format!("expected string or null, got {other}"))),
    };

    let frames = get("frames")?.as_array().ok_or_else(|| field_err("frames", "expected an array of frames"))?;
    if frames.is_empty() {
        return Err(field_err("frames", "at least one frame required"));
    }
    let mut data = Vec::with_capacity(frames.len() * num_joints * 3);
    for (f, frame) in frames.iter().enumerate() {
        let joints =
            frame.as_array().ok_or_else(|| field_err(format!("frames[{f}]"), "expected an array of joints"))?;
        if joints.len() != num_joints {
            return Err(Error::Structural(format!("frame {f} has {} joints, expected {num_joints}", joints.len())));
        }
        for (j, joint) in joints.iter().enumerate() {
            let name = format!("frames[{f}][{j}]");
            let xyz =
                joint.as_array().filter(|a| a.len() == 3).ok_or_else(|| field_err(&name, "expected [x, y, z]"))?;
            for v in xyz {
                let x = v.as_f64().ok_or_else(|| field_err(&name, format!("not a number: {v}")))?;
                data.push(T::lit(x));
            }
        }
    }

    let graph = SkeletonGraph::new(num_joints, edges, hip_index).map_err(|e| field_err("edges", e.to_string()))?;
    let frames =
        Array3::from_shape_vec((frames.len(), num_joints, 3), data).map_err(|e| Error::Structural(e.to_string()))?;
    SkeletonSequence::new(frames, label, Arc::new(graph))
}

/// Serializes a sequence as SKEL-JSON (pretty-printed, shortest round-trip floats).
pub fn write_skel_json<T: Real>(seq: &SkeletonSequence<T>) -> String {
    let graph = seq.graph();
    let frames: Vec<Vec<[f64; 3]>> = seq
        .frames()
        .outer_iter()
        .map(|frame| frame.outer_iter().map(|j| [j[0].as_f64(), j[1].as_f64(), j[2].as_f64()]).collect())
        .collect();
    let edges: Vec<[usize; 2]> = graph.edges().iter().map(|&(a, b)| [a, b]).collect();
    let doc = json!({
        "num_joints": graph.num_joints(),
        "edges": edges,
        "hip_index": graph.hip_index(),
        "label": seq.label(),
        "frames": frames,
    });
    serde_json::to_string(&doc).expect("SKEL-JSON serialization is infallible")
}
