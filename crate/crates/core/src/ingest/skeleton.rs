use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Joint coordinates for a clip: `num_frames` rows of `num_joints` (x, y, z).
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    joints: Vec<[f64; 3]>,
    num_frames: usize,
    num_joints: usize,
    /// Original clip frame index of each row.
    pub frame_indices: Vec<usize>,
}

impl SkeletonSequence {
    pub fn new(
        joints: Vec<[f64; 3]>,
        num_frames: usize,
        num_joints: usize,
        frame_indices: Vec<usize>,
    ) -> Result<Self> {
        if num_frames == 0 || num_joints == 0 {
            return Err(Error::Param(format!(
                "skeleton needs at least one frame and joint, got {num_frames}x{num_joints}"
            )));
        }
        if joints.len() != num_frames * num_joints || frame_indices.len() != num_frames {
            return Err(Error::Dimension(format!(
                "skeleton of {num_frames} frames x {num_joints} joints given {} joints and {} frame indices",
                joints.len(),
                frame_indices.len()
            )));
        }
        Ok(SkeletonSequence {
            joints,
            num_frames,
            num_joints,
            frame_indices,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    #[inline]
    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        self.joints[frame * self.num_joints + joint]
    }

    pub fn joints(&self) -> &[[f64; 3]] {
        &self.joints
    }

    /// Keeps, for each target frame index, the row whose original index is
    /// nearest (earlier row wins a tie).
    pub fn align_to(&self, targets: &[usize]) -> SkeletonSequence {
        let mut joints = Vec::with_capacity(targets.len() * self.num_joints);
        for &t in targets {
            let row = nearest_row(&self.frame_indices, t);
            joints.extend_from_slice(
                &self.joints[row * self.num_joints..(row + 1) * self.num_joints],
            );
        }
        SkeletonSequence {
            joints,
            num_frames: targets.len(),
            num_joints: self.num_joints,
            frame_indices: targets.to_vec(),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::load(path, e.to_string()))?;
        let header = reader
            .headers()
            .map_err(|e| Error::load(path, e.to_string()))?
            .clone();
        let expected = ["frame", "joint", "x", "y", "z"];
        if header.iter().ne(expected.iter().copied()) {
            return Err(Error::load(
                path,
                format!("expected header frame,joint,x,y,z, found {:?}", header),
            ));
        }
        let mut rows: BTreeMap<usize, BTreeMap<usize, [f64; 3]>> = BTreeMap::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::load(path, e.to_string()))?;
            let bad = |what: &str| Error::load(path, format!("row {}: bad {what}", line + 2));
            let frame: usize = record[0].parse().map_err(|_| bad("frame"))?;
            let joint: usize = record[1].parse().map_err(|_| bad("joint"))?;
            let mut xyz = [0.0; 3];
            for (a, v) in xyz.iter_mut().enumerate() {
                *v = record[2 + a].parse().map_err(|_| bad("coordinate"))?;
            }
            if rows.entry(frame).or_default().insert(joint, xyz).is_some() {
                return Err(Error::load(
                    path,
                    format!("duplicate row for frame {frame}, joint {joint}"),
                ));
            }
        }
        let num_joints = rows.values().next().map(|j| j.len()).unwrap_or(0);
        if num_joints == 0 {
            return Err(Error::load(path, "no skeleton rows"));
        }
        let mut joints = Vec::new();
        let mut frame_indices = Vec::new();
        for (frame, per_joint) in rows {
            if per_joint.len() != num_joints || per_joint.keys().copied().ne(0..num_joints) {
                return Err(Error::load(
                    path,
                    format!("frame {frame} does not list joints 0..{num_joints}"),
                ));
            }
            frame_indices.push(frame);
            joints.extend(per_joint.into_values());
        }
        let num_frames = frame_indices.len();
        SkeletonSequence::new(joints, num_frames, num_joints, frame_indices)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
        let io = |e: csv::Error| Error::load(path, e.to_string());
        writer.write_record(["frame", "joint", "x", "y", "z"]).map_err(io)?;
        for f in 0..self.num_frames {
            for j in 0..self.num_joints {
                let [x, y, z] = self.joint(f, j);
                writer
                    .write_record([
                        self.frame_indices[f].to_string(),
                        j.to_string(),
                        x.to_string(),
                        y.to_string(),
                        z.to_string(),
                    ])
                    .map_err(io)?;
            }
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn nearest_row(indices: &[usize], target: usize) -> usize {
    let mut best = 0;
    let mut best_gap = usize::MAX;
    for (row, &idx) in indices.iter().enumerate() {
        let gap = idx.abs_diff(target);
        if gap < best_gap {
            best = row;
            best_gap = gap;
        }
    }
    best
}
