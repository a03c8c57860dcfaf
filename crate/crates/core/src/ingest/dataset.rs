use std::fs;
use std::path::{Path, PathBuf};

use super::frame::{Frame, FrameSequence};
use super::pnm::{read_pnm, write_pnm};
use super::skeleton::SkeletonSequence;
use crate::error::{Error, Result};

/// Frame rate assumed for clips loaded from disk.
pub const DEFAULT_FRAME_RATE: f64 = 25.0;

pub const SKELETON_FILE: &str = "skeleton.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub frames: FrameSequence,
    pub skeleton: Option<SkeletonSequence>,
    pub label: usize,
}

impl LabeledSample {
    pub fn id(&self) -> &str {
        &self.frames.sample_id
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, class_names: Vec<String>) -> Result<Self> {
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(Error::Data(format!("duplicate class name {name:?}")));
            }
        }
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Data(format!(
                "sample {} has label {} but only {} classes exist",
                s.id(),
                s.label,
                class_names.len()
            )));
        }
        Ok(Dataset {
            samples,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Sample count per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Joint count shared by every skeleton, or `None` when any sample lacks one.
    pub fn skeleton_joints(&self) -> Option<usize> {
        let first = self.samples.first()?.skeleton.as_ref()?.num_joints();
        self.samples
            .iter()
            .all(|s| s.skeleton.as_ref().map(|k| k.num_joints()) == Some(first))
            .then_some(first)
    }
}

/// Parses `frame_%05d.pgm` / `frame_%05d.ppm` into the frame index.
fn frame_index(name: &str) -> Option<usize> {
    let stem = name
        .strip_suffix(".pgm")
        .or_else(|| name.strip_suffix(".ppm"))?;
    let digits = stem.strip_prefix("frame_")?;
    if digits.len() < 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn frame_file_name(index: usize, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("frame_{index:05}.{ext}")
}

/// Loads every `frame_NNNNN.{pgm,ppm}` under `dir`, ordered by index.
pub fn load_frame_sequence(dir: &Path) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(frame_index) {
            files.push((idx, entry.path()));
        }
    }
    if files.is_empty() {
        return Err(Error::load(dir, "no frames found"));
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::load(&w[1].1, format!("duplicate frame index {}", w[1].0)));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut dims = None;
    for (_, path) in &files {
        let frame = read_pnm(path)?;
        match dims {
            None => dims = Some(frame.dims()),
            Some(d) if d != frame.dims() => {
                return Err(Error::load(
                    path,
                    format!("dimension mismatch: {:?} vs {:?}", frame.dims(), d),
                ))
            }
            _ => {}
        }
        frames.push(frame);
    }
    let indices = files.iter().map(|(i, _)| *i).collect();
    let sample_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    FrameSequence::with_indices(frames, indices, sample_id, DEFAULT_FRAME_RATE)
}

/// Loads one sample directory: its frames plus the optional skeleton file.
pub fn load_sample(dir: &Path, label: usize) -> Result<LabeledSample> {
    let frames = load_frame_sequence(dir)?;
    let skel_path = dir.join(SKELETON_FILE);
    let skeleton = if skel_path.is_file() {
        Some(SkeletonSequence::read_csv(&skel_path)?)
    } else {
        None
    };
    Ok(LabeledSample {
        frames,
        skeleton,
        label,
    })
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Loads `root/<class>/<sample>/...`; classes are ordered by name.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let class_dirs = sorted_subdirs(root)?;
    if class_dirs.is_empty() {
        return Err(Error::load(root, "no class directories"));
    }
    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    for (label, class_dir) in class_dirs.iter().enumerate() {
        class_names.push(class_dir.file_name().unwrap().to_string_lossy().into_owned());
        for sample_dir in sorted_subdirs(class_dir)? {
            let mut sample = load_sample(&sample_dir, label)?;
            sample.frames.sample_id = format!(
                "{}/{}",
                class_names[label],
                sample.frames.sample_id
            );
            samples.push(sample);
        }
    }
    Dataset::new(samples, class_names)
}

/// Writes a dataset in the layout [`load_dataset`] reads.
pub fn save_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    for sample in &ds.samples {
        let class = &ds.class_names[sample.label];
        let leaf = sample.id().rsplit('/').next().unwrap_or(sample.id());
        let dir = root.join(class).join(leaf);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (frame, &idx) in sample.frames.frames.iter().zip(&sample.frames.indices) {
            write_pnm(&dir.join(frame_file_name(idx, frame.channels())), frame)?;
        }
        if let Some(skel) = &sample.skeleton {
            skel.write_csv(&dir.join(SKELETON_FILE))?;
        }
    }
    Ok(())
}

/// Keeps frames 0, J, 2J, ... and records their original indices.
pub fn select_representatives(seq: &FrameSequence, jump: usize) -> Result<FrameSequence> {
    if jump == 0 {
        return Err(Error::Param("frame jump must be at least 1".into()));
    }
    let frames: Vec<Frame> = seq.frames.iter().step_by(jump).cloned().collect();
    let indices = seq.indices.iter().step_by(jump).copied().collect();
    FrameSequence::with_indices(frames, indices, seq.sample_id.clone(), seq.nominal_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(n: usize) -> FrameSequence {
        let frames = (0..n).map(|i| Frame::filled(4, 4, i as u8)).collect();
        FrameSequence::new(frames, "clip", 25.0).unwrap()
    }

    #[test]
    fn jump_selection_indices() {
        assert_eq!(select_representatives(&clip(12), 6).unwrap().indices, vec![0, 6]);
        assert_eq!(
            select_representatives(&clip(13), 4).unwrap().indices,
            vec![0, 4, 8, 12]
        );
        assert_eq!(select_representatives(&clip(5), 1).unwrap(), clip(5));
        assert!(matches!(
            select_representatives(&clip(5), 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn jump_past_end_keeps_first_frame() {
        let s = select_representatives(&clip(16), 100).unwrap();
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_index("frame_00011.pgm"), Some(11));
        assert_eq!(frame_index("frame_123456.ppm"), Some(123456));
        assert_eq!(frame_index("frame_1.pgm"), None);
        assert_eq!(frame_index("skeleton.csv"), None);
        assert_eq!(frame_file_name(3, 1), "frame_00003.pgm");
    }

    #[test]
    fn loads_frames_in_index_order() {
        let dir = tempfile::tempdir().unwrap();
        for i in (0..12).rev() {
            let f = Frame::filled(8, 8, i as u8 * 10);
            write_pnm(&dir.path().join(frame_file_name(i, 1)), &f).unwrap();
        }
        let seq = load_frame_sequence(dir.path()).unwrap();
        assert_eq!(seq.len(), 12);
        assert_eq!(seq.indices, (0..12).collect::<Vec<_>>());
        assert!(seq.frames.iter().enumerate().all(|(i, f)| f.luma(0, 0) == i as u8 * 10));
    }

    #[test]
    fn empty_and_mixed_directories_fail() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no frames found"));

        write_pnm(&dir.path().join("frame_00000.pgm"), &Frame::filled(32, 32, 0)).unwrap();
        write_pnm(&dir.path().join("frame_00001.pgm"), &Frame::filled(64, 64, 0)).unwrap();
        let err = load_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
        assert!(err.to_string().contains("frame_00001.pgm"));
    }

    #[test]
    fn unreadable_frame_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("frame_00000.pgm"), b"garbage").unwrap();
        let err = load_frame_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("frame_00000.pgm"));
    }

    #[test]
    fn dataset_validation() {
        let s = LabeledSample {
            frames: clip(2),
            skeleton: None,
            label: 2,
        };
        assert!(Dataset::new(vec![s], vec!["a".into(), "b".into()]).is_err());
        assert!(Dataset::new(vec![], vec!["a".into(), "a".into()]).is_err());
    }
}
