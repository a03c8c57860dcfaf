use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frdl::bgs::{init_background_model, BgsParams};
use frdl::harness::{preprocess_all, preprocess_detailed, ConfusionMatrix, TrainConfig};
use frdl::hog::{gradients, orientation};
use frdl::ingest::{
    generate_synthetic_dataset, load_dataset, save_dataset, Frame, Plane, SyntheticSpec,
};
use frdl::par;

fn small_config() -> TrainConfig {
    let mut c = TrainConfig::default();
    c.roi_size = 32;
    c.jump = 2;
    c
}

#[test]
fn roi_contains_sprite_on_clean_clips() {
    let synth = generate_synthetic_dataset(&SyntheticSpec::new(3, 2, 10, 48, 0.0, 5)).unwrap();
    let cfg = small_config();
    for (sample, truth) in synth.dataset.samples.iter().zip(&synth.masks) {
        let p = preprocess_detailed(sample, &cfg).unwrap();
        for (roi, &idx) in p.rois.iter().zip(&p.frame_indices) {
            let gt = &truth[idx];
            for y in 0..gt.height() {
                for x in 0..gt.width() {
                    if gt.get(x, y) {
                        assert!(roi.contains(x, y), "{} frame {idx}: ({x},{y}) outside {roi:?}", sample.id());
                    }
                }
            }
        }
    }
}

#[test]
fn dataset_survives_disk_round_trip() {
    let synth = generate_synthetic_dataset(&SyntheticSpec::new(2, 2, 4, 16, 3.0, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&synth.dataset, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.class_names, synth.dataset.class_names);
    assert_eq!(back.len(), synth.dataset.len());
    for (a, b) in back.samples.iter().zip(&synth.dataset.samples) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.frames.frames, b.frames.frames);
        assert_eq!(a.frames.indices, b.frames.indices);
        let (ka, kb) = (a.skeleton.as_ref().unwrap(), b.skeleton.as_ref().unwrap());
        assert_eq!(ka.num_joints(), kb.num_joints());
        for (p, q) in ka.joints().iter().zip(kb.joints()) {
            for c in 0..3 {
                assert!((p[c] - q[c]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn static_scene_stays_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base: Vec<u8> = (0..32 * 32).map(|i| (60 + 2 * (i % 32) + i / 32) as u8).collect();
    let plate = Frame::gray(32, 32, base.clone()).unwrap();
    let mut model = init_background_model(&plate, BgsParams::default(), 1).unwrap();
    for _ in 0..20 {
        let noisy: Vec<u8> = base.iter().map(|&v| (v as i32 + rng.gen_range(-5..=5)) as u8).collect();
        let f = Frame::gray(32, 32, noisy).unwrap();
        let m = model.classify_foreground(&f).unwrap();
        assert_eq!(m.count(), 0);
        model.update(&f, &m).unwrap();
    }
}

#[test]
fn features_do_not_depend_on_worker_count() {
    let synth = generate_synthetic_dataset(&SyntheticSpec::new(3, 2, 8, 32, 4.0, 3)).unwrap();
    let cfg = small_config();
    let one = par::with_workers(1, || preprocess_all(&synth.dataset.samples, &cfg)).unwrap();
    let many = par::with_workers(3, || preprocess_all(&synth.dataset.samples, &cfg)).unwrap();
    assert_eq!(one, many);
}

#[test]
fn larger_jumps_keep_fewer_steps() {
    let synth = generate_synthetic_dataset(&SyntheticSpec::new(2, 10, 24, 32, 0.0, 4)).unwrap();
    let mut cfg = small_config();
    let mut prev = usize::MAX;
    for jump in [1, 2, 4, 6, 8, 12, 24, 100] {
        cfg.jump = jump;
        let steps: usize = preprocess_all(&synth.dataset.samples, &cfg)
            .unwrap()
            .iter()
            .map(|f| f.steps.len())
            .sum();
        assert_eq!(steps, 20 * 24usize.div_ceil(jump));
        assert!(steps <= prev);
        prev = steps;
    }
}

#[test]
fn random_guessing_scores_one_third() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
    for _ in 0..300 {
        cm.record(rng.gen_range(0..3), rng.gen_range(0..3));
    }
    assert!((cm.accuracy() - 1.0 / 3.0).abs() <= 0.08, "{}", cm.accuracy());
}

#[test]
fn gradients_match_hand_values() {
    #[rustfmt::skip]
    let img = [
        1.0, 2.0, 4.0, 7.0, 11.0,
        0.0, 3.0, 3.0, 9.0, 2.0,
        5.0, 5.0, 8.0, 1.0, 6.0,
        2.0, 7.0, 0.0, 4.0, 4.0,
        9.0, 1.0, 3.0, 3.0, 8.0,
    ];
    let g = gradients(&Plane::new(5, 5, img.to_vec()).unwrap()).unwrap();
    let at = |x: usize, y: usize| img[y * 5 + x];
    for y in 0..5 {
        for x in 0..5 {
            let ix = at(x.max(1) - 1, y) - at((x + 1).min(4), y);
            let iy = at(x, y.max(1) - 1) - at(x, (y + 1).min(4));
            assert_eq!(g.ix[y * 5 + x], ix);
            assert_eq!(g.iy[y * 5 + x], iy);
        }
    }
    // centre pixel: IX = 5 - 1, IY = 3 - 0
    assert_eq!((g.ix[12], g.iy[12]), (4.0, 3.0));
    let theta = orientation(g.ix[12], g.iy[12]);
    assert!((theta - 4.0f64.atan2(3.0).to_degrees()).abs() < 1e-12);
    assert!((theta - 53.130102).abs() < 1e-6, "{theta}");
}
