use adaptive_enhance::agent::{evaluate, Agent, EvalPolicy};
use adaptive_enhance::dataset::load_dataset;
use adaptive_enhance::degrade::{
    build_benchmark, read_manifest, write_synthetic_corpus, DegradationKind, DegradationSpec, MANIFEST_FILE,
};
use adaptive_enhance::eval::{ExternalMasks, QualityConfig, RewardWeights};
use adaptive_enhance::image::save_mask;
use adaptive_enhance::perception::{BuiltinPerception, Calibration};
use adaptive_enhance::Error;

#[test]
fn synthetic_benchmark_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let clean = write_synthetic_corpus(dir.path().join("clean"), 3, 48, 5).unwrap();
    assert_eq!(clean.len(), 3);
    let specs = [
        DegradationSpec::new(DegradationKind::DimGamma, 0.8, 1).unwrap(),
        DegradationSpec::new(DegradationKind::AdditiveNoise, 0.5, 2).unwrap(),
    ];
    let out = dir.path().join("bench");
    let (index, manifest) = build_benchmark(&clean, &specs, &out).unwrap();
    assert_eq!(index.len(), 6);
    assert_eq!(index.with_masks().count(), 6);
    assert_eq!(read_manifest(out.join(MANIFEST_FILE)).unwrap(), manifest);
    let dim = manifest.iter().find(|m| m.kind == DegradationKind::DimGamma).unwrap();
    assert!(dim.id.ends_with("-dim_gamma-080"));
    assert!(dim.intended_inverse.contains(&"gamma_correction".to_string()));

    // rebuilding with the same seeds reproduces the same pixels
    let (_, again) = build_benchmark(&clean, &specs, dir.path().join("bench2")).unwrap();
    assert_eq!(again, manifest);
    for m in &manifest {
        let a = std::fs::read(out.join("images").join(format!("{}.png", m.id))).unwrap();
        let b = std::fs::read(dir.path().join("bench2/images").join(format!("{}.png", m.id))).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn benchmark_requires_masks() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_corpus(dir.path(), 2, 32, 0).unwrap();
    let first = std::fs::read_dir(dir.path().join("masks")).unwrap().next().unwrap().unwrap();
    std::fs::remove_file(first.path()).unwrap();
    let index = load_dataset(dir.path()).unwrap();
    let spec = DegradationSpec::new(DegradationKind::GaussianBlur, 0.4, 0).unwrap();
    assert!(matches!(
        build_benchmark(&index, &[spec], dir.path().join("out")),
        Err(Error::MissingMask(_))
    ));
}

#[test]
fn external_masks_feed_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let index = write_synthetic_corpus(dir.path().join("data"), 2, 40, 9).unwrap();
    let samples = index.load_samples(None).unwrap();
    let masks = ExternalMasks::new(dir.path().join("pred"));
    std::fs::create_dir_all(masks.dir()).unwrap();
    let perception = BuiltinPerception::new(Calibration::default()).unwrap();
    let quality = QualityConfig::default();
    let agent = Agent {
        perception: &perception,
        segmenter: &masks,
        quality: &quality,
        weights: RewardWeights::default(),
        perception_temperature: 1.0,
    };

    assert!(matches!(
        evaluate(&samples, &agent, EvalPolicy::Identity),
        Err(Error::ExternalMaskMissing { .. })
    ));

    // ground truth as the prediction scores perfectly
    for s in &samples {
        save_mask(&s.mask, masks.path_for(&s.id, "none")).unwrap();
    }
    let report = evaluate(&samples, &agent, EvalPolicy::Identity).unwrap();
    assert_eq!(report.mean_dice, 1.0);
    assert_eq!(report.mean_iou, 1.0);
    assert!(report.rows.iter().all(|r| r.variant == "none"));
}
