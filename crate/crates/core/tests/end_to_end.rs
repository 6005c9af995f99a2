use tumorseg::imgio::{decode_gray_pgm, encode_gray_pgm, load_mask_pgm, write_mask_pgm};
use tumorseg::phantom::{generate, PhantomSpec};
use tumorseg::pipeline::{evaluate, segment};
use tumorseg::{FeatureVector, OcsvmModel, PipelineConfig};

#[test]
fn segmentation_stays_inside_head_and_is_repeatable() {
    let p = generate(&PhantomSpec::standard(11)).unwrap();
    let config = PipelineConfig::default();
    let a = segment(&p.image, &config).unwrap();
    let b = segment(&p.image, &config).unwrap();
    assert_eq!(a.mask, b.mask);
    assert!(a.mask.and(&a.head.mask.not()).is_empty());
    let report = evaluate(&a.mask, &p.lesion_truth, &p.head_truth).unwrap();
    assert!(report.si > 0.7 && report.accuracy > 0.95, "{report:?}");
}

#[test]
fn cleanup_keeps_single_component() {
    let p = generate(&PhantomSpec::standard(2)).unwrap();
    let config = PipelineConfig { cleanup: true, ..Default::default() };
    let out = segment(&p.image, &config).unwrap();
    assert_eq!(tumorseg::morphology::components_8(&out.mask).len(), 1);
}

#[test]
fn quantized_image_round_trips_through_pgm() {
    let p = generate(&PhantomSpec::standard(5)).unwrap();
    let bytes = encode_gray_pgm(&p.image).unwrap();
    let decoded = decode_gray_pgm(&bytes).unwrap();
    assert_eq!(encode_gray_pgm(&decoded).unwrap(), bytes);
    for (a, b) in p.image.pixels().iter().zip(decoded.pixels()) {
        assert!((a - b).abs() <= 0.5);
    }
}

#[test]
fn mask_file_round_trip() {
    let p = generate(&PhantomSpec::standard(0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lesion.pgm");
    write_mask_pgm(&p.lesion_truth, &path).unwrap();
    assert_eq!(load_mask_pgm(&path).unwrap(), p.lesion_truth);
}

#[test]
fn model_json_preserves_scores() {
    let p = generate(&PhantomSpec::standard(3)).unwrap();
    let out = segment(&p.image, &PipelineConfig::default()).unwrap();
    let model = out.model.expect("lesion detected");
    let back = OcsvmModel::from_json(&model.to_json().unwrap()).unwrap();
    for v in [0.1, 0.47, 0.78, 0.9] {
        let x = FeatureVector::new(vec![v; model.feature_dim]).unwrap();
        let (s1, s2) = (model.decide(&x).unwrap().score, back.decide(&x).unwrap().score);
        assert!((s1 - s2).abs() <= 1e-12);
    }
}
