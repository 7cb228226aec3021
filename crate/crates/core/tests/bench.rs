use windnet::bench::{count_macs, instrumented_macs, layer_costs, measure_rtf};
use windnet::model::{Mode, ModelConfig, WindNetLite};

#[test]
fn analytic_macs_equal_instrumented_at_several_widths() {
    for mode in [Mode::Rejection, Mode::Extraction] {
        for scale in [1.0, 0.5, 0.25, 0.1] {
            let cfg = ModelConfig::reference(mode).with_scale(scale);
            let model = WindNetLite::<f32>::init(&cfg, 0).unwrap();
            assert_eq!(count_macs(&cfg).unwrap(), instrumented_macs(&model).unwrap(), "{mode} {scale}");
        }
    }
}

#[test]
fn per_layer_params_sum_to_model_count() {
    for scale in [1.0, 0.25] {
        let cfg = ModelConfig::reference(Mode::Rejection).with_scale(scale);
        let total: usize = layer_costs(&cfg).unwrap().iter().map(|l| l.params).sum();
        assert_eq!(total, WindNetLite::<f32>::zeros(&cfg).unwrap().param_count());
    }
}

#[test]
fn reference_macs_per_frame() {
    let cfg = ModelConfig::reference(Mode::Rejection);
    assert_eq!(count_macs(&cfg).unwrap(), 1_577_264);
}

#[test]
fn full_size_streaming_is_faster_than_real_time() {
    let cfg = ModelConfig::reference(Mode::Rejection);
    let model = WindNetLite::<f32>::init(&cfg, 0).unwrap();
    let r = measure_rtf(&model, 2.0, 9, 2).unwrap();
    assert_eq!(r.repetitions, 9);
    assert_eq!(r.frames_per_second, 62.5);
    assert!(r.rtf > 0.0 && r.rtf < 0.25, "rtf {}", r.rtf);
    assert!(r.to_table().contains("rtf"));
}
