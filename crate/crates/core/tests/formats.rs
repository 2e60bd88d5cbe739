use std::io::BufReader;

use pitchml_core::features::{
    extract_all, feature_csv_header, read_feature_csv, write_feature_csv,
};
use pitchml_core::pipeline::{synth_utterance, SynthSpec};
use pitchml_core::signal::{load_waveform, write_waveform, WavEncoding};
use pitchml_core::{FeatureConfig, PitchTrack};

#[test]
fn feature_header_is_fixed() {
    assert_eq!(
        feature_csv_header(),
        "frame_time_s,zcr,ac_peak,clarity,ssh,ssh_star,srh,srh_star,tilt,cpp,zcr_ms,ac_ms,clarity_ms,ssh_ms,\
         ssh_star_ms,tilt_ms,cpp_ms,f0_ac,f0_ssh,f0_srh,f0_cpp,f0_ac_ms,f0_ssh_ms,f0_cpp_ms"
    );
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        utterance_s: 2.0,
        ..SynthSpec::default()
    };
    let u = synth_utterance(&spec, 1, 0).unwrap();

    let track_path = dir.path().join("t.csv");
    u.truth
        .write_csv(std::fs::File::create(&track_path).unwrap())
        .unwrap();
    let back =
        PitchTrack::read_csv(BufReader::new(std::fs::File::open(&track_path).unwrap())).unwrap();
    assert_eq!(back, u.truth);
    for (a, b) in back.f0.iter().zip(&u.truth.f0) {
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    let wav = dir.path().join("s.wav");
    write_waveform(&wav, &u.speech, WavEncoding::Float32).unwrap();
    let loaded = load_waveform(&wav).unwrap();
    assert_eq!(loaded.len(), u.speech.len());
    assert_eq!(loaded.sample_rate(), 16000);

    let m = extract_all(&loaded, &FeatureConfig::default()).unwrap();
    let csv = dir.path().join("f.csv");
    write_feature_csv(std::fs::File::create(&csv).unwrap(), &m).unwrap();
    let table = read_feature_csv(BufReader::new(std::fs::File::open(&csv).unwrap())).unwrap();
    assert_eq!(table.features, m.features);
    assert_eq!(table.candidates, m.candidates);
    assert_eq!(table.times[1], 0.005);
}
