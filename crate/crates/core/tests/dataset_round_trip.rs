use fogsense::evaluate::{EPOCH_OVERLAP, EPOCH_WINDOW_S, FOG_BUFFER_S};
use fogsense::model::FeatureMode;
use fogsense::pipeline::{list_subjects, load_subject, read_footswitch_config, recording_epochs, FeatureParams};
use fogsense::synth::{generate_subject, generate_to_dir, SynthConfig};

fn small() -> SynthConfig {
    SynthConfig { n_subjects: 2, task_duration_s: 90.0, tasks_per_subject: 1, ..SynthConfig::default() }
}

#[test]
fn written_dataset_reloads_to_the_same_epochs() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    generate_to_dir(dir.path(), &cfg).unwrap();
    assert_eq!(list_subjects(dir.path()).unwrap(), vec!["S01", "S02"]);
    let footswitch = read_footswitch_config(dir.path()).unwrap();
    let params = FeatureParams::default();

    for (i, id) in ["S01", "S02"].iter().enumerate() {
        let mem = generate_subject(&cfg, i).unwrap();
        let disk = load_subject(dir.path(), id, &footswitch).unwrap();
        assert_eq!(disk.recording, mem.recording);
        assert_eq!(&disk.reference, mem.consensus());
        for mode in [FeatureMode::Offline, FeatureMode::Causal] {
            let run = |rec, sw, ann| {
                recording_epochs(rec, sw, ann, &params, mode, EPOCH_WINDOW_S, EPOCH_OVERLAP, FOG_BUFFER_S).unwrap()
            };
            let a = run(&mem.recording, &mem.switches, mem.consensus());
            let b = run(&disk.recording, &disk.switches, &disk.reference);
            assert_eq!(a, b, "{id} {mode:?}");
            assert!(a.epochs.iter().any(|e| e.label.is_fog()), "{id} {mode:?} has no FOG epochs");
        }
    }
}

#[test]
fn causal_and_offline_features_agree_on_slow_features() {
    let s = generate_subject(&small(), 0).unwrap();
    let params = FeatureParams::default();
    let run = |mode| {
        recording_epochs(&s.recording, &s.switches, s.consensus(), &params, mode, EPOCH_WINDOW_S, EPOCH_OVERLAP, FOG_BUFFER_S)
            .unwrap()
    };
    let (off, causal) = (run(FeatureMode::Offline), run(FeatureMode::Causal));
    let j = off.feature_index("stride_duration").unwrap();
    let pairs: Vec<(f64, f64)> = off
        .epochs
        .iter()
        .filter_map(|e| {
            let c = causal.epochs.iter().find(|c| (c.start_s - e.start_s).abs() < 1e-9)?;
            Some((e.features[j]?, c.features[j]?))
        })
        .collect();
    assert!(pairs.len() > 20);
    // Stride durations come from the same footswitch events in both modes.
    let close = pairs.iter().filter(|(a, b)| (a - b).abs() < 0.05 * a).count();
    assert!(close * 10 >= pairs.len() * 8, "{close}/{}", pairs.len());
}
