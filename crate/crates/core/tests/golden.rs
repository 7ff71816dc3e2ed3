//! A small trained model checked in as a fixture. Expected scores were
//! computed by a separate numpy implementation of the same forward pass
//! reading the weights straight from the JSON file.

use grulstm::dataio::{apply_minmax, make_sequences, Dataset, PointRecord, SequenceMode};
use grulstm::recurrent::predict_scores;
use grulstm::training::{load_saved, model_to_string};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_grulstm.json");

const ROWS: [[f64; 7]; 6] = [
    [49.2159680254221, -38.23142695947654, 0.29063634611985634, -1114.0, 146.0, 86.0, 60.0],
    [26.07200666865289, 5.180126321529933, 9.874136686424945, -927.0, 95.0, 94.0, 60.0],
    [36.52242395658159, -44.592028247785706, 7.285961375342021, -683.0, 148.0, 176.0, 135.0],
    [-14.38854630691749, 6.0714195650733345, 1.7751403064100477, -1165.0, 59.0, 111.0, 46.0],
    [-6.441086720483803, 2.5974220076931616, 0.7218436338188744, -1089.0, 136.0, 110.0, 88.0],
    // outside the fitted range on every column: exercises clamping
    [100.0, 0.0, 30.0, -2000.0, 0.0, 255.0, 128.0],
];

const EXPECTED: [[f64; 8]; 3] = [
    [0.46815135688775356, 0.3983266029262569, 0.5003757934664483, 0.5178016610366328, 0.5175276730256168, 0.506347844876497, 0.49849539384634145, 0.452313933621492],
    [0.4670993312572961, 0.4132754154082886, 0.503277283205723, 0.5140486704091638, 0.5096906062410678, 0.5014132156810153, 0.49592390104653017, 0.45747091810155116],
    [0.46881666980092185, 0.4196390243351017, 0.5023903690981575, 0.5121711465259752, 0.5082170795573067, 0.5012687013013798, 0.4958156816122827, 0.4597473739139302],
];

#[test]
fn golden_scores() {
    let saved = load_saved::<f64>(FIXTURE).unwrap();
    assert_eq!(saved.sequence, Some(SequenceMode::Window(3)));
    let records: Vec<PointRecord<f64>> = ROWS.iter().map(|r| PointRecord::from_features(r, 0)).collect();
    let d = apply_minmax(&Dataset::from_records(&records).unwrap(), &saved.stats);
    let samples = make_sequences(&d, SequenceMode::Window(3)).unwrap();
    assert_eq!(samples.len(), EXPECTED.len());
    for (s, want) in samples.iter().zip(EXPECTED) {
        let got = predict_scores(&saved.model, s).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn fixture_reserializes_byte_for_byte() {
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    let saved = load_saved::<f64>(FIXTURE).unwrap();
    assert_eq!(model_to_string(&saved).trim_end(), text.trim_end());
}
