use std::fs;
use std::path::{Path, PathBuf};

use limited_supply::ingest::load_interactions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn write_pair(dir: &Path, ratings: &str, features: &str) -> (PathBuf, PathBuf) {
    let (r, f) = (dir.join("ratings.csv"), dir.join("features.csv"));
    fs::write(&r, ratings).unwrap();
    fs::write(&f, features).unwrap();
    (r, f)
}

fn load_err(ratings: &str, features: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let (r, f) = write_pair(dir.path(), ratings, features);
    load_interactions(r, f).unwrap_err().to_string()
}

const FEATURES: &str = "user_id,f1\n1,0.5\n2,-0.5\n";

#[test]
fn shipped_sample_loads_into_a_consumed_always_model() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let ds = load_interactions(data.join("ratings.csv"), data.join("features.csv")).unwrap();
    assert_eq!((ds.users(), ds.items()), (40, 30));
    assert_eq!(ds.features().ncols(), 5);
    assert_eq!(ds.user_ids()[..3], ["1", "2", "3"]);
    let model = ds.to_reward_model().unwrap();
    assert!(model.q_c().iter().all(|&c| c == 1.0));
    assert_eq!(model.q(), ds.ratings());
}

#[test]
fn dense_matrix_is_assembled_in_numeric_id_order() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = "user_id,item_id,score\n2,10,4\n1,9,1\n2,9,3\n1,10,2\n";
    let (r, f) = write_pair(dir.path(), ratings, FEATURES);
    let ds = load_interactions(r, f).unwrap();
    assert_eq!(ds.ratings(), &ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
    assert_eq!(ds.item_ids(), ["9", "10"]);
}

#[test]
fn malformed_files_are_rejected_with_specific_messages() {
    let cases = [
        ("user_id,item_id,score\n1,9,1\n1,10,2\n2,9,3\n", "missing pair (user 2, item 10)"),
        ("user_id,item_id,score\n1,9,1\n1,9,2\n2,9,3\n", "duplicate pair"),
        ("user_id,item_id,score\n1,9,x\n2,9,3\n", "not a finite number"),
        ("user,item,score\n1,9,1\n2,9,3\n", "user_id,item_id,score"),
        ("user_id,item_id,score\n1,9,1\n", "user 2 has features but no ratings"),
    ];
    for (ratings, expected) in cases {
        let msg = load_err(ratings, FEATURES);
        assert!(msg.contains(expected), "expected {expected:?} in {msg:?}");
    }
}

#[test]
fn written_datasets_reload_identically() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let ds = load_interactions(data.join("ratings.csv"), data.join("features.csv")).unwrap();
    let sub = ds.subsample(7, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (r, f) = (dir.path().join("r.csv"), dir.path().join("f.csv"));
    sub.write(&r, &f).unwrap();
    let back = load_interactions(&r, &f).unwrap();
    assert_eq!(back.ratings(), sub.ratings());
    assert_eq!(back.features(), sub.features());
    assert_eq!(back.user_ids(), sub.user_ids());
    assert_eq!(sub, ds.subsample(7, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap());
    assert!(ds.subsample(41, 5, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
}
