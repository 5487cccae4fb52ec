use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Activity CSV for subjects `s0..s{n}` over `days` days. Day `d` of subject
/// `s` has valid counts `k + d + 3s` for `k = 0..100`, plus invalid epochs
/// with large counts; rows are shuffled.
pub fn cohort_activity(subjects: usize, days: i64, seed: u64) -> String {
    let mut rows = Vec::new();
    for s in 0..subjects {
        for d in 1..=days {
            let mut epoch = 0;
            for k in 0..100u64 {
                rows.push(format!("s{s},{d},{epoch},{},1", k + d as u64 + 3 * s as u64));
                epoch += 1;
            }
            for _ in 0..25 {
                rows.push(format!("s{s},{d},{epoch},99999,0"));
                epoch += 1;
            }
        }
    }
    rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let mut out = String::from("subject_id,day,epoch_index,count,valid\n");
    for r in rows {
        writeln!(out, "{r}").unwrap();
    }
    out
}
