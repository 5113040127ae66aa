use proptest::prelude::*;

use whyprov::engine::immediate_consequence;
use whyprov::generators::{gen_random_instance, Profile};
use whyprov::{fixpoint, EngineOptions};

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        Just(Profile::TinyLinear),
        Just(Profile::TinyNonlinear),
        Just(Profile::TinyNonrecursive)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Semi-naive evaluation agrees with iterating the immediate consequence
    /// operator, fact by fact and rank by rank.
    #[test]
    fn semi_naive_matches_naive(p in profile(), seed in any::<u64>()) {
        let (q, db) = gen_random_instance(p, seed);
        let fix = fixpoint(&q.program, &db, &EngineOptions::default()).unwrap();
        let mut level = db.clone();
        let mut k = 0u32;
        loop {
            for f in level.iter() {
                let r = fix.rank(f);
                prop_assert!(r.is_some_and(|r| r <= k), "{f} rank {r:?} at level {k}");
            }
            let next = immediate_consequence(&q.program, &level);
            if next.len() == level.len() {
                break;
            }
            for f in next.iter().filter(|f| !level.contains(f)) {
                prop_assert_eq!(fix.rank(f), Some(k + 1));
            }
            level = next;
            k += 1;
        }
        prop_assert_eq!(level.len(), fix.len());
    }

    #[test]
    fn fixpoint_is_deterministic(p in profile(), seed in any::<u64>()) {
        let (q, db) = gen_random_instance(p, seed);
        let a = fixpoint(&q.program, &db, &EngineOptions::default()).unwrap();
        let b = fixpoint(&q.program, &db, &EngineOptions::default()).unwrap();
        prop_assert_eq!(a.facts().collect::<Vec<_>>(), b.facts().collect::<Vec<_>>());
    }
}
