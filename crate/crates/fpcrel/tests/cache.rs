use fpcrel::cache::{cache_key, decode, encode, CacheStatus, NullCache, NullSpec};
use fpcrel::parallel::simulate_null;
use fpcrel_core::nulldist::simulate_w;
use fpcrel_core::selfnorm::NuMeasure;

fn spec(seed: u64) -> NullSpec {
    NullSpec { nu: NuMeasure::default(), path_steps: 500, replicates: 10_000, seed }
}

#[test]
fn parallel_simulation_matches_sequential() {
    let s = spec(4);
    let seq = simulate_w(&s.nu, s.path_steps, s.replicates, s.seed).unwrap();
    for threads in [1, 2, 5] {
        assert_eq!(simulate_null(&s, threads).unwrap(), seq);
    }
}

#[test]
fn encode_decode_roundtrip() {
    let table = simulate_null(&spec(1), 0).unwrap();
    let bytes = encode(&table);
    assert_eq!(bytes.len(), 96 + 8 * table.replicates());
    let path = std::path::Path::new("mem");
    assert_eq!(decode(&bytes, path).unwrap(), table);
    assert!(decode(&bytes[..bytes.len() - 3], path).is_err());
    let mut bad = bytes.clone();
    bad[0] ^= 1;
    assert!(decode(&bad, path).is_err());
}

#[test]
fn second_request_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = NullCache::new(dir.path());
    let (a, s1) = cache.get_or_simulate(&spec(2), 0).unwrap();
    let (b, s2) = cache.get_or_simulate(&spec(2), 0).unwrap();
    assert_eq!((s1, s2), (CacheStatus::Simulated, CacheStatus::Hit));
    assert_eq!(a, b);
    assert!(cache.path_for(&spec(2)).exists());
}

#[test]
fn keys_separate_configurations() {
    let base = cache_key(&spec(1));
    assert_ne!(base, cache_key(&spec(2)));
    assert_ne!(base, cache_key(&NullSpec { path_steps: 1000, ..spec(1) }));
    assert_ne!(base, cache_key(&NullSpec { replicates: 20_000, ..spec(1) }));
    assert_ne!(base, cache_key(&NullSpec { nu: NuMeasure::uniform(0.05, 96).unwrap(), ..spec(1) }));
    assert_eq!(base, cache_key(&spec(1)));
}

#[test]
fn mismatched_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cache = NullCache::new(dir.path());
    let table = simulate_null(&spec(3), 0).unwrap();
    let stored = cache.store(&table).unwrap();
    // a file renamed to another configuration's key must not be trusted
    std::fs::rename(&stored, cache.path_for(&spec(9))).unwrap();
    assert!(cache.load(&spec(9)).is_err());
}
