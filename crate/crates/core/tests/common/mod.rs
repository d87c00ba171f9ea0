use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Compare `actual` with a checked-in fixture. `FLSIM_BLESS=1` rewrites it.
pub fn golden(name: &str, actual: &str) {
    let path = fixture_path(name);
    if std::env::var_os("FLSIM_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing fixture {} ({e}); run with FLSIM_BLESS=1", path.display()));
    assert!(expected == actual, "output differs from fixture {}", path.display());
}
