//! The shipped corpus in `corpus/` must match the generated one.
//! Regenerate with `FANO_BALANCE_BLESS=1 cargo test -p fano-balance-cli --test corpus`.

use std::path::PathBuf;

use fano_balance::io::{read_test_config, TestConfigFile};
use fano_balance::verify::corpus;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn render(file: &TestConfigFile) -> String {
    let mut text = serde_json::to_string_pretty(file).unwrap();
    text.push('\n');
    text
}

#[test]
fn shipped_corpus_matches_generator() {
    let dir = corpus_dir();
    let entries = corpus();
    if std::env::var_os("FANO_BALANCE_BLESS").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        for e in &entries {
            std::fs::write(dir.join(format!("{}.json", e.stem)), render(&TestConfigFile::from_config(&e.config))).unwrap();
        }
    }
    let mut shipped: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    shipped.sort();
    let mut expected: Vec<String> = entries.iter().map(|e| format!("{}.json", e.stem)).collect();
    expected.sort();
    assert_eq!(shipped, expected);

    for e in &entries {
        let path = dir.join(format!("{}.json", e.stem));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, render(&TestConfigFile::from_config(&e.config)), "{} is stale", e.stem);
        assert_eq!(read_test_config(&path).unwrap(), e.config, "{} does not round-trip", e.stem);
    }
}
