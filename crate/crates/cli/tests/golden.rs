//! Byte-for-byte reproducibility against checked-in outputs. Regenerate with
//! `PMC_BLESS=1 cargo test -p pmc-cli --test golden`.

mod common;

use std::path::{Path, PathBuf};

use common::pmc;
use pmc_cli::summary::RunSummary;

const CASES: [&str; 2] = ["euclidean-radial-s1", "manufactured-tilted-s2"];
const FILES: [&str; 3] = ["summary.json", "trace.csv", "fields.csv"];

fn golden_dir(case: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(case)
}

/// Solve and return the three artifacts, the summary with its timings zeroed.
fn artifacts(case: &str, threads: &str) -> Vec<(String, String)> {
    let dir = tempfile::tempdir().unwrap();
    let r = pmc(
        &["solve", "--scenario", case, "--out", dir.path().to_str().unwrap()],
        &[("PMC_THREADS", threads)],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    FILES
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            let text = if *f == "summary.json" {
                RunSummary::from_json(&text).unwrap().without_timings().to_json() + "\n"
            } else {
                text
            };
            (f.to_string(), text)
        })
        .collect()
}

#[test]
fn outputs_match_golden_files() {
    let bless = std::env::var_os("PMC_BLESS").is_some();
    for case in CASES {
        let dir = golden_dir(case);
        for (name, text) in artifacts(case, "1") {
            let path = dir.join(&name);
            if bless {
                std::fs::create_dir_all(&dir).unwrap();
                std::fs::write(&path, &text).unwrap();
                continue;
            }
            let expected = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("{}: {e}; bless with PMC_BLESS=1", path.display()));
            assert!(expected == text, "{case}/{name} differs from the golden copy");
        }
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    for case in CASES {
        assert_eq!(artifacts(case, "1"), artifacts(case, "3"), "{case}");
    }
}
