//! Config files on disk: round trips of every preset and line-anchored errors.

use std::fs;

use simopt::config::ExperimentConfig;
use simopt::error::Error;
use simopt::harness::{self, PRESETS};

#[test]
fn presets_round_trip_through_text() {
    for (name, text) in PRESETS {
        let cfg = ExperimentConfig::parse(text, name).unwrap();
        let canon = cfg.to_text();
        let again = ExperimentConfig::parse(&canon, "canonical").unwrap();
        assert_eq!(again, cfg, "{name}");
        assert_eq!(again.to_text(), canon, "{name}");
    }
}

#[test]
fn errors_in_files_name_the_file_and_line() {
    let path = std::env::temp_dir().join(format!("simopt-bad-{}.conf", std::process::id()));
    fs::write(
        &path,
        "experiment.task = drawer\n# comment\nreps.epsilon = -1\n",
    )
    .unwrap();
    let src = path.to_str().unwrap();
    match harness::load_config(src, &[]) {
        Err(Error::Config { origin, line, msg }) => {
            assert_eq!(origin, src);
            assert_eq!(line, 3);
            assert!(msg.contains("epsilon"), "{msg}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    fs::write(
        &path,
        "experiment.task = drawer\nenv.dt = 0.01\nenv.unknown = 3\n",
    )
    .unwrap();
    let text = harness::load_config(src, &[]).unwrap_err().to_string();
    assert!(text.starts_with(&format!("{src}:3:")), "{text}");
    let _ = fs::remove_file(&path);
}

#[test]
fn a_config_file_may_omit_the_extension() {
    let stem = std::env::temp_dir().join(format!("simopt-stem-{}", std::process::id()));
    let path = stem.with_extension("conf");
    fs::write(&path, "experiment.name = stem\nsimopt.seed = 9\n").unwrap();
    let cfg = harness::load_config(stem.to_str().unwrap(), &[]).unwrap();
    assert_eq!((cfg.name.as_str(), cfg.simopt.seed), ("stem", 9));
    let _ = fs::remove_file(&path);
}
