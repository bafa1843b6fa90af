#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gistchain::config::EngineConfig;
use gistchain::core::HybridIndex;
use gistchain::gateway::Gateway;
use gistchain::pipeline;
use gistchain::store::{read_corpus, CorpusStore};
use gistchain_core::SourceFormat;

pub const GOLDEN_TASK: &str = "What river flows through the town where the inventor of the Zephyr lamp was born?";
pub const GOLDEN_TASK_ID: &str = "zephyr";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Golden config with the mock script path made absolute.
pub fn golden_config() -> EngineConfig {
    let mut c = EngineConfig::load(&fixture("golden/config.toml")).unwrap();
    c.mock_script = Some(fixture("golden/mock.json"));
    c
}

/// Config for `mock` (a JSON script) on top of the golden settings.
pub fn config_with_mock(mock: &Path) -> EngineConfig {
    let mut c = golden_config();
    c.mock_script = Some(mock.to_path_buf());
    c
}

pub fn golden_corpus(config: &EngineConfig) -> (CorpusStore, HybridIndex) {
    let docs = read_corpus(&fixture("golden/corpus.jsonl"), SourceFormat::Plain).unwrap();
    let gw: Gateway = config.gateway().unwrap();
    pipeline::build_corpus(docs, &gw, config).unwrap()
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gistchain"))
}

/// Run the binary in `dir`, panicking with its output on spawn failure.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn gistchain")
}

pub fn copy_fixtures(from: &str, to: &Path) {
    for entry in std::fs::read_dir(fixture(from)).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            std::fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
        }
    }
}

pub fn write_mock(dir: &Path, script: &serde_json::Value) -> PathBuf {
    let path = dir.join("mock.json");
    std::fs::write(&path, serde_json::to_string_pretty(script).unwrap()).unwrap();
    path
}
