use std::path::PathBuf;

use mhbt::experiments::{ExperimentConfig, ExperimentKind};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_the_built_in_defaults() {
    for kind in ExperimentKind::ALL {
        let path = configs_dir().join(format!("{}.toml", kind.as_str()));
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg, ExperimentConfig::defaults(kind), "{}", path.display());

        // every key is spelled out, so nothing comes from the merge
        let text = std::fs::read_to_string(&path).unwrap();
        let table: toml::Table = text.parse().unwrap();
        let full: toml::Table = ExperimentConfig::defaults(kind).to_toml().unwrap().parse().unwrap();
        assert_eq!(table, full, "{}", path.display());
    }
}
