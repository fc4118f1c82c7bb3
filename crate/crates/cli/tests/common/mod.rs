#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use expertfind_cli::args::load_config;
use expertfind_core::config::EngineConfig;
use expertfind_core::engine::Engine;
use expertfind_core::synthetic::{SyntheticCorpus, SyntheticParams};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub synthetic: SyntheticCorpus,
    pub engine: Arc<Engine>,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config_path(&self) -> String {
        self.path("engine.conf").display().to_string()
    }

    pub fn config(&self) -> EngineConfig {
        load_config(Some(&self.path("engine.conf")), &[]).unwrap()
    }
}

/// Runs the CLI with `args` and returns stdout.
pub fn cli(args: &[&str]) -> expertfind_core::error::Result<String> {
    let mut argv = vec!["expertfind".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    expertfind_cli::run(argv, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

/// A planted-expert corpus generated, indexed and profiled through the CLI.
pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let d = dir.path().display().to_string();
        cli(&["generate-synthetic", &d]).unwrap();
        let conf = format!("{d}/engine.conf");
        cli(&["--config", &conf, "index", "build"]).unwrap();
        cli(&["--config", &conf, "profile", "build"]).unwrap();
        let config = load_config(Some(&dir.path().join("engine.conf")), &[]).unwrap();
        Fixture {
            synthetic: SyntheticCorpus::generate(&SyntheticParams::default()).unwrap(),
            engine: Arc::new(Engine::open(config).unwrap()),
            dir,
        }
    })
}
