#![no_main]
use libfuzzer_sys::fuzz_target;
use rydberg_reservoir::experiments::ExperimentConfig;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let again = ExperimentConfig::parse(&cfg.serialize()).expect("serialized config parses");
        assert_eq!(cfg, again);
        let _ = cfg.validate();
    }
});
