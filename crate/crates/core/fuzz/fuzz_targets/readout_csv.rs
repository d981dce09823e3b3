#![no_main]
use libfuzzer_sys::fuzz_target;
use rydberg_reservoir::pipeline::{read_readout_csv, write_readout_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = read_readout_csv(data) {
        let mut out = Vec::new();
        write_readout_csv(&model, &mut out).unwrap();
        assert_eq!(read_readout_csv(&out[..]).unwrap(), model);
    }
});
