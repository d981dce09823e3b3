#![no_main]
use libfuzzer_sys::fuzz_target;
use rydberg_reservoir::pipeline::{read_dataset_csv, write_dataset_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_dataset_csv(data, 1) {
        let mut out = Vec::new();
        write_dataset_csv(&ds, &mut out).unwrap();
        let back = read_dataset_csv(&out[..], 1).unwrap();
        assert_eq!(back.targets, ds.targets);
        assert_eq!(back.ks, ds.ks);
    }
});
