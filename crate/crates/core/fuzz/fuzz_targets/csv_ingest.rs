#![no_main]
use libfuzzer_sys::fuzz_target;
use rydberg_reservoir::signals::{export_csv, ingest_csv_reader, CsvOptions, EXPORT_VALUE_COLUMN};

fuzz_target!(|data: &[u8]| {
    let Ok(ingest) = ingest_csv_reader(data, &CsvOptions::column("value"), "fuzz") else {
        return;
    };
    // Exported series must read back unchanged.
    let mut out = Vec::new();
    export_csv(&ingest.series, &mut out).unwrap();
    let back = ingest_csv_reader(&out[..], &CsvOptions::column(EXPORT_VALUE_COLUMN), "fuzz").unwrap();
    assert_eq!(back.series.values, ingest.series.values);
});
