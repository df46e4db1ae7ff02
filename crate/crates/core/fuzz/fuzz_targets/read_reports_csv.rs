#![no_main]

use libfuzzer_sys::fuzz_target;
use soco::bench::{read_reports_csv, summarize, write_reports_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_reports_csv(data) {
        let _ = summarize(&rows);
        let mut out = Vec::new();
        write_reports_csv(rows.iter(), &mut out).unwrap();
        let again = read_reports_csv(out.as_slice()).unwrap();
        assert_eq!(rows.len(), again.len());
    }
});
