#![no_main]

use libfuzzer_sys::fuzz_target;
use soco::predict::PredictionTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = PredictionTable::read_csv(data) {
        let mut out = Vec::new();
        table.write_csv(&mut out).unwrap();
        let again = PredictionTable::read_csv(out.as_slice()).unwrap();
        assert_eq!(table.horizon(), again.horizon());
    }
});
