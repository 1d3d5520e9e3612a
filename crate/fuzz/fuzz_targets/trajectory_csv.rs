#![no_main]

use libfuzzer_sys::fuzz_target;
use mixtraffic::TrajectoryRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = TrajectoryRecord::read_csv(data) {
        // anything accepted must write back out and parse again
        let text = record.to_csv_string();
        let again = TrajectoryRecord::read_csv(text.as_bytes()).expect("re-read own output");
        assert_eq!(again.rows.len(), record.rows.len());
    }
});
