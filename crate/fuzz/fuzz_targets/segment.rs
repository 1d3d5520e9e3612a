#![no_main]

use libfuzzer_sys::fuzz_target;
use mixtraffic::segmentation::{segment_record, SegmentationConfig};
use mixtraffic::TrajectoryRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = TrajectoryRecord::read_csv(data) {
        for seg in segment_record(&record, 0.0, &SegmentationConfig::default()) {
            for s in &seg.segments {
                assert!(s.s_start <= s.s_end, "inverted segment {s:?}");
            }
        }
    }
});
