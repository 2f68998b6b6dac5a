#![no_main]

use cosparse::operator::AnalysisOperator;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(op) = AnalysisOperator::parse(text) {
            let again = AnalysisOperator::parse(&op.to_text(false)).expect("own output parses");
            assert_eq!(again.matrix(), op.matrix());
        }
    }
});
