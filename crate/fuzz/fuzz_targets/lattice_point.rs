#![no_main]

use homopolymer::lattice::LatticePoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(p) = data.parse::<LatticePoint>() {
        assert_eq!(p.to_string().parse::<LatticePoint>().unwrap(), p);
    }
});
