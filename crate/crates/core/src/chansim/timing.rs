use std::time::Instant;

use super::{mix, BlockSetup, SimError};
use crate::codec::decode_block;
use crate::codeparams::ImportanceClass;

/// Leading share of runs dropped as warm-up.
pub const WARMUP_FRACTION: f64 = 0.05;

const MIN_RUNS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTiming {
    pub class: ImportanceClass,
    pub mean_encode_ns: f64,
    pub mean_decode_ns: f64,
}

impl ClassTiming {
    pub fn mean_total_ns(&self) -> f64 {
        self.mean_encode_ns + self.mean_decode_ns
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub k: u32,
    pub runs: usize,
    pub discarded: usize,
    pub lib: ClassTiming,
    pub mib: ClassTiming,
}

impl TimingReport {
    /// Percentage by which MIB encode + decode time exceeds LIB.
    pub fn pct_increase(&self) -> f64 {
        (self.mib.mean_total_ns() / self.lib.mean_total_ns() - 1.0) * 100.0
    }
}

/// Mean encode and decode wall time per class on a lossless channel (the
/// decoder gets exactly the K source symbols).
///
/// Runs on the calling thread. Each run times both classes on the same
/// source data, alternating which class goes first.
pub fn measure_timing(
    setup: &BlockSetup,
    runs: usize,
    seed: u64,
) -> Result<TimingReport, SimError> {
    if runs < MIN_RUNS {
        return Err(SimError::TooFewTimingRuns {
            min: MIN_RUNS,
            got: runs,
        });
    }
    let discarded = (runs as f64 * WARMUP_FRACTION).ceil() as usize;
    // [class][encode, decode]
    let mut totals = [[0u128; 2]; 2];
    for run in 0..runs {
        let order = if run % 2 == 0 {
            [ImportanceClass::Lib, ImportanceClass::Mib]
        } else {
            [ImportanceClass::Mib, ImportanceClass::Lib]
        };
        let data_seed = mix(seed, run as u64);
        for class in order {
            let params = setup.params(class);
            let block = setup.random_block(class, data_seed);
            let start = Instant::now();
            let c = setup
                .encoder(class)
                .encode(&block, setup.solver())
                .expect("systematic index gives a full-rank encoding");
            let encode = start.elapsed().as_nanos();
            let start = Instant::now();
            let decoded =
                decode_block(block.symbols(), params, setup.solver()).expect("lossless decode");
            let decode = start.elapsed().as_nanos();
            assert_eq!(c.c.len(), params.l as usize);
            assert!(decoded
                .iter()
                .zip(block.symbols())
                .all(|(d, s)| d == &s.data));
            if run >= discarded {
                let slot = &mut totals[class as usize];
                slot[0] += encode;
                slot[1] += decode;
            }
        }
    }
    let kept = (runs - discarded) as f64;
    let summary = |class: ImportanceClass| {
        let [e, d] = totals[class as usize];
        ClassTiming {
            class,
            mean_encode_ns: e as f64 / kept,
            mean_decode_ns: d as f64 / kept,
        }
    };
    Ok(TimingReport {
        k: setup.k(),
        runs,
        discarded,
        lib: summary(ImportanceClass::Lib),
        mib: summary(ImportanceClass::Mib),
    })
}

pub const TIMING_CSV_HEADER: [&str; 5] = [
    "K",
    "class",
    "mean_encode_ns",
    "mean_decode_ns",
    "pct_increase",
];

/// Two rows per report; the LIB row is the baseline and has `NA` increase.
pub fn timing_csv(reports: &[TimingReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TIMING_CSV_HEADER).expect("in-memory write");
    for r in reports {
        for (t, pct) in [
            (r.lib, "NA".to_string()),
            (r.mib, format!("{:.3}", r.pct_increase())),
        ] {
            w.write_record([
                r.k.to_string(),
                t.class.to_string(),
                format!("{:.0}", t.mean_encode_ns),
                format!("{:.0}", t.mean_decode_ns),
                pct,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codeparams::ProfileSet;
    use crate::matrixgen::GaussianSolver;
    use std::sync::Arc;

    #[test]
    fn timing_report_and_csv() {
        let setup =
            BlockSetup::new(55, &ProfileSet::shipped(), Arc::new(GaussianSolver), 4).unwrap();
        assert!(measure_timing(&setup, 10, 0).is_err());
        let r = measure_timing(&setup, 100, 0).unwrap();
        assert_eq!(r.discarded, 5);
        assert!(r.lib.mean_encode_ns > 0.0 && r.mib.mean_decode_ns > 0.0);
        let csv = timing_csv(&[r]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "K,class,mean_encode_ns,mean_decode_ns,pct_increase"
        );
        assert!(lines[1].starts_with("55,LIB,") && lines[1].ends_with(",NA"));
        assert!(lines[2].starts_with("55,MIB,"));
    }
}
