//! Uniform frame sampling with a random first frame.
//!
//! `step = floor(total / want)`, the first frame is drawn uniformly from
//! `[0, max(step, 1))`, and frames follow at `step` intervals. Videos
//! shorter than the request repeat frames `0, 1, .., total-1, 0, ..`.

use crate::error::{FarError, Result};
use crate::rng::SeededRng;

pub const CSV_HEADER: &str = "total,want,step,offset,cycled,indices";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    pub total: usize,
    pub want: usize,
    pub step: usize,
    pub offset: usize,
    /// True when `total < want` and indices wrap modulo `total`.
    pub cycled: bool,
    pub indices: Vec<usize>,
}

impl SamplePlan {
    pub fn csv_row(&self) -> String {
        let idx: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        format!(
            "{},{},{},{},{},{}",
            self.total,
            self.want,
            self.step,
            self.offset,
            self.cycled,
            idx.join(";")
        )
    }
}

pub fn plan_samples(total: usize, want: usize, seed: u64) -> Result<SamplePlan> {
    if total == 0 || want == 0 {
        return Err(FarError::Argument(format!(
            "frame counts must be positive (total={total}, want={want})"
        )));
    }
    let step = total / want;
    let mut rng = SeededRng::new(seed);
    let offset = rng.below(step.max(1) as u64) as usize;
    let cycled = total < want;
    let indices = (0..want)
        .map(|i| if cycled { i % total } else { offset + i * step })
        .collect();
    Ok(SamplePlan {
        total,
        want,
        step,
        offset,
        cycled,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_frames_pick_eight() {
        let p = plan_samples(100, 8, 3).unwrap();
        assert_eq!(p.step, 12);
        assert!(p.offset < 12);
        let want: Vec<usize> = (0..8).map(|i| p.offset + 12 * i).collect();
        assert_eq!(p.indices, want);
        assert!(p.indices.iter().all(|&i| i < 100));
    }

    #[test]
    fn exact_fit() {
        let p = plan_samples(8, 8, 12345).unwrap();
        assert_eq!((p.step, p.offset, p.cycled), (1, 0, false));
        assert_eq!(p.indices, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn short_video_cycles() {
        let p = plan_samples(5, 8, 1).unwrap();
        assert!(p.cycled);
        assert_eq!(p.offset, 0);
        assert_eq!(p.indices, vec![0, 1, 2, 3, 4, 0, 1, 2]);
    }

    #[test]
    fn zero_counts_are_errors() {
        assert!(matches!(plan_samples(0, 8, 0), Err(FarError::Argument(_))));
        assert!(plan_samples(8, 0, 0).is_err());
    }

    #[test]
    fn csv_row_format() {
        let p = plan_samples(4, 2, 0).unwrap();
        assert_eq!(p.csv_row(), format!("4,2,2,{},false,{};{}", p.offset, p.offset, p.offset + 2));
    }

    proptest! {
        #[test]
        fn plan_invariants(total in 1usize..5000, want in 1usize..64, seed: u64) {
            let p = plan_samples(total, want, seed).unwrap();
            prop_assert_eq!(&p, &plan_samples(total, want, seed).unwrap());
            prop_assert_eq!(p.indices.len(), want);
            prop_assert!(p.indices.iter().all(|&i| i < total));
            if total >= want {
                prop_assert!(p.offset < p.step);
                prop_assert!(p.indices.windows(2).all(|w| w[1] == w[0] + p.step));
                prop_assert_eq!(p.indices[0], p.offset);
            }
        }
    }
}
