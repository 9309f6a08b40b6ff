use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Real;

type PlanKey = (TypeId, usize, bool);

thread_local! {
    static PLANS: RefCell<HashMap<PlanKey, Box<dyn Any>>> = RefCell::new(HashMap::new());
}

fn plan<R: Real>(len: usize, inverse: bool) -> Arc<dyn Fft<R>> {
    PLANS.with(|cell| {
        let mut cache = cell.borrow_mut();
        let entry = cache
            .entry((TypeId::of::<R>(), len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::<R>::new();
                let fft = if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                };
                Box::new(fft)
            });
        entry
            .downcast_ref::<Arc<dyn Fft<R>>>()
            .expect("plan cache keyed by scalar type")
            .clone()
    })
}

/// Unnormalised in-place transform of a `[len; dim]` row-major array,
/// one axis at a time.
pub(crate) fn transform_nd<R: Real>(data: &mut [Complex<R>], len: usize, dim: usize, inverse: bool) {
    debug_assert_eq!(data.len(), len.pow(dim as u32));
    let fft = plan::<R>(len, inverse);
    let mut line = vec![Complex::new(R::zero(), R::zero()); len];
    let mut scratch = vec![Complex::new(R::zero(), R::zero()); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = len.pow((dim - 1 - axis) as u32);
        let outer = data.len() / (len * stride);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * len * stride + i;
                if stride == 1 {
                    fft.process_with_scratch(&mut data[base..base + len], &mut scratch);
                    continue;
                }
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, value) in line.iter().enumerate() {
                    data[base + k * stride] = *value;
                }
            }
        }
    }
}
