//! Online-to-batch conversion: an online learner's plays `z_k` are mixed into
//! iterates `x_k = (1 - alpha_k) x_{k-1} + alpha_k z_k` and the learner is fed
//! the gradient scaled by `alpha_k pi_k`.

mod conversion;
mod record;
mod schedule;

pub use conversion::{run_conversion, run_conversion_quasar, LearnerSpec, ZetaMode, RESCALE_THRESHOLD};
pub(crate) use record::Clock;
pub use record::{RunOptions, RunRecord, TracePolicy, TraceRow};
pub use schedule::{PiRecursion, Schedule, ScheduleKind};
