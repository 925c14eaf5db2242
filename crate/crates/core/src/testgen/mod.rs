//! Source and follow-up test case generation.

mod case;
mod suite;

pub use self::case::{
    params_for, MrId, TcId, TestCaseDescriptor, TransformParams, BLUR_DIRECTIONS,
    EXPOSURE_GAMMAS,
};
pub use self::suite::{
    build_suite, gen_blur_tcs, gen_exposure_tcs, gen_finger_tcs, gen_tc1, materialize_or_reuse,
    materialize_suite, sample_cases, MaterializedSuite, Preprocess, Sample, SuiteCase,
    SuiteConfig, SuiteIndex, TestSuite, SUITE_INDEX_FILE,
};
