//! Process exit codes: 0 success, 1 I/O, 2 invalid input or configuration,
//! 3 numerical failure.

use fmd_core::augment::AugmentError;
use fmd_core::embed::EmbedError;
use fmd_core::frechet::FrechetError;
use fmd_core::pipeline::PipelineError;

pub const IO: u8 = 1;
pub const INVALID_INPUT: u8 = 2;
pub const NUMERICAL: u8 = 3;

fn frechet_code(e: &FrechetError) -> u8 {
    match e {
        FrechetError::NotSymmetric { .. }
        | FrechetError::NotPsd { .. }
        | FrechetError::EigenFailure
        | FrechetError::NumericalFailure(_) => NUMERICAL,
        _ => INVALID_INPUT,
    }
}

/// The first cause in the chain that has a known classification decides.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        match cause.downcast_ref::<PipelineError>() {
            Some(PipelineError::Frechet(e)) => return frechet_code(e),
            Some(PipelineError::Embed(EmbedError::Io { .. })) => return IO,
            Some(_) => return INVALID_INPUT,
            None => {}
        }
        if let Some(e) = cause.downcast_ref::<FrechetError>() {
            return frechet_code(e);
        }
        if let Some(EmbedError::Io { .. }) = cause.downcast_ref::<EmbedError>() {
            return IO;
        }
        if let Some(AugmentError::Io { .. }) = cause.downcast_ref::<AugmentError>() {
            return IO;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
    }
    INVALID_INPUT
}
