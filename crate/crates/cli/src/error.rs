use std::path::PathBuf;

use dlcz_core::config::ConfigError;
use dlcz_core::detection::DetectionError;
use dlcz_core::entanglement::EntanglementError;
use dlcz_core::protocol::ProtocolError;
use dlcz_core::tomography::TomographyError;
use thiserror::Error;

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTEGRITY: u8 = 3;
pub const EXIT_FIT: u8 = 4;
pub const EXIT_UNPHYSICAL: u8 = 5;

pub const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success
  1  file could not be read or written
  2  bad arguments or configuration
  3  record data failed parsing or integrity checks
  4  a fit or inversion failed
  5  estimate is unphysical";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io { .. } => EXIT_IO,
            Self::Config(_) | Self::Usage(_) => EXIT_USAGE,
            Self::Detection(e) => detection_code(e),
            Self::Tomography(e) => tomography_code(e),
            Self::Entanglement(e) => entanglement_code(e),
            Self::Protocol(e) => match e {
                ProtocolError::Detection(d) => detection_code(d),
                ProtocolError::HeraldTooRare(_) => EXIT_FIT,
                ProtocolError::Fock(_) | ProtocolError::Parameter { .. } => EXIT_USAGE,
            },
        }
    }
}

fn detection_code(e: &DetectionError) -> u8 {
    use DetectionError::*;
    match e {
        Io(_) => EXIT_IO,
        Integrity(_) | Parse { .. } | PatternLength { .. } | BadPattern(_) | ZeroTrials | UnknownDetector(_) => {
            EXIT_INTEGRITY
        }
        ZeroProbability { .. } | InvalidProbabilities(_) => EXIT_FIT,
        _ => EXIT_USAGE,
    }
}

fn tomography_code(e: &TomographyError) -> u8 {
    use TomographyError::*;
    match e {
        Detection(d) => detection_code(d),
        NoData(_) | BadClasses(_) | ZeroRetained(_) => EXIT_INTEGRITY,
        Singular(_) | IllPosed(_) | DataQuality(_) | NotConverged { .. } => EXIT_FIT,
        Inconsistent { .. } => EXIT_UNPHYSICAL,
        Fock(_) | Option(_) => EXIT_USAGE,
    }
}

fn entanglement_code(e: &EntanglementError) -> u8 {
    use EntanglementError::*;
    match e {
        Tomography(t) => tomography_code(t),
        Unphysical(_) | InvalidState(_) | Fock(_) => EXIT_UNPHYSICAL,
        ZeroDenominator(_) => EXIT_FIT,
        Budget(_) => EXIT_USAGE,
        Csv(_) => EXIT_IO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrity_and_fit_failures_differ() {
        let integrity = CliError::from(DetectionError::Integrity("x".into()));
        let nested = CliError::from(TomographyError::Detection(DetectionError::Parse { line: 3, message: "x".into() }));
        let fit = CliError::from(TomographyError::IllPosed("x".into()));
        assert_eq!(integrity.exit_code(), EXIT_INTEGRITY);
        assert_eq!(nested.exit_code(), EXIT_INTEGRITY);
        assert_eq!(fit.exit_code(), EXIT_FIT);
        let unphysical = CliError::from(EntanglementError::Unphysical("x".into()));
        assert_eq!(unphysical.exit_code(), EXIT_UNPHYSICAL);
    }
}
