//! Command failures and their process exit codes.

use surfreg::camera::CameraError;
use surfreg::datagen::DatagenError;
use surfreg::geodesic::GeodesicError;
use surfreg::mesh::MeshError;
use surfreg::metrics::MetricError;
use surfreg::pnp::PnpError;
use surfreg::raster::RasterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Missing or malformed input: code 2.
    Input,
    /// Nothing to work with, or a degenerate configuration: code 3.
    Empty,
    /// A numerical method failed: code 4.
    Numerical,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Input => 2,
            Self::Empty => 3,
            Self::Numerical => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Input,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Empty,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }

    /// Prefixes the message with what was being done.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

fn mesh_kind(e: &MeshError) -> ExitKind {
    match e {
        MeshError::EmptyRegion | MeshError::Disconnected { .. } => ExitKind::Empty,
        _ => ExitKind::Input,
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        Self {
            kind: mesh_kind(&e),
            message: e.to_string(),
        }
    }
}

impl From<GeodesicError> for CliError {
    fn from(e: GeodesicError) -> Self {
        let kind = match &e {
            GeodesicError::Mesh(m) => mesh_kind(m),
            GeodesicError::Unreachable { .. } | GeodesicError::DegenerateDistances(_) => {
                ExitKind::Empty
            }
            GeodesicError::TraceFailed { .. } | GeodesicError::Cut { .. } => ExitKind::Numerical,
            _ => ExitKind::Input,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        let kind = match e {
            CameraError::BehindCamera(_) => ExitKind::Empty,
            _ => ExitKind::Input,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<PnpError> for CliError {
    fn from(e: PnpError) -> Self {
        let kind = match e {
            PnpError::TooFewPoints { .. } | PnpError::Degenerate(_) => ExitKind::Empty,
            PnpError::NoConsensus { .. } | PnpError::Numerical(_) => ExitKind::Numerical,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        let kind = match e {
            DatagenError::NothingVisible { .. } => ExitKind::Empty,
            _ => ExitKind::Input,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let kind = match e {
            MetricError::Empty => ExitKind::Empty,
            _ => ExitKind::Input,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}
