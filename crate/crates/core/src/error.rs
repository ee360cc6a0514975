use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),

    #[error("missing frame file: {0}")]
    MissingFrame(PathBuf),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("frame {index}: rgb is {rgb_width}x{rgb_height} but depth is {depth_width}x{depth_height}")]
    RegistrationMismatch {
        index: usize,
        rgb_width: usize,
        rgb_height: usize,
        depth_width: usize,
        depth_height: usize,
    },

    #[error("frame {index} is {width}x{height}, sequence frames are {expected_width}x{expected_height}")]
    FrameSizeMismatch {
        index: usize,
        width: usize,
        height: usize,
        expected_width: usize,
        expected_height: usize,
    },

    #[error("frame index {index} out of range 1..={count}")]
    FrameOutOfRange { index: usize, count: usize },

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("depth frame has no valid pixels")]
    AllHoles,

    #[error("frame {index} has {holes} depth holes; in-paint it first")]
    DepthHoles { index: usize, holes: usize },

    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),

    #[error("empty mask")]
    EmptyMask,

    #[error("region does not intersect the {width}x{height} image")]
    EmptyIntersection { width: usize, height: usize },

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("no ground-truth instances to evaluate against")]
    NoGroundTruth,

    #[error("invalid annotations: {0}")]
    Annotation(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}
