pub mod anm;
pub mod linalg;
pub mod signal;
pub mod retrieval;
pub mod certificate;
pub mod l21;
pub mod experiments;
