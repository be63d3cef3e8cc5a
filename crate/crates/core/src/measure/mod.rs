//! Measurement engine: trace buffers, the return-address hash chain,
//! critical variable integrity state, attestation blobs, and signing
//! keys.

pub mod blob;
pub mod cvi;
pub mod hash;
pub mod keys;
pub mod session;
pub mod trace;

pub use blob::{Blob, BlobFile, CodecError, CviRecord, Nonce, SubBlob, BLOB_VERSION, NONCE_LEN, SEGMENT_CAPACITY};
pub use cvi::{Adjusted, Bounds, CviState};
pub use hash::{hash_chain, hash_update, ReturnHash, INITIAL_HASH};
pub use session::MeasurementSession;
pub use trace::{BitTrace, Traces};
