pub mod estimate;
pub mod optimize;
pub mod oracle;
pub mod validate;
