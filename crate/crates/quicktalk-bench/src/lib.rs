//! Benchmark-only crate; see benches/protocol.rs.
