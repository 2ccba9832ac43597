pub mod analyze;
pub mod chunk;
pub mod evaluate;
pub mod export;
pub mod generate;
pub mod head2head;
pub mod ingest;
pub mod judge;
pub mod report;
pub mod sample;
pub mod synth;
