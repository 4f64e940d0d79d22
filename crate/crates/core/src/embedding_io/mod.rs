//! Embedding interchange formats, class vectors, partitions and the synthetic
//! benchmark.

pub mod partitions;
pub mod records;
pub mod stats;
pub mod synth;

pub use partitions::{
    builtin_partition, builtin_partitions, dataset_labels, known_datasets, load_partition, write_partition,
    PartitionSpec,
};
pub use records::{
    class_vector, load_class_table, load_feature_table, load_feature_table_binary, tokenize, write_class_table,
    write_feature_table, write_feature_table_binary, ClassEmbedding, ClassTable, EmbeddingRecord, FeatureTable,
    WordLookup,
};
pub use stats::{dataset_stats, DatasetStats};
pub use synth::{synth_benchmark, SynthBenchmark, SynthConfig};
