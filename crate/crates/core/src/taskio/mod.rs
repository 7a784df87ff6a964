//! Task storage and generation: the binary container, mask downsampling,
//! synthetic tasks and episode sampling from a dataset index.

pub mod container;
pub mod episodes;
pub mod mask;
pub mod synth;
pub mod tasks;

pub use container::{read_container, write_container, ArrayData, ContainerError, ContainerFile, DType, NamedArray};
pub use episodes::{sample_episodes, DatasetIndex, EpisodeSampler, IndexRecord};
pub use mask::downsample_mask;
pub use synth::{synth_task, SynthConfig};
pub use tasks::{read_task, task_from_container, task_to_container, write_task};
