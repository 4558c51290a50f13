//! Audio and video feature extraction, interference mixing, ground-truth
//! labelling and the synthetic two-view generator.

pub mod audio;
pub mod context;
pub mod framing;
pub mod labels;
pub mod mfcc;
pub mod mixing;
pub mod synth;
pub mod video;

pub use audio::{load_wav, write_wav, SampleBuffer, WavOptions};
pub use context::context_concat;
pub use framing::{frame_count, frame_signal, FrameSpec};
pub use labels::{frame_energies, label_ground_truth, read_labels, write_labels};
pub use mfcc::{mfcc_features, Mfcc, MfccConfig};
pub use mixing::{mix_interference, measured_snr_db, MixOutput};
pub use synth::{synth_multiview, SynthConfig, SynthData};
pub use video::load_video_features;
