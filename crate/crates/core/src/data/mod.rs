//! Image tensors and their file formats, corruption, masks, the caption codec
//! and the bundled corpora.

pub mod caption;
pub mod corpus;
pub mod exemplar;
pub mod mask;
pub mod noise;
pub mod tensor;

pub use caption::{read_captions, Vocabulary, DEFAULT_CAPTION_LEN, PAD_TOKEN};
pub use corpus::{procedural_image, procedural_set, CaptionedCorpus};
pub use exemplar::{ExemplarSet, ModalityLayout};
pub use mask::{make_mask, MaskKind};
pub use noise::{corrupt_gaussian, GaussianNoise, NoiseScale};
pub use tensor::{ImageTensor, Shape, TensorFormat};
