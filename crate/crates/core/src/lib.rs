pub mod conllu;
pub mod construction;
pub mod dep;
pub mod lexicon;
pub mod pipeline;
pub mod prompt;

#[cfg(feature = "testkit")]
pub mod testkit;
