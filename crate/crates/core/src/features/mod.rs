pub mod chars;
pub mod paragraph;
pub mod stats;
pub mod words;
